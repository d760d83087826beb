//! Report rendering. Key-value mode emits line-oriented `key=value` with
//! stable keys and deterministic ordering, so identical inputs produce
//! byte-identical reports; text mode prints the same content with a little
//! more air.

use crate::args::Format;

pub struct Report {
    format: Format,
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new(format: Format, command: &str) -> Self {
        let mut r = Report {
            format,
            lines: Vec::new(),
        };
        r.push("command", command);
        r
    }

    pub fn push(&mut self, key: &str, value: impl AsRef<str>) {
        self.lines.push((key.to_string(), value.as_ref().to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn push_vec(&mut self, key: &str, value: &[f64]) {
        self.push(key, fmt_vec(value));
    }

    pub fn push_bool(&mut self, key: &str, value: bool) {
        self.push(key, if value { "true" } else { "false" });
    }

    pub fn print(&self) {
        match self.format {
            Format::Kv => {
                for (k, v) in &self.lines {
                    println!("{k}={v}");
                }
            }
            Format::Text => {
                for (k, v) in &self.lines {
                    println!("{k:32} {v}");
                }
            }
        }
    }
}

/// Shortest round-trip formatting with negative zero normalized away.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

pub fn fmt_vec(xs: &[f64]) -> String {
    xs.iter()
        .map(fmt_f64_ref)
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_f64_ref(x: &f64) -> String {
    fmt_f64(*x)
}
