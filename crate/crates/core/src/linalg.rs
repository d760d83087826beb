//! Small dense vector helpers. Everything here is desk scale (n <= 4ish),
//! so plain slices beat pulling in a matrix crate.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

pub fn scale(k: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| k * x).collect()
}

/// y += k * x
pub fn axpy(y: &mut [f64], k: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// Euclidean projection onto the probability simplex { w >= 0, sum w = 1 }.
///
/// Sort-based algorithm; exact up to rounding for the small simplices used
/// in convex-combination searches.
pub fn project_simplex(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    if n == 1 {
        return vec![1.0];
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if v - t > 0.0 {
            rho = k;
            theta = t;
        }
    }
    let _ = rho;
    w.iter().map(|&v| (v - theta).max(0.0)).collect()
}
