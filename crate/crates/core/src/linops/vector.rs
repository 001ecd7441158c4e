//! Small dense vector kernels. Accumulation is always in ascending index order.

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += a * x
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub fn scale_in_place(a: f64, x: &mut [f64]) {
    for v in x {
        *v *= a;
    }
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn has_nan(x: &[f64]) -> bool {
    x.iter().any(|v| v.is_nan())
}

/// ‖x − y‖₂ / ‖y‖₂, falling back to the absolute difference when y = 0.
pub fn relative_difference(x: &[f64], y: &[f64]) -> f64 {
    let diff = norm2(&sub(x, y));
    let base = norm2(y);
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

pub fn concat(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    out.extend_from_slice(x);
    out.extend_from_slice(y);
    out
}
