//! Dense univariate polynomials stored as ascending coefficient vectors.

pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}

pub fn derivative_n(coeffs: &[f64], n: u32) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    for _ in 0..n {
        out = derivative(&out);
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ca) in a.iter().enumerate() {
        for (j, &cb) in b.iter().enumerate() {
            out[i + j] += ca * cb;
        }
    }
    out
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|c| c * s).collect()
}

/// Drops trailing zero coefficients.
pub fn trim(mut a: Vec<f64>) -> Vec<f64> {
    while a.last() == Some(&0.0) {
        a.pop();
    }
    a
}

pub fn is_zero(a: &[f64]) -> bool {
    a.iter().all(|&c| c == 0.0)
}

/// Degree of the polynomial, `None` for the zero polynomial.
pub fn degree(a: &[f64]) -> Option<usize> {
    a.iter().rposition(|&c| c != 0.0)
}

/// Coefficients of `p(x + h)` as a polynomial in `x`.
pub fn shift(a: &[f64], h: f64) -> Vec<f64> {
    // Horner in polynomial arithmetic: p(x+h) = (...((c_n)(x+h) + c_{n-1})(x+h) ...)
    let lin = [h, 1.0];
    let mut out: Vec<f64> = Vec::new();
    for &c in a.iter().rev() {
        out = add(&mul(&out, &lin), &[c]);
    }
    out
}
