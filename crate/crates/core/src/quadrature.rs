//! Deterministic adaptive Simpson quadrature on compact intervals.

use serde::Serialize;

use crate::error::{Error, Result};

/// A compact interval `[lo, hi]` with finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Invalid(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    /// Symmetric interval `[-r, r]`.
    pub fn centered(r: f64) -> Self {
        Interval { lo: -r, hi: r }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Image of the interval under `x -> (x - shift) / scale`, i.e. the set of
    /// `x` with `scale * x + shift` inside `self`.
    pub fn preimage_affine(&self, scale: f64, shift: f64) -> Interval {
        let a = (self.lo - shift) / scale;
        let b = (self.hi - shift) / scale;
        Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// Largest absolute endpoint.
    pub fn radius(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Tolerance and depth limit for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            max_depth: 40,
        }
    }
}

impl QuadConfig {
    pub fn new(abs_tol: f64, max_depth: u32) -> Result<Self> {
        if !(abs_tol > 0.0) || max_depth < 1 {
            return Err(Error::Invalid(format!(
                "quadrature config needs abs_tol > 0 and max_depth >= 1 (got {abs_tol}, {max_depth})"
            )));
        }
        Ok(QuadConfig { abs_tol, max_depth })
    }

    pub fn with_tol(self, abs_tol: f64) -> Self {
        QuadConfig { abs_tol, ..self }
    }
}

/// Panels are always bisected at least this many times before the error
/// test is trusted, so narrow features cannot hide between the first samples.
const MIN_DEPTH: u32 = 4;

/// Relative size of |S2 - S1| below which the difference is rounding noise.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Integrates `f` over `iv` to absolute tolerance `cfg.abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, iv: Interval, cfg: &QuadConfig) -> Result<f64> {
    integrate_split(f, iv, &[], cfg)
}

/// Like [`integrate`], but first splits `iv` at every breakpoint strictly
/// inside it. The tolerance is shared out in proportion to panel length.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    iv: Interval,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    if iv.is_degenerate() {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > iv.lo && *b < iv.hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(iv.lo);
    edges.extend(cuts);
    edges.push(iv.hi);

    let total = iv.len();
    let mut sum = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let tol = cfg.abs_tol * (b - a) / total;
        sum += simpson_panel(&f, a, b, tol, cfg.max_depth)?;
    }
    Ok(sum)
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    max_depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let h = b - a;
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::NonFinite { lo: a, hi: b });
    }

    if depth >= MIN_DEPTH {
        let scale = h / 12.0 * (fa.abs() + 4.0 * flm.abs() + 2.0 * fm.abs() + 4.0 * frm.abs() + fb.abs());
        // rounded midpoints perturb the panel widths by about one ulp of |x|
        let spread = 1.0 + a.abs().max(b.abs()) / h;
        if delta.abs() <= 15.0 * tol || delta.abs() <= ROUNDOFF * spread * scale {
            return Ok(left + right + delta / 15.0);
        }
        // Panel no longer resolvable in floating point.
        if lm <= a || rm >= b {
            return Ok(left + right);
        }
    }
    if depth >= max_depth {
        return Err(Error::DepthExceeded {
            lo: a,
            hi: b,
            max_depth,
        });
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, max_depth)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, max_depth)?;
    Ok(l + r)
}
