//! Grid evaluation of the seminorms on smooth functions and kernel families.
//!
//! All sups are taken over nested grids, so they are lower bounds that never
//! decrease when the grid density doubles.

use std::sync::Arc;

use serde::Serialize;

use crate::distribution::{FunctionFamily, SmoothingDefect};
use crate::error::{Error, Result};
use crate::expr::SmoothExpr;
use crate::mollifier::KernelSpec;
use crate::quadrature::{Interval, QuadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub points_per_unit: u32,
}

impl GridSpec {
    pub const DEFAULT_X: GridSpec = GridSpec { points_per_unit: 512 };
    pub const DEFAULT_Y: GridSpec = GridSpec { points_per_unit: 1024 };

    pub fn new(points_per_unit: u32) -> Result<Self> {
        if points_per_unit < 16 {
            return Err(Error::Invalid(format!("grid density {points_per_unit} is below 16")));
        }
        Ok(GridSpec { points_per_unit })
    }

    /// `lo + i / ppu` for every such point below `hi`, then `hi`.
    pub fn points(&self, iv: Interval) -> Vec<f64> {
        let ppu = self.points_per_unit as f64;
        let n = ((iv.hi - iv.lo) * ppu).ceil() as usize;
        let mut out: Vec<f64> = (0..n).map(|i| iv.lo + i as f64 / ppu).take_while(|x| *x < iv.hi).collect();
        out.push(iv.hi);
        out
    }
}

/// `max_{x in grid(K), j <= m} |f^(j)(x)|`.
pub fn norm_f(f: &SmoothExpr, k: Interval, m: u32, g: GridSpec) -> f64 {
    let xs = g.points(k);
    let mut d = f.clone();
    let mut best: f64 = 0.0;
    for j in 0..=m {
        if j > 0 {
            d = d.derive();
        }
        best = xs.iter().fold(best, |b, &x| b.max(d.eval(x).abs()));
    }
    best
}

/// Grid sup of `|∂_x^α ∂_y^β K_eps(x, y)|` over `x in K`, `y in L`, `α <= m`,
/// `β <= l`. The y-grid sits on the kernel support with `gy` points per unit
/// of `(y - x) / eps`.
#[allow(clippy::too_many_arguments)]
pub fn norm_kernel(
    spec: &KernelSpec,
    eps: f64,
    k: Interval,
    m: u32,
    l_iv: Interval,
    l: u32,
    gx: GridSpec,
    gy: GridSpec,
) -> Result<f64> {
    let kernel = spec.at(eps)?;
    let ks = kernel.support();
    // K(x, y) = k(y - x), so ∂_x^α ∂_y^β K = (-1)^α k^(α+β)(y - x)
    let zs = gy.points(Interval {
        lo: ks.lo / eps,
        hi: ks.hi / eps,
    });
    let ws: Vec<f64> = zs.iter().map(|z| z * eps).collect();
    let mut tables = Vec::with_capacity((m + l + 1) as usize);
    let mut d = kernel.profile().clone();
    for j in 0..=m + l {
        if j > 0 {
            d = d.derive();
        }
        tables.push(ws.iter().map(|&w| d.eval(w).abs()).collect::<Vec<f64>>());
    }
    let full: f64 = tables.iter().flatten().fold(0.0, |a, &b| a.max(b));
    let mut best: f64 = 0.0;
    for x in gx.points(k) {
        if l_iv.lo <= x + ks.lo && x + ks.hi <= l_iv.hi {
            best = best.max(full);
            continue;
        }
        for (i, &w) in ws.iter().enumerate() {
            if l_iv.contains(x + w) {
                for t in &tables {
                    best = best.max(t[i]);
                }
            }
        }
    }
    Ok(best)
}

/// Grid sup over `x in K`, `α <= c`, `f in B` of
/// `|<f, ∂_x^α K_eps(x, .)> - f^(α)(x)|`.
pub fn norm_gap(
    spec: &KernelSpec,
    eps: f64,
    k: Interval,
    c: u32,
    family: &FunctionFamily,
    gx: GridSpec,
    cfg: &QuadConfig,
) -> Result<f64> {
    let kernel = Arc::new(spec.at(eps)?);
    let xs = gx.points(k);
    let mut best: f64 = 0.0;
    for member in family.members() {
        for alpha in 0..=c {
            let defect = SmoothingDefect::new(member, &kernel, alpha, cfg);
            for &x in &xs {
                best = best.max(defect.at(x)?.abs());
            }
        }
    }
    Ok(best)
}

/// A monomial `coeff * Π y_i^{y[i]} * Π z_i^{z[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub coeff: f64,
    pub y: Vec<u32>,
    pub z: Vec<u32>,
}

/// A polynomial with nonnegative coefficients in `y_0..y_k, z_0..z_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosPolynomial {
    monomials: Vec<Monomial>,
}

impl PosPolynomial {
    pub fn new(monomials: Vec<Monomial>) -> Result<Self> {
        if let Some(m) = monomials.iter().find(|m| !(m.coeff >= 0.0 && m.coeff.is_finite())) {
            return Err(Error::Invalid(format!("coefficient {} is not a finite nonnegative number", m.coeff)));
        }
        Ok(PosPolynomial { monomials })
    }

    /// `c * y_0^a * z_0^b`.
    pub fn gap_bound(c: f64, a: u32, b: u32) -> Result<Self> {
        Self::new(vec![Monomial {
            coeff: c,
            y: vec![a],
            z: vec![b],
        }])
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn eval(&self, y: &[f64], z: &[f64]) -> f64 {
        let pw = |vals: &[f64], exps: &[u32]| -> f64 {
            exps.iter()
                .enumerate()
                .filter(|(_, e)| **e > 0)
                .map(|(i, e)| vals.get(i).copied().unwrap_or(0.0).powi(*e as i32))
                .product()
        };
        self.monomials.iter().map(|m| m.coeff * pw(y, &m.y) * pw(z, &m.z)).sum()
    }

    fn live(&self) -> impl Iterator<Item = &Monomial> {
        self.monomials.iter().filter(|m| m.coeff > 0.0)
    }

    fn fits(&self, k: usize) -> bool {
        self.live().all(|m| {
            let used = |e: &[u32]| e.iter().rposition(|p| *p > 0).map_or(0, |i| i + 1);
            used(&m.y) <= k + 1 && used(&m.z) <= k + 1
        })
    }
}

/// Membership in the semiring of polynomials in `y_0..y_k` alone.
pub fn in_pk(lambda: &PosPolynomial, k: usize) -> bool {
    lambda.fits(k) && lambda.live().all(|m| m.z.iter().all(|e| *e == 0))
}

/// `λ(y, 0) = 0`: every monomial carries a positive power of some `z_i`.
pub fn in_ik(lambda: &PosPolynomial, k: usize) -> bool {
    lambda.fits(k) && lambda.live().all(|m| m.z.iter().any(|e| *e > 0))
}
