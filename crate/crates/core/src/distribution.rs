//! The distribution catalog, pairings, and regularization against kernels.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::SmoothExpr;
use crate::mollifier::ScaledKernel;
use crate::poly;
use crate::quadrature::{integrate_split, Interval, QuadConfig};

/// One polynomial piece on `(lo, hi)`; the bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn new(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        Piece {
            lo,
            hi,
            coeffs: poly::trim(coeffs),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Piecewise polynomial covering the whole line; gaps in the input are
/// filled with zero pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewisePoly {
    pieces: Vec<Piece>,
}

impl PiecewisePoly {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            if p.lo.is_nan() || p.hi.is_nan() || !(p.lo < p.hi) || p.lo == f64::INFINITY || p.hi == f64::NEG_INFINITY {
                return Err(Error::Invalid(format!("bad piece bounds ({}, {})", p.lo, p.hi)));
            }
            if p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Invalid("piece coefficients must be finite".into()));
            }
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut out: Vec<Piece> = Vec::with_capacity(pieces.len() + 2);
        let mut cursor = f64::NEG_INFINITY;
        for p in pieces {
            if p.lo < cursor {
                return Err(Error::Invalid(format!("pieces overlap near {}", p.lo)));
            }
            if p.lo > cursor {
                out.push(Piece::new(cursor, p.lo, vec![]));
            }
            cursor = p.hi;
            out.push(p);
        }
        if cursor < f64::INFINITY {
            out.push(Piece::new(cursor, f64::INFINITY, vec![]));
        }
        Ok(PiecewisePoly { pieces: out })
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        PiecewisePoly {
            pieces: vec![Piece::new(f64::NEG_INFINITY, f64::INFINITY, coeffs.to_vec())],
        }
    }

    pub fn heaviside(at: f64) -> Self {
        PiecewisePoly {
            pieces: vec![
                Piece::new(f64::NEG_INFINITY, at, vec![]),
                Piece::new(at, f64::INFINITY, vec![1.0]),
            ],
        }
    }

    /// `|x|`.
    pub fn abs() -> Self {
        PiecewisePoly {
            pieces: vec![
                Piece::new(f64::NEG_INFINITY, 0.0, vec![0.0, -1.0]),
                Piece::new(0.0, f64::INFINITY, vec![0.0, 1.0]),
            ],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// The single polynomial, when there is only one piece.
    pub fn as_polynomial(&self) -> Option<&[f64]> {
        match self.pieces.as_slice() {
            [p] => Some(&p.coeffs),
            _ => None,
        }
    }

    /// Right-continuous piece lookup.
    pub fn piece_at(&self, x: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.hi <= x);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        poly::eval(&self.piece_at(x).coeffs, x)
    }

    /// `p^(j)(x)` using the piece to the right of any breakpoint.
    pub fn eval_deriv(&self, x: f64, j: u32) -> f64 {
        poly::eval(&poly::derivative_n(&self.piece_at(x).coeffs, j), x)
    }

    /// Finite piece endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lo).collect()
    }

    /// Hull of the nonzero pieces; `None` when one of them is unbounded.
    pub fn nonzero_hull(&self) -> Option<Option<Interval>> {
        let mut hull: Option<Interval> = None;
        for p in self.pieces.iter().filter(|p| !p.is_zero()) {
            if !(p.lo.is_finite() && p.hi.is_finite()) {
                return None;
            }
            let iv = Interval { lo: p.lo, hi: p.hi };
            hull = Some(hull.map_or(iv, |h| h.hull(&iv)));
        }
        Some(hull)
    }

    pub fn scaled(&self, c: f64) -> Self {
        PiecewisePoly {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece::new(p.lo, p.hi, poly::scale(&p.coeffs, c)))
                .collect(),
        }
    }
}

impl fmt::Display for PiecewisePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pieces
            .iter()
            .map(|p| {
                let cs: Vec<String> = if p.coeffs.is_empty() {
                    vec!["0".into()]
                } else {
                    p.coeffs.iter().map(|c| format!("{c}")).collect()
                };
                format!("({},{}):{}", p.lo, p.hi, cs.join(","))
            })
            .collect();
        write!(f, "pp[{}]", parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Distribution {
    /// `delta^(order)` at `at`.
    Dirac { order: u32, at: f64 },
    Heaviside { at: f64 },
    PiecewisePoly(PiecewisePoly),
}

impl Distribution {
    pub fn delta() -> Self {
        Distribution::Dirac { order: 0, at: 0.0 }
    }

    pub fn dirac(order: u32, at: f64) -> Self {
        Distribution::Dirac { order, at }
    }

    pub fn heaviside(at: f64) -> Self {
        Distribution::Heaviside { at }
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        Distribution::PiecewisePoly(PiecewisePoly::polynomial(coeffs))
    }

    pub fn abs() -> Self {
        Distribution::PiecewisePoly(PiecewisePoly::abs())
    }

    /// The function behind a regular distribution.
    pub fn as_piecewise(&self) -> Option<PiecewisePoly> {
        match self {
            Distribution::Dirac { .. } => None,
            Distribution::Heaviside { at } => Some(PiecewisePoly::heaviside(*at)),
            Distribution::PiecewisePoly(p) => Some(p.clone()),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |a: f64| if a == 0.0 { String::new() } else { format!("@{a}") };
        match self {
            Distribution::Dirac { order, at: a } => {
                write!(f, "delta{}{}", "'".repeat(*order as usize), at(*a))
            }
            Distribution::Heaviside { at: a } => write!(f, "H{}", at(*a)),
            Distribution::PiecewisePoly(p) => write!(f, "{p}"),
        }
    }
}

/// `<u, phi>`.
pub fn pair(u: &Distribution, phi: &SmoothExpr, cfg: &QuadConfig) -> Result<f64> {
    match u {
        Distribution::Dirac { order, at } => {
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * phi.derive_n(*order).eval(*at))
        }
        Distribution::Heaviside { at } => pair_piecewise(&PiecewisePoly::heaviside(*at), phi, cfg),
        Distribution::PiecewisePoly(p) => pair_piecewise(p, phi, cfg),
    }
}

fn pair_piecewise(p: &PiecewisePoly, phi: &SmoothExpr, cfg: &QuadConfig) -> Result<f64> {
    let mut total = 0.0;
    for piece in p.pieces().iter().filter(|p| !p.is_zero()) {
        let iv = match phi.support() {
            Some(s) => {
                let (lo, hi) = (piece.lo.max(s.lo), piece.hi.min(s.hi));
                if lo >= hi {
                    continue;
                }
                Interval { lo, hi }
            }
            None if piece.lo.is_finite() && piece.hi.is_finite() => Interval {
                lo: piece.lo,
                hi: piece.hi,
            },
            None => return Err(Error::Unbounded("test function")),
        };
        let integrand = SmoothExpr::polynomial(&piece.coeffs) * phi.clone();
        total += integrand.integral_over(iv, cfg)?;
    }
    Ok(total)
}

/// A finite linear combination of catalog distributions, used as an
/// association candidate.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Combination {
    terms: Vec<(f64, Distribution)>,
}

impl Combination {
    pub fn zero() -> Self {
        Combination::default()
    }

    pub fn single(u: Distribution) -> Self {
        Combination { terms: vec![(1.0, u)] }
    }

    pub fn new(terms: Vec<(f64, Distribution)>) -> Self {
        Combination { terms }
    }

    pub fn terms(&self) -> &[(f64, Distribution)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    pub fn pair(&self, phi: &SmoothExpr, cfg: &QuadConfig) -> Result<f64> {
        self.terms.iter().map(|(c, u)| Ok(c * pair(u, phi, cfg)?)).sum()
    }

    /// The candidate as a function that is `C^k` on `window`, for C^k association.
    pub fn as_ck(&self, window: Interval, k: u32) -> Result<CkFunction> {
        let mut parts = Vec::with_capacity(self.terms.len());
        for (c, u) in &self.terms {
            match u.as_piecewise() {
                Some(p) => parts.push((*c, p)),
                None => {
                    return Err(Error::CandidateNotCk {
                        k,
                        reason: format!("{u} is not a function"),
                    })
                }
            }
        }
        let f = CkFunction { parts };
        let mut cuts: Vec<f64> = f.parts.iter().flat_map(|(_, p)| p.breakpoints()).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for e in cuts.into_iter().filter(|e| window.contains(*e)) {
            for j in 0..=k {
                let (left, right) = f.one_sided(e, j);
                let scale = 1.0 + left.abs().max(right.abs());
                if (left - right).abs() > 1e-12 * scale {
                    return Err(Error::CandidateNotCk {
                        k,
                        reason: format!("derivative {j} jumps by {} at {e}", right - left),
                    });
                }
            }
        }
        Ok(f)
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(c, u)| format!("{c}*{u}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// A candidate known to be `C^k` on some window.
#[derive(Debug, Clone)]
pub struct CkFunction {
    parts: Vec<(f64, PiecewisePoly)>,
}

impl CkFunction {
    pub fn eval_deriv(&self, x: f64, j: u32) -> f64 {
        self.parts.iter().map(|(c, p)| c * p.eval_deriv(x, j)).sum()
    }

    fn one_sided(&self, e: f64, j: u32) -> (f64, f64) {
        let mut left = 0.0;
        let mut right = 0.0;
        for (c, p) in &self.parts {
            let i = p.pieces.partition_point(|q| q.hi <= e);
            let r = &p.pieces[i.min(p.pieces.len() - 1)];
            let l = if r.lo == e && i > 0 { &p.pieces[i - 1] } else { r };
            left += c * poly::eval(&poly::derivative_n(&l.coeffs, j), e);
            right += c * poly::eval(&poly::derivative_n(&r.coeffs, j), e);
        }
        (left, right)
    }
}

#[derive(Debug, Clone)]
pub enum FamilyMember {
    Smooth(SmoothExpr),
    Piecewise(PiecewisePoly),
}

/// A finite stand-in for a bounded set of smooth functions. Every member is
/// polynomially bounded by construction.
#[derive(Debug, Clone)]
pub struct FunctionFamily {
    members: Vec<FamilyMember>,
}

impl FunctionFamily {
    pub fn new(members: Vec<FamilyMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Invalid("function family is empty".into()));
        }
        Ok(FunctionFamily { members })
    }

    /// `{x^k}`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        FunctionFamily {
            members: vec![FamilyMember::Piecewise(PiecewisePoly::polynomial(&c))],
        }
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }
}

/// `x -> ∫ p(y) ∂_x^n K_eps(x, y) dy` for a piecewise polynomial `p`.
#[derive(Debug)]
pub struct MollifiedDist {
    source: Arc<PiecewisePoly>,
    label: Arc<str>,
    kernel: Arc<ScaledKernel>,
    order: u32,
    /// `w -> (-1)^n k^(n)(w)`, the w-profile of `∂_x^n K`.
    dprofile: SmoothExpr,
    dbreaks: Vec<f64>,
    /// Per piece: `p^(n + j)` for `j = 0, 1, ...`.
    derivs: Vec<Vec<Vec<f64>>>,
    cfg: QuadConfig,
}

impl MollifiedDist {
    pub fn new(source: PiecewisePoly, label: impl Into<Arc<str>>, kernel: Arc<ScaledKernel>, cfg: QuadConfig) -> Self {
        let dprofile = kernel.profile().clone();
        Self::build(Arc::new(source), label.into(), kernel, 0, dprofile, cfg)
    }

    fn build(
        source: Arc<PiecewisePoly>,
        label: Arc<str>,
        kernel: Arc<ScaledKernel>,
        order: u32,
        dprofile: SmoothExpr,
        cfg: QuadConfig,
    ) -> Self {
        let derivs = source
            .pieces()
            .iter()
            .map(|p| {
                let mut out = Vec::new();
                let mut d = poly::derivative_n(&p.coeffs, order);
                while !d.is_empty() {
                    let next = poly::derivative(&d);
                    out.push(d);
                    d = next;
                }
                out
            })
            .collect();
        let dbreaks = dprofile.breakpoints();
        MollifiedDist {
            source,
            label,
            kernel,
            order,
            dprofile,
            dbreaks,
            derivs,
            cfg,
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn kernel(&self) -> &ScaledKernel {
        &self.kernel
    }

    pub fn derive(&self) -> MollifiedDist {
        Self::build(
            self.source.clone(),
            self.label.clone(),
            self.kernel.clone(),
            self.order + 1,
            self.dprofile.derive().scaled(-1.0),
            self.cfg,
        )
    }

    pub fn support(&self) -> Option<Interval> {
        let ks = self.kernel.support();
        match self.source.nonzero_hull()? {
            Some(h) => Some(Interval {
                lo: h.lo - ks.hi,
                hi: h.hi - ks.lo,
            }),
            // zero source: any bounded set works
            None => Some(Interval { lo: 0.0, hi: 0.0 }),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let ks = self.kernel.support();
        self.source
            .breakpoints()
            .into_iter()
            .flat_map(|e| [e - ks.hi, e, e - ks.lo])
            .collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "iota{}({})[{}, eps={}]",
            "'".repeat(self.order as usize),
            self.label,
            self.kernel.spec().describe(),
            self.kernel.eps()
        )
    }

    /// Returns NaN if an inner quadrature fails; the outer quadrature then
    /// reports the failure.
    pub fn eval(&self, x: f64) -> f64 {
        let ks = self.kernel.support();
        let mut total = 0.0;
        for (i, piece) in self.source.pieces().iter().enumerate() {
            if piece.is_zero() {
                continue;
            }
            let (lo, hi) = (piece.lo - x, piece.hi - x);
            if hi <= ks.lo || lo >= ks.hi {
                continue;
            }
            if lo <= ks.lo && hi >= ks.hi {
                if let Some(v) = self.expand(i, x) {
                    total += v;
                    continue;
                }
            }
            let iv = Interval {
                lo: lo.max(ks.lo),
                hi: hi.min(ks.hi),
            };
            let c = &piece.coeffs;
            match integrate_split(|w| poly::eval(c, x + w) * self.dprofile.eval(w), iv, &self.dbreaks, &self.cfg) {
                Ok(v) => total += v,
                Err(_) => return f64::NAN,
            }
        }
        total
    }

    /// `Σ_j p^(n + j)(x) c_j / j!` when every needed kernel moment is known.
    fn expand(&self, piece: usize, x: f64) -> Option<f64> {
        let mut total = 0.0;
        let mut fact = 1.0;
        for (j, d) in self.derivs[piece].iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            total += poly::eval(d, x) * self.kernel.moment(j)? / fact;
        }
        Some(total)
    }
}

/// `x -> <u, K_eps(x, .)>` as a smooth expression.
pub fn regularize(u: &Distribution, kernel: &Arc<ScaledKernel>, cfg: &QuadConfig) -> SmoothExpr {
    match u {
        Distribution::Dirac { order, at } => {
            let d = kernel.profile().derive_n(*order);
            let d = if order % 2 == 0 { d } else { d.scaled(-1.0) };
            d.affine(-1.0, *at)
        }
        _ => {
            let pp = u.as_piecewise().expect("regular distribution");
            if let Some(c) = pp.as_polynomial() {
                if let Some(q) = smooth_polynomial(c, kernel) {
                    return SmoothExpr::polynomial(&q);
                }
            }
            SmoothExpr::mollified(MollifiedDist::new(pp, u.to_string(), kernel.clone(), *cfg))
        }
    }
}

/// Coefficients of `Σ_j p^(j) c_j / j!`.
fn smooth_polynomial(c: &[f64], kernel: &ScaledKernel) -> Option<Vec<f64>> {
    let mut out = vec![0.0; c.len()];
    let mut d = c.to_vec();
    let mut fact = 1.0;
    let mut j = 0;
    while !d.is_empty() {
        if j > 0 {
            fact *= j as f64;
        }
        let w = kernel.moment(j)? / fact;
        for (o, di) in out.iter_mut().zip(&d) {
            *o += w * di;
        }
        d = poly::derivative(&d);
        j += 1;
    }
    Some(out)
}

/// `x -> <f, ∂_x^n K_eps(x, .)> - f^(n)(x)`, arranged to avoid cancellation
/// where possible.
#[derive(Debug)]
pub struct SmoothingDefect {
    inner: DefectKind,
}

#[derive(Debug)]
enum DefectKind {
    /// Polynomial: `Σ_{j>=1} p^(n+j)(x) c_j / j! + p^(n)(x)(c_0 - 1)`.
    Poly { derivs: Vec<Vec<f64>>, moments: Vec<f64> },
    Piecewise { md: Box<MollifiedDist>, pp: PiecewisePoly, n: u32 },
    /// `∫ (f^(n)(x + w) - f^(n)(x)) k(w) dw + f^(n)(x)(c_0 - 1)`.
    Smooth {
        df: SmoothExpr,
        kernel: Arc<ScaledKernel>,
        breaks: Vec<f64>,
        cfg: QuadConfig,
    },
}

impl SmoothingDefect {
    pub fn new(member: &FamilyMember, kernel: &Arc<ScaledKernel>, n: u32, cfg: &QuadConfig) -> Self {
        let inner = match member {
            FamilyMember::Piecewise(pp) => match pp.as_polynomial() {
                Some(c) => {
                    let mut derivs = Vec::new();
                    let mut d = poly::derivative_n(c, n);
                    while !d.is_empty() {
                        let next = poly::derivative(&d);
                        derivs.push(d);
                        d = next;
                    }
                    let moments: Option<Vec<f64>> = (0..derivs.len()).map(|j| kernel.moment(j)).collect();
                    match moments {
                        Some(moments) => DefectKind::Poly { derivs, moments },
                        None => Self::piecewise(pp, kernel, n, cfg),
                    }
                }
                None => Self::piecewise(pp, kernel, n, cfg),
            },
            FamilyMember::Smooth(f) => {
                let df = f.derive_n(n);
                let breaks = kernel.profile().breakpoints();
                DefectKind::Smooth {
                    df,
                    kernel: kernel.clone(),
                    breaks,
                    cfg: *cfg,
                }
            }
        };
        SmoothingDefect { inner }
    }

    fn piecewise(pp: &PiecewisePoly, kernel: &Arc<ScaledKernel>, n: u32, cfg: &QuadConfig) -> DefectKind {
        let mut md = MollifiedDist::new(pp.clone(), pp.to_string(), kernel.clone(), *cfg);
        for _ in 0..n {
            md = md.derive();
        }
        DefectKind::Piecewise {
            md: Box::new(md),
            pp: pp.clone(),
            n,
        }
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        match &self.inner {
            DefectKind::Poly { derivs, moments } => {
                let mut total = 0.0;
                let mut fact = 1.0;
                for (j, d) in derivs.iter().enumerate().skip(1) {
                    fact *= j as f64;
                    total += poly::eval(d, x) * moments[j] / fact;
                }
                if let Some(d0) = derivs.first() {
                    total += poly::eval(d0, x) * (moments[0] - 1.0);
                }
                Ok(total)
            }
            DefectKind::Piecewise { md, pp, n } => {
                let v = md.eval(x);
                if !v.is_finite() {
                    return Err(Error::NonFinite { lo: x, hi: x });
                }
                Ok(v - pp.eval_deriv(x, *n))
            }
            DefectKind::Smooth {
                df,
                kernel,
                breaks,
                cfg,
            } => {
                let fx = df.eval(x);
                let k = kernel.profile();
                let body = integrate_split(|w| (df.eval(x + w) - fx) * k.eval(w), kernel.support(), breaks, cfg)?;
                Ok(body + fx * (kernel.moment(0).unwrap_or(1.0) - 1.0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::{base_bump, scale, synth_aq, tilted_bump, KernelSpec};
    use proptest::prelude::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn probe() -> SmoothExpr {
        SmoothExpr::bump().affine(1.0 / 0.8, -0.1 / 0.8) * SmoothExpr::polynomial(&[1.0, 0.5, -0.3])
    }

    #[test]
    fn dirac_pairings() {
        let phi = probe();
        assert_eq!(pair(&Distribution::delta(), &phi, &cfg()).unwrap(), phi.eval(0.0));
        assert_eq!(
            pair(&Distribution::dirac(1, 0.0), &phi, &cfg()).unwrap(),
            -phi.derive().eval(0.0)
        );
    }

    #[test]
    fn monomial_pairs_to_scaled_moment() {
        let phi = synth_aq(&tilted_bump(0.5).unwrap(), 1).unwrap();
        let eps = 0.1;
        let s = scale(&phi, eps).unwrap();
        let v = pair(&Distribution::polynomial(&[0.0, 0.0, 1.0]), &s, &cfg()).unwrap();
        assert!((v - eps * eps * phi.moment(2)).abs() <= 1e-9);
    }

    #[test]
    fn heaviside_pairs_to_right_half() {
        let phi = probe();
        let h = pair(&Distribution::heaviside(0.2), &phi, &cfg()).unwrap();
        let direct = phi.integral_over(Interval { lo: 0.2, hi: 5.0 }, &cfg()).unwrap();
        assert!((h - direct).abs() <= 1e-10);
    }

    #[test]
    fn unbounded_pairing_is_rejected() {
        let err = pair(&Distribution::polynomial(&[1.0]), &SmoothExpr::var(), &cfg());
        assert!(matches!(err, Err(Error::Unbounded(_))));
    }

    #[test]
    fn piecewise_gaps_are_filled() {
        let p = PiecewisePoly::new(vec![Piece::new(0.0, 1.0, vec![2.0])]).unwrap();
        assert_eq!(p.pieces().len(), 3);
        assert_eq!(p.eval(0.5), 2.0);
        assert_eq!(p.eval(-3.0), 0.0);
        assert_eq!(p.nonzero_hull(), Some(Some(Interval { lo: 0.0, hi: 1.0 })));
        assert!(PiecewisePoly::new(vec![Piece::new(0.0, 2.0, vec![1.0]), Piece::new(1.0, 3.0, vec![1.0])]).is_err());
        assert!(PiecewisePoly::new(vec![Piece::new(1.0, 1.0, vec![1.0])]).is_err());
    }

    #[test]
    fn display_forms() {
        assert_eq!(Distribution::delta().to_string(), "delta");
        assert_eq!(Distribution::dirac(2, -0.5).to_string(), "delta''@-0.5");
        assert_eq!(Distribution::heaviside(0.0).to_string(), "H");
        assert_eq!(Distribution::abs().to_string(), "pp[(-inf,0):0,-1; (0,inf):0,1]");
        let c = Combination::new(vec![(0.5, Distribution::delta())]);
        assert_eq!(c.to_string(), "0.5*delta");
        assert_eq!(Combination::zero().to_string(), "0");
    }

    #[test]
    fn regularized_heaviside_matches_quadrature() {
        let spec = KernelSpec::model(base_bump());
        let k = Arc::new(spec.at(0.1).unwrap());
        let h = regularize(&Distribution::heaviside(0.0), &k, &cfg());
        for x in [-0.3, -0.05, 0.0, 0.02, 0.3] {
            let direct = k
                .at_point(x)
                .integral_over(Interval { lo: 0.0, hi: 1.0 }, &cfg())
                .unwrap();
            assert!((h.eval(x) - direct).abs() <= 1e-10, "x = {x}");
        }
        assert!((h.eval(0.3) - 1.0).abs() <= 1e-12);
        assert_eq!(h.eval(-0.3), 0.0);
    }

    #[test]
    fn regularized_derivative_is_symbolic() {
        let spec = KernelSpec::model(tilted_bump(0.5).unwrap());
        let k = Arc::new(spec.at(0.2).unwrap());
        let a = regularize(&Distribution::abs(), &k, &cfg());
        let da = a.derive();
        for x in [-0.5, -0.1, 0.0, 0.07, 0.4] {
            let h = 1e-5;
            let fd = (a.eval(x + h) - a.eval(x - h)) / (2.0 * h);
            assert!((da.eval(x) - fd).abs() <= 1e-6, "x = {x}");
        }
    }

    #[test]
    fn polynomial_regularization_is_closed_form() {
        let phi = tilted_bump(0.5).unwrap();
        let k = Arc::new(KernelSpec::model(phi.clone()).at(0.1).unwrap());
        let r = regularize(&Distribution::polynomial(&[0.0, 0.0, 1.0]), &k, &cfg());
        for x in [-1.0, 0.3] {
            let direct = (SmoothExpr::polynomial(&[0.0, 0.0, 1.0]) * k.at_point(x)).integral(&cfg()).unwrap();
            assert!((r.eval(x) - direct).abs() <= 1e-10);
        }
    }

    #[test]
    fn ck_candidates() {
        let w = Interval::centered(1.0);
        let x2 = Combination::single(Distribution::polynomial(&[0.0, 0.0, 1.0]));
        assert!(x2.as_ck(w, 3).is_ok());
        let abs = Combination::single(Distribution::abs());
        assert!(abs.as_ck(w, 0).is_ok());
        assert!(matches!(abs.as_ck(w, 1), Err(Error::CandidateNotCk { k: 1, .. })));
        assert!(abs.as_ck(Interval { lo: 0.5, hi: 1.0 }, 4).is_ok());
        assert!(Combination::single(Distribution::delta()).as_ck(w, 0).is_err());
        let cancel = Combination::new(vec![(1.0, Distribution::heaviside(0.0)), (-1.0, Distribution::heaviside(0.0))]);
        assert!(cancel.as_ck(w, 2).is_ok());
    }

    #[test]
    fn defect_of_polynomial_uses_moments() {
        let phi = synth_aq(&tilted_bump(0.5).unwrap(), 2).unwrap();
        let k = Arc::new(KernelSpec::model(phi.clone()).at(0.1).unwrap());
        let d = SmoothingDefect::new(&FunctionFamily::monomial(3).members()[0], &k, 0, &cfg());
        for x in [-0.2, 0.0, 0.9] {
            assert!((d.at(x).unwrap() - 1e-3 * phi.moment(3)).abs() <= 1e-15);
        }
        let smooth = SmoothingDefect::new(&FamilyMember::Smooth(SmoothExpr::monomial(3)), &k, 0, &cfg());
        assert!((smooth.at(0.4).unwrap() - 1e-3 * phi.moment(3)).abs() <= 1e-10);
    }

    proptest! {
        #[test]
        fn pairing_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, at in -0.5..0.5f64) {
            let phi = probe();
            let psi = SmoothExpr::bump().affine(2.0, 0.0);
            let combo = phi.scaled(a) + psi.scaled(b);
            for u in [Distribution::heaviside(at), Distribution::abs(), Distribution::dirac(1, at)] {
                let lhs = pair(&u, &combo, &cfg()).unwrap();
                let rhs = a * pair(&u, &phi, &cfg()).unwrap() + b * pair(&u, &psi, &cfg()).unwrap();
                prop_assert!((lhs - rhs).abs() <= 2e-10 * (1.0 + a.abs() + b.abs()));
            }
        }

        #[test]
        fn dirac_derivative_adjunction(m in 0u32..4, at in -0.6..0.6f64) {
            let phi = probe();
            let lhs = pair(&Distribution::dirac(m + 1, at), &phi, &cfg()).unwrap();
            let rhs = -pair(&Distribution::dirac(m, at), &phi.derive(), &cfg()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn dirac_translation(at in -0.6..0.6f64) {
            let phi = probe();
            let lhs = pair(&Distribution::dirac(0, at), &phi, &cfg()).unwrap();
            let rhs = pair(&Distribution::delta(), &phi.translate(-at), &cfg()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
