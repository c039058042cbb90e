//! Mollifiers and the kernel families built from them.
//!
//! Every mollifier here has the form `phi(x) = P(x) * b(x / r)` for a
//! polynomial `P` and the fixed bump `b`, so its moments follow exactly from
//! the moments of `b`. Quadrature moments ([`moments`]) are an independent
//! check on that bookkeeping.

use std::f64::consts::E;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::SmoothExpr;
use crate::poly;
use crate::quadrature::{integrate, Interval, QuadConfig};

/// Tolerance on `|mu_0 - 1|` and on the vanishing moments.
pub const MOMENT_TOL: f64 = 1e-9;

/// Moments carried as metadata on every mollifier.
pub const META_ORDER: usize = 24;

const BUMP_MOMENT_COUNT: usize = 96;

/// `B_j = ∫ x^j b(x) dx` for the unnormalized bump. Odd moments are exactly 0.
fn bump_moment(j: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let cfg = QuadConfig {
            abs_tol: 1e-16,
            max_depth: 50,
        };
        (0..BUMP_MOMENT_COUNT)
            .map(|j| {
                if j % 2 == 1 {
                    return 0.0;
                }
                let f = |x: f64| {
                    let t = 1.0 - x * x;
                    if t <= 0.0 {
                        0.0
                    } else {
                        x.powi(j as i32) * (-1.0 / t).exp()
                    }
                };
                // even integrand: twice the half-line integral
                2.0 * integrate(f, Interval { lo: 0.0, hi: 1.0 }, &cfg).expect("bump moments converge")
            })
            .collect()
    });
    table[j]
}

#[derive(Debug, Clone)]
pub struct Mollifier {
    name: String,
    coeffs: Vec<f64>,
    radius: f64,
    expr: SmoothExpr,
    moments: Vec<f64>,
    q: usize,
    symmetric: bool,
}

impl Mollifier {
    /// Builds `P(x) b(x / radius)` and checks that it integrates to one.
    pub fn from_parts(name: impl Into<String>, coeffs: Vec<f64>, radius: f64) -> Result<Self> {
        let coeffs = poly::trim(coeffs);
        if coeffs.is_empty() || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Invalid("mollifier needs a nonzero polynomial and positive radius".into()));
        }
        if coeffs.len() + META_ORDER >= BUMP_MOMENT_COUNT {
            return Err(Error::Invalid(format!("mollifier polynomial degree {} too large", coeffs.len() - 1)));
        }
        let moments: Vec<f64> = (0..=META_ORDER)
            .map(|j| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * radius.powi((i + j + 1) as i32) * bump_moment(i + j))
                    .sum()
            })
            .collect();
        if (moments[0] - 1.0).abs() > MOMENT_TOL {
            return Err(Error::Invalid(format!("mollifier integrates to {} instead of 1", moments[0])));
        }
        let q = moments[1..].iter().take_while(|m| m.abs() <= MOMENT_TOL).count();
        let symmetric = coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0);
        let expr = SmoothExpr::polynomial(&coeffs) * SmoothExpr::bump().affine(1.0 / radius, 0.0);
        Ok(Mollifier {
            name: name.into(),
            coeffs,
            radius,
            expr,
            moments,
            q,
            symmetric,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn expr(&self) -> &SmoothExpr {
        &self.expr
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Moment `mu_j` from the polynomial bookkeeping, `j <= META_ORDER`.
    pub fn moment(&self, j: usize) -> f64 {
        self.moments[j]
    }

    pub fn moment_table(&self) -> &[f64] {
        &self.moments
    }

    /// Largest `q` with `|mu_1|, ..., |mu_q| <= MOMENT_TOL`.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn support(&self) -> Interval {
        Interval::centered(self.radius)
    }

    /// `phi(x / s) / s`: same mass, support radius scaled by `s`.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / s.powi(i as i32 + 1))
            .collect();
        Self::from_parts(format!("{}@{s}", self.name), coeffs, self.radius * s)
    }

    pub fn record(&self) -> MollifierRecord {
        MollifierRecord {
            kind: self.name.clone(),
            q: self.q,
            radius: self.radius,
            coefficients: self.coeffs.clone(),
            normalization: 1.0 / (self.radius * bump_moment(0)),
        }
    }
}

/// Serialized form of a mollifier: `phi(x) = Σ coefficients[i] x^i b(x / radius)`;
/// `normalization` is the factor that makes `b(x / radius)` itself a unit-mass bump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifierRecord {
    pub kind: String,
    pub q: usize,
    pub radius: f64,
    pub coefficients: Vec<f64>,
    pub normalization: f64,
}

/// The normalized bump `N b(x)`.
pub fn base_bump() -> Mollifier {
    Mollifier::from_parts("base", vec![1.0 / bump_moment(0)], 1.0).expect("base bump is normalized")
}

/// `N (1 + t x) b(x)`: unit mass with first moment `t B_2 / B_0`.
pub fn tilted_bump(t: f64) -> Result<Mollifier> {
    if t.abs() >= 1.0 {
        return Err(Error::Invalid(format!("tilt {t} would make the mollifier change sign")));
    }
    let n = 1.0 / bump_moment(0);
    Mollifier::from_parts(format!("tilted({t})"), vec![n, n * t], 1.0)
}

/// Moments `∫ z^j m(z) dz`, `j = 0..=order`, by quadrature of the expression.
pub fn moments(m: &Mollifier, order: usize, cfg: &QuadConfig) -> Result<Vec<f64>> {
    m.expr.moments(order, cfg)
}

/// `eps^-1 m(x / eps)`.
pub fn scale(m: &Mollifier, eps: f64) -> Result<SmoothExpr> {
    check_eps(eps, 1.0, "scaled")?;
    Ok(m.expr.affine(1.0 / eps, 0.0).scaled(1.0 / eps))
}

/// `chi(x |ln eps|) eps^-1 rho(x / eps)`.
pub fn log_damped(rho: &Mollifier, chi: &SmoothExpr, eps: f64) -> Result<SmoothExpr> {
    check_eps(eps, E.recip(), "log-damped")?;
    let damp = eps.ln().abs();
    Ok(SmoothExpr::prod(vec![
        SmoothExpr::constant(1.0 / eps),
        chi.affine(damp, 0.0),
        rho.expr.affine(1.0 / eps, 0.0),
    ]))
}

fn check_eps(eps: f64, max: f64, kernel: &'static str) -> Result<()> {
    if eps > 0.0 && eps <= max {
        Ok(())
    } else {
        Err(Error::BadEpsilon { eps, max, kernel })
    }
}

/// Projects `rho` onto `A_q`: returns `P rho` with `deg P <= q` chosen so
/// that `∫ x^i P rho = [i = 0]` for `i = 0..=q`.
pub fn synth_aq(rho: &Mollifier, q: usize) -> Result<Mollifier> {
    if 2 * q > META_ORDER {
        return Err(Error::Invalid(format!("q = {q} exceeds the supported order {}", META_ORDER / 2)));
    }
    let n = q + 1;
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rho.moment(i + j)).collect()).collect();
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let p = solve_partial_pivot(&mut a, &mut rhs)?;
    let coeffs = poly::mul(&p, &rho.coeffs);
    let out = Mollifier::from_parts(format!("aq{q}({})", rho.name), coeffs, rho.radius)?;

    let check = moments(&out, q, &QuadConfig::default())?;
    if (check[0] - 1.0).abs() > MOMENT_TOL {
        return Err(Error::MomentCheck {
            order: 0,
            value: check[0] - 1.0,
            tol: MOMENT_TOL,
        });
    }
    if let Some((j, v)) = check.iter().enumerate().skip(1).find(|(_, v)| v.abs() > MOMENT_TOL) {
        return Err(Error::MomentCheck {
            order: j,
            value: *v,
            tol: MOMENT_TOL,
        });
    }
    Ok(out)
}

/// Gaussian elimination with partial pivoting; conditioning is judged by the
/// ratio of the largest to the smallest pivot.
fn solve_partial_pivot(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut pivots = Vec::with_capacity(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        pivots.push(p.abs());
        if p == 0.0 {
            return Err(Error::IllConditioned { estimate: f64::INFINITY });
        }
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let big = pivots.iter().cloned().fold(0.0, f64::max);
    let small = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let estimate = big / small;
    if estimate > 1e12 {
        return Err(Error::IllConditioned { estimate });
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `eps^-1 phi((y - x) / eps)`
    Model,
    /// `chi((x - y)|ln eps|) eps^-1 rho((x - y) / eps)`
    LogDamped,
    /// `S_eps phi (y - x)` for `phi` in `A_q`
    ScaledAq,
}

impl KernelKind {
    pub fn max_eps(self) -> f64 {
        match self {
            KernelKind::Model | KernelKind::ScaledAq => 1.0,
            KernelKind::LogDamped => E.recip(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Model => "model",
            KernelKind::LogDamped => "log-damped",
            KernelKind::ScaledAq => "scaled-aq",
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    base: Arc<Mollifier>,
    cutoff: Option<SmoothExpr>,
}

impl KernelSpec {
    pub fn model(base: Mollifier) -> Self {
        KernelSpec {
            kind: KernelKind::Model,
            base: Arc::new(base),
            cutoff: None,
        }
    }

    pub fn scaled_aq(base: Mollifier) -> Self {
        KernelSpec {
            kind: KernelKind::ScaledAq,
            base: Arc::new(base),
            cutoff: None,
        }
    }

    /// Log-damped kernel with the standard cutoff.
    pub fn log_damped(base: Mollifier) -> Self {
        Self::log_damped_with(base, SmoothExpr::cutoff()).expect("standard cutoff is admissible")
    }

    pub fn log_damped_with(base: Mollifier, cutoff: SmoothExpr) -> Result<Self> {
        let inside = cutoff
            .support()
            .is_some_and(|s| Interval::centered(2.0).contains_interval(&s));
        if !inside {
            return Err(Error::Invalid("cutoff must be supported in [-2, 2]".into()));
        }
        let flat = (0..=256).map(|i| -1.0 + i as f64 / 128.0).all(|x| cutoff.eval(x) == 1.0);
        if !flat {
            return Err(Error::Invalid("cutoff must equal 1 on [-1, 1]".into()));
        }
        Ok(KernelSpec {
            kind: KernelKind::LogDamped,
            base: Arc::new(base),
            cutoff: Some(cutoff),
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn base(&self) -> &Mollifier {
        &self.base
    }

    pub fn check_eps(&self, eps: f64) -> Result<()> {
        check_eps(eps, self.kind.max_eps(), self.kind.label())
    }

    pub fn describe(&self) -> String {
        format!("{}[{}]", self.kind.label(), self.base.name)
    }

    pub fn at(&self, eps: f64) -> Result<ScaledKernel> {
        ScaledKernel::new(self, eps)
    }
}

/// A kernel family frozen at one epsilon, stored as its translation profile:
/// `K(x, y) = profile(y - x)`.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    spec: KernelSpec,
    eps: f64,
    profile: SmoothExpr,
    support: Interval,
    moments: Vec<f64>,
}

impl ScaledKernel {
    pub fn new(spec: &KernelSpec, eps: f64) -> Result<Self> {
        spec.check_eps(eps)?;
        let base = &spec.base;
        let (profile, moments) = match spec.kind {
            KernelKind::Model | KernelKind::ScaledAq => {
                let profile = scale(base, eps)?;
                let moments = (0..=META_ORDER).map(|j| eps.powi(j as i32) * base.moment(j)).collect();
                (profile, moments)
            }
            KernelKind::LogDamped => {
                let chi = spec.cutoff.as_ref().expect("log-damped spec carries a cutoff");
                let damped = log_damped(base, chi, eps)?;
                // K(x, y) = phi_eps(x - y), so the profile is w -> phi_eps(-w)
                let profile = damped.affine(-1.0, 0.0);
                let inert = eps * base.radius * eps.ln().abs() <= 1.0;
                let moments = if inert {
                    (0..=META_ORDER).map(|j| (-eps).powi(j as i32) * base.moment(j)).collect()
                } else {
                    // moments of the O(1) rescaled profile, then undo the scaling
                    let unit = profile.affine(eps, 0.0).scaled(eps);
                    let reach = base.radius.max(1.0);
                    (0..=META_ORDER)
                        .map(|j| {
                            let cfg = QuadConfig {
                                abs_tol: 1e-14 * reach.powi(j as i32),
                                max_depth: 50,
                            };
                            let m = (SmoothExpr::monomial(j) * unit.clone()).integral(&cfg)?;
                            Ok(eps.powi(j as i32) * m)
                        })
                        .collect::<Result<Vec<f64>>>()?
                };
                (profile, moments)
            }
        };
        let support = profile.support().expect("kernel profiles are compactly supported");
        Ok(ScaledKernel {
            spec: spec.clone(),
            eps,
            profile,
            support,
            moments,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `w -> K(x, x + w)`.
    pub fn profile(&self) -> &SmoothExpr {
        &self.profile
    }

    /// Support of the profile in `w = y - x`.
    pub fn support(&self) -> Interval {
        self.support
    }

    /// `c_j = ∫ w^j profile(w) dw`.
    pub fn moment(&self, j: usize) -> Option<f64> {
        self.moments.get(j).copied()
    }

    /// The kernel at base point `x`, as a function of `y`.
    pub fn at_point(&self, x: f64) -> SmoothExpr {
        self.profile.translate(x)
    }
}

/// `y -> K_eps(x, y)` for the given family.
pub fn kernel_at(spec: &KernelSpec, eps: f64, x: f64) -> Result<SmoothExpr> {
    Ok(spec.at(eps)?.at_point(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn base_bump_is_normalized_and_even() {
        let b = base_bump();
        let mu = moments(&b, 3, &cfg()).unwrap();
        assert!((mu[0] - 1.0).abs() <= 1e-10);
        assert!(mu[1].abs() <= 1e-10 && mu[3].abs() <= 1e-10);
        assert!(b.symmetric());
        assert_eq!(b.q(), 1);
        // N = 1 / 0.4439938161680794 from a 30-digit reference quadrature
        assert!((b.coeffs()[0] - 2.252_283_621_043_581).abs() <= 1e-9);
    }

    #[test]
    fn second_moment_of_base_against_reference() {
        // 30-digit reference: ∫x^2 b / ∫ b = 0.0702014767529754 / 0.4439938161680794
        let expected = 0.070_201_476_752_975_41 / 0.443_993_816_168_079_4;
        let mu = moments(&base_bump(), 2, &cfg()).unwrap();
        assert!((mu[2] - expected).abs() <= 1e-8);
        assert!((base_bump().moment(2) - expected).abs() <= 1e-13);
    }

    #[test]
    fn scale_examples() {
        let b = base_bump();
        let s1 = scale(&b, 1.0).unwrap();
        for x in [-0.7, 0.0, 0.31] {
            assert_eq!(s1.eval(x), b.expr().eval(x));
        }
        for eps in [0.1, 0.01] {
            let s = scale(&b, eps).unwrap();
            assert!((s.integral(&cfg()).unwrap() - 1.0).abs() <= 1e-9);
            assert_eq!(s.eval(0.0), b.expr().eval(0.0) / eps);
        }
        assert!(matches!(scale(&b, 0.0), Err(Error::BadEpsilon { .. })));
        assert!(matches!(scale(&b, 1.5), Err(Error::BadEpsilon { .. })));
    }

    #[test]
    fn log_damped_examples() {
        let b = base_bump();
        let chi = SmoothExpr::cutoff();
        let eps = 0.01;
        let ld = log_damped(&b, &chi, eps).unwrap();
        let sc = scale(&b, eps).unwrap();
        for i in -20..=20 {
            let x = i as f64 * 6e-4;
            assert_eq!(ld.eval(x), sc.eval(x));
        }
        assert!((ld.integral(&cfg()).unwrap() - 1.0).abs() <= 1e-9);
        for eps in [0.3, 0.05, 1e-3, 1e-6] {
            let s = log_damped(&b, &chi, eps).unwrap().support().unwrap();
            let bound = 2.0 / eps.ln().abs();
            assert!(s.lo >= -bound - 1e-15 && s.hi <= bound + 1e-15);
        }
        assert!(matches!(log_damped(&b, &chi, 0.5), Err(Error::BadEpsilon { .. })));
    }

    #[test]
    fn damping_binds_for_wide_mollifiers() {
        // radius 4 at eps = 0.3: eps * r = 1.2 > 1/|ln eps| = 0.83
        let wide = base_bump().dilate(4.0).unwrap();
        let spec = KernelSpec::log_damped(wide.clone());
        let k = spec.at(0.3).unwrap();
        assert!(k.support().hi <= 2.0 / 0.3f64.ln().abs());
        let mass = k.profile().integral(&cfg()).unwrap();
        assert!(mass < 1.0 - 1e-4);
        assert!((k.moment(0).unwrap() - mass).abs() <= 1e-9);
    }

    #[test]
    fn synth_examples() {
        let b = base_bump();
        let a0 = synth_aq(&b, 0).unwrap();
        assert_eq!(a0.coeffs().len(), 1);
        let a1 = synth_aq(&b, 1).unwrap();
        assert_eq!(a1.coeffs().len(), 1, "odd moments already vanish");
        let a3 = synth_aq(&b, 3).unwrap();
        let mu = moments(&a3, 4, &cfg()).unwrap();
        for m in &mu[1..=3] {
            assert!(m.abs() <= 1e-9);
        }
        assert!(mu[4].abs() > 1e-4);
        assert!(a3.q() >= 3);
    }

    #[test]
    fn synth_is_a_projection() {
        let t = tilted_bump(0.5).unwrap();
        for q in 0..=3 {
            let once = synth_aq(&t, q).unwrap();
            let twice = synth_aq(&once, q).unwrap();
            for j in 0..=q {
                assert!((once.moment(j) - twice.moment(j)).abs() <= 2.0 * MOMENT_TOL);
            }
        }
    }

    #[test]
    fn synth_rejects_ill_conditioned_systems() {
        // moments of a narrow bump fall off like 0.01^j
        let err = synth_aq(&base_bump().dilate(0.01).unwrap(), 6);
        assert!(matches!(err, Err(Error::IllConditioned { .. })), "{err:?}");
        assert!(matches!(synth_aq(&base_bump(), 13), Err(Error::Invalid(_))));
    }

    #[test]
    fn scaling_moves_moments_by_powers_of_eps() {
        let phi = synth_aq(&tilted_bump(0.5).unwrap(), 1).unwrap();
        let eps = 0.1;
        let s = scale(&phi, eps).unwrap();
        let mu_s = s.moments(4, &cfg()).unwrap();
        for (j, m) in mu_s.iter().enumerate() {
            assert!((m - eps.powi(j as i32) * phi.moment(j)).abs() <= 1e-10);
        }
    }

    #[test]
    fn kernel_at_examples() {
        let b = base_bump();
        let model = KernelSpec::model(b.clone());
        let k = kernel_at(&model, 1.0, 0.0).unwrap();
        for y in [-0.9, -0.2, 0.0, 0.5] {
            assert_eq!(k.eval(y), b.expr().eval(y));
        }
        for (eps, x) in [(0.5, 0.3), (0.01, -0.7)] {
            let k = kernel_at(&model, eps, x).unwrap();
            assert!((k.integral(&cfg()).unwrap() - 1.0).abs() <= 1e-9);
        }
        let ld = kernel_at(&KernelSpec::log_damped(b.clone()), 0.01, 0.0).unwrap();
        let md = kernel_at(&model, 0.01, 0.0).unwrap();
        for i in -12..=12 {
            let y = i as f64 * 1e-3;
            assert_eq!(ld.eval(y), md.eval(y));
        }
        assert!(kernel_at(&KernelSpec::log_damped(b), 0.5, 0.0).is_err());
    }

    #[test]
    fn model_and_log_damped_coincide_when_cutoff_is_inert() {
        let b = base_bump();
        let model = KernelSpec::model(b.clone());
        let ld = KernelSpec::log_damped(b);
        for eps in [0.3, 0.0625, 1e-3] {
            let (km, kl) = (model.at(eps).unwrap(), ld.at(eps).unwrap());
            for i in -50..=50 {
                let w = i as f64 * eps / 40.0;
                assert_eq!(km.profile().eval(w), kl.profile().eval(w));
            }
        }
    }

    #[test]
    fn bad_cutoffs_are_rejected() {
        let b = base_bump();
        assert!(KernelSpec::log_damped_with(b.clone(), SmoothExpr::bump()).is_err());
        assert!(KernelSpec::log_damped_with(b, SmoothExpr::cutoff().affine(0.5, 0.0)).is_err());
    }

    #[test]
    fn record_serializes_polynomial() {
        let r = synth_aq(&base_bump(), 2).unwrap().record();
        assert_eq!(r.q, 3);
        assert_eq!(r.coefficients.len(), 3);
        assert!((r.normalization - 2.252_283_621_043_581).abs() < 1e-9);
    }
}
