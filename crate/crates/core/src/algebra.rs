//! Representatives of generalized functions and their realization at a
//! kernel family and a fixed epsilon.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use crate::distribution::{regularize, Distribution};
use crate::error::{Error, Result};
use crate::expr::SmoothExpr;
use crate::mollifier::{KernelSpec, ScaledKernel};
use crate::quadrature::QuadConfig;

#[derive(Debug)]
pub enum RepNode {
    Iota(Distribution),
    Sigma(SmoothExpr),
    /// The coordinate function `x`.
    SigmaVar,
    Sum(Vec<Representative>),
    Prod(Vec<Representative>),
    IntPow(Representative, u32),
    /// `∂_x` of the net.
    Deriv(Representative),
}

#[derive(Debug, Clone)]
pub struct Representative {
    node: Arc<RepNode>,
}

impl Representative {
    fn new(node: RepNode) -> Self {
        Representative { node: Arc::new(node) }
    }

    pub fn iota(u: Distribution) -> Self {
        Self::new(RepNode::Iota(u))
    }

    pub fn sigma(f: SmoothExpr) -> Self {
        Self::new(RepNode::Sigma(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::sigma(SmoothExpr::constant(c))
    }

    pub fn var() -> Self {
        Self::new(RepNode::SigmaVar)
    }

    pub fn sum(children: Vec<Representative>) -> Self {
        Self::new(RepNode::Sum(children))
    }

    pub fn prod(children: Vec<Representative>) -> Self {
        Self::new(RepNode::Prod(children))
    }

    pub fn powi(&self, k: u32) -> Self {
        Self::new(RepNode::IntPow(self.clone(), k))
    }

    pub fn deriv(&self) -> Self {
        Self::new(RepNode::Deriv(self.clone()))
    }

    fn as_const(&self) -> Option<f64> {
        match &*self.node {
            RepNode::Sigma(f) => f.as_const(),
            _ => None,
        }
    }

    pub fn node(&self) -> &RepNode {
        &self.node
    }

    fn id(&self) -> usize {
        Arc::as_ptr(&self.node) as usize
    }
}

impl Add for Representative {
    type Output = Representative;
    fn add(self, rhs: Representative) -> Representative {
        Representative::sum(vec![self, rhs])
    }
}

impl Sub for Representative {
    type Output = Representative;
    fn sub(self, rhs: Representative) -> Representative {
        Representative::sum(vec![self, -rhs])
    }
}

impl Mul for Representative {
    type Output = Representative;
    fn mul(self, rhs: Representative) -> Representative {
        Representative::prod(vec![self, rhs])
    }
}

impl Neg for Representative {
    type Output = Representative;
    fn neg(self) -> Representative {
        Representative::prod(vec![Representative::constant(-1.0), self])
    }
}

/// Realizes representatives against one kernel family. With memoization on,
/// realized sub-trees are cached per (node, epsilon); cached and uncached
/// results are identical.
#[derive(Debug)]
pub struct Realizer {
    spec: KernelSpec,
    cfg: QuadConfig,
    memo: Option<Mutex<HashMap<(usize, u64), (Representative, SmoothExpr)>>>,
}

impl Realizer {
    pub fn new(spec: KernelSpec, cfg: QuadConfig, memoize: bool) -> Self {
        Realizer {
            spec,
            cfg,
            memo: memoize.then(|| Mutex::new(HashMap::new())),
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn cfg(&self) -> &QuadConfig {
        &self.cfg
    }

    pub fn realize(&self, r: &Representative, eps: f64) -> Result<SmoothExpr> {
        let kernel = Arc::new(self.spec.at(eps)?);
        Ok(self.realize_at(r, &kernel))
    }

    pub fn realize_at(&self, r: &Representative, kernel: &Arc<ScaledKernel>) -> SmoothExpr {
        let key = (r.id(), kernel.eps().to_bits());
        if let Some(memo) = &self.memo {
            if let Some((_, e)) = memo.lock().unwrap().get(&key) {
                return e.clone();
            }
        }
        let out = match r.node() {
            RepNode::Iota(u) => regularize(u, kernel, &self.cfg),
            RepNode::Sigma(f) => f.clone(),
            RepNode::SigmaVar => SmoothExpr::var(),
            RepNode::Sum(cs) => SmoothExpr::sum(cs.iter().map(|c| self.realize_at(c, kernel)).collect()),
            RepNode::Prod(cs) => SmoothExpr::prod(cs.iter().map(|c| self.realize_at(c, kernel)).collect()),
            RepNode::IntPow(c, k) => self.realize_at(c, kernel).powi(*k),
            RepNode::Deriv(c) => self.realize_at(c, kernel).derive(),
        };
        if let Some(memo) = &self.memo {
            memo.lock().unwrap().insert(key, (r.clone(), out.clone()));
        }
        out
    }

    /// `∫ realize(R)(x) psi(x) dx`.
    pub fn theta_pairing(&self, r: &Representative, eps: f64, psi: &SmoothExpr) -> Result<f64> {
        let kernel = Arc::new(self.spec.at(eps)?);
        self.pair_at(r, &kernel, psi)
    }

    /// Derivatives are moved onto the probe, which keeps the integrand
    /// `O(1/eps)` instead of `O(eps^-m-1)`.
    pub(crate) fn pair_at(&self, r: &Representative, kernel: &Arc<ScaledKernel>, psi: &SmoothExpr) -> Result<f64> {
        match r.node() {
            RepNode::Deriv(c) => Ok(-self.pair_at(c, kernel, &psi.derive())?),
            RepNode::Sum(cs) => cs.iter().map(|c| self.pair_at(c, kernel, psi)).sum(),
            RepNode::Iota(Distribution::Dirac { order, at }) if *order > 0 => {
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let base = regularize(&Distribution::dirac(0, *at), kernel, &self.cfg);
                Ok(sign * pair_realized(&base, &psi.derive_n(*order), &self.cfg)?)
            }
            RepNode::Prod(cs) => {
                let (consts, rest): (Vec<_>, Vec<_>) = cs.iter().partition(|c| c.as_const().is_some());
                match rest.as_slice() {
                    [one] if !consts.is_empty() => {
                        let k: f64 = consts.iter().map(|c| c.as_const().unwrap()).product();
                        Ok(k * self.pair_at(one, kernel, psi)?)
                    }
                    _ => pair_realized(&self.realize_at(r, kernel), psi, &self.cfg),
                }
            }
            _ => pair_realized(&self.realize_at(r, kernel), psi, &self.cfg),
        }
    }
}

pub(crate) fn pair_realized(f: &SmoothExpr, psi: &SmoothExpr, cfg: &QuadConfig) -> Result<f64> {
    if psi.support().is_none() {
        return Err(Error::Unbounded("probe"));
    }
    let v = (f.clone() * psi.clone()).integral(cfg)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        })
    }
}

pub fn realize(r: &Representative, spec: &KernelSpec, eps: f64, cfg: &QuadConfig) -> Result<SmoothExpr> {
    Realizer::new(spec.clone(), *cfg, false).realize(r, eps)
}

pub fn theta_pairing(r: &Representative, spec: &KernelSpec, eps: f64, psi: &SmoothExpr, cfg: &QuadConfig) -> Result<f64> {
    Realizer::new(spec.clone(), *cfg, false).theta_pairing(r, eps, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::{base_bump, scale, synth_aq};
    use crate::quadrature::Interval;
    use proptest::prelude::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn model() -> KernelSpec {
        KernelSpec::model(base_bump())
    }

    fn delta() -> Representative {
        Representative::iota(Distribution::delta())
    }

    #[test]
    fn iota_delta_is_the_scaled_mollifier() {
        for eps in [0.5, 0.05] {
            let r = realize(&delta(), &model(), eps, &cfg()).unwrap();
            let s = scale(&base_bump(), eps).unwrap();
            for i in -20..=20 {
                let x = i as f64 * eps / 15.0;
                assert!((r.eval(x) - s.eval(x)).abs() <= 1e-12 * s.eval(0.0));
            }
        }
    }

    #[test]
    fn sigma_is_multiplicative() {
        let f = SmoothExpr::polynomial(&[1.0, 2.0]);
        let g = SmoothExpr::bump();
        let r = Representative::sigma(f.clone()) * Representative::sigma(g.clone());
        for eps in [1.0, 0.01] {
            let e = realize(&r, &model(), eps, &cfg()).unwrap();
            for x in [-0.5, 0.0, 0.3] {
                assert_eq!(e.eval(x), f.eval(x) * g.eval(x));
            }
        }
    }

    #[test]
    fn iota_heaviside_far_from_the_jump() {
        let eps = 0.05;
        let r = realize(&Representative::iota(Distribution::heaviside(0.0)), &model(), eps, &cfg()).unwrap();
        assert!((r.eval(3.0 * eps) - 1.0).abs() <= 1e-9);
        assert!(r.eval(-3.0 * eps).abs() <= 1e-9);
    }

    #[test]
    fn sigma_pairing_is_eps_independent() {
        let f = SmoothExpr::polynomial(&[0.5, -1.0, 2.0]);
        let psi = SmoothExpr::bump();
        let exact = (f.clone() * psi.clone()).integral(&cfg()).unwrap();
        for eps in [0.5, 0.01] {
            let v = theta_pairing(&Representative::sigma(f.clone()), &model(), eps, &psi, &cfg()).unwrap();
            assert!((v - exact).abs() <= 1e-10);
        }
    }

    #[test]
    fn delta_pairing_ladder_tends_to_probe_value() {
        let psi = SmoothExpr::bump().affine(1.0 / 0.6, 0.1 / 0.6);
        let target = psi.eval(0.0);
        let mut prev = f64::INFINITY;
        for j in 2..10 {
            let eps = 0.5f64.powi(j);
            let dev = (theta_pairing(&delta(), &model(), eps, &psi, &cfg()).unwrap() - target).abs();
            assert!(dev < prev || dev < 1e-9);
            prev = dev;
        }
        assert!(prev <= 1e-5);
    }

    #[test]
    fn x_delta_product_is_order_eps() {
        // ε ∫ z^k ρ(z)^k ψ(εz) χ(εz|ln ε|)^k dz with k = 2
        let spec = KernelSpec::log_damped(base_bump());
        let r = Representative::var().powi(2) * delta().powi(2);
        let psi = SmoothExpr::bump();
        let rho = base_bump();
        let zz = (SmoothExpr::monomial(2) * rho.expr().powi(2)).integral(&cfg()).unwrap();
        for eps in [1e-2, 1e-3] {
            let v = theta_pairing(&r, &spec, eps, &psi, &cfg()).unwrap();
            assert!((v / eps - zz * psi.eval(0.0)).abs() <= 1e-3 * zz);
        }
    }

    #[test]
    fn prototype_negligible_element_is_a_moment() {
        let phi = synth_aq(&base_bump(), 1).unwrap();
        let mu2 = phi.moment(2);
        let spec = KernelSpec::scaled_aq(phi);
        let x = || Representative::iota(Distribution::polynomial(&[0.0, 1.0]));
        let r = x() * x() - Representative::iota(Distribution::polynomial(&[0.0, 0.0, 1.0]));
        let eps = 0.1;
        let e = realize(&r, &spec, eps, &cfg()).unwrap();
        for xv in [-0.4, 0.0, 0.7] {
            assert!((e.eval(xv) + eps * eps * mu2).abs() <= 1e-15);
        }
    }

    #[test]
    fn memoization_is_invisible() {
        let r = delta().powi(2) + Representative::iota(Distribution::abs()).deriv();
        let psi = SmoothExpr::bump().affine(2.0, -0.2);
        let plain = Realizer::new(model(), cfg(), false);
        let memo = Realizer::new(model(), cfg(), true);
        for eps in [0.1, 0.02, 0.1] {
            let a = plain.theta_pairing(&r, eps, &psi).unwrap();
            let b = memo.theta_pairing(&r, eps, &psi).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bad_eps_is_reported() {
        let spec = KernelSpec::log_damped(base_bump());
        assert!(matches!(
            realize(&delta(), &spec, 0.5, &cfg()),
            Err(Error::BadEpsilon { .. })
        ));
    }

    fn arb_rep() -> impl Strategy<Value = Representative> {
        let leaf = prop_oneof![
            Just(Representative::var()),
            Just(delta()),
            Just(Representative::iota(Distribution::heaviside(0.1))),
            (-2.0..2.0f64).prop_map(Representative::constant),
            Just(Representative::sigma(SmoothExpr::bump())),
        ];
        leaf.prop_recursive(3, 8, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), 0u32..3).prop_map(|(a, k)| a.powi(k)),
                inner.prop_map(|a| a.deriv()),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn morphism_identities(a in arb_rep(), b in arb_rep(), x in -0.3..0.3f64) {
            let spec = model();
            let eps = 0.25;
            let ra = realize(&a, &spec, eps, &cfg()).unwrap().eval(x);
            let rb = realize(&b, &spec, eps, &cfg()).unwrap().eval(x);
            let sum = realize(&(a.clone() + b.clone()), &spec, eps, &cfg()).unwrap().eval(x);
            let prod = realize(&(a.clone() * b.clone()), &spec, eps, &cfg()).unwrap().eval(x);
            // constant folding may reorder floating additions
            prop_assert!((sum - (ra + rb)).abs() <= 1e-12 * (1.0 + ra.abs() + rb.abs()));
            prop_assert!((prod - ra * rb).abs() <= 1e-12 * (1.0 + (ra * rb).abs()));
        }

        #[test]
        fn leibniz_on_realizations(a in arb_rep(), b in arb_rep(), x in -0.3..0.3f64) {
            let spec = model();
            let eps = 0.25;
            let r = |t: &Representative| realize(t, &spec, eps, &cfg()).unwrap().eval(x);
            let lhs = r(&(a.clone() * b.clone()).deriv());
            let (t1, t2) = (r(&a.deriv()) * r(&b), r(&a) * r(&b.deriv()));
            // regularized jumps are evaluated by quadrature
            prop_assert!((lhs - t1 - t2).abs() <= 1e-8 * (1.0 + t1.abs() + t2.abs()), "{} vs {}", lhs, t1 + t2);
        }
    }

    #[test]
    fn derivatives_move_onto_the_probe() {
        let psi = SmoothExpr::bump().affine(2.0, -0.2);
        let h = Representative::iota(Distribution::heaviside(0.1));
        let cases = [
            Representative::iota(Distribution::dirac(2, 0.25)),
            (h.clone() * Representative::var()).deriv(),
            -(h.deriv().deriv()) + Representative::constant(2.0) * h.clone(),
        ];
        for r in cases {
            let by_parts = theta_pairing(&r, &model(), 0.1, &psi, &cfg()).unwrap();
            let direct = pair_realized(&realize(&r, &model(), 0.1, &cfg()).unwrap(), &psi, &cfg()).unwrap();
            assert!((by_parts - direct).abs() <= 1e-8 * (1.0 + direct.abs()), "{by_parts} vs {direct}");
        }
    }

    #[test]
    fn heaviside_delta_oracle_by_brute_force() {
        // ∫ (H * φ_ε)(x) φ_ε(x) ψ(x) dx with the inner convolution done by plain quadrature
        let eps = 0.01;
        let psi = SmoothExpr::bump().affine(1.0 / 0.6, 0.1 / 0.6);
        let spec = model();
        let r = Representative::iota(Distribution::heaviside(0.0)) * delta();
        let v = theta_pairing(&r, &spec, eps, &psi, &cfg()).unwrap();
        let k = spec.at(eps).unwrap();
        let conv = |x: f64| {
            k.at_point(x)
                .integral_over(Interval { lo: 0.0, hi: 1.0 }, &cfg())
                .unwrap()
        };
        let outer = crate::quadrature::integrate(
            |x| conv(x) * k.at_point(x).eval(0.0) * psi.eval(x),
            Interval::centered(eps),
            &cfg(),
        )
        .unwrap();
        assert!((v - outer).abs() <= 1e-8);
        assert!((v - 0.5 * psi.eval(0.0)).abs() <= 1e-2);
    }
}
