//! Closed forms for the derivatives of the two fixed smooth atoms.
//!
//! The bump `b(x) = exp(-1/(1-x^2))` has derivatives
//! `b^(n)(x) = P_n(x) / (1-x^2)^(2n) * b(x)` with polynomial `P_n`.
//!
//! The cutoff is `chi(x) = h(2 - |x|)` with the smooth step
//! `h(t) = s(t) / (s(t) + s(1-t))`, `s(t) = exp(-1/t)` for `t > 0`.
//! Every derivative of `h` is a finite sum of terms
//! `c * t^-a * (1-t)^-b * u^i * v^j * D^-m` where `u = s(t)`, `v = s(1-t)`,
//! `D = u + v`; differentiation maps terms to terms.

use std::collections::BTreeMap;

use crate::poly;

#[derive(Debug, Clone, PartialEq)]
pub struct BumpForm {
    pub order: u32,
    num: Vec<f64>,
    den_pow: i32,
}

impl BumpForm {
    pub fn base() -> Self {
        BumpForm {
            order: 0,
            num: vec![1.0],
            den_pow: 0,
        }
    }

    pub fn next(&self) -> Self {
        // d/dx [P t^-k b] with t = 1-x^2, t' = -2x, b' = -2x t^-2 b:
        //   = [P' t^2 + 2k x P t - 2x P] t^-(k+2) b
        let k = self.den_pow as f64;
        let t = [1.0, 0.0, -1.0];
        let dp = poly::derivative(&self.num);
        let a = poly::mul(&dp, &poly::mul(&t, &t));
        let b = poly::mul(&[0.0, 2.0 * k], &poly::mul(&self.num, &t));
        let c = poly::mul(&[0.0, -2.0], &self.num);
        BumpForm {
            order: self.order + 1,
            num: poly::trim(poly::add(&poly::add(&a, &b), &c)),
            den_pow: self.den_pow + 2,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = 1.0 - x * x;
        if t <= 0.0 {
            return 0.0;
        }
        let e = -1.0 / t - self.den_pow as f64 * t.ln();
        if e < -745.0 {
            return 0.0;
        }
        poly::eval(&self.num, x) * e.exp()
    }
}

type TermKey = (u32, u32, u32, u32, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffForm {
    pub order: u32,
    terms: Vec<(TermKey, f64)>,
}

impl CutoffForm {
    pub fn base() -> Self {
        CutoffForm {
            order: 0,
            terms: vec![((0, 0, 1, 0, 1), 1.0)],
        }
    }

    pub fn next(&self) -> Self {
        let mut out: BTreeMap<TermKey, f64> = BTreeMap::new();
        let mut push = |key: TermKey, c: f64| {
            if c != 0.0 {
                *out.entry(key).or_insert(0.0) += c;
            }
        };
        for &((a, b, i, j, m), c) in &self.terms {
            if a > 0 {
                push((a + 1, b, i, j, m), -(a as f64) * c);
            }
            if b > 0 {
                push((a, b + 1, i, j, m), b as f64 * c);
            }
            if i > 0 {
                push((a + 2, b, i, j, m), i as f64 * c);
            }
            if j > 0 {
                push((a, b + 2, i, j, m), -(j as f64) * c);
            }
            if m > 0 {
                push((a + 2, b, i + 1, j, m + 1), -(m as f64) * c);
                push((a, b + 2, i, j + 1, m + 1), m as f64 * c);
            }
        }
        CutoffForm {
            order: self.order + 1,
            terms: out.into_iter().filter(|(_, c)| *c != 0.0).collect(),
        }
    }

    /// `h^(n)(t)` for the smooth step.
    pub fn step(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return if self.order == 0 { 1.0 } else { 0.0 };
        }
        let s = 1.0 - t;
        let (lt, ls) = (t.ln(), s.ln());
        let d = (-1.0 / t).exp() + (-1.0 / s).exp();
        let ld = d.ln();
        self.terms
            .iter()
            .map(|&((a, b, i, j, m), c)| {
                let e = -(i as f64) / t - a as f64 * lt - (j as f64) / s - b as f64 * ls - m as f64 * ld;
                if e < -745.0 {
                    0.0
                } else {
                    c * e.exp()
                }
            })
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax >= 2.0 {
            return 0.0;
        }
        if ax <= 1.0 {
            return if self.order == 0 { 1.0 } else { 0.0 };
        }
        let v = self.step(2.0 - ax);
        // chi^(n)(x) = (-sgn x)^n h^(n)(2 - |x|)
        if x > 0.0 && self.order % 2 == 1 {
            -v
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn bump_forms_match_finite_differences() {
        let mut form = BumpForm::base();
        for _ in 0..4 {
            let next = form.next();
            for x in [-0.8, -0.31, 0.0, 0.27, 0.66, 0.93] {
                let fd = central(|y| form.eval(y), x, 1e-6);
                let exact = next.eval(x);
                assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "order {} x {x}: {fd} vs {exact}", next.order);
            }
            form = next;
        }
    }

    #[test]
    fn bump_vanishes_outside() {
        let d3 = BumpForm::base().next().next().next();
        assert_eq!(d3.eval(1.0), 0.0);
        assert_eq!(d3.eval(-1.5), 0.0);
        assert!(d3.eval(0.999_999).is_finite());
    }

    #[test]
    fn step_is_symmetric_transition() {
        let h = CutoffForm::base();
        for t in [0.05, 0.2, 0.5, 0.71, 0.99] {
            assert!((h.step(t) + h.step(1.0 - t) - 1.0).abs() < 1e-15);
        }
        assert_eq!(h.step(-0.1), 0.0);
        assert_eq!(h.step(1.2), 1.0);
    }

    #[test]
    fn cutoff_forms_match_finite_differences() {
        let mut form = CutoffForm::base();
        for _ in 0..4 {
            let next = form.next();
            for x in [-1.9, -1.6, -1.2, 0.5, 1.05, 1.5, 1.77] {
                let fd = central(|y| form.eval(y), x, 1e-6);
                let exact = next.eval(x);
                assert!((fd - exact).abs() <= 2e-6 * (1.0 + exact.abs()), "order {} x {x}: {fd} vs {exact}", next.order);
            }
            form = next;
        }
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let chi = CutoffForm::base();
        assert_eq!(chi.eval(0.0), 1.0);
        assert_eq!(chi.eval(-1.0), 1.0);
        assert_eq!(chi.eval(2.0), 0.0);
        assert!(chi.eval(1.5) > 0.0 && chi.eval(1.5) < 1.0);
    }
}
