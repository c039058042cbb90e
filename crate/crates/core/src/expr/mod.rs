//! Expression trees for smooth functions of one real variable.
//!
//! A [`SmoothExpr`] is an immutable, cheaply clonable tree with exact
//! symbolic differentiation. Every node tracks an optional compact support
//! bound; evaluation outside the bound returns exactly zero, and quadrature
//! clips its domain to the bound.

mod special;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

pub use special::{BumpForm, CutoffForm};

use crate::distribution::MollifiedDist;
use crate::error::{Error, Result};
use crate::poly;
use crate::quadrature::{integrate_split, Interval, QuadConfig};

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var,
    /// Polynomial with ascending coefficients.
    Poly(Vec<f64>),
    /// `inner(scale * x + shift)`.
    Affine {
        scale: f64,
        shift: f64,
        inner: SmoothExpr,
    },
    Sum(Vec<SmoothExpr>),
    Prod(Vec<SmoothExpr>),
    IntPow(SmoothExpr, u32),
    /// `b^(n)` for the bump `exp(-1/(1-x^2))` on `(-1, 1)`.
    Bump(Arc<BumpForm>),
    /// `chi^(n)` for the smooth cutoff, 1 on `[-1, 1]`, 0 outside `(-2, 2)`.
    Cutoff(Arc<CutoffForm>),
    /// A distribution regularized by a kernel family at fixed epsilon.
    Mollified(Arc<MollifiedDist>),
}

#[derive(Debug, Clone)]
pub struct SmoothExpr {
    node: Arc<Node>,
    support: Option<Interval>,
}

impl SmoothExpr {
    fn from_node(node: Node, support: Option<Interval>) -> Self {
        SmoothExpr {
            node: Arc::new(node),
            support,
        }
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn support(&self) -> Option<Interval> {
        self.support
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c), None)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var() -> Self {
        Self::from_node(Node::Var, None)
    }

    pub fn bump() -> Self {
        Self::from_node(Node::Bump(Arc::new(BumpForm::base())), Some(Interval::centered(1.0)))
    }

    pub fn cutoff() -> Self {
        Self::from_node(Node::Cutoff(Arc::new(CutoffForm::base())), Some(Interval::centered(2.0)))
    }

    pub fn mollified(md: MollifiedDist) -> Self {
        let support = md.support();
        Self::from_node(Node::Mollified(Arc::new(md)), support)
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        let coeffs = poly::trim(coeffs.to_vec());
        match coeffs.len() {
            0 => Self::zero(),
            1 => Self::constant(coeffs[0]),
            _ => Self::from_node(Node::Poly(coeffs), None),
        }
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::polynomial(&c)
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// `self(scale * x + shift)`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        if scale == 1.0 && shift == 0.0 {
            return self.clone();
        }
        if scale == 0.0 {
            return Self::constant(self.eval(shift));
        }
        match &*self.node {
            Node::Const(_) => self.clone(),
            Node::Affine {
                scale: s2,
                shift: b2,
                inner,
            } if self.support == inner.support.map(|s| s.preimage_affine(*s2, *b2)) => {
                inner.affine(s2 * scale, s2 * shift + b2)
            }
            _ => {
                let support = self.support.map(|s| s.preimage_affine(scale, shift));
                Self::from_node(
                    Node::Affine {
                        scale,
                        shift,
                        inner: self.clone(),
                    },
                    support,
                )
            }
        }
    }

    /// `self(x - a)`.
    pub fn translate(&self, a: f64) -> Self {
        self.affine(1.0, -a)
    }

    pub fn sum(children: Vec<SmoothExpr>) -> Self {
        let mut konst = 0.0;
        let mut terms = Vec::with_capacity(children.len());
        for c in children {
            match &*c.node {
                Node::Const(v) => konst += v,
                Node::Sum(inner) if c.support == hull_of(inner) => {
                    for t in inner {
                        match *t.node {
                            Node::Const(v) => konst += v,
                            _ => terms.push(t.clone()),
                        }
                    }
                }
                _ => terms.push(c),
            }
        }
        if konst != 0.0 {
            terms.push(Self::constant(konst));
        }
        match terms.len() {
            0 => Self::zero(),
            1 => terms.pop().unwrap(),
            _ => {
                let support = hull_of(&terms);
                Self::from_node(Node::Sum(terms), support)
            }
        }
    }

    pub fn prod(children: Vec<SmoothExpr>) -> Self {
        let mut konst = 1.0;
        let mut factors = Vec::with_capacity(children.len());
        for c in children {
            match &*c.node {
                Node::Const(v) => konst *= v,
                Node::Prod(inner) if c.support == meet_of(inner) => {
                    for t in inner {
                        match *t.node {
                            Node::Const(v) => konst *= v,
                            _ => factors.push(t.clone()),
                        }
                    }
                }
                _ => factors.push(c),
            }
        }
        if konst == 0.0 {
            return Self::zero();
        }
        let mut support: Option<Interval> = None;
        for f in &factors {
            if let Some(s) = f.support {
                support = match support {
                    None => Some(s),
                    Some(acc) => match acc.intersect(&s) {
                        Some(i) => Some(i),
                        None => return Self::zero(),
                    },
                };
            }
        }
        if konst != 1.0 {
            factors.insert(0, Self::constant(konst));
        }
        match factors.len() {
            0 => Self::one(),
            1 => factors.pop().unwrap(),
            _ => Self::from_node(Node::Prod(factors), support),
        }
    }

    pub fn powi(&self, k: u32) -> Self {
        match (k, &*self.node) {
            (0, _) => Self::one(),
            (1, _) => self.clone(),
            (_, Node::Const(c)) => Self::constant(c.powi(k as i32)),
            _ => Self::from_node(Node::IntPow(self.clone(), k), self.support),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::prod(vec![Self::constant(c), self.clone()])
    }

    /// Narrows the declared support. Only valid when the function already
    /// vanishes outside `iv`.
    pub fn restrict(&self, iv: Interval) -> Self {
        let support = match self.support {
            Some(s) => match s.intersect(&iv) {
                Some(i) => i,
                None => return Self::zero(),
            },
            None => iv,
        };
        SmoothExpr {
            node: self.node.clone(),
            support: Some(support),
        }
    }

    fn restrict_opt(self, iv: Option<Interval>) -> Self {
        match iv {
            Some(iv) => self.restrict(iv),
            None => self,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if let Some(s) = self.support {
            if x < s.lo || x > s.hi {
                return 0.0;
            }
        }
        match &*self.node {
            Node::Const(c) => *c,
            Node::Var => x,
            Node::Poly(c) => poly::eval(c, x),
            Node::Affine { scale, shift, inner } => inner.eval(scale * x + shift),
            Node::Sum(ts) => ts.iter().map(|t| t.eval(x)).sum(),
            Node::Prod(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval(x);
                    if acc == 0.0 {
                        return 0.0;
                    }
                }
                acc
            }
            Node::IntPow(e, k) => e.eval(x).powi(*k as i32),
            Node::Bump(b) => b.eval(x),
            Node::Cutoff(c) => c.eval(x),
            Node::Mollified(m) => m.eval(x),
        }
    }

    pub fn derive(&self) -> SmoothExpr {
        let d = match &*self.node {
            Node::Const(_) => Self::zero(),
            Node::Var => Self::one(),
            Node::Poly(c) => Self::polynomial(&poly::derivative(c)),
            Node::Affine { scale, shift, inner } => inner.derive().affine(*scale, *shift).scaled(*scale),
            Node::Sum(ts) => Self::sum(ts.iter().map(SmoothExpr::derive).collect()),
            Node::Prod(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for i in 0..fs.len() {
                    let di = fs[i].derive();
                    if di.is_zero() {
                        continue;
                    }
                    let mut factors = fs.clone();
                    factors[i] = di;
                    terms.push(Self::prod(factors));
                }
                Self::sum(terms)
            }
            Node::IntPow(e, k) => {
                let de = e.derive();
                if de.is_zero() {
                    Self::zero()
                } else {
                    Self::prod(vec![Self::constant(*k as f64), e.powi(k - 1), de])
                }
            }
            Node::Bump(b) => Self::from_node(Node::Bump(Arc::new(b.next())), Some(Interval::centered(1.0))),
            Node::Cutoff(c) => Self::from_node(Node::Cutoff(Arc::new(c.next())), Some(Interval::centered(2.0))),
            Node::Mollified(m) => Self::mollified(m.derive()),
        };
        d.restrict_opt(self.support)
    }

    pub fn derive_n(&self, m: u32) -> SmoothExpr {
        let mut e = self.clone();
        for _ in 0..m {
            e = e.derive();
        }
        e
    }

    /// Points where some sub-expression starts or stops being smooth-looking
    /// at quadrature scale: support edges, cutoff plateaus, kernel edges.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&|t| t, &mut out);
        out.retain(|x| x.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breaks(&self, map: &dyn Fn(f64) -> f64, out: &mut Vec<f64>) {
        if out.len() > 4096 {
            return;
        }
        if let Some(s) = self.support {
            out.push(map(s.lo));
            out.push(map(s.hi));
        }
        match &*self.node {
            Node::Affine { scale, shift, inner } => {
                let (a, b) = (*scale, *shift);
                inner.collect_breaks(&|t| map((t - b) / a), out);
            }
            Node::Sum(cs) | Node::Prod(cs) => {
                for c in cs {
                    c.collect_breaks(map, out);
                }
            }
            Node::IntPow(e, _) => e.collect_breaks(map, out),
            Node::Bump(_) => out.extend([-1.0, 1.0].map(map)),
            Node::Cutoff(_) => out.extend([-2.0, -1.0, 1.0, 2.0].map(map)),
            Node::Mollified(m) => out.extend(m.breakpoints().into_iter().map(map)),
            Node::Const(_) | Node::Var | Node::Poly(_) => {}
        }
    }

    /// Integral over the declared support.
    pub fn integral(&self, cfg: &QuadConfig) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let iv = self.support.ok_or(Error::Unbounded("integrand"))?;
        integrate_split(|x| self.eval(x), iv, &self.breakpoints(), cfg)
    }

    /// Integral over `iv`, clipped to the declared support.
    pub fn integral_over(&self, iv: Interval, cfg: &QuadConfig) -> Result<f64> {
        let iv = match self.support {
            Some(s) => match s.intersect(&iv) {
                Some(i) => i,
                None => return Ok(0.0),
            },
            None => iv,
        };
        integrate_split(|x| self.eval(x), iv, &self.breakpoints(), cfg)
    }

    /// `∫ x^j self(x) dx` for `j = 0..=order`.
    pub fn moments(&self, order: usize, cfg: &QuadConfig) -> Result<Vec<f64>> {
        (0..=order)
            .map(|j| (SmoothExpr::monomial(j) * self.clone()).integral(cfg))
            .collect()
    }

    fn render(&self, arg: &Arg) -> (String, Prec) {
        match &*self.node {
            Node::Const(c) => (fmt_num(*c), Prec::Atom),
            Node::Var => (arg.atom(), Prec::Atom),
            Node::Poly(c) => {
                let terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(i, &c)| match i {
                        0 => fmt_num(c),
                        1 => format!("{} * {}", fmt_num(c), arg.atom()),
                        _ => format!("{} * {}^{i}", fmt_num(c), arg.atom()),
                    })
                    .collect();
                (terms.join(" + "), Prec::Sum)
            }
            Node::Affine { scale, shift, inner } => {
                let text = if *shift == 0.0 {
                    format!("{} * {}", fmt_num(*scale), arg.atom())
                } else {
                    format!("{} * {} + {}", fmt_num(*scale), arg.atom(), fmt_num(*shift))
                };
                inner.render(&Arg { text, atomic: false })
            }
            Node::Sum(ts) => (
                ts.iter().map(|t| t.render(arg).0).collect::<Vec<_>>().join(" + "),
                Prec::Sum,
            ),
            Node::Prod(fs) => (
                fs.iter()
                    .map(|f| wrap(f.render(arg), Prec::Prod))
                    .collect::<Vec<_>>()
                    .join(" * "),
                Prec::Prod,
            ),
            Node::IntPow(e, k) => (format!("{}^{k}", wrap(e.render(arg), Prec::Atom)), Prec::Pow),
            Node::Bump(b) => (format!("bump{}({})", "'".repeat(b.order as usize), arg.text), Prec::Atom),
            Node::Cutoff(c) => (format!("cutoff{}({})", "'".repeat(c.order as usize), arg.text), Prec::Atom),
            Node::Mollified(m) => (format!("{}({})", m.describe(), arg.text), Prec::Atom),
        }
    }
}

/// Hull of the children's supports, `None` if any child is unbounded.
fn hull_of(terms: &[SmoothExpr]) -> Option<Interval> {
    let mut acc: Option<Interval> = None;
    for t in terms {
        let s = t.support?;
        acc = Some(acc.map_or(s, |a| a.hull(&s)));
    }
    acc
}

/// Intersection of the bounded children's supports.
fn meet_of(factors: &[SmoothExpr]) -> Option<Interval> {
    let mut acc: Option<Interval> = None;
    for s in factors.iter().filter_map(|f| f.support) {
        acc = Some(match acc {
            None => s,
            Some(a) => a.intersect(&s)?,
        });
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Sum,
    Prod,
    Pow,
    Atom,
}

struct Arg {
    text: String,
    atomic: bool,
}

impl Arg {
    fn atom(&self) -> String {
        if self.atomic {
            self.text.clone()
        } else {
            format!("({})", self.text)
        }
    }
}

fn wrap((s, p): (String, Prec), need: Prec) -> String {
    if p < need {
        format!("({s})")
    } else {
        s
    }
}

/// Shortest round-tripping decimal, negatives parenthesized.
pub fn fmt_num(c: f64) -> String {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        format!("({c})")
    } else {
        format!("{c}")
    }
}

impl fmt::Display for SmoothExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arg = Arg {
            text: "x".into(),
            atomic: true,
        };
        f.write_str(&self.render(&arg).0)
    }
}

impl Add for SmoothExpr {
    type Output = SmoothExpr;
    fn add(self, rhs: SmoothExpr) -> SmoothExpr {
        SmoothExpr::sum(vec![self, rhs])
    }
}

impl Sub for SmoothExpr {
    type Output = SmoothExpr;
    fn sub(self, rhs: SmoothExpr) -> SmoothExpr {
        SmoothExpr::sum(vec![self, -rhs])
    }
}

impl Mul for SmoothExpr {
    type Output = SmoothExpr;
    fn mul(self, rhs: SmoothExpr) -> SmoothExpr {
        SmoothExpr::prod(vec![self, rhs])
    }
}

impl Neg for SmoothExpr {
    type Output = SmoothExpr;
    fn neg(self) -> SmoothExpr {
        self.scaled(-1.0)
    }
}

/// A nonempty family of compactly supported test functions.
#[derive(Debug, Clone)]
pub struct ProbeFamily {
    probes: Vec<SmoothExpr>,
}

impl ProbeFamily {
    pub fn new(probes: Vec<SmoothExpr>) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::Invalid("probe family must be nonempty".into()));
        }
        if let Some(i) = probes.iter().position(|p| p.support().is_none()) {
            return Err(Error::Invalid(format!("probe {i} has no compact support")));
        }
        Ok(ProbeFamily { probes })
    }

    /// Five translated and dilated bumps covering `[-1, 1]`, plus the odd
    /// probe `x * bump(x)`.
    pub fn standard() -> Self {
        let bumps = [(-0.6, 0.4), (-0.15, 0.6), (0.15, 0.6), (0.6, 0.4), (0.0, 1.0)]
            .into_iter()
            .map(|(center, half_width)| SmoothExpr::bump().affine(1.0 / half_width, -center / half_width));
        let mut probes: Vec<SmoothExpr> = bumps.collect();
        probes.push(SmoothExpr::var() * SmoothExpr::bump());
        ProbeFamily { probes }
    }

    pub fn probes(&self) -> &[SmoothExpr] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}
