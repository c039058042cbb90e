//! Epsilon ladders, limit and rate fitting, association tests and the
//! negligibility-gap analysis.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{Realizer, Representative};
use crate::distribution::{Combination, FunctionFamily};
use crate::error::{Error, Result};
use crate::expr::{ProbeFamily, SmoothExpr};
use crate::mollifier::{synth_aq, KernelSpec, Mollifier, MollifierRecord, MOMENT_TOL};
use crate::quadrature::{Interval, QuadConfig};
use crate::seminorm::{norm_gap, norm_kernel, GridSpec};

pub const EVIDENCE_LABEL: &str = "finite-sample evidence";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ladder {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for Ladder {
    fn default() -> Self {
        Ladder {
            eps0: 0.0625,
            ratio: 0.5,
            count: 11,
        }
    }
}

impl Ladder {
    pub fn new(eps0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 <= 1.0) {
            return Err(Error::Invalid(format!("ladder start {eps0} must lie in (0, 1]")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Invalid(format!("ladder ratio {ratio} must lie in (0, 1)")));
        }
        if count < 6 {
            return Err(Error::Invalid(format!("ladder needs at least 6 rungs, got {count}")));
        }
        let lad = Ladder { eps0, ratio, count };
        if !(lad.eps().last().is_some_and(|e| *e > 0.0)) {
            return Err(Error::Invalid("ladder underflows to zero".into()));
        }
        Ok(lad)
    }

    pub fn eps(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.eps0 * self.ratio.powi(k as i32)).collect()
    }

    pub fn check_for(&self, spec: &KernelSpec) -> Result<()> {
        spec.check_eps(self.eps0)
    }

    /// Same span with the ratio square-rooted.
    pub fn denser(&self) -> Ladder {
        Ladder {
            eps0: self.eps0,
            ratio: self.ratio.sqrt(),
            count: 2 * self.count - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub eps: f64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Sample {
    pub fn ok(eps: f64, value: f64) -> Self {
        Sample { eps, value, error: None }
    }

    fn from_result(eps: f64, r: Result<f64>) -> Self {
        match r {
            Ok(v) => Sample::ok(eps, v),
            Err(e) => Sample {
                eps,
                value: f64::NAN,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn usable(&self) -> bool {
        self.value.is_finite() && self.eps > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub limit: f64,
    /// `+inf` when every deviation sits inside the noise floor.
    pub rate: f64,
    pub residual: f64,
}

/// Default noise floor: ten times the default quadrature tolerance.
pub const NOISE_FLOOR: f64 = 1e-9;

pub fn fit_rate(samples: &[Sample], limit_hint: Option<f64>) -> Result<Fit> {
    fit_rate_with_floor(samples, limit_hint, NOISE_FLOOR)
}

/// Least-squares slope of `ln|a_k - L|` against `ln eps_k` over the rungs
/// whose deviation exceeds `floor`. `L` is the hint or the Aitken
/// extrapolation of the last three rungs.
pub fn fit_rate_with_floor(samples: &[Sample], limit_hint: Option<f64>, floor: f64) -> Result<Fit> {
    let usable: Vec<&Sample> = samples.iter().filter(|s| s.usable()).collect();
    if usable.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: usable.len(),
        });
    }
    let limit = limit_hint.unwrap_or_else(|| {
        let n = usable.len();
        aitken(usable[n - 3].value, usable[n - 2].value, usable[n - 1].value)
    });
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .filter(|s| (s.value - limit).abs() > floor)
        .map(|s| (s.eps.ln(), (s.value - limit).abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::AllBelowFloor);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let rate = sxy / sxx;
    let icpt = my - rate * mx;
    let residual = (pts.iter().map(|p| (p.1 - icpt - rate * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Fit { limit, rate, residual })
}

/// Aitken's delta-squared extrapolation; falls back to the last value when
/// the second difference vanishes.
pub fn aitken(a0: f64, a1: f64, a2: f64) -> f64 {
    let d1 = a1 - a0;
    let d2 = a2 - a1;
    let dd = d2 - d1;
    if dd == 0.0 || !dd.is_finite() {
        return a2;
    }
    let l = a2 - d2 * d2 / dd;
    if l.is_finite() {
        l
    } else {
        a2
    }
}

/// Fit that maps "all below floor" to the `+inf` rate sentinel.
fn fit_or_sentinel(samples: &[Sample], hint: Option<f64>, floor: f64) -> Result<(Fit, bool)> {
    match fit_rate_with_floor(samples, hint, floor) {
        Ok(f) => Ok((f, false)),
        Err(Error::AllBelowFloor) => {
            let last = samples.iter().rev().find(|s| s.usable()).map_or(f64::NAN, |s| s.value);
            Ok((
                Fit {
                    limit: hint.unwrap_or(last),
                    rate: f64::INFINITY,
                    residual: 0.0,
                },
                true,
            ))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Associated,
    NotAssociated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Associated => "associated",
            Verdict::NotAssociated => "not_associated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub assoc_tol: f64,
    pub fit_tol: f64,
    pub rate_margin: f64,
    pub noise_floor: f64,
    pub divergence_slope: f64,
    pub divergence_rungs: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            assoc_tol: 1e-4,
            fit_tol: 0.15,
            rate_margin: 0.05,
            noise_floor: NOISE_FLOOR,
            divergence_slope: -0.1,
            divergence_rungs: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Plain,
    Strong { beta0: f64 },
    SAssoc { s: f64 },
    Ck { k: u32 },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Plain => write!(f, "plain"),
            Mode::Strong { beta0 } => write!(f, "strong:{beta0}"),
            Mode::SAssoc { s } => write!(f, "s:{s}"),
            Mode::Ck { k } => write!(f, "ck:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub label: String,
    pub samples: Vec<Sample>,
    pub target: Option<f64>,
    pub fit: Fit,
    pub verdict: Verdict,
    pub note: String,
}

/// The deterministic verdict rule for one ladder.
pub fn decide(samples: &[Sample], target: Option<f64>, mode: Mode, thr: &Thresholds) -> Result<(Fit, Verdict, String)> {
    let (fit, all_below) = fit_or_sentinel(samples, target, thr.noise_floor)?;
    let vals: Vec<f64> = samples.iter().filter(|s| s.usable()).map(|s| s.value).collect();
    let n = vals.len();

    let tail = &vals[n.saturating_sub(thr.divergence_rungs)..];
    let growing = tail.len() == thr.divergence_rungs && tail.windows(2).all(|w| w[1].abs() > w[0].abs());
    if growing && fit.rate <= thr.divergence_slope {
        return Ok((fit, Verdict::NotAssociated, "divergence detected (heuristic)".into()));
    }

    let last = vals[n - 1];
    let dev_last = (last - target.unwrap_or(fit.limit)).abs();
    let quiet_tail = vals[n - 3..].iter().all(|v| (v - fit.limit).abs() <= thr.noise_floor);
    let settled = all_below || quiet_tail || (fit.rate >= thr.rate_margin && fit.residual <= thr.fit_tol);
    if dev_last <= thr.assoc_tol && settled {
        let note = if all_below {
            "converged; every deviation within the noise floor".to_string()
        } else {
            "converged".to_string()
        };
        let verdict = match mode {
            Mode::Plain | Mode::Ck { .. } => Verdict::Associated,
            Mode::Strong { beta0 } if fit.rate >= beta0 => Verdict::Associated,
            Mode::SAssoc { s } if fit.rate >= s + thr.rate_margin => Verdict::Associated,
            Mode::Strong { .. } | Mode::SAssoc { .. } => {
                return Ok((fit, Verdict::NotAssociated, format!("{note}, but too slowly")));
            }
        };
        return Ok((fit, verdict, note));
    }

    if let Some(t) = target {
        if let Ok((own, _)) = fit_or_sentinel(samples, None, thr.noise_floor) {
            let settles = own.rate == f64::INFINITY || (own.rate >= thr.rate_margin && own.residual <= thr.fit_tol);
            if settles && (own.limit - t).abs() > thr.assoc_tol {
                return Ok((fit, Verdict::NotAssociated, format!("converges to {} instead", own.limit)));
            }
        }
    }
    Ok((fit, Verdict::Inconclusive, "no convergence certified".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct AssocReport {
    pub mode: Mode,
    pub rows: Vec<LadderReport>,
    pub verdict: Verdict,
    /// Smallest fitted rate over rows.
    pub rate: f64,
    /// Largest residual over rows.
    pub residual: f64,
    /// Row that decided the aggregate.
    pub governing: usize,
    pub thresholds: Thresholds,
    pub label: &'static str,
}

impl AssocReport {
    fn assemble(mode: Mode, rows: Vec<LadderReport>, thr: Thresholds) -> Self {
        let verdict = rows.iter().map(|r| r.verdict).max().unwrap_or(Verdict::Inconclusive);
        let rate = rows.iter().map(|r| r.fit.rate).fold(f64::INFINITY, f64::min);
        let residual = rows.iter().map(|r| r.fit.residual).fold(0.0, f64::max);
        let governing = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.verdict == verdict)
            .min_by(|a, b| a.1.fit.rate.total_cmp(&b.1.fit.rate))
            .map_or(0, |(i, _)| i);
        AssocReport {
            mode,
            rows,
            verdict,
            rate,
            residual,
            governing,
            thresholds: thr,
            label: EVIDENCE_LABEL,
        }
    }

    pub fn governing_row(&self) -> &LadderReport {
        &self.rows[self.governing]
    }
}

/// Knobs shared by the engine entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settings {
    pub quad: QuadConfig,
    pub thresholds: Thresholds,
    /// Window for C^k association.
    pub window: Interval,
    pub grid_x: GridSpec,
    pub grid_y: GridSpec,
    pub memoize: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            quad: QuadConfig::default(),
            thresholds: Thresholds::default(),
            window: Interval::centered(1.0),
            grid_x: GridSpec::DEFAULT_X,
            grid_y: GridSpec::DEFAULT_Y,
            memoize: false,
        }
    }
}

/// `a_k = <realize(R)(eps_k), psi>`; failed rungs carry NaN and the error.
pub fn ladder_eval(r: &Representative, spec: &KernelSpec, psi: &SmoothExpr, lad: &Ladder, settings: &Settings) -> Result<Vec<Sample>> {
    let probes = ProbeFamily::new(vec![psi.clone()])?;
    let mut m = pairing_matrix(r, spec, &probes, lad, settings)?;
    Ok(m.pop().unwrap())
}

/// Samples per probe, rungs evaluated concurrently, output in (probe, rung) order.
fn pairing_matrix(r: &Representative, spec: &KernelSpec, probes: &ProbeFamily, lad: &Ladder, settings: &Settings) -> Result<Vec<Vec<Sample>>> {
    lad.check_for(spec)?;
    let realizer = Realizer::new(spec.clone(), settings.quad, settings.memoize);
    let by_rung: Vec<Vec<Sample>> = lad
        .eps()
        .into_par_iter()
        .map(|eps| match spec.at(eps) {
            Err(e) => probes.probes().iter().map(|_| Sample::from_result(eps, Err(e.clone()))).collect(),
            Ok(k) => {
                let k = Arc::new(k);
                probes
                    .probes()
                    .iter()
                    .map(|psi| Sample::from_result(eps, realizer.pair_at(r, &k, psi)))
                    .collect()
            }
        })
        .collect();
    Ok((0..probes.len())
        .map(|p| by_rung.iter().map(|row| row[p].clone()).collect())
        .collect())
}

/// Per-probe ladders against `<u, psi>` plus the aggregate verdict.
pub fn assoc_test(
    r: &Representative,
    spec: &KernelSpec,
    candidate: &Combination,
    probes: &ProbeFamily,
    lad: &Ladder,
    mode: Mode,
    settings: &Settings,
) -> Result<AssocReport> {
    let thr = settings.thresholds;
    if let Mode::Ck { k } = mode {
        let row = ck_row(r, spec, candidate, lad, k, settings)?;
        return Ok(AssocReport::assemble(mode, vec![row], thr));
    }
    let targets: Vec<f64> = probes
        .probes()
        .iter()
        .map(|psi| candidate.pair(psi, &settings.quad))
        .collect::<Result<_>>()?;
    let matrix = pairing_matrix(r, spec, probes, lad, settings)?;
    let rows = matrix
        .into_iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (samples, t))| {
            let (fit, verdict, note) = decide(&samples, Some(t), mode, &thr)?;
            Ok(LadderReport {
                label: format!("probe {i}"),
                samples,
                target: Some(t),
                fit,
                verdict,
                note,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssocReport::assemble(mode, rows, thr))
}

/// Candidate-free ladders: limits by extrapolation, rates against them.
pub fn rate_scan(r: &Representative, spec: &KernelSpec, probes: &ProbeFamily, lad: &Ladder, settings: &Settings) -> Result<AssocReport> {
    let thr = settings.thresholds;
    let matrix = pairing_matrix(r, spec, probes, lad, settings)?;
    let rows = matrix
        .into_iter()
        .enumerate()
        .map(|(i, samples)| {
            let (fit, verdict, note) = decide(&samples, None, Mode::Plain, &thr)?;
            Ok(LadderReport {
                label: format!("probe {i}"),
                samples,
                target: None,
                fit,
                verdict,
                note,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssocReport::assemble(Mode::Plain, rows, thr))
}

fn ck_row(r: &Representative, spec: &KernelSpec, candidate: &Combination, lad: &Ladder, k: u32, settings: &Settings) -> Result<LadderReport> {
    lad.check_for(spec)?;
    let target = candidate.as_ck(settings.window, k)?;
    let xs = settings.grid_x.points(settings.window);
    let realizer = Realizer::new(spec.clone(), settings.quad, settings.memoize);
    let samples: Vec<Sample> = lad
        .eps()
        .into_par_iter()
        .map(|eps| {
            let sup = realizer.realize(r, eps).and_then(|f| {
                let mut d = f;
                let mut best: f64 = 0.0;
                for j in 0..=k {
                    if j > 0 {
                        d = d.derive();
                    }
                    for &x in &xs {
                        let v = d.eval(x) - target.eval_deriv(x, j);
                        if !v.is_finite() {
                            return Err(Error::NonFinite { lo: x, hi: x });
                        }
                        best = best.max(v.abs());
                    }
                }
                Ok(best)
            });
            Sample::from_result(eps, sup)
        })
        .collect();
    let (fit, verdict, note) = decide(&samples, Some(0.0), Mode::Ck { k }, &settings.thresholds)?;
    Ok(LadderReport {
        label: format!("C^{k} sup on [{}, {}]", settings.window.lo, settings.window.hi),
        samples,
        target: Some(0.0),
        fit,
        verdict,
        note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaERow {
    pub dilation: f64,
    pub mollifier: MollifierRecord,
    pub report: AssocReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaEReport {
    pub q: usize,
    pub rows: Vec<ThetaERow>,
    pub verdict: Verdict,
    pub label: &'static str,
}

/// Dilation of the base mollifier used for the `i`-th family member.
pub fn family_dilation(i: usize) -> f64 {
    1.0 / (1.0 + 0.25 * i as f64)
}

/// Runs the association test on `family_size` distinct `A_q` mollifiers.
/// A finite family cannot witness a statement about all of `A_q`.
#[allow(clippy::too_many_arguments)]
pub fn theta_e_test(
    r: &Representative,
    base: &Mollifier,
    q: usize,
    family_size: usize,
    candidate: &Combination,
    probes: &ProbeFamily,
    lad: &Ladder,
    mode: Mode,
    settings: &Settings,
) -> Result<ThetaEReport> {
    if family_size == 0 {
        return Err(Error::Invalid("family size must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(family_size);
    for i in 0..family_size {
        let s = family_dilation(i);
        let phi = synth_aq(&base.dilate(s)?, q)?;
        let record = phi.record();
        let spec = KernelSpec::scaled_aq(phi);
        let report = assoc_test(r, &spec, candidate, probes, lad, mode, settings)?;
        rows.push(ThetaERow {
            dilation: s,
            mollifier: record,
            report,
        });
    }
    let verdict = rows.iter().map(|r| r.report.verdict).max().unwrap();
    Ok(ThetaEReport {
        q,
        rows,
        verdict,
        label: EVIDENCE_LABEL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GapParams {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub l: u32,
    pub q: u32,
}

impl GapParams {
    pub fn new(a: u32, b: u32, c: u32, l: u32, q: u32) -> Result<Self> {
        if a < 1 || b < 1 {
            return Err(Error::Invalid(format!("gap exponents need a, b >= 1 (got a = {a}, b = {b})")));
        }
        Ok(GapParams { a, b, c, l, q })
    }

    pub fn score(&self) -> i64 {
        self.a as i64 * (self.c + self.l + 1) as i64 - self.b as i64 * (self.q + 1) as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapConclusion {
    Decays,
    CannotConclude,
}

impl GapConclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            GapConclusion::Decays => "decays",
            GapConclusion::CannotConclude => "cannot_conclude",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GapAnalysis {
    pub score: i64,
    pub conclusion: GapConclusion,
}

/// The bound `C eps^{-a(c+l+1)} eps^{b(q+1)}` tends to zero only for a
/// negative score; a zero score leaves it `O(1)`.
pub fn gap_analysis(p: &GapParams) -> GapAnalysis {
    let score = p.score();
    GapAnalysis {
        score,
        conclusion: if score < 0 {
            GapConclusion::Decays
        } else {
            GapConclusion::CannotConclude
        },
    }
}

/// Where the empirical bound is evaluated.
#[derive(Debug, Clone)]
pub struct GapSetup {
    pub base: Mollifier,
    pub k: Interval,
    pub l: Interval,
}

impl GapSetup {
    pub fn new(base: Mollifier) -> Self {
        GapSetup {
            base,
            k: Interval::centered(0.25),
            l: Interval::centered(1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapEmpirical {
    pub params: GapParams,
    pub analysis: GapAnalysis,
    pub mollifier: MollifierRecord,
    pub kernel_norms: Vec<Sample>,
    pub gap_norms: Vec<Sample>,
    pub samples: Vec<Sample>,
    pub fit: Fit,
    /// Log-log slope of the bound; positive means it decays.
    pub slope: f64,
    pub slope_matches: bool,
    pub conclusion: GapConclusion,
    pub conclusions_agree: bool,
}

/// Evaluates `λC ‖φ_ε‖_{K,c;L,l}^a ‖φ_ε − δ‖_{K,c;B}^b` with `B = {x^{q+1}}`
/// on a Model kernel from `A_q` and compares its slope with the score.
pub fn gap_empirical(p: &GapParams, lambda_c: f64, lad: &Ladder, setup: &GapSetup, settings: &Settings) -> Result<GapEmpirical> {
    if !(lambda_c > 0.0 && lambda_c.is_finite()) {
        return Err(Error::Invalid(format!("λC = {lambda_c} must be positive")));
    }
    let phi = synth_aq(&setup.base, p.q as usize)?;
    let top = phi.moment(p.q as usize + 1);
    if top.abs() <= MOMENT_TOL {
        return Err(Error::Invalid(format!(
            "{} has a vanishing moment of order {}; pick an asymmetric base",
            phi.name(),
            p.q + 1
        )));
    }
    let record = phi.record();
    let spec = KernelSpec::model(phi);
    lad.check_for(&spec)?;
    let family = FunctionFamily::monomial(p.q as usize + 1);
    let rungs: Vec<(Sample, Sample, Sample)> = lad
        .eps()
        .into_par_iter()
        .map(|eps| {
            let nk = norm_kernel(&spec, eps, setup.k, p.c, setup.l, p.l, settings.grid_x, settings.grid_y);
            let ng = norm_gap(&spec, eps, setup.k, p.c, &family, settings.grid_x, &settings.quad);
            let bound = match (&nk, &ng) {
                (Ok(k), Ok(g)) => Ok(lambda_c * k.powi(p.a as i32) * g.powi(p.b as i32)),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            (Sample::from_result(eps, nk), Sample::from_result(eps, ng), Sample::from_result(eps, bound))
        })
        .collect();
    let kernel_norms = rungs.iter().map(|r| r.0.clone()).collect();
    let gap_norms = rungs.iter().map(|r| r.1.clone()).collect();
    let samples: Vec<Sample> = rungs.into_iter().map(|r| r.2).collect();
    let fit = fit_rate_with_floor(&samples, Some(0.0), 0.0)?;
    let analysis = gap_analysis(p);
    let slope = fit.rate;
    let conclusion = if slope >= settings.thresholds.rate_margin {
        GapConclusion::Decays
    } else {
        GapConclusion::CannotConclude
    };
    Ok(GapEmpirical {
        params: *p,
        analysis,
        mollifier: record,
        kernel_norms,
        gap_norms,
        samples,
        fit,
        slope,
        slope_matches: (slope + analysis.score as f64).abs() <= 0.1,
        conclusion,
        conclusions_agree: conclusion == analysis.conclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;
    use crate::mollifier::{base_bump, tilted_bump};
    use proptest::prelude::*;

    fn manufactured(a: f64, b: f64, gamma: f64, lad: &Ladder) -> Vec<Sample> {
        lad.eps().into_iter().map(|e| Sample::ok(e, a + b * e.powf(gamma))).collect()
    }

    #[test]
    fn ladder_defaults_and_validation() {
        let lad = Ladder::default();
        let e = lad.eps();
        assert_eq!(e.len(), 11);
        assert_eq!(e[0], 0.0625);
        assert_eq!(e[10], 0.0625 / 1024.0);
        assert!(Ladder::new(0.1, 0.5, 5).is_err());
        assert!(Ladder::new(0.1, 1.0, 8).is_err());
        assert!(Ladder::new(0.5, 0.5, 8).unwrap().check_for(&KernelSpec::log_damped(base_bump())).is_err());
        assert!((lad.denser().eps()[2] - 0.0625 * 0.5).abs() <= 1e-15);
    }

    #[test]
    fn fit_examples() {
        let lad = Ladder::default();
        let f = fit_rate(&manufactured(5.0, 1.0, 1.0, &lad), None).unwrap();
        assert!((f.rate - 1.0).abs() <= 0.01);
        assert!((f.limit - 5.0).abs() <= 1e-9);
        let flat: Vec<Sample> = lad.eps().into_iter().map(|e| Sample::ok(e, 2.5)).collect();
        assert_eq!(fit_rate(&flat, None), Err(Error::AllBelowFloor));
        assert_eq!(
            fit_rate(&flat[..3], None),
            Err(Error::TooFewPoints { needed: 4, got: 3 })
        );
    }

    #[test]
    fn failed_rungs_are_skipped() {
        let lad = Ladder::default();
        let mut s = manufactured(0.0, 2.0, 2.0, &lad);
        s[3].value = f64::NAN;
        s[3].error = Some("boom".into());
        let f = fit_rate(&s, Some(0.0)).unwrap();
        assert!((f.rate - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn verdict_rules() {
        let lad = Ladder::default();
        let thr = Thresholds::default();
        let conv = manufactured(1.0, 1.0, 1.0, &lad);
        let (_, v, _) = decide(&conv, Some(1.0), Mode::Plain, &thr).unwrap();
        assert_eq!(v, Verdict::Associated);
        let (_, v, _) = decide(&conv, Some(1.0), Mode::Strong { beta0: 0.9 }, &thr).unwrap();
        assert_eq!(v, Verdict::Associated);
        let (_, v, _) = decide(&conv, Some(1.0), Mode::Strong { beta0: 1.5 }, &thr).unwrap();
        assert_eq!(v, Verdict::NotAssociated);
        let (_, v, _) = decide(&conv, Some(1.0), Mode::SAssoc { s: 0.9 }, &thr).unwrap();
        assert_eq!(v, Verdict::Associated);
        let (_, v, _) = decide(&conv, Some(1.0), Mode::SAssoc { s: 0.98 }, &thr).unwrap();
        assert_eq!(v, Verdict::NotAssociated);
        let (_, v, _) = decide(&conv, Some(2.0), Mode::Plain, &thr).unwrap();
        assert_eq!(v, Verdict::NotAssociated);
        let blow = manufactured(0.0, 3.0, -1.0, &lad);
        let (f, v, _) = decide(&blow, Some(1.0), Mode::Plain, &thr).unwrap();
        assert_eq!(v, Verdict::NotAssociated);
        assert!((f.rate + 1.0).abs() < 0.01);
        let slow = manufactured(0.0, 1.0, 0.05, &lad);
        let (_, v, _) = decide(&slow, Some(0.0), Mode::Plain, &thr).unwrap();
        assert_eq!(v, Verdict::Inconclusive);
    }

    #[test]
    fn gap_analysis_examples() {
        let g = |a, b, c, l, q| gap_analysis(&GapParams::new(a, b, c, l, q).unwrap());
        assert_eq!(g(1, 1, 0, 0, 1), GapAnalysis { score: -1, conclusion: GapConclusion::Decays });
        assert_eq!(g(2, 1, 1, 1, 1), GapAnalysis { score: 4, conclusion: GapConclusion::CannotConclude });
        assert_eq!(g(1, 1, 0, 0, 0), GapAnalysis { score: 0, conclusion: GapConclusion::CannotConclude });
        assert!(GapParams::new(1, 0, 0, 0, 0).is_err());
        assert!(GapParams::new(0, 1, 0, 0, 0).is_err());
    }

    #[test]
    fn gap_bound_is_in_the_ideal() {
        use crate::seminorm::{in_ik, PosPolynomial};
        let lam = PosPolynomial::gap_bound(2.0, 1, 1).unwrap();
        assert!(in_ik(&lam, 0));
    }

    #[test]
    fn gap_empirical_slope_tracks_score() {
        let lad = Ladder::new(0.0625, 0.5, 7).unwrap();
        let setup = GapSetup::new(tilted_bump(0.5).unwrap());
        let settings = Settings {
            grid_x: GridSpec::new(64).unwrap(),
            grid_y: GridSpec::new(256).unwrap(),
            ..Settings::default()
        };
        for p in [GapParams::new(1, 1, 0, 0, 1).unwrap(), GapParams::new(1, 1, 1, 0, 0).unwrap()] {
            let g = gap_empirical(&p, 1.0, &lad, &setup, &settings).unwrap();
            assert!(g.slope_matches, "{p:?}: slope {}", g.slope);
            assert!(g.conclusions_agree);
        }
        let sym = GapSetup::new(base_bump());
        assert!(gap_empirical(&GapParams::new(1, 1, 0, 0, 0).unwrap(), 1.0, &lad, &sym, &settings).is_err());
    }

    #[test]
    fn iota_delta_is_associated_to_delta() {
        let lad = Ladder::new(0.0625, 0.5, 8).unwrap();
        let spec = KernelSpec::model(base_bump());
        let r = Representative::iota(Distribution::delta());
        let rep = assoc_test(
            &r,
            &spec,
            &Combination::single(Distribution::delta()),
            &ProbeFamily::standard(),
            &lad,
            Mode::Plain,
            &Settings::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Associated, "{rep:#?}");
        assert_eq!(rep.rows.len(), 6);
    }

    #[test]
    fn ck_mode_rejects_dirac_candidates() {
        let spec = KernelSpec::model(base_bump());
        let r = Representative::iota(Distribution::delta());
        let err = assoc_test(
            &r,
            &spec,
            &Combination::single(Distribution::delta()),
            &ProbeFamily::standard(),
            &Ladder::default(),
            Mode::Ck { k: 1 },
            &Settings::default(),
        );
        assert!(matches!(err, Err(Error::CandidateNotCk { .. })));
    }

    #[test]
    fn ck_mode_on_smooth_polynomial() {
        let spec = KernelSpec::model(base_bump());
        let x2 = Distribution::polynomial(&[0.0, 0.0, 1.0]);
        let rep = assoc_test(
            &Representative::iota(x2.clone()),
            &spec,
            &Combination::single(x2),
            &ProbeFamily::standard(),
            &Ladder::new(0.0625, 0.5, 8).unwrap(),
            Mode::Ck { k: 2 },
            &Settings {
                grid_x: GridSpec::new(32).unwrap(),
                ..Settings::default()
            },
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Associated);
        assert!((rep.rate - 2.0).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn manufactured_rates_are_recovered(a in -5.0..5.0f64, b in 0.5..4.0f64, gi in 0usize..4) {
            let gamma = [0.5, 1.0, 2.0, 3.0][gi];
            let lad = Ladder::default();
            let f = fit_rate(&manufactured(a, b, gamma, &lad), None).unwrap();
            prop_assert!((f.rate - gamma).abs() <= 0.01 * gamma, "rate {} for gamma {}", f.rate, gamma);
        }

        #[test]
        fn strong_implies_plain(beta in 0.2..3.0f64, b0 in 0.0..3.0f64) {
            let lad = Ladder::default();
            let thr = Thresholds::default();
            let s = manufactured(0.0, 1e-3, beta, &lad);
            let (_, strong, _) = decide(&s, Some(0.0), Mode::Strong { beta0: b0 }, &thr).unwrap();
            let (_, plain, _) = decide(&s, Some(0.0), Mode::Plain, &thr).unwrap();
            if strong == Verdict::Associated {
                prop_assert_eq!(plain, Verdict::Associated);
            }
        }

        #[test]
        fn s_association_is_monotone(beta in 0.2..3.0f64, s in 0.0..3.0f64, t in 0.0..1.0f64) {
            let lad = Ladder::default();
            let thr = Thresholds::default();
            let data = manufactured(0.0, 1e-3, beta, &lad);
            let (_, hi, _) = decide(&data, Some(0.0), Mode::SAssoc { s }, &thr).unwrap();
            let (_, lo, _) = decide(&data, Some(0.0), Mode::SAssoc { s: s * t }, &thr).unwrap();
            if hi == Verdict::Associated {
                prop_assert_eq!(lo, Verdict::Associated);
            }
        }
    }
}
