//! Command-line front end for the association toolkit.

pub mod config;
pub mod parser;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use colombeau::assoc::{fit_rate_with_floor, AssocReport, GapSetup, LadderReport, Sample};
use colombeau::mollifier::moments as quad_moments;
use colombeau::{
    assoc_test, gap_analysis, gap_empirical, norm_gap, norm_kernel, rate_scan, synth_aq, theta_e_test, theta_pairing,
    FunctionFamily, GapParams, Interval, Representative,
};
use serde_json::{json, Value};
use thiserror::Error;

use config::RunConfig;
use parser::{LowerError, SyntaxError};
use report::{num, nums, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] colombeau::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "colombeau", version, about = "Association tests for regularized distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every command; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Config file (default: $COLOMBEAU_CONFIG when set).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Any config key, as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// model, log_damped or scaled_aq.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// base or tilted:T, optionally with /dilate:S.
    #[arg(long, global = true)]
    pub mollifier: Option<String>,
    /// Moment order of scaled_aq kernels.
    #[arg(long, global = true)]
    pub aq: Option<usize>,
    #[arg(long, global = true)]
    pub eps0: Option<f64>,
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    #[arg(long, global = true)]
    pub rungs: Option<usize>,
    /// `standard` or smooth expressions separated by `;`.
    #[arg(long, global = true)]
    pub probes: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Write ladder data as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("kernel", self.kernel.clone());
        push("mollifier", self.mollifier.clone());
        push("q", self.aq.map(|v| v.to_string()));
        push("eps0", self.eps0.map(|v| v.to_string()));
        push("ratio", self.ratio.map(|v| v.to_string()));
        push("rungs", self.rungs.map(|v| v.to_string()));
        push("probes", self.probes.clone());
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        push("csv", self.csv.as_ref().map(|p| p.display().to_string()));
        Ok(out)
    }

    pub fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(self.config.as_deref(), &self.overrides()?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether a representative is associated to a candidate.
    Assoc {
        #[arg(long)]
        rep: String,
        #[arg(long, default_value = "0")]
        candidate: String,
        /// plain, strong:B, s:S or ck:K.
        #[arg(long, default_value = "plain")]
        mode: String,
        #[command(flatten)]
        common: Common,
    },
    /// Association test over a family of A_q mollifiers.
    ThetaE {
        #[arg(long)]
        rep: String,
        #[arg(long, default_value = "0")]
        candidate: String,
        #[arg(long, default_value = "plain")]
        mode: String,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 3)]
        family: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Candidate-free limits and convergence rates.
    Rate {
        #[arg(long)]
        rep: String,
        #[command(flatten)]
        common: Common,
    },
    /// Kernel-norm or gap-norm values along the ladder.
    NormScan {
        /// kernel or gap.
        #[arg(long, default_value = "kernel")]
        what: String,
        /// x-derivative order.
        #[arg(long, default_value_t = 0)]
        m: u32,
        /// y-derivative order (kernel norms).
        #[arg(long, default_value_t = 0)]
        l: u32,
        /// Exponent of the monomial family (gap norms).
        #[arg(long, default_value_t = 2)]
        power: usize,
        /// Half-width of the x set.
        #[arg(long, default_value_t = 0.25)]
        k_radius: f64,
        /// Half-width of the y set (kernel norms).
        #[arg(long, default_value_t = 1.0)]
        l_radius: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Moments of a mollifier.
    Moments {
        /// Highest moment order.
        #[arg(long, default_value_t = 4)]
        q: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Build a mollifier with vanishing moments 1..q.
    SynthAq {
        #[arg(long)]
        q: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sign analysis of the moderation gap bound.
    Gap {
        #[arg(long)]
        a: u32,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        c: u32,
        #[arg(long)]
        l: u32,
        #[arg(long)]
        q: u32,
        /// Also measure the bound on the ladder.
        #[arg(long)]
        empirical: bool,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[command(flatten)]
        common: Common,
    },
    /// One pairing of a representative at one epsilon.
    Pair {
        #[arg(long)]
        rep: String,
        #[arg(long)]
        eps: f64,
        /// Smooth test function.
        #[arg(long, default_value = "bump(x)")]
        probe: String,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Assoc { common, .. }
            | Command::ThetaE { common, .. }
            | Command::Rate { common, .. }
            | Command::NormScan { common, .. }
            | Command::Moments { common, .. }
            | Command::SynthAq { common, .. }
            | Command::Gap { common, .. }
            | Command::Pair { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Assoc { .. } => "assoc",
            Command::ThetaE { .. } => "theta-e",
            Command::Rate { .. } => "rate",
            Command::NormScan { .. } => "norm-scan",
            Command::Moments { .. } => "moments",
            Command::SynthAq { .. } => "synth-aq",
            Command::Gap { .. } => "gap",
            Command::Pair { .. } => "pair",
        }
    }
}

fn representative(src: &str) -> Result<Representative, CliError> {
    Ok(parser::to_representative(&parser::parse(src)?)?)
}

fn row_json(r: &LadderReport) -> Value {
    json!({
        "label": r.label,
        "target": r.target.map_or(Value::Null, num),
        "fit": report::fit(&r.fit),
        "verdict": r.verdict.as_str(),
        "note": r.note,
        "samples": report::samples(&r.samples),
    })
}

fn assoc_json(r: &AssocReport) -> Value {
    json!({
        "mode": r.mode.to_string(),
        "verdict": r.verdict.as_str(),
        "rate": num(r.rate),
        "residual": num(r.residual),
        "governing": r.governing,
        "label": r.label,
        "rows": r.rows.iter().map(row_json).collect::<Vec<_>>(),
    })
}

/// The aggregate fit: the governing row's limit with the extreme rate and residual.
fn aggregate_fit(r: &AssocReport) -> colombeau::Fit {
    colombeau::Fit {
        limit: r.governing_row().fit.limit,
        rate: r.rate,
        residual: r.residual,
    }
}

/// Runs one command and returns its report; nothing is written.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let settings = cfg.settings()?;
    let mut out = Report {
        command: cmd.name().to_string(),
        config_echo: cfg.echo(),
        samples: Vec::new(),
        fit: None,
        verdict: None,
        thresholds: settings.thresholds,
        details: Value::Null,
    };
    match cmd {
        Command::Assoc {
            rep, candidate, mode, ..
        } => {
            let r = representative(rep)?;
            let cand = parser::parse_candidate(candidate)?;
            let mode = parser::parse_mode(mode).map_err(CliError::Config)?;
            let spec = cfg.kernel_spec()?;
            let rep_report = assoc_test(&r, &spec, &cand, &cfg.probe_family()?, &cfg.ladder()?, mode, &settings)?;
            out.samples = rep_report.governing_row().samples.clone();
            out.fit = Some(aggregate_fit(&rep_report));
            out.verdict = Some(rep_report.verdict.as_str().into());
            let mut d = assoc_json(&rep_report);
            d["kernel"] = json!(spec.describe());
            d["candidate"] = json!(cand.to_string());
            out.details = d;
        }
        Command::ThetaE {
            rep,
            candidate,
            mode,
            q,
            family,
            ..
        } => {
            let r = representative(rep)?;
            let cand = parser::parse_candidate(candidate)?;
            let mode = parser::parse_mode(mode).map_err(CliError::Config)?;
            let base = cfg.base_mollifier()?;
            let te = theta_e_test(
                &r,
                &base,
                *q,
                *family,
                &cand,
                &cfg.probe_family()?,
                &cfg.ladder()?,
                mode,
                &settings,
            )?;
            let worst = te
                .rows
                .iter()
                .filter(|row| row.report.verdict == te.verdict)
                .min_by(|a, b| a.report.rate.total_cmp(&b.report.rate))
                .expect("aggregate verdict comes from some row");
            out.samples = worst.report.governing_row().samples.clone();
            out.fit = Some(aggregate_fit(&worst.report));
            out.verdict = Some(te.verdict.as_str().into());
            out.details = json!({
                "q": te.q,
                "label": te.label,
                "rows": te.rows.iter().map(|row| json!({
                    "dilation": num(row.dilation),
                    "mollifier": record_json(&row.mollifier),
                    "report": assoc_json(&row.report),
                })).collect::<Vec<_>>(),
            });
        }
        Command::Rate { rep, .. } => {
            let r = representative(rep)?;
            let spec = cfg.kernel_spec()?;
            let scan = rate_scan(&r, &spec, &cfg.probe_family()?, &cfg.ladder()?, &settings)?;
            out.samples = scan.governing_row().samples.clone();
            out.fit = Some(aggregate_fit(&scan));
            let mut d = assoc_json(&scan);
            d["kernel"] = json!(spec.describe());
            out.details = d;
        }
        Command::NormScan {
            what,
            m,
            l,
            power,
            k_radius,
            l_radius,
            ..
        } => {
            let spec = cfg.kernel_spec()?;
            let lad = cfg.ladder()?;
            lad.check_for(&spec)?;
            let k = Interval::new(-k_radius, *k_radius)?;
            let l_iv = Interval::new(-l_radius, *l_radius)?;
            let family = FunctionFamily::monomial(*power);
            if !matches!(what.as_str(), "kernel" | "gap") {
                return Err(CliError::Config(format!("--what must be kernel or gap, got '{what}'")));
            }
            let samples: Vec<Sample> = lad
                .eps()
                .into_iter()
                .map(|eps| {
                    let v = if what == "kernel" {
                        norm_kernel(&spec, eps, k, *m, l_iv, *l, settings.grid_x, settings.grid_y)
                    } else {
                        norm_gap(&spec, eps, k, *m, &family, settings.grid_x, &settings.quad)
                    };
                    v.map(|v| Sample::ok(eps, v))
                })
                .collect::<colombeau::Result<_>>()?;
            let fit = fit_rate_with_floor(&samples, Some(0.0), 0.0)?;
            out.details = json!({
                "what": what,
                "kernel": spec.describe(),
                "m": m,
                "l": l,
                "power": power,
                "k": nums(&[k.lo, k.hi]),
                "l_set": nums(&[l_iv.lo, l_iv.hi]),
                "grid_x": settings.grid_x.points_per_unit,
                "grid_y": settings.grid_y.points_per_unit,
                "slope": num(fit.rate),
            });
            out.samples = samples;
            out.fit = Some(fit);
        }
        Command::Moments { q, .. } => {
            let m = cfg.base_mollifier()?;
            let analytic: Vec<f64> = (0..=*q).map(|j| m.moment(j)).collect();
            let quad = quad_moments(&m, *q, &settings.quad)?;
            let vanishing = (1..=*q).take_while(|&j| analytic[j].abs() <= cfg.moment_tol).count();
            out.details = json!({
                "mollifier": record_json(&m.record()),
                "moments": nums(&analytic),
                "quadrature_moments": nums(&quad),
                "vanishing_orders": vanishing,
                "symmetric": m.symmetric(),
                "moment_tol": num(cfg.moment_tol),
            });
        }
        Command::SynthAq { q, .. } => {
            let base = cfg.base_mollifier()?;
            let m = synth_aq(&base, *q)?;
            let analytic: Vec<f64> = (0..=*q + 1).map(|j| m.moment(j)).collect();
            let worst = analytic[1..=*q].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            out.details = json!({
                "mollifier": record_json(&m.record()),
                "moments": nums(&analytic),
                "max_vanishing_moment": num(worst),
                "mass_error": num((analytic[0] - 1.0).abs()),
            });
        }
        Command::Gap {
            a,
            b,
            c,
            l,
            q,
            empirical,
            lambda,
            ..
        } => {
            let p = GapParams::new(*a, *b, *c, *l, *q)?;
            let analysis = gap_analysis(&p);
            out.verdict = Some(analysis.conclusion.as_str().into());
            let mut d = json!({
                "a": a, "b": b, "c": c, "l": l, "q": q,
                "score": analysis.score,
                "conclusion": analysis.conclusion.as_str(),
            });
            if *empirical {
                let setup = GapSetup::new(cfg.base_mollifier()?);
                let g = gap_empirical(&p, *lambda, &cfg.ladder()?, &setup, &settings)?;
                d["empirical"] = json!({
                    "lambda_c": num(*lambda),
                    "mollifier": record_json(&g.mollifier),
                    "kernel_norms": report::samples(&g.kernel_norms),
                    "gap_norms": report::samples(&g.gap_norms),
                    "slope": num(g.slope),
                    "slope_matches": g.slope_matches,
                    "conclusion": g.conclusion.as_str(),
                    "conclusions_agree": g.conclusions_agree,
                });
                out.samples = g.samples;
                out.fit = Some(g.fit);
            }
            out.details = d;
        }
        Command::Pair { rep, eps, probe, .. } => {
            let r = representative(rep)?;
            let psi = parser::to_smooth(&parser::parse(probe)?)?;
            let spec = cfg.kernel_spec()?;
            let v = theta_pairing(&r, &spec, *eps, &psi, &settings.quad)?;
            out.samples = vec![Sample::ok(*eps, v)];
            out.details = json!({ "kernel": spec.describe(), "probe": probe, "value": num(v) });
        }
    }
    Ok(out)
}

fn record_json(r: &colombeau::mollifier::MollifierRecord) -> Value {
    json!({
        "kind": r.kind,
        "q": r.q,
        "radius": num(r.radius),
        "coefficients": nums(&r.coefficients),
        "normalization": num(r.normalization),
    })
}

/// Parses arguments, runs the command, writes outputs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_command(cmd: &Command) -> Result<i32, CliError> {
    let cfg = cmd.common().load()?;
    let rep = execute(cmd, &cfg)?;
    if let Some(path) = &cfg.csv {
        std::fs::write(path, report::csv(&rep.samples))?;
    }
    let text = rep.to_json();
    match &cfg.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(rep.exit_code())
}
