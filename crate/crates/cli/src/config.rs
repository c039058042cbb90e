//! Run configuration: defaults, a flat `key = value` file, then flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use colombeau::assoc::{Ladder, Settings, Thresholds};
use colombeau::mollifier::MOMENT_TOL;
use colombeau::{base_bump, synth_aq, tilted_bump, GridSpec, Interval, KernelSpec, Mollifier, ProbeFamily, QuadConfig};

use crate::parser;
use crate::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "COLOMBEAU_CONFIG";

const KEYS: &[&str] = &[
    "kernel",
    "mollifier",
    "q",
    "eps0",
    "ratio",
    "rungs",
    "quad_tol",
    "quad_depth",
    "moment_tol",
    "assoc_tol",
    "fit_tol",
    "rate_margin",
    "noise_floor",
    "grid_x",
    "grid_y",
    "window",
    "probes",
    "memoize",
    "output",
    "csv",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `model`, `log_damped` or `scaled_aq`.
    pub kernel: String,
    /// `base`, `tilted:T`, optionally followed by `/dilate:S`.
    pub mollifier: String,
    /// Vanishing-moment order for `scaled_aq` kernels.
    pub q: usize,
    pub eps0: f64,
    pub ratio: f64,
    pub rungs: usize,
    pub quad_tol: f64,
    pub quad_depth: u32,
    pub moment_tol: f64,
    pub assoc_tol: f64,
    pub fit_tol: f64,
    pub rate_margin: f64,
    pub noise_floor: f64,
    pub grid_x: u32,
    pub grid_y: u32,
    /// Half-width of the C^k window.
    pub window: f64,
    /// `standard`, or smooth expressions separated by `;`.
    pub probes: String,
    pub memoize: bool,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lad = Ladder::default();
        let thr = Thresholds::default();
        let quad = QuadConfig::default();
        RunConfig {
            kernel: "log_damped".into(),
            mollifier: "base".into(),
            q: 1,
            eps0: lad.eps0,
            ratio: lad.ratio,
            rungs: lad.count,
            quad_tol: quad.abs_tol,
            quad_depth: quad.max_depth,
            moment_tol: MOMENT_TOL,
            assoc_tol: thr.assoc_tol,
            fit_tol: thr.fit_tol,
            rate_margin: thr.rate_margin,
            noise_floor: thr.noise_floor,
            grid_x: GridSpec::DEFAULT_X.points_per_unit,
            grid_y: GridSpec::DEFAULT_Y.points_per_unit,
            window: 1.0,
            probes: "standard".into(),
            memoize: false,
            output: None,
            csv: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

fn positive(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = num(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key} must be positive (got {value})")))
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "kernel" => match value {
                "model" | "log_damped" | "scaled_aq" => self.kernel = value.into(),
                _ => return Err(CliError::Config(format!("kernel: unknown kind '{value}'"))),
            },
            "mollifier" => {
                parse_mollifier(value)?;
                self.mollifier = value.into();
            }
            "q" => self.q = num(key, value)?,
            "eps0" => self.eps0 = positive(key, value)?,
            "ratio" => self.ratio = positive(key, value)?,
            "rungs" => self.rungs = num(key, value)?,
            "quad_tol" => self.quad_tol = positive(key, value)?,
            "quad_depth" => self.quad_depth = num(key, value)?,
            "moment_tol" => self.moment_tol = positive(key, value)?,
            "assoc_tol" => self.assoc_tol = positive(key, value)?,
            "fit_tol" => self.fit_tol = positive(key, value)?,
            "rate_margin" => self.rate_margin = positive(key, value)?,
            "noise_floor" => self.noise_floor = positive(key, value)?,
            "grid_x" => self.grid_x = num(key, value)?,
            "grid_y" => self.grid_y = num(key, value)?,
            "window" => self.window = positive(key, value)?,
            "probes" => {
                parse_probes(value)?;
                self.probes = value.into();
            }
            "memoize" => self.memoize = num(key, value)?,
            "output" => self.output = (!value.is_empty()).then(|| value.into()),
            "csv" => self.csv = (!value.is_empty()).then(|| value.into()),
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies the lines of a config file.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected 'key = value'", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Defaults, then the file (explicit or from the environment), then overrides.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        if let Some(path) = file.map(Path::to_path_buf).or(env) {
            cfg.apply_file(&path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.ladder()?;
        self.grids()?;
        QuadConfig::new(self.quad_tol, self.quad_depth)?;
        self.kernel_spec()?.base();
        Ok(())
    }

    pub fn ladder(&self) -> Result<Ladder, CliError> {
        Ok(Ladder::new(self.eps0, self.ratio, self.rungs)?)
    }

    fn grids(&self) -> Result<(GridSpec, GridSpec), CliError> {
        Ok((GridSpec::new(self.grid_x)?, GridSpec::new(self.grid_y)?))
    }

    pub fn quad(&self) -> QuadConfig {
        QuadConfig {
            abs_tol: self.quad_tol,
            max_depth: self.quad_depth,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            assoc_tol: self.assoc_tol,
            fit_tol: self.fit_tol,
            rate_margin: self.rate_margin,
            noise_floor: self.noise_floor,
            ..Thresholds::default()
        }
    }

    pub fn settings(&self) -> Result<Settings, CliError> {
        let (grid_x, grid_y) = self.grids()?;
        Ok(Settings {
            quad: self.quad(),
            thresholds: self.thresholds(),
            window: Interval::centered(self.window),
            grid_x,
            grid_y,
            memoize: self.memoize,
        })
    }

    pub fn base_mollifier(&self) -> Result<Mollifier, CliError> {
        parse_mollifier(&self.mollifier)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let base = self.base_mollifier()?;
        Ok(match self.kernel.as_str() {
            "model" => KernelSpec::model(base),
            "log_damped" => KernelSpec::log_damped(base),
            _ => KernelSpec::scaled_aq(synth_aq(&base, self.q)?),
        })
    }

    pub fn probe_family(&self) -> Result<ProbeFamily, CliError> {
        parse_probes(&self.probes)
    }

    /// Every setting as text, sorted by key.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let values = [
            self.kernel.clone(),
            self.mollifier.clone(),
            self.q.to_string(),
            self.eps0.to_string(),
            self.ratio.to_string(),
            self.rungs.to_string(),
            self.quad_tol.to_string(),
            self.quad_depth.to_string(),
            self.moment_tol.to_string(),
            self.assoc_tol.to_string(),
            self.fit_tol.to_string(),
            self.rate_margin.to_string(),
            self.noise_floor.to_string(),
            self.grid_x.to_string(),
            self.grid_y.to_string(),
            self.window.to_string(),
            self.probes.clone(),
            self.memoize.to_string(),
            path(&self.output),
            path(&self.csv),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }
}

/// `base` or `tilted:T`, each optionally followed by `/dilate:S`.
pub fn parse_mollifier(src: &str) -> Result<Mollifier, CliError> {
    let mut parts = src.split('/');
    let head = parts.next().unwrap_or("").trim();
    let mut m = match head.split_once(':') {
        None if head == "base" => base_bump(),
        Some(("tilted", t)) => tilted_bump(num("mollifier", t.trim())?)?,
        _ => return Err(CliError::Config(format!("mollifier: unknown '{head}' (base, tilted:T)"))),
    };
    for part in parts {
        match part.trim().split_once(':') {
            Some(("dilate", s)) => m = m.dilate(positive("mollifier", s.trim())?)?,
            _ => return Err(CliError::Config(format!("mollifier: unknown modifier '{part}'"))),
        }
    }
    Ok(m)
}

pub fn parse_probes(src: &str) -> Result<ProbeFamily, CliError> {
    if src.trim() == "standard" {
        return Ok(ProbeFamily::standard());
    }
    let probes = src
        .split(';')
        .map(|p| {
            let ast = parser::parse(p)?;
            Ok(parser::to_smooth(&ast)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(ProbeFamily::new(probes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# a comment\nkernel = model  # trailing\n\nrungs = 8\n", "test").unwrap();
        assert_eq!(cfg.kernel, "model");
        assert_eq!(cfg.rungs, 8);
        cfg.set("rungs", "9").unwrap();
        assert_eq!(cfg.rungs, 9);
    }

    #[test]
    fn bad_lines_are_located() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("kernel = model\nnonsense\n", "f.cfg").unwrap_err().to_string();
        assert!(err.contains("f.cfg:2"), "{err}");
        assert!(cfg.set("quad_tol", "-1").is_err());
        assert!(cfg.set("colour", "red").is_err());
        assert!(cfg.set("mollifier", "tilted:2").is_err());
    }

    #[test]
    fn mollifier_strings() {
        assert_eq!(parse_mollifier("base").unwrap().q(), 1);
        assert!(!parse_mollifier("tilted:0.5").unwrap().symmetric());
        let m = parse_mollifier("base/dilate:0.5").unwrap();
        assert_eq!(m.radius(), 0.5);
    }

    #[test]
    fn custom_probes() {
        let fam = parse_probes("bump(x); x*bump(2*x)").unwrap();
        assert_eq!(fam.len(), 2);
        assert!(parse_probes("x").is_err());
    }

    #[test]
    fn echo_covers_every_key() {
        assert_eq!(RunConfig::default().echo().len(), KEYS.len());
    }
}
