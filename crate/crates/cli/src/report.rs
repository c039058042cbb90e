//! JSON and CSV output with fixed precision.

use std::collections::BTreeMap;

use colombeau::assoc::{Fit, Sample, Thresholds};
use serde_json::{json, Map, Value};

/// Significant digits kept for every float in a report.
pub const DIGITS: usize = 12;

/// A float rounded to [`DIGITS`] significant digits; non-finite values become
/// the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn num(v: f64) -> Value {
    if v.is_nan() {
        return Value::String("nan".into());
    }
    if v.is_infinite() {
        return Value::String(if v > 0.0 { "inf" } else { "-inf" }.into());
    }
    let rounded: f64 = format!("{:.*e}", DIGITS - 1, v).parse().expect("formatted float parses");
    json!(rounded)
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|v| num(*v)).collect())
}

pub fn samples(s: &[Sample]) -> Value {
    Value::Array(
        s.iter()
            .map(|s| {
                let mut m = Map::new();
                m.insert("eps".into(), num(s.eps));
                m.insert("value".into(), num(s.value));
                if let Some(e) = &s.error {
                    m.insert("error".into(), Value::String(e.clone()));
                }
                Value::Object(m)
            })
            .collect(),
    )
}

pub fn fit(f: &Fit) -> Value {
    json!({ "limit": num(f.limit), "rate": num(f.rate), "residual": num(f.residual) })
}

pub fn thresholds(t: &Thresholds) -> Value {
    json!({
        "assoc_tol": num(t.assoc_tol),
        "fit_tol": num(t.fit_tol),
        "rate_margin": num(t.rate_margin),
        "noise_floor": num(t.noise_floor),
        "divergence_slope": num(t.divergence_slope),
        "divergence_rungs": t.divergence_rungs,
    })
}

/// `eps,value` rows; failed rungs print `nan`.
pub fn csv(s: &[Sample]) -> String {
    let mut out = String::from("eps,value\n");
    for s in s {
        out.push_str(&format!("{:.*e},{:.*e}\n", DIGITS - 1, s.eps, DIGITS - 1, s.value));
    }
    out
}

/// One report per command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config_echo: BTreeMap<String, String>,
    pub samples: Vec<Sample>,
    pub fit: Option<Fit>,
    /// `None` for pure-data commands.
    pub verdict: Option<String>,
    pub thresholds: Thresholds,
    pub details: Value,
}

impl Report {
    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "config_echo": self.config_echo,
            "samples": samples(&self.samples),
            "fit": self.fit.as_ref().map_or(Value::Null, fit),
            "verdict": self.verdict,
            "thresholds": thresholds(&self.thresholds),
            "version": env!("CARGO_PKG_VERSION"),
            "details": self.details,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.verdict.as_deref())
    }
}

/// 0 for associated, decays or data; 2 for not_associated or
/// cannot_conclude; 3 for inconclusive.
pub fn exit_code(verdict: Option<&str>) -> i32 {
    match verdict {
        None | Some("associated") | Some("decays") => 0,
        Some("not_associated") | Some("cannot_conclude") => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(num(1.0 / 3.0), json!(0.333333333333));
        assert_eq!(num(2.0), json!(2.0));
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
    }

    #[test]
    fn csv_layout() {
        let text = csv(&[Sample::ok(0.5, 1.25)]);
        assert_eq!(text, "eps,value\n5.00000000000e-1,1.25000000000e0\n");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(Some("associated")), 0);
        assert_eq!(exit_code(Some("decays")), 0);
        assert_eq!(exit_code(None), 0);
        assert_eq!(exit_code(Some("not_associated")), 2);
        assert_eq!(exit_code(Some("cannot_conclude")), 2);
        assert_eq!(exit_code(Some("inconclusive")), 3);
    }
}
