//! Mollifier kernels, regularized distributions, seminorms and asymptotic
//! association tests for one-dimensional Colombeau generalized functions.

pub mod algebra;
pub mod assoc;
pub mod distribution;
pub mod error;
pub mod expr;
pub mod mollifier;
pub mod poly;
pub mod quadrature;
pub mod seminorm;

pub use algebra::{realize, theta_pairing, Realizer, Representative};
pub use assoc::{
    assoc_test, fit_rate, gap_analysis, gap_empirical, ladder_eval, rate_scan, theta_e_test, AssocReport, Fit,
    GapParams, Ladder, LadderReport, Mode, Sample, Settings, Thresholds, Verdict,
};
pub use distribution::{pair, Combination, Distribution, FunctionFamily, PiecewisePoly};
pub use error::{Error, Result};
pub use expr::{ProbeFamily, SmoothExpr};
pub use mollifier::{base_bump, synth_aq, tilted_bump, KernelSpec, Mollifier};
pub use quadrature::{integrate, Interval, QuadConfig};
pub use seminorm::{norm_f, norm_gap, norm_kernel, GridSpec};
