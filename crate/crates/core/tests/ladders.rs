use colombeau::assoc::{fit_rate_with_floor, Sample};
use colombeau::{
    assoc_test, base_bump, norm_gap, synth_aq, tilted_bump, Combination, Distribution, FunctionFamily, GridSpec,
    Interval, KernelSpec, Ladder, Mode, ProbeFamily, QuadConfig, Representative, Settings, SmoothExpr, Verdict,
};

fn iota_poly(c: &[f64]) -> Representative {
    Representative::iota(Distribution::polynomial(c))
}

fn run(r: &Representative, spec: &KernelSpec, cand: &Combination, lad: &Ladder) -> colombeau::AssocReport {
    assoc_test(r, spec, cand, &ProbeFamily::standard(), lad, Mode::Plain, &Settings::default()).unwrap()
}

fn x_pow_delta_pow(k: u32) -> Representative {
    Representative::var().powi(k) * Representative::iota(Distribution::delta()).powi(k)
}

#[test]
fn denser_ladder_keeps_rates() {
    let lad = Ladder::default();
    let dense = lad.denser();
    let damped = KernelSpec::log_damped(tilted_bump(0.5).unwrap());
    let model = KernelSpec::model(base_bump());
    let aq = KernelSpec::scaled_aq(synth_aq(&tilted_bump(0.5).unwrap(), 1).unwrap());
    let cases: Vec<(Representative, &KernelSpec, Combination)> = vec![
        (x_pow_delta_pow(1), &damped, Combination::zero()),
        (x_pow_delta_pow(2), &damped, Combination::zero()),
        (x_pow_delta_pow(3), &damped, Combination::zero()),
        (
            iota_poly(&[0.0, 1.0]) * iota_poly(&[0.0, 1.0]) - iota_poly(&[0.0, 0.0, 1.0]),
            &aq,
            Combination::zero(),
        ),
        (Representative::iota(Distribution::delta()).powi(2), &model, Combination::zero()),
        (
            Representative::iota(Distribution::heaviside(0.0)) * Representative::iota(Distribution::delta()),
            &model,
            Combination::new(vec![(0.5, Distribution::delta())]),
        ),
    ];
    for (r, spec, cand) in cases {
        let a = run(&r, spec, &cand, &lad);
        let b = run(&r, spec, &cand, &dense);
        assert_eq!(a.verdict, b.verdict);
        if a.rate.is_finite() || b.rate.is_finite() {
            assert!((a.rate - b.rate).abs() <= 0.05, "{} vs {}", a.rate, b.rate);
        }
    }
}

#[test]
fn iota_minus_sigma_is_negligible_on_aq_kernels() {
    for q in 1..=3 {
        let spec = KernelSpec::scaled_aq(synth_aq(&tilted_bump(0.5).unwrap(), q).unwrap());
        for c in [[0.0, 1.0, 0.0], [1.0, -2.0, 3.0]] {
            let r = iota_poly(&c) - Representative::sigma(SmoothExpr::polynomial(&c));
            let out = run(&r, &spec, &Combination::zero(), &Ladder::default());
            assert_eq!(out.verdict, Verdict::Associated);
            assert!(out.rate >= q as f64 + 1.0 - 0.1, "q={q} rate={}", out.rate);
        }
    }
}

#[test]
fn gap_norm_slope_is_moment_order() {
    let cfg = QuadConfig::default();
    for q in 0..=3usize {
        let spec = KernelSpec::model(synth_aq(&tilted_bump(0.5).unwrap(), q).unwrap());
        let family = FunctionFamily::monomial(q + 1);
        let samples: Vec<Sample> = Ladder::default()
            .eps()
            .into_iter()
            .map(|eps| {
                let v = norm_gap(&spec, eps, Interval::centered(0.25), 0, &family, GridSpec::DEFAULT_X, &cfg).unwrap();
                Sample::ok(eps, v)
            })
            .collect();
        let fit = fit_rate_with_floor(&samples, Some(0.0), 0.0).unwrap();
        assert!((fit.rate - (q + 1) as f64).abs() <= 0.05, "q={q} slope={}", fit.rate);
    }
}

#[test]
fn catalog_is_compatible_on_every_probe() {
    let spec = KernelSpec::log_damped(base_bump());
    for u in [Distribution::dirac(2, 0.25), Distribution::heaviside(-0.3)] {
        let out = run(&Representative::iota(u.clone()), &spec, &Combination::single(u), &Ladder::default());
        assert_eq!(out.verdict, Verdict::Associated);
        assert_eq!(out.rows.len(), ProbeFamily::standard().len());
    }
}
