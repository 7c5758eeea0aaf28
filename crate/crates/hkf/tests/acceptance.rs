//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the desk-scale experiments at their default settings and checks the
//! published tolerances. Set `HKF_ACCEPTANCE_STRICT=1` to turn any failure
//! into a nonzero exit status.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use hkf::experiments::{self, default_config, torus_data, Experiment, ExperimentConfig, ExperimentReport};
use hkf::gpr::{kf_loss, KernelModel, SubsampleScheme};
use hkf::oracle::{gram_eigenvalues, log_det_spectral, SpectralLosses};
use hkf::torus::{kl_sample, mercer_kernel, periodized_symbol, MaternLike, SpectralKernel, TorusLattice, Truncation};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(cfg: &ExperimentConfig) -> hkf::Result<(ExperimentReport, f64)> {
    let t0 = Instant::now();
    let r = experiments::run(cfg)?;
    Ok((r, t0.elapsed().as_secs_f64()))
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).expect("acceptance configuration")
}

fn mean_of(r: &ExperimentReport, method: &str, param: &str) -> f64 {
    r.summary(method, param).map(|s| s.mean).unwrap_or(f64::NAN)
}

fn count_in(r: &ExperimentReport, method: &str, param: &str, lo: f64, hi: f64) -> usize {
    r.rows(method, param).iter().filter(|row| row.estimate >= lo && row.estimate <= hi).count()
}

/// Observed KF loss range across every report produced by the suite.
#[derive(Default)]
struct KfRange {
    min: f64,
    max: f64,
    runs: usize,
}

impl KfRange {
    fn record(&mut self, r: &ExperimentReport) {
        if let (Some(lo), Some(hi)) = (r.derived.get("kf_loss_min"), r.derived.get("kf_loss_max")) {
            if self.runs == 0 {
                self.min = *lo;
                self.max = *hi;
            } else {
                self.min = self.min.min(*lo);
                self.max = self.max.max(*hi);
            }
            self.runs += 1;
        }
    }
}

fn criterion_1(kf: &mut KfRange) -> hkf::Result<Outcome> {
    let (r, secs) = run(&default_config(Experiment::OracleCheck))?;
    kf.record(&r);
    let d = &r.derived;
    let worst = ["max_rel_eb", "max_rel_kf", "max_rel_mean", "max_rel_spectrum"]
        .iter()
        .map(|k| d.get(*k).copied().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let failed = d.get("failed_cases").copied().unwrap_or(f64::INFINITY);
    Ok(outcome(
        worst <= 1e-6 && failed == 0.0 && secs < 120.0,
        format!(
            "max rel diff {worst:.2e} (eb {:.1e}, kf {:.1e}, mean {:.1e}, spectrum {:.1e}) over {} cases, {secs:.1}s",
            d["max_rel_eb"], d["max_rel_kf"], d["max_rel_mean"], d["max_rel_spectrum"], d["cases"]
        ),
    ))
}

fn criterion_2() -> hkf::Result<Outcome> {
    let mut ev = gram_eigenvalues(1.0, 1, 1)?;
    ev.sort_by(f64::total_cmp);
    // Hand-computed Gram on {0, 1/2}: diagonal 1/48 + 1/16, off-diagonal 1/48 - 1/16.
    let (a, b): (f64, f64) = (1.0 / 48.0 + 1.0 / 16.0, 1.0 / 48.0 - 1.0 / 16.0);
    let hand = [a + b, a - b];
    let k = SpectralKernel::new(1, MaternLike::power(1.0), Truncation::oversampled(1, 12));
    let g = k.gram(&[vec![0.0], vec![0.5]])?;
    let err_closed = (ev[0] - 1.0 / 24.0).abs().max((ev[1] - 1.0 / 8.0).abs());
    let err_hand = (hand[0] - 1.0 / 24.0).abs().max((hand[1] - 1.0 / 8.0).abs());
    let err_gram = (g[(0, 0)] - a).abs().max((g[(0, 1)] - b).abs());
    Ok(outcome(
        ev.len() == 2 && err_closed <= 1e-10 && err_hand <= 1e-10 && err_gram <= 1e-10,
        format!("eigenvalues [{:.12}, {:.12}], error {err_closed:.1e}; mercer Gram entry error {err_gram:.1e}", ev[0], ev[1]),
    ))
}

fn criteria_3_4(kf: &mut KfRange) -> hkf::Result<(Outcome, Outcome)> {
    let (r, secs) = run(&default_config(Experiment::Regularity))?;
    kf.record(&r);
    let eb = r.summary("eb", "s").cloned();
    let kfs = r.summary("kf", "s").cloned();
    let c3 = match eb {
        Some(s) => outcome(
            s.count == 50 && (2.45..=2.55).contains(&s.mean) && s.variance / 6.25 <= 1e-3 && secs < 900.0,
            format!("mean s_EB {:.5}, Var/s^2 {:.2e}, n={}, {secs:.1}s", s.mean, s.variance / 6.25, s.count),
        ),
        None => outcome(false, "no EB summary"),
    };
    let c4 = match kfs {
        Some(s) => outcome(
            s.count == 50 && (0.90..=1.10).contains(&s.mean) && s.variance <= 1e-2,
            format!("mean s_KF {:.5}, Var {:.2e}, n={}", s.mean, s.variance, s.count),
        ),
        None => outcome(false, "no KF summary"),
    };
    Ok((c3, c4))
}

fn criterion_5() -> hkf::Result<Outcome> {
    let (r, secs) = run(&default_config(Experiment::L2Bias))?;
    let d = &r.derived;
    let slope = |t: &str| d.get(&format!("slope_t={t}")).copied().unwrap_or(f64::NAN);
    let (s05, s1, s2, s3) = (slope("0.5"), slope("1"), slope("2"), slope("3"));
    let trio = [s1, s2, s3];
    let hi = trio.iter().map(|v| v.abs()).fold(f64::NEG_INFINITY, f64::max);
    let lo = trio.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let spread = hi / lo - 1.0;
    let argmin = d.get("sweep_argmin").copied().unwrap_or(f64::NAN);
    Ok(outcome(
        r.config.instances >= 20 && s05 - s1 >= 0.5 && spread <= 0.10 && (2.2..=2.8).contains(&argmin),
        format!(
            "slopes t=0.5 {s05:.3}, t=1 {s1:.3}, t=2 {s2:.3}, t=3 {s3:.3} (log2 per level); t>=1 spread {:.1}%; sweep argmin {argmin:.3}; {secs:.1}s",
            100.0 * spread
        ),
    ))
}

fn criterion_6() -> hkf::Result<Outcome> {
    let (r, _) = run(&default_config(Experiment::Amplitude))?;
    let gap = r.derived.get("max_closed_form_gap").copied().unwrap_or(f64::INFINITY);
    let mean = mean_of(&r, "eb", "sigma");
    Ok(outcome(
        gap <= 1e-3 && (0.95..=1.05).contains(&mean),
        format!("max |closed form - numeric| {gap:.2e}; mean sigma_EB {mean:.5}"),
    ))
}

fn criterion_7() -> hkf::Result<Outcome> {
    let cfg = default_config(Experiment::Regularity);
    let q = 9;
    let data = torus_data(&cfg, q, 0)?;
    let scales = [1e-2, 1.0, 1e2];
    let mut worst: f64 = 0.0;
    for s in [0.8, 1.5, 2.5, 4.0] {
        let vals: Vec<f64> = scales
            .iter()
            .map(|c: &f64| {
                let k = SpectralKernel::new(1, MaternLike::new(c.sqrt(), 0.0, s)?, Truncation::oversampled(q, 4));
                SpectralLosses::new(&k, q)?.kf(&data.tq, &data.tqm1)
            })
            .collect::<hkf::Result<_>>()?;
        for v in &vals {
            worst = worst.max((v / vals[1] - 1.0).abs());
        }
    }
    // The dense route is reported alongside; its rounding grows with the
    // Gram condition number.
    let qm = 6;
    let small = torus_data(&cfg, qm, 0)?;
    let pts = TorusLattice::new(qm, 1).points();
    let mut matrix = Vec::new();
    for s in [1.5, 2.5] {
        let vals: Vec<f64> = scales
            .iter()
            .map(|c: &f64| {
                let k = SpectralKernel::new(1, MaternLike::new(c.sqrt(), 0.0, s)?, Truncation::oversampled(qm, 4));
                kf_loss(&KernelModel::Torus(k), &pts, &SubsampleScheme::CoarsenByTwo, &small.obs.values)
            })
            .collect::<hkf::Result<_>>()?;
        let w = vals.iter().map(|v| (v / vals[1] - 1.0).abs()).fold(0.0, f64::max);
        matrix.push(format!("s={s}: {w:.1e}"));
    }
    // Identical losses give identical argmins; check on a scan as well.
    let scan = |c: f64| -> hkf::Result<f64> {
        let grid: Vec<f64> = (0..60).map(|i| 0.6 + 0.05 * i as f64).collect();
        let mut best = (f64::INFINITY, 0.0);
        for s in grid {
            let k = SpectralKernel::new(1, MaternLike::new(c.sqrt(), 0.0, s)?, Truncation::oversampled(q, 4));
            let l = SpectralLosses::new(&k, q)?.kf(&data.tq, &data.tqm1)?;
            if l < best.0 {
                best = (l, s);
            }
        }
        Ok(best.1)
    };
    let argmins: Vec<f64> = scales.iter().map(|c| scan(*c)).collect::<hkf::Result<_>>()?;
    let same = argmins.iter().all(|a| *a == argmins[0]);
    Ok(outcome(
        worst <= 1e-12 && same,
        format!("max rel change {worst:.1e}; scan argmins {argmins:?}; dense route at q=6 {}", matrix.join(", ")),
    ))
}

fn criterion_8(kf: &mut KfRange) -> hkf::Result<Outcome> {
    let (single, _) = run(&default_config(Experiment::Lengthscale))?;
    kf.record(&single);
    let frac = single.derived.get("kf_upper_bound_fraction").copied().unwrap_or(0.0);
    let joint_cfg = config(
        r#"{"experiment":"joint","truth":{"kind":"matern","s":2.5,"tau":1.0},"q":9,
            "estimator":{"params":[{"name":"s"},{"name":"log-tau"}]}}"#,
    );
    let (joint, secs) = run(&joint_cfg)?;
    let s_kf = mean_of(&joint, "kf", "s");
    let s_eb = mean_of(&joint, "eb", "s");
    Ok(outcome(
        frac >= 0.8 && (0.9..=1.1).contains(&s_kf) && (2.4..=2.6).contains(&s_eb),
        format!("KF log tau at upper bound in {:.0}% of instances; joint mean s_KF {s_kf:.4}, s_EB {s_eb:.4}; {secs:.1}s", 100.0 * frac),
    ))
}

fn criterion_9(kf: &mut KfRange) -> hkf::Result<Outcome> {
    let well = default_config(Experiment::Varcoef);
    let mut mis = well.clone();
    mis.kernel = hkf::experiments::KernelSpec::Laplacian;
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, cfg) in [("well-specified", well), ("misspecified", mis)] {
        let (r, secs) = run(&cfg)?;
        kf.record(&r);
        let (eb, k) = (mean_of(&r, "eb", "s"), mean_of(&r, "kf", "s"));
        pass &= r.config.instances == 50 && (2.4..=2.6).contains(&eb) && (0.9..=1.1).contains(&k);
        parts.push(format!("{label}: mean s_EB {eb:.4}, s_KF {k:.4} ({secs:.0}s)"));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn criterion_10(kf: &mut KfRange) -> hkf::Result<Outcome> {
    let well = default_config(Experiment::Discontinuity);
    let (r, _) = run(&well)?;
    kf.record(&r);
    let eb_in = count_in(&r, "eb", "theta", 0.48, 0.52);
    let kf_in = count_in(&r, "kf", "theta", 0.48, 0.52);
    let mut mis = well.clone();
    mis.kernel = hkf::experiments::KernelSpec::Composite { s: 5.0 };
    let (m, _) = run(&mis)?;
    kf.record(&m);
    let kf_mis = count_in(&m, "kf", "theta", 0.48, 0.52);
    let (lo, _) = mis.bounds(hkf::estimators::ParamKind::Theta);
    let eb_edge = m.rows("eb", "theta").iter().filter(|row| row.hit_boundary && (row.estimate - lo).abs() < 0.01).count();
    let eb_mis_mean = mean_of(&m, "eb", "theta");
    Ok(outcome(
        eb_in >= 45 && kf_in >= 45 && kf_mis >= 45 && eb_edge >= 45,
        format!(
            "well-specified: EB {eb_in}/50, KF {kf_in}/50 in [0.48, 0.52]; s_model=5: KF {kf_mis}/50 in bracket, \
             EB at the 0.3 bound {eb_edge}/50 (mean EB theta {eb_mis_mean:.4})"
        ),
    ))
}

fn criterion_11(kf: &mut KfRange) -> hkf::Result<Outcome> {
    let (r, _) = run(&default_config(Experiment::Deterministic))?;
    kf.record(&r);
    let (eb, k) = (mean_of(&r, "eb", "s"), mean_of(&r, "kf", "s"));
    Ok(outcome(
        (2.3..=2.5).contains(&eb) && (1.1..=1.3).contains(&k),
        format!("s_EB {eb:.4}, s_KF {k:.4} for s = 1.2"),
    ))
}

fn criterion_12() -> hkf::Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for t in [1.0, 2.5] {
        let (l8, l9) = (log_det_spectral(t, 8, 1)?, log_det_spectral(t, 9, 1)?);
        let slope = (l9 - l8) / (9.0 * 512.0 - 8.0 * 256.0);
        let target = -(2.0 * t - 1.0) * 2f64.ln();
        let rel = (slope / target - 1.0).abs();
        pass &= rel <= 0.15;
        parts.push(format!("t={t}: slope {slope:.4} vs {target:.4} ({:.1}%)", 100.0 * rel));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn criterion_13(kf: &KfRange) -> hkf::Result<Outcome> {
    // Periodicity in m with period 2^q, bit for bit.
    let mut periodic = true;
    for q in 1..=6u32 {
        let n = 1i64 << q;
        for t in [0.75, 1.0, 1.7, 3.0] {
            for m in -n..=n {
                let base = periodized_symbol(&[m], q, t, 1e-13)?;
                for k in [-3i64, -1, 1, 2, 5] {
                    periodic &= periodized_symbol(&[m + k * n], q, t, 1e-13)? == base;
                }
            }
        }
    }
    // t = 1: M_q^1(m) = π² / (N² sin²(πm/N)), and π²/(3N²) at m ≡ 0.
    let mut cot_err: f64 = 0.0;
    for q in 1..=8u32 {
        let n = (1u64 << q) as f64;
        for m in 0..(1i64 << q) {
            let closed = if m == 0 {
                PI * PI / (3.0 * n * n)
            } else {
                PI * PI / (n * n * (PI * m as f64 / n).sin().powi(2))
            };
            let v = periodized_symbol(&[m], q, 1.0, 1e-13)?;
            cot_err = cot_err.max((v / closed - 1.0).abs());
        }
    }
    // Pointwise KL variance against the Mercer diagonal.
    let sym = MaternLike::new(1.0, 0.5, 1.25)?;
    let lat = TorusLattice::new(3, 1);
    let width = 64;
    let draws = 10_000;
    let mut sq = vec![0.0; lat.len()];
    for i in 0..draws {
        let f = kl_sample(&sym, lat, width, 2024, i)?;
        for (acc, v) in sq.iter_mut().zip(&f.values) {
            *acc += v * v;
        }
    }
    let trunc = Truncation::Sharp { half_width: width };
    let mut worst_z: f64 = 0.0;
    for (k, acc) in sq.iter().enumerate() {
        let x = lat.point(k);
        let var = mercer_kernel(&x, &x, &sym, &trunc)?;
        let est = acc / draws as f64;
        // Var(X²) = 2σ⁴ for a centred Gaussian.
        let se = (2.0 / draws as f64).sqrt() * var;
        worst_z = worst_z.max((est - var).abs() / se);
    }
    let kf_ok = kf.runs > 0 && kf.min >= 0.0 && kf.max <= 1.0;
    Ok(outcome(
        periodic && cot_err <= 1e-10 && worst_z <= 3.0 && kf_ok,
        format!(
            "periodicity exact: {periodic}; cotangent rel error {cot_err:.1e}; KL variance worst |z| {worst_z:.2}; \
             KF loss range [{:.4}, {:.4}] over {} runs",
            kf.min, kf.max, kf.runs
        ),
    ))
}

fn main() -> ExitCode {
    let strict = std::env::var("HKF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut kf = KfRange::default();
    let mut results: BTreeMap<u32, Outcome> = BTreeMap::new();
    let wrap = |r: hkf::Result<Outcome>| r.unwrap_or_else(|e| outcome(false, format!("error: {e}")));

    results.insert(1, wrap(criterion_1(&mut kf)));
    results.insert(2, wrap(criterion_2()));
    match criteria_3_4(&mut kf) {
        Ok((a, b)) => {
            results.insert(3, a);
            results.insert(4, b);
        }
        Err(e) => {
            results.insert(3, outcome(false, format!("error: {e}")));
            results.insert(4, outcome(false, format!("error: {e}")));
        }
    }
    results.insert(5, wrap(criterion_5()));
    results.insert(6, wrap(criterion_6()));
    results.insert(7, wrap(criterion_7()));
    results.insert(8, wrap(criterion_8(&mut kf)));
    results.insert(9, wrap(criterion_9(&mut kf)));
    results.insert(10, wrap(criterion_10(&mut kf)));
    results.insert(11, wrap(criterion_11(&mut kf)));
    results.insert(12, wrap(criterion_12()));
    results.insert(13, wrap(criterion_13(&kf)));

    let mut passed = 0;
    for (n, o) in &results {
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        passed += o.pass as usize;
    }
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
