//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use oracle::{
    brute_force_frechet, brute_force_procrustes_2x2, numeric_log_abs_jacobian, random_spd,
};
use spd_power::field::{
    estimate_alpha_map, generate_synthetic_field, normalize_subjects, NeighborhoodSpec,
    SyntheticFieldSpec,
};
use spd_power::likelihood::jacobian::{ratio_alpha_series, ratio_direct, ratio_gap_series};
use spd_power::likelihood::{log_jacobian_ratio, PreparedTensor, ALPHA_THRESHOLD, GAP_THRESHOLD};
use spd_power::simulation::{replication_rng, run_coverage, SimDesign};
use spd_power::{
    dist_log_euclidean, dist_power, dist_procrustes_power, fit_alpha, frechet_mean, matrix_power,
    power_transform, AlphaGrid, PowerParam, SymMatrix,
};

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn pp(a: f64) -> PowerParam {
    PowerParam::new(a).unwrap()
}

fn simulate_via_cli(n_v: u32, n_s: u32) -> f64 {
    let out = Command::new(env!("CARGO_BIN_EXE_spdpow"))
        .args([
            "simulate", "--reps", "500", "--seed", "1", "--format", "json",
        ])
        .args(["--n-v", &n_v.to_string(), "--n-s", &n_s.to_string()])
        .output()
        .expect("run spdpow");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_slice(&out.stdout).expect("json output");
    doc["result"]["coverage"].as_f64().expect("coverage field")
}

fn table_coverage() -> Outcome {
    let cases = [
        (2, 4, 0.725, 0.04),
        (4, 5, 0.950, 0.025),
        (10, 10, 0.957, 0.025),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (n_v, n_s, target, tol) in cases {
        let cov = simulate_via_cli(n_v, n_s);
        let ok = (cov - target).abs() <= tol + 1e-12;
        pass &= ok;
        parts.push(format!(
            "({n_v},{n_s}) {:.1}% vs {:.1}±{:.1}",
            100.0 * cov,
            100.0 * target,
            100.0 * tol
        ));
    }
    outcome(pass, parts.join("; "))
}

fn log_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_spd(&mut rng, 3, 0.5, 2.0);
        let b = random_spd(&mut rng, 3, 0.5, 2.0);
        let le = dist_log_euclidean(&a, &b).unwrap();
        let p = dist_power(&a, &b, pp(1e-4)).unwrap();
        worst = worst.max((p - le).abs() / le);
    }
    outcome(
        worst <= 1e-3,
        format!("max relative gap {worst:.2e} (limit 1e-3)"),
    )
}

fn jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = random_spd(&mut rng, 3, 0.3, 4.0);
        let prepared = PreparedTensor::new(&s).unwrap();
        for alpha in [0.3, 0.5, 1.5] {
            let analytic = prepared.log_jacobian(alpha).unwrap();
            let numeric = numeric_log_abs_jacobian(
                &s,
                &|x: &SymMatrix| power_transform(x, alpha).unwrap().into_vech(),
                1e-5,
            );
            worst = worst.max((analytic - numeric).abs() / numeric.abs());
        }
    }
    let mut unit_exact = true;
    for _ in 0..50 {
        let s = random_spd(&mut rng, 3, 0.01, 100.0);
        unit_exact &= PreparedTensor::new(&s).unwrap().log_jacobian(1.0).unwrap() == 0.0;
    }
    outcome(
        worst <= 1e-4 && unit_exact,
        format!(
            "max relative error {worst:.2e} (limit 1e-4); alpha = 1 exactly zero: {unit_exact}"
        ),
    )
}

fn series_branches() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_alpha: f64 = 0.0;
    let mut worst_jump: f64 = 0.0;
    let lambdas = [0.1, 0.7, 1.0, 3.3, 10.0];
    for &la in &lambdas {
        // gap band: mu in [1e-6, 1e-2] on both sides, alpha in [-0.5, 1]
        for i in 0..=80 {
            let mag = 10f64.powf(-6.0 + 4.0 * i as f64 / 80.0);
            for sign in [-1.0, 1.0] {
                let lb = la * (1.0 + sign * mag);
                for k in 0..=30 {
                    let alpha = -0.5 + 1.5 * k as f64 / 30.0;
                    if alpha.abs() < 1e-9 {
                        continue;
                    }
                    let d = ratio_direct(la, lb, alpha);
                    worst_gap =
                        worst_gap.max((ratio_gap_series(la, lb, alpha) - d).abs() / d.abs());
                }
            }
        }
        // small-power band: |alpha| in [1e-6, 1e-2], well separated eigenvalues
        for &lb in &lambdas {
            if (lb / la - 1.0).abs() <= GAP_THRESHOLD {
                continue;
            }
            for i in 0..=80 {
                let mag = 10f64.powf(-6.0 + 4.0 * i as f64 / 80.0);
                for alpha in [-mag, mag] {
                    let d = ratio_direct(la, lb, alpha);
                    worst_alpha =
                        worst_alpha.max((ratio_alpha_series(la, lb, alpha) - d).abs() / d.abs());
                }
            }
            // the selected branch must not jump at the power threshold
            let below = log_jacobian_ratio(la, lb, ALPHA_THRESHOLD * (1.0 - 1e-9)).unwrap();
            let above = log_jacobian_ratio(la, lb, ALPHA_THRESHOLD * (1.0 + 1e-9)).unwrap();
            worst_jump = worst_jump.max((below - above).abs());
        }
        for k in 0..=30 {
            let alpha = -0.5 + 1.5 * k as f64 / 30.0;
            let below =
                log_jacobian_ratio(la, la * (1.0 + GAP_THRESHOLD * (1.0 - 1e-9)), alpha).unwrap();
            let above =
                log_jacobian_ratio(la, la * (1.0 + GAP_THRESHOLD * (1.0 + 1e-9)), alpha).unwrap();
            worst_jump = worst_jump.max((below - above).abs());
        }
    }
    let pass = worst_gap <= 1e-8 && worst_alpha <= 1e-8 && worst_jump <= 1e-8;
    outcome(
        pass,
        format!("gap series {worst_gap:.1e}, power series {worst_alpha:.1e}, threshold jump {worst_jump:.1e} (limit 1e-8)"),
    )
}

fn frechet_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for alpha in [-0.5, 0.0, 0.5, 1.0, 2.0] {
        for trial in 0..20 {
            let m = 2 + trial % 2;
            let n = 2 + trial % 5;
            let samples: Vec<_> = (0..n).map(|_| random_spd(&mut rng, m, 0.3, 3.0)).collect();
            let closed = frechet_mean(&samples, pp(alpha)).unwrap().mean;
            let brute = brute_force_frechet(&samples, alpha);
            worst = worst.max((&closed - &brute).frobenius_norm());
        }
    }
    outcome(
        worst <= 1e-5,
        format!("max Frobenius gap {worst:.2e} over 100 samples (limit 1e-5)"),
    )
}

fn profile_recovery() -> Outcome {
    let design = SimDesign::default()
        .with_size(400, 1)
        .with_replications(200, 6);
    let r = run_coverage(&design).unwrap();
    outcome(
        r.coverage >= 0.90,
        format!(
            "coverage {:.1}% over {} replications at n = 400, {} failures (need >= 90%)",
            100.0 * r.coverage,
            200,
            r.failures
        ),
    )
}

fn scale_invariance() -> Outcome {
    let grid = AlphaGrid::default();
    let sampler = SimDesign::default().sampler().unwrap();
    let mut same = 0;
    let total = 20;
    for seed in 0..total {
        let mut rng = replication_rng(7, seed);
        let samples: Vec<_> = (0..20)
            .map(|_| sampler.sample(&mut rng).unwrap().0)
            .collect();
        let scaled: Vec<_> = samples.iter().map(|s| s.scale(7.3)).collect();
        let a = fit_alpha(&samples, &grid, 2.0).unwrap().alpha_hat;
        let b = fit_alpha(&scaled, &grid, 2.0).unwrap().alpha_hat;
        same += (a == b) as u64;
    }
    outcome(
        same == total,
        format!("argmax unchanged at c = 7.3 on {same}/{total} datasets"),
    )
}

fn procrustes_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..1000 {
        let a = random_spd(&mut rng, 3, 0.1, 5.0);
        let b = random_spd(&mut rng, 3, 0.1, 5.0);
        let p = dist_procrustes_power(&a, &b, pp(0.5)).unwrap().distance;
        if p > dist_power(&a, &b, pp(0.5)).unwrap() {
            violations += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s1 = random_spd(&mut rng, 2, 0.1, 5.0);
        let s2 = random_spd(&mut rng, 2, 0.1, 5.0);
        let a = matrix_power(&s1, 0.5).unwrap().to_dmatrix();
        let b = matrix_power(&s2, 0.5).unwrap().to_dmatrix();
        let brute = brute_force_procrustes_2x2(&a, &b) / 0.5;
        let closed = dist_procrustes_power(&s1, &s2, pp(0.5)).unwrap().distance;
        worst = worst.max((closed - brute).abs());
    }
    outcome(
        violations == 0 && worst <= 1e-6,
        format!("{violations}/1000 bound violations; 2x2 brute-force gap {worst:.1e} (limit 1e-6)"),
    )
}

fn pipeline() -> Outcome {
    let raw = generate_synthetic_field(&SyntheticFieldSpec::default()).unwrap();
    let grid = AlphaGrid::default();
    let spec = NeighborhoodSpec::default();
    let entries = estimate_alpha_map(&raw, &grid, 2.0, &spec).unwrap();
    let fitted: Vec<_> = entries.iter().filter_map(|e| e.fit.as_ref().ok()).collect();
    let covered = fitted.iter().filter(|f| f.ci_contains(0.3)).count();
    let coverage = covered as f64 / fitted.len().max(1) as f64;
    let coverage_ok = fitted.len() >= 50 && (coverage - 0.95).abs() <= 0.05;

    // one global scale for every subject, then normalisation on versus off
    let single_scale = normalize_subjects(&raw).unwrap().scaled(7.3);
    let off = estimate_alpha_map(&single_scale, &grid, 2.0, &spec).unwrap();
    let on = estimate_alpha_map(
        &normalize_subjects(&single_scale).unwrap(),
        &grid,
        2.0,
        &spec,
    )
    .unwrap();
    let changed = off
        .iter()
        .zip(&on)
        .filter(|(a, b)| a.center != b.center || a.alpha_hat() != b.alpha_hat())
        .count()
        + off.len().abs_diff(on.len());
    outcome(
        coverage_ok && changed == 0,
        format!(
            "{} neighbourhoods, {} fitted, coverage {:.1}% (95±5); argmax changes with normalisation: {changed}",
            entries.len(),
            fitted.len(),
            100.0 * coverage
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("coverage table, desk scale", table_coverage),
        ("log-Euclidean limit", log_limit),
        ("power-transform Jacobian", jacobian),
        ("series branch consistency", series_branches),
        ("Frechet mean oracle", frechet_oracle),
        ("profile-likelihood recovery", profile_recovery),
        ("scale invariance", scale_invariance),
        ("Procrustes bound and oracle", procrustes_bound),
        ("synthetic field pipeline", pipeline),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        failed += (!result.pass) as usize;
        println!(
            "criterion {}: {verdict} {name}: {} [{:.1}s]",
            k + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
