//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use l0lms::filters::{
    attractor_exact, attractor_taylor, sgn, update_indices, AlgorithmConfig, FilterState, InputTap,
    Regressor,
};
use l0lms::signals::{gen_white, synth_desired};
use l0lms::sim::{
    derive_seed, monte_carlo, preset, reach_threshold, steady_state, with_variant, ExperimentEntry,
    ExperimentId, LearningCurve, PresetOverrides, SteadyStateStats, DEFAULT_TOL_DB,
};
use l0lms::systems::gen_general_sparse;
use l0lms::Variant;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn entries(id: ExperimentId, ov: PresetOverrides) -> Vec<ExperimentEntry> {
    preset(id, &ov).expect("preset")
}

fn curve(e: &ExperimentEntry) -> LearningCurve {
    monte_carlo(&e.trial, e.runs, 0).expect("monte carlo")
}

fn stats(c: &LearningCurve, window: usize) -> Vec<SteadyStateStats> {
    steady_state(c, window, DEFAULT_TOL_DB).expect("steady state")
}

fn exact_reduction() -> Check {
    let len = 32;
    let steps = 2000;
    for seed in 0..10u64 {
        let h = gen_general_sparse(len, 4, 0.0, derive_seed(seed, 0)).map_err(|e| e.to_string())?;
        let x = gen_white(steps, 1.0, derive_seed(seed, 1)).map_err(|e| e.to_string())?;
        let d = synth_desired(&x, &h, 1e-3, derive_seed(seed, 2)).map_err(|e| e.to_string())?;
        let lms = AlgorithmConfig::lms(0.01);
        let l0 = AlgorithmConfig::l0_lms(0.01, 0.0);
        let mut a = FilterState::new(len);
        let mut b = FilterState::new(len);
        let mut reg = Regressor::new(len);
        for n in 0..steps {
            reg.push(x[n]);
            let tap = InputTap::new(reg.as_slice(), d[n]);
            a.step(&tap, &lms).map_err(|e| e.to_string())?;
            b.step(&tap, &l0).map_err(|e| e.to_string())?;
            let same = a
                .coefficients()
                .iter()
                .zip(b.coefficients())
                .all(|(p, q)| p.to_bits() == q.to_bits());
            ensure(same, || {
                format!("seed {seed}: trajectories differ at iteration {n}")
            })?;
        }
    }
    Ok("10 seeds x 2000 iterations bit-identical".into())
}

fn attractor_suite() -> Check {
    let points = 100_000;
    let mut worst_gap_ratio: f64 = 0.0;
    for beta in [5.0, 10.0, 15.0, 20.0] {
        let lim = 2.0 / beta;
        for i in 0..points {
            let x = -lim + 2.0 * lim * i as f64 / (points - 1) as f64;
            let f = attractor_taylor(x, beta);
            ensure(attractor_taylor(-x, beta) == -f, || {
                format!("beta {beta}: not odd at {x}")
            })?;
            ensure(f.abs() <= beta, || {
                format!("beta {beta}: |f| > beta at {x}")
            })?;
            if x.abs() < 1.0 / beta && x != 0.0 {
                ensure(sgn(f) == -sgn(x), || format!("beta {beta}: sign at {x}"))?;
            }
            if x.abs() >= 1.0 / beta {
                ensure(f == 0.0, || format!("beta {beta}: nonzero outside at {x}"))?;
            }
            if x.abs() <= 1.0 / beta {
                let gap = (attractor_exact(x, beta) - f).abs();
                worst_gap_ratio = worst_gap_ratio.max(gap / beta);
                ensure(gap <= 0.4 * beta, || {
                    format!("beta {beta}: gap {gap} at {x}")
                })?;
            }
        }
    }
    Ok(format!(
        "max |exact - taylor| / beta = {worst_gap_ratio:.4}"
    ))
}

fn partial_update() -> Check {
    for q in [1usize, 2, 4, 7] {
        for l in [8usize, 128, 500] {
            for start in [0u64, 1, 5, 1001] {
                let mut hits = vec![0u32; l];
                for n in start..start + q as u64 {
                    for j in update_indices(n, q, l).map_err(|e| e.to_string())? {
                        hits[j] += 1;
                    }
                }
                ensure(hits.iter().all(|h| *h == 1), || {
                    format!("Q {q}, L {l}: not a partition")
                })?;
            }
        }
    }
    let all = entries(
        ExperimentId::Exp2,
        PresetOverrides {
            runs: Some(20),
            iterations: Some(5000),
            ..Default::default()
        },
    );
    let mut levels = Vec::new();
    for e in all
        .iter()
        .filter(|e| e.trial.algo.variant == Variant::L0Lms)
    {
        let mut one = e.clone();
        one.trial.algo.q = 1;
        let l4 = stats(&curve(e), 200)[0].level_db;
        let l1 = stats(&curve(&one), 200)[0].level_db;
        ensure((l4 - l1).abs() <= 1.0, || {
            format!("{}: Q=4 level {l4:.2} dB vs Q=1 {l1:.2} dB", e.label)
        })?;
        levels.push(format!("{}: {l4:.2} vs {l1:.2} dB", e.label));
    }
    Ok(format!("partitions ok; Q=4 vs Q=1 {}", levels.join(", ")))
}

fn experiment2() -> Check {
    let all = entries(
        ExperimentId::Exp2,
        PresetOverrides {
            runs: Some(20),
            iterations: Some(5000),
            ..Default::default()
        },
    );
    let curves: Vec<LearningCurve> = all.iter().map(curve).collect();
    let find = |label: &str| all.iter().position(|e| e.label == label).expect(label);
    let (lms, k2, k8) = (find("lms"), find("l0lms_k2e-5"), find("l0lms_k8e-5"));

    let cross = |i: usize| reach_threshold(&curves[i], 50, -30.0, 0, curves[i].len());
    let (t_lms, t_k8) = (cross(lms), cross(k8));
    let t_k8 = t_k8.ok_or("kappa 8e-5 never reaches -30 dB")?;
    ensure(t_lms.is_none_or(|t| t_k8 < t), || {
        format!("-30 dB at {t_k8} (l0) vs {t_lms:?} (lms)")
    })?;

    let s2 = &stats(&curves[k2], 200)[0];
    let s8 = &stats(&curves[k8], 200)[0];
    ensure(s2.level_db <= s8.level_db, || {
        format!("levels {:.2} > {:.2}", s2.level_db, s8.level_db)
    })?;
    let (r2, r8) = (
        s2.reach_iteration.ok_or("kappa 2e-5 never settles")?,
        s8.reach_iteration.ok_or("kappa 8e-5 never settles")?,
    );
    ensure(r8 <= r2, || format!("reach {r8} (8e-5) > {r2} (2e-5)"))?;
    Ok(format!(
        "-30 dB: l0 {t_k8} < lms {t_lms:?}; level {:.2} <= {:.2} dB; reach {r8} <= {r2}",
        s2.level_db, s8.level_db
    ))
}

fn experiment3() -> Check {
    let window = 200;
    let all = entries(
        ExperimentId::Exp3,
        PresetOverrides {
            runs: Some(20),
            iterations: Some(10_000),
            ..Default::default()
        },
    );
    let (sparse, reference): (Vec<_>, Vec<_>) = all
        .iter()
        .partition(|e| e.trial.algo.variant == Variant::L0Lms);
    let reference = curve(reference[0]);

    let mut reaches = Vec::new();
    let mut ratios = Vec::new();
    let mut lcn128 = None;
    for e in &sparse {
        let c = curve(e);
        let s = &stats(&c, window)[0];
        let reach = s
            .reach_iteration
            .ok_or(format!("{} never settles", e.label))?;
        reaches.push(reach);

        let lms_curve = curve(&ExperimentEntry {
            trial: with_variant(&e.trial, Variant::Lms),
            ..(*e).clone()
        });
        let lms_level = stats(&lms_curve, window)[0].level_db;
        let target = s.level_db.max(lms_level) + DEFAULT_TOL_DB;
        let r_l0 = reach_threshold(&c, window, target, 0, c.len()).ok_or("no l0 reach")?;
        let r_lms =
            reach_threshold(&lms_curve, window, target, 0, c.len()).ok_or("no lms reach")?;
        ensure(r_l0 as f64 <= 1.05 * r_lms as f64, || {
            format!("{}: reach {r_l0} vs LMS {r_lms} at {target:.2} dB", e.label)
        })?;
        ratios.push(format!("{:.2}", r_l0 as f64 / r_lms as f64));
        if e.label.ends_with("128") {
            lcn128 = Some(c);
        }
    }
    ensure(reaches.windows(2).all(|w| w[0] <= w[1]), || {
        format!("reach not monotone in LCN: {reaches:?}")
    })?;
    let c128 = lcn128.ok_or("missing LCN 128 curve")?;
    let gap = c128
        .db()
        .iter()
        .zip(reference.db())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(gap <= 1.0, || {
        format!("LCN 128 departs from LMS by {gap:.3} dB")
    })?;
    Ok(format!(
        "reach {reaches:?}; LCN 128 max gap {gap:.3} dB; l0/lms reach ratios {}",
        ratios.join(" ")
    ))
}

fn experiment1() -> Check {
    let window = 1000;
    let all = entries(
        ExperimentId::Exp1,
        PresetOverrides {
            runs: Some(20),
            iterations: Some(30_000),
            change_at: Some(15_000),
            ..Default::default()
        },
    );
    let nlms = all
        .iter()
        .find(|e| e.trial.algo.variant == Variant::Nlms)
        .ok_or("no nlms")?;
    let sparse = all
        .iter()
        .find(|e| e.trial.algo.variant == Variant::L0Nlms)
        .ok_or("no l0nlms")?;
    let target = stats(&curve(sparse), window);

    let mut parts = Vec::new();
    for (seg, t) in target.iter().enumerate() {
        let l0_reach = t
            .reach_iteration
            .ok_or(format!("l0-NLMS segment {seg} never settles"))?;
        // NLMS misadjustment grows with mu; bisect for the l0-NLMS level.
        let (mut lo, mut hi) = (0.5, 1.95);
        let mut matched = None;
        for _ in 0..12 {
            let mu = 0.5 * (lo + hi);
            let mut e = nlms.clone();
            e.trial.algo.mu = mu;
            let s = stats(&curve(&e), window).swap_remove(seg);
            if (s.level_db - t.level_db).abs() <= DEFAULT_TOL_DB {
                matched = Some((mu, s));
                break;
            }
            if s.level_db < t.level_db {
                lo = mu;
            } else {
                hi = mu;
            }
        }
        let (mu, s) = matched.ok_or(format!(
            "segment {seg}: no NLMS step size matches {:.2} dB",
            t.level_db
        ))?;
        let nlms_reach = s
            .reach_iteration
            .ok_or(format!("NLMS segment {seg} never settles"))?;
        ensure(l0_reach < nlms_reach, || {
            format!("segment {seg}: l0-NLMS {l0_reach} vs NLMS {nlms_reach} (mu {mu:.3})")
        })?;
        parts.push(format!(
            "seg {}: l0 {l0_reach} ({:.2} dB) < nlms {nlms_reach} ({:.2} dB, mu {mu:.3})",
            t.segment_start, t.level_db, s.level_db
        ));
    }
    Ok(parts.join("; "))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for preset in ["exp2", "exp3"] {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{preset}_{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_l0lms"))
                .args([
                    "run", "--preset", preset, "--runs", "4", "--seed", "17", "--out",
                ])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?
                .status;
            ensure(status.success(), || {
                format!("{preset}: cli exited with {status}")
            })?;
            let curves =
                fs::read(out.join(format!("{preset}_curves.csv"))).map_err(|e| e.to_string())?;
            let summary = fs::read(out.join("summary.csv")).map_err(|e| e.to_string())?;
            outputs.push((curves, summary));
        }
        ensure(outputs[0] == outputs[1], || {
            format!("{preset}: outputs differ")
        })?;
    }
    Ok("exp2 and exp3 CSVs byte-identical across runs".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("exact reduction", exact_reduction, Duration::from_secs(1)),
        ("attractor suite", attractor_suite, Duration::from_secs(1)),
        (
            "partial-update schedule",
            partial_update,
            Duration::from_secs(30),
        ),
        ("experiment 2", experiment2, Duration::from_secs(60)),
        ("experiment 3", experiment3, Duration::from_secs(180)),
        ("experiment 1", experiment1, Duration::from_secs(300)),
        ("determinism", determinism, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        let result = result.and_then(|msg| {
            if elapsed <= budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(msg) => println!("criterion {}: PASS {name} [{elapsed:.2?}] {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{elapsed:.2?}] {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
