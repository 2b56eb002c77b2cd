//! Acceptance criteria A1–A7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use wmatch::app::{self, Exit, ReplayArgs, RunReport, SimulateArgs};
use wmatch::detector::{chi2_test, residual_t1_scalar, residual_t2_scalar, ScalarModel, ScalarPlant, TestKind};
use wmatch::matcher::assignment::{solve, total_cost};
use wmatch::net::{decode, encode, DecodeError, WatermarkPacket};
use wmatch::sim::{bundled, run_scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let out = f();
    let took = t0.elapsed();
    let pass = out.pass && took < limit;
    println!(
        "{name} {} ({}; {:.3} s, limit {:.0} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs_f64()
    );
    pass
}

fn a1() -> Outcome {
    let (sigma2_e, t_len): (f64, usize) = (0.05, 5000);
    let m = ScalarModel::new(0.8, 1.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wm = Normal::new(0.0, sigma2_e.sqrt()).unwrap();
    let mut plant = ScalarPlant::new(m, 0.0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for t in 0..t_len {
        // a stabilising policy that varies with time
        let u_g = -0.3 * plant.y + (t as f64 * 0.01).sin();
        let e = wm.sample(&mut rng);
        let prev = plant.y;
        let z = plant.step(u_g + e, &mut rng);
        s1 += residual_t1_scalar(z, prev, u_g, e, &m).powi(2);
        s2 += residual_t2_scalar(z, prev, u_g, &m).powi(2);
    }
    let (t1, t2) = (s1 / t_len as f64, s2 / t_len as f64);
    let (g1, g2) = (m.test1_target(), m.test2_target(sigma2_e));
    Outcome {
        pass: (t1 - g1).abs() <= 0.1 * g1 && (t2 - g2).abs() <= 0.1 * g2,
        detail: format!("T1={t1:.5} vs {g1}, T2={t2:.5} vs {g2}"),
    }
}

fn a2() -> Outcome {
    let mut correct = 0;
    let (mut matched, mut mismatched) = (Vec::new(), Vec::new());
    let base = bundled::get("lab_two_vehicle").unwrap();
    let gap = base.vehicles.iter().map(|v| v.watermark.sigma2_e_v).sum::<f64>();
    for seed in 1..=50u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.duration = 25.0;
        let log = run_scenario(&cfg).unwrap();
        let mut an = app::Analyzer::new(app::AnalysisOptions::default()).unwrap();
        app::feed(&mut an, &log.observations, &log.packets);
        let Ok(report) = an.match_report() else { continue };
        if app::mapping_matches(&report, &log.truth) {
            correct += 1;
        }
        for (a, v, acc) in an.matrix().cells() {
            let stat = acc.running_mean(TestKind::T1, wmatch::detector::Channel::Velocity).unwrap();
            if log.truth.iter().any(|t| t.address == a && t.visual_id == v) {
                matched.push(stat);
            } else {
                mismatched.push(stat);
            }
        }
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len().max(1) as f64;
    let sep = mean(&mismatched) - mean(&matched);
    Outcome {
        pass: correct >= 49 && sep >= 0.5 * gap,
        detail: format!("{correct}/50 correct, separation {sep:.4} (need {:.4})", 0.5 * gap),
    }
}

fn field_trace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/field_two_car")
}

fn read_report(path: &Path) -> RunReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn a3() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let dir = field_trace();
    let status = Command::new(env!("CARGO_BIN_EXE_wmatch"))
        .arg("replay")
        .arg("--obs")
        .arg(dir.join("observations.csv"))
        .arg("--packets")
        .arg(dir.join("packets.csv"))
        .arg("--window")
        .arg("20")
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    let report = read_report(&out.path().join("report.json"));
    let worst = report
        .window_separation
        .iter()
        .map(|w| w.fraction)
        .fold(f64::INFINITY, f64::min);
    Outcome {
        pass: status.code() == Some(0) && !report.window_separation.is_empty() && worst >= 0.95,
        detail: format!("exit {:?}, lowest-window fraction {worst:.4}", status.code()),
    }
}

fn a4() -> Outcome {
    let (trials, n, sigma2) = (1000, 200, 0.01);
    let m = ScalarModel::new(0.8, 1.0, sigma2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rejected = 0;
    for _ in 0..trials {
        let mut plant = ScalarPlant::new(m, 0.0);
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let (u_g, e) = (rng.gen_range(-1.0..1.0), 0.2 * rng.gen::<f64>());
            let prev = plant.y;
            let z = plant.step(u_g + e, &mut rng);
            sum_sq += residual_t1_scalar(z, prev, u_g, e, &m).powi(2);
        }
        if !chi2_test(sum_sq, n, sigma2, 0.01).unwrap().pass {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / trials as f64;
    Outcome {
        pass: (rate - 0.01).abs() <= 0.012,
        detail: format!("rejection rate {rate:.4}"),
    }
}

fn brute_force(c: &[Vec<f64>]) -> f64 {
    fn rec(c: &[Vec<f64>], row: usize, used: u32, acc: f64, best: &mut f64) {
        if row == c.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c[row].len() {
            if used & (1 << j) == 0 {
                rec(c, row + 1, used | (1 << j), acc + c[row][j], best);
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(c, 0, 0, 0.0, &mut best);
    best
}

fn a5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let c: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
        let got = total_cost(&c, &solve(&c));
        worst = worst.max((got - brute_force(&c)).abs());
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!("max |hungarian - brute force| = {worst:e}"),
    }
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..100_000 {
        let p = WatermarkPacket::new(
            rng.gen(),
            rng.gen(),
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        if !decode(&encode(&p)).is_ok_and(|q| q.bit_eq(&p)) {
            mismatches += 1;
        }
    }
    let reference = encode(&WatermarkPacket::new(42, 2_100_000, 1.0, 0.25, 0.1, -0.05));
    let mut accepted = 0;
    for bit in 0..reference.len() * 8 {
        let mut b = reference;
        b[bit / 8] ^= 1 << (bit % 8);
        if !matches!(decode(&b), Err(DecodeError::Corrupted { .. })) {
            accepted += 1;
        }
    }
    Outcome {
        pass: mismatches == 0 && accepted == 0,
        detail: format!(
            "{mismatches} round-trip mismatches, {accepted}/{} bit flips not reported as corrupted",
            reference.len() * 8
        ),
    }
}

fn a7() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let sim = |name: &str| {
        let out = tmp.path().join(name);
        let exit = app::simulate(&SimulateArgs {
            config: "lab_two_vehicle".into(),
            out: out.clone(),
            seed: Some(7),
            duration: Some(20.0),
            window: 20,
            emit: None,
            speedup: 1.0,
        });
        (out, exit)
    };
    let (a, ea) = sim("a");
    let (b, eb) = sim("b");
    let files = ["observations.csv", "packets.csv", "ground_truth.csv", "series.csv"];
    let logs_equal = files
        .iter()
        .all(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap());
    let (ra, rb) = (read_report(&a.join("report.json")), read_report(&b.join("report.json")));
    let reports_equal = ra.deterministic_json() == rb.deterministic_json();

    let replay_out = tmp.path().join("replay");
    let er = app::replay(&ReplayArgs {
        observations: a.join("observations.csv"),
        packets: a.join("packets.csv"),
        truth: None,
        out: Some(replay_out.clone()),
        window: 20,
    });
    let rr = read_report(&replay_out.join("report.json"));
    let same_mapping = rr.match_report.is_some() && rr.match_report == ra.match_report;
    let same_series = std::fs::read(a.join("series.csv")).unwrap() == std::fs::read(replay_out.join("series.csv")).unwrap();
    Outcome {
        pass: ea == Exit::Success && eb == Exit::Success && er == Exit::Success && logs_equal && reports_equal && same_mapping && same_series,
        detail: format!(
            "logs identical {logs_equal}, reports identical {reports_equal}, replay mapping identical {same_mapping}, replay series identical {same_series}"
        ),
    }
}

fn main() {
    let results = [
        check("A1", Duration::from_secs(1), a1),
        check("A2", Duration::from_secs(30), a2),
        check("A3", Duration::from_secs(5), a3),
        check("A4", Duration::from_secs(10), a4),
        check("A5", Duration::from_secs(5), a5),
        check("A6", Duration::from_secs(5), a6),
        check("A7", Duration::from_secs(30), a7),
    ];
    if !results.iter().all(|&p| p) {
        eprintln!("acceptance criteria failed: {results:?}");
        std::process::exit(1);
    }
}
