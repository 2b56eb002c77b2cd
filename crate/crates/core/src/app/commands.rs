//! `simulate` and `replay`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};

use super::{build_report, write_series, AnalysisOptions, Analyzer, Exit, Hypothesis, ReportInputs, RunReport, ScenarioDescriptor};
use crate::error::{Error, Result};
use crate::net::replay::{load_replay, load_truth, observation_row, write_observations, write_packets, write_truth, OBSERVATIONS_HEADER};
use crate::net::{seconds_to_us, PacketRecord, UdpSender};
use crate::sim::{bundled, run_scenario, Observation, ScenarioConfig, ScenarioLog, TruthPair};

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    /// Path to a TOML scenario, or the name of a bundled one.
    pub config: String,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub window: usize,
    /// Send packets over UDP to this RSU address in (scaled) real time.
    pub emit: Option<String>,
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayArgs {
    pub observations: PathBuf,
    pub packets: PathBuf,
    /// Defaults to `ground_truth.csv` beside the observation file, if present.
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub window: usize,
}

pub(crate) fn resolve_config(spec: &str) -> Result<ScenarioConfig> {
    let p = Path::new(spec);
    if p.exists() {
        ScenarioConfig::load(p)
    } else if bundled::names().contains(&spec) {
        bundled::get(spec)
    } else {
        Err(Error::Config(format!(
            "{spec}: no such file or bundled scenario (bundled: {})",
            bundled::names().join(", ")
        )))
    }
}

/// Honest-pair variances implied by a scenario: process noise plus sensor
/// velocity noise for Test 1, plus the excitation variance for Test 2.
pub(crate) fn hypotheses(cfg: &ScenarioConfig) -> BTreeMap<String, Hypothesis> {
    let sensor = cfg.sensor.velocity_std * cfg.sensor.velocity_std;
    cfg.vehicles
        .iter()
        .filter_map(|v| {
            let a = v.address.clone()?;
            let t1_v = v.noise.sigma2_w_v + sensor;
            Some((a, Hypothesis { t1_v, t2_v: t1_v + v.watermark.sigma2_e_v }))
        })
        .collect()
}

/// Feeds both streams in timestamp order (packets before observations on
/// ties) and flushes.
pub fn feed(analyzer: &mut Analyzer, observations: &[Observation], packets: &[PacketRecord]) {
    let mut pi = packets.iter().peekable();
    for o in observations {
        let t_us = seconds_to_us(o.t);
        while let Some(p) = pi.next_if(|p| p.packet.timestamp_us <= t_us) {
            analyzer.push_packet(p);
        }
        analyzer.push_observation(o.clone());
    }
    for p in pi {
        analyzer.push_packet(p);
    }
    analyzer.flush();
}

fn options(window: usize, alpha: f64) -> AnalysisOptions {
    AnalysisOptions {
        window,
        alpha,
        ..AnalysisOptions::default()
    }
}

fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut f, report).map_err(|e| Error::Io(e.into()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn fail(e: &Error) -> Exit {
    eprintln!("error: {e}");
    Exit::Failure
}

pub fn simulate(args: &SimulateArgs) -> Exit {
    match run_simulate(args) {
        Ok((report, exit)) => {
            summarise(&report);
            exit
        }
        Err(e) => fail(&e),
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<(RunReport, Exit)> {
    let started = Instant::now();
    let mut cfg = resolve_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    let log = run_scenario(&cfg)?;
    fs::create_dir_all(&args.out)?;
    info!(
        "{}: {} observations, {} packets",
        cfg.name,
        log.observations.len(),
        log.packets.len()
    );

    if let Some(rsu) = &args.emit {
        emit(&cfg, &log, rsu, args.speedup, &args.out)?;
    } else {
        write_observations(File::create(args.out.join("observations.csv"))?, &log.observations)?;
    }
    write_packets(File::create(args.out.join("packets.csv"))?, &log.packets)?;
    write_truth(File::create(args.out.join("ground_truth.csv"))?, &log.truth)?;

    let mut analyzer = Analyzer::new(options(args.window, cfg.alpha))?;
    feed(&mut analyzer, &log.observations, &log.packets);
    write_series(BufWriter::new(File::create(args.out.join("series.csv"))?), analyzer.series())?;
    let hyp = hypotheses(&cfg);
    let (report, exit) = build_report(ReportInputs {
        descriptor: ScenarioDescriptor {
            name: cfg.name.clone(),
            mode: "simulate".into(),
            seed: Some(cfg.seed),
            dt_s: Some(cfg.dt),
            window: args.window,
            min_samples: analyzer.options().min_samples,
            warmup_s: analyzer.options().warmup_s,
        },
        analyzer: &analyzer,
        hypotheses: &hyp,
        truth: Some(log.truth.clone()),
        ingest: None,
        observations: log.observations.len() as u64,
        packets: log.packets.len() as u64,
        wall_clock_s: started.elapsed().as_secs_f64(),
    });
    write_report(&args.out, &report)?;
    Ok((report, exit))
}

/// Plays the log out in scaled real time: one UDP socket per transmitting
/// vehicle, observations appended to `observations.csv` as they fall due.
fn emit(cfg: &ScenarioConfig, log: &ScenarioLog, rsu: &str, speedup: f64, out: &Path) -> Result<()> {
    if !(speedup.is_finite() && speedup > 0.0) {
        return Err(Error::Argument(format!("speedup must be positive, got {speedup}")));
    }
    let mut senders: BTreeMap<&str, UdpSender> = BTreeMap::new();
    let mut emitted = Vec::new();
    for v in &cfg.vehicles {
        if let Some(a) = v.address.as_deref() {
            let s = UdpSender::connect("0.0.0.0:0", rsu)?;
            emitted.push(TruthPair {
                address: s.local_addr()?.to_string(),
                visual_id: log
                    .truth
                    .iter()
                    .find(|t| t.address == a)
                    .map(|t| t.visual_id.clone())
                    .unwrap_or_default(),
            });
            senders.insert(a, s);
        }
    }
    emitted.sort();
    write_truth(File::create(out.join("ground_truth_emit.csv"))?, &emitted)?;

    let mut obs_out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(File::create(out.join("observations.csv"))?);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    obs_out.write_record(OBSERVATIONS_HEADER).map_err(csv_err)?;
    obs_out.flush()?;

    let start = Instant::now();
    let due = |t_us: u64| Duration::from_secs_f64(t_us as f64 / 1e6 / speedup);
    let mut oi = log.observations.iter().peekable();
    let mut pi = log.packets.iter().peekable();
    loop {
        let next_p = pi.peek().map(|p| p.packet.timestamp_us);
        let next_o = oi.peek().map(|o| seconds_to_us(o.t));
        let t = match (next_p, next_o) {
            (None, None) => break,
            (Some(p), Some(o)) => p.min(o),
            (Some(p), None) => p,
            (None, Some(o)) => o,
        };
        if let Some(wait) = due(t).checked_sub(start.elapsed()) {
            std::thread::sleep(wait);
        }
        while let Some(p) = pi.next_if(|p| p.packet.timestamp_us <= t) {
            if let Err(e) = senders[p.address.as_str()].send(&p.packet) {
                warn!("send from {} failed: {e}", p.address);
            }
        }
        let mut wrote = false;
        while let Some(o) = oi.next_if(|o| seconds_to_us(o.t) <= t) {
            obs_out.write_record(observation_row(o)).map_err(csv_err)?;
            wrote = true;
        }
        if wrote {
            obs_out.flush()?;
        }
    }
    Ok(())
}

pub fn replay(args: &ReplayArgs) -> Exit {
    match run_replay(args) {
        Ok((report, exit)) => {
            summarise(&report);
            exit
        }
        Err(e) => fail(&e),
    }
}

fn run_replay(args: &ReplayArgs) -> Result<(RunReport, Exit)> {
    let started = Instant::now();
    let streams = load_replay(&args.observations, &args.packets)?;
    if streams.packets.is_empty() {
        return Err(Error::Data(format!(
            "{}: no transmitting addresses",
            args.packets.display()
        )));
    }
    let truth_path = args.truth.clone().or_else(|| {
        let p = args.observations.parent()?.join("ground_truth.csv");
        p.exists().then_some(p)
    });
    let truth = truth_path.as_deref().map(load_truth).transpose()?;

    let opts = options(args.window, crate::detector::DEFAULT_ALPHA);
    let mut analyzer = Analyzer::new(opts)?;
    feed(&mut analyzer, &streams.observations, &streams.packets);
    let (report, exit) = build_report(ReportInputs {
        descriptor: ScenarioDescriptor {
            name: args
                .observations
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            mode: "replay".into(),
            seed: None,
            dt_s: None,
            window: args.window,
            min_samples: opts.min_samples,
            warmup_s: opts.warmup_s,
        },
        analyzer: &analyzer,
        hypotheses: &BTreeMap::new(),
        truth,
        ingest: None,
        observations: streams.observations.len() as u64,
        packets: streams.packets.len() as u64,
        wall_clock_s: started.elapsed().as_secs_f64(),
    });
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_series(BufWriter::new(File::create(out.join("series.csv"))?), analyzer.series())?;
        write_report(out, &report)?;
    } else {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.into()))?);
    }
    Ok((report, exit))
}

fn summarise(report: &RunReport) {
    match &report.match_report {
        Some(m) => {
            for p in &m.mapping {
                eprintln!(
                    "{} -> {}  t1={:.5} t2={:.5} margin={}",
                    p.address,
                    p.visual_id,
                    p.t1,
                    p.t2,
                    p.margin.map_or("-".into(), |x| format!("{x:.5}"))
                );
            }
            eprintln!("status: {}", report.status);
        }
        None => eprintln!(
            "status: {} ({})",
            report.status,
            report.diagnostic.as_deref().unwrap_or("")
        ),
    }
}
