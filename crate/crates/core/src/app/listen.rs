//! Live roadside-unit loop: UDP packets plus a tailed observation stream.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam::channel::{unbounded, Sender};
use log::{debug, warn};
use serde_json::json;

use super::{build_report, write_series, AnalysisOptions, Analyzer, Exit, ReportInputs, ScenarioDescriptor};
use crate::error::{Error, Result};
use crate::net::replay::{parse_observation, OBSERVATIONS_HEADER};
use crate::net::UdpIngest;
use crate::sim::Observation;

const POLL: Duration = Duration::from_millis(20);
const SNAPSHOT_EVERY: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObservationSource {
    /// A CSV file that another process appends to.
    Tail(PathBuf),
    /// `host:port` of a TCP server streaming the same CSV rows.
    Tcp(String),
}

impl ObservationSource {
    /// `tcp:HOST:PORT` or a file path.
    pub fn parse(s: &str) -> Self {
        match s.strip_prefix("tcp:") {
            Some(addr) => Self::Tcp(addr.to_string()),
            None => Self::Tail(PathBuf::from(s)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ListenArgs {
    pub bind: String,
    pub port: u16,
    pub observations: ObservationSource,
    /// Stop after this long; run until killed when absent.
    pub duration: Option<f64>,
    pub window: usize,
    pub out: Option<PathBuf>,
}

/// Feeds complete CSV lines from `reader` into `tx`. Returns on EOF unless
/// `follow` is set, in which case it polls for more data until `stop`.
fn pump_lines<R: Read>(reader: R, origin: &Path, follow: bool, stop: &AtomicBool, tx: &Sender<Observation>) -> Result<()> {
    let mut r = BufReader::new(reader);
    let mut pending = String::new();
    let mut line_no = 0u64;
    let header = OBSERVATIONS_HEADER.join(",");
    while !stop.load(Ordering::Relaxed) {
        let n = r.read_line(&mut pending)?;
        if n == 0 || !pending.ends_with('\n') {
            if !follow && n == 0 {
                return Ok(());
            }
            thread::sleep(POLL);
            continue;
        }
        line_no += 1;
        let line = pending.trim_end_matches(['\n', '\r']);
        if !line.is_empty() && line != header {
            let fields: Vec<&str> = line.split(',').collect();
            match parse_observation(&fields, origin, line_no) {
                Ok(o) => {
                    if tx.send(o).is_err() {
                        return Ok(());
                    }
                }
                Err(e) => warn!("{e}"),
            }
        }
        pending.clear();
    }
    Ok(())
}

fn spawn_reader(src: ObservationSource, stop: Arc<AtomicBool>, tx: Sender<Observation>) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let res = match &src {
            ObservationSource::Tail(path) => {
                // the producer may not have created the file yet
                let file = loop {
                    if stop.load(Ordering::Relaxed) {
                        return;
                    }
                    match File::open(path) {
                        Ok(f) => break f,
                        Err(_) => thread::sleep(POLL),
                    }
                };
                pump_lines(file, path, true, &stop, &tx)
            }
            ObservationSource::Tcp(addr) => TcpStream::connect(addr)
                .map_err(Error::from)
                .and_then(|s| {
                    s.set_read_timeout(Some(POLL))?;
                    pump_lines(TimeoutTolerant(s, stop.clone()), Path::new(addr), false, &stop, &tx)
                }),
        };
        if let Err(e) = res {
            warn!("observation stream ended: {e}");
        }
    })
}

/// Retries read timeouts so a quiet socket does not end the stream; reports
/// end of stream once `stop` is raised.
struct TimeoutTolerant(TcpStream, Arc<AtomicBool>);

impl Read for TimeoutTolerant {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        loop {
            match self.0.read(buf) {
                Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                    if self.1.load(Ordering::Relaxed) {
                        return Ok(0);
                    }
                }
                other => return other,
            }
        }
    }
}

pub fn listen(args: &ListenArgs) -> Exit {
    let started = Instant::now();
    let ingest = match UdpIngest::bind((args.bind.as_str(), args.port)) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: cannot bind {}:{}: {e}", args.bind, args.port);
            return Exit::Failure;
        }
    };
    eprintln!("listening on {}", ingest.local_addr());
    let opts = AnalysisOptions {
        window: args.window,
        ..AnalysisOptions::default()
    };
    let mut analyzer = match Analyzer::new(opts) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    };
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = unbounded();
    let reader = spawn_reader(args.observations.clone(), stop.clone(), tx);
    let deadline = args.duration.map(Duration::from_secs_f64);
    let mut next_snapshot = SNAPSHOT_EVERY;
    let (mut n_obs, mut n_pkt) = (0u64, 0u64);

    while deadline.is_none_or(|d| started.elapsed() < d) {
        for p in ingest.drain() {
            n_pkt += 1;
            analyzer.push_packet(&p);
        }
        for o in rx.try_iter() {
            n_obs += 1;
            analyzer.push_observation(o);
        }
        if started.elapsed() >= next_snapshot {
            next_snapshot += SNAPSHOT_EVERY;
            let line = match analyzer.match_report() {
                Ok(r) => json!({
                    "type": "snapshot",
                    "elapsed_s": started.elapsed().as_secs_f64(),
                    "observations": n_obs,
                    "packets": n_pkt,
                    "mapping": r.mapping,
                }),
                Err(e) => json!({
                    "type": "snapshot",
                    "elapsed_s": started.elapsed().as_secs_f64(),
                    "observations": n_obs,
                    "packets": n_pkt,
                    "not_ready": e.to_string(),
                }),
            };
            println!("{line}");
        }
        thread::sleep(POLL);
    }

    stop.store(true, Ordering::Relaxed);
    let counters = ingest.counters();
    for p in ingest.shutdown() {
        n_pkt += 1;
        analyzer.push_packet(&p);
    }
    let _ = reader.join();
    for o in rx.try_iter() {
        n_obs += 1;
        analyzer.push_observation(o);
    }
    analyzer.flush();
    debug!("ingest counters: {counters:?}");

    let (report, _) = build_report(ReportInputs {
        descriptor: ScenarioDescriptor {
            name: "listen".into(),
            mode: "listen".into(),
            seed: None,
            dt_s: None,
            window: args.window,
            min_samples: opts.min_samples,
            warmup_s: opts.warmup_s,
        },
        analyzer: &analyzer,
        hypotheses: &BTreeMap::new(),
        truth: None,
        ingest: Some(counters),
        observations: n_obs,
        packets: n_pkt,
        wall_clock_s: started.elapsed().as_secs_f64(),
    });
    println!("{}", json!({ "type": "final", "report": report }));
    if let Some(out) = &args.out {
        let written = fs::create_dir_all(out)
            .map_err(Error::from)
            .and_then(|_| {
                write_series(BufWriter::new(File::create(out.join("series.csv"))?), analyzer.series())?;
                let f = File::create(out.join("report.json"))?;
                serde_json::to_writer_pretty(f, &report).map_err(|e| Error::Io(e.into()))
            });
        if let Err(e) = written {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    }
    match &report.match_report {
        Some(m) if !m.mapping.is_empty() => Exit::Success,
        _ => Exit::Mismatch,
    }
}
