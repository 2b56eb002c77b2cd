//! CSV carriers for observation and packet streams.
//!
//! ```text
//! observations: t_s,visual_id,x_m,y_m,theta_rad,v_mps,omega_radps
//! packets:      t_s,address,seq,u_g_v,u_g_omega,e_v,e_omega
//! truth:        address,visual_id
//! ```
//!
//! Floats are written in shortest round-trip form, so a written stream
//! reads back bit-identical.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::align::seconds_to_us;
use super::{PacketRecord, WatermarkPacket, VERSION};
use crate::error::{Error, Result};
use crate::sim::{Observation, TruthPair};

pub const OBSERVATIONS_HEADER: [&str; 7] =
    ["t_s", "visual_id", "x_m", "y_m", "theta_rad", "v_mps", "omega_radps"];
pub const PACKETS_HEADER: [&str; 7] = ["t_s", "address", "seq", "u_g_v", "u_g_omega", "e_v", "e_omega"];
pub const TRUTH_HEADER: [&str; 2] = ["address", "visual_id"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayStreams {
    pub observations: Vec<Observation>,
    pub packets: Vec<PacketRecord>,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(fields: &[&str], i: usize, name: &str, path: &Path, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = fields
        .get(i)
        .ok_or_else(|| parse_err(path, line, format!("missing column {name}")))?;
    raw.trim()
        .parse()
        .map_err(|e| parse_err(path, line, format!("column {name}: {e} ({raw:?})")))
}

/// Parses one observation row split into columns.
pub fn parse_observation(fields: &[&str], path: &Path, line: u64) -> Result<Observation> {
    if fields.len() != OBSERVATIONS_HEADER.len() {
        return Err(parse_err(
            path,
            line,
            format!("expected {} columns, found {}", OBSERVATIONS_HEADER.len(), fields.len()),
        ));
    }
    let visual_id: String = field(fields, 1, "visual_id", path, line)?;
    if visual_id.is_empty() {
        return Err(parse_err(path, line, "empty visual_id"));
    }
    Ok(Observation {
        t: field(fields, 0, "t_s", path, line)?,
        visual_id,
        x: field(fields, 2, "x_m", path, line)?,
        y: field(fields, 3, "y_m", path, line)?,
        theta: field(fields, 4, "theta_rad", path, line)?,
        v: field(fields, 5, "v_mps", path, line)?,
        omega: field(fields, 6, "omega_radps", path, line)?,
    })
}

fn parse_packet(fields: &[&str], path: &Path, line: u64) -> Result<PacketRecord> {
    if fields.len() != PACKETS_HEADER.len() {
        return Err(parse_err(
            path,
            line,
            format!("expected {} columns, found {}", PACKETS_HEADER.len(), fields.len()),
        ));
    }
    let t: f64 = field(fields, 0, "t_s", path, line)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(parse_err(path, line, format!("invalid timestamp {t}")));
    }
    let address: String = field(fields, 1, "address", path, line)?;
    if address.is_empty() {
        return Err(parse_err(path, line, "empty address"));
    }
    Ok(PacketRecord {
        address,
        packet: WatermarkPacket {
            version: VERSION,
            seq: field(fields, 2, "seq", path, line)?,
            timestamp_us: seconds_to_us(t),
            u_g_v: field(fields, 3, "u_g_v", path, line)?,
            u_g_omega: field(fields, 4, "u_g_omega", path, line)?,
            e_v: field(fields, 5, "e_v", path, line)?,
            e_omega: field(fields, 6, "e_omega", path, line)?,
        },
    })
}

/// Reads rows after checking the header; an empty input yields no rows.
fn read_rows<R: Read, T>(
    reader: R,
    path: &Path,
    header: &[&str],
    mut parse: impl FnMut(&[&str], &Path, u64) -> Result<T>,
) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut saw_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = rec.iter().collect();
        if !saw_header {
            if fields != header {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected header {:?}, found {:?}", header.join(","), fields.join(",")),
                ));
            }
            saw_header = true;
            continue;
        }
        out.push(parse(&fields, path, line)?);
    }
    Ok(out)
}

pub fn read_observations<R: Read>(reader: R, path: &Path) -> Result<Vec<Observation>> {
    let obs = read_rows(reader, path, &OBSERVATIONS_HEADER, parse_observation)?;
    for (i, w) in obs.windows(2).enumerate() {
        if w[1].t < w[0].t || w[1].t.is_nan() {
            return Err(Error::Data(format!(
                "{}: observation timestamps decrease at row {} ({} after {})",
                path.display(),
                i + 2,
                w[1].t,
                w[0].t
            )));
        }
    }
    Ok(obs)
}

pub fn read_packets<R: Read>(reader: R, path: &Path) -> Result<Vec<PacketRecord>> {
    let pkts = read_rows(reader, path, &PACKETS_HEADER, parse_packet)?;
    let mut last: std::collections::HashMap<&str, u64> = Default::default();
    for (i, p) in pkts.iter().enumerate() {
        let ts = p.packet.timestamp_us;
        if let Some(&prev) = last.get(p.address.as_str()) {
            if ts < prev {
                return Err(Error::Data(format!(
                    "{}: packet timestamps of {} decrease at row {}",
                    path.display(),
                    p.address,
                    i + 1
                )));
            }
        }
        last.insert(&p.address, ts);
    }
    Ok(pkts)
}

pub fn read_truth<R: Read>(reader: R, path: &Path) -> Result<Vec<TruthPair>> {
    let mut t = read_rows(reader, path, &TRUTH_HEADER, |f, p, l| {
        if f.len() != 2 {
            return Err(parse_err(p, l, "expected 2 columns"));
        }
        Ok(TruthPair {
            address: f[0].trim().to_string(),
            visual_id: f[1].trim().to_string(),
        })
    })?;
    t.sort();
    Ok(t)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Loads an observation file and a packet file. Empty and header-only files
/// yield empty streams.
pub fn load_replay(observations_csv: &Path, packets_csv: &Path) -> Result<ReplayStreams> {
    Ok(ReplayStreams {
        observations: read_observations(open(observations_csv)?, observations_csv)?,
        packets: read_packets(open(packets_csv)?, packets_csv)?,
    })
}

pub fn load_truth(path: &Path) -> Result<Vec<TruthPair>> {
    read_truth(open(path)?, path)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn observation_row(o: &Observation) -> [String; 7] {
    [
        o.t.to_string(),
        o.visual_id.clone(),
        o.x.to_string(),
        o.y.to_string(),
        o.theta.to_string(),
        o.v.to_string(),
        o.omega.to_string(),
    ]
}

pub fn write_observations<W: Write>(w: W, obs: &[Observation]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(OBSERVATIONS_HEADER).map_err(csv_err)?;
    for o in obs {
        wr.write_record(observation_row(o)).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_packets<W: Write>(w: W, packets: &[PacketRecord]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(PACKETS_HEADER).map_err(csv_err)?;
    for r in packets {
        let p = &r.packet;
        wr.write_record([
            (p.timestamp_us as f64 / 1e6).to_string(),
            r.address.clone(),
            p.seq.to_string(),
            p.u_g_v.to_string(),
            p.u_g_omega.to_string(),
            p.e_v.to_string(),
            p.e_omega.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_truth<W: Write>(w: W, truth: &[TruthPair]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(TRUTH_HEADER).map_err(csv_err)?;
    for t in truth {
        wr.write_record([&t.address, &t.visual_id]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn save_replay(dir: &Path, streams: &ReplayStreams) -> Result<(PathBuf, PathBuf)> {
    let obs = dir.join("observations.csv");
    let pkts = dir.join("packets.csv");
    write_observations(File::create(&obs)?, &streams.observations)?;
    write_packets(File::create(&pkts)?, &streams.packets)?;
    Ok((obs, pkts))
}
