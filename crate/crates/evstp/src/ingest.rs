//! Trajectory record files: `vehicle_id,YYYY-MM-DD HH:MM:SS,lon,lat`, one
//! fix per line, no header.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use evstp_core::{GpsFix, Trajectory};

use crate::dates::{format_datetime, parse_datetime};
use crate::error::{Error, Result};

/// Record layouts understood by [`parse_trajectory_file`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordFormat {
    /// The four-field comma layout of the public Beijing taxi release.
    #[default]
    BeijingTaxi,
}

/// What to do with a line that does not parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedLines {
    #[default]
    Fail,
    /// Log a warning with the line number and continue.
    Skip,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub format: RecordFormat,
    pub malformed: MalformedLines,
    /// Name used in error messages.
    pub source_name: String,
}

fn parse_line(line: &str) -> std::result::Result<(&str, GpsFix), String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err(String::from("empty vehicle id"));
    }
    let t = parse_datetime(fields[1].trim())
        .ok_or_else(|| format!("unparsable datetime {:?}", fields[1]))?;
    let lon: f64 = fields[2].trim().parse().map_err(|_| format!("unparsable longitude {:?}", fields[2]))?;
    let lat: f64 = fields[3].trim().parse().map_err(|_| format!("unparsable latitude {:?}", fields[3]))?;
    let fix = GpsFix { timestamp: t, lon, lat };
    if !fix.is_valid() {
        return Err(format!("coordinate out of range: lon {lon}, lat {lat}"));
    }
    Ok((id, fix))
}

/// Group fixes by vehicle id. Trajectories appear in order of each
/// vehicle's first line; fixes keep file order.
pub fn parse_trajectory_file<R: BufRead>(source: R, opts: &ParseOptions) -> Result<Vec<Trajectory>> {
    let RecordFormat::BeijingTaxi = opts.format;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<Trajectory> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            path: opts.source_name.clone(),
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok((id, fix)) => {
                let k = match index.get(id) {
                    Some(&k) => k,
                    None => {
                        index.insert(id.to_owned(), out.len());
                        out.push(Trajectory::new(id));
                        out.len() - 1
                    }
                };
                out[k].fixes.push(fix);
            }
            Err(message) => match opts.malformed {
                MalformedLines::Fail => {
                    return Err(Error::Parse { path: opts.source_name.clone(), line: lineno, message })
                }
                MalformedLines::Skip => log::warn!("{}:{lineno}: skipped: {message}", opts.source_name),
            },
        }
    }
    Ok(out)
}

pub fn read_trajectory_path(path: &std::path::Path, malformed: MalformedLines) -> Result<Vec<Trajectory>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let opts = ParseOptions { malformed, source_name: path.display().to_string(), ..Default::default() };
    parse_trajectory_file(std::io::BufReader::new(file), &opts)
}

/// Write trajectories in file order. Coordinates use the shortest decimal
/// form that parses back to the same value.
pub fn write_trajectories<W: Write>(mut out: W, trajs: &[Trajectory]) -> std::io::Result<()> {
    for t in trajs {
        for f in &t.fixes {
            writeln!(out, "{},{},{},{}", t.vehicle_id, format_datetime(f.timestamp), f.lon, f.lat)?;
        }
    }
    out.flush()
}
