//! Versioned plain-text topology dump.
//!
//! One record per line, comma separated, first field is the record kind:
//!
//! ```text
//! hcran-topology,1
//! antennas,<rrh_antennas>,<mbs_antennas>
//! coverage,<coverage_radius>,<max_ue_per_rrh>
//! mbs,<x>,<y>
//! rrh,<k>,<x>,<y>
//! ue,<m>,<x>,<y>
//! serving,<m>,<k1;k2;...>
//! alpha_rrh,<k>,<m>,<gain>
//! alpha_mbs,<m>,<gain>
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a dump
//! reads back bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point, Topology};
use crate::error::{Error, Result};

pub const TOPOLOGY_FORMAT_VERSION: u32 = 1;

pub fn write_topology(topo: &Topology) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "hcran-topology,{TOPOLOGY_FORMAT_VERSION}");
    let _ = writeln!(out, "antennas,{},{}", topo.rrh_antennas, topo.mbs_antennas);
    let _ = writeln!(out, "coverage,{},{}", topo.coverage_radius, topo.max_ue_per_rrh);
    let _ = writeln!(out, "mbs,{},{}", topo.mbs_position.x, topo.mbs_position.y);
    for (k, p) in topo.rrh_positions.iter().enumerate() {
        let _ = writeln!(out, "rrh,{k},{},{}", p.x, p.y);
    }
    for (m, p) in topo.ue_positions.iter().enumerate() {
        let _ = writeln!(out, "ue,{m},{},{}", p.x, p.y);
    }
    for (m, set) in topo.serving_rrhs.iter().enumerate() {
        let list: Vec<String> = set.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "serving,{m},{}", list.join(";"));
    }
    for (k, row) in topo.alpha_rrh.iter().enumerate() {
        for (m, a) in row.iter().enumerate() {
            let _ = writeln!(out, "alpha_rrh,{k},{m},{a}");
        }
    }
    for (m, a) in topo.alpha_mbs.iter().enumerate() {
        let _ = writeln!(out, "alpha_mbs,{m},{a}");
    }
    out
}

/// Parses a dump produced by [`write_topology`]. `path` is only used in
/// error messages.
pub fn read_topology(text: &str, path: &Path) -> Result<Topology> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut antennas = None;
    let mut coverage = (f64::INFINITY, 0usize);
    let mut mbs = Point::default();
    let mut rrh_pos: Vec<(usize, Point)> = Vec::new();
    let mut ue_pos: Vec<(usize, Point)> = Vec::new();
    let mut serving: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut alpha_rrh: Vec<(usize, usize, f64)> = Vec::new();
    let mut alpha_mbs: Vec<(usize, f64)> = Vec::new();
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .ok_or_else(|| err(lineno, "missing field".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| err(lineno, e.to_string()))
        };
        let int = |i: usize| -> Result<usize> {
            fields
                .get(i)
                .ok_or_else(|| err(lineno, "missing field".into()))?
                .trim()
                .parse::<usize>()
                .map_err(|e| err(lineno, e.to_string()))
        };
        if !saw_header {
            if fields[0] != "hcran-topology" {
                return Err(err(lineno, "missing hcran-topology header".into()));
            }
            let version = int(1)?;
            if version as u32 != TOPOLOGY_FORMAT_VERSION {
                return Err(err(lineno, format!("unsupported topology version {version}")));
            }
            saw_header = true;
            continue;
        }
        match fields[0] {
            "antennas" => antennas = Some((int(1)?, int(2)?)),
            "coverage" => coverage = (num(1)?, int(2)?),
            "mbs" => mbs = Point::new(num(1)?, num(2)?),
            "rrh" => rrh_pos.push((int(1)?, Point::new(num(2)?, num(3)?))),
            "ue" => ue_pos.push((int(1)?, Point::new(num(2)?, num(3)?))),
            "serving" => {
                let m = int(1)?;
                let list = fields.get(2).map(|s| s.trim()).unwrap_or("");
                let set = if list.is_empty() {
                    Vec::new()
                } else {
                    list.split(';')
                        .map(|s| s.trim().parse::<usize>().map_err(|e| err(lineno, e.to_string())))
                        .collect::<Result<Vec<_>>>()?
                };
                serving.push((m, set));
            }
            "alpha_rrh" => alpha_rrh.push((int(1)?, int(2)?, num(3)?)),
            "alpha_mbs" => alpha_mbs.push((int(1)?, num(2)?)),
            other => return Err(err(lineno, format!("unknown record kind {other:?}"))),
        }
    }
    if !saw_header {
        return Err(err(0, "empty topology file".into()));
    }
    let (rrh_antennas, mbs_antennas) = antennas.ok_or_else(|| err(0, "missing antennas record".into()))?;

    let num_ue = alpha_mbs.len();
    let num_rrh = if num_ue == 0 { 0 } else { alpha_rrh.len() / num_ue };
    if num_rrh * num_ue != alpha_rrh.len() {
        return Err(err(0, "alpha_rrh records do not form a K x M table".into()));
    }

    let place = |items: Vec<(usize, Point)>, n: usize, what: &str| -> Result<Vec<Point>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = vec![None; n];
        for (i, p) in items {
            *out.get_mut(i).ok_or_else(|| err(0, format!("{what} index {i} out of range")))? = Some(p);
        }
        out.into_iter()
            .map(|p| p.ok_or_else(|| err(0, format!("missing {what} position"))))
            .collect()
    };
    let rrh_positions = place(rrh_pos, num_rrh, "rrh")?;
    let ue_positions = place(ue_pos, num_ue, "ue")?;

    let mut serving_rrhs = vec![Vec::new(); num_ue];
    for (m, set) in serving {
        *serving_rrhs.get_mut(m).ok_or_else(|| err(0, format!("serving UE {m} out of range")))? = set;
    }
    let mut a_rrh = vec![vec![f64::NAN; num_ue]; num_rrh];
    for (k, m, a) in alpha_rrh {
        if k >= num_rrh || m >= num_ue {
            return Err(err(0, format!("alpha_rrh index ({k},{m}) out of range")));
        }
        a_rrh[k][m] = a;
    }
    let mut a_mbs = vec![f64::NAN; num_ue];
    for (m, a) in alpha_mbs {
        *a_mbs.get_mut(m).ok_or_else(|| err(0, format!("alpha_mbs UE {m} out of range")))? = a;
    }

    let mut served_ues = vec![Vec::new(); num_rrh];
    for (m, set) in serving_rrhs.iter().enumerate() {
        for &k in set {
            if k >= num_rrh {
                return Err(err(0, format!("UE {m} served by unknown RRH {k}")));
            }
            served_ues[k].push(m);
        }
    }
    let (rues, bues) = (0..num_ue).partition(|&m| !serving_rrhs[m].is_empty());
    let topo = Topology {
        rrh_antennas,
        mbs_antennas,
        coverage_radius: coverage.0,
        max_ue_per_rrh: coverage.1.max(1),
        mbs_position: mbs,
        rrh_positions,
        ue_positions,
        serving_rrhs,
        served_ues,
        rues,
        bues,
        alpha_rrh: a_rrh,
        alpha_mbs: a_mbs,
    };
    topo.validate()?;
    Ok(topo)
}

pub fn load_topology(path: &Path) -> Result<Topology> {
    let text = std::fs::read_to_string(path)?;
    read_topology(&text, path)
}
