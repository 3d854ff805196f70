use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::Topology;

/// Pilot index per UE (0-based, `< tau`), indexed by global UE id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    tau: usize,
    pilots: Vec<usize>,
}

/// `U_π` and `V_π`: the RUEs and BUEs (global ids, ascending) using each pilot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReuseSets {
    pub rues: Vec<Vec<usize>>,
    pub bues: Vec<Vec<usize>>,
}

impl PilotAssignment {
    pub fn new(tau: usize, pilots: Vec<usize>) -> Self {
        Self { tau, pilots }
    }

    /// Every UE gets its own pilot (`tau = M`, pilot `m` for UE `m`).
    pub fn orthogonal(num_ue: usize) -> Self {
        Self::new(num_ue, (0..num_ue).collect())
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn pilot(&self, ue: usize) -> usize {
        self.pilots[ue]
    }

    pub(crate) fn set_pilot(&mut self, ue: usize, pilot: usize) {
        self.pilots[ue] = pilot;
    }

    pub fn pilots(&self) -> &[usize] {
        &self.pilots
    }

    pub fn reuse_sets(&self, topo: &Topology) -> ReuseSets {
        let mut rues = vec![Vec::new(); self.tau];
        let mut bues = vec![Vec::new(); self.tau];
        for &m in &topo.rues {
            rues[self.pilots[m]].push(m);
        }
        for &m in &topo.bues {
            bues[self.pilots[m]].push(m);
        }
        ReuseSets { rues, bues }
    }

    /// Checks pilot range, BUE orthogonality and the intra-cluster
    /// orthogonality constraint.
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(msg));
        let num_ue = topo.num_ue();
        if self.pilots.len() != num_ue {
            return bad(format!("assignment covers {} UEs, topology has {num_ue}", self.pilots.len()));
        }
        if self.tau == 0 || self.tau > num_ue {
            return bad(format!("pilot length {} outside 1..={num_ue}", self.tau));
        }
        if let Some(m) = (0..num_ue).find(|&m| self.pilots[m] >= self.tau) {
            return bad(format!("UE {m} uses pilot {} >= tau {}", self.pilots[m], self.tau));
        }
        let mut bue_used = vec![false; self.tau];
        for &j in &topo.bues {
            let p = self.pilots[j];
            if std::mem::replace(&mut bue_used[p], true) {
                return bad(format!("two BUEs share pilot {p}"));
            }
        }
        for ues in &topo.served_ues {
            for (a, &i) in ues.iter().enumerate() {
                for &l in &ues[a + 1..] {
                    if self.pilots[i] == self.pilots[l] {
                        return bad(format!("RUEs {i} and {l} share an RRH and pilot {}", self.pilots[i]));
                    }
                }
            }
        }
        Ok(())
    }

    /// CSV with header `ue_id,pilot_index`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ue_id,pilot_index\n");
        for (m, p) in self.pilots.iter().enumerate() {
            let _ = writeln!(out, "{m},{p}");
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. `tau` is not stored in the
    /// CSV and must be supplied.
    pub fn from_csv(text: &str, tau: usize, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (ue, pilot) = line
                .split_once(',')
                .ok_or_else(|| err(idx + 1, "expected ue_id,pilot_index".into()))?;
            let ue: usize = ue.trim().parse().map_err(|e| err(idx + 1, format!("{e}")))?;
            let pilot: usize = pilot.trim().parse().map_err(|e| err(idx + 1, format!("{e}")))?;
            rows.push((ue, pilot));
        }
        rows.sort_unstable();
        if rows.iter().enumerate().any(|(i, &(ue, _))| ue != i) {
            return Err(err(0, "ue_id column must cover 0..M exactly once".into()));
        }
        Ok(Self::new(tau, rows.into_iter().map(|(_, p)| p).collect()))
    }
}
