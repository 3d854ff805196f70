use super::mse::sum_mse_unchecked;
use super::psa::effective_tau;
use super::{dsatur_color, ConflictGraph, PilotAssignment};
use crate::error::{Error, Result};
use crate::scenario::Topology;

/// Largest number of RUE pilot vectors the exhaustive search will visit.
pub const ES_SEARCH_LIMIT: f64 = 1e7;

/// Exhaustive search for the minimum sum-MSE assignment.
///
/// BUE `j` is fixed to pilot `j` and RUE pilots range over `0..tau`
/// (clamped like the PSA); partial assignments that violate the conflict
/// graph are pruned. Among equal minima the lexicographically smallest pilot
/// vector wins.
pub fn es_schedule(topo: &Topology, tau: usize, p_rue: f64, p_bue: f64, noise: f64) -> Result<PilotAssignment> {
    let graph = ConflictGraph::build(topo);
    let tau = effective_tau(topo, dsatur_color(&graph).num_colors, tau);
    let size = (tau as f64).powi(topo.rues.len() as i32);
    if size > ES_SEARCH_LIMIT {
        return Err(Error::SearchSpace {
            size,
            limit: ES_SEARCH_LIMIT,
        });
    }

    let mut pilots = vec![0; topo.num_ue()];
    for (b, &j) in topo.bues.iter().enumerate() {
        pilots[j] = b;
    }
    let mut search = Search {
        topo,
        graph: &graph,
        tau,
        p_rue,
        p_bue,
        noise,
        current: PilotAssignment::new(tau, pilots),
        best: None,
    };
    search.descend(0);
    let (_, best) = search.best.expect("a proper coloring with tau >= t colors exists");
    Ok(best)
}

struct Search<'a> {
    topo: &'a Topology,
    graph: &'a ConflictGraph,
    tau: usize,
    p_rue: f64,
    p_bue: f64,
    noise: f64,
    current: PilotAssignment,
    best: Option<(f64, PilotAssignment)>,
}

impl Search<'_> {
    fn descend(&mut self, r: usize) {
        let rues = &self.topo.rues;
        if r == rues.len() {
            let v = sum_mse_unchecked(self.topo, &self.current, self.p_rue, self.p_bue, self.noise);
            if self.best.as_ref().is_none_or(|(b, _)| v < *b) {
                self.best = Some((v, self.current.clone()));
            }
            return;
        }
        for p in 0..self.tau {
            let clash = (0..r).any(|s| self.graph.connected(r, s) && self.current.pilot(rues[s]) == p);
            if clash {
                continue;
            }
            self.current.set_pilot(rues[r], p);
            self.descend(r + 1);
        }
    }
}
