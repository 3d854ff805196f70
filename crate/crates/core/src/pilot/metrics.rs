use super::ConflictGraph;
use crate::scenario::Topology;

/// Pairwise pilot-contamination levels `β`.
///
/// `beta[r][m]` relates RUE `topo.rues[r]` to UE `m` (global index). It is
/// zero on the diagonal and for RUE pairs that share an RRH.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationMetrics {
    pub beta: Vec<Vec<f64>>,
}

impl ContaminationMetrics {
    pub fn compute(topo: &Topology, graph: &ConflictGraph) -> Self {
        let num_ue = topo.num_ue();
        let rue_index = topo.rue_positions_index();
        // received gain of UE m summed over the RRHs serving RUE i
        let cluster_gain = |i: usize, m: usize| -> f64 {
            topo.serving_rrhs[i].iter().map(|&k| topo.alpha_rrh[k][m]).sum()
        };
        let beta = topo
            .rues
            .iter()
            .enumerate()
            .map(|(r, &i)| {
                let own = cluster_gain(i, i);
                (0..num_ue)
                    .map(|m| match rue_index[m] {
                        Some(s) if s == r || graph.connected(r, s) => 0.0,
                        Some(_) => {
                            let other_own = cluster_gain(m, m);
                            (1.0 + cluster_gain(i, m) / own + cluster_gain(m, i) / other_own).ln()
                        }
                        None => (1.0 + cluster_gain(i, m) / own + topo.alpha_mbs[i] / topo.alpha_mbs[m]).ln(),
                    })
                    .collect()
            })
            .collect();
        Self { beta }
    }

    /// `β` between RUE `r` (local index) and UE `m` (global index).
    pub fn get(&self, r: usize, m: usize) -> f64 {
        self.beta[r][m]
    }
}
