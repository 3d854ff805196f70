use rand::seq::SliceRandom;
use rand::Rng;

use super::{dsatur_color, Coloring, ConflictGraph, ContaminationMetrics, PilotAssignment};
use crate::scenario::Topology;

/// Pilot length actually used: `tau` raised to `max(|M_B|, t)` and capped
/// at `M`.
pub fn effective_tau(topo: &Topology, min_colors: usize, tau: usize) -> usize {
    let floor = topo.bues.len().max(min_colors).max(1);
    tau.max(floor).min(topo.num_ue().max(floor))
}

/// BUE `j` (local index) on pilot `j`; RUE `r` on `color_to_pilot[color[r]]`.
fn initial_assignment(topo: &Topology, coloring: &Coloring, color_to_pilot: &[usize], tau: usize) -> Vec<usize> {
    let mut pilots = vec![0; topo.num_ue()];
    for (b, &j) in topo.bues.iter().enumerate() {
        pilots[j] = b;
    }
    for (r, &i) in topo.rues.iter().enumerate() {
        pilots[i] = color_to_pilot[coloring.colors[r]];
    }
    debug_assert!(pilots.iter().all(|&p| p < tau));
    pilots
}

/// Dsatur baseline: the `t` color classes get a random permutation of
/// pilots `0..t`.
pub fn dsatur_random_schedule<R: Rng + ?Sized>(
    topo: &Topology,
    graph: &ConflictGraph,
    tau: usize,
    rng: &mut R,
) -> PilotAssignment {
    let coloring = dsatur_color(graph);
    let tau = effective_tau(topo, coloring.num_colors, tau);
    let mut perm: Vec<usize> = (0..coloring.num_colors).collect();
    perm.shuffle(rng);
    PilotAssignment::new(tau, initial_assignment(topo, &coloring, &perm, tau))
}

/// Pilot scheduling by Dsatur initialization followed by greedy,
/// contamination-driven reassignment. Color class `c` starts on pilot `c`.
pub fn psa_schedule(
    topo: &Topology,
    metrics: &ContaminationMetrics,
    graph: &ConflictGraph,
    tau: usize,
) -> PilotAssignment {
    let coloring = dsatur_color(graph);
    let identity: Vec<usize> = (0..coloring.num_colors).collect();
    psa_refine(topo, metrics, graph, &coloring, &identity, tau)
}

/// The refinement stage of [`psa_schedule`] starting from an explicit
/// color-to-pilot map.
pub fn psa_refine(
    topo: &Topology,
    metrics: &ContaminationMetrics,
    graph: &ConflictGraph,
    coloring: &Coloring,
    color_to_pilot: &[usize],
    tau: usize,
) -> PilotAssignment {
    let tau = effective_tau(topo, coloring.num_colors, tau);
    let mut pilots = initial_assignment(topo, coloring, color_to_pilot, tau);
    let n = topo.rues.len();

    // Contamination RUE r would see on pilot p from the UEs currently there.
    let load = |pilots: &[usize], r: usize, p: usize| -> f64 {
        let beta = &metrics.beta[r];
        (0..topo.num_ue()).filter(|&m| pilots[m] == p).map(|m| beta[m]).sum()
    };

    let mut adjusted = vec![false; n];
    for _ in 0..n {
        // Step 1: the unadjusted RUE suffering the most contamination.
        let mut pick: Option<(usize, f64)> = None;
        for r in (0..n).filter(|&r| !adjusted[r]) {
            let v = load(&pilots, r, pilots[topo.rues[r]]);
            if pick.is_none_or(|(_, best)| v > best) {
                pick = Some((r, v));
            }
        }
        let (r, _) = pick.expect("an unadjusted RUE remains");
        let i = topo.rues[r];

        // Step 2: the pilot outside its neighbors' pilots with least contamination.
        let mut blocked = vec![false; tau];
        for s in graph.neighbors(r) {
            blocked[pilots[topo.rues[s]]] = true;
        }
        let mut best: Option<(usize, f64)> = None;
        for p in (0..tau).filter(|&p| !blocked[p]) {
            let v = load(&pilots, r, p);
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((p, v));
            }
        }
        // The current pilot is never blocked, so a candidate exists.
        let (p, _) = best.expect("current pilot is always available");

        // Step 3.
        pilots[i] = p;
        adjusted[r] = true;
    }
    PilotAssignment::new(tau, pilots)
}
