use super::PilotAssignment;
use crate::channel::error_variances;
use crate::error::Result;
use crate::scenario::Topology;

/// Sum over all estimated links of the expected squared estimation error:
/// `Σ_i Σ_{k∈K_i} N δ_{k,i} + Σ_j B δ_{b,j}`.
pub fn sum_mse(topo: &Topology, assignment: &PilotAssignment, p_rue: f64, p_bue: f64, noise: f64) -> Result<f64> {
    assignment.validate(topo)?;
    Ok(sum_mse_unchecked(topo, assignment, p_rue, p_bue, noise))
}

pub(crate) fn sum_mse_unchecked(
    topo: &Topology,
    assignment: &PilotAssignment,
    p_rue: f64,
    p_bue: f64,
    noise: f64,
) -> f64 {
    let ev = error_variances(topo, assignment, p_rue, p_bue, noise);
    let n = topo.rrh_antennas as f64;
    let b = topo.mbs_antennas as f64;
    let rrh: f64 = ev.rrh.iter().flatten().map(|d| n * d).sum();
    let mbs: f64 = ev.mbs.iter().flatten().map(|d| b * d).sum();
    rrh + mbs
}
