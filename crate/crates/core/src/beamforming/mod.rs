//! Robust beamforming: MMSE receivers, the weighted-MSE reformulation, the
//! quadratic beamformer update and the alternating design loop.

mod beams;
mod mse;
mod qcqp;
mod rtd;

pub use beams::BeamformerSet;
pub use mse::{auxiliary_objective, mse_and_equalizer, mse_at, update_u, weight};
pub use qcqp::{
    assemble_mbs, assemble_qcqp, assemble_rrh, dropped_constant, solve_mbs, solve_qcqp, solve_rrh, MbsSubproblem,
    PowerBudgets, QcqpDiagnostics, QcqpProblem, Receivers, RrhSubproblem, SolveDiagnostics, SolverOptions,
};
pub use rtd::{rtd_solve, weighted_mse_objective, RtdMode, RtdOptions, RtdState};

#[cfg(test)]
mod tests;
