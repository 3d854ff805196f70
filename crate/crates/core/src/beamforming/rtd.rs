use std::fmt::Write as _;

use num_complex::Complex64;

use super::mse::{mse_and_equalizer, mse_at, update_u, weight};
use super::qcqp::{assemble_mbs, assemble_rrh, solve_mbs, solve_rrh, PowerBudgets, Receivers, SolverOptions};
use super::BeamformerSet;
use crate::channel::{CVec, TrainingConfig};
use crate::error::{Error, Result};
use crate::rates::{
    bue_lower_bounds, bue_signal_and_interference, lower_bound_rates, rue_lower_bounds, rue_signal_and_interference,
    AggregatedLinks,
};
use crate::scenario::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RtdMode {
    #[default]
    Centralized,
    /// BBU and MBS actors that only exchange equalizers, weights and beamformers.
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtdOptions {
    /// Stop once `Σ ‖w(d) − w(d−1)‖² ≤ rho`.
    pub rho: f64,
    pub max_iters: usize,
    pub solver: SolverOptions,
    pub mode: RtdMode,
    /// Keep every iterate in [`RtdState::history`].
    pub record_iterates: bool,
}

impl Default for RtdOptions {
    fn default() -> Self {
        Self {
            rho: 1e-3,
            max_iters: 100,
            solver: SolverOptions::default(),
            mode: RtdMode::Centralized,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtdState {
    pub receivers: Receivers,
    /// Objective of the weighted-MSE problem, starting with the value at the
    /// initial point.
    pub objective: Vec<f64>,
    /// Sum of the rate lower bounds after each iteration, starting at zero beams.
    pub sum_se_lb: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<BeamformerSet>,
}

impl RtdState {
    /// CSV with header `iteration,objective_34,sum_se_lb`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective_34,sum_se_lb\n");
        for (d, (o, s)) in self.objective.iter().zip(&self.sum_se_lb).enumerate() {
            writeln!(out, "{d},{o},{s}").unwrap();
        }
        out
    }
}

/// Runs the alternating robust transmission design from `w = 0, f = 1, u = 1`.
pub fn rtd_solve(
    topo: &Topology,
    links: &AggregatedLinks,
    training: &TrainingConfig,
    budgets: &PowerBudgets,
    opts: &RtdOptions,
) -> Result<(BeamformerSet, RtdState)> {
    match opts.mode {
        RtdMode::Centralized => centralized(topo, links, training, budgets, opts),
        RtdMode::Distributed => distributed(topo, links, training, budgets, opts),
    }
}

fn tag(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Rtd {
        iteration,
        source: Box::new(e),
    }
}

/// Keeps the previous beamformers if the new ones do not improve the quadratic objective.
fn keep_better(new: Vec<CVec>, old: &[CVec], objective: impl Fn(&[CVec]) -> f64) -> Vec<CVec> {
    if objective(&new) <= objective(old) {
        new
    } else {
        old.to_vec()
    }
}

fn rue_receivers(links: &AggregatedLinks, beams: &BeamformerSet, noise: f64) -> Result<(Vec<Complex64>, Vec<f64>)> {
    (0..beams.rue.len())
        .map(|r| {
            let (_, j) = rue_signal_and_interference(links, beams, r, noise);
            let (mse, f) = mse_and_equalizer(links.g_hat[r].dotc(&beams.rue[r]), j);
            Ok((f, update_u(mse)?))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

fn bue_receivers(links: &AggregatedLinks, beams: &BeamformerSet, noise: f64) -> Result<(Vec<Complex64>, Vec<f64>)> {
    (0..beams.bue.len())
        .map(|b| {
            let (_, j) = bue_signal_and_interference(links, beams, b, noise);
            let (mse, f) = mse_and_equalizer(links.h_hat_b[b].dotc(&beams.bue[b]), j);
            Ok((f, update_u(mse)?))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// RUE share of `Σ_m exp(u_m − 1)·MSE_m(w, f_m) − u_m`.
fn rue_objective(links: &AggregatedLinks, beams: &BeamformerSet, rx: &Receivers, noise: f64) -> f64 {
    (0..beams.rue.len())
        .map(|r| {
            let (_, j) = rue_signal_and_interference(links, beams, r, noise);
            let gain = links.g_hat[r].dotc(&beams.rue[r]);
            weight(rx.u_rue[r]) * mse_at(gain, j, rx.f_rue[r]) - rx.u_rue[r]
        })
        .sum()
}

fn bue_objective(links: &AggregatedLinks, beams: &BeamformerSet, rx: &Receivers, noise: f64) -> f64 {
    (0..beams.bue.len())
        .map(|b| {
            let (_, j) = bue_signal_and_interference(links, beams, b, noise);
            let gain = links.h_hat_b[b].dotc(&beams.bue[b]);
            weight(rx.u_bue[b]) * mse_at(gain, j, rx.f_bue[b]) - rx.u_bue[b]
        })
        .sum()
}

/// Objective of the weighted-MSE problem at `(w, f, u)`.
pub fn weighted_mse_objective(links: &AggregatedLinks, beams: &BeamformerSet, rx: &Receivers, noise: f64) -> f64 {
    rue_objective(links, beams, rx, noise) + bue_objective(links, beams, rx, noise)
}

fn centralized(
    topo: &Topology,
    links: &AggregatedLinks,
    training: &TrainingConfig,
    budgets: &PowerBudgets,
    opts: &RtdOptions,
) -> Result<(BeamformerSet, RtdState)> {
    let noise = training.noise_power;
    let prelog = training.prelog();
    let mut beams = BeamformerSet::zeros(topo);
    let mut rx = Receivers::initial(topo.rues.len(), topo.bues.len());
    let mut state = RtdState {
        receivers: rx.clone(),
        objective: vec![weighted_mse_objective(links, &beams, &rx, noise)],
        sum_se_lb: vec![lower_bound_rates(links, &beams, noise, prelog).sum()],
        iterations: 0,
        converged: false,
        history: Vec::new(),
    };
    for d in 1..=opts.max_iters {
        let rrh = assemble_rrh(links, &rx, topo, &budgets.rrh);
        let (w_rue, _) = solve_rrh(&rrh, &opts.solver).map_err(tag(d))?;
        let w_rue = keep_better(w_rue, &beams.rue, |w| rrh.objective(w));
        let mbs = assemble_mbs(links, &rx, budgets.mbs);
        let (w_bue, _) = solve_mbs(&mbs, &opts.solver).map_err(tag(d))?;
        let w_bue = keep_better(w_bue, &beams.bue, |w| mbs.objective(w));
        let next = BeamformerSet { rue: w_rue, bue: w_bue };
        let delta = next.squared_distance(&beams);
        beams = next;

        let (f_rue, u_rue) = rue_receivers(links, &beams, noise).map_err(tag(d))?;
        let (f_bue, u_bue) = bue_receivers(links, &beams, noise).map_err(tag(d))?;
        rx = Receivers {
            f_rue,
            f_bue,
            u_rue,
            u_bue,
        };
        state.objective.push(weighted_mse_objective(links, &beams, &rx, noise));
        state.sum_se_lb.push(lower_bound_rates(links, &beams, noise, prelog).sum());
        state.iterations = d;
        if opts.record_iterates {
            state.history.push(beams.clone());
        }
        log::debug!("rtd iteration {d}: objective {}, step {delta:e}", state.objective[d]);
        if delta <= opts.rho {
            state.converged = true;
            break;
        }
    }
    state.receivers = rx;
    Ok((beams, state))
}

/// Baseband unit: owns the RRH-side estimates and the RUE beamformers.
struct Bbu<'a> {
    links: AggregatedLinks,
    topo: &'a Topology,
    budgets: Vec<f64>,
    rx: Receivers,
    beams: BeamformerSet,
}

/// Macro base station: owns the MBS-side estimates and the BUE beamformers.
struct Mbs {
    links: AggregatedLinks,
    budget: f64,
    rx: Receivers,
    beams: BeamformerSet,
}

/// RUE-side `(f, u)` sent to the MBS, or BUE-side `(f, u)` sent to the BBU.
struct ReceiverMsg {
    f: Vec<Complex64>,
    u: Vec<f64>,
}

impl Bbu<'_> {
    fn send_receivers(&self) -> ReceiverMsg {
        ReceiverMsg {
            f: self.rx.f_rue.clone(),
            u: self.rx.u_rue.clone(),
        }
    }

    fn receive_receivers(&mut self, msg: ReceiverMsg) {
        self.rx.f_bue = msg.f;
        self.rx.u_bue = msg.u;
    }

    fn update_beams(&mut self, solver: &SolverOptions) -> Result<f64> {
        let problem = assemble_rrh(&self.links, &self.rx, self.topo, &self.budgets);
        let (w, _) = solve_rrh(&problem, solver)?;
        let w = keep_better(w, &self.beams.rue, |w| problem.objective(w));
        let delta = w.iter().zip(&self.beams.rue).map(|(a, b)| (a - b).norm_squared()).sum();
        self.beams.rue = w;
        Ok(delta)
    }

    fn update_receivers(&mut self, noise: f64) -> Result<()> {
        (self.rx.f_rue, self.rx.u_rue) = rue_receivers(&self.links, &self.beams, noise)?;
        Ok(())
    }
}

impl Mbs {
    fn send_receivers(&self) -> ReceiverMsg {
        ReceiverMsg {
            f: self.rx.f_bue.clone(),
            u: self.rx.u_bue.clone(),
        }
    }

    fn receive_receivers(&mut self, msg: ReceiverMsg) {
        self.rx.f_rue = msg.f;
        self.rx.u_rue = msg.u;
    }

    fn update_beams(&mut self, solver: &SolverOptions) -> Result<f64> {
        let problem = assemble_mbs(&self.links, &self.rx, self.budget);
        let (w, _) = solve_mbs(&problem, solver)?;
        let w = keep_better(w, &self.beams.bue, |w| problem.objective(w));
        let delta = w.iter().zip(&self.beams.bue).map(|(a, b)| (a - b).norm_squared()).sum();
        self.beams.bue = w;
        Ok(delta)
    }

    fn update_receivers(&mut self, noise: f64) -> Result<()> {
        (self.rx.f_bue, self.rx.u_bue) = bue_receivers(&self.links, &self.beams, noise)?;
        Ok(())
    }
}

fn distributed(
    topo: &Topology,
    links: &AggregatedLinks,
    training: &TrainingConfig,
    budgets: &PowerBudgets,
    opts: &RtdOptions,
) -> Result<(BeamformerSet, RtdState)> {
    let noise = training.noise_power;
    let prelog = training.prelog();
    let rx0 = Receivers::initial(topo.rues.len(), topo.bues.len());
    let mut bbu = Bbu {
        links: links.bbu_view(),
        topo,
        budgets: budgets.rrh.clone(),
        rx: rx0.clone(),
        beams: BeamformerSet::zeros(topo),
    };
    let mut mbs = Mbs {
        links: links.mbs_view(),
        budget: budgets.mbs,
        rx: rx0,
        beams: BeamformerSet::zeros(topo),
    };
    // Each actor reports its own share of the objective and rates.
    let objective = |bbu: &Bbu, mbs: &Mbs| {
        rue_objective(&bbu.links, &bbu.beams, &bbu.rx, noise) + bue_objective(&mbs.links, &mbs.beams, &mbs.rx, noise)
    };
    let sum_se = |bbu: &Bbu, mbs: &Mbs| {
        let r: f64 = rue_lower_bounds(&bbu.links, &bbu.beams, noise, prelog).iter().sum();
        let b: f64 = bue_lower_bounds(&mbs.links, &mbs.beams, noise, prelog).iter().sum();
        r + b
    };
    let mut state = RtdState {
        receivers: bbu.rx.clone(),
        objective: vec![objective(&bbu, &mbs)],
        sum_se_lb: vec![sum_se(&bbu, &mbs)],
        iterations: 0,
        converged: false,
        history: Vec::new(),
    };
    for d in 1..=opts.max_iters {
        let to_mbs = bbu.send_receivers();
        let to_bbu = mbs.send_receivers();
        mbs.receive_receivers(to_mbs);
        bbu.receive_receivers(to_bbu);

        let delta = bbu.update_beams(&opts.solver).map_err(tag(d))? + mbs.update_beams(&opts.solver).map_err(tag(d))?;
        let w_rue = bbu.beams.rue.clone();
        let w_bue = mbs.beams.bue.clone();
        mbs.beams.rue = w_rue;
        bbu.beams.bue = w_bue;

        bbu.update_receivers(noise).map_err(tag(d))?;
        mbs.update_receivers(noise).map_err(tag(d))?;
        state.objective.push(objective(&bbu, &mbs));
        state.sum_se_lb.push(sum_se(&bbu, &mbs));
        state.iterations = d;
        if opts.record_iterates {
            state.history.push(bbu.beams.clone());
        }
        if delta <= opts.rho {
            state.converged = true;
            break;
        }
    }
    state.receivers = Receivers {
        f_rue: bbu.rx.f_rue,
        u_rue: bbu.rx.u_rue,
        f_bue: mbs.rx.f_bue,
        u_bue: mbs.rx.u_bue,
    };
    Ok((bbu.beams, state))
}
