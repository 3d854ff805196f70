use serde::{Deserialize, Serialize};

use crate::beamforming::PowerBudgets;
use crate::channel::{draw_small_scale, estimate_channels, ChannelRealization, ChannelState, TrainingConfig};
use crate::error::{Error, Result};
use crate::pilot::{dsatur_random_schedule, es_schedule, psa_schedule, ConflictGraph, ContaminationMetrics, PilotAssignment};
use crate::random::{rng_from_seed, split_seed};
use crate::rates::AggregatedLinks;
use crate::scenario::{dbm_to_watt, generate_topology, ScenarioConfig, Topology};

/// Powers (dBm) and frame parameters shared by every realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub pilot_power_rue_dbm: f64,
    pub pilot_power_bue_dbm: f64,
    pub rrh_power_dbm: f64,
    pub mbs_power_dbm: f64,
    pub noise_dbm: f64,
    /// Requested pilot length; schedulers may raise it to the feasible minimum.
    pub tau: usize,
    /// Coherence interval `T` in symbols.
    pub coherence: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            pilot_power_rue_dbm: 17.0,
            pilot_power_bue_dbm: 20.0,
            rrh_power_dbm: 27.0,
            mbs_power_dbm: 30.0,
            noise_dbm: -100.0,
            tau: 5,
            coherence: 50,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.pilot_power_rue_dbm,
            self.pilot_power_bue_dbm,
            self.rrh_power_dbm,
            self.mbs_power_dbm,
            self.noise_dbm,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config("powers must be finite".into()));
        }
        if self.tau == 0 || self.tau >= self.coherence {
            return Err(Error::Config(format!(
                "need 0 < tau < coherence, got tau = {} and coherence = {}",
                self.tau, self.coherence
            )));
        }
        Ok(())
    }

    /// Training parameters for an assignment of length `tau`.
    pub fn training(&self, tau: usize) -> TrainingConfig {
        TrainingConfig {
            pilot_power_rue: dbm_to_watt(self.pilot_power_rue_dbm),
            pilot_power_bue: dbm_to_watt(self.pilot_power_bue_dbm),
            noise_power: dbm_to_watt(self.noise_dbm),
            tau,
            coherence: self.coherence,
        }
    }

    pub fn budgets(&self, num_rrh: usize) -> PowerBudgets {
        PowerBudgets::uniform(num_rrh, dbm_to_watt(self.rrh_power_dbm), dbm_to_watt(self.mbs_power_dbm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    Psa,
    DsaturRandom,
    Es,
    /// One pilot per UE.
    Orthogonal,
}

impl Scheduler {
    pub fn name(self) -> &'static str {
        match self {
            Scheduler::Psa => "psa",
            Scheduler::DsaturRandom => "dsatur_random",
            Scheduler::Es => "es",
            Scheduler::Orthogonal => "orthogonal",
        }
    }
}

/// Pilot assignment for `topo` from the chosen scheduler. `seed` only
/// matters for the random baseline.
pub fn schedule(topo: &Topology, sys: &SystemConfig, scheduler: Scheduler, tau: usize, seed: u64) -> Result<PilotAssignment> {
    let graph = ConflictGraph::build(topo);
    let tr = sys.training(tau);
    Ok(match scheduler {
        Scheduler::Psa => psa_schedule(topo, &ContaminationMetrics::compute(topo, &graph), &graph, tau),
        Scheduler::DsaturRandom => dsatur_random_schedule(topo, &graph, tau, &mut rng_from_seed(seed)),
        Scheduler::Es => es_schedule(topo, tau, tr.pilot_power_rue, tr.pilot_power_bue, tr.noise_power)?,
        Scheduler::Orthogonal => PilotAssignment::orthogonal(topo.num_ue()),
    })
}

/// Everything derived from one seeded realization.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topo: Topology,
    pub assignment: PilotAssignment,
    pub training: TrainingConfig,
    pub budgets: PowerBudgets,
    pub truth: ChannelRealization,
    pub state: ChannelState,
    pub links: AggregatedLinks,
}

/// Stream indices under the realization seed.
const TOPOLOGY_STREAM: u64 = 0;
const FADING_STREAM: u64 = 1;
const TRAINING_STREAM: u64 = 2;
pub(crate) const SCHEDULER_STREAM: u64 = 3;
pub(crate) const MONTE_CARLO_STREAM: u64 = 4;

pub fn generate_instance_topology(scenario: &ScenarioConfig, seed: u64) -> Result<Topology> {
    let mut cfg = scenario.clone();
    cfg.rng_seed = split_seed(seed, TOPOLOGY_STREAM);
    generate_topology(&cfg)
}

/// Layout, fading, pilot assignment and estimates for realization `seed`.
pub fn build_instance(scenario: &ScenarioConfig, sys: &SystemConfig, scheduler: Scheduler, seed: u64) -> Result<Instance> {
    let topo = generate_instance_topology(scenario, seed)?;
    instance_on(topo, sys, scheduler, seed)
}

/// Same as [`build_instance`] on a given layout.
pub fn instance_on(topo: Topology, sys: &SystemConfig, scheduler: Scheduler, seed: u64) -> Result<Instance> {
    sys.validate()?;
    let assignment = schedule(&topo, sys, scheduler, sys.tau, split_seed(seed, SCHEDULER_STREAM))?;
    let training = sys.training(assignment.tau());
    let truth = draw_small_scale(&topo, split_seed(seed, FADING_STREAM));
    let state = estimate_channels(&topo, &assignment, &training, &truth, split_seed(seed, TRAINING_STREAM))?;
    let links = AggregatedLinks::build(&topo, &state);
    let budgets = sys.budgets(topo.num_rrh());
    Ok(Instance {
        topo,
        assignment,
        training,
        budgets,
        truth,
        state,
        links,
    })
}

impl Instance {
    /// Reference with the true channels known on every serving link and
    /// orthogonal training overhead. Links outside a UE's cluster stay
    /// statistical.
    pub fn perfect_csi(&self) -> Instance {
        let state = ChannelState::perfect(&self.topo, &self.truth);
        let links = AggregatedLinks::build(&self.topo, &state);
        let mut training = self.training;
        training.tau = self.topo.num_ue().min(training.coherence - 1);
        Instance {
            topo: self.topo.clone(),
            assignment: PilotAssignment::orthogonal(self.topo.num_ue()),
            training,
            budgets: self.budgets.clone(),
            truth: self.truth.clone(),
            state,
            links,
        }
    }
}
