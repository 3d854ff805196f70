//! Small-scale fading, uplink training and MMSE channel estimation.
//!
//! Every link is Rayleigh: `h ~ CN(0, α I)`. During training RRH `k`
//! correlates its received pilot matrix with pilot `q_π`; since the pilot
//! matrix is unitary the projection `Y q_π` is the sum of the co-pilot
//! channels plus `CN(0, N0 I)` noise, which is what we simulate directly.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pilot::{PilotAssignment, ReuseSets};
use crate::random::{complex_gaussian_vec, rng_from_seed};
use crate::scenario::Topology;

pub type CVec = DVector<Complex64>;

/// Uplink training parameters, all powers in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub pilot_power_rue: f64,
    pub pilot_power_bue: f64,
    pub noise_power: f64,
    /// Pilot length in symbols.
    pub tau: usize,
    /// Coherence interval in symbols.
    pub coherence: usize,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pilot_power_rue > 0.0 && self.pilot_power_bue > 0.0 && self.noise_power > 0.0) {
            return Err(Error::Config("pilot and noise powers must be positive".into()));
        }
        if self.tau == 0 || self.tau >= self.coherence {
            return Err(Error::Config(format!(
                "need 0 < tau < coherence, got tau={} coherence={}",
                self.tau, self.coherence
            )));
        }
        Ok(())
    }

    /// Fraction of the coherence block left for data, `(T - τ) / T`.
    pub fn prelog(&self) -> f64 {
        prelog(self.tau, self.coherence)
    }
}

pub fn prelog(tau: usize, coherence: usize) -> f64 {
    coherence.saturating_sub(tau) as f64 / coherence as f64
}

/// Estimation error variances `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVariances {
    /// `rrh[m][n]` is `δ_{k,m}` for `k = serving_rrhs[m][n]`; empty for BUEs.
    pub rrh: Vec<Vec<f64>>,
    /// `mbs[m]` is `δ_{b,m}` for BUEs, `None` for RUEs.
    pub mbs: Vec<Option<f64>>,
}

/// `δ_{k,i}` for RUE `i` at RRH `k`:
/// `α_{k,i} (I + N0) / (p_R α_{k,i} + I + N0)` where `I` is the power of all
/// other UEs on pilot `π_i` as seen by RRH `k`.
pub fn rrh_error_variance(
    topo: &Topology,
    reuse: &ReuseSets,
    pilot: usize,
    k: usize,
    i: usize,
    p_rue: f64,
    p_bue: f64,
    noise: f64,
) -> f64 {
    let alpha = &topo.alpha_rrh[k];
    let others: f64 = reuse.rues[pilot]
        .iter()
        .filter(|&&l| l != i)
        .map(|&l| p_rue * alpha[l])
        .sum::<f64>()
        + reuse.bues[pilot].iter().map(|&j| p_bue * alpha[j]).sum::<f64>()
        + noise;
    alpha[i] * others / (p_rue * alpha[i] + others)
}

/// `δ_{b,j}` for BUE `j` at the MBS.
pub fn mbs_error_variance(
    topo: &Topology,
    reuse: &ReuseSets,
    pilot: usize,
    j: usize,
    p_rue: f64,
    p_bue: f64,
    noise: f64,
) -> f64 {
    let alpha = &topo.alpha_mbs;
    let others: f64 = reuse.rues[pilot].iter().map(|&i| p_rue * alpha[i]).sum::<f64>() + noise;
    alpha[j] * others / (p_bue * alpha[j] + others)
}

pub fn error_variances(
    topo: &Topology,
    assignment: &PilotAssignment,
    p_rue: f64,
    p_bue: f64,
    noise: f64,
) -> ErrorVariances {
    let reuse = assignment.reuse_sets(topo);
    let num_ue = topo.num_ue();
    let mut rrh = vec![Vec::new(); num_ue];
    let mut mbs = vec![None; num_ue];
    for &i in &topo.rues {
        let pilot = assignment.pilot(i);
        rrh[i] = topo.serving_rrhs[i]
            .iter()
            .map(|&k| rrh_error_variance(topo, &reuse, pilot, k, i, p_rue, p_bue, noise))
            .collect();
    }
    for &j in &topo.bues {
        let pilot = assignment.pilot(j);
        mbs[j] = Some(mbs_error_variance(topo, &reuse, pilot, j, p_rue, p_bue, noise));
    }
    ErrorVariances { rrh, mbs }
}

/// True channels of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `h_rrh[k][m]`, length `N`.
    pub h_rrh: Vec<Vec<CVec>>,
    /// `h_mbs[m]`, length `B`.
    pub h_mbs: Vec<CVec>,
}

/// Draws `h_{k,m} ~ CN(0, α_{k,m} I_N)` and `h_{b,m} ~ CN(0, α_{b,m} I_B)`,
/// independent across links.
pub fn draw_small_scale(topo: &Topology, seed: u64) -> ChannelRealization {
    let mut rng = rng_from_seed(seed);
    let h_rrh = topo
        .alpha_rrh
        .iter()
        .map(|row| {
            row.iter()
                .map(|&a| complex_gaussian_vec(&mut rng, topo.rrh_antennas, a))
                .collect()
        })
        .collect();
    let h_mbs = topo
        .alpha_mbs
        .iter()
        .map(|&a| complex_gaussian_vec(&mut rng, topo.mbs_antennas, a))
        .collect();
    ChannelRealization { h_rrh, h_mbs }
}

/// What the network knows after training: intra-cluster estimates and the
/// variance of their errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// `est_rrh[m][n]` is `ĥ_{k,m}` for `k = serving_rrhs[m][n]`.
    pub est_rrh: Vec<Vec<CVec>>,
    /// `ĥ_{b,m}` for BUEs.
    pub est_mbs: Vec<Option<CVec>>,
    pub errvar: ErrorVariances,
}

impl ChannelState {
    /// Perfect intra-cluster knowledge: estimates equal the true channels
    /// and every error variance is zero.
    pub fn perfect(topo: &Topology, truth: &ChannelRealization) -> Self {
        let num_ue = topo.num_ue();
        let mut est_rrh = vec![Vec::new(); num_ue];
        let mut est_mbs = vec![None; num_ue];
        let mut rrh = vec![Vec::new(); num_ue];
        let mut mbs = vec![None; num_ue];
        for &i in &topo.rues {
            est_rrh[i] = topo.serving_rrhs[i].iter().map(|&k| truth.h_rrh[k][i].clone()).collect();
            rrh[i] = vec![0.0; topo.serving_rrhs[i].len()];
        }
        for &j in &topo.bues {
            est_mbs[j] = Some(truth.h_mbs[j].clone());
            mbs[j] = Some(0.0);
        }
        Self {
            est_rrh,
            est_mbs,
            errvar: ErrorVariances { rrh, mbs },
        }
    }
}

/// Simulates uplink training and forms the MMSE estimates.
pub fn estimate_channels(
    topo: &Topology,
    assignment: &PilotAssignment,
    training: &TrainingConfig,
    truth: &ChannelRealization,
    seed: u64,
) -> Result<ChannelState> {
    assignment.validate(topo)?;
    let (p_r, p_b, n0) = (training.pilot_power_rue, training.pilot_power_bue, training.noise_power);
    let (sp_r, sp_b) = (p_r.sqrt(), p_b.sqrt());
    let reuse = assignment.reuse_sets(topo);
    let mut rng = rng_from_seed(seed);
    let num_ue = topo.num_ue();
    let n = topo.rrh_antennas;
    let b = topo.mbs_antennas;

    let mut est_rrh: Vec<Vec<CVec>> = topo
        .serving_rrhs
        .iter()
        .map(|set| vec![CVec::zeros(n); set.len()])
        .collect();
    for (k, ues) in topo.served_ues.iter().enumerate() {
        let alpha = &topo.alpha_rrh[k];
        let h = &truth.h_rrh[k];
        // Pilots inside one RRH cluster are distinct, so each served RUE sees
        // its own projected noise sample.
        for &i in ues {
            let pi = assignment.pilot(i);
            let mut y = complex_gaussian_vec(&mut rng, n, n0);
            let mut power = n0;
            for &l in &reuse.rues[pi] {
                y.axpy(Complex64::from(sp_r), &h[l], Complex64::from(1.0));
                power += p_r * alpha[l];
            }
            for &j in &reuse.bues[pi] {
                y.axpy(Complex64::from(sp_b), &h[j], Complex64::from(1.0));
                power += p_b * alpha[j];
            }
            let coef = sp_r * alpha[i] / power;
            let slot = topo.serving_rrhs[i].binary_search(&k).expect("cluster maps are symmetric");
            est_rrh[i][slot] = y * Complex64::from(coef);
        }
    }

    let mut est_mbs = vec![None; num_ue];
    for &j in &topo.bues {
        let pi = assignment.pilot(j);
        let alpha = &topo.alpha_mbs;
        let mut y = complex_gaussian_vec(&mut rng, b, n0);
        let mut power = n0 + p_b * alpha[j];
        y.axpy(Complex64::from(sp_b), &truth.h_mbs[j], Complex64::from(1.0));
        for &i in &reuse.rues[pi] {
            y.axpy(Complex64::from(sp_r), &truth.h_mbs[i], Complex64::from(1.0));
            power += p_r * alpha[i];
        }
        let coef = sp_b * alpha[j] / power;
        est_mbs[j] = Some(y * Complex64::from(coef));
    }

    Ok(ChannelState {
        est_rrh,
        est_mbs,
        errvar: error_variances(topo, assignment, p_r, p_b, n0),
    })
}
