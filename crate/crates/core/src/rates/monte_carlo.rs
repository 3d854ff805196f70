use rayon::prelude::*;

use crate::beamforming::BeamformerSet;
use crate::channel::{CVec, ChannelState};
use crate::error::{Error, Result};
use crate::random::{complex_gaussian_vec, rng_from_seed, split_seed, SimRng};
use crate::scenario::Topology;

pub const DEFAULT_MC_TRIALS: usize = 2000;

/// Monte Carlo achievable rates with their standard errors, in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct McRates {
    pub rue: Vec<f64>,
    pub bue: Vec<f64>,
    pub rue_stderr: Vec<f64>,
    pub bue_stderr: Vec<f64>,
}

/// Averages `log2(1 + SINR)` over redraws of everything the receiver does
/// not know: estimation errors around the fixed estimates and the links
/// that were never estimated.
///
/// Each UE has its own stream `split_seed(seed, ue_id)`, so results do not
/// depend on the thread count.
pub fn monte_carlo_rates(
    topo: &Topology,
    state: &ChannelState,
    beams: &BeamformerSet,
    noise: f64,
    prelog: f64,
    trials: usize,
    seed: u64,
) -> Result<McRates> {
    if trials == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one trial".into()));
    }
    let rue: Vec<(f64, f64)> = (0..topo.rues.len())
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(split_seed(seed, topo.rues[r] as u64));
            summarize((0..trials).map(|_| rue_trial(topo, state, beams, noise, r, &mut rng)), prelog)
        })
        .collect();
    let bue: Vec<(f64, f64)> = (0..topo.bues.len())
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(split_seed(seed, topo.bues[b] as u64));
            summarize((0..trials).map(|_| bue_trial(topo, state, beams, noise, b, &mut rng)), prelog)
        })
        .collect();
    Ok(McRates {
        rue: rue.iter().map(|x| x.0).collect(),
        rue_stderr: rue.iter().map(|x| x.1).collect(),
        bue: bue.iter().map(|x| x.0).collect(),
        bue_stderr: bue.iter().map(|x| x.1).collect(),
    })
}

fn summarize(samples: impl Iterator<Item = f64>, prelog: f64) -> (f64, f64) {
    let v: Vec<f64> = samples.map(|s| prelog * s).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `|Σ_blocks h_k^H w_k|²` for a beamformer stacked over `rrhs`.
fn stacked_gain(h: &[CVec], rrhs: &[usize], w: &CVec, n: usize) -> f64 {
    rrhs.iter()
        .enumerate()
        .map(|(slot, &k)| h[k].dotc(&w.rows(slot * n, n)))
        .sum::<num_complex::Complex64>()
        .norm_sqr()
}

fn rue_trial(topo: &Topology, state: &ChannelState, beams: &BeamformerSet, noise: f64, r: usize, rng: &mut SimRng) -> f64 {
    let i = topo.rues[r];
    let n = topo.rrh_antennas;
    let own = &topo.serving_rrhs[i];
    // Error on estimated links, full channel elsewhere.
    let mut err = Vec::with_capacity(own.len());
    let h: Vec<CVec> = (0..topo.num_rrh())
        .map(|k| match own.binary_search(&k) {
            Ok(slot) => {
                let e = complex_gaussian_vec(rng, n, state.errvar.rrh[i][slot]);
                let full = &state.est_rrh[i][slot] + &e;
                err.push(e);
                full
            }
            Err(_) => complex_gaussian_vec(rng, n, topo.alpha_rrh[k][i]),
        })
        .collect();
    let h_mbs = complex_gaussian_vec(rng, topo.mbs_antennas, topo.alpha_mbs[i]);

    let w = &beams.rue[r];
    let est: num_complex::Complex64 = (0..own.len())
        .map(|slot| state.est_rrh[i][slot].dotc(&w.rows(slot * n, n)))
        .sum();
    let self_err: num_complex::Complex64 = err.iter().enumerate().map(|(slot, e)| e.dotc(&w.rows(slot * n, n))).sum();
    let mut interference = self_err.norm_sqr() + noise;
    for (r2, &i2) in topo.rues.iter().enumerate() {
        if r2 != r {
            interference += stacked_gain(&h, &topo.serving_rrhs[i2], &beams.rue[r2], n);
        }
    }
    for wb in &beams.bue {
        interference += h_mbs.dotc(wb).norm_sqr();
    }
    (est.norm_sqr() / interference).ln_1p() / std::f64::consts::LN_2
}

fn bue_trial(topo: &Topology, state: &ChannelState, beams: &BeamformerSet, noise: f64, b: usize, rng: &mut SimRng) -> f64 {
    let j = topo.bues[b];
    let n = topo.rrh_antennas;
    let est = state.est_mbs[j].as_ref().expect("BUE estimate present");
    let err = complex_gaussian_vec(rng, topo.mbs_antennas, state.errvar.mbs[j].expect("BUE error variance present"));
    let h_mbs = est + &err;
    let h: Vec<CVec> = (0..topo.num_rrh())
        .map(|k| complex_gaussian_vec(rng, n, topo.alpha_rrh[k][j]))
        .collect();

    let w = &beams.bue[b];
    let mut interference = err.dotc(w).norm_sqr() + noise;
    for (r, &i) in topo.rues.iter().enumerate() {
        interference += stacked_gain(&h, &topo.serving_rrhs[i], &beams.rue[r], n);
    }
    for (b2, w2) in beams.bue.iter().enumerate() {
        if b2 != b {
            interference += h_mbs.dotc(w2).norm_sqr();
        }
    }
    (est.dotc(w).norm_sqr() / interference).ln_1p() / std::f64::consts::LN_2
}
