//! Rate lower bounds from channel statistics and Monte Carlo achievable rates.

mod covariance;
mod monte_carlo;

pub use covariance::{hermitian_cholesky, AggregatedLinks, BlockCov, CMat};
pub use monte_carlo::{monte_carlo_rates, McRates, DEFAULT_MC_TRIALS};

use std::fmt::Write as _;

use crate::beamforming::BeamformerSet;

/// Useful-signal power `|ĝ^H w|²` and interference-plus-noise `J` of RUE `r`.
pub fn rue_signal_and_interference(links: &AggregatedLinks, beams: &BeamformerSet, r: usize, noise: f64) -> (f64, f64) {
    let w = &beams.rue[r];
    let signal = links.g_hat[r].dotc(w).norm_sqr();
    let mut j = links.e_rue[r].quad_form(w) + noise;
    for (r2, w2) in beams.rue.iter().enumerate() {
        if r2 != r {
            j += links.g_rue[r2][r].quad_form(w2);
        }
    }
    for wb in &beams.bue {
        j += links.h_rue[r].quad_form(wb);
    }
    (signal, j)
}

/// Useful-signal power and `J` of BUE `b`.
pub fn bue_signal_and_interference(links: &AggregatedLinks, beams: &BeamformerSet, b: usize, noise: f64) -> (f64, f64) {
    let w = &beams.bue[b];
    let signal = links.h_hat_b[b].dotc(w).norm_sqr();
    let mut j = links.e_bue[b].quad_form(w) + noise;
    for (r, wr) in beams.rue.iter().enumerate() {
        j += links.g_bue[r][b].quad_form(wr);
    }
    for (b2, w2) in beams.bue.iter().enumerate() {
        if b2 != b {
            j += links.h_bue[b].quad_form(w2);
        }
    }
    (signal, j)
}

/// Lower bounds on the achievable rate of every UE, in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBounds {
    pub rue: Vec<f64>,
    pub bue: Vec<f64>,
}

impl LowerBounds {
    pub fn sum(&self) -> f64 {
        self.rue.iter().chain(&self.bue).sum()
    }
}

fn bits(prelog: f64, (signal, j): (f64, f64)) -> f64 {
    prelog * (signal / j).ln_1p() / std::f64::consts::LN_2
}

/// RUE lower bounds only; touches nothing on the MBS side.
pub fn rue_lower_bounds(links: &AggregatedLinks, beams: &BeamformerSet, noise: f64, prelog: f64) -> Vec<f64> {
    (0..links.num_rue())
        .map(|r| bits(prelog, rue_signal_and_interference(links, beams, r, noise)))
        .collect()
}

/// BUE lower bounds only.
pub fn bue_lower_bounds(links: &AggregatedLinks, beams: &BeamformerSet, noise: f64, prelog: f64) -> Vec<f64> {
    (0..links.num_bue())
        .map(|b| bits(prelog, bue_signal_and_interference(links, beams, b, noise)))
        .collect()
}

pub fn lower_bound_rates(links: &AggregatedLinks, beams: &BeamformerSet, noise: f64, prelog: f64) -> LowerBounds {
    LowerBounds {
        rue: rue_lower_bounds(links, beams, noise, prelog),
        bue: bue_lower_bounds(links, beams, noise, prelog),
    }
}

/// Lower bounds and Monte Carlo estimates side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Global ids of the RUEs, then of the BUEs.
    pub rue_ids: Vec<usize>,
    pub bue_ids: Vec<usize>,
    pub lb_rue: Vec<f64>,
    pub lb_bue: Vec<f64>,
    pub mc_rue: Vec<f64>,
    pub mc_bue: Vec<f64>,
    pub mc_rue_stderr: Vec<f64>,
    pub mc_bue_stderr: Vec<f64>,
    pub prelog: f64,
}

impl RateReport {
    pub fn new(rue_ids: Vec<usize>, bue_ids: Vec<usize>, lb: LowerBounds, mc: McRates, prelog: f64) -> Self {
        Self {
            rue_ids,
            bue_ids,
            lb_rue: lb.rue,
            lb_bue: lb.bue,
            mc_rue: mc.rue,
            mc_bue: mc.bue,
            mc_rue_stderr: mc.rue_stderr,
            mc_bue_stderr: mc.bue_stderr,
            prelog,
        }
    }

    /// Number of UEs whose bound exceeds `mc + sigmas * stderr`.
    pub fn jensen_violations(&self, sigmas: f64) -> usize {
        let rue = (0..self.lb_rue.len()).filter(|&r| self.lb_rue[r] > self.mc_rue[r] + sigmas * self.mc_rue_stderr[r]);
        let bue = (0..self.lb_bue.len()).filter(|&b| self.lb_bue[b] > self.mc_bue[b] + sigmas * self.mc_bue_stderr[b]);
        rue.count() + bue.count()
    }

    /// CSV with header `ue_id,type,lower_bound,mc_rate,mc_stderr`, sorted by UE id.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(usize, &str, f64, f64, f64)> = Vec::new();
        for r in 0..self.rue_ids.len() {
            rows.push((self.rue_ids[r], "rue", self.lb_rue[r], self.mc_rue[r], self.mc_rue_stderr[r]));
        }
        for b in 0..self.bue_ids.len() {
            rows.push((self.bue_ids[b], "bue", self.lb_bue[b], self.mc_bue[b], self.mc_bue_stderr[b]));
        }
        rows.sort_by_key(|row| row.0);
        let mut out = String::from("ue_id,type,lower_bound,mc_rate,mc_stderr\n");
        for (id, kind, lb, mc, se) in rows {
            writeln!(out, "{id},{kind},{lb},{mc},{se}").unwrap();
        }
        out
    }
}
