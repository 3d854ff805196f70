use crate::channel::CVec;
use crate::error::{Error, Result};
use crate::scenario::Topology;

/// Transmit beamformers for every UE.
///
/// `rue[r]` belongs to `topo.rues[r]` and stacks one `N`-block per serving
/// RRH in ascending RRH order. `bue[b]` is the MBS beamformer of
/// `topo.bues[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub rue: Vec<CVec>,
    pub bue: Vec<CVec>,
}

impl BeamformerSet {
    pub fn zeros(topo: &Topology) -> Self {
        Self {
            rue: topo
                .rues
                .iter()
                .map(|&i| CVec::zeros(topo.rrh_antennas * topo.serving_rrhs[i].len()))
                .collect(),
            bue: vec![CVec::zeros(topo.mbs_antennas); topo.bues.len()],
        }
    }

    /// Transmit power of each RRH.
    pub fn rrh_powers(&self, topo: &Topology) -> Vec<f64> {
        let n = topo.rrh_antennas;
        let mut p = vec![0.0; topo.num_rrh()];
        for (r, &i) in topo.rues.iter().enumerate() {
            for (slot, &k) in topo.serving_rrhs[i].iter().enumerate() {
                p[k] += self.rue[r].rows(slot * n, n).norm_squared();
            }
        }
        p
    }

    pub fn mbs_power(&self) -> f64 {
        self.bue.iter().map(|w| w.norm_squared()).sum()
    }

    /// Checks shapes against `topo` and the power budgets with relative slack `eps`.
    pub fn check(&self, topo: &Topology, rrh_budget: &[f64], mbs_budget: f64, eps: f64) -> Result<()> {
        let expected = Self::zeros(topo);
        let shapes_ok = self.rue.len() == expected.rue.len()
            && self.bue.len() == expected.bue.len()
            && self.rue.iter().zip(&expected.rue).all(|(a, b)| a.len() == b.len())
            && self.bue.iter().all(|w| w.len() == topo.mbs_antennas);
        if !shapes_ok {
            return Err(Error::Contract("beamformer dimensions do not match the topology".into()));
        }
        for (k, (p, cap)) in self.rrh_powers(topo).iter().zip(rrh_budget).enumerate() {
            if *p > cap * (1.0 + eps) {
                return Err(Error::Contract(format!("RRH {k} transmits {p:e} W over its budget {cap:e} W")));
            }
        }
        let p = self.mbs_power();
        if p > mbs_budget * (1.0 + eps) {
            return Err(Error::Contract(format!("MBS transmits {p:e} W over its budget {mbs_budget:e} W")));
        }
        Ok(())
    }

    /// `Σ ‖w − other‖²` over all UEs.
    pub fn squared_distance(&self, other: &Self) -> f64 {
        let rue: f64 = self.rue.iter().zip(&other.rue).map(|(a, b)| (a - b).norm_squared()).sum();
        let bue: f64 = self.bue.iter().zip(&other.bue).map(|(a, b)| (a - b).norm_squared()).sum();
        rue + bue
    }
}
