//! Random H-CRAN layouts, user-centric clustering and large-scale gains.
//!
//! The macro base station sits at the origin. RRHs are dropped uniformly in
//! the annulus between `inner_ring_radius` and `cell_radius`; UEs uniformly
//! in the whole disk. A UE is an RUE when at least one RRH within the
//! coverage radius keeps it after capacity pruning, otherwise it is a BUE.

mod dump;

pub use dump::{load_topology, read_topology, write_topology, TOPOLOGY_FORMAT_VERSION};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Meters.
    pub cell_radius: f64,
    /// Meters. RRHs are never placed closer than this to the MBS.
    pub inner_ring_radius: f64,
    pub num_rrh: usize,
    pub num_ue: usize,
    pub mbs_antennas: usize,
    pub rrh_antennas: usize,
    /// Coverage radius `D_max` of every RRH, meters.
    pub coverage_radius: f64,
    pub max_ue_per_rrh: usize,
    pub pathloss_exponent: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadowing_std: f64,
    pub rng_seed: u64,
    /// Path loss at `reference_distance`, dB.
    pub pathloss_intercept_db: f64,
    /// Meters.
    pub reference_distance: f64,
    /// Distances below this floor are clamped before evaluating path loss.
    pub min_distance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cell_radius: 500.0,
            inner_ring_radius: 200.0,
            num_rrh: 25,
            num_ue: 8,
            mbs_antennas: 10,
            rrh_antennas: 4,
            coverage_radius: 100.0,
            max_ue_per_rrh: 3,
            pathloss_exponent: 3.7,
            shadowing_std: 8.0,
            rng_seed: 0,
            pathloss_intercept_db: 128.1,
            reference_distance: 1000.0,
            min_distance: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.inner_ring_radius > 0.0 && self.cell_radius > self.inner_ring_radius) {
            return fail("need cell_radius > inner_ring_radius > 0");
        }
        if self.num_rrh == 0
            || self.num_ue == 0
            || self.mbs_antennas == 0
            || self.rrh_antennas == 0
            || self.max_ue_per_rrh == 0
        {
            return fail("num_rrh, num_ue, mbs_antennas, rrh_antennas and max_ue_per_rrh must be >= 1");
        }
        if !(self.coverage_radius > 0.0) {
            return fail("coverage_radius must be > 0");
        }
        if !(self.reference_distance > 0.0 && self.min_distance > 0.0) {
            return fail("reference_distance and min_distance must be > 0");
        }
        if !(self.shadowing_std >= 0.0 && self.pathloss_exponent.is_finite()) {
            return fail("shadowing_std must be >= 0 and pathloss_exponent finite");
        }
        Ok(())
    }

    pub fn pathloss(&self) -> PathLoss {
        PathLoss {
            intercept_db: self.pathloss_intercept_db,
            reference_distance: self.reference_distance,
            exponent: self.pathloss_exponent,
            shadowing_std: self.shadowing_std,
        }
    }
}

/// Log-distance path loss with log-normal shadowing:
/// `PL(d) = PL0 + 10 γ log10(d / d0) + X`, `X ~ N(0, σ²)` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub intercept_db: f64,
    pub reference_distance: f64,
    pub exponent: f64,
    pub shadowing_std: f64,
}

impl PathLoss {
    /// Deterministic part of the path loss in dB.
    pub fn mean_loss_db(&self, distance: f64) -> Result<f64> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::Domain(format!("path loss distance must be positive, got {distance}")));
        }
        Ok(self.intercept_db + 10.0 * self.exponent * (distance / self.reference_distance).log10())
    }

    /// Path loss in dB including one shadowing draw.
    pub fn loss_db<R: Rng + ?Sized>(&self, distance: f64, rng: &mut R) -> Result<f64> {
        let mean = self.mean_loss_db(distance)?;
        let shadow = if self.shadowing_std > 0.0 {
            Normal::new(0.0, self.shadowing_std)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
        Ok(mean + shadow)
    }

    /// Linear power gain `10^(-PL/10)`.
    pub fn gain<R: Rng + ?Sized>(&self, distance: f64, rng: &mut R) -> Result<f64> {
        Ok(db_to_linear(-self.loss_db(distance, rng)?))
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10^((dBm - 30) / 10)` watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Result of user-centric clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// `K_i`: sorted RRH indices serving each UE (empty for BUEs).
    pub serving_rrhs: Vec<Vec<usize>>,
    /// `M_k`: sorted UE indices served by each RRH.
    pub served_ues: Vec<Vec<usize>>,
    pub rues: Vec<usize>,
    pub bues: Vec<usize>,
}

/// Associates every UE with each RRH within `coverage_radius`; an RRH with
/// more than `max_ue_per_rrh` candidates keeps the closest ones (ties by
/// UE index). Pruning is per RRH, so a UE dropped by one RRH stays with its
/// other candidates.
pub fn cluster_ues(
    rrh_positions: &[Point],
    ue_positions: &[Point],
    coverage_radius: f64,
    max_ue_per_rrh: usize,
) -> Clustering {
    let num_ue = ue_positions.len();
    let mut serving_rrhs = vec![Vec::new(); num_ue];
    let mut served_ues = Vec::with_capacity(rrh_positions.len());
    for (k, rrh) in rrh_positions.iter().enumerate() {
        let mut candidates: Vec<(f64, usize)> = ue_positions
            .iter()
            .enumerate()
            .map(|(m, ue)| (rrh.distance(ue), m))
            .filter(|&(d, _)| d <= coverage_radius)
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.truncate(max_ue_per_rrh);
        let mut kept: Vec<usize> = candidates.into_iter().map(|(_, m)| m).collect();
        kept.sort_unstable();
        for &m in &kept {
            serving_rrhs[m].push(k);
        }
        served_ues.push(kept);
    }
    let (rues, bues) = (0..num_ue).partition(|&m| !serving_rrhs[m].is_empty());
    Clustering {
        serving_rrhs,
        served_ues,
        rues,
        bues,
    }
}

/// The static scenario shared by both optimization stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub rrh_antennas: usize,
    pub mbs_antennas: usize,
    pub coverage_radius: f64,
    pub max_ue_per_rrh: usize,
    pub mbs_position: Point,
    pub rrh_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub serving_rrhs: Vec<Vec<usize>>,
    pub served_ues: Vec<Vec<usize>>,
    pub rues: Vec<usize>,
    pub bues: Vec<usize>,
    /// `alpha_rrh[k][m]`, linear power gain from RRH `k` to UE `m`.
    pub alpha_rrh: Vec<Vec<f64>>,
    /// `alpha_mbs[m]`, linear power gain from the MBS to UE `m`.
    pub alpha_mbs: Vec<f64>,
}

/// Draws a topology. Deterministic in `cfg` (including `cfg.rng_seed`).
pub fn generate_topology(cfg: &ScenarioConfig) -> Result<Topology> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    let two_pi = std::f64::consts::TAU;

    let (r0sq, r1sq) = (cfg.inner_ring_radius.powi(2), cfg.cell_radius.powi(2));
    let rrh_positions: Vec<Point> = (0..cfg.num_rrh)
        .map(|_| {
            let r = (r0sq + rng.random::<f64>() * (r1sq - r0sq)).sqrt();
            let theta = two_pi * rng.random::<f64>();
            Point::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    let ue_positions: Vec<Point> = (0..cfg.num_ue)
        .map(|_| {
            let r = cfg.cell_radius * rng.random::<f64>().sqrt();
            let theta = two_pi * rng.random::<f64>();
            Point::new(r * theta.cos(), r * theta.sin())
        })
        .collect();

    let clustering = cluster_ues(&rrh_positions, &ue_positions, cfg.coverage_radius, cfg.max_ue_per_rrh);

    let pl = cfg.pathloss();
    let mbs_position = Point::default();
    let mut alpha_rrh = Vec::with_capacity(cfg.num_rrh);
    for rrh in &rrh_positions {
        let row = ue_positions
            .iter()
            .map(|ue| pl.gain(rrh.distance(ue).max(cfg.min_distance), &mut rng))
            .collect::<Result<Vec<f64>>>()?;
        alpha_rrh.push(row);
    }
    let alpha_mbs = ue_positions
        .iter()
        .map(|ue| pl.gain(mbs_position.distance(ue).max(cfg.min_distance), &mut rng))
        .collect::<Result<Vec<f64>>>()?;

    let topo = Topology {
        rrh_antennas: cfg.rrh_antennas,
        mbs_antennas: cfg.mbs_antennas,
        coverage_radius: cfg.coverage_radius,
        max_ue_per_rrh: cfg.max_ue_per_rrh,
        mbs_position,
        rrh_positions,
        ue_positions,
        serving_rrhs: clustering.serving_rrhs,
        served_ues: clustering.served_ues,
        rues: clustering.rues,
        bues: clustering.bues,
        alpha_rrh,
        alpha_mbs,
    };
    debug_assert!(topo.validate().is_ok());
    Ok(topo)
}

impl Topology {
    /// Builds a topology from explicit serving sets and gains. Positions are
    /// optional (pass empty vectors when only the graph matters); the
    /// coverage check is skipped when they are absent.
    pub fn from_parts(
        rrh_antennas: usize,
        mbs_antennas: usize,
        serving_rrhs: Vec<Vec<usize>>,
        alpha_rrh: Vec<Vec<f64>>,
        alpha_mbs: Vec<f64>,
    ) -> Result<Topology> {
        let num_rrh = alpha_rrh.len();
        let num_ue = serving_rrhs.len();
        let mut serving_rrhs = serving_rrhs;
        let mut served_ues = vec![Vec::new(); num_rrh];
        for (m, set) in serving_rrhs.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            for &k in set.iter() {
                if k >= num_rrh {
                    return Err(Error::Config(format!("UE {m} served by unknown RRH {k}")));
                }
                served_ues[k].push(m);
            }
        }
        let (rues, bues) = (0..num_ue).partition(|&m| !serving_rrhs[m].is_empty());
        let max_ue_per_rrh = served_ues.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let topo = Topology {
            rrh_antennas,
            mbs_antennas,
            coverage_radius: f64::INFINITY,
            max_ue_per_rrh,
            mbs_position: Point::default(),
            rrh_positions: Vec::new(),
            ue_positions: Vec::new(),
            serving_rrhs,
            served_ues,
            rues,
            bues,
            alpha_rrh,
            alpha_mbs,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn num_rrh(&self) -> usize {
        self.alpha_rrh.len()
    }

    pub fn num_ue(&self) -> usize {
        self.alpha_mbs.len()
    }

    pub fn is_rue(&self, m: usize) -> bool {
        !self.serving_rrhs[m].is_empty()
    }

    /// Maps a global UE index to its position in `rues`.
    pub fn rue_positions_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.num_ue()];
        for (r, &m) in self.rues.iter().enumerate() {
            idx[m] = Some(r);
        }
        idx
    }

    /// Maps a global UE index to its position in `bues`.
    pub fn bue_positions_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.num_ue()];
        for (b, &m) in self.bues.iter().enumerate() {
            idx[m] = Some(b);
        }
        idx
    }

    /// Checks every structural invariant of a topology.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(msg));
        let num_ue = self.num_ue();
        let num_rrh = self.num_rrh();
        if self.rrh_antennas == 0 || self.mbs_antennas == 0 {
            return bad("antenna counts must be >= 1".into());
        }
        if self.serving_rrhs.len() != num_ue || self.served_ues.len() != num_rrh {
            return bad("cluster maps have inconsistent sizes".into());
        }
        if self.alpha_rrh.iter().any(|row| row.len() != num_ue) {
            return bad("alpha_rrh must be K x M".into());
        }
        let all_positive = self
            .alpha_rrh
            .iter()
            .flatten()
            .chain(self.alpha_mbs.iter())
            .all(|&a| a > 0.0 && a.is_finite());
        if !all_positive {
            return bad("all large-scale gains must be positive and finite".into());
        }
        let mut seen = vec![0u8; num_ue];
        for &m in &self.rues {
            if m >= num_ue || self.serving_rrhs[m].is_empty() {
                return bad(format!("RUE {m} has no serving RRH"));
            }
            seen[m] += 1;
        }
        for &m in &self.bues {
            if m >= num_ue || !self.serving_rrhs[m].is_empty() {
                return bad(format!("BUE {m} has serving RRHs"));
            }
            seen[m] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return bad("RUE and BUE sets must partition the UEs".into());
        }
        for (k, ues) in self.served_ues.iter().enumerate() {
            if ues.len() > self.max_ue_per_rrh {
                return bad(format!("RRH {k} serves {} UEs, capacity {}", ues.len(), self.max_ue_per_rrh));
            }
            for &m in ues {
                if m >= num_ue || !self.serving_rrhs[m].contains(&k) {
                    return bad(format!("RRH {k} lists UE {m} but the UE does not list the RRH"));
                }
            }
        }
        for (m, rrhs) in self.serving_rrhs.iter().enumerate() {
            for &k in rrhs {
                if k >= num_rrh || !self.served_ues[k].contains(&m) {
                    return bad(format!("UE {m} lists RRH {k} but the RRH does not list the UE"));
                }
                if !self.rrh_positions.is_empty() && !self.ue_positions.is_empty() {
                    let d = self.rrh_positions[k].distance(&self.ue_positions[m]);
                    if d > self.coverage_radius {
                        return bad(format!("RRH {k} serves UE {m} at {d} m beyond coverage"));
                    }
                }
            }
        }
        Ok(())
    }
}
