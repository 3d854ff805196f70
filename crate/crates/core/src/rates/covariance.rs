use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::channel::{CVec, ChannelState};
use crate::scenario::Topology;

pub type CMat = DMatrix<Complex64>;

/// Cholesky factor of a Hermitian matrix, or `None` unless it is positive
/// definite. The complex factorization in nalgebra happily takes square
/// roots of negative pivots, which come out (nearly) imaginary, so the
/// pivots are checked here.
pub fn hermitian_cholesky(m: CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = m.cholesky()?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.im.abs() <= 1e-3 * d.re);
    ok.then_some(chol)
}

/// Hermitian matrix `m m^H + blkdiag{s_n I_d}`: a rank-one part from the
/// known estimates plus a scaled identity per `d x d` block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCov {
    pub block_dim: usize,
    pub scales: Vec<f64>,
    pub mean: Option<CVec>,
}

impl BlockCov {
    pub fn scaled_identity(dim: usize, a: f64) -> Self {
        Self {
            block_dim: dim,
            scales: vec![a],
            mean: None,
        }
    }

    /// Zero-dimensional placeholder.
    pub fn empty(block_dim: usize) -> Self {
        Self {
            block_dim,
            scales: Vec::new(),
            mean: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.scales.len()
    }

    /// `w^H C w`.
    pub fn quad_form(&self, w: &CVec) -> f64 {
        debug_assert_eq!(w.len(), self.dim());
        let d = self.block_dim;
        let diag: f64 = self
            .scales
            .iter()
            .enumerate()
            .map(|(n, a)| a * w.rows(n * d, d).norm_squared())
            .sum();
        match &self.mean {
            Some(m) => m.dotc(w).norm_sqr() + diag,
            None => diag,
        }
    }

    /// `target += weight * C`.
    pub fn add_to(&self, target: &mut CMat, weight: f64) {
        debug_assert_eq!(target.nrows(), self.dim());
        let d = self.block_dim;
        for (n, a) in self.scales.iter().enumerate() {
            for c in n * d..(n + 1) * d {
                target[(c, c)] += Complex64::from(weight * a);
            }
        }
        if let Some(m) = &self.mean {
            target.ger(Complex64::from(weight), m, &m.conjugate(), Complex64::from(1.0));
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim(), self.dim());
        self.add_to(&mut m, 1.0);
        m
    }
}

/// Stacked estimates and second-order statistics used by the rate lower
/// bounds.
///
/// RUE quantities are indexed by position in `topo.rues` (`r`), BUE
/// quantities by position in `topo.bues` (`b`).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedLinks {
    /// `ĝ_{i,i}`: estimates from the serving RRHs, stacked in `K_i` order.
    pub g_hat: Vec<CVec>,
    /// `E^{(R)}_{i,i} = blkdiag{δ_{k,i} I_N}`.
    pub e_rue: Vec<BlockCov>,
    /// `g_rue[r'][r] = G^{(R)}_{i',i}`, second moment of the channel from
    /// `K_{i'}` to RUE `i` given the estimates. The rank-one part stacks the
    /// estimates of the links in `K_{i'} ∩ K_i`; when two or more RRHs are
    /// shared it is not block diagonal. Diagonal entries are unused and empty.
    pub g_rue: Vec<Vec<BlockCov>>,
    /// `H^{(R)}_{b,i} = α_{b,i} I_B`.
    pub h_rue: Vec<BlockCov>,
    /// `ĥ_{b,j}`.
    pub h_hat_b: Vec<CVec>,
    /// `E^{(B)}_{b,j} = δ_{b,j} I_B`.
    pub e_bue: Vec<BlockCov>,
    /// `g_bue[r][b] = G^{(B)}_{i,j} = blkdiag{α_{k,j} I_N, k ∈ K_i}`.
    pub g_bue: Vec<Vec<BlockCov>>,
    /// `H^{(B)}_{b,j} = ĥ_{b,j} ĥ_{b,j}^H + δ_{b,j} I_B`.
    pub h_bue: Vec<BlockCov>,
}

impl AggregatedLinks {
    pub fn build(topo: &Topology, state: &ChannelState) -> Self {
        let n = topo.rrh_antennas;
        let b_ant = topo.mbs_antennas;

        let g_hat = topo
            .rues
            .iter()
            .map(|&i| {
                let parts = &state.est_rrh[i];
                let mut v = CVec::zeros(n * parts.len());
                for (p, h) in parts.iter().enumerate() {
                    v.rows_mut(p * n, n).copy_from(h);
                }
                v
            })
            .collect();
        let e_rue = topo
            .rues
            .iter()
            .map(|&i| BlockCov {
                block_dim: n,
                scales: state.errvar.rrh[i].clone(),
                mean: None,
            })
            .collect();

        let g_rue = topo
            .rues
            .iter()
            .map(|&src| {
                topo.rues
                    .iter()
                    .map(|&dst| {
                        if src == dst {
                            return BlockCov::empty(n);
                        }
                        let set = &topo.serving_rrhs[src];
                        let mut scales = Vec::with_capacity(set.len());
                        let mut mean = CVec::zeros(n * set.len());
                        let mut known = false;
                        for (p, &k) in set.iter().enumerate() {
                            match topo.serving_rrhs[dst].binary_search(&k) {
                                Ok(q) => {
                                    scales.push(state.errvar.rrh[dst][q]);
                                    mean.rows_mut(p * n, n).copy_from(&state.est_rrh[dst][q]);
                                    known = true;
                                }
                                Err(_) => scales.push(topo.alpha_rrh[k][dst]),
                            }
                        }
                        BlockCov {
                            block_dim: n,
                            scales,
                            mean: known.then_some(mean),
                        }
                    })
                    .collect()
            })
            .collect();
        let h_rue = topo
            .rues
            .iter()
            .map(|&i| BlockCov::scaled_identity(b_ant, topo.alpha_mbs[i]))
            .collect();

        let h_hat_b: Vec<CVec> = topo
            .bues
            .iter()
            .map(|&j| state.est_mbs[j].clone().expect("BUE estimate present"))
            .collect();
        let e_bue = topo
            .bues
            .iter()
            .map(|&j| BlockCov::scaled_identity(b_ant, state.errvar.mbs[j].expect("BUE error variance present")))
            .collect();
        let g_bue = topo
            .rues
            .iter()
            .map(|&i| {
                topo.bues
                    .iter()
                    .map(|&j| BlockCov {
                        block_dim: n,
                        scales: topo.serving_rrhs[i].iter().map(|&k| topo.alpha_rrh[k][j]).collect(),
                        mean: None,
                    })
                    .collect()
            })
            .collect();
        let h_bue = topo
            .bues
            .iter()
            .zip(&h_hat_b)
            .map(|(&j, h)| BlockCov {
                block_dim: b_ant,
                scales: vec![state.errvar.mbs[j].unwrap()],
                mean: Some(h.clone()),
            })
            .collect();

        Self {
            g_hat,
            e_rue,
            g_rue,
            h_rue,
            h_hat_b,
            e_bue,
            g_bue,
            h_bue,
        }
    }

    /// Copy holding only what the baseband unit knows: RRH-side estimates
    /// and statistics. MBS-side estimates are replaced by empty vectors.
    pub fn bbu_view(&self) -> Self {
        let mut v = self.clone();
        v.h_hat_b = vec![CVec::zeros(0); self.num_bue()];
        for h in &mut v.h_bue {
            *h = BlockCov::empty(h.block_dim);
        }
        v
    }

    /// Copy holding only what the MBS knows: its own estimates and statistics.
    pub fn mbs_view(&self) -> Self {
        let mut v = self.clone();
        v.g_hat = vec![CVec::zeros(0); self.num_rue()];
        for row in &mut v.g_rue {
            for g in row {
                *g = BlockCov::empty(g.block_dim);
            }
        }
        v
    }

    pub fn num_rue(&self) -> usize {
        self.e_rue.len()
    }

    pub fn num_bue(&self) -> usize {
        self.e_bue.len()
    }
}
