use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::mse::weight;
use crate::channel::CVec;
use crate::error::{Error, Result};
use crate::rates::{hermitian_cholesky, AggregatedLinks, CMat};
use crate::scenario::Topology;

use super::BeamformerSet;

/// Per-RRH and MBS transmit power budgets in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBudgets {
    pub rrh: Vec<f64>,
    pub mbs: f64,
}

impl PowerBudgets {
    pub fn uniform(num_rrh: usize, rrh: f64, mbs: f64) -> Self {
        Self {
            rrh: vec![rrh; num_rrh],
            mbs,
        }
    }
}

/// Receive equalizers `f` and auxiliary variables `u` of every UE.
#[derive(Debug, Clone, PartialEq)]
pub struct Receivers {
    pub f_rue: Vec<Complex64>,
    pub f_bue: Vec<Complex64>,
    pub u_rue: Vec<f64>,
    pub u_bue: Vec<f64>,
}

impl Receivers {
    /// `f = 1`, `u = 1` for everybody.
    pub fn initial(num_rue: usize, num_bue: usize) -> Self {
        Self {
            f_rue: vec![Complex64::from(1.0); num_rue],
            f_bue: vec![Complex64::from(1.0); num_bue],
            u_rue: vec![1.0; num_rue],
            u_bue: vec![1.0; num_bue],
        }
    }

    /// `β|f|²` for each RUE and each BUE.
    fn interference_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let w = |f: &[Complex64], u: &[f64]| f.iter().zip(u).map(|(f, &u)| weight(u) * f.norm_sqr()).collect();
        (w(&self.f_rue, &self.u_rue), w(&self.f_bue, &self.u_bue))
    }
}

/// RRH side of the beamformer update: minimize `Σ_i w_i^H F_i w_i − 2 Re(b_i^H w_i)`
/// subject to one power constraint per RRH.
#[derive(Debug, Clone, PartialEq)]
pub struct RrhSubproblem {
    pub f: Vec<CMat>,
    pub b: Vec<CVec>,
    /// RRH owning each `block_dim`-sized block of `w_i`.
    pub blocks: Vec<Vec<usize>>,
    pub block_dim: usize,
    pub budgets: Vec<f64>,
}

/// MBS side: same objective over the BUE beamformers with one total power
/// constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct MbsSubproblem {
    pub f: Vec<CMat>,
    pub b: Vec<CVec>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub rrh: RrhSubproblem,
    pub mbs: MbsSubproblem,
}

fn quadratic_objective(f: &[CMat], b: &[CVec], w: &[CVec]) -> f64 {
    f.iter()
        .zip(b)
        .zip(w)
        .map(|((f, b), w)| (w.adjoint() * f * w)[(0, 0)].re - 2.0 * b.dotc(w).re)
        .sum()
}

impl RrhSubproblem {
    pub fn objective(&self, w: &[CVec]) -> f64 {
        quadratic_objective(&self.f, &self.b, w)
    }
}

impl MbsSubproblem {
    pub fn objective(&self, w: &[CVec]) -> f64 {
        quadratic_objective(&self.f, &self.b, w)
    }
}

impl QcqpProblem {
    pub fn objective(&self, beams: &BeamformerSet) -> f64 {
        self.rrh.objective(&beams.rue) + self.mbs.objective(&beams.bue)
    }
}

/// `(m + m^H) / 2`, removing rounding noise from the imaginary diagonal.
fn hermitian_part(m: CMat) -> CMat {
    (&m + m.adjoint()) * Complex64::from(0.5)
}

pub fn assemble_rrh(links: &AggregatedLinks, rx: &Receivers, topo: &Topology, budgets: &[f64]) -> RrhSubproblem {
    let (c_rue, c_bue) = rx.interference_weights();
    let nr = topo.rues.len();
    let mut f = Vec::with_capacity(nr);
    let mut b = Vec::with_capacity(nr);
    for r in 0..nr {
        let g = &links.g_hat[r];
        let mut m: CMat = g * g.adjoint() * Complex64::from(c_rue[r]);
        links.e_rue[r].add_to(&mut m, c_rue[r]);
        for (r2, &c) in c_rue.iter().enumerate() {
            if r2 != r {
                links.g_rue[r][r2].add_to(&mut m, c);
            }
        }
        for (bb, &c) in c_bue.iter().enumerate() {
            links.g_bue[r][bb].add_to(&mut m, c);
        }
        f.push(hermitian_part(m));
        b.push(g * (rx.f_rue[r] * weight(rx.u_rue[r])));
    }
    RrhSubproblem {
        f,
        b,
        blocks: topo.rues.iter().map(|&i| topo.serving_rrhs[i].clone()).collect(),
        block_dim: topo.rrh_antennas,
        budgets: budgets.to_vec(),
    }
}

pub fn assemble_mbs(links: &AggregatedLinks, rx: &Receivers, budget: f64) -> MbsSubproblem {
    let (c_rue, c_bue) = rx.interference_weights();
    let nb = c_bue.len();
    let mut f = Vec::with_capacity(nb);
    let mut b = Vec::with_capacity(nb);
    for j in 0..nb {
        let h = &links.h_hat_b[j];
        let mut m: CMat = h * h.adjoint() * Complex64::from(c_bue[j]);
        links.e_bue[j].add_to(&mut m, c_bue[j]);
        for (r, &c) in c_rue.iter().enumerate() {
            links.h_rue[r].add_to(&mut m, c);
        }
        for (j2, &c) in c_bue.iter().enumerate() {
            if j2 != j {
                links.h_bue[j2].add_to(&mut m, c);
            }
        }
        f.push(hermitian_part(m));
        b.push(h * (rx.f_bue[j] * weight(rx.u_bue[j])));
    }
    MbsSubproblem { f, b, budget }
}

/// Builds the quadratic beamformer problem for fixed equalizers and weights.
pub fn assemble_qcqp(links: &AggregatedLinks, rx: &Receivers, topo: &Topology, budgets: &PowerBudgets) -> QcqpProblem {
    QcqpProblem {
        rrh: assemble_rrh(links, rx, topo, &budgets.rrh),
        mbs: assemble_mbs(links, rx, budgets.mbs),
    }
}

/// Term dropped from the quadratic objective: `Σ_m β_m (1 + |f_m|² N0)`.
pub fn dropped_constant(rx: &Receivers, noise: f64) -> f64 {
    let term = |f: &Complex64, u: &f64| weight(*u) * (1.0 + f.norm_sqr() * noise);
    rx.f_rue.iter().zip(&rx.u_rue).map(|(f, u)| term(f, u)).sum::<f64>()
        + rx.f_bue.iter().zip(&rx.u_bue).map(|(f, u)| term(f, u)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance on power violation, complementary slackness and the duality gap.
    pub tol: f64,
    pub max_dual_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_dual_iters: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
    /// `primal − dual` at the returned feasible point.
    pub gap: f64,
    /// Largest relative power violation before the final rescaling.
    pub max_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QcqpDiagnostics {
    pub rrh: SolveDiagnostics,
    pub mbs: SolveDiagnostics,
}

/// Solves both subproblems.
pub fn solve_qcqp(problem: &QcqpProblem, opts: &SolverOptions) -> Result<(BeamformerSet, QcqpDiagnostics)> {
    let (rue, rrh) = solve_rrh(&problem.rrh, opts)?;
    let (bue, mbs) = solve_mbs(&problem.mbs, opts)?;
    Ok((BeamformerSet { rue, bue }, QcqpDiagnostics { rrh, mbs }))
}

/// One RUE's reduced problem: coordinates of RRHs with zero budget are pinned to zero.
struct UeBlock {
    free: Vec<usize>,
    /// Constraint index of each free block.
    owners: Vec<usize>,
    f: CMat,
    b: CVec,
}

struct DualPoint {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    w: Vec<CVec>,
}

struct RrhDual<'a> {
    ues: Vec<UeBlock>,
    budgets: Vec<f64>,
    /// RRH id of each constraint.
    rrh_ids: Vec<usize>,
    n: usize,
    problem: &'a RrhSubproblem,
}

impl RrhDual<'_> {
    /// Dual value, gradient and (optionally) Hessian at `mu`; `None` where
    /// some `F_i + Σ μ_k D_k` is not numerically positive definite.
    fn evaluate(&self, mu: &DVector<f64>, with_hessian: bool) -> Option<DualPoint> {
        let m = self.budgets.len();
        let n = self.n;
        let mut value = -mu.dot(&DVector::from_column_slice(&self.budgets));
        let mut grad = DVector::from_iterator(m, self.budgets.iter().map(|p| -p));
        let mut hess = DMatrix::zeros(m, m);
        let mut w_all = Vec::with_capacity(self.ues.len());
        for ue in &self.ues {
            if ue.free.is_empty() {
                w_all.push(CVec::zeros(0));
                continue;
            }
            let mut a = ue.f.clone();
            for (blk, &c) in ue.owners.iter().enumerate() {
                for d in 0..n {
                    a[(blk * n + d, blk * n + d)] += Complex64::from(mu[c]);
                }
            }
            let chol = hermitian_cholesky(a)?;
            let w = chol.solve(&ue.b);
            value -= ue.b.dotc(&w).re;
            for (blk, &c) in ue.owners.iter().enumerate() {
                grad[c] += w.rows(blk * n, n).norm_squared();
            }
            if with_hessian {
                for (l, &cl) in ue.owners.iter().enumerate() {
                    let mut rhs = CVec::zeros(w.len());
                    rhs.rows_mut(l * n, n).copy_from(&w.rows(l * n, n));
                    let z = chol.solve(&rhs);
                    for (s, &cs) in ue.owners.iter().enumerate() {
                        hess[(cs, cl)] -= 2.0 * w.rows(s * n, n).dotc(&z.rows(s * n, n)).re;
                    }
                }
            }
            w_all.push(w);
        }
        Some(DualPoint {
            value,
            grad,
            hess,
            w: w_all,
        })
    }

    /// Expands reduced solutions back to full beamformers.
    fn expand(&self, w: &[CVec]) -> Vec<CVec> {
        let n = self.n;
        self.ues
            .iter()
            .zip(w)
            .zip(&self.problem.blocks)
            .map(|((ue, w), blocks)| {
                let mut full = CVec::zeros(blocks.len() * n);
                for (blk, &slot) in ue.free.iter().enumerate() {
                    full.rows_mut(slot * n, n).copy_from(&w.rows(blk * n, n));
                }
                full
            })
            .collect()
    }
}

/// Solves the RRH subproblem through its dual over the per-RRH multipliers.
pub fn solve_rrh(problem: &RrhSubproblem, opts: &SolverOptions) -> Result<(Vec<CVec>, SolveDiagnostics)> {
    let n = problem.block_dim;
    // Constraints only for RRHs that serve someone and have a positive budget.
    let mut constraint_of = vec![None; problem.budgets.len()];
    let mut rrh_ids = Vec::new();
    for blocks in &problem.blocks {
        for &k in blocks {
            if problem.budgets[k] > 0.0 && constraint_of[k].is_none() {
                constraint_of[k] = Some(rrh_ids.len());
                rrh_ids.push(k);
            }
        }
    }
    // Normalize the quadratic term so the multipliers are O(1).
    let scale = {
        let max_diag = problem
            .f
            .iter()
            .flat_map(|f| f.diagonal().iter().map(|x| x.re).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        if max_diag > 0.0 {
            1.0 / max_diag
        } else {
            1.0
        }
    };
    let ues: Vec<UeBlock> = problem
        .f
        .iter()
        .zip(&problem.b)
        .zip(&problem.blocks)
        .map(|((f, b), blocks)| {
            let free: Vec<usize> = (0..blocks.len()).filter(|&s| constraint_of[blocks[s]].is_some()).collect();
            let owners: Vec<usize> = free.iter().map(|&s| constraint_of[blocks[s]].unwrap()).collect();
            let idx: Vec<usize> = free.iter().flat_map(|&s| s * n..(s + 1) * n).collect();
            let fr = CMat::from_fn(idx.len(), idx.len(), |r, c| f[(idx[r], idx[c])] * scale);
            let br = CVec::from_iterator(idx.len(), idx.iter().map(|&r| b[r] * scale));
            UeBlock { free, owners, f: fr, b: br }
        })
        .collect();
    let dual = RrhDual {
        ues,
        budgets: rrh_ids.iter().map(|&k| problem.budgets[k]).collect(),
        rrh_ids,
        n,
        problem,
    };

    // Singular but semidefinite terms are fine as long as the multipliers
    // keep the system invertible; indefinite ones are not.
    for ue in &dual.ues {
        let d = ue.f.nrows();
        if d > 0 && hermitian_cholesky(&ue.f + CMat::identity(d, d) * Complex64::from(1e-10)).is_none() {
            return Err(Error::NotPositiveDefinite("RRH-side quadratic term is indefinite".into()));
        }
    }
    let (mu, iterations) = maximize_dual(&dual, opts)?;
    let point = dual.evaluate(&mu, false).expect("accepted multipliers give an invertible system");
    let mut w = dual.expand(&point.w);
    let max_violation = feasibility_rescale(&mut w, problem, &dual.rrh_ids);
    let primal = problem.objective(&w);
    let dual_value = point.value / scale;
    let diag = SolveDiagnostics {
        iterations,
        primal,
        dual: dual_value,
        gap: primal - dual_value,
        max_violation,
    };
    log::debug!("rrh subproblem: {diag:?}");
    Ok((w, diag))
}

/// Scales down the blocks of any RRH above budget; returns the largest
/// relative violation seen.
fn feasibility_rescale(w: &mut [CVec], problem: &RrhSubproblem, rrh_ids: &[usize]) -> f64 {
    let n = problem.block_dim;
    let mut power = vec![0.0; problem.budgets.len()];
    for (wi, blocks) in w.iter().zip(&problem.blocks) {
        for (s, &k) in blocks.iter().enumerate() {
            power[k] += wi.rows(s * n, n).norm_squared();
        }
    }
    let mut worst: f64 = 0.0;
    for &k in rrh_ids {
        let cap = problem.budgets[k];
        worst = worst.max((power[k] - cap) / cap);
        if power[k] > cap {
            let s = Complex64::from((cap / power[k]).sqrt());
            for (wi, blocks) in w.iter_mut().zip(&problem.blocks) {
                for (slot, &kk) in blocks.iter().enumerate() {
                    if kk == k {
                        let mut seg = wi.rows_mut(slot * n, n);
                        seg *= s;
                    }
                }
            }
        }
    }
    worst
}

/// Projected Newton ascent on the concave dual with Armijo backtracking.
fn maximize_dual(dual: &RrhDual<'_>, opts: &SolverOptions) -> Result<(DVector<f64>, usize)> {
    let m = dual.budgets.len();
    let mut mu = DVector::zeros(m);
    if m == 0 {
        return Ok((mu, 0));
    }
    let budgets = DVector::from_column_slice(&dual.budgets);
    // Start at zero, or slightly inside the orthant if F is singular.
    let mut start = 0.0;
    let mut point = loop {
        mu.fill(start);
        if let Some(p) = dual.evaluate(&mu, true) {
            break p;
        }
        if start >= 1.0 {
            return Err(Error::NotPositiveDefinite("RRH-side quadratic term is singular".into()));
        }
        start = if start == 0.0 { 1e-12 } else { start * 10.0 };
    };
    for iter in 0..opts.max_dual_iters {
        let scale = 1.0 + point.value.abs();
        let converged = (0..m).all(|k| {
            let rel = point.grad[k] / budgets[k];
            rel <= opts.tol && mu[k] * point.grad[k].abs() <= opts.tol * scale
        });
        if converged {
            return Ok((mu, iter));
        }

        // Multipliers pinned at zero that want to decrease further. The
        // threshold shrinks with the distance to stationarity measured in
        // the diagonally scaled metric.
        let scaled = |k: usize| {
            let h = -point.hess[(k, k)];
            point.grad[k] / if h > 0.0 { h } else { 1.0 }
        };
        let eps = (0..m)
            .map(|k| (mu[k] - (mu[k] + scaled(k)).max(0.0)).powi(2))
            .sum::<f64>()
            .sqrt()
            .min(1e-3 * mu.max());
        let active: Vec<bool> = (0..m).map(|k| mu[k] <= eps && point.grad[k] < 0.0).collect();
        let free: Vec<usize> = (0..m).filter(|&k| !active[k]).collect();

        let mut dir = DVector::zeros(m);
        for k in 0..m {
            if active[k] {
                dir[k] = scaled(k);
            }
        }
        if !free.is_empty() {
            let nf = free.len();
            let neg_h = DMatrix::from_fn(nf, nf, |r, c| -point.hess[(free[r], free[c])]);
            let ridge = 1e-12 * neg_h.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
            let g = DVector::from_iterator(nf, free.iter().map(|&k| point.grad[k]));
            let step = (neg_h + DMatrix::identity(nf, nf) * ridge).cholesky().map(|c| c.solve(&g));
            match step {
                Some(s) => {
                    for (r, &k) in free.iter().enumerate() {
                        dir[k] = s[r];
                    }
                }
                None => {
                    for &k in &free {
                        dir[k] = point.grad[k];
                    }
                }
            }
        }

        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = (&mu + &dir * s).map(|x| x.max(0.0));
            let predicted: f64 = (0..m)
                .map(|k| {
                    if active[k] {
                        point.grad[k] * (trial[k] - mu[k])
                    } else {
                        s * point.grad[k] * dir[k]
                    }
                })
                .sum();
            if let Some(next) = dual.evaluate(&trial, true) {
                if next.value >= point.value + 1e-4 * predicted {
                    accepted = Some((trial, next));
                    break;
                }
            }
            s *= 0.5;
        }
        match accepted {
            Some((trial, next)) => {
                let stalled = (&trial - &mu).norm() <= 1e-15 * (1.0 + mu.norm());
                mu = trial;
                point = next;
                if stalled {
                    return stall_or_fail(dual, mu, &point, opts, iter);
                }
            }
            None => return stall_or_fail(dual, mu, &point, opts, iter),
        }
    }
    Err(Error::NoConvergence {
        solver: "rrh dual",
        iterations: opts.max_dual_iters,
        detail: format!("gradient {:?}", point.grad.as_slice()),
    })
}

/// No further ascent is possible at working precision: accept the point if
/// the power violation is within tolerance, otherwise report failure.
fn stall_or_fail(
    dual: &RrhDual<'_>,
    mu: DVector<f64>,
    point: &DualPoint,
    opts: &SolverOptions,
    iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let worst = (0..mu.len())
        .map(|k| point.grad[k] / dual.budgets[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if worst <= opts.tol.sqrt() {
        Ok((mu, iter))
    } else {
        Err(Error::NoConvergence {
            solver: "rrh dual",
            iterations: iter,
            detail: format!("line search stalled with relative violation {worst:e}"),
        })
    }
}

/// Solves the MBS subproblem by bisection on its single multiplier.
pub fn solve_mbs(problem: &MbsSubproblem, opts: &SolverOptions) -> Result<(Vec<CVec>, SolveDiagnostics)> {
    let dims: Vec<usize> = problem.b.iter().map(|b| b.len()).collect();
    if problem.budget <= 0.0 || problem.f.is_empty() {
        let w: Vec<CVec> = dims.iter().map(|&d| CVec::zeros(d)).collect();
        return Ok((w, SolveDiagnostics::default()));
    }
    // Eigendecomposition per BUE: ‖w_j(μ)‖² = Σ |c_l|² / (λ_l + μ)².
    let mut spectra = Vec::with_capacity(problem.f.len());
    for (f, b) in problem.f.iter().zip(&problem.b) {
        let mut eig = f.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * lmax.max(f64::MIN_POSITIVE)) {
            return Err(Error::NotPositiveDefinite("MBS-side quadratic term is indefinite".into()));
        }
        eig.eigenvalues.apply(|l| *l = l.max(0.0));
        let c = eig.eigenvectors.adjoint() * b;
        spectra.push((eig, c));
    }
    let power = |mu: f64| -> f64 {
        spectra
            .iter()
            .map(|(eig, c)| {
                eig.eigenvalues
                    .iter()
                    .zip(c.iter())
                    .map(|(l, c)| ratio(c.norm_sqr(), (l + mu).powi(2)))
                    .sum::<f64>()
            })
            .sum()
    };
    let cap = problem.budget;
    let mut iterations = 0;
    let mu = if power(0.0) <= cap {
        0.0
    } else {
        let total_b: f64 = problem.b.iter().map(|b| b.norm_squared()).sum();
        let (mut lo, mut hi) = (0.0, (total_b / cap).sqrt());
        while hi - lo > 1e-15 * hi && iterations < opts.max_dual_iters {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if power(mid) > cap {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        hi
    };
    let mut w: Vec<CVec> = spectra
        .iter()
        .map(|(eig, c)| {
            let scaled = CVec::from_iterator(
                c.len(),
                c.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(c, l)| if l + mu > 0.0 { c / (l + mu) } else { Complex64::from(0.0) }),
            );
            &eig.eigenvectors * scaled
        })
        .collect();
    let p: f64 = w.iter().map(|w| w.norm_squared()).sum();
    if p > cap {
        let s = Complex64::from((cap / p).sqrt());
        for v in &mut w {
            *v *= s;
        }
    }
    let primal = problem.objective(&w);
    let dual: f64 = -problem
        .b
        .iter()
        .zip(&spectra)
        .map(|(_, (eig, c))| {
            eig.eigenvalues
                .iter()
                .zip(c.iter())
                .map(|(l, c)| ratio(c.norm_sqr(), l + mu))
                .sum::<f64>()
        })
        .sum::<f64>()
        - mu * cap;
    Ok((
        w,
        SolveDiagnostics {
            iterations,
            primal,
            dual,
            gap: primal - dual,
            max_violation: (p - cap) / cap,
        },
    ))
}

/// `num / den` with `0 / 0 = 0`.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}
