use num_complex::Complex64;
use rand::Rng;

use super::*;
use crate::channel::{draw_small_scale, estimate_channels, CVec, TrainingConfig};
use crate::error::Error;
use crate::experiments::{build_instance, Instance, Scheduler, SystemConfig};
use crate::pilot::PilotAssignment;
use crate::random::{complex_gaussian, complex_gaussian_vec, rng_from_seed, SimRng};
use crate::rates::{
    bue_signal_and_interference, lower_bound_rates, rue_signal_and_interference, AggregatedLinks, BlockCov, CMat,
};
use crate::scenario::{ScenarioConfig, Topology};

fn random_receivers(rng: &mut SimRng, nr: usize, nb: usize) -> Receivers {
    let mut c = |n: usize| (0..n).map(|_| complex_gaussian(rng, 1.0)).collect::<Vec<_>>();
    let (f_rue, f_bue) = (c(nr), c(nb));
    Receivers {
        f_rue,
        f_bue,
        u_rue: (0..nr).map(|_| rng.random_range(1.0..4.0)).collect(),
        u_bue: (0..nb).map(|_| rng.random_range(1.0..4.0)).collect(),
    }
}

fn random_beams(rng: &mut SimRng, topo: &Topology, var: f64) -> BeamformerSet {
    let mut w = BeamformerSet::zeros(topo);
    for v in w.rue.iter_mut().chain(w.bue.iter_mut()) {
        *v = complex_gaussian_vec(rng, v.len(), var);
    }
    w
}

fn small_instance(seed: u64) -> Instance {
    let scenario = ScenarioConfig {
        num_rrh: 6,
        num_ue: 8,
        ..ScenarioConfig::default()
    };
    let sys = SystemConfig {
        tau: 4,
        ..SystemConfig::default()
    };
    build_instance(&scenario, &sys, Scheduler::Psa, seed).unwrap()
}

#[test]
fn single_rue_quadratic_term() {
    let topo = Topology::from_parts(2, 2, vec![vec![0]], vec![vec![1.0]], vec![0.5]).unwrap();
    let training = TrainingConfig {
        pilot_power_rue: 1.0,
        pilot_power_bue: 1.0,
        noise_power: 0.3,
        tau: 1,
        coherence: 10,
    };
    let a = PilotAssignment::orthogonal(1);
    let state = estimate_channels(&topo, &a, &training, &draw_small_scale(&topo, 1), 2).unwrap();
    let links = AggregatedLinks::build(&topo, &state);
    let rx = Receivers {
        f_rue: vec![Complex64::new(0.3, -0.7)],
        f_bue: vec![],
        u_rue: vec![1.8],
        u_bue: vec![],
    };
    let p = assemble_qcqp(&links, &rx, &topo, &PowerBudgets::uniform(1, 1.0, 1.0));
    let g = &links.g_hat[0];
    let c = weight(1.8) * rx.f_rue[0].norm_sqr();
    let want = (g * g.adjoint() + links.e_rue[0].to_dense()) * Complex64::from(c);
    assert!((&p.rrh.f[0] - want).norm() < 1e-14);
    assert!(p.mbs.f.is_empty());
}

#[test]
fn symmetric_pair_swaps() {
    let topo = Topology::from_parts(2, 2, vec![vec![0], vec![1]], vec![vec![0.9, 0.2], vec![0.2, 0.9]], vec![0.1, 0.1])
        .unwrap();
    let mut rng = rng_from_seed(5);
    let x = complex_gaussian_vec(&mut rng, 2, 1.0);
    let y = complex_gaussian_vec(&mut rng, 2, 1.0);
    let links = |a: &CVec, b: &CVec| AggregatedLinks {
        g_hat: vec![a.clone(), b.clone()],
        e_rue: vec![BlockCov::scaled_identity(2, 0.1); 2],
        g_rue: vec![
            vec![BlockCov::empty(2), BlockCov::scaled_identity(2, 0.2)],
            vec![BlockCov::scaled_identity(2, 0.2), BlockCov::empty(2)],
        ],
        h_rue: vec![BlockCov::scaled_identity(2, 0.1); 2],
        h_hat_b: vec![],
        e_bue: vec![],
        g_bue: vec![vec![], vec![]],
        h_bue: vec![],
    };
    let rx = Receivers {
        f_rue: vec![Complex64::new(1.0, 0.5), Complex64::new(-0.2, 0.3)],
        f_bue: vec![],
        u_rue: vec![1.5, 2.5],
        u_bue: vec![],
    };
    let swapped = Receivers {
        f_rue: vec![rx.f_rue[1], rx.f_rue[0]],
        u_rue: vec![rx.u_rue[1], rx.u_rue[0]],
        ..rx.clone()
    };
    let budgets = PowerBudgets::uniform(2, 1.0, 1.0);
    let p = assemble_qcqp(&links(&x, &y), &rx, &topo, &budgets);
    let q = assemble_qcqp(&links(&y, &x), &swapped, &topo, &budgets);
    assert!((&p.rrh.f[0] - &q.rrh.f[1]).norm() < 1e-15);
    assert!((&p.rrh.f[1] - &q.rrh.f[0]).norm() < 1e-15);
    assert!((&p.rrh.b[0] - &q.rrh.b[1]).norm() < 1e-15);
}

#[test]
fn quadratic_objective_matches_weighted_mse_sum() {
    for seed in 0..5 {
        let inst = small_instance(seed);
        let mut rng = rng_from_seed(100 + seed);
        let rx = random_receivers(&mut rng, inst.topo.rues.len(), inst.topo.bues.len());
        let p = assemble_qcqp(&inst.links, &rx, &inst.topo, &inst.budgets);
        let n0 = inst.training.noise_power;
        for _ in 0..5 {
            let w = random_beams(&mut rng, &inst.topo, 0.1);
            // Σ β MSE(w, f) computed UE by UE from the interference terms.
            let mut direct = 0.0;
            for r in 0..w.rue.len() {
                let (_, j) = rue_signal_and_interference(&inst.links, &w, r, n0);
                direct += weight(rx.u_rue[r]) * mse_at(inst.links.g_hat[r].dotc(&w.rue[r]), j, rx.f_rue[r]);
            }
            for b in 0..w.bue.len() {
                let (_, j) = bue_signal_and_interference(&inst.links, &w, b, n0);
                direct += weight(rx.u_bue[b]) * mse_at(inst.links.h_hat_b[b].dotc(&w.bue[b]), j, rx.f_bue[b]);
            }
            let assembled = p.objective(&w) + dropped_constant(&rx, n0);
            assert!((assembled - direct).abs() <= 1e-10 * direct.abs().max(1.0), "{assembled} vs {direct}");
            let u_sum: f64 = rx.u_rue.iter().chain(&rx.u_bue).sum();
            let obj = weighted_mse_objective(&inst.links, &w, &rx, n0);
            assert!((obj - (direct - u_sum)).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }
}

fn identity_rrh(b: CVec, budget: f64) -> RrhSubproblem {
    let d = b.len();
    RrhSubproblem {
        f: vec![CMat::identity(d, d)],
        b: vec![b],
        blocks: vec![vec![0]],
        block_dim: d,
        budgets: vec![budget],
    }
}

#[test]
fn identity_inactive_constraint() {
    let b = CVec::from_vec(vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4), Complex64::new(0.0, 0.5)]);
    let p = 2.0 * b.norm_squared();
    let (w, _) = solve_rrh(&identity_rrh(b.clone(), p), &SolverOptions::default()).unwrap();
    assert!((&w[0] - &b).norm() < 1e-12);
    let mbs = MbsSubproblem {
        f: vec![CMat::identity(3, 3)],
        b: vec![b.clone()],
        budget: p,
    };
    let (w, _) = solve_mbs(&mbs, &SolverOptions::default()).unwrap();
    assert!((&w[0] - &b).norm() < 1e-12);
}

#[test]
fn identity_active_constraint() {
    let b = CVec::from_vec(vec![Complex64::new(1.3, 0.1), Complex64::new(-0.2, 0.4), Complex64::new(0.0, 2.5)]);
    let p = 0.25 * b.norm_squared();
    let want = &b * Complex64::from(p.sqrt() / b.norm());
    let (w, d) = solve_rrh(&identity_rrh(b.clone(), p), &SolverOptions::default()).unwrap();
    assert!((&w[0] - &want).norm() < 1e-6 * want.norm(), "{:?}", d);
    assert!(w[0].norm_squared() <= p * (1.0 + 1e-12));
    let mbs = MbsSubproblem {
        f: vec![CMat::identity(3, 3)],
        b: vec![b.clone()],
        budget: p,
    };
    let (w, _) = solve_mbs(&mbs, &SolverOptions::default()).unwrap();
    assert!((&w[0] - &want).norm() < 1e-9 * want.norm());
}

fn random_pd(rng: &mut SimRng, d: usize, cond: f64) -> CMat {
    let x = CMat::from_fn(d, d, |_, _| complex_gaussian(rng, 1.0));
    let q = x.qr().q();
    let eig = CMat::from_diagonal(&CVec::from_fn(d, |i, _| {
        Complex64::from(cond.powf(i as f64 / (d.max(2) - 1) as f64))
    }));
    let m = &q * eig * q.adjoint();
    (&m + m.adjoint()) * Complex64::from(0.5)
}

/// Accelerated projected gradient on the primal with adaptive restart.
pub(crate) fn primal_oracle(p: &RrhSubproblem, iters: usize) -> Vec<CVec> {
    let n = p.block_dim;
    let lmax = p
        .f
        .iter()
        .map(|f| f.clone().symmetric_eigen().eigenvalues.max())
        .fold(0.0, f64::max);
    let step = 1.0 / (2.0 * lmax);
    let project = |w: &mut Vec<CVec>| {
        let mut power = vec![0.0; p.budgets.len()];
        for (wi, blocks) in w.iter().zip(&p.blocks) {
            for (s, &k) in blocks.iter().enumerate() {
                power[k] += wi.rows(s * n, n).norm_squared();
            }
        }
        for (wi, blocks) in w.iter_mut().zip(&p.blocks) {
            for (s, &k) in blocks.iter().enumerate() {
                let scale = if power[k] > p.budgets[k] {
                    (p.budgets[k] / power[k]).sqrt()
                } else {
                    1.0
                };
                let mut seg = wi.rows_mut(s * n, n);
                seg *= Complex64::from(scale);
            }
        }
    };
    let mut x: Vec<CVec> = p.b.iter().map(|b| CVec::zeros(b.len())).collect();
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut last = p.objective(&x);
    for _ in 0..iters {
        let mut next: Vec<CVec> = y
            .iter()
            .zip(&p.f)
            .zip(&p.b)
            .map(|((y, f), b)| y - (f * y - b) * Complex64::from(2.0 * step))
            .collect();
        project(&mut next);
        let val = p.objective(&next);
        if val > last {
            // restart momentum
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = Complex64::from((t - 1.0) / t_next);
        y = next.iter().zip(&x).map(|(n, o)| n + (n - o) * beta).collect();
        x = next;
        t = t_next;
        last = val;
    }
    x
}

fn coupled_problem(rng: &mut SimRng) -> RrhSubproblem {
    RrhSubproblem {
        f: vec![random_pd(rng, 4, 20.0), random_pd(rng, 4, 20.0)],
        b: vec![complex_gaussian_vec(rng, 4, 4.0), complex_gaussian_vec(rng, 4, 4.0)],
        blocks: vec![vec![0, 1], vec![0, 1]],
        block_dim: 2,
        budgets: vec![0.3, 1.2],
    }
}

#[test]
fn coupled_problem_matches_primal_oracle() {
    let mut rng = rng_from_seed(8);
    for _ in 0..5 {
        let p = coupled_problem(&mut rng);
        let (w, diag) = solve_rrh(&p, &SolverOptions::default()).unwrap();
        let oracle = primal_oracle(&p, 20_000);
        let (a, b) = (p.objective(&w), p.objective(&oracle));
        assert!((a - b).abs() <= 1e-4 * b.abs(), "{a} vs {b}");
        assert!(diag.dual <= diag.primal + 1e-9 * diag.primal.abs());
        assert!(diag.gap <= 1e-5 * diag.primal.abs(), "{diag:?}");
        let mut power = [0.0; 2];
        for wi in &w {
            for k in 0..2 {
                power[k] += wi.rows(2 * k, 2).norm_squared();
            }
        }
        assert!(power[0] <= 0.3 * (1.0 + 1e-6) && power[1] <= 1.2 * (1.0 + 1e-6));
    }
}

#[test]
fn zero_budget_rrh_is_silent() {
    let mut rng = rng_from_seed(2);
    let mut p = coupled_problem(&mut rng);
    p.budgets[1] = 0.0;
    let (w, _) = solve_rrh(&p, &SolverOptions::default()).unwrap();
    for wi in &w {
        assert_eq!(wi.rows(2, 2).norm(), 0.0);
    }
}

#[test]
fn indefinite_term_is_rejected() {
    let mut p = identity_rrh(CVec::from_element(2, Complex64::from(1.0)), 1e-3);
    p.f[0][(1, 1)] = Complex64::from(-1.0);
    let res = solve_rrh(&p, &SolverOptions::default());
    // A zero quadratic term is only semidefinite and still solvable.
    let z = MbsSubproblem {
        f: vec![CMat::zeros(2, 2)],
        b: vec![CVec::from_element(2, Complex64::from(1.0))],
        budget: 2.0,
    };
    let (w, _) = solve_mbs(&z, &SolverOptions::default()).unwrap();
    assert!((w[0].norm_squared() - 2.0).abs() < 1e-9);
    assert!(matches!(res, Err(Error::NotPositiveDefinite(_))), "{res:?}");
    let mut f = CMat::identity(2, 2);
    f[(0, 0)] = Complex64::from(-0.5);
    let m = MbsSubproblem {
        f: vec![f],
        b: vec![CVec::from_element(2, Complex64::from(1.0))],
        budget: 1.0,
    };
    assert!(matches!(solve_mbs(&m, &SolverOptions::default()), Err(Error::NotPositiveDefinite(_))));
}

#[test]
fn rtd_descends_and_respects_budgets() {
    for seed in 0..3 {
        let inst = small_instance(seed);
        let (w, st) = rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &RtdOptions::default()).unwrap();
        for pair in st.objective.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{:?}", st.objective);
        }
        w.check(&inst.topo, &inst.budgets.rrh, inst.budgets.mbs, 1e-6).unwrap();
        assert!(st.converged);
        // Rate lower bounds equal −prelog·log2(MSE) at the final receivers.
        let n0 = inst.training.noise_power;
        let lb = lower_bound_rates(&inst.links, &w, n0, inst.training.prelog());
        for r in 0..w.rue.len() {
            let (_, j) = rue_signal_and_interference(&inst.links, &w, r, n0);
            let (mse, _) = mse_and_equalizer(inst.links.g_hat[r].dotc(&w.rue[r]), j);
            assert!((-inst.training.prelog() * mse.log2() - lb.rue[r]).abs() < 1e-9);
        }
        // After the u-update the objective is Σ ln MSE.
        let last = *st.objective.last().unwrap();
        let ln_sum: f64 = st.receivers.u_rue.iter().chain(&st.receivers.u_bue).map(|u| 1.0 - u).sum();
        assert!((last - ln_sum).abs() < 1e-9 * ln_sum.abs().max(1.0));
        assert!(st.sum_se_lb.last().unwrap() > &0.0);
        let csv = st.trace_csv();
        assert!(csv.starts_with("iteration,objective_34,sum_se_lb\n0,"));
    }
}

#[test]
fn distributed_matches_centralized() {
    let inst = small_instance(4);
    let run = |mode| {
        let opts = RtdOptions {
            mode,
            record_iterates: true,
            ..RtdOptions::default()
        };
        rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &opts).unwrap().1
    };
    let c = run(RtdMode::Centralized);
    let d = run(RtdMode::Distributed);
    assert_eq!(c.history.len(), d.history.len());
    for (a, b) in c.history.iter().zip(&d.history) {
        assert!(a.squared_distance(b).sqrt() <= 1e-8);
    }
}

#[test]
fn zero_budgets_stop_after_one_iteration() {
    let inst = small_instance(1);
    let budgets = PowerBudgets::uniform(inst.topo.num_rrh(), 0.0, 0.0);
    let (w, st) = rtd_solve(&inst.topo, &inst.links, &inst.training, &budgets, &RtdOptions::default()).unwrap();
    assert_eq!(st.iterations, 1);
    assert!(st.converged);
    assert_eq!(w, BeamformerSet::zeros(&inst.topo));
}
