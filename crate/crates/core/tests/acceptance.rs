//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing the harness capture) before asserting.

use std::io::Write as _;
use std::time::Instant;

use hcran::beamforming::{
    mse_and_equalizer, rtd_solve, solve_qcqp, MbsSubproblem, QcqpProblem, RrhSubproblem, RtdMode, RtdOptions,
    SolverOptions,
};
use hcran::channel::CVec;
use hcran::experiments::{
    build_instance, generate_instance_topology, run_mse_sweep, run_se_sweep, run_tightness, schedule, Beamformer,
    ExperimentConfig, Scheduler, Summary, Sweep, SweepParameter, SweepTable, SystemConfig,
};
use hcran::pilot::{sum_mse, PilotAssignment};
use hcran::random::{complex_gaussian, complex_gaussian_vec, rng_from_seed, split_seed, SimRng};
use hcran::rates::{
    bue_signal_and_interference, lower_bound_rates, monte_carlo_rates, rue_signal_and_interference, CMat, RateReport,
};
use hcran::scenario::{ScenarioConfig, Topology};
use num_complex::Complex64;
use rand::Rng;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    writeln!(err, "[acceptance {id}] {verdict} {name}: {detail}").unwrap();
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn scenario(num_ue: usize, num_rrh: usize, rrh_antennas: usize, mbs_antennas: usize) -> ScenarioConfig {
    ScenarioConfig {
        num_ue,
        num_rrh,
        rrh_antennas,
        mbs_antennas,
        ..ScenarioConfig::default()
    }
}

fn system(tau: usize, coherence: usize) -> SystemConfig {
    SystemConfig {
        tau,
        coherence,
        ..SystemConfig::default()
    }
}

#[test]
fn c1_scheduler_ordering() {
    let start = Instant::now();
    let sc = scenario(6, 15, 4, 10);
    let sys = system(3, 50);
    let tr = sys.training(3);
    let mse = |topo: &Topology, a: &PilotAssignment| sum_mse(topo, a, tr.pilot_power_rue, tr.pilot_power_bue, tr.noise_power).unwrap();
    let (mut es_le_psa, mut psa_sum, mut dsatur_sum) = (0, 0.0, 0.0);
    let n = 100;
    for r in 0..n {
        let seed = split_seed(11, r);
        let topo = generate_instance_topology(&sc, seed).unwrap();
        let psa = mse(&topo, &schedule(&topo, &sys, Scheduler::Psa, 3, seed).unwrap());
        let es = mse(&topo, &schedule(&topo, &sys, Scheduler::Es, 3, seed).unwrap());
        let dsatur = mse(&topo, &schedule(&topo, &sys, Scheduler::DsaturRandom, 3, seed).unwrap());
        if es <= psa * (1.0 + 1e-12) {
            es_le_psa += 1;
        }
        psa_sum += psa;
        dsatur_sum += dsatur;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = es_le_psa == n && psa_sum <= dsatur_sum && secs < 120.0;
    let detail = format!(
        "ES <= PSA on {es_le_psa}/{n}; mean PSA {:.3e} vs Dsatur-random {:.3e}; {secs:.1} s",
        psa_sum / n as f64,
        dsatur_sum / n as f64
    );
    report(1, "scheduler ordering", ok, &detail);
}

#[test]
fn c2_orthogonal_limit() {
    let sys = system(5, 50);
    let tr = sys.training(5);
    let (pr, pb, n0) = (tr.pilot_power_rue, tr.pilot_power_bue, tr.noise_power);
    let mut worst: f64 = 0.0;
    for r in 0..50 {
        let seed = split_seed(12, r);
        let sc = scenario(4 + (r as usize % 8), 25, 4, 10);
        let topo = generate_instance_topology(&sc, seed).unwrap();
        let m = topo.num_ue();
        let a = schedule(&topo, &sys, Scheduler::Psa, m, seed).unwrap();
        let got = sum_mse(&topo, &a, pr, pb, n0).unwrap();
        let mut expect = 0.0;
        for &i in &topo.rues {
            for &k in &topo.serving_rrhs[i] {
                let alpha = topo.alpha_rrh[k][i];
                expect += topo.rrh_antennas as f64 * alpha * n0 / (pr * alpha + n0);
            }
        }
        for &j in &topo.bues {
            let alpha = topo.alpha_mbs[j];
            expect += topo.mbs_antennas as f64 * alpha * n0 / (pb * alpha + n0);
        }
        worst = worst.max((got - expect).abs() / expect);
    }
    report(2, "orthogonal limit", worst <= 1e-10, &format!("max relative deviation {worst:.2e} over 50 layouts"));
}

#[test]
fn c3_jensen_validity() {
    let sc = scenario(10, 25, 4, 10);
    let sys = system(5, 50);
    let (mut violations, mut ues) = (0, 0);
    for r in 0..50 {
        let seed = split_seed(13, r);
        let inst = build_instance(&sc, &sys, Scheduler::Psa, seed).unwrap();
        let (w, _) = rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &RtdOptions::default()).unwrap();
        let noise = inst.training.noise_power;
        let prelog = inst.training.prelog();
        let lb = lower_bound_rates(&inst.links, &w, noise, prelog);
        let mc = monte_carlo_rates(&inst.topo, &inst.state, &w, noise, prelog, 2000, split_seed(seed, 99)).unwrap();
        let rep = RateReport::new(inst.topo.rues.clone(), inst.topo.bues.clone(), lb, mc, prelog);
        violations += rep.jensen_violations(3.0);
        ues += inst.topo.num_ue();
    }
    report(3, "Jensen validity", violations == 0, &format!("{violations} violations among {ues} UEs"));
}

#[test]
fn c4_mse_sinr_identity() {
    let mut rng = rng_from_seed(14);
    let (mut worst_identity, mut worst_log): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let d = rng.random_range(1..=16);
        let (g_var, w_var) = (10f64.powf(rng.random_range(-3.0..3.0)), 10f64.powf(rng.random_range(-3.0..3.0)));
        let g = complex_gaussian_vec(&mut rng, d, g_var);
        let w = complex_gaussian_vec(&mut rng, d, w_var);
        let j = 10f64.powf(rng.random_range(-4.0..2.0));
        let gain = g.dotc(&w);
        let sinr = gain.norm_sqr() / j;
        let (mse, _) = mse_and_equalizer(gain, j);
        worst_identity = worst_identity.max((mse * (1.0 + sinr) - 1.0).abs());
        worst_log = worst_log.max((-mse.log2() - (1.0 + sinr).log2()).abs());
    }
    // Rate equivalence on solved instances: the bound equals -prelog log2(MMSE).
    let mut worst_rate: f64 = 0.0;
    for r in 0..10 {
        let inst = build_instance(&scenario(10, 25, 4, 10), &system(5, 50), Scheduler::Psa, split_seed(15, r)).unwrap();
        let (w, _) = rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &RtdOptions::default()).unwrap();
        let noise = inst.training.noise_power;
        let prelog = inst.training.prelog();
        let lb = lower_bound_rates(&inst.links, &w, noise, prelog);
        for (rr, rate) in lb.rue.iter().enumerate() {
            let (_, j) = rue_signal_and_interference(&inst.links, &w, rr, noise);
            let (mse, _) = mse_and_equalizer(inst.links.g_hat[rr].dotc(&w.rue[rr]), j);
            worst_rate = worst_rate.max((rate + prelog * mse.log2()).abs());
        }
        for (b, rate) in lb.bue.iter().enumerate() {
            let (_, j) = bue_signal_and_interference(&inst.links, &w, b, noise);
            let (mse, _) = mse_and_equalizer(inst.links.h_hat_b[b].dotc(&w.bue[b]), j);
            worst_rate = worst_rate.max((rate + prelog * mse.log2()).abs());
        }
    }
    let ok = worst_identity <= 1e-10 && worst_log <= 1e-9 && worst_rate <= 1e-9;
    report(
        4,
        "MSE/SINR identity",
        ok,
        &format!(
            "max |MSE(1+SINR)-1| {worst_identity:.2e}; max log mismatch {worst_log:.2e}; \
             max rate mismatch {worst_rate:.2e}"
        ),
    );
}

#[test]
fn c5_rtd_monotone_and_fast() {
    let start = Instant::now();
    let sys = system(5, 50);
    let mut iterations = Vec::new();
    let (mut increases, mut converged_30) = (0, 0);
    let mut worst_rise: f64 = 0.0;
    for r in 0..50u64 {
        let k = [20, 25, 30][r as usize % 3];
        let inst = build_instance(&scenario(10, k, 4, 10), &sys, Scheduler::Psa, split_seed(16, r)).unwrap();
        let (_, st) = rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &RtdOptions::default()).unwrap();
        for pair in st.objective.windows(2) {
            let rise = pair[1] - pair[0];
            worst_rise = worst_rise.max(rise);
            if rise > 1e-9 {
                increases += 1;
            }
        }
        if st.converged && st.iterations <= 30 {
            converged_30 += 1;
        }
        iterations.push(st.iterations);
    }
    iterations.sort_unstable();
    let median = (iterations[24] + iterations[25]) as f64 / 2.0;
    let secs = start.elapsed().as_secs_f64();
    let ok = increases == 0 && converged_30 >= 48 && median <= 10.0 && secs < 600.0;
    let detail = format!(
        "{increases} objective increases (largest {worst_rise:.1e}); converged within 30 on {converged_30}/50; \
         median {median} iterations, max {}; {secs:.1} s",
        iterations[49]
    );
    report(5, "RTD monotonicity and convergence", ok, &detail);
}

/// Hermitian PD matrix with eigenvalues spread over a random condition number up to 1e3.
fn random_pd(rng: &mut SimRng, d: usize, scale: f64) -> CMat {
    let cond = 10f64.powf(rng.random_range(0.0..3.0));
    let x = CMat::from_fn(d, d, |_, _| complex_gaussian(rng, 1.0));
    let q = x.qr().q();
    let eig = CMat::from_diagonal(&CVec::from_fn(d, |i, _| {
        Complex64::from(scale * cond.powf(i as f64 / (d.max(2) - 1) as f64))
    }));
    let m = &q * eig * q.adjoint();
    (&m + m.adjoint()) * Complex64::from(0.5)
}

/// A coupled RRH problem of total dimension at most 64 and an MBS problem.
fn random_qcqp(rng: &mut SimRng) -> QcqpProblem {
    let num_rrh = rng.random_range(2..=5);
    let n = rng.random_range(1..=4);
    let num_ue = rng.random_range(2..=6);
    let mut blocks = Vec::new();
    let mut dim = 0;
    for _ in 0..num_ue {
        let size = rng.random_range(1..=num_rrh.min(3));
        if dim + size * n > 64 {
            break;
        }
        let mut set: Vec<usize> = (0..num_rrh).collect();
        for i in 0..size {
            let j = rng.random_range(i..num_rrh);
            set.swap(i, j);
        }
        set.truncate(size);
        set.sort_unstable();
        dim += size * n;
        blocks.push(set);
    }
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let f = blocks
        .iter()
        .map(|s| random_pd(rng, s.len() * n, scale))
        .collect();
    let b = blocks.iter().map(|s| complex_gaussian_vec(rng, s.len() * n, scale * scale)).collect();
    let budgets = (0..num_rrh).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect();
    let nb = rng.random_range(1..=3);
    let bdim = rng.random_range(2..=8);
    let mbs = MbsSubproblem {
        f: (0..nb).map(|_| random_pd(rng, bdim, scale)).collect(),
        b: (0..nb).map(|_| complex_gaussian_vec(rng, bdim, scale * scale)).collect(),
        budget: 10f64.powf(rng.random_range(-2.0..1.0)),
    };
    QcqpProblem {
        rrh: RrhSubproblem {
            f,
            b,
            blocks,
            block_dim: n,
            budgets,
        },
        mbs,
    }
}

fn objective(f: &[CMat], b: &[CVec], w: &[CVec]) -> f64 {
    f.iter()
        .zip(b)
        .zip(w)
        .map(|((f, b), w)| (w.adjoint() * f * w)[(0, 0)].re - 2.0 * b.dotc(w).re)
        .sum()
}

/// Per-constraint powers: `groups[c]` lists `(ue, offset)` pairs of length-`n` segments.
fn powers(w: &[CVec], groups: &[Vec<(usize, usize)>], n: usize) -> Vec<f64> {
    groups
        .iter()
        .map(|g| g.iter().map(|&(u, off)| w[u].rows(off, n).norm_squared()).sum())
        .collect()
}

/// Long-run accelerated projected gradient on the primal, with restarts.
fn fista(f: &[CMat], b: &[CVec], groups: &[Vec<(usize, usize)>], seg: usize, budgets: &[f64]) -> Vec<CVec> {
    let lmax = f.iter().map(|m| m.clone().symmetric_eigen().eigenvalues.max()).fold(0.0, f64::max);
    let step = Complex64::from(1.0 / lmax);
    let project = |w: &mut Vec<CVec>| {
        let p = powers(w, groups, seg);
        for (c, g) in groups.iter().enumerate() {
            if p[c] > budgets[c] {
                let s = Complex64::from((budgets[c] / p[c]).sqrt());
                for &(u, off) in g {
                    let mut view = w[u].rows_mut(off, seg);
                    view *= s;
                }
            }
        }
    };
    let mut x: Vec<CVec> = b.iter().map(|v| CVec::zeros(v.len())).collect();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut last = 0.0;
    for _ in 0..40_000 {
        let mut next: Vec<CVec> = y.iter().zip(f).zip(b).map(|((y, f), b)| y - (f * y - b) * step).collect();
        project(&mut next);
        let val = objective(f, b, &next);
        if val > last {
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = Complex64::from((t - 1.0) / t_next);
        y = next.iter().zip(&x).map(|(n, o)| n + (n - o) * mom).collect();
        x = next;
        t = t_next;
        last = val;
    }
    x
}

#[test]
fn c6_solver_matches_primal_oracle() {
    let mut rng = rng_from_seed(17);
    let opts = SolverOptions::default();
    let (mut worst_obj, mut worst_feas): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for _ in 0..200 {
        let p = random_qcqp(&mut rng);
        let Ok((w, _)) = solve_qcqp(&p, &opts) else {
            failures += 1;
            continue;
        };
        let n = p.rrh.block_dim;
        let mut groups = vec![Vec::new(); p.rrh.budgets.len()];
        for (u, set) in p.rrh.blocks.iter().enumerate() {
            for (s, &k) in set.iter().enumerate() {
                groups[k].push((u, s * n));
            }
        }
        let oracle = fista(&p.rrh.f, &p.rrh.b, &groups, n, &p.rrh.budgets);
        let (got, want) = (objective(&p.rrh.f, &p.rrh.b, &w.rue), objective(&p.rrh.f, &p.rrh.b, &oracle));
        worst_obj = worst_obj.max((got - want).abs() / want.abs().max(1e-300));
        for (c, pw) in powers(&w.rue, &groups, n).iter().enumerate() {
            if !groups[c].is_empty() {
                worst_feas = worst_feas.max(pw / p.rrh.budgets[c] - 1.0);
            }
        }

        let bdim = p.mbs.b[0].len();
        let all: Vec<(usize, usize)> = (0..p.mbs.b.len()).map(|j| (j, 0)).collect();
        let oracle = fista(&p.mbs.f, &p.mbs.b, std::slice::from_ref(&all), bdim, &[p.mbs.budget]);
        let (got, want) = (objective(&p.mbs.f, &p.mbs.b, &w.bue), objective(&p.mbs.f, &p.mbs.b, &oracle));
        worst_obj = worst_obj.max((got - want).abs() / want.abs().max(1e-300));
        worst_feas = worst_feas.max(powers(&w.bue, &[all], bdim)[0] / p.mbs.budget - 1.0);
    }
    let ok = failures == 0 && worst_obj <= 1e-4 && worst_feas <= 1e-6;
    let detail =
        format!("{failures} solver errors; max relative objective gap {worst_obj:.2e}; max relative excess power {worst_feas:.2e}");
    report(6, "solver correctness", ok, &detail);
}

#[test]
fn c7_distributed_equals_centralized() {
    let mut worst: f64 = 0.0;
    let mut len_mismatch = 0;
    for r in 0..20 {
        let inst = build_instance(&scenario(10, 25, 4, 10), &system(5, 50), Scheduler::Psa, split_seed(18, r)).unwrap();
        let run = |mode| {
            let opts = RtdOptions {
                mode,
                record_iterates: true,
                ..RtdOptions::default()
            };
            rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &opts).unwrap().1
        };
        let (c, d) = (run(RtdMode::Centralized), run(RtdMode::Distributed));
        if c.history.len() != d.history.len() {
            len_mismatch += 1;
        }
        for (a, b) in c.history.iter().zip(&d.history) {
            worst = worst.max(a.squared_distance(b).sqrt());
        }
    }
    let ok = len_mismatch == 0 && worst <= 1e-8;
    report(
        7,
        "distributed equivalence",
        ok,
        &format!("{len_mismatch} trace length mismatches; max per-iteration distance {worst:.2e}"),
    );
}

fn trend_config(parameter: SweepParameter, values: &[f64], sc: ScenarioConfig, sys: SystemConfig) -> ExperimentConfig {
    ExperimentConfig {
        scenario: sc,
        system: sys,
        sweep: Sweep {
            parameter,
            values: values.to_vec(),
        },
        num_realizations: 100,
        schedulers: vec![Scheduler::Psa],
        beamformers: vec![Beamformer::Rtd],
        mc_trials: 0,
        master_seed: 19,
        ..ExperimentConfig::default()
    }
}

/// `b` is not below `a` beyond two combined standard errors.
fn not_below(a: Summary, b: Summary) -> bool {
    b.mean >= a.mean - 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn non_decreasing(series: &[(f64, Summary)]) -> bool {
    series.windows(2).all(|p| not_below(p[0].1, p[1].1))
}

fn fmt_series(series: &[(f64, Summary)]) -> String {
    let parts: Vec<String> = series.iter().map(|(v, s)| format!("{v}:{:.2}", s.mean)).collect();
    parts.join(" ")
}

fn unimodal_with_min_at_end(series: &[(f64, Summary)]) -> bool {
    let last = series.len() - 1;
    let peak = (1..last).max_by(|&a, &b| series[a].1.mean.total_cmp(&series[b].1.mean)).unwrap();
    let interior_peak = series[peak].1.mean > series[0].1.mean.max(series[last].1.mean);
    let rising = series[..=peak].windows(2).all(|p| not_below(p[0].1, p[1].1));
    let falling = series[peak..].windows(2).all(|p| not_below(p[1].1, p[0].1));
    let min_at_end = series.iter().all(|(_, s)| series[last].1.mean <= s.mean);
    interior_peak && rising && falling && min_at_end
}

#[test]
fn c8_trends() {
    let mut checks = Vec::new();
    let mut details = Vec::new();
    // The whole pilot-length axis: requests below the feasible minimum are
    // clamped to it, so the left endpoint is the shortest usable pilot.
    let taus: Vec<f64> = (1..=15).map(f64::from).collect();
    for coherence in [30, 50] {
        let cfg = trend_config(SweepParameter::Tau, &taus, scenario(15, 25, 4, 16), system(5, coherence));
        let s = run_se_sweep(&cfg).unwrap().table.series("sum_se_lb_psa_rtd");
        checks.push(unimodal_with_min_at_end(&s));
        details.push(format!("tau (T={coherence}) [{}]", fmt_series(&s)));
    }
    let base = scenario(10, 25, 4, 10);
    let sweeps = [
        (SweepParameter::NumRrh, vec![10.0, 15.0, 20.0, 25.0], "sum_se_lb_psa_rtd", "K"),
        (SweepParameter::RrhAntennas, vec![2.0, 4.0, 8.0], "sum_se_lb_rue_psa_rtd", "N (RUEs)"),
        (SweepParameter::MbsAntennas, vec![4.0, 8.0, 16.0], "sum_se_lb_bue_psa_rtd", "B (BUEs)"),
    ];
    for (param, values, metric, label) in sweeps {
        let table = run_se_sweep(&trend_config(param, &values, base.clone(), system(5, 50))).unwrap().table;
        let mut metrics = vec![metric, "sum_se_lb_psa_rtd"];
        metrics.dedup();
        for m in metrics {
            let s = table.series(m);
            checks.push(non_decreasing(&s));
            details.push(format!("{label} {m} [{}]", fmt_series(&s)));
        }
    }
    let cfg = trend_config(SweepParameter::NumUe, &[4.0, 6.0, 8.0, 10.0, 12.0], base, system(5, 50));
    let s = run_mse_sweep(&cfg).unwrap().series("sum_mse_psa");
    checks.push(s.windows(2).all(|p| p[1].1.mean > p[0].1.mean));
    let parts: Vec<String> = s.iter().map(|(v, x)| format!("{v}:{:.2e}", x.mean)).collect();
    details.push(format!("M sum_mse [{}]", parts.join(" ")));
    let ok = checks.iter().all(|&c| c);
    report(8, "trend suite", ok, &format!("{checks:?}; {}", details.join("; ")));
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        sweep: Sweep {
            parameter: SweepParameter::NumRrh,
            values: vec![10.0, 20.0],
        },
        scenario: scenario(8, 20, 2, 6),
        num_realizations: 6,
        schedulers: vec![Scheduler::Psa, Scheduler::DsaturRandom],
        beamformers: vec![Beamformer::Rtd, Beamformer::PerfectCsi, Beamformer::None],
        mc_trials: 50,
        master_seed: 20,
        ..ExperimentConfig::default()
    }
}

#[test]
fn c9_reproducible_csv() {
    let cfg = small_config();
    let mut mse_cfg = cfg.clone();
    mse_cfg.sweep = Sweep {
        parameter: SweepParameter::Tau,
        values: vec![3.0, 5.0],
    };
    mse_cfg.schedulers.push(Scheduler::Es);
    let runs = || -> Vec<String> {
        let se = run_se_sweep(&cfg).unwrap();
        vec![
            se.table.to_csv(),
            se.traces_csv(),
            run_tightness(&cfg).unwrap().to_csv(),
            run_mse_sweep(&mse_cfg).unwrap().to_csv(),
        ]
    };
    let (a, b) = (runs(), runs());
    let single_thread = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(runs);
    let identical = a == b && a == single_thread;
    let lines: usize = a.iter().map(|s| s.lines().count()).sum();
    let non_trivial = a.iter().all(|s| s.lines().count() > 1) && a[0].starts_with(SweepTable::HEADER);
    report(
        9,
        "reproducibility",
        identical && non_trivial,
        &format!("identical: {identical}; {lines} CSV lines compared across reruns and thread counts"),
    );
}
