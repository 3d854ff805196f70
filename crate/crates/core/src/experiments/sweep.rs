use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use super::config::{Beamformer, ExperimentConfig, SweepParameter};
use super::instance::{generate_instance_topology, instance_on, schedule, Instance, Scheduler, MONTE_CARLO_STREAM, SCHEDULER_STREAM};
use crate::beamforming::{rtd_solve, BeamformerSet, RtdState};
use crate::error::{Error, Result};
use crate::pilot::sum_mse;
use crate::random::split_seed;
use crate::rates::{lower_bound_rates, monte_carlo_rates, LowerBounds, RateReport};

/// Ensemble mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    /// Sample mean and `s / sqrt(n)`; the standard error of a single value is 0.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub metric: String,
    pub summary: Summary,
}

/// Rows `(sweep_value, metric, mean, stderr, n)` in sweep order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: &'static str = "sweep_value,metric,mean,stderr,n";

    pub fn get(&self, sweep_value: f64, metric: &str) -> Option<Summary> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.metric == metric)
            .map(|r| r.summary)
    }

    /// `(sweep_value, summary)` pairs of one metric.
    pub fn series(&self, metric: &str) -> Vec<(f64, Summary)> {
        self.rows.iter().filter(|r| r.metric == metric).map(|r| (r.sweep_value, r.summary)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let s = r.summary;
            writeln!(out, "{},{},{},{},{}", r.sweep_value, r.metric, s.mean, s.stderr, s.n).unwrap();
        }
        out
    }
}

/// Per-iteration ensemble mean of the RTD trace at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub sweep_value: f64,
    pub iteration: usize,
    pub objective: f64,
    pub sum_se_lb: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeSweep {
    pub table: SweepTable,
    /// Filled only for sweeps over the number of RRHs.
    pub traces: Vec<TraceRow>,
}

impl SeSweep {
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("sweep_value,iteration,objective_34,sum_se_lb\n");
        for t in &self.traces {
            writeln!(out, "{},{},{},{}", t.sweep_value, t.iteration, t.objective, t.sum_se_lb).unwrap();
        }
        out
    }
}

/// Named samples of one realization; `None` marks a value that could not be
/// computed (guard exceeded, solver failure).
type Samples = Vec<(String, Option<f64>)>;

/// Runs `body` on every realization seed in parallel and reduces in
/// realization order.
fn ensemble_point(cfg: &ExperimentConfig, value: f64, body: impl Fn(u64) -> Result<Samples> + Sync) -> Result<Vec<SweepRow>> {
    let per_realization: Vec<Samples> = (0..cfg.num_realizations as u64)
        .into_par_iter()
        .map(|r| body(split_seed(cfg.master_seed, r)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let Some(first) = per_realization.first() else {
        return Ok(rows);
    };
    for (k, (metric, _)) in first.iter().enumerate() {
        let values: Vec<Option<f64>> = per_realization.iter().map(|s| s[k].1).collect();
        if values.iter().any(Option::is_none) && metric.starts_with("sum_mse_") {
            warn!("{metric} skipped at sweep value {value}: exhaustive search guard exceeded");
            continue;
        }
        let kept: Vec<f64> = values.into_iter().flatten().collect();
        rows.push(SweepRow {
            sweep_value: value,
            metric: metric.clone(),
            summary: Summary::of(&kept),
        });
    }
    Ok(rows)
}

fn is_guard(e: &Error) -> bool {
    matches!(e, Error::SearchSpace { .. })
}

/// Mean and stderr of the channel-estimation sum MSE for every scheduler.
pub fn run_mse_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    if !matches!(cfg.sweep.parameter, SweepParameter::Tau | SweepParameter::NumUe) {
        return Err(Error::Config("mse sweeps vary tau or num_ue".into()));
    }
    let mut table = SweepTable::default();
    for &value in &cfg.sweep.values {
        let (scenario, system) = cfg.point(value)?;
        let tr = system.training(system.tau);
        let rows = ensemble_point(cfg, value, |seed| {
            let topo = generate_instance_topology(&scenario, seed)?;
            let mut out = Samples::new();
            for &s in &cfg.schedulers {
                let value = match schedule(&topo, &system, s, system.tau, split_seed(seed, SCHEDULER_STREAM)) {
                    Ok(a) => Some(sum_mse(&topo, &a, tr.pilot_power_rue, tr.pilot_power_bue, tr.noise_power)?),
                    Err(e) if is_guard(&e) => None,
                    Err(e) => return Err(e),
                };
                out.push((format!("sum_mse_{}", s.name()), value));
            }
            Ok(out)
        })?;
        table.rows.extend(rows);
    }
    Ok(table)
}

struct Evaluated {
    lb: LowerBounds,
    prelog: f64,
    beams: BeamformerSet,
    state: Option<RtdState>,
}

fn evaluate(cfg: &ExperimentConfig, inst: &Instance, beamformer: Beamformer) -> Result<Evaluated> {
    let noise = inst.training.noise_power;
    let prelog = inst.training.prelog();
    let (beams, state) = match beamformer {
        Beamformer::None => (BeamformerSet::zeros(&inst.topo), None),
        Beamformer::Rtd | Beamformer::PerfectCsi => {
            let (w, st) = rtd_solve(&inst.topo, &inst.links, &inst.training, &inst.budgets, &cfg.rtd.options())?;
            (w, Some(st))
        }
    };
    let lb = lower_bound_rates(&inst.links, &beams, noise, prelog);
    Ok(Evaluated { lb, prelog, beams, state })
}

/// A labeled scheduler/beamformer pair; `None` when the scheduler hit its guard.
type Case = (String, Option<(Instance, Beamformer)>);

/// Instances and labels for every scheduler/beamformer pair of one realization.
/// Perfect CSI does not depend on the scheduler and appears once.
fn cases(cfg: &ExperimentConfig, seed: u64, value: f64) -> Result<Vec<Case>> {
    let (scenario, system) = cfg.point(value)?;
    let topo = generate_instance_topology(&scenario, seed)?;
    let mut out = Vec::new();
    for &s in &cfg.schedulers {
        let inst = match instance_on(topo.clone(), &system, s, seed) {
            Ok(i) => Some(i),
            Err(e) if is_guard(&e) => None,
            Err(e) => return Err(e),
        };
        for &bf in cfg.beamformers.iter().filter(|&&b| b != Beamformer::PerfectCsi) {
            out.push((format!("{}_{}", s.name(), bf.name()), inst.clone().map(|i| (i, bf))));
        }
    }
    if cfg.beamformers.contains(&Beamformer::PerfectCsi) {
        let base = instance_on(topo, &system, Scheduler::Orthogonal, seed)?;
        out.push(("perfect_csi".to_string(), Some((base.perfect_csi(), Beamformer::PerfectCsi))));
    }
    Ok(out)
}

fn mc_sum(cfg: &ExperimentConfig, inst: &Instance, ev: &Evaluated, seed: u64) -> Result<Option<McSums>> {
    if cfg.mc_trials == 0 {
        return Ok(None);
    }
    let mc = monte_carlo_rates(
        &inst.topo,
        &inst.state,
        &ev.beams,
        inst.training.noise_power,
        ev.prelog,
        cfg.mc_trials,
        split_seed(seed, MONTE_CARLO_STREAM),
    )?;
    let report = RateReport::new(inst.topo.rues.clone(), inst.topo.bues.clone(), ev.lb.clone(), mc, ev.prelog);
    Ok(Some(McSums {
        rue: report.mc_rue.iter().sum(),
        bue: report.mc_bue.iter().sum(),
        violations: report.jensen_violations(3.0),
    }))
}

struct McSums {
    rue: f64,
    bue: f64,
    violations: usize,
}

/// Sum-SE lower bound (total, RUE and BUE shares), Monte Carlo sum-SE and
/// RTD failure rate for every scheduler and beamformer.
pub fn run_se_sweep(cfg: &ExperimentConfig) -> Result<SeSweep> {
    cfg.validate()?;
    let mut result = SeSweep::default();
    let trace_label = cfg.schedulers[0].name().to_string() + "_rtd";
    let want_traces = cfg.sweep.parameter == SweepParameter::NumRrh && cfg.beamformers.contains(&Beamformer::Rtd);
    for &value in &cfg.sweep.values {
        let traces = std::sync::Mutex::new(Vec::new());
        let rows = ensemble_point(cfg, value, |seed| {
            let mut out = Samples::new();
            for (label, case) in cases(cfg, seed, value)? {
                let evaluated = match &case {
                    None => None,
                    Some((inst, bf)) => match evaluate(cfg, inst, *bf) {
                        Ok(ev) => Some(ev),
                        Err(e @ Error::Rtd { .. }) => {
                            warn!("RTD failed for {label} at sweep value {value}: {e}");
                            None
                        }
                        Err(e) => return Err(e),
                    },
                };
                let failed = case.is_some() && evaluated.is_none();
                let (lb, lb_rue, lb_bue, mc) = match (&case, &evaluated) {
                    (Some((inst, _)), Some(ev)) => {
                        if want_traces && label == trace_label {
                            if let Some(st) = &ev.state {
                                traces.lock().unwrap().push((seed, st.objective.clone(), st.sum_se_lb.clone()));
                            }
                        }
                        let mc = mc_sum(cfg, inst, ev, seed)?.map(|m| m.rue + m.bue);
                        let rue: f64 = ev.lb.rue.iter().sum();
                        let bue: f64 = ev.lb.bue.iter().sum();
                        (Some(rue + bue), Some(rue), Some(bue), mc)
                    }
                    _ => (None, None, None, None),
                };
                out.push((format!("sum_se_lb_{label}"), lb));
                out.push((format!("sum_se_lb_rue_{label}"), lb_rue));
                out.push((format!("sum_se_lb_bue_{label}"), lb_bue));
                if cfg.mc_trials > 0 {
                    out.push((format!("sum_se_mc_{label}"), mc));
                }
                out.push((format!("rtd_failed_{label}"), case.as_ref().map(|_| f64::from(u8::from(failed)))));
            }
            Ok(out)
        })?;
        result.table.rows.extend(rows);
        if want_traces {
            let mut traces = traces.into_inner().unwrap();
            traces.sort_by_key(|t| t.0);
            result.traces.extend(average_traces(value, &traces));
        }
    }
    Ok(result)
}

/// Iteration-wise means; shorter traces are held at their final value.
fn average_traces(value: f64, traces: &[(u64, Vec<f64>, Vec<f64>)]) -> Vec<TraceRow> {
    let len = traces.iter().map(|t| t.1.len()).max().unwrap_or(0);
    let at = |v: &[f64], d: usize| v[d.min(v.len() - 1)];
    (0..len)
        .map(|d| {
            let n = traces.len() as f64;
            TraceRow {
                sweep_value: value,
                iteration: d,
                objective: traces.iter().map(|t| at(&t.1, d)).sum::<f64>() / n,
                sum_se_lb: traces.iter().map(|t| at(&t.2, d)).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Sums of lower bounds and Monte Carlo rates for RUEs and BUEs separately,
/// their relative gaps, and the number of UEs whose bound exceeds the
/// Monte Carlo rate by more than three standard errors.
pub fn run_tightness(cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    if cfg.mc_trials == 0 {
        return Err(Error::Config("tightness needs mc_trials >= 1".into()));
    }
    let gap = |lb: f64, mc: f64| if mc > 0.0 { (mc - lb) / mc } else { 0.0 };
    let mut table = SweepTable::default();
    for &value in &cfg.sweep.values {
        let rows = ensemble_point(cfg, value, |seed| {
            let mut out = Samples::new();
            for (label, case) in cases(cfg, seed, value)? {
                let mut vals = [None; 7];
                if let Some((inst, bf)) = &case {
                    match evaluate(cfg, inst, *bf) {
                        Ok(ev) => {
                            let mc = mc_sum(cfg, inst, &ev, seed)?.expect("mc_trials checked above");
                            let lb_rue: f64 = ev.lb.rue.iter().sum();
                            let lb_bue: f64 = ev.lb.bue.iter().sum();
                            vals = [
                                Some(lb_rue),
                                Some(mc.rue),
                                Some(gap(lb_rue, mc.rue)),
                                Some(lb_bue),
                                Some(mc.bue),
                                Some(gap(lb_bue, mc.bue)),
                                Some(mc.violations as f64),
                            ];
                        }
                        Err(e @ Error::Rtd { .. }) => warn!("RTD failed for {label} at sweep value {value}: {e}"),
                        Err(e) => return Err(e),
                    }
                }
                let names = ["lb_rue", "mc_rue", "rel_gap_rue", "lb_bue", "mc_bue", "rel_gap_bue", "violations"];
                for (name, v) in names.iter().zip(vals) {
                    out.push((format!("{name}_{label}"), v));
                }
            }
            Ok(out)
        })?;
        table.rows.extend(rows);
    }
    Ok(table)
}

/// RTD on realization `cfg.master_seed` at the first sweep value, with
/// per-UE lower bounds and Monte Carlo rates (at least one trial).
pub fn solve_one(cfg: &ExperimentConfig, scheduler: Scheduler) -> Result<(RateReport, RtdState)> {
    cfg.validate()?;
    let (scenario, system) = cfg.point(cfg.sweep.values[0])?;
    let seed = cfg.master_seed;
    let inst = super::instance::build_instance(&scenario, &system, scheduler, seed)?;
    let ev = evaluate(cfg, &inst, Beamformer::Rtd)?;
    let mc = monte_carlo_rates(
        &inst.topo,
        &inst.state,
        &ev.beams,
        inst.training.noise_power,
        ev.prelog,
        cfg.mc_trials.max(1),
        split_seed(seed, MONTE_CARLO_STREAM),
    )?;
    let report = RateReport::new(inst.topo.rues.clone(), inst.topo.bues.clone(), ev.lb, mc, ev.prelog);
    Ok((report, ev.state.expect("rtd always records a state")))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::experiments::config::Sweep;
    use crate::scenario::ScenarioConfig;

    fn mse_config(values: &[f64], schedulers: Vec<Scheduler>) -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig {
                num_ue: 6,
                num_rrh: 15,
                ..ScenarioConfig::default()
            },
            sweep: Sweep {
                parameter: SweepParameter::Tau,
                values: values.to_vec(),
            },
            num_realizations: 8,
            schedulers,
            master_seed: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn summary_of_known_samples() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.n, 4);
        assert_eq!(Summary::of(&[7.0]).stderr, 0.0);
        assert!(Summary::of(&[]).mean.is_nan());
    }

    proptest! {
        #[test]
        fn summary_ignores_realization_order(xs in prop::collection::vec(-1e3f64..1e3, 1..40), rot in 0usize..40) {
            let mut ys = xs.clone();
            ys.rotate_left(rot % xs.len());
            ys.reverse();
            let (a, b) = (Summary::of(&xs), Summary::of(&ys));
            prop_assert!((a.mean - b.mean).abs() <= 1e-9 * (1.0 + a.mean.abs()));
            prop_assert!((a.stderr - b.stderr).abs() <= 1e-9 * (1.0 + a.stderr));
            prop_assert_eq!(a.n, b.n);
        }
    }

    #[test]
    fn csv_layout() {
        let table = SweepTable {
            rows: vec![SweepRow {
                sweep_value: 5.0,
                metric: "sum_mse_psa".into(),
                summary: Summary::of(&[1.5, 2.5]),
            }],
        };
        assert_eq!(table.to_csv(), "sweep_value,metric,mean,stderr,n\n5,sum_mse_psa,2,0.5,2\n");
        assert_eq!(table.get(5.0, "sum_mse_psa").unwrap().n, 2);
        assert!(table.get(4.0, "sum_mse_psa").is_none());
    }

    #[test]
    fn orthogonal_point_is_shared_by_optimizing_schedulers() {
        let all = vec![Scheduler::Psa, Scheduler::DsaturRandom, Scheduler::Es, Scheduler::Orthogonal];
        let table = run_mse_sweep(&mse_config(&[6.0], all)).unwrap();
        let psa = table.get(6.0, "sum_mse_psa").unwrap().mean;
        for s in ["es", "orthogonal"] {
            let other = table.get(6.0, &format!("sum_mse_{s}")).unwrap().mean;
            assert!((other - psa).abs() <= 1e-12 * psa, "{s}");
        }
        // The random baseline keeps its minimum pilot count and cannot reach it.
        assert!(table.get(6.0, "sum_mse_dsatur_random").unwrap().mean >= psa);
    }

    #[test]
    fn dsatur_baseline_ignores_tau() {
        let table = run_mse_sweep(&mse_config(&[3.0, 4.0, 5.0], vec![Scheduler::DsaturRandom])).unwrap();
        let series = table.series("sum_mse_dsatur_random");
        assert_eq!(series.len(), 3);
        assert!(series.iter().all(|(_, s)| s.mean == series[0].1.mean));
    }

    #[test]
    fn exhaustive_column_dropped_past_the_guard() {
        let mut cfg = mse_config(&[5.0, 12.0], vec![Scheduler::Psa, Scheduler::Es]);
        cfg.scenario.num_ue = 12;
        cfg.scenario.num_rrh = 25;
        cfg.num_realizations = 2;
        let table = run_mse_sweep(&cfg).unwrap();
        assert!(table.get(12.0, "sum_mse_es").is_none());
        assert!(table.get(12.0, "sum_mse_psa").is_some());
    }

    #[test]
    fn mse_sweep_rejects_other_parameters() {
        let mut cfg = mse_config(&[10.0], vec![Scheduler::Psa]);
        cfg.sweep.parameter = SweepParameter::NumRrh;
        assert!(matches!(run_mse_sweep(&cfg), Err(Error::Config(_))));
    }

    fn se_config(parameter: SweepParameter, values: &[f64], beamformers: Vec<Beamformer>) -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig {
                num_ue: 6,
                num_rrh: 12,
                rrh_antennas: 2,
                mbs_antennas: 4,
                ..ScenarioConfig::default()
            },
            sweep: Sweep {
                parameter,
                values: values.to_vec(),
            },
            num_realizations: 3,
            schedulers: vec![Scheduler::Psa],
            beamformers,
            mc_trials: 40,
            master_seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_beams_give_zero_rates() {
        let cfg = se_config(SweepParameter::RrhAntennas, &[2.0], vec![Beamformer::None]);
        let table = run_tightness(&cfg).unwrap();
        assert_eq!(table.rows.len(), 7);
        for row in &table.rows {
            assert_eq!(row.summary.mean, 0.0, "{}", row.metric);
            assert_eq!(row.summary.n, 3);
        }
        let se = run_se_sweep(&cfg).unwrap();
        assert_eq!(se.table.get(2.0, "sum_se_lb_psa_none").unwrap().mean, 0.0);
        assert_eq!(se.table.get(2.0, "sum_se_mc_psa_none").unwrap().mean, 0.0);
    }

    #[test]
    fn tightness_needs_monte_carlo() {
        let mut cfg = se_config(SweepParameter::RrhAntennas, &[2.0], vec![Beamformer::Rtd]);
        cfg.mc_trials = 0;
        assert!(matches!(run_tightness(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn se_sweep_metrics_and_traces() {
        let cfg = se_config(SweepParameter::NumRrh, &[8.0, 12.0], vec![Beamformer::Rtd, Beamformer::PerfectCsi]);
        let se = run_se_sweep(&cfg).unwrap();
        for v in [8.0, 12.0] {
            let total = se.table.get(v, "sum_se_lb_psa_rtd").unwrap();
            let rue = se.table.get(v, "sum_se_lb_rue_psa_rtd").unwrap();
            let bue = se.table.get(v, "sum_se_lb_bue_psa_rtd").unwrap();
            assert!((total.mean - rue.mean - bue.mean).abs() < 1e-9 * total.mean);
            assert_eq!(se.table.get(v, "rtd_failed_psa_rtd").unwrap().mean, 0.0);
            assert!(se.table.get(v, "sum_se_lb_perfect_csi").is_some());
            let trace: Vec<&TraceRow> = se.traces.iter().filter(|t| t.sweep_value == v).collect();
            assert!(trace.len() >= 2);
            assert_eq!(trace[0].sum_se_lb, 0.0);
            assert!((trace.last().unwrap().sum_se_lb - total.mean).abs() < 1e-9 * total.mean);
        }
        assert!(se.traces_csv().starts_with("sweep_value,iteration,objective_34,sum_se_lb\n"));

        let no_traces = run_se_sweep(&se_config(SweepParameter::Tau, &[3.0], vec![Beamformer::Rtd])).unwrap();
        assert!(no_traces.traces.is_empty());
    }

    #[test]
    fn tightness_lower_bounds_stay_below_monte_carlo() {
        let mut cfg = se_config(SweepParameter::RrhAntennas, &[2.0, 4.0], vec![Beamformer::Rtd]);
        cfg.mc_trials = 400;
        let table = run_tightness(&cfg).unwrap();
        for v in [2.0, 4.0] {
            assert_eq!(table.get(v, "violations_psa_rtd").unwrap().mean, 0.0);
            for side in ["rue", "bue"] {
                let lb = table.get(v, &format!("lb_{side}_psa_rtd")).unwrap();
                let mc = table.get(v, &format!("mc_{side}_psa_rtd")).unwrap();
                assert!(lb.mean <= mc.mean + 1e-12, "{side} at {v}");
            }
        }
    }

    #[test]
    fn solve_one_reports_every_ue() {
        let cfg = se_config(SweepParameter::Tau, &[3.0], vec![Beamformer::Rtd]);
        let (report, state) = solve_one(&cfg, Scheduler::Psa).unwrap();
        assert_eq!(report.rue_ids.len() + report.bue_ids.len(), 6);
        assert!(state.converged);
        let lb: f64 = report.lb_rue.iter().chain(&report.lb_bue).sum();
        assert!((lb - state.sum_se_lb.last().unwrap()).abs() < 1e-9 * lb.max(1.0));
    }
}
