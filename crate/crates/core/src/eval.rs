//! Accuracy metrics, parameter sweeps, and benchmark model generators.
//!
//! Accuracy is the average KL divergence between exact and approximate
//! single-variable marginals. The mean squared error of any scalar estimate
//! across sample sets decomposes exactly into squared bias plus variance,
//! and the sweep harness records both raw runs and per-point summaries as
//! CSV so the trade-off curves can be plotted by anything downstream.

use crate::cluster::JoinGraphParams;
use crate::engine::{run_algorithm_1, EngineConfig, ReprKind, Schedule};
use crate::exact::ExactResult;
use crate::model::{kl_divergence, DenseFactor, GraphicalModel};
use crate::sample::{SampleMethod, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bias/variance needs at least 2 records, got {0}")]
    NotEnoughRecords(usize),
    #[error("marginal sets have different variable counts: {0} vs {1}")]
    VariableMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Mean over variables of KL(exact_i || approx_i); any infinite term makes
/// the whole average the +infinity marker.
pub fn avg_kl(approx: &[Vec<f64>], exact: &[Vec<f64>]) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(EvalError::VariableMismatch(exact.len(), approx.len()));
    }
    let mut total = 0.0;
    for (a, e) in approx.iter().zip(exact) {
        let card = e.len();
        let p = DenseFactor::new(vec![0], vec![card], e.clone()).expect("exact marginal");
        let q = DenseFactor::new(vec![0], vec![card], a.clone()).expect("approx marginal");
        let kl = kl_divergence(&p, &q).expect("same scope by construction");
        if kl.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += kl;
    }
    Ok(total / approx.len() as f64)
}

/// The harness's canonical scalar estimand: the per-variable probability of
/// value 0, averaged over variables.
pub fn canonical_estimand(marginals: &[Vec<f64>]) -> f64 {
    let s: f64 = marginals.iter().map(|m| m[0]).sum();
    s / marginals.len() as f64
}

///(mse, bias^2, variance) of the estimates against the exact value; the
/// decomposition mse = bias^2 + variance holds exactly.
pub fn bias_variance(estimates: &[f64], exact: f64) -> Result<(f64, f64, f64)> {
    if estimates.len() < 2 {
        return Err(EvalError::NotEnoughRecords(estimates.len()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let mse = estimates.iter().map(|h| (h - exact).powi(2)).sum::<f64>() / n;
    let bias_sq = (mean - exact).powi(2);
    let variance = estimates.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / n;
    Ok((mse, bias_sq, variance))
}

/// One inference run's parameters and accuracy, one CSV row.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    pub repr: ReprKind,
    pub i_bound: usize,
    /// 0 means lossless (no sampling).
    pub k: usize,
    pub epsilon: f64,
    pub schedule: Schedule,
    pub iterations: usize,
    pub converged: bool,
    pub avg_kl: f64,
    pub wall_ms: u64,
    /// Canonical scalar estimand of the run (not part of the CSV schema).
    pub estimand: f64,
}

#[derive(Debug, Clone)]
pub enum SweepAxis {
    K(Vec<usize>),
    Epsilon(Vec<f64>),
    IBound(Vec<usize>),
    /// Time points in milliseconds; runs the k x epsilon grid and the
    /// envelope is computed against these points.
    Time(Vec<u64>),
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Repetitions per axis point, each with a fresh sampler seed.
    pub reps: usize,
    /// Wall-clock budget per run in milliseconds.
    pub run_budget_ms: u64,
    pub repr: ReprKind,
    pub i_bound: usize,
    pub k: usize,
    pub epsilon: f64,
    pub schedule: Schedule,
    pub method: SampleMethod,
    pub base_seed: u64,
    pub augment_support: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Grid explored by the time axis.
    pub time_grid_k: Vec<usize>,
    pub time_grid_epsilon: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis) -> Self {
        SweepSpec {
            axis,
            reps: 10,
            run_budget_ms: 30_000,
            repr: ReprKind::Sparse,
            i_bound: 6,
            k: 512,
            epsilon: 0.0,
            schedule: Schedule::SumProduct,
            method: SampleMethod::Gibbs,
            base_seed: 1,
            augment_support: true,
            max_iterations: 100,
            tolerance: 1e-6,
            time_grid_k: vec![32, 256, 2048],
            time_grid_epsilon: vec![2f64.powi(-20), 2f64.powi(-40)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointSummary {
    pub axis_value: f64,
    pub mean_avg_kl: f64,
    pub sd_avg_kl: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<PointSummary>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, point: usize, rep: usize) -> u64 {
    splitmix(base ^ splitmix((point as u64) << 32 | rep as u64))
}

struct Job {
    run_id: u64,
    point: usize,
    i_bound: usize,
    k: usize,
    epsilon: f64,
    seed: u64,
}

/// Run the sweep, one record per (axis value, repetition), never aborting:
/// failed runs become flagged rows with infinite divergence. `threads > 1`
/// runs points concurrently; records come back in deterministic order.
pub fn run_sweep(
    model: &GraphicalModel,
    exact: &ExactResult,
    spec: &SweepSpec,
    threads: usize,
) -> SweepResult {
    let mut jobs = Vec::new();
    let mut point_values: Vec<f64> = Vec::new();
    match &spec.axis {
        SweepAxis::K(ks) => {
            for (pi, &k) in ks.iter().enumerate() {
                point_values.push(k as f64);
                for rep in 0..spec.reps {
                    jobs.push(Job {
                        run_id: jobs.len() as u64,
                        point: pi,
                        i_bound: spec.i_bound,
                        k,
                        epsilon: spec.epsilon,
                        seed: derive_seed(spec.base_seed, pi, rep),
                    });
                }
            }
        }
        SweepAxis::Epsilon(es) => {
            for (pi, &eps) in es.iter().enumerate() {
                point_values.push(eps);
                for rep in 0..spec.reps {
                    jobs.push(Job {
                        run_id: jobs.len() as u64,
                        point: pi,
                        i_bound: spec.i_bound,
                        k: spec.k,
                        epsilon: eps,
                        seed: derive_seed(spec.base_seed, pi, rep),
                    });
                }
            }
        }
        SweepAxis::IBound(ibs) => {
            for (pi, &ib) in ibs.iter().enumerate() {
                point_values.push(ib as f64);
                for rep in 0..spec.reps {
                    jobs.push(Job {
                        run_id: jobs.len() as u64,
                        point: pi,
                        i_bound: ib,
                        k: spec.k,
                        epsilon: spec.epsilon,
                        seed: derive_seed(spec.base_seed, pi, rep),
                    });
                }
            }
        }
        SweepAxis::Time(_) => {
            let mut pi = 0;
            for &k in &spec.time_grid_k {
                for &eps in &spec.time_grid_epsilon {
                    point_values.push(k as f64);
                    for rep in 0..spec.reps {
                        jobs.push(Job {
                            run_id: jobs.len() as u64,
                            point: pi,
                            i_bound: spec.i_bound,
                            k,
                            epsilon: eps,
                            seed: derive_seed(spec.base_seed, pi, rep),
                        });
                    }
                    pi += 1;
                }
            }
        }
    }

    let slots: Mutex<Vec<Option<RunRecord>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = threads.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= jobs.len() {
                    break;
                }
                let rec = run_one(model, exact, spec, &jobs[j]);
                slots.lock().unwrap()[j] = Some(rec);
            });
        }
    });
    let records: Vec<RunRecord> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("job completed"))
        .collect();

    // per-point mean and sd over the repetitions
    let mut summary = Vec::new();
    if !matches!(spec.axis, SweepAxis::Time(_)) {
        for (pi, &val) in point_values.iter().enumerate() {
            let kls: Vec<f64> = records
                .iter()
                .zip(&jobs)
                .filter(|(_, j)| j.point == pi)
                .map(|(r, _)| r.avg_kl)
                .collect();
            let n = kls.len();
            let (mean, sd) = if kls.iter().any(|x| x.is_infinite()) {
                (f64::INFINITY, f64::INFINITY)
            } else {
                let mean = kls.iter().sum::<f64>() / n as f64;
                let var = kls.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            };
            summary.push(PointSummary {
                axis_value: val,
                mean_avg_kl: mean,
                sd_avg_kl: sd,
                n,
            });
        }
    }
    SweepResult { records, summary }
}

fn run_one(model: &GraphicalModel, exact: &ExactResult, spec: &SweepSpec, job: &Job) -> RunRecord {
    let params = JoinGraphParams::new(job.i_bound);
    let cfg = EngineConfig {
        epsilon: job.epsilon,
        schedule: spec.schedule,
        max_iterations: spec.max_iterations,
        tolerance: spec.tolerance,
        damping: 0.0,
        augment_support: spec.augment_support,
        time_budget_ms: Some(spec.run_budget_ms),
    };
    let sampler = if job.k == 0 {
        None
    } else {
        Some(match spec.method {
            SampleMethod::Gibbs => SamplerConfig::gibbs(job.k, job.seed),
            SampleMethod::Importance => SamplerConfig::importance(job.k, job.seed),
        })
    };
    match run_algorithm_1(model, &params, sampler.as_ref(), &cfg, spec.repr) {
        Ok(out) => {
            let kl = avg_kl(&out.marginals, &exact.marginals).unwrap_or(f64::INFINITY);
            RunRecord {
                run_id: job.run_id,
                seed: job.seed,
                repr: spec.repr,
                i_bound: job.i_bound,
                k: job.k,
                epsilon: job.epsilon,
                schedule: spec.schedule,
                iterations: out.meta.iterations,
                converged: out.meta.converged,
                avg_kl: kl,
                wall_ms: out.meta.wall_ms,
                estimand: canonical_estimand(&out.marginals),
            }
        }
        Err(_) => RunRecord {
            run_id: job.run_id,
            seed: job.seed,
            repr: spec.repr,
            i_bound: job.i_bound,
            k: job.k,
            epsilon: job.epsilon,
            schedule: spec.schedule,
            iterations: 0,
            converged: false,
            avg_kl: f64::INFINITY,
            wall_ms: 0,
            estimand: f64::NAN,
        },
    }
}

pub const CSV_HEADER: &str =
    "run_id,seed,repr,i_bound,k,epsilon,schedule,iterations,converged,avg_kl,wall_ms";

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Raw records in the fixed CSV schema. `include_wall = false` zeroes the
/// wall_ms column so files are byte-identical across runs.
pub fn records_to_csv(records: &[RunRecord], include_wall: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let wall = if include_wall { r.wall_ms } else { 0 };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.repr,
            r.i_bound,
            r.k,
            fmt_f64(r.epsilon),
            r.schedule,
            r.iterations,
            r.converged,
            fmt_f64(r.avg_kl),
            wall
        ));
    }
    out
}

/// Per-point summary rows in the same column layout (run_id marks the row
/// kind, inapplicable columns are `-`).
pub fn summary_to_csv(spec: &SweepSpec, summary: &[PointSummary]) -> String {
    let mut out = String::new();
    for s in summary {
        for (tag, val) in [("mean", s.mean_avg_kl), ("sd", s.sd_avg_kl)] {
            let (ib, k, eps) = match &spec.axis {
                SweepAxis::K(_) => (
                    spec.i_bound.to_string(),
                    s.axis_value.to_string(),
                    fmt_f64(spec.epsilon),
                ),
                SweepAxis::Epsilon(_) => (
                    spec.i_bound.to_string(),
                    spec.k.to_string(),
                    fmt_f64(s.axis_value),
                ),
                SweepAxis::IBound(_) => (
                    s.axis_value.to_string(),
                    spec.k.to_string(),
                    fmt_f64(spec.epsilon),
                ),
                SweepAxis::Time(_) => ("-".into(), "-".into(), "-".into()),
            };
            out.push_str(&format!(
                "{tag}@{},-,{},{},{},{},{},-,-,{},-\n",
                s.axis_value,
                spec.repr,
                ib,
                k,
                eps,
                spec.schedule,
                fmt_f64(val)
            ));
        }
    }
    out
}

/// Lower envelope of accuracy against time: for each time point, the best
/// (smallest) avg_kl among runs that finished within the budget.
pub fn lower_envelope(records: &[RunRecord], time_points: &[u64]) -> Vec<(u64, f64, u64)> {
    let mut out = Vec::new();
    for &t in time_points {
        let best = records
            .iter()
            .filter(|r| r.wall_ms <= t && r.avg_kl.is_finite())
            .min_by(|a, b| a.avg_kl.partial_cmp(&b.avg_kl).unwrap());
        if let Some(r) = best {
            out.push((t, r.avg_kl, r.run_id));
        } else {
            out.push((t, f64::INFINITY, u64::MAX));
        }
    }
    out
}

pub fn envelope_to_csv(envelope: &[(u64, f64, u64)]) -> String {
    let mut out = String::from("time_ms,avg_kl,run_id\n");
    for (t, kl, id) in envelope {
        out.push_str(&format!("{},{},{}\n", t, fmt_f64(*kl), id));
    }
    out
}

/// Grid Ising model: one unary factor per site and one agree/disagree factor
/// per grid edge, with strictly positive potentials (no determinism).
/// Field and coupling magnitudes are drawn from `[lo, hi)` with random sign.
pub fn generate_ising(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> GraphicalModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = rows * cols;
    let at = |r: usize, c: usize| r * cols + c;
    let draw = |rng: &mut ChaCha12Rng| {
        let mag = rng.gen_range(lo..hi);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let mut factors = Vec::new();
    for v in 0..n {
        let t = draw(&mut rng);
        factors.push(DenseFactor::new(vec![v], vec![2], vec![t.exp(), (-t).exp()]).unwrap());
    }
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let w = draw(&mut rng);
                factors.push(
                    DenseFactor::new(
                        vec![at(r, c), at(r, c + 1)],
                        vec![2, 2],
                        vec![w.exp(), (-w).exp(), (-w).exp(), w.exp()],
                    )
                    .unwrap(),
                );
            }
            if r + 1 < rows {
                let w = draw(&mut rng);
                factors.push(
                    DenseFactor::new(
                        vec![at(r, c), at(r + 1, c)],
                        vec![2, 2],
                        vec![w.exp(), (-w).exp(), (-w).exp(), w.exp()],
                    )
                    .unwrap(),
                );
            }
        }
    }
    GraphicalModel::new(vec![2; n], factors).unwrap()
}

/// Satisfiable model mixing hard ternary clause constraints (planted
/// solution) with soft unary factors; has determinism but little structure.
pub fn generate_deterministic(n: usize, clause_density: f64, seed: u64) -> GraphicalModel {
    assert!(n >= 3, "need at least 3 variables for ternary clauses");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let planted: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2usize)).collect();
    let n_clauses = (clause_density * n as f64).ceil() as usize;
    let mut factors = Vec::new();
    for v in 0..n {
        let a = rng.gen_range(0.5..1.5);
        let b = rng.gen_range(0.5..1.5);
        factors.push(DenseFactor::new(vec![v], vec![2], vec![a, b]).unwrap());
    }
    for _ in 0..n_clauses {
        let mut vars: Vec<usize> = Vec::new();
        while vars.len() < 3 {
            let v = rng.gen_range(0..n);
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        // literal sign per variable: true means "satisfied by value 1"
        let mut signs: Vec<bool> = (0..3).map(|_| rng.gen_bool(0.5)).collect();
        let satisfied_by_planted = |signs: &[bool]| {
            vars.iter()
                .zip(signs)
                .any(|(&v, &s)| (planted[v] == 1) == s)
        };
        if !satisfied_by_planted(&signs) {
            let flip = rng.gen_range(0..3);
            signs[flip] = !signs[flip];
        }
        let mut values = vec![0.0; 8];
        for (idx, slot) in values.iter_mut().enumerate() {
            let bits = [idx >> 2 & 1, idx >> 1 & 1, idx & 1];
            let sat = bits.iter().zip(&signs).any(|(&b, &s)| (b == 1) == s);
            if sat {
                *slot = 1.0;
            }
        }
        factors.push(DenseFactor::new(vars, vec![2, 2, 2], values).unwrap());
    }
    let model = GraphicalModel::new(vec![2; n], factors).unwrap();
    debug_assert!(
        crate::model::evaluate_unnormalized(&model, &crate::model::Assignment(planted)) > 0.0
    );
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_marginals;
    use crate::model::{evaluate_unnormalized, Assignment};

    #[test]
    fn avg_kl_frozen_cases() {
        let exact = vec![vec![0.8, 0.2]];
        assert_eq!(avg_kl(&exact.clone(), &exact).unwrap(), 0.0);

        let approx = vec![vec![0.5, 0.5]];
        let expect = 0.8 * (0.8f64 / 0.5).ln() + 0.2 * (0.2f64 / 0.5).ln();
        assert!((avg_kl(&approx, &exact).unwrap() - expect).abs() < 1e-15);

        let bad = vec![vec![0.0, 1.0]];
        assert!(avg_kl(&bad, &exact).unwrap().is_infinite());
    }

    #[test]
    fn bias_variance_frozen_cases() {
        let (mse, b2, var) = bias_variance(&[0.5, 0.5, 0.5], 0.5).unwrap();
        assert_eq!((mse, b2, var), (0.0, 0.0, 0.0));

        let (mse, b2, var) = bias_variance(&[0.4, 0.6], 0.5).unwrap();
        assert!((mse - 0.01).abs() < 1e-15);
        assert!(b2.abs() < 1e-15);
        assert!((var - 0.01).abs() < 1e-15);

        assert!(matches!(
            bias_variance(&[0.4], 0.5),
            Err(EvalError::NotEnoughRecords(1))
        ));
    }

    #[test]
    fn bias_variance_identity_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(61);
        for _ in 0..200 {
            let n = rng.gen_range(2..20);
            let hs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = rng.gen_range(-2.0..2.0);
            let (mse, b2, var) = bias_variance(&hs, f).unwrap();
            assert!((mse - b2 - var).abs() <= 1e-12);
        }
    }

    #[test]
    fn ising_generator_shape() {
        let m = generate_ising(3, 3, 0.1, 1.0, 5);
        assert_eq!(m.n_vars(), 9);
        assert_eq!(m.factors().len(), 9 + 12);
        for f in m.factors() {
            assert!(f.values().iter().all(|&v| v > 0.0));
        }
        let m2 = generate_ising(3, 3, 0.1, 1.0, 5);
        for (a, b) in m.factors().iter().zip(m2.factors()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn deterministic_generator_is_satisfiable_with_zeros() {
        for seed in 0..10 {
            let m = generate_deterministic(12, 1.2, seed);
            let has_zeros = m.factors().iter().any(|f| f.values().contains(&0.0));
            assert!(has_zeros);
            // brute force: some assignment has positive weight
            let mut any = false;
            for x in m.assignments() {
                if evaluate_unnormalized(&m, &Assignment(x)) > 0.0 {
                    any = true;
                    break;
                }
            }
            assert!(any, "seed {seed} produced an unsatisfiable model");
        }
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let m = generate_ising(3, 3, 0.1, 0.5, 2);
        let exact = exact_marginals(&m).unwrap();
        let mut spec = SweepSpec::new(SweepAxis::K(vec![16, 64]));
        spec.reps = 3;
        spec.i_bound = 3;
        spec.epsilon = 2f64.powi(-20);
        let r1 = run_sweep(&m, &exact, &spec, 1);
        assert_eq!(r1.records.len(), 6);
        assert_eq!(r1.summary.len(), 2);
        let r2 = run_sweep(&m, &exact, &spec, 2);
        let c1 = records_to_csv(&r1.records, false);
        let c2 = records_to_csv(&r2.records, false);
        assert_eq!(c1, c2, "parallel sweep must be deterministic");
        assert!(c1.starts_with(CSV_HEADER));
    }

    #[test]
    fn sweep_lossless_point_matches_exact() {
        let m = generate_ising(2, 3, 0.1, 0.5, 3);
        let exact = exact_marginals(&m).unwrap();
        let mut spec = SweepSpec::new(SweepAxis::K(vec![0]));
        spec.reps = 2;
        spec.i_bound = 6;
        let r = run_sweep(&m, &exact, &spec, 1);
        for rec in &r.records {
            assert!(rec.avg_kl < 1e-9, "lossless run should match the oracle");
            assert!(rec.converged);
        }
    }

    #[test]
    fn envelope_is_running_minimum() {
        let mk = |id: u64, kl: f64, ms: u64| RunRecord {
            run_id: id,
            seed: 0,
            repr: ReprKind::Dense,
            i_bound: 2,
            k: 0,
            epsilon: 0.0,
            schedule: Schedule::SumProduct,
            iterations: 1,
            converged: true,
            avg_kl: kl,
            wall_ms: ms,
            estimand: 0.0,
        };
        let records = vec![mk(0, 0.5, 10), mk(1, 0.2, 50), mk(2, 0.3, 30)];
        let env = lower_envelope(&records, &[5, 10, 30, 100]);
        assert_eq!(env[0], (5, f64::INFINITY, u64::MAX));
        assert_eq!(env[1], (10, 0.5, 0));
        assert_eq!(env[2], (30, 0.3, 2));
        assert_eq!(env[3], (100, 0.2, 1));
    }

    #[test]
    fn csv_writes_literal_inf_marker() {
        let rec = RunRecord {
            run_id: 0,
            seed: 1,
            repr: ReprKind::Sparse,
            i_bound: 4,
            k: 32,
            epsilon: 0.0,
            schedule: Schedule::SumProduct,
            iterations: 0,
            converged: false,
            avg_kl: f64::INFINITY,
            wall_ms: 5,
            estimand: f64::NAN,
        };
        let csv = records_to_csv(&[rec], false);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains(",inf,"), "row was `{row}`");
        assert!(row.ends_with(",0"), "wall_ms must be zeroed: `{row}`");
    }

    #[test]
    fn epsilon_sweep_minimum_is_not_at_the_largest_bound() {
        // coarse quantization must eventually hurt: over an ascending
        // epsilon grid the best accuracy sits strictly before the largest
        let m = generate_ising(4, 4, 0.2, 0.8, 31);
        let exact = exact_marginals(&m).unwrap();
        let eps: Vec<f64> = vec![2f64.powi(-20), 2f64.powi(-10), 2f64.powi(-4), 0.25];
        let mut spec = SweepSpec::new(SweepAxis::Epsilon(eps.clone()));
        spec.reps = 5;
        spec.i_bound = 4;
        spec.k = 128;
        let r = run_sweep(&m, &exact, &spec, 2);
        let means: Vec<f64> = r.summary.iter().map(|s| s.mean_avg_kl).collect();
        let argmin = means
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            argmin < means.len() - 1,
            "accuracy should degrade at the coarsest bound: {means:?}"
        );
    }

    #[test]
    fn lossless_bias_non_increasing_in_ibound() {
        // asymptotic-bias side of the cluster-size trade-off: with S = none
        // (the infinite-sample surrogate) larger i-bounds can only help on
        // models reducible to a tree at the top i-bound
        for seed in [11, 12, 13] {
            let m = generate_ising(3, 3, 0.2, 0.8, seed);
            let exact = exact_marginals(&m).unwrap();
            let mut kls = Vec::new();
            for ib in [2, 4, 6] {
                let mut spec = SweepSpec::new(SweepAxis::K(vec![0]));
                spec.reps = 1;
                spec.i_bound = ib;
                let r = run_sweep(&m, &exact, &spec, 1);
                kls.push(r.records[0].avg_kl);
            }
            assert!(
                kls[2] <= kls[0] + 1e-9,
                "seed {seed}: bias grew from i=2 ({}) to i=6 ({})",
                kls[0],
                kls[2]
            );
        }
    }

    #[test]
    fn variance_grows_with_ibound_on_average() {
        // variance side of the trade-off: same sample sizes, bigger clusters
        let mut var_small_total = 0.0;
        let mut var_large_total = 0.0;
        for seed in [21, 22, 23] {
            let m = generate_ising(3, 3, 0.2, 0.8, seed);
            let exact = exact_marginals(&m).unwrap();
            for (ib, total) in [(2usize, &mut var_small_total), (5, &mut var_large_total)] {
                let mut spec = SweepSpec::new(SweepAxis::K(vec![24]));
                spec.reps = 12;
                spec.i_bound = ib;
                spec.epsilon = 2f64.powi(-20);
                let r = run_sweep(&m, &exact, &spec, 2);
                let hs: Vec<f64> = r
                    .records
                    .iter()
                    .map(|rec| rec.estimand)
                    .filter(|h| h.is_finite())
                    .collect();
                let (_, _, var) = bias_variance(&hs, canonical_estimand(&exact.marginals)).unwrap();
                *total += var;
            }
        }
        assert!(
            var_large_total >= 0.5 * var_small_total,
            "variance collapsed unexpectedly: i=5 {var_large_total} vs i=2 {var_small_total}"
        );
    }
}
