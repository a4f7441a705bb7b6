//! Sample-set generation and support projection.
//!
//! The engine consumes only the support of the samples: projecting the k
//! assignments onto a cluster or edge scope yields the relation of tuples
//! allowed to be nonzero there. Gibbs sampling serves models without
//! determinism; importance sampling (sequential proposal along the reversed
//! elimination order, rejecting zero-probability completions) serves models
//! with zeros. Support augmentation optionally re-adds every nonzero factor
//! tuple so no model factor is starved by sampling noise.

use crate::cluster::min_fill_order;
use crate::model::{evaluate_unnormalized, Assignment, GraphicalModel};
use crate::sparse::SupportRelation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rustc_hash::FxHashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("model contains determinism (zero factor entries); Gibbs sampling does not converge here, use importance sampling")]
    Determinism,
    #[error("all-zero conditional for variable {var} encountered during Gibbs sweep")]
    ZeroConditional { var: usize },
    #[error("proposal failure: {accepted} of {attempts} attempts accepted")]
    ProposalFailure { attempts: u64, accepted: u64 },
    #[error("invalid sampler configuration: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, SampleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Gibbs,
    Importance,
}

impl std::fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleMethod::Gibbs => write!(f, "gibbs"),
            SampleMethod::Importance => write!(f, "importance"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub method: SampleMethod,
    pub k: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
}

impl SamplerConfig {
    pub fn gibbs(k: usize, seed: u64) -> Self {
        SamplerConfig {
            method: SampleMethod::Gibbs,
            k,
            seed,
            burn_in: 100,
            thinning: 2,
        }
    }

    pub fn importance(k: usize, seed: u64) -> Self {
        SamplerConfig {
            method: SampleMethod::Importance,
            k,
            seed,
            burn_in: 0,
            thinning: 1,
        }
    }
}

/// k full assignments plus the generator metadata that produced them.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<Assignment>,
    pub method: SampleMethod,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
    pub attempts: u64,
    pub accepted: u64,
}

pub fn generate(model: &GraphicalModel, config: &SamplerConfig) -> Result<SampleSet> {
    match config.method {
        SampleMethod::Gibbs => gibbs_sample(model, config),
        SampleMethod::Importance => importance_sample(model, config),
    }
}

/// Gibbs sampling: full sweeps in variable order from a uniform random
/// initial state, recording every `thinning`-th sweep after burn-in.
///
/// Models with any zero factor entry are refused up front (the chain cannot
/// be relied on to mix across determinism); an all-zero conditional reached
/// through numerical underflow is still caught per sweep.
pub fn gibbs_sample(model: &GraphicalModel, config: &SamplerConfig) -> Result<SampleSet> {
    if config.k == 0 {
        return Err(SampleError::Invalid("k must be >= 1".into()));
    }
    for f in model.factors() {
        if f.values().contains(&0.0) {
            return Err(SampleError::Determinism);
        }
    }
    let n = model.n_vars();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut current: Vec<usize> = (0..n).map(|v| rng.gen_range(0..model.card(v))).collect();
    let touching: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            model
                .factors()
                .iter()
                .enumerate()
                .filter(|(_, f)| f.scope().contains(&v))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let thinning = config.thinning.max(1);

    let sweep = |current: &mut Vec<usize>, rng: &mut ChaCha12Rng| -> Result<()> {
        for v in 0..n {
            let card = model.card(v);
            let mut weights = vec![0.0; card];
            for (val, w) in weights.iter_mut().enumerate() {
                current[v] = val;
                *w = touching[v]
                    .iter()
                    .map(|&fi| model.factors()[fi].value_in(current))
                    .product();
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(SampleError::ZeroConditional { var: v });
            }
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = card - 1;
            for (val, &w) in weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    chosen = val;
                    break;
                }
            }
            current[v] = chosen;
        }
        Ok(())
    };

    for _ in 0..config.burn_in {
        sweep(&mut current, &mut rng)?;
    }
    let mut samples = Vec::with_capacity(config.k);
    while samples.len() < config.k {
        for _ in 0..thinning {
            sweep(&mut current, &mut rng)?;
        }
        samples.push(Assignment(current.clone()));
    }
    Ok(SampleSet {
        samples,
        method: SampleMethod::Gibbs,
        seed: config.seed,
        burn_in: config.burn_in,
        thinning,
        attempts: config.k as u64,
        accepted: config.k as u64,
    })
}

const PROPOSAL_WINDOW: u64 = 10_000;
const MIN_ACCEPT_RATE: f64 = 1e-4;

/// Sequential importance proposal along the reversed min-fill order: each
/// variable is drawn from the normalized product of its factors' restricted
/// slice sums; completed assignments with zero model weight are rejected and
/// redrawn. Only the accepted supports are used downstream, never weights.
pub fn importance_sample(model: &GraphicalModel, config: &SamplerConfig) -> Result<SampleSet> {
    if config.k == 0 {
        return Err(SampleError::Invalid("k must be >= 1".into()));
    }
    let n = model.n_vars();
    let mut order = min_fill_order(model).0;
    order.reverse();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(config.k);
    let mut attempts: u64 = 0;
    let mut accepted: u64 = 0;

    while samples.len() < config.k {
        attempts += 1;
        if attempts.is_multiple_of(PROPOSAL_WINDOW)
            && (accepted as f64) / (attempts as f64) < MIN_ACCEPT_RATE
        {
            return Err(SampleError::ProposalFailure { attempts, accepted });
        }
        let mut assigned = vec![false; n];
        let mut current = vec![0usize; n];
        let mut dead = false;
        for &v in &order {
            let card = model.card(v);
            let mut weights = vec![0.0; card];
            for (val, w) in weights.iter_mut().enumerate() {
                current[v] = val;
                assigned[v] = true;
                *w = model
                    .factors()
                    .iter()
                    .filter(|f| f.scope().contains(&v))
                    .map(|f| restricted_slice_sum(f, &current, &assigned))
                    .product();
            }
            assigned[v] = false;
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                dead = true;
                break;
            }
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = card - 1;
            for (val, &w) in weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    chosen = val;
                    break;
                }
            }
            current[v] = chosen;
            assigned[v] = true;
        }
        if dead {
            continue;
        }
        let x = Assignment(current);
        if evaluate_unnormalized(model, &x) > 0.0 {
            accepted += 1;
            samples.push(x);
        }
    }
    Ok(SampleSet {
        samples,
        method: SampleMethod::Importance,
        seed: config.seed,
        burn_in: 0,
        thinning: 1,
        attempts,
        accepted,
    })
}

/// Sum of a factor over its unassigned scope variables, with assigned ones
/// fixed to the current partial state.
fn restricted_slice_sum(
    f: &crate::model::DenseFactor,
    current: &[usize],
    assigned: &[bool],
) -> f64 {
    let scope = f.scope();
    let cards = f.cards();
    let mut total = 0.0;
    let mut tuple = vec![0usize; scope.len()];
    'cells: for (idx, &v) in f.values().iter().enumerate() {
        let mut rem = idx;
        for i in (0..cards.len()).rev() {
            tuple[i] = rem % cards[i];
            rem /= cards[i];
        }
        for (i, &var) in scope.iter().enumerate() {
            if assigned[var] && tuple[i] != current[var] {
                continue 'cells;
            }
        }
        total += v;
    }
    total
}

/// Distinct restrictions of the samples to a scope.
pub fn project_samples(
    samples: &SampleSet,
    model: &GraphicalModel,
    scope: &[usize],
) -> SupportRelation {
    let cards: Vec<usize> = scope.iter().map(|&v| model.card(v)).collect();
    let mut tuples = FxHashSet::default();
    for s in &samples.samples {
        tuples.insert(scope.iter().map(|&v| s.0[v]).collect::<Vec<usize>>());
    }
    SupportRelation {
        scope: scope.to_vec(),
        cards,
        tuples,
    }
}

/// Extend a cluster support so every nonzero tuple of every assigned factor
/// appears, completed on the remaining cluster variables by each completion
/// seen in the samples (or a single all-zeros completion if there are none).
pub fn augment_support(
    support: &SupportRelation,
    model: &GraphicalModel,
    factor_idxs: &[usize],
    samples: &SampleSet,
) -> SupportRelation {
    let mut out = support.clone();
    for &fi in factor_idxs {
        let f = &model.factors()[fi];
        let rem: Vec<usize> = support
            .scope
            .iter()
            .copied()
            .filter(|v| !f.scope().contains(v))
            .collect();
        let completions: Vec<Vec<usize>> = if rem.is_empty() {
            vec![vec![]]
        } else if samples.samples.is_empty() {
            vec![vec![0; rem.len()]]
        } else {
            project_samples(samples, model, &rem).sorted_tuples()
        };
        let f_pos: Vec<usize> = f
            .scope()
            .iter()
            .map(|v| support.scope.iter().position(|s| s == v).unwrap())
            .collect();
        let rem_pos: Vec<usize> = rem
            .iter()
            .map(|v| support.scope.iter().position(|s| s == v).unwrap())
            .collect();
        for (idx, &val) in f.values().iter().enumerate() {
            if val <= 0.0 {
                continue;
            }
            let ft = f.tuple_of(idx);
            for comp in &completions {
                let mut tuple = vec![0usize; support.scope.len()];
                for (i, &p) in f_pos.iter().enumerate() {
                    tuple[p] = ft[i];
                }
                for (i, &p) in rem_pos.iter().enumerate() {
                    tuple[p] = comp[i];
                }
                out.tuples.insert(tuple);
            }
        }
    }
    out
}

/// One assignment per line, space-separated values.
pub fn dump_samples(samples: &SampleSet) -> String {
    let mut s = String::new();
    for a in &samples.samples {
        let vals: Vec<String> = a.0.iter().map(|v| v.to_string()).collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseFactor;

    fn uniform_model(n: usize) -> GraphicalModel {
        let factors = (0..n)
            .map(|v| DenseFactor::new(vec![v], vec![2], vec![1.0, 1.0]).unwrap())
            .collect();
        GraphicalModel::new(vec![2; n], factors).unwrap()
    }

    #[test]
    fn gibbs_uniform_frequencies() {
        let m = uniform_model(4);
        let s = gibbs_sample(&m, &SamplerConfig::gibbs(4096, 7)).unwrap();
        let k = s.samples.len() as f64;
        let sigma = (0.25f64 / k).sqrt();
        for v in 0..4 {
            let freq = s.samples.iter().filter(|a| a.0[v] == 0).count() as f64 / k;
            assert!(
                (freq - 0.5).abs() <= 5.0 * sigma,
                "var {v}: freq {freq} too far from 0.5"
            );
        }
    }

    #[test]
    fn gibbs_single_variable_marginal() {
        let m = GraphicalModel::new(
            vec![2],
            vec![DenseFactor::new(vec![0], vec![2], vec![9.0, 1.0]).unwrap()],
        )
        .unwrap();
        let s = gibbs_sample(&m, &SamplerConfig::gibbs(4096, 11)).unwrap();
        let k = s.samples.len() as f64;
        let freq = s.samples.iter().filter(|a| a.0[0] == 0).count() as f64 / k;
        let sigma = (0.9f64 * 0.1 / k).sqrt();
        assert!((freq - 0.9).abs() <= 5.0 * sigma, "freq {freq}");
    }

    #[test]
    fn gibbs_refuses_determinism() {
        let m = GraphicalModel::new(
            vec![2, 2],
            vec![DenseFactor::new(vec![0, 1], vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            gibbs_sample(&m, &SamplerConfig::gibbs(10, 1)),
            Err(SampleError::Determinism)
        ));
    }

    #[test]
    fn importance_accepts_everything_without_zeros() {
        let m = uniform_model(3);
        let s = importance_sample(&m, &SamplerConfig::importance(256, 3)).unwrap();
        assert_eq!(s.attempts, s.accepted);
        assert_eq!(s.samples.len(), 256);
    }

    #[test]
    fn importance_respects_parity_constraint() {
        // parity over 3 bits: allowed iff x0 ^ x1 ^ x2 == 0
        let mut vals = vec![0.0; 8];
        for (idx, slot) in vals.iter_mut().enumerate() {
            let (a, b, c) = (idx >> 2 & 1, idx >> 1 & 1, idx & 1);
            if a ^ b ^ c == 0 {
                *slot = 1.0;
            }
        }
        let parity = DenseFactor::new(vec![0, 1, 2], vec![2, 2, 2], vals).unwrap();
        let m = GraphicalModel::new(vec![2, 2, 2], vec![parity]).unwrap();
        let s = importance_sample(&m, &SamplerConfig::importance(200, 5)).unwrap();
        for a in &s.samples {
            assert_eq!(a.0[0] ^ a.0[1] ^ a.0[2], 0);
            assert!(evaluate_unnormalized(&m, a) > 0.0);
        }
    }

    #[test]
    fn importance_fails_on_impossible_model() {
        let m = GraphicalModel::new(
            vec![2],
            vec![DenseFactor::new(vec![0], vec![2], vec![0.0, 0.0]).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            importance_sample(&m, &SamplerConfig::importance(4, 9)),
            Err(SampleError::ProposalFailure { .. })
        ));
    }

    #[test]
    fn projection_running_example() {
        let m = uniform_model(3);
        let s = SampleSet {
            samples: vec![
                Assignment(vec![0, 1, 1]),
                Assignment(vec![1, 0, 0]),
                Assignment(vec![1, 0, 1]),
            ],
            method: SampleMethod::Importance,
            seed: 0,
            burn_in: 0,
            thinning: 1,
            attempts: 3,
            accepted: 3,
        };
        let p = project_samples(&s, &m, &[0, 1]);
        assert_eq!(p.len(), 2);
        assert!(p.contains(&[0, 1]));
        assert!(p.contains(&[1, 0]));

        let full = project_samples(&s, &m, &[0, 1, 2]);
        assert_eq!(full.len(), 3);

        let one = SampleSet {
            samples: vec![Assignment(vec![1, 1, 0])],
            ..s.clone()
        };
        assert_eq!(project_samples(&one, &m, &[1, 2]).len(), 1);
    }

    #[test]
    fn projection_composes() {
        let m = uniform_model(4);
        let s = gibbs_sample(&m, &SamplerConfig::gibbs(64, 17)).unwrap();
        let big = project_samples(&s, &m, &[0, 1, 2]);
        let small_direct = project_samples(&s, &m, &[0, 1]);
        let small_via = big.project(&[0, 1]);
        assert_eq!(small_direct.tuples, small_via.tuples);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = uniform_model(5);
        let a = gibbs_sample(&m, &SamplerConfig::gibbs(50, 23)).unwrap();
        let b = gibbs_sample(&m, &SamplerConfig::gibbs(50, 23)).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = importance_sample(&m, &SamplerConfig::importance(50, 23)).unwrap();
        let d = importance_sample(&m, &SamplerConfig::importance(50, 23)).unwrap();
        assert_eq!(c.samples, d.samples);
    }

    #[test]
    fn samples_have_positive_weight() {
        let mut vals = vec![1.0; 8];
        vals[0] = 0.0;
        vals[7] = 0.0;
        let f = DenseFactor::new(vec![0, 1, 2], vec![2, 2, 2], vals).unwrap();
        let m = GraphicalModel::new(vec![2, 2, 2], vec![f]).unwrap();
        let s = importance_sample(&m, &SamplerConfig::importance(100, 29)).unwrap();
        for a in &s.samples {
            assert!(evaluate_unnormalized(&m, a) > 0.0);
        }
    }

    #[test]
    fn uniform_two_var_chi_square() {
        let m = uniform_model(4);
        let s = gibbs_sample(&m, &SamplerConfig::gibbs(1 << 14, 31)).unwrap();
        let mut counts = [0usize; 4];
        for a in &s.samples {
            counts[a.0[0] * 2 + a.0[1]] += 1;
        }
        let expect = (1 << 14) as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // df = 3; anything below 30 is far beyond any reasonable quantile
        assert!(chi2 < 30.0, "chi2 {chi2}");
    }

    #[test]
    fn augment_restores_missing_factor_tuples() {
        let f = DenseFactor::new(vec![0, 1], vec![2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let m = GraphicalModel::new(vec![2, 2], vec![f]).unwrap();
        let s = SampleSet {
            samples: vec![Assignment(vec![0, 0])],
            method: SampleMethod::Importance,
            seed: 0,
            burn_in: 0,
            thinning: 1,
            attempts: 1,
            accepted: 1,
        };
        let base = project_samples(&s, &m, &[0, 1]);
        assert_eq!(base.len(), 1);
        let aug = augment_support(&base, &m, &[0], &s);
        // every nonzero tuple of the factor is re-added
        assert_eq!(aug.len(), 4);

        // no factors assigned: unchanged
        let noop = augment_support(&base, &m, &[], &s);
        assert_eq!(noop.tuples, base.tuples);
    }

    #[test]
    fn dump_is_line_per_sample() {
        let s = SampleSet {
            samples: vec![Assignment(vec![0, 1]), Assignment(vec![1, 1])],
            method: SampleMethod::Gibbs,
            seed: 0,
            burn_in: 0,
            thinning: 1,
            attempts: 2,
            accepted: 2,
        };
        assert_eq!(dump_samples(&s), "0 1\n1 1\n");
    }
}
