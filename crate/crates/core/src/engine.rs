//! Structured message passing over cluster graphs.
//!
//! Every cluster and edge carries an instance of one representation kind:
//! dense table, zero-suppressed hash table, or decision diagram. Lossless
//! runs (no sample set, epsilon = 0) reproduce cluster-graph belief
//! propagation exactly in all three kinds. Lossy runs fix the supports at
//! initialization by projecting the sample set onto every cluster and edge
//! scope; each outgoing message is summed down, projected onto its edge
//! support, epsilon-quantized, and normalized before it is stored. The
//! structural zeros never move after initialization; only the value
//! structure changes per iteration.
//!
//! Two schedules are exposed: sum-product recomputes each message from the
//! vertex potential and the other incoming messages; belief-update maintains
//! vertex beliefs and divides out the previous sepset message (0/0 = 0).
//! Both iterate synchronous rounds over the directed edges in a fixed order
//! (vertex index, then neighbor index), updating in place, and stop when no
//! normalized message value moves by more than the tolerance.

use crate::add::{Add, AddManager, VarOrder};
use crate::cluster::{
    build_join_graph, min_fill_order, ClusterError, ClusterGraph, JoinGraphParams,
};
use crate::model::{DenseFactor, GraphicalModel, ModelError};
use crate::sample::{
    augment_support, generate, project_samples, SampleError, SampleSet, SamplerConfig,
};
use crate::sparse::{SparseTable, SupportRelation};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("empty belief at vertex {vertex}: the assigned-factor product is zero everywhere on its support")]
    EmptyBelief { vertex: usize },
    #[error(
        "support starvation on edge {edge} ({from} -> {to}): the projected message is all zero"
    )]
    Starvation { edge: usize, from: usize, to: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

pub type Result<T> = std::result::Result<T, EngineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReprKind {
    Dense,
    Sparse,
    Add,
}

impl std::fmt::Display for ReprKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReprKind::Dense => write!(f, "dense"),
            ReprKind::Sparse => write!(f, "sparse"),
            ReprKind::Add => write!(f, "add"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    SumProduct,
    BeliefUpdate,
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::SumProduct => write!(f, "sum-product"),
            Schedule::BeliefUpdate => write!(f, "belief-update"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Quantization bound applied to every message (0 disables).
    pub epsilon: f64,
    pub schedule: Schedule,
    pub max_iterations: usize,
    /// Convergence: max absolute change of any normalized message value.
    pub tolerance: f64,
    /// Damping on normalized messages: new = damping*old + (1-damping)*new.
    pub damping: f64,
    /// Re-add nonzero factor tuples to cluster supports (lossy runs only).
    pub augment_support: bool,
    /// Per-run wall-clock budget; propagation stops early (unconverged) when
    /// a round ends past the deadline. None disables the check.
    pub time_budget_ms: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            epsilon: 0.0,
            schedule: Schedule::SumProduct,
            max_iterations: 100,
            tolerance: 1e-6,
            damping: 0.0,
            augment_support: true,
            time_budget_ms: None,
        }
    }
}

/// A function instance in the active representation.
#[derive(Debug, Clone)]
pub enum ReprInstance {
    Dense(DenseFactor),
    Sparse(SparseTable),
    Add(Add),
}

/// A structured cluster graph: the graph, one potential instance per vertex,
/// two directed message slots per edge, and the fixed supports of lossy runs.
pub struct Scg {
    pub graph: ClusterGraph,
    kind: ReprKind,
    cards: Vec<usize>,
    mgr: Option<AddManager>,
    potentials: Vec<ReprInstance>,
    vertex_support: Vec<Option<SupportRelation>>,
    edge_support: Vec<Option<SupportRelation>>,
    /// messages[e][0] flows a -> b, messages[e][1] flows b -> a
    messages: Vec<[ReprInstance; 2]>,
    /// belief-update state
    beliefs: Vec<ReprInstance>,
    sepsets: Vec<ReprInstance>,
    schedule_used: Schedule,
}

#[derive(Debug, Clone, Copy)]
pub struct PropStats {
    pub iterations: usize,
    pub converged: bool,
    pub sends: u64,
    pub changed_sends: u64,
}

#[derive(Debug, Clone)]
pub struct RunMeta {
    pub seed: Option<u64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: u64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub marginals: Vec<Vec<f64>>,
    pub flagged: Vec<bool>,
    pub meta: RunMeta,
}

/// Build the structured cluster graph of Algorithm-style initialization:
/// project the samples onto every cluster and edge, put each factor into its
/// assigned cluster restricted to the cluster support, and set every message
/// to uniform over its support. `samples = None` runs lossless.
pub fn initialize_scg(
    model: &GraphicalModel,
    graph: ClusterGraph,
    samples: Option<&SampleSet>,
    kind: ReprKind,
    augment: bool,
) -> Result<Scg> {
    let (vsup, esup) = match samples {
        None => (None, None),
        Some(s) => {
            let mut vsup = Vec::with_capacity(graph.n_clusters());
            for (v, label) in graph.clusters.iter().enumerate() {
                let mut sup = project_samples(s, model, label);
                if augment {
                    let assigned: Vec<usize> = graph
                        .factor_home
                        .iter()
                        .enumerate()
                        .filter(|(_, &home)| home == v)
                        .map(|(fi, _)| fi)
                        .collect();
                    sup = augment_support(&sup, model, &assigned, s);
                }
                vsup.push(sup);
            }
            let mut esup = Vec::with_capacity(graph.edges.len());
            for e in &graph.edges {
                let mut sup = project_samples(s, model, &e.label);
                if augment {
                    // keep every projected vertex-support tuple representable
                    // on the edge, otherwise augmented vertex mass has no
                    // finite-divergence message
                    for side in [e.a, e.b] {
                        for t in vsup[side].project(&e.label).tuples {
                            sup.tuples.insert(t);
                        }
                    }
                }
                esup.push(sup);
            }
            (Some(vsup), Some(esup))
        }
    };
    initialize_scg_with_supports(model, graph, vsup, esup, kind)
}

/// Lower-level initialization with explicit supports (None = lossless).
pub fn initialize_scg_with_supports(
    model: &GraphicalModel,
    graph: ClusterGraph,
    vertex_support: Option<Vec<SupportRelation>>,
    edge_support: Option<Vec<SupportRelation>>,
    kind: ReprKind,
) -> Result<Scg> {
    let cards = model.cards();
    let mut mgr = match kind {
        ReprKind::Add => {
            let (order, _) = min_fill_order(model);
            Some(AddManager::new(VarOrder::new(order), cards.clone()))
        }
        _ => None,
    };

    let vsup: Vec<Option<SupportRelation>> = match vertex_support {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None; graph.n_clusters()],
    };
    let esup: Vec<Option<SupportRelation>> = match edge_support {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None; graph.edges.len()],
    };

    // vertex potentials: support indicator times assigned factors
    let mut potentials = Vec::with_capacity(graph.n_clusters());
    for (v, label) in graph.clusters.iter().enumerate() {
        let assigned: Vec<&DenseFactor> = graph
            .factor_home
            .iter()
            .enumerate()
            .filter(|(_, &home)| home == v)
            .map(|(fi, _)| &model.factors()[fi])
            .collect();
        let inst = match (&vsup[v], kind) {
            (None, ReprKind::Dense) => {
                let mut acc = DenseFactor::constant(1.0);
                for f in &assigned {
                    acc = acc.product(f);
                }
                ReprInstance::Dense(acc)
            }
            (None, ReprKind::Sparse) => {
                let mut acc = SparseTable::from_dense(&DenseFactor::constant(1.0));
                for f in &assigned {
                    acc = acc.product(&SparseTable::from_dense(f));
                }
                ReprInstance::Sparse(acc)
            }
            (None, ReprKind::Add) => {
                let m = mgr.as_mut().unwrap();
                let mut acc = m.terminal(1.0);
                for f in &assigned {
                    let fd = m.from_dense(f);
                    acc = m.product(acc, fd);
                }
                ReprInstance::Add(acc)
            }
            (Some(sup), ReprKind::Dense) => {
                let mut acc = dense_indicator(label, &cards, sup);
                for f in &assigned {
                    acc = acc.product(f);
                }
                ReprInstance::Dense(acc)
            }
            (Some(sup), ReprKind::Sparse) => {
                let mut acc = SparseTable::indicator(sup);
                for f in &assigned {
                    acc = acc.product(&SparseTable::from_dense(f));
                }
                ReprInstance::Sparse(acc)
            }
            (Some(sup), ReprKind::Add) => {
                let m = mgr.as_mut().unwrap();
                let mut acc = m.indicator(label, &sup.sorted_tuples());
                for f in &assigned {
                    let fd = m.from_dense(f);
                    acc = m.product(acc, fd);
                }
                ReprInstance::Add(acc)
            }
        };
        let positive = match &inst {
            ReprInstance::Dense(f) => f.values().iter().any(|&x| x > 0.0),
            ReprInstance::Sparse(t) => t.entry_count() > 0,
            ReprInstance::Add(d) => {
                let m = mgr.as_ref().unwrap();
                m.terminals_of(*d)
                    .iter()
                    .any(|&t| m.terminal_value(t).unwrap() > 0.0)
            }
        };
        if !positive {
            return Err(EngineError::EmptyBelief { vertex: v });
        }
        potentials.push(inst);
    }

    // messages start uniform over their support
    let mut messages = Vec::with_capacity(graph.edges.len());
    for (ei, e) in graph.edges.iter().enumerate() {
        let label = &e.label;
        let uniform = match (&esup[ei], kind) {
            (None, ReprKind::Dense) => {
                let total: usize = label.iter().map(|&v| cards[v]).product();
                ReprInstance::Dense(
                    DenseFactor::ones(label.clone(), label.iter().map(|&v| cards[v]).collect())
                        .scale(1.0 / total as f64),
                )
            }
            (None, ReprKind::Sparse) => {
                let total: usize = label.iter().map(|&v| cards[v]).product();
                let full =
                    SupportRelation::full(label.clone(), label.iter().map(|&v| cards[v]).collect());
                ReprInstance::Sparse(SparseTable::indicator(&full).scale(1.0 / total as f64))
            }
            (None, ReprKind::Add) => {
                let total: usize = label.iter().map(|&v| cards[v]).product();
                ReprInstance::Add(mgr.as_mut().unwrap().terminal(1.0 / total as f64))
            }
            (Some(sup), ReprKind::Dense) => ReprInstance::Dense(
                dense_indicator(label, &cards, sup).scale(1.0 / sup.len() as f64),
            ),
            (Some(sup), ReprKind::Sparse) => {
                ReprInstance::Sparse(SparseTable::indicator(sup).scale(1.0 / sup.len() as f64))
            }
            (Some(sup), ReprKind::Add) => {
                let m = mgr.as_mut().unwrap();
                let ind = m.indicator(label, &sup.sorted_tuples());
                let c = m.terminal(1.0 / sup.len() as f64);
                ReprInstance::Add(m.product(ind, c))
            }
        };
        messages.push([uniform.clone(), uniform]);
    }

    let beliefs = potentials.clone();
    let sepsets: Vec<ReprInstance> = messages.iter().map(|m| m[0].clone()).collect();

    Ok(Scg {
        graph,
        kind,
        cards,
        mgr,
        potentials,
        vertex_support: vsup,
        edge_support: esup,
        messages,
        beliefs,
        sepsets,
        schedule_used: Schedule::SumProduct,
    })
}

fn dense_indicator(scope: &[usize], cards: &[usize], sup: &SupportRelation) -> DenseFactor {
    let scards: Vec<usize> = scope.iter().map(|&v| cards[v]).collect();
    let len: usize = scards.iter().product();
    let mut values = vec![0.0; len];
    for t in &sup.tuples {
        let mut idx = 0;
        for (i, &val) in t.iter().enumerate() {
            idx = idx * scards[i] + val;
        }
        values[idx] = 1.0;
    }
    DenseFactor::new(scope.to_vec(), scards, values).expect("indicator construction")
}

impl Scg {
    pub fn kind(&self) -> ReprKind {
        self.kind
    }

    pub fn vertex_support(&self, v: usize) -> Option<&SupportRelation> {
        self.vertex_support[v].as_ref()
    }

    pub fn edge_support(&self, e: usize) -> Option<&SupportRelation> {
        self.edge_support[e].as_ref()
    }

    /// Dense expansion of a vertex potential over the cluster label.
    pub fn potential_dense(&mut self, v: usize) -> DenseFactor {
        let label = self.graph.clusters[v].clone();
        let inst = self.potentials[v].clone();
        self.expand_dense(&inst, &label)
    }

    /// Dense expansion of a stored directed message over the edge label.
    pub fn message_dense(&mut self, edge: usize, from: usize) -> DenseFactor {
        let e = &self.graph.edges[edge];
        let dir = usize::from(from != e.a);
        let label = e.label.clone();
        let inst = self.messages[edge][dir].clone();
        self.expand_dense(&inst, &label)
    }

    /// Dense expansion of any instance over a label scope.
    pub fn expand_instance(&mut self, inst: &ReprInstance, label: &[usize]) -> DenseFactor {
        self.expand_dense(inst, label)
    }

    fn expand_dense(&mut self, inst: &ReprInstance, label: &[usize]) -> DenseFactor {
        let lcards: Vec<usize> = label.iter().map(|&v| self.cards[v]).collect();
        match inst {
            ReprInstance::Dense(f) => f.expand_to(label, &lcards),
            ReprInstance::Sparse(t) => t.to_dense().expand_to(label, &lcards),
            ReprInstance::Add(d) => self.mgr.as_ref().unwrap().to_dense(*d, label, &lcards),
        }
    }

    fn product(&mut self, a: &ReprInstance, b: &ReprInstance) -> ReprInstance {
        match (a, b) {
            (ReprInstance::Dense(x), ReprInstance::Dense(y)) => ReprInstance::Dense(x.product(y)),
            (ReprInstance::Sparse(x), ReprInstance::Sparse(y)) => {
                ReprInstance::Sparse(x.product(y))
            }
            (ReprInstance::Add(x), ReprInstance::Add(y)) => {
                ReprInstance::Add(self.mgr.as_mut().unwrap().product(*x, *y))
            }
            _ => unreachable!("mixed representation kinds"),
        }
    }

    fn divide(&mut self, a: &ReprInstance, b: &ReprInstance) -> Result<ReprInstance> {
        Ok(match (a, b) {
            (ReprInstance::Dense(x), ReprInstance::Dense(y)) => ReprInstance::Dense(x.divide(y)?),
            (ReprInstance::Sparse(x), ReprInstance::Sparse(y)) => {
                ReprInstance::Sparse(x.divide(y)?)
            }
            (ReprInstance::Add(x), ReprInstance::Add(y)) => {
                ReprInstance::Add(self.mgr.as_mut().unwrap().divide(*x, *y)?)
            }
            _ => unreachable!("mixed representation kinds"),
        })
    }

    /// Sum an instance down to (a subset of) `label`.
    fn sum_to(&mut self, a: &ReprInstance, label: &[usize]) -> ReprInstance {
        match a {
            ReprInstance::Dense(f) => {
                let elim: Vec<usize> = f
                    .scope()
                    .iter()
                    .copied()
                    .filter(|v| !label.contains(v))
                    .collect();
                ReprInstance::Dense(f.sum_out(&elim).expect("elim within scope"))
            }
            ReprInstance::Sparse(t) => {
                let elim: Vec<usize> = t
                    .scope()
                    .iter()
                    .copied()
                    .filter(|v| !label.contains(v))
                    .collect();
                ReprInstance::Sparse(t.sum_out(&elim).expect("elim within scope"))
            }
            ReprInstance::Add(d) => {
                let m = self.mgr.as_mut().unwrap();
                let elim: Vec<usize> = m
                    .support_vars(*d)
                    .into_iter()
                    .filter(|v| !label.contains(v))
                    .collect();
                ReprInstance::Add(m.sum_out(*d, &elim))
            }
        }
    }

    /// Project onto the edge support (lossy runs only; lossless is identity).
    fn mask_edge(&mut self, a: ReprInstance, edge: usize) -> ReprInstance {
        let Some(sup) = self.edge_support[edge].clone() else {
            return a;
        };
        match a {
            ReprInstance::Dense(f) => {
                let ind = dense_indicator(&sup.scope, &self.cards, &sup);
                ReprInstance::Dense(f.product(&ind))
            }
            ReprInstance::Sparse(t) => {
                // align scope to the edge label before projecting
                let lcards: Vec<usize> = sup.scope.iter().map(|&v| self.cards[v]).collect();
                let full = t.to_dense().expand_to(&sup.scope, &lcards);
                ReprInstance::Sparse(SparseTable::from_dense(&full).lossy_project(&sup))
            }
            ReprInstance::Add(d) => {
                let m = self.mgr.as_mut().unwrap();
                let ind = m.indicator(&sup.scope, &sup.sorted_tuples());
                ReprInstance::Add(m.product(d, ind))
            }
        }
    }

    fn quantize(&mut self, a: ReprInstance, eps: f64) -> ReprInstance {
        if eps <= 0.0 {
            return a;
        }
        match a {
            ReprInstance::Dense(f) => ReprInstance::Dense(f.quantize(eps)),
            ReprInstance::Sparse(t) => ReprInstance::Sparse(t.quantize(eps)),
            ReprInstance::Add(d) => ReprInstance::Add(self.mgr.as_mut().unwrap().quantize(d, eps)),
        }
    }

    /// Total mass over the full domain of `label` (missing variables count
    /// with their cardinality).
    fn total_over(&mut self, a: &ReprInstance, label: &[usize]) -> f64 {
        match a {
            ReprInstance::Dense(f) => {
                let missing: usize = label
                    .iter()
                    .filter(|v| !f.scope().contains(v))
                    .map(|&v| self.cards[v])
                    .product();
                f.values().iter().sum::<f64>() * missing as f64
            }
            ReprInstance::Sparse(t) => {
                let missing: usize = label
                    .iter()
                    .filter(|v| !t.scope().contains(v))
                    .map(|&v| self.cards[v])
                    .product();
                t.value_sum() * missing as f64
            }
            ReprInstance::Add(d) => self.mgr.as_mut().unwrap().total_over(*d, label),
        }
    }

    fn scale(&mut self, a: &ReprInstance, c: f64) -> ReprInstance {
        match a {
            ReprInstance::Dense(f) => ReprInstance::Dense(f.scale(c)),
            ReprInstance::Sparse(t) => ReprInstance::Sparse(t.scale(c)),
            ReprInstance::Add(d) => {
                let m = self.mgr.as_mut().unwrap();
                let k = m.terminal(c);
                ReprInstance::Add(m.product(*d, k))
            }
        }
    }

    fn plus(&mut self, a: &ReprInstance, b: &ReprInstance) -> ReprInstance {
        match (a, b) {
            (ReprInstance::Dense(x), ReprInstance::Dense(y)) => {
                // same-scope addition via expansion to the union scope
                let (scope, cards) = {
                    let mut s: Vec<usize> =
                        x.scope().iter().chain(y.scope().iter()).copied().collect();
                    s.sort_unstable();
                    s.dedup();
                    let c: Vec<usize> = s.iter().map(|&v| self.cards[v]).collect();
                    (s, c)
                };
                let xe = x.expand_to(&scope, &cards);
                let ye = y.expand_to(&scope, &cards);
                let values: Vec<f64> = xe
                    .values()
                    .iter()
                    .zip(ye.values())
                    .map(|(a, b)| a + b)
                    .collect();
                ReprInstance::Dense(DenseFactor::new(scope, cards, values).expect("sum"))
            }
            (ReprInstance::Sparse(x), ReprInstance::Sparse(y)) => ReprInstance::Sparse(x.plus(y)),
            (ReprInstance::Add(x), ReprInstance::Add(y)) => {
                ReprInstance::Add(self.mgr.as_mut().unwrap().plus(*x, *y))
            }
            _ => unreachable!("mixed representation kinds"),
        }
    }

    /// Max absolute pointwise difference over the label domain.
    fn max_diff(&mut self, a: &ReprInstance, b: &ReprInstance, label: &[usize]) -> f64 {
        let da = self.expand_dense(a, label);
        let db = self.expand_dense(b, label);
        da.values()
            .iter()
            .zip(db.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Expand dense/sparse instances to the full label scope (belief-update
    /// division needs aligned scopes); identity for diagrams.
    fn align_full(&mut self, a: ReprInstance, label: &[usize]) -> ReprInstance {
        match a {
            ReprInstance::Dense(f) => {
                if f.scope() == label {
                    ReprInstance::Dense(f)
                } else {
                    let lcards: Vec<usize> = label.iter().map(|&v| self.cards[v]).collect();
                    ReprInstance::Dense(f.expand_to(label, &lcards))
                }
            }
            ReprInstance::Sparse(t) => {
                if t.scope() == label {
                    ReprInstance::Sparse(t)
                } else {
                    let lcards: Vec<usize> = label.iter().map(|&v| self.cards[v]).collect();
                    let full = t.to_dense().expand_to(label, &lcards);
                    ReprInstance::Sparse(SparseTable::from_dense(&full))
                }
            }
            other => other,
        }
    }
}

/// One sum-product message: combine the vertex potential with all incoming
/// messages except the recipient's, sum down to the edge label, project onto
/// the edge support, quantize, and normalize.
pub fn compute_message(
    scg: &mut Scg,
    edge: usize,
    from: usize,
    to: usize,
    cfg: &EngineConfig,
) -> Result<ReprInstance> {
    let label = scg.graph.edges[edge].label.clone();
    let mut belief = scg.potentials[from].clone();
    for (ei, nb) in scg.graph.neighbors(from) {
        if ei == edge {
            continue;
        }
        // incoming message nb -> from
        let inc = if scg.graph.edges[ei].a == nb {
            scg.messages[ei][0].clone()
        } else {
            scg.messages[ei][1].clone()
        };
        belief = scg.product(&belief, &inc);
    }
    let summed = scg.sum_to(&belief, &label);
    let masked = scg.mask_edge(summed, edge);
    let quantized = scg.quantize(masked, cfg.epsilon);
    let total = scg.total_over(&quantized, &label);
    if total.is_nan() || total <= 0.0 {
        return Err(EngineError::Starvation { edge, from, to });
    }
    Ok(scg.scale(&quantized, 1.0 / total))
}

fn damp(scg: &mut Scg, old: &ReprInstance, new: ReprInstance, lambda: f64) -> ReprInstance {
    if lambda <= 0.0 {
        return new;
    }
    let a = scg.scale(old, lambda);
    let b = scg.scale(&new, 1.0 - lambda);
    scg.plus(&a, &b)
}

/// Synchronous rounds over all directed edges in a fixed order, in place.
pub fn run_propagation(scg: &mut Scg, cfg: &EngineConfig) -> Result<PropStats> {
    scg.schedule_used = cfg.schedule;
    let dirs: Vec<(usize, usize, usize)> = {
        let mut v = Vec::new();
        for i in 0..scg.graph.n_clusters() {
            for (ei, j) in scg.graph.neighbors(i) {
                v.push((ei, i, j));
            }
        }
        v
    };
    let mut sends = 0u64;
    let mut changed_sends = 0u64;
    let started = Instant::now();
    for iter in 1..=cfg.max_iterations {
        let mut max_change: f64 = 0.0;
        for &(ei, from, to) in &dirs {
            let label = scg.graph.edges[ei].label.clone();
            let dir = usize::from(from != scg.graph.edges[ei].a);
            let old = scg.messages[ei][dir].clone();
            let new = match cfg.schedule {
                Schedule::SumProduct => compute_message(scg, ei, from, to, cfg)?,
                Schedule::BeliefUpdate => {
                    let b = scg.beliefs[from].clone();
                    let summed = scg.sum_to(&b, &label);
                    let masked = scg.mask_edge(summed, ei);
                    let quantized = scg.quantize(masked, cfg.epsilon);
                    let total = scg.total_over(&quantized, &label);
                    if total.is_nan() || total <= 0.0 {
                        return Err(EngineError::Starvation { edge: ei, from, to });
                    }
                    let scaled = scg.scale(&quantized, 1.0 / total);
                    scg.align_full(scaled, &label)
                }
            };
            let new = damp(scg, &old, new, cfg.damping);
            let diff = scg.max_diff(&old, &new, &label);
            max_change = max_change.max(diff);
            sends += 1;
            if diff >= cfg.tolerance {
                changed_sends += 1;
            }
            if cfg.schedule == Schedule::BeliefUpdate {
                // absorb ratio into the recipient belief, then advance sepset
                let mu = scg.align_full(scg.sepsets[ei].clone(), &label);
                let ratio = scg.divide(&new, &mu)?;
                let b = scg.product(&scg.beliefs[to].clone(), &ratio);
                let to_label = scg.graph.clusters[to].clone();
                let total = scg.total_over(&b, &to_label);
                if total.is_nan() || total <= 0.0 {
                    return Err(EngineError::Starvation { edge: ei, from, to });
                }
                scg.beliefs[to] = scg.scale(&b, 1.0 / total);
                scg.sepsets[ei] = new.clone();
            }
            scg.messages[ei][dir] = new;
        }
        if max_change < cfg.tolerance {
            return Ok(PropStats {
                iterations: iter,
                converged: true,
                sends,
                changed_sends,
            });
        }
        if let Some(budget) = cfg.time_budget_ms {
            if started.elapsed().as_millis() as u64 >= budget {
                return Ok(PropStats {
                    iterations: iter,
                    converged: false,
                    sends,
                    changed_sends,
                });
            }
        }
    }
    Ok(PropStats {
        iterations: cfg.max_iterations,
        converged: false,
        sends,
        changed_sends,
    })
}

/// Per-variable normalized marginals from the smallest cluster mentioning
/// each variable; all-zero beliefs fall back to uniform and are flagged.
pub fn extract_marginals(scg: &mut Scg) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = scg.cards.len();
    let mut marginals = Vec::with_capacity(n);
    let mut flagged = Vec::with_capacity(n);
    for var in 0..n {
        let card = scg.cards[var];
        let uniform = vec![1.0 / card as f64; card];
        let Some(c) = scg.graph.home_of_var(var) else {
            marginals.push(uniform);
            flagged.push(true);
            continue;
        };
        let belief = match scg.schedule_used {
            Schedule::BeliefUpdate => scg.beliefs[c].clone(),
            Schedule::SumProduct => {
                let mut b = scg.potentials[c].clone();
                for (ei, nb) in scg.graph.neighbors(c) {
                    let inc = if scg.graph.edges[ei].a == nb {
                        scg.messages[ei][0].clone()
                    } else {
                        scg.messages[ei][1].clone()
                    };
                    b = scg.product(&b, &inc);
                }
                b
            }
        };
        let target = [var];
        let down = scg.sum_to(&belief, &target);
        let dense = scg.expand_dense(&down, &target);
        match dense.normalize() {
            Ok(norm) => {
                marginals.push(norm.values().to_vec());
                flagged.push(false);
            }
            Err(_) => {
                marginals.push(uniform);
                flagged.push(true);
            }
        }
    }
    (marginals, flagged)
}

/// End-to-end run: join graph, sampling, initialization, propagation, and
/// marginal extraction. Support starvation degrades to a flagged uniform
/// result with a warning so parameter sweeps always complete.
pub fn run_algorithm_1(
    model: &GraphicalModel,
    params: &JoinGraphParams,
    sampler: Option<&SamplerConfig>,
    cfg: &EngineConfig,
    kind: ReprKind,
) -> Result<RunOutput> {
    let t0 = Instant::now();
    let graph = build_join_graph(model, params)?;
    let samples = match sampler {
        Some(sc) => Some(generate(model, sc)?),
        None => None,
    };
    let mut scg = initialize_scg(model, graph, samples.as_ref(), kind, cfg.augment_support)?;
    let stats = match run_propagation(&mut scg, cfg) {
        Ok(s) => s,
        Err(EngineError::Starvation { edge, from, to }) => {
            let marginals = (0..model.n_vars())
                .map(|v| vec![1.0 / model.card(v) as f64; model.card(v)])
                .collect();
            return Ok(RunOutput {
                marginals,
                flagged: vec![true; model.n_vars()],
                meta: RunMeta {
                    seed: sampler.map(|c| c.seed),
                    iterations: 0,
                    converged: false,
                    wall_ms: t0.elapsed().as_millis() as u64,
                    warning: Some(format!(
                        "support starvation on edge {edge} ({from} -> {to}); uniform fallback"
                    )),
                },
            });
        }
        Err(e) => return Err(e),
    };
    let (marginals, flagged) = extract_marginals(&mut scg);
    Ok(RunOutput {
        marginals,
        flagged,
        meta: RunMeta {
            seed: sampler.map(|c| c.seed),
            iterations: stats.iterations,
            converged: stats.converged,
            wall_ms: t0.elapsed().as_millis() as u64,
            warning: None,
        },
    })
}

fn format_float(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.12e}")
    }
}

/// Marginals in the shared text interchange format: `#`-prefixed metadata
/// header lines, then one `var <index> : p0 p1 ...` line per variable, with
/// a literal `[FLAGGED]` suffix on fallback rows.
pub fn format_marginals(
    marginals: &[Vec<f64>],
    flagged: &[bool],
    header: &[(&str, String)],
) -> String {
    let mut out = String::new();
    for (k, v) in header {
        out.push_str(&format!("# {k} {v}\n"));
    }
    for (i, m) in marginals.iter().enumerate() {
        let vals: Vec<String> = m.iter().map(|&x| format_float(x)).collect();
        out.push_str(&format!("var {i} : {}", vals.join(" ")));
        if flagged.get(i).copied().unwrap_or(false) {
            out.push_str(" [FLAGGED]");
        }
        out.push('\n');
    }
    out
}
