//! Cluster-graph construction and validation.
//!
//! A cluster graph labels vertices and edges with variable sets such that
//! every factor fits inside some vertex and, for every variable, the vertices
//! and edges mentioning it form a connected sub-tree (running intersection).
//! Junction trees come from bucket elimination along a min-fill order; loopy
//! join graphs come from the mini-bucket decomposition, which caps the number
//! of variables per cluster at the i-bound and is the standard construction
//! used by iterative join-graph propagation.

use crate::model::GraphicalModel;
use rustc_hash::FxHashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("i-bound {i_bound} is below the maximum factor arity {arity}")]
    IBoundTooSmall { i_bound: usize, arity: usize },
    #[error("induced width {width} exceeds the cap {cap}")]
    WidthCap { width: usize, cap: usize },
    #[error("no cluster covers the scope of factor {factor}")]
    UncoveredFactor { factor: usize },
    #[error("construction produced an invalid graph: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Default cap on the induced width accepted by exact constructions.
pub const DEFAULT_WIDTH_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElimPolicy {
    MinFill,
    MinDegree,
}

#[derive(Debug, Clone)]
pub struct JoinGraphParams {
    pub i_bound: usize,
    pub policy: ElimPolicy,
    /// Shrink edge labels to minimal sets preserving running intersection.
    pub minimize_edge_labels: bool,
}

impl JoinGraphParams {
    pub fn new(i_bound: usize) -> Self {
        JoinGraphParams {
            i_bound,
            policy: ElimPolicy::MinFill,
            minimize_edge_labels: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterEdge {
    pub a: usize,
    pub b: usize,
    pub label: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ClusterGraph {
    /// Sorted variable label per vertex.
    pub clusters: Vec<Vec<usize>>,
    pub edges: Vec<ClusterEdge>,
    /// Factor index -> owning vertex.
    pub factor_home: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RipViolation {
    /// The vertices/edges mentioning the variable are not connected.
    Disconnected { var: usize },
    /// The subgraph mentioning the variable contains a cycle.
    HasCycle { var: usize },
    /// An edge label is not covered by both endpoint labels.
    EdgeLabelUncovered { edge: usize, var: usize },
}

impl std::fmt::Display for RipViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RipViolation::Disconnected { var } => {
                write!(f, "variable {var}: mentioning subgraph is disconnected")
            }
            RipViolation::HasCycle { var } => {
                write!(f, "variable {var}: mentioning subgraph contains a cycle")
            }
            RipViolation::EdgeLabelUncovered { edge, var } => {
                write!(
                    f,
                    "edge {edge}: label variable {var} missing from an endpoint"
                )
            }
        }
    }
}

impl ClusterGraph {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Neighbors of a vertex as (edge index, other endpoint), ascending by
    /// the other endpoint then edge index.
    pub fn neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (ei, e) in self.edges.iter().enumerate() {
            if e.a == v {
                out.push((ei, e.b));
            } else if e.b == v {
                out.push((ei, e.a));
            }
        }
        out.sort_by_key(|&(ei, other)| (other, ei));
        out
    }

    /// Smallest cluster mentioning a variable (ties by lowest index).
    pub fn home_of_var(&self, var: usize) -> Option<usize> {
        self.clusters
            .iter()
            .enumerate()
            .filter(|(_, label)| label.contains(&var))
            .min_by_key(|(i, label)| (label.len(), *i))
            .map(|(i, _)| i)
    }
}

/// Elimination order and induced width under the given policy,
/// tie-breaking by lowest variable index.
pub fn elimination_order(model: &GraphicalModel, policy: ElimPolicy) -> (Vec<usize>, usize) {
    let n = model.n_vars();
    let mut adj: Vec<FxHashSet<usize>> = vec![FxHashSet::default(); n];
    for f in model.factors() {
        let scope = f.scope();
        for i in 0..scope.len() {
            for j in i + 1..scope.len() {
                adj[scope[i]].insert(scope[j]);
                adj[scope[j]].insert(scope[i]);
            }
        }
    }
    let mut remaining: Vec<bool> = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut width = 0;
    for _ in 0..n {
        let mut best: Option<(usize, usize)> = None; // (cost, var)
        for v in 0..n {
            if !remaining[v] {
                continue;
            }
            let neigh: Vec<usize> = adj[v].iter().copied().filter(|&u| remaining[u]).collect();
            let cost = match policy {
                ElimPolicy::MinDegree => neigh.len(),
                ElimPolicy::MinFill => {
                    let mut fill = 0;
                    for i in 0..neigh.len() {
                        for j in i + 1..neigh.len() {
                            if !adj[neigh[i]].contains(&neigh[j]) {
                                fill += 1;
                            }
                        }
                    }
                    fill
                }
            };
            if best.is_none() || (cost, v) < best.unwrap() {
                best = Some((cost, v));
            }
        }
        let (_, v) = best.unwrap();
        let neigh: Vec<usize> = adj[v].iter().copied().filter(|&u| remaining[u]).collect();
        width = width.max(neigh.len());
        for i in 0..neigh.len() {
            for j in i + 1..neigh.len() {
                adj[neigh[i]].insert(neigh[j]);
                adj[neigh[j]].insert(neigh[i]);
            }
        }
        remaining[v] = false;
        order.push(v);
    }
    (order, width)
}

pub fn min_fill_order(model: &GraphicalModel) -> (Vec<usize>, usize) {
    elimination_order(model, ElimPolicy::MinFill)
}

#[derive(Debug, Clone)]
enum ItemSource {
    Factor,
    Message { from: usize },
}

#[derive(Debug, Clone)]
struct Item {
    vars: Vec<usize>, // sorted
    source: ItemSource,
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn is_subset(sub: &[usize], sup: &[usize]) -> bool {
    sub.iter().all(|v| sup.contains(v))
}

struct Builder {
    clusters: Vec<Vec<usize>>,
    edges: Vec<ClusterEdge>,
}

/// Bucket-by-bucket construction shared by the tree and join-graph builders.
/// `i_bound = usize::MAX` keeps each bucket whole and yields the bucket tree.
fn build_buckets(model: &GraphicalModel, order: &[usize], i_bound: usize) -> Builder {
    let n = model.n_vars();
    let mut pos = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut buckets: Vec<Vec<Item>> = vec![Vec::new(); n];
    for f in model.factors() {
        // constant factors have no bucket; assignment places them later
        if f.scope().is_empty() {
            continue;
        }
        let earliest = f.scope().iter().copied().min_by_key(|&v| pos[v]).unwrap();
        buckets[pos[earliest]].push(Item {
            vars: f.scope().to_vec(),
            source: ItemSource::Factor,
        });
    }

    let mut b = Builder {
        clusters: Vec::new(),
        edges: Vec::new(),
    };
    for i in 0..n {
        let v = order[i];
        let items = std::mem::take(&mut buckets[i]);
        if items.is_empty() {
            b.clusters.push(vec![v]);
            continue;
        }
        // first fit, largest scopes first; ties resolved lexicographically to
        // keep construction deterministic
        let mut sorted = items;
        sorted.sort_by(|x, y| {
            y.vars
                .len()
                .cmp(&x.vars.len())
                .then_with(|| x.vars.cmp(&y.vars))
        });
        let mut minis: Vec<(Vec<usize>, Vec<Item>)> = Vec::new();
        for item in sorted {
            let mut placed = false;
            for (label, members) in minis.iter_mut() {
                let u = union_sorted(label, &item.vars);
                if u.len() <= i_bound {
                    *label = u;
                    members.push(item.clone());
                    placed = true;
                    break;
                }
            }
            if !placed {
                minis.push((item.vars.clone(), vec![item]));
            }
        }
        let ids: Vec<usize> = minis
            .iter()
            .map(|(label, _)| {
                b.clusters.push(label.clone());
                b.clusters.len() - 1
            })
            .collect();
        for w in ids.windows(2) {
            b.edges.push(ClusterEdge {
                a: w[0],
                b: w[1],
                label: vec![v],
            });
        }
        for (id, (label, members)) in ids.iter().zip(minis.iter()) {
            for m in members {
                if let ItemSource::Message { from } = m.source {
                    b.edges.push(ClusterEdge {
                        a: from,
                        b: *id,
                        label: m.vars.clone(),
                    });
                }
            }
            let msg: Vec<usize> = label.iter().copied().filter(|&x| x != v).collect();
            if !msg.is_empty() {
                let earliest = msg.iter().copied().min_by_key(|&x| pos[x]).unwrap();
                buckets[pos[earliest]].push(Item {
                    vars: msg,
                    source: ItemSource::Message { from: *id },
                });
            }
        }
    }
    b
}

/// Merge every cluster whose connecting edge carries its whole label into the
/// covering neighbor. The edge-label condition keeps each variable's
/// sub-tree a tree under contraction.
fn absorb_nonmaximal(b: &mut Builder) {
    loop {
        let mut found: Option<(usize, usize)> = None; // (edge idx, which endpoint dies)
        'search: for (ei, e) in b.edges.iter().enumerate() {
            for (dead, live) in [(e.a, e.b), (e.b, e.a)] {
                if is_subset(&b.clusters[dead], &b.clusters[live]) && e.label == b.clusters[dead] {
                    found = Some((ei, dead));
                    break 'search;
                }
            }
        }
        let Some((ei, dead)) = found else { break };
        let e = b.edges[ei].clone();
        let live = if e.a == dead { e.b } else { e.a };
        b.edges.remove(ei);
        for edge in b.edges.iter_mut() {
            if edge.a == dead {
                edge.a = live;
            }
            if edge.b == dead {
                edge.b = live;
            }
        }
        b.edges.retain(|edge| edge.a != edge.b);
        // merge parallel edges by label union
        let mut merged: Vec<ClusterEdge> = Vec::new();
        for edge in b.edges.drain(..) {
            let (x, y) = (edge.a.min(edge.b), edge.a.max(edge.b));
            if let Some(prev) = merged.iter_mut().find(|p| p.a == x && p.b == y) {
                prev.label = union_sorted(&prev.label, &edge.label);
            } else {
                merged.push(ClusterEdge {
                    a: x,
                    b: y,
                    label: edge.label,
                });
            }
        }
        b.edges = merged;
        // compact indices
        let last = b.clusters.len() - 1;
        b.clusters.swap_remove(dead);
        if dead != last {
            for edge in b.edges.iter_mut() {
                if edge.a == last {
                    edge.a = dead;
                }
                if edge.b == last {
                    edge.b = dead;
                }
            }
        }
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Relabel edges with the minimum variable sets preserving running
/// intersection: per variable, a spanning tree of the clusters mentioning it.
fn minimize_labels(b: &mut Builder, n_vars: usize) -> Result<()> {
    let mut new_labels: Vec<Vec<usize>> = vec![Vec::new(); b.edges.len()];
    for x in 0..n_vars {
        let verts: Vec<usize> = (0..b.clusters.len())
            .filter(|&c| b.clusters[c].contains(&x))
            .collect();
        if verts.len() <= 1 {
            continue;
        }
        let mut ds = DisjointSet::new(b.clusters.len());
        for (ei, e) in b.edges.iter().enumerate() {
            if b.clusters[e.a].contains(&x) && b.clusters[e.b].contains(&x) && ds.union(e.a, e.b) {
                new_labels[ei].push(x);
            }
        }
        let root = ds.find(verts[0]);
        if verts.iter().any(|&v| ds.find(v) != root) {
            return Err(ClusterError::Internal(format!(
                "variable {x} clusters are not connected"
            )));
        }
    }
    for (e, label) in b.edges.iter_mut().zip(new_labels) {
        e.label = label;
    }
    b.edges.retain(|e| !e.label.is_empty());
    Ok(())
}

fn finish(model: &GraphicalModel, mut b: Builder) -> Result<ClusterGraph> {
    for e in b.edges.iter_mut() {
        e.label.sort_unstable();
        e.label.dedup();
    }
    let mut g = ClusterGraph {
        clusters: b.clusters,
        edges: b.edges,
        factor_home: vec![0; model.factors().len()],
    };
    assign_factors(model, &mut g)?;
    let violations = validate_running_intersection(&g);
    if !violations.is_empty() {
        return Err(ClusterError::Internal(format!(
            "running intersection violated: {}",
            violations[0]
        )));
    }
    Ok(g)
}

/// Junction tree by bucket elimination plus absorption of non-maximal
/// clusters; exact message passing on it recovers all marginals.
pub fn build_junction_tree(model: &GraphicalModel, width_cap: usize) -> Result<ClusterGraph> {
    let (order, width) = min_fill_order(model);
    if width > width_cap {
        return Err(ClusterError::WidthCap {
            width,
            cap: width_cap,
        });
    }
    let mut b = build_buckets(model, &order, usize::MAX);
    absorb_nonmaximal(&mut b);
    finish(model, b)
}

/// Mini-bucket join graph with at most `i_bound` variables per cluster.
pub fn build_join_graph(model: &GraphicalModel, params: &JoinGraphParams) -> Result<ClusterGraph> {
    let arity = model
        .factors()
        .iter()
        .map(|f| f.scope().len())
        .max()
        .unwrap_or(0);
    if params.i_bound == 0 {
        return Err(ClusterError::IBoundTooSmall {
            i_bound: 0,
            arity: arity.max(1),
        });
    }
    if params.i_bound < arity {
        return Err(ClusterError::IBoundTooSmall {
            i_bound: params.i_bound,
            arity,
        });
    }
    let (order, _) = elimination_order(model, params.policy);
    let mut b = build_buckets(model, &order, params.i_bound);
    absorb_nonmaximal(&mut b);
    if params.minimize_edge_labels {
        minimize_labels(&mut b, model.n_vars())?;
    }
    finish(model, b)
}

/// Running-intersection check: for every variable the mentioning vertices and
/// edges must form a connected, acyclic subgraph. Violations are data, not
/// errors.
pub fn validate_running_intersection(g: &ClusterGraph) -> Vec<RipViolation> {
    let mut out = Vec::new();
    let mut vars: Vec<usize> = g.clusters.iter().flatten().copied().collect();
    vars.sort_unstable();
    vars.dedup();
    for &x in &vars {
        let verts: Vec<usize> = (0..g.clusters.len())
            .filter(|&c| g.clusters[c].contains(&x))
            .collect();
        let mut x_edges = Vec::new();
        let mut covered = true;
        for (ei, e) in g.edges.iter().enumerate() {
            if e.label.contains(&x) {
                if !g.clusters[e.a].contains(&x) || !g.clusters[e.b].contains(&x) {
                    out.push(RipViolation::EdgeLabelUncovered { edge: ei, var: x });
                    covered = false;
                } else {
                    x_edges.push(ei);
                }
            }
        }
        if !covered || verts.is_empty() {
            continue;
        }
        let mut ds = DisjointSet::new(g.clusters.len());
        let mut acyclic = true;
        for &ei in &x_edges {
            let e = &g.edges[ei];
            if !ds.union(e.a, e.b) {
                acyclic = false;
            }
        }
        if !acyclic {
            out.push(RipViolation::HasCycle { var: x });
        }
        let root = ds.find(verts[0]);
        if verts.iter().any(|&v| ds.find(v) != root) {
            out.push(RipViolation::Disconnected { var: x });
        }
    }
    out
}

/// Place every factor in the smallest covering cluster, ties by lowest index.
pub fn assign_factors(model: &GraphicalModel, g: &mut ClusterGraph) -> Result<()> {
    let mut home = Vec::with_capacity(model.factors().len());
    for (fi, f) in model.factors().iter().enumerate() {
        let best = g
            .clusters
            .iter()
            .enumerate()
            .filter(|(_, label)| is_subset(f.scope(), label))
            .min_by_key(|(i, label)| (label.len(), *i))
            .map(|(i, _)| i);
        match best {
            Some(c) => home.push(c),
            None => return Err(ClusterError::UncoveredFactor { factor: fi }),
        }
    }
    g.factor_home = home;
    Ok(())
}

/// Text dump of clusters, labels, edges and factor assignments.
pub fn format_cluster_graph(g: &ClusterGraph) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for (i, label) in g.clusters.iter().enumerate() {
        let vars: Vec<String> = label.iter().map(|v| v.to_string()).collect();
        writeln!(s, "cluster {i} : {}", vars.join(" ")).unwrap();
    }
    for (i, e) in g.edges.iter().enumerate() {
        let vars: Vec<String> = e.label.iter().map(|v| v.to_string()).collect();
        writeln!(s, "edge {i} : {} -- {} label {}", e.a, e.b, vars.join(" ")).unwrap();
    }
    for (fi, c) in g.factor_home.iter().enumerate() {
        writeln!(s, "factor {fi} -> cluster {c}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DenseFactor, GraphicalModel};
    use rand::{Rng, SeedableRng};

    fn pairwise(a: usize, b: usize) -> DenseFactor {
        DenseFactor::new(
            vec![a.min(b), a.max(b)],
            vec![2, 2],
            vec![1.0, 0.5, 0.5, 1.0],
        )
        .unwrap()
    }

    fn chain3() -> GraphicalModel {
        GraphicalModel::new(vec![2, 2, 2], vec![pairwise(0, 1), pairwise(1, 2)]).unwrap()
    }

    fn grid(rows: usize, cols: usize) -> GraphicalModel {
        let n = rows * cols;
        let at = |r: usize, c: usize| r * cols + c;
        let mut factors = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    factors.push(pairwise(at(r, c), at(r, c + 1)));
                }
                if r + 1 < rows {
                    factors.push(pairwise(at(r, c), at(r + 1, c)));
                }
            }
        }
        GraphicalModel::new(vec![2; n], factors).unwrap()
    }

    #[test]
    fn junction_tree_of_chain() {
        let g = build_junction_tree(&chain3(), DEFAULT_WIDTH_CAP).unwrap();
        let mut labels = g.clusters.clone();
        labels.sort();
        assert_eq!(labels, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].label, vec![1]);
    }

    #[test]
    fn junction_tree_of_single_clique() {
        let f = DenseFactor::new(vec![0, 1, 2], vec![2, 2, 2], vec![1.0; 8]).unwrap();
        let m = GraphicalModel::new(vec![2, 2, 2], vec![f]).unwrap();
        let g = build_junction_tree(&m, DEFAULT_WIDTH_CAP).unwrap();
        assert_eq!(g.n_clusters(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn junction_tree_labels_are_intersections() {
        let g = build_junction_tree(&grid(3, 3), DEFAULT_WIDTH_CAP).unwrap();
        for e in &g.edges {
            let inter: Vec<usize> = g.clusters[e.a]
                .iter()
                .copied()
                .filter(|v| g.clusters[e.b].contains(v))
                .collect();
            assert_eq!(e.label, inter);
        }
        assert!(validate_running_intersection(&g).is_empty());
        // a tree: |E| = |V| - 1 when connected
        assert_eq!(g.edges.len(), g.n_clusters() - 1);
    }

    #[test]
    fn junction_tree_of_star_has_singleton_separators() {
        // star: 0 at the center of 1,2,3
        let m = GraphicalModel::new(
            vec![2; 4],
            vec![pairwise(0, 1), pairwise(0, 2), pairwise(0, 3)],
        )
        .unwrap();
        let g = build_junction_tree(&m, DEFAULT_WIDTH_CAP).unwrap();
        assert_eq!(g.n_clusters(), 3);
        for e in &g.edges {
            assert_eq!(e.label.len(), 1);
        }
    }

    #[test]
    fn width_cap_refuses() {
        assert!(matches!(
            build_junction_tree(&grid(3, 3), 1),
            Err(ClusterError::WidthCap { .. })
        ));
    }

    #[test]
    fn join_graph_single_factor_is_one_cluster() {
        let f = DenseFactor::new(vec![0, 1], vec![2, 2], vec![1.0; 4]).unwrap();
        let m = GraphicalModel::new(vec![2, 2], vec![f]).unwrap();
        let g = build_join_graph(&m, &JoinGraphParams::new(2)).unwrap();
        assert_eq!(g.n_clusters(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn join_graph_chain_with_large_ibound_is_a_tree() {
        let g = build_join_graph(&chain3(), &JoinGraphParams::new(3)).unwrap();
        assert!(validate_running_intersection(&g).is_empty());
        assert_eq!(g.edges.len(), g.n_clusters() - 1);
    }

    #[test]
    fn join_graph_grid_ibound2() {
        let g = build_join_graph(&grid(3, 3), &JoinGraphParams::new(2)).unwrap();
        assert!(g.clusters.iter().all(|c| c.len() <= 2));
        assert!(validate_running_intersection(&g).is_empty());
    }

    #[test]
    fn join_graph_without_label_minimization_also_valid() {
        let mut p = JoinGraphParams::new(2);
        p.minimize_edge_labels = false;
        let g = build_join_graph(&grid(3, 3), &p).unwrap();
        assert!(validate_running_intersection(&g).is_empty());
    }

    #[test]
    fn join_graph_degenerates_to_tree_at_width() {
        let m = grid(3, 3);
        let (_, width) = min_fill_order(&m);
        let g = build_join_graph(&m, &JoinGraphParams::new(width + 1)).unwrap();
        assert_eq!(g.edges.len(), g.n_clusters() - 1, "expected a tree");
        assert!(validate_running_intersection(&g).is_empty());
    }

    #[test]
    fn ibound_below_arity_refuses() {
        let f = DenseFactor::new(vec![0, 1, 2], vec![2, 2, 2], vec![1.0; 8]).unwrap();
        let m = GraphicalModel::new(vec![2, 2, 2], vec![f]).unwrap();
        assert!(matches!(
            build_join_graph(&m, &JoinGraphParams::new(2)),
            Err(ClusterError::IBoundTooSmall { .. })
        ));
    }

    #[test]
    fn validate_flags_disconnection_and_cycles() {
        // two clusters sharing variable 0 with no connecting edge labeled 0
        let g = ClusterGraph {
            clusters: vec![vec![0, 1], vec![0, 2]],
            edges: vec![],
            factor_home: vec![],
        };
        assert_eq!(
            validate_running_intersection(&g),
            vec![RipViolation::Disconnected { var: 0 }]
        );

        // a triangle of edges all labeled 0
        let g2 = ClusterGraph {
            clusters: vec![vec![0, 1], vec![0, 2], vec![0, 3]],
            edges: vec![
                ClusterEdge {
                    a: 0,
                    b: 1,
                    label: vec![0],
                },
                ClusterEdge {
                    a: 1,
                    b: 2,
                    label: vec![0],
                },
                ClusterEdge {
                    a: 2,
                    b: 0,
                    label: vec![0],
                },
            ],
            factor_home: vec![],
        };
        assert_eq!(
            validate_running_intersection(&g2),
            vec![RipViolation::HasCycle { var: 0 }]
        );

        // edge label not contained in an endpoint
        let g3 = ClusterGraph {
            clusters: vec![vec![0], vec![1]],
            edges: vec![ClusterEdge {
                a: 0,
                b: 1,
                label: vec![0],
            }],
            factor_home: vec![],
        };
        assert_eq!(
            validate_running_intersection(&g3),
            vec![RipViolation::EdgeLabelUncovered { edge: 0, var: 0 }]
        );
    }

    #[test]
    fn assign_prefers_smallest_cover() {
        let m = GraphicalModel::new(
            vec![2, 2, 2],
            vec![DenseFactor::new(vec![1], vec![2], vec![1.0, 2.0]).unwrap()],
        )
        .unwrap();
        let mut g = ClusterGraph {
            clusters: vec![vec![0, 1, 2], vec![1, 2], vec![1]],
            edges: vec![
                ClusterEdge {
                    a: 0,
                    b: 1,
                    label: vec![1, 2],
                },
                ClusterEdge {
                    a: 1,
                    b: 2,
                    label: vec![1],
                },
            ],
            factor_home: vec![],
        };
        assign_factors(&m, &mut g).unwrap();
        assert_eq!(g.factor_home, vec![2]);

        let m2 = GraphicalModel::new(
            vec![2, 2, 2],
            vec![DenseFactor::new(vec![0, 2], vec![2, 2], vec![1.0; 4]).unwrap()],
        )
        .unwrap();
        let mut g2 = ClusterGraph {
            clusters: vec![vec![1, 2]],
            edges: vec![],
            factor_home: vec![],
        };
        assert!(matches!(
            assign_factors(&m2, &mut g2),
            Err(ClusterError::UncoveredFactor { factor: 0 })
        ));
    }

    #[test]
    fn min_degree_policy_also_builds_valid_graphs() {
        let m = grid(3, 3);
        let mut p = JoinGraphParams::new(3);
        p.policy = ElimPolicy::MinDegree;
        let g = build_join_graph(&m, &p).unwrap();
        assert!(validate_running_intersection(&g).is_empty());
        assert!(g.clusters.iter().all(|c| c.len() <= 3));
    }

    #[test]
    fn dump_lists_clusters_edges_and_assignments() {
        let g = build_junction_tree(&chain3(), DEFAULT_WIDTH_CAP).unwrap();
        let dump = format_cluster_graph(&g);
        assert!(dump.contains("cluster 0 :"));
        assert!(dump.contains("edge 0 :"));
        assert!(dump.contains("factor 0 -> cluster"));
        assert!(dump.contains("factor 1 -> cluster"));
    }

    #[test]
    fn random_models_always_validate() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for _ in 0..30 {
            let n = rng.gen_range(3..9);
            let mut factors = Vec::new();
            for _ in 0..rng.gen_range(2..10) {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                if a != b {
                    factors.push(pairwise(a, b));
                } else {
                    factors.push(DenseFactor::new(vec![a], vec![2], vec![1.0, 2.0]).unwrap());
                }
            }
            let m = GraphicalModel::new(vec![2; n], factors).unwrap();
            let jt = build_junction_tree(&m, DEFAULT_WIDTH_CAP).unwrap();
            assert!(validate_running_intersection(&jt).is_empty());
            for ib in 2..4 {
                let jg = build_join_graph(&m, &JoinGraphParams::new(ib)).unwrap();
                assert!(validate_running_intersection(&jg).is_empty());
                assert!(jg.clusters.iter().all(|c| c.len() <= ib));
            }
        }
    }
}
