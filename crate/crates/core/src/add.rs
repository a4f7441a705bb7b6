//! Reduced ordered algebraic decision diagrams over multi-valued variables.
//!
//! A diagram is a DAG of k-ary decision nodes (one child per domain value)
//! and real-valued terminals, with variable tests strictly increasing along
//! every path in a fixed order. Reduction merges isomorphic nodes and elides
//! nodes whose children are all identical; together with hash-consing this
//! makes the representation canonical: two equal functions built in the same
//! manager share the same root.
//!
//! Each terminal doubles as a weighted feature: the disjunction of the paths
//! reaching it. Model counting per terminal is a single weighted path count,
//! which is what makes the mean-preserving lossy projection cheap.

use crate::model::{DenseFactor, ModelError, Result};
use rustc_hash::FxHashMap;
use std::collections::BTreeMap;

/// Per-terminal (sum, count) accumulator of the projection walk.
type ProjAcc = BTreeMap<Add, (f64, u64)>;

/// Root-to-leaf test order shared by all diagrams of one manager.
#[derive(Debug, Clone)]
pub struct VarOrder {
    order: Vec<usize>,
    pos: Vec<usize>,
}

impl VarOrder {
    /// `order[i]` is the variable tested at depth i; must be a permutation.
    pub fn new(order: Vec<usize>) -> Self {
        let n = order.len();
        let mut pos = vec![usize::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            assert!(v < n && pos[v] == usize::MAX, "order must be a permutation");
            pos[v] = i;
        }
        VarOrder { order, pos }
    }

    pub fn identity(n: usize) -> Self {
        VarOrder::new((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn position(&self, var: usize) -> usize {
        self.pos[var]
    }

    pub fn var_at(&self, pos: usize) -> usize {
        self.order[pos]
    }

    /// Copy of `vars` sorted root-first.
    pub fn sort_vars(&self, vars: &[usize]) -> Vec<usize> {
        let mut v = vars.to_vec();
        v.sort_by_key(|&x| self.pos[x]);
        v
    }
}

/// Handle to a diagram node inside its manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Add(u32);

#[derive(Debug, Clone)]
enum Node {
    Terminal(f64),
    Decision { var: u32, children: Box<[Add]> },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Mul,
    Div,
    Plus,
}

/// Node store, unique tables, and apply cache for one family of diagrams.
///
/// A manager is single-threaded and diagrams from different managers must
/// never be mixed; concurrent runs each get their own manager.
pub struct AddManager {
    order: VarOrder,
    cards: Vec<usize>,
    nodes: Vec<Node>,
    unique_dec: FxHashMap<(u32, Box<[Add]>), Add>,
    unique_term: FxHashMap<u64, Add>,
    cache: FxHashMap<(Op, Add, Add), Add>,
}

fn term_bits(v: f64) -> u64 {
    // collapse -0.0 so terminal identity is value identity
    if v == 0.0 {
        0.0f64.to_bits()
    } else {
        v.to_bits()
    }
}

impl AddManager {
    pub fn new(order: VarOrder, cards: Vec<usize>) -> Self {
        assert_eq!(order.len(), cards.len());
        AddManager {
            order,
            cards,
            nodes: Vec::new(),
            unique_dec: FxHashMap::default(),
            unique_term: FxHashMap::default(),
            cache: FxHashMap::default(),
        }
    }

    pub fn order(&self) -> &VarOrder {
        &self.order
    }

    pub fn card(&self, var: usize) -> usize {
        self.cards[var]
    }

    pub fn terminal(&mut self, v: f64) -> Add {
        debug_assert!(v.is_finite() && v >= 0.0);
        let bits = term_bits(v);
        if let Some(&id) = self.unique_term.get(&bits) {
            return id;
        }
        let id = Add(self.nodes.len() as u32);
        self.nodes.push(Node::Terminal(f64::from_bits(bits)));
        self.unique_term.insert(bits, id);
        id
    }

    /// Terminal value if `d` is a terminal.
    pub fn terminal_value(&self, d: Add) -> Option<f64> {
        match &self.nodes[d.0 as usize] {
            Node::Terminal(v) => Some(*v),
            _ => None,
        }
    }

    fn var_of(&self, d: Add) -> Option<usize> {
        match &self.nodes[d.0 as usize] {
            Node::Decision { var, .. } => Some(*var as usize),
            _ => None,
        }
    }

    fn pos_of(&self, d: Add) -> usize {
        match self.var_of(d) {
            Some(v) => self.order.position(v),
            None => usize::MAX,
        }
    }

    /// Child of a decision node for a domain value.
    pub fn child(&self, d: Add, i: usize) -> Add {
        match &self.nodes[d.0 as usize] {
            Node::Decision { children, .. } => children[i],
            _ => unreachable!("child of terminal"),
        }
    }

    /// Cofactor on `var = val`: descends if the root tests `var`.
    fn cofactor(&self, d: Add, var: usize, val: usize) -> Add {
        match &self.nodes[d.0 as usize] {
            Node::Decision { var: nv, children } if *nv as usize == var => children[val],
            _ => d,
        }
    }

    fn make_decision(&mut self, var: usize, children: Vec<Add>) -> Add {
        debug_assert_eq!(children.len(), self.cards[var]);
        if children.iter().all(|&c| c == children[0]) {
            return children[0];
        }
        let key = (var as u32, children.into_boxed_slice());
        if let Some(&id) = self.unique_dec.get(&key) {
            return id;
        }
        let id = Add(self.nodes.len() as u32);
        self.nodes.push(Node::Decision {
            var: key.0,
            children: key.1.clone(),
        });
        self.unique_dec.insert(key, id);
        id
    }

    /// Build the diagram of a dense factor; agrees with it at every point.
    #[allow(clippy::wrong_self_convention)]
    pub fn from_dense(&mut self, f: &DenseFactor) -> Add {
        let by_order = self.order.sort_vars(f.scope());
        let factor_pos: Vec<usize> = by_order
            .iter()
            .map(|v| f.scope().iter().position(|s| s == v).unwrap())
            .collect();
        let mut tuple = vec![0usize; f.scope().len()];
        self.build_dense_rec(f, &by_order, &factor_pos, 0, &mut tuple)
    }

    fn build_dense_rec(
        &mut self,
        f: &DenseFactor,
        by_order: &[usize],
        factor_pos: &[usize],
        depth: usize,
        tuple: &mut Vec<usize>,
    ) -> Add {
        if depth == by_order.len() {
            return self.terminal(f.values()[f.index_of(tuple)]);
        }
        let var = by_order[depth];
        let children: Vec<Add> = (0..self.cards[var])
            .map(|val| {
                tuple[factor_pos[depth]] = val;
                self.build_dense_rec(f, by_order, factor_pos, depth + 1, tuple)
            })
            .collect();
        self.make_decision(var, children)
    }

    /// Value at a full assignment (indexed by variable).
    pub fn evaluate(&self, d: Add, full: &[usize]) -> f64 {
        let mut cur = d;
        loop {
            match &self.nodes[cur.0 as usize] {
                Node::Terminal(v) => return *v,
                Node::Decision { var, children } => cur = children[full[*var as usize]],
            }
        }
    }

    pub fn product(&mut self, a: Add, b: Add) -> Add {
        self.cache.clear();
        self.apply(Op::Mul, a, b).expect("product cannot fail")
    }

    pub fn plus(&mut self, a: Add, b: Add) -> Add {
        self.cache.clear();
        self.apply(Op::Plus, a, b).expect("plus cannot fail")
    }

    pub fn divide(&mut self, a: Add, b: Add) -> Result<Add> {
        self.cache.clear();
        self.apply(Op::Div, a, b)
    }

    fn apply(&mut self, op: Op, a: Add, b: Add) -> Result<Add> {
        // terminal shortcuts that need no recursion
        match op {
            Op::Mul => {
                if self.terminal_value(a) == Some(0.0) || self.terminal_value(b) == Some(0.0) {
                    return Ok(self.terminal(0.0));
                }
                if self.terminal_value(a) == Some(1.0) {
                    return Ok(b);
                }
                if self.terminal_value(b) == Some(1.0) {
                    return Ok(a);
                }
            }
            Op::Plus => {
                if self.terminal_value(a) == Some(0.0) {
                    return Ok(b);
                }
                if self.terminal_value(b) == Some(0.0) {
                    return Ok(a);
                }
            }
            Op::Div => {
                if self.terminal_value(a) == Some(0.0) {
                    return Ok(self.terminal(0.0));
                }
                if self.terminal_value(b) == Some(1.0) {
                    return Ok(a);
                }
            }
        }
        if let (Some(va), Some(vb)) = (self.terminal_value(a), self.terminal_value(b)) {
            let v = match op {
                Op::Mul => va * vb,
                Op::Plus => va + vb,
                Op::Div => {
                    if vb == 0.0 {
                        if va == 0.0 {
                            0.0
                        } else {
                            return Err(ModelError::DivisionSupport { index: 0 });
                        }
                    } else {
                        va / vb
                    }
                }
            };
            return Ok(self.terminal(v));
        }
        let key = match op {
            Op::Mul | Op::Plus => (op, a.min(b), a.max(b)),
            Op::Div => (op, a, b),
        };
        if let Some(&hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let (pa, pb) = (self.pos_of(a), self.pos_of(b));
        let var = self.order.var_at(pa.min(pb));
        let children = (0..self.cards[var])
            .map(|val| {
                let ca = self.cofactor(a, var, val);
                let cb = self.cofactor(b, var, val);
                self.apply(op, ca, cb)
            })
            .collect::<Result<Vec<_>>>()?;
        let out = self.make_decision(var, children);
        self.cache.insert(key, out);
        Ok(out)
    }

    /// Sum out a set of variables. A variable absent from every path scales
    /// the function by its cardinality.
    pub fn sum_out(&mut self, d: Add, vars: &[usize]) -> Add {
        self.cache.clear();
        // eliminate bottom-most first so each pass stays below the others
        let mut by_order = self.order.sort_vars(vars);
        by_order.reverse();
        let mut cur = d;
        for y in by_order {
            let mut memo = FxHashMap::default();
            cur = self.sum_var(cur, y, &mut memo);
        }
        cur
    }

    fn sum_var(&mut self, d: Add, y: usize, memo: &mut FxHashMap<Add, Add>) -> Add {
        if let Some(&hit) = memo.get(&d) {
            return hit;
        }
        let ypos = self.order.position(y);
        let out = match &self.nodes[d.0 as usize] {
            Node::Terminal(v) => {
                let v = *v * self.cards[y] as f64;
                self.terminal(v)
            }
            Node::Decision { var, children } => {
                let var = *var as usize;
                let children: Vec<Add> = children.to_vec();
                if var == y {
                    let mut acc = children[0];
                    for &c in &children[1..] {
                        acc = self.apply(Op::Plus, acc, c).expect("plus cannot fail");
                    }
                    acc
                } else if self.order.position(var) > ypos {
                    // y is skipped on every path through d
                    let k = self.terminal(self.cards[y] as f64);
                    self.apply(Op::Mul, d, k).expect("product cannot fail")
                } else {
                    let mapped: Vec<Add> =
                        children.iter().map(|&c| self.sum_var(c, y, memo)).collect();
                    self.make_decision(var, mapped)
                }
            }
        };
        memo.insert(d, out);
        out
    }

    /// Total mass of the function over a scope (sums every scope variable).
    pub fn total_over(&mut self, d: Add, scope: &[usize]) -> f64 {
        let s = self.sum_out(d, scope);
        self.terminal_value(s)
            .expect("summing the full scope yields a terminal")
    }

    /// Distinct terminals reachable from `d`, sorted by value.
    pub fn terminals_of(&self, d: Add) -> Vec<Add> {
        let mut seen = FxHashMap::default();
        let mut stack = vec![d];
        let mut terms = Vec::new();
        while let Some(n) = stack.pop() {
            if seen.insert(n, ()).is_some() {
                continue;
            }
            match &self.nodes[n.0 as usize] {
                Node::Terminal(_) => terms.push(n),
                Node::Decision { children, .. } => stack.extend(children.iter().copied()),
            }
        }
        terms.sort_by(|&a, &b| {
            self.terminal_value(a)
                .partial_cmp(&self.terminal_value(b))
                .unwrap()
        });
        terms
    }

    /// Variables tested somewhere in `d`, sorted by index.
    pub fn support_vars(&self, d: Add) -> Vec<usize> {
        let mut seen = FxHashMap::default();
        let mut stack = vec![d];
        let mut vars = Vec::new();
        while let Some(n) = stack.pop() {
            if seen.insert(n, ()).is_some() {
                continue;
            }
            if let Node::Decision { var, children } = &self.nodes[n.0 as usize] {
                vars.push(*var as usize);
                stack.extend(children.iter().copied());
            }
        }
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Reachable node count (decision + terminal).
    pub fn node_count(&self, d: Add) -> usize {
        let mut seen = FxHashMap::default();
        let mut stack = vec![d];
        let mut n = 0;
        while let Some(x) = stack.pop() {
            if seen.insert(x, ()).is_some() {
                continue;
            }
            n += 1;
            if let Node::Decision { children, .. } = &self.nodes[x.0 as usize] {
                stack.extend(children.iter().copied());
            }
        }
        n
    }

    pub fn decision_count(&self, d: Add) -> usize {
        let mut seen = FxHashMap::default();
        let mut stack = vec![d];
        let mut n = 0;
        while let Some(x) = stack.pop() {
            if seen.insert(x, ()).is_some() {
                continue;
            }
            if let Node::Decision { children, .. } = &self.nodes[x.0 as usize] {
                n += 1;
                stack.extend(children.iter().copied());
            }
        }
        n
    }

    /// Number of complete `scope` assignments whose path reaches `target`.
    ///
    /// Paths are counted with multiplicity: a scope variable skipped along a
    /// path contributes a factor of its cardinality.
    pub fn leaf_model_count(&self, d: Add, target: Add, scope: &[usize]) -> u64 {
        let by_order = self.order.sort_vars(scope);
        let rank: FxHashMap<usize, usize> =
            by_order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for v in self.support_vars(d) {
            assert!(rank.contains_key(&v), "diagram tests {v} outside the scope");
        }
        let mut memo: FxHashMap<Add, u64> = FxHashMap::default();
        let total = self.count_rec(d, target, &by_order, &rank, &mut memo);
        let root_rank = match self.var_of(d) {
            Some(v) => rank[&v],
            None => by_order.len(),
        };
        let prefix: u64 = by_order[..root_rank]
            .iter()
            .map(|&v| self.cards[v] as u64)
            .product();
        prefix * total
    }

    fn count_rec(
        &self,
        d: Add,
        target: Add,
        by_order: &[usize],
        rank: &FxHashMap<usize, usize>,
        memo: &mut FxHashMap<Add, u64>,
    ) -> u64 {
        if let Some(&hit) = memo.get(&d) {
            return hit;
        }
        let out = match &self.nodes[d.0 as usize] {
            Node::Terminal(_) => u64::from(d == target),
            Node::Decision { var, children } => {
                let my_rank = rank[&(*var as usize)];
                let mut acc = 0u64;
                for &c in children.iter() {
                    let child_rank = match self.var_of(c) {
                        Some(v) => rank[&v],
                        None => by_order.len(),
                    };
                    let skipped: u64 = by_order[my_rank + 1..child_rank]
                        .iter()
                        .map(|&v| self.cards[v] as u64)
                        .product();
                    acc += skipped * self.count_rec(c, target, by_order, rank, memo);
                }
                acc
            }
        };
        memo.insert(d, out);
        out
    }

    /// Mean-per-feature projection of `phi` onto the shape of `structure`.
    ///
    /// Every nonzero terminal of `structure` is replaced by the arithmetic
    /// mean of `phi` over the assignments reaching that terminal, accumulated
    /// in one joint bottom-up pass; the zero terminal stays zero.
    pub fn lossy_project(&mut self, phi: Add, structure: Add, scope: &[usize]) -> Add {
        let by_order = self.order.sort_vars(scope);
        let mut memo: FxHashMap<(Add, Add, usize), ProjAcc> = FxHashMap::default();
        let acc = self.project_walk(structure, phi, 0, &by_order, &mut memo);
        let mut subst: FxHashMap<u64, f64> = FxHashMap::default();
        for (term, (sum, count)) in acc {
            let old = self.terminal_value(term).unwrap();
            if old != 0.0 && count > 0 {
                subst.insert(term_bits(old), sum / count as f64);
            }
        }
        let mut memo2 = FxHashMap::default();
        self.map_terminals(structure, &subst, &mut memo2)
    }

    fn project_walk(
        &mut self,
        s: Add,
        f: Add,
        depth: usize,
        by_order: &[usize],
        memo: &mut FxHashMap<(Add, Add, usize), ProjAcc>,
    ) -> ProjAcc {
        if let Some(hit) = memo.get(&(s, f, depth)) {
            return hit.clone();
        }
        let out = if depth == by_order.len() {
            let fv = self
                .terminal_value(f)
                .expect("phi tests a variable outside the scope");
            debug_assert!(self.terminal_value(s).is_some());
            let mut m = ProjAcc::new();
            m.insert(s, (fv, 1u64));
            m
        } else {
            let v = by_order[depth];
            let tests = self.var_of(s) == Some(v) || self.var_of(f) == Some(v);
            if !tests {
                let mut inner = self.project_walk(s, f, depth + 1, by_order, memo);
                let k = self.cards[v];
                for (sum, count) in inner.values_mut() {
                    *sum *= k as f64;
                    *count *= k as u64;
                }
                inner
            } else {
                let mut merged = ProjAcc::new();
                for val in 0..self.cards[v] {
                    let cs = self.cofactor(s, v, val);
                    let cf = self.cofactor(f, v, val);
                    for (term, (sum, count)) in self.project_walk(cs, cf, depth + 1, by_order, memo)
                    {
                        let e = merged.entry(term).or_insert((0.0, 0));
                        e.0 += sum;
                        e.1 += count;
                    }
                }
                merged
            }
        };
        memo.insert((s, f, depth), out.clone());
        out
    }

    fn map_terminals(
        &mut self,
        d: Add,
        subst: &FxHashMap<u64, f64>,
        memo: &mut FxHashMap<Add, Add>,
    ) -> Add {
        if let Some(&hit) = memo.get(&d) {
            return hit;
        }
        let out = match &self.nodes[d.0 as usize] {
            Node::Terminal(v) => {
                let nv = subst.get(&term_bits(*v)).copied().unwrap_or(*v);
                self.terminal(nv)
            }
            Node::Decision { var, children } => {
                let var = *var as usize;
                let children: Vec<Add> = children.to_vec();
                let mapped: Vec<Add> = children
                    .iter()
                    .map(|&c| self.map_terminals(c, subst, memo))
                    .collect();
                self.make_decision(var, mapped)
            }
        };
        memo.insert(d, out);
        out
    }

    /// Rebuild `d` with one terminal value replaced (re-reducing).
    pub fn replace_terminal(&mut self, d: Add, old: f64, new: f64) -> Add {
        let mut subst = FxHashMap::default();
        subst.insert(term_bits(old), new);
        let mut memo = FxHashMap::default();
        self.map_terminals(d, &subst, &mut memo)
    }

    /// Merge terminal values into epsilon-bins and re-reduce; eps = 0 is the
    /// identity. The zero terminal never participates in binning.
    pub fn quantize(&mut self, d: Add, eps: f64) -> Add {
        let vals: Vec<f64> = self
            .terminals_of(d)
            .iter()
            .map(|&t| self.terminal_value(t).unwrap())
            .collect();
        let map = crate::quant::quantize_values(&vals, eps);
        let mut subst = FxHashMap::default();
        for v in vals {
            if v > 0.0 {
                subst.insert(term_bits(v), map.apply(v));
            }
        }
        let mut memo = FxHashMap::default();
        self.map_terminals(d, &subst, &mut memo)
    }

    /// 0/1 indicator of a tuple set over `scope`.
    pub fn indicator(&mut self, scope: &[usize], tuples: &[Vec<usize>]) -> Add {
        let by_order = self.order.sort_vars(scope);
        let perm: Vec<usize> = by_order
            .iter()
            .map(|v| scope.iter().position(|s| s == v).unwrap())
            .collect();
        let mut reordered: Vec<Vec<usize>> = tuples
            .iter()
            .map(|t| perm.iter().map(|&p| t[p]).collect())
            .collect();
        reordered.sort();
        reordered.dedup();
        self.indicator_rec(&by_order, 0, &reordered)
    }

    fn indicator_rec(&mut self, by_order: &[usize], depth: usize, group: &[Vec<usize>]) -> Add {
        if group.is_empty() {
            return self.terminal(0.0);
        }
        if depth == by_order.len() {
            return self.terminal(1.0);
        }
        let var = by_order[depth];
        let children: Vec<Add> = (0..self.cards[var])
            .map(|val| {
                let lo = group.partition_point(|t| t[depth] < val);
                let hi = group.partition_point(|t| t[depth] <= val);
                self.indicator_rec(by_order, depth + 1, &group[lo..hi])
            })
            .collect();
        self.make_decision(var, children)
    }

    /// Dense expansion over a scope (scope must cover the diagram's support).
    pub fn to_dense(&self, d: Add, scope: &[usize], cards: &[usize]) -> DenseFactor {
        let n = self.cards.len();
        let len: usize = cards.iter().product();
        let mut values = vec![0.0; len];
        let mut full = vec![0usize; n];
        let mut tuple = vec![0usize; scope.len()];
        for (idx, slot) in values.iter_mut().enumerate() {
            let mut rem = idx;
            for i in (0..cards.len()).rev() {
                tuple[i] = rem % cards[i];
                rem /= cards[i];
            }
            for (i, &v) in scope.iter().enumerate() {
                full[v] = tuple[i];
            }
            *slot = self.evaluate(d, &full);
        }
        DenseFactor::new(scope.to_vec(), cards.to_vec(), values).expect("valid expansion")
    }

    /// DOT text dump for debugging; best-effort, not a stable format.
    pub fn to_dot(&self, d: Add) -> String {
        let mut out = String::from("digraph add {\n");
        let mut seen = FxHashMap::default();
        let mut stack = vec![d];
        while let Some(n) = stack.pop() {
            if seen.insert(n, ()).is_some() {
                continue;
            }
            match &self.nodes[n.0 as usize] {
                Node::Terminal(v) => {
                    out.push_str(&format!("  n{} [shape=box,label=\"{}\"];\n", n.0, v));
                }
                Node::Decision { var, children } => {
                    out.push_str(&format!("  n{} [label=\"x{}\"];\n", n.0, var));
                    for (val, c) in children.iter().enumerate() {
                        out.push_str(&format!("  n{} -> n{} [label=\"{}\"];\n", n.0, c.0, val));
                        stack.push(*c);
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Structural check used by tests: ordered, no redundant node, and no two
    /// reachable nodes isomorphic.
    pub fn validate_reduced_ordered(&self, d: Add) -> bool {
        let mut seen = FxHashMap::default();
        let mut stack = vec![d];
        let mut dec_sigs: FxHashMap<(u32, Vec<Add>), Add> = FxHashMap::default();
        let mut term_sigs: FxHashMap<u64, Add> = FxHashMap::default();
        while let Some(n) = stack.pop() {
            if seen.insert(n, ()).is_some() {
                continue;
            }
            match &self.nodes[n.0 as usize] {
                Node::Terminal(v) => {
                    if term_sigs.insert(term_bits(*v), n).is_some() {
                        return false;
                    }
                }
                Node::Decision { var, children } => {
                    if children.iter().all(|&c| c == children[0]) {
                        return false;
                    }
                    let my_pos = self.order.position(*var as usize);
                    for &c in children.iter() {
                        if let Some(cv) = self.var_of(c) {
                            if self.order.position(cv) <= my_pos {
                                return false;
                            }
                        }
                        stack.push(c);
                    }
                    if dec_sigs.insert((*var, children.to_vec()), n).is_some() {
                        return false;
                    }
                }
            }
        }
        true
    }
}
