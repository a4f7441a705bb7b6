//! Graphical-model core types and dense table algebra.
//!
//! A model is a set of finite-domain variables plus nonnegative factors; the
//! unnormalized weight of a full assignment is the product of factor values
//! and the partition function is its sum over all assignments. Factor tables
//! are stored row-major over the scope sorted by variable index, last scope
//! variable fastest, so any two representations of the same function can be
//! compared cell for cell.

use crate::counters;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scope contract violation: {0}")]
    Scope(String),
    #[error("division by zero outside divisor support at cell {index}")]
    DivisionSupport { index: usize },
    #[error("cannot normalize an all-zero table")]
    ZeroNormalize,
    #[error("enumeration cap exceeded: {configs} configurations > cap {cap}")]
    EnumCap { configs: u128, cap: u64 },
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Default cap on brute-force enumeration, in total configurations.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 24;

/// A model variable: dense 0-based index and finite domain size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variable {
    pub index: usize,
    pub cardinality: usize,
}

/// A full assignment of values to all model variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

/// Nonnegative function over a sorted scope as a flat row-major table.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFactor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

fn table_len(cards: &[usize]) -> usize {
    cards.iter().product()
}

impl DenseFactor {
    /// Build a factor whose scope is already sorted by variable index.
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(ModelError::Invalid("scope/cards length mismatch".into()));
        }
        if scope.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::Invalid(
                "scope must be strictly increasing variable indices".into(),
            ));
        }
        if values.len() != table_len(&cards) {
            return Err(ModelError::Invalid(format!(
                "table length {} does not match scope size {}",
                values.len(),
                table_len(&cards)
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::Invalid(
                "table values must be finite and nonnegative".into(),
            ));
        }
        Ok(DenseFactor {
            scope,
            cards,
            values,
        })
    }

    /// Build from a table laid out in an arbitrary scope order (last variable
    /// fastest), permuting into the canonical sorted layout.
    pub fn from_unsorted(scope: &[usize], cards: &[usize], values: &[f64]) -> Result<Self> {
        let mut perm: Vec<usize> = (0..scope.len()).collect();
        perm.sort_by_key(|&i| scope[i]);
        let sorted_scope: Vec<usize> = perm.iter().map(|&i| scope[i]).collect();
        let sorted_cards: Vec<usize> = perm.iter().map(|&i| cards[i]).collect();
        if sorted_scope.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::Invalid("duplicate variable in scope".into()));
        }
        if values.len() != table_len(cards) {
            return Err(ModelError::Invalid("table length mismatch".into()));
        }
        // stride of each source position in the source layout
        let mut src_stride = vec![1usize; scope.len()];
        for i in (0..scope.len().saturating_sub(1)).rev() {
            src_stride[i] = src_stride[i + 1] * cards[i + 1];
        }
        let mut out = vec![0.0; values.len()];
        let mut tuple = vec![0usize; sorted_scope.len()];
        for (dst, slot) in out.iter_mut().enumerate() {
            // decode dst in sorted layout
            let mut rem = dst;
            for i in (0..sorted_cards.len()).rev() {
                tuple[i] = rem % sorted_cards[i];
                rem /= sorted_cards[i];
            }
            let mut src = 0;
            for (sorted_pos, &orig_pos) in perm.iter().enumerate() {
                src += tuple[sorted_pos] * src_stride[orig_pos];
            }
            *slot = values[src];
        }
        DenseFactor::new(sorted_scope, sorted_cards, out)
    }

    /// Scalar factor with empty scope.
    pub fn constant(v: f64) -> Self {
        DenseFactor {
            scope: vec![],
            cards: vec![],
            values: vec![v],
        }
    }

    pub fn ones(scope: Vec<usize>, cards: Vec<usize>) -> Self {
        let len = table_len(&cards);
        DenseFactor {
            scope,
            cards,
            values: vec![1.0; len],
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat index of a scope-local tuple.
    pub fn index_of(&self, tuple: &[usize]) -> usize {
        let mut idx = 0;
        for (i, &v) in tuple.iter().enumerate() {
            idx = idx * self.cards[i] + v;
        }
        idx
    }

    /// Scope-local tuple of a flat index.
    pub fn tuple_of(&self, mut idx: usize) -> Vec<usize> {
        let mut tuple = vec![0usize; self.cards.len()];
        for i in (0..self.cards.len()).rev() {
            tuple[i] = idx % self.cards[i];
            idx /= self.cards[i];
        }
        tuple
    }

    /// Value at a full model assignment (projects onto the scope).
    pub fn value_in(&self, full: &[usize]) -> f64 {
        let mut idx = 0;
        for (i, &var) in self.scope.iter().enumerate() {
            idx = idx * self.cards[i] + full[var];
        }
        self.values[idx]
    }

    /// Pointwise product; the scope is the union of both scopes.
    pub fn product(&self, other: &DenseFactor) -> DenseFactor {
        let (scope, cards) = union_scope(&self.scope, &self.cards, &other.scope, &other.cards);
        let len = table_len(&cards);
        let a_pos = positions_in(&scope, &self.scope);
        let b_pos = positions_in(&scope, &other.scope);
        let mut out = vec![0.0; len];
        let mut tuple = vec![0usize; scope.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            decode(idx, &cards, &mut tuple);
            let a = self.values[project_index(&tuple, &a_pos, &self.cards)];
            let b = other.values[project_index(&tuple, &b_pos, &other.cards)];
            *slot = a * b;
        }
        counters::count_dense(3 * len as u64);
        DenseFactor {
            scope,
            cards,
            values: out,
        }
    }

    /// Sum out the variables of `vars`, which must be a subset of the scope.
    pub fn sum_out(&self, vars: &[usize]) -> Result<DenseFactor> {
        for v in vars {
            if !self.scope.contains(v) {
                return Err(ModelError::Scope(format!(
                    "cannot sum out variable {v}: not in scope"
                )));
            }
        }
        let keep: Vec<usize> = (0..self.scope.len())
            .filter(|i| !vars.contains(&self.scope[*i]))
            .collect();
        let scope: Vec<usize> = keep.iter().map(|&i| self.scope[i]).collect();
        let cards: Vec<usize> = keep.iter().map(|&i| self.cards[i]).collect();
        let len = table_len(&cards);
        let mut out = vec![0.0; len];
        let mut tuple = vec![0usize; self.scope.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            decode(idx, &self.cards, &mut tuple);
            let mut o = 0;
            for &i in &keep {
                o = o * self.cards[i] + tuple[i];
            }
            out[o] += v;
        }
        counters::count_dense((self.values.len() + len) as u64);
        Ok(DenseFactor {
            scope,
            cards,
            values: out,
        })
    }

    /// Pointwise quotient with the 0/0 = 0 convention. The divisor scope must
    /// be a subset of this factor's scope; dividing a positive value by zero
    /// is a support error.
    pub fn divide(&self, other: &DenseFactor) -> Result<DenseFactor> {
        for v in &other.scope {
            if !self.scope.contains(v) {
                return Err(ModelError::Scope(format!(
                    "divisor scope variable {v} not in dividend scope"
                )));
            }
        }
        let b_pos = positions_in(&self.scope, &other.scope);
        let mut out = vec![0.0; self.values.len()];
        let mut tuple = vec![0usize; self.scope.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            decode(idx, &self.cards, &mut tuple);
            let a = self.values[idx];
            let b = other.values[project_index(&tuple, &b_pos, &other.cards)];
            if b == 0.0 {
                if a == 0.0 {
                    *slot = 0.0;
                } else {
                    return Err(ModelError::DivisionSupport { index: idx });
                }
            } else {
                *slot = a / b;
            }
        }
        counters::count_dense(3 * self.values.len() as u64);
        Ok(DenseFactor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: out,
        })
    }

    /// Rescale so values sum to 1.
    pub fn normalize(&self) -> Result<DenseFactor> {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return Err(ModelError::ZeroNormalize);
        }
        counters::count_dense(2 * self.values.len() as u64);
        Ok(DenseFactor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|v| v / total).collect(),
        })
    }

    /// Broadcast to a superset scope.
    pub fn expand_to(&self, scope: &[usize], cards: &[usize]) -> DenseFactor {
        let pos = positions_in(scope, &self.scope);
        let len = table_len(cards);
        let mut out = vec![0.0; len];
        let mut tuple = vec![0usize; scope.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            decode(idx, cards, &mut tuple);
            *slot = self.values[project_index(&tuple, &pos, &self.cards)];
        }
        DenseFactor {
            scope: scope.to_vec(),
            cards: cards.to_vec(),
            values: out,
        }
    }

    /// Multiply every value by a nonnegative constant.
    pub fn scale(&self, c: f64) -> DenseFactor {
        counters::count_dense(self.values.len() as u64);
        DenseFactor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Replace each positive value by its epsilon-bin mean.
    pub fn quantize(&self, eps: f64) -> DenseFactor {
        let map = crate::quant::quantize_values(&self.values, eps);
        counters::count_dense(2 * self.values.len() as u64);
        DenseFactor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|&v| map.apply(v)).collect(),
        }
    }
}

fn decode(mut idx: usize, cards: &[usize], tuple: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        tuple[i] = idx % cards[i];
        idx /= cards[i];
    }
}

fn union_scope(
    a: &[usize],
    a_cards: &[usize],
    b: &[usize],
    b_cards: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let mut scope = Vec::with_capacity(a.len() + b.len());
    let mut cards = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            scope.push(a[i]);
            cards.push(a_cards[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            scope.push(b[j]);
            cards.push(b_cards[j]);
            j += 1;
        } else {
            scope.push(a[i]);
            cards.push(a_cards[i]);
            i += 1;
            j += 1;
        }
    }
    (scope, cards)
}

/// For each variable of `sub`, its position in `sup` (must be present).
fn positions_in(sup: &[usize], sub: &[usize]) -> Vec<usize> {
    sub.iter()
        .map(|v| sup.iter().position(|s| s == v).expect("subscope"))
        .collect()
}

fn project_index(tuple: &[usize], pos: &[usize], cards: &[usize]) -> usize {
    let mut idx = 0;
    for (i, &p) in pos.iter().enumerate() {
        idx = idx * cards[i] + tuple[p];
    }
    idx
}

/// KL divergence between two same-scope tables after normalizing both.
///
/// Terms with p = 0 contribute nothing; p > 0 against q = 0 makes the
/// divergence infinite, returned as the +infinity marker.
pub fn kl_divergence(p: &DenseFactor, q: &DenseFactor) -> Result<f64> {
    if p.scope != q.scope {
        return Err(ModelError::Scope("kl_divergence needs equal scopes".into()));
    }
    let pn = p.normalize()?;
    let qn = q.normalize()?;
    let mut kl = 0.0;
    for (pv, qv) in pn.values.iter().zip(qn.values.iter()) {
        if *pv > 0.0 {
            if *qv == 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += pv * (pv / qv).ln();
        }
    }
    Ok(kl)
}

/// A Markov network: variables with finite domains and nonnegative factors.
#[derive(Debug, Clone)]
pub struct GraphicalModel {
    variables: Vec<Variable>,
    factors: Vec<DenseFactor>,
}

impl GraphicalModel {
    pub fn new(cards: Vec<usize>, factors: Vec<DenseFactor>) -> Result<Self> {
        if cards.is_empty() {
            return Err(ModelError::Invalid("model has no variables".into()));
        }
        if let Some(bad) = cards.iter().position(|&c| c < 2) {
            return Err(ModelError::Invalid(format!(
                "variable {bad} has cardinality < 2"
            )));
        }
        for (fi, f) in factors.iter().enumerate() {
            for (i, &v) in f.scope().iter().enumerate() {
                if v >= cards.len() {
                    return Err(ModelError::Invalid(format!(
                        "factor {fi} references unknown variable {v}"
                    )));
                }
                if f.cards()[i] != cards[v] {
                    return Err(ModelError::Invalid(format!(
                        "factor {fi} disagrees on cardinality of variable {v}"
                    )));
                }
            }
        }
        let variables = cards
            .iter()
            .enumerate()
            .map(|(index, &cardinality)| Variable { index, cardinality })
            .collect();
        Ok(GraphicalModel { variables, factors })
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn card(&self, var: usize) -> usize {
        self.variables[var].cardinality
    }

    pub fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[DenseFactor] {
        &self.factors
    }

    /// Total number of full configurations, saturating.
    pub fn config_count(&self) -> u128 {
        self.variables
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.cardinality as u128))
    }

    pub fn assignments(&self) -> AssignmentIter {
        AssignmentIter {
            cards: self.cards(),
            current: vec![0; self.n_vars()],
            done: false,
        }
    }
}

/// Iterates all full assignments in row-major order (last variable fastest).
pub struct AssignmentIter {
    cards: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for AssignmentIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let item = self.current.clone();
        let mut i = self.cards.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.current[i] += 1;
            if self.current[i] < self.cards[i] {
                break;
            }
            self.current[i] = 0;
        }
        Some(item)
    }
}

/// Product of all factor values at one full assignment.
pub fn evaluate_unnormalized(model: &GraphicalModel, x: &Assignment) -> f64 {
    model.factors().iter().map(|f| f.value_in(&x.0)).product()
}

/// Partition function by direct enumeration under the default cap.
pub fn partition_bruteforce(model: &GraphicalModel) -> Result<f64> {
    partition_bruteforce_capped(model, DEFAULT_ENUM_CAP)
}

pub fn partition_bruteforce_capped(model: &GraphicalModel, cap: u64) -> Result<f64> {
    let configs = model.config_count();
    if configs > cap as u128 {
        return Err(ModelError::EnumCap { configs, cap });
    }
    let mut z = 0.0;
    for x in model.assignments() {
        z += model
            .factors()
            .iter()
            .map(|f| f.value_in(&x))
            .product::<f64>();
    }
    Ok(z)
}

// ---------------------------------------------------------------------------
// Model file ingestion
// ---------------------------------------------------------------------------

struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>, // (line, token)
    at: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                toks.push((ln + 1, tok));
            }
        }
        Tokens { toks, at: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        if self.at >= self.toks.len() {
            let line = self.toks.last().map(|t| t.0).unwrap_or(1);
            return Err(ModelError::Parse {
                line,
                msg: format!("unexpected end of file, expected {what}"),
            });
        }
        let t = self.toks[self.at];
        self.at += 1;
        Ok(t)
    }

    fn usize(&mut self, what: &str) -> Result<(usize, usize)> {
        let (line, tok) = self.next(what)?;
        tok.parse::<usize>()
            .map(|v| (line, v))
            .map_err(|_| ModelError::Parse {
                line,
                msg: format!("expected {what}, got `{tok}`"),
            })
    }

    fn f64(&mut self, what: &str) -> Result<(usize, f64)> {
        let (line, tok) = self.next(what)?;
        tok.parse::<f64>()
            .map(|v| (line, v))
            .map_err(|_| ModelError::Parse {
                line,
                msg: format!("expected {what}, got `{tok}`"),
            })
    }

    fn exhausted(&self) -> Option<usize> {
        if self.at < self.toks.len() {
            Some(self.toks[self.at].0)
        } else {
            None
        }
    }
}

/// Parse a MARKOV-preamble model file.
///
/// Layout: `MARKOV`, variable count, the cardinalities, factor count, one
/// scope line per factor (`arity v1 .. vk`), then one table block per factor
/// (`len` followed by `len` values, row-major with the last scope variable
/// fastest).
pub fn parse_uai(text: &str) -> Result<GraphicalModel> {
    let mut t = Tokens::new(text);
    let (line, kind) = t.next("preamble")?;
    if !kind.eq_ignore_ascii_case("MARKOV") {
        return Err(ModelError::Parse {
            line,
            msg: format!("expected MARKOV preamble, got `{kind}`"),
        });
    }
    let (_, n_vars) = t.usize("variable count")?;
    if n_vars == 0 {
        return Err(ModelError::Parse {
            line,
            msg: "model must declare at least one variable".into(),
        });
    }
    let mut cards = Vec::with_capacity(n_vars);
    for i in 0..n_vars {
        let (ln, c) = t.usize("cardinality")?;
        if c < 2 {
            return Err(ModelError::Parse {
                line: ln,
                msg: format!("variable {i} has cardinality {c}, need >= 2"),
            });
        }
        cards.push(c);
    }
    let (_, n_factors) = t.usize("factor count")?;
    let mut scopes: Vec<Vec<usize>> = Vec::with_capacity(n_factors);
    for fi in 0..n_factors {
        let (_, arity) = t.usize("scope arity")?;
        let mut scope = Vec::with_capacity(arity);
        for _ in 0..arity {
            let (ln, v) = t.usize("scope variable")?;
            if v >= n_vars {
                return Err(ModelError::Parse {
                    line: ln,
                    msg: format!("factor {fi} references unknown variable {v}"),
                });
            }
            if scope.contains(&v) {
                return Err(ModelError::Parse {
                    line: ln,
                    msg: format!("factor {fi} repeats variable {v} in its scope"),
                });
            }
            scope.push(v);
        }
        scopes.push(scope);
    }
    let mut factors = Vec::with_capacity(n_factors);
    for (fi, scope) in scopes.iter().enumerate() {
        let (ln, declared) = t.usize("table length")?;
        let expect: usize = scope.iter().map(|&v| cards[v]).product();
        if declared != expect {
            return Err(ModelError::Parse {
                line: ln,
                msg: format!(
                    "factor {fi} declares table length {declared}, scope requires {expect}"
                ),
            });
        }
        let mut values = Vec::with_capacity(declared);
        for _ in 0..declared {
            let (vln, v) = t.f64("table value")?;
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::Parse {
                    line: vln,
                    msg: format!("factor {fi} has a negative or non-finite value"),
                });
            }
            values.push(v);
        }
        let fcards: Vec<usize> = scope.iter().map(|&v| cards[v]).collect();
        factors.push(DenseFactor::from_unsorted(scope, &fcards, &values)?);
    }
    if let Some(ln) = t.exhausted() {
        return Err(ModelError::Parse {
            line: ln,
            msg: "trailing content after the last table".into(),
        });
    }
    GraphicalModel::new(cards, factors)
}

/// Serialize a model back to the MARKOV text format (canonical scope order,
/// last scope variable fastest); `parse_uai` round-trips it.
pub fn format_uai(model: &GraphicalModel) -> String {
    use std::fmt::Write;
    let mut s = String::from("MARKOV\n");
    writeln!(s, "{}", model.n_vars()).unwrap();
    let cards: Vec<String> = model.cards().iter().map(|c| c.to_string()).collect();
    writeln!(s, "{}", cards.join(" ")).unwrap();
    writeln!(s, "{}", model.factors().len()).unwrap();
    for f in model.factors() {
        let mut line = vec![f.scope().len().to_string()];
        line.extend(f.scope().iter().map(|v| v.to_string()));
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    for f in model.factors() {
        writeln!(s, "{}", f.len()).unwrap();
        let vals: Vec<String> = f.values().iter().map(|v| format!("{v}")).collect();
        writeln!(s, "{}", vals.join(" ")).unwrap();
    }
    s
}

/// Parse an evidence file: a count followed by (variable, value) pairs.
pub fn parse_evidence(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut t = Tokens::new(text);
    let (_, n) = t.usize("evidence count")?;
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let (_, var) = t.usize("evidence variable")?;
        let (_, val) = t.usize("evidence value")?;
        pairs.push((var, val));
    }
    if let Some(ln) = t.exhausted() {
        return Err(ModelError::Parse {
            line: ln,
            msg: "trailing content after evidence pairs".into(),
        });
    }
    Ok(pairs)
}

/// Absorb evidence by zeroing every table entry inconsistent with it.
pub fn apply_evidence(
    model: &GraphicalModel,
    evidence: &[(usize, usize)],
) -> Result<GraphicalModel> {
    let mut fixed: Vec<Option<usize>> = vec![None; model.n_vars()];
    for &(var, val) in evidence {
        if var >= model.n_vars() {
            return Err(ModelError::Invalid(format!(
                "evidence on unknown variable {var}"
            )));
        }
        if val >= model.card(var) {
            return Err(ModelError::Invalid(format!(
                "evidence value {val} out of domain for variable {var}"
            )));
        }
        if let Some(prev) = fixed[var] {
            if prev != val {
                return Err(ModelError::Invalid(format!(
                    "conflicting evidence for variable {var}"
                )));
            }
        }
        fixed[var] = Some(val);
    }
    let factors = model
        .factors()
        .iter()
        .map(|f| {
            let mut values = f.values().to_vec();
            let mut tuple = vec![0usize; f.scope().len()];
            for (idx, slot) in values.iter_mut().enumerate() {
                decode(idx, f.cards(), &mut tuple);
                for (i, &var) in f.scope().iter().enumerate() {
                    if let Some(val) = fixed[var] {
                        if tuple[i] != val {
                            *slot = 0.0;
                        }
                    }
                }
            }
            DenseFactor::new(f.scope().to_vec(), f.cards().to_vec(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    GraphicalModel::new(model.cards(), factors)
}
