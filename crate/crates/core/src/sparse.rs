//! Zero-suppressed hash tables over a variable scope.
//!
//! Only tuples with strictly positive value are stored; an absent tuple reads
//! as zero. Product is a database hash join on the shared variables, summing
//! out is a project, and division walks the dividend's entries. All operators
//! agree with their dense counterparts on the dense expansion and run in time
//! linear in the entries touched, given constant-time lookup.

use crate::counters;
use crate::model::{DenseFactor, ModelError, Result};
use rustc_hash::{FxHashMap, FxHashSet};

/// The set of tuples permitted to be nonzero on a scope.
#[derive(Debug, Clone)]
pub struct SupportRelation {
    pub scope: Vec<usize>,
    pub cards: Vec<usize>,
    pub tuples: FxHashSet<Vec<usize>>,
}

impl SupportRelation {
    pub fn full(scope: Vec<usize>, cards: Vec<usize>) -> Self {
        let mut tuples = FxHashSet::default();
        let len: usize = cards.iter().product();
        let mut tuple = vec![0usize; cards.len()];
        for idx in 0..len {
            decode(idx, &cards, &mut tuple);
            tuples.insert(tuple.clone());
        }
        SupportRelation {
            scope,
            cards,
            tuples,
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, tuple: &[usize]) -> bool {
        self.tuples.contains(tuple)
    }

    /// Restrict every tuple to a sub-scope, deduplicating.
    pub fn project(&self, scope: &[usize]) -> SupportRelation {
        let pos: Vec<usize> = scope
            .iter()
            .map(|v| self.scope.iter().position(|s| s == v).expect("subscope"))
            .collect();
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let tuples = self
            .tuples
            .iter()
            .map(|t| pos.iter().map(|&p| t[p]).collect())
            .collect();
        SupportRelation {
            scope: scope.to_vec(),
            cards,
            tuples,
        }
    }

    /// Deterministically ordered copy of the tuples.
    pub fn sorted_tuples(&self) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = self.tuples.iter().cloned().collect();
        v.sort();
        v
    }
}

/// Zero-suppressed table: scope plus a map from tuple to positive value.
#[derive(Debug, Clone)]
pub struct SparseTable {
    scope: Vec<usize>,
    cards: Vec<usize>,
    entries: FxHashMap<Vec<usize>, f64>,
}

fn decode(mut idx: usize, cards: &[usize], tuple: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        tuple[i] = idx % cards[i];
        idx /= cards[i];
    }
}

impl SparseTable {
    pub fn new_empty(scope: Vec<usize>, cards: Vec<usize>) -> Self {
        SparseTable {
            scope,
            cards,
            entries: FxHashMap::default(),
        }
    }

    pub fn from_dense(f: &DenseFactor) -> Self {
        let mut entries = FxHashMap::default();
        let mut tuple = vec![0usize; f.scope().len()];
        for (idx, &v) in f.values().iter().enumerate() {
            if v > 0.0 {
                decode(idx, f.cards(), &mut tuple);
                entries.insert(tuple.clone(), v);
            }
        }
        SparseTable {
            scope: f.scope().to_vec(),
            cards: f.cards().to_vec(),
            entries,
        }
    }

    pub fn to_dense(&self) -> DenseFactor {
        let len: usize = self.cards.iter().product();
        let mut values = vec![0.0; len];
        for (t, &v) in &self.entries {
            let mut idx = 0;
            for (i, &x) in t.iter().enumerate() {
                idx = idx * self.cards[i] + x;
            }
            values[idx] = v;
        }
        DenseFactor::new(self.scope.clone(), self.cards.clone(), values)
            .expect("sparse table invariants")
    }

    /// All-ones table over a support relation.
    pub fn indicator(support: &SupportRelation) -> Self {
        let entries = support.tuples.iter().map(|t| (t.clone(), 1.0)).collect();
        SparseTable {
            scope: support.scope.clone(),
            cards: support.cards.clone(),
            entries,
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, tuple: &[usize]) -> f64 {
        self.entries.get(tuple).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.entries.iter().map(|(t, &v)| (t, v))
    }

    pub fn value_sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn scale(&self, c: f64) -> SparseTable {
        counters::count_sparse(self.entries.len() as u64);
        let entries = self
            .entries
            .iter()
            .filter(|(_, &v)| v * c > 0.0)
            .map(|(t, &v)| (t.clone(), v * c))
            .collect();
        SparseTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            entries,
        }
    }

    /// Hash join: index the smaller operand on the shared variables, probe
    /// with the larger, emit the union-scope tuples with multiplied values.
    pub fn product(&self, other: &SparseTable) -> SparseTable {
        let (build, probe) = if self.entries.len() <= other.entries.len() {
            (self, other)
        } else {
            (other, self)
        };
        let shared: Vec<usize> = build
            .scope
            .iter()
            .copied()
            .filter(|v| probe.scope.contains(v))
            .collect();
        let build_shared_pos: Vec<usize> = shared
            .iter()
            .map(|v| build.scope.iter().position(|s| s == v).unwrap())
            .collect();
        let probe_shared_pos: Vec<usize> = shared
            .iter()
            .map(|v| probe.scope.iter().position(|s| s == v).unwrap())
            .collect();

        let mut index: FxHashMap<Vec<usize>, Vec<(&Vec<usize>, f64)>> = FxHashMap::default();
        for (t, &v) in &build.entries {
            let key: Vec<usize> = build_shared_pos.iter().map(|&p| t[p]).collect();
            index.entry(key).or_default().push((t, v));
        }
        counters::count_sparse(build.entries.len() as u64);

        let (scope, cards) = union_scope(&self.scope, &self.cards, &other.scope, &other.cards);
        // positions of output variables in (probe, build)
        let out_from: Vec<(bool, usize)> = scope
            .iter()
            .map(|v| {
                if let Some(p) = probe.scope.iter().position(|s| s == v) {
                    (true, p)
                } else {
                    (false, build.scope.iter().position(|s| s == v).unwrap())
                }
            })
            .collect();

        let mut entries = FxHashMap::default();
        let mut probed = 0u64;
        let mut emitted = 0u64;
        for (pt, &pv) in &probe.entries {
            probed += 1;
            let key: Vec<usize> = probe_shared_pos.iter().map(|&p| pt[p]).collect();
            if let Some(matches) = index.get(&key) {
                for (bt, bv) in matches {
                    let tuple: Vec<usize> = out_from
                        .iter()
                        .map(|&(from_probe, p)| if from_probe { pt[p] } else { bt[p] })
                        .collect();
                    let v = pv * bv;
                    if v > 0.0 {
                        entries.insert(tuple, v);
                        emitted += 1;
                    }
                }
            }
        }
        counters::count_sparse(probed + 2 * emitted);
        SparseTable {
            scope,
            cards,
            entries,
        }
    }

    /// Database project: drop the summed-out positions and accumulate.
    pub fn sum_out(&self, vars: &[usize]) -> Result<SparseTable> {
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
        let mut entries: FxHashMap<Vec<usize>, f64> = FxHashMap::default();
        for (t, &v) in &self.entries {
            let out: Vec<usize> = keep.iter().map(|&i| t[i]).collect();
            *entries.entry(out).or_insert(0.0) += v;
        }
        counters::count_sparse((self.entries.len() + entries.len()) as u64);
        Ok(SparseTable {
            scope,
            cards,
            entries,
        })
    }

    /// Pointwise quotient over the dividend's support; 0/0 = 0 falls out of
    /// zero suppression. An entry whose divisor projection is absent is a
    /// support error.
    pub fn divide(&self, other: &SparseTable) -> Result<SparseTable> {
        let pos: Vec<usize> = other
            .scope
            .iter()
            .map(|v| {
                self.scope
                    .iter()
                    .position(|s| s == v)
                    .ok_or_else(|| ModelError::Scope(format!("divisor variable {v} not in scope")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut entries = FxHashMap::default();
        for (t, &v) in &self.entries {
            let key: Vec<usize> = pos.iter().map(|&p| t[p]).collect();
            match other.entries.get(&key) {
                Some(&b) => {
                    entries.insert(t.clone(), v / b);
                }
                None => {
                    let mut idx = 0;
                    for (i, &x) in t.iter().enumerate() {
                        idx = idx * self.cards[i] + x;
                    }
                    return Err(ModelError::DivisionSupport { index: idx });
                }
            }
        }
        counters::count_sparse(3 * self.entries.len() as u64);
        Ok(SparseTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            entries,
        })
    }

    /// Lossy projection onto a support relation over the same scope: every
    /// entry in the support keeps its value here (each tuple is a conjunctive
    /// feature with a single consistent assignment); everything else is zero.
    pub fn lossy_project(&self, support: &SupportRelation) -> SparseTable {
        debug_assert_eq!(self.scope, support.scope);
        let mut entries = FxHashMap::default();
        for t in &support.tuples {
            if let Some(&v) = self.entries.get(t) {
                entries.insert(t.clone(), v);
            }
        }
        counters::count_sparse((support.tuples.len() + entries.len()) as u64);
        SparseTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            entries,
        }
    }

    pub fn quantize(&self, eps: f64) -> SparseTable {
        let vals: Vec<f64> = self.entries.values().copied().collect();
        let map = crate::quant::quantize_values(&vals, eps);
        counters::count_sparse(2 * self.entries.len() as u64);
        let entries = self
            .entries
            .iter()
            .map(|(t, &v)| (t.clone(), map.apply(v)))
            .collect();
        SparseTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            entries,
        }
    }

    /// Pointwise sum (used for damping); entries union.
    pub fn plus(&self, other: &SparseTable) -> SparseTable {
        debug_assert_eq!(self.scope, other.scope);
        let mut entries = self.entries.clone();
        for (t, &v) in &other.entries {
            *entries.entry(t.clone()).or_insert(0.0) += v;
        }
        counters::count_sparse((self.entries.len() + other.entries.len()) as u64);
        SparseTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            entries,
        }
    }
}

fn union_scope(
    a: &[usize],
    a_cards: &[usize],
    b: &[usize],
    b_cards: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let mut scope = Vec::new();
    let mut cards = Vec::new();
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseFactor;
    use rand::{Rng, SeedableRng};

    fn f1_dense() -> DenseFactor {
        DenseFactor::new(vec![0, 1], vec![2, 2], vec![3.0, 3.0, 2.0, 0.0]).unwrap()
    }

    #[test]
    fn from_dense_drops_zeros() {
        let t = SparseTable::from_dense(&f1_dense());
        assert_eq!(t.entry_count(), 3);
        assert_eq!(t.get(&[1, 1]), 0.0);
        assert_eq!(t.get(&[0, 1]), 3.0);
    }

    #[test]
    fn round_trip_is_lossless() {
        let f = f1_dense();
        let back = SparseTable::from_dense(&f).to_dense();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn all_zero_gives_empty_table() {
        let f = DenseFactor::new(vec![0], vec![2], vec![0.0, 0.0]).unwrap();
        assert_eq!(SparseTable::from_dense(&f).entry_count(), 0);
    }

    #[test]
    fn positive_factor_keeps_every_cell() {
        let f = DenseFactor::new(vec![0, 1], vec![2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(SparseTable::from_dense(&f).entry_count(), 6);
    }

    #[test]
    fn product_matches_dense_oracle() {
        let f = DenseFactor::new(vec![0], vec![2], vec![2.0, 1.0]).unwrap();
        let g = DenseFactor::new(vec![0, 1], vec![2, 2], vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let h = SparseTable::from_dense(&f).product(&SparseTable::from_dense(&g));
        assert_eq!(h.entry_count(), 3);
        assert_eq!(h.get(&[0, 0]), 2.0);
        assert_eq!(h.get(&[0, 1]), 6.0);
        assert_eq!(h.get(&[1, 0]), 2.0);
    }

    #[test]
    fn product_annihilator_and_identity() {
        let a = SparseTable::from_dense(&f1_dense());
        let empty = SparseTable::new_empty(vec![0, 1], vec![2, 2]);
        assert_eq!(a.product(&empty).entry_count(), 0);

        let ones = SparseTable::from_dense(&DenseFactor::ones(vec![0, 1], vec![2, 2]));
        let same = a.product(&ones);
        assert_eq!(same.to_dense().values(), a.to_dense().values());
    }

    #[test]
    fn sum_out_matches_dense_oracle() {
        let t = SparseTable::from_dense(
            &DenseFactor::new(vec![0, 1], vec![2, 2], vec![2.0, 6.0, 2.0, 0.0]).unwrap(),
        );
        let s = t.sum_out(&[1]).unwrap();
        assert_eq!(s.get(&[0]), 8.0);
        assert_eq!(s.get(&[1]), 2.0);

        assert_eq!(
            t.sum_out(&[]).unwrap().to_dense().values(),
            t.to_dense().values()
        );
        assert!(t.sum_out(&[7]).is_err());
    }

    #[test]
    fn sum_out_collapse_to_single_entry() {
        // both entries share the projection A=0
        let f = DenseFactor::new(vec![0, 1], vec![2, 2], vec![1.5, 2.5, 0.0, 0.0]).unwrap();
        let s = SparseTable::from_dense(&f).sum_out(&[1]).unwrap();
        assert_eq!(s.entry_count(), 1);
        assert_eq!(s.get(&[0]), 4.0);
    }

    #[test]
    fn divide_matches_dense_oracle() {
        let a = SparseTable::from_dense(
            &DenseFactor::new(vec![0, 1], vec![2, 2], vec![2.0, 6.0, 0.0, 0.0]).unwrap(),
        );
        let b =
            SparseTable::from_dense(&DenseFactor::new(vec![0], vec![2], vec![2.0, 0.0]).unwrap());
        let q = a.divide(&b).unwrap();
        assert_eq!(q.get(&[0, 0]), 1.0);
        assert_eq!(q.get(&[0, 1]), 3.0);

        let selfdiv = a.divide(&a.sum_out(&[]).unwrap()).unwrap();
        for (_, v) in selfdiv.entries() {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn divide_outside_divisor_support_errors() {
        let a = SparseTable::from_dense(
            &DenseFactor::new(vec![0, 1], vec![2, 2], vec![2.0, 0.0, 0.0, 0.0]).unwrap(),
        );
        let b =
            SparseTable::from_dense(&DenseFactor::new(vec![0], vec![2], vec![0.0, 5.0]).unwrap());
        assert!(matches!(
            a.divide(&b),
            Err(ModelError::DivisionSupport { .. })
        ));
    }

    #[test]
    fn lossy_project_cases() {
        let phi = SparseTable::from_dense(&f1_dense());

        // support covering everything nonzero: identity
        let mut full = FxHashSet::default();
        for t in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            full.insert(t.to_vec());
        }
        let sup = SupportRelation {
            scope: vec![0, 1],
            cards: vec![2, 2],
            tuples: full,
        };
        let p = phi.lossy_project(&sup);
        assert_eq!(p.to_dense().values(), phi.to_dense().values());

        // support {(0,0),(1,1)}: the (1,1) tuple has value zero and is dropped
        let mut some = FxHashSet::default();
        some.insert(vec![0, 0]);
        some.insert(vec![1, 1]);
        let sup2 = SupportRelation {
            scope: vec![0, 1],
            cards: vec![2, 2],
            tuples: some,
        };
        let p2 = phi.lossy_project(&sup2);
        assert_eq!(p2.entry_count(), 1);
        assert_eq!(p2.get(&[0, 0]), 3.0);

        // empty support: empty table
        let sup3 = SupportRelation {
            scope: vec![0, 1],
            cards: vec![2, 2],
            tuples: FxHashSet::default(),
        };
        assert_eq!(phi.lossy_project(&sup3).entry_count(), 0);
    }

    fn random_factor(rng: &mut impl Rng, all_cards: &[usize]) -> DenseFactor {
        let n = all_cards.len();
        let mut scope: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        if scope.is_empty() {
            scope.push(rng.gen_range(0..n));
        }
        let cards: Vec<usize> = scope.iter().map(|&v| all_cards[v]).collect();
        let len: usize = cards.iter().product();
        let values = (0..len)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.1..4.0)
                }
            })
            .collect();
        DenseFactor::new(scope, cards, values).unwrap()
    }

    #[test]
    fn randomized_equivalence_with_dense() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let cards = [2usize, 3, 2, 2];
        for _ in 0..100 {
            let f = random_factor(&mut rng, &cards);
            let g = random_factor(&mut rng, &cards);
            let sf = SparseTable::from_dense(&f);
            let sg = SparseTable::from_dense(&g);

            let dp = f.product(&g);
            let sp = sf.product(&sg).to_dense();
            assert_eq!(sp.scope(), dp.scope());
            for (a, b) in sp.values().iter().zip(dp.values()) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }

            let y: Vec<usize> = f
                .scope()
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.5))
                .collect();
            let ds = f.sum_out(&y).unwrap();
            let ss = sf.sum_out(&y).unwrap().to_dense();
            for (a, b) in ss.values().iter().zip(ds.values()) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn no_stored_zeros_ever() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(22);
        for _ in 0..60 {
            let f = random_factor(&mut rng, &[2, 2, 3]);
            let g = random_factor(&mut rng, &[2, 2, 3]);
            let p = SparseTable::from_dense(&f).product(&SparseTable::from_dense(&g));
            for (_, v) in p.entries() {
                assert!(v > 0.0);
            }
            let s = p.sum_out(&[p.scope()[0]]).unwrap();
            for (_, v) in s.entries() {
                assert!(v > 0.0);
            }
        }
    }

    /// Reports the sparse-vs-dense constant overhead on zero-free tables;
    /// informational only, run with --ignored to see the numbers.
    #[test]
    #[ignore]
    fn report_overhead_without_determinism() {
        use std::time::Instant;
        let cards = vec![2usize; 10];
        let scope: Vec<usize> = (0..10).collect();
        let values: Vec<f64> = (0..1024).map(|i| 1.0 + (i % 7) as f64).collect();
        let f = DenseFactor::new(scope.clone(), cards.clone(), values).unwrap();
        let g = DenseFactor::new(scope, cards, vec![1.5; 1024]).unwrap();
        let sf = SparseTable::from_dense(&f);
        let sg = SparseTable::from_dense(&g);
        let reps = 200;
        let t0 = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(f.product(&g));
        }
        let dense_time = t0.elapsed();
        let t1 = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(sf.product(&sg));
        }
        let sparse_time = t1.elapsed();
        println!(
            "zero-free 1024-cell product: dense {dense_time:?}, sparse {sparse_time:?}, ratio {:.2}",
            sparse_time.as_secs_f64() / dense_time.as_secs_f64()
        );
    }

    #[test]
    fn visit_counters_linear_in_sizes() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for _ in 0..40 {
            let f = random_factor(&mut rng, &[2, 3, 2, 2]);
            let g = random_factor(&mut rng, &[2, 3, 2, 2]);
            let sf = SparseTable::from_dense(&f);
            let sg = SparseTable::from_dense(&g);
            counters::reset();
            let out = sf.product(&sg);
            let visits = counters::sparse_entries();
            let bound = 4 * (sf.entry_count() + sg.entry_count() + out.entry_count()) as u64 + 4;
            assert!(visits <= bound, "visits {visits} > bound {bound}");
        }
    }
}
