//! Ground truth: exact marginals and partition function.
//!
//! Two independent routes: a two-pass bucket-tree elimination along the
//! min-fill order (one upward pass computes the partition function, one
//! downward pass distributes, every variable's bucket then yields its
//! marginal), and plain enumeration under a configuration cap. The two must
//! agree to tight relative tolerance on every model either can handle.

use crate::cluster::min_fill_order;
use crate::model::{DenseFactor, GraphicalModel, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("induced width {width} exceeds the cap {cap}")]
    WidthCap { width: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, ExactError>;

pub const DEFAULT_WIDTH_CAP: usize = 20;

/// Exact per-variable marginals, the partition function, and the width used.
/// `defined` is false for unsatisfiable models (Z = 0), whose marginals are
/// reported uniform as a flagged placeholder.
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub marginals: Vec<Vec<f64>>,
    pub z: f64,
    pub width: usize,
    pub defined: bool,
}

pub fn exact_marginals(model: &GraphicalModel) -> Result<ExactResult> {
    exact_marginals_capped(model, DEFAULT_WIDTH_CAP)
}

/// Bucket-tree two-pass elimination.
pub fn exact_marginals_capped(model: &GraphicalModel, width_cap: usize) -> Result<ExactResult> {
    let (order, width) = min_fill_order(model);
    if width > width_cap {
        return Err(ExactError::WidthCap {
            width,
            cap: width_cap,
        });
    }
    let n = model.n_vars();
    let mut pos = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }

    // items[i]: functions living in the bucket of order[i]
    let mut items: Vec<Vec<DenseFactor>> = vec![Vec::new(); n];
    for f in model.factors() {
        if f.scope().is_empty() {
            continue;
        }
        let earliest = f.scope().iter().copied().min_by_key(|&v| pos[v]).unwrap();
        items[pos[earliest]].push(f.clone());
    }
    let constant: f64 = model
        .factors()
        .iter()
        .filter(|f| f.scope().is_empty())
        .map(|f| f.values()[0])
        .product();

    // upward pass
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut up_msg: Vec<Option<DenseFactor>> = vec![None; n];
    // position of child c's message inside items[parent]
    let mut msg_slot: Vec<usize> = vec![usize::MAX; n];
    let mut z = constant;
    for i in 0..n {
        let v = order[i];
        let psi = combine(&items[i], v, model.card(v));
        let msg = psi.sum_out(&[v]).map_err(ExactError::Model)?;
        if msg.scope().is_empty() {
            z *= msg.values()[0];
        } else {
            let earliest = msg.scope().iter().copied().min_by_key(|&x| pos[x]).unwrap();
            let j = pos[earliest];
            children[j].push(i);
            msg_slot[i] = items[j].len();
            items[j].push(msg.clone());
            up_msg[i] = Some(msg);
        }
    }

    // downward pass, processed root-first; items[j] already contains the
    // up-messages of j's children, so exclude the child's own message slot
    let mut down: Vec<Option<DenseFactor>> = vec![None; n];
    for j in (0..n).rev() {
        for &c in &children[j] {
            let child_msg = up_msg[c].as_ref().unwrap();
            let mut parts: Vec<&DenseFactor> = items[j]
                .iter()
                .enumerate()
                .filter(|(slot, _)| *slot != msg_slot[c])
                .map(|(_, f)| f)
                .collect();
            if let Some(d) = &down[j] {
                parts.push(d);
            }
            let combined = parts
                .iter()
                .fold(DenseFactor::constant(1.0), |acc, f| acc.product(f));
            let elim: Vec<usize> = combined
                .scope()
                .iter()
                .copied()
                .filter(|x| !child_msg.scope().contains(x))
                .collect();
            down[c] = Some(combined.sum_out(&elim).map_err(ExactError::Model)?);
        }
    }

    // marginals from each variable's own bucket belief
    let mut marginals = Vec::with_capacity(n);
    let defined = z > 0.0;
    for (v, &i) in pos.iter().enumerate() {
        let mut belief = combine(&items[i], v, model.card(v));
        if let Some(d) = &down[i] {
            belief = belief.product(d);
        }
        let elim: Vec<usize> = belief.scope().iter().copied().filter(|&x| x != v).collect();
        let m = belief.sum_out(&elim).map_err(ExactError::Model)?;
        match m.normalize() {
            Ok(norm) => marginals.push(norm.values().to_vec()),
            Err(_) => marginals.push(vec![1.0 / model.card(v) as f64; model.card(v)]),
        }
    }
    Ok(ExactResult {
        marginals,
        z,
        width,
        defined,
    })
}

fn combine(items: &[DenseFactor], bucket_var: usize, card: usize) -> DenseFactor {
    if items.is_empty() {
        return DenseFactor::ones(vec![bucket_var], vec![card]);
    }
    let mut acc = items[0].clone();
    for f in &items[1..] {
        acc = acc.product(f);
    }
    acc
}

/// Marginals and Z by direct summation of the product over all assignments.
pub fn bruteforce_marginals(model: &GraphicalModel, cap: u64) -> Result<ExactResult> {
    let configs = model.config_count();
    if configs > cap as u128 {
        return Err(ExactError::Model(ModelError::EnumCap { configs, cap }));
    }
    let n = model.n_vars();
    let mut z = 0.0;
    let mut sums: Vec<Vec<f64>> = (0..n).map(|v| vec![0.0; model.card(v)]).collect();
    for x in model.assignments() {
        let w: f64 = model.factors().iter().map(|f| f.value_in(&x)).product();
        z += w;
        for (v, &val) in x.iter().enumerate() {
            sums[v][val] += w;
        }
    }
    let defined = z > 0.0;
    let marginals = sums
        .into_iter()
        .enumerate()
        .map(|(v, s)| {
            if defined {
                s.iter().map(|x| x / z).collect()
            } else {
                vec![1.0 / model.card(v) as f64; model.card(v)]
            }
        })
        .collect();
    let (_, width) = min_fill_order(model);
    Ok(ExactResult {
        marginals,
        z,
        width,
        defined,
    })
}
