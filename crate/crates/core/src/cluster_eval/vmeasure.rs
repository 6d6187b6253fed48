//! Entropy-based homogeneity, completeness and V-measure.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VMeasureReport {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub beta: f64,
}

fn dense_codes<T: Hash + Eq>(xs: &[T]) -> (Vec<usize>, usize) {
    let mut seen: HashMap<&T, usize> = HashMap::new();
    let codes = xs
        .iter()
        .map(|x| {
            let next = seen.len();
            *seen.entry(x).or_insert(next)
        })
        .collect();
    (codes, seen.len())
}

/// Sums after sorting so the result does not depend on term order.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    ordered_sum(
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .collect(),
    )
}

/// `H(A | B) = -Σ n_ab/n ln(n_ab / n_b)` over non-zero cells.
fn conditional_entropy(cells: &[(usize, usize, usize)], given: &[usize], n: f64) -> f64 {
    ordered_sum(
        cells
            .iter()
            .map(|&(_, b, c)| {
                let c = c as f64;
                -(c / n) * (c / given[b] as f64).ln()
            })
            .collect(),
    )
}

/// Scores `clusters` against `labels`. Degenerate cases: `H(C) = 0` gives
/// homogeneity 1, `H(K) = 0` gives completeness 1, and `h + c = 0` gives
/// V-measure 0.
pub fn v_measure<L, K>(labels: &[L], clusters: &[K], beta: f64) -> Result<VMeasureReport>
where
    L: Hash + Eq,
    K: Hash + Eq,
{
    if labels.len() != clusters.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels vs {} cluster assignments",
            labels.len(),
            clusters.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot score an empty clustering".into(),
        ));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let n = labels.len() as f64;
    let (lc, n_classes) = dense_codes(labels);
    let (kc, n_clusters) = dense_codes(clusters);

    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    for (&c, &k) in lc.iter().zip(&kc) {
        *table.entry((c, k)).or_default() += 1;
    }
    let mut class_sizes = vec![0; n_classes];
    let mut cluster_sizes = vec![0; n_clusters];
    for (&c, &k) in lc.iter().zip(&kc) {
        class_sizes[c] += 1;
        cluster_sizes[k] += 1;
    }
    let by_cluster: Vec<(usize, usize, usize)> =
        table.iter().map(|(&(c, k), &v)| (c, k, v)).collect();
    let by_class: Vec<(usize, usize, usize)> =
        table.iter().map(|(&(c, k), &v)| (k, c, v)).collect();

    let h_c = entropy(&class_sizes, n);
    let h_k = entropy(&cluster_sizes, n);
    let homogeneity = if h_c == 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&by_cluster, &cluster_sizes, n) / h_c
    };
    let completeness = if h_k == 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&by_class, &class_sizes, n) / h_k
    };
    let homogeneity = homogeneity.clamp(0.0, 1.0);
    let completeness = completeness.clamp(0.0, 1.0);
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        ((1.0 + beta) * homogeneity * completeness / (beta * homogeneity + completeness))
            .clamp(0.0, 1.0)
    };
    Ok(VMeasureReport {
        homogeneity,
        completeness,
        v_measure,
        beta,
    })
}
