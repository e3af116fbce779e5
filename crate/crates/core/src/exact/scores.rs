//! Classical decomposable graph scores. Larger is better for all of them.

use serde::{Deserialize, Serialize};

use crate::data::{parent_child_table, CategoricalDataset, ParentChildTable};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::special::ln_gamma;

/// Multinomial log likelihood at the maximum likelihood estimate, with
/// `0·ln 0 = 0`.
pub fn node_log_likelihood(pct: &ParentChildTable) -> f64 {
    let mut ll = 0.0;
    for c in pct.positive_configs() {
        let np = pct.parent_count(c) as f64;
        for &n in pct.row(c) {
            if n > 0 {
                ll += n as f64 * (n as f64 / np).ln();
            }
        }
    }
    ll
}

/// Free parameters `(k - 1)·K_Pa` of one node.
pub fn node_dimension(pct: &ParentChildTable) -> usize {
    (pct.k_child() - 1) * pct.n_configs()
}

/// Dirichlet–multinomial log marginal with per-cell parameters
/// `alpha[x]`, shared across parent configurations.
pub fn node_bd(pct: &ParentChildTable, alpha: &[f64]) -> f64 {
    let a_sum: f64 = alpha.iter().sum();
    let mut s = 0.0;
    for c in 0..pct.n_configs() {
        s += ln_gamma(a_sum) - ln_gamma(a_sum + pct.parent_count(c) as f64);
        for (&n, &a) in pct.row(c).iter().zip(alpha) {
            s += ln_gamma(a + n as f64) - ln_gamma(a);
        }
    }
    s
}

/// BDeu-style score with equivalent sample size `iss` spread evenly over
/// the `k·K_Pa` cells.
pub fn node_bde(pct: &ParentChildTable, iss: f64) -> f64 {
    let k = pct.k_child();
    let a = iss / (k * pct.n_configs()) as f64;
    node_bd(pct, &vec![a; k])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Bic,
    Aic,
    Bde,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Bic => "bic",
            ScoreKind::Aic => "aic",
            ScoreKind::Bde => "bde",
        }
    }
}

fn tables(ds: &CategoricalDataset, g: &Dag) -> Result<Vec<ParentChildTable>> {
    if g.p() != ds.p() {
        return Err(Error::Shape(format!("graph has {} nodes, data has {}", g.p(), ds.p())));
    }
    (0..ds.p()).map(|j| parent_child_table(ds, j, g.parents(j))).collect()
}

/// `LL − (d/2)·ln n`.
pub fn score_bic(ds: &CategoricalDataset, g: &Dag) -> Result<f64> {
    let ln_n = (ds.n() as f64).ln();
    Ok(tables(ds, g)?
        .iter()
        .map(|t| node_log_likelihood(t) - 0.5 * node_dimension(t) as f64 * ln_n)
        .sum())
}

/// `LL − d`.
pub fn score_aic(ds: &CategoricalDataset, g: &Dag) -> Result<f64> {
    Ok(tables(ds, g)?
        .iter()
        .map(|t| node_log_likelihood(t) - node_dimension(t) as f64)
        .sum())
}

pub fn score_bde(ds: &CategoricalDataset, g: &Dag, iss: f64) -> Result<f64> {
    if !(iss > 0.0) {
        return Err(Error::InvalidParameter(format!("equivalent sample size must be positive, got {iss}")));
    }
    Ok(tables(ds, g)?.iter().map(|t| node_bde(t, iss)).sum())
}

/// Dirichlet score with node `j`'s cells all using the vector `alpha[j]`.
pub fn score_bd(ds: &CategoricalDataset, g: &Dag, alpha: &[Vec<f64>]) -> Result<f64> {
    Ok(tables(ds, g)?
        .iter()
        .zip(alpha)
        .map(|(t, a)| node_bd(t, a))
        .sum())
}

pub fn score(kind: ScoreKind, ds: &CategoricalDataset, g: &Dag, iss: f64) -> Result<f64> {
    match kind {
        ScoreKind::Bic => score_bic(ds, g),
        ScoreKind::Aic => score_aic(ds, g),
        ScoreKind::Bde => score_bde(ds, g, iss),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_two_by_two() {
        let rows = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let ds = CategoricalDataset::from_codes(&rows, vec![2, 2]).unwrap();
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        // root: 4·ln(1/2); child: two cells of 1/2 under each parent value
        let t0 = parent_child_table(&ds, 0, &[]).unwrap();
        let t1 = parent_child_table(&ds, 1, &[0]).unwrap();
        let ll = node_log_likelihood(&t0) + node_log_likelihood(&t1);
        assert!((ll - 8.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((node_log_likelihood(&t1) - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        let d = 1.0 + 2.0;
        assert!((score_bic(&ds, &g).unwrap() - (ll - d / 2.0 * 4f64.ln())).abs() < 1e-12);
        assert!((score_aic(&ds, &g).unwrap() - (ll - d)).abs() < 1e-12);
    }

    #[test]
    fn bd_hand_value() {
        // counts (2,1), per-cell α = 1: Γ(2)/Γ(5) · Γ(3)Γ(2)/(Γ(1)Γ(1)) = 2/24
        let pct = ParentChildTable::root(0, vec![2, 1]);
        assert!((node_bd(&pct, &[1.0, 1.0]) - (2.0f64 / 24.0).ln()).abs() < 1e-12);
        // iss = 2 spread over 2 cells gives the same hyperparameters
        assert!((node_bde(&pct, 2.0) - node_bd(&pct, &[1.0, 1.0])).abs() < 1e-15);
    }

    #[test]
    fn identical_graphs_identical_scores() {
        let rows: Vec<Vec<u32>> = (0..20u32).map(|i| vec![i % 3, (i / 3) % 2]).collect();
        let ds = CategoricalDataset::from_codes(&rows, vec![3, 2]).unwrap();
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        for kind in [ScoreKind::Bic, ScoreKind::Aic, ScoreKind::Bde] {
            assert_eq!(score(kind, &ds, &g, 1.0).unwrap(), score(kind, &ds, &g.clone(), 1.0).unwrap());
        }
    }
}
