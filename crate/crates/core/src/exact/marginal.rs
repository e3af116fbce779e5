use serde::{Deserialize, Serialize};

use super::stirling::{stirling_table, StirlingTable};
use crate::data::{parent_child_table, CategoricalDataset, ParentChildTable};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::special::{ln_gamma, log_add, log_sum_exp};

/// Default cap on the number of multiply-add terms of one exact evaluation.
pub const DEFAULT_EXACT_BUDGET: usize = 1_000_000;

/// Fixed concentration `β` and symmetric Dirichlet parameter `α` of the
/// normalized prior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactPrior {
    pub beta: f64,
    pub alpha: f64,
}

impl ExactPrior {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0 && alpha > 0.0 && beta.is_finite() && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta and alpha must be positive, got {beta}, {alpha}")));
        }
        Ok(Self { beta, alpha })
    }
}

/// Log-space convolution `c(m) = Σ_{i+j=m} a(i)·b(j)`.
fn log_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == f64::NEG_INFINITY {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = log_add(out[i + j], x + y);
        }
    }
    out
}

/// Number of multiply-add terms [`exact_log_marginal`] would perform.
pub fn exact_cost(pct: &ParentChildTable) -> u128 {
    let k = pct.k_child();
    let mut cost: u128 = 0;
    let mut totals = Vec::with_capacity(k);
    for x in 0..k {
        let mut len: u128 = 1;
        for c in 0..pct.n_configs() {
            let n = pct.joint_count(c, x) as u128;
            if n > 0 {
                cost += len * (n + 1);
                len += n;
            }
        }
        totals.push(len);
    }
    let mut len: u128 = 1;
    for l in totals {
        cost += len * l;
        len += l - 1;
    }
    cost + len
}

/// Exact log marginal likelihood of one node with `t = β·ω`, `ω ~ Dir(α)`
/// integrated out, by expanding each Γ ratio into Stirling numbers.
///
/// The sum over auxiliary tables is reorganized column by column: each
/// child category gets the convolution of the Stirling rows of its cells,
/// and the categories are then combined with the Dirichlet moments.
pub fn exact_log_marginal(pct: &ParentChildTable, prior: &ExactPrior) -> Result<f64> {
    exact_log_marginal_with_budget(pct, prior, DEFAULT_EXACT_BUDGET)
}

pub fn exact_log_marginal_with_budget(pct: &ParentChildTable, prior: &ExactPrior, budget: usize) -> Result<f64> {
    let needed = exact_cost(pct);
    if needed > budget as u128 {
        return Err(Error::Budget {
            what: "exact marginal likelihood",
            needed,
            budget,
        });
    }
    let n_max = (0..pct.n_configs())
        .flat_map(|c| pct.row(c).iter().copied())
        .max()
        .unwrap_or(0) as usize;
    let stirling = stirling_table(n_max)?;
    Ok(exact_with_table(pct, prior, &stirling))
}

fn exact_with_table(pct: &ParentChildTable, prior: &ExactPrior, s: &StirlingTable) -> f64 {
    let (beta, alpha) = (prior.beta, prior.alpha);
    let k = pct.k_child();
    if pct.total() == 0 {
        return 0.0;
    }
    let mut h = ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha);
    let lgb = ln_gamma(beta);
    for c in pct.positive_configs() {
        h += lgb - ln_gamma(pct.parent_count(c) as f64 + beta);
    }
    // B(W) = Σ_{m_1+…+m_k=W} Π_x A_x(m_x)·Γ(m_x + α)
    let mut b = vec![0.0];
    for x in 0..k {
        let mut a = vec![0.0];
        for c in 0..pct.n_configs() {
            let n = pct.joint_count(c, x) as usize;
            if n > 0 {
                a = log_convolve(&a, s.row(n));
            }
        }
        for (m, v) in a.iter_mut().enumerate() {
            *v += ln_gamma(m as f64 + alpha);
        }
        b = log_convolve(&b, &a);
    }
    let ln_beta = beta.ln();
    let ka = k as f64 * alpha;
    let terms: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(w, &v)| w as f64 * ln_beta + v - ln_gamma(w as f64 + ka))
        .collect();
    h + log_sum_exp(&terms)
}

/// Log Bayes factor of `g1` against `g2`, one prior per node. Nodes with the
/// same parents in both graphs cancel and are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub log_bf: f64,
    /// `(node, log marginal under g1, log marginal under g2)` for each node
    /// whose parents differ.
    pub nodes: Vec<(usize, f64, f64)>,
}

pub fn bayes_factor(ds: &CategoricalDataset, g1: &Dag, g2: &Dag, priors: &[ExactPrior]) -> Result<BayesFactor> {
    bayes_factor_with_budget(ds, g1, g2, priors, DEFAULT_EXACT_BUDGET)
}

pub fn bayes_factor_with_budget(
    ds: &CategoricalDataset,
    g1: &Dag,
    g2: &Dag,
    priors: &[ExactPrior],
    budget: usize,
) -> Result<BayesFactor> {
    let p = ds.p();
    if g1.p() != p || g2.p() != p || priors.len() != p {
        return Err(Error::Shape("graphs, priors and data must agree on the node count".into()));
    }
    let mut log_bf = 0.0;
    let mut nodes = Vec::new();
    for j in 0..p {
        if g1.parents(j) == g2.parents(j) {
            continue;
        }
        let a = exact_log_marginal_with_budget(&parent_child_table(ds, j, g1.parents(j))?, &priors[j], budget)?;
        let b = exact_log_marginal_with_budget(&parent_child_table(ds, j, g2.parents(j))?, &priors[j], budget)?;
        log_bf += a - b;
        nodes.push((j, a, b));
    }
    Ok(BayesFactor { log_bf, nodes })
}

/// Sum of exact node marginals over every node of `g`.
pub fn exact_log_marginal_dag(ds: &CategoricalDataset, g: &Dag, priors: &[ExactPrior], budget: usize) -> Result<f64> {
    (0..ds.p())
        .map(|j| exact_log_marginal_with_budget(&parent_child_table(ds, j, g.parents(j))?, &priors[j], budget))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ParentChildTable;

    fn table(k: usize, joint: Vec<u64>) -> ParentChildTable {
        let kpa = joint.len() / k;
        ParentChildTable::from_joint_counts(1, vec![0], vec![kpa], k, joint).unwrap()
    }

    /// Enumerates every auxiliary table `w` (one index per positive cell),
    /// straight from the defining sum.
    fn brute_force(pct: &ParentChildTable, prior: &ExactPrior) -> f64 {
        let (beta, alpha) = (prior.beta, prior.alpha);
        let k = pct.k_child();
        let s = stirling_table(40).unwrap();
        let cells: Vec<(usize, usize, usize)> = (0..pct.n_configs())
            .flat_map(|c| (0..k).map(move |x| (c, x)))
            .filter_map(|(c, x)| {
                let n = pct.joint_count(c, x) as usize;
                (n > 0).then_some((c, x, n))
            })
            .collect();
        let mut h = ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha);
        for c in pct.positive_configs() {
            h += ln_gamma(beta) - ln_gamma(pct.parent_count(c) as f64 + beta);
        }
        let mut w = vec![1usize; cells.len()];
        let mut terms = Vec::new();
        loop {
            let mut col = vec![0usize; k];
            let mut ls = 0.0;
            for (&(_, x, n), &wi) in cells.iter().zip(&w) {
                col[x] += wi;
                ls += s.ln_s(n, wi);
            }
            let tot: usize = col.iter().sum();
            let mut term = ls + tot as f64 * beta.ln() - ln_gamma(tot as f64 + k as f64 * alpha);
            for &m in &col {
                term += ln_gamma(m as f64 + alpha);
            }
            terms.push(term);
            // odometer over w_i in 1..=n_i
            let mut i = 0;
            loop {
                if i == w.len() {
                    return h + log_sum_exp(&terms);
                }
                w[i] += 1;
                if w[i] <= cells[i].2 {
                    break;
                }
                w[i] = 1;
                i += 1;
            }
        }
    }

    #[test]
    fn single_observation_is_uniform() {
        for k in [2usize, 3, 7] {
            let mut counts = vec![0; k];
            counts[0] = 1;
            let pct = ParentChildTable::root(0, counts);
            for &(b, a) in &[(1.0, 0.5), (2.0, 1.0), (0.3, 4.0)] {
                let v = exact_log_marginal(&pct, &ExactPrior::new(b, a).unwrap()).unwrap();
                assert!((v - (1.0 / k as f64).ln()).abs() < 1e-10, "k={k}");
            }
        }
    }

    #[test]
    fn empty_table_is_zero() {
        let pct = table(2, vec![0, 0, 0, 0]);
        assert_eq!(exact_log_marginal(&pct, &ExactPrior::new(1.0, 1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let cases = [
            (2, vec![1, 2, 3, 0]),
            (2, vec![3, 3, 1, 2, 0, 1]),
            (3, vec![2, 0, 1, 1, 3, 0]),
            (2, vec![4, 1]),
        ];
        for (k, joint) in cases {
            let pct = table(k, joint);
            for &(b, a) in &[(1.0, 0.5), (2.0, 1.0), (0.7, 2.5)] {
                let prior = ExactPrior::new(b, a).unwrap();
                let got = exact_log_marginal(&pct, &prior).unwrap();
                let want = brute_force(&pct, &prior);
                assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn relabeling_categories_is_invariant() {
        let pct = table(3, vec![2, 0, 1, 1, 3, 0]);
        let swapped = table(3, vec![1, 0, 2, 0, 3, 1]);
        let prior = ExactPrior::new(1.5, 0.8).unwrap();
        let a = exact_log_marginal(&pct, &prior).unwrap();
        let b = exact_log_marginal(&swapped, &prior).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let pct = table(2, vec![50, 60, 70, 80]);
        assert!(matches!(
            exact_log_marginal_with_budget(&pct, &ExactPrior::new(1.0, 1.0).unwrap(), 100),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn bayes_factor_cancellation_and_antisymmetry() {
        let rows: Vec<Vec<u32>> = (0..12u32).map(|i| vec![i % 2, (i / 2) % 3, (i * 7 % 5) % 2]).collect();
        let ds = CategoricalDataset::from_codes(&rows, vec![2, 3, 2]).unwrap();
        let priors = vec![ExactPrior::new(1.0, 1.0).unwrap(); 3];
        let g1 = Dag::from_edges(3, &[(0, 2)]).unwrap();
        let g2 = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert_eq!(bayes_factor(&ds, &g1, &g1, &priors).unwrap().log_bf, 0.0);
        let ab = bayes_factor(&ds, &g1, &g2, &priors).unwrap();
        let ba = bayes_factor(&ds, &g2, &g1, &priors).unwrap();
        assert_eq!(ab.log_bf, -ba.log_bf);
        let single = exact_log_marginal(&parent_child_table(&ds, 2, &[0]).unwrap(), &priors[2]).unwrap()
            - exact_log_marginal(&parent_child_table(&ds, 2, &[0, 1]).unwrap(), &priors[2]).unwrap();
        assert_eq!(ab.log_bf, single);
        assert_eq!(ab.nodes.len(), 1);
    }
}
