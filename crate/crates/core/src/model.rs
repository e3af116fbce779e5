//! Densities of the hierarchical Dirichlet model, all in log space.
//!
//! Node `j` with parent configurations `c` has rows `π_j(·|c) ~ Dir(t_j)` and
//! independent `t_j(x) ~ Gamma(ρ_j/k_j, b_j)`. Integrating out the rows gives
//! the marginal node likelihood; augmenting with `u_c ~ Beta(β_j, n_c)` makes
//! the full conditional of `t_j` factor over categories into densities `h`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ParentChildTable;
use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, ln_rising, trigamma};

/// Hyperparameters of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeHyper {
    /// Gamma rate of each `t_j(x)`.
    pub b: f64,
    /// Total Gamma shape; each category gets `rho / k`.
    pub rho: f64,
    /// Beta prior on the edge-inclusion probability.
    pub c: f64,
    pub d: f64,
}

impl NodeHyper {
    /// `b = 1`, `ρ = k + 1`, `c = d = 1`.
    pub fn default_for(k: usize) -> Self {
        Self {
            b: 1.0,
            rho: k as f64 + 1.0,
            c: 1.0,
            d: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("rho", self.rho), ("c", self.c), ("d", self.d)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Sets one field by name (`b`, `rho`, `c` or `d`).
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "b" => self.b = value,
            "rho" => self.rho = value,
            "c" => self.c = value,
            "d" => self.d = value,
            _ => return Err(Error::InvalidParameter(format!("unknown hyperparameter '{key}'"))),
        }
        self.validate()
    }
}

/// Latent prior means `t_j` and auxiliary variables `u_j` of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLatents {
    pub t: Vec<f64>,
    /// One slot per parent configuration; `None` where the configuration has
    /// no observations.
    pub u: Vec<Option<f64>>,
}

impl NodeLatents {
    /// `t = (t0, …, t0)` with no auxiliary values yet.
    pub fn init(k: usize, t0: f64) -> Self {
        Self {
            t: vec![t0; k],
            u: Vec::new(),
        }
    }

    pub fn beta(&self) -> f64 {
        self.t.iter().sum()
    }

    /// `t / β`.
    pub fn prior_mean(&self) -> Vec<f64> {
        let b = self.beta();
        self.t.iter().map(|t| t / b).collect()
    }
}

fn check_t(t: &[f64], k: usize) -> Result<()> {
    if t.len() != k {
        return Err(Error::Shape(format!("t has {} entries, child has {k} categories", t.len())));
    }
    if let Some(bad) = t.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("t entries must be positive, got {bad}")));
    }
    Ok(())
}

/// `ln f(n_{j|Pa} | n_Pa, t)`: the Pólya-urn likelihood of the child counts
/// given the parent counts, summed over observed parent configurations.
pub fn log_marginal_node(pct: &ParentChildTable, t: &[f64]) -> Result<f64> {
    check_t(t, pct.k_child())?;
    Ok(log_marginal_node_unchecked(pct, t))
}

pub(crate) fn log_marginal_node_unchecked(pct: &ParentChildTable, t: &[f64]) -> f64 {
    let beta: f64 = t.iter().sum();
    let mut total = 0.0;
    for c in pct.positive_configs() {
        total -= ln_rising(beta, pct.parent_count(c));
        for (&n, &tx) in pct.row(c).iter().zip(t) {
            total += ln_rising(tx, n);
        }
    }
    total
}

/// `ψ(t + n) - ψ(t)`.
fn digamma_diff(t: f64, n: u64) -> f64 {
    if n <= 8 {
        (0..n).map(|i| 1.0 / (t + i as f64)).sum()
    } else {
        digamma(t + n as f64) - digamma(t)
    }
}

/// `ψ'(t + n) - ψ'(t)`.
fn trigamma_diff(t: f64, n: u64) -> f64 {
    if n <= 8 {
        -(0..n).map(|i| (t + i as f64).powi(-2)).sum::<f64>()
    } else {
        trigamma(t + n as f64) - trigamma(t)
    }
}

/// Full conditional of one `t_j(x)` given `u_j`, reduced to its sufficient
/// statistics: the positive cell counts in column `x` and `Σ ln u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTarget {
    shape_m1: f64,
    b: f64,
    sum_ln_u: f64,
    counts: Vec<u64>,
}

impl CategoryTarget {
    pub fn new(x: usize, lat: &NodeLatents, pct: &ParentChildTable, hyp: &NodeHyper) -> Result<Self> {
        let k = pct.k_child();
        if x >= k {
            return Err(Error::Shape(format!("category {x} out of range for k = {k}")));
        }
        if lat.u.len() != pct.n_configs() {
            return Err(Error::Shape(format!(
                "u has {} slots for {} parent configurations",
                lat.u.len(),
                pct.n_configs()
            )));
        }
        let mut sum_ln_u = 0.0;
        let mut counts = Vec::new();
        for c in pct.positive_configs() {
            let u = lat.u[c].ok_or_else(|| {
                Error::InvalidParameter(format!("missing auxiliary value for parent configuration {c}"))
            })?;
            sum_ln_u += u.ln();
            let n = pct.joint_count(c, x);
            if n > 0 {
                counts.push(n);
            }
        }
        Ok(Self {
            shape_m1: hyp.rho / k as f64 - 1.0,
            b: hyp.b,
            sum_ln_u,
            counts,
        })
    }

    /// Direct construction, mostly for tests and experiments.
    pub fn from_parts(shape_m1: f64, b: f64, sum_ln_u: f64, counts: Vec<u64>) -> Self {
        Self {
            shape_m1,
            b,
            sum_ln_u,
            counts: counts.into_iter().filter(|&n| n > 0).collect(),
        }
    }

    pub fn log_h(&self, t: f64) -> f64 {
        let mut s = -self.b * t + self.shape_m1 * t.ln() + t * self.sum_ln_u;
        for &n in &self.counts {
            s += ln_rising(t, n);
        }
        s
    }

    pub fn grad(&self, t: f64) -> f64 {
        let mut g = -self.b + self.shape_m1 / t + self.sum_ln_u;
        for &n in &self.counts {
            g += digamma_diff(t, n);
        }
        g
    }

    pub fn hess(&self, t: f64) -> f64 {
        let mut h = -self.shape_m1 / (t * t);
        for &n in &self.counts {
            h += trigamma_diff(t, n);
        }
        h
    }
}

fn check_scalar(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// `ln h_{j,x}(t)` up to an additive constant.
pub fn log_h(t: f64, x: usize, lat: &NodeLatents, pct: &ParentChildTable, hyp: &NodeHyper) -> Result<f64> {
    check_scalar(t)?;
    Ok(CategoryTarget::new(x, lat, pct, hyp)?.log_h(t))
}

/// `d ln h_{j,x}(t) / dt`.
pub fn grad_log_h(t: f64, x: usize, lat: &NodeLatents, pct: &ParentChildTable, hyp: &NodeHyper) -> Result<f64> {
    check_scalar(t)?;
    Ok(CategoryTarget::new(x, lat, pct, hyp)?.grad(t))
}

/// `d² ln h_{j,x}(t) / dt²`. Nonpositive whenever `ρ ≥ k` and column `x`
/// has a positive total.
pub fn hess_log_h(t: f64, x: usize, lat: &NodeLatents, pct: &ParentChildTable, hyp: &NodeHyper) -> Result<f64> {
    check_scalar(t)?;
    Ok(CategoryTarget::new(x, lat, pct, hyp)?.hess(t))
}

/// Unnormalized log posterior of `(t_j, z_j)` given the data, used as a
/// chain diagnostic. `z` holds the edge indicators over the candidate set.
pub fn log_posterior(t: &[f64], z: &[bool], pct: &ParentChildTable, hyp: &NodeHyper) -> Result<f64> {
    let k = pct.k_child();
    check_t(t, k)?;
    let kpa = pct.n_configs() as f64;
    let beta: f64 = t.iter().sum();
    let lgb = ln_gamma(beta);
    let mut s = 0.0;
    for c in 0..pct.n_configs() {
        s += lgb - ln_gamma(pct.parent_count(c) as f64 + beta);
    }
    let shape_m1 = hyp.rho / k as f64 - 1.0;
    for (x, &tx) in t.iter().enumerate() {
        s += -hyp.b * tx + shape_m1 * tx.ln() - kpa * ln_gamma(tx);
        for c in 0..pct.n_configs() {
            s += ln_gamma(pct.joint_count(c, x) as f64 + tx);
        }
    }
    let on = z.iter().filter(|&&b| b).count() as f64;
    let off = z.len() as f64 - on;
    s += ln_gamma(on + hyp.c) + ln_gamma(off + hyp.d);
    Ok(s)
}

/// Posterior predictive `(t + n(c, ·)) / (β + n_c)` for parent configuration `c`.
pub fn predictive_prob(t: &[f64], pct: &ParentChildTable, config: usize) -> Vec<f64> {
    let beta: f64 = t.iter().sum();
    let denom = beta + pct.parent_count(config) as f64;
    t.iter()
        .zip(pct.row(config))
        .map(|(&tx, &n)| (tx + n as f64) / denom)
        .collect()
}

/// Exact distribution of the column totals of `n` independent categorical
/// draws with per-draw probability rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonMultinomial {
    pmf: BTreeMap<Vec<u32>, f64>,
}

impl PoissonMultinomial {
    pub fn prob(&self, counts: &[u32]) -> f64 {
        self.pmf.get(counts).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.pmf.iter()
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }
}

/// Enumerates the pmf by convolving one row at a time. `budget` caps the
/// number of support points `C(n + k - 1, k - 1)`.
pub fn poisson_multinomial_pmf(rows: &[Vec<f64>], budget: usize) -> Result<PoissonMultinomial> {
    let k = rows.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::Shape("need at least one row with at least one column".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != k {
            return Err(Error::Shape(format!("row {i} has {} entries, expected {k}", r.len())));
        }
        let s: f64 = r.iter().sum();
        if (s - 1.0).abs() > 1e-12 || r.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!("row {i} is not a probability vector")));
        }
    }
    // support size C(n+k-1, k-1)
    let n = rows.len() as u128;
    let mut support: u128 = 1;
    for i in 1..k as u128 {
        support = support * (n + i) / i;
        if support > budget as u128 {
            return Err(Error::Budget {
                what: "Poisson-multinomial enumeration",
                needed: support,
                budget,
            });
        }
    }
    let mut pmf: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    pmf.insert(vec![0; k], 1.0);
    for row in rows {
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (counts, &p) in &pmf {
            for (x, &q) in row.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let mut c = counts.clone();
                c[x] += 1;
                *next.entry(c).or_insert(0.0) += p * q;
            }
        }
        pmf = next;
    }
    Ok(PoissonMultinomial { pmf })
}
