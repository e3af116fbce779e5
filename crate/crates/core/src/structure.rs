//! Structure moves (edge indicators, parent-set selection, whole-DAG
//! selection) and the estimators computed from a structure trace.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{parent_child_table_with_budget, CategoricalDataset, ParentChildTable, DEFAULT_CELL_BUDGET};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::model::{log_marginal_node, NodeHyper};
use crate::special::{log_add, log_sum_exp};

/// LRU cache of parent-child tables keyed by `(child, sorted parents)`.
pub struct TableCache<'a> {
    ds: &'a CategoricalDataset,
    budget: usize,
    tables: LruCache<(usize, Vec<usize>), Arc<ParentChildTable>>,
}

impl<'a> TableCache<'a> {
    pub fn new(ds: &'a CategoricalDataset, capacity: usize) -> Self {
        Self::with_budget(ds, capacity, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(ds: &'a CategoricalDataset, capacity: usize, budget: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("nonzero");
        Self {
            ds,
            budget,
            tables: LruCache::new(cap),
        }
    }

    pub fn dataset(&self) -> &'a CategoricalDataset {
        self.ds
    }

    pub fn get(&mut self, child: usize, parents: &[usize]) -> Result<Arc<ParentChildTable>> {
        let mut key_parents = parents.to_vec();
        key_parents.sort_unstable();
        let key = (child, key_parents);
        if let Some(t) = self.tables.get(&key) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(parent_child_table_with_budget(self.ds, child, &key.1, self.budget)?);
        self.tables.put(key, Arc::clone(&t));
        Ok(t)
    }
}

/// Learning regime for edge-indicator moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Candidates respect a fixed node ordering, so no cycle can arise.
    Ordered,
    /// Arbitrary candidates with a cycle check before every node update.
    #[default]
    Unordered,
}

/// Enumerated parent sets of one node with their prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateParentSets {
    pub node: usize,
    pub sets: Vec<Vec<usize>>,
    pub prior: Vec<f64>,
}

fn check_prior(prior: &[f64], m: usize) -> Result<()> {
    if prior.len() != m || m == 0 {
        return Err(Error::Shape(format!("{} prior weights for {m} candidates", prior.len())));
    }
    if prior.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("prior weights must be nonnegative".into()));
    }
    let s: f64 = prior.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("prior weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Rescales nonnegative weights to sum to one; `None` means uniform.
pub fn normalize_prior(weights: Option<Vec<f64>>, m: usize) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0 / m as f64; m]),
        Some(w) => {
            let s: f64 = w.iter().sum();
            if !(s > 0.0) || w.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidParameter("prior weights must be nonnegative with a positive sum".into()));
            }
            Ok(w.into_iter().map(|x| x / s).collect())
        }
    }
}

impl CandidateParentSets {
    pub fn new(node: usize, sets: Vec<Vec<usize>>, prior: Vec<f64>) -> Result<Self> {
        check_prior(&prior, sets.len())?;
        let sets = sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                if s.contains(&node) {
                    return Err(Error::SelfParent(node));
                }
                if s.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::DuplicateNode(s[0]));
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(Self { node, sets, prior })
    }

    pub fn uniform(node: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let m = sets.len();
        Self::new(node, sets, vec![1.0 / m as f64; m])
    }
}

/// Enumerated DAGs with prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDags {
    pub dags: Vec<Dag>,
    pub prior: Vec<f64>,
    #[serde(default)]
    pub names: Vec<String>,
}

impl CandidateDags {
    pub fn new(dags: Vec<Dag>, prior: Vec<f64>) -> Result<Self> {
        check_prior(&prior, dags.len())?;
        let p = dags[0].p();
        if dags.iter().any(|g| g.p() != p) {
            return Err(Error::Shape("candidate DAGs differ in node count".into()));
        }
        let names = (1..=dags.len()).map(|m| format!("G{m}")).collect();
        Ok(Self { dags, prior, names })
    }

    pub fn uniform(dags: Vec<Dag>) -> Result<Self> {
        let m = dags.len();
        Self::new(dags, vec![1.0 / m as f64; m])
    }

    pub fn p(&self) -> usize {
        self.dags[0].p()
    }

    /// Nodes whose parent set is not the same in every candidate.
    pub fn varying_nodes(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| self.dags.iter().any(|g| g.parents(j) != self.dags[0].parents(j)))
            .collect()
    }
}

/// Unnormalized log weights `(ln f(z = 0 | −), ln f(z = 1 | −))` of one edge
/// indicator. `on` and `off` count the other candidates of the node that are
/// currently included and excluded.
pub fn edge_log_weights(on: usize, off: usize, hyp: &NodeHyper, lm_without: f64, lm_with: f64) -> (f64, f64) {
    (
        (off as f64 + hyp.d).ln() + lm_without,
        (on as f64 + hyp.c).ln() + lm_with,
    )
}

/// `P(z = 1 | −)` from the two log weights.
pub fn inclusion_probability(log_f0: f64, log_f1: f64) -> f64 {
    (log_f1 - log_add(log_f0, log_f1)).exp()
}

/// One pass of edge-indicator updates for node `j` with `t_j` held fixed.
///
/// `visit` lists the candidates in the order they are updated; candidates
/// outside `admissible` are forced out. `parents` is updated in place and
/// kept sorted.
#[allow(clippy::too_many_arguments)]
pub fn update_edge_indicators<R: Rng + ?Sized>(
    j: usize,
    candidates: &[usize],
    visit: &[usize],
    admissible: &[usize],
    parents: &mut Vec<usize>,
    t: &[f64],
    hyp: &NodeHyper,
    cache: &mut TableCache<'_>,
    rng: &mut R,
) -> Result<()> {
    for &cand in visit {
        let u: f64 = rng.random();
        let mut without: Vec<usize> = parents.iter().copied().filter(|&v| v != cand).collect();
        if !admissible.contains(&cand) {
            *parents = without;
            continue;
        }
        let on = without.iter().filter(|v| candidates.contains(v)).count();
        let off = candidates.len() - 1 - on;
        let lm0 = log_marginal_node(&*cache.get(j, &without)?, t)?;
        let mut with = without.clone();
        with.push(cand);
        with.sort_unstable();
        let lm1 = log_marginal_node(&*cache.get(j, &with)?, t)?;
        let (f0, f1) = edge_log_weights(on, off, hyp, lm0, lm1);
        if u < inclusion_probability(f0, f1) {
            *parents = with;
        } else {
            without.sort_unstable();
            *parents = without;
        }
    }
    Ok(())
}

/// Draws an index with probability proportional to `exp(log_weights)` using
/// a single uniform.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let lse = log_sum_exp(log_weights);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in log_weights.iter().enumerate() {
        if w == f64::NEG_INFINITY {
            continue;
        }
        last = i;
        acc += (w - lse).exp();
        if u < acc {
            return i;
        }
    }
    last
}

fn ln_prior(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln Pr(Pa_m) + ln f(n_{j|Pa_m} | n_{Pa_m}, t_j)` for every candidate;
/// `tables[m]` is the table of candidate `m`.
pub fn parent_set_log_weights(cps: &CandidateParentSets, t: &[f64], tables: &[Arc<ParentChildTable>]) -> Result<Vec<f64>> {
    cps.prior
        .iter()
        .zip(tables)
        .map(|(&w, tab)| Ok(ln_prior(w) + log_marginal_node(tab, t)?))
        .collect()
}

/// Parent-set selection: a categorical draw over the candidates.
pub fn update_parent_selection<R: Rng + ?Sized>(
    cps: &CandidateParentSets,
    t: &[f64],
    tables: &[Arc<ParentChildTable>],
    rng: &mut R,
) -> Result<usize> {
    Ok(sample_log_categorical(&parent_set_log_weights(cps, t, tables)?, rng))
}

/// Per-DAG log weights from the product of node marginals. `tables[m][j]`
/// must be present for every node in `nodes`; other nodes are skipped.
pub fn dag_log_weights(
    cd: &CandidateDags,
    nodes: &[usize],
    t: &[Vec<f64>],
    tables: &[Vec<Option<Arc<ParentChildTable>>>],
) -> Result<Vec<f64>> {
    cd.prior
        .iter()
        .enumerate()
        .map(|(m, &w)| {
            let mut s = ln_prior(w);
            for &j in nodes {
                let tab = tables[m][j]
                    .as_ref()
                    .ok_or_else(|| Error::Shape(format!("missing table for node {j} in DAG {m}")))?;
                s += log_marginal_node(tab, &t[j])?;
            }
            Ok(s)
        })
        .collect()
}

/// Whole-DAG selection over the varying nodes of `cd`.
pub fn update_dag<R: Rng + ?Sized>(
    cd: &CandidateDags,
    t: &[Vec<f64>],
    tables: &[Vec<Option<Arc<ParentChildTable>>>],
    rng: &mut R,
) -> Result<usize> {
    let w = dag_log_weights(cd, &cd.varying_nodes(), t, tables)?;
    Ok(sample_log_categorical(&w, rng))
}

/// Builds `tables[m][j]` for the varying nodes of `cd`.
pub fn dag_tables(cd: &CandidateDags, cache: &mut TableCache<'_>) -> Result<Vec<Vec<Option<Arc<ParentChildTable>>>>> {
    let varying = cd.varying_nodes();
    cd.dags
        .iter()
        .map(|g| {
            (0..g.p())
                .map(|j| {
                    if varying.contains(&j) {
                        cache.get(j, g.parents(j)).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect()
        })
        .collect()
}

/// Posterior inclusion frequency of every edge: `probs[from][to]`.
pub fn edge_probabilities(samples: &[Dag]) -> Result<Vec<Vec<f64>>> {
    let first = samples.first().ok_or(Error::EmptyTrace)?;
    let p = first.p();
    let mut counts = vec![vec![0u64; p]; p];
    for g in samples {
        for (a, b) in g.edges() {
            counts[a][b] += 1;
        }
    }
    let r = samples.len() as f64;
    Ok(counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / r).collect())
        .collect())
}

/// Most visited structure with its visit frequency; ties go to the
/// lexicographically smallest edge list.
pub fn map_structure(samples: &[Dag]) -> Result<(Dag, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut counts: HashMap<Vec<(usize, usize)>, (usize, usize)> = HashMap::new();
    for (i, g) in samples.iter().enumerate() {
        counts.entry(g.edges()).or_insert((0, i)).0 += 1;
    }
    let (_, (n, idx)) = counts
        .into_iter()
        .max_by(|(ea, (na, _)), (eb, (nb, _))| na.cmp(nb).then_with(|| eb.cmp(ea)))
        .expect("nonempty");
    Ok((samples[idx].clone(), n as f64 / samples.len() as f64))
}

/// Graph with every edge whose probability is strictly above one half.
pub fn median_probability_model(probs: &[Vec<f64>]) -> Result<Dag> {
    let p = probs.len();
    let mut edges = Vec::new();
    for (a, row) in probs.iter().enumerate() {
        for (b, &q) in row.iter().enumerate() {
            if q > 0.5 {
                edges.push((a, b));
            }
        }
    }
    Dag::from_edges(p, &edges)
}

/// Frequencies of each candidate index in a trace of selections.
pub fn selection_frequencies(choices: &[usize], m: usize) -> Result<Vec<f64>> {
    if choices.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut f = vec![0.0; m];
    for &c in choices {
        f[c] += 1.0;
    }
    let r = choices.len() as f64;
    Ok(f.into_iter().map(|x| x / r).collect())
}

/// Predictive pmf of `child` averaged over `(parent set, t)` samples, given
/// the values `x` of all variables (only the sampled parents are read).
pub fn predictive_pmf_unknown_structure<'s>(
    samples: impl IntoIterator<Item = (&'s [usize], &'s [f64])>,
    child: usize,
    x: &[u32],
    cache: &mut TableCache<'_>,
) -> Result<Vec<f64>> {
    let k = cache.dataset().cardinality(child);
    let mut acc = vec![0.0; k];
    let mut r = 0usize;
    for (parents, t) in samples {
        if t.len() != k {
            return Err(Error::Shape(format!("sample has {} prior means, child has {k} categories", t.len())));
        }
        let tab = cache.get(child, parents)?;
        let vals: Vec<usize> = tab.parents().iter().map(|&v| x[v] as usize).collect();
        let c = tab.config_index(&vals);
        for (a, p) in acc.iter_mut().zip(crate::model::predictive_prob(t, &tab, c)) {
            *a += p;
        }
        r += 1;
    }
    if r == 0 {
        return Err(Error::EmptyTrace);
    }
    Ok(acc.into_iter().map(|a| a / r as f64).collect())
}

/// Hamming distance between two node sets encoded as indicator vectors.
pub fn set_hamming(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|v| !b.contains(v)).count() + b.iter().filter(|v| !a.contains(v)).count()
}
