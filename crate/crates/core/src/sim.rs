//! Synthetic designs and replication runners.
//!
//! Three designs are provided. `SingleNode` fits the conditional probabilities of one
//! binary child with a single parent of `K_Pa` categories. `TwoDag` chooses between two
//! three-node DAGs that differ by the edge `x2 -> x3`. `TwoParentSets` chooses between
//! `Pa(x3) = {x2}` and `Pa(x3) = {x1, x2}`.
//!
//! Replication `r` draws its data from `substream(seed, [REPLICATION, r, DATA])` and
//! seeds its chain with `derive_seed(seed, [REPLICATION, r, CHAIN])`, so any single
//! replication can be rerun on its own.

use std::io::Write;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{run_chain, ChainConfig, ChainSpec, StructureMode};
use crate::data::{parent_child_table, CategoricalDataset, ParentChildTable};
use crate::error::{Error, Result};
use crate::exact::scores::{score, ScoreKind};
use crate::graph::Dag;
use crate::model::NodeHyper;
use crate::rng::{derive_seed, stream, substream};
use crate::structure::{selection_frequencies, CandidateDags, CandidateParentSets};

/// Success probability of the child's first category under parent code `c`:
/// 2/3 at odd codes, 1/3 at even ones.
pub fn single_node_q(k_pa: usize) -> Vec<f64> {
    (0..k_pa).map(|c| if c % 2 == 1 { 2.0 / 3.0 } else { 1.0 / 3.0 }).collect()
}

/// Rows `(parent, child)` with the parent uniform on `k_pa` categories and
/// the child equal to category 0 with probability `q[parent]`.
pub fn gen_single_node<R: Rng + ?Sized>(k_pa: usize, n: usize, rng: &mut R) -> Result<(CategoricalDataset, Vec<f64>)> {
    if k_pa < 2 {
        return Err(Error::InvalidParameter(format!("K_Pa must be at least 2, got {k_pa}")));
    }
    let q = single_node_q(k_pa);
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let c = rng.random_range(0..k_pa);
            let x = u32::from(rng.random::<f64>() >= q[c]);
            vec![c as u32, x]
        })
        .collect();
    Ok((CategoricalDataset::from_codes(&rows, vec![k_pa, 2])?, q))
}

/// Data and true conditionals of a three-node design.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeNodeSample {
    pub dataset: CategoricalDataset,
    /// `Pr(x2 = 0 | x1)`, indexed by `x1`; empty when `x2` is a root.
    pub p2: Vec<f64>,
    /// `Pr(x3 = 0 | parents)`, indexed by the mixed-radix parent configuration.
    pub p3: Vec<f64>,
}

fn bernoulli_code<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u32 {
    u32::from(rng.random::<f64>() >= p)
}

/// `x1` uniform on `k1`, binary `x2` with `Pr(x2 = 0 | x1) ~ U(0.01, 0.99)`,
/// binary `x3` with `Pr(x3 = 0 | x1, x2) ~ Beta(2, 15)`. The data follow the
/// larger of the two candidate DAGs.
pub fn gen_two_dag<R: Rng + ?Sized>(k1: usize, n: usize, rng: &mut R) -> Result<ThreeNodeSample> {
    if k1 < 2 {
        return Err(Error::InvalidParameter(format!("k1 must be at least 2, got {k1}")));
    }
    let beta = Beta::new(2.0, 15.0).expect("valid shapes");
    let p2: Vec<f64> = (0..k1).map(|_| rng.random_range(0.01..0.99)).collect();
    let p3: Vec<f64> = (0..2 * k1).map(|_| beta.sample(rng)).collect();
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let x1 = rng.random_range(0..k1);
            let x2 = bernoulli_code(p2[x1], rng);
            // parents (x1, x2) in mixed radix with x1 most significant
            let x3 = bernoulli_code(p3[x1 * 2 + x2 as usize], rng);
            vec![x1 as u32, x2, x3]
        })
        .collect();
    Ok(ThreeNodeSample {
        dataset: CategoricalDataset::from_codes(&rows, vec![k1, 2, 2])?,
        p2,
        p3,
    })
}

/// The two candidate graphs of the three-node designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    /// `Pa(x3) = {x2}`
    G1,
    /// `Pa(x3) = {x1, x2}`
    G2,
}

pub const TWO_PARENT_SETS_DIMS: [usize; 3] = [5, 3, 2];

/// Independent uniform `x1` and `x2` on `k[0]` and `k[1]` categories and a
/// binary `x3` with a `U(0, 1)` success probability per parent configuration.
pub fn gen_two_parent_sets<R: Rng + ?Sized>(
    truth: Truth,
    k: [usize; 3],
    n: usize,
    rng: &mut R,
) -> Result<ThreeNodeSample> {
    if k[2] != 2 || k[0] < 2 || k[1] < 2 {
        return Err(Error::InvalidParameter(format!("need k1, k2 >= 2 and binary x3, got {k:?}")));
    }
    let configs = match truth {
        Truth::G1 => k[1],
        Truth::G2 => k[0] * k[1],
    };
    let p3: Vec<f64> = (0..configs).map(|_| rng.random::<f64>()).collect();
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let x1 = rng.random_range(0..k[0]);
            let x2 = rng.random_range(0..k[1]);
            let cfg = match truth {
                Truth::G1 => x2,
                Truth::G2 => x1 * k[1] + x2,
            };
            vec![x1 as u32, x2 as u32, bernoulli_code(p3[cfg], rng)]
        })
        .collect();
    Ok(ThreeNodeSample {
        dataset: CategoricalDataset::from_codes(&rows, k.to_vec())?,
        p2: Vec::new(),
        p3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "design")]
pub enum Design {
    SingleNode { k_pa: usize },
    TwoDag { k1: usize },
    TwoParentSets { truth: Truth },
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::SingleNode { .. } => "single-node",
            Design::TwoDag { .. } => "two-dag",
            Design::TwoParentSets { .. } => "two-parent-sets",
        }
    }

    /// Sample size used by default for the design.
    pub fn default_n(&self) -> usize {
        match self {
            Design::SingleNode { .. } => 100,
            Design::TwoDag { .. } => 200,
            Design::TwoParentSets { .. } => 100,
        }
    }

    fn on_grid(&self, n: usize) -> bool {
        match *self {
            Design::SingleNode { k_pa } => [2, 3, 5, 10].contains(&k_pa) && n == 100,
            Design::TwoDag { k1 } => [5, 25, 100, 200].contains(&k1) && n == 200,
            Design::TwoParentSets { .. } => [50, 75, 100, 150].contains(&n),
        }
    }

    /// Fixed Langevin step sizes of the sampled node.
    pub fn default_eps(&self) -> Vec<f64> {
        match *self {
            Design::SingleNode { .. } => vec![0.5, 0.5],
            Design::TwoDag { k1 } => match k1 {
                ..=5 => vec![0.9, 0.3],
                6..=25 => vec![0.65, 0.25],
                26..=100 => vec![0.45, 0.15],
                _ => vec![0.4, 0.1],
            },
            Design::TwoParentSets { truth: Truth::G1 } => vec![0.5, 0.5],
            Design::TwoParentSets { truth: Truth::G2 } => vec![0.1, 0.1],
        }
    }

    pub fn default_iterations(&self) -> usize {
        match self {
            Design::TwoParentSets { .. } => 20_000,
            _ => 10_000,
        }
    }

    /// Hyperparameters of the sampled (binary) node.
    pub fn default_hyper(&self) -> NodeHyper {
        match self {
            Design::TwoParentSets { .. } => NodeHyper::default_for(2),
            _ => NodeHyper {
                b: 1.0,
                rho: 2.0,
                c: 1.0,
                d: 1.0,
            },
        }
    }
}

/// One replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub design: Design,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub eps: Vec<f64>,
    pub hyper: NodeHyper,
    /// Equivalent sample size of the BDE score.
    pub iss: f64,
    /// Worker threads across replications. Not serialized: results do not
    /// depend on it.
    #[serde(skip, default = "one")]
    pub workers: usize,
    /// Allows parameters off the standard grids.
    pub custom: bool,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn new(design: Design, replications: usize, seed: u64) -> Self {
        Self {
            design,
            n: design.default_n(),
            replications,
            seed,
            iterations: design.default_iterations(),
            burn_in: 200,
            eps: design.default_eps(),
            hyper: design.default_hyper(),
            iss: 1.0,
            workers: 1,
            custom: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.custom && !self.design.on_grid(self.n) {
            return Err(Error::InvalidParameter(format!(
                "{:?} with n={} is off the standard grid; set custom to run it",
                self.design, self.n
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("need at least one replication".into()));
        }
        if self.eps.len() != 2 || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidParameter(format!("need two positive step sizes, got {:?}", self.eps)));
        }
        if !(self.iss > 0.0) {
            return Err(Error::InvalidParameter("iss must be positive".into()));
        }
        self.hyper.validate()?;
        self.chain_config(0).validate()
    }

    pub fn replication_seeds(&self, r: usize) -> (u64, u64) {
        (
            derive_seed(self.seed, &[stream::REPLICATION, r as u64, stream::DATA]),
            derive_seed(self.seed, &[stream::REPLICATION, r as u64, stream::CHAIN]),
        )
    }

    fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed,
            adapt: false,
            ..ChainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hidden,
    Mle,
    Dm,
    Bic,
    Aic,
    Bde,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Hidden, Method::Mle, Method::Dm, Method::Bic, Method::Aic, Method::Bde];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hidden => "hidden",
            Method::Mle => "mle",
            Method::Dm => "dm",
            Method::Bic => "bic",
            Method::Aic => "aic",
            Method::Bde => "bde",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }

    fn applies_to(self, design: &Design) -> bool {
        match design {
            Design::SingleNode { .. } => matches!(self, Method::Hidden | Method::Mle | Method::Dm),
            _ => !matches!(self, Method::Mle | Method::Dm),
        }
    }
}

/// Per-replication metrics plus mean and standard deviation rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub columns: Vec<String>,
    /// `(data seed, chain seed)` of each replication.
    pub seeds: Vec<(u64, u64)>,
    pub rows: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation; zero for a single replication.
    pub sd: Vec<f64>,
}

impl ExperimentResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.mean[i])
    }

    /// One row per replication followed by `mean` and `sd` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["replication".to_string(), "data_seed".into(), "chain_seed".into()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header)?;
        for (r, (row, (ds, cs))) in self.rows.iter().zip(&self.seeds).enumerate() {
            let mut rec = vec![r.to_string(), ds.to_string(), cs.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        for (label, vals) in [("mean", &self.mean), ("sd", &self.sd)] {
            let mut rec = vec![label.to_string(), String::new(), String::new()];
            rec.extend(vals.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn columns(design: &Design, methods: &[Method]) -> Vec<String> {
    let mut cols = Vec::new();
    for m in methods {
        match design {
            Design::SingleNode { .. } => cols.push(format!("rmse_{}", m.name())),
            Design::TwoDag { .. } => {
                if *m == Method::Hidden {
                    cols.push("pr_g2_hidden".into());
                }
                cols.push(format!("select_g2_{}", m.name()));
            }
            Design::TwoParentSets { .. } => {
                if *m == Method::Hidden {
                    cols.push("pr_true_hidden".into());
                    cols.push("select_true_hidden".into());
                } else {
                    cols.push(format!("delta_{}", m.name()));
                    cols.push(format!("select_true_{}", m.name()));
                }
            }
        }
    }
    cols
}

/// Conditional MLE with the pooled child proportion for unobserved parent
/// configurations.
pub fn mle_fitted(pct: &ParentChildTable) -> Vec<Vec<f64>> {
    let marg = pct.child_marginal();
    let total: u64 = marg.iter().sum();
    (0..pct.n_configs())
        .map(|c| {
            let np = pct.parent_count(c);
            if np > 0 {
                pct.row(c).iter().map(|&x| x as f64 / np as f64).collect()
            } else {
                marg.iter().map(|&x| x as f64 / total as f64).collect()
            }
        })
        .collect()
}

/// Dirichlet–multinomial posterior predictive with a flat `Dir(1, ..., 1)`
/// prior on every row.
pub fn dm_fitted(pct: &ParentChildTable) -> Vec<Vec<f64>> {
    let k = pct.k_child() as f64;
    (0..pct.n_configs())
        .map(|c| {
            let np = pct.parent_count(c) as f64;
            pct.row(c).iter().map(|&x| (x as f64 + 1.0) / (np + k)).collect()
        })
        .collect()
}

/// Root mean square error of the fitted first-category probabilities.
pub fn rmse(fitted: &[Vec<f64>], q: &[f64]) -> f64 {
    let s: f64 = fitted.iter().zip(q).map(|(row, &qc)| (row[0] - qc).powi(2)).sum();
    (s / q.len() as f64).sqrt()
}

fn score_kind(m: Method) -> Option<ScoreKind> {
    match m {
        Method::Bic => Some(ScoreKind::Bic),
        Method::Aic => Some(ScoreKind::Aic),
        Method::Bde => Some(ScoreKind::Bde),
        _ => None,
    }
}

/// The two candidate DAGs of a three-node design.
pub fn three_node_candidates(design: &Design) -> (Dag, Dag) {
    match design {
        Design::TwoDag { .. } => (
            Dag::from_edges(3, &[(0, 1), (0, 2)]).expect("acyclic"),
            Dag::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).expect("acyclic"),
        ),
        _ => (
            Dag::from_edges(3, &[(1, 2)]).expect("acyclic"),
            Dag::from_edges(3, &[(0, 2), (1, 2)]).expect("acyclic"),
        ),
    }
}

/// Runs one replication and returns its metrics in column order.
pub fn run_replication(spec: &ExperimentSpec, methods: &[Method], r: usize) -> Result<Vec<f64>> {
    let (data_seed, chain_seed) = spec.replication_seeds(r);
    let mut rng = substream(data_seed, &[]);
    let cfg = spec.chain_config(chain_seed);
    let mut out = Vec::new();
    match spec.design {
        Design::SingleNode { k_pa } => {
            let (ds, q) = gen_single_node(k_pa, spec.n, &mut rng)?;
            let pct = parent_child_table(&ds, 1, &[0])?;
            for &m in methods {
                let fitted = match m {
                    Method::Hidden => {
                        let g = Dag::from_edges(2, &[(0, 1)])?;
                        let chain_spec = hidden_spec(&ds, spec, g, StructureMode::Fixed, 1);
                        let output = run_chain(&ds, &chain_spec, &cfg)?;
                        output.fitted_table(0, &pct)
                    }
                    Method::Mle => mle_fitted(&pct),
                    Method::Dm => dm_fitted(&pct),
                    _ => unreachable!("filtered by applies_to"),
                };
                out.push(rmse(&fitted, &q));
            }
        }
        Design::TwoDag { k1 } => {
            let sample = gen_two_dag(k1, spec.n, &mut rng)?;
            let ds = &sample.dataset;
            let (g1, g2) = three_node_candidates(&spec.design);
            for &m in methods {
                if m == Method::Hidden {
                    let cd = CandidateDags::uniform(vec![g1.clone(), g2.clone()])?;
                    let mode = StructureMode::Dags { candidates: cd };
                    let chain_spec = hidden_spec(ds, spec, g1.clone(), mode, 2);
                    let output = run_chain(ds, &chain_spec, &cfg)?;
                    let choices: Vec<usize> = output.kept_choices().iter().map(|c| c[0]).collect();
                    let pr = selection_frequencies(&choices, 2)?[1];
                    out.push(pr);
                    out.push(f64::from(u8::from(pr > 0.5)));
                } else {
                    let kind = score_kind(m).expect("filtered by applies_to");
                    let d = score(kind, ds, &g2, spec.iss)? - score(kind, ds, &g1, spec.iss)?;
                    out.push(f64::from(u8::from(d > 0.0)));
                }
            }
        }
        Design::TwoParentSets { truth } => {
            let sample = gen_two_parent_sets(truth, TWO_PARENT_SETS_DIMS, spec.n, &mut rng)?;
            let ds = &sample.dataset;
            let (g1, g2) = three_node_candidates(&spec.design);
            let (g_true, g_false, true_idx) = match truth {
                Truth::G1 => (&g1, &g2, 0),
                Truth::G2 => (&g2, &g1, 1),
            };
            for &m in methods {
                if m == Method::Hidden {
                    let cps = CandidateParentSets::uniform(2, vec![vec![1], vec![0, 1]])?;
                    let mode = StructureMode::ParentSets { sets: vec![cps] };
                    let chain_spec = hidden_spec(ds, spec, g1.clone(), mode, 2);
                    let output = run_chain(ds, &chain_spec, &cfg)?;
                    let choices: Vec<usize> = output.kept_choices().iter().map(|c| c[0]).collect();
                    let pr = selection_frequencies(&choices, 2)?[true_idx];
                    out.push(pr);
                    out.push(f64::from(u8::from(pr > 0.5)));
                } else {
                    let kind = score_kind(m).expect("filtered by applies_to");
                    let d = score(kind, ds, g_true, spec.iss)? - score(kind, ds, g_false, spec.iss)?;
                    out.push(d);
                    out.push(f64::from(u8::from(d > 0.0)));
                }
            }
        }
    }
    Ok(out)
}

fn hidden_spec(ds: &CategoricalDataset, spec: &ExperimentSpec, initial: Dag, mode: StructureMode, node: usize) -> ChainSpec {
    let mut cs = ChainSpec::new(ds, initial, mode, 1.0).with_nodes(vec![node]);
    cs.hyper[node] = spec.hyper;
    cs.eps[node] = spec.eps.clone();
    cs
}

/// Runs every replication (in parallel when `spec.workers > 1`) and
/// summarizes. Methods that do not apply to the design are dropped.
pub fn run_experiment(spec: &ExperimentSpec, methods: &[Method]) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut methods: Vec<Method> = methods.iter().copied().filter(|m| m.applies_to(&spec.design)).collect();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidParameter(format!("no requested method applies to {}", spec.design.name())));
    }
    let rows: Vec<Vec<f64>> = if spec.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..spec.replications)
                .into_par_iter()
                .map(|r| run_replication(spec, &methods, r))
                .collect::<Result<_>>()
        })?
    } else {
        (0..spec.replications)
            .map(|r| run_replication(spec, &methods, r))
            .collect::<Result<_>>()?
    };
    let columns = columns(&spec.design, &methods);
    let (mean, sd) = (0..columns.len())
        .map(|i| mean_sd(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .unzip();
    Ok(ExperimentResult {
        spec: spec.clone(),
        columns,
        seeds: (0..spec.replications).map(|r| spec.replication_seeds(r)).collect(),
        rows,
        mean,
        sd,
    })
}
