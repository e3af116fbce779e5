//! Command implementations. Each command reads its inputs, writes its
//! artifacts under the output directory and finishes with `manifest.json`.
//!
//! Layout:
//!
//! ```text
//! out/
//!   manifest.json        settings needed to rerun (`--config out/manifest.json`)
//!   summary.json         command-specific summary
//!   traces/              t.csv, log_post.csv, structure.csv
//!   graphs/              edge probabilities, MAP/MPM edge lists and DOT files
//!   ...                  command-specific CSV files
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use hidden_core::chain::{run_chain, ChainConfig, ChainOutput, ChainSpec, ChainSummary, StructureMode};
use hidden_core::data::{contingency, ingest_path, parent_child_table, CategoricalDataset};
use hidden_core::diagnostics::ess;
use hidden_core::exact::{exact_log_marginal_dag, ExactPrior, DEFAULT_EXACT_BUDGET};
use hidden_core::exact::scores::{score, ScoreKind};
use hidden_core::graph::{CandidateSet, Dag};
use hidden_core::rng::substream;
use hidden_core::sim::{
    gen_single_node, gen_two_dag, gen_two_parent_sets, run_experiment, Design, ExperimentSpec, Method, Truth,
    TWO_PARENT_SETS_DIMS,
};
use hidden_core::structure::{selection_frequencies, CandidateDags, CandidateParentSets, Regime, TableCache};
use hidden_core::{Error, Result};

use crate::config::{parse_hyper, Command, DesignArg, Mode, RunConfig, TruthArg};
use crate::files::{parse_candidate_dags, parse_candidate_parents, parse_parent_sets, parse_queries};

pub const DEFAULT_EPS: f64 = 0.5;

struct OutDir(PathBuf);

impl OutDir {
    fn create(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root)?;
        Ok(Self(root))
    }

    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.0.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(p)
    }

    fn writer(&self, rel: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(rel)?)?))
    }

    fn text(&self, rel: &str, s: &str) -> Result<()> {
        std::fs::write(self.path(rel)?, s)?;
        Ok(())
    }

    fn json<T: Serialize>(&self, rel: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.text(rel, &s)
    }
}

/// Runs the configured command. Randomized commands without a seed get a
/// fresh one, which is recorded in the manifest.
pub fn run(mut cfg: RunConfig) -> Result<()> {
    let command = cfg
        .command
        .ok_or_else(|| Error::InvalidParameter("no command given".into()))?;
    if command.is_randomized() && cfg.seed.is_none() {
        let seed: u64 = rand::random();
        log::warn!("no --seed given; using {seed}");
        cfg.seed = Some(seed);
    }
    let out = OutDir::create(cfg.out_dir())?;
    match command {
        Command::Ingest => cmd_ingest(&cfg, &out)?,
        Command::Fit => cmd_fit(&cfg, &out)?,
        Command::Structure => cmd_structure(&cfg, &out)?,
        Command::Score => cmd_score(&cfg, &out)?,
        Command::Predict => cmd_predict(&cfg, &out)?,
        Command::Simulate => cmd_simulate(&cfg, &out)?,
        Command::Bench => cmd_bench(&cfg, &out)?,
        Command::Diagnose => cmd_diagnose(&cfg, &out)?,
    }
    out.json("manifest.json", &cfg.manifest())
}

fn load_data(cfg: &RunConfig) -> Result<CategoricalDataset> {
    ingest_path(cfg.require_data()?, cfg.delimiter_byte()?)
}

fn load_dag(ds: &CategoricalDataset, cfg: &RunConfig) -> Result<Dag> {
    match &cfg.dag {
        Some(p) => Dag::parse_edge_list(ds.p(), &std::fs::read_to_string(p)?, |t| ds.resolve(t)),
        None => Ok(Dag::empty(ds.p())),
    }
}

fn read_candidates(cfg: &RunConfig) -> Result<Option<String>> {
    cfg.candidates
        .as_ref()
        .map(|p| std::fs::read_to_string(p).map_err(Error::from))
        .transpose()
}

fn require_node(ds: &CategoricalDataset, cfg: &RunConfig) -> Result<usize> {
    let tok = cfg
        .node
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--node is required".into()))?;
    ds.resolve(tok)
}

fn chain_config(cfg: &RunConfig) -> ChainConfig {
    let d = ChainConfig::default();
    ChainConfig {
        iterations: cfg.iterations.unwrap_or(d.iterations),
        burn_in: cfg.burn_in.unwrap_or(d.burn_in),
        thin: cfg.thin.unwrap_or(d.thin),
        seed: cfg.seed.unwrap_or(0),
        adapt: cfg.adapt.unwrap_or(d.adapt),
        t0: cfg.t0.unwrap_or(d.t0),
        update_t: cfg.update_t.unwrap_or(d.update_t),
        workers: cfg.workers.unwrap_or(1),
        ..d
    }
}

fn apply_hyper(ds: &CategoricalDataset, cfg: &RunConfig, spec: &mut ChainSpec) -> Result<()> {
    for raw in &cfg.hyper {
        let h = parse_hyper(raw)?;
        let j = ds.resolve(&h.node)?;
        if h.key == "eps" {
            spec.eps[j] = vec![h.value; ds.cardinality(j)];
        } else {
            spec.hyper[j].set(&h.key, h.value)?;
        }
    }
    Ok(())
}

/// Chain specification for a structure mode, plus what is needed to report
/// on it afterwards.
struct Plan {
    spec: ChainSpec,
    mode: Mode,
    dags: Option<CandidateDags>,
    parent_sets: Vec<CandidateParentSets>,
    target: Option<usize>,
}

fn plan(ds: &CategoricalDataset, cfg: &RunConfig, mode: Mode) -> Result<Plan> {
    let p = ds.p();
    let mut initial = load_dag(ds, cfg)?;
    let regime: Regime = cfg.regime.map(Into::into).unwrap_or_default();
    let mut dags = None;
    let mut parent_sets = Vec::new();
    let mut target = None;
    let mut nodes: Option<Vec<usize>> = None;
    let structure = match mode {
        Mode::Fixed => StructureMode::Fixed,
        Mode::Edges => {
            let candidates = match read_candidates(cfg)? {
                Some(text) => parse_candidate_parents(ds, &text)?,
                None => (0..p)
                    .map(|j| match regime {
                        Regime::Ordered => (0..j).collect(),
                        Regime::Unordered => CandidateSet::all_others(j, p).candidates,
                    })
                    .collect(),
            };
            StructureMode::Edges {
                candidates,
                regime,
                shuffle: cfg.shuffle.unwrap_or(false),
            }
        }
        Mode::ParentSets => {
            let text = read_candidates(cfg)?
                .ok_or_else(|| Error::InvalidParameter("parent-sets mode needs --candidates".into()))?;
            parent_sets = parse_parent_sets(ds, &text)?;
            if cfg.dag.is_none() {
                for cps in &parent_sets {
                    initial.set_parents(cps.node, &cps.sets[0])?;
                }
            }
            nodes = Some(parent_sets.iter().map(|c| c.node).collect());
            StructureMode::ParentSets {
                sets: parent_sets.clone(),
            }
        }
        Mode::Dags => {
            let text = read_candidates(cfg)?
                .ok_or_else(|| Error::InvalidParameter("dags mode needs --candidates".into()))?;
            let cd = parse_candidate_dags(ds, &text)?;
            initial = cd.dags[0].clone();
            nodes = Some(cd.varying_nodes());
            dags = Some(cd.clone());
            StructureMode::Dags { candidates: cd }
        }
        Mode::MarkovBlanket => {
            let j = require_node(ds, cfg)?;
            target = Some(j);
            let mut candidates = vec![Vec::new(); p];
            candidates[j] = CandidateSet::all_others(j, p).candidates;
            initial = Dag::empty(p);
            nodes = Some(vec![j]);
            StructureMode::Edges {
                candidates,
                regime: Regime::Unordered,
                shuffle: cfg.shuffle.unwrap_or(false),
            }
        }
    };
    let mut spec = ChainSpec::new(ds, initial, structure, cfg.eps.unwrap_or(DEFAULT_EPS));
    if let Some(nodes) = nodes {
        spec = spec.with_nodes(nodes);
    }
    apply_hyper(ds, cfg, &mut spec)?;
    Ok(Plan {
        spec,
        mode,
        dags,
        parent_sets,
        target,
    })
}

fn write_traces(out: &OutDir, chain: &ChainOutput) -> Result<()> {
    chain.write_t_csv(out.writer("traces/t.csv")?)?;
    chain.write_log_post_csv(out.writer("traces/log_post.csv")?)?;
    chain.write_structure_csv(out.writer("traces/structure.csv")?)
}

#[derive(Serialize)]
struct DatasetSummary {
    n: usize,
    variables: Vec<VariableSummary>,
}

#[derive(Serialize)]
struct VariableSummary {
    name: String,
    cardinality: usize,
    labels: Vec<String>,
    counts: Vec<u64>,
}

fn cmd_ingest(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let ds = load_data(cfg)?;
    let mut variables = Vec::new();
    for j in 0..ds.p() {
        let t = contingency(&ds, &[j])?;
        out.text(&format!("tables/{}.txt", ds.names()[j]), &t.to_text())?;
        variables.push(VariableSummary {
            name: ds.names()[j].clone(),
            cardinality: ds.cardinality(j),
            labels: ds.labels(j).to_vec(),
            counts: t.counts().to_vec(),
        });
    }
    let mut w = csv::Writer::from_writer(out.writer("codes.csv")?);
    w.write_record(ds.names())?;
    for row in ds.rows() {
        w.write_record(row.iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    out.json("summary.json", &DatasetSummary { n: ds.n(), variables })
}

#[derive(Serialize)]
struct PredictiveTable {
    node: String,
    parents: Vec<String>,
    labels: Vec<String>,
    rows: Vec<PredictiveRow>,
}

#[derive(Serialize)]
struct PredictiveRow {
    parent_values: Vec<String>,
    parent_count: u64,
    probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct FitSummary {
    chain: ChainSummary,
    predictive: Vec<PredictiveTable>,
}

fn cmd_fit(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let ds = load_data(cfg)?;
    let plan = plan(&ds, cfg, Mode::Fixed)?;
    let chain = run_chain(&ds, &plan.spec, &chain_config(cfg))?;
    write_traces(out, &chain)?;
    let g = &plan.spec.initial;
    let mut predictive = Vec::new();
    for (slot, &j) in chain.nodes.iter().enumerate() {
        let pct = parent_child_table(&ds, j, g.parents(j))?;
        let fitted = chain.fitted_table(slot, &pct);
        let rows = fitted
            .into_iter()
            .enumerate()
            .map(|(c, probabilities)| PredictiveRow {
                parent_values: pct
                    .config_values(c)
                    .iter()
                    .zip(pct.parents())
                    .map(|(&v, &pa)| ds.labels(pa)[v].clone())
                    .collect(),
                parent_count: pct.parent_count(c),
                probabilities,
            })
            .collect();
        predictive.push(PredictiveTable {
            node: ds.names()[j].clone(),
            parents: g.parents(j).iter().map(|&v| ds.names()[v].clone()).collect(),
            labels: ds.labels(j).to_vec(),
            rows,
        });
    }
    out.json(
        "summary.json",
        &FitSummary {
            chain: chain.summary()?,
            predictive,
        },
    )
}

#[derive(Serialize)]
struct GraphProbability {
    index: usize,
    name: String,
    prior: f64,
    probability: f64,
}

#[derive(Serialize)]
struct StructureSummary {
    chain: ChainSummary,
    map_frequency: f64,
    map_edges: Vec<(String, String)>,
    /// `None` when the edges above one half form a cycle.
    mpm_edges: Option<Vec<(String, String)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graphs: Option<Vec<GraphProbability>>,
}

fn named_edges(ds: &CategoricalDataset, g: &Dag) -> Vec<(String, String)> {
    g.edges()
        .into_iter()
        .map(|(a, b)| (ds.names()[a].clone(), ds.names()[b].clone()))
        .collect()
}

fn write_edge_probabilities(out: &OutDir, ds: &CategoricalDataset, probs: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out.writer("graphs/edge_probabilities.csv")?);
    let mut header = vec!["from".to_string()];
    header.extend(ds.names().iter().cloned());
    w.write_record(&header)?;
    for (a, row) in probs.iter().enumerate() {
        let mut rec = vec![ds.names()[a].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_predictions(
    out: &OutDir,
    cfg: &RunConfig,
    ds: &CategoricalDataset,
    chain: &ChainOutput,
    target: usize,
) -> Result<()> {
    let Some(qpath) = &cfg.query else {
        return Ok(());
    };
    let queries = parse_queries(ds, target, &std::fs::read_to_string(qpath)?, cfg.delimiter_byte()?)?;
    let mut cache = TableCache::new(ds, chain_config(cfg).cache_capacity);
    let mut w = csv::Writer::from_writer(out.writer("predictive.csv")?);
    let mut header = vec!["query".to_string()];
    header.extend(ds.labels(target).iter().map(|l| format!("{}={l}", ds.names()[target])));
    w.write_record(&header)?;
    for (i, x) in queries.iter().enumerate() {
        let pmf = chain.predictive_pmf(&mut cache, target, x)?;
        let mut rec = vec![i.to_string()];
        rec.extend(pmf.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_structure(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let ds = load_data(cfg)?;
    let mode = cfg.mode.unwrap_or(Mode::Edges);
    let plan = plan(&ds, cfg, mode)?;
    let chain = run_chain(&ds, &plan.spec, &chain_config(cfg))?;
    write_traces(out, &chain)?;

    let probs = chain.edge_probabilities()?;
    write_edge_probabilities(out, &ds, &probs)?;
    let (map, freq) = chain.map_structure()?;
    out.text("graphs/map.txt", &map.to_edge_list(Some(ds.names())))?;
    out.text("graphs/map.dot", &map.to_dot(Some(ds.names())))?;
    let mpm = match chain.median_probability_model() {
        Ok(g) => {
            out.text("graphs/mpm.txt", &g.to_edge_list(Some(ds.names())))?;
            out.text("graphs/mpm.dot", &g.to_dot(Some(ds.names())))?;
            Some(named_edges(&ds, &g))
        }
        Err(e @ Error::Cycle { .. }) => {
            log::warn!("median probability model is cyclic: {e}");
            None
        }
        Err(e) => return Err(e),
    };

    let mut graphs = None;
    if let Some(cd) = &plan.dags {
        let choices: Vec<usize> = chain.kept_choices().iter().map(|c| c[0]).collect();
        let freq = selection_frequencies(&choices, cd.dags.len())?;
        let rows: Vec<GraphProbability> = (0..cd.dags.len())
            .map(|m| GraphProbability {
                index: m,
                name: cd.names[m].clone(),
                prior: cd.prior[m],
                probability: freq[m],
            })
            .collect();
        let mut w = csv::Writer::from_writer(out.writer("graphs/posterior.csv")?);
        w.write_record(["graph", "name", "prior", "probability"])?;
        for r in &rows {
            w.write_record([r.index.to_string(), r.name.clone(), r.prior.to_string(), r.probability.to_string()])?;
        }
        w.flush()?;
        graphs = Some(rows);
    }
    if !plan.parent_sets.is_empty() {
        let mut w = csv::Writer::from_writer(out.writer("graphs/parent_sets.csv")?);
        w.write_record(["node", "set", "parents", "prior", "probability"])?;
        for (i, cps) in plan.parent_sets.iter().enumerate() {
            let choices: Vec<usize> = chain.kept_choices().iter().map(|c| c[i]).collect();
            let freq = selection_frequencies(&choices, cps.sets.len())?;
            for (m, s) in cps.sets.iter().enumerate() {
                let names: Vec<&str> = s.iter().map(|&v| ds.names()[v].as_str()).collect();
                w.write_record([
                    ds.names()[cps.node].clone(),
                    m.to_string(),
                    names.join(";"),
                    cps.prior[m].to_string(),
                    freq[m].to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    if plan.mode == Mode::MarkovBlanket {
        let j = plan.target.expect("set in markov-blanket mode");
        let mut w = csv::Writer::from_writer(out.writer("graphs/blanket.csv")?);
        w.write_record(["node", "probability", "included"])?;
        for v in (0..ds.p()).filter(|&v| v != j) {
            let pr = probs[v][j];
            w.write_record([ds.names()[v].clone(), pr.to_string(), (pr > 0.5).to_string()])?;
        }
        w.flush()?;
    }
    if let Some(node) = &cfg.node {
        write_predictions(out, cfg, &ds, &chain, ds.resolve(node)?)?;
    }
    out.json(
        "summary.json",
        &StructureSummary {
            chain: chain.summary()?,
            map_frequency: freq,
            map_edges: named_edges(&ds, &map),
            mpm_edges: mpm,
            graphs,
        },
    )
}

fn cmd_predict(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let ds = load_data(cfg)?;
    let target = require_node(&ds, cfg)?;
    if cfg.query.is_none() {
        return Err(Error::InvalidParameter("predict needs --query".into()));
    }
    let plan = plan(&ds, cfg, cfg.mode.unwrap_or(Mode::Fixed))?;
    let chain = run_chain(&ds, &plan.spec, &chain_config(cfg))?;
    if chain.slot(target).is_none() {
        return Err(Error::InvalidParameter(format!(
            "node '{}' is not sampled in this mode",
            ds.names()[target]
        )));
    }
    write_predictions(out, cfg, &ds, &chain, target)?;
    out.json("summary.json", &chain.summary()?)
}

#[derive(Serialize)]
struct ScoreSummary {
    graphs: Vec<String>,
    /// `log_bf[a][b] = ln p(n | G_a) - ln p(n | G_b)`; `None` where an exact
    /// marginal exceeded its budget.
    log_bayes_factor: Vec<Vec<Option<f64>>>,
    hidden_probability: Vec<f64>,
}

fn cmd_score(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let ds = load_data(cfg)?;
    let text = read_candidates(cfg)?.ok_or_else(|| Error::InvalidParameter("score needs --candidates".into()))?;
    let cd = parse_candidate_dags(&ds, &text)?;
    let iss = cfg.iss.unwrap_or(1.0);
    let prior = ExactPrior::new(cfg.exact_beta.unwrap_or(1.0), cfg.exact_alpha.unwrap_or(1.0))?;
    let priors = vec![prior; ds.p()];
    let budget = cfg.exact_budget.unwrap_or(DEFAULT_EXACT_BUDGET);

    let plan = plan(&ds, cfg, Mode::Dags)?;
    let chain = run_chain(&ds, &plan.spec, &chain_config(cfg))?;
    let choices: Vec<usize> = chain.kept_choices().iter().map(|c| c[0]).collect();
    let hidden = selection_frequencies(&choices, cd.dags.len())?;

    let mut exact = Vec::new();
    let mut w = csv::Writer::from_writer(out.writer("scores.csv")?);
    w.write_record(["graph", "name", "score", "value", "note"])?;
    for (m, g) in cd.dags.iter().enumerate() {
        let id = m.to_string();
        for kind in [ScoreKind::Bic, ScoreKind::Aic, ScoreKind::Bde] {
            let v = score(kind, &ds, g, iss)?;
            w.write_record([id.as_str(), &cd.names[m], kind.name(), &v.to_string(), ""])?;
        }
        w.write_record([id.as_str(), &cd.names[m], "hidden", &hidden[m].to_string(), ""])?;
        match exact_log_marginal_dag(&ds, g, &priors, budget) {
            Ok(v) => {
                w.write_record([id.as_str(), &cd.names[m], "exact", &v.to_string(), ""])?;
                exact.push(Some(v));
            }
            Err(e @ Error::Budget { .. }) => {
                log::warn!("graph {}: {e}", cd.names[m]);
                w.write_record([id.as_str(), &cd.names[m], "exact", "", &e.to_string()])?;
                exact.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    w.flush()?;
    let log_bayes_factor = exact
        .iter()
        .map(|a| exact.iter().map(|b| Some((*a)? - (*b)?)).collect())
        .collect();
    out.json(
        "bayes_factors.json",
        &ScoreSummary {
            graphs: cd.names.clone(),
            log_bayes_factor,
            hidden_probability: hidden,
        },
    )?;
    out.json("summary.json", &chain.summary()?)
}

fn design(cfg: &RunConfig) -> Result<Design> {
    let kind = cfg
        .design
        .ok_or_else(|| Error::InvalidParameter("--design is required".into()))?;
    Ok(match kind {
        DesignArg::SingleNode => Design::SingleNode {
            k_pa: cfg.k_pa.unwrap_or(10),
        },
        DesignArg::TwoDag => Design::TwoDag { k1: cfg.k1.unwrap_or(5) },
        DesignArg::TwoParentSets => Design::TwoParentSets {
            truth: match cfg.truth.unwrap_or(TruthArg::G1) {
                TruthArg::G1 => Truth::G1,
                TruthArg::G2 => Truth::G2,
            },
        },
    })
}

fn experiment_spec(cfg: &RunConfig, default_reps: usize) -> Result<ExperimentSpec> {
    let d = design(cfg)?;
    let mut spec = ExperimentSpec::new(d, cfg.replications.unwrap_or(default_reps), cfg.seed.unwrap_or(0));
    if let Some(n) = cfg.n {
        spec.n = n;
    }
    if let Some(it) = cfg.iterations {
        spec.iterations = it;
    }
    if let Some(b) = cfg.burn_in {
        spec.burn_in = b;
    }
    if let Some(e) = cfg.eps {
        spec.eps = vec![e; 2];
    }
    if let Some(iss) = cfg.iss {
        spec.iss = iss;
    }
    spec.custom = cfg.custom.unwrap_or(false);
    spec.workers = cfg.workers.unwrap_or(1);
    let sampled = match d {
        Design::SingleNode { .. } => 1usize,
        _ => 2,
    };
    for raw in &cfg.hyper {
        let h = parse_hyper(raw)?;
        if h.node != sampled.to_string() && h.node != format!("x{}", sampled + 1) {
            return Err(Error::InvalidParameter(format!(
                "only the sampled node x{} takes overrides in this design",
                sampled + 1
            )));
        }
        if h.key == "eps" {
            spec.eps = vec![h.value; 2];
        } else {
            spec.hyper.set(&h.key, h.value)?;
        }
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct SimulatedTruth {
    replication: usize,
    data_seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    q: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    p2: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    p3: Vec<f64>,
}

fn cmd_simulate(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let spec = experiment_spec(cfg, 1)?;
    let width = spec.replications.saturating_sub(1).to_string().len().max(3);
    let mut truths = Vec::new();
    for r in 0..spec.replications {
        let (data_seed, _) = spec.replication_seeds(r);
        let mut rng = substream(data_seed, &[]);
        let (ds, truth) = match spec.design {
            Design::SingleNode { k_pa } => {
                let (ds, q) = gen_single_node(k_pa, spec.n, &mut rng)?;
                (ds, (q, Vec::new(), Vec::new()))
            }
            Design::TwoDag { k1 } => {
                let s = gen_two_dag(k1, spec.n, &mut rng)?;
                (s.dataset, (Vec::new(), s.p2, s.p3))
            }
            Design::TwoParentSets { truth } => {
                let s = gen_two_parent_sets(truth, TWO_PARENT_SETS_DIMS, spec.n, &mut rng)?;
                (s.dataset, (Vec::new(), s.p2, s.p3))
            }
        };
        ds.write_csv(out.writer(&format!("data/rep_{r:0width$}.csv"))?, cfg.delimiter_byte()?)?;
        truths.push(SimulatedTruth {
            replication: r,
            data_seed,
            q: truth.0,
            p2: truth.1,
            p3: truth.2,
        });
    }
    out.json("truth.json", &truths)
}

fn cmd_bench(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let d = design(cfg)?;
    let default_reps = if matches!(d, Design::TwoDag { .. }) { 100 } else { 50 };
    let spec = experiment_spec(cfg, default_reps)?;
    let methods = match &cfg.methods {
        Some(names) => names.iter().map(|s| Method::parse(s.trim())).collect::<Result<Vec<_>>>()?,
        None => Method::ALL.to_vec(),
    };
    let res = run_experiment(&spec, &methods)?;
    res.write_csv(out.writer("results.csv")?)?;
    out.json("experiment.json", &res)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostic {
    pub series: String,
    pub node: usize,
    pub category: Option<usize>,
    pub n: usize,
    pub ess: f64,
    pub constant: bool,
}

/// Trace values keyed by (node, category).
type Series = Vec<((usize, Option<usize>), Vec<f64>)>;

/// Reads `iteration,node[,category],value` rows into series keyed by
/// (node, category), dropping iterations before `burn_in`.
fn read_series(path: &Path, burn_in: usize, with_category: bool) -> Result<Series> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut series: std::collections::BTreeMap<(usize, Option<usize>), Vec<f64>> = Default::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("missing column {k} in {}", path.display()),
            })
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 2,
                msg: format!("non-numeric value in {}", path.display()),
            })
        };
        let it = num(0)? as usize;
        if it < burn_in {
            continue;
        }
        let node = num(1)? as usize;
        let (cat, v) = if with_category {
            (Some(num(2)? as usize), num(3)?)
        } else {
            (None, num(2)?)
        };
        series.entry((node, cat)).or_default().push(v);
    }
    Ok(series.into_iter().collect())
}

pub fn diagnose_dir(trace_dir: &Path, burn_in: usize) -> Result<Vec<SeriesDiagnostic>> {
    let mut rows = Vec::new();
    for (file, name, with_cat) in [("log_post.csv", "log_posterior", false), ("t.csv", "t", true)] {
        for ((node, category), xs) in read_series(&trace_dir.join("traces").join(file), burn_in, with_cat)? {
            let e = ess(&xs)?;
            rows.push(SeriesDiagnostic {
                series: name.to_string(),
                node,
                category,
                n: xs.len(),
                ess: e.value,
                constant: e.constant,
            });
        }
    }
    Ok(rows)
}

fn cmd_diagnose(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let dir = cfg
        .trace
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("diagnose needs --trace <run directory>".into()))?;
    let rows = diagnose_dir(dir, cfg.burn_in.unwrap_or(0))?;
    let mut w = csv::Writer::from_writer(out.writer("diagnostics.csv")?);
    w.write_record(["series", "node", "category", "n", "ess", "constant"])?;
    for r in &rows {
        w.write_record([
            r.series.clone(),
            r.node.to_string(),
            r.category.map(|c| c.to_string()).unwrap_or_default(),
            r.n.to_string(),
            r.ess.to_string(),
            r.constant.to_string(),
        ])?;
    }
    w.flush()?;
    let mut s = serde_json::to_string_pretty(&rows)?;
    s.push('\n');
    out.writer("summary.json")?.write_all(s.as_bytes())?;
    Ok(())
}
