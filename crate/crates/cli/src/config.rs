//! Run configuration: command-line flags merged over an optional TOML config
//! file or JSON manifest.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use hidden_core::structure::Regime;
use hidden_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ingest,
    Fit,
    Structure,
    Score,
    Predict,
    Simulate,
    Bench,
    Diagnose,
}

impl Command {
    pub fn is_randomized(self) -> bool {
        !matches!(self, Command::Ingest | Command::Diagnose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fixed,
    Edges,
    ParentSets,
    Dags,
    MarkovBlanket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    Ordered,
    Unordered,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Ordered => Regime::Ordered,
            RegimeArg::Unordered => Regime::Unordered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DesignArg {
    SingleNode,
    TwoDag,
    TwoParentSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TruthArg {
    G1,
    G2,
}

/// Every setting a command may read. Unset fields fall back to the
/// command's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub data: Option<PathBuf>,
    pub delimiter: Option<char>,
    pub mode: Option<Mode>,
    pub dag: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub node: Option<String>,
    pub query: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// `node=key:value` overrides, applied in order.
    pub hyper: Vec<String>,
    pub regime: Option<RegimeArg>,
    pub shuffle: Option<bool>,
    pub eps: Option<f64>,
    pub adapt: Option<bool>,
    pub t0: Option<f64>,
    /// When false the prior means stay at `t0`.
    pub update_t: Option<bool>,
    pub design: Option<DesignArg>,
    pub k_pa: Option<usize>,
    pub k1: Option<usize>,
    pub truth: Option<TruthArg>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub custom: Option<bool>,
    pub iss: Option<f64>,
    pub exact_beta: Option<f64>,
    pub exact_alpha: Option<f64>,
    pub exact_budget: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Fields set in `flags` replace those here; hyperparameter overrides
    /// from the flags are applied after the file's.
    pub fn overlay(mut self, flags: &RunConfig) -> RunConfig {
        overlay!(self, flags; command, data, delimiter, mode, dag, candidates, node, query, trace,
            iterations, burn_in, thin, seed, workers, out, regime, shuffle, eps, adapt, t0, update_t, design,
            k_pa, k1, truth, n, replications, methods, custom, iss, exact_beta, exact_alpha, exact_budget);
        self.hyper.extend(flags.hyper.iter().cloned());
        self
    }

    /// Reads a TOML config or, for `.json` files, a manifest.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
        }
    }

    /// The settings that determine a command's outputs: everything except the
    /// output directory and the worker count.
    pub fn manifest(&self) -> RunConfig {
        RunConfig {
            out: None,
            workers: None,
            ..self.clone()
        }
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        let c = self.delimiter.unwrap_or(',');
        u8::try_from(c).map_err(|_| Error::InvalidParameter(format!("delimiter '{c}' is not a single byte")))
    }

    pub fn require_data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("--data is required".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parsed `node=key:value`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperOverride {
    pub node: String,
    pub key: String,
    pub value: f64,
}

pub fn parse_hyper(s: &str) -> Result<HyperOverride> {
    let bad = || Error::InvalidParameter(format!("expected node=key:value, got '{s}'"));
    let (node, rest) = s.split_once('=').ok_or_else(bad)?;
    let (key, value) = rest.split_once(':').ok_or_else(bad)?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    Ok(HyperOverride {
        node: node.trim().to_string(),
        key: key.trim().to_string(),
        value,
    })
}

/// Hierarchical Dirichlet networks: fitting, structure learning and scoring.
#[derive(Debug, Parser)]
#[command(name = "hidden", version)]
pub struct Cli {
    /// Command to run (may also come from --command or the config file).
    #[arg(value_enum)]
    pub command: Option<Command>,
    #[arg(long = "command", value_enum)]
    pub command_flag: Option<Command>,
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long, visible_alias = "manifest")]
    pub config: Option<PathBuf>,
    /// Delimited data file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Edge-list file (`a -> b` per line).
    #[arg(long)]
    pub dag: Option<PathBuf>,
    /// Candidate parents, parent sets or DAGs, depending on the mode.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Target variable (name or 0-based index).
    #[arg(long)]
    pub node: Option<String>,
    /// CSV of query rows for `predict`.
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Output directory of an earlier run, for `diagnose`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Hyperparameter override `node=key:value` with key one of b, rho, c, d, eps.
    #[arg(long)]
    pub hyper: Vec<String>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long)]
    pub shuffle: Option<bool>,
    /// Initial Langevin step size for every category.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Tune step sizes during burn-in.
    #[arg(long)]
    pub adapt: Option<bool>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Sample the prior means (false keeps them at --t0).
    #[arg(long)]
    pub update_t: Option<bool>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    #[arg(long)]
    pub k_pa: Option<usize>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long, value_enum)]
    pub truth: Option<TruthArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated methods for `bench`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Allow designs off the standard grids.
    #[arg(long)]
    pub custom: Option<bool>,
    /// Equivalent sample size of the BDE score.
    #[arg(long)]
    pub iss: Option<f64>,
    #[arg(long)]
    pub exact_beta: Option<f64>,
    #[arg(long)]
    pub exact_alpha: Option<f64>,
    #[arg(long)]
    pub exact_budget: Option<usize>,
}

impl Cli {
    pub fn flags(&self) -> RunConfig {
        RunConfig {
            command: self.command.or(self.command_flag),
            data: self.data.clone(),
            delimiter: self.delimiter,
            mode: self.mode,
            dag: self.dag.clone(),
            candidates: self.candidates.clone(),
            node: self.node.clone(),
            query: self.query.clone(),
            trace: self.trace.clone(),
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            hyper: self.hyper.clone(),
            regime: self.regime,
            shuffle: self.shuffle,
            eps: self.eps,
            adapt: self.adapt,
            t0: self.t0,
            update_t: self.update_t,
            design: self.design,
            k_pa: self.k_pa,
            k1: self.k1,
            truth: self.truth,
            n: self.n,
            replications: self.replications,
            methods: self.methods.clone(),
            custom: self.custom,
            iss: self.iss,
            exact_beta: self.exact_beta,
            exact_alpha: self.exact_alpha,
            exact_budget: self.exact_budget,
        }
    }

    /// File settings overlaid by the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(&self.flags()))
    }
}
