//! Experiment configuration and the command-line verbs.
//!
//! A run directory (`out`) holds:
//!
//! ```text
//! dataset/manifest.csv   file,split
//! dataset/dataset.json   generator spec and declared classes
//! dataset/*.edges        one graph per file
//! oracle_cache.json
//! checkpoint.json        best parameters
//! last.json              latest parameters plus trainer state
//! history.csv / history.json
//! metrics.json, table.csv, instances.csv
//! finetune.csv
//! warmstart.csv, mip_starts/*.mst
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassData, Instance};
use crate::decoding::decode;
use crate::error::{Error, Result};
use crate::graphs::{generate_ba, generate_er, load_edge_list, perturb, save_edge_list, Graph, PerturbConfig};
use crate::metrics::{evaluate, solve_with_model, InstanceMetrics, MetricsReport};
use crate::model::{forward, init_model, load_checkpoint, save_checkpoint, Checkpoint, ModelConfig, ModelParams};
use crate::oracle::{export_mip_start, MipStart, MipStartMode, OracleCache, SolverAdapter, SolverRegistry};
use crate::problems::ProblemClass;
use crate::training::{finetune, TrainConfig, TrainHistory, TrainMode, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Er,
    Ba,
    /// Edge rewiring of one ER base graph per node count.
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub generator: Generator,
    pub n_min: usize,
    pub n_max: usize,
    /// Edge probability for `er` and for the base graph of `perturbed`.
    pub p: f64,
    /// Attachments per node for `ba`.
    pub m: usize,
    pub edit_rate: f64,
    pub count: usize,
    /// Train, validation and test sizes, taken in that order.
    pub splits: [usize; 3],
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            generator: Generator::Er,
            n_min: 30,
            n_max: 30,
            p: 0.15,
            m: 2,
            edit_rate: 0.1,
            count: 1000,
            splits: [800, 100, 100],
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.splits.contains(&0) {
            return Err(Error::Config("dataset count and every split must be positive".into()));
        }
        if self.splits.iter().sum::<usize>() != self.count {
            return Err(Error::Config(format!("splits {:?} do not sum to count {}", self.splits, self.count)));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::Config(format!("invalid node range {}..={}", self.n_min, self.n_max)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("edge probability {} outside [0, 1]", self.p)));
        }
        match self.generator {
            Generator::Ba if self.m == 0 || self.m >= self.n_min => {
                Err(Error::Config(format!("ba needs 0 < m < n_min, got m = {}", self.m)))
            }
            Generator::Perturbed if !(0.0..1.0).contains(&self.edit_rate) => {
                Err(Error::Config(format!("edit_rate {} outside [0, 1)", self.edit_rate)))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub time_limit: f64,
    pub adapter: String,
    pub mip_start: MipStartMode,
    pub held_out: Option<ProblemClass>,
    pub finetune_steps: usize,
    /// Single-problem AR copied into the fine-tuning CSV.
    pub reference: Option<f64>,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            time_limit: 0.2,
            adapter: crate::oracle::DEFAULT_ADAPTER.into(),
            mip_start: MipStartMode::Decoded,
            held_out: None,
            finetune_steps: 20,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out: PathBuf,
    /// Classes trained on. A held-out class is listed under `eval`.
    pub classes: Vec<ProblemClass>,
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs/default"),
            classes: vec![ProblemClass::Mis],
            dataset: DatasetSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `--seed` to the dataset, initialization and shuffling seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dataset.seed = seed;
        self.model.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("at least one class is required".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(Error::Config(format!("class {c} listed twice")));
            }
        }
        if self.train.mode == TrainMode::Single && self.classes.len() > 1 {
            return Err(Error::Config("SINGLE mode trains on exactly one class".into()));
        }
        if !(self.eval.time_limit > 0.0) {
            return Err(Error::Config("eval.time_limit must be positive".into()));
        }
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()
    }

    /// Training classes followed by the held-out class, if any.
    pub fn declared_classes(&self) -> Vec<ProblemClass> {
        let mut out = self.classes.clone();
        if let Some(h) = self.eval.held_out.filter(|h| !out.contains(h)) {
            out.push(h);
        }
        out
    }

    pub fn paths(&self) -> RunPaths {
        RunPaths { root: self.out.clone() }
    }
}

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn manifest(&self) -> PathBuf {
        self.dataset().join("manifest.csv")
    }
    pub fn dataset_meta(&self) -> PathBuf {
        self.dataset().join("dataset.json")
    }
    pub fn oracle_cache(&self) -> PathBuf {
        self.root.join("oracle_cache.json")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint.json")
    }
    pub fn last(&self) -> PathBuf {
        self.root.join("last.json")
    }
    pub fn history_csv(&self) -> PathBuf {
        self.root.join("history.csv")
    }
    pub fn history_json(&self) -> PathBuf {
        self.root.join("history.json")
    }
    pub fn metrics_json(&self) -> PathBuf {
        self.root.join("metrics.json")
    }
    pub fn table_csv(&self) -> PathBuf {
        self.root.join("table.csv")
    }
    pub fn instances_csv(&self) -> PathBuf {
        self.root.join("instances.csv")
    }
    pub fn finetune_csv(&self) -> PathBuf {
        self.root.join("finetune.csv")
    }
    pub fn warmstart_csv(&self) -> PathBuf {
        self.root.join("warmstart.csv")
    }
    pub fn mip_starts(&self) -> PathBuf {
        self.root.join("mip_starts")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

pub type NamedGraph = (String, Graph);

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSplits {
    pub train: Vec<NamedGraph>,
    pub val: Vec<NamedGraph>,
    pub test: Vec<NamedGraph>,
}

impl GraphSplits {
    pub fn get(&self, s: Split) -> &[NamedGraph] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, s: Split) -> &mut Vec<NamedGraph> {
        match s {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    /// Encodes every split for `cls`.
    pub fn class_data(&self, cls: ProblemClass) -> Result<ClassData> {
        ClassData::from_graphs(cls, &self.train, &self.val, &self.test)
    }
}

/// Deterministic graphs for `spec`, split in order.
pub fn generate_splits(spec: &DatasetSpec) -> Result<GraphSplits> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut bases: BTreeMap<usize, Graph> = BTreeMap::new();
    let mut all = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let n = rng.gen_range(spec.n_min..=spec.n_max);
        let seed: u64 = rng.gen();
        let g = match spec.generator {
            Generator::Er => generate_er(n, spec.p, seed)?,
            Generator::Ba => generate_ba(n, spec.m, seed)?,
            Generator::Perturbed => {
                if !bases.contains_key(&n) {
                    bases.insert(n, generate_er(n, spec.p, spec.seed ^ n as u64)?);
                }
                perturb(&bases[&n], PerturbConfig { edge_edit_rate: spec.edit_rate, seed })?
            }
        };
        all.push((format!("g{i:05}"), g));
    }
    let test = all.split_off(spec.splits[0] + spec.splits[1]);
    let val = all.split_off(spec.splits[0]);
    Ok(GraphSplits { train: all, val, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub classes: Vec<ProblemClass>,
    pub spec: DatasetSpec,
}

fn is_non_empty_dir(dir: &Path) -> Result<bool> {
    Ok(dir.is_dir() && fs::read_dir(dir)?.next().is_some())
}

/// Writes one edge-list file per graph plus the split manifest.
pub fn write_dataset(dir: &Path, splits: &GraphSplits, meta: &DatasetMeta, force: bool) -> Result<()> {
    if !force && is_non_empty_dir(dir)? {
        return Err(Error::DirectoryNotEmpty(dir.to_path_buf()));
    }
    fs::create_dir_all(dir)?;
    let mut manifest = String::from("file,split\n");
    for s in Split::ALL {
        for (name, g) in splits.get(s) {
            let file = format!("{name}.edges");
            save_edge_list(g, dir.join(&file))?;
            writeln!(manifest, "{file},{}", s.as_str()).unwrap();
        }
    }
    fs::write(dir.join("manifest.csv"), manifest)?;
    fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<(GraphSplits, DatasetMeta)> {
    let manifest = dir.join("manifest.csv");
    let text = fs::read_to_string(&manifest)
        .map_err(|e| Error::Config(format!("no dataset at {} ({e}); run `generate` first", dir.display())))?;
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("dataset.json"))?)?;
    let mut splits = GraphSplits { train: vec![], val: vec![], test: vec![] };
    for (i, line) in text.lines().enumerate().skip(1) {
        let (file, split) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected file,split in {manifest:?}") })?;
        let split = match split {
            "train" => Split::Train,
            "val" => Split::Val,
            "test" => Split::Test,
            other => return Err(Error::Parse { line: i + 1, message: format!("unknown split {other:?}") }),
        };
        let name = file.strip_suffix(".edges").unwrap_or(file).to_string();
        splits.get_mut(split).push((name, load_edge_list(dir.join(file))?));
    }
    Ok((splits, meta))
}

fn require_classes(meta: &DatasetMeta, classes: &[ProblemClass]) -> Result<()> {
    match classes.iter().find(|c| !meta.classes.contains(c)) {
        Some(c) => Err(Error::Config(format!("class {c} is not part of the dataset (declared: {:?})", meta.classes))),
        None => Ok(()),
    }
}

/// Encodes the dataset for `classes` and attaches validation and test optima.
pub fn prepare_classes(splits: &GraphSplits, classes: &[ProblemClass], cache: &mut OracleCache) -> Result<Vec<ClassData>> {
    classes
        .iter()
        .map(|&c| {
            let mut d = splits.class_data(c)?;
            d.solve_optima(cache)?;
            Ok(d)
        })
        .collect()
}

pub fn cmd_generate(cfg: &ExperimentConfig, force: bool) -> Result<GraphSplits> {
    cfg.validate()?;
    let splits = generate_splits(&cfg.dataset)?;
    let meta = DatasetMeta { classes: cfg.declared_classes(), spec: cfg.dataset.clone() };
    write_dataset(&cfg.paths().dataset(), &splits, &meta, force)?;
    log::info!("wrote {} graphs to {}", cfg.dataset.count, cfg.paths().dataset().display());
    Ok(splits)
}

/// Trains from scratch, or continues from `last.json` when `resume` is set.
/// Saves `last.json` after every epoch.
pub fn cmd_train(cfg: &ExperimentConfig, force: bool, resume: bool) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    let paths = cfg.paths();
    if !force && !resume && paths.checkpoint().exists() {
        return Err(Error::Config(format!(
            "{} exists; pass --force to overwrite or --resume to continue",
            paths.checkpoint().display()
        )));
    }
    let (splits, meta) = load_dataset(&paths.dataset())?;
    require_classes(&meta, &cfg.classes)?;
    let mut cache = OracleCache::open(paths.oracle_cache())?;
    let data = prepare_classes(&splits, &cfg.classes, &mut cache)?;
    cache.save()?;
    let mut trainer = if resume {
        Trainer::resume(&load_checkpoint(paths.last())?, &data, cfg.train)?
    } else {
        Trainer::new(init_model(&cfg.model)?, &data, cfg.train)?
    };
    while !trainer.is_finished() {
        trainer.run_epoch()?;
        save_checkpoint(&trainer.checkpoint(), paths.last())?;
    }
    let best = trainer.best();
    let history = trainer.history().clone();
    save_checkpoint(&Checkpoint::new(&best, None), paths.checkpoint())?;
    fs::write(paths.history_csv(), history.to_csv())?;
    fs::write(paths.history_json(), serde_json::to_string_pretty(&history)?)?;
    Ok((best, history))
}

/// Scores the oracle's own optima; AR is 1 everywhere by construction.
pub fn oracle_report(instances: &[Instance]) -> Result<MetricsReport> {
    let rows = instances
        .iter()
        .map(|i| InstanceMetrics::new(i, i.optimal_value()?, 0.0))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_instances(rows)
}

fn test_instances(cfg: &ExperimentConfig, classes: &[ProblemClass]) -> Result<Vec<Instance>> {
    let paths = cfg.paths();
    let (splits, meta) = load_dataset(&paths.dataset())?;
    require_classes(&meta, classes)?;
    let mut cache = OracleCache::open(paths.oracle_cache())?;
    let mut out = Vec::new();
    for &c in classes {
        for (name, g) in &splits.test {
            let mut inst = Instance::new(name.clone(), g.clone(), c)?;
            inst.solve_optimum(&mut cache)?;
            out.push(inst);
        }
    }
    cache.save()?;
    Ok(out)
}

/// Test-split report for the configured classes. With `oracle` set the
/// checkpoint is not read and the oracle's optima are scored instead.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>, oracle: bool) -> Result<MetricsReport> {
    cfg.validate()?;
    let paths = cfg.paths();
    let instances = test_instances(cfg, &cfg.classes)?;
    let (report, method) = if oracle {
        (oracle_report(&instances)?, "oracle")
    } else {
        let ckpt = load_checkpoint(checkpoint.map(Path::to_path_buf).unwrap_or_else(|| paths.checkpoint()))?;
        (evaluate(&ckpt.model()?, &instances)?, "model")
    };
    fs::write(paths.metrics_json(), serde_json::to_string_pretty(&report)?)?;
    fs::write(paths.table_csv(), report.table_csv(method))?;
    fs::write(paths.instances_csv(), report.instances_csv())?;
    Ok(report)
}

/// `step,ar[,reference]`; row 0 is zero-shot.
pub fn finetune_csv(trace: &[f64], reference: Option<f64>) -> String {
    let mut out = String::from(if reference.is_some() { "step,ar,reference\n" } else { "step,ar\n" });
    for (s, ar) in trace.iter().enumerate() {
        match reference {
            Some(r) => writeln!(out, "{s},{ar},{r}").unwrap(),
            None => writeln!(out, "{s},{ar}").unwrap(),
        }
    }
    out
}

pub fn cmd_finetune(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    class: Option<ProblemClass>,
    steps: Option<usize>,
    reference: Option<f64>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let paths = cfg.paths();
    let cls = class
        .or(cfg.eval.held_out)
        .ok_or_else(|| Error::Config("no held-out class: set eval.held_out or pass --class".into()))?;
    if cfg.classes.contains(&cls) {
        log::warn!("{cls} was seen during training; the trace is not a transfer result");
    }
    let steps = steps.unwrap_or(cfg.eval.finetune_steps);
    let reference = reference.or(cfg.eval.reference);
    let (splits, meta) = load_dataset(&paths.dataset())?;
    require_classes(&meta, &[cls])?;
    let mut cache = OracleCache::open(paths.oracle_cache())?;
    let d = prepare_classes(&splits, &[cls], &mut cache)?.remove(0);
    cache.save()?;
    let ckpt = load_checkpoint(checkpoint.map(Path::to_path_buf).unwrap_or_else(|| paths.checkpoint()))?;
    let (_, trace) = finetune(&ckpt.model()?, &d.train, &d.test, steps, &cfg.train)?;
    fs::write(paths.finetune_csv(), finetune_csv(&trace, reference))?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartRow {
    pub name: String,
    pub class: ProblemClass,
    pub n: usize,
    /// Objective of the decoded model output used as the warm start.
    pub decoded: f64,
    pub cold: f64,
    pub warm: f64,
    pub cold_proven: bool,
    pub warm_proven: bool,
    pub cold_seconds: f64,
    pub warm_seconds: f64,
}

impl WarmStartRow {
    pub fn warm_minus_cold(&self) -> f64 {
        self.warm - self.cold
    }
}

/// Solves each instance twice under `time_limit`: cold, and seeded with the
/// decoded model output.
pub fn warmstart_pairs(
    params: &ModelParams,
    instances: &[Instance],
    adapter: &dyn SolverAdapter,
    time_limit: f64,
) -> Result<Vec<WarmStartRow>> {
    instances
        .iter()
        .map(|inst| {
            let (sol, _) = solve_with_model(params, inst)?;
            let start = sol.assignment();
            let cold = adapter.solve(&inst.qp, time_limit, None)?;
            let warm = adapter.solve(&inst.qp, time_limit, Some(&start))?;
            Ok(WarmStartRow {
                name: inst.name.clone(),
                class: inst.class,
                n: inst.graph.num_nodes(),
                decoded: sol.objective,
                cold: cold.value_reported,
                warm: warm.value_reported,
                cold_proven: cold.proven_optimal,
                warm_proven: warm.proven_optimal,
                cold_seconds: cold.seconds,
                warm_seconds: warm.seconds,
            })
        })
        .collect()
}

pub fn warmstart_csv(rows: &[WarmStartRow]) -> String {
    let mut out = String::from(
        "name,class,n,decoded,cold,warm,warm_minus_cold,cold_proven,warm_proven,cold_seconds,warm_seconds\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.class,
            r.n,
            r.decoded,
            r.cold,
            r.warm,
            r.warm_minus_cold(),
            r.cold_proven,
            r.warm_proven,
            r.cold_seconds,
            r.warm_seconds
        )
        .unwrap();
    }
    out
}

/// Paired cold/warm solves on the test split, plus one MIP start file per
/// instance in the configured mode.
pub fn cmd_warmstart(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    class: Option<ProblemClass>,
    time_limit: Option<f64>,
) -> Result<Vec<WarmStartRow>> {
    cfg.validate()?;
    let time_limit = time_limit.unwrap_or(cfg.eval.time_limit);
    if !(time_limit > 0.0) {
        return Err(Error::Config("time limit must be positive".into()));
    }
    let paths = cfg.paths();
    let cls = class.unwrap_or(cfg.classes[0]);
    let ckpt = load_checkpoint(checkpoint.map(Path::to_path_buf).unwrap_or_else(|| paths.checkpoint()))?;
    let params = ckpt.model()?;
    let (splits, meta) = load_dataset(&paths.dataset())?;
    require_classes(&meta, &[cls])?;
    let instances =
        splits.test.iter().map(|(n, g)| Instance::new(n.clone(), g.clone(), cls)).collect::<Result<Vec<_>>>()?;
    let registry = SolverRegistry::default();
    let rows = warmstart_pairs(&params, &instances, registry.get(&cfg.eval.adapter), time_limit)?;
    let dir = paths.mip_starts();
    fs::create_dir_all(&dir)?;
    for inst in &instances {
        let x_r = forward(&params, &inst.hetero)?;
        let file = dir.join(format!("{}.mst", inst.name));
        match cfg.eval.mip_start {
            MipStartMode::Relaxed => export_mip_start(MipStart::Relaxed(x_r.values()), inst.qp.var_names(), file)?,
            MipStartMode::Decoded => {
                let a = decode(cls, &inst.graph, x_r.values())?.assignment();
                export_mip_start(MipStart::Decoded(&a), inst.qp.var_names(), file)?
            }
        }
    }
    fs::write(paths.warmstart_csv(), warmstart_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Parser)]
#[command(name = "hetqp", version, about = "Unsupervised GNN training for binary QPs on graphs")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the dataset, initialization and shuffling seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate graphs and the split manifest.
    Generate,
    /// Train and write the best checkpoint and history.
    Train {
        /// Continue from last.json.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate on the test split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Score the oracle's own solutions instead of a checkpoint.
        #[arg(long)]
        oracle: bool,
    },
    /// Fine-tune on a held-out class and trace test AR per step.
    Finetune {
        /// Defaults to the run's checkpoint.json.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to eval.held_out.
        #[arg(long)]
        class: Option<ProblemClass>,
        /// Defaults to eval.finetune_steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Reference AR copied into every CSV row.
        #[arg(long)]
        reference: Option<f64>,
    },
    /// Compare solver incumbents with and without the model's warm start.
    Warmstart {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to the first configured class.
        #[arg(long)]
        class: Option<ProblemClass>,
        /// Seconds per solve; defaults to eval.time_limit.
        #[arg(long)]
        time_limit: Option<f64>,
    },
}

impl Cli {
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let path = self.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg = cfg.with_seed(s);
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.experiment()?;
    match &cli.command {
        Command::Generate => {
            cmd_generate(&cfg, cli.force)?;
        }
        Command::Train { resume } => {
            let (_, h) = cmd_train(&cfg, cli.force, *resume)?;
            println!("best epoch {:?}, validation gap {:?}", h.best_epoch, h.best_ag);
        }
        Command::Eval { checkpoint, oracle } => {
            let r = cmd_eval(&cfg, checkpoint.as_deref(), *oracle)?;
            print!("{}", r.table_csv(if *oracle { "oracle" } else { "model" }));
        }
        Command::Finetune { checkpoint, class, steps, reference } => {
            let trace = cmd_finetune(&cfg, checkpoint.as_deref(), *class, *steps, *reference)?;
            print!("{}", finetune_csv(&trace, None));
        }
        Command::Warmstart { checkpoint, class, time_limit } => {
            let rows = cmd_warmstart(&cfg, checkpoint.as_deref(), *class, *time_limit)?;
            let n = rows.len() as f64;
            let mean = |f: fn(&WarmStartRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            println!("mean cold {:.4}, mean warm {:.4}", mean(|r| r.cold), mean(|r| r.warm));
        }
    }
    Ok(())
}
