//! Pipeline driver behind the `reconf` binary.
//!
//! Every subcommand is a plain function returning a serializable report, so
//! integration tests can run the pipeline in-process; `main` only parses
//! arguments, dispatches, prints the report as JSON, and maps errors to
//! exit codes:
//!
//! * `0` — success
//! * `1` — usage or input problems (bad flags, missing files, hash mismatch)
//! * `2` — the physics said no: infeasible or unrealizable
//! * `3` — internal failures

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use reconf_core::datagen::{
    self, DatagenError, DatasetManifest, LabeledScenario, SamplingConfig, SplitSizes,
};
use reconf_core::exec::Jobs;
use reconf_core::netcase::{
    load_blocks, parse_case, BlockAssignment, CaseError, LoadBlockPartition, NetworkCase,
    Scenario,
};
use reconf_core::neural::{
    self, assignment_from_probs, bce_loss, Dataset, Mlp, ModelBundle, ModelError, Normalizer,
    TrainConfig,
};
use reconf_core::reconfig::{
    default_ladder, is_realizable, relax_and_solve, repair_assignment, solve_exact,
    ReconfigError, ReconfigResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    /// Caller gave us something wrong: flags, files, mismatched artifacts.
    Usage(String),
    /// The network genuinely cannot serve the request.
    Infeasible(String),
    /// A solver invariant broke; not the caller's fault.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Infeasible(m) | CliError::Internal(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<ReconfigError> for CliError {
    fn from(e: ReconfigError) -> Self {
        match e {
            ReconfigError::NoFeasibleTopology => {
                CliError::Infeasible("no radial configuration satisfies the limits".to_string())
            }
            ReconfigError::Unrealizable(why) => {
                CliError::Infeasible(format!("assignment is unrealizable: {why}"))
            }
            ReconfigError::BadInput(why) => CliError::Usage(why),
            ReconfigError::Case(e) => CliError::Usage(e.to_string()),
            ReconfigError::Lp(e) => CliError::Internal(format!("lp solve failed: {e}")),
        }
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::TooManyInfeasible { .. } => CliError::Infeasible(e.to_string()),
            DatagenError::Solve(inner) => inner.into(),
            DatagenError::TooFewScenarios(_)
            | DatagenError::BadLayout(_)
            | DatagenError::Manifest(_) => CliError::Usage(e.to_string()),
            DatagenError::Io(e) => CliError::Usage(e.to_string()),
            DatagenError::Csv(e) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "reconf",
    version,
    about = "Feeder reconfiguration: exact optimization, learned warm starts, and the data pipeline between them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample scenarios, solve each exactly, and write a labeled dataset.
    Generate(GenerateArgs),
    /// Fit the block-assignment predictor on a generated dataset.
    Train(TrainArgs),
    /// Predict (and if needed repair) an assignment for one scenario.
    Predict(PredictArgs),
    /// Score a trained model on one split of a dataset.
    Evaluate(EvaluateArgs),
    /// Optimize one scenario: exact search or model-guided restricted solve.
    Solve(SolveArgs),
    /// Run exact and model-guided solves side by side on fresh scenarios.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    /// Load multiplier sigma (truncated normal around 1).
    #[arg(long, default_value_t = 0.10)]
    pub load_sigma: f64,
    /// Load multiplier lower clip.
    #[arg(long, default_value_t = 0.8)]
    pub load_lo: f64,
    /// Load multiplier upper clip.
    #[arg(long, default_value_t = 1.2)]
    pub load_hi: f64,
    /// Pv availability mean (truncated normal on [0, 1]).
    #[arg(long, default_value_t = 0.5)]
    pub pv_mean: f64,
    /// Pv availability sigma.
    #[arg(long, default_value_t = 0.25)]
    pub pv_sigma: f64,
}

impl SamplingArgs {
    pub fn to_config(&self) -> SamplingConfig {
        SamplingConfig {
            load_sigma: self.load_sigma,
            load_lo: self.load_lo,
            load_hi: self.load_hi,
            pv_mean: self.pv_mean,
            pv_sigma: self.pv_sigma,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Network case file.
    #[arg(long)]
    pub case: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Output manifest path (defaults to <out>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of scenarios to sample.
    #[arg(long, short = 'n')]
    pub count: usize,
    /// Base seed; scenario i uses stream i of this seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (1 = sequential).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Network case file the dataset was generated from.
    #[arg(long)]
    pub case: PathBuf,
    /// Dataset CSV from `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Dataset manifest from `generate` (defaults to <data>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Where to write the trained model.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional JSON training-history report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64, 64, 64])]
    pub hidden: Vec<usize>,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    /// L2 penalty coefficient.
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    /// Hidden-layer dropout rate.
    #[arg(long, default_value_t = 0.25)]
    pub dropout: f64,
    /// Minibatch size.
    #[arg(long, default_value_t = 125)]
    pub batch_size: usize,
    /// Epoch cap.
    #[arg(long, default_value_t = 250)]
    pub max_epochs: usize,
    /// Early-stopping patience on validation loss.
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Initialization / shuffling / dropout seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Noisy copies appended per training sample.
    #[arg(long, default_value_t = 1)]
    pub augment_copies: usize,
    /// Augmentation noise sigma, in normalized units.
    #[arg(long, default_value_t = 0.03)]
    pub augment_sigma: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Scenario JSON ({"load_scale": [...], "pv_scale": [...]}).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Draw the scenario from the sampling distribution with this seed...
    #[arg(long)]
    pub draw_seed: Option<u64>,
    /// ...and this stream index.
    #[arg(long, default_value_t = 0)]
    pub draw_index: usize,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Network case file.
    #[arg(long)]
    pub case: PathBuf,
    /// Trained model from `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Network case file.
    #[arg(long)]
    pub case: PathBuf,
    /// Trained model from `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV from `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Dataset manifest (defaults to <data>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Which split to score.
    #[arg(long, default_value = "test")]
    pub split: SplitChoice,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Branch-and-bound over every radial configuration, native limits.
    Exact,
    /// Fix the assignment (from a model or a file), escalate the voltage
    /// relaxation ladder until a rung is feasible.
    Restricted,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Network case file.
    #[arg(long)]
    pub case: PathBuf,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Solve strategy.
    #[arg(long, value_enum, default_value_t = SolveMode::Exact)]
    pub mode: SolveMode,
    /// Trained model (restricted mode).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Explicit block labels JSON array (restricted mode, instead of a model).
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    /// Omit wall-clock timing from the report (for byte-stable output).
    #[arg(long)]
    pub no_timing: bool,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Network case file.
    #[arg(long)]
    pub case: PathBuf,
    /// Trained model from `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of fresh scenarios to race.
    #[arg(long, short = 'n', default_value_t = 100)]
    pub count: usize,
    /// Base seed for the fresh scenarios.
    #[arg(long, default_value_t = 777)]
    pub seed: u64,
    /// Worker threads (1 = sequential; keep 1 for clean timings).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Shared loading helpers
// ---------------------------------------------------------------------------

pub struct CaseContext {
    pub case: NetworkCase,
    pub partition: LoadBlockPartition,
    pub sha256: String,
}

pub fn load_case(path: &Path) -> Result<CaseContext, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read case {}: {e}", path.display())))?;
    let sha256 = datagen::sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Usage("case file is not utf-8".to_string()))?;
    let case = parse_case(&text)?;
    let partition = load_blocks(&case, None)?;
    Ok(CaseContext { case, partition, sha256 })
}

fn manifest_path(data: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut os = data.as_os_str().to_owned();
        os.push(".manifest.json");
        PathBuf::from(os)
    })
}

fn load_model_for(ctx: &CaseContext, path: &Path) -> Result<ModelBundle, CliError> {
    let bundle = ModelBundle::load(path)?;
    if bundle.case_sha256 != ctx.sha256 {
        return Err(CliError::Usage(format!(
            "model was trained on case {} but this case hashes to {}",
            bundle.case_sha256, ctx.sha256
        )));
    }
    if bundle.feature_names != Scenario::feature_names(&ctx.case) {
        return Err(CliError::Usage(
            "model feature columns do not match the case".to_string(),
        ));
    }
    Ok(bundle)
}

#[derive(Deserialize)]
struct ScenarioFile {
    load_scale: Vec<f64>,
    pv_scale: Vec<f64>,
}

pub fn resolve_scenario(
    ctx: &CaseContext,
    args: &ScenarioArgs,
    sampling: &SamplingConfig,
) -> Result<Scenario, CliError> {
    if args.scenario.is_some() && args.draw_seed.is_some() {
        return Err(CliError::Usage(
            "--scenario and --draw-seed are mutually exclusive".to_string(),
        ));
    }
    if let Some(path) = &args.scenario {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read scenario: {e}")))?;
        let raw: ScenarioFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad scenario json: {e}")))?;
        if raw.load_scale.len() != ctx.case.loads.len()
            || raw.pv_scale.len() != ctx.case.pv_generators().len()
        {
            return Err(CliError::Usage(format!(
                "scenario has {} load and {} pv entries; case needs {} and {}",
                raw.load_scale.len(),
                raw.pv_scale.len(),
                ctx.case.loads.len(),
                ctx.case.pv_generators().len()
            )));
        }
        return Ok(Scenario { load_scale: raw.load_scale, pv_scale: raw.pv_scale });
    }
    if let Some(seed) = args.draw_seed {
        return Ok(datagen::sample_scenario(&ctx.case, sampling, seed, args.draw_index));
    }
    Ok(Scenario::nominal(&ctx.case))
}

fn write_report<T: Serialize>(report: &T, out: &Option<PathBuf>) -> Result<String, CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(text)
}

fn median(sorted: &mut [f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Serialize, Debug)]
pub struct GenerateReport {
    pub case_sha256: String,
    pub requested: usize,
    pub kept: usize,
    pub dropped: usize,
    pub split: SplitSizes,
    pub data: PathBuf,
    pub manifest: PathBuf,
}

pub fn run_generate(args: &GenerateArgs) -> Result<GenerateReport, CliError> {
    let ctx = load_case(&args.case)?;
    let sampling = args.sampling.to_config();
    let set = datagen::generate_labeled(
        &ctx.case,
        &ctx.partition,
        args.count,
        args.seed,
        &sampling,
        Jobs::from_count(args.jobs),
    )?;
    let split = datagen::split_sizes(set.examples.len())?;
    datagen::write_examples_csv(&args.out, &ctx.case, &set.examples)?;
    let manifest = DatasetManifest {
        case_sha256: ctx.sha256.clone(),
        seed: args.seed,
        requested: args.count,
        kept: set.examples.len(),
        dropped: set.dropped.clone(),
        sampling,
        split,
        feature_names: Scenario::feature_names(&ctx.case),
        group_count: ctx.partition.label_groups.len(),
    };
    let manifest_out = manifest_path(&args.out, &args.manifest);
    manifest.save(&manifest_out)?;
    Ok(GenerateReport {
        case_sha256: ctx.sha256,
        requested: args.count,
        kept: set.examples.len(),
        dropped: set.dropped.len(),
        split,
        data: args.out.clone(),
        manifest: manifest_out,
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Serialize, Debug)]
pub struct SplitScore {
    pub n: usize,
    pub bce: f64,
    /// Fraction of (sample, group) cells predicted correctly, per group.
    pub per_group_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Fraction of samples with every group correct.
    pub exact_match_rate: f64,
}

#[derive(Serialize, Debug)]
pub struct TrainReportOut {
    pub case_sha256: String,
    pub model: PathBuf,
    pub layer_sizes: Vec<usize>,
    pub train_rows: usize,
    pub augmented_rows: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_bce: f64,
    pub val: SplitScore,
    pub test: SplitScore,
}

pub fn score_split(net: &Mlp, data: &Dataset) -> SplitScore {
    let n = data.len();
    let g = data.y.ncols();
    let probs = net.forward(&data.x);
    let mut per_group = vec![0usize; g];
    let mut exact = 0usize;
    for i in 0..n {
        let mut all = true;
        for j in 0..g {
            let ok = (probs[[i, j]] > 0.5) == (data.y[[i, j]] > 0.5);
            if ok {
                per_group[j] += 1;
            } else {
                all = false;
            }
        }
        if all {
            exact += 1;
        }
    }
    let denom = n.max(1) as f64;
    let per_group_accuracy: Vec<f64> =
        per_group.iter().map(|c| *c as f64 / denom).collect();
    let mean_accuracy = per_group_accuracy.iter().sum::<f64>() / g.max(1) as f64;
    SplitScore {
        n,
        bce: bce_loss(&probs, &data.y),
        per_group_accuracy,
        mean_accuracy,
        exact_match_rate: exact as f64 / denom,
    }
}

pub fn run_train(args: &TrainArgs) -> Result<TrainReportOut, CliError> {
    let ctx = load_case(&args.case)?;
    let manifest = DatasetManifest::load(&manifest_path(&args.data, &args.manifest))?;
    if manifest.case_sha256 != ctx.sha256 {
        return Err(CliError::Usage(format!(
            "dataset was generated from case {} but this case hashes to {}",
            manifest.case_sha256, ctx.sha256
        )));
    }
    let examples = datagen::read_examples_csv(&args.data, &ctx.case)?;
    if examples.len() != manifest.kept {
        return Err(CliError::Usage(format!(
            "dataset has {} rows but its manifest says {}",
            examples.len(),
            manifest.kept
        )));
    }
    let sizes = manifest.split;
    if sizes.train + sizes.val + sizes.test != examples.len() {
        return Err(CliError::Usage("manifest split does not cover the dataset".to_string()));
    }
    let g = ctx.partition.label_groups.len();
    if examples.first().map_or(0, |e| e.targets.len()) != g {
        return Err(CliError::Usage(format!(
            "dataset has {} label columns but the case partitions into {} groups",
            examples.first().map_or(0, |e| e.targets.len()),
            g
        )));
    }

    let (train_ex, val_ex, test_ex) = datagen::split_examples(&examples, &sizes);
    let raw_train = datagen::to_dataset(train_ex);
    let raw_val = datagen::to_dataset(val_ex);
    let raw_test = datagen::to_dataset(test_ex);

    // Normalization statistics come from the training split alone.
    let normalizer = Normalizer::fit(&raw_train.x);
    let train_norm = Dataset { x: normalizer.apply(&raw_train.x), y: raw_train.y.clone() };
    let val_norm = Dataset { x: normalizer.apply(&raw_val.x), y: raw_val.y.clone() };
    let test_norm = Dataset { x: normalizer.apply(&raw_test.x), y: raw_test.y.clone() };

    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        l2: args.l2,
        dropout: args.dropout,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        patience: args.patience,
        seed: args.seed,
        augment_copies: args.augment_copies,
        augment_sigma: args.augment_sigma,
        ..TrainConfig::default()
    };
    let augmented =
        neural::augment(&train_norm, cfg.augment_copies, cfg.augment_sigma, cfg.seed ^ 0x5eed);

    let d = ctx.case.loads.len() + ctx.case.pv_generators().len();
    let mut layer_sizes = vec![d];
    layer_sizes.extend_from_slice(&args.hidden);
    layer_sizes.push(g);
    let mut net = Mlp::new(&layer_sizes, cfg.seed);
    let history = neural::train(&mut net, &augmented, &val_norm, &cfg);

    let bundle = ModelBundle {
        net,
        normalizer,
        case_sha256: ctx.sha256.clone(),
        feature_names: Scenario::feature_names(&ctx.case),
        group_names: (0..g).map(|k| format!("g{k}")).collect(),
    };
    bundle.save(&args.model)?;
    if let Some(report_path) = &args.report {
        let text = serde_json::to_string_pretty(&history)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(report_path, format!("{text}\n"))?;
    }

    Ok(TrainReportOut {
        case_sha256: ctx.sha256,
        model: args.model.clone(),
        layer_sizes,
        train_rows: train_ex.len(),
        augmented_rows: augmented.len(),
        epochs_run: history.epochs_run,
        best_epoch: history.best_epoch,
        best_val_bce: history.best_val_bce,
        val: score_split(&bundle.net, &val_norm),
        test: score_split(&bundle.net, &test_norm),
    })
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Serialize, Debug)]
pub struct PredictReport {
    pub case_sha256: String,
    /// Sigmoid output per label group.
    pub group_probs: Vec<f64>,
    /// Thresholded group labels (substation index per group).
    pub group_labels: Vec<usize>,
    /// Raw thresholded assignment, one substation index per block.
    pub predicted_blocks: Vec<usize>,
    /// Whether that raw assignment is directly realizable.
    pub realizable: bool,
    /// Final assignment after repair (equals `predicted_blocks` when
    /// `realizable` is true).
    pub repaired_blocks: Vec<usize>,
    /// Label groups whose label changed during repair.
    pub repaired_groups: Vec<usize>,
}

fn predict_assignment(
    ctx: &CaseContext,
    bundle: &ModelBundle,
    scenario: &Scenario,
) -> Result<(PredictReport, BlockAssignment), CliError> {
    let features = scenario.features(&ctx.case);
    let x = ndarray::Array2::from_shape_vec((1, features.len()), features)
        .expect("row shape");
    let probs: Vec<f64> = bundle.predict(&x).row(0).to_vec();
    let predicted = assignment_from_probs(&ctx.partition, &probs);
    let realizable = is_realizable(&ctx.case, &ctx.partition, &predicted);
    let repaired = if realizable {
        predicted.clone()
    } else {
        repair_assignment(&ctx.case, &ctx.partition, &predicted)?
    };
    let group_labels: Vec<usize> = ctx
        .partition
        .label_groups
        .iter()
        .map(|grp| predicted.labels[grp[0]])
        .collect();
    let repaired_groups: Vec<usize> = ctx
        .partition
        .label_groups
        .iter()
        .enumerate()
        .filter(|(_, grp)| repaired.labels[grp[0]] != predicted.labels[grp[0]])
        .map(|(k, _)| k)
        .collect();
    let report = PredictReport {
        case_sha256: ctx.sha256.clone(),
        group_probs: probs,
        group_labels,
        predicted_blocks: predicted.labels.clone(),
        realizable,
        repaired_blocks: repaired.labels.clone(),
        repaired_groups,
    };
    Ok((report, repaired))
}

pub fn run_predict(args: &PredictArgs) -> Result<PredictReport, CliError> {
    let ctx = load_case(&args.case)?;
    let bundle = load_model_for(&ctx, &args.model)?;
    let scenario = resolve_scenario(&ctx, &args.scenario, &SamplingConfig::default())?;
    let (report, _) = predict_assignment(&ctx, &bundle, &scenario)?;
    write_report(&report, &args.out)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Serialize, Debug)]
pub struct EvaluateReport {
    pub case_sha256: String,
    pub split: SplitChoice,
    pub score: SplitScore,
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<EvaluateReport, CliError> {
    let ctx = load_case(&args.case)?;
    let bundle = load_model_for(&ctx, &args.model)?;
    let manifest = DatasetManifest::load(&manifest_path(&args.data, &args.manifest))?;
    if manifest.case_sha256 != ctx.sha256 {
        return Err(CliError::Usage(
            "dataset and case file do not match (hash mismatch)".to_string(),
        ));
    }
    let examples = datagen::read_examples_csv(&args.data, &ctx.case)?;
    let sizes = manifest.split;
    if sizes.train + sizes.val + sizes.test != examples.len() {
        return Err(CliError::Usage("manifest split does not cover the dataset".to_string()));
    }
    let (train_ex, val_ex, test_ex) = datagen::split_examples(&examples, &sizes);
    let chosen: &[LabeledScenario] = match args.split {
        SplitChoice::Train => train_ex,
        SplitChoice::Val => val_ex,
        SplitChoice::Test => test_ex,
        SplitChoice::All => &examples,
    };
    let raw = datagen::to_dataset(chosen);
    let normed = Dataset { x: bundle.normalizer.apply(&raw.x), y: raw.y.clone() };
    let report = EvaluateReport {
        case_sha256: ctx.sha256,
        split: args.split,
        score: score_split(&bundle.net, &normed),
    };
    write_report(&report, &args.out)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Serialize, Debug)]
pub struct SolveReport {
    pub case_sha256: String,
    pub mode: SolveMode,
    /// Closed/open switch states in case order, as a 1/0 string.
    pub config: String,
    /// Line ids of the open switches.
    pub open_lines: Vec<String>,
    pub objective: f64,
    /// Substation index per block.
    pub assignment: Vec<usize>,
    /// Which relaxation rung succeeded (restricted mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rung: Option<usize>,
    /// Prediction details (restricted mode with a model).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictReport>,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    pub search_nodes: usize,
    pub lp_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

fn config_string(result: &ReconfigResult) -> String {
    result
        .config
        .closed
        .iter()
        .map(|c| if *c { '1' } else { '0' })
        .collect()
}

fn open_line_ids(ctx: &CaseContext, result: &ReconfigResult) -> Vec<String> {
    ctx.case
        .switchable_lines()
        .iter()
        .zip(&result.config.closed)
        .filter(|(_, closed)| !**closed)
        .map(|(li, _)| ctx.case.lines[*li].id.clone())
        .collect()
}

pub fn run_solve(args: &SolveArgs) -> Result<SolveReport, CliError> {
    let ctx = load_case(&args.case)?;
    let scenario = resolve_scenario(&ctx, &args.scenario, &SamplingConfig::default())?;
    let started = Instant::now();
    let (result, rung, prediction, lp_count) = match args.mode {
        SolveMode::Exact => {
            if args.model.is_some() || args.assignment.is_some() {
                return Err(CliError::Usage(
                    "exact mode takes no --model or --assignment".to_string(),
                ));
            }
            let result = solve_exact(&ctx.case, &ctx.partition, &scenario, None, &[])?;
            let lps = result.stats.lp_count();
            (result, None, None, lps)
        }
        SolveMode::Restricted => {
            let (assignment, prediction) = match (&args.model, &args.assignment) {
                (Some(model_path), None) => {
                    let bundle = load_model_for(&ctx, model_path)?;
                    let (report, repaired) = predict_assignment(&ctx, &bundle, &scenario)?;
                    (repaired, Some(report))
                }
                (None, Some(assignment_path)) => {
                    let text = std::fs::read_to_string(assignment_path)
                        .map_err(|e| CliError::Usage(format!("cannot read assignment: {e}")))?;
                    let labels: Vec<usize> = serde_json::from_str(&text)
                        .map_err(|e| CliError::Usage(format!("bad assignment json: {e}")))?;
                    (BlockAssignment { labels }, None)
                }
                _ => {
                    return Err(CliError::Usage(
                        "restricted mode needs exactly one of --model or --assignment"
                            .to_string(),
                    ));
                }
            };
            let ladder = default_ladder();
            let solved =
                relax_and_solve(&ctx.case, &ctx.partition, &scenario, &assignment, &ladder)?;
            (solved.result, Some(solved.rung), prediction, solved.lp_count)
        }
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let report = SolveReport {
        case_sha256: ctx.sha256.clone(),
        mode: args.mode,
        config: config_string(&result),
        open_lines: open_line_ids(&ctx, &result),
        objective: result.objective,
        assignment: result.assignment.labels.clone(),
        rung,
        prediction,
        v_min_pu: result.dispatch.v_min_pu,
        v_max_pu: result.dispatch.v_max_pu,
        search_nodes: result.stats.nodes,
        lp_count,
        wall_ms: if args.no_timing { None } else { Some(wall_ms) },
    };
    write_report(&report, &args.out)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

/// One scenario raced through both engines.
#[derive(Serialize, Debug, Clone)]
pub struct PairedRun {
    pub index: usize,
    pub exact_objective: f64,
    pub exact_ms: f64,
    pub exact_lps: usize,
    /// None when no ladder rung was feasible for the predicted assignment.
    pub restricted_objective: Option<f64>,
    pub restricted_ms: f64,
    pub restricted_lps: usize,
    pub rung: Option<usize>,
    pub repaired: bool,
    /// (restricted - exact) / |exact|, when both solved.
    pub relative_gap: Option<f64>,
}

#[derive(Serialize, Debug)]
pub struct CompareReport {
    pub case_sha256: String,
    pub requested: usize,
    /// Scenarios where the exact solver itself had no feasible topology.
    pub exact_infeasible: usize,
    pub paired: usize,
    /// Of the paired runs, how many the restricted path solved at any rung.
    pub restricted_feasible: usize,
    pub restricted_feasible_rate: f64,
    /// Cumulative feasibility by final-rung index (monotone by construction).
    pub feasible_by_rung: Vec<usize>,
    pub repair_rate: f64,
    pub gap_median: f64,
    pub gap_mean: f64,
    pub gap_max: f64,
    pub exact_ms_median: f64,
    pub restricted_ms_median: f64,
    pub speedup_median: f64,
    pub exact_lps_mean: f64,
    pub restricted_lps_mean: f64,
    pub runs: Vec<PairedRun>,
}

/// Race one scenario through both engines: exact search at native limits,
/// then predict + repair + ladder. `None` means the exact solver itself had
/// no feasible topology, so there is nothing to pair.
pub fn race_scenario(
    ctx: &CaseContext,
    bundle: &ModelBundle,
    ladder: &[reconf_core::lpf::VoltageWindow],
    index: usize,
    scenario: &Scenario,
) -> Result<Option<PairedRun>, CliError> {
    let exact_started = Instant::now();
    let exact = match solve_exact(&ctx.case, &ctx.partition, scenario, None, &[]) {
        Ok(r) => r,
        Err(ReconfigError::NoFeasibleTopology) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let exact_ms = exact_started.elapsed().as_secs_f64() * 1e3;

    let restricted_started = Instant::now();
    let (report, repaired) = predict_assignment(ctx, bundle, scenario)?;
    let solved = match relax_and_solve(&ctx.case, &ctx.partition, scenario, &repaired, ladder) {
        Ok(s) => Some(s),
        Err(ReconfigError::NoFeasibleTopology) => None,
        Err(e) => return Err(e.into()),
    };
    let restricted_ms = restricted_started.elapsed().as_secs_f64() * 1e3;

    let (restricted_objective, rung, restricted_lps) = match &solved {
        Some(s) => (Some(s.result.objective), Some(s.rung), s.lp_count),
        None => (None, None, ladder.len()),
    };
    let relative_gap = restricted_objective
        .map(|r| (r - exact.objective) / exact.objective.abs().max(1e-9));
    Ok(Some(PairedRun {
        index,
        exact_objective: exact.objective,
        exact_ms,
        exact_lps: exact.stats.lp_count(),
        restricted_objective,
        restricted_ms,
        restricted_lps,
        rung,
        repaired: !report.realizable,
        relative_gap,
    }))
}

/// Aggregate paired runs into the comparison report.
pub fn summarize_runs(
    case_sha256: String,
    requested: usize,
    exact_infeasible: usize,
    ladder_len: usize,
    runs: Vec<PairedRun>,
) -> Result<CompareReport, CliError> {
    let paired = runs.len();
    if paired == 0 {
        return Err(CliError::Infeasible(
            "every sampled scenario was infeasible for the exact solver".to_string(),
        ));
    }

    let feasible: Vec<&PairedRun> =
        runs.iter().filter(|r| r.restricted_objective.is_some()).collect();
    let mut feasible_by_rung = vec![0usize; ladder_len];
    for r in &feasible {
        feasible_by_rung[r.rung.unwrap()] += 1;
    }
    // Make the per-rung counts cumulative: "solved at rung <= k".
    for k in 1..feasible_by_rung.len() {
        feasible_by_rung[k] += feasible_by_rung[k - 1];
    }
    let mut gaps: Vec<f64> = feasible.iter().filter_map(|r| r.relative_gap).collect();
    let gap_mean = if gaps.is_empty() {
        f64::NAN
    } else {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    let gap_max = gaps.iter().copied().fold(f64::NAN, f64::max);
    let mut exact_ms: Vec<f64> = runs.iter().map(|r| r.exact_ms).collect();
    let mut restricted_ms: Vec<f64> = runs.iter().map(|r| r.restricted_ms).collect();
    let exact_ms_median = median(&mut exact_ms);
    let restricted_ms_median = median(&mut restricted_ms);

    Ok(CompareReport {
        case_sha256,
        requested,
        exact_infeasible,
        paired,
        restricted_feasible: feasible.len(),
        restricted_feasible_rate: feasible.len() as f64 / paired as f64,
        feasible_by_rung,
        repair_rate: runs.iter().filter(|r| r.repaired).count() as f64 / paired as f64,
        gap_median: median(&mut gaps),
        gap_mean,
        gap_max,
        exact_ms_median,
        restricted_ms_median,
        speedup_median: exact_ms_median / restricted_ms_median.max(1e-9),
        exact_lps_mean: runs.iter().map(|r| r.exact_lps as f64).sum::<f64>() / paired as f64,
        restricted_lps_mean: runs.iter().map(|r| r.restricted_lps as f64).sum::<f64>()
            / paired as f64,
        runs,
    })
}

pub fn run_compare(args: &CompareArgs) -> Result<CompareReport, CliError> {
    let ctx = load_case(&args.case)?;
    let bundle = load_model_for(&ctx, &args.model)?;
    let sampling = args.sampling.to_config();
    let ladder = default_ladder();

    let outcomes: Vec<Result<Option<PairedRun>, CliError>> =
        reconf_core::exec::map_indexed(Jobs::from_count(args.jobs), args.count, |i| {
            let scenario = datagen::sample_scenario(&ctx.case, &sampling, args.seed, i);
            race_scenario(&ctx, &bundle, &ladder, i, &scenario)
        });
    let mut runs = Vec::new();
    let mut exact_infeasible = 0usize;
    for outcome in outcomes {
        match outcome? {
            Some(run) => runs.push(run),
            None => exact_infeasible += 1,
        }
    }
    let report = summarize_runs(ctx.sha256, args.count, exact_infeasible, ladder.len(), runs)?;
    write_report(&report, &args.out)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run one parsed command, printing its report to stdout.
pub fn dispatch(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Generate(args) => write_report(&run_generate(args)?, &None),
        Command::Train(args) => write_report(&run_train(args)?, &None),
        Command::Predict(args) => write_report(&run_predict(args)?, &None),
        Command::Evaluate(args) => write_report(&run_evaluate(args)?, &None),
        Command::Solve(args) => write_report(&run_solve(args)?, &None),
        Command::Compare(args) => write_report(&run_compare(args)?, &None),
    }
}

/// Full CLI entry: parse, run, print, and map everything to an exit code.
pub fn run_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and --version are successes; real parse errors are usage
            // errors (exit 1, not clap's default 2).
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(text) => {
            // A closed pipe downstream (e.g. `reconf ... | head`) is not an
            // error worth panicking over.
            use std::io::Write;
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
