//! Labeled scenario generation: draw randomized load/pv operating points,
//! solve each one exactly, and keep the optimal substation assignment as the
//! training target.
//!
//! Every scenario gets its own counter-mode RNG stream, so the i-th scenario
//! is the same no matter how many threads run the batch or in what order
//! items finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exec::{self, Jobs};
use crate::netcase::{LoadBlockPartition, NetworkCase, Scenario};
use crate::neural::{group_targets, Dataset};
use crate::reconfig::{solve_exact, ReconfigError};

#[derive(Error, Debug)]
pub enum DatagenError {
    #[error("{dropped} of {requested} sampled scenarios were infeasible; refusing to build a dataset from the remainder")]
    TooManyInfeasible { dropped: usize, requested: usize },
    #[error("need at least 3 kept scenarios to split, got {0}")]
    TooFewScenarios(usize),
    #[error("csv column layout does not match the case: {0}")]
    BadLayout(String),
    #[error(transparent)]
    Solve(#[from] ReconfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("manifest is corrupt: {0}")]
    Manifest(String),
}

/// Distribution knobs for scenario sampling.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Loads scale by a truncated normal around 1.0 with this sigma...
    pub load_sigma: f64,
    /// ...clipped to `[load_lo, load_hi]`; P and Q share the multiplier.
    pub load_lo: f64,
    pub load_hi: f64,
    /// Pv availability is a truncated normal on `[0, 1]`.
    pub pv_mean: f64,
    pub pv_sigma: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            load_sigma: 0.10,
            load_lo: 0.8,
            load_hi: 1.2,
            pv_mean: 0.5,
            pv_sigma: 0.25,
        }
    }
}

/// One solved scenario ready for training or evaluation.
#[derive(Clone, Debug)]
pub struct LabeledScenario {
    /// The RNG stream index it was drawn from.
    pub index: usize,
    pub scenario: Scenario,
    /// Aggregate per-load / per-pv injections, in case order.
    pub features: Vec<f64>,
    /// One 0/1 entry per label group: the optimal feeding substation.
    pub targets: Vec<f64>,
    /// Exact optimal objective, kept for diagnostics.
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct GeneratedSet {
    pub examples: Vec<LabeledScenario>,
    /// Stream indices whose scenario had no feasible radial topology.
    pub dropped: Vec<usize>,
}

/// Draw one value from a normal, rejected until it lands in `[lo, hi]`.
fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let normal = Normal::new(mean, sigma).expect("finite parameters");
    for _ in 0..10_000 {
        let v = normal.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    // Pathological parameters (mass far outside the window): fall back to
    // the nearest bound instead of spinning forever.
    mean.clamp(lo, hi)
}

/// The deterministic scenario for stream `index` under `seed`.
pub fn sample_scenario(
    case: &NetworkCase,
    sampling: &SamplingConfig,
    seed: u64,
    index: usize,
) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let load_scale = (0..case.loads.len())
        .map(|_| {
            truncated_normal(
                &mut rng,
                1.0,
                sampling.load_sigma,
                sampling.load_lo,
                sampling.load_hi,
            )
        })
        .collect();
    let pv_scale = (0..case.pv_generators().len())
        .map(|_| truncated_normal(&mut rng, sampling.pv_mean, sampling.pv_sigma, 0.0, 1.0))
        .collect();
    Scenario { load_scale, pv_scale }
}

/// Sample `n` scenarios, solve each exactly at the native voltage limits,
/// and label it with the optimal assignment. Scenarios with no feasible
/// radial topology are dropped; more than half dropping is an error.
pub fn generate_labeled(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    n: usize,
    seed: u64,
    sampling: &SamplingConfig,
    jobs: Jobs,
) -> Result<GeneratedSet, DatagenError> {
    let solved: Vec<Result<Option<LabeledScenario>, ReconfigError>> =
        exec::map_indexed(jobs, n, |i| {
            let scenario = sample_scenario(case, sampling, seed, i);
            match solve_exact(case, partition, &scenario, None, &[]) {
                Ok(result) => Ok(Some(LabeledScenario {
                    index: i,
                    features: scenario.features(case),
                    scenario,
                    targets: group_targets(partition, &result.assignment),
                    objective: result.objective,
                })),
                Err(ReconfigError::NoFeasibleTopology) => Ok(None),
                Err(e) => Err(e),
            }
        });

    let mut examples = Vec::with_capacity(n);
    let mut dropped = Vec::new();
    for (i, item) in solved.into_iter().enumerate() {
        match item? {
            Some(ex) => examples.push(ex),
            None => dropped.push(i),
        }
    }
    if dropped.len() * 2 > n {
        return Err(DatagenError::TooManyInfeasible { dropped: dropped.len(), requested: n });
    }
    Ok(GeneratedSet { examples, dropped })
}

/// Contiguous train/validation/test sizes: 5% each for the two holdout
/// sets (at least one sample), the rest for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

pub fn split_sizes(n: usize) -> Result<SplitSizes, DatagenError> {
    if n < 3 {
        return Err(DatagenError::TooFewScenarios(n));
    }
    let val = (n / 20).max(1);
    let test = (n / 20).max(1);
    Ok(SplitSizes { train: n - val - test, val, test })
}

/// View a slice of examples as dense feature/target matrices.
pub fn to_dataset(examples: &[LabeledScenario]) -> Dataset {
    let rows = examples.len();
    let d = examples.first().map_or(0, |e| e.features.len());
    let g = examples.first().map_or(0, |e| e.targets.len());
    let mut x = ndarray::Array2::zeros((rows, d));
    let mut y = ndarray::Array2::zeros((rows, g));
    for (r, ex) in examples.iter().enumerate() {
        for (c, v) in ex.features.iter().enumerate() {
            x[[r, c]] = *v;
        }
        for (c, v) in ex.targets.iter().enumerate() {
            y[[r, c]] = *v;
        }
    }
    Dataset { x, y }
}

/// The three contiguous example slices in split order.
pub fn split_examples<'a>(
    examples: &'a [LabeledScenario],
    sizes: &SplitSizes,
) -> (&'a [LabeledScenario], &'a [LabeledScenario], &'a [LabeledScenario]) {
    assert_eq!(sizes.train + sizes.val + sizes.test, examples.len());
    let (train, rest) = examples.split_at(sizes.train);
    let (val, test) = rest.split_at(sizes.val);
    (train, val, test)
}

/// Hex sha-256 of raw bytes; used to pin datasets and models to the exact
/// case file they were built from.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub case_sha256: String,
    pub seed: u64,
    pub requested: usize,
    pub kept: usize,
    pub dropped: Vec<usize>,
    pub sampling: SamplingConfig,
    pub split: SplitSizes,
    pub feature_names: Vec<String>,
    pub group_count: usize,
}

impl DatasetManifest {
    pub fn save(&self, path: &std::path::Path) -> Result<(), DatagenError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| DatagenError::Manifest(e.to_string()))?;
        Ok(std::fs::write(path, text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<DatasetManifest, DatagenError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| DatagenError::Manifest(e.to_string()))
    }
}

/// Write examples as CSV: `index`, one column per feature (named after the
/// load or pv unit), one `label_g<k>` column per group, then `objective`.
pub fn write_examples_csv(
    path: &std::path::Path,
    case: &NetworkCase,
    examples: &[LabeledScenario],
) -> Result<(), DatagenError> {
    let mut w = csv::Writer::from_path(path)?;
    let n_groups = examples.first().map_or(0, |e| e.targets.len());
    let mut header = vec!["index".to_string()];
    header.extend(Scenario::feature_names(case));
    header.extend((0..n_groups).map(|g| format!("label_g{g}")));
    header.push("objective".to_string());
    w.write_record(&header)?;
    for ex in examples {
        let mut rec = vec![ex.index.to_string()];
        rec.extend(ex.features.iter().map(|v| v.to_string()));
        rec.extend(ex.targets.iter().map(|v| (*v as i64).to_string()));
        rec.push(ex.objective.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a CSV produced by [`write_examples_csv`] back into examples. The
/// column layout must match the case exactly. Scenario multipliers are not
/// stored in the CSV, so `scenario` comes back empty; training only needs
/// features and targets.
pub fn read_examples_csv(
    path: &std::path::Path,
    case: &NetworkCase,
) -> Result<Vec<LabeledScenario>, DatagenError> {
    let mut r = csv::Reader::from_path(path)?;
    let feature_names = Scenario::feature_names(case);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let d = feature_names.len();
    if headers.len() < d + 2
        || headers[0] != "index"
        || headers[1..=d] != feature_names[..]
        || headers[headers.len() - 1] != "objective"
    {
        return Err(DatagenError::BadLayout(format!(
            "expected index, {d} feature columns matching the case, label columns, objective; got {} columns",
            headers.len()
        )));
    }
    let g = headers.len() - d - 2;
    let parse = |s: &str| -> Result<f64, DatagenError> {
        s.parse::<f64>()
            .map_err(|e| DatagenError::BadLayout(format!("bad number {s:?}: {e}")))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(DatagenError::BadLayout("ragged row".to_string()));
        }
        let index = rec[0]
            .parse::<usize>()
            .map_err(|e| DatagenError::BadLayout(format!("bad index: {e}")))?;
        let features: Vec<f64> = rec
            .iter()
            .skip(1)
            .take(d)
            .map(parse)
            .collect::<Result<_, _>>()?;
        let targets: Vec<f64> = rec
            .iter()
            .skip(1 + d)
            .take(g)
            .map(parse)
            .collect::<Result<_, _>>()?;
        let objective = parse(&rec[headers.len() - 1])?;
        out.push(LabeledScenario {
            index,
            scenario: Scenario { load_scale: Vec::new(), pv_scale: Vec::new() },
            features,
            targets,
            objective,
        });
    }
    Ok(out)
}
