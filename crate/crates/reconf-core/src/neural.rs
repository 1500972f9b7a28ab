//! A small fully-connected network, written directly against ndarray, that
//! predicts for every switchable label group which substation should feed it.
//!
//! Everything is deterministic given the seeds: initialization, dropout
//! masks, and shuffling all come from counter-mode generators, and no
//! parallelism is involved in training.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcase::{BlockAssignment, LoadBlockPartition};

/// Probabilities are clipped into this open interval before the log-loss so
/// saturated sigmoids cannot produce infinities.
const PROB_CLIP: f64 = 1e-12;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature matrix plus one 0/1 label column per predicted group.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-feature affine map fitted on training data only.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(x: &Array2<f64>) -> Normalizer {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x
            .axis_iter(Axis(1))
            .map(|col| col.sum() / n)
            .collect();
        let std: Vec<f64> = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let s = var.sqrt();
                // Constant columns pass through unscaled.
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

/// Multi-layer perceptron: ReLU hidden layers, sigmoid outputs.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    /// `weights[l]` has shape (fan_in, fan_out) for layer l.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Mlp {
    /// He-scaled random initialization.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Mlp {
        assert!(layer_sizes.len() >= 2, "need input and output layers");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, scale).unwrap();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
                normal.sample(&mut rng)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases }
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Deterministic forward pass (no dropout): output probabilities.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut a = x.clone();
        for l in 0..self.n_layers() {
            let mut z = a.dot(&self.weights[l]) + &self.biases[l];
            if l + 1 == self.n_layers() {
                z.mapv_inplace(sigmoid);
            } else {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        a
    }

    /// Forward with inverted-dropout masks on hidden activations, keeping
    /// the per-layer activations needed for the backward pass.
    pub fn forward_train(
        &self,
        x: &Array2<f64>,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Array2<f64>> {
        let keep = 1.0 - dropout;
        let mut acts = vec![x.clone()];
        for l in 0..self.n_layers() {
            let mut z = acts[l].dot(&self.weights[l]) + &self.biases[l];
            if l + 1 == self.n_layers() {
                z.mapv_inplace(sigmoid);
            } else {
                z.mapv_inplace(relu);
                if dropout > 0.0 {
                    z.mapv_inplace(|v| {
                        if rng.gen::<f64>() < keep {
                            v / keep
                        } else {
                            0.0
                        }
                    });
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Backpropagation for mean binary cross-entropy plus an L2 penalty.
    /// `acts` comes from `forward_train`; returns (dW, db) per layer.
    pub fn backward(
        &self,
        acts: &[Array2<f64>],
        y: &Array2<f64>,
        l2: f64,
    ) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
        let n = self.n_layers();
        let batch = acts[0].nrows() as f64;
        let outputs = acts[n].ncols() as f64;
        let scale = 1.0 / (batch * outputs);

        let mut dws = vec![Array2::zeros((0, 0)); n];
        let mut dbs = vec![Array1::zeros(0); n];
        // Sigmoid + cross-entropy collapse to (activation - target).
        let mut delta = (&acts[n] - y) * scale;
        for l in (0..n).rev() {
            dws[l] = acts[l].t().dot(&delta) + &(2.0 * l2 * &self.weights[l]);
            dbs[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut up = delta.dot(&self.weights[l].t());
                // ReLU (and its dropout mask) gate the upstream gradient:
                // any unit that emitted 0 contributes nothing.
                up.zip_mut_with(&acts[l], |g, a| {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = up;
            }
        }
        (dws, dbs)
    }

    /// Mean clipped binary cross-entropy; optionally add the L2 penalty that
    /// training minimizes.
    pub fn loss(&self, x: &Array2<f64>, y: &Array2<f64>, l2: f64) -> f64 {
        let probs = self.forward(x);
        bce_loss(&probs, y) + l2 * self.weight_norm_sq()
    }

    fn weight_norm_sq(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Mean binary cross-entropy over every (sample, output) cell, with
/// probabilities clipped away from 0 and 1.
pub fn bce_loss(probs: &Array2<f64>, y: &Array2<f64>) -> f64 {
    assert_eq!(probs.dim(), y.dim());
    let n = (probs.nrows() * probs.ncols()) as f64;
    probs
        .iter()
        .zip(y.iter())
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// Training hyperparameters. Defaults mirror the published pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub l2: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Noisy copies appended per training sample (0 disables augmentation).
    pub augment_copies: usize,
    /// Noise scale for augmentation, in normalized feature units.
    pub augment_sigma: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            l2: 1e-3,
            dropout: 0.25,
            batch_size: 125,
            max_epochs: 250,
            patience: 20,
            seed: 7,
            augment_copies: 1,
            augment_sigma: 0.03,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_bce: f64,
    pub train_bce: Vec<f64>,
    pub val_bce: Vec<f64>,
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: u64,
}

impl Adam {
    fn new(net: &Mlp) -> Adam {
        Adam {
            m_w: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: net.biases.iter().map(|b| Array1::zeros(b.dim())).collect(),
            v_b: net.biases.iter().map(|b| Array1::zeros(b.dim())).collect(),
            t: 0,
        }
    }

    fn step(
        &mut self,
        net: &mut Mlp,
        dws: &[Array2<f64>],
        dbs: &[Array1<f64>],
        cfg: &TrainConfig,
    ) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for l in 0..net.n_layers() {
            update_tensor(&mut net.weights[l], &dws[l], &mut self.m_w[l], &mut self.v_w[l], cfg, bc1, bc2);
            update_tensor(&mut net.biases[l], &dbs[l], &mut self.m_b[l], &mut self.v_b[l], cfg, bc1, bc2);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_tensor<D: ndarray::Dimension>(
    w: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    cfg: &TrainConfig,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(w)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|w, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *w -= cfg.learning_rate * mh / (vh.sqrt() + cfg.adam_eps);
        });
}

/// Append `copies` noisy duplicates of every sample; labels are preserved.
/// Features are assumed already normalized, so the noise scale is in
/// standard-deviation units.
pub fn augment(data: &Dataset, copies: usize, sigma: f64, seed: u64) -> Dataset {
    if copies == 0 || data.is_empty() {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let (n, d) = data.x.dim();
    let mut x = Array2::zeros((n * (copies + 1), d));
    let mut y = Array2::zeros((n * (copies + 1), data.y.ncols()));
    for i in 0..n {
        x.row_mut(i).assign(&data.x.row(i));
        y.row_mut(i).assign(&data.y.row(i));
    }
    for c in 0..copies {
        for i in 0..n {
            let r = n * (c + 1) + i;
            for j in 0..d {
                x[[r, j]] = data.x[[i, j]] + normal.sample(&mut rng);
            }
            y.row_mut(r).assign(&data.y.row(i));
        }
    }
    Dataset { x, y }
}

/// Minibatch Adam with early stopping on validation cross-entropy. The
/// weights left in `net` are the best ones seen on validation.
pub fn train(
    net: &mut Mlp,
    train_data: &Dataset,
    val_data: &Dataset,
    cfg: &TrainConfig,
) -> TrainReport {
    assert!(!train_data.is_empty(), "empty training set");
    assert!(cfg.batch_size > 0 && cfg.dropout < 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net);

    let n = train_data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = net.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut epochs_run = 0usize;

    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        // Fisher-Yates with the training generator keeps runs reproducible.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let xb = take_rows(&train_data.x, chunk);
            let yb = take_rows(&train_data.y, chunk);
            let acts = net.forward_train(&xb, cfg.dropout, &mut rng);
            let (dws, dbs) = net.backward(&acts, &yb, cfg.l2);
            adam.step(net, &dws, &dbs, cfg);
        }
        // Monitoring runs in eval mode and without the weight penalty.
        let tr = bce_loss(&net.forward(&train_data.x), &train_data.y);
        let va = if val_data.is_empty() {
            tr
        } else {
            bce_loss(&net.forward(&val_data.x), &val_data.y)
        };
        train_hist.push(tr);
        val_hist.push(va);
        if va < best_val {
            best_val = va;
            best = net.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    *net = best;
    TrainReport {
        epochs_run,
        best_epoch,
        best_val_bce: best_val,
        train_bce: train_hist,
        val_bce: val_hist,
    }
}

fn take_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), m.ncols()));
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).assign(&m.row(r));
    }
    out
}

/// Turn per-group probabilities into a block assignment: probability above
/// one half selects substation 1, anything else substation 0, and every
/// block in a group receives the group's label.
pub fn assignment_from_probs(
    partition: &LoadBlockPartition,
    probs: &[f64],
) -> BlockAssignment {
    assert_eq!(probs.len(), partition.label_groups.len());
    let mut labels = vec![0usize; partition.n_blocks()];
    for (g, &p) in partition.label_groups.iter().zip(probs) {
        let label = usize::from(p > 0.5);
        for &b in g {
            labels[b] = label;
        }
    }
    BlockAssignment { labels }
}

/// Group-level 0/1 targets read off a full block assignment.
pub fn group_targets(partition: &LoadBlockPartition, assignment: &BlockAssignment) -> Vec<f64> {
    partition
        .label_groups
        .iter()
        .map(|g| assignment.labels[g[0]] as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// Serialization: [b"MLP1"][u32 LE header length][JSON header][f64 LE payload]
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"MLP1";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    layer_sizes: Vec<usize>,
    normalizer: Normalizer,
    /// Hex digest of the case file this model was trained against.
    case_sha256: String,
    /// Column order the model expects, for mismatch diagnostics.
    feature_names: Vec<String>,
    group_names: Vec<String>,
}

/// A trained model bundled with its input normalization and provenance.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub net: Mlp,
    pub normalizer: Normalizer,
    pub case_sha256: String,
    pub feature_names: Vec<String>,
    pub group_names: Vec<String>,
}

impl ModelBundle {
    /// Normalized forward pass over raw (unnormalized) features.
    pub fn predict(&self, raw: &Array2<f64>) -> Array2<f64> {
        self.net.forward(&self.normalizer.apply(raw))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ModelHeader {
            layer_sizes: self.net.layer_sizes.clone(),
            normalizer: self.normalizer.clone(),
            case_sha256: self.case_sha256.clone(),
            feature_names: self.feature_names.clone(),
            group_names: self.group_names.clone(),
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_json);
        for l in 0..self.net.n_layers() {
            for v in self.net.weights[l].iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in self.net.biases[l].iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelBundle, ModelError> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(ModelError::Corrupt("bad magic".to_string()));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let payload_at = 8 + hlen;
        if bytes.len() < payload_at {
            return Err(ModelError::Corrupt("truncated header".to_string()));
        }
        let header: ModelHeader = serde_json::from_slice(&bytes[8..payload_at])
            .map_err(|e| ModelError::Corrupt(format!("header: {e}")))?;
        let sizes = &header.layer_sizes;
        if sizes.len() < 2 {
            return Err(ModelError::Corrupt("too few layers".to_string()));
        }
        let n_params: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let want = payload_at + 8 * n_params;
        if bytes.len() != want {
            return Err(ModelError::Corrupt(format!(
                "payload is {} bytes, expected {}",
                bytes.len() - payload_at,
                8 * n_params
            )));
        }
        let mut at = payload_at;
        let mut next = || {
            let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            at += 8;
            v
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let mut mat = Array2::zeros((w[0], w[1]));
            for i in 0..w[0] {
                for j in 0..w[1] {
                    mat[[i, j]] = next();
                }
            }
            let mut b = Array1::zeros(w[1]);
            for j in 0..w[1] {
                b[j] = next();
            }
            weights.push(mat);
            biases.push(b);
        }
        Ok(ModelBundle {
            net: Mlp { layer_sizes: sizes.clone(), weights, biases },
            normalizer: header.normalizer,
            case_sha256: header.case_sha256,
            feature_names: header.feature_names,
            group_names: header.group_names,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &std::path::Path) -> Result<ModelBundle, ModelError> {
        ModelBundle::from_bytes(&std::fs::read(path)?)
    }
}
