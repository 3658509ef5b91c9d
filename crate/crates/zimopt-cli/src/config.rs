//! Experiment configuration: one TOML file describes the objective, the
//! method(s), their hyperparameters, and the training schedule. Unknown keys
//! are rejected, and the parsed configuration is echoed verbatim into every
//! output file.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use zimopt::data::{self, Dataset};
use zimopt::objectives::{
    Activation, LogisticRegression, MlpClassifier, Objective, Quadratic, Rosenbrock,
};
use zimopt::optimizer::{TrainConfig, STREAM_INIT};
use zimopt::{Error, RngState, ZimConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub init: InitConfig,
    pub method: MethodSection,
    pub zim: Option<ZimSection>,
    pub sgd: Option<SgdSection>,
    pub train: TrainSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub kind: MethodKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Zim,
    Sgd,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveConfig {
    Quadratic(QuadraticOpts),
    Logistic(LogisticOpts),
    Rosenbrock(RosenbrockOpts),
    Mlp(MlpOpts),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticOpts {
    pub dim: usize,
    /// Diagonal of the Hessian; identity when omitted.
    pub diag: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticOpts {
    pub lambda: f64,
    pub dataset: DatasetConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosenbrockOpts {
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpOpts {
    pub layer_sizes: Vec<usize>,
    pub activation: ActivationKind,
    #[serde(default)]
    pub bias: bool,
    pub dataset: DatasetConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetConfig {
    Mnist(MnistOpts),
    Blobs(BlobsOpts),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistOpts {
    /// Directory holding the canonical IDX files (gzipped accepted).
    pub dir: PathBuf,
    /// Stratified training subset size; full training split when omitted.
    pub subset: Option<usize>,
    #[serde(default)]
    pub subset_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsOpts {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
    /// Held-out evaluation set size per class; no test set when omitted.
    pub test_per_class: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    /// All-zero start.
    Zero,
    /// Explicit weight vector.
    Explicit(ExplicitInit),
    /// Start at objective gap `F(w_1) - F_inf = gap` along the uniform
    /// direction (objectives with a known `F_inf` only).
    Fgap(FgapInit),
    /// Objective-specific seeded initialization (per run seed).
    #[default]
    Seeded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInit {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgapInit {
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZimSection {
    pub n: u64,
    pub r: f64,
    pub c: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub lr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: Option<u64>,
    pub epochs: Option<u64>,
    pub batch_size: Option<usize>,
    pub seeds: Vec<u64>,
    pub log_every: u64,
    #[serde(default)]
    pub log_accuracy: bool,
}

/// Everything a run needs, resolved from the parsed file.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub objective: Arc<dyn Objective>,
    /// Held-out evaluation set for classifier objectives.
    pub test_set: Option<Dataset>,
    pub zim: Option<ZimConfig>,
    pub sgd_lr: Option<f64>,
    pub train: TrainConfig,
    /// Steps per epoch when the schedule was given in epochs.
    pub steps_per_epoch: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Validate and materialize the experiment (loads datasets, builds the
    /// objective, converts epochs to steps).
    pub fn resolve(self) -> Result<Experiment, String> {
        let (objective, test_set): (Arc<dyn Objective>, Option<Dataset>) =
            build_objective(&self.objective)?;

        let wants_zim = matches!(self.method.kind, MethodKind::Zim | MethodKind::Both);
        let wants_sgd = matches!(self.method.kind, MethodKind::Sgd | MethodKind::Both);
        let zim = match (&self.zim, wants_zim) {
            (Some(section), true) => Some(
                ZimConfig::new(section.n, section.r, section.c, section.delta)
                    .map_err(|e| format!("[zim]: {e}"))?,
            ),
            (None, true) => return Err("method needs a [zim] section".into()),
            (Some(_), false) => return Err("[zim] section present but method = sgd".into()),
            (None, false) => None,
        };
        let sgd_lr = match (&self.sgd, wants_sgd) {
            (Some(section), true) => {
                if !section.lr.is_finite() || section.lr < 0.0 {
                    return Err(format!("[sgd]: learning rate {} invalid", section.lr));
                }
                Some(section.lr)
            }
            (None, true) => return Err("method needs an [sgd] section".into()),
            (Some(_), false) => return Err("[sgd] section present but method = zim".into()),
            (None, false) => None,
        };

        let t = &self.train;
        let (total_steps, steps_per_epoch) = match (t.steps, t.epochs) {
            (Some(_), Some(_)) => {
                return Err("[train]: give either steps or epochs, not both".into())
            }
            (Some(steps), None) => (steps, None),
            (None, Some(epochs)) => {
                let m = objective
                    .num_samples()
                    .ok_or("[train]: epochs need a data-driven objective")?;
                let batch = t
                    .batch_size
                    .ok_or("[train]: epochs need an explicit batch_size")?;
                let per_epoch = m.div_ceil(batch) as u64;
                (per_epoch * epochs, Some(per_epoch))
            }
            (None, None) => return Err("[train]: steps or epochs required".into()),
        };

        let mut train = TrainConfig::new(total_steps, t.seeds.clone(), t.log_every)
            .map_err(|e| format!("[train]: {e}"))?;
        if let Some(batch) = t.batch_size {
            train = train.with_batch_size(batch).map_err(|e| format!("[train]: {e}"))?;
        }
        if t.log_accuracy {
            train = train.with_accuracy_logging();
        }

        // init sanity
        match &self.init {
            InitConfig::Explicit(e) if e.values.len() != objective.dim() => {
                return Err(format!(
                    "init values have dimension {}, objective has {}",
                    e.values.len(),
                    objective.dim()
                ));
            }
            InitConfig::Fgap(f) => {
                if !f.gap.is_finite() || f.gap <= 0.0 {
                    return Err("init gap must be positive".into());
                }
                let known_f_inf = objective
                    .constants()
                    .and_then(|c| c.f_inf)
                    .is_some();
                if !known_f_inf {
                    return Err("fgap init needs an objective with a known F_inf".into());
                }
            }
            _ => {}
        }

        Ok(Experiment {
            config: self,
            objective,
            test_set,
            zim,
            sgd_lr,
            train,
            steps_per_epoch,
        })
    }
}

impl Experiment {
    /// Initial weights for one seed.
    pub fn initial_weights(&self, seed: u64) -> Vec<f64> {
        match &self.config.init {
            InitConfig::Zero => vec![0.0; self.objective.dim()],
            InitConfig::Explicit(e) => e.values.clone(),
            InitConfig::Seeded => {
                let mut rng = RngState::with_stream(seed, STREAM_INIT);
                self.objective.default_init(&mut rng)
            }
            InitConfig::Fgap(f) => gap_start(self.objective.as_ref(), f.gap),
        }
    }

    pub fn method_names(&self) -> Vec<&'static str> {
        match self.config.method.kind {
            MethodKind::Zim => vec!["zim"],
            MethodKind::Sgd => vec!["sgd"],
            MethodKind::Both => vec!["zim", "sgd"],
        }
    }
}

/// Scale the uniform direction until `F(w) - F_inf = gap` (bisection).
fn gap_start(objective: &dyn Objective, gap: f64) -> Vec<f64> {
    let d = objective.dim();
    let f_inf = objective
        .constants()
        .and_then(|c| c.f_inf)
        .expect("checked at resolve time");
    let unit = 1.0 / (d as f64).sqrt();
    let eval = |t: f64| {
        let w: Vec<f64> = vec![t * unit; d];
        objective.value(&w) - f_inf - gap
    };
    let mut hi = 1.0f64;
    while eval(hi) < 0.0 {
        hi *= 2.0;
        assert!(hi < 1e12, "objective never reaches the requested gap");
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    vec![0.5 * (lo + hi) * unit; d]
}

fn build_objective(
    cfg: &ObjectiveConfig,
) -> Result<(Arc<dyn Objective>, Option<Dataset>), String> {
    match cfg {
        ObjectiveConfig::Quadratic(opts) => {
            let q = match &opts.diag {
                Some(diag) => {
                    if diag.len() != opts.dim {
                        return Err(format!(
                            "quadratic diag has {} entries, dim is {}",
                            diag.len(),
                            opts.dim
                        ));
                    }
                    Quadratic::diagonal(diag.clone())
                }
                None => Quadratic::isotropic(opts.dim, 1.0),
            }
            .map_err(|e| format!("quadratic: {e}"))?;
            Ok((Arc::new(q), None))
        }
        ObjectiveConfig::Rosenbrock(opts) => {
            let r = Rosenbrock::new(opts.dim).map_err(|e| format!("rosenbrock: {e}"))?;
            Ok((Arc::new(r), None))
        }
        ObjectiveConfig::Logistic(opts) => {
            let (train, test) = build_dataset(&opts.dataset, 2)?;
            let lr = LogisticRegression::from_dataset(&train, opts.lambda)
                .map_err(|e| format!("logistic: {e}"))?;
            Ok((Arc::new(lr), test))
        }
        ObjectiveConfig::Mlp(opts) => {
            let classes = *opts
                .layer_sizes
                .last()
                .ok_or("mlp: empty layer_sizes")?;
            let (train, test) = build_dataset(&opts.dataset, classes)?;
            let activation = match opts.activation {
                ActivationKind::Relu => Activation::Relu,
                ActivationKind::Tanh => Activation::Tanh,
            };
            let mlp = MlpClassifier::with_bias_flag(
                opts.layer_sizes.clone(),
                activation,
                Arc::new(train),
                opts.bias,
            )
            .map_err(|e| format!("mlp: {e}"))?;
            Ok((Arc::new(mlp), test))
        }
    }
}

fn build_dataset(
    cfg: &DatasetConfig,
    expected_classes: usize,
) -> Result<(Dataset, Option<Dataset>), String> {
    match cfg {
        DatasetConfig::Mnist(opts) => {
            if expected_classes != 10 {
                return Err(format!(
                    "MNIST has 10 classes, objective expects {expected_classes}"
                ));
            }
            let (mut train, test) = data::load_mnist_dir(&opts.dir)
                .map_err(|e| format!("mnist: {e}"))?;
            if let Some(k) = opts.subset {
                train = data::subset(&train, k, opts.subset_seed)
                    .map_err(|e| format!("mnist subset: {e}"))?;
            }
            Ok((train, Some(test)))
        }
        DatasetConfig::Blobs(opts) => {
            if opts.classes != expected_classes {
                return Err(format!(
                    "blobs have {} classes, objective expects {expected_classes}",
                    opts.classes
                ));
            }
            let train = data::synthetic_gaussian_blobs(
                opts.classes,
                opts.per_class,
                opts.dim,
                opts.separation,
                opts.seed,
            )
            .map_err(|e| format!("blobs: {e}"))?;
            let test = match opts.test_per_class {
                Some(per_class) => Some(
                    data::synthetic_gaussian_blobs(
                        opts.classes,
                        per_class,
                        opts.dim,
                        opts.separation,
                        opts.seed ^ 0x7e57_da7a,
                    )
                    .map_err(|e| format!("blobs test split: {e}"))?,
                ),
                None => None,
            };
            Ok((train, test))
        }
    }
}

/// Map a library error to the process exit code contract: 3 for mid-run
/// numeric failures, 1 for everything configuration- or data-shaped.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NumericFailure { .. } => 3,
        _ => 1,
    }
}
