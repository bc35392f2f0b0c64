//! Experiment drivers: label-sparsity sweeps, loss-weight sweeps, and the
//! mode ablation table. Every run is pinned to an explicit seed list; a
//! point's seed set is identical across the whole sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::metrics::{cell_accuracy, predict_labels};
use crate::graph::{sparsify_train_labels, split_labels, AttributedGraph, CellMask, LabelMask};
use crate::numerics::Rng;
use crate::training::{infer, train, Mode, PreparedData, TrainConfig};

/// Standard split protocol: 80% train, 10% validation, 10% test.
pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sparsity,
    Lambda,
    Beta,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Sparsity => "sparsity",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Beta => "beta",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparsity" => Ok(SweepAxis::Sparsity),
            "lambda" => Ok(SweepAxis::Lambda),
            "beta" => Ok(SweepAxis::Beta),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (expected sparsity, lambda or beta)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub mode: Mode,
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
    /// Fingerprint of the mask each run actually received, one per seed;
    /// equal across modes by construction and asserted in tests.
    pub mask_fingerprints: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationResult {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn train_and_score(
    graph: &AttributedGraph,
    config: &TrainConfig,
    mask: &LabelMask,
    eval_mask: &CellMask,
) -> Result<f64> {
    let outcome = train(config, graph, mask)?;
    let prepared = PreparedData::build(graph, mask)?;
    let x_hat = infer(&outcome.params, &prepared, config.mode)?;
    let predictions = predict_labels(&x_hat, graph.schema());
    cell_accuracy(&predictions, graph, eval_mask)
}

/// Split for the sparsity sweep: 80% train and a fixed 20% test set (the
/// validation share is folded into test), so retention fractions up to 0.8
/// are feasible. These runs select the final iterate, not a validation
/// snapshot.
fn sparsity_base_mask(graph: &AttributedGraph, rng: &mut Rng) -> Result<LabelMask> {
    let split = split_labels(graph, DEFAULT_SPLIT, rng)?;
    let mut test = split.test.clone();
    for (u, j) in split.val.cells() {
        test.set(u, j, true);
    }
    Ok(LabelMask {
        train: split.train,
        val: CellMask::empty(test.n_users(), test.n_types()),
        test,
    })
}

/// For each retention fraction and seed: rebuild the 80/20 split, thin the
/// training mask to the fraction, train, and score on the fixed test set.
pub fn run_sparsity_sweep(
    graph: &AttributedGraph,
    config: &TrainConfig,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<SweepResult> {
    if fractions.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one fraction and one seed".into(),
        ));
    }
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut accuracies = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut rng = Rng::new(seed);
            let base = sparsity_base_mask(graph, &mut rng)?;
            let thinned = sparsify_train_labels(&base, fraction, &mut rng)?;
            let mut run_config = config.clone();
            run_config.seed = seed;
            accuracies.push(train_and_score(
                graph,
                &run_config,
                &thinned,
                &thinned.test,
            )?);
        }
        let (mean, std) = mean_std(&accuracies);
        points.push(SweepPoint {
            value: fraction,
            mean,
            std,
            accuracies,
            seeds: seeds.to_vec(),
        });
    }
    Ok(SweepResult {
        axis: SweepAxis::Sparsity.as_str().to_string(),
        points,
    })
}

/// Sensitivity sweep over the MI weight or the adversarial weight under the
/// standard split protocol.
pub fn run_parameter_sweep(
    graph: &AttributedGraph,
    config: &TrainConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
) -> Result<SweepResult> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one value and one seed".into(),
        ));
    }
    if axis == SweepAxis::Sparsity {
        return Err(Error::Config(
            "sparsity sweeps go through run_sparsity_sweep".into(),
        ));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut accuracies = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mask = split_labels(graph, DEFAULT_SPLIT, &mut Rng::new(seed))?;
            let mut run_config = config.clone();
            run_config.seed = seed;
            match axis {
                SweepAxis::Lambda => run_config.lambda = value,
                SweepAxis::Beta => run_config.beta = value,
                SweepAxis::Sparsity => unreachable!(),
            }
            accuracies.push(train_and_score(graph, &run_config, &mask, &mask.test)?);
        }
        let (mean, std) = mean_std(&accuracies);
        points.push(SweepPoint {
            value,
            mean,
            std,
            accuracies,
            seeds: seeds.to_vec(),
        });
    }
    Ok(SweepResult {
        axis: axis.as_str().to_string(),
        points,
    })
}

/// Trains every mode on identical per-seed splits and reports mean/std test
/// accuracy per mode.
pub fn run_ablations(
    graph: &AttributedGraph,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<AblationResult> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let masks: Vec<LabelMask> = seeds
        .iter()
        .map(|&seed| split_labels(graph, DEFAULT_SPLIT, &mut Rng::new(seed)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(Mode::ALL.len());
    for mode in Mode::ALL {
        let mut accuracies = Vec::with_capacity(seeds.len());
        let mut fingerprints = Vec::with_capacity(seeds.len());
        for (&seed, mask) in seeds.iter().zip(&masks) {
            let mut run_config = config.clone();
            run_config.seed = seed;
            run_config.mode = mode;
            fingerprints.push(mask.fingerprint());
            accuracies.push(train_and_score(graph, &run_config, mask, &mask.test)?);
        }
        let (mean, std) = mean_std(&accuracies);
        rows.push(AblationRow {
            mode,
            mean,
            std,
            accuracies,
            mask_fingerprints: fingerprints,
        });
    }
    Ok(AblationResult {
        seeds: seeds.to_vec(),
        rows,
    })
}
