//! Anchor-residual prediction pipeline and the compared transfer methods.
//!
//! Every method shares one decomposition: a target-fit anchor forest
//! `a(A)` over calendar/location features captures stable station-time
//! structure, and the transferable signal is the residual `r = z - a(A)`
//! of log demand. Methods differ only in how they train the residual
//! regressor — which rows, which feature alignment, which weights — and
//! all finish through `z_hat = a(A) + r_hat`, `Y_hat = max(exp(z_hat) - 1, 0)`.
//!
//! Residual forests share one derived seed and the OT/generator stages
//! share theirs, so methods that are mathematically identical under a
//! degenerate setting (for example trimming with `keep_mass = 1`) produce
//! bit-identical predictions.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::forest::{self, ForestConfig, ForestModel};
use crate::mmd::{self, KernelSpec};
use crate::netgen::{self, GeneratorConfig};
use crate::ot;
use crate::panel::DomainSplit;
use crate::{derive_seed, Error, Result};

/// The compared methods. The main benchmark runs all of them except
/// [`MethodId::Otda`], which exists for the generator-by-robustness
/// ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    /// Anchor predictions only; the residual is taken to be zero.
    AnchorOnly,
    /// Residual forest on source rows, no adaptation.
    SourceOnly,
    /// Residual forest on the few labeled target rows only.
    TargetOnly,
    /// Residual forest on source plus labeled target rows, target rows
    /// up-weighted.
    FineTune,
    /// FineTune with source rows reweighted by kernel mean matching.
    MmdAdapt,
    /// Near-exact optimal transport alignment (small-epsilon entropic
    /// proxy), no trimming.
    Otda,
    /// Entropic optimal transport alignment at the benchmark epsilon.
    SinkhornOtda,
    /// Entropic alignment plus robust trimming of high-cost mass.
    Rotda,
    /// Learned feature generator, then entropic alignment.
    GenOtda,
    /// Generator plus entropic alignment plus robust trimming.
    GenRotda,
}

impl MethodId {
    /// Every method, in report order.
    pub const ALL: [MethodId; 10] = [
        MethodId::AnchorOnly,
        MethodId::SourceOnly,
        MethodId::TargetOnly,
        MethodId::FineTune,
        MethodId::MmdAdapt,
        MethodId::Otda,
        MethodId::SinkhornOtda,
        MethodId::Rotda,
        MethodId::GenOtda,
        MethodId::GenRotda,
    ];

    /// The nine methods of the main comparison (everything but `Otda`).
    pub const MAIN: [MethodId; 9] = [
        MethodId::AnchorOnly,
        MethodId::SourceOnly,
        MethodId::TargetOnly,
        MethodId::FineTune,
        MethodId::MmdAdapt,
        MethodId::SinkhornOtda,
        MethodId::Rotda,
        MethodId::GenOtda,
        MethodId::GenRotda,
    ];

    /// The generator-by-robustness ablation grid, in (No,No), (No,Yes),
    /// (Yes,No), (Yes,Yes) order.
    pub const ABLATION: [MethodId; 4] = [
        MethodId::Otda,
        MethodId::Rotda,
        MethodId::GenOtda,
        MethodId::GenRotda,
    ];

    /// Stable machine-readable identifier (CSV column value, CLI argument).
    pub fn label(&self) -> &'static str {
        match self {
            MethodId::AnchorOnly => "anchor_only",
            MethodId::SourceOnly => "source_only",
            MethodId::TargetOnly => "target_only",
            MethodId::FineTune => "fine_tune",
            MethodId::MmdAdapt => "mmd_adapt",
            MethodId::Otda => "otda",
            MethodId::SinkhornOtda => "sinkhorn_otda",
            MethodId::Rotda => "rotda",
            MethodId::GenOtda => "gen_otda",
            MethodId::GenRotda => "gen_rotda",
        }
    }

    /// Human-facing name for console tables.
    pub fn pretty(&self) -> &'static str {
        match self {
            MethodId::AnchorOnly => "AnchorOnly",
            MethodId::SourceOnly => "SourceOnly",
            MethodId::TargetOnly => "TargetOnly",
            MethodId::FineTune => "FineTune",
            MethodId::MmdAdapt => "MMDAdapt",
            MethodId::Otda => "OTDA",
            MethodId::SinkhornOtda => "SinkhornOTDA",
            MethodId::Rotda => "ROTDA",
            MethodId::GenOtda => "GenOTDA",
            MethodId::GenRotda => "GenROTDA",
        }
    }

    /// True for methods that learn the feature generator.
    pub fn uses_generator(&self) -> bool {
        matches!(self, MethodId::GenOtda | MethodId::GenRotda)
    }

    /// True for methods that trim high-cost transport mass.
    pub fn uses_trimming(&self) -> bool {
        matches!(self, MethodId::Rotda | MethodId::GenRotda)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .iter()
            .copied()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "unknown method '{s}' (expected one of: {})",
                    MethodId::ALL.map(|m| m.label()).join(", ")
                ))
            })
    }
}

/// Shared hyperparameters for every method.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Sample weight of labeled target rows in stacked residual fits.
    pub target_weight: f64,
    /// Epsilon scale (fraction of the median cost) for the entropic
    /// alignment methods.
    pub eps_scale: f64,
    /// Much smaller epsilon scale making `Otda` a near-exact transport
    /// proxy.
    pub otda_eps_scale: f64,
    /// Fraction of transport mass retained by the robust methods.
    pub keep_mass: f64,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
    /// Upper bound on kernel-mean-matching weights.
    pub kmm_bound: f64,
    pub kmm_iters: usize,
    /// Generator training settings; the seed field is overridden per run.
    pub generator: GeneratorConfig,
    /// Forest settings for both anchor and residual models; the seed field
    /// is overridden per run.
    pub forest: ForestConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target_weight: 8.0,
            eps_scale: 0.1,
            otda_eps_scale: 0.01,
            keep_mass: 0.8,
            sinkhorn_max_iters: 1000,
            sinkhorn_tol: 1e-9,
            kmm_bound: 10.0,
            kmm_iters: 500,
            generator: GeneratorConfig::default(),
            forest: ForestConfig {
                n_trees: 300,
                min_samples_leaf: 3,
                ..ForestConfig::default()
            },
        }
    }
}

/// Error metrics over a test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean absolute error (the primary metric).
    pub mae: f64,
    /// Root mean squared error.
    pub rmse: f64,
    /// Coefficient of determination; NaN when the true values have zero
    /// variance.
    pub r2: f64,
}

/// Computes MAE, RMSE and R-squared of predictions against ground truth.
pub fn metrics(y_true: ArrayView1<'_, f64>, y_pred: ArrayView1<'_, f64>) -> Result<Metrics> {
    if y_true.is_empty() {
        return Err(Error::Empty("metric inputs".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimMismatch(format!(
            "{} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.iter().chain(y_pred.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric inputs".into()));
    }
    let n = y_true.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (&t, &p) in y_true.iter().zip(y_pred.iter()) {
        let e = p - t;
        abs_sum += e.abs();
        sq_sum += e * e;
    }
    let mean = y_true.sum() / n;
    let var_sum: f64 = y_true.iter().map(|&t| (t - mean) * (t - mean)).sum();
    let r2 = if var_sum > 0.0 {
        1.0 - sq_sum / var_sum
    } else {
        f64::NAN
    };
    Ok(Metrics {
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        r2,
    })
}

/// One row of the benchmark report.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: MethodId,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    /// Wall-clock seconds for the full method run (anchor fit, adaptation,
    /// residual fit, prediction) — sampling and ingestion excluded.
    pub runtime_s: f64,
}

/// Predictions plus the report row for one method run.
#[derive(Debug, Clone)]
pub struct MethodOutput {
    /// Demand predictions on the test rows, clamped at zero.
    pub predictions: Array1<f64>,
    /// Pre-clamp log-space predictions `a(A) + r_hat`.
    pub z_hat: Array1<f64>,
    pub report: MethodReport,
}

/// The target-fit anchor regressor over calendar/location features.
#[derive(Debug, Clone)]
pub struct AnchorModel {
    pub forest: ForestModel,
}

impl AnchorModel {
    /// Predicts log demand from anchor features.
    pub fn predict(&self, anchor: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        forest::predict_forest(&self.forest, anchor)
    }
}

/// Residuals of log demand against the anchor model.
#[derive(Debug, Clone)]
pub struct ResidualSet {
    /// Residuals of the source rows (target anchor applied to source
    /// anchor features).
    pub r_source: Array1<f64>,
    /// Residuals of the labeled target rows.
    pub r_target_lab: Array1<f64>,
}

/// Fits the anchor forest on the labeled target rows with unit weights.
pub fn fit_anchor(split: &DomainSplit, config: &ForestConfig, seed: u64) -> Result<AnchorModel> {
    let pool = &split.target_labeled;
    if pool.is_empty() {
        return Err(Error::Empty("labeled target pool".into()));
    }
    let weights = Array1::ones(pool.len());
    let forest_config = ForestConfig {
        seed: derive_seed(seed, "anchor"),
        ..config.clone()
    };
    let forest = forest::fit_forest(
        pool.anchor.view(),
        pool.log_demand.view(),
        weights.view(),
        &forest_config,
    )?;
    Ok(AnchorModel { forest })
}

/// Computes anchor residuals `r = z - a(A)` for the source and labeled
/// target pools. There is only one anchor — the target-fit one — so source
/// residuals apply it to source anchor features.
pub fn compute_residuals(split: &DomainSplit, anchor: &AnchorModel) -> Result<ResidualSet> {
    let a_source = anchor.predict(split.source_labeled.anchor.view())?;
    let a_target = anchor.predict(split.target_labeled.anchor.view())?;
    Ok(ResidualSet {
        r_source: &split.source_labeled.log_demand - &a_source,
        r_target_lab: &split.target_labeled.log_demand - &a_target,
    })
}

/// Runs one method end to end on a prepared split and reports test-set
/// metrics. Failures carry the method id.
pub fn run_method(
    method: MethodId,
    split: &DomainSplit,
    config: &PipelineConfig,
    seed: u64,
) -> Result<MethodOutput> {
    run_method_inner(method, split, config, seed).map_err(|e| Error::Method {
        method: method.label(),
        source: Box::new(e),
    })
}

fn run_method_inner(
    method: MethodId,
    split: &DomainSplit,
    config: &PipelineConfig,
    seed: u64,
) -> Result<MethodOutput> {
    let start = Instant::now();
    let anchor = fit_anchor(split, &config.forest, seed)?;
    let residuals = compute_residuals(split, &anchor)?;

    let r_hat = predict_residuals(method, split, config, seed, &residuals)?;

    let a_test = anchor.predict(split.target_test.anchor.view())?;
    let z_hat = &a_test + &r_hat;
    let predictions = z_hat.mapv(|z| (z.exp() - 1.0).max(0.0));
    let runtime_s = start.elapsed().as_secs_f64();

    let m = metrics(split.target_test.demand.view(), predictions.view())?;
    Ok(MethodOutput {
        predictions,
        z_hat,
        report: MethodReport {
            method,
            mae: m.mae,
            rmse: m.rmse,
            r2: m.r2,
            runtime_s,
        },
    })
}

/// Dispatches to the method recipe, producing residual predictions on the
/// test rows.
fn predict_residuals(
    method: MethodId,
    split: &DomainSplit,
    config: &PipelineConfig,
    seed: u64,
    residuals: &ResidualSet,
) -> Result<Array1<f64>> {
    let test_x = split.target_test.transfer.view();
    let source_x = split.source_labeled.transfer.view();
    let target_x = split.target_labeled.transfer.view();
    let unlabeled = split.target_unlabeled.view();
    let r_s = residuals.r_source.view();
    let r_t = residuals.r_target_lab.view();

    match method {
        MethodId::AnchorOnly => Ok(Array1::zeros(split.target_test.len())),
        MethodId::SourceOnly => {
            let w = Array1::ones(source_x.nrows());
            let model = fit_residual_forest(source_x, r_s, w.view(), config, seed)?;
            forest::predict_forest(&model, test_x)
        }
        MethodId::TargetOnly => {
            let w = Array1::ones(target_x.nrows());
            let model = fit_residual_forest(target_x, r_t, w.view(), config, seed)?;
            forest::predict_forest(&model, test_x)
        }
        MethodId::FineTune => {
            let w_src = Array1::ones(source_x.nrows());
            let model = fit_stacked(source_x, r_s, w_src.view(), split, config, seed, residuals)?;
            forest::predict_forest(&model, test_x)
        }
        MethodId::MmdAdapt => {
            let kernel = KernelSpec::new(mmd::median_bandwidth(source_x, unlabeled));
            let w_src = mmd::kmm_weights(
                source_x,
                unlabeled,
                &kernel,
                config.kmm_bound,
                config.kmm_iters,
            )?;
            let model = fit_stacked(source_x, r_s, w_src.view(), split, config, seed, residuals)?;
            forest::predict_forest(&model, test_x)
        }
        MethodId::Otda | MethodId::SinkhornOtda | MethodId::Rotda => {
            let eps_scale = if method == MethodId::Otda {
                config.otda_eps_scale
            } else {
                config.eps_scale
            };
            let keep_mass = if method.uses_trimming() {
                config.keep_mass
            } else {
                1.0
            };
            let projected =
                align_by_transport(source_x, unlabeled, eps_scale, keep_mass, config)?;
            let w_src = Array1::ones(projected.nrows());
            let model = fit_stacked(
                projected.view(),
                r_s,
                w_src.view(),
                split,
                config,
                seed,
                residuals,
            )?;
            forest::predict_forest(&model, test_x)
        }
        MethodId::GenOtda | MethodId::GenRotda => {
            let gen_config = GeneratorConfig {
                seed: derive_seed(seed, "generator"),
                ..config.generator.clone()
            };
            let (params, _trace) =
                netgen::train_generator(source_x, r_s, unlabeled, target_x, r_t, &gen_config)?;
            let generated = params.apply(source_x)?;
            let keep_mass = if method.uses_trimming() {
                config.keep_mass
            } else {
                1.0
            };
            let projected = align_by_transport(
                generated.view(),
                unlabeled,
                config.eps_scale,
                keep_mass,
                config,
            )?;
            let w_src = Array1::ones(projected.nrows());
            let model = fit_stacked(
                projected.view(),
                r_s,
                w_src.view(),
                split,
                config,
                seed,
                residuals,
            )?;
            forest::predict_forest(&model, test_x)
        }
    }
}

/// Entropic-transport feature alignment: plan from `source` rows to
/// `target` rows, optional high-cost trimming, then barycentric projection.
/// Rows that lose all mass fall back to their own (input) feature vector.
fn align_by_transport(
    source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    eps_scale: f64,
    keep_mass: f64,
    config: &PipelineConfig,
) -> Result<Array2<f64>> {
    let cost = ot::cost_matrix(source, target)?;
    let plan = ot::sinkhorn(
        &cost,
        eps_scale,
        config.sinkhorn_max_iters,
        config.sinkhorn_tol,
    )?;
    let trimmed = ot::trim_plan(&plan, &cost, keep_mass)?;
    ot::barycentric_project(&trimmed, target, source)
}

/// Fits the residual forest on source rows stacked with the labeled target
/// rows, target rows weighted by `target_weight`.
#[allow(clippy::too_many_arguments)]
fn fit_stacked(
    source_x: ArrayView2<'_, f64>,
    r_s: ArrayView1<'_, f64>,
    w_src: ArrayView1<'_, f64>,
    split: &DomainSplit,
    config: &PipelineConfig,
    seed: u64,
    residuals: &ResidualSet,
) -> Result<ForestModel> {
    let shape_err = |e: ndarray::ShapeError| Error::DimMismatch(e.to_string());
    let target_x = split.target_labeled.transfer.view();
    let x = concatenate(Axis(0), &[source_x, target_x]).map_err(shape_err)?;
    let r = concatenate(Axis(0), &[r_s, residuals.r_target_lab.view()]).map_err(shape_err)?;
    let w_tgt = Array1::from_elem(target_x.nrows(), config.target_weight);
    let w = concatenate(Axis(0), &[w_src, w_tgt.view()]).map_err(shape_err)?;
    fit_residual_forest(x.view(), r.view(), w.view(), config, seed)
}

fn fit_residual_forest(
    x: ArrayView2<'_, f64>,
    r: ArrayView1<'_, f64>,
    w: ArrayView1<'_, f64>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ForestModel> {
    let forest_config = ForestConfig {
        seed: derive_seed(seed, "residual_forest"),
        ..config.forest.clone()
    };
    forest::fit_forest(x, r, w, &forest_config)
}
