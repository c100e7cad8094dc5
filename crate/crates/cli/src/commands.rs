//! Implementations of the benchmark subcommands.
//!
//! Every command takes a resolved configuration, an optional panel
//! directory, and an output directory; writes its CSV artifacts under the
//! output directory; prints a console summary; and returns its rows so
//! tests can assert on them directly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Timelike;
use ndarray::Array2;
use rotda_core::derive_seed;
use rotda_core::netgen::{self, GeneratorConfig};
use rotda_core::panel::{
    aggregate_station_hours, ingest_trips, inject_contamination, make_split, DomainSplit,
    FeaturePanel, SplitSizes, YearMonth,
};
use rotda_core::pipeline::{self, MethodId, MethodReport};
use rotda_core::synth::generate_drifted;

use crate::config::ExperimentConfig;
use crate::data::{load_panel, panel_path};
use crate::diag::{alignment_diag, AlignmentDiag};
use crate::report::{console_table, fmt_float, write_csv, write_report_csv, ReportRow};

/// Canonical task label for a year pair, e.g. `2025-03->2026-03`.
pub fn task_name(source: YearMonth, target: YearMonth) -> String {
    format!("{source}->{target}")
}

fn print_split_notes(sizes: &SplitSizes) {
    let pools = [
        ("source", &sizes.source),
        ("target_labeled", &sizes.target_labeled),
        ("target_unlabeled", &sizes.target_unlabeled),
        ("target_test", &sizes.target_test),
    ];
    for (name, pool) in pools {
        if pool.actual < pool.requested {
            println!(
                "note: {name} pool clamped to {} rows ({} requested)",
                pool.actual, pool.requested
            );
        }
    }
    if sizes.labeled_day_span_short {
        println!("note: target month offers fewer distinct labeled days than requested");
    }
}

fn build_split(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    source_year: i32,
    target_year: i32,
) -> Result<(DomainSplit, String)> {
    let source = load_panel(config, data_dir, source_year)?;
    let target = load_panel(config, data_dir, target_year)?;
    let split = make_split(&source, &target, &config.split_config(), config.seed)?;
    let task = task_name(
        config.year_month(source_year)?,
        config.year_month(target_year)?,
    );
    Ok((split, task))
}

fn run_methods(
    methods: &[MethodId],
    split: &DomainSplit,
    config: &ExperimentConfig,
    task: &str,
) -> Result<Vec<ReportRow>> {
    let pipeline_config = config.pipeline_config();
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let output = pipeline::run_method(method, split, &pipeline_config, config.seed)?;
        rows.push(ReportRow::from_report(&output.report, config.seed, task));
    }
    Ok(rows)
}

/// Runs the configured methods on the main source-year -> target-year task
/// and writes `report.csv`.
pub fn cmd_run(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<Vec<ReportRow>> {
    let (split, task) = build_split(config, data_dir, config.source_year, config.target_year)?;
    print_split_notes(&split.sizes);
    let rows = run_methods(&config.methods, &split, config, &task)?;
    write_report_csv(&out.join("report.csv"), &rows)?;
    println!(
        "task {task}: {} test rows, seed {}",
        split.target_test.len(),
        config.seed
    );
    print!("{}", console_table(&rows));
    Ok(rows)
}

/// One multi-year task outcome.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task: String,
    /// `adjacent` (one-year gap) or `two_year`.
    pub group: &'static str,
    pub rows: Vec<ReportRow>,
}

/// Per-method averages over a task group.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: MethodId,
    pub group: String,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub n_tasks: usize,
}

/// Results of the multi-year suite.
#[derive(Debug, Clone)]
pub struct MultiyearSummary {
    pub tasks: Vec<TaskOutcome>,
    /// Tasks that failed, with their error messages; excluded from averages.
    pub failures: Vec<(String, String)>,
    pub summary: Vec<SummaryRow>,
}

/// Runs adjacent-year and two-year transfer tasks across the configured
/// year range and writes per-task rows plus grouped averages.
pub fn cmd_multiyear(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<MultiyearSummary> {
    if config.multiyear_end - config.multiyear_start < 2 {
        bail!(
            "multiyear needs at least a three-year range, got {}..={}",
            config.multiyear_start,
            config.multiyear_end
        );
    }
    // Year pairs: (y, y+1) and (y, y+2) for every y with y+2 in range, so a
    // 2021..=2026 range yields four adjacent and four two-year tasks.
    let mut specs: Vec<(i32, i32, &'static str)> = Vec::new();
    for y in config.multiyear_start..=(config.multiyear_end - 2) {
        specs.push((y, y + 1, "adjacent"));
    }
    for y in config.multiyear_start..=(config.multiyear_end - 2) {
        specs.push((y, y + 2, "two_year"));
    }

    let mut panels: BTreeMap<i32, FeaturePanel> = BTreeMap::new();
    let load_cached = |year: i32,
                           panels: &mut BTreeMap<i32, FeaturePanel>,
                           config: &ExperimentConfig|
     -> Result<()> {
        if !panels.contains_key(&year) {
            panels.insert(year, load_panel(config, data_dir, year)?);
        }
        Ok(())
    };

    let mut tasks = Vec::new();
    let mut failures = Vec::new();
    for (source_year, target_year, group) in specs {
        let task = task_name(
            config.year_month(source_year)?,
            config.year_month(target_year)?,
        );
        let outcome = (|| -> Result<Vec<ReportRow>> {
            load_cached(source_year, &mut panels, config)?;
            load_cached(target_year, &mut panels, config)?;
            let split = make_split(
                &panels[&source_year],
                &panels[&target_year],
                &config.split_config(),
                config.seed,
            )?;
            run_methods(&config.methods, &split, config, &task)
        })();
        match outcome {
            Ok(rows) => {
                println!("completed {task} ({group})");
                tasks.push(TaskOutcome { task, group, rows });
            }
            Err(e) => {
                println!("warning: task {task} failed and is excluded from averages: {e:#}");
                failures.push((task, format!("{e:#}")));
            }
        }
    }
    if tasks.is_empty() {
        bail!("every multiyear task failed");
    }

    // Grouped means per method.
    let mut summary = Vec::new();
    for group in ["adjacent", "two_year", "overall"] {
        for &method in &config.methods {
            let rows: Vec<&ReportRow> = tasks
                .iter()
                .filter(|t| group == "overall" || t.group == group)
                .flat_map(|t| t.rows.iter().filter(|r| r.method == method))
                .collect();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            summary.push(SummaryRow {
                method,
                group: group.to_string(),
                mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
                rmse: rows.iter().map(|r| r.rmse).sum::<f64>() / n,
                r2: rows.iter().map(|r| r.r2).sum::<f64>() / n,
                n_tasks: rows.len(),
            });
        }
    }

    let task_rows: Vec<ReportRow> = tasks.iter().flat_map(|t| t.rows.clone()).collect();
    write_report_csv(&out.join("multiyear_tasks.csv"), &task_rows)?;
    let summary_records: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                s.method.label().to_string(),
                s.group.clone(),
                fmt_float(s.mae),
                fmt_float(s.rmse),
                fmt_float(s.r2),
                s.n_tasks.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("multiyear_summary.csv"),
        &["method", "group", "mae", "rmse", "r2", "n_tasks"],
        &summary_records,
    )?;

    println!(
        "multiyear: {} tasks completed, {} failed",
        tasks.len(),
        failures.len()
    );
    for group in ["adjacent", "two_year", "overall"] {
        println!("-- {group} --");
        for s in summary.iter().filter(|s| s.group == group) {
            println!(
                "{:<14} MAE {:>9.4}  RMSE {:>9.4}  R2 {:>9.4}  ({} tasks)",
                s.method.pretty(),
                s.mae,
                s.rmse,
                s.r2,
                s.n_tasks
            );
        }
    }
    Ok(MultiyearSummary {
        tasks,
        failures,
        summary,
    })
}

/// The methods compared in the contamination sweep.
pub const ROBUSTNESS_METHODS: [MethodId; 3] = [
    MethodId::SinkhornOtda,
    MethodId::GenOtda,
    MethodId::GenRotda,
];

/// One cell of the contamination sweep.
#[derive(Debug, Clone)]
pub struct RobustnessCell {
    pub ratio: f64,
    pub report: MethodReport,
}

/// Sweeps contamination ratios over the unlabeled target pool and runs the
/// robustness trio at each level.
pub fn cmd_robustness(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<Vec<RobustnessCell>> {
    let (split, task) = build_split(config, data_dir, config.source_year, config.target_year)?;
    print_split_notes(&split.sizes);
    let pipeline_config = config.pipeline_config();
    // One contamination stream for every ratio: larger ratios corrupt a
    // superset of the rows corrupted at smaller ratios.
    let contamination_seed = derive_seed(config.seed, "contamination");

    let mut cells = Vec::new();
    for &ratio in &config.contamination_ratios {
        let contaminated = inject_contamination(&split, ratio, contamination_seed)?;
        for method in ROBUSTNESS_METHODS {
            let output = pipeline::run_method(method, &contaminated, &pipeline_config, config.seed)?;
            cells.push(RobustnessCell {
                ratio,
                report: output.report,
            });
        }
        println!("contamination {ratio}: done");
    }

    let grid_records: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                fmt_float(c.ratio),
                c.report.method.label().to_string(),
                fmt_float(c.report.mae),
                fmt_float(c.report.rmse),
                fmt_float(c.report.r2),
                format!("{:.4}", c.report.runtime_s),
                config.seed.to_string(),
                task.clone(),
            ]
        })
        .collect();
    write_csv(
        &out.join("robustness_grid.csv"),
        &[
            "ratio",
            "method",
            "mae",
            "rmse",
            "r2",
            "runtime_s",
            "seed",
            "task",
        ],
        &grid_records,
    )?;
    let point_records: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                fmt_float(c.ratio),
                c.report.method.label().to_string(),
                fmt_float(c.report.mae),
            ]
        })
        .collect();
    write_csv(
        &out.join("robustness_points.csv"),
        &["ratio", "method", "mae"],
        &point_records,
    )?;

    println!("{:<8} {:>14} {:>14} {:>14}", "ratio", "SinkhornOTDA", "GenOTDA", "GenROTDA");
    for &ratio in &config.contamination_ratios {
        let mae_of = |m: MethodId| {
            cells
                .iter()
                .find(|c| c.ratio == ratio && c.report.method == m)
                .map(|c| c.report.mae)
                .unwrap_or(f64::NAN)
        };
        println!(
            "{:<8} {:>14.4} {:>14.4} {:>14.4}",
            ratio,
            mae_of(MethodId::SinkhornOtda),
            mae_of(MethodId::GenOtda),
            mae_of(MethodId::GenRotda)
        );
    }
    Ok(cells)
}

/// One row of the generator-by-robustness ablation grid.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub report: MethodReport,
    pub generator: bool,
    pub robust: bool,
}

/// Runs the four-cell generator-by-robustness grid with a shared seed.
pub fn cmd_ablation(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<Vec<AblationRow>> {
    let (split, task) = build_split(config, data_dir, config.source_year, config.target_year)?;
    print_split_notes(&split.sizes);
    let pipeline_config = config.pipeline_config();
    let mut rows = Vec::new();
    for method in MethodId::ABLATION {
        let output = pipeline::run_method(method, &split, &pipeline_config, config.seed)?;
        rows.push(AblationRow {
            report: output.report,
            generator: method.uses_generator(),
            robust: method.uses_trimming(),
        });
    }

    let yes_no = |b: bool| if b { "Yes" } else { "No" }.to_string();
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.report.method.label().to_string(),
                yes_no(r.generator),
                yes_no(r.robust),
                fmt_float(r.report.mae),
                fmt_float(r.report.rmse),
                fmt_float(r.report.r2),
                format!("{:.4}", r.report.runtime_s),
                config.seed.to_string(),
                task.clone(),
            ]
        })
        .collect();
    write_csv(
        &out.join("ablation.csv"),
        &[
            "method",
            "generator",
            "robust",
            "mae",
            "rmse",
            "r2",
            "runtime_s",
            "seed",
            "task",
        ],
        &records,
    )?;

    println!("{:<14} {:>10} {:>8} {:>9}", "method", "generator", "robust", "MAE");
    for r in &rows {
        println!(
            "{:<14} {:>10} {:>8} {:>9.4}",
            r.report.method.pretty(),
            yes_no(r.generator),
            yes_no(r.robust),
            r.report.mae
        );
    }
    Ok(rows)
}

/// Trains the generator on the main task and reports alignment diagnostics
/// plus PCA point clouds and the training trace.
pub fn cmd_diagnose(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<AlignmentDiag> {
    let (split, task) = build_split(config, data_dir, config.source_year, config.target_year)?;
    print_split_notes(&split.sizes);
    let pipeline_config = config.pipeline_config();
    let anchor = pipeline::fit_anchor(&split, &pipeline_config.forest, config.seed)?;
    let residuals = pipeline::compute_residuals(&split, &anchor)?;

    let gen_config = GeneratorConfig {
        seed: derive_seed(config.seed, "generator"),
        ..pipeline_config.generator.clone()
    };
    let (params, trace) = netgen::train_generator(
        split.source_labeled.transfer.view(),
        residuals.r_source.view(),
        split.target_unlabeled.view(),
        split.target_labeled.transfer.view(),
        residuals.r_target_lab.view(),
        &gen_config,
    )?;
    let generated: Array2<f64> = params.apply(split.source_labeled.transfer.view())?;

    let diag = alignment_diag(
        split.source_labeled.transfer.view(),
        generated.view(),
        split.target_unlabeled.view(),
        trace,
    )?;

    write_csv(
        &out.join("diag_summary.csv"),
        &[
            "centroid_before",
            "centroid_after",
            "mean_displacement",
            "median_displacement",
            "pca_fallback",
            "seed",
            "task",
        ],
        &[vec![
            fmt_float(diag.centroid_before),
            fmt_float(diag.centroid_after),
            fmt_float(diag.mean_displacement),
            fmt_float(diag.median_displacement),
            diag.pca_fallback.to_string(),
            config.seed.to_string(),
            task.clone(),
        ]],
    )?;

    let mut point_records = Vec::new();
    for (group, points) in [
        ("source", &diag.source_points),
        ("generated", &diag.generated_points),
        ("target", &diag.target_points),
    ] {
        for row in points.outer_iter() {
            point_records.push(vec![
                group.to_string(),
                fmt_float(row[0]),
                fmt_float(row[1]),
            ]);
        }
    }
    write_csv(
        &out.join("pca_points.csv"),
        &["group", "pc1", "pc2"],
        &point_records,
    )?;

    let trace_records: Vec<Vec<String>> = diag
        .trace
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                fmt_float(e.total),
                fmt_float(e.align),
                fmt_float(e.id),
                fmt_float(e.label),
                fmt_float(e.target),
            ]
        })
        .collect();
    write_csv(
        &out.join("gen_trace.csv"),
        &["epoch", "total", "align", "id", "label", "target"],
        &trace_records,
    )?;

    if diag.pca_fallback {
        println!("warning: degenerate covariance; PCA fell back to the first two feature axes");
    }
    let reduction = if diag.centroid_before > 0.0 {
        100.0 * (1.0 - diag.centroid_after / diag.centroid_before)
    } else {
        0.0
    };
    println!("task {task}");
    println!(
        "centroid distance: {:.4} -> {:.4} ({reduction:.2}% reduction)",
        diag.centroid_before, diag.centroid_after
    );
    println!(
        "feature displacement: mean {:.4}, median {:.4}",
        diag.mean_displacement, diag.median_displacement
    );
    Ok(diag)
}

/// One (station, hour-of-day) cell of the cross-year shift summary.
#[derive(Debug, Clone)]
pub struct ShiftCell {
    pub station_id: String,
    pub hour: u32,
    pub source_mean: f64,
    pub target_mean: f64,
    /// `target_mean - source_mean`.
    pub diff: f64,
}

/// Cross-year demand shift over the busiest common stations.
#[derive(Debug, Clone)]
pub struct ShiftSummary {
    pub cells: Vec<ShiftCell>,
    pub stations_used: usize,
    pub mean_abs_diff: f64,
}

fn hourly_profile(panel: &FeaturePanel) -> BTreeMap<&str, ([f64; 24], [f64; 24])> {
    let mut profiles: BTreeMap<&str, ([f64; 24], [f64; 24])> = BTreeMap::new();
    for record in &panel.records {
        let entry = profiles
            .entry(record.station_id.as_str())
            .or_insert(([0.0; 24], [0.0; 24]));
        let hour = record.t.hour() as usize;
        entry.0[hour] += record.demand;
        entry.1[hour] += 1.0;
    }
    profiles
}

/// Compares per-hour mean demand of the busiest common stations across the
/// source and target panels.
pub fn cmd_shift_summary(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<ShiftSummary> {
    let source = load_panel(config, data_dir, config.source_year)?;
    let target = load_panel(config, data_dir, config.target_year)?;
    let task = task_name(
        config.year_month(config.source_year)?,
        config.year_month(config.target_year)?,
    );

    let source_profiles = hourly_profile(&source);
    let target_profiles = hourly_profile(&target);

    // Busiest common stations by combined total demand, ties by id.
    let mut common: Vec<(&str, f64)> = source_profiles
        .iter()
        .filter_map(|(id, (sums, _))| {
            target_profiles.get(id).map(|(tsums, _)| {
                let total: f64 = sums.iter().sum::<f64>() + tsums.iter().sum::<f64>();
                (*id, total)
            })
        })
        .collect();
    if common.is_empty() {
        bail!("the panels share no stations");
    }
    common.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite totals").then(a.0.cmp(b.0)));
    if common.len() < config.shift_top_k {
        println!(
            "warning: only {} common stations available ({} requested)",
            common.len(),
            config.shift_top_k
        );
    }
    let selected = &common[..common.len().min(config.shift_top_k)];

    let mut cells = Vec::with_capacity(selected.len() * 24);
    let mut abs_sum = 0.0;
    for (id, _) in selected {
        let (s_sums, s_counts) = &source_profiles[id];
        let (t_sums, t_counts) = &target_profiles[id];
        for hour in 0..24 {
            let source_mean = if s_counts[hour] > 0.0 {
                s_sums[hour] / s_counts[hour]
            } else {
                0.0
            };
            let target_mean = if t_counts[hour] > 0.0 {
                t_sums[hour] / t_counts[hour]
            } else {
                0.0
            };
            let diff = target_mean - source_mean;
            abs_sum += diff.abs();
            cells.push(ShiftCell {
                station_id: id.to_string(),
                hour: hour as u32,
                source_mean,
                target_mean,
                diff,
            });
        }
    }
    let mean_abs_diff = abs_sum / cells.len() as f64;

    let cell_records: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.station_id.clone(),
                c.hour.to_string(),
                fmt_float(c.source_mean),
                fmt_float(c.target_mean),
                fmt_float(c.diff),
            ]
        })
        .collect();
    write_csv(
        &out.join("shift_cells.csv"),
        &["station_id", "hour", "source_mean", "target_mean", "diff"],
        &cell_records,
    )?;
    write_csv(
        &out.join("shift_summary.csv"),
        &["stations", "cells", "mean_abs_diff", "task"],
        &[vec![
            selected.len().to_string(),
            cells.len().to_string(),
            fmt_float(mean_abs_diff),
            task.clone(),
        ]],
    )?;

    println!(
        "task {task}: {} stations x 24 hours = {} cells, mean |demand shift| {:.4} trips",
        selected.len(),
        cells.len(),
        mean_abs_diff
    );
    Ok(ShiftSummary {
        cells,
        stations_used: selected.len(),
        mean_abs_diff,
    })
}

/// Builds a panel CSV cache from a raw trips CSV.
pub fn cmd_ingest(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    trips_path: &Path,
    year: i32,
) -> Result<PathBuf> {
    let Some(dir) = data_dir else {
        bail!("ingest needs a panel directory: pass --data-dir or set the data_dir config key");
    };
    let month = config.year_month(year)?;
    let file = File::open(trips_path)
        .with_context(|| format!("cannot open trips file {}", trips_path.display()))?;
    let ingest = ingest_trips(BufReader::new(file), month)
        .with_context(|| format!("ingesting {}", trips_path.display()))?;
    let panel = aggregate_station_hours(&ingest.trips)?;

    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = panel_path(dir, month);
    let mut bytes = Vec::new();
    panel.write_csv(&mut bytes)?;
    std::fs::write(&path, &bytes)
        .with_context(|| format!("cannot write panel file {}", path.display()))?;

    println!(
        "read {} rows ({} malformed), kept {} {month} trips, wrote {} station-hours to {}",
        ingest.rows_read,
        ingest.malformed,
        ingest.trips.len(),
        panel.len(),
        path.display()
    );
    Ok(path)
}

/// Materializes synthetic panels for every year of the multi-year range so
/// they can be inspected or re-read in csv mode.
pub fn cmd_synth(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let dir = data_dir.map(Path::to_path_buf).unwrap_or_else(|| out.to_path_buf());
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let scenario = config.scenario();
    let mut paths = Vec::new();
    for year in config.multiyear_start..=config.multiyear_end {
        let month = config.year_month(year)?;
        let panel = generate_drifted(&scenario, month, config.drift_level(year))?;
        let path = panel_path(&dir, month);
        let mut bytes = Vec::new();
        panel.write_csv(&mut bytes)?;
        std::fs::write(&path, &bytes)
            .with_context(|| format!("cannot write panel file {}", path.display()))?;
        println!("wrote {} ({} station-hours)", path.display(), panel.len());
        paths.push(path);
    }
    Ok(paths)
}
