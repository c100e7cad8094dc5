//! Flat key-value experiment configuration.
//!
//! The file format is one `key = value` pair per line, `#` comments, and
//! blank lines. Every key has a default, unknown keys are rejected, and
//! serializing then reloading a config reproduces it exactly.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use rotda_core::forest::ForestConfig;
use rotda_core::netgen::{GenLossWeights, GeneratorConfig};
use rotda_core::panel::{SplitConfig, YearMonth};
use rotda_core::pipeline::{MethodId, PipelineConfig};
use rotda_core::synth::SynthScenario;

/// Where panels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    /// Generate synthetic panels on the fly.
    Synth,
    /// Read cached `panel_YYYY-MM.csv` files from the data directory.
    Csv,
}

impl DataMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataMode::Synth => "synth",
            DataMode::Csv => "csv",
        }
    }
}

impl FromStr for DataMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synth" => Ok(DataMode::Synth),
            "csv" => Ok(DataMode::Csv),
            other => bail!("data mode must be 'synth' or 'csv', got '{other}'"),
        }
    }
}

/// Every knob of the benchmark suite, file-overridable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // Data source.
    pub data: DataMode,
    pub data_dir: Option<PathBuf>,
    /// Calendar month compared across years.
    pub month: u32,
    pub source_year: i32,
    pub target_year: i32,
    /// First and last year of the multi-year suite; also the origin of
    /// synthetic drift levels (a synthetic year `y` sits at drift level
    /// `y - multiyear_start`).
    pub multiyear_start: i32,
    pub multiyear_end: i32,
    // Sample sizes.
    pub n_source: usize,
    pub n_target_labeled: usize,
    pub n_target_unlabeled: usize,
    pub n_test: usize,
    pub labeled_days: u32,
    // Pipeline hyperparameters.
    pub target_weight: f64,
    pub eps_scale: f64,
    pub otda_eps_scale: f64,
    pub keep_mass: f64,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
    pub kmm_bound: f64,
    pub kmm_iters: usize,
    // Generator.
    pub gen_hidden: usize,
    pub gen_epochs: usize,
    pub gen_lr: f64,
    pub gen_weight_id: f64,
    pub gen_weight_label: f64,
    pub gen_weight_target: f64,
    // Forests.
    pub trees: usize,
    pub min_samples_leaf: usize,
    pub max_features_fraction: f64,
    pub bootstrap: bool,
    // Experiment control.
    pub seed: u64,
    pub methods: Vec<MethodId>,
    pub contamination_ratios: Vec<f64>,
    pub shift_top_k: usize,
    // Synthetic scenario.
    pub synth_stations: usize,
    pub synth_days: u32,
    pub synth_base_rate: f64,
    pub synth_shift: f64,
    pub synth_noise: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataMode::Synth,
            data_dir: None,
            month: 3,
            source_year: 2025,
            target_year: 2026,
            multiyear_start: 2021,
            multiyear_end: 2026,
            n_source: 1000,
            n_target_labeled: 500,
            n_target_unlabeled: 1000,
            n_test: 3000,
            labeled_days: 7,
            target_weight: 8.0,
            eps_scale: 0.1,
            otda_eps_scale: 0.01,
            keep_mass: 0.8,
            sinkhorn_max_iters: 1000,
            sinkhorn_tol: 1e-9,
            kmm_bound: 10.0,
            kmm_iters: 500,
            gen_hidden: 32,
            gen_epochs: 200,
            gen_lr: 1e-3,
            gen_weight_id: 0.1,
            gen_weight_label: 1.0,
            gen_weight_target: 1.0,
            trees: 300,
            min_samples_leaf: 3,
            max_features_fraction: 1.0,
            bootstrap: true,
            seed: 2026,
            methods: MethodId::MAIN.to_vec(),
            contamination_ratios: vec![0.0, 0.05, 0.10, 0.15, 0.20],
            shift_top_k: 30,
            synth_stations: 24,
            synth_days: 31,
            synth_base_rate: 3.0,
            synth_shift: 1.0,
            synth_noise: true,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow::anyhow!("config key '{key}': cannot parse '{value}': {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("config key '{key}': expected 'true' or 'false', got '{other}'"),
    }
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected 'key = value'", line_no + 1))?;
            config.apply(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Reads and parses a config file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("in config file {}", path.display()))
    }

    /// Sets one key; unknown keys are an error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = value.parse()?,
            "data_dir" => {
                self.data_dir = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "month" => self.month = parse_num(key, value)?,
            "source_year" => self.source_year = parse_num(key, value)?,
            "target_year" => self.target_year = parse_num(key, value)?,
            "multiyear_start" => self.multiyear_start = parse_num(key, value)?,
            "multiyear_end" => self.multiyear_end = parse_num(key, value)?,
            "n_source" => self.n_source = parse_num(key, value)?,
            "n_target_labeled" => self.n_target_labeled = parse_num(key, value)?,
            "n_target_unlabeled" => self.n_target_unlabeled = parse_num(key, value)?,
            "n_test" => self.n_test = parse_num(key, value)?,
            "labeled_days" => self.labeled_days = parse_num(key, value)?,
            "target_weight" => self.target_weight = parse_num(key, value)?,
            "eps_scale" => self.eps_scale = parse_num(key, value)?,
            "otda_eps_scale" => self.otda_eps_scale = parse_num(key, value)?,
            "keep_mass" => self.keep_mass = parse_num(key, value)?,
            "sinkhorn_max_iters" => self.sinkhorn_max_iters = parse_num(key, value)?,
            "sinkhorn_tol" => self.sinkhorn_tol = parse_num(key, value)?,
            "kmm_bound" => self.kmm_bound = parse_num(key, value)?,
            "kmm_iters" => self.kmm_iters = parse_num(key, value)?,
            "gen_hidden" => self.gen_hidden = parse_num(key, value)?,
            "gen_epochs" => self.gen_epochs = parse_num(key, value)?,
            "gen_lr" => self.gen_lr = parse_num(key, value)?,
            "gen_weight_id" => self.gen_weight_id = parse_num(key, value)?,
            "gen_weight_label" => self.gen_weight_label = parse_num(key, value)?,
            "gen_weight_target" => self.gen_weight_target = parse_num(key, value)?,
            "trees" => self.trees = parse_num(key, value)?,
            "min_samples_leaf" => self.min_samples_leaf = parse_num(key, value)?,
            "max_features_fraction" => self.max_features_fraction = parse_num(key, value)?,
            "bootstrap" => self.bootstrap = parse_bool(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "methods" => self.methods = parse_methods(value)?,
            "contamination_ratios" => {
                self.contamination_ratios = value
                    .split(',')
                    .map(|v| parse_num::<f64>(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "shift_top_k" => self.shift_top_k = parse_num(key, value)?,
            "synth_stations" => self.synth_stations = parse_num(key, value)?,
            "synth_days" => self.synth_days = parse_num(key, value)?,
            "synth_base_rate" => self.synth_base_rate = parse_num(key, value)?,
            "synth_shift" => self.synth_shift = parse_num(key, value)?,
            "synth_noise" => self.synth_noise = parse_bool(key, value)?,
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    /// Serializes every key in a stable order; `parse_str` inverts this.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        push("data", self.data.as_str().to_string());
        if let Some(dir) = &self.data_dir {
            push("data_dir", dir.display().to_string());
        }
        push("month", self.month.to_string());
        push("source_year", self.source_year.to_string());
        push("target_year", self.target_year.to_string());
        push("multiyear_start", self.multiyear_start.to_string());
        push("multiyear_end", self.multiyear_end.to_string());
        push("n_source", self.n_source.to_string());
        push("n_target_labeled", self.n_target_labeled.to_string());
        push("n_target_unlabeled", self.n_target_unlabeled.to_string());
        push("n_test", self.n_test.to_string());
        push("labeled_days", self.labeled_days.to_string());
        push("target_weight", self.target_weight.to_string());
        push("eps_scale", self.eps_scale.to_string());
        push("otda_eps_scale", self.otda_eps_scale.to_string());
        push("keep_mass", self.keep_mass.to_string());
        push("sinkhorn_max_iters", self.sinkhorn_max_iters.to_string());
        push("sinkhorn_tol", self.sinkhorn_tol.to_string());
        push("kmm_bound", self.kmm_bound.to_string());
        push("kmm_iters", self.kmm_iters.to_string());
        push("gen_hidden", self.gen_hidden.to_string());
        push("gen_epochs", self.gen_epochs.to_string());
        push("gen_lr", self.gen_lr.to_string());
        push("gen_weight_id", self.gen_weight_id.to_string());
        push("gen_weight_label", self.gen_weight_label.to_string());
        push("gen_weight_target", self.gen_weight_target.to_string());
        push("trees", self.trees.to_string());
        push("min_samples_leaf", self.min_samples_leaf.to_string());
        push(
            "max_features_fraction",
            self.max_features_fraction.to_string(),
        );
        push("bootstrap", self.bootstrap.to_string());
        push("seed", self.seed.to_string());
        push(
            "methods",
            self.methods
                .iter()
                .map(|m| m.label())
                .collect::<Vec<_>>()
                .join(","),
        );
        push(
            "contamination_ratios",
            self.contamination_ratios
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        push("shift_top_k", self.shift_top_k.to_string());
        push("synth_stations", self.synth_stations.to_string());
        push("synth_days", self.synth_days.to_string());
        push("synth_base_rate", self.synth_base_rate.to_string());
        push("synth_shift", self.synth_shift.to_string());
        push("synth_noise", self.synth_noise.to_string());
        out
    }

    /// Cross-field sanity checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if !(1..=12).contains(&self.month) {
            bail!("month must be 1..=12, got {}", self.month);
        }
        if !(self.keep_mass > 0.0 && self.keep_mass <= 1.0) {
            bail!("keep_mass must lie in (0, 1], got {}", self.keep_mass);
        }
        if self.methods.is_empty() {
            bail!("methods list cannot be empty");
        }
        for &r in &self.contamination_ratios {
            if !(0.0..=0.5).contains(&r) {
                bail!("contamination ratios must lie in [0, 0.5], got {r}");
            }
        }
        if self.shift_top_k == 0 {
            bail!("shift_top_k must be positive");
        }
        if self.multiyear_end < self.multiyear_start {
            bail!(
                "multiyear_end {} precedes multiyear_start {}",
                self.multiyear_end,
                self.multiyear_start
            );
        }
        Ok(())
    }

    /// The year-month of one benchmark year.
    pub fn year_month(&self, year: i32) -> Result<YearMonth> {
        Ok(YearMonth::new(year, self.month)?)
    }

    /// Drift level of a synthetic year: years count from `multiyear_start`.
    pub fn drift_level(&self, year: i32) -> f64 {
        (year - self.multiyear_start) as f64
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            n_source: self.n_source,
            n_target_labeled: self.n_target_labeled,
            n_target_unlabeled: self.n_target_unlabeled,
            n_test: self.n_test,
            labeled_days: self.labeled_days,
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            target_weight: self.target_weight,
            eps_scale: self.eps_scale,
            otda_eps_scale: self.otda_eps_scale,
            keep_mass: self.keep_mass,
            sinkhorn_max_iters: self.sinkhorn_max_iters,
            sinkhorn_tol: self.sinkhorn_tol,
            kmm_bound: self.kmm_bound,
            kmm_iters: self.kmm_iters,
            generator: GeneratorConfig {
                hidden: self.gen_hidden,
                epochs: self.gen_epochs,
                lr: self.gen_lr,
                weights: GenLossWeights {
                    id: self.gen_weight_id,
                    label: self.gen_weight_label,
                    target: self.gen_weight_target,
                },
                seed: 0,
            },
            forest: ForestConfig {
                n_trees: self.trees,
                min_samples_leaf: self.min_samples_leaf,
                max_features_fraction: self.max_features_fraction,
                bootstrap: self.bootstrap,
                seed: 0,
            },
        }
    }

    pub fn scenario(&self) -> SynthScenario {
        SynthScenario {
            n_stations: self.synth_stations,
            days: self.synth_days,
            base_rate: self.synth_base_rate,
            shift_strength: self.synth_shift,
            noise: self.synth_noise,
            seed: self.seed,
        }
    }
}

fn parse_methods(value: &str) -> Result<Vec<MethodId>> {
    let methods: Vec<MethodId> = value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<MethodId>().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        bail!("methods list cannot be empty");
    }
    Ok(methods)
}

/// Parses a comma-separated `--methods` override.
pub fn parse_method_list(value: &str) -> Result<Vec<MethodId>> {
    parse_methods(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_the_benchmark_settings() {
        let c = ExperimentConfig::default();
        assert_eq!(c.seed, 2026);
        assert_eq!(c.source_year, 2025);
        assert_eq!(c.target_year, 2026);
        assert_eq!(c.n_source, 1000);
        assert_eq!(c.n_target_labeled, 500);
        assert_eq!(c.n_test, 3000);
        assert_eq!(c.labeled_days, 7);
        assert_eq!(c.target_weight, 8.0);
        assert_eq!(c.eps_scale, 0.1);
        assert_eq!(c.keep_mass, 0.8);
        assert_eq!(c.gen_epochs, 200);
        assert_eq!(c.trees, 300);
        assert_eq!(c.methods.len(), 9);
        assert!(!c.methods.contains(&MethodId::Otda));
        assert_eq!(c.contamination_ratios, vec![0.0, 0.05, 0.10, 0.15, 0.20]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parses_overrides_comments_and_blanks() {
        let text = "\n# comment\nseed = 7\nkeep_mass=0.9\n  methods = gen_rotda, rotda \n\ndata = csv\ndata_dir = /tmp/panels\n";
        let c = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.keep_mass, 0.9);
        assert_eq!(c.methods, vec![MethodId::GenRotda, MethodId::Rotda]);
        assert_eq!(c.data, DataMode::Csv);
        assert_eq!(c.data_dir, Some(PathBuf::from("/tmp/panels")));
        // Untouched keys keep their defaults.
        assert_eq!(c.n_source, 1000);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse_str("no_such_key = 1")
            .unwrap_err()
            .to_string()
            .contains("unknown config key"));
        assert!(ExperimentConfig::parse_str("seed = banana").is_err());
        assert!(ExperimentConfig::parse_str("bootstrap = yes").is_err());
        assert!(ExperimentConfig::parse_str("methods = warp_drive").is_err());
        assert!(ExperimentConfig::parse_str("month = 13").is_err());
        assert!(ExperimentConfig::parse_str("keep_mass = 0").is_err());
        assert!(ExperimentConfig::parse_str("contamination_ratios = 0.6").is_err());
        assert!(ExperimentConfig::parse_str("just a line").is_err());
    }

    #[test]
    fn serialize_then_parse_round_trips() {
        let mut c = ExperimentConfig::default();
        c.seed = 99;
        c.data = DataMode::Csv;
        c.data_dir = Some(PathBuf::from("/data/panels"));
        c.methods = vec![MethodId::AnchorOnly, MethodId::GenRotda];
        c.contamination_ratios = vec![0.0, 0.125];
        c.sinkhorn_tol = 3.5e-10;
        let back = ExperimentConfig::parse_str(&c.serialize()).unwrap();
        assert_eq!(c, back);
    }

    proptest! {
        #[test]
        fn round_trip_holds_for_arbitrary_settings(
            seed in any::<u64>(),
            keep_mass in 0.01f64..=1.0,
            eps in 1e-6f64..10.0,
            tw in 0.5f64..64.0,
            trees in 1usize..500,
            ratio in 0.0f64..=0.5,
        ) {
            let mut c = ExperimentConfig::default();
            c.seed = seed;
            c.keep_mass = keep_mass;
            c.eps_scale = eps;
            c.target_weight = tw;
            c.trees = trees;
            c.contamination_ratios = vec![0.0, ratio];
            let back = ExperimentConfig::parse_str(&c.serialize()).unwrap();
            prop_assert_eq!(c, back);
        }
    }
}
