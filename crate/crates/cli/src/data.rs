//! Panel loading: synthetic generation or cached CSV files.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rotda_core::panel::{read_panel_csv, FeaturePanel, YearMonth};
use rotda_core::synth::generate_drifted;

use crate::config::{DataMode, ExperimentConfig};

/// Environment variable naming the panel directory; the `--data-dir` flag
/// takes precedence over it, and it takes precedence over the config key.
pub const DATA_DIR_ENV: &str = "ROTDA_DATA_DIR";

/// Resolves the panel directory from flag > environment > config key.
pub fn resolve_data_dir(flag: Option<&Path>, config: &ExperimentConfig) -> Option<PathBuf> {
    if let Some(dir) = flag {
        return Some(dir.to_path_buf());
    }
    if let Ok(value) = std::env::var(DATA_DIR_ENV) {
        if !value.is_empty() {
            return Some(PathBuf::from(value));
        }
    }
    config.data_dir.clone()
}

/// Canonical cache filename for one month's panel.
pub fn panel_path(dir: &Path, month: YearMonth) -> PathBuf {
    dir.join(format!("panel_{month}.csv"))
}

/// Loads the panel for one benchmark year, honoring the data mode.
pub fn load_panel(
    config: &ExperimentConfig,
    data_dir: Option<&Path>,
    year: i32,
) -> Result<FeaturePanel> {
    let month = config.year_month(year)?;
    match config.data {
        DataMode::Synth => {
            let panel = generate_drifted(&config.scenario(), month, config.drift_level(year))
                .with_context(|| format!("generating the synthetic {month} panel"))?;
            Ok(panel)
        }
        DataMode::Csv => {
            let Some(dir) = data_dir else {
                bail!(
                    "data = csv needs a panel directory: pass --data-dir, set {DATA_DIR_ENV}, \
                     or put data_dir in the config file"
                );
            };
            let path = panel_path(dir, month);
            if !path.exists() {
                bail!(
                    "panel file {} not found; build it with \
                     `rotda ingest --trips <raw-trips.csv> --year {}` or switch to data = synth",
                    path.display(),
                    year
                );
            }
            let file = File::open(&path)
                .with_context(|| format!("cannot open panel file {}", path.display()))?;
            let panel = read_panel_csv(BufReader::new(file))
                .with_context(|| format!("cannot parse panel file {}", path.display()))?;
            Ok(panel)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rotda_core::panel::make_split;

    fn synth_config() -> ExperimentConfig {
        ExperimentConfig {
            synth_stations: 5,
            synth_days: 10,
            n_source: 50,
            n_target_labeled: 30,
            n_target_unlabeled: 50,
            n_test: 60,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn synth_mode_generates_distinct_year_panels() {
        let config = synth_config();
        let source = load_panel(&config, None, config.source_year).unwrap();
        let target = load_panel(&config, None, config.target_year).unwrap();
        assert!(!source.is_empty());
        assert!(!target.is_empty());
        assert_ne!(
            source.demand().sum(),
            target.demand().sum(),
            "different drift levels and noise streams must differ"
        );
        // The panels feed a split without issue.
        make_split(&source, &target, &config.split_config(), config.seed).unwrap();
    }

    #[test]
    fn csv_mode_round_trips_through_the_cache_file() {
        let config = synth_config();
        let panel = load_panel(&config, None, config.source_year).unwrap();

        let dir = std::env::temp_dir().join(format!("rotda_data_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let month = config.year_month(config.source_year).unwrap();
        let path = panel_path(&dir, month);
        let mut bytes = Vec::new();
        panel.write_csv(&mut bytes).unwrap();
        std::fs::write(&path, &bytes).unwrap();

        let mut csv_config = config.clone();
        csv_config.data = DataMode::Csv;
        let loaded = load_panel(&csv_config, Some(&dir), config.source_year).unwrap();
        assert_eq!(panel.records, loaded.records);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_mode_errors_are_actionable() {
        let mut config = synth_config();
        config.data = DataMode::Csv;

        let err = load_panel(&config, None, 2025).unwrap_err().to_string();
        assert!(err.contains("--data-dir"), "{err}");

        let missing = std::env::temp_dir().join("rotda_missing_panels");
        std::fs::create_dir_all(&missing).unwrap();
        let err = load_panel(&config, Some(&missing), 2025)
            .unwrap_err()
            .to_string();
        assert!(err.contains("panel_2025-03.csv"), "{err}");
        assert!(err.contains("rotda ingest"), "{err}");
    }

    #[test]
    fn directory_precedence_is_flag_then_env_then_config() {
        let mut config = synth_config();
        config.data_dir = Some(PathBuf::from("/from/config"));
        let flag = PathBuf::from("/from/flag");
        assert_eq!(
            resolve_data_dir(Some(&flag), &config),
            Some(PathBuf::from("/from/flag"))
        );
        assert_eq!(
            resolve_data_dir(None, &config),
            Some(PathBuf::from("/from/config"))
        );

        // The environment variable sits between the flag and the config key.
        // This is the only test touching it, so set/remove stays race-free.
        std::env::set_var(DATA_DIR_ENV, "/from/env");
        assert_eq!(
            resolve_data_dir(Some(&flag), &config),
            Some(PathBuf::from("/from/flag"))
        );
        assert_eq!(
            resolve_data_dir(None, &config),
            Some(PathBuf::from("/from/env"))
        );
        std::env::remove_var(DATA_DIR_ENV);
        assert_eq!(
            resolve_data_dir(None, &config),
            Some(PathBuf::from("/from/config"))
        );
    }
}
