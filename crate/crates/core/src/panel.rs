//! Trip ingestion and station-hour panel engineering.
//!
//! Raw trip logs are aggregated into one row per station and hour, with
//! calendar/geography "anchor" features and demand-history "transfer"
//! features. Hours with no trips inside a station's active window become
//! explicit zero-demand rows, so lags and rolling means are well defined
//! everywhere.
//!
//! The module also owns the source/target domain split used by every
//! benchmark method, the log/standardize transform applied to transfer
//! features, and the synthetic contamination used by robustness sweeps.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, Timelike};
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Number of anchor (calendar/geography) features.
pub const ANCHOR_DIM: usize = 7;
/// Number of transfer (demand-history) features.
pub const TRANSFER_DIM: usize = 4;

/// Timestamp format used by trip logs and panel caches.
pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// A calendar month, e.g. `2025-03`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParam(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    /// Number of days in the month, accounting for leap years.
    pub fn days_in_month(&self) -> u32 {
        match self.month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            2 => {
                let y = self.year;
                if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 {
                    29
                } else {
                    28
                }
            }
            _ => unreachable!("validated at construction"),
        }
    }
}

impl std::fmt::Display for YearMonth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidParam(format!("expected YYYY-MM, got `{s}`")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad year in `{s}`")))?;
        let month: u32 = m
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad month in `{s}`")))?;
        YearMonth::new(year, month)
    }
}

/// Who rode: subscription member or casual rider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiderType {
    Member,
    Casual,
    Unknown,
}

/// What was ridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BikeType {
    Classic,
    Electric,
    Unknown,
}

/// One trip start parsed from a trip log.
#[derive(Debug, Clone)]
pub struct TripRecord {
    pub station_id: String,
    pub lat: f64,
    pub lng: f64,
    pub started_at: NaiveDateTime,
    pub rider: RiderType,
    pub bike: BikeType,
}

/// Result of parsing a trip log: the in-month trips plus parse statistics.
#[derive(Debug)]
pub struct IngestResult {
    pub trips: Vec<TripRecord>,
    /// Data rows seen in the file (excluding the header).
    pub rows_read: usize,
    /// Rows skipped because a required field failed to parse.
    pub malformed: usize,
}

/// Columns a trip log must provide.
const TRIP_COLUMNS: [&str; 7] = [
    "ride_id",
    "started_at",
    "start_station_id",
    "start_lat",
    "start_lng",
    "member_casual",
    "rideable_type",
];

/// Parses a trip CSV, keeping only trips that start inside `month`.
///
/// Rows with unparseable timestamps or coordinates, out-of-range
/// coordinates, or an empty station id are counted as malformed and skipped;
/// unrecognized rider or bike labels fall back to `Unknown` without
/// discarding the row. A header missing any required column is a schema
/// error naming that column, and a month with zero surviving trips is an
/// error rather than an empty panel.
pub fn ingest_trips<R: Read>(reader: R, month: YearMonth) -> Result<IngestResult> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let mut col = [usize::MAX; TRIP_COLUMNS.len()];
    for (k, name) in TRIP_COLUMNS.iter().enumerate() {
        col[k] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| Error::MissingColumn((*name).to_string()))?;
    }
    let [_, c_time, c_station, c_lat, c_lng, c_rider, c_bike] = col;

    let mut trips = Vec::new();
    let mut rows_read = 0usize;
    let mut malformed = 0usize;
    for record in csv_reader.records() {
        let record = record?;
        rows_read += 1;
        let parsed = (|| -> Option<TripRecord> {
            let started_at =
                NaiveDateTime::parse_from_str(record.get(c_time)?, "%Y-%m-%d %H:%M:%S%.f").ok()?;
            let station_id = record.get(c_station)?.trim();
            if station_id.is_empty() {
                return None;
            }
            let lat: f64 = record.get(c_lat)?.trim().parse().ok()?;
            let lng: f64 = record.get(c_lng)?.trim().parse().ok()?;
            if !lat.is_finite() || !lng.is_finite() || lat.abs() > 90.0 || lng.abs() > 180.0 {
                return None;
            }
            let rider = match record.get(c_rider)?.trim() {
                "member" => RiderType::Member,
                "casual" => RiderType::Casual,
                _ => RiderType::Unknown,
            };
            let bike = match record.get(c_bike)?.trim() {
                "classic_bike" => BikeType::Classic,
                "electric_bike" => BikeType::Electric,
                _ => BikeType::Unknown,
            };
            Some(TripRecord {
                station_id: station_id.to_string(),
                lat,
                lng,
                started_at,
                rider,
                bike,
            })
        })();
        match parsed {
            Some(trip) => {
                if trip.started_at.year() == month.year && trip.started_at.month() == month.month {
                    trips.push(trip);
                }
            }
            None => malformed += 1,
        }
    }
    if trips.is_empty() {
        return Err(Error::Empty(format!("no trips found for {month}")));
    }
    Ok(IngestResult {
        trips,
        rows_read,
        malformed,
    })
}

/// One aggregated station-hour observation with engineered features.
#[derive(Debug, Clone, PartialEq)]
pub struct StationHourRecord {
    pub station_id: String,
    pub lat: f64,
    pub lng: f64,
    pub t: NaiveDateTime,
    /// Trip starts in this station-hour.
    pub demand: f64,
    pub hour_sin: f64,
    pub hour_cos: f64,
    pub dow_sin: f64,
    pub dow_cos: f64,
    /// 1.0 on Saturday/Sunday, else 0.0.
    pub is_weekend: f64,
    /// Demand one hour earlier (0 before the station's first active hour).
    pub lag_1h: f64,
    /// Demand 24 hours earlier.
    pub lag_24h: f64,
    /// Mean demand over the trailing 24 hours `[t-24h, t-1h]`.
    pub rolling_24h_mean: f64,
    /// Mean demand over the trailing 168 hours `[t-168h, t-1h]`.
    pub rolling_168h_mean: f64,
}

impl StationHourRecord {
    /// Calendar/geography features used by the anchor model.
    pub fn anchor_row(&self) -> [f64; ANCHOR_DIM] {
        [
            self.hour_sin,
            self.hour_cos,
            self.dow_sin,
            self.dow_cos,
            self.is_weekend,
            self.lat,
            self.lng,
        ]
    }

    /// Demand-history features used by the transfer models (raw scale).
    pub fn transfer_row(&self) -> [f64; TRANSFER_DIM] {
        [
            self.lag_1h,
            self.lag_24h,
            self.rolling_24h_mean,
            self.rolling_168h_mean,
        ]
    }

    /// Day of month of this observation.
    pub fn day_of_month(&self) -> u32 {
        self.t.day()
    }
}

/// A fully engineered station-hour panel, ordered by station id then time.
#[derive(Debug, Clone, Default)]
pub struct FeaturePanel {
    pub records: Vec<StationHourRecord>,
}

impl FeaturePanel {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Anchor feature matrix, `n x` [`ANCHOR_DIM`].
    pub fn anchor_features(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.len(), ANCHOR_DIM));
        for (i, r) in self.records.iter().enumerate() {
            out.row_mut(i)
                .assign(&ndarray::ArrayView1::from(&r.anchor_row()[..]));
        }
        out
    }

    /// Raw (unstandardized) transfer feature matrix, `n x` [`TRANSFER_DIM`].
    pub fn transfer_features_raw(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.len(), TRANSFER_DIM));
        for (i, r) in self.records.iter().enumerate() {
            out.row_mut(i)
                .assign(&ndarray::ArrayView1::from(&r.transfer_row()[..]));
        }
        out
    }

    /// Demand vector.
    pub fn demand(&self) -> Array1<f64> {
        Array1::from_iter(self.records.iter().map(|r| r.demand))
    }

    /// Writes the panel as a CSV cache; see [`read_panel_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PANEL_COLUMNS)?;
        for r in &self.records {
            w.write_record(&[
                r.station_id.clone(),
                format!("{}", r.lat),
                format!("{}", r.lng),
                r.t.format(TIME_FORMAT).to_string(),
                format!("{}", r.demand),
                format!("{}", r.hour_sin),
                format!("{}", r.hour_cos),
                format!("{}", r.dow_sin),
                format!("{}", r.dow_cos),
                format!("{}", r.is_weekend),
                format!("{}", r.lag_1h),
                format!("{}", r.lag_24h),
                format!("{}", r.rolling_24h_mean),
                format!("{}", r.rolling_168h_mean),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column order of the panel CSV cache.
pub const PANEL_COLUMNS: [&str; 14] = [
    "station_id",
    "lat",
    "lng",
    "t",
    "demand",
    "hour_sin",
    "hour_cos",
    "dow_sin",
    "dow_cos",
    "is_weekend",
    "lag_1h",
    "lag_24h",
    "rolling_24h_mean",
    "rolling_168h_mean",
];

/// Reads a panel CSV cache produced by [`FeaturePanel::write_csv`].
pub fn read_panel_csv<R: Read>(reader: R) -> Result<FeaturePanel> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    for name in PANEL_COLUMNS {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let idx: Vec<usize> = PANEL_COLUMNS
        .iter()
        .map(|name| headers.iter().position(|h| h == *name).expect("checked"))
        .collect();
    let mut records = Vec::new();
    for (line, record) in csv_reader.records().enumerate() {
        let record = record?;
        let field = |k: usize| -> Result<&str> {
            record
                .get(idx[k])
                .ok_or_else(|| Error::InvalidParam(format!("panel row {line} is short")))
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?.parse::<f64>().map_err(|_| {
                Error::InvalidParam(format!(
                    "panel row {line}: bad number in column {}",
                    PANEL_COLUMNS[k]
                ))
            })
        };
        let t = NaiveDateTime::parse_from_str(field(3)?, TIME_FORMAT).map_err(|_| {
            Error::InvalidParam(format!("panel row {line}: bad timestamp `{}`", field(3).unwrap_or("")))
        })?;
        records.push(StationHourRecord {
            station_id: field(0)?.to_string(),
            lat: num(1)?,
            lng: num(2)?,
            t,
            demand: num(4)?,
            hour_sin: num(5)?,
            hour_cos: num(6)?,
            dow_sin: num(7)?,
            dow_cos: num(8)?,
            is_weekend: num(9)?,
            lag_1h: num(10)?,
            lag_24h: num(11)?,
            rolling_24h_mean: num(12)?,
            rolling_168h_mean: num(13)?,
        });
    }
    if records.is_empty() {
        return Err(Error::Empty("panel csv has no rows".into()));
    }
    Ok(FeaturePanel { records })
}

/// Aggregates trips into a station-hour panel.
///
/// For every station the active window runs from its first to its last trip
/// hour, and every hour in between becomes a row (zero demand if no trips).
/// Hours outside the window count as zero demand for lag and rolling-mean
/// lookups. Station coordinates are the mean of the trip coordinates. Rows
/// are ordered by station id, then hour.
pub fn aggregate_station_hours(trips: &[TripRecord]) -> Result<FeaturePanel> {
    if trips.is_empty() {
        return Err(Error::Empty("no trips to aggregate".into()));
    }

    struct Accum {
        lat_sum: f64,
        lng_sum: f64,
        n: f64,
        counts: BTreeMap<i64, f64>,
    }

    let mut stations: BTreeMap<&str, Accum> = BTreeMap::new();
    for trip in trips {
        let hour = trip.started_at.and_utc().timestamp().div_euclid(3600);
        let acc = stations.entry(trip.station_id.as_str()).or_insert(Accum {
            lat_sum: 0.0,
            lng_sum: 0.0,
            n: 0.0,
            counts: BTreeMap::new(),
        });
        acc.lat_sum += trip.lat;
        acc.lng_sum += trip.lng;
        acc.n += 1.0;
        *acc.counts.entry(hour).or_insert(0.0) += 1.0;
    }

    let mut records = Vec::new();
    for (station_id, acc) in &stations {
        let first = *acc.counts.keys().next().expect("non-empty");
        let last = *acc.counts.keys().next_back().expect("non-empty");
        let len = (last - first + 1) as usize;
        let mut demand = vec![0.0_f64; len];
        for (&h, &c) in &acc.counts {
            demand[(h - first) as usize] = c;
        }
        // prefix[i] = sum of demand[0..i]
        let mut prefix = vec![0.0_f64; len + 1];
        for i in 0..len {
            prefix[i + 1] = prefix[i] + demand[i];
        }
        let window_sum = |lo: i64, hi: i64| -> f64 {
            // Sum of demand over absolute hours [lo, hi], clamped to the
            // station's active window; hours outside contribute zero.
            let lo_idx = (lo - first).max(0);
            let hi_idx = (hi - first).min(len as i64 - 1);
            if hi_idx < lo_idx {
                0.0
            } else {
                prefix[(hi_idx + 1) as usize] - prefix[lo_idx as usize]
            }
        };
        let lat = acc.lat_sum / acc.n;
        let lng = acc.lng_sum / acc.n;
        for offset in 0..len {
            let h = first + offset as i64;
            let t = DateTime::from_timestamp(h * 3600, 0)
                .expect("hour index within chrono range")
                .naive_utc();
            let hour = t.hour() as f64;
            let dow = t.weekday().num_days_from_monday() as f64;
            let two_pi = std::f64::consts::TAU;
            records.push(StationHourRecord {
                station_id: (*station_id).to_string(),
                lat,
                lng,
                t,
                demand: demand[offset],
                hour_sin: (two_pi * hour / 24.0).sin(),
                hour_cos: (two_pi * hour / 24.0).cos(),
                dow_sin: (two_pi * dow / 7.0).sin(),
                dow_cos: (two_pi * dow / 7.0).cos(),
                is_weekend: if dow >= 5.0 { 1.0 } else { 0.0 },
                lag_1h: window_sum(h - 1, h - 1),
                lag_24h: window_sum(h - 24, h - 24),
                rolling_24h_mean: window_sum(h - 24, h - 1) / 24.0,
                rolling_168h_mean: window_sum(h - 168, h - 1) / 168.0,
            });
        }
    }
    Ok(FeaturePanel { records })
}

/// Smallest admissible per-column standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Log-scale standardization of transfer features.
///
/// Features are mapped through `log(1 + x)` and then centred/scaled per
/// column with population statistics fitted on the pooled source and
/// target-unlabeled samples.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mu: Array1<f64>,
    pub sigma: Array1<f64>,
    /// Columns whose standard deviation hit [`SIGMA_FLOOR`] (constant
    /// columns); transforms still work but carry no information there.
    pub clamped_columns: Vec<usize>,
}

impl Standardizer {
    /// Fits on the vertical concatenation of two raw feature matrices.
    pub fn fit(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(Error::DimMismatch(format!(
                "standardizer inputs have {} and {} columns",
                a.ncols(),
                b.ncols()
            )));
        }
        let n = a.nrows() + b.nrows();
        if n == 0 {
            return Err(Error::Empty("standardizer sample".into()));
        }
        let d = a.ncols();
        let mut mu = Array1::zeros(d);
        let mut sigma = Array1::zeros(d);
        let mut clamped = Vec::new();
        for c in 0..d {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &v in a.column(c).iter().chain(b.column(c).iter()) {
                let lv = v.ln_1p();
                sum += lv;
                sum_sq += lv * lv;
            }
            let mean = sum / n as f64;
            let var = (sum_sq / n as f64 - mean * mean).max(0.0);
            let mut sd = var.sqrt();
            if sd < SIGMA_FLOOR {
                sd = SIGMA_FLOOR;
                clamped.push(c);
            }
            mu[c] = mean;
            sigma[c] = sd;
        }
        Ok(Self {
            mu,
            sigma,
            clamped_columns: clamped,
        })
    }

    /// `(log(1 + x) - mu) / sigma`, column-wise.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mu.len() {
            return Err(Error::DimMismatch(format!(
                "standardizer fitted on {} columns, got {}",
                self.mu.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            let mu = self.mu[c];
            let sd = self.sigma[c];
            col.mapv_inplace(|v| (v.ln_1p() - mu) / sd);
        }
        Ok(out)
    }

    /// Inverse of [`Standardizer::transform`]: `exp(v * sigma + mu) - 1`.
    pub fn inverse(&self, v: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if v.ncols() != self.mu.len() {
            return Err(Error::DimMismatch(format!(
                "standardizer fitted on {} columns, got {}",
                self.mu.len(),
                v.ncols()
            )));
        }
        let mut out = v.to_owned();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            let mu = self.mu[c];
            let sd = self.sigma[c];
            col.mapv_inplace(|z| (z * sd + mu).exp_m1());
        }
        Ok(out)
    }
}

/// Requested pool sizes for [`make_split`].
#[derive(Debug, Clone)]
pub struct SplitConfig {
    pub n_source: usize,
    pub n_target_labeled: usize,
    pub n_target_unlabeled: usize,
    pub n_test: usize,
    /// Target rows from the first `labeled_days` calendar days may be
    /// labeled; test rows start the day after.
    pub labeled_days: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_source: 1000,
            n_target_labeled: 500,
            n_target_unlabeled: 1000,
            n_test: 3000,
            labeled_days: 7,
        }
    }
}

/// Requested vs actually drawn size of one pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSize {
    pub requested: usize,
    pub actual: usize,
}

/// Realized pool sizes plus data-sufficiency flags.
#[derive(Debug, Clone)]
pub struct SplitSizes {
    pub source: PoolSize,
    pub target_labeled: PoolSize,
    pub target_unlabeled: PoolSize,
    pub target_test: PoolSize,
    /// True when the target month offers fewer distinct labeled days than
    /// requested, so the labeled pool covers a shorter span.
    pub labeled_day_span_short: bool,
}

/// A labeled sample: features plus ground-truth demand.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    /// Standardized transfer features, `n x` [`TRANSFER_DIM`].
    pub transfer: Array2<f64>,
    /// Anchor features, `n x` [`ANCHOR_DIM`].
    pub anchor: Array2<f64>,
    /// Raw demand counts.
    pub demand: Array1<f64>,
    /// `log(1 + demand)`.
    pub log_demand: Array1<f64>,
}

impl LabeledPool {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }
}

/// The sampled source/target pools shared by all benchmark methods.
#[derive(Debug, Clone)]
pub struct DomainSplit {
    pub source_labeled: LabeledPool,
    pub target_labeled: LabeledPool,
    /// Standardized transfer features of unlabeled target rows.
    pub target_unlabeled: Array2<f64>,
    pub target_test: LabeledPool,
    pub standardizer: Standardizer,
    pub sizes: SplitSizes,
    /// Seed the split was drawn with.
    pub seed: u64,
}

/// Draws `k` distinct indices from `0..n` (sorted ascending) with a partial
/// Fisher-Yates shuffle.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.random_range(0..(n - i));
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

fn build_pool(
    panel: &FeaturePanel,
    indices: &[usize],
    standardizer: &Standardizer,
) -> Result<LabeledPool> {
    let mut anchor = Array2::zeros((indices.len(), ANCHOR_DIM));
    let mut transfer_raw = Array2::zeros((indices.len(), TRANSFER_DIM));
    let mut demand = Array1::zeros(indices.len());
    for (row, &i) in indices.iter().enumerate() {
        let r = &panel.records[i];
        anchor
            .row_mut(row)
            .assign(&ndarray::ArrayView1::from(&r.anchor_row()[..]));
        transfer_raw
            .row_mut(row)
            .assign(&ndarray::ArrayView1::from(&r.transfer_row()[..]));
        demand[row] = r.demand;
    }
    let transfer = standardizer.transform(transfer_raw.view())?;
    let log_demand = demand.mapv(f64::ln_1p);
    Ok(LabeledPool {
        transfer,
        anchor,
        demand,
        log_demand,
    })
}

/// Samples the benchmark pools from a source panel and a target panel.
///
/// Pools are drawn without replacement from independent random streams of
/// `seed`: source rows from the whole source panel, labeled target rows from
/// the first `labeled_days` calendar days of the target month, unlabeled
/// target rows from the whole target panel, and test rows from day
/// `labeled_days + 1` onward (guaranteeing the labeled/test day ranges never
/// overlap). The transfer standardizer is fitted on the drawn source and
/// unlabeled rows only — never on labels or test rows. Requested sizes are
/// clamped to availability and recorded in [`SplitSizes`].
pub fn make_split(
    source: &FeaturePanel,
    target: &FeaturePanel,
    config: &SplitConfig,
    seed: u64,
) -> Result<DomainSplit> {
    if config.labeled_days == 0 {
        return Err(Error::InvalidParam("labeled_days must be positive".into()));
    }
    if source.is_empty() || target.is_empty() {
        return Err(Error::Empty("panel for splitting".into()));
    }

    let labeled_candidates: Vec<usize> = (0..target.len())
        .filter(|&i| target.records[i].day_of_month() <= config.labeled_days)
        .collect();
    let test_candidates: Vec<usize> = (0..target.len())
        .filter(|&i| target.records[i].day_of_month() > config.labeled_days)
        .collect();
    if labeled_candidates.is_empty() {
        return Err(Error::Empty(format!(
            "target panel has no rows in the first {} days",
            config.labeled_days
        )));
    }
    if test_candidates.is_empty() {
        return Err(Error::Empty(format!(
            "target panel has no rows after day {}",
            config.labeled_days
        )));
    }

    let mut distinct_labeled_days: Vec<u32> = labeled_candidates
        .iter()
        .map(|&i| target.records[i].day_of_month())
        .collect();
    distinct_labeled_days.sort_unstable();
    distinct_labeled_days.dedup();
    let labeled_day_span_short = (distinct_labeled_days.len() as u32) < config.labeled_days;

    // Independent streams per pool keep each draw stable under changes to
    // the other pool sizes.
    let mut rng_source = ChaCha8Rng::seed_from_u64(seed);
    rng_source.set_stream(0);
    let mut rng_labeled = ChaCha8Rng::seed_from_u64(seed);
    rng_labeled.set_stream(1);
    let mut rng_unlabeled = ChaCha8Rng::seed_from_u64(seed);
    rng_unlabeled.set_stream(2);
    let mut rng_test = ChaCha8Rng::seed_from_u64(seed);
    rng_test.set_stream(3);

    let source_idx = sample_indices(&mut rng_source, source.len(), config.n_source);
    let labeled_pick = sample_indices(
        &mut rng_labeled,
        labeled_candidates.len(),
        config.n_target_labeled,
    );
    let labeled_idx: Vec<usize> = labeled_pick.iter().map(|&k| labeled_candidates[k]).collect();
    let unlabeled_idx = sample_indices(&mut rng_unlabeled, target.len(), config.n_target_unlabeled);
    let test_pick = sample_indices(&mut rng_test, test_candidates.len(), config.n_test);
    let test_idx: Vec<usize> = test_pick.iter().map(|&k| test_candidates[k]).collect();

    // Standardizer sees only raw source and unlabeled-target transfer rows.
    let mut src_raw = Array2::zeros((source_idx.len(), TRANSFER_DIM));
    for (row, &i) in source_idx.iter().enumerate() {
        src_raw
            .row_mut(row)
            .assign(&ndarray::ArrayView1::from(&source.records[i].transfer_row()[..]));
    }
    let mut unl_raw = Array2::zeros((unlabeled_idx.len(), TRANSFER_DIM));
    for (row, &i) in unlabeled_idx.iter().enumerate() {
        unl_raw
            .row_mut(row)
            .assign(&ndarray::ArrayView1::from(&target.records[i].transfer_row()[..]));
    }
    let standardizer = Standardizer::fit(src_raw.view(), unl_raw.view())?;

    let source_labeled = build_pool(source, &source_idx, &standardizer)?;
    let target_labeled = build_pool(target, &labeled_idx, &standardizer)?;
    let target_test = build_pool(target, &test_idx, &standardizer)?;
    let target_unlabeled = standardizer.transform(unl_raw.view())?;

    let sizes = SplitSizes {
        source: PoolSize {
            requested: config.n_source,
            actual: source_idx.len(),
        },
        target_labeled: PoolSize {
            requested: config.n_target_labeled,
            actual: labeled_idx.len(),
        },
        target_unlabeled: PoolSize {
            requested: config.n_target_unlabeled,
            actual: unlabeled_idx.len(),
        },
        target_test: PoolSize {
            requested: config.n_test,
            actual: test_idx.len(),
        },
        labeled_day_span_short,
    };

    Ok(DomainSplit {
        source_labeled,
        target_labeled,
        target_unlabeled,
        target_test,
        standardizer,
        sizes,
        seed,
    })
}

/// Range of the uniform coordinate noise used for contaminated rows.
pub const CONTAMINATION_RANGE: f64 = 6.0;

/// Replaces a fraction of unlabeled target rows with uniform noise in
/// standardized feature space.
///
/// Exactly `floor(ratio * n)` rows (chosen without replacement) get every
/// coordinate redrawn from `U[-6, 6]`. `ratio` must lie in `[0, 0.5]`;
/// `ratio = 0` returns the split unchanged.
pub fn inject_contamination(split: &DomainSplit, ratio: f64, seed: u64) -> Result<DomainSplit> {
    if !(0.0..=0.5).contains(&ratio) {
        return Err(Error::InvalidParam(format!(
            "contamination ratio must lie in [0, 0.5], got {ratio}"
        )));
    }
    let mut out = split.clone();
    if ratio == 0.0 {
        return Ok(out);
    }
    let n = split.target_unlabeled.nrows();
    let k = (ratio * n as f64).floor() as usize;
    if k == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = sample_indices(&mut rng, n, k);
    for &i in &rows {
        for c in 0..split.target_unlabeled.ncols() {
            out.target_unlabeled[(i, c)] =
                rng.random::<f64>() * 2.0 * CONTAMINATION_RANGE - CONTAMINATION_RANGE;
        }
    }
    Ok(out)
}
