//! Synthetic trip generation with controllable year-over-year drift, plus an
//! exact small-instance transport solver used to validate the entropic one.
//!
//! Each synthetic station has a diurnal rate curve with morning and evening
//! peaks, a popularity level, and a weekend discount. Yearly drift moves
//! peak positions, rescales popularity per station, and applies mild global
//! growth; drift directions are fixed per station so consecutive years drift
//! consistently. At `shift_strength = 0` every year shares one generating
//! process.

use chrono::{Datelike, NaiveDate};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::panel::{aggregate_station_hours, BikeType, FeaturePanel, RiderType, TripRecord, YearMonth};
use crate::{Error, Result};

/// Month used for the canonical two-domain scenario (source year).
pub const SOURCE_MONTH: YearMonth = YearMonth {
    year: 2025,
    month: 3,
};
/// Month used for the canonical two-domain scenario (target year).
pub const TARGET_MONTH: YearMonth = YearMonth {
    year: 2026,
    month: 3,
};

/// Parameters of the synthetic demand world.
#[derive(Debug, Clone)]
pub struct SynthScenario {
    /// Number of stations.
    pub n_stations: usize,
    /// Days of trips generated per month (clamped to the month length).
    pub days: u32,
    /// Global demand scale (expected trips per hour at a typical station
    /// during an average hour).
    pub base_rate: f64,
    /// Strength of per-unit-drift distribution shift; 0 disables all drift.
    pub shift_strength: f64,
    /// Draw Poisson counts when true; otherwise use deterministic rounding
    /// of the rate curve.
    pub noise: bool,
    /// Seed for station parameters, drift directions, and count noise.
    pub seed: u64,
}

impl Default for SynthScenario {
    fn default() -> Self {
        Self {
            n_stations: 24,
            days: 31,
            base_rate: 3.0,
            shift_strength: 1.0,
            noise: true,
            seed: 2026,
        }
    }
}

/// Which side of the canonical two-domain scenario to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YearKind {
    /// Drift level 0, month [`SOURCE_MONTH`].
    Source,
    /// Drift level 1, month [`TARGET_MONTH`].
    Target,
}

/// Per-station demand parameters at drift level zero.
struct StationParams {
    lat: f64,
    lng: f64,
    popularity: f64,
    am_peak: f64,
    pm_peak: f64,
    width: f64,
    am_height: f64,
    pm_height: f64,
    weekend_factor: f64,
    // Fixed drift directions, scaled by level * shift_strength.
    pop_drift: f64,
    am_shift: f64,
    pm_shift: f64,
}

fn station_params(scenario: &SynthScenario) -> Vec<StationParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(10);
    let mut drift_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    drift_rng.set_stream(11);
    (0..scenario.n_stations)
        .map(|s| {
            let u = |rng: &mut ChaCha8Rng| rng.random::<f64>();
            let params = StationParams {
                lat: 40.70 + u(&mut rng) * 0.10,
                lng: -74.02 + u(&mut rng) * 0.10,
                popularity: (u(&mut rng) * 1.6 - 0.8).exp(),
                am_peak: 7.5 + u(&mut rng) * 2.0,
                pm_peak: 16.5 + u(&mut rng) * 2.0,
                width: 1.5 + u(&mut rng) * 1.0,
                am_height: 0.5 + u(&mut rng),
                pm_height: 0.5 + u(&mut rng),
                weekend_factor: 0.4 + u(&mut rng) * 0.4,
                pop_drift: drift_rng.random::<f64>() * 0.8 - 0.4,
                am_shift: drift_rng.random::<f64>() * 1.0 - 0.5,
                pm_shift: drift_rng.random::<f64>() * 1.0 - 0.5,
            };
            let _ = s;
            params
        })
        .collect()
}

/// Expected trips for one station-hour at a given drift level.
fn hourly_rate(
    p: &StationParams,
    scenario: &SynthScenario,
    level: f64,
    hour: f64,
    weekend: bool,
) -> f64 {
    let drift = scenario.shift_strength * level;
    let bump = |center: f64, height: f64| {
        let d = hour - center;
        height * (-d * d / (2.0 * p.width * p.width)).exp()
    };
    let curve = 0.15
        + bump(p.am_peak + drift * p.am_shift, p.am_height)
        + bump(p.pm_peak + drift * p.pm_shift, p.pm_height);
    // Per-station popularity drifts in a fixed direction; a mild global
    // growth term lifts all stations together.
    let popularity = p.popularity * (drift * p.pop_drift).exp();
    let growth = (0.08 * drift).exp();
    let weekend_factor = if weekend { p.weekend_factor } else { 1.0 };
    scenario.base_rate * popularity * curve * growth * weekend_factor
}

/// Generates one month of synthetic trips at the given drift level and
/// aggregates them into a panel.
///
/// The drift level is the number of "years" of accumulated shift relative to
/// the scenario's level-zero process. Count noise uses a stream derived from
/// `(year, month)` so different months draw independent counts while station
/// parameters stay shared.
pub fn generate_drifted(
    scenario: &SynthScenario,
    month: YearMonth,
    level: f64,
) -> Result<FeaturePanel> {
    if scenario.n_stations == 0 {
        return Err(Error::InvalidParam("n_stations must be positive".into()));
    }
    if scenario.days < 8 {
        return Err(Error::InvalidParam(
            "need at least 8 days so labeled and test windows both exist".into(),
        ));
    }
    if !(scenario.base_rate >= 0.0) || !scenario.base_rate.is_finite() {
        return Err(Error::InvalidParam("base_rate must be non-negative".into()));
    }
    if !level.is_finite() || !scenario.shift_strength.is_finite() {
        return Err(Error::InvalidParam("drift must be finite".into()));
    }

    let params = station_params(scenario);
    let days = scenario.days.min(month.days_in_month());
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(1_000 + month.year as u64 * 12 + month.month as u64);

    let mut trips = Vec::new();
    for (s, p) in params.iter().enumerate() {
        let station_id = format!("SYN{s:03}");
        for day in 1..=days {
            let date = NaiveDate::from_ymd_opt(month.year, month.month, day)
                .expect("validated month/day");
            let weekend = date.weekday().num_days_from_monday() >= 5;
            for hour in 0..24u32 {
                let rate = hourly_rate(p, scenario, level, hour as f64, weekend);
                let count = if rate <= 0.0 {
                    0
                } else if scenario.noise {
                    let poisson = Poisson::new(rate).expect("positive rate");
                    poisson.sample(&mut rng) as u64
                } else {
                    rate.round() as u64
                };
                let base_time = date
                    .and_hms_opt(hour, 0, 0)
                    .expect("valid hour")
                    ;
                for k in 0..count {
                    trips.push(TripRecord {
                        station_id: station_id.clone(),
                        lat: p.lat,
                        lng: p.lng,
                        started_at: base_time + chrono::Duration::minutes((k % 60) as i64),
                        rider: if k % 3 == 0 {
                            RiderType::Casual
                        } else {
                            RiderType::Member
                        },
                        bike: if k % 2 == 0 {
                            BikeType::Classic
                        } else {
                            BikeType::Electric
                        },
                    });
                }
            }
        }
    }
    if trips.is_empty() {
        return Err(Error::Empty(
            "synthetic scenario produced no trips (base_rate too small?)".into(),
        ));
    }
    aggregate_station_hours(&trips)
}

/// Generates the canonical source (level 0) or target (level 1) panel.
pub fn generate_year(scenario: &SynthScenario, which: YearKind) -> Result<FeaturePanel> {
    match which {
        YearKind::Source => generate_drifted(scenario, SOURCE_MONTH, 0.0),
        YearKind::Target => generate_drifted(scenario, TARGET_MONTH, 1.0),
    }
}

/// Largest `n * m` the exact solver accepts.
pub const ORACLE_CELL_LIMIT: usize = 64;

/// Exact optimal transport on tiny instances by successive-shortest-path
/// min-cost flow.
///
/// `cost` must be non-negative and finite, and the marginals `a` and `b`
/// must each sum to one (tolerance `1e-9`). Instances larger than
/// [`ORACLE_CELL_LIMIT`] cells are refused: this is a test oracle, not a
/// production solver. The returned plan satisfies the marginals to `1e-12`
/// and attains the minimum transport cost exactly (up to float summation).
pub fn brute_force_ot(
    cost: ArrayView2<'_, f64>,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<Array2<f64>> {
    let n = cost.nrows();
    let m = cost.ncols();
    if n == 0 || m == 0 {
        return Err(Error::Empty("transport instance".into()));
    }
    if n * m > ORACLE_CELL_LIMIT {
        return Err(Error::OracleTooLarge {
            cells: n * m,
            limit: ORACLE_CELL_LIMIT,
        });
    }
    if a.len() != n || b.len() != m {
        return Err(Error::DimMismatch(format!(
            "cost is {n}x{m} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if cost.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite("oracle cost matrix".into()));
    }
    if a.iter().chain(b.iter()).any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidParam("marginals must be non-negative".into()));
    }
    if (a.sum() - 1.0).abs() > 1e-9 || (b.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParam(
            "marginals must each sum to one".into(),
        ));
    }

    // Node layout: 0 = source, 1..=n supply nodes, n+1..=n+m demand nodes,
    // n+m+1 = sink. Arcs are stored as parallel vectors with explicit
    // reverse arcs at xor-paired indices.
    let n_nodes = n + m + 2;
    let source = 0usize;
    let sink = n + m + 1;

    let mut arc_to: Vec<usize> = Vec::new();
    let mut arc_cap: Vec<f64> = Vec::new();
    let mut arc_cost: Vec<f64> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let add_arc = |from: usize,
                       to: usize,
                       cap: f64,
                       cost_val: f64,
                       arc_to: &mut Vec<usize>,
                       arc_cap: &mut Vec<f64>,
                       arc_cost: &mut Vec<f64>,
                       adj: &mut Vec<Vec<usize>>| {
        let id = arc_to.len();
        arc_to.push(to);
        arc_cap.push(cap);
        arc_cost.push(cost_val);
        adj[from].push(id);
        arc_to.push(from);
        arc_cap.push(0.0);
        arc_cost.push(-cost_val);
        adj[to].push(id + 1);
    };

    for i in 0..n {
        add_arc(source, 1 + i, a[i], 0.0, &mut arc_to, &mut arc_cap, &mut arc_cost, &mut adj);
    }
    // Arc id of pair (i, j) is recorded so the plan can be read back.
    let mut pair_arc = Array2::from_elem((n, m), usize::MAX);
    for i in 0..n {
        for j in 0..m {
            pair_arc[(i, j)] = arc_to.len();
            add_arc(
                1 + i,
                1 + n + j,
                2.0,
                cost[(i, j)],
                &mut arc_to,
                &mut arc_cap,
                &mut arc_cost,
                &mut adj,
            );
        }
    }
    for j in 0..m {
        add_arc(
            1 + n + j,
            sink,
            b[j],
            0.0,
            &mut arc_to,
            &mut arc_cap,
            &mut arc_cost,
            &mut adj,
        );
    }

    // Successive shortest augmenting paths; Bellman-Ford tolerates the
    // negative reverse-arc costs that appear in the residual graph.
    const FLOW_EPS: f64 = 1e-13;
    loop {
        let mut dist = vec![f64::INFINITY; n_nodes];
        let mut parent_arc = vec![usize::MAX; n_nodes];
        dist[source] = 0.0;
        for _ in 0..n_nodes {
            let mut improved = false;
            for from in 0..n_nodes {
                if !dist[from].is_finite() {
                    continue;
                }
                for &id in &adj[from] {
                    if arc_cap[id] <= FLOW_EPS {
                        continue;
                    }
                    let to = arc_to[id];
                    let cand = dist[from] + arc_cost[id];
                    if cand < dist[to] - 1e-15 {
                        dist[to] = cand;
                        parent_arc[to] = id;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        // Bottleneck along the path.
        let mut bottleneck = f64::INFINITY;
        let mut at = sink;
        while at != source {
            let id = parent_arc[at];
            bottleneck = bottleneck.min(arc_cap[id]);
            at = arc_to[id ^ 1];
        }
        if bottleneck <= FLOW_EPS {
            break;
        }
        let mut at = sink;
        while at != source {
            let id = parent_arc[at];
            arc_cap[id] -= bottleneck;
            arc_cap[id ^ 1] += bottleneck;
            at = arc_to[id ^ 1];
        }
    }

    let mut plan = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            // Flow on a forward arc equals the capacity accumulated on its
            // reverse twin.
            plan[(i, j)] = arc_cap[pair_arc[(i, j)] ^ 1];
        }
    }
    Ok(plan)
}

/// Transport cost of a plan against a cost matrix.
pub fn plan_cost(plan: ArrayView2<'_, f64>, cost: ArrayView2<'_, f64>) -> f64 {
    plan.iter().zip(cost.iter()).map(|(&p, &c)| p * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    #[test]
    fn oracle_identity_costs_pick_the_diagonal() {
        // Uniform marginals with C = [[0,1],[1,0]]: all mass stays on the
        // zero-cost diagonal.
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let a = array![0.5, 0.5];
        let b = array![0.5, 0.5];
        let plan = brute_force_ot(c.view(), a.view(), b.view()).unwrap();
        assert!((plan[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((plan[(1, 1)] - 0.5).abs() < 1e-12);
        assert!(plan[(0, 1)].abs() < 1e-12);
        assert!(plan[(1, 0)].abs() < 1e-12);
        assert!((plan_cost(plan.view(), c.view())).abs() < 1e-12);
    }

    #[test]
    fn oracle_respects_uneven_marginals() {
        // One supplier must split across two consumers.
        let c = array![[1.0, 3.0]];
        let a = array![1.0];
        let b = array![0.25, 0.75];
        let plan = brute_force_ot(c.view(), a.view(), b.view()).unwrap();
        assert!((plan[(0, 0)] - 0.25).abs() < 1e-12);
        assert!((plan[(0, 1)] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn oracle_handles_a_forced_expensive_route() {
        // Moving mass from a rich supplier to a distant consumer when the
        // cheap consumer saturates: classic 2x2 with an uneven demand side.
        let c = array![[0.0, 10.0], [10.0, 0.0]];
        let a = array![0.9, 0.1];
        let b = array![0.5, 0.5];
        let plan = brute_force_ot(c.view(), a.view(), b.view()).unwrap();
        // Supplier 0 fills consumer 0 (0.5) and is forced to send 0.4 to
        // consumer 1; supplier 1 sends its 0.1 to consumer 1.
        assert!((plan[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((plan[(0, 1)] - 0.4).abs() < 1e-12);
        assert!((plan[(1, 1)] - 0.1).abs() < 1e-12);
        let total = plan_cost(plan.view(), c.view());
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_oversized_and_invalid_instances() {
        let big = Array2::zeros((9, 9));
        let a9 = Array1::from_elem(9, 1.0 / 9.0);
        assert!(matches!(
            brute_force_ot(big.view(), a9.view(), a9.view()),
            Err(Error::OracleTooLarge { cells: 81, limit: 64 })
        ));
        let c = array![[1.0, 1.0], [1.0, 1.0]];
        let bad = array![0.4, 0.4];
        let ok = array![0.5, 0.5];
        assert!(matches!(
            brute_force_ot(c.view(), bad.view(), ok.view()),
            Err(Error::InvalidParam(_))
        ));
        let neg = array![[1.0, -1.0], [1.0, 1.0]];
        assert!(matches!(
            brute_force_ot(neg.view(), ok.view(), ok.view()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn oracle_cost_lower_bounds_feasible_couplings() {
        // The product coupling is always feasible, so the oracle can never
        // cost more.
        use rand::{Rng, SeedableRng};
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed % 5) as usize;
            let m = 2 + ((seed / 5) % 5) as usize;
            let c = Array2::from_shape_fn((n, m), |_| rng.random::<f64>() * 5.0);
            let a = random_simplex(&mut rng, n);
            let b = random_simplex(&mut rng, m);
            let plan = brute_force_ot(c.view(), a.view(), b.view()).unwrap();
            let mut product = Array2::zeros((n, m));
            for i in 0..n {
                for j in 0..m {
                    product[(i, j)] = a[i] * b[j];
                }
            }
            let oracle_cost = plan_cost(plan.view(), c.view());
            let product_cost = plan_cost(product.view(), c.view());
            assert!(
                oracle_cost <= product_cost + 1e-10,
                "oracle {oracle_cost} must not exceed feasible {product_cost}"
            );
        }
    }

    fn random_simplex(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Array1<f64> {
        use rand::Rng;
        let mut v = Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.05);
        let s = v.sum();
        v.mapv_inplace(|x| x / s);
        v
    }

    #[test]
    fn zero_shift_years_share_one_distribution() {
        // With shift_strength = 0 the source and target processes coincide;
        // mean demand should agree within three standard errors.
        let scenario = SynthScenario {
            n_stations: 10,
            days: 12,
            base_rate: 3.0,
            shift_strength: 0.0,
            noise: true,
            seed: 7,
        };
        let source = generate_year(&scenario, YearKind::Source).unwrap();
        let target = generate_year(&scenario, YearKind::Target).unwrap();
        let ms = source.demand().mean().unwrap();
        let mt = target.demand().mean().unwrap();
        let vs = source.demand().mapv(|d| (d - ms) * (d - ms)).mean().unwrap();
        let se = (vs / source.len() as f64).sqrt() * 3.0
            + (vs / target.len() as f64).sqrt() * 3.0;
        assert!(
            (ms - mt).abs() < se.max(0.05),
            "means {ms} vs {mt} differ beyond sampling noise"
        );
    }

    #[test]
    fn nonzero_shift_moves_the_demand_distribution() {
        let scenario = SynthScenario {
            n_stations: 10,
            days: 12,
            base_rate: 3.0,
            shift_strength: 1.0,
            noise: false,
            seed: 7,
        };
        let source = generate_year(&scenario, YearKind::Source).unwrap();
        let target = generate_year(&scenario, YearKind::Target).unwrap();
        // Noise-free generation isolates the drift: per-station totals must
        // change, and the global growth term pushes the mean upward.
        let ms = source.demand().mean().unwrap();
        let mt = target.demand().mean().unwrap();
        assert!(
            (mt - ms) / ms > 0.02,
            "global growth should lift mean demand: {ms} -> {mt}"
        );
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let scenario = SynthScenario {
            n_stations: 5,
            days: 9,
            base_rate: 2.0,
            shift_strength: 1.0,
            noise: true,
            seed: 42,
        };
        let a = generate_year(&scenario, YearKind::Target).unwrap();
        let b = generate_year(&scenario, YearKind::Target).unwrap();
        assert_eq!(a.records, b.records);
        let mut other = scenario.clone();
        other.seed = 43;
        let c = generate_year(&other, YearKind::Target).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn drift_levels_compose_monotonically() {
        // Noise-free totals should drift further from level 0 as the level
        // grows, because drift directions are fixed per station.
        let scenario = SynthScenario {
            n_stations: 8,
            days: 10,
            base_rate: 3.0,
            shift_strength: 1.0,
            noise: false,
            seed: 11,
        };
        let base = generate_drifted(&scenario, SOURCE_MONTH, 0.0).unwrap();
        let near = generate_drifted(&scenario, SOURCE_MONTH, 1.0).unwrap();
        let far = generate_drifted(&scenario, SOURCE_MONTH, 3.0).unwrap();
        let total = |p: &FeaturePanel| p.demand().sum();
        let d_near = (total(&near) - total(&base)).abs();
        let d_far = (total(&far) - total(&base)).abs();
        assert!(
            d_far > d_near,
            "three levels of drift ({d_far}) must outpace one ({d_near})"
        );
    }

    #[test]
    fn rejects_scenarios_without_usable_windows() {
        let scenario = SynthScenario {
            days: 5,
            ..SynthScenario::default()
        };
        assert!(matches!(
            generate_year(&scenario, YearKind::Source),
            Err(Error::InvalidParam(_))
        ));
        let dead = SynthScenario {
            base_rate: 0.0,
            noise: false,
            ..SynthScenario::default()
        };
        assert!(matches!(
            generate_year(&dead, YearKind::Source),
            Err(Error::Empty(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn oracle_marginals_are_exact(seed in 0u64..5_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (rng.random::<u64>() % 7) as usize;
            let m = 2 + (rng.random::<u64>() % 7) as usize;
            prop_assume!(n * m <= ORACLE_CELL_LIMIT);
            let c = Array2::from_shape_fn((n, m), |_| rng.random::<f64>() * 4.0);
            let a = random_simplex(&mut rng, n);
            let b = random_simplex(&mut rng, m);
            let plan = brute_force_ot(c.view(), a.view(), b.view()).unwrap();
            for i in 0..n {
                let row: f64 = plan.row(i).sum();
                prop_assert!((row - a[i]).abs() < 1e-12, "row {i}: {row} vs {}", a[i]);
            }
            for j in 0..m {
                let col: f64 = plan.column(j).sum();
                prop_assert!((col - b[j]).abs() < 1e-12, "col {j}: {col} vs {}", b[j]);
            }
            for &p in plan.iter() {
                prop_assert!(p >= -1e-15);
            }
        }

        #[test]
        fn sinkhorn_approaches_the_oracle_at_small_epsilon(seed in 0u64..2_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (rng.random::<u64>() % 4) as usize;
            let m = 2 + (rng.random::<u64>() % 4) as usize;
            let s = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 3.0);
            let t = Array2::from_shape_fn((m, 2), |_| rng.random::<f64>() * 3.0);
            let cm = ot::cost_matrix(s.view(), t.view()).unwrap();
            let a = Array1::from_elem(n, 1.0 / n as f64);
            let b = Array1::from_elem(m, 1.0 / m as f64);
            let exact = brute_force_ot(cm.c.view(), a.view(), b.view()).unwrap();
            let entropic = ot::sinkhorn(&cm, 1e-3, 20_000, 1e-12).unwrap();
            let exact_cost = plan_cost(exact.view(), cm.c.view());
            let entropic_cost = plan_cost(entropic.pi.view(), cm.c.view());
            // At this tight regularization the entropic cost lands within 1%
            // of the exact optimum. The band is two-sided: an entropic plan
            // whose marginals are not yet exact can cost marginally less
            // than the feasible optimum.
            prop_assert!(
                (entropic_cost - exact_cost).abs() <= exact_cost * 0.01 + 1e-4,
                "entropic {entropic_cost} vs exact {exact_cost}"
            );
        }
    }
}
