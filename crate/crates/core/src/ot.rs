//! Entropic optimal transport with robust plan trimming.
//!
//! The solver works on uniform marginals in the log domain: dual potentials
//! `f` and `g` are updated by alternating soft-min steps
//!
//! ```text
//! f_i <- eps * (log a_i - LSE_j((g_j - C_ij) / eps))
//! g_j <- eps * (log b_j - LSE_i((f_i - C_ij) / eps))
//! ```
//!
//! until the worst marginal violation of the implied plan
//! `pi_ij = exp((f_i + g_j - C_ij) / eps)` falls below tolerance. Working
//! with log-sum-exp keeps the iteration stable for small regularization.
//!
//! [`trim_plan`] then discards the most expensive mass of the plan, which is
//! where mismatched or contaminated pairs concentrate, and
//! [`barycentric_project`] maps source rows onto the target support with a
//! per-row fallback for rows whose mass was trimmed away entirely.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::{Error, Result};

/// Mass threshold below which a plan entry is treated as numerically zero.
pub const PLAN_MASS_EPS: f64 = 1e-15;

/// Floor applied to the entropic regularization strength.
pub const MIN_EPSILON: f64 = 1e-9;

/// A pairwise squared-Euclidean cost matrix together with its median entry.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    /// `c[(i, j)] = ||s_i - t_j||^2`.
    pub c: Array2<f64>,
    /// Median of all entries (average-of-middles for even counts); used to
    /// scale the regularization strength.
    pub median_cost: f64,
}

/// A solved entropic transport plan between uniform marginals.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// Coupling matrix, `n_source x n_target`.
    pub pi: Array2<f64>,
    /// Row marginal (uniform `1/n_source`).
    pub a: Array1<f64>,
    /// Column marginal (uniform `1/n_target`).
    pub b: Array1<f64>,
    /// Regularization strength actually used (after the median scaling and
    /// the [`MIN_EPSILON`] floor).
    pub epsilon: f64,
    /// Number of dual sweeps performed.
    pub iterations_used: usize,
    /// Whether the marginal tolerance was met within the iteration budget.
    pub converged: bool,
}

/// A transport plan after robust mass trimming.
#[derive(Debug, Clone)]
pub struct TrimmedPlan {
    /// The trimmed coupling; entries removed by trimming are exactly zero.
    pub pi_trim: Array2<f64>,
    /// Total mass retained after trimming.
    pub kept_mass: f64,
    /// Rows whose retained mass fell below [`PLAN_MASS_EPS`]; projections of
    /// these rows must come from the caller's fallback features.
    pub fallback_rows: BTreeSet<usize>,
}

/// Builds the squared-Euclidean cost matrix between the rows of `s` and `t`.
pub fn cost_matrix(s: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>) -> Result<CostMatrix> {
    if s.nrows() == 0 || t.nrows() == 0 {
        return Err(Error::Empty("cost matrix input".into()));
    }
    if s.ncols() != t.ncols() {
        return Err(Error::DimMismatch(format!(
            "cost matrix inputs have {} and {} columns",
            s.ncols(),
            t.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) || t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix input".into()));
    }
    let n = s.nrows();
    let m = t.nrows();
    let rows_t: Vec<&[f64]> = (0..m)
        .map(|j| t.row(j).to_slice().expect("contiguous rows"))
        .collect();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ri = s.row(i);
            let ri = ri.to_slice().expect("contiguous rows");
            rows_t
                .iter()
                .map(|rj| {
                    ri.iter()
                        .zip(rj.iter())
                        .map(|(&u, &v)| (u - v) * (u - v))
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    let median_cost = median(&data);
    let c = Array2::from_shape_vec((n, m), data).expect("shape matches data length");
    Ok(CostMatrix { c, median_cost })
}

/// Median with the average-of-middles convention for even counts.
fn median(values: &[f64]) -> f64 {
    let mut buf = values.to_vec();
    let n = buf.len();
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).expect("finite costs");
    if n % 2 == 1 {
        let (_, mid, _) = buf.select_nth_unstable_by(n / 2, cmp);
        *mid
    } else {
        let (_, hi, _) = buf.select_nth_unstable_by(n / 2, cmp);
        let hi = *hi;
        let (_, lo, _) = buf.select_nth_unstable_by(n / 2 - 1, cmp);
        0.5 * (*lo + hi)
    }
}

/// `log(sum_k exp(v_k))` evaluated stably.
fn logsumexp(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let s: f64 = v.iter().map(|&x| (x - mx).exp()).sum();
    mx + s.ln()
}

/// Solves entropic OT between uniform marginals over the rows and columns of
/// `cost`, with regularization `epsilon = max(epsilon_scale * median_cost,`
/// [`MIN_EPSILON`]`)`.
///
/// Convergence is declared when the maximum absolute marginal violation of
/// the implied plan drops below `tol`; the violation is re-measured every
/// sweep for small problems and every tenth sweep for large ones.
pub fn sinkhorn(
    cost: &CostMatrix,
    epsilon_scale: f64,
    max_iters: usize,
    tol: f64,
) -> Result<TransportPlan> {
    if !(epsilon_scale > 0.0) || !epsilon_scale.is_finite() {
        return Err(Error::InvalidParam(format!(
            "epsilon_scale must be positive and finite, got {epsilon_scale}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam("tol must be positive".into()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidParam("max_iters must be positive".into()));
    }
    if cost.c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix".into()));
    }
    let n = cost.c.nrows();
    let m = cost.c.ncols();
    let eps = (epsilon_scale * cost.median_cost).max(MIN_EPSILON);
    let a = Array1::from_elem(n, 1.0 / n as f64);
    let b = Array1::from_elem(m, 1.0 / m as f64);
    let log_a = (1.0 / n as f64).ln();
    let log_b = (1.0 / m as f64).ln();

    let mut f = vec![0.0_f64; n];
    let mut g = vec![0.0_f64; m];
    // Column-major copy of C so the g-update scans contiguous memory too.
    let c_t = cost.c.t().as_standard_layout().to_owned();

    // Measuring the marginal violation costs one extra pass over the matrix,
    // so large problems only check every tenth sweep.
    let check_every = if n * m <= 65_536 { 1 } else { 10 };

    let mut iterations_used = 0;
    let mut converged = false;
    let mut scratch_f: Vec<f64> = vec![0.0; n];
    let mut scratch_g: Vec<f64> = vec![0.0; m];

    for it in 1..=max_iters {
        // f-update: rows are independent given g.
        scratch_f
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, fi)| {
                let row = cost.c.row(i);
                let row = row.to_slice().expect("contiguous rows");
                let terms: Vec<f64> = row
                    .iter()
                    .zip(g.iter())
                    .map(|(&cij, &gj)| (gj - cij) / eps)
                    .collect();
                *fi = eps * (log_a - logsumexp(&terms));
            });
        std::mem::swap(&mut f, &mut scratch_f);

        // g-update: columns are independent given the fresh f.
        scratch_g
            .par_iter_mut()
            .enumerate()
            .for_each(|(j, gj)| {
                let col = c_t.row(j);
                let col = col.to_slice().expect("contiguous rows");
                let terms: Vec<f64> = col
                    .iter()
                    .zip(f.iter())
                    .map(|(&cij, &fi)| (fi - cij) / eps)
                    .collect();
                *gj = eps * (log_b - logsumexp(&terms));
            });
        std::mem::swap(&mut g, &mut scratch_g);

        iterations_used = it;
        if it % check_every == 0 || it == max_iters {
            // After the g-update the column marginals are exact by
            // construction, so only the rows can be violated.
            let worst = (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = cost.c.row(i);
                    let row = row.to_slice().expect("contiguous rows");
                    let sum: f64 = row
                        .iter()
                        .zip(g.iter())
                        .map(|(&cij, &gj)| ((f[i] + gj - cij) / eps).exp())
                        .sum();
                    (sum - a[i]).abs()
                })
                .reduce(|| 0.0, f64::max);
            if worst < tol {
                converged = true;
                break;
            }
        }
    }

    let pi_rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = cost.c.row(i);
            let row = row.to_slice().expect("contiguous rows");
            row.iter()
                .zip(g.iter())
                .map(|(&cij, &gj)| ((f[i] + gj - cij) / eps).exp())
                .collect::<Vec<f64>>()
        })
        .collect();
    let pi = Array2::from_shape_vec((n, m), pi_rows).expect("shape matches data length");

    Ok(TransportPlan {
        pi,
        a,
        b,
        epsilon: eps,
        iterations_used,
        converged,
    })
}

/// Removes the most expensive transported mass from a plan.
///
/// Entries are visited in order of decreasing cost (ties broken by ascending
/// `(row, column)`) and zeroed greedily as long as the retained mass stays at
/// or above `keep_mass` times the plan's total mass. Entries below
/// [`PLAN_MASS_EPS`] are dropped up front so the budget is spent on
/// meaningful mass. `keep_mass = 1.0` returns the plan unchanged.
pub fn trim_plan(plan: &TransportPlan, cost: &CostMatrix, keep_mass: f64) -> Result<TrimmedPlan> {
    if !(keep_mass > 0.0 && keep_mass <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "keep_mass must lie in (0, 1], got {keep_mass}"
        )));
    }
    let (n, m) = (plan.pi.nrows(), plan.pi.ncols());
    if cost.c.nrows() != n || cost.c.ncols() != m {
        return Err(Error::DimMismatch(format!(
            "plan is {n}x{m} but cost is {}x{}",
            cost.c.nrows(),
            cost.c.ncols()
        )));
    }

    if keep_mass == 1.0 {
        // Full retention must be the exact identity on the plan so that the
        // trimmed and untrimmed pipelines coincide bit for bit.
        let fallback_rows = fallback_rows_of(&plan.pi);
        return Ok(TrimmedPlan {
            kept_mass: plan.pi.sum(),
            pi_trim: plan.pi.clone(),
            fallback_rows,
        });
    }

    let mut pi_trim = plan.pi.clone();
    pi_trim.mapv_inplace(|v| if v < PLAN_MASS_EPS { 0.0 } else { v });

    // Sort the surviving entries by cost, most expensive first; ties resolve
    // toward the lexicographically smallest (row, column) pair so the result
    // does not depend on the sort's internals.
    let mut entries: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if pi_trim[(i, j)] > 0.0 {
                entries.push((i, j));
            }
        }
    }
    entries.sort_by(|&(i1, j1), &(i2, j2)| {
        cost.c[(i2, j2)]
            .partial_cmp(&cost.c[(i1, j1)])
            .expect("finite costs")
            .then_with(|| (i1, j1).cmp(&(i2, j2)))
    });

    let total: f64 = pi_trim.sum();
    let floor = keep_mass * total;
    let mut retained = total;
    for &(i, j) in &entries {
        let mass = pi_trim[(i, j)];
        if retained - mass >= floor {
            pi_trim[(i, j)] = 0.0;
            retained -= mass;
        } else {
            break;
        }
    }

    let fallback_rows = fallback_rows_of(&pi_trim);
    Ok(TrimmedPlan {
        pi_trim,
        kept_mass: retained,
        fallback_rows,
    })
}

fn fallback_rows_of(pi: &Array2<f64>) -> BTreeSet<usize> {
    pi.axis_iter(Axis(0))
        .enumerate()
        .filter(|(_, row)| row.sum() < PLAN_MASS_EPS)
        .map(|(i, _)| i)
        .collect()
}

/// Barycentric projection of source rows onto the target support.
///
/// Row `i` of the result is the plan-weighted average of the target rows,
/// `sum_j pi_ij t_j / sum_j pi_ij`. Rows listed in `trimmed.fallback_rows`
/// have no mass left, so they copy the corresponding row of `fallback`
/// verbatim instead.
pub fn barycentric_project(
    trimmed: &TrimmedPlan,
    target: ArrayView2<'_, f64>,
    fallback: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let n = trimmed.pi_trim.nrows();
    let m = trimmed.pi_trim.ncols();
    if target.nrows() != m {
        return Err(Error::DimMismatch(format!(
            "plan has {m} columns but target has {} rows",
            target.nrows()
        )));
    }
    if fallback.nrows() != n {
        return Err(Error::DimMismatch(format!(
            "plan has {n} rows but fallback has {} rows",
            fallback.nrows()
        )));
    }
    if fallback.ncols() != target.ncols() {
        return Err(Error::DimMismatch(format!(
            "fallback has {} columns but target has {}",
            fallback.ncols(),
            target.ncols()
        )));
    }
    let d = target.ncols();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = vec![0.0_f64; d];
            if trimmed.fallback_rows.contains(&i) {
                out.copy_from_slice(fallback.row(i).to_slice().expect("contiguous rows"));
            } else {
                let pi_row = trimmed.pi_trim.row(i);
                let mut mass = 0.0;
                for (j, &p) in pi_row.iter().enumerate() {
                    if p > 0.0 {
                        mass += p;
                        for (o, &tv) in out.iter_mut().zip(target.row(j).iter()) {
                            *o += p * tv;
                        }
                    }
                }
                for o in out.iter_mut() {
                    *o /= mass;
                }
            }
            out
        })
        .collect();
    Ok(Array2::from_shape_vec((n, d), rows).expect("shape matches data length"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_plan_from(pi: Array2<f64>, eps: f64) -> TransportPlan {
        let n = pi.nrows();
        let m = pi.ncols();
        TransportPlan {
            a: Array1::from_elem(n, 1.0 / n as f64),
            b: Array1::from_elem(m, 1.0 / m as f64),
            pi,
            epsilon: eps,
            iterations_used: 0,
            converged: true,
        }
    }

    #[test]
    fn cost_matrix_hand_example() {
        // Points (0,0) and (3,4) against (0,0): squared distances 0 and 25.
        let s = array![[0.0, 0.0], [3.0, 4.0]];
        let t = array![[0.0, 0.0]];
        let cm = cost_matrix(s.view(), t.view()).unwrap();
        assert_eq!(cm.c, array![[0.0], [25.0]]);
        assert_eq!(cm.median_cost, 12.5);
    }

    #[test]
    fn cost_matrix_median_even_count() {
        // S = T = {0, 1}: C = [[0,1],[1,0]], sorted entries {0,0,1,1},
        // average of middles = 0.5.
        let s = array![[0.0], [1.0]];
        let cm = cost_matrix(s.view(), s.view()).unwrap();
        assert_eq!(cm.median_cost, 0.5);
    }

    #[test]
    fn sinkhorn_zero_cost_gives_product_coupling() {
        let s = array![[1.0], [1.0], [1.0]];
        let t = array![[1.0], [1.0]];
        let cm = cost_matrix(s.view(), t.view()).unwrap();
        let plan = sinkhorn(&cm, 0.1, 100, 1e-9).unwrap();
        assert!(plan.converged);
        for &p in plan.pi.iter() {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sinkhorn_marginals_match_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Array2::from_shape_fn((17, 3), |_| rng.random::<f64>());
        let t = Array2::from_shape_fn((11, 3), |_| rng.random::<f64>());
        let cm = cost_matrix(s.view(), t.view()).unwrap();
        let plan = sinkhorn(&cm, 0.1, 1000, 1e-10).unwrap();
        assert!(plan.converged);
        for i in 0..17 {
            let row_sum: f64 = plan.pi.row(i).sum();
            assert!((row_sum - 1.0 / 17.0).abs() < 1e-9);
        }
        for j in 0..11 {
            let col_sum: f64 = plan.pi.column(j).sum();
            assert!((col_sum - 1.0 / 11.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sinkhorn_identity_support_at_small_epsilon() {
        // Matching point clouds: at a tight regularization the plan should
        // concentrate on the diagonal within total-variation 1e-3.
        let s = array![[0.0], [1.0], [2.0], [3.0]];
        let cm = cost_matrix(s.view(), s.view()).unwrap();
        let plan = sinkhorn(&cm, 1e-3, 5000, 1e-12).unwrap();
        let mut tv = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let ideal = if i == j { 0.25 } else { 0.0 };
                tv += (plan.pi[(i, j)] - ideal).abs();
            }
        }
        assert!(tv < 1e-3, "total variation from identity coupling: {tv}");
    }

    #[test]
    fn sinkhorn_large_epsilon_approaches_product_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = Array2::from_shape_fn((6, 2), |_| rng.random::<f64>());
        let t = Array2::from_shape_fn((5, 2), |_| rng.random::<f64>());
        let cm = cost_matrix(s.view(), t.view()).unwrap();
        // Deviation from the product coupling decays like C/epsilon, so a
        // very large scale is needed for a tight absolute tolerance.
        let plan = sinkhorn(&cm, 1e8, 2000, 1e-12).unwrap();
        for i in 0..6 {
            for j in 0..5 {
                let product = plan.a[i] * plan.b[j];
                assert!(
                    (plan.pi[(i, j)] - product).abs() < 1e-6,
                    "strong smoothing should wash out the costs"
                );
            }
        }
    }

    #[test]
    fn trim_keep_mass_one_is_bitwise_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = Array2::from_shape_fn((9, 2), |_| rng.random::<f64>());
        let t = Array2::from_shape_fn((7, 2), |_| rng.random::<f64>());
        let cm = cost_matrix(s.view(), t.view()).unwrap();
        let plan = sinkhorn(&cm, 0.1, 500, 1e-9).unwrap();
        let trimmed = trim_plan(&plan, &cm, 1.0).unwrap();
        assert_eq!(trimmed.pi_trim, plan.pi);
        assert!(trimmed.fallback_rows.is_empty());
    }

    #[test]
    fn trim_hand_traced_example() {
        // Uniform 2x2 plan (all entries 0.25) with costs [[0,1],[2,3]] and
        // keep_mass 0.6: the floor is 0.6; dropping the cost-3 entry keeps
        // 0.75 >= 0.6, dropping the cost-2 entry too would keep 0.5 < 0.6,
        // so exactly one entry is zeroed.
        let pi = Array2::from_elem((2, 2), 0.25);
        let plan = uniform_plan_from(pi, 0.1);
        let cm = CostMatrix {
            c: array![[0.0, 1.0], [2.0, 3.0]],
            median_cost: 1.5,
        };
        let trimmed = trim_plan(&plan, &cm, 0.6).unwrap();
        assert_eq!(trimmed.pi_trim, array![[0.25, 0.25], [0.25, 0.0]]);
        assert!((trimmed.kept_mass - 0.75).abs() < 1e-15);
        assert!(trimmed.fallback_rows.is_empty());
    }

    #[test]
    fn trim_tie_breaks_lexicographically() {
        // All four entries share the same cost; trimming to 0.5 must remove
        // (0,0) then (0,1) — the lexicographically smallest pairs first.
        let pi = Array2::from_elem((2, 2), 0.25);
        let plan = uniform_plan_from(pi, 0.1);
        let cm = CostMatrix {
            c: Array2::from_elem((2, 2), 1.0),
            median_cost: 1.0,
        };
        let trimmed = trim_plan(&plan, &cm, 0.5).unwrap();
        assert_eq!(trimmed.pi_trim, array![[0.0, 0.0], [0.25, 0.25]]);
        assert_eq!(
            trimmed.fallback_rows.iter().copied().collect::<Vec<_>>(),
            vec![0]
        );
    }

    #[test]
    fn trim_creates_fallback_rows_when_a_row_empties() {
        // Row 1 holds all its mass in one very expensive cell, which is the
        // first to go.
        let pi = array![[0.5, 0.0], [0.0, 0.5]];
        let plan = uniform_plan_from(pi, 0.1);
        let cm = CostMatrix {
            c: array![[0.0, 1.0], [1.0, 100.0]],
            median_cost: 1.0,
        };
        let trimmed = trim_plan(&plan, &cm, 0.5).unwrap();
        assert_eq!(trimmed.pi_trim, array![[0.5, 0.0], [0.0, 0.0]]);
        assert_eq!(
            trimmed.fallback_rows.iter().copied().collect::<Vec<_>>(),
            vec![1]
        );
    }

    #[test]
    fn barycentric_point_mass_copies_target_row() {
        let pi = array![[0.5, 0.0], [0.0, 0.5]];
        let plan = uniform_plan_from(pi, 0.1);
        let cm = CostMatrix {
            c: Array2::zeros((2, 2)),
            median_cost: 0.0,
        };
        let trimmed = trim_plan(&plan, &cm, 1.0).unwrap();
        let target = array![[10.0, 0.0], [0.0, 10.0]];
        let fallback = Array2::zeros((2, 2));
        let proj = barycentric_project(&trimmed, target.view(), fallback.view()).unwrap();
        assert_eq!(proj, target);
    }

    #[test]
    fn barycentric_uniform_row_gives_target_mean() {
        let pi = array![[0.25, 0.25]];
        let plan = TransportPlan {
            a: array![0.5],
            b: array![0.25, 0.25],
            pi,
            epsilon: 0.1,
            iterations_used: 0,
            converged: true,
        };
        let cm = CostMatrix {
            c: Array2::zeros((1, 2)),
            median_cost: 0.0,
        };
        let trimmed = trim_plan(&plan, &cm, 1.0).unwrap();
        let target = array![[2.0, 4.0], [6.0, 8.0]];
        let fallback = Array2::zeros((1, 2));
        let proj = barycentric_project(&trimmed, target.view(), fallback.view()).unwrap();
        assert_eq!(proj, array![[4.0, 6.0]]);
    }

    #[test]
    fn barycentric_fallback_rows_copy_fallback_matrix() {
        let pi = array![[0.5, 0.0], [0.0, 0.0]];
        let mut fallback_rows = BTreeSet::new();
        fallback_rows.insert(1);
        let trimmed = TrimmedPlan {
            pi_trim: pi,
            kept_mass: 0.5,
            fallback_rows,
        };
        let target = array![[1.0], [2.0]];
        let fallback = array![[-7.0], [-9.0]];
        let proj = barycentric_project(&trimmed, target.view(), fallback.view()).unwrap();
        assert_eq!(proj, array![[1.0], [-9.0]]);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let s = array![[0.0], [1.0]];
        let cm = cost_matrix(s.view(), s.view()).unwrap();
        assert!(matches!(
            sinkhorn(&cm, 0.0, 100, 1e-9),
            Err(Error::InvalidParam(_))
        ));
        let plan = sinkhorn(&cm, 0.1, 100, 1e-9).unwrap();
        assert!(matches!(
            trim_plan(&plan, &cm, 0.0),
            Err(Error::InvalidParam(_))
        ));
        assert!(matches!(
            trim_plan(&plan, &cm, 1.5),
            Err(Error::InvalidParam(_))
        ));
        let t3 = array![[0.0], [1.0], [2.0]];
        let cm3 = cost_matrix(s.view(), t3.view()).unwrap();
        assert!(matches!(
            trim_plan(&plan, &cm3, 0.8),
            Err(Error::DimMismatch(_))
        ));
    }

    #[test]
    fn epsilon_floors_when_median_cost_is_zero() {
        let s = array![[1.0], [1.0]];
        let cm = cost_matrix(s.view(), s.view()).unwrap();
        assert_eq!(cm.median_cost, 0.0);
        let plan = sinkhorn(&cm, 0.1, 50, 1e-9).unwrap();
        assert_eq!(plan.epsilon, MIN_EPSILON);
        for &p in plan.pi.iter() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn trim_never_retains_less_than_keep_mass(
            seed in 0u64..10_000,
            n in 2usize..10,
            m in 2usize..10,
            keep in 0.05f64..1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 3.0);
            let t = Array2::from_shape_fn((m, 2), |_| rng.random::<f64>() * 3.0);
            let cm = cost_matrix(s.view(), t.view()).unwrap();
            let plan = sinkhorn(&cm, 0.5, 300, 1e-9).unwrap();
            let total: f64 = plan.pi.iter().filter(|&&p| p >= PLAN_MASS_EPS).sum();
            let trimmed = trim_plan(&plan, &cm, keep).unwrap();
            // Retained mass respects the floor...
            prop_assert!(trimmed.kept_mass >= keep * total - 1e-12);
            // ...and matches the surviving entries.
            let recount: f64 = trimmed.pi_trim.sum();
            prop_assert!((recount - trimmed.kept_mass).abs() < 1e-12);
            // Trimming is monotone: no entry ever grows.
            for (a, b) in trimmed.pi_trim.iter().zip(plan.pi.iter()) {
                prop_assert!(*a == *b || *a == 0.0);
            }
        }

        #[test]
        fn trim_removes_greedily_from_the_most_expensive_end(
            seed in 0u64..10_000,
            n in 2usize..8,
            m in 2usize..8,
            keep in 0.2f64..0.95,
        ) {
            // Every zeroed entry must be at least as expensive as every kept
            // entry, up to cost ties.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Array2::from_shape_fn((n, 1), |_| rng.random::<f64>() * 2.0);
            let t = Array2::from_shape_fn((m, 1), |_| rng.random::<f64>() * 2.0);
            let cm = cost_matrix(s.view(), t.view()).unwrap();
            let plan = sinkhorn(&cm, 1.0, 300, 1e-9).unwrap();
            let trimmed = trim_plan(&plan, &cm, keep).unwrap();
            let mut max_kept = f64::NEG_INFINITY;
            let mut min_zeroed = f64::INFINITY;
            for i in 0..n {
                for j in 0..m {
                    let was = plan.pi[(i, j)];
                    let now = trimmed.pi_trim[(i, j)];
                    if was >= PLAN_MASS_EPS {
                        if now > 0.0 {
                            max_kept = max_kept.max(cm.c[(i, j)]);
                        } else {
                            min_zeroed = min_zeroed.min(cm.c[(i, j)]);
                        }
                    }
                }
            }
            if min_zeroed.is_finite() && max_kept.is_finite() {
                // The greedy scan stops at the first entry that would breach
                // the floor, so cheaper entries can only be zeroed if they
                // tie or the scan never reached them.
                prop_assert!(min_zeroed >= max_kept - 1e-12);
            }
        }
    }
}
