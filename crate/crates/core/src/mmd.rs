//! Gaussian-kernel maximum mean discrepancy and kernel mean matching.
//!
//! The kernel is `k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))`. The
//! squared MMD between samples `X` and `Y` is the biased V-statistic
//!
//! ```text
//! mmd2 = mean_ij k(x_i, x_j) - 2 * mean_ij k(x_i, y_j) + mean_ij k(y_i, y_j)
//! ```
//!
//! which is differentiable in the entries of `X`; [`mmd2_with_grad`] returns
//! the analytic gradient used by generator training. [`kmm_weights`] solves
//! the kernel-mean-matching program with projected gradient descent.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::{Error, Result};

/// Smallest admissible kernel bandwidth; degenerate pooled samples clamp
/// here instead of dividing by zero.
pub const MIN_BANDWIDTH: f64 = 1e-8;

/// A Gaussian kernel with a fixed bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    /// Length scale `sigma` of `exp(-||x-y||^2 / (2 sigma^2))`.
    pub bandwidth: f64,
}

impl KernelSpec {
    /// Creates a kernel, clamping the bandwidth up to [`MIN_BANDWIDTH`].
    pub fn new(bandwidth: f64) -> Self {
        Self {
            bandwidth: bandwidth.max(MIN_BANDWIDTH),
        }
    }
}

/// Median-heuristic bandwidth: the median pairwise Euclidean distance over
/// the pooled rows of `x` and `y`.
///
/// Pools larger than 500 rows are thinned to 500 with an even deterministic
/// stride before the pairwise pass, so no randomness is involved. Returns at
/// least [`MIN_BANDWIDTH`].
pub fn median_bandwidth(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    const CAP: usize = 500;
    let total = x.nrows() + y.nrows();
    if total < 2 {
        return MIN_BANDWIDTH;
    }
    let fetch = |k: usize| {
        if k < x.nrows() {
            x.row(k)
        } else {
            y.row(k - x.nrows())
        }
    };
    let picks: Vec<usize> = if total <= CAP {
        (0..total).collect()
    } else {
        // Even stride over the pooled index range keeps both samples
        // represented in input order.
        (0..CAP).map(|k| k * total / CAP).collect()
    };
    let m = picks.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        let ra = fetch(picks[a]);
        for b in (a + 1)..m {
            let rb = fetch(picks[b]);
            let d2: f64 = ra
                .iter()
                .zip(rb.iter())
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    median_in_place(&mut dists).max(MIN_BANDWIDTH)
}

/// Median with the average-of-middles convention for even lengths.
fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).expect("finite distances");
    if n % 2 == 1 {
        let (_, mid, _) = values.select_nth_unstable_by(n / 2, cmp);
        *mid
    } else {
        let (_, hi, _) = values.select_nth_unstable_by(n / 2, cmp);
        let hi = *hi;
        let (_, lo, _) = values.select_nth_unstable_by(n / 2 - 1, cmp);
        0.5 * (*lo + hi)
    }
}

fn check_pair(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("mmd sample".into()));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimMismatch(format!(
            "mmd samples have {} and {} columns",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mmd sample".into()));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&u, &v)| (u - v) * (u - v))
        .sum()
}

/// Mean kernel value between all row pairs of `a` and `b` (including
/// self-pairs when `a` and `b` are the same sample). Row-level partial sums
/// are reduced in fixed order so the result does not depend on threading.
fn mean_kernel(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, gamma: f64) -> f64 {
    let rows_b: Vec<&[f64]> = (0..b.nrows())
        .map(|j| b.row(j).to_slice().expect("contiguous rows"))
        .collect();
    let partial: Vec<f64> = (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let ra = a.row(i);
            let ra = ra.to_slice().expect("contiguous rows");
            rows_b.iter().map(|rb| (-gamma * sq_dist(ra, rb)).exp()).sum()
        })
        .collect();
    partial.iter().sum::<f64>() / (a.nrows() as f64 * b.nrows() as f64)
}

/// Squared MMD between `x` and `y` under `kernel` (biased V-statistic).
///
/// Always non-negative up to floating-point round-off; `mmd2(x, x)` is zero
/// to machine precision.
pub fn mmd2(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, kernel: &KernelSpec) -> Result<f64> {
    check_pair(x, y)?;
    let gamma = 0.5 / (kernel.bandwidth * kernel.bandwidth);
    let kxx = mean_kernel(x, x, gamma);
    let kxy = mean_kernel(x, y, gamma);
    let kyy = mean_kernel(y, y, gamma);
    Ok(kxx - 2.0 * kxy + kyy)
}

/// Squared MMD plus its analytic gradient with respect to the rows of `x`.
///
/// For the Gaussian kernel, `d k(u, v) / d u = -k(u, v) (u - v) / sigma^2`,
/// so differentiating the V-statistic in `x_p` gives
///
/// ```text
/// grad_p = -(2 / (n^2 sigma^2)) * sum_j k(x_p, x_j) (x_p - x_j)
///          + (2 / (n m sigma^2)) * sum_j k(x_p, y_j) (x_p - y_j)
/// ```
pub fn mmd2_with_grad(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    kernel: &KernelSpec,
) -> Result<(f64, Array2<f64>)> {
    check_pair(x, y)?;
    let n = x.nrows();
    let m = y.nrows();
    let d = x.ncols();
    let sigma2 = kernel.bandwidth * kernel.bandwidth;
    let gamma = 0.5 / sigma2;

    let rows_x: Vec<&[f64]> = (0..n)
        .map(|i| x.row(i).to_slice().expect("contiguous rows"))
        .collect();
    let rows_y: Vec<&[f64]> = (0..m)
        .map(|j| y.row(j).to_slice().expect("contiguous rows"))
        .collect();

    // Per-row accumulators: (sum_j k(x_p, x_j), sum_j k(x_p, y_j), grad row).
    let per_row: Vec<(f64, f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|p| {
            let rp = rows_x[p];
            let mut kxx_sum = 0.0;
            let mut kxy_sum = 0.0;
            let mut grad = vec![0.0; d];
            let cx = 2.0 / (n as f64 * n as f64 * sigma2);
            let cy = 2.0 / (n as f64 * m as f64 * sigma2);
            for rj in &rows_x {
                let k = (-gamma * sq_dist(rp, rj)).exp();
                kxx_sum += k;
                for (g, (&u, &v)) in grad.iter_mut().zip(rp.iter().zip(rj.iter())) {
                    *g -= cx * k * (u - v);
                }
            }
            for rj in &rows_y {
                let k = (-gamma * sq_dist(rp, rj)).exp();
                kxy_sum += k;
                for (g, (&u, &v)) in grad.iter_mut().zip(rp.iter().zip(rj.iter())) {
                    *g += cy * k * (u - v);
                }
            }
            (kxx_sum, kxy_sum, grad)
        })
        .collect();

    let kxx: f64 = per_row.iter().map(|r| r.0).sum::<f64>() / (n as f64 * n as f64);
    let kxy: f64 = per_row.iter().map(|r| r.1).sum::<f64>() / (n as f64 * m as f64);
    let kyy = mean_kernel(y, y, gamma);
    let mut grad = Array2::zeros((n, d));
    for (p, (_, _, g)) in per_row.into_iter().enumerate() {
        grad.row_mut(p).assign(&Array1::from_vec(g));
    }
    Ok((kxx - 2.0 * kxy + kyy, grad))
}

/// Kernel mean matching: importance weights for the rows of `source` that
/// align its weighted kernel mean with the `target` kernel mean.
///
/// Minimizes `(1/n^2) w' K w - (2/(n m)) w' kappa` over the feasible set
/// `{ 0 <= w_i <= bound, mean(w) = 1 }` by projected gradient descent with a
/// backtracking line search, so the objective never increases across
/// iterations. `K` is the source Gram matrix and
/// `kappa_i = sum_j k(s_i, t_j)`.
pub fn kmm_weights(
    source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    kernel: &KernelSpec,
    bound: f64,
    iters: usize,
) -> Result<Array1<f64>> {
    kmm_weights_with_trace(source, target, kernel, bound, iters).map(|(w, _)| w)
}

/// [`kmm_weights`] plus the objective value recorded after every iterate,
/// starting with the initial point. Useful for monitoring convergence.
pub fn kmm_weights_with_trace(
    source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    kernel: &KernelSpec,
    bound: f64,
    iters: usize,
) -> Result<(Array1<f64>, Vec<f64>)> {
    check_pair(source, target)?;
    if bound < 1.0 {
        return Err(Error::InvalidParam(format!(
            "kmm bound must be >= 1 so the uniform point is feasible, got {bound}"
        )));
    }
    let n = source.nrows();
    let m = target.nrows();
    let gamma = 0.5 / (kernel.bandwidth * kernel.bandwidth);

    let rows_s: Vec<&[f64]> = (0..n)
        .map(|i| source.row(i).to_slice().expect("contiguous rows"))
        .collect();
    let rows_t: Vec<&[f64]> = (0..m)
        .map(|j| target.row(j).to_slice().expect("contiguous rows"))
        .collect();

    // Dense Gram matrix: n is at most a few thousand in this pipeline, so
    // materializing K keeps each iteration a single mat-vec.
    let mut k_mat = Array2::zeros((n, n));
    let k_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = rows_s[i];
            rows_s
                .iter()
                .map(|rj| (-gamma * sq_dist(ri, rj)).exp())
                .collect()
        })
        .collect();
    for (i, row) in k_rows.into_iter().enumerate() {
        k_mat.row_mut(i).assign(&Array1::from_vec(row));
    }
    let kappa: Array1<f64> = Array1::from_vec(
        (0..n)
            .into_par_iter()
            .map(|i| {
                let ri = rows_s[i];
                rows_t
                    .iter()
                    .map(|rt| (-gamma * sq_dist(ri, rt)).exp())
                    .sum()
            })
            .collect::<Vec<f64>>(),
    );

    let cn = 1.0 / (n as f64 * n as f64);
    let cm = 2.0 / (n as f64 * m as f64);
    let objective = |w: &Array1<f64>, kw: &Array1<f64>| cn * w.dot(kw) - cm * w.dot(&kappa);

    let mut w = Array1::from_elem(n, 1.0);
    let mut kw = k_mat.dot(&w);
    let mut obj = objective(&w, &kw);
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(obj);

    let mut step = 1.0_f64;
    for _ in 0..iters {
        // gradient of the quadratic objective
        let grad = &kw * (2.0 * cn) - &(kappa.clone() * cm);
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = project_box_mean(&(&w - &(grad.clone() * step)), bound);
            let kw_c = k_mat.dot(&candidate);
            let obj_c = objective(&candidate, &kw_c);
            if obj_c <= obj {
                // Accept and let the step grow again slowly.
                w = candidate;
                kw = kw_c;
                obj = obj_c;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Step collapsed to nothing: we are at a stationary point of the
            // projected dynamics.
            trace.push(obj);
            break;
        }
        trace.push(obj);
    }
    Ok((w, trace))
}

/// Euclidean projection onto `{ 0 <= w_i <= bound, mean(w) = 1 }`.
///
/// The projection is `clip(v - tau, 0, bound)` for the unique shift `tau`
/// making the mean equal one; `tau` is found by bisection, which is exact to
/// the tolerance used because the clipped mean is continuous and
/// non-increasing in `tau`.
fn project_box_mean(v: &Array1<f64>, bound: f64) -> Array1<f64> {
    let n = v.len() as f64;
    let mean_of = |tau: f64| -> f64 {
        v.iter().map(|&vi| (vi - tau).clamp(0.0, bound)).sum::<f64>() / n
    };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - bound - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    // mean_of(lo) >= 1 >= mean_of(hi) by construction: at lo nothing clips
    // below, at hi everything clips to zero.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.mapv(|vi| (vi - tau).clamp(0.0, bound))
}

/// Mean squared distance between the column means of two samples — a cheap
/// alignment summary used by diagnostics.
pub fn centroid_distance(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    check_pair(x, y)?;
    let mx = x.mean_axis(Axis(0)).expect("non-empty");
    let my = y.mean_axis(Axis(0)).expect("non-empty");
    Ok((&mx - &my).mapv(|v| v * v).sum().sqrt())
}
