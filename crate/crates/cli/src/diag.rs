//! Alignment diagnostics: centroid distances, per-row displacement, and a
//! two-dimensional PCA view of source / generated / target features.
//!
//! The covariance is tiny (transfer features are 4-d), so the
//! eigendecomposition uses cyclic Jacobi rotations — exact, dependency-free,
//! and deterministic.

use anyhow::{bail, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rotda_core::mmd::centroid_distance;
use rotda_core::netgen::TrainTrace;

/// Off-diagonal magnitude below which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-10;

/// Population covariance of the rows of `x` (divides by `n`).
pub fn covariance(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n == 0 {
        bail!("covariance of an empty sample");
    }
    let d = x.ncols();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let mut cov = Array2::zeros((d, d));
    for row in x.outer_iter() {
        let centered = &row - &mean;
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] += centered[i] * centered[j];
            }
        }
    }
    cov /= n as f64;
    Ok(cov)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors-as-columns), unsorted.
pub fn jacobi_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = a.nrows();
    if a.ncols() != d {
        bail!("matrix must be square, got {}x{}", d, a.ncols());
    }
    for i in 0..d {
        for j in 0..d {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-9 {
                bail!("matrix is not symmetric at ({i}, {j})");
            }
        }
    }
    let mut b = a.clone();
    let mut v = Array2::eye(d);
    for _sweep in 0..100 {
        let mut max_off = 0.0_f64;
        for p in 0..d {
            for q in (p + 1)..d {
                max_off = max_off.max(b[[p, q]].abs());
            }
        }
        if max_off < JACOBI_TOL {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = b[[p, q]];
                if apq.abs() < JACOBI_TOL {
                    continue;
                }
                // Rotation angle that annihilates b[p][q].
                let tau = (b[[q, q]] - b[[p, p]]) / (2.0 * apq);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // B <- J' B J applied as column then row updates.
                for k in 0..d {
                    let bkp = b[[k, p]];
                    let bkq = b[[k, q]];
                    b[[k, p]] = c * bkp - s * bkq;
                    b[[k, q]] = s * bkp + c * bkq;
                }
                for k in 0..d {
                    let bpk = b[[p, k]];
                    let bqk = b[[q, k]];
                    b[[p, k]] = c * bpk - s * bqk;
                    b[[q, k]] = s * bpk + c * bqk;
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals = Array1::from_iter((0..d).map(|i| b[[i, i]]));
    Ok((eigvals, v))
}

/// Top-2 principal axes of a covariance matrix, columns of a `d x 2` basis.
///
/// Eigenpairs are sorted by descending eigenvalue; each vector's sign is
/// fixed so its largest-magnitude entry (first on ties) is positive. When
/// fewer than two eigenvalues exceed 1e-12 the covariance is degenerate and
/// the basis falls back to the first two feature axes, flagged `true`.
pub fn top2_basis(cov: &Array2<f64>) -> Result<(Array2<f64>, bool)> {
    let d = cov.nrows();
    if d < 2 {
        bail!("need at least two feature dimensions, got {d}");
    }
    let (eigvals, eigvecs) = jacobi_eigen(cov)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eigvals[j]
            .partial_cmp(&eigvals[i])
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let informative = eigvals.iter().filter(|&&l| l > 1e-12).count();
    if informative < 2 {
        let mut basis = Array2::zeros((d, 2));
        basis[[0, 0]] = 1.0;
        basis[[1, 1]] = 1.0;
        return Ok((basis, true));
    }
    let mut basis = Array2::zeros((d, 2));
    for (col, &idx) in order.iter().take(2).enumerate() {
        let mut vec = eigvecs.column(idx).to_owned();
        // Deterministic sign: the largest-magnitude entry points positive.
        let mut anchor = 0;
        for k in 1..d {
            if vec[k].abs() > vec[anchor].abs() {
                anchor = k;
            }
        }
        if vec[anchor] < 0.0 {
            vec.mapv_inplace(|x| -x);
        }
        basis.column_mut(col).assign(&vec);
    }
    Ok((basis, false))
}

/// Alignment summary of one generator run.
#[derive(Debug, Clone)]
pub struct AlignmentDiag {
    /// Distance between source and target feature centroids before
    /// generation.
    pub centroid_before: f64,
    /// Same distance with generated source features.
    pub centroid_after: f64,
    /// Mean per-row Euclidean displacement `||G(x) - x||`.
    pub mean_displacement: f64,
    /// Median per-row displacement (average-of-middles for even counts).
    pub median_displacement: f64,
    /// True when PCA fell back to raw feature axes.
    pub pca_fallback: bool,
    /// Source rows projected to the top-2 principal plane, `n x 2`.
    pub source_points: Array2<f64>,
    /// Generated source rows, projected.
    pub generated_points: Array2<f64>,
    /// Target rows, projected.
    pub target_points: Array2<f64>,
    /// Generator training loss trace.
    pub trace: TrainTrace,
}

/// Builds the diagnostics from source, generated-source, and target feature
/// matrices (all in the same standardized space).
///
/// The PCA basis comes from the pooled source + target covariance — the
/// underlying data only, so the view does not move with generator training.
pub fn alignment_diag(
    source: ArrayView2<'_, f64>,
    generated: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    trace: TrainTrace,
) -> Result<AlignmentDiag> {
    if source.nrows() != generated.nrows() || source.ncols() != generated.ncols() {
        bail!(
            "generated features must match source shape: {}x{} vs {}x{}",
            generated.nrows(),
            generated.ncols(),
            source.nrows(),
            source.ncols()
        );
    }
    let centroid_before = centroid_distance(source, target)?;
    let centroid_after = centroid_distance(generated.view(), target)?;

    let mut displacements: Vec<f64> = source
        .outer_iter()
        .zip(generated.outer_iter())
        .map(|(s, g)| {
            s.iter()
                .zip(g.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mean_displacement = displacements.iter().sum::<f64>() / displacements.len() as f64;
    displacements.sort_by(|a, b| a.partial_cmp(b).expect("finite displacement"));
    let n = displacements.len();
    let median_displacement = if n % 2 == 1 {
        displacements[n / 2]
    } else {
        0.5 * (displacements[n / 2 - 1] + displacements[n / 2])
    };

    let pooled = ndarray::concatenate(Axis(0), &[source, target])?;
    let cov = covariance(pooled.view())?;
    let (basis, pca_fallback) = top2_basis(&cov)?;
    let mean = pooled.mean_axis(Axis(0)).expect("non-empty");
    let project = |x: ArrayView2<'_, f64>| -> Array2<f64> {
        let centered = &x.to_owned() - &mean;
        centered.dot(&basis)
    };

    Ok(AlignmentDiag {
        centroid_before,
        centroid_after,
        mean_displacement,
        median_displacement,
        pca_fallback,
        source_points: project(source),
        generated_points: project(generated),
        target_points: project(target),
        trace,
    })
}
