//! Weighted random-forest regression.
//!
//! Trees are grown on weighted bootstrap resamples and split by maximizing
//! the weighted variance reduction of the node. Every tree draws from its own
//! counter-based random stream, so fitting is deterministic for a fixed seed
//! regardless of how many threads participate.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

/// Hyper-parameters for [`fit_forest`].
#[derive(Debug, Clone)]
pub struct ForestConfig {
    /// Number of trees in the ensemble.
    pub n_trees: usize,
    /// Minimum weighted count per leaf, expressed in units of the smallest
    /// positive sample weight present in the tree's bootstrap draw. With unit
    /// weights this reduces to the usual "at least `min_samples_leaf`
    /// samples per leaf" rule, and it is invariant to rescaling all weights.
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each split (1.0 = all features).
    pub max_features_fraction: f64,
    /// Whether each tree is grown on a weighted bootstrap resample; when
    /// false every tree sees the full training set once.
    pub bootstrap: bool,
    /// Base seed; tree `t` uses an independent stream derived from it.
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            min_samples_leaf: 3,
            max_features_fraction: 1.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// One node of a regression tree, stored in a flat arena.
#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// A single fitted regression tree.
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    #[cfg(test)]
    fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(Node::Split {
                feature, threshold, ..
            }) => Some((*feature, *threshold)),
            _ => None,
        }
    }
}

/// A fitted weighted random forest.
#[derive(Debug, Clone)]
pub struct ForestModel {
    pub(crate) trees: Vec<Tree>,
    n_features: usize,
}

impl ForestModel {
    /// Number of features the model was trained on.
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of trees in the ensemble.
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Fits a weighted random forest of `config.n_trees` regression trees.
///
/// Preconditions: `x` is `n x d` with `n >= 1`, `y` has length `n`, and
/// `weights` has length `n` with every entry finite and non-negative and at
/// least one entry positive. Violations return an error rather than a
/// degenerate model.
pub fn fit_forest(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    config: &ForestConfig,
) -> Result<ForestModel> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 || d == 0 {
        return Err(Error::Empty("forest training set".into()));
    }
    if y.len() != n || weights.len() != n {
        return Err(Error::DimMismatch(format!(
            "forest inputs: x has {n} rows, y has {}, weights has {}",
            y.len(),
            weights.len()
        )));
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidParam("n_trees must be positive".into()));
    }
    if config.min_samples_leaf == 0 {
        return Err(Error::InvalidParam(
            "min_samples_leaf must be positive".into(),
        ));
    }
    if !(config.max_features_fraction > 0.0 && config.max_features_fraction <= 1.0) {
        return Err(Error::InvalidParam(
            "max_features_fraction must lie in (0, 1]".into(),
        ));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidParam(format!(
                "sample weight {i} is {w}; weights must be finite and non-negative"
            )));
        }
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidParam(
            "all sample weights are zero".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest training data".into()));
    }

    // Each tree owns stream `t` of a ChaCha generator seeded with the forest
    // seed, so the ensemble is identical whether trees are grown in parallel
    // or one by one.
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            grow_tree(x, y, weights, config, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_features: d,
    })
}

/// Predicts by averaging the per-tree leaf values for each row of `x`.
pub fn predict_forest(model: &ForestModel, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    if x.ncols() != model.n_features {
        return Err(Error::DimMismatch(format!(
            "predict expects {} features, got {}",
            model.n_features,
            x.ncols()
        )));
    }
    let n_trees = model.trees.len() as f64;
    let preds: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            // Sum in fixed tree order so parallel and serial prediction agree
            // bit for bit.
            let sum: f64 = model.trees.iter().map(|t| t.predict_row(row)).sum();
            sum / n_trees
        })
        .collect();
    Ok(Array1::from_vec(preds))
}

/// Work item for the explicit tree-growing stack: a node id waiting for its
/// sample range `[lo, hi)` of the index buffer to be split or sealed.
struct WorkItem {
    node: usize,
    lo: usize,
    hi: usize,
}

fn grow_tree(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n = x.nrows();
    let d = x.ncols();

    // Bootstrap draw: `n` indices with probability proportional to weight.
    // Drawn instances keep their original weight, so duplicating a sample at
    // half weight is equivalent to drawing the full-weight sample.
    let mut idx: Vec<usize> = if config.bootstrap {
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &w in weights.iter() {
            acc += w;
            cdf.push(acc);
        }
        let total = acc;
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * total;
                // partition_point returns the first index with cdf > u.
                cdf.partition_point(|&c| c <= u).min(n - 1)
            })
            .collect()
    } else {
        (0..n).collect()
    };

    // The leaf floor is expressed relative to the smallest positive weight in
    // this tree's draw, which makes the stopping rule invariant to rescaling
    // all weights by a constant.
    let min_pos_w = idx
        .iter()
        .map(|&i| weights[i])
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let leaf_floor = if min_pos_w.is_finite() {
        config.min_samples_leaf as f64 * min_pos_w
    } else {
        // Degenerate draw of all-zero-weight samples: one leaf with the
        // weighted mean of the full training set as a safe constant.
        let model_mean = weighted_mean(y, weights);
        return Tree {
            nodes: vec![Node::Leaf { value: model_mean }],
        };
    };

    let n_split_features = ((config.max_features_fraction * d as f64).ceil() as usize)
        .clamp(1, d);

    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![WorkItem {
        node: 0,
        lo: 0,
        hi: idx.len(),
    }];
    let mut feature_pool: Vec<usize> = (0..d).collect();

    while let Some(item) = stack.pop() {
        let slice = &idx[item.lo..item.hi];
        let (w_sum, wy_sum, wyy_sum) = moments(slice, y, weights);
        let node_value = if w_sum > 0.0 { wy_sum / w_sum } else { 0.0 };
        let node_sse = (wyy_sum - wy_sum * wy_sum / w_sum.max(f64::MIN_POSITIVE)).max(0.0);

        // Stop on exhausted variance or when no split could satisfy the
        // weighted leaf floor on both sides.
        if node_sse <= 1e-12 || w_sum < 2.0 * leaf_floor {
            nodes[item.node] = Node::Leaf { value: node_value };
            continue;
        }

        // Optional feature subsampling: a partial Fisher-Yates shuffle of the
        // feature pool selects the candidate set for this node.
        let candidates: &[usize] = if n_split_features == d {
            &feature_pool
        } else {
            for k in 0..n_split_features {
                let j = k + rng.random_range(0..(d - k));
                feature_pool.swap(k, j);
            }
            feature_pool[..n_split_features].sort_unstable();
            &feature_pool[..n_split_features]
        };

        let best = best_split(
            slice,
            x,
            y,
            weights,
            candidates,
            leaf_floor,
            NodeMoments {
                w: w_sum,
                wy: wy_sum,
                wyy: wyy_sum,
                sse: node_sse,
            },
        );

        let Some((feature, threshold)) = best else {
            nodes[item.node] = Node::Leaf { value: node_value };
            continue;
        };

        // Partition the index range in place, preserving relative order so
        // the layout (and hence any later stochastic choice) is reproducible.
        let mut buf: Vec<usize> = Vec::with_capacity(item.hi - item.lo);
        let mut mid = item.lo;
        for k in item.lo..item.hi {
            let i = idx[k];
            if x[(i, feature)] <= threshold {
                idx[mid] = i;
                mid += 1;
            } else {
                buf.push(i);
            }
        }
        idx[mid..item.hi].copy_from_slice(&buf);

        let left_id = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right_id = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[item.node] = Node::Split {
            feature,
            threshold,
            left: left_id as u32,
            right: right_id as u32,
        };
        stack.push(WorkItem {
            node: right_id,
            lo: mid,
            hi: item.hi,
        });
        stack.push(WorkItem {
            node: left_id,
            lo: item.lo,
            hi: mid,
        });
    }

    Tree { nodes }
}

fn weighted_mean(y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> f64 {
    let sw: f64 = w.sum();
    if sw > 0.0 {
        y.iter().zip(w.iter()).map(|(&yi, &wi)| wi * yi).sum::<f64>() / sw
    } else {
        y.mean().unwrap_or(0.0)
    }
}

fn moments(slice: &[usize], y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> (f64, f64, f64) {
    let mut sw = 0.0;
    let mut swy = 0.0;
    let mut swyy = 0.0;
    for &i in slice {
        let wi = w[i];
        let yi = y[i];
        sw += wi;
        swy += wi * yi;
        swyy += wi * yi * yi;
    }
    (sw, swy, swyy)
}

/// Totals of a node's weighted moments, used to derive right-child moments
/// from a left-to-right prefix scan.
#[derive(Clone, Copy)]
struct NodeMoments {
    w: f64,
    wy: f64,
    wyy: f64,
    sse: f64,
}

/// Scans candidate features for the split with the largest weighted variance
/// reduction. Candidate thresholds are midpoints between consecutive distinct
/// sorted feature values; ties are broken toward the lowest feature index and
/// then the lowest threshold by the strict `>` comparison in scan order.
fn best_split(
    slice: &[usize],
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    w: ArrayView1<'_, f64>,
    candidates: &[usize],
    leaf_floor: f64,
    node: NodeMoments,
) -> Option<(usize, f64)> {
    let mut best_gain = 0.0_f64;
    let mut best: Option<(usize, f64)> = None;
    let mut order: Vec<usize> = Vec::with_capacity(slice.len());

    for &feature in candidates {
        order.clear();
        order.extend_from_slice(slice);
        order.sort_by(|&a, &b| {
            x[(a, feature)]
                .partial_cmp(&x[(b, feature)])
                .expect("finite feature values")
                .then(a.cmp(&b))
        });

        let mut w_left = 0.0;
        let mut wy_left = 0.0;
        let mut wyy_left = 0.0;
        for k in 0..order.len() - 1 {
            let i = order[k];
            let wi = w[i];
            let yi = y[i];
            w_left += wi;
            wy_left += wi * yi;
            wyy_left += wi * yi * yi;

            let a = x[(i, feature)];
            let b = x[(order[k + 1], feature)];
            if a == b {
                continue;
            }
            let threshold = 0.5 * (a + b);
            // Guard against midpoint collapse onto the upper value, which
            // would route both neighbours to the same side.
            if threshold >= b {
                continue;
            }

            let w_right = node.w - w_left;
            if w_left < leaf_floor || w_right < leaf_floor {
                continue;
            }
            let sse_left =
                (wyy_left - wy_left * wy_left / w_left.max(f64::MIN_POSITIVE)).max(0.0);
            let wy_right = node.wy - wy_left;
            let wyy_right = node.wyy - wyy_left;
            let sse_right =
                (wyy_right - wy_right * wy_right / w_right.max(f64::MIN_POSITIVE)).max(0.0);
            let gain = node.sse - sse_left - sse_right;
            if gain > best_gain {
                best_gain = gain;
                best = Some((feature, threshold));
            }
        }
    }
    best
}
