//! Regression trees grown with exact greedy second-order splits.

use crate::error::{Error, Result};

use super::BoostConfig;

/// One node of a flat tree array. Leaves carry the raw Newton value
/// `-G / (H + lambda)`; the learning rate is applied at accumulation time.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A regression tree stored as a flat node array with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Routes a feature vector to its leaf value. Samples with a feature
    /// value strictly below the threshold go left.
    pub fn leaf_value(&self, features: &[f64]) -> Result<f64> {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return Ok(*value),
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let value = features.get(*feature).ok_or(Error::DimensionMismatch {
                        expected: *feature + 1,
                        actual: features.len(),
                    })?;
                    at = if *value < *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Same routing against column-major training data.
    fn leaf_value_by_row(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if columns[*feature][row] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Outcome of searching one feature column for a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDecision {
    pub gain: f64,
    pub threshold: f64,
    pub feasible: bool,
}

impl SplitDecision {
    fn infeasible() -> Self {
        SplitDecision {
            gain: f64::NEG_INFINITY,
            threshold: 0.0,
            feasible: false,
        }
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Exact greedy split search over one feature column.
///
/// Candidate thresholds are midpoints of consecutive distinct sorted
/// values; the winning gain is
/// `0.5 * [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma`. A split is
/// infeasible when no candidate keeps `min_child_weight` of hessian on both
/// sides or the best gain is not strictly positive. Ties prefer the lowest
/// threshold.
pub fn find_best_split(
    gradients: &[f64],
    hessians: &[f64],
    feature_column: &[f64],
    config: &BoostConfig,
) -> Result<SplitDecision> {
    if gradients.len() != hessians.len() || gradients.len() != feature_column.len() {
        return Err(Error::LengthMismatch(format!(
            "gradients {}, hessians {}, feature column {}",
            gradients.len(),
            hessians.len(),
            feature_column.len()
        )));
    }
    let n = gradients.len();
    if n < 2 {
        return Ok(SplitDecision::infeasible());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        feature_column[a]
            .partial_cmp(&feature_column[b])
            .expect("feature values are finite")
            .then(a.cmp(&b))
    });
    let decision = scan_sorted(
        &order,
        |i| feature_column[i],
        |i| gradients[i],
        |i| hessians[i],
        config,
    );
    Ok(decision)
}

/// Scans a pre-sorted ordering for the best boundary. Shared by the
/// public single-column search and the tree grower.
fn scan_sorted(
    order: &[usize],
    value_of: impl Fn(usize) -> f64,
    grad_of: impl Fn(usize) -> f64,
    hess_of: impl Fn(usize) -> f64,
    config: &BoostConfig,
) -> SplitDecision {
    let mut total_g = 0.0;
    let mut total_h = 0.0;
    for &i in order {
        total_g += grad_of(i);
        total_h += hess_of(i);
    }
    let parent = score(total_g, total_h, config.lambda);

    let mut best = SplitDecision::infeasible();
    let mut left_g = 0.0;
    let mut left_h = 0.0;
    for w in 0..order.len() - 1 {
        let i = order[w];
        left_g += grad_of(i);
        left_h += hess_of(i);
        let lo = value_of(i);
        let hi = value_of(order[w + 1]);
        if lo == hi {
            continue;
        }
        let threshold = lo + (hi - lo) / 2.0;
        // The midpoint must actually separate the two values under the
        // `value < threshold` routing rule; skip degenerate boundaries
        // where rounding collapses it onto an endpoint.
        if !(lo < threshold && threshold <= hi) {
            continue;
        }
        let right_g = total_g - left_g;
        let right_h = total_h - left_h;
        if left_h < config.min_child_weight || right_h < config.min_child_weight {
            continue;
        }
        let gain = 0.5
            * (score(left_g, left_h, config.lambda) + score(right_g, right_h, config.lambda)
                - parent)
            - config.gamma;
        if gain > best.gain {
            best = SplitDecision {
                gain,
                threshold,
                feasible: true,
            };
        }
    }
    best.feasible = best.feasible && best.gain > 0.0;
    best
}

/// Column-major training view used by the tree grower.
pub(crate) struct GrowContext<'a> {
    pub columns: &'a [Vec<f64>],
    pub gradients: &'a [f64],
    pub hessians: &'a [f64],
    pub config: &'a BoostConfig,
}

/// Grows one tree depth-first. `sorted` holds, per feature, the node's row
/// indices in ascending feature order; partitions preserve that order so
/// children never re-sort.
pub(crate) fn grow_tree(ctx: &GrowContext, sorted: Vec<Vec<usize>>) -> Tree {
    let mut nodes = Vec::new();
    grow_node(ctx, sorted, 0, &mut nodes);
    Tree { nodes }
}

fn leaf_from_rows(ctx: &GrowContext, rows: &[usize]) -> Node {
    let g: f64 = rows.iter().map(|&i| ctx.gradients[i]).sum();
    let h: f64 = rows.iter().map(|&i| ctx.hessians[i]).sum();
    Node::Leaf {
        value: -g / (h + ctx.config.lambda),
    }
}

fn grow_node(
    ctx: &GrowContext,
    sorted: Vec<Vec<usize>>,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let rows = &sorted[0];
    if depth >= ctx.config.max_depth || rows.len() < 2 {
        let idx = nodes.len();
        nodes.push(leaf_from_rows(ctx, rows));
        return idx;
    }

    // Best split across features: lowest feature index wins ties, then
    // lowest threshold (both enforced by strict improvement on an
    // ascending scan).
    let mut best: Option<(usize, SplitDecision)> = None;
    for (feature, order) in sorted.iter().enumerate() {
        let decision = scan_sorted(
            order,
            |i| ctx.columns[feature][i],
            |i| ctx.gradients[i],
            |i| ctx.hessians[i],
            ctx.config,
        );
        if !decision.feasible {
            continue;
        }
        match &best {
            Some((_, held)) if decision.gain <= held.gain => {}
            _ => best = Some((feature, decision)),
        }
    }

    let Some((feature, decision)) = best else {
        let idx = nodes.len();
        nodes.push(leaf_from_rows(ctx, rows));
        return idx;
    };

    let goes_left = |row: usize| ctx.columns[feature][row] < decision.threshold;
    let mut left_sorted = Vec::with_capacity(sorted.len());
    let mut right_sorted = Vec::with_capacity(sorted.len());
    for order in &sorted {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &row in order {
            if goes_left(row) {
                left.push(row);
            } else {
                right.push(row);
            }
        }
        left_sorted.push(left);
        right_sorted.push(right);
    }
    drop(sorted);

    let idx = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 }); // placeholder, patched below
    let left = grow_node(ctx, left_sorted, depth + 1, nodes);
    let right = grow_node(ctx, right_sorted, depth + 1, nodes);
    nodes[idx] = Node::Internal {
        feature,
        threshold: decision.threshold,
        left,
        right,
    };
    idx
}

/// Applies one grown tree to every training row, scaled by eta.
pub(crate) fn accumulate_margins(tree: &Tree, columns: &[Vec<f64>], eta: f64, margins: &mut [f64]) {
    for (row, margin) in margins.iter_mut().enumerate() {
        *margin += eta * tree.leaf_value_by_row(columns, row);
    }
}
