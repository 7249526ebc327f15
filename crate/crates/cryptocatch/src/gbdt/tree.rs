//! Regression trees grown by exact greedy split search on gradient/hessian
//! sums, with midpoint thresholds between adjacent distinct values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// A binary regression tree stored as a node arena; index 0 is the root.
/// Rows route left when `row[feature] < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Depth of the tree (0 for a single leaf).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Accumulate per-feature split gain into `into`.
    pub fn accumulate_gain(&self, into: &mut [f64]) {
        for node in &self.nodes {
            if let TreeNode::Split { feature, gain, .. } = node {
                into[*feature] += gain;
            }
        }
    }

    /// The root split, when the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64, f64)> {
        match &self.nodes[0] {
            TreeNode::Split {
                feature,
                threshold,
                gain,
                ..
            } => Some((*feature, *threshold, *gain)),
            TreeNode::Leaf { .. } => None,
        }
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub learning_rate: f64,
}

const CLOSED: u32 = u32::MAX;

struct OpenNode {
    arena: usize,
    g: f64,
    h: f64,
    count: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    g_left: f64,
    h_left: f64,
    count_left: usize,
}

#[derive(Clone, Copy, Default)]
struct ScanState {
    prev: f64,
    has_prev: bool,
    g_left: f64,
    h_left: f64,
    count_left: usize,
}

/// Grow one tree level by level.
///
/// Split gain is `0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) - gamma`;
/// splits with gain <= 0 or a child hessian sum below `min_child_weight` are
/// rejected. Candidate thresholds are midpoints between adjacent distinct
/// values of in-sample rows; the best candidate wins, ties resolved toward
/// the lower feature index, then the lower threshold. Leaf values are
/// `-learning_rate * G / (H + lambda)`.
pub(crate) fn grow_tree(
    rows: &[Vec<f64>],
    sorted_columns: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    in_sample: &[bool],
    columns: &[usize],
    p: &GrowParams,
) -> DecisionTree {
    let n = rows.len();
    let leaf_value = |g: f64, h: f64| -p.learning_rate * g / (h + p.lambda);

    let mut node_of_row = vec![CLOSED; n];
    let mut root = OpenNode {
        arena: 0,
        g: 0.0,
        h: 0.0,
        count: 0,
    };
    for r in 0..n {
        if in_sample[r] {
            node_of_row[r] = 0;
            root.g += grad[r];
            root.h += hess[r];
            root.count += 1;
        }
    }

    let mut nodes = vec![TreeNode::Leaf {
        value: leaf_value(root.g, root.h),
    }];
    let mut frontier = vec![root];

    for _ in 0..p.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut slot_of_arena = vec![usize::MAX; nodes.len()];
        for (slot, node) in frontier.iter().enumerate() {
            slot_of_arena[node.arena] = slot;
        }

        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        for &feature in columns {
            let mut states = vec![ScanState::default(); frontier.len()];
            for &row32 in &sorted_columns[feature] {
                let row = row32 as usize;
                let arena = node_of_row[row];
                if arena == CLOSED {
                    continue;
                }
                let slot = slot_of_arena[arena as usize];
                if slot == usize::MAX {
                    continue;
                }
                let value = rows[row][feature];
                let state = &mut states[slot];
                if state.has_prev && value > state.prev {
                    let threshold = state.prev + (value - state.prev) / 2.0;
                    let node = &frontier[slot];
                    let (gl, hl) = (state.g_left, state.h_left);
                    let (gr, hr) = (node.g - gl, node.h - hl);
                    // threshold > prev guards against float collapse on
                    // adjacent values, which would desync the partition.
                    if threshold > state.prev
                        && hl >= p.min_child_weight
                        && hr >= p.min_child_weight
                    {
                        let gain = 0.5
                            * (gl * gl / (hl + p.lambda) + gr * gr / (hr + p.lambda)
                                - node.g * node.g / (node.h + p.lambda))
                            - p.gamma;
                        if best[slot].map_or(true, |b| gain > b.gain) {
                            best[slot] = Some(Candidate {
                                feature,
                                threshold,
                                gain,
                                g_left: gl,
                                h_left: hl,
                                count_left: state.count_left,
                            });
                        }
                    }
                }
                state.g_left += grad[row];
                state.h_left += hess[row];
                state.count_left += 1;
                state.prev = value;
                state.has_prev = true;
            }
        }

        let mut next = Vec::new();
        for (slot, node) in frontier.iter().enumerate() {
            let Some(cand) = best[slot].filter(|c| c.gain > 0.0) else {
                continue; // stays a leaf; its rows close during repartition
            };
            let (gl, hl) = (cand.g_left, cand.h_left);
            let (gr, hr) = (node.g - gl, node.h - hl);
            let left = nodes.len();
            nodes.push(TreeNode::Leaf {
                value: leaf_value(gl, hl),
            });
            let right = nodes.len();
            nodes.push(TreeNode::Leaf {
                value: leaf_value(gr, hr),
            });
            nodes[node.arena] = TreeNode::Split {
                feature: cand.feature,
                threshold: cand.threshold,
                left,
                right,
                gain: cand.gain,
            };
            next.push(OpenNode {
                arena: left,
                g: gl,
                h: hl,
                count: cand.count_left,
            });
            next.push(OpenNode {
                arena: right,
                g: gr,
                h: hr,
                count: node.count - cand.count_left,
            });
        }

        for row in 0..n {
            let arena = node_of_row[row];
            if arena == CLOSED {
                continue;
            }
            let slot = slot_of_arena[arena as usize];
            if slot == usize::MAX {
                continue;
            }
            node_of_row[row] = match &nodes[arena as usize] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if rows[row][*feature] < *threshold {
                        *left as u32
                    } else {
                        *right as u32
                    }
                }
                TreeNode::Leaf { .. } => CLOSED,
            };
        }
        frontier = next;
    }
    DecisionTree { nodes }
}

/// Per-feature row orderings, computed once per training run.
pub(crate) fn presort_columns(rows: &[Vec<f64>], n_features: usize) -> Vec<Vec<u32>> {
    (0..n_features)
        .map(|f| {
            let mut order: Vec<u32> = (0..rows.len() as u32).collect();
            order.sort_by(|&a, &b| rows[a as usize][f].total_cmp(&rows[b as usize][f]));
            order
        })
        .collect()
}
