// SPDX-License-Identifier: Apache-2.0

//! Branch and bound over the input box.
//!
//! Boxes are explored best-first by their certification shortfall. Each new
//! box is checked at its center for a concrete counterexample, pruned when
//! interval bounds certify the postcondition (or a linear precondition is
//! infeasible), and otherwise bisected along its widest side.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::TestCase;

use super::ibp::{BoundsBox, Certifier};
use super::{Deadline, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BabConfig {
    /// Smallest side length that is still split. `None` means
    /// `1e-4 * 2 * domain_bound`.
    pub min_box_width: Option<f64>,
    pub max_splits: usize,
}

impl Default for BabConfig {
    fn default() -> Self {
        BabConfig {
            min_box_width: None,
            max_splits: 100_000,
        }
    }
}

impl BabConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.min_box_width {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidConfig("min_box_width must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    fn resolution(&self, domain_bound: f64) -> f64 {
        self.min_box_width.unwrap_or(1e-4 * 2.0 * domain_bound)
    }
}

struct Node {
    score: f64,
    seq: u64,
    region: BoundsBox,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap on score, earliest node first among equals
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Outcome {
    Pruned,
    Violation(Vec<f64>),
    Open(f64),
}

pub fn bab_verify(tc: &TestCase, cfg: &BabConfig, deadline: Deadline) -> Verdict {
    let root: BoundsBox = tc.spec.bounding_region().into();
    if root.is_empty() {
        return Verdict::Holds;
    }
    let certifier = Certifier::new(tc);
    let resolution = cfg.resolution(tc.spec.domain_bound());

    let examine = |b: &BoundsBox| -> Outcome {
        if certifier.linear_pre_infeasible(b) {
            return Outcome::Pruned;
        }
        let center = b.center();
        if matches!(tc.violates(&center), Ok(true)) {
            return Outcome::Violation(center);
        }
        let a = certifier.assess(b);
        if a.certified {
            Outcome::Pruned
        } else {
            Outcome::Open(a.score)
        }
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    match examine(&root) {
        Outcome::Pruned => return Verdict::Holds,
        Outcome::Violation(cex) => return Verdict::Violated { cex },
        Outcome::Open(score) => heap.push(Node { score, seq, region: root }),
    }

    let mut splits = 0usize;
    let mut unresolved = 0usize;
    while let Some(node) = heap.pop() {
        if splits.is_multiple_of(64) && deadline.expired() {
            return Verdict::Timeout;
        }
        let (_, width) = node.region.widest();
        // NaN widths count as resolved
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(width > resolution) {
            unresolved += 1;
            continue;
        }
        if splits >= cfg.max_splits {
            return Verdict::unknown(format!("split budget of {} exhausted", cfg.max_splits));
        }
        splits += 1;
        let (left, right) = node.region.bisect();
        for child in [left, right] {
            match examine(&child) {
                Outcome::Pruned => {}
                Outcome::Violation(cex) => return Verdict::Violated { cex },
                Outcome::Open(score) => {
                    seq += 1;
                    heap.push(Node { score, seq, region: child });
                }
            }
        }
    }
    if unresolved > 0 {
        Verdict::unknown(format!("{unresolved} boxes below resolution {resolution:e}"))
    } else {
        Verdict::Holds
    }
}
