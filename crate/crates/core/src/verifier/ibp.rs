// SPDX-License-Identifier: Apache-2.0

//! Interval bound propagation.
//!
//! The affine step accumulates `w * lo` / `w * hi` terms in exactly the order
//! [`crate::network`] uses for the concrete forward pass. Floating-point
//! rounding is monotone, so the resulting bounds enclose the *computed*
//! outputs of every input in the box, with no widening needed.

use crate::network::{Activation, Layer, Network};
use crate::spec::{Comparison, InputConstraint, OutputProperty, Region, TestCase};

use super::Verdict;

/// Relative slack applied when certifying through the folded last layer,
/// whose accumulation order differs from the forward pass.
const FOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundsBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        BoundsBox { lower, upper }
    }

    pub fn point(x: &[f64]) -> Self {
        BoundsBox::new(x.to_vec(), x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Empty when some `lower > upper` (or either side is NaN).
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn is_empty(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) / 2.0)
            .collect()
    }

    /// `(dimension, width)` of the widest side.
    pub fn widest(&self) -> (usize, f64) {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, w)| if w > best.1 { (i, w) } else { best })
    }

    /// Splits the widest side at its midpoint.
    pub fn bisect(&self) -> (BoundsBox, BoundsBox) {
        let (d, _) = self.widest();
        let mid = self.lower[d] + (self.upper[d] - self.lower[d]) / 2.0;
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[d] = mid;
        right.lower[d] = mid;
        (left, right)
    }
}

impl From<Region> for BoundsBox {
    fn from(r: Region) -> Self {
        BoundsBox::new(r.lower, r.upper)
    }
}

/// Interval of `sum_i coeffs[i] * v_i` for `v` in the box, accumulated in the
/// same order as a plain dot product.
#[inline]
pub(crate) fn interval_dot(coeffs: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (w, (l, u)) in coeffs.iter().zip(lower.iter().zip(upper)) {
        if *w >= 0.0 {
            lo += w * l;
            hi += w * u;
        } else {
            lo += w * u;
            hi += w * l;
        }
    }
    (lo, hi)
}

fn layer_bounds(layer: &Layer, input: &BoundsBox) -> BoundsBox {
    let mut lower = Vec::with_capacity(layer.rows());
    let mut upper = Vec::with_capacity(layer.rows());
    for (row, &b) in layer.weights().iter().zip(layer.bias()) {
        let (lo, hi) = interval_dot(row, &input.lower, &input.upper);
        let act = layer.activation();
        lower.push(act.apply(lo + b));
        upper.push(act.apply(hi + b));
    }
    BoundsBox { lower, upper }
}

/// Bounds after the first `count` layers.
pub(crate) fn propagate(net: &Network, input: &BoundsBox, count: usize) -> BoundsBox {
    net.layers()[..count]
        .iter()
        .fold(input.clone(), |acc, layer| layer_bounds(layer, &acc))
}

/// Output enclosure of `net` over `input`. An empty input yields an empty
/// output (the marker is propagated unchanged).
pub fn ibp_bounds(net: &Network, input: &BoundsBox) -> BoundsBox {
    if input.is_empty() {
        let m = net.output_dim();
        return BoundsBox::new(vec![f64::INFINITY; m], vec![f64::NEG_INFINITY; m]);
    }
    propagate(net, input, net.layers().len())
}

/// One linear condition `coeffs . y + offset > 0` (strict) or `>= 0` that the
/// postcondition needs on the output `y`.
#[derive(Debug, Clone)]
struct Requirement {
    coeffs: Vec<f64>,
    offset: f64,
    strict: bool,
    /// Last-layer fold: `folded . h + folded_offset` equals `coeffs . y + offset`
    /// in real arithmetic when the last activation is linear.
    folded: Option<(Vec<f64>, f64)>,
    /// Both compared outputs come from bitwise-identical rows, so they are
    /// always exactly equal.
    tie: bool,
}

/// Outcome of bounding one box.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Assessment {
    pub certified: bool,
    /// Largest shortfall over the requirements; higher means a violation is
    /// more plausible inside the box.
    pub score: f64,
}

/// Precomputed postcondition certification for one test case.
#[derive(Debug, Clone)]
pub(crate) struct Certifier<'a> {
    net: &'a Network,
    requirements: Vec<Requirement>,
    linear_pre: Vec<(&'a [f64], Comparison, f64)>,
}

impl<'a> Certifier<'a> {
    pub fn new(tc: &'a TestCase) -> Self {
        let net = &tc.network;
        let m = net.output_dim();
        let mut requirements = Vec::new();
        match tc.spec.postcondition() {
            OutputProperty::LinearOut { coeffs, op, rhs } => {
                // Le: rhs - c.y >= 0 ; Ge: c.y - rhs >= 0
                let (sign, offset) = match op {
                    Comparison::Le => (-1.0, *rhs),
                    Comparison::Ge => (1.0, -*rhs),
                };
                requirements.push(Requirement {
                    coeffs: coeffs.iter().map(|c| sign * c).collect(),
                    offset,
                    strict: false,
                    folded: None,
                    tie: false,
                });
            }
            OutputProperty::ArgmaxEq { label } => {
                for j in (0..m).filter(|j| j != label) {
                    let mut c = vec![0.0; m];
                    c[*label] = 1.0;
                    c[j] = -1.0;
                    requirements.push(Requirement {
                        coeffs: c,
                        offset: 0.0,
                        // the first maximal index wins ties
                        strict: j < *label,
                        folded: None,
                        tie: identical_rows(net, *label, j),
                    });
                }
            }
        }
        if let Some(last) = net.layers().last() {
            if last.activation() == Activation::Linear {
                for r in &mut requirements {
                    r.folded = Some(fold(last, &r.coeffs, r.offset));
                }
            }
        }
        let linear_pre = tc
            .spec
            .preconditions()
            .iter()
            .filter_map(|c| match c {
                InputConstraint::Linear { coeffs, op, rhs } => Some((coeffs.as_slice(), *op, *rhs)),
                _ => None,
            })
            .collect();
        Certifier {
            net,
            requirements,
            linear_pre,
        }
    }

    /// True when some linear precondition has no solution inside the box.
    pub fn linear_pre_infeasible(&self, b: &BoundsBox) -> bool {
        self.linear_pre.iter().any(|(coeffs, op, rhs)| {
            let (lo, hi) = interval_dot(coeffs, &b.lower, &b.upper);
            match op {
                Comparison::Le => lo > *rhs,
                Comparison::Ge => hi < *rhs,
            }
        })
    }

    pub fn assess(&self, b: &BoundsBox) -> Assessment {
        let layers = self.net.layers().len();
        let hidden = propagate(self.net, b, layers - 1);
        let out = layer_bounds(&self.net.layers()[layers - 1], &hidden);
        let mut certified = true;
        let mut score = f64::NEG_INFINITY;
        for r in &self.requirements {
            if r.tie {
                if r.strict {
                    certified = false;
                    score = f64::INFINITY;
                }
                continue;
            }
            let (lo, _) = interval_dot(&r.coeffs, &out.lower, &out.upper);
            let plain = lo + r.offset;
            let mut ok = if r.strict { plain > 0.0 } else { plain >= 0.0 };
            let mut best = plain;
            if let Some((coeffs, offset)) = &r.folded {
                let (flo, _) = interval_dot(coeffs, &hidden.lower, &hidden.upper);
                let magnitude = 1.0
                    + offset.abs()
                    + coeffs
                        .iter()
                        .zip(hidden.lower.iter().zip(&hidden.upper))
                        .map(|(c, (l, u))| c.abs() * l.abs().max(u.abs()))
                        .sum::<f64>();
                let folded = flo + offset - FOLD_SLACK * magnitude;
                ok |= if r.strict { folded > 0.0 } else { folded >= 0.0 };
                if folded > best || best.is_nan() {
                    best = folded;
                }
            }
            if !ok {
                certified = false;
            }
            let shortfall = if best.is_nan() { f64::INFINITY } else { -best };
            score = score.max(shortfall);
        }
        Assessment { certified, score }
    }
}

fn identical_rows(net: &Network, a: usize, b: usize) -> bool {
    let Some(last) = net.layers().last() else {
        return false;
    };
    let same = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
    same(&last.weights()[a], &last.weights()[b]) && last.bias()[a].to_bits() == last.bias()[b].to_bits()
}

fn fold(last: &Layer, coeffs: &[f64], offset: f64) -> (Vec<f64>, f64) {
    let width = last.cols();
    let mut folded = vec![0.0; width];
    let mut folded_offset = offset;
    for ((c, row), b) in coeffs.iter().zip(last.weights()).zip(last.bias()) {
        if *c == 0.0 {
            continue;
        }
        for (f, w) in folded.iter_mut().zip(row) {
            *f += c * w;
        }
        folded_offset += c * b;
    }
    (folded, folded_offset)
}

/// Deterministic probe points: center, corners (up to 6 dims) and a short
/// Halton sequence.
pub(crate) fn probe_points(b: &BoundsBox) -> Vec<Vec<f64>> {
    const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let n = b.dim();
    let mut pts = vec![b.center()];
    if n <= 6 {
        for mask in 0u32..(1 << n) {
            pts.push(
                (0..n)
                    .map(|i| if mask & (1 << i) != 0 { b.upper[i] } else { b.lower[i] })
                    .collect(),
            );
        }
    }
    for k in 1..=64u32 {
        pts.push(
            (0..n)
                .map(|i| {
                    let u = radical_inverse(k, PRIMES[i % PRIMES.len()]);
                    b.lower[i] + (b.upper[i] - b.lower[i]) * u
                })
                .collect(),
        );
    }
    pts
}

fn radical_inverse(mut k: u32, base: u32) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut acc = 0.0;
    while k > 0 {
        acc += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    acc
}

/// Incomplete verification: certify over the precondition's bounding box,
/// otherwise look for a counterexample among a few probe points.
pub fn ibp_verify(tc: &TestCase) -> Verdict {
    let region: BoundsBox = tc.spec.bounding_region().into();
    if region.is_empty() {
        return Verdict::Holds;
    }
    let certifier = Certifier::new(tc);
    if certifier.linear_pre_infeasible(&region) || certifier.assess(&region).certified {
        return Verdict::Holds;
    }
    for x in probe_points(&region) {
        if matches!(tc.violates(&x), Ok(true)) {
            return Verdict::Violated { cex: x };
        }
    }
    Verdict::unknown("interval bounds inconclusive and no probe point violates")
}
