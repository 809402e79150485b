// SPDX-License-Identifier: Apache-2.0

//! Specifications `forall x. pre(x) && y = N(x) => post(x, y)` and test cases.
//!
//! Every mutable literal of a specification (box bounds, ball centers and
//! radii, right-hand sides) is addressable through a [`ConstantPath`] such as
//! `pre[0].radius`, `pre[1].upper[3]` or `post.rhs`. The table returned by
//! [`Specification::constants`] is derived from the structure, so it can never
//! drift from it; the file format stores it alongside and checks agreement on
//! load.
//!
//! All inequalities are closed. The precondition region is always intersected
//! with the domain clamp `[-B, B]^n`. An empty region is valid data and makes
//! the specification hold vacuously.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mutation::OperatorKind;
use crate::network::{argmax_label, Network};

pub const DEFAULT_DOMAIN_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Le,
    Ge,
}

impl Comparison {
    #[inline]
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Le => lhs <= rhs,
            Comparison::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConstraint {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Linear {
        coeffs: Vec<f64>,
        op: Comparison,
        rhs: f64,
    },
    DistanceBall {
        center: Vec<f64>,
        metric: Metric,
        radius: f64,
    },
}

impl InputConstraint {
    pub fn kind_name(&self) -> &'static str {
        match self {
            InputConstraint::Box { .. } => "box",
            InputConstraint::Linear { .. } => "linear",
            InputConstraint::DistanceBall { .. } => "distance_ball",
        }
    }

    /// Coordinate-wise interval `[lo, hi]` this constraint confines `x` to,
    /// if it is box-shaped.
    ///
    /// A Linf ball is treated as the box `[c - r, c + r]` computed in floating
    /// point, both here and in [`InputConstraint::satisfied`], so bounding
    /// boxes and point membership agree to the last bit.
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            InputConstraint::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            InputConstraint::DistanceBall {
                center,
                metric: Metric::Linf,
                radius,
            } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            InputConstraint::Linear { .. } => None,
        }
    }

    /// Membership with each boundary relaxed outward by `tol`.
    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        match self {
            InputConstraint::Linear { coeffs, op, rhs } => match op {
                Comparison::Le => dot(coeffs, x) <= rhs + tol,
                Comparison::Ge => dot(coeffs, x) >= rhs - tol,
            },
            _ => {
                let (lo, hi) = self.as_box().expect("box-shaped");
                x.iter()
                    .zip(lo.iter().zip(&hi))
                    .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputProperty {
    ArgmaxEq {
        label: usize,
    },
    LinearOut {
        coeffs: Vec<f64>,
        op: Comparison,
        rhs: f64,
    },
}

impl OutputProperty {
    pub fn kind_name(&self) -> &'static str {
        match self {
            OutputProperty::ArgmaxEq { .. } => "argmax_eq",
            OutputProperty::LinearOut { .. } => "linear_out",
        }
    }
}

/// Left-to-right dot product; interval code mirrors this order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PreSlot {
    Lower(usize),
    Upper(usize),
    Center(usize),
    Radius,
    Rhs,
}

/// Address of one numeric literal inside a specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstantPath {
    Pre { index: usize, slot: PreSlot },
    PostRhs,
}

impl ConstantPath {
    pub fn is_postcondition(&self) -> bool {
        matches!(self, ConstantPath::PostRhs)
    }

    /// Scalar thresholds are radii and right-hand sides.
    pub fn is_threshold(&self) -> bool {
        matches!(
            self,
            ConstantPath::PostRhs
                | ConstantPath::Pre {
                    slot: PreSlot::Radius | PreSlot::Rhs,
                    ..
                }
        )
    }
}

impl fmt::Display for ConstantPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstantPath::PostRhs => f.write_str("post.rhs"),
            ConstantPath::Pre { index, slot } => {
                write!(f, "pre[{index}].")?;
                match slot {
                    PreSlot::Lower(i) => write!(f, "lower[{i}]"),
                    PreSlot::Upper(i) => write!(f, "upper[{i}]"),
                    PreSlot::Center(i) => write!(f, "center[{i}]"),
                    PreSlot::Radius => f.write_str("radius"),
                    PreSlot::Rhs => f.write_str("rhs"),
                }
            }
        }
    }
}

fn parse_bracket(s: &str, name: &str) -> Option<usize> {
    s.strip_prefix(name)?
        .strip_prefix('[')?
        .strip_suffix(']')?
        .parse()
        .ok()
}

impl FromStr for ConstantPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("constant path", format!("malformed path `{s}`"));
        if s == "post.rhs" {
            return Ok(ConstantPath::PostRhs);
        }
        let (head, field) = s.split_once('.').ok_or_else(bad)?;
        let index = parse_bracket(head, "pre").ok_or_else(bad)?;
        let slot = match field {
            "radius" => PreSlot::Radius,
            "rhs" => PreSlot::Rhs,
            _ => {
                if let Some(i) = parse_bracket(field, "lower") {
                    PreSlot::Lower(i)
                } else if let Some(i) = parse_bracket(field, "upper") {
                    PreSlot::Upper(i)
                } else if let Some(i) = parse_bracket(field, "center") {
                    PreSlot::Center(i)
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(ConstantPath::Pre { index, slot })
    }
}

impl Serialize for ConstantPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConstantPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantRef {
    pub path: ConstantPath,
    pub value: f64,
}

/// Coordinate-wise bounding box of a region; empty when some `lower > upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn is_empty(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u))
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) / 2.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Specification {
    input_dim: usize,
    domain_bound: f64,
    preconditions: Vec<InputConstraint>,
    postcondition: OutputProperty,
}

impl Specification {
    pub fn new(
        input_dim: usize,
        domain_bound: f64,
        preconditions: Vec<InputConstraint>,
        postcondition: OutputProperty,
    ) -> Result<Self> {
        let spec = Specification {
            input_dim,
            domain_bound,
            preconditions,
            postcondition,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn domain_bound(&self) -> f64 {
        self.domain_bound
    }

    pub fn preconditions(&self) -> &[InputConstraint] {
        &self.preconditions
    }

    pub fn postcondition(&self) -> &OutputProperty {
        &self.postcondition
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Shape("input_dim must be positive".into()));
        }
        if !(self.domain_bound.is_finite() && self.domain_bound > 0.0) {
            return Err(Error::Shape("domain_bound must be finite and positive".into()));
        }
        let n = self.input_dim;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        for (i, c) in self.preconditions.iter().enumerate() {
            let ok = match c {
                InputConstraint::Box { lower, upper } => {
                    if lower.len() != n || upper.len() != n {
                        return Err(Error::Shape(format!("pre[{i}]: box bounds must have length {n}")));
                    }
                    finite(lower) && finite(upper)
                }
                InputConstraint::Linear { coeffs, rhs, .. } => {
                    if coeffs.len() != n {
                        return Err(Error::Shape(format!("pre[{i}]: coeffs must have length {n}")));
                    }
                    finite(coeffs) && rhs.is_finite()
                }
                InputConstraint::DistanceBall { center, radius, .. } => {
                    if center.len() != n {
                        return Err(Error::Shape(format!("pre[{i}]: center must have length {n}")));
                    }
                    finite(center) && radius.is_finite()
                }
            };
            if !ok {
                return Err(Error::Shape(format!("pre[{i}]: non-finite value")));
            }
        }
        if let OutputProperty::LinearOut { coeffs, rhs, .. } = &self.postcondition {
            if coeffs.is_empty() {
                return Err(Error::Shape("post: coeffs must be non-empty".into()));
            }
            if !(finite(coeffs) && rhs.is_finite()) {
                return Err(Error::Shape("post: non-finite value".into()));
            }
        }
        Ok(())
    }

    /// Checks the postcondition's dimensions against a network's output width.
    pub fn check_output_dim(&self, output_dim: usize) -> Result<()> {
        match &self.postcondition {
            OutputProperty::ArgmaxEq { label } if *label >= output_dim => Err(Error::Shape(format!(
                "post: label {label} out of range for output width {output_dim}"
            ))),
            OutputProperty::LinearOut { coeffs, .. } if coeffs.len() != output_dim => {
                Err(Error::Shape(format!(
                    "post: coeffs length {} does not match output width {output_dim}",
                    coeffs.len()
                )))
            }
            _ => Ok(()),
        }
    }

    /// The ordered constant table.
    pub fn constants(&self) -> Vec<ConstantRef> {
        let mut out = Vec::new();
        for (index, c) in self.preconditions.iter().enumerate() {
            let mut push = |slot, value| {
                out.push(ConstantRef {
                    path: ConstantPath::Pre { index, slot },
                    value,
                })
            };
            match c {
                InputConstraint::Box { lower, upper } => {
                    for (i, v) in lower.iter().enumerate() {
                        push(PreSlot::Lower(i), *v);
                    }
                    for (i, v) in upper.iter().enumerate() {
                        push(PreSlot::Upper(i), *v);
                    }
                }
                InputConstraint::Linear { rhs, .. } => push(PreSlot::Rhs, *rhs),
                InputConstraint::DistanceBall { center, radius, .. } => {
                    for (i, v) in center.iter().enumerate() {
                        push(PreSlot::Center(i), *v);
                    }
                    push(PreSlot::Radius, *radius);
                }
            }
        }
        if let OutputProperty::LinearOut { rhs, .. } = &self.postcondition {
            out.push(ConstantRef {
                path: ConstantPath::PostRhs,
                value: *rhs,
            });
        }
        out
    }

    pub fn constant(&self, path: ConstantPath) -> Option<f64> {
        match path {
            ConstantPath::PostRhs => match &self.postcondition {
                OutputProperty::LinearOut { rhs, .. } => Some(*rhs),
                OutputProperty::ArgmaxEq { .. } => None,
            },
            ConstantPath::Pre { index, slot } => {
                let c = self.preconditions.get(index)?;
                match (c, slot) {
                    (InputConstraint::Box { lower, .. }, PreSlot::Lower(i)) => lower.get(i).copied(),
                    (InputConstraint::Box { upper, .. }, PreSlot::Upper(i)) => upper.get(i).copied(),
                    (InputConstraint::DistanceBall { center, .. }, PreSlot::Center(i)) => {
                        center.get(i).copied()
                    }
                    (InputConstraint::DistanceBall { radius, .. }, PreSlot::Radius) => Some(*radius),
                    (InputConstraint::Linear { rhs, .. }, PreSlot::Rhs) => Some(*rhs),
                    _ => None,
                }
            }
        }
    }

    /// Returns a copy with the literal at `path` replaced.
    pub fn with_constant(&self, path: ConstantPath, value: f64) -> Result<Specification> {
        if !value.is_finite() {
            return Err(Error::Shape(format!("{path}: non-finite value")));
        }
        let mut next = self.clone();
        let slot: Option<&mut f64> = match path {
            ConstantPath::PostRhs => match &mut next.postcondition {
                OutputProperty::LinearOut { rhs, .. } => Some(rhs),
                OutputProperty::ArgmaxEq { .. } => None,
            },
            ConstantPath::Pre { index, slot } => match (next.preconditions.get_mut(index), slot) {
                (Some(InputConstraint::Box { lower, .. }), PreSlot::Lower(i)) => lower.get_mut(i),
                (Some(InputConstraint::Box { upper, .. }), PreSlot::Upper(i)) => upper.get_mut(i),
                (Some(InputConstraint::DistanceBall { center, .. }), PreSlot::Center(i)) => {
                    center.get_mut(i)
                }
                (Some(InputConstraint::DistanceBall { radius, .. }), PreSlot::Radius) => Some(radius),
                (Some(InputConstraint::Linear { rhs, .. }), PreSlot::Rhs) => Some(rhs),
                _ => None,
            },
        };
        let slot = slot.ok_or_else(|| Error::Shape(format!("no constant at path `{path}`")))?;
        *slot = value;
        Ok(next)
    }

    /// Copy with precondition `index` removed.
    pub fn without_precondition(&self, index: usize) -> Result<Specification> {
        if index >= self.preconditions.len() {
            return Err(Error::Shape(format!("no precondition at index {index}")));
        }
        let mut next = self.clone();
        next.preconditions.remove(index);
        Ok(next)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn in_domain(&self, x: &[f64], tol: f64) -> bool {
        let b = self.domain_bound + tol;
        x.iter().all(|v| *v >= -b && *v <= b)
    }

    pub fn eval_pre(&self, x: &[f64]) -> Result<bool> {
        self.eval_pre_tol(x, 0.0)
    }

    /// Precondition check with every boundary relaxed outward by `tol`.
    pub fn eval_pre_tol(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check_len(x)?;
        Ok(self.in_domain(x, tol) && self.preconditions.iter().all(|c| c.satisfied(x, tol)))
    }

    /// Per-constraint satisfaction, domain clamp first.
    pub fn pre_breakdown(&self, x: &[f64]) -> Result<Vec<(String, bool)>> {
        self.check_len(x)?;
        let mut out = vec![(format!("domain [-{0}, {0}]", self.domain_bound), self.in_domain(x, 0.0))];
        for (i, c) in self.preconditions.iter().enumerate() {
            out.push((format!("pre[{i}] {}", c.kind_name()), c.satisfied(x, 0.0)));
        }
        Ok(out)
    }

    /// Postcondition on an output vector; `x` is accepted for the general
    /// `post(x, y)` shape even though no current property reads it.
    pub fn eval_post(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        self.check_len(x)?;
        match &self.postcondition {
            OutputProperty::ArgmaxEq { label } => {
                if *label >= y.len() {
                    return Err(Error::DimensionMismatch {
                        expected: label + 1,
                        actual: y.len(),
                    });
                }
                Ok(argmax_label(y)? == *label)
            }
            OutputProperty::LinearOut { coeffs, op, rhs } => {
                if coeffs.len() != y.len() {
                    return Err(Error::DimensionMismatch {
                        expected: coeffs.len(),
                        actual: y.len(),
                    });
                }
                Ok(op.holds(dot(coeffs, y), *rhs))
            }
        }
    }

    /// Bounding box of the precondition region intersected with the domain
    /// clamp. Linear constraints are not folded in.
    pub fn bounding_region(&self) -> Region {
        let b = self.domain_bound;
        let mut lower = vec![-b; self.input_dim];
        let mut upper = vec![b; self.input_dim];
        for c in &self.preconditions {
            if let Some((lo, hi)) = c.as_box() {
                for i in 0..self.input_dim {
                    lower[i] = lower[i].max(lo[i]);
                    upper[i] = upper[i].min(hi[i]);
                }
            }
        }
        Region { lower, upper }
    }

    /// True when box-shaped constraints alone already make the region empty.
    pub fn is_region_empty(&self) -> bool {
        self.bounding_region().is_empty()
    }

    pub fn to_file_value(&self) -> serde_json::Value {
        serde_json::to_value(SpecFileOut {
            input_dim: self.input_dim,
            domain_bound: self.domain_bound,
            preconditions: &self.preconditions,
            postcondition: &self.postcondition,
            constants: self.constants(),
        })
        .expect("spec serializes")
    }

    pub fn to_json(&self) -> String {
        self.to_file_value().to_string()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_value()).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_at(text, "<spec>")
    }

    fn from_json_at(text: &str, origin: &str) -> Result<Self> {
        let raw: SpecFileIn = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string())
        })?;
        raw.into_spec(origin)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let raw: SpecFileIn =
            serde_json::from_value(value).map_err(|e| Error::parse("<spec>", e.to_string()))?;
        raw.into_spec("<spec>")
    }
}

#[derive(Serialize)]
struct SpecFileOut<'a> {
    input_dim: usize,
    domain_bound: f64,
    preconditions: &'a [InputConstraint],
    postcondition: &'a OutputProperty,
    constants: Vec<ConstantRef>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFileIn {
    input_dim: usize,
    #[serde(default = "default_domain_bound")]
    domain_bound: f64,
    #[serde(default)]
    preconditions: Vec<InputConstraint>,
    postcondition: OutputProperty,
    constants: Option<Vec<RawConstant>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstant {
    path: String,
    value: f64,
}

fn default_domain_bound() -> f64 {
    DEFAULT_DOMAIN_BOUND
}

impl SpecFileIn {
    fn into_spec(self, origin: &str) -> Result<Specification> {
        let spec = Specification::new(
            self.input_dim,
            self.domain_bound,
            self.preconditions,
            self.postcondition,
        )?;
        let Some(table) = self.constants else {
            return Ok(spec);
        };
        let at = |i: usize| format!("{origin}: constants[{i}]");
        let mut seen = HashSet::new();
        for (i, c) in table.iter().enumerate() {
            let path: ConstantPath = c.path.parse().map_err(|_| {
                Error::parse(at(i), format!("malformed constant path `{}`", c.path))
            })?;
            if !seen.insert(path) {
                return Err(Error::parse(at(i), format!("duplicate constant path `{path}`")));
            }
            match spec.constant(path) {
                None => {
                    return Err(Error::parse(at(i), format!("path `{path}` does not address a constant")))
                }
                Some(v) if v.to_bits() != c.value.to_bits() => {
                    return Err(Error::parse(
                        at(i),
                        format!("constant `{path}` is {} but the structure holds {v}", c.value),
                    ))
                }
                Some(_) => {}
            }
        }
        if let Some(missing) = spec.constants().iter().find(|c| !seen.contains(&c.path)) {
            return Err(Error::parse(
                format!("{origin}: constants"),
                format!("constant `{}` is missing from the table", missing.path),
            ));
        }
        Ok(spec)
    }
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<Specification> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Specification::from_json_at(&text, &path.display().to_string())
}

pub fn save_spec(spec: &Specification, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = spec.to_json_pretty();
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Local robustness: every `x` with `||x - center||_inf <= epsilon` is
/// classified as `label`.
pub fn robustness_spec(center: &[f64], epsilon: f64, label: usize) -> Result<Specification> {
    Specification::new(
        center.len(),
        DEFAULT_DOMAIN_BOUND,
        vec![InputConstraint::DistanceBall {
            center: center.to_vec(),
            metric: Metric::Linf,
            radius: epsilon,
        }],
        OutputProperty::ArgmaxEq { label },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    /// `None` for seeds.
    pub parent: Option<String>,
    pub operator: Option<OperatorKind>,
    pub rng_seed: u64,
    pub depth: u32,
}

impl Lineage {
    pub fn seed() -> Self {
        Lineage {
            parent: None,
            operator: None,
            rng_seed: 0,
            depth: 0,
        }
    }
}

/// A `(network, specification)` pair handed to every verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: String,
    pub network: Network,
    pub spec: Specification,
    pub lineage: Lineage,
}

impl TestCase {
    pub fn new(
        id: impl Into<String>,
        network: Network,
        spec: Specification,
        lineage: Lineage,
    ) -> Result<Self> {
        if spec.input_dim() != network.input_dim() {
            return Err(Error::Shape(format!(
                "spec input_dim {} does not match network input_dim {}",
                spec.input_dim(),
                network.input_dim()
            )));
        }
        spec.check_output_dim(network.output_dim())?;
        Ok(TestCase {
            id: id.into(),
            network,
            spec,
            lineage,
        })
    }

    pub fn seed(id: impl Into<String>, network: Network, spec: Specification) -> Result<Self> {
        Self::new(id, network, spec, Lineage::seed())
    }

    /// `x` satisfies the precondition and `N(x)` violates the postcondition.
    pub fn violates(&self, x: &[f64]) -> Result<bool> {
        self.violates_tol(x, 0.0)
    }

    /// Like [`TestCase::violates`] with precondition boundaries relaxed by `tol`.
    pub fn violates_tol(&self, x: &[f64], tol: f64) -> Result<bool> {
        if !self.spec.eval_pre_tol(x, tol)? {
            return Ok(false);
        }
        let y = self.network.forward(x)?;
        Ok(!self.spec.eval_post(x, &y)?)
    }

    /// Content hash of the network and specification, independent of id and
    /// lineage.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.network.to_json().as_bytes());
        h.update([0u8]);
        h.update(self.spec.to_json().as_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}
