// SPDX-License-Identifier: Apache-2.0

//! Model-level and specification-level mutation operators.
//!
//! Model operators (GF, WS, NEB, NAI, NS) only touch network parameters;
//! specification operators (CA, CR, CSb, CSw) only touch the constant table.
//! Every operator is a pure function of its inputs and the rng state.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::spec::{ConstantPath, ConstantRef, Lineage, PreSlot, Specification, TestCase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("no eligible neuron")]
    NoEligibleNeuron,
    #[error("no layer with two or more neurons")]
    NoEligibleLayer,
    #[error("specification has no mutable constants")]
    NoConstants,
    #[error("only postcondition constants are present")]
    NoRemovableConstant,
    #[error("fewer than two constants")]
    TooFewConstants,
    #[error("no selected operator is applicable to the test case")]
    MutationExhausted,
    #[error("invalid mutation config: {0}")]
    InvalidConfig(String),
    #[error("mutant failed validation: {0}")]
    InvalidMutant(String),
}

type MResult<T> = std::result::Result<T, MutationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorKind {
    Gf,
    Ws,
    Neb,
    Nai,
    Ns,
    Ca,
    Cr,
    Csb,
    Csw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Model,
    Spec,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 9] = [
        OperatorKind::Gf,
        OperatorKind::Ws,
        OperatorKind::Neb,
        OperatorKind::Nai,
        OperatorKind::Ns,
        OperatorKind::Ca,
        OperatorKind::Cr,
        OperatorKind::Csb,
        OperatorKind::Csw,
    ];

    pub fn dimension(self) -> Dimension {
        match self {
            OperatorKind::Gf | OperatorKind::Ws | OperatorKind::Neb | OperatorKind::Nai | OperatorKind::Ns => {
                Dimension::Model
            }
            _ => Dimension::Spec,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Gf => "GF",
            OperatorKind::Ws => "WS",
            OperatorKind::Neb => "NEB",
            OperatorKind::Nai => "NAI",
            OperatorKind::Ns => "NS",
            OperatorKind::Ca => "CA",
            OperatorKind::Cr => "CR",
            OperatorKind::Csb => "CSB",
            OperatorKind::Csw => "CSW",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = MutationError;

    fn from_str(s: &str) -> MResult<Self> {
        let upper = s.trim().to_ascii_uppercase();
        OperatorKind::ALL
            .into_iter()
            .find(|op| op.as_str() == upper)
            .ok_or_else(|| MutationError::InvalidConfig(format!("unknown operator `{s}`")))
    }
}

impl Serialize for OperatorKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for OperatorKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated operator filter such as `CA,CR,NS`.
pub fn parse_operator_list(text: &str) -> MResult<Vec<OperatorKind>> {
    let mut ops: Vec<OperatorKind> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<MResult<_>>()?;
    ops.sort();
    ops.dedup();
    if ops.is_empty() {
        return Err(MutationError::InvalidConfig("empty operator list".into()));
    }
    Ok(ops)
}

/// Which specification literals the constant operators may pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantScope {
    #[default]
    All,
    /// Radii and right-hand sides only.
    Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    pub gf_mu: f64,
    pub gf_sigma: f64,
    pub gf_rate: f64,
    pub ca_delta_max: f64,
    pub mutants_per_round: usize,
    pub rng_seed: u64,
    /// Allowed operators; all nine when empty.
    pub operators: Vec<OperatorKind>,
    pub constant_scope: ConstantScope,
    /// Attempts per mutant slot before the slot is skipped.
    pub max_retries: usize,
    /// Mutants deeper than this are verified but not added to the pool.
    pub max_depth: Option<u32>,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            gf_mu: 0.0,
            gf_sigma: 0.5,
            gf_rate: 0.1,
            ca_delta_max: 0.1,
            mutants_per_round: 4,
            rng_seed: 0,
            operators: Vec::new(),
            constant_scope: ConstantScope::All,
            max_retries: 8,
            max_depth: None,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> MResult<()> {
        if !(self.gf_sigma > 0.0 && self.gf_sigma.is_finite()) {
            return Err(MutationError::InvalidConfig("gf_sigma must be positive".into()));
        }
        if !self.gf_mu.is_finite() {
            return Err(MutationError::InvalidConfig("gf_mu must be finite".into()));
        }
        if !(self.gf_rate > 0.0 && self.gf_rate <= 1.0) {
            return Err(MutationError::InvalidConfig("gf_rate must be in (0, 1]".into()));
        }
        if !(self.ca_delta_max > 0.0 && self.ca_delta_max.is_finite()) {
            return Err(MutationError::InvalidConfig("ca_delta_max must be positive".into()));
        }
        if self.mutants_per_round == 0 {
            return Err(MutationError::InvalidConfig("mutants_per_round must be positive".into()));
        }
        Ok(())
    }

    pub fn allowed_operators(&self) -> Vec<OperatorKind> {
        if self.operators.is_empty() {
            OperatorKind::ALL.to_vec()
        } else {
            self.operators.clone()
        }
    }
}

fn rebuild(net: &Network, edit: impl FnOnce(&mut [crate::network::Layer])) -> MResult<Network> {
    net.map_layers(edit)
        .map_err(|e| MutationError::InvalidMutant(e.to_string()))
}

/// Gaussian fuzzing.
///
/// Draw order: one Bernoulli(`gf_rate`) per weight in layer/row/column order,
/// repeated until at least one weight is selected; then one
/// Normal(`gf_mu`, `gf_sigma`) sample per selected weight in the same order.
pub fn mutate_gf<R: Rng + ?Sized>(net: &Network, cfg: &MutationConfig, rng: &mut R) -> MResult<Network> {
    let noise = Normal::new(cfg.gf_mu, cfg.gf_sigma)
        .map_err(|e| MutationError::InvalidConfig(e.to_string()))?;
    let selected: Vec<(usize, usize, usize)> = loop {
        let mut picks = Vec::new();
        for (l, layer) in net.layers().iter().enumerate() {
            for (r, row) in layer.weights().iter().enumerate() {
                for c in 0..row.len() {
                    if rng.random_bool(cfg.gf_rate) {
                        picks.push((l, r, c));
                    }
                }
            }
        }
        if !picks.is_empty() {
            break picks;
        }
    };
    let deltas: Vec<f64> = selected.iter().map(|_| noise.sample(rng)).collect();
    rebuild(net, |layers| {
        for (&(l, r, c), d) in selected.iter().zip(deltas) {
            layers[l].weights_mut()[r][c] += d;
        }
    })
}

fn ws_candidates(net: &Network) -> Vec<(usize, usize)> {
    net.layers()
        .iter()
        .enumerate()
        .filter(|(_, layer)| layer.cols() >= 2)
        .flat_map(|(l, layer)| (0..layer.rows()).map(move |r| (l, r)))
        .collect()
}

/// Weight shuffling: permute one neuron's incoming weights.
pub fn mutate_ws<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> MResult<Network> {
    let candidates = ws_candidates(net);
    if candidates.is_empty() {
        return Err(MutationError::NoEligibleNeuron);
    }
    let (l, r) = candidates[rng.random_range(0..candidates.len())];
    let width = net.layers()[l].cols();
    let identity: Vec<usize> = (0..width).collect();
    let mut perm = identity.clone();
    while perm == identity {
        perm.shuffle(rng);
    }
    rebuild(net, |layers| {
        let row = &mut layers[l].weights_mut()[r];
        let original = row.clone();
        for (dst, &src) in row.iter_mut().zip(&perm) {
            *dst = original[src];
        }
    })
}

fn neb_candidates(net: &Network) -> Vec<(usize, usize)> {
    let n = net.layers().len();
    net.layers()[..n.saturating_sub(1)]
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| (0..layer.rows()).map(move |j| (l, j)))
        .collect()
}

/// Neuron effect blocking: zero a neuron's outgoing weights.
pub fn mutate_neb<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> MResult<Network> {
    let candidates = neb_candidates(net);
    if candidates.is_empty() {
        return Err(MutationError::NoEligibleNeuron);
    }
    let (l, j) = candidates[rng.random_range(0..candidates.len())];
    rebuild(net, |layers| {
        for row in layers[l + 1].weights_mut() {
            row[j] = 0.0;
        }
    })
}

/// Neuron activation inverse: negate a neuron's incoming row and bias, which
/// negates its pre-activation exactly for every input.
pub fn mutate_nai<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> MResult<Network> {
    let total = net.neuron_count();
    if total == 0 {
        return Err(MutationError::NoEligibleNeuron);
    }
    let mut pick = rng.random_range(0..total);
    let mut site = (0, 0);
    for (l, layer) in net.layers().iter().enumerate() {
        if pick < layer.rows() {
            site = (l, pick);
            break;
        }
        pick -= layer.rows();
    }
    let (l, r) = site;
    rebuild(net, |layers| {
        for w in &mut layers[l].weights_mut()[r] {
            *w = -*w;
        }
        let b = &mut layers[l].bias_mut()[r];
        *b = -*b;
    })
}

/// Neuron switch: swap the incoming rows and biases of two neurons in one
/// layer. Outgoing columns stay in place, so the neurons' downstream effects
/// are exchanged.
pub fn mutate_ns<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> MResult<Network> {
    let layers: Vec<usize> = net
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, layer)| layer.rows() >= 2)
        .map(|(l, _)| l)
        .collect();
    if layers.is_empty() {
        return Err(MutationError::NoEligibleLayer);
    }
    let l = layers[rng.random_range(0..layers.len())];
    let n = net.layers()[l].rows();
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    rebuild(net, |layers| {
        layers[l].weights_mut().swap(i, j);
        layers[l].bias_mut().swap(i, j);
    })
}

fn scoped_constants(spec: &Specification, scope: ConstantScope) -> Vec<ConstantRef> {
    spec.constants()
        .into_iter()
        .filter(|c| scope == ConstantScope::All || c.path.is_threshold())
        .collect()
}

/// Rounds to 15 significant digits, discarding binary noise such as the
/// trailing `...0002` of `0.1 + 0.05`.
fn round_sig15(v: f64) -> f64 {
    format!("{v:.14e}").parse().unwrap_or(v)
}

/// Adds `delta` to the constant at `path`.
pub fn apply_constant_delta(spec: &Specification, path: ConstantPath, delta: f64) -> MResult<Specification> {
    let value = spec
        .constant(path)
        .ok_or_else(|| MutationError::InvalidMutant(format!("no constant at `{path}`")))?;
    spec.with_constant(path, round_sig15(value + delta))
        .map_err(|e| MutationError::InvalidMutant(e.to_string()))
}

fn delta_mutation<R: Rng + ?Sized>(
    spec: &Specification,
    cfg: &MutationConfig,
    rng: &mut R,
    sign: f64,
) -> MResult<Specification> {
    let constants = scoped_constants(spec, cfg.constant_scope);
    if constants.is_empty() {
        return Err(MutationError::NoConstants);
    }
    let target = constants[rng.random_range(0..constants.len())].path;
    // (0, max]: 1 - U with U in [0, 1)
    let d = cfg.ca_delta_max * (1.0 - rng.random::<f64>());
    apply_constant_delta(spec, target, sign * d)
}

/// Constant addition.
pub fn mutate_ca<R: Rng + ?Sized>(spec: &Specification, cfg: &MutationConfig, rng: &mut R) -> MResult<Specification> {
    delta_mutation(spec, cfg, rng, 1.0)
}

/// Constant subtraction.
pub fn mutate_csb<R: Rng + ?Sized>(spec: &Specification, cfg: &MutationConfig, rng: &mut R) -> MResult<Specification> {
    delta_mutation(spec, cfg, rng, -1.0)
}

fn removable(spec: &Specification, scope: ConstantScope) -> MResult<Vec<ConstantPath>> {
    let constants = scoped_constants(spec, scope);
    if constants.is_empty() {
        return Err(MutationError::NoConstants);
    }
    let b = spec.domain_bound();
    let paths: Vec<ConstantPath> = constants
        .iter()
        .filter(|c| match c.path {
            ConstantPath::PostRhs => false,
            // relaxing to the clamp must change something
            ConstantPath::Pre { slot: PreSlot::Lower(_), .. } => c.value != -b,
            ConstantPath::Pre { slot: PreSlot::Upper(_), .. } => c.value != b,
            ConstantPath::Pre { .. } => true,
        })
        .map(|c| c.path)
        .collect();
    if paths.is_empty() {
        return Err(MutationError::NoRemovableConstant);
    }
    Ok(paths)
}

/// Removes the constraint holding `path`; box components relax to the
/// domain clamp instead.
pub fn remove_constant(spec: &Specification, path: ConstantPath) -> MResult<Specification> {
    let invalid = |e: crate::Error| MutationError::InvalidMutant(e.to_string());
    match path {
        ConstantPath::PostRhs => Err(MutationError::NoRemovableConstant),
        ConstantPath::Pre { slot: PreSlot::Lower(_), .. } => {
            spec.with_constant(path, -spec.domain_bound()).map_err(invalid)
        }
        ConstantPath::Pre { slot: PreSlot::Upper(_), .. } => {
            spec.with_constant(path, spec.domain_bound()).map_err(invalid)
        }
        ConstantPath::Pre { index, .. } => spec.without_precondition(index).map_err(invalid),
    }
}

/// Constant removal.
pub fn mutate_cr<R: Rng + ?Sized>(spec: &Specification, cfg: &MutationConfig, rng: &mut R) -> MResult<Specification> {
    let paths = removable(spec, cfg.constant_scope)?;
    remove_constant(spec, paths[rng.random_range(0..paths.len())])
}

/// Constant switch.
pub fn mutate_csw<R: Rng + ?Sized>(spec: &Specification, cfg: &MutationConfig, rng: &mut R) -> MResult<Specification> {
    let constants = scoped_constants(spec, cfg.constant_scope);
    if constants.len() < 2 {
        return Err(MutationError::TooFewConstants);
    }
    let n = constants.len();
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = (constants[i], constants[j]);
    spec.with_constant(a.path, b.value)
        .and_then(|s| s.with_constant(b.path, a.value))
        .map_err(|e| MutationError::InvalidMutant(e.to_string()))
}

/// Cheap applicability check mirroring each operator's error conditions.
pub fn is_applicable(op: OperatorKind, tc: &TestCase, cfg: &MutationConfig) -> bool {
    let net = &tc.network;
    let scoped = || scoped_constants(&tc.spec, cfg.constant_scope);
    match op {
        OperatorKind::Gf | OperatorKind::Nai => true,
        OperatorKind::Ws => !ws_candidates(net).is_empty(),
        OperatorKind::Neb => !neb_candidates(net).is_empty(),
        OperatorKind::Ns => net.layers().iter().any(|l| l.rows() >= 2),
        OperatorKind::Ca | OperatorKind::Csb => !scoped().is_empty(),
        OperatorKind::Cr => removable(&tc.spec, cfg.constant_scope).is_ok(),
        OperatorKind::Csw => scoped().len() >= 2,
    }
}

/// Picks a dimension with probability one half (when both have allowed
/// operators), then an operator uniformly within it.
pub fn choose_operator<R: Rng + ?Sized>(allowed: &[OperatorKind], rng: &mut R) -> OperatorKind {
    let model: Vec<_> = allowed.iter().copied().filter(|o| o.dimension() == Dimension::Model).collect();
    let spec: Vec<_> = allowed.iter().copied().filter(|o| o.dimension() == Dimension::Spec).collect();
    let pool = match (model.is_empty(), spec.is_empty()) {
        (false, false) => {
            if rng.random_bool(0.5) {
                model
            } else {
                spec
            }
        }
        (false, true) => model,
        (true, false) => spec,
        (true, true) => panic!("choose_operator needs at least one operator"),
    };
    pool[rng.random_range(0..pool.len())]
}

/// Applies one operator to a test case, yielding the mutated (network, spec).
pub fn apply_operator<R: Rng + ?Sized>(
    op: OperatorKind,
    tc: &TestCase,
    cfg: &MutationConfig,
    rng: &mut R,
) -> MResult<(Network, Specification)> {
    let net = &tc.network;
    let spec = &tc.spec;
    Ok(match op {
        OperatorKind::Gf => (mutate_gf(net, cfg, rng)?, spec.clone()),
        OperatorKind::Ws => (mutate_ws(net, rng)?, spec.clone()),
        OperatorKind::Neb => (mutate_neb(net, rng)?, spec.clone()),
        OperatorKind::Nai => (mutate_nai(net, rng)?, spec.clone()),
        OperatorKind::Ns => (mutate_ns(net, rng)?, spec.clone()),
        OperatorKind::Ca => (net.clone(), mutate_ca(spec, cfg, rng)?),
        OperatorKind::Cr => (net.clone(), mutate_cr(spec, cfg, rng)?),
        OperatorKind::Csb => (net.clone(), mutate_csb(spec, cfg, rng)?),
        OperatorKind::Csw => (net.clone(), mutate_csw(spec, cfg, rng)?),
    })
}

#[derive(Debug, Clone, Default)]
pub struct MutationRound {
    pub mutants: Vec<TestCase>,
    /// Slot indices that ran out of retries.
    pub skipped: Vec<usize>,
}

/// Runs one mutant slot from its own seed. Replaying with the same
/// `(parent, cfg, slot_seed)` reproduces the same mutant.
pub fn mutate_slot(
    tc: &TestCase,
    cfg: &MutationConfig,
    slot_seed: u64,
    id: String,
) -> Option<TestCase> {
    let allowed = cfg.allowed_operators();
    let mut rng = ChaCha8Rng::seed_from_u64(slot_seed);
    for _ in 0..cfg.max_retries.max(1) {
        let op = choose_operator(&allowed, &mut rng);
        let Ok((network, spec)) = apply_operator(op, tc, cfg, &mut rng) else {
            continue;
        };
        let lineage = Lineage {
            parent: Some(tc.id.clone()),
            operator: Some(op),
            rng_seed: slot_seed,
            depth: tc.lineage.depth + 1,
        };
        if let Ok(mutant) = TestCase::new(id.clone(), network, spec, lineage) {
            return Some(mutant);
        }
    }
    None
}

/// Produces `cfg.mutants_per_round` mutants of `tc`; `id_for(slot)` names them.
pub fn mutate<R: Rng + ?Sized>(
    tc: &TestCase,
    cfg: &MutationConfig,
    rng: &mut R,
    mut id_for: impl FnMut(usize) -> String,
) -> MResult<MutationRound> {
    cfg.validate()?;
    let allowed = cfg.allowed_operators();
    if !allowed.iter().any(|&op| is_applicable(op, tc, cfg)) {
        return Err(MutationError::MutationExhausted);
    }
    let mut round = MutationRound::default();
    for slot in 0..cfg.mutants_per_round {
        let slot_seed: u64 = rng.random();
        match mutate_slot(tc, cfg, slot_seed, id_for(slot)) {
            Some(m) => round.mutants.push(m),
            None => {
                tracing::debug!(parent = %tc.id, slot, "mutant slot skipped after retries");
                round.skipped.push(slot);
            }
        }
    }
    Ok(round)
}
