// SPDX-License-Identifier: Apache-2.0

//! The differential campaign loop: select, mutate, verify with every
//! roster member, compare, record.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mutation::{mutate, MutationConfig, MutationError, OperatorKind};
use crate::pool::{Pool, SelectionStrategy};
use crate::spec::TestCase;
use crate::verifier::{Verdict, VerifierHandle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub max_iter: u64,
    pub selection: SelectionStrategy,
    /// Probability that Mixed selection takes the recency branch.
    pub mixed_bias: f64,
    pub mutation: MutationConfig,
    pub verifiers: Vec<VerifierHandle>,
    pub rng_seed: u64,
    pub stop_on_first_bug: bool,
    /// Add a round's mutants to the pool only when the round found no bug.
    pub strict_alg1: bool,
    /// Maximum pool size; seeds are never evicted.
    pub pool_capacity: Option<usize>,
    /// Iteration numbering offset, set when resuming.
    pub start_iteration: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            max_iter: 100,
            selection: SelectionStrategy::Mixed,
            mixed_bias: 0.5,
            mutation: MutationConfig::default(),
            verifiers: vec![
                VerifierHandle::ibp("ibp"),
                VerifierHandle::bab("bab"),
                VerifierHandle::sampler("sampler"),
            ],
            rng_seed: 0,
            stop_on_first_bug: false,
            strict_alg1: false,
            pool_capacity: None,
            start_iteration: 0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.verifiers.len() < 2 {
            return Err(Error::InvalidConfig("at least two verifiers are required".into()));
        }
        if !(0.0..=1.0).contains(&self.mixed_bias) {
            return Err(Error::InvalidConfig("mixed_bias must be in [0, 1]".into()));
        }
        if self.pool_capacity == Some(0) {
            return Err(Error::InvalidConfig("pool_capacity must be positive".into()));
        }
        let mut names = BTreeSet::new();
        for v in &self.verifiers {
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate verifier name `{}`", v.name)));
            }
            v.preflight()?;
        }
        self.mutation
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugKind {
    Inconsistency,
    InvalidCounterexample,
    CrashBug,
}

impl BugKind {
    pub const ALL: [BugKind; 3] = [BugKind::Inconsistency, BugKind::InvalidCounterexample, BugKind::CrashBug];

    pub fn as_str(self) -> &'static str {
        match self {
            BugKind::Inconsistency => "inconsistency",
            BugKind::InvalidCounterexample => "invalid_counterexample",
            BugKind::CrashBug => "crash_bug",
        }
    }
}

impl fmt::Display for BugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One verifier's answer, in roster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub verifier: String,
    pub verdict: Verdict,
    /// Precondition slack used to validate this verifier's counterexample.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub cex_tolerance: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl VerdictEntry {
    pub fn new(verifier: impl Into<String>, verdict: Verdict) -> Self {
        VerdictEntry {
            verifier: verifier.into(),
            verdict,
            cex_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageStep {
    pub id: String,
    pub operator: Option<OperatorKind>,
    pub rng_seed: u64,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BugReport {
    pub kind: BugKind,
    pub test_case: TestCase,
    pub verdicts: Vec<VerdictEntry>,
    pub implicated: BTreeSet<String>,
    pub iteration: u64,
    /// Seed first, this test case last. Truncated at evicted ancestors.
    pub lineage: Vec<LineageStep>,
    pub dedup_key: String,
    /// Occurrences folded into this report by [`dedup`].
    pub count: u64,
}

/// `(kind, implicated, postcondition type, last operator)`, hashed.
pub fn dedup_key(kind: BugKind, implicated: &BTreeSet<String>, tc: &TestCase) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    for name in implicated {
        h.update([0u8]);
        h.update(name.as_bytes());
    }
    h.update([1u8]);
    h.update(tc.spec.postcondition().kind_name().as_bytes());
    h.update([1u8]);
    h.update(tc.lineage.operator.map_or("seed", |op| op.as_str()).as_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn report(kind: BugKind, tc: &TestCase, verdicts: &[VerdictEntry], implicated: BTreeSet<String>) -> BugReport {
    BugReport {
        kind,
        dedup_key: dedup_key(kind, &implicated, tc),
        test_case: tc.clone(),
        verdicts: verdicts.to_vec(),
        implicated,
        iteration: 0,
        lineage: vec![LineageStep {
            id: tc.id.clone(),
            operator: tc.lineage.operator,
            rng_seed: tc.lineage.rng_seed,
            depth: tc.lineage.depth,
        }],
        count: 1,
    }
}

/// Classifies one test case's verdicts.
///
/// Every counterexample is revalidated; failures are InvalidCounterexample
/// bugs of the reporting verifier. Crashes are CrashBugs. A Holds verdict
/// next to a validated Violated verdict is an Inconsistency implicating every
/// Holds verifier. Unknown and Timeout never conflict.
pub fn compare_verdicts(tc: &TestCase, verdicts: &[VerdictEntry]) -> Vec<BugReport> {
    let mut bugs = Vec::new();
    let mut validated = false;
    for e in verdicts {
        match &e.verdict {
            Verdict::Violated { cex } => {
                if matches!(tc.violates_tol(cex, e.cex_tolerance), Ok(true)) {
                    validated = true;
                } else {
                    bugs.push(report(
                        BugKind::InvalidCounterexample,
                        tc,
                        verdicts,
                        BTreeSet::from([e.verifier.clone()]),
                    ));
                }
            }
            Verdict::Crash { .. } => {
                bugs.push(report(BugKind::CrashBug, tc, verdicts, BTreeSet::from([e.verifier.clone()])));
            }
            _ => {}
        }
    }
    if validated {
        let holders: BTreeSet<String> = verdicts
            .iter()
            .filter(|e| e.verdict == Verdict::Holds)
            .map(|e| e.verifier.clone())
            .collect();
        if !holders.is_empty() {
            bugs.push(report(BugKind::Inconsistency, tc, verdicts, holders));
        }
    }
    bugs
}

/// Groups by dedup key. The earliest report represents each group and
/// carries its total count; groups keep first-occurrence order.
pub fn dedup(bugs: &[BugReport]) -> Vec<BugReport> {
    let mut out: Vec<BugReport> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for b in bugs {
        match slot.get(b.dedup_key.as_str()) {
            Some(&i) => out[i].count += b.count,
            None => {
                slot.insert(&b.dedup_key, out.len());
                out.push(b.clone());
            }
        }
    }
    out
}

/// Runs the roster on one test case; verifiers execute concurrently and
/// results come back in roster order.
pub fn run_roster(roster: &[VerifierHandle], tc: &TestCase) -> Vec<VerdictEntry> {
    let verdicts: Vec<Verdict> = if roster.len() <= 1 {
        roster.iter().map(|v| v.verify(tc)).collect()
    } else {
        std::thread::scope(|s| {
            let running: Vec<_> = roster.iter().map(|v| s.spawn(move || v.verify(tc))).collect();
            running
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Verdict::crash("verifier thread panicked")))
                .collect()
        })
    };
    roster
        .iter()
        .zip(verdicts)
        .map(|(v, verdict)| VerdictEntry {
            verifier: v.name.clone(),
            verdict,
            cex_tolerance: v.cex_tolerance(),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub iterations: u64,
    pub mutants_verified: u64,
    pub slots_skipped: u64,
    /// Iterations whose selected parent admitted no allowed operator.
    pub exhausted_iterations: u64,
    pub pool_size: usize,
    /// verifier -> verdict label -> count
    pub verdict_counts: BTreeMap<String, BTreeMap<String, u64>>,
    /// Raw (pre-dedup) bug occurrences.
    pub bug_occurrences: u64,
    pub stopped_early: bool,
    pub round_ms: Vec<f64>,
}

impl CampaignStats {
    pub fn mean_round_ms(&self) -> f64 {
        if self.round_ms.is_empty() {
            0.0
        } else {
            self.round_ms.iter().sum::<f64>() / self.round_ms.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    /// Every occurrence, in discovery order.
    pub bugs: Vec<BugReport>,
    pub stats: CampaignStats,
    pub pool: Pool,
}

impl CampaignResult {
    pub fn deduped(&self) -> Vec<BugReport> {
        dedup(&self.bugs)
    }
}

fn lineage_chain(pool: &Pool, tc: &TestCase) -> Vec<LineageStep> {
    let mut chain = vec![LineageStep {
        id: tc.id.clone(),
        operator: tc.lineage.operator,
        rng_seed: tc.lineage.rng_seed,
        depth: tc.lineage.depth,
    }];
    let mut parent = tc.lineage.parent.clone();
    while let Some(id) = parent {
        let Some(p) = pool.get(&id) else { break };
        chain.push(LineageStep {
            id: p.id.clone(),
            operator: p.lineage.operator,
            rng_seed: p.lineage.rng_seed,
            depth: p.lineage.depth,
        });
        parent = p.lineage.parent.clone();
    }
    chain.reverse();
    chain
}

/// Seeds a fresh pool and runs the campaign.
pub fn run_campaign(seeds: Vec<TestCase>, cfg: &CampaignConfig) -> Result<CampaignResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no seed test cases".into()));
    }
    let mut pool = Pool::new()
        .with_capacity_limit(cfg.pool_capacity)
        .with_mixed_bias(cfg.mixed_bias);
    pool.add_seeds(seeds)?;
    run_campaign_on(pool, cfg)
}

/// Continues a campaign on an existing pool.
pub fn run_campaign_on(pool: Pool, cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::InvalidConfig("no seed test cases".into()));
    }
    let mut pool = pool
        .with_capacity_limit(cfg.pool_capacity)
        .with_mixed_bias(cfg.mixed_bias);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(cfg.start_iteration));
    let mut stats = CampaignStats::default();
    let mut bugs = Vec::new();

    for iteration in cfg.start_iteration + 1..=cfg.start_iteration + cfg.max_iter {
        let started = Instant::now();
        stats.iterations += 1;
        let parent = pool.select(cfg.selection, &mut rng)?.clone();
        let round = match mutate(&parent, &cfg.mutation, &mut rng, |slot| format!("it{iteration:06}-{slot}")) {
            Ok(round) => round,
            Err(MutationError::MutationExhausted) => {
                stats.exhausted_iterations += 1;
                tracing::warn!(iteration, parent = %parent.id, "no allowed operator applies to the selected test case");
                stats.round_ms.push(started.elapsed().as_secs_f64() * 1e3);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        stats.slots_skipped += round.skipped.len() as u64;

        let mut round_bugs = 0usize;
        let mut stop = false;
        let mut verified = 0usize;
        for mutant in &round.mutants {
            let verdicts = run_roster(&cfg.verifiers, mutant);
            stats.mutants_verified += 1;
            verified += 1;
            for e in &verdicts {
                *stats
                    .verdict_counts
                    .entry(e.verifier.clone())
                    .or_default()
                    .entry(e.verdict.label().to_string())
                    .or_default() += 1;
            }
            let found = compare_verdicts(mutant, &verdicts);
            if !found.is_empty() {
                let mut chain = lineage_chain(&pool, &parent);
                chain.push(LineageStep {
                    id: mutant.id.clone(),
                    operator: mutant.lineage.operator,
                    rng_seed: mutant.lineage.rng_seed,
                    depth: mutant.lineage.depth,
                });
                for mut b in found {
                    tracing::info!(iteration, kind = %b.kind, test_case = %mutant.id, implicated = ?b.implicated, "bug");
                    b.iteration = iteration;
                    b.lineage = chain.clone();
                    bugs.push(b);
                    round_bugs += 1;
                }
                if cfg.stop_on_first_bug {
                    stop = true;
                    break;
                }
            }
        }

        let keep = !(cfg.strict_alg1 && round_bugs > 0);
        if keep {
            let admitted: Vec<TestCase> = round
                .mutants
                .into_iter()
                .take(verified)
                .filter(|m| cfg.mutation.max_depth.is_none_or(|d| m.lineage.depth <= d))
                .collect();
            pool.add(admitted)?;
        }
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        stats.round_ms.push(wall_ms);
        tracing::info!(iteration, parent = %parent.id, mutants = verified, bugs = round_bugs, pool = pool.len(), wall_ms, "round");
        if stop {
            stats.stopped_early = true;
            break;
        }
    }
    stats.bug_occurrences = bugs.len() as u64;
    stats.pool_size = pool.len();
    Ok(CampaignResult { bugs, stats, pool })
}
