// SPDX-License-Identifier: Apache-2.0

//! Verifier interface, in-tree reference verifiers and adapters.
//!
//! Every verifier maps a [`TestCase`] to a [`Verdict`]. Failures of any kind
//! (panics, timeouts, broken adapters) are verdicts, never errors, so a
//! misbehaving verifier cannot abort a campaign.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::TestCase;

pub mod bab;
pub mod external;
pub mod fault;
pub mod ibp;
pub mod sampler;

pub use bab::{bab_verify, BabConfig};
pub use external::{external_verify, ExternalConfig, Request, Response, EXTERNAL_CEX_TOLERANCE};
pub use fault::{inject_fault, Fault};
pub use ibp::{ibp_bounds, ibp_verify, BoundsBox};
pub use sampler::{sample_verify, SamplerConfig};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated {
        cex: Vec<f64>,
    },
    Unknown {
        reason: String,
    },
    Timeout,
    Crash {
        diagnostic: String,
        exit_info: Option<String>,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated { .. } => "violated",
            Verdict::Unknown { .. } => "unknown",
            Verdict::Timeout => "timeout",
            Verdict::Crash { .. } => "crash",
        }
    }

    pub fn unknown(reason: impl Into<String>) -> Self {
        Verdict::Unknown {
            reason: reason.into(),
        }
    }

    pub fn crash(diagnostic: impl Into<String>) -> Self {
        Verdict::Crash {
            diagnostic: diagnostic.into(),
            exit_info: None,
        }
    }
}

/// Wall-clock budget for one verifier invocation.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    start: Instant,
    limit: Duration,
}

impl Deadline {
    pub fn after(limit: Duration) -> Self {
        Deadline {
            start: Instant::now(),
            limit,
        }
    }

    pub fn from_ms(ms: u64) -> Self {
        Self::after(Duration::from_millis(ms))
    }

    pub fn none() -> Self {
        Self::after(Duration::from_secs(u64::MAX / 4))
    }

    pub fn expired(&self) -> bool {
        self.start.elapsed() >= self.limit
    }

    pub fn limit(&self) -> Duration {
        self.limit
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IbpConfig {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifierKind {
    Ibp(IbpConfig),
    Bab(BabConfig),
    Sampler(SamplerConfig),
    External(ExternalConfig),
    #[serde(rename = "fault")]
    FaultInjected {
        base: Box<VerifierHandle>,
        fault: Fault,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierHandle {
    pub name: String,
    #[serde(flatten)]
    pub kind: VerifierKind,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

impl VerifierHandle {
    pub fn new(name: impl Into<String>, kind: VerifierKind) -> Self {
        VerifierHandle {
            name: name.into(),
            kind,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }

    pub fn ibp(name: impl Into<String>) -> Self {
        Self::new(name, VerifierKind::Ibp(IbpConfig::default()))
    }

    pub fn bab(name: impl Into<String>) -> Self {
        Self::new(name, VerifierKind::Bab(BabConfig::default()))
    }

    pub fn sampler(name: impl Into<String>) -> Self {
        Self::new(name, VerifierKind::Sampler(SamplerConfig::default()))
    }

    pub fn external(name: impl Into<String>, command: Vec<String>) -> Self {
        Self::new(name, VerifierKind::External(ExternalConfig { command }))
    }

    pub fn with_timeout_ms(mut self, ms: u64) -> Self {
        self.timeout_ms = ms;
        self
    }

    /// Default roster: `ibp`, `bab`, `sampler`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ibp" => Some(Self::ibp("ibp")),
            "bab" => Some(Self::bab("bab")),
            "sampler" => Some(Self::sampler("sampler")),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            VerifierKind::Ibp(_) => "ibp",
            VerifierKind::Bab(_) => "bab",
            VerifierKind::Sampler(_) => "sampler",
            VerifierKind::External(_) => "external",
            VerifierKind::FaultInjected { .. } => "fault",
        }
    }

    /// Precondition slack allowed when validating this verifier's
    /// counterexamples. Non-zero only for external tools.
    pub fn cex_tolerance(&self) -> f64 {
        match &self.kind {
            VerifierKind::External(_) => EXTERNAL_CEX_TOLERANCE,
            VerifierKind::FaultInjected { base, .. } => base.cex_tolerance(),
            _ => 0.0,
        }
    }

    /// Configuration checks that must pass before a campaign starts.
    pub fn preflight(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("verifier name must be non-empty".into()));
        }
        match &self.kind {
            VerifierKind::Bab(cfg) => cfg.validate(),
            VerifierKind::Sampler(cfg) => cfg.validate(),
            VerifierKind::External(cfg) => cfg.preflight(),
            VerifierKind::FaultInjected { base, fault } => {
                fault.validate()?;
                base.preflight()
            }
            VerifierKind::Ibp(_) => Ok(()),
        }
    }

    pub fn verify(&self, tc: &TestCase) -> Verdict {
        let deadline = Deadline::from_ms(self.timeout_ms);
        self.verify_within(tc, deadline)
    }

    pub(crate) fn verify_within(&self, tc: &TestCase, deadline: Deadline) -> Verdict {
        match &self.kind {
            VerifierKind::External(cfg) => external_verify(cfg, tc, self.timeout_ms),
            VerifierKind::FaultInjected { base, fault } => fault::run_faulty(self, base, fault, tc, deadline),
            _ => {
                let run = catch_unwind(AssertUnwindSafe(|| match &self.kind {
                    VerifierKind::Ibp(_) => ibp_verify(tc),
                    VerifierKind::Bab(cfg) => bab_verify(tc, cfg, deadline),
                    VerifierKind::Sampler(cfg) => sample_verify(tc, cfg, deadline),
                    _ => unreachable!(),
                }));
                match run {
                    Ok(v) => v,
                    Err(payload) => Verdict::crash(format!("verifier panicked: {}", panic_message(&payload))),
                }
            }
        }
    }
}

fn panic_message(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}
