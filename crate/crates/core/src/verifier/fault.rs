// SPDX-License-Identifier: Apache-2.0

//! Deliberately broken verifiers, used to check that the differential oracle
//! catches seeded defects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spec::TestCase;

use super::{Deadline, Verdict, VerifierHandle, VerifierKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fault {
    /// Holds becomes Violated at the center of the precondition box.
    FlipHoldsToViolated,
    FlipViolatedToHolds,
    /// Verify with precondition `index` removed.
    DropConstraintIndex { index: usize },
    /// Crash with probability `p`, decided per test case content.
    RandomCrash { p: f64 },
}

impl Fault {
    pub fn validate(&self) -> Result<()> {
        match self {
            Fault::RandomCrash { p } if !(0.0..=1.0).contains(p) => {
                Err(Error::InvalidFaultConfig(format!("crash probability {p} not in [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn short_name(&self) -> String {
        match self {
            Fault::FlipHoldsToViolated => "flip-holds-to-violated".into(),
            Fault::FlipViolatedToHolds => "flip-violated-to-holds".into(),
            Fault::DropConstraintIndex { index } => format!("drop-constraint-{index}"),
            Fault::RandomCrash { p } => format!("random-crash-{p}"),
        }
    }
}

/// Wraps `base`; the wrapper is named `<base>+<fault>`.
pub fn inject_fault(base: &VerifierHandle, fault: Fault) -> Result<VerifierHandle> {
    fault.validate()?;
    Ok(VerifierHandle {
        name: format!("{}+{}", base.name, fault.short_name()),
        timeout_ms: base.timeout_ms,
        kind: VerifierKind::FaultInjected {
            base: Box::new(base.clone()),
            fault,
        },
    })
}

fn crash_draw(wrapper: &str, tc: &TestCase) -> f64 {
    let mut h = Sha256::new();
    h.update(wrapper.as_bytes());
    h.update(tc.fingerprint().to_le_bytes());
    let digest = h.finalize();
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    ChaCha8Rng::seed_from_u64(seed).random::<f64>()
}

pub(super) fn run_faulty(
    wrapper: &VerifierHandle,
    base: &VerifierHandle,
    fault: &Fault,
    tc: &TestCase,
    deadline: Deadline,
) -> Verdict {
    match fault {
        Fault::RandomCrash { p } => {
            if crash_draw(&wrapper.name, tc) < *p {
                Verdict::Crash {
                    diagnostic: format!("injected crash in {}", wrapper.name),
                    exit_info: Some("injected".into()),
                }
            } else {
                base.verify_within(tc, deadline)
            }
        }
        Fault::DropConstraintIndex { index } => {
            if *index >= tc.spec.preconditions().len() {
                return base.verify_within(tc, deadline);
            }
            let relaxed = tc
                .spec
                .without_precondition(*index)
                .and_then(|spec| TestCase::new(tc.id.clone(), tc.network.clone(), spec, tc.lineage.clone()));
            match relaxed {
                Ok(relaxed) => base.verify_within(&relaxed, deadline),
                Err(e) => Verdict::crash(format!("fault wrapper could not relax spec: {e}")),
            }
        }
        Fault::FlipHoldsToViolated => match base.verify_within(tc, deadline) {
            Verdict::Holds => Verdict::Violated {
                cex: tc.spec.bounding_region().center(),
            },
            other => other,
        },
        Fault::FlipViolatedToHolds => match base.verify_within(tc, deadline) {
            Verdict::Violated { .. } => Verdict::Holds,
            other => other,
        },
    }
}
