// SPDX-License-Identifier: Apache-2.0

//! Falsification by uniform sampling. Never proves anything.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::TestCase;

use super::{Deadline, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub sample_count: usize,
    /// Mixed with the test case fingerprint, so identical content always
    /// draws identical samples.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            sample_count: 2_000,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidConfig("sample_count must be positive".into()));
        }
        Ok(())
    }
}

pub fn sample_verify(tc: &TestCase, cfg: &SamplerConfig, deadline: Deadline) -> Verdict {
    let region = tc.spec.bounding_region();
    if region.is_empty() {
        return Verdict::unknown("no admissible samples");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ tc.fingerprint());
    let mut admissible = 0usize;
    let mut x = vec![0.0; tc.spec.input_dim()];
    for i in 0..cfg.sample_count {
        if i % 256 == 0 && deadline.expired() {
            return Verdict::Timeout;
        }
        for (v, (l, u)) in x.iter_mut().zip(region.lower.iter().zip(&region.upper)) {
            *v = l + (u - l) * rng.random::<f64>();
        }
        if !matches!(tc.spec.eval_pre(&x), Ok(true)) {
            continue;
        }
        admissible += 1;
        if matches!(tc.violates(&x), Ok(true)) {
            return Verdict::Violated { cex: x };
        }
    }
    if admissible == 0 {
        Verdict::unknown("no admissible samples")
    } else {
        Verdict::unknown(format!("no violation among {admissible} admissible samples"))
    }
}
