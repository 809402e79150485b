// SPDX-License-Identifier: Apache-2.0

//! Regenerates `fixtures/bab/`: tiny 2-D ReLU networks on small boxes with
//! a linear output threshold placed 0.02 away from the grid extremum, so
//! every instance is decided with a margin well above the grid resolution.
//!
//! cargo run -p nnvfuzz --example make_bab_fixtures

use std::path::PathBuf;

use nnvfuzz::network::{generate_seed_network, save_network, Activation, SeedNetworkConfig};
use nnvfuzz::spec::{save_spec, Comparison, InputConstraint, OutputProperty, Specification};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COUNT: usize = 24;
const STEP: f64 = 1e-3;
const MARGIN: f64 = 0.02;

fn main() -> nnvfuzz::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/bab");
    std::fs::create_dir_all(&dir).expect("create fixture dir");
    let mut rng = ChaCha8Rng::seed_from_u64(0xBAB);
    for i in 0..COUNT {
        let hidden = rng.random_range(3..=6);
        let cfg = SeedNetworkConfig::new(2, vec![hidden, 1], Activation::Relu);
        let net = generate_seed_network(&cfg, rng.random())?.with_name(format!("bab-{i:02}"));
        let half: f64 = rng.random_range(0.05..=0.2);
        let center: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let lower: Vec<f64> = center.iter().map(|c| c - half).collect();
        let upper: Vec<f64> = center.iter().map(|c| c + half).collect();

        let n = ((upper[0] - lower[0]) / STEP).floor() as usize;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..=n {
            for b in 0..=n {
                let x = [lower[0] + a as f64 * STEP, lower[1] + b as f64 * STEP];
                let y = net.forward(&x)?[0];
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        let holds = i % 2 == 0;
        let (op, rhs) = match (i % 4 < 2, holds) {
            (true, true) => (Comparison::Ge, lo - MARGIN),
            (true, false) => (Comparison::Ge, lo + MARGIN),
            (false, true) => (Comparison::Le, hi + MARGIN),
            (false, false) => (Comparison::Le, hi - MARGIN),
        };
        let spec = Specification::new(
            2,
            10.0,
            vec![InputConstraint::Box { lower, upper }],
            OutputProperty::LinearOut { coeffs: vec![1.0], op, rhs },
        )?;
        save_network(&net, dir.join(format!("case-{i:02}.model.json")))?;
        save_spec(&spec, dir.join(format!("case-{i:02}.spec.json")))?;
    }
    println!("wrote {COUNT} instances to {}", dir.display());
    Ok(())
}
