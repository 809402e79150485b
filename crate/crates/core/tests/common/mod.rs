// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures and an independent reference evaluator.
//!
//! The oracle reads networks and specs from their JSON form only, so it does
//! not share code with the crate under test.

#![allow(dead_code)]

use std::path::PathBuf;

use nnvfuzz::network::{Activation, Layer, Network};
use nnvfuzz::spec::{Comparison, InputConstraint, Metric, OutputProperty, Specification};
use rand::Rng;
use serde_json::Value;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; keeps the generators independent of the crate's sampler
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Random dense network: 1..=3 inputs, 1..=3 layers of width 1..=4, the last
/// layer linear with `outputs` neurons.
pub fn random_network<R: Rng>(rng: &mut R, outputs: usize) -> Network {
    let input_dim = rng.random_range(1..=3);
    let hidden = rng.random_range(0..=2);
    let mut widths: Vec<usize> = (0..hidden).map(|_| rng.random_range(1..=4)).collect();
    widths.push(outputs);
    let mut fan_in = input_dim;
    let mut layers = Vec::new();
    for (i, &w) in widths.iter().enumerate() {
        let weights = (0..w).map(|_| (0..fan_in).map(|_| gauss(rng)).collect()).collect();
        let bias = (0..w).map(|_| 0.3 * gauss(rng)).collect();
        let act = if i + 1 == widths.len() {
            Activation::Linear
        } else {
            [Activation::Relu, Activation::Relu, Activation::Sigmoid, Activation::Linear][rng.random_range(0..4)]
        };
        layers.push(Layer::new(weights, bias, act).unwrap());
        fan_in = w;
    }
    Network::new("random", input_dim, layers).unwrap()
}

/// Random ReLU network with at least two hidden layers of width two or more,
/// so every network operator applies.
pub fn random_relu_network<R: Rng>(rng: &mut R) -> Network {
    let input_dim = rng.random_range(2..=3);
    let widths = [rng.random_range(2..=4), rng.random_range(2..=4), rng.random_range(2..=3)];
    let mut fan_in = input_dim;
    let mut layers = Vec::new();
    for (i, &w) in widths.iter().enumerate() {
        let weights = (0..w).map(|_| (0..fan_in).map(|_| gauss(rng)).collect()).collect();
        let bias = (0..w).map(|_| 0.3 * gauss(rng)).collect();
        let act = if i + 1 == widths.len() { Activation::Linear } else { Activation::Relu };
        layers.push(Layer::new(weights, bias, act).unwrap());
        fan_in = w;
    }
    Network::new("relu", input_dim, layers).unwrap()
}

pub fn random_box<R: Rng>(rng: &mut R, dim: usize, max_half: f64) -> (Vec<f64>, Vec<f64>) {
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let half: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..max_half)).collect();
    (
        center.iter().zip(&half).map(|(c, h)| c - h).collect(),
        center.iter().zip(&half).map(|(c, h)| c + h).collect(),
    )
}

pub fn random_post<R: Rng>(rng: &mut R, outputs: usize) -> OutputProperty {
    if outputs > 1 && rng.random_bool(0.5) {
        OutputProperty::ArgmaxEq {
            label: rng.random_range(0..outputs),
        }
    } else {
        OutputProperty::LinearOut {
            coeffs: (0..outputs).map(|_| gauss(rng)).collect(),
            op: if rng.random_bool(0.5) { Comparison::Le } else { Comparison::Ge },
            rhs: gauss(rng),
        }
    }
}

/// Box precondition only.
pub fn random_box_spec<R: Rng>(rng: &mut R, dim: usize, outputs: usize) -> Specification {
    let (lower, upper) = random_box(rng, dim, 0.5);
    Specification::new(dim, 10.0, vec![InputConstraint::Box { lower, upper }], random_post(rng, outputs)).unwrap()
}

/// Box, ball and linear preconditions plus a linear output property, so
/// every constant operator applies.
pub fn random_rich_spec<R: Rng>(rng: &mut R, dim: usize, outputs: usize) -> Specification {
    let (lower, upper) = random_box(rng, dim, 0.8);
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    let pre = vec![
        InputConstraint::Box { lower, upper },
        InputConstraint::DistanceBall {
            center,
            metric: Metric::Linf,
            radius: rng.random_range(0.05..0.5),
        },
        InputConstraint::Linear {
            coeffs: (0..dim).map(|_| gauss(rng)).collect(),
            op: Comparison::Le,
            rhs: rng.random_range(0.0..2.0),
        },
    ];
    let post = OutputProperty::LinearOut {
        coeffs: (0..outputs).map(|_| gauss(rng)).collect(),
        op: Comparison::Ge,
        rhs: gauss(rng),
    };
    Specification::new(dim, 10.0, pre, post).unwrap()
}

// ---- independent oracle over JSON ----

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Pre-activations of layer `upto` (0-based) for input `x`.
pub fn oracle_pre_activation(model: &Value, x: &[f64], upto: usize) -> Vec<f64> {
    let layers = model["layers"].as_array().unwrap();
    let mut act = x.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let bias = floats(&layer["bias"]);
        let z: Vec<f64> = layer["weights"]
            .as_array()
            .unwrap()
            .iter()
            .zip(&bias)
            .map(|(row, b)| {
                let mut acc = 0.0;
                for (w, xi) in floats(row).iter().zip(&act) {
                    acc += w * xi;
                }
                acc + b
            })
            .collect();
        if i == upto {
            return z;
        }
        act = apply_activation(layer["activation"].as_str().unwrap(), &z);
    }
    panic!("layer {upto} out of range");
}

fn apply_activation(name: &str, z: &[f64]) -> Vec<f64> {
    z.iter()
        .map(|&v| match name {
            "linear" => v,
            "relu" => v.max(0.0),
            "sigmoid" => 1.0 / (1.0 + (-v).exp()),
            other => panic!("unknown activation {other}"),
        })
        .collect()
}

pub fn oracle_forward(model: &Value, x: &[f64]) -> Vec<f64> {
    let layers = model["layers"].as_array().unwrap();
    let last = layers.len() - 1;
    let z = oracle_pre_activation(model, x, last);
    apply_activation(layers[last]["activation"].as_str().unwrap(), &z)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn oracle_pre(spec: &Value, x: &[f64]) -> bool {
    let bound = spec["domain_bound"].as_f64().unwrap();
    if x.iter().any(|v| v.abs() > bound) {
        return false;
    }
    spec["preconditions"].as_array().unwrap().iter().all(|c| {
        let within = |lo: &[f64], hi: &[f64]| x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h);
        match c["type"].as_str().unwrap() {
            "box" => within(&floats(&c["lower"]), &floats(&c["upper"])),
            "distance_ball" => {
                let r = c["radius"].as_f64().unwrap();
                let center = floats(&c["center"]);
                let lo: Vec<f64> = center.iter().map(|v| v - r).collect();
                let hi: Vec<f64> = center.iter().map(|v| v + r).collect();
                within(&lo, &hi)
            }
            "linear" => {
                let lhs = dot(&floats(&c["coeffs"]), x);
                let rhs = c["rhs"].as_f64().unwrap();
                match c["op"].as_str().unwrap() {
                    "le" => lhs <= rhs,
                    _ => lhs >= rhs,
                }
            }
            other => panic!("unknown constraint {other}"),
        }
    })
}

pub fn oracle_post(spec: &Value, y: &[f64]) -> bool {
    let post = &spec["postcondition"];
    match post["type"].as_str().unwrap() {
        "argmax_eq" => {
            let label = post["label"].as_u64().unwrap() as usize;
            let mut best = 0;
            for (i, v) in y.iter().enumerate() {
                if *v > y[best] {
                    best = i;
                }
            }
            best == label
        }
        "linear_out" => {
            let lhs = dot(&floats(&post["coeffs"]), y);
            let rhs = post["rhs"].as_f64().unwrap();
            match post["op"].as_str().unwrap() {
                "le" => lhs <= rhs,
                _ => lhs >= rhs,
            }
        }
        other => panic!("unknown property {other}"),
    }
}

pub fn model_value(net: &Network) -> Value {
    serde_json::from_str(&net.to_json()).unwrap()
}

pub fn spec_value(spec: &Specification) -> Value {
    serde_json::from_str(&spec.to_json()).unwrap()
}

/// Bounds of the single box precondition.
pub fn box_of(spec: &Value) -> (Vec<f64>, Vec<f64>) {
    let c = &spec["preconditions"][0];
    assert_eq!(c["type"], "box");
    (floats(&c["lower"]), floats(&c["upper"]))
}

/// Dense grid falsification: true when some grid point with spacing `step`
/// (endpoints included) satisfies the precondition and violates the
/// postcondition.
pub fn grid_falsifies(model: &Value, spec: &Value, step: f64) -> bool {
    let (lo, hi) = box_of(spec);
    let counts: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| ((h - l) / step).ceil() as usize + 1).collect();
    let mut idx = vec![0usize; lo.len()];
    loop {
        let x: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(d, &k)| (lo[d] + k as f64 * step).min(hi[d]))
            .collect();
        if oracle_pre(spec, &x) && !oracle_post(spec, &oracle_forward(model, &x)) {
            return true;
        }
        let mut d = 0;
        loop {
            if d == idx.len() {
                return false;
            }
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
