// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line to
//! stderr (uncaptured) and then asserts.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use nnvfuzz::campaign::{run_campaign, BugKind, CampaignConfig, CampaignResult};
use nnvfuzz::mutation::{
    apply_constant_delta, mutate_ca, mutate_cr, mutate_csb, mutate_csw, mutate_gf, mutate_nai, mutate_neb,
    mutate_ns, mutate_ws, MutationConfig,
};
use nnvfuzz::network::{load_network, Network};
use nnvfuzz::pool::{load_seed_dir, Branch, Pool, SelectionStrategy};
use nnvfuzz::report::bugs_manifest;
use nnvfuzz::spec::{load_spec, robustness_spec, ConstantPath, PreSlot, Specification, TestCase};
use nnvfuzz::verifier::{
    bab_verify, external_verify, ibp_bounds, inject_fault, BabConfig, BoundsBox, Deadline, ExternalConfig, Fault,
    Verdict, VerifierHandle,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

use common::*;

const OPERATOR_APPLICATIONS: usize = 1000;
const OPERATOR_BUDGET: Duration = Duration::from_secs(30);
const SOUNDNESS_NETWORKS: usize = 500;
const SOUNDNESS_SAMPLES: usize = 1000;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(120);
const GRID_STEP: f64 = 1e-3;
const MIN_BAB_FIXTURES: usize = 20;
const CAMPAIGN_ITERATIONS: u64 = 200;
const CAMPAIGN_SEED: u64 = 42;
const MAX_MEAN_ROUND_MS: f64 = 1000.0;
const SELECTION_DRAWS: usize = 40_000;
const SELECTION_TOL: f64 = 0.02;
const RECENCY_SEQUENCES: usize = 1000;
const ADAPTER_TIMEOUT_MS: u64 = 500;
const ADAPTER_SLACK_MS: u64 = 500;

fn report(n: u32, ok: bool, what: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {n:02}: {what}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- criterion 1 helpers ----

struct Neuron {
    layer: usize,
    row: usize,
    weights: Vec<f64>,
    bias: f64,
}

fn neurons(net: &Network) -> Vec<Neuron> {
    net.layers()
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer.weights().iter().zip(layer.bias()).enumerate().map(move |(r, (w, b))| Neuron {
                layer: l,
                row: r,
                weights: w.clone(),
                bias: *b,
            })
        })
        .collect()
}

fn same_shape(a: &Network, b: &Network) -> bool {
    a.input_dim() == b.input_dim()
        && a.layers().len() == b.layers().len()
        && a.layers().iter().zip(b.layers()).all(|(x, y)| {
            x.rows() == y.rows() && x.cols() == y.cols() && x.activation() == y.activation()
        })
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn sorted_bits(v: &[f64]) -> Vec<u64> {
    let mut b = bits(v);
    b.sort_unstable();
    b
}

/// Neurons whose incoming row or bias changed.
fn changed_neurons(a: &Network, b: &Network) -> Vec<(usize, usize)> {
    neurons(a)
        .iter()
        .zip(neurons(b))
        .filter(|(x, y)| bits(&x.weights) != bits(&y.weights) || x.bias.to_bits() != y.bias.to_bits())
        .map(|(x, _)| (x.layer, x.row))
        .collect()
}

fn changed_constants(a: &Specification, b: &Specification) -> Vec<(ConstantPath, f64, f64)> {
    let after = b.constants();
    a.constants()
        .iter()
        .filter_map(|c| {
            let v = after.iter().find(|d| d.path == c.path)?.value;
            (v.to_bits() != c.value.to_bits()).then_some((c.path, c.value, v))
        })
        .collect()
}

fn with_bias(net: &Network, layer: usize, row: usize, delta: f64) -> Network {
    let mut v = model_value(net);
    let b = &mut v["layers"][layer]["bias"][row];
    *b = Value::from(b.as_f64().unwrap() + delta);
    Network::from_value(v).unwrap()
}

fn random_input<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn check_operator_contracts() -> Result<(), String> {
    let cfg = MutationConfig::default();
    let mut fixtures = rng(1);
    for i in 0..OPERATOR_APPLICATIONS {
        let net = random_relu_network(&mut fixtures);
        let spec = random_rich_spec(&mut fixtures, net.input_dim(), net.output_dim());
        let seed = fixtures.random::<u64>();
        let fail = |op: &str, why: String| format!("{op} application {i}: {why}");

        // GF: replay the documented draw order independently
        let gf = mutate_gf(&net, &cfg, &mut rng(seed)).map_err(|e| fail("GF", e.to_string()))?;
        let mut replay = rng(seed);
        let picks = loop {
            let mut picks = Vec::new();
            for (l, layer) in net.layers().iter().enumerate() {
                for (r, row) in layer.weights().iter().enumerate() {
                    for c in 0..row.len() {
                        if replay.random_bool(cfg.gf_rate) {
                            picks.push((l, r, c));
                        }
                    }
                }
            }
            if !picks.is_empty() {
                break picks;
            }
        };
        let normal = Normal::new(cfg.gf_mu, cfg.gf_sigma).unwrap();
        let mut expected: Vec<Vec<Vec<f64>>> = net.layers().iter().map(|l| l.weights().to_vec()).collect();
        for (l, r, c) in picks {
            expected[l][r][c] += normal.sample(&mut replay);
        }
        let got: Vec<Vec<Vec<f64>>> = gf.layers().iter().map(|l| l.weights().to_vec()).collect();
        let biases_kept = net.layers().iter().zip(gf.layers()).all(|(a, b)| bits(a.bias()) == bits(b.bias()));
        if !same_shape(&net, &gf) || got != expected || !biases_kept {
            return Err(fail("GF", "weights differ from replayed draws".into()));
        }

        // WS: one row permuted, multiset preserved
        let ws = mutate_ws(&net, &mut rng(seed)).map_err(|e| fail("WS", e.to_string()))?;
        let changed = changed_neurons(&net, &ws);
        if !same_shape(&net, &ws) || changed.len() != 1 {
            return Err(fail("WS", format!("changed neurons {changed:?}")));
        }
        let (l, r) = changed[0];
        let before = &net.layers()[l].weights()[r];
        let after = &ws.layers()[l].weights()[r];
        if sorted_bits(before) != sorted_bits(after) || net.layers()[l].bias()[r] != ws.layers()[l].bias()[r] {
            return Err(fail("WS", "row is not a permutation".into()));
        }

        // NEB: one outgoing column zeroed; the neuron no longer affects the output
        let neb = mutate_neb(&net, &mut rng(seed)).map_err(|e| fail("NEB", e.to_string()))?;
        let changed = changed_neurons(&net, &neb);
        let col = (0..net.layers().len() - 1)
            .flat_map(|l| (0..net.layers()[l].rows()).map(move |j| (l, j)))
            .find(|&(l, j)| neb.layers()[l + 1].weights().iter().all(|row| row[j] == 0.0));
        let Some((l, j)) = col else {
            return Err(fail("NEB", "no zeroed column".into()));
        };
        let only_that_column = neurons(&net).iter().zip(neurons(&neb)).all(|(a, b)| {
            a.bias.to_bits() == b.bias.to_bits()
                && a.weights.iter().zip(&b.weights).enumerate().all(|(c, (x, y))| {
                    x.to_bits() == y.to_bits() || (a.layer == l + 1 && c == j && *y == 0.0)
                })
        });
        if !same_shape(&net, &neb) || !only_that_column || changed.iter().any(|&(cl, _)| cl != l + 1) {
            return Err(fail("NEB", "edits outside the blocked column".into()));
        }
        let bumped = with_bias(&neb, l, j, 3.5);
        let mut xr = rng(seed ^ 0x5a5a);
        for _ in 0..4 {
            let x = random_input(&mut xr, net.input_dim());
            if neb.forward(&x).unwrap() != bumped.forward(&x).unwrap() {
                return Err(fail("NEB", "blocked neuron still influences the output".into()));
            }
        }

        // NAI: one neuron's pre-activation negated exactly
        let nai = mutate_nai(&net, &mut rng(seed)).map_err(|e| fail("NAI", e.to_string()))?;
        let changed = changed_neurons(&net, &nai);
        if !same_shape(&net, &nai) || changed.len() != 1 {
            return Err(fail("NAI", format!("changed neurons {changed:?}")));
        }
        let (l, r) = changed[0];
        let (mv, nv) = (model_value(&net), model_value(&nai));
        for _ in 0..4 {
            let x = random_input(&mut xr, net.input_dim());
            let z = oracle_pre_activation(&mv, &x, l)[r];
            let z2 = oracle_pre_activation(&nv, &x, l)[r];
            if z2.to_bits() != (-z).to_bits() && !(z == 0.0 && z2 == 0.0) {
                return Err(fail("NAI", format!("pre-activation {z2} is not -({z})")));
            }
        }

        // NS: two rows of one layer swapped together with their biases
        let ns = mutate_ns(&net, &mut rng(seed)).map_err(|e| fail("NS", e.to_string()))?;
        let changed = changed_neurons(&net, &ns);
        let swapped = changed.len() == 2 && changed[0].0 == changed[1].0 && {
            let (l, a, b) = (changed[0].0, changed[0].1, changed[1].1);
            let (x, y) = (&net.layers()[l], &ns.layers()[l]);
            bits(&x.weights()[a]) == bits(&y.weights()[b])
                && bits(&x.weights()[b]) == bits(&y.weights()[a])
                && x.bias()[a].to_bits() == y.bias()[b].to_bits()
                && x.bias()[b].to_bits() == y.bias()[a].to_bits()
        };
        if !same_shape(&net, &ns) || !swapped {
            return Err(fail("NS", format!("changed neurons {changed:?}")));
        }

        // CA and CSb: one constant moved by at most ca_delta_max in the stated direction
        for (name, sign) in [("CA", 1.0), ("CSb", -1.0)] {
            let m = if sign > 0.0 {
                mutate_ca(&spec, &cfg, &mut rng(seed))
            } else {
                mutate_csb(&spec, &cfg, &mut rng(seed))
            }
            .map_err(|e| fail(name, e.to_string()))?;
            let changed = changed_constants(&spec, &m);
            let ok = changed.len() == 1 && {
                let (_, old, new) = changed[0];
                let moved = sign * (new - old);
                moved > 0.0 && moved <= cfg.ca_delta_max + 1e-12
            };
            if !ok || m.preconditions().len() != spec.preconditions().len() {
                return Err(fail(name, format!("changed constants {changed:?}")));
            }
        }

        // CR: one constraint dropped, or one box side relaxed to the domain clamp
        let cr = mutate_cr(&spec, &cfg, &mut rng(seed)).map_err(|e| fail("CR", e.to_string()))?;
        let (pre, pre2) = (spec.preconditions(), cr.preconditions());
        let ok = if pre2.len() + 1 == pre.len() {
            (0..pre.len()).any(|k| {
                let rest: Vec<_> = pre.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, c)| c).collect();
                rest.iter().zip(pre2).all(|(a, b)| *a == b)
            }) && spec.postcondition() == cr.postcondition()
        } else {
            let changed = changed_constants(&spec, &cr);
            let b = spec.domain_bound();
            changed.len() == 1
                && match changed[0] {
                    (ConstantPath::Pre { slot: PreSlot::Lower(_), .. }, _, new) => new == -b,
                    (ConstantPath::Pre { slot: PreSlot::Upper(_), .. }, _, new) => new == b,
                    _ => false,
                }
        };
        if !ok {
            return Err(fail("CR", "not a single removal".into()));
        }

        // CSw: two constants exchanged, multiset preserved
        let csw = mutate_csw(&spec, &cfg, &mut rng(seed)).map_err(|e| fail("CSw", e.to_string()))?;
        let changed = changed_constants(&spec, &csw);
        let values = |s: &Specification| sorted_bits(&s.constants().iter().map(|c| c.value).collect::<Vec<_>>());
        let ok = changed.len() == 2
            && changed[0].1.to_bits() == changed[1].2.to_bits()
            && changed[1].1.to_bits() == changed[0].2.to_bits()
            && values(&spec) == values(&csw);
        if !ok {
            return Err(fail("CSw", format!("changed constants {changed:?}")));
        }

        // determinism: same seed, same mutant
        let again = (
            mutate_gf(&net, &cfg, &mut rng(seed)).unwrap(),
            mutate_ws(&net, &mut rng(seed)).unwrap(),
            mutate_neb(&net, &mut rng(seed)).unwrap(),
            mutate_nai(&net, &mut rng(seed)).unwrap(),
            mutate_ns(&net, &mut rng(seed)).unwrap(),
            mutate_cr(&spec, &cfg, &mut rng(seed)).unwrap(),
            mutate_csw(&spec, &cfg, &mut rng(seed)).unwrap(),
        );
        if again != (gf, ws, neb, nai, ns, cr, csw) {
            return Err(fail("determinism", "replay with the same seed differs".into()));
        }
    }
    Ok(())
}

#[test]
fn criterion_01_operator_contracts() {
    let start = Instant::now();
    let result = check_operator_contracts();
    let elapsed = start.elapsed();
    let ok = result.is_ok() && elapsed < OPERATOR_BUDGET;
    report(
        1,
        ok,
        &format!("{OPERATOR_APPLICATIONS} applications of each of the nine operators in {elapsed:.2?}"),
    );
    result.unwrap();
    assert!(elapsed < OPERATOR_BUDGET, "took {elapsed:?}");
}

// ---- criterion 2 ----

fn leaf_diff(a: &Value, b: &Value, path: String, out: &mut Vec<(String, Value, Value)>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let keys: BTreeSet<&String> = x.keys().chain(y.keys()).collect();
            for k in keys {
                leaf_diff(&x[k.as_str()], &y[k.as_str()], format!("{path}.{k}"), out);
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                leaf_diff(p, q, format!("{path}[{i}]"), out);
            }
        }
        _ if a != b => out.push((path, a.clone(), b.clone())),
        _ => {}
    }
}

#[test]
fn criterion_02_constant_addition_worked_example() {
    let spec = robustness_spec(&[0.3, 0.7], 0.1, 0).unwrap();
    let path = ConstantPath::Pre {
        index: 0,
        slot: PreSlot::Radius,
    };
    let mutant = apply_constant_delta(&spec, path, 0.05).unwrap();
    let (before, after) = (spec_value(&spec), spec_value(&mutant));
    let mut diff = Vec::new();
    leaf_diff(&before, &after, String::new(), &mut diff);

    let k = before["constants"]
        .as_array()
        .unwrap()
        .iter()
        .position(|c| c["path"] == "pre[0].radius")
        .expect("radius in constant table");
    let old = Value::from(0.1);
    let new = Value::from(0.15);
    let expected = vec![
        (format!(".constants[{k}].value"), old.clone(), new.clone()),
        (".preconditions[0].radius".to_string(), old, new),
    ];
    let text = serde_json::to_string(&after["preconditions"][0]["radius"]).unwrap();
    let ok = diff == expected && text == "0.15" && mutant.constant(path) == Some(0.15);
    report(2, ok, &format!("CA d=0.05 on pre[0].radius gives diff {diff:?}"));
    assert_eq!(diff, expected);
    assert_eq!(text, "0.15");
}

// ---- criterion 3 ----

fn check_soundness() -> Result<usize, String> {
    let roster = [VerifierHandle::ibp("ibp"), VerifierHandle::bab("bab"), VerifierHandle::sampler("sampler")];
    let mut r = rng(3);
    let mut violated = 0;
    for n in 0..SOUNDNESS_NETWORKS {
        let outputs = r.random_range(1..=3);
        let net = random_network(&mut r, outputs);
        let spec = random_box_spec(&mut r, net.input_dim(), outputs);
        let tc = TestCase::seed(format!("n{n}"), net, spec).unwrap();
        let (mv, sv) = (model_value(&tc.network), spec_value(&tc.spec));
        let (lo, hi) = box_of(&sv);
        let bounds = ibp_bounds(&tc.network, &BoundsBox::new(lo.clone(), hi.clone()));

        let mut sampled_violation = false;
        for _ in 0..SOUNDNESS_SAMPLES {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| r.random_range(*l..=*h)).collect();
            let y = oracle_forward(&mv, &x);
            if !bounds.contains(&y) {
                return Err(format!("network {n}: output {y:?} escapes IBP bounds {bounds:?} at {x:?}"));
            }
            sampled_violation |= oracle_pre(&sv, &x) && !oracle_post(&sv, &y);
        }

        let verdicts: Vec<(&str, Verdict)> = roster.iter().map(|v| (v.name.as_str(), v.verify(&tc))).collect();
        for (name, v) in &verdicts {
            match v {
                Verdict::Violated { cex } => {
                    violated += 1;
                    let oracle = oracle_pre(&sv, cex) && !oracle_post(&sv, &oracle_forward(&mv, cex));
                    if !tc.violates(cex).unwrap() || !oracle {
                        return Err(format!("network {n}: {name} counterexample {cex:?} does not revalidate"));
                    }
                }
                Verdict::Holds if sampled_violation => {
                    return Err(format!("network {n}: {name} says holds but a sample violates"));
                }
                Verdict::Crash { diagnostic, .. } => return Err(format!("network {n}: {name} crashed: {diagnostic}")),
                _ => {}
            }
        }
        if matches!(verdicts[0].1, Verdict::Holds) && matches!(verdicts[1].1, Verdict::Violated { .. }) {
            return Err(format!("network {n}: IBP holds but BaB violated"));
        }
    }
    Ok(violated)
}

#[test]
fn criterion_03_verifier_soundness() {
    let start = Instant::now();
    let result = check_soundness();
    let elapsed = start.elapsed();
    let ok = result.is_ok() && elapsed < SOUNDNESS_BUDGET;
    report(
        3,
        ok,
        &format!(
            "{SOUNDNESS_NETWORKS} networks x {SOUNDNESS_SAMPLES} samples, {} revalidated counterexamples, {elapsed:.2?}",
            result.as_ref().map_or(0, |v| *v)
        ),
    );
    result.unwrap();
    assert!(elapsed < SOUNDNESS_BUDGET, "took {elapsed:?}");
}

// ---- criterion 4 ----

#[test]
fn criterion_04_bab_matches_grid_oracle() {
    let dir = fixtures_dir().join("bab");
    let mut stems: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.strip_suffix(".model.json").map(str::to_string)
        })
        .collect();
    stems.sort();
    let mut mismatches = Vec::new();
    let mut violated = 0;
    for stem in &stems {
        let model_path = dir.join(format!("{stem}.model.json"));
        let spec_path = dir.join(format!("{stem}.spec.json"));
        let mv: Value = serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
        let sv: Value = serde_json::from_str(&std::fs::read_to_string(&spec_path).unwrap()).unwrap();
        let falsified = grid_falsifies(&mv, &sv, GRID_STEP);
        violated += falsified as usize;
        let tc = TestCase::seed(stem.clone(), load_network(&model_path).unwrap(), load_spec(&spec_path).unwrap())
            .unwrap();
        let verdict = bab_verify(&tc, &BabConfig::default(), Deadline::from_ms(60_000));
        let agrees = match verdict {
            Verdict::Holds => !falsified,
            Verdict::Violated { .. } => falsified,
            _ => false,
        };
        if !agrees {
            mismatches.push(format!("{stem}: bab {} oracle falsified={falsified}", verdict.label()));
        }
    }
    let ok = stems.len() >= MIN_BAB_FIXTURES && mismatches.is_empty();
    report(
        4,
        ok,
        &format!(
            "{} fixtures ({violated} falsifiable), {} mismatches against a {GRID_STEP} grid",
            stems.len(),
            mismatches.len()
        ),
    );
    assert!(stems.len() >= MIN_BAB_FIXTURES, "only {} fixtures", stems.len());
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

// ---- criteria 5 to 8 ----

fn seeds() -> Vec<TestCase> {
    load_seed_dir(&fixtures_dir().join("seeds")).unwrap()
}

fn campaign(verifiers: Vec<VerifierHandle>) -> CampaignResult {
    let cfg = CampaignConfig {
        max_iter: CAMPAIGN_ITERATIONS,
        rng_seed: CAMPAIGN_SEED,
        verifiers,
        ..CampaignConfig::default()
    };
    run_campaign(seeds(), &cfg).unwrap()
}

fn faulty_roster(fault: Fault) -> (Vec<VerifierHandle>, String) {
    let faulty = inject_fault(&VerifierHandle::bab("bab"), fault).unwrap();
    let name = faulty.name.clone();
    (vec![VerifierHandle::ibp("ibp"), faulty, VerifierHandle::sampler("sampler")], name)
}

fn faults() -> [(Fault, BugKind); 4] {
    [
        (Fault::FlipViolatedToHolds, BugKind::Inconsistency),
        (Fault::FlipHoldsToViolated, BugKind::InvalidCounterexample),
        (Fault::RandomCrash { p: 0.2 }, BugKind::CrashBug),
        (Fault::DropConstraintIndex { index: 0 }, BugKind::InvalidCounterexample),
    ]
}

#[test]
fn criterion_05_clean_campaign_has_no_bugs() {
    let result = campaign(CampaignConfig::default().verifiers);
    let ok = result.bugs.is_empty() && result.stats.iterations == CAMPAIGN_ITERATIONS;
    report(
        5,
        ok,
        &format!(
            "{} iterations, {} mutants, {} bug reports",
            result.stats.iterations,
            result.stats.mutants_verified,
            result.bugs.len()
        ),
    );
    assert_eq!(result.stats.iterations, CAMPAIGN_ITERATIONS);
    assert!(result.bugs.is_empty(), "{:#?}", result.deduped().first());
}

#[test]
fn criterion_06_fault_injection_detected() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (fault, kind) in faults() {
        let label = fault.short_name();
        let (roster, name) = faulty_roster(fault.clone());
        let bugs = campaign(roster).deduped();
        let hit = bugs.iter().any(|b| {
            b.kind == kind
                && if matches!(fault, Fault::FlipViolatedToHolds) {
                    b.implicated == BTreeSet::from([name.clone()])
                } else {
                    b.implicated.contains(&name)
                }
        });
        ok &= hit;
        lines.push(format!("{label}: {} deduped, {kind} found={hit}", bugs.len()));
    }
    report(6, ok, &lines.join("; "));
    assert!(ok, "{lines:#?}");
}

#[test]
fn criterion_07_replay_is_byte_identical() {
    let mut ok = true;
    let mut sizes = Vec::new();
    for (fault, _) in faults() {
        let first = bugs_manifest(&campaign(faulty_roster(fault.clone()).0).deduped());
        let second = bugs_manifest(&campaign(faulty_roster(fault).0).deduped());
        ok &= first == second;
        sizes.push(first.len());
    }
    report(7, ok, &format!("four fault campaigns run twice, manifest sizes {sizes:?} bytes"));
    assert!(ok);
}

#[derive(Clone, Default)]
struct Captured(Arc<Mutex<Vec<u8>>>);

impl Write for Captured {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn criterion_08_round_time_and_instrumentation() {
    let sink = Captured::default();
    let writer = sink.clone();
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::INFO)
        .with_ansi(false)
        .with_writer(move || writer.clone())
        .finish();
    let result = tracing::subscriber::with_default(subscriber, || campaign(CampaignConfig::default().verifiers));
    let logs = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
    let round_lines = logs.lines().filter(|l| l.contains("round") && l.contains("wall_ms=")).count();
    let mean = result.stats.mean_round_ms();
    let ok = mean <= MAX_MEAN_ROUND_MS && round_lines as u64 == result.stats.iterations;
    report(
        8,
        ok,
        &format!("mean round {mean:.2} ms (limit {MAX_MEAN_ROUND_MS} ms), {round_lines} timed round log lines"),
    );
    assert!(mean <= MAX_MEAN_ROUND_MS);
    assert_eq!(round_lines as u64, result.stats.iterations);
}

// ---- criterion 9 ----

fn dummy_case(id: String) -> TestCase {
    let net = Network::from_json(
        r#"{"input_dim":1,"layers":[{"weights":[[1.0]],"bias":[0.0],"activation":"linear"}]}"#,
    )
    .unwrap();
    TestCase::seed(id, net, robustness_spec(&[0.0], 0.1, 0).unwrap()).unwrap()
}

#[test]
fn criterion_09_selection_statistics() {
    const K: usize = 10;
    let mut pool = Pool::new();
    pool.add_seeds((0..K).map(|i| dummy_case(format!("c{i}"))).collect()).unwrap();
    let mut r = rng(9);

    let mut counts = [0usize; K];
    for _ in 0..SELECTION_DRAWS {
        let id = &pool.select(SelectionStrategy::Random, &mut r).unwrap().id;
        counts[id[1..].parse::<usize>().unwrap()] += 1;
    }
    let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / SELECTION_DRAWS as f64).collect();
    let uniform = freqs.iter().all(|f| (f - 1.0 / K as f64).abs() <= SELECTION_TOL);

    let mut recency_branch = 0usize;
    let mut newest = 0usize;
    for _ in 0..SELECTION_DRAWS {
        let (tc, branch) = pool.select_with_branch(SelectionStrategy::Mixed, &mut r).unwrap();
        recency_branch += (branch == Branch::Recency) as usize;
        newest += (tc.id == format!("c{}", K - 1)) as usize;
    }
    let branch_frac = recency_branch as f64 / SELECTION_DRAWS as f64;
    let newest_frac = newest as f64 / SELECTION_DRAWS as f64;
    let mixed = (branch_frac - 0.5).abs() <= SELECTION_TOL && (newest_frac - (0.5 + 0.5 / K as f64)).abs() <= SELECTION_TOL;

    let mut recency_hits = 0;
    for s in 0..RECENCY_SEQUENCES {
        let mut seq = rng(10_000 + s as u64);
        let cap = seq.random_bool(0.5).then(|| seq.random_range(1..8));
        let mut pool = Pool::new().with_capacity_limit(cap);
        let mut last = String::new();
        let mut all = true;
        for step in 0..seq.random_range(1..20) {
            let batch = seq.random_range(1..4);
            let cases: Vec<TestCase> = (0..batch).map(|b| dummy_case(format!("s{s}-{step}-{b}"))).collect();
            last = cases.last().unwrap().id.clone();
            pool.add(cases).unwrap();
            all &= pool.select(SelectionStrategy::RecencyAware, &mut seq).unwrap().id == last;
        }
        all &= pool.select(SelectionStrategy::RecencyAware, &mut seq).unwrap().id == last;
        recency_hits += all as usize;
    }
    let recency = recency_hits == RECENCY_SEQUENCES;

    let ok = uniform && mixed && recency;
    report(
        9,
        ok,
        &format!(
            "random freqs {:.4}..{:.4}, mixed recency branch {branch_frac:.4}, newest {newest_frac:.4}, recency {recency_hits}/{RECENCY_SEQUENCES}",
            freqs.iter().cloned().fold(f64::INFINITY, f64::min),
            freqs.iter().cloned().fold(0.0, f64::max)
        ),
    );
    assert!(uniform, "{freqs:?}");
    assert!(mixed, "branch {branch_frac} newest {newest_frac}");
    assert!(recency);
}

// ---- criterion 10 ----

fn alive(pid: i32) -> bool {
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        // state is the field after the parenthesised command name
        Ok(stat) => stat.rsplit_once(')').is_some_and(|(_, rest)| !rest.trim_start().starts_with('Z')),
        Err(_) => {
            // SAFETY: signal 0 only probes for existence.
            unsafe { libc::kill(pid, 0) == 0 }
        }
    }
}

fn adapter(name: &str, extra: &[&str]) -> ExternalConfig {
    let path = fixtures_dir().join("adapters").join(name);
    let mut command = vec!["sh".to_string(), path.display().to_string()];
    command.extend(extra.iter().map(|s| s.to_string()));
    ExternalConfig { command }
}

#[test]
fn criterion_10_external_adapter_conformance() {
    let tc = dummy_case("adapter".into());
    let mut notes = Vec::new();

    let echo = external_verify(&adapter("echo.sh", &[]), &tc, 5_000);
    let echo_ok = echo == Verdict::Holds;
    notes.push(format!("echo -> {}", echo.label()));

    let dir = tempfile::tempdir().unwrap();
    let pid_file = dir.path().join("pids");
    let pid_arg = pid_file.display().to_string();
    let start = Instant::now();
    let slept = external_verify(&adapter("sleep.sh", &[&pid_arg]), &tc, ADAPTER_TIMEOUT_MS);
    let elapsed = start.elapsed();
    let pids: Vec<i32> = std::fs::read_to_string(&pid_file)
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.trim().parse().ok())
        .collect();
    let reap_deadline = Instant::now() + Duration::from_secs(2);
    while pids.iter().any(|&p| alive(p)) && Instant::now() < reap_deadline {
        std::thread::sleep(Duration::from_millis(20));
    }
    let survivors: Vec<i32> = pids.iter().copied().filter(|&p| alive(p)).collect();
    let sleep_ok = slept == Verdict::Timeout
        && elapsed <= Duration::from_millis(ADAPTER_TIMEOUT_MS + ADAPTER_SLACK_MS)
        && pids.len() == 2
        && survivors.is_empty();
    notes.push(format!(
        "sleep -> {} in {elapsed:.0?}, {} pids, survivors {survivors:?}",
        slept.label(),
        pids.len()
    ));

    let garbage = external_verify(&adapter("garbage.sh", &[]), &tc, 5_000);
    let garbage_ok = matches!(&garbage, Verdict::Crash { diagnostic, .. } if diagnostic.contains("this is not json {{{"));
    notes.push(format!("garbage -> {}", garbage.label()));

    let ok = echo_ok && sleep_ok && garbage_ok;
    report(10, ok, &notes.join("; "));
    assert!(echo_ok, "{echo:?}");
    assert!(sleep_ok, "{slept:?} {elapsed:?} {pids:?} {survivors:?}");
    assert!(garbage_ok, "{garbage:?}");
}
