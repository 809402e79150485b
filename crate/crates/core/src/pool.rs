// SPDX-License-Identifier: Apache-2.0

//! Test-case pool and selection heuristics.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::network::{argmax_label, generate_seed_network, load_network, save_network, SeedNetworkConfig};
use crate::spec::{load_spec, robustness_spec, save_spec, Lineage, TestCase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("duplicate test case id `{0}`")]
    DuplicateId(String),
    #[error("pool is empty")]
    EmptyPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Random,
    #[serde(alias = "recency")]
    RecencyAware,
    Mixed,
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionStrategy::Random => "random",
            SelectionStrategy::RecencyAware => "recency",
            SelectionStrategy::Mixed => "mixed",
        })
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(SelectionStrategy::Random),
            "recency" | "recency-aware" | "recency_aware" => Ok(SelectionStrategy::RecencyAware),
            "mixed" => Ok(SelectionStrategy::Mixed),
            other => Err(Error::InvalidConfig(format!("unknown selection strategy `{other}`"))),
        }
    }
}

/// Which rule produced a selection; Mixed reports the branch it took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Random,
    Recency,
}

#[derive(Debug, Clone)]
struct Entry {
    case: TestCase,
    insertion: u64,
    seed: bool,
}

/// Insertion-ordered pool. Selection never removes entries; the optional
/// capacity evicts the oldest non-seed entries.
#[derive(Debug, Clone)]
pub struct Pool {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
    next_insertion: u64,
    capacity: Option<usize>,
    mixed_bias: f64,
}

impl Default for Pool {
    fn default() -> Self {
        Pool::new()
    }
}

impl Pool {
    pub fn new() -> Self {
        Pool {
            entries: Vec::new(),
            index: HashMap::new(),
            next_insertion: 0,
            capacity: None,
            mixed_bias: 0.5,
        }
    }

    pub fn with_capacity_limit(mut self, cap: Option<usize>) -> Self {
        self.capacity = cap;
        self
    }

    /// Probability that Mixed takes the recency branch.
    pub fn with_mixed_bias(mut self, bias: f64) -> Self {
        self.mixed_bias = bias;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&TestCase> {
        self.index.get(id).map(|&i| &self.entries[i].case)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestCase> {
        self.entries.iter().map(|e| &e.case)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.case.id.as_str()).collect()
    }

    /// Seeds are exempt from eviction.
    pub fn add_seeds(&mut self, cases: Vec<TestCase>) -> Result<(), PoolError> {
        self.insert(cases, true)
    }

    pub fn add(&mut self, cases: Vec<TestCase>) -> Result<(), PoolError> {
        self.insert(cases, false)
    }

    fn insert(&mut self, cases: Vec<TestCase>, seed: bool) -> Result<(), PoolError> {
        let mut batch = std::collections::HashSet::new();
        for c in &cases {
            if self.index.contains_key(&c.id) || !batch.insert(c.id.as_str()) {
                return Err(PoolError::DuplicateId(c.id.clone()));
            }
        }
        for case in cases {
            self.index.insert(case.id.clone(), self.entries.len());
            self.entries.push(Entry {
                case,
                insertion: self.next_insertion,
                seed,
            });
            self.next_insertion += 1;
        }
        self.evict();
        Ok(())
    }

    fn evict(&mut self) {
        let Some(cap) = self.capacity else { return };
        let mut excess = self.entries.len().saturating_sub(cap);
        if excess == 0 {
            return;
        }
        // the newest entry always survives so recency selection stays exact
        let last = self.entries.len() - 1;
        let mut i = 0;
        self.entries.retain(|e| {
            let keep = e.seed || excess == 0 || i == last;
            if !keep {
                excess -= 1;
            }
            i += 1;
            keep
        });
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.case.id.clone(), i))
            .collect();
    }

    pub fn select<R: Rng + ?Sized>(&self, strategy: SelectionStrategy, rng: &mut R) -> Result<&TestCase, PoolError> {
        self.select_with_branch(strategy, rng).map(|(tc, _)| tc)
    }

    pub fn select_with_branch<R: Rng + ?Sized>(
        &self,
        strategy: SelectionStrategy,
        rng: &mut R,
    ) -> Result<(&TestCase, Branch), PoolError> {
        if self.entries.is_empty() {
            return Err(PoolError::EmptyPool);
        }
        let branch = match strategy {
            SelectionStrategy::Random => Branch::Random,
            SelectionStrategy::RecencyAware => Branch::Recency,
            SelectionStrategy::Mixed => {
                if rng.random_bool(self.mixed_bias) {
                    Branch::Recency
                } else {
                    Branch::Random
                }
            }
        };
        let idx = match branch {
            Branch::Recency => self.entries.len() - 1,
            Branch::Random => rng.random_range(0..self.entries.len()),
        };
        Ok((&self.entries[idx].case, branch))
    }

    /// Writes `<id>.model.json`/`<id>.spec.json` pairs plus `manifest.json`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let model = format!("{}.model.json", e.case.id);
            let spec = format!("{}.spec.json", e.case.id);
            save_network(&e.case.network, dir.join(&model))?;
            save_spec(&e.case.spec, dir.join(&spec))?;
            manifest.push(ManifestEntry {
                id: e.case.id.clone(),
                insertion: e.insertion,
                seed: e.seed,
                lineage: e.case.lineage.clone(),
                model,
                spec,
            });
        }
        let text = serde_json::to_string_pretty(&PoolManifest {
            next_insertion: self.next_insertion,
            entries: manifest,
        })
        .expect("manifest serializes");
        let path = dir.join("manifest.json");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Restores a pool written by [`Pool::export`].
    pub fn import(dir: &Path) -> Result<Pool> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: PoolManifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let mut pool = Pool::new();
        for m in manifest.entries {
            let case = TestCase::new(
                m.id,
                load_network(dir.join(&m.model))?,
                load_spec(dir.join(&m.spec))?,
                m.lineage,
            )?;
            pool.index.insert(case.id.clone(), pool.entries.len());
            pool.entries.push(Entry {
                case,
                insertion: m.insertion,
                seed: m.seed,
            });
        }
        pool.next_insertion = manifest.next_insertion;
        Ok(pool)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolManifest {
    next_insertion: u64,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    insertion: u64,
    seed: bool,
    lineage: Lineage,
    model: String,
    spec: String,
}

/// Loads every `<stem>.model.json` with a matching `<stem>.spec.json`,
/// sorted by stem; the stem becomes the test case id.
pub fn load_seed_dir(dir: &Path) -> Result<Vec<TestCase>> {
    if !dir.is_dir() {
        return Err(Error::InvalidConfig(format!("seed directory {} does not exist", dir.display())));
    }
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in listing {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".model.json") {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    let mut cases = Vec::with_capacity(stems.len());
    for stem in stems {
        let spec_path = dir.join(format!("{stem}.spec.json"));
        if !spec_path.is_file() {
            return Err(Error::InvalidConfig(format!("{stem}.model.json has no matching {stem}.spec.json")));
        }
        let net = load_network(dir.join(format!("{stem}.model.json")))?;
        let spec = load_spec(&spec_path)?;
        cases.push(TestCase::seed(stem, net, spec)?);
    }
    if cases.is_empty() {
        return Err(Error::InvalidConfig(format!("no model/spec pairs in {}", dir.display())));
    }
    Ok(cases)
}

/// Writes `<id>.model.json`/`<id>.spec.json` for each case.
pub fn save_seed_dir(dir: &Path, cases: &[TestCase]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for c in cases {
        save_network(&c.network, dir.join(format!("{}.model.json", c.id)))?;
        save_spec(&c.spec, dir.join(format!("{}.spec.json", c.id)))?;
    }
    Ok(())
}

/// Random robustness seeds: Gaussian networks, each paired with an Linf
/// ball around a uniform point in `[-1, 1]^n` labelled by the network's own
/// prediction there.
pub fn generate_seed_corpus(net: &SeedNetworkConfig, count: usize, epsilon: f64, rng_seed: u64) -> Result<Vec<TestCase>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|i| {
            let network = generate_seed_network(net, rng.random())?.with_name(format!("seed-{i:03}"));
            let center: Vec<f64> = (0..net.input_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let label = argmax_label(&network.forward(&center)?)?;
            TestCase::seed(format!("seed-{i:03}"), network, robustness_spec(&center, epsilon, label)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer, Network};
    use crate::spec::robustness_spec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn case(id: &str) -> TestCase {
        let net = Network::new(
            "n",
            1,
            vec![Layer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0], Activation::Linear).unwrap()],
        )
        .unwrap();
        TestCase::seed(id, net, robustness_spec(&[0.5], 0.1, 0).unwrap()).unwrap()
    }

    #[test]
    fn add_preserves_order() {
        let mut p = Pool::new();
        p.add(vec![case("t1"), case("t2")]).unwrap();
        assert_eq!(p.ids(), vec!["t1", "t2"]);
        assert_eq!(p.add(vec![case("t1")]), Err(PoolError::DuplicateId("t1".into())));
        assert_eq!(p.add(vec![case("x"), case("x")]), Err(PoolError::DuplicateId("x".into())));
        p.add(vec![]).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn select_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let empty = Pool::new();
        assert_eq!(empty.select(SelectionStrategy::Random, &mut rng).unwrap_err(), PoolError::EmptyPool);

        let mut p = Pool::new();
        p.add(vec![case("t1")]).unwrap();
        for s in [SelectionStrategy::Random, SelectionStrategy::RecencyAware, SelectionStrategy::Mixed] {
            assert_eq!(p.select(s, &mut rng).unwrap().id, "t1");
        }
        p.add(vec![case("t2"), case("t3")]).unwrap();
        assert_eq!(p.select(SelectionStrategy::RecencyAware, &mut rng).unwrap().id, "t3");
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn capacity_keeps_seeds_and_newest() {
        let mut p = Pool::new().with_capacity_limit(Some(3));
        p.add_seeds(vec![case("s1"), case("s2")]).unwrap();
        p.add(vec![case("a"), case("b"), case("c")]).unwrap();
        assert_eq!(p.ids(), vec!["s1", "s2", "c"]);
        assert!(p.get("a").is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.select(SelectionStrategy::RecencyAware, &mut rng).unwrap().id, "c");
    }

    #[test]
    fn export_import_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = Pool::new();
        p.add_seeds(vec![case("s1")]).unwrap();
        p.add(vec![case("m1")]).unwrap();
        p.export(dir.path()).unwrap();
        let q = Pool::import(dir.path()).unwrap();
        assert_eq!(q.ids(), p.ids());
        assert_eq!(q.get("m1"), p.get("m1"));
        assert_eq!(q.next_insertion, 2);
    }
}
