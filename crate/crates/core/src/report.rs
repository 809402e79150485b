// SPDX-License-Identifier: Apache-2.0

//! Campaign report directory.
//!
//! ```text
//! <out>/config.json          resolved configuration
//! <out>/bugs.json            deduped bugs; no timings, byte-stable under replay
//! <out>/summary.json         counts per verifier and kind, stats, timings
//! <out>/bugs/bug-NNN/        model.json spec.json verdicts.json lineage.json replay.sh
//! <out>/pool/                pool snapshot, usable with `run --resume`
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::campaign::{BugKind, BugReport, CampaignResult, LineageStep, VerdictEntry};
use crate::error::{Error, Result};
use crate::network::save_network;
use crate::spec::save_spec;

#[derive(Debug, Serialize)]
struct BugEntry<'a> {
    dir: String,
    kind: BugKind,
    implicated: Vec<&'a str>,
    iteration: u64,
    count: u64,
    dedup_key: &'a str,
    test_case: &'a str,
    fingerprint: String,
    postcondition: &'static str,
    verdicts: &'a [VerdictEntry],
    lineage: &'a [LineageStep],
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// Bug counts keyed by verifier, then kind: the shape of a per-tool bug table.
pub fn bug_table(bugs: &[BugReport]) -> BTreeMap<String, BTreeMap<&'static str, u64>> {
    let mut table: BTreeMap<String, BTreeMap<&'static str, u64>> = BTreeMap::new();
    for b in bugs {
        for v in &b.implicated {
            let row = table
                .entry(v.clone())
                .or_insert_with(|| BugKind::ALL.iter().map(|k| (k.as_str(), 0)).collect());
            *row.entry(b.kind.as_str()).or_default() += 1;
        }
    }
    table
}

/// Serialized `bugs.json` for the deduped bug list.
pub fn bugs_manifest(deduped: &[BugReport]) -> String {
    let entries: Vec<BugEntry> = deduped
        .iter()
        .enumerate()
        .map(|(i, b)| BugEntry {
            dir: format!("bugs/bug-{:03}", i + 1),
            kind: b.kind,
            implicated: b.implicated.iter().map(String::as_str).collect(),
            iteration: b.iteration,
            count: b.count,
            dedup_key: &b.dedup_key,
            test_case: &b.test_case.id,
            fingerprint: format!("{:016x}", b.test_case.fingerprint()),
            postcondition: b.test_case.spec.postcondition().kind_name(),
            verdicts: &b.verdicts,
            lineage: &b.lineage,
        })
        .collect();
    pretty(&entries)
}

fn replay_script(b: &BugReport) -> String {
    let names: Vec<&str> = b.verdicts.iter().map(|e| e.verifier.as_str()).collect();
    format!(
        "#!/bin/sh\n\
         # Re-runs the roster on this test case.\n\
         cd \"$(dirname \"$0\")\" || exit 3\n\
         exec \"${{NNVFUZZ_BIN:-nnvfuzz}}\" verify --config ../../config.json --model model.json --spec spec.json --verifiers {}\n",
        names.join(",")
    )
}

/// Writes the report directory. `config` is the resolved configuration in
/// config-file form, echoed verbatim.
pub fn write_report(out: &Path, result: &CampaignResult, config: &Value) -> Result<()> {
    let bugs_dir = out.join("bugs");
    if bugs_dir.exists() {
        fs::remove_dir_all(&bugs_dir).map_err(|e| Error::io(&bugs_dir, e))?;
    }
    fs::create_dir_all(&bugs_dir).map_err(|e| Error::io(&bugs_dir, e))?;
    write(&out.join("config.json"), pretty(config))?;

    let deduped = result.deduped();
    for (i, b) in deduped.iter().enumerate() {
        let dir = bugs_dir.join(format!("bug-{:03}", i + 1));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_network(&b.test_case.network, dir.join("model.json"))?;
        save_spec(&b.test_case.spec, dir.join("spec.json"))?;
        write(&dir.join("verdicts.json"), pretty(&b.verdicts))?;
        write(&dir.join("lineage.json"), pretty(&b.lineage))?;
        let script = dir.join("replay.sh");
        write(&script, replay_script(b))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).map_err(|e| Error::io(&script, e))?;
        }
    }
    write(&out.join("bugs.json"), bugs_manifest(&deduped))?;

    let s = &result.stats;
    let summary = json!({
        "config": config,
        "iterations": s.iterations,
        "mutants_verified": s.mutants_verified,
        "slots_skipped": s.slots_skipped,
        "exhausted_iterations": s.exhausted_iterations,
        "pool_size": s.pool_size,
        "stopped_early": s.stopped_early,
        "unique_bugs": deduped.len(),
        "bug_occurrences": s.bug_occurrences,
        "bugs_by_verifier": bug_table(&deduped),
        "verdict_counts": s.verdict_counts,
        "timing": {
            "mean_round_ms": s.mean_round_ms(),
            "total_ms": s.round_ms.iter().sum::<f64>(),
            "round_ms": s.round_ms,
        },
    });
    write(&out.join("summary.json"), pretty(&summary))?;
    result.pool.export(&out.join("pool"))
}

/// Plain-text table of deduped bugs per verifier and kind.
pub fn render_table(deduped: &[BugReport]) -> String {
    let table = bug_table(deduped);
    let mut s = format!(
        "{:<32} {:>13} {:>22} {:>9}\n",
        "verifier", "inconsistency", "invalid_counterexample", "crash_bug"
    );
    if table.is_empty() {
        s.push_str("(no bugs)\n");
    }
    for (v, row) in &table {
        s.push_str(&format!(
            "{:<32} {:>13} {:>22} {:>9}\n",
            v, row["inconsistency"], row["invalid_counterexample"], row["crash_bug"]
        ));
    }
    s
}
