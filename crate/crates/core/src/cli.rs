// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Settings resolve as flags, then `NNVFUZZ_*` environment variables, then
//! the `--config` file, then defaults. The resolved configuration is echoed
//! into every campaign report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::campaign::{run_campaign, run_campaign_on, CampaignConfig};
use crate::error::{Error, Result};
use crate::mutation::{mutate, parse_operator_list, MutationConfig, MutationError, OperatorKind};
use crate::network::{load_network, save_network, Activation, SeedNetworkConfig};
use crate::pool::{generate_seed_corpus, load_seed_dir, save_seed_dir, Pool, SelectionStrategy};
use crate::report::{render_table, write_report};
use crate::spec::{load_spec, save_spec, TestCase};
use crate::verifier::{Fault, Verdict, VerifierHandle, VerifierKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CRASH: i32 = 4;
pub const EXIT_INCONCLUSIVE: i32 = 5;
pub const EXIT_EXHAUSTED: i32 = 6;

const DEFAULT_ROSTER: [&str; 3] = ["ibp", "bab", "sampler"];

#[derive(Debug, Parser)]
#[command(name = "nnvfuzz", version, about = "Differential fuzzing of neural-network verifiers")]
pub struct Cli {
    /// Master RNG seed
    #[arg(long, global = true, env = "NNVFUZZ_RNG_SEED")]
    pub rng_seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, env = "NNVFUZZ_OUT")]
    pub out: Option<PathBuf>,

    /// JSON configuration file
    #[arg(long, global = true, env = "NNVFUZZ_CONFIG")]
    pub config: Option<PathBuf>,

    /// More logging; repeat for more
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a differential campaign
    Run(RunArgs),
    /// Run verifiers on one test case
    Verify(VerifyArgs),
    /// Write mutants of one test case
    Mutate(MutateArgs),
    /// Check a counterexample against a test case
    ValidateCex(ValidateCexArgs),
    /// Generate random robustness seeds
    GenSeeds(GenSeedsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Directory of <stem>.model.json / <stem>.spec.json pairs
    #[arg(long, env = "NNVFUZZ_SEEDS")]
    pub seeds: Option<PathBuf>,
    /// Comma-separated verifier names
    #[arg(long, env = "NNVFUZZ_VERIFIERS")]
    pub verifiers: Option<String>,
    #[arg(long, env = "NNVFUZZ_MAX_ITER")]
    pub max_iter: Option<u64>,
    /// random, recency or mixed
    #[arg(long, env = "NNVFUZZ_SELECTION")]
    pub selection: Option<SelectionStrategy>,
    #[arg(long, env = "NNVFUZZ_MIXED_BIAS")]
    pub mixed_bias: Option<f64>,
    #[arg(long, env = "NNVFUZZ_MUTANTS_PER_ROUND")]
    pub mutants_per_round: Option<usize>,
    /// Comma-separated operator filter, e.g. GF,CA
    #[arg(long, env = "NNVFUZZ_OPERATORS")]
    pub operators: Option<String>,
    #[arg(long, env = "NNVFUZZ_STOP_ON_FIRST_BUG", num_args = 0..=1, default_missing_value = "true")]
    pub stop_on_first_bug: Option<bool>,
    /// Add mutants to the pool only after bug-free rounds
    #[arg(long, env = "NNVFUZZ_STRICT_ALG1", num_args = 0..=1, default_missing_value = "true")]
    pub strict_alg1: Option<bool>,
    /// Continue from a previous report directory
    #[arg(long, env = "NNVFUZZ_RESUME")]
    pub resume: Option<PathBuf>,
    /// Per-verifier timeout applied to the whole roster
    #[arg(long, env = "NNVFUZZ_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, env = "NNVFUZZ_VERIFIERS")]
    pub verifiers: Option<String>,
    #[arg(long, env = "NNVFUZZ_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// Comma-separated operator filter
    #[arg(long = "op", alias = "operators", env = "NNVFUZZ_OPERATORS")]
    pub operators: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct ValidateCexArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// Comma-separated numbers or a JSON array
    #[arg(long, allow_hyphen_values = true)]
    pub cex: String,
}

#[derive(Debug, Args)]
pub struct GenSeedsArgs {
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub input_dim: usize,
    /// Comma-separated hidden widths
    #[arg(long, default_value = "8,8")]
    pub hidden: String,
    #[arg(long, default_value_t = 3)]
    pub outputs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value = "relu")]
    pub activation: Activation,
}

/// On-disk configuration. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub rng_seed: Option<u64>,
    /// Verifier definitions; a `fault` entry may name its base.
    pub verifiers: Vec<Value>,
    pub run: RunSection,
    pub mutation: Option<MutationConfig>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub verifiers: Option<Vec<String>>,
    pub max_iter: Option<u64>,
    pub selection: Option<SelectionStrategy>,
    pub mixed_bias: Option<f64>,
    pub mutants_per_round: Option<usize>,
    pub operators: Option<Vec<OperatorKind>>,
    pub stop_on_first_bug: Option<bool>,
    pub strict_alg1: Option<bool>,
    pub timeout_ms: Option<u64>,
    pub pool_capacity: Option<usize>,
    pub start_iteration: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("config {}: {e}", path.display())))
    }

    /// Built-in verifiers plus the file's definitions, in definition order.
    pub fn registry(&self) -> Result<BTreeMap<String, VerifierHandle>> {
        let mut reg: BTreeMap<String, VerifierHandle> = DEFAULT_ROSTER
            .iter()
            .map(|n| (n.to_string(), VerifierHandle::builtin(n).expect("builtin")))
            .collect();
        for def in &self.verifiers {
            let handle = parse_verifier_def(def, &reg)?;
            reg.insert(handle.name.clone(), handle);
        }
        Ok(reg)
    }
}

fn parse_verifier_def(def: &Value, reg: &BTreeMap<String, VerifierHandle>) -> Result<VerifierHandle> {
    let bad = |msg: String| Error::InvalidConfig(format!("verifier definition {def}: {msg}"));
    if def.get("kind").and_then(Value::as_str) == Some("fault") {
        if let Some(base_name) = def.get("base").and_then(Value::as_str) {
            let name = def
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("missing name".into()))?;
            let base = reg
                .get(base_name)
                .ok_or_else(|| bad(format!("unknown base verifier `{base_name}`")))?;
            let fault: Fault = serde_json::from_value(def.get("fault").cloned().unwrap_or(Value::Null))
                .map_err(|e| bad(e.to_string()))?;
            fault.validate()?;
            let timeout_ms = def.get("timeout_ms").and_then(Value::as_u64).unwrap_or(base.timeout_ms);
            return Ok(VerifierHandle {
                name: name.to_string(),
                kind: VerifierKind::FaultInjected {
                    base: Box::new(base.clone()),
                    fault,
                },
                timeout_ms,
            });
        }
    }
    serde_json::from_value(def.clone()).map_err(|e| bad(e.to_string()))
}

/// Fully resolved campaign settings, in config-file form.
#[derive(Debug, Serialize)]
struct ResolvedConfig<'a> {
    rng_seed: u64,
    verifiers: &'a [VerifierHandle],
    run: RunSection,
    mutation: &'a MutationConfig,
}

fn split_names(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn resolve_roster(
    names: Option<&str>,
    file: &ConfigFile,
    timeout_ms: Option<u64>,
) -> Result<Vec<VerifierHandle>> {
    let names = match (names, &file.run.verifiers) {
        (Some(flag), _) => split_names(flag),
        (None, Some(listed)) => listed.clone(),
        (None, None) => DEFAULT_ROSTER.iter().map(|s| s.to_string()).collect(),
    };
    let reg = file.registry()?;
    names
        .iter()
        .map(|n| {
            let h = reg
                .get(n)
                .cloned()
                .ok_or_else(|| Error::InvalidConfig(format!("unknown verifier `{n}`")))?;
            Ok(match timeout_ms {
                Some(ms) => h.with_timeout_ms(ms),
                None => h,
            })
        })
        .collect()
}

fn load_case(model: &Path, spec: &Path) -> Result<TestCase> {
    let network = load_network(model)?;
    let spec = load_spec(spec)?;
    let id = model
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".json").trim_end_matches(".model"))
        .unwrap_or("case")
        .to_string();
    TestCase::seed(id, network, spec)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::AdapterNotFound(_) | Error::InvalidFaultConfig(_) => EXIT_CONFIG,
        Error::Mutation(MutationError::MutationExhausted) => EXIT_EXHAUSTED,
        Error::Mutation(_) => EXIT_CONFIG,
        Error::Pool(crate::pool::PoolError::EmptyPool) => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("NNVFUZZ_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

/// Parses arguments from the process and runs; returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Run(args) => cmd_run(cli, &file, args),
        Command::Verify(args) => cmd_verify(&file, args),
        Command::Mutate(args) => cmd_mutate(cli, &file, args),
        Command::ValidateCex(args) => cmd_validate_cex(args),
        Command::GenSeeds(args) => cmd_gen_seeds(cli, args),
    }
}

fn prior_iterations(dir: &Path) -> Result<u64> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let done = v["iterations"].as_u64().unwrap_or(0);
    let start = v["config"]["run"]["start_iteration"].as_u64().unwrap_or(0);
    Ok(start + done)
}

fn cmd_run(cli: &Cli, file: &ConfigFile, args: &RunArgs) -> Result<i32> {
    let fr = &file.run;
    let mut mutation = file.mutation.clone().unwrap_or_default();
    if let Some(m) = args.mutants_per_round.or(fr.mutants_per_round) {
        mutation.mutants_per_round = m;
    }
    match (&args.operators, &fr.operators) {
        (Some(text), _) => mutation.operators = parse_operator_list(text)?,
        (None, Some(ops)) => mutation.operators = ops.clone(),
        _ => {}
    }
    let timeout_ms = args.timeout_ms.or(fr.timeout_ms);
    let verifiers = resolve_roster(args.verifiers.as_deref(), file, timeout_ms)?;
    let rng_seed = cli.rng_seed.or(file.rng_seed).unwrap_or(0);

    let (pool, start_iteration, seeds_dir) = match &args.resume {
        Some(dir) => {
            let pool = Pool::import(&dir.join("pool"))?;
            (Some(pool), prior_iterations(dir)?, None)
        }
        None => {
            let seeds = args
                .seeds
                .clone()
                .or_else(|| fr.seeds.clone())
                .ok_or_else(|| Error::InvalidConfig("--seeds is required".into()))?;
            (None, fr.start_iteration.unwrap_or(0), Some(seeds))
        }
    };

    let defaults = CampaignConfig::default();
    let cfg = CampaignConfig {
        max_iter: args.max_iter.or(fr.max_iter).unwrap_or(defaults.max_iter),
        selection: args.selection.or(fr.selection).unwrap_or(defaults.selection),
        mixed_bias: args.mixed_bias.or(fr.mixed_bias).unwrap_or(defaults.mixed_bias),
        mutation,
        verifiers,
        rng_seed,
        stop_on_first_bug: args.stop_on_first_bug.or(fr.stop_on_first_bug).unwrap_or(false),
        strict_alg1: args.strict_alg1.or(fr.strict_alg1).unwrap_or(false),
        pool_capacity: fr.pool_capacity,
        start_iteration,
    };
    cfg.validate()?;
    let out = cli
        .out
        .clone()
        .or_else(|| fr.out.clone())
        .or_else(|| args.resume.clone())
        .unwrap_or_else(|| PathBuf::from("report"));

    let resolved = serde_json::to_value(ResolvedConfig {
        rng_seed,
        verifiers: &cfg.verifiers,
        run: RunSection {
            seeds: seeds_dir.clone(),
            out: Some(out.clone()),
            verifiers: Some(cfg.verifiers.iter().map(|v| v.name.clone()).collect()),
            max_iter: Some(cfg.max_iter),
            selection: Some(cfg.selection),
            mixed_bias: Some(cfg.mixed_bias),
            mutants_per_round: Some(cfg.mutation.mutants_per_round),
            operators: Some(cfg.mutation.allowed_operators()),
            stop_on_first_bug: Some(cfg.stop_on_first_bug),
            strict_alg1: Some(cfg.strict_alg1),
            timeout_ms,
            pool_capacity: cfg.pool_capacity,
            start_iteration: Some(cfg.start_iteration),
        },
        mutation: &cfg.mutation,
    })
    .expect("config serializes");

    let result = match (pool, seeds_dir) {
        (Some(pool), _) => run_campaign_on(pool, &cfg)?,
        (None, Some(dir)) => run_campaign(load_seed_dir(&dir)?, &cfg)?,
        (None, None) => unreachable!("either resume or seeds is set"),
    };
    write_report(&out, &result, &resolved)?;

    let deduped = result.deduped();
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", render_table(&deduped));
    let _ = writeln!(
        stdout,
        "{} unique bugs ({} occurrences) in {} iterations; mean round {:.2} ms; report: {}",
        deduped.len(),
        result.stats.bug_occurrences,
        result.stats.iterations,
        result.stats.mean_round_ms(),
        out.display()
    );
    Ok(EXIT_OK)
}

fn format_vec(v: &[f64]) -> String {
    serde_json::to_string(v).expect("floats serialize")
}

fn cmd_verify(file: &ConfigFile, args: &VerifyArgs) -> Result<i32> {
    let roster = resolve_roster(args.verifiers.as_deref(), file, args.timeout_ms.or(file.run.timeout_ms))?;
    for v in &roster {
        v.preflight()?;
    }
    let tc = load_case(&args.model, &args.spec)?;
    let (mut crash, mut violated, mut proved) = (false, false, false);
    for v in &roster {
        let verdict = v.verify(&tc);
        let detail = match &verdict {
            Verdict::Violated { cex } => {
                violated = true;
                let valid = matches!(tc.violates_tol(cex, v.cex_tolerance()), Ok(true));
                format!(" cex={} ({})", format_vec(cex), if valid { "valid" } else { "INVALID" })
            }
            Verdict::Unknown { reason } => format!(" ({reason})"),
            Verdict::Timeout => String::new(),
            Verdict::Crash { diagnostic, exit_info } => {
                crash = true;
                let first = diagnostic.lines().next().unwrap_or("");
                match exit_info {
                    Some(info) => format!(" [{info}] {first}"),
                    None => format!(" {first}"),
                }
            }
            Verdict::Holds => {
                proved = true;
                String::new()
            }
        };
        println!("{}: {}{}", v.name, verdict.label(), detail);
    }
    Ok(if crash {
        EXIT_CRASH
    } else if violated {
        EXIT_VIOLATED
    } else if proved {
        // Unknown and Timeout next to Holds are not disagreements
        EXIT_OK
    } else {
        EXIT_INCONCLUSIVE
    })
}

#[derive(Debug, Serialize)]
struct MutantManifest {
    parent: String,
    rng_seed: u64,
    requested: usize,
    skipped_slots: Vec<usize>,
    mutants: Vec<MutantEntry>,
}

#[derive(Debug, Serialize)]
struct MutantEntry {
    id: String,
    operator: Option<OperatorKind>,
    slot_seed: u64,
    model: String,
    spec: String,
}

fn cmd_mutate(cli: &Cli, file: &ConfigFile, args: &MutateArgs) -> Result<i32> {
    let mut cfg = file.mutation.clone().unwrap_or_default();
    if let Some(text) = &args.operators {
        cfg.operators = parse_operator_list(text)?;
    }
    cfg.mutants_per_round = args.count;
    let rng_seed = cli.rng_seed.or(file.rng_seed).unwrap_or(cfg.rng_seed);
    cfg.rng_seed = rng_seed;
    let tc = load_case(&args.model, &args.spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let round = mutate(&tc, &cfg, &mut rng, |slot| format!("mutant-{:03}", slot + 1))?;
    if round.mutants.is_empty() {
        return Err(MutationError::MutationExhausted.into());
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("mutants"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut entries = Vec::new();
    for m in &round.mutants {
        let model = format!("{}.model.json", m.id);
        let spec = format!("{}.spec.json", m.id);
        save_network(&m.network, out.join(&model))?;
        save_spec(&m.spec, out.join(&spec))?;
        println!("{} {}", m.id, m.lineage.operator.map_or("-", |o| o.as_str()));
        entries.push(MutantEntry {
            id: m.id.clone(),
            operator: m.lineage.operator,
            slot_seed: m.lineage.rng_seed,
            model,
            spec,
        });
    }
    let manifest = MutantManifest {
        parent: tc.id.clone(),
        rng_seed,
        requested: args.count,
        skipped_slots: round.skipped,
        mutants: entries,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(EXIT_OK)
}

fn parse_cex(text: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| Error::parse("--cex", e.to_string()));
    }
    trimmed
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::parse("--cex", format!("`{s}`: {e}")))
        })
        .collect()
}

fn cmd_validate_cex(args: &ValidateCexArgs) -> Result<i32> {
    let tc = load_case(&args.model, &args.spec)?;
    let x = parse_cex(&args.cex)?;
    let breakdown = tc.spec.pre_breakdown(&x)?;
    let pre_ok = breakdown.iter().all(|(_, ok)| *ok);
    for (name, ok) in &breakdown {
        println!("{name}: {}", if *ok { "satisfied" } else { "unsatisfied" });
    }
    let y = tc.network.forward(&x)?;
    let post_ok = tc.spec.eval_post(&x, &y)?;
    println!("output: {}", format_vec(&y));
    println!(
        "post {}: {}",
        tc.spec.postcondition().kind_name(),
        if post_ok { "satisfied" } else { "violated" }
    );
    if !pre_ok {
        println!("precondition unsatisfied: not a counterexample");
        return Ok(EXIT_VIOLATED);
    }
    if post_ok {
        println!("postcondition holds: not a counterexample");
        return Ok(EXIT_VIOLATED);
    }
    println!("valid counterexample");
    Ok(EXIT_OK)
}

fn cmd_gen_seeds(cli: &Cli, args: &GenSeedsArgs) -> Result<i32> {
    let mut sizes: Vec<usize> = split_names(&args.hidden)
        .iter()
        .map(|s| {
            s.parse::<usize>()
                .map_err(|e| Error::InvalidConfig(format!("--hidden `{s}`: {e}")))
        })
        .collect::<Result<_>>()?;
    sizes.push(args.outputs);
    let net = SeedNetworkConfig::new(args.input_dim, sizes, args.activation);
    let cases = generate_seed_corpus(&net, args.count, args.epsilon, cli.rng_seed.unwrap_or(0))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("seeds"));
    save_seed_dir(&out, &cases)?;
    println!("wrote {} seed pairs to {}", cases.len(), out.display());
    Ok(EXIT_OK)
}
