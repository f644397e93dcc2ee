//! `mutakill` command line: `fisher`, `analyze`, `audit` and `simulate`.
//!
//! Exit codes: 0 success (a monotonicity violation is a finding, not a
//! failure), 1 usage error, 2 data-format error, 3 internal invariant failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::killdefs::{kdf_input_kills_with, Definition, KillParams};
use crate::matrixio::{load_predictions, write_predictions, write_truth};
use crate::monotonicity::{audit, AuditConfig, AuditTrace, ModelPair, Violation};
use crate::report::{analyze, AnalysisOptions, InputDigest};
use crate::simgen::{
    adversarial_kd1, generate, synthetic_truth, to_predictions, Block, ScenarioSpec,
};
use crate::stats::{Alternative, ContingencyTable, TTestVariant};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const THREADS_ENV: &str = "MUTAKILL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mutakill", version, about = "Statistical mutation-kill analysis for DNN prediction matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fisher's exact test on one 2×2 table (original correct/incorrect, mutant correct/incorrect).
    Fisher(FisherArgs),
    /// Kill verdicts and mutation scores for every mutant in a predictions file.
    Analyze(AnalyzeArgs),
    /// Kill status over cumulative test-set prefixes.
    Audit(AuditArgs),
    /// Write synthetic prediction and ground-truth files.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TTestArg {
    Pooled,
    Welch,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    tau: u64,
    #[arg(long, value_enum, default_value = "pooled")]
    ttest: TTestArg,
    /// One-sided Fisher test (original correct more often than the mutant).
    #[arg(long)]
    one_sided: bool,
    /// Divide alpha by the number of inputs tested under KDF.
    #[arg(long)]
    bonferroni: bool,
    /// KD1 kills regardless of which model has the higher mean accuracy.
    #[arg(long)]
    non_directional: bool,
}

impl ParamArgs {
    fn params(&self) -> Result<KillParams> {
        let params = KillParams {
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
            directional: !self.non_directional,
            ttest_variant: match self.ttest {
                TTestArg::Pooled => TTestVariant::StudentPooled,
                TTestArg::Welch => TTestVariant::Welch,
            },
            bonferroni: self.bonferroni,
            alternative: if self.one_sided {
                Alternative::Greater
            } else {
                Alternative::TwoSided
            },
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Args)]
struct FisherArgs {
    a: u64,
    b: u64,
    c: u64,
    d: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    one_sided: bool,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected ORIG,MUT instance indices, got `{s}`"))?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_definition(s: &str) -> std::result::Result<Definition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    original: String,
    /// Comma-separated subset of KD1,KD2,KD3,KD4,KDF.
    #[arg(long, value_delimiter = ',', value_parser = parse_definition,
          default_value = "KD1,KD2,KD3,KD4,KDF")]
    definitions: Vec<Definition>,
    #[command(flatten)]
    params: ParamArgs,
    /// Instance pair for KD2–KD4, as ORIG,MUT.
    #[arg(long, value_parser = parse_pair, default_value = "0,0")]
    pair: (usize, usize),
    /// Also report the fraction of index-aligned instance pairs killed under KD2–KD4.
    #[arg(long)]
    all_pairs: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long, requires_all = ["truth", "original"], conflicts_with = "adversarial")]
    predictions: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    original: Option<String>,
    /// Mutant to audit; may be omitted when the file holds exactly one mutant.
    #[arg(long)]
    mutant: Option<String>,
    /// Audit the built-in adversarial KD1 fixture instead of files.
    #[arg(long)]
    adversarial: bool,
    #[arg(long, default_value_t = 20)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    k_strong: usize,
    #[arg(long, default_value_t = 9900)]
    k_noise: usize,
    #[arg(long, value_parser = parse_definition, default_value = "KD1")]
    definition: Definition,
    #[arg(long, default_value_t = 100)]
    start: usize,
    #[arg(long, default_value_t = 100)]
    step: usize,
    #[arg(long)]
    end: Option<usize>,
    /// Permute the input columns with this seed before sweeping.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long, value_parser = parse_pair, default_value = "0,0")]
    pair: (usize, usize),
    #[command(flatten)]
    params: ParamArgs,
    /// Trace CSV (size,killed,p_value,effect_size,nki); stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON summary; stdout (after the CSV) when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario spec as JSON (n_inputs, r_orig, r_mut, blocks, seed).
    #[arg(long, conflicts_with_all = ["adversarial", "block"])]
    spec: Option<PathBuf>,
    /// Inline block WIDTH:P_ORIG:P_MUT; repeatable.
    #[arg(long)]
    block: Vec<String>,
    #[arg(long, default_value_t = 20)]
    r_orig: usize,
    #[arg(long, default_value_t = 20)]
    r_mut: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the adversarial KD1 fixture.
    #[arg(long)]
    adversarial: bool,
    #[arg(long, default_value_t = 20)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    k_strong: usize,
    #[arg(long, default_value_t = 9900)]
    k_noise: usize,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invariant(_) => EXIT_INTERNAL,
        Error::Kd1TooFewInstances { .. } | Error::LabelsRequired(_) => EXIT_DATA,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI with explicit argument list and output streams; returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Fisher(a) => cmd_fisher(&a, out),
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Audit(a) => cmd_audit(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the global rayon pool from `MUTAKILL_THREADS` (0 or unset = auto).
/// Only the first call in a process has an effect.
fn configure_threads() {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn cmd_fisher(a: &FisherArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Failure::Usage(format!("alpha must be in (0,1), got {}", a.alpha)));
    }
    let table = ContingencyTable::new(a.a, a.b, a.c, a.d).map_err(|e| Failure::Usage(e.to_string()))?;
    let orig: Vec<bool> = (0..table.a + table.b).map(|i| i < table.a).collect();
    let mutant: Vec<bool> = (0..table.c + table.d).map(|i| i < table.c).collect();
    let alternative = if a.one_sided {
        Alternative::Greater
    } else {
        Alternative::TwoSided
    };
    let kill = kdf_input_kills_with(&orig, &mutant, a.alpha, alternative)?;
    write_out(
        out,
        &format!(
            "table: a={} b={} c={} d={}\ntest: {}\np_value: {:.6}\nalpha: {}\nkilled: {}\n",
            table.a,
            table.b,
            table.c,
            table.d,
            if a.one_sided { "one-sided (greater)" } else { "two-sided" },
            kill.p_value,
            a.alpha,
            kill.kills
        ),
    )?;
    Ok(())
}

fn digest(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let params = a.params.params().map_err(|e| Failure::Usage(e.to_string()))?;
    let (truth, models) = load_predictions(&a.predictions, &a.truth)?;
    let inputs = vec![digest("predictions", &a.predictions)?, digest("truth", &a.truth)?];
    let timestamp = (!a.no_timestamp).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let opts = AnalysisOptions {
        definitions: a.definitions.clone(),
        params,
        pair: a.pair,
        all_pairs: a.all_pairs,
    };
    let report = match analyze(&truth, &models, &a.original, &opts, inputs, timestamp) {
        Err(e @ (Error::UnknownModel(_) | Error::Param(_))) => {
            return Err(Failure::Usage(e.to_string()))
        }
        r => r?,
    };
    let mut json = report.to_json()?;
    json.push('\n');
    match &a.out {
        Some(path) => fs::write(path, json).map_err(io_err(path))?,
        None => write_out(out, &json)?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AuditSummary<'a> {
    source: String,
    original_model_id: String,
    mutant_model_id: String,
    definition: Definition,
    start: usize,
    step: usize,
    end: usize,
    shuffle_seed: Option<u64>,
    params: KillParams,
    monotone: bool,
    violations: &'a [Violation],
    witness_pairs: u64,
    killed_sizes: Vec<usize>,
}

fn audit_pair(a: &AuditArgs) -> std::result::Result<(ModelPair, String, String, String), Failure> {
    if a.adversarial {
        let (o, m) = adversarial_kd1(a.r, a.k_strong, a.k_noise)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let source = format!("adversarial_kd1(r={}, k_strong={}, k_noise={})", a.r, a.k_strong, a.k_noise);
        let (oid, mid) = (o.model_id().to_string(), m.model_id().to_string());
        return Ok((ModelPair::from_correctness(o, m)?, source, oid, mid));
    }
    let (Some(pred), Some(truth_path), Some(original)) = (&a.predictions, &a.truth, &a.original)
    else {
        return Err(Failure::Usage(
            "give --predictions, --truth and --original, or --adversarial".into(),
        ));
    };
    let (truth, models) = load_predictions(pred, truth_path)?;
    let orig = models
        .iter()
        .find(|m| m.model_id() == original)
        .ok_or_else(|| Failure::Usage(format!("unknown original model `{original}`")))?;
    let mutant = match &a.mutant {
        Some(id) => models
            .iter()
            .find(|m| m.model_id() == id)
            .ok_or_else(|| Failure::Usage(format!("unknown mutant model `{id}`")))?,
        None => {
            let others: Vec<_> = models.iter().filter(|m| m.model_id() != original).collect();
            match others.as_slice() {
                [only] => *only,
                [] => return Err(Failure::Usage("no mutant in the predictions file".into())),
                _ => {
                    return Err(Failure::Usage(
                        "several mutants present; choose one with --mutant".into(),
                    ))
                }
            }
        }
    };
    Ok((
        ModelPair::from_predictions(&truth, orig, mutant)?,
        pred.display().to_string(),
        orig.model_id().to_string(),
        mutant.model_id().to_string(),
    ))
}

fn cmd_audit(a: &AuditArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let params = a.params.params().map_err(|e| Failure::Usage(e.to_string()))?;
    let (mut pair, source, orig_id, mut_id) = audit_pair(a)?;
    if let Some(seed) = a.shuffle_seed {
        pair = pair.shuffled(seed)?;
    }
    let cfg = AuditConfig {
        start: a.start,
        step: a.step,
        end: a.end,
        definition: a.definition,
        params,
        pair: a.pair,
    };
    let sizes = cfg.sizes(pair.n_inputs()).map_err(|e| Failure::Usage(e.to_string()))?;
    let trace: AuditTrace = audit(&pair, &cfg)?;

    let summary = AuditSummary {
        source,
        original_model_id: orig_id,
        mutant_model_id: mut_id,
        definition: a.definition,
        start: a.start,
        step: a.step,
        end: *sizes.last().unwrap_or(&a.start),
        shuffle_seed: a.shuffle_seed,
        params,
        monotone: trace.is_monotone(),
        violations: &trace.violations,
        witness_pairs: trace.witness_pairs,
        killed_sizes: trace
            .sizes
            .iter()
            .zip(&trace.killed)
            .filter(|(_, &k)| k)
            .map(|(&s, _)| s)
            .collect(),
    };
    if summary.monotone != trace.violations.is_empty() {
        return Err(Error::Invariant("violation list disagrees with monotonicity".into()).into());
    }
    let mut json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Invariant(format!("summary serialization: {e}")))?;
    json.push('\n');

    match &a.csv {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            trace.write_csv(file)?;
        }
        None => trace.write_csv(&mut *out)?,
    }
    match &a.json {
        Some(path) => fs::write(path, json).map_err(io_err(path))?,
        None => write_out(out, &json)?,
    }
    Ok(())
}

fn parse_block(s: &str) -> Result<Block> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Param(format!("block `{s}` is not WIDTH:P_ORIG:P_MUT"));
    let [w, po, pm] = parts.as_slice() else {
        return Err(bad());
    };
    Ok(Block {
        width: w.trim().parse().map_err(|_| bad())?,
        p_orig: po.trim().parse().map_err(|_| bad())?,
        p_mut: pm.trim().parse().map_err(|_| bad())?,
    })
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let usage = |e: Error| Failure::Usage(e.to_string());
    let (orig, mutant) = if a.adversarial {
        adversarial_kd1(a.r, a.k_strong, a.k_noise).map_err(usage)?
    } else {
        let spec = match &a.spec {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                serde_json::from_str::<ScenarioSpec>(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => {
                if a.block.is_empty() {
                    return Err(Failure::Usage(
                        "give --spec, at least one --block, or --adversarial".into(),
                    ));
                }
                let blocks = a
                    .block
                    .iter()
                    .map(|b| parse_block(b))
                    .collect::<Result<Vec<_>>>()
                    .map_err(usage)?;
                ScenarioSpec {
                    n_inputs: blocks.iter().map(|b| b.width).sum(),
                    r_orig: a.r_orig,
                    r_mut: a.r_mut,
                    blocks,
                    seed: a.seed,
                }
            }
        };
        generate(&spec).map_err(usage)?
    };
    let truth = synthetic_truth(orig.n_inputs());
    let models = [to_predictions(&orig, &truth)?, to_predictions(&mutant, &truth)?];

    let pred_file = fs::File::create(&a.predictions).map_err(io_err(&a.predictions))?;
    write_predictions(std::io::BufWriter::new(pred_file), &models)?;
    let truth_file = fs::File::create(&a.truth).map_err(io_err(&a.truth))?;
    write_truth(std::io::BufWriter::new(truth_file), &truth)?;
    write_out(
        out,
        &format!(
            "wrote {} ({} + {} instances × {} inputs) and {}\n",
            a.predictions.display(),
            orig.instance_count(),
            mutant.instance_count(),
            orig.n_inputs(),
            a.truth.display()
        ),
    )?;
    Ok(())
}
