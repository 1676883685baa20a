//! Argument parsing and command dispatch.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use truthlab_core::adversary::{
    run_pipeline, sample_multi_clique, AdversaryConfig, StageRecord, WitnessReport,
};
use truthlab_core::boundary::default_tolerance;
use truthlab_core::geometry::{
    classify_pair, is_box, probe_region, BoxReport, PairReport, RegionFacets,
};
use truthlab_core::{ExactValue, Star, TaskId};

use crate::docs::{self, Oracle, Report};
use crate::manifest::{manifest_name, manifest_path, RunManifest};
use crate::suites::{run_suite, Suite, SuiteOptions, SuiteReport};
use crate::{core_exit_code, exit, CliError, CliResult};

/// Accepts `p/q`, an integer, or `2^-k`.
pub fn parse_rational(s: &str) -> Result<ExactValue, String> {
    let t = s.trim();
    if let Some(k) = t.strip_prefix("2^-") {
        let k: u32 = k.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        return Ok(ExactValue::pow2_neg(k));
    }
    t.parse::<ExactValue>().map_err(|e| format!("{s:?}: {e}"))
}

#[derive(Parser, Debug)]
#[command(
    name = "truthlab",
    version,
    about = "Truthful scheduling mechanisms: checks, geometry and lower-bound witnesses"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "TRUTHLAB_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a random multi-clique instance.
    Gen(GenArgs),
    /// Run a verification suite on an instance.
    Verify(VerifyArgs),
    /// Classify a task pair or test a star for the box property.
    Classify(ClassifyArgs),
    /// Run the lower-bound pipeline and emit a witness report.
    Adversary(AdversaryArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub ell: usize,
    #[arg(long, value_parser = parse_rational)]
    pub eps: ExactValue,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_rational)]
    pub xi: Option<ExactValue>,
    #[arg(long, value_parser = parse_rational)]
    pub nu: Option<ExactValue>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Mechanism document, or `vcg`.
    #[arg(long)]
    pub mechanism: String,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled pairs for the wmon suite.
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, value_parser = parse_rational)]
    pub tol: Option<ExactValue>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one `item,passed` row per checked item.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub mechanism: String,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub root: usize,
    /// Two task ids, `a,b`.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "star",
        required_unless_present = "star"
    )]
    pub pair: Option<Vec<TaskId>>,
    /// Star edge ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub star: Option<Vec<TaskId>>,
    /// Box offset for `--star`.
    #[arg(long, value_parser = parse_rational)]
    pub delta: Option<ExactValue>,
    /// Map the facets of the star's all-to-root region instead.
    #[arg(long, requires = "star")]
    pub facets: bool,
    /// Probe resolution (pairs and facets).
    #[arg(long, value_parser = parse_rational)]
    pub tol: Option<ExactValue>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AdversaryArgs {
    /// Mechanism document, or `vcg`.
    #[arg(long, default_value = "vcg")]
    pub mechanism: String,
    /// Base configuration document; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, value_parser = parse_rational)]
    pub eps: Option<ExactValue>,
    #[arg(long, value_parser = parse_rational)]
    pub xi: Option<ExactValue>,
    #[arg(long, value_parser = parse_rational)]
    pub nu: Option<ExactValue>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_rational)]
    pub tol: Option<ExactValue>,
    /// Box tests allowed in the star search.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the replayed output; defaults to the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
#[allow(clippy::large_enum_variant)]
pub enum ClassifyBody {
    Pair(PairReport),
    Box(BoxReport),
    Facets(RegionFacets),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversaryBody {
    pub config: AdversaryConfig,
    pub mechanism: Oracle,
    pub stages: Vec<StageRecord>,
    pub witness: Option<WitnessReport>,
    pub error: Option<String>,
}

impl<'de> Deserialize<'de> for Oracle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        docs::parse_mechanism(&v.to_string(), "document").map_err(serde::de::Error::custom)
    }
}

/// Parses `args` (without the program name) and runs the command.
/// Returns the process exit code; errors are printed to stderr.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let mut full = vec!["truthlab".to_string()];
    full.extend(args.iter().cloned());
    let cli = match Cli::try_parse_from(&full) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, args: Vec<String>) -> CliResult<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let jobs = cli.jobs;
    pool.install(|| match cli.command {
        Command::Gen(a) => gen(a, args),
        Command::Verify(a) => verify(a, args),
        Command::Classify(a) => classify(a, args),
        Command::Adversary(a) => adversary(a, args),
        Command::Replay(a) => replay(a, jobs),
    })
}

/// Writes `body` (and a manifest next to it) or prints it.
fn emit<T: Serialize>(
    out: Option<&Path>,
    command: &str,
    passed: bool,
    body: T,
    mut manifest: RunManifest,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let report = Report {
                manifest: Some(manifest_name(path)),
                command: command.to_string(),
                passed,
                body,
            };
            docs::write_text(path, &docs::to_json(&report))?;
            manifest.outputs.push(path.display().to_string());
            docs::write_text(&manifest_path(path), &docs::to_json(&manifest))
        }
        None => {
            let report = Report {
                manifest: None,
                command: command.to_string(),
                passed,
                body,
            };
            print!("{}", docs::to_json(&report));
            Ok(())
        }
    }
}

fn gen(a: GenArgs, args: Vec<String>) -> CliResult<i32> {
    let mut config = AdversaryConfig {
        ell: a.ell,
        eps: a.eps,
        seed: a.seed,
        ..AdversaryConfig::desk(a.n)
    };
    if let Some(xi) = a.xi {
        config.xi = xi;
    }
    if let Some(nu) = a.nu {
        config.nu = nu;
    }
    config.validate()?;
    let inst = sample_multi_clique(&config)?;
    let manifest = RunManifest::new(
        "gen",
        args,
        serde_json::to_value(&config).expect("config"),
        Some(a.seed),
    );
    match &a.out {
        // an instance file is a plain instance document
        Some(path) => {
            docs::write_text(path, &docs::to_json(&inst))?;
            let mut m = manifest;
            m.outputs.push(path.display().to_string());
            docs::write_text(&manifest_path(path), &docs::to_json(&m))?;
        }
        None => print!("{}", docs::to_json(&inst)),
    }
    Ok(exit::PASS)
}

fn verify(a: VerifyArgs, args: Vec<String>) -> CliResult<i32> {
    let oracle = docs::load_mechanism(&a.mechanism)?;
    let inst = docs::load_instance(&a.instance)?;
    let opts = SuiteOptions {
        seed: a.seed,
        trials: a.trials,
        tolerance: a.tol.unwrap_or_else(default_tolerance),
    };
    let report: SuiteReport = run_suite(&oracle, &inst, a.suite, &opts)?;
    let passed = report.passed();
    if let Some(csv) = &a.csv {
        let mut text = String::from("item,passed\n");
        for (item, ok) in report.rows() {
            text.push_str(&format!("{item},{ok}\n"));
        }
        docs::write_text(csv, &text)?;
    }
    let config = serde_json::json!({
        "mechanism": a.mechanism,
        "instance": a.instance.display().to_string(),
        "suite": a.suite,
        "trials": a.trials,
        "tolerance": opts.tolerance,
    });
    emit(
        a.out.as_deref(),
        "verify",
        passed,
        report,
        RunManifest::new("verify", args, config, Some(a.seed)),
    )?;
    Ok(if passed { exit::PASS } else { exit::NEGATIVE })
}

fn classify(a: ClassifyArgs, args: Vec<String>) -> CliResult<i32> {
    let oracle = docs::load_mechanism(&a.mechanism)?;
    let inst = docs::load_instance(&a.instance)?;
    let res = a.tol.clone().unwrap_or_else(|| ExactValue::pow2_neg(8));
    let body = match (&a.pair, &a.star) {
        (Some(p), _) => {
            if p.len() != 2 {
                return Err(CliError::Usage(format!(
                    "--pair needs exactly two ids, got {}",
                    p.len()
                )));
            }
            ClassifyBody::Pair(classify_pair(&oracle, &inst, a.root, (p[0], p[1]), &res)?)
        }
        (None, Some(ids)) => {
            let star = Star::new(&inst, a.root, ids.clone())?;
            if a.facets {
                ClassifyBody::Facets(probe_region(&oracle, &inst, &star, &res)?)
            } else {
                let delta = a
                    .delta
                    .clone()
                    .ok_or_else(|| CliError::Usage("--star needs --delta".into()))?;
                ClassifyBody::Box(is_box(&oracle, &inst, &star, &delta)?)
            }
        }
        (None, None) => return Err(CliError::Usage("give --pair or --star".into())),
    };
    let config = serde_json::json!({
        "mechanism": a.mechanism,
        "instance": a.instance.display().to_string(),
        "root": a.root,
        "pair": a.pair,
        "star": a.star,
        "delta": a.delta,
        "resolution": res,
    });
    emit(
        a.out.as_deref(),
        "classify",
        true,
        body,
        RunManifest::new("classify", args, config, None),
    )?;
    Ok(exit::PASS)
}

fn adversary(a: AdversaryArgs, args: Vec<String>) -> CliResult<i32> {
    let oracle = docs::load_mechanism(&a.mechanism)?;
    let mut config = match &a.config {
        Some(p) => docs::load_config(p)?,
        None => AdversaryConfig::desk(a.n.unwrap_or(3)),
    };
    if let Some(n) = a.n {
        if a.config.is_some() {
            config.n = n;
        }
    }
    macro_rules! set {
        ($($f:ident <- $v:expr),*) => { $(if let Some(v) = $v { config.$f = v; })* };
    }
    set!(ell <- a.ell, eps <- a.eps, xi <- a.xi, nu <- a.nu, q <- a.q, seed <- a.seed, tolerance <- a.tol,
         box_budget <- a.budget);
    config.validate()?;
    let run = run_pipeline(&oracle, &config);
    let (witness, error, code) = match run.outcome {
        Ok(w) => {
            w.verify_with(&oracle)?;
            (Some(w), None, exit::PASS)
        }
        Err(e) => {
            let code = core_exit_code(&e);
            eprintln!("error: {e}");
            (None, Some(e.to_string()), code)
        }
    };
    let passed = witness.is_some();
    let body = AdversaryBody {
        config: config.clone(),
        mechanism: oracle.clone(),
        stages: run.stages,
        witness,
        error,
    };
    let echo = serde_json::json!({ "adversary": config, "mechanism": oracle });
    emit(
        a.out.as_deref(),
        "adversary",
        passed,
        body,
        RunManifest::new("adversary", args, echo, Some(config.seed)),
    )?;
    Ok(code)
}

/// Recorded arguments with `--jobs` and `--out` removed.
fn strip_args(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--jobs" || a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--jobs=") || a.starts_with("--out=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn replay(a: ReplayArgs, jobs: usize) -> CliResult<i32> {
    let m: RunManifest = docs::load(&a.manifest)?;
    if m.command == "replay" {
        return Err(CliError::Usage("cannot replay a replay".into()));
    }
    let out = match (&a.out, m.outputs.first()) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(CliError::Usage(
                "manifest records no output; pass --out".into(),
            ))
        }
    };
    let mut args = strip_args(&m.args);
    args.push("--out".into());
    args.push(out.display().to_string());
    let mut full = vec!["truthlab".to_string()];
    full.extend(args.iter().cloned());
    let mut cli = Cli::try_parse_from(&full)
        .map_err(|e| CliError::Usage(format!("recorded arguments: {e}")))?;
    cli.jobs = jobs;
    run(cli, args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/20").unwrap(), ExactValue::ratio(1, 20));
        assert_eq!(parse_rational("2^-12").unwrap(), ExactValue::pow2_neg(12));
        assert_eq!(parse_rational("3").unwrap(), ExactValue::from_int(3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn strips_jobs_and_out() {
        let a: Vec<String> = [
            "adversary",
            "--jobs",
            "8",
            "--out=x",
            "--n",
            "3",
            "--out",
            "y",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(strip_args(&a), vec!["adversary", "--n", "3"]);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
