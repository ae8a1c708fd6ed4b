//! Command-line front end: `run`, `audit` and `curve`.
//!
//! Settings come from an optional TOML file (`--config`) with the same keys
//! as the long flags; flags win. Every output starts with the merged config.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::access::{AttributeVector, SystemParams};
use crate::audit::{self, Check, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::field::DEFAULT_MODULUS;
use crate::harness::{run_protocol, write_jsonl, RunOutput};
use crate::mix::{frontier, parse_rational, ratio_to_string, run_time_shared, write_curve_csv, MixPlan};
use crate::protocol::{Engine, SchemeKind};
use crate::store::MessageStore;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_ENUMERATION_REFUSED: i32 = 3;
pub const EXIT_DECODE_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hetdapac", version, about = "Attribute-verified private retrieval: runs, audits and rate curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one retrieval (or a sweep over every v*) and dump the transcript.
    Run(Flags),
    /// Run audit suites and report pass/fail per check.
    Audit(Flags),
    /// Write rate/load-ratio curve points as CSV.
    Curve(Flags),
}

/// Flags shared by all subcommands. Unused ones are ignored.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// TOML file with any of the keys below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// dapac, het1, het2 or mix.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub q: Option<u64>,
    /// Message length L.
    #[arg(long)]
    pub length: Option<usize>,
    /// Baseline fraction for `mix`, e.g. 3/7.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attribute vector, e.g. 1,2,2. Omit to sweep all of them.
    #[arg(long)]
    pub vstar: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// correctness, privacy, secrecy, counts or all.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Seeds per attribute vector in the correctness suite.
    #[arg(long)]
    pub trials: Option<usize>,
}

impl Flags {
    /// File values overlaid by any flag given on the command line.
    pub fn resolve(self) -> Result<Flags> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)?;
        let file: Flags = toml::from_str(&text)
            .map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))?;
        Ok(Flags {
            config: Some(path),
            scheme: self.scheme.or(file.scheme),
            n: self.n.or(file.n),
            d: self.d.or(file.d),
            k: self.k.or(file.k),
            q: self.q.or(file.q),
            length: self.length.or(file.length),
            lambda: self.lambda.or(file.lambda),
            seed: self.seed.or(file.seed),
            vstar: self.vstar.or(file.vstar),
            out: self.out.or(file.out),
            suite: self.suite.or(file.suite),
            grid: self.grid.or(file.grid),
            trials: self.trials.or(file.trials),
        })
    }

    pub fn echo(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::InvalidParams(format!("--{name} is required")))
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(
            Self::need(self.n, "n")?,
            Self::need(self.d, "d")?,
            Self::need(self.k, "k")?,
            self.q.unwrap_or(DEFAULT_MODULUS),
            Self::need(self.length, "length")?,
        )
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn schemes(&self) -> Result<Vec<SchemeKind>> {
        match self.scheme.as_deref() {
            None | Some("all") => Ok(SchemeKind::ALL.to_vec()),
            Some(s) => Ok(vec![s.parse()?]),
        }
    }

    fn v_stars(&self, params: &SystemParams) -> Result<Vec<AttributeVector>> {
        match &self.vstar {
            Some(s) => Ok(vec![AttributeVector::parse(s, params)?]),
            None => Ok(AttributeVector::all(params)),
        }
    }
}

/// Maps an error to its exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EnumerationTooLarge { .. } => EXIT_ENUMERATION_REFUSED,
        Error::RetriesExhausted { .. } => EXIT_DECODE_FAILED,
        Error::NonPrimeModulus(_)
        | Error::InvalidParams(_)
        | Error::Divisibility { .. }
        | Error::MixLength { .. }
        | Error::SchemeInapplicable { .. }
        | Error::InvalidDesign(_)
        | Error::LambdaOutOfRange(_)
        | Error::LoadRatioOutOfRange(..)
        | Error::MalformedClaim(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_CHECK_FAILED,
    }
}

/// Parses `args` and runs the command, writing human output to `out`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_PASS };
        }
    };
    let result = match cli.command {
        Command::Run(f) => f.resolve().and_then(|f| cmd_run(&f, out)),
        Command::Audit(f) => f.resolve().and_then(|f| cmd_audit(&f, out)),
        Command::Curve(f) => f.resolve().and_then(|f| cmd_curve(&f, out)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            exit_code(&e)
        }
    }
}

fn sweep_path(base: &Path, v: &AttributeVector) -> PathBuf {
    let label: Vec<String> = v.values().iter().map(|x| x.to_string()).collect();
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("transcript");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    base.with_file_name(format!("{stem}.{}.{ext}", label.join("-")))
}

pub fn cmd_run(flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "# config {}", flags.echo())?;
    let params = flags.params()?;
    let scheme = scheme_name(flags)?;
    let plan = if scheme == "mix" {
        let lambda = flags
            .lambda
            .as_deref()
            .ok_or_else(|| Error::InvalidParams("--lambda is required for mix".into()))?;
        let plan = MixPlan::baseline_het1(parse_rational(lambda)?)?;
        plan.segments(&params)?;
        Some(plan)
    } else {
        scheme.parse::<SchemeKind>()?.subpacket_count(&params)?;
        None
    };
    let v_stars = flags.v_stars(&params)?;
    let store = MessageStore::random(&params, flags.seed());
    let mut code = EXIT_PASS;
    for v in &v_stars {
        let run: RunOutput = match &plan {
            Some(p) => run_time_shared(p, &params, v, &store, flags.seed())?,
            None => run_protocol(scheme.parse()?, &params, v, &store, flags.seed())?,
        };
        let ok = run.message == store.message(crate::access::message_index(v, &params)?)?;
        if !ok {
            code = EXIT_CHECK_FAILED;
        }
        writeln!(
            out,
            "{} v*={} decoded={} {}",
            run.transcript.header.scheme,
            v,
            if ok { "ok" } else { "WRONG" },
            run.metrics.summary()
        )?;
        if let Some(path) = &flags.out {
            let path = if v_stars.len() > 1 { sweep_path(path, v) } else { path.clone() };
            let mut w = BufWriter::new(File::create(&path)?);
            write_jsonl(&mut w, &run.transcript, Some(&run.metrics))?;
            w.flush()?;
            writeln!(out, "transcript written to {}", path.display())?;
        }
    }
    Ok(code)
}

fn scheme_name(flags: &Flags) -> Result<String> {
    let s = flags
        .scheme
        .clone()
        .ok_or_else(|| Error::InvalidParams("--scheme is required".into()))?;
    if s != "mix" {
        s.parse::<SchemeKind>()?;
    }
    Ok(s)
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a Flags,
    checks: &'a [Check],
    passed: bool,
}

/// Points for the counts suite when no parameters are given.
fn counts_grid() -> Vec<(SchemeKind, SystemParams)> {
    let mut out = Vec::new();
    for d in [2, 3, 4] {
        for k in [2, 3] {
            for kind in SchemeKind::ALL {
                if d < kind.min_d() {
                    continue;
                }
                let n = if kind.uses_central() { d + 1 } else { d };
                let l = 2 * kind.parts(d);
                out.push((kind, SystemParams::new(n, d, k, DEFAULT_MODULUS, l).expect("grid params are valid")));
            }
        }
    }
    out
}

pub fn cmd_audit(flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "# config {}", flags.echo())?;
    let suite = flags.suite.as_deref().unwrap_or("all");
    let suites: Vec<&str> = match suite {
        "all" => vec!["correctness", "privacy", "secrecy", "counts"],
        s @ ("correctness" | "privacy" | "secrecy" | "counts") => vec![s],
        other => return Err(Error::InvalidParams(format!("unknown suite {other:?}"))),
    };
    let explicit = flags.n.is_some() || flags.d.is_some() || flags.k.is_some();
    let mut checks = Vec::new();
    let push = |checks: &mut Vec<Check>, c: Check, out: &mut dyn Write| -> Result<()> {
        writeln!(
            out,
            "{} {} {}: {}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.value,
            c.enumerated.map(|n| format!(" ({n} outcomes)")).unwrap_or_default()
        )?;
        checks.push(c);
        Ok(())
    };
    for s in suites {
        if s == "counts" && !explicit {
            for (kind, params) in counts_grid() {
                let t = Instant::now();
                let r = audit::audit_counts(kind, &params)?;
                let c = Check {
                    suite: s.into(),
                    name: format!("{kind} {params}"),
                    passed: r.passed,
                    value: format!(
                        "rate {} ℓ {} randomness {}",
                        ratio_to_string(&r.measured.rate),
                        r.measured.load_ratio,
                        r.measured.randomness_allocated
                    ),
                    enumerated: None,
                    millis: t.elapsed().as_millis(),
                };
                push(&mut checks, c, out)?;
            }
            continue;
        }
        let params = flags.params()?;
        for kind in flags.schemes()? {
            if params.d < kind.min_d() {
                if flags.scheme.is_some() {
                    return Err(Error::SchemeInapplicable {
                        scheme: kind,
                        min_d: kind.min_d(),
                        d: params.d,
                    });
                }
                continue;
            }
            if kind.subpacket_count(&params).is_err() && flags.scheme.is_none() {
                continue;
            }
            let t = Instant::now();
            match s {
                "correctness" => {
                    let r = audit::audit_correctness(kind, &params, flags.trials.unwrap_or(50))?;
                    let c = Check {
                        suite: s.into(),
                        name: format!("{kind} {params}"),
                        passed: r.failures == 0,
                        value: format!("{} failures in {} runs, {} retries", r.failures, r.runs, r.retries),
                        enumerated: None,
                        millis: t.elapsed().as_millis(),
                    };
                    push(&mut checks, c, out)?;
                }
                "privacy" => {
                    let engine = Engine::new(kind, &params)?;
                    for o in audit::audit_privacy_all(&engine, DEFAULT_CAP)? {
                        let c = Check {
                            suite: s.into(),
                            name: format!("{kind} {params} server {}", o.server),
                            passed: o.max_tv == 0.into(),
                            value: format!("TV {} over {} pairs", ratio_to_string(&o.max_tv), o.pairs),
                            enumerated: Some(o.enumerated),
                            millis: t.elapsed().as_millis(),
                        };
                        push(&mut checks, c, out)?;
                    }
                }
                "secrecy" => {
                    let engine = Engine::new(kind, &params)?;
                    let v = match &flags.vstar {
                        Some(v) => AttributeVector::parse(v, &params)?,
                        None => AttributeVector::all(&params).remove(0),
                    };
                    let o = audit::audit_db_secrecy(&engine, &v, flags.seed(), DEFAULT_CAP)?;
                    let c = Check {
                        suite: s.into(),
                        name: format!("{kind} {params} v*={v}"),
                        passed: o.max_tv == 0.into(),
                        value: format!("TV {} over {} store pairs", ratio_to_string(&o.max_tv), o.perturbations),
                        enumerated: Some(o.pool_assignments),
                        millis: t.elapsed().as_millis(),
                    };
                    push(&mut checks, c, out)?;
                }
                _ => {
                    let r = audit::audit_counts(kind, &params)?;
                    let c = Check {
                        suite: s.into(),
                        name: format!("{kind} {params}"),
                        passed: r.passed,
                        value: format!(
                            "rate {} ℓ {} randomness {}",
                            ratio_to_string(&r.measured.rate),
                            r.measured.load_ratio,
                            r.measured.randomness_allocated
                        ),
                        enumerated: None,
                        millis: t.elapsed().as_millis(),
                    };
                    push(&mut checks, c, out)?;
                }
            }
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    if let Some(path) = &flags.out {
        let report = Report {
            config: flags,
            checks: &checks,
            passed,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        writeln!(out, "report written to {}", path.display())?;
    }
    Ok(if passed { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

pub fn cmd_curve(flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    let d = Flags::need(flags.d, "d")?;
    let k = Flags::need(flags.k, "k")?;
    let grid = flags.grid.unwrap_or(16);
    let rows = frontier(d, k, grid)?;
    let mut buf = Vec::new();
    writeln!(buf, "# config {}", flags.echo())?;
    write_curve_csv(&mut buf, d, k, grid, &rows)?;
    match &flags.out {
        Some(path) => {
            std::fs::write(path, &buf)?;
            writeln!(out, "# config {}", flags.echo())?;
            if d < 3 {
                writeln!(out, "D < 3: only the time-sharing curve is available")?;
            }
            writeln!(out, "{} rows written to {}", rows.len(), path.display())?;
        }
        None => out.write_all(&buf)?,
    }
    Ok(EXIT_PASS)
}

/// Entry point for the binary.
pub fn main_with_args() -> i32 {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    run_cli(std::env::args_os(), &mut lock)
}
