//! `contraglot` command-line front end.
//!
//! Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 usage or configuration
//! error, 4 tool or I/O error.

mod project;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use contraglot::codegen::{emit_cbmc_harness, emit_kani_harness, HarnessSpec};
use contraglot::engine::{
    render_trace, Engine, EngineError, ExampleSets, Outcome, SynthOracleKind, SynthRun,
};
use contraglot::il::parse_contract;
use contraglot::model::{simulate, Language, SeededScheduler};

use project::{Overrides, Project};
use report::RunReport;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_ERROR: u8 = 4;

/// Compositional verification of polyglot state machines.
#[derive(Parser)]
#[command(name = "contraglot", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the project's property with synthesized contracts.
    Verify {
        project: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Synthesize a valid contract for one procedure.
    Synth {
        project: PathBuf,
        procedure: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Write the CBMC or Kani harness for a procedure and contract.
    EmitHarness {
        project: PathBuf,
        procedure: String,
        contract: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the model concretely (mini procedures only).
    Simulate {
        project: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the trace as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthArg {
    Enum,
    Llm,
    Scripted,
}

#[derive(Args)]
struct Opts {
    /// Transitions explored by the model checker.
    #[arg(long)]
    bound: Option<usize>,
    #[arg(long)]
    max_cegis: Option<usize>,
    #[arg(long)]
    max_cegar: Option<usize>,
    #[arg(long, value_enum)]
    synth_oracle: Option<SynthArg>,
    /// SMT solver executable (SMT-LIB 2 on stdin).
    #[arg(long)]
    solver: Option<PathBuf>,
    #[arg(long)]
    cbmc: Option<PathBuf>,
    #[arg(long)]
    kani: Option<PathBuf>,
    /// Recorded in the report for reproducibility.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seconds per solver, tool or synthesis call.
    #[arg(long)]
    timeout: Option<u64>,
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides {
            bound: self.bound,
            max_cegis: self.max_cegis,
            max_cegar: self.max_cegar,
            synth: self.synth_oracle.map(|s| match s {
                SynthArg::Enum => SynthOracleKind::Enum,
                SynthArg::Llm => SynthOracleKind::Llm,
                SynthArg::Scripted => SynthOracleKind::Scripted,
            }),
            solver: self.solver.clone(),
            cbmc: self.cbmc.clone(),
            kani: self.kani.clone(),
            out: self.out.clone(),
            timeout: self.timeout,
        }
    }
}

/// An error caused by the invocation rather than the run.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| Usage(e).into())
}

fn load(path: &Path, o: Option<&Opts>) -> Result<Project> {
    let mut p = usage(Project::load(path))?;
    if let Some(o) = o {
        p.apply(&o.overrides());
    }
    Ok(p)
}

fn verify(path: PathBuf, opts: Opts) -> Result<u8> {
    let p = load(&path, Some(&opts))?;
    let Some(property) = p.property.clone() else {
        bail!(Usage(anyhow::anyhow!(
            "no property: add a [property] table to the project or model"
        )));
    };
    let cfg = p.engine_config();
    let synth = usage(p.synthesizer())?;
    let verif = p.verifier();
    let engine = Engine::new(cfg.clone(), synth.as_ref(), &verif);
    let verdict = match engine.verify(&p.model, &property) {
        Ok(v) => v,
        Err(e @ (EngineError::Config(_) | EngineError::InvalidModel(_) | EngineError::Il(_))) => {
            bail!(Usage(e.into()))
        }
        Err(e) => return Err(e.into()),
    };
    let report = RunReport {
        model: &p.model.name,
        property: property.to_string(),
        config: &cfg,
        environment: report::environment(&p, opts.seed),
        verdict: &verdict,
    };
    let out = p.out_dir();
    report::write(&out, &report)?;
    print!("{}", verdict.render_text());
    println!("\nreport written to {}", out.display());
    Ok(match verdict.outcome {
        Outcome::Pass { .. } => EXIT_PASS,
        Outcome::Fail { .. } => EXIT_FAIL,
        Outcome::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    })
}

fn synth(path: PathBuf, procedure: String, opts: Opts) -> Result<u8> {
    let p = load(&path, Some(&opts))?;
    let f = usage(p.procedure(&procedure))?;
    let synth = usage(p.synthesizer())?;
    let verif = p.verifier();
    let engine = Engine::new(p.engine_config(), synth.as_ref(), &verif);
    let mut run = SynthRun::default();
    match engine.synth_contract(&f, &mut ExampleSets::default(), &mut run) {
        Ok(c) => {
            println!("{c}");
            eprintln!("{} iteration(s)", run.iterations);
            Ok(EXIT_PASS)
        }
        Err(e) => {
            eprintln!("inconclusive: {e}");
            Ok(EXIT_INCONCLUSIVE)
        }
    }
}

fn emit_harness(
    path: PathBuf,
    procedure: String,
    contract: PathBuf,
    out: Option<PathBuf>,
) -> Result<u8> {
    let p = load(&path, None)?;
    let f = usage(p.procedure(&procedure))?;
    let text = usage(
        std::fs::read_to_string(&contract)
            .with_context(|| format!("cannot read {}", contract.display())),
    )?;
    let c = usage(parse_contract(&text, &f.ctx).context("invalid contract"))?;
    let spec = HarnessSpec::from_procedure(&f.procedure, &p.model.vars, c);
    let (name, text) = match f.language() {
        Language::C => (format!("{procedure}.cbmc.c"), emit_cbmc_harness(&spec)?),
        Language::Rust => (format!("{procedure}.kani.rs"), emit_kani_harness(&spec)?),
        Language::Mini => bail!(Usage(anyhow::anyhow!(
            "`{procedure}` is a mini procedure; harnesses exist only for c and rust"
        ))),
    };
    let dir = out.unwrap_or_else(|| p.out_dir());
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let file = dir.join(name);
    std::fs::write(&file, text).with_context(|| format!("cannot write {}", file.display()))?;
    println!("{}", file.display());
    Ok(EXIT_PASS)
}

fn simulate_cmd(path: PathBuf, steps: usize, seed: u64, json: bool) -> Result<u8> {
    let p = load(&path, None)?;
    let t = usage(
        simulate(&p.model, steps, &mut SeededScheduler::new(seed)).map_err(anyhow::Error::new),
    )?;
    if json {
        println!("{}", serde_json::to_string_pretty(&t)?);
    } else {
        print!("{}", render_trace(&t));
    }
    let last = t.steps.last().expect("simulation has an initial step");
    if t.maximal && !p.model.terminal.contains(&last.mode) {
        eprintln!(
            "stuck: no transition enabled in non-terminal mode `{}`",
            last.mode
        );
    }
    Ok(EXIT_PASS)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Verify { project, opts } => verify(project, opts),
        Cmd::Synth {
            project,
            procedure,
            opts,
        } => synth(project, procedure, opts),
        Cmd::EmitHarness {
            project,
            procedure,
            contract,
            out,
        } => emit_harness(project, procedure, contract, out),
        Cmd::Simulate {
            project,
            steps,
            seed,
            json,
        } => simulate_cmd(project, steps, seed, json),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Usage>() {
                EXIT_USAGE
            } else {
                EXIT_ERROR
            })
        }
    }
}
