//! `cvdb`: probability tables, parameter sweeps, oracle validation, protocol
//! runs and detection-power experiments.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage, configuration or
//! I/O error. Every failure prints one line `error: <kind>: <message>` on
//! stderr.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvdb::experiment::{case_label, run_trials, strategy_catalog, summarize, TrialSummary};
use cvdb::gauss::{asymptotic_p_tilde, outcome_table, MeasurementModel, OutcomeTriple};
use cvdb::primitive::wflip_feasible;
use cvdb::proto::{transcript_jsonl, verdict_json};
use cvdb::validation::{run_validation, ValidationOptions};
use cvdb::RunConfig;

#[derive(Parser)]
#[command(name = "cvdb", version, about = "Continuous-variable detectable broadcast simulator")]
struct Cli {
    /// Print the default run configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Outcome table at one parameter point.
    Probs(ProbsArgs),
    /// One row per grid point: conditionals, eta, feasibility.
    Sweep(SweepArgs),
    /// Closed form vs overlap vs Monte-Carlo, and sampler convergence.
    Validate(ValidateArgs),
    /// One protocol run from a configuration file.
    Simulate(SimulateArgs),
    /// Abort rate of seeded runs against one strategy or the whole catalog.
    Power(PowerArgs),
}

#[derive(Args)]
struct ProbsArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    x0: f64,
    /// Displacement multipliers of S, R0, R1.
    #[arg(long, default_value = "1,1,1")]
    shifts: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma list or `start:stop:count`; an empty string gives no points.
    #[arg(long)]
    a: String,
    #[arg(long)]
    sigma: String,
    #[arg(long)]
    x0: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Reduced Monte-Carlo budget with looser bounds.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative error injected into the closed-form prefactor.
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb_prefactor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Verdict JSON destination; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines transcript destination.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    /// Base configuration; defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Strategy name as in configuration files, or `none`.
    #[arg(long, default_value = "none", conflicts_with = "catalog")]
    strategy: String,
    #[arg(long, default_value = "S")]
    player: String,
    /// Strategy parameter `key=value`, repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Run every strategy of the built-in catalog.
    #[arg(long)]
    catalog: bool,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long)]
    instances: Option<u32>,
    /// Master seed; run `i` uses `seed + i`.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "usage", message: message.into() }
    }

    fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self { code: 2, kind: "io", message: format!("{}: {e}", path.display()) }
    }
}

impl From<cvdb::Error> for Failure {
    fn from(e: cvdb::Error) -> Self {
        let kind = match e {
            cvdb::Error::Config(_) => "config",
            cvdb::Error::Domain { .. } => "domain",
            _ => "parameter",
        };
        Self { code: 2, kind, message: e.to_string() }
    }
}

type CmdResult = Result<ExitCode, Failure>;

/// Twelve significant digits.
fn g(x: f64) -> String {
    format!("{x:.11e}")
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_header(schema: &str, columns: &str) -> String {
    format!("#schema={schema}\n{columns}\n")
}

fn parse_list(name: &str, spec: &str) -> Result<Vec<f64>, Failure> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let num = |s: &str| {
        s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Failure::usage(format!("--{name}: not a number: {s}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (start, stop) = (num(start)?, num(stop)?);
            let count: usize =
                count.trim().parse().map_err(|_| Failure::usage(format!("--{name}: bad count {count}")))?;
            Ok(match count {
                0 => Vec::new(),
                1 => vec![start],
                n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
            })
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(Failure::usage(format!("--{name}: expected a comma list or start:stop:count"))),
    }
}

fn cmd_probs(args: &ProbsArgs) -> CmdResult {
    let shifts = parse_list("shifts", &args.shifts)?;
    let multipliers: [f64; 3] =
        shifts.try_into().map_err(|_| Failure::usage("--shifts: expected three multipliers"))?;
    let model = MeasurementModel::new(args.sigma, args.x0, 0.0)?;
    let table = outcome_table(args.a, &model, multipliers)?;
    let mut out = csv_header("cvdb.probs.v1", "quantity,value");
    for t in OutcomeTriple::all() {
        writeln!(out, "p_abs({}),{}", t.label(), g(table.p_abs(t))).unwrap();
    }
    writeln!(out, "accept_mass,{}", g(table.accept_mass)).unwrap();
    for t in OutcomeTriple::all() {
        writeln!(out, "p_tilde({}),{}", t.label(), g(table.p_tilde(t))).unwrap();
    }
    let opt = |x: Option<f64>| x.map_or_else(String::new, g);
    writeln!(out, "K1,{}", opt(table.collective_variance)).unwrap();
    writeln!(out, "K2,{}", opt(table.relative_variance)).unwrap();
    writeln!(out, "C,{}", g(table.prefactor)).unwrap();
    writeln!(out, "eta,{}", g(table.eta())).unwrap();
    emit(&args.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let (a_list, s_list, x_list) =
        (parse_list("a", &args.a)?, parse_list("sigma", &args.sigma)?, parse_list("x0", &args.x0)?);
    let mut out = csv_header(
        "cvdb.sweep.v1",
        "a,sigma,x0,accept_mass,p_tilde,delta1_tilde,delta2_tilde,delta3_tilde,eta,feasible,a_boundary,asymptotic_p_tilde,asymptotic_valid",
    );
    for &a in &a_list {
        for &sigma in &s_list {
            let feas = wflip_feasible(a, sigma)?;
            for &x0 in &x_list {
                let table = outcome_table(a, &MeasurementModel::new(sigma, x0, 0.0)?, [1.0; 3])?;
                let asym = asymptotic_p_tilde(x0, sigma)?;
                let p = |bits| table.p_tilde(OutcomeTriple::from_bits(bits));
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    g(a),
                    g(sigma),
                    g(x0),
                    g(table.accept_mass),
                    g(p([1, 0, 0])),
                    g(p([0, 0, 0])),
                    g(p([1, 1, 1])),
                    g(p([1, 1, 0])),
                    g(table.eta()),
                    feas.feasible,
                    g(feas.a_boundary_at_sigma),
                    g(asym.value),
                    asym.within_validity
                )
                .unwrap();
            }
        }
    }
    emit(&args.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let mut opts = if args.quick { ValidationOptions::quick() } else { ValidationOptions::full() };
    if let Some(seed) = args.seed {
        opts.seed = seed;
    }
    opts.prefactor_perturbation = args.perturb_prefactor;
    let report = run_validation(&opts)?;
    let mut out = csv_header("cvdb.validate.v1", "suite,check,value,bound,pass");
    for c in &report.checks {
        writeln!(out, "{},{},{},{},{}", c.suite, c.name, g(c.value), g(c.bound), c.pass).unwrap();
    }
    emit(&args.out, &out)?;
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        let n = report.failures().count();
        let first = report.failures().next().map(|c| format!("{}: {}", c.suite, c.name)).unwrap_or_default();
        Err(Failure { code: 1, kind: "validation", message: format!("{n} check(s) failed, first {first}") })
    }
}

fn read_config(path: &PathBuf, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Ok(RunConfig::parse(&text, seed)?)
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let mut cfg = read_config(&args.config, args.seed)?;
    if args.transcript.is_some() {
        cfg.record_transcript = true;
    }
    let verdict = cvdb::full_run(&cfg)?;
    if let Some(path) = &args.transcript {
        std::fs::write(path, transcript_jsonl(&verdict.transcript)).map_err(|e| Failure::io(path, e))?;
    }
    emit(&args.out, &(verdict_json(&verdict) + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_power(args: &PowerArgs) -> CmdResult {
    let mut base = match &args.config {
        Some(path) => read_config(path, Some(args.seed))?,
        None => RunConfig { seed: args.seed, ..RunConfig::default() },
    };
    if let Some(m) = args.instances {
        base.instances = m;
    }
    let cases: Vec<(String, RunConfig)> = if args.catalog {
        strategy_catalog()
            .into_iter()
            .map(|(p, s)| Ok((case_label(p, &s), base.clone().with_adversary(p, s)?)))
            .collect::<Result<_, cvdb::Error>>()?
    } else if args.strategy == "none" {
        if !args.params.is_empty() {
            return Err(Failure::usage("--param needs --strategy"));
        }
        vec![("none".to_string(), base.clone())]
    } else {
        let mut text = base.to_config_string();
        text = text.split("\n[adversary]").next().unwrap_or("").to_string();
        write!(text, "\n[adversary]\nplayer = {}\nstrategy = {}\n", args.player, args.strategy).unwrap();
        for kv in &args.params {
            let (k, v) = kv.split_once('=').ok_or_else(|| Failure::usage(format!("--param: expected key=value, got {kv}")))?;
            writeln!(text, "{} = {}", k.trim(), v.trim()).unwrap();
        }
        let cfg = RunConfig::parse(&text, None)?;
        let adv = cfg.adversary.as_ref().expect("block parsed");
        vec![(case_label(adv.player, &adv.strategy), cfg)]
    };

    let mut out = csv_header("cvdb.power.v1", "case,trials,aborts,abort_rate,ci_low,ci_high,violations");
    if args.trials > 0 {
        for (label, cfg) in &cases {
            let verdicts = run_trials(cfg, args.trials, args.seed)?;
            let TrialSummary { trials, aborts, abort_rate, ci_low, ci_high, violations, .. } = summarize(label, &verdicts);
            writeln!(out, "{label},{trials},{aborts},{},{},{},{violations}", g(abort_rate), g(ci_low), g(ci_high))
                .unwrap();
        }
    }
    emit(&args.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CmdResult {
    if cli.print_defaults {
        print!("{}", RunConfig::default().to_config_string());
        return Ok(ExitCode::SUCCESS);
    }
    match cli.command {
        None => Err(Failure::usage("no command given; try --help")),
        Some(Command::Probs(a)) => cmd_probs(&a),
        Some(Command::Sweep(a)) => cmd_sweep(&a),
        Some(Command::Validate(a)) => cmd_validate(&a),
        Some(Command::Simulate(a)) => cmd_simulate(&a),
        Some(Command::Power(a)) => cmd_power(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error: usage: {line}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
