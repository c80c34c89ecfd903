use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use propgate::extended::Extended;
use propgate::harness::{compare_results, run_benchmark, ComparisonReport, EngineSpec, Tolerances};
use propgate::ingest::{gen_cascade, gen_random, permute_instance, read_mps_file, write_mps, RandomInstanceParams};
use propgate::{Engine, EngineConfig, ProblemInstance, PropagationResult, ScalarMode, Status};
use serde::{Deserialize, Serialize};

const EXIT_OK: u8 = 0;
const EXIT_DIFFERENT: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "propgate", version, about = "Domain propagation for linear constraint systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one instance with one engine.
    Run(RunArgs),
    /// Run two engines on one instance and compare their bounds.
    Compare(CompareArgs),
    /// Time engines on every .mps file of a directory.
    Bench(BenchArgs),
    /// Write a generated instance as MPS.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Write a randomly permuted copy of an instance and the permutation.
    Permute(PermuteArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Seq,
    Par,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Seq => Engine::Sequential,
            EngineArg::Par => Engine::Parallel,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Args)]
struct ConfigArgs {
    /// Worker threads for the parallel engine (0 = all cores).
    #[arg(long, env = "PROPGATE_THREADS", default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = 100)]
    rounds_limit: usize,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    #[arg(long, default_value_t = 1024)]
    nnz_budget: usize,
    #[arg(long, default_value_t = 64)]
    vector_threshold: usize,
}

impl ConfigArgs {
    fn config(&self) -> Result<EngineConfig> {
        let cfg = EngineConfig {
            worker_count: self.workers,
            round_limit: self.rounds_limit,
            nnz_budget: self.nnz_budget,
            vector_threshold: self.vector_threshold,
            scalar_mode: match self.precision {
                Precision::F64 => ScalarMode::Wide64,
                Precision::F32 => ScalarMode::Narrow32,
            },
            ..EngineConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = EngineArg::Par)]
    engine: EngineArg,
    #[command(flatten)]
    config: ConfigArgs,
    /// Include every variable bound in the output.
    #[arg(long)]
    dump_bounds: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Engine providing the reference bounds.
    #[arg(long, value_enum, default_value_t = EngineArg::Seq)]
    reference: EngineArg,
    /// Engine under test.
    #[arg(long, value_enum, default_value_t = EngineArg::Par)]
    engine: EngineArg,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1e-8)]
    t_abs: f64,
    #[arg(long, default_value_t = 1e-5)]
    t_rel: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory containing .mps instances.
    #[arg(long, short)]
    dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Timed repetitions per instance and engine; the best one is kept.
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the table here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Chain x_{k-1} >= x_k with x_0 fixed at 0: one new tightening per parallel round.
    Cascade {
        #[arg(long, short)]
        m: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Random sparse instance, feasible by construction.
    Random {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 6.0)]
        mean_row_len: f64,
        #[arg(long, default_value_t = 0.3)]
        integral_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        infinite_bound_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PermuteArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permuted instance (MPS).
    #[arg(long, short)]
    output: PathBuf,
    /// Permutation (JSON).
    #[arg(long)]
    perm_output: PathBuf,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct BoundsDump {
    lower: Vec<Extended>,
    upper: Vec<Extended>,
}

/// What `run` prints.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct RunSummary {
    instance: String,
    engine: String,
    precision: String,
    status: Status,
    rounds_executed: usize,
    total_bound_changes: usize,
    per_round_changes: Vec<usize>,
    elapsed_ns: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    bounds: Option<BoundsDump>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct CompareSummary {
    instance: String,
    reference: RunSummary,
    test: RunSummary,
    tolerances: Tolerances,
    report: ComparisonReport,
}

fn summarize(inst: &ProblemInstance, engine: Engine, cfg: &EngineConfig, r: &PropagationResult, dump: bool) -> RunSummary {
    RunSummary {
        instance: inst.name.clone(),
        engine: engine.id().to_string(),
        precision: match cfg.scalar_mode {
            ScalarMode::Wide64 => "f64",
            ScalarMode::Narrow32 => "f32",
        }
        .to_string(),
        status: r.status,
        rounds_executed: r.rounds_executed,
        total_bound_changes: r.total_bound_changes,
        per_round_changes: r.per_round_changes.clone(),
        elapsed_ns: r.elapsed.as_nanos() as u64,
        bounds: dump.then(|| BoundsDump {
            lower: r.bounds.lower.iter().map(|&v| Extended(v)).collect(),
            upper: r.bounds.upper.iter().map(|&v| Extended(v)).collect(),
        }),
    }
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Converged => EXIT_OK,
        Status::RoundLimit => EXIT_DIFFERENT,
        Status::Infeasible => EXIT_INFEASIBLE,
    }
}

fn rounds_field(v: &[usize]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

fn write_run(out: &mut dyn Write, s: &RunSummary, format: Format) -> Result<()> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(s)?)?,
        Format::Csv => {
            writeln!(out, "instance,engine,precision,status,rounds_executed,total_bound_changes,per_round_changes,elapsed_ns")?;
            writeln!(
                out,
                "{},{},{},{:?},{},{},{},{}",
                s.instance,
                s.engine,
                s.precision,
                s.status,
                s.rounds_executed,
                s.total_bound_changes,
                rounds_field(&s.per_round_changes),
                s.elapsed_ns
            )?;
            if let Some(b) = &s.bounds {
                writeln!(out)?;
                writeln!(out, "var,lower,upper")?;
                for (j, (l, u)) in b.lower.iter().zip(&b.upper).enumerate() {
                    writeln!(out, "{j},{l},{u}")?;
                }
            }
        }
        Format::Human => {
            writeln!(out, "instance: {}", s.instance)?;
            writeln!(out, "engine:   {} ({})", s.engine, s.precision)?;
            writeln!(out, "status:   {:?}", s.status)?;
            writeln!(out, "rounds:   {} (changes per round: {})", s.rounds_executed, rounds_field(&s.per_round_changes))?;
            writeln!(out, "changes:  {}", s.total_bound_changes)?;
            writeln!(out, "elapsed:  {} ns", s.elapsed_ns)?;
            if let Some(b) = &s.bounds {
                for (j, (l, u)) in b.lower.iter().zip(&b.upper).enumerate() {
                    writeln!(out, "  x{j}: [{l}, {u}]")?;
                }
            }
        }
    }
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn load(path: &Path) -> Result<ProblemInstance> {
    read_mps_file(path).with_context(|| format!("cannot load {}", path.display()))
}

fn run(args: RunArgs) -> Result<u8> {
    let cfg = args.config.config()?;
    let inst = load(&args.input)?;
    let engine = Engine::from(args.engine);
    let result = engine.run(&inst, &cfg)?;
    let summary = summarize(&inst, engine, &cfg, &result, args.dump_bounds);
    write_run(&mut io::stdout().lock(), &summary, args.format)?;
    Ok(status_code(result.status))
}

fn compare(args: CompareArgs) -> Result<u8> {
    let cfg = args.config.config()?;
    let inst = load(&args.input)?;
    let (reference, test) = (Engine::from(args.reference), Engine::from(args.engine));
    let ref_result = reference.run(&inst, &cfg)?;
    let test_result = test.run(&inst, &cfg)?;
    let tolerances = Tolerances { abs: args.t_abs, rel: args.t_rel };
    let report = compare_results(&ref_result, &test_result, tolerances)?;
    let code = if report.equal { EXIT_OK } else { EXIT_DIFFERENT };
    let summary = CompareSummary {
        instance: inst.name.clone(),
        reference: summarize(&inst, reference, &cfg, &ref_result, false),
        test: summarize(&inst, test, &cfg, &test_result, false),
        tolerances,
        report,
    };
    let mut out = io::stdout().lock();
    match args.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?,
        Format::Csv => {
            writeln!(out, "instance,reference,test,reference_status,test_status,equal,num_mismatches,first_var,first_side,reference_value,test_value")?;
            let r = &summary.report;
            let (var, side, a, b) = match &r.first_mismatch {
                Some(m) => (m.var.to_string(), format!("{:?}", m.side).to_lowercase(), m.reference.to_string(), m.test.to_string()),
                None => Default::default(),
            };
            writeln!(
                out,
                "{},{},{},{:?},{:?},{},{},{var},{side},{a},{b}",
                summary.instance, summary.reference.engine, summary.test.engine, summary.reference.status, summary.test.status, r.equal, r.num_mismatches
            )?;
        }
        Format::Human => {
            let r = &summary.report;
            writeln!(out, "instance:  {}", summary.instance)?;
            writeln!(out, "reference: {} {:?} in {} rounds", summary.reference.engine, summary.reference.status, summary.reference.rounds_executed)?;
            writeln!(out, "test:      {} {:?} in {} rounds", summary.test.engine, summary.test.status, summary.test.rounds_executed)?;
            writeln!(out, "equal:     {} ({} mismatches)", r.equal, r.num_mismatches)?;
            if let Some(m) = &r.first_mismatch {
                writeln!(out, "first:     x{} {:?}: {} vs {}", m.var, m.side, m.reference, m.test)?;
            }
        }
    }
    Ok(code)
}

fn bench(args: BenchArgs) -> Result<u8> {
    let cfg = args.config.config()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("cannot read directory {}", args.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("mps")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .mps files in {}", args.dir.display());
    }
    let instances = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let engines = [
        EngineSpec { id: "seq".into(), engine: Engine::Sequential, config: cfg.clone() },
        EngineSpec { id: "par".into(), engine: Engine::Parallel, config: cfg },
    ];
    let table = run_benchmark(&instances, &engines, args.repetitions, 0, Tolerances::default())?;
    let text = match args.format {
        Format::Json => table.to_json()? + "\n",
        Format::Csv | Format::Human => {
            let mut buf = Vec::new();
            table.write_records_csv(&mut buf)?;
            buf.push(b'\n');
            table.write_aggregates_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
    };
    write_text(args.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn gen(cmd: GenCommand) -> Result<u8> {
    let (inst, output) = match cmd {
        GenCommand::Cascade { m, output } => (gen_cascade(m)?, output),
        GenCommand::Random { rows, cols, mean_row_len, integral_fraction, infinite_bound_fraction, seed, output } => {
            let params = RandomInstanceParams {
                num_rows: rows,
                num_cols: cols,
                mean_row_len,
                integral_fraction,
                infinite_bound_fraction,
                ..Default::default()
            };
            let mut inst = gen_random(&params, seed)?;
            inst.name = format!("random{rows}x{cols}s{seed}");
            (inst, output)
        }
    };
    write_text(output.as_deref(), &write_mps(&inst))?;
    Ok(EXIT_OK)
}

fn permute(args: PermuteArgs) -> Result<u8> {
    let inst = load(&args.input)?;
    let (permuted, pair) = permute_instance(&inst, args.seed);
    write_text(Some(&args.output), &write_mps(&permuted))?;
    write_text(Some(&args.perm_output), &(serde_json::to_string_pretty(&pair)? + "\n"))?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Bench(a) => bench(a),
        Command::Gen(c) => gen(c),
        Command::Permute(a) => permute(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
