//! `place3d`: runs the die-to-die placement flow on a design file, or
//! generates synthetic designs and checks solutions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use place3d::flow::{check_solution, field_snapshot, gen_synthetic, run_flow, FlowChoice, FlowConfig, GenSpec};
use place3d::gp::write_iteration_csv;
use place3d::model::{parse_design, read_solution, write_design, write_solution};
use place3d::{Design, PlaceError};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "place3d", version, about = "Analytical die-to-die 3D mixed-size placer")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic design.
    Gen(GenArgs),
    /// Validate a solution against a design and print its score.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Design file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Solution file. The report (`.report.json`) and iteration log
    /// (`.iter.csv`) are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Depth bins of the 3D density grid.
    #[arg(long, default_value_t = 8)]
    nz: usize,
    #[arg(long, default_value_t = 0.10)]
    stop_overflow: f64,
    #[arg(long)]
    skip_rotation: bool,
    #[arg(long, value_enum, default_value_t = FlowArg::Auto)]
    flow: FlowArg,
    /// Write density, potential and field of the first global placement
    /// result as JSON.
    #[arg(long, value_name = "PATH")]
    dump_fields: Option<PathBuf>,
    /// Validate the solution before exiting.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FlowArg {
    Auto,
    #[value(name = "3d")]
    ThreeD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    cells: usize,
    #[arg(long, default_value_t = 4)]
    macros: usize,
    #[arg(long, default_value_t = 0.3)]
    macro_ratio: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PlaceError>().map(PlaceError::root) {
        Some(PlaceError::Syntax { .. } | PlaceError::DanglingPin { .. } | PlaceError::InvalidDimension(_)) => {
            EXIT_PARSE
        }
        Some(PlaceError::Infeasible(_) | PlaceError::Legalize { .. }) => EXIT_INFEASIBLE,
        Some(PlaceError::NonFinite { .. }) => EXIT_DIVERGED,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLACER3D_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Some(Command::Gen(a)) => gen(&a),
        Some(Command::Check(a)) => check(&a),
        None => run(&cli.run),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_design(path: &Path) -> anyhow::Result<Design> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(parse_design(BufReader::new(f))?)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(a: &RunArgs) -> anyhow::Result<u8> {
    let (Some(input), Some(out)) = (&a.input, &a.out) else {
        anyhow::bail!("--input and --out are required (see --help)");
    };
    if a.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(a.threads).build_global()?;
    }
    let design = load_design(input)?;
    let mut cfg = FlowConfig::default();
    cfg.gp.seed = a.seed;
    cfg.gp.nz = a.nz;
    cfg.gp.stop_overflow = a.stop_overflow;
    cfg.skip_rotation = a.skip_rotation;
    cfg.flow = match a.flow {
        FlowArg::Auto => FlowChoice::Auto,
        FlowArg::ThreeD => FlowChoice::Force3d,
        FlowArg::TwoD => FlowChoice::Force2d,
    };
    let res = run_flow(&design, &cfg)?;

    let mut w = create(out)?;
    write_solution(&design, &res.solution, &mut w)?;
    w.flush()?;
    let mut w = create(&sibling(out, ".iter.csv"))?;
    write_iteration_csv(&mut w, &res.log)?;
    w.flush()?;
    let mut w = create(&sibling(out, ".report.json"))?;
    serde_json::to_writer_pretty(&mut w, &res.report)?;
    w.flush()?;
    if let Some(path) = &a.dump_fields {
        let snap = field_snapshot(&design, &res.gp_state, &cfg.gp);
        let mut w = create(path)?;
        serde_json::to_writer(&mut w, &snap)?;
        w.flush()?;
    }

    let r = &res.report;
    println!(
        "hpwl {:.1}  hbts {}  raw score {:.1}  flow {}  runtime {:.2}s",
        r.hpwl,
        r.hbt_count,
        r.raw_score,
        serde_json::to_value(r.flow)?.as_str().unwrap_or("?"),
        r.runtime.total
    );
    if a.check {
        let report = check_solution(&design, &res.solution);
        if !report.passed() {
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            return Ok(EXIT_FAILURE);
        }
        println!("check PASS");
    }
    Ok(if r.diverged { EXIT_DIVERGED } else { 0 })
}

fn gen(a: &GenArgs) -> anyhow::Result<u8> {
    let spec = GenSpec { cells: a.cells, macros: a.macros, macro_ratio: a.macro_ratio, seed: a.seed, ..Default::default() };
    let design = gen_synthetic(&spec)?;
    let mut w = create(&a.out)?;
    write_design(&design, &mut w)?;
    w.flush()?;
    println!(
        "{} instances ({} macros), {} nets, macro area ratio {:.3}",
        design.num_instances(),
        design.macros.len(),
        design.nets.len(),
        design.macro_area_ratio()
    );
    Ok(0)
}

fn check(a: &CheckArgs) -> anyhow::Result<u8> {
    let design = load_design(&a.input)?;
    let f = File::open(&a.solution).with_context(|| format!("opening {}", a.solution.display()))?;
    let sol = read_solution(&design, BufReader::new(f))?;
    let report = check_solution(&design, &sol);
    for v in &report.violations {
        println!("violation: {v}");
    }
    if let Some(s) = report.score {
        println!("hpwl {:.1}  hbts {}  raw score {:.1}", s.hpwl, s.hbt_count, s.raw_score);
    }
    if report.passed() {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL ({} violations)", report.violations.len());
        Ok(EXIT_FAILURE)
    }
}
