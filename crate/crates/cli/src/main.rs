use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use subdiff::commands::{self, MeshSpec, ReproduceOptions};
use subdiff::config::{parse_steps, Rational, RunConfig, SchemeName, SpatialName};
use subdiff::presets::{preset, Preset};
use subdiff::{exit, exit_code};
use subdiff_core::analysis::SpatialGuard;
use subdiff_core::kernels::{KernelTable, Scheme};

#[derive(Parser, Debug)]
#[command(name = "subdiff", version, about = "Nonuniform L1 / FracCN solvers for reaction-subdiffusion problems")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Temporal convergence study for one of the built-in examples.
    Convergence(ConvergenceArgs),
    /// Reruns a published table (1-8) or the spatial-order study (9).
    Reproduce(ReproduceArgs),
    /// Kernel assumption checks, complementary identity and bound margins.
    Kernels(KernelsArgs),
    /// Builds a time mesh and prints its diagnostics.
    Mesh(MeshArgs),
    /// Solves an example once and reports its error.
    Solve(SolveArgs),
    /// Stability threshold, step restriction and stability bound for an example.
    Bounds(SolveArgs),
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    #[arg(long)]
    example: Option<u8>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Grading exponent, decimal or ratio such as 5/3.
    #[arg(long)]
    gamma: Option<Rational>,
    /// Comma-separated, doubling step counts.
    #[arg(long = "N", value_name = "LIST")]
    steps: Option<String>,
    /// Spatial intervals (initial value when the guard is on).
    #[arg(long = "M")]
    intervals: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    graded_span: Option<f64>,
    #[arg(long, value_enum)]
    spatial: Option<SpatialName>,
    /// Disable the spatial guard.
    #[arg(long)]
    no_guard: bool,
    #[arg(long)]
    guard_max: Option<usize>,
    #[arg(long)]
    guard_tolerance: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for convergence.csv, convergence.md and the effective config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Table id, 1-9.
    #[arg(long)]
    table: u8,
    #[arg(long = "M", default_value_t = 2048)]
    intervals: usize,
    #[arg(long, value_enum, default_value_t = SpatialName::Extrapolated)]
    spatial: SpatialName,
    #[arg(long)]
    no_guard: bool,
    /// Override the preset step counts.
    #[arg(long = "N", value_name = "LIST")]
    steps: Option<String>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeshKind {
    Graded,
    Uniform,
    Random,
    Custom,
}

#[derive(Args, Debug)]
struct MeshFlags {
    #[arg(long, value_enum, default_value_t = MeshKind::Graded)]
    mesh: MeshKind,
    #[arg(long, default_value = "1")]
    gamma: Rational,
    #[arg(long = "N", default_value_t = 64)]
    steps: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,
    /// Length of the graded phase.
    #[arg(long = "T0")]
    graded_span: Option<f64>,
    /// Ratio bound for random meshes.
    #[arg(long, default_value_t = 1.75)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time levels for a custom mesh (comma or whitespace separated).
    #[arg(long)]
    times: Option<PathBuf>,
}

impl MeshFlags {
    fn spec(&self) -> Result<MeshSpec> {
        Ok(match self.mesh {
            MeshKind::Graded => MeshSpec::Graded {
                gamma: self.gamma.value(),
                steps: self.steps,
                t_final: self.t_final,
                span: self.graded_span,
            },
            MeshKind::Uniform => MeshSpec::Uniform {
                steps: self.steps,
                t_final: self.t_final,
            },
            MeshKind::Random => MeshSpec::Random {
                steps: self.steps,
                rho: self.rho,
                seed: self.seed,
                t_final: self.t_final,
            },
            MeshKind::Custom => {
                let path = self.times.as_ref().context("--mesh custom needs --times FILE")?;
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                MeshSpec::Custom(commands::read_times(&text)?)
            }
        })
    }
}

#[derive(Args, Debug)]
struct KernelsArgs {
    #[arg(long, value_enum)]
    scheme: SchemeName,
    #[arg(long)]
    alpha: f64,
    #[command(flatten)]
    mesh: MeshFlags,
    /// Write kernel row n as CSV to stdout instead of the diagnostics.
    #[arg(long)]
    dump_row: Option<usize>,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    mesh: MeshFlags,
    /// Ratio bound used by the diagnostics.
    #[arg(long, default_value_t = 1.75)]
    rho_bound: f64,
    /// Write the mesh as CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_enum)]
    scheme: SchemeName,
    #[arg(long)]
    example: u8,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    mesh: MeshFlags,
    #[arg(long = "M", default_value_t = 256)]
    intervals: usize,
    /// Write the final level as CSV to this file (solve only).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn merged_config(a: &ConvergenceArgs) -> Result<RunConfig> {
    let base = a.config.as_deref().map(RunConfig::load).transpose()?;
    macro_rules! pick {
        ($flag:expr, $field:ident, $name:literal) => {
            match ($flag, base.as_ref()) {
                (Some(v), _) => v,
                (None, Some(b)) => b.$field.clone(),
                (None, None) => bail!(concat!("missing --", $name, " (or a config file)")),
            }
        };
    }
    let steps = a.steps.as_deref().map(parse_steps).transpose()?;
    let mut guard = base.as_ref().map(|b| b.guard.clone()).unwrap_or_default();
    if a.no_guard {
        guard.enabled = false;
    }
    if let Some(m) = a.guard_max {
        guard.max_intervals = m;
    }
    if let Some(t) = a.guard_tolerance {
        guard.tolerance = t;
    }
    let cfg = RunConfig {
        scheme: pick!(a.scheme, scheme, "scheme"),
        example: pick!(a.example, example, "example"),
        alpha: pick!(a.alpha, alpha, "alpha"),
        sigma: pick!(a.sigma, sigma, "sigma"),
        gamma: pick!(a.gamma.clone(), gamma, "gamma"),
        steps: pick!(steps, steps, "N"),
        intervals: a.intervals.or(base.as_ref().map(|b| b.intervals)).unwrap_or(2048),
        t_final: a.t_final.or(base.as_ref().map(|b| b.t_final)).unwrap_or(1.0),
        graded_span: a.graded_span.or(base.as_ref().and_then(|b| b.graded_span)),
        guard,
        spatial: a.spatial.or(base.as_ref().map(|b| b.spatial)).unwrap_or_default(),
        threads: a.threads.or(base.as_ref().map(|b| b.threads)).unwrap_or(1),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<File> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    File::create(&path).with_context(|| format!("creating {}", path.display()))
}

fn run_convergence(a: &ConvergenceArgs) -> Result<()> {
    let cfg = merged_config(a)?;
    let report = commands::convergence(&cfg)?;
    let md = commands::convergence_markdown(&report);
    print!("{md}");
    if let Some(dir) = &a.out {
        commands::convergence_csv(&report, create(dir, "convergence.csv")?)?;
        create(dir, "convergence.md")?.write_all(md.as_bytes())?;
        create(dir, "config.json")?.write_all(cfg.to_json()?.as_bytes())?;
    }
    Ok(())
}

fn run_reproduce(a: &ReproduceArgs) -> Result<()> {
    let Some(p) = preset(a.table) else {
        bail!("unknown table {}; valid ids are 1-9", a.table);
    };
    let pool = commands::build_pool(a.threads)?;
    match p {
        Preset::Temporal(t) => {
            let opts = ReproduceOptions {
                intervals: a.intervals,
                guard: SpatialGuard {
                    enabled: !a.no_guard,
                    ..SpatialGuard::default()
                },
                spatial: a.spatial.into(),
                steps: a.steps.as_deref().map(parse_steps).transpose()?,
            };
            let result = commands::reproduce_table(&t, &opts, &pool)?;
            let md = commands::table_markdown(&result);
            print!("{md}");
            if let Some(dir) = &a.out {
                commands::table_csv(&result, create(dir, &format!("table{}.csv", t.id))?)?;
                create(dir, &format!("table{}.md", t.id))?.write_all(md.as_bytes())?;
            }
        }
        Preset::Spatial(s) => {
            let result = commands::reproduce_spatial(&s, &pool)?;
            let md = commands::spatial_markdown(&result);
            print!("{md}");
            if let Some(dir) = &a.out {
                commands::spatial_csv(&result, create(dir, &format!("table{}.csv", s.id))?)?;
                create(dir, &format!("table{}.md", s.id))?.write_all(md.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn run_kernels(a: &KernelsArgs) -> Result<()> {
    let mesh = a.mesh.spec()?.build()?;
    let table = KernelTable::build(&mesh, Scheme::from(a.scheme), a.alpha)?;
    if let Some(n) = a.dump_row {
        return commands::kernel_row_csv(&table, n, io::stdout().lock());
    }
    let d = commands::kernel_diagnostics(&table, &mesh)?;
    print!("{}", commands::kernel_text(&d));
    Ok(())
}

fn run_mesh(a: &MeshArgs) -> Result<()> {
    let (mesh, report) = commands::mesh_report(&a.mesh.spec()?, a.rho_bound)?;
    print!("{}", commands::mesh_text(&mesh, &report));
    if let Some(path) = &a.out {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        commands::mesh_csv(&mesh, f)?;
    }
    Ok(())
}

fn run_solve(a: &SolveArgs) -> Result<()> {
    let mesh = a.mesh.spec()?.build()?;
    let s = commands::solve_example(a.scheme.into(), a.example, a.alpha, a.sigma, &mesh, a.intervals)?;
    println!("final time: {}", s.final_time);
    println!("max H1 error: {}", subdiff::format::sci17(s.max_error));
    println!("final H1 error: {}", subdiff::format::sci17(s.final_error));
    println!(
        "step restriction: {} (tau_max {} vs {})",
        if s.restriction.satisfied { "satisfied" } else { "violated" },
        subdiff::format::sci3(s.restriction.tau_max),
        subdiff::format::sci3(s.restriction.threshold)
    );
    if let Some(path) = &a.out {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        commands::solution_csv(&s, f)?;
    }
    Ok(())
}

fn run_bounds(a: &SolveArgs) -> Result<()> {
    let mesh = a.mesh.spec()?.build()?;
    let b = commands::bounds(a.scheme.into(), a.example, a.alpha, a.sigma, &mesh, a.intervals)?;
    print!("{}", commands::bounds_text(&b));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    // per-solve step-restriction warnings repeat on every run of a study; show them with -v
    let level = match cli.verbose {
        0 => "warn,subdiff_core::solver=error",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Convergence(a) => run_convergence(a),
        Command::Reproduce(a) => run_reproduce(a),
        Command::Kernels(a) => run_kernels(a),
        Command::Mesh(a) => run_mesh(a),
        Command::Solve(a) => run_solve(a),
        Command::Bounds(a) => run_bounds(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
