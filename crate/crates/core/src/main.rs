use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stocp::adaptivity::adapt_loop_with;
use stocp::analysis::{l2_error, run_study_with, state_norm, StudyRow};
use stocp::config::{parse_config, ExperimentConfig, OutputFormat, StudyKind};
use stocp::dofmap::{DofMap, SpaceRole};
use stocp::linalg::norm2;
use stocp::mesh::BoundaryTag;
use stocp::output::{self, Provenance};
use stocp::vtk;
use stocp::{Error, Mesh, OcpProblem};

#[derive(Parser)]
#[command(name = "stocp", version, about = "Space-time optimal control with energy regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study on uniform Kuhn meshes.
    Study(RunArgs),
    /// Noise study with h = 16 delta^2.
    Noise(RunArgs),
    /// Adaptive refinement loop.
    Adapt(RunArgs),
    /// Single solve on one Kuhn mesh.
    Solve(RunArgs),
    /// Print mesh statistics.
    MeshInfo(MeshInfoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Gnuplot,
    Vtk,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Gnuplot => OutputFormat::Gnuplot,
            FormatArg::Vtk => OutputFormat::Vtk,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores (overrides `threads`).
    #[arg(long)]
    threads: Option<usize>,
    /// Output format; repeat for several (overrides `formats`).
    #[arg(long = "format", value_enum)]
    formats: Vec<FormatArg>,
    /// Adaptive budget (overrides `max_dofs`).
    #[arg(long)]
    max_dofs: Option<usize>,
    /// Drop levels with more cells per axis than this.
    #[arg(long)]
    max_cells: Option<usize>,
}

#[derive(Args)]
struct MeshInfoArgs {
    /// Take `dimension` and `cells` from a config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    cells: usize,
}

enum Failure {
    Config(String),
    NotConverged(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnsupportedDimension(_) => Failure::Config(e.to_string()),
            Error::NotConverged(_) => Failure::NotConverged(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study(a) => run(a, StudyKind::Convergence),
        Command::Noise(a) => run(a, StudyKind::Noise),
        Command::Adapt(a) => run(a, StudyKind::Adaptive),
        Command::Solve(a) => run(a, StudyKind::Solve),
        Command::MeshInfo(a) => mesh_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs, kind: StudyKind) -> Result<(), Failure> {
    if cfg.kind != kind {
        log::info!("config kind '{:?}' replaced by the subcommand", cfg.kind);
        cfg.kind = kind;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if !args.formats.is_empty() {
        let mut f: Vec<OutputFormat> = args.formats.iter().map(|&f| f.into()).collect();
        f.sort();
        f.dedup();
        cfg.formats = f;
    }
    if let Some(n) = args.max_dofs {
        cfg.max_dofs = n;
    }
    if let Some(cap) = args.max_cells {
        cfg.levels.retain(|&m| m <= cap);
        cfg.deltas.retain(|&d| stocp::analysis::noise_level_cells(d).is_ok_and(|m| m <= cap));
        cfg.cells = cfg.cells.min(cap);
    }
    // revalidate the merged configuration
    Ok(cfg.clone_from(&parse_config(&cfg.serialize())?))
}

fn out_file(cfg: &ExperimentConfig, ext: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("{}.{ext}", cfg.name));
    Ok(BufWriter::new(File::create(path)?))
}

fn run(args: RunArgs, kind: StudyKind) -> Result<(), Failure> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args, kind)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    pool.install(|| match kind {
        StudyKind::Convergence | StudyKind::Noise => cmd_study(&cfg),
        StudyKind::Adaptive => cmd_adapt(&cfg),
        StudyKind::Solve => cmd_solve(&cfg),
    })
}

fn study_status(rows: &[StudyRow]) -> Result<(), Failure> {
    if let Some(r) = rows.iter().find(|r| r.failure.is_none() && !r.converged) {
        return Err(Failure::NotConverged(format!("solver did not converge on level {}", r.level)));
    }
    if let Some(r) = rows.iter().find(|r| r.failure.is_some()) {
        let msg = format!("level {} failed: {}", r.level, r.failure.as_deref().unwrap_or(""));
        return Err(if msg.contains("did not converge") { Failure::NotConverged(msg) } else { Failure::Runtime(msg) });
    }
    Ok(())
}

fn cmd_study(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let study = cfg.study_config();
    let rows = run_study_with(&study, |r| {
        log::info!("level {} (m = {}): error {:.4e}", r.level, r.m, r.error_l2);
    })?;
    print!("{}", output::study_table(&rows));
    let prov = Provenance::new(if cfg.kind == StudyKind::Noise { "noise" } else { "study" }, cfg.serialize());
    for f in &cfg.formats {
        match f {
            OutputFormat::Csv => output::write_study_csv(&rows, &mut out_file(cfg, "csv")?)?,
            OutputFormat::Json => output::write_json(&prov, &rows, &mut out_file(cfg, "json")?)?,
            OutputFormat::Gnuplot => output::write_study_gnuplot(&rows, &mut out_file(cfg, "dat")?)?,
            OutputFormat::Vtk => {
                let m = rows.iter().map(|r| r.m).max().unwrap_or(1);
                let mesh = Mesh::kuhn(cfg.dimension, m)?;
                vtk::write_vtk(&mesh, &cfg.name, &[], &[], &mut out_file(cfg, "vtk")?)?;
            }
        }
    }
    study_status(&rows)
}

fn cmd_adapt(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let state = adapt_loop_with(&cfg.adapt_config(), |l| {
        log::info!("adaptive level {}: {} unknowns, error {:.4e}", l.level, l.dofs_total, l.error_l2);
    })?;
    print!("{}", output::adapt_table(&state.levels, cfg.dimension));
    let prov = Provenance::new("adapt", cfg.serialize());
    for f in &cfg.formats {
        match f {
            OutputFormat::Csv => output::write_adapt_csv(&state.levels, cfg.dimension, &mut out_file(cfg, "csv")?)?,
            OutputFormat::Json => output::write_json(&prov, &state.levels, &mut out_file(cfg, "json")?)?,
            OutputFormat::Gnuplot => output::write_adapt_gnuplot(&state.levels, &mut out_file(cfg, "dat")?)?,
            OutputFormat::Vtk => {
                let cells = if state.final_indicators.len() == state.final_mesh.n_simplices() {
                    vec![("eta_sq".to_string(), state.final_indicators.clone())]
                } else {
                    Vec::new()
                };
                vtk::write_vtk(&state.final_mesh, &cfg.name, &[], &cells, &mut out_file(cfg, "vtk")?)?;
            }
        }
    }
    if let Some(f) = state.failure {
        return Err(if f.contains("did not converge") { Failure::NotConverged(f) } else { Failure::Runtime(f) });
    }
    Ok(())
}

fn cmd_solve(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let start = std::time::Instant::now();
    let mesh = Mesh::kuhn(cfg.dimension, cfg.cells)?;
    let audit_passed = cfg.audit.then(|| mesh.audit().is_ok());
    let h_diameter = mesh.h_max();
    let rho = cfg.solve_rho();
    let target = cfg.target_spec()?;
    let problem = OcpProblem::build(mesh, rho, target.clone(), &cfg.load)?;
    let sol = problem.solve(&cfg.solver)?;
    let clean = target.clean();
    let error_l2 = l2_error(problem.mesh(), problem.dof_x(), &sol.u, &clean, &cfg.error)?;
    let norm_u = state_norm(&problem, &sol)?;
    let target_norm = clean.l2_norm().unwrap_or(f64::NAN);
    let row = StudyRow {
        level: 0,
        m: cfg.cells,
        h: 1.0 / cfg.cells as f64,
        h_diameter,
        rho,
        delta: matches!(cfg.target.as_str(), "noisy" | "noisy_indicator").then_some(cfg.delta),
        dofs_total: problem.n_unknowns(),
        dofs_x: problem.dof_x().len(),
        dofs_y: problem.dof_y().len(),
        error_l2,
        eoc: None,
        state_norm: norm_u,
        target_norm,
        stable: norm_u <= target_norm && error_l2 <= target_norm,
        audit_passed,
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        true_relative_residual: sol.report.true_relative_residual,
        solve_time_s: sol.report.wall_time_s,
        wall_time_s: start.elapsed().as_secs_f64(),
        failure: None,
    };
    let rows = [row];
    print!("{}", output::study_table(&rows));
    println!(
        "method {}  true residual {:.2e}  ||u_h|| {:.4e}  ||z_dual||_2 {:.4e}",
        sol.method,
        sol.report.true_relative_residual,
        norm_u,
        norm2(&sol.z_dual)
    );
    let prov = Provenance::new("solve", cfg.serialize());
    for f in &cfg.formats {
        match f {
            OutputFormat::Csv => output::write_study_csv(&rows, &mut out_file(cfg, "csv")?)?,
            OutputFormat::Json => output::write_json(&prov, &rows, &mut out_file(cfg, "json")?)?,
            OutputFormat::Gnuplot => output::write_study_gnuplot(&rows, &mut out_file(cfg, "dat")?)?,
            OutputFormat::Vtk => {
                let fields = vtk::solution_fields(&problem, &sol)?;
                vtk::write_vtk(problem.mesh(), &cfg.name, &fields, &[], &mut out_file(cfg, "vtk")?)?;
            }
        }
    }
    study_status(&rows)
}

fn mesh_info(args: MeshInfoArgs) -> Result<(), Failure> {
    let (dim, cells) = match &args.config {
        Some(path) => {
            let cfg = load_config(path)?;
            (cfg.dimension, cfg.cells)
        }
        None => (args.dim, args.cells),
    };
    if cells == 0 {
        return Err(Failure::Config("cells must be positive".into()));
    }
    let mesh = Mesh::kuhn(dim, cells)?;
    let tags = mesh.facet_tags()?;
    let audit = mesh.audit();
    let mut out = std::io::stdout().lock();
    let name = ["", "", "triangles", "tetrahedra", "pentatopes"][dim];
    writeln!(out, "Kuhn mesh d = {dim}, m = {cells}")?;
    writeln!(out, "vertices            {}", mesh.n_vertices())?;
    writeln!(out, "{name:<20}{}", mesh.n_simplices())?;
    writeln!(out, "h (axis)            {:e}", mesh.h_axis_min())?;
    writeln!(out, "h (diameter)        {:e}", mesh.h_max())?;
    writeln!(out, "min quality         {:.6}", mesh.min_quality())?;
    writeln!(out, "volume sum          {:.15}", mesh.total_volume())?;
    for tag in [BoundaryTag::Lateral, BoundaryTag::Initial, BoundaryTag::Terminal] {
        writeln!(out, "{:<20}{}", format!("{tag:?} facets").to_lowercase(), tags.count(tag))?;
    }
    writeln!(out, "state unknowns      {}", DofMap::new(&mesh, SpaceRole::X).len())?;
    writeln!(out, "adjoint unknowns    {}", DofMap::new(&mesh, SpaceRole::Y).len())?;
    match audit {
        Ok(a) => writeln!(out, "audit               passed ({} interior facets)", a.interior_facets)?,
        Err(e) => writeln!(out, "audit               FAILED: {e}")?,
    }
    Ok(())
}
