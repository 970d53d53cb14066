use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cvmaps::config::StateSpec;
use cvmaps::figures::{self, Figure, Layout, Rendered};
use cvmaps::fock::{grid_integral, wigner_of, QuadratureGrid, WignerField};
use cvmaps::io::{wigner_csv, DensityRecord, TensorRecord};
use cvmaps::map::{apply, success_probability};
use cvmaps::transfer::{apply_kernel, kernel_from_tensor, TransferKernel};
use cvmaps::verify::{self, Fault, Options};
use serde::Serialize;

mod config;

use config::{Format, GridSpec, ProfileSpec, RunFile, SchemaError};

#[derive(Parser)]
#[command(name = "cvmaps", version, about = "Process tensors and phase-space transfer kernels of heralded optical maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonal slice F^{m,m}_{k,k} of a model's process tensor.
    Tensor {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Radial kernel slices f(r', r, theta), or a profile along r' - r.
    Kernel {
        #[command(flatten)]
        io: IoArgs,
        /// Comma-separated angles.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        /// Radial range "rmin,rmax,n" shared by r and r'.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Profile "sum,half_width,n" at fixed r + r'.
        #[arg(long, conflicts_with = "grid")]
        profile: Option<String>,
    },
    /// Applies a model to an input state.
    Apply {
        #[command(flatten)]
        io: IoArgs,
        /// State JSON, inline or as a file path.
        #[arg(long)]
        state: Option<String>,
        /// Quadrature grid "xmin,xmax,n" for Wigner output and the kernel path.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, value_enum, default_value = "both")]
        path: ApplyPath,
    },
    /// Runs the acceptance checks.
    Verify {
        /// Summary JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Subset of criteria, comma-separated.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
        /// Fail on known limitations too.
        #[arg(long)]
        strict: bool,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Renders the figure catalog, or writes its run files.
    Figures {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated figure ids.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Write one run file per figure instead of rendering.
        #[arg(long)]
        configs: bool,
    },
}

#[derive(clap::Args)]
struct IoArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ApplyPath {
    Tensor,
    Kernel,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    AttenuationSign,
}

enum Failure {
    Schema(String),
    Lib(cvmaps::Error),
    Checks,
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e.0)
    }
}

impl From<cvmaps::Error> for Failure {
    fn from(e: cvmaps::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn exit_code(f: &Failure) -> u8 {
    use cvmaps::Error::*;
    match f {
        Failure::Schema(_) => 2,
        Failure::Lib(Validation(_) | Parameter(_) | Cutoff { .. }) => 2,
        Failure::Lib(Unphysical(_)) => 3,
        Failure::Lib(NotPhaseInvariant(_)) => 4,
        Failure::Lib(_) | Failure::Checks => 1,
    }
}

fn triple(s: &str, what: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::Schema(format!("{what} must be \"a,b,n\", got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a = parts[0].parse().map_err(|_| bad())?;
    let b = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    Ok((a, b, n))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(cvmaps::Error::from)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct RadialJson<'a> {
    theta: &'a [f64],
    r: &'a [f64],
    r_prime: &'a [f64],
    /// `[theta][r][r']`
    values: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct ProfileJson {
    r_prime_minus_r: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

fn figure_for(run: &RunFile, layout: Layout) -> Figure {
    let mut models = vec![run.model.clone()];
    if matches!(layout, Layout::Profile { .. }) {
        models.extend(run.reference.clone());
    }
    Figure { id: "", title: "", models, layout }
}

fn title_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes a rendered figure as CSV plus plot script, or as JSON.
fn emit(rendered: &Rendered, layout: &Layout, format: Format, out: &Path, title: &str) -> Result<(), Failure> {
    let stem = match rendered {
        Rendered::Diagonal { .. } => "diagonal",
        Rendered::Radial { .. } => "radial",
        Rendered::Profile { .. } => "profile",
    };
    match format {
        Format::Csv => {
            let csv_name = format!("{stem}.csv");
            write(out, &csv_name, rendered.csv())?;
            write(out, &format!("plot_{stem}.py"), &figures::plot_script(layout, &csv_name, title))
        }
        Format::Json => match rendered {
            Rendered::Diagonal { tensor, .. } => write(out, "tensor.json", &json(&TensorRecord::from_tensor(tensor))?),
            Rendered::Radial { kernel, .. } => {
                let g = &kernel.grid;
                let values = (0..g.theta.len())
                    .map(|it| (0..g.r.len()).map(|ir| (0..g.r_prime.len()).map(|irp| kernel.get(it, ir, irp)).collect()).collect())
                    .collect();
                let j = RadialJson { theta: &g.theta, r: &g.r, r_prime: &g.r_prime, values };
                write(out, "radial.json", &json(&j)?)
            }
            Rendered::Profile { columns, .. } => {
                let names: &[&str] = if columns.len() == 2 { &["experimental", "ideal"] } else { &["value"] };
                let j = ProfileJson {
                    r_prime_minus_r: columns[0].iter().map(|p| p.0).collect(),
                    columns: names.iter().zip(columns).map(|(n, c)| (n.to_string(), c.iter().map(|p| p.1).collect())).collect(),
                };
                write(out, "profile.json", &json(&j)?)
            }
        },
    }
}

fn cmd_tensor(io: &IoArgs) -> Result<(), Failure> {
    let run = config::load(&io.config)?;
    let fig = figure_for(&run, Layout::Diagonal);
    let rendered = figures::render(&fig)?;
    emit(&rendered, &fig.layout, io.format.or(run.format).unwrap_or(Format::Csv), &io.out, &title_of(&io.config))
}

fn cmd_kernel(io: &IoArgs, theta: Option<Vec<f64>>, grid: Option<String>, profile: Option<String>) -> Result<(), Failure> {
    let run = config::load(&io.config)?;
    let profile = match profile {
        Some(s) => {
            let (sum, half_width, n) = triple(&s, "--profile")?;
            Some(ProfileSpec { sum, half_width, n })
        }
        None if grid.is_none() => run.profile,
        None => None,
    };
    let layout = if let Some(p) = profile {
        let theta = theta.or(run.theta.clone()).unwrap_or_else(|| vec![0.0]);
        if theta.len() != 1 {
            return Err(Failure::Schema("a profile takes exactly one theta".into()));
        }
        Layout::Profile { theta: theta[0], sum: p.sum, half_width: p.half_width, n: p.n }
    } else {
        let g = match grid {
            Some(s) => {
                let (min, max, n) = triple(&s, "--grid")?;
                GridSpec { min, max, n }
            }
            None => run.grid.unwrap_or(GridSpec { min: 0.0, max: 4.0, n: 41 }),
        };
        if !(g.min >= 0.0 && g.max > g.min && g.n >= 2) {
            return Err(Failure::Schema("radial grid needs 0 <= rmin < rmax and n >= 2".into()));
        }
        Layout::Radial { theta: theta.or(run.theta.clone()).unwrap_or_else(|| vec![0.0]), r_min: g.min, r_max: g.max, n: g.n }
    };
    let fig = figure_for(&run, layout);
    let rendered = figures::render(&fig)?;
    emit(&rendered, &fig.layout, io.format.or(run.format).unwrap_or(Format::Csv), &io.out, &title_of(&io.config))
}

#[derive(Serialize)]
struct KernelCheck {
    success_probability: f64,
    /// Largest difference between the normalized output Wigner functions of the two paths.
    max_wigner_diff: f64,
    probability_diff: f64,
}

#[derive(Serialize)]
struct ApplyReport {
    path: String,
    success_probability: f64,
    output_trace: f64,
    mean_photon_number: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_check: Option<KernelCheck>,
}

fn cmd_apply(io: &IoArgs, state: Option<String>, grid: Option<String>, path: ApplyPath) -> Result<(), Failure> {
    let run = config::load(&io.config)?;
    let state: StateSpec = match state {
        Some(s) => config::parse_state(&s)?,
        None => run.state.clone().ok_or_else(|| Failure::Schema("no input state: pass --state or set `state`".into()))?,
    };
    let qgrid = match grid {
        Some(s) => {
            let (a, b, n) = triple(&s, "--grid")?;
            QuadratureGrid::square(a, b, n)?
        }
        None => run.grid.map(|g| QuadratureGrid::square(g.min, g.max, g.n)).transpose()?.unwrap_or_default(),
    };
    let t = run.model.build()?;
    let rho = state.build(t.dim())?;
    let format = io.format.or(run.format).unwrap_or(Format::Csv);

    let tensor_out = apply(&t, &rho)?;
    let p_tensor = success_probability(&t, &rho)?;
    let kernel_out = if path != ApplyPath::Tensor {
        let k = TransferKernel::Grid(kernel_from_tensor(&t, &qgrid, &qgrid)?);
        let w = apply_kernel(&k, &wigner_of(&rho, &qgrid))?;
        let p = grid_integral(&w);
        Some((w, p))
    } else {
        None
    };
    let normalized = tensor_out.normalized()?;
    let w_tensor = wigner_of(&normalized, &qgrid);
    let scaled = |w: &WignerField, p: f64| WignerField { grid: w.grid.clone(), values: w.values.iter().map(|v| v / p).collect() };

    let (label, wigner, p) = match (&kernel_out, path) {
        (Some((w, p)), ApplyPath::Kernel) => ("kernel", scaled(w, *p), *p),
        _ => ("tensor", w_tensor.clone(), p_tensor),
    };
    let kernel_check = match (&kernel_out, path) {
        (Some((w, p)), ApplyPath::Both) => {
            Some(KernelCheck { success_probability: *p, max_wigner_diff: scaled(w, *p).max_abs_diff(&w_tensor), probability_diff: (p - p_tensor).abs() })
        }
        _ => None,
    };
    let report = ApplyReport {
        path: label.into(),
        success_probability: p,
        output_trace: tensor_out.trace(),
        mean_photon_number: normalized.mean_photon_number(),
        kernel_check,
    };
    write(&io.out, "output_state.json", &json(&DensityRecord::from_density(&normalized))?)?;
    write(&io.out, "result.json", &json(&report)?)?;
    match format {
        Format::Csv => write(&io.out, "wigner.csv", &wigner_csv(&wigner)),
        Format::Json => {
            let g = &wigner.grid;
            let v = serde_json::json!({ "x": (0..g.n_x).map(|i| g.x(i)).collect::<Vec<_>>(), "p": (0..g.n_p).map(|j| g.p(j)).collect::<Vec<_>>(), "values": wigner.values });
            write(&io.out, "wigner.json", &json(&v)?)
        }
    }
}

fn cmd_verify(out: Option<PathBuf>, criteria: Option<Vec<u8>>, strict: bool, fault: Option<FaultArg>) -> Result<(), Failure> {
    let opts = Options { fault: fault.map(|FaultArg::AttenuationSign| Fault::AttenuationSign) };
    let list: Vec<u8> = criteria.unwrap_or_else(|| verify::CRITERIA.iter().map(|(c, _)| *c).collect());
    let mut checks = vec![];
    for c in list {
        let check = verify::run_criterion(c, &opts);
        println!("{}", check.line());
        checks.push(check);
    }
    let summary = verify::summarize(checks);
    println!(
        "{} passed, {} failed, {} known limitations, {:.1}s",
        summary.passed, summary.failed, summary.known_limitations, summary.seconds
    );
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, json(&summary)?)?;
    }
    let ok = if strict { summary.checks.iter().all(|c| c.passed) } else { summary.ok };
    if ok {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn run_file_for(fig: &Figure) -> RunFile {
    let mut run = RunFile { schema_version: Some(cvmaps::config::SCHEMA_VERSION.into()), ..RunFile::bare(fig.models[0].clone()) };
    match &fig.layout {
        Layout::Diagonal => {}
        Layout::Radial { theta, r_min, r_max, n } => {
            run.theta = Some(theta.clone());
            run.grid = Some(GridSpec { min: *r_min, max: *r_max, n: *n });
        }
        Layout::Profile { theta, sum, half_width, n } => {
            run.theta = Some(vec![*theta]);
            run.profile = Some(ProfileSpec { sum: *sum, half_width: *half_width, n: *n });
            run.reference = fig.models.get(1).cloned();
        }
    }
    run
}

fn cmd_figures(out: &Path, only: Option<Vec<String>>, configs: bool) -> Result<(), Failure> {
    let figs: Vec<Figure> = match only {
        Some(ids) => ids
            .iter()
            .map(|id| figures::by_id(id).ok_or_else(|| Failure::Schema(format!("unknown figure `{id}`"))))
            .collect::<Result<_, _>>()?,
        None => figures::catalog(),
    };
    for fig in figs {
        if configs {
            write(out, &format!("{}.json", fig.id), &json(&run_file_for(&fig))?)?;
            continue;
        }
        let rendered = figures::render(&fig)?;
        emit(&rendered, &fig.layout, Format::Csv, &out.join(fig.id), fig.title)?;
        let args = figures::cli_args(&fig).join(" ");
        println!("{}: {} bytes, same as `cvmaps {args} --config configs/{}.json`", fig.id, rendered.csv().len(), fig.id);
    }
    Ok(())
}

fn init_threads() {
    if let Some(n) = std::env::var("CVMAPS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Tensor { io } => cmd_tensor(&io),
        Command::Kernel { io, theta, grid, profile } => cmd_kernel(&io, theta, grid, profile),
        Command::Apply { io, state, grid, path } => cmd_apply(&io, state, grid, path),
        Command::Verify { out, criteria, strict, inject_fault } => cmd_verify(out, criteria, strict, inject_fault),
        Command::Figures { out, only, configs } => cmd_figures(&out, only, configs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Schema(m) => eprintln!("error: invalid configuration: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Checks => eprintln!("error: verification failed"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
