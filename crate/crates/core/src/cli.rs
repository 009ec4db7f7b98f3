//! Command-line front end: `estimate`, `gen`, `centers`, `verify`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::complex::Budget;
use crate::datagen::{self, Axis, Manifest};
use crate::geometry::{build_neighborhood_graph, component_centers, PointCloud};
use crate::pipeline::{
    estimate_dimension, parameter_schedule, repeated_center_estimate, BaseSelection,
    EstimateOptions, ParamSchedule, RepeatedCenterReport,
};
use crate::verify::run_oracle_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_ESTIMATE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "localdim",
    version,
    about = "Local homology dimension estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the dimension of a point cloud read from CSV.
    Estimate(Box<EstimateArgs>),
    /// Generate a synthetic corpus as CSV.
    Gen {
        #[command(subcommand)]
        generator: Generator,
        #[command(flatten)]
        out: GenOutput,
    },
    /// Print graph-center base points, one index per line.
    Centers(CentersArgs),
    /// Compare both image-rank routes on random small instances.
    Verify {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Check manual scales against the offset-level conditions (needs --epsilon).
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Input CSV; standard input when absent.
    input: Option<PathBuf>,
    /// Skip the first line of the input.
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// sparse:<min_dist> | centers:<edge_len>,<min_size> | all | list:<file>
    #[arg(long, default_value = "all")]
    base: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum simplices per base point.
    #[arg(long)]
    budget: Option<usize>,
    /// Maximum vertices per base point.
    #[arg(long)]
    vertex_budget: Option<usize>,
    /// JSON report path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV path.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    truth: Option<usize>,
    /// Repeated-center mode: number of random subsamples per base point.
    #[arg(long)]
    trials: Option<usize>,
    /// Subsample size in repeated-center mode.
    #[arg(long, default_value_t = 100)]
    subsample: usize,
    /// Record wall-clock times in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct GenOutput {
    /// CSV path; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Manifest JSON path; defaults to `<out>.manifest.json` when --out is given.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Generator {
    /// Greedy epsilon-net of a cap of the unit n-sphere.
    SphereCap {
        #[arg(short = 'n', long)]
        n: usize,
        #[arg(long)]
        cap_angle: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Translated white rectangle in a black image.
    Shift {
        #[arg(long, default_value_t = 60)]
        image_w: usize,
        #[arg(long, default_value_t = 84)]
        image_h: usize,
        #[arg(long, default_value_t = 21)]
        patch_w: usize,
        #[arg(long, default_value_t = 29)]
        patch_h: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Flat torus in R^4 on a periodic grid with ball noise.
    Torus {
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct CentersArgs {
    input: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    edge_len: f64,
    #[arg(long, default_value_t = 1)]
    min_size: usize,
}

/// Runs the command line with the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    run_with_io(args, &mut input, &mut out, &mut err)
}

pub fn run_with_io<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(*a, stdin, stdout, stderr),
        Command::Gen { generator, out } => generate(generator, out, stdout),
        Command::Centers(a) => centers(a, stdin, stdout),
        Command::Verify { trials, seed } => verify(trials, seed, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}

type CliResult = Result<i32, String>;

fn read_cloud(
    path: Option<&Path>,
    header: bool,
    stdin: &mut dyn BufRead,
) -> Result<PointCloud, String> {
    let cloud = match path {
        Some(p) => {
            let f = File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
            PointCloud::parse(BufReader::new(f), header)
        }
        None => PointCloud::parse(stdin, header),
    }
    .map_err(|e| e.to_string())?;
    if cloud.is_empty() {
        return Err("no points".into());
    }
    Ok(cloud)
}

fn build_schedule(s: &ScheduleArgs) -> Result<ParamSchedule, String> {
    let manual = s.eta1.is_some() || s.eta2.is_some() || s.r.is_some();
    if manual && s.rho.is_some() {
        return Err("--rho conflicts with the manual scales --eta1/--eta2/--r".into());
    }
    let schedule = if manual {
        let (Some(alpha), Some(eta1), Some(eta2), Some(r)) = (s.alpha, s.eta1, s.eta2, s.r) else {
            return Err("manual scales need all of --alpha --eta1 --eta2 --r".into());
        };
        if s.relaxed {
            let eps = s.epsilon.ok_or("--relaxed needs --epsilon")?;
            ParamSchedule::relaxed(eps, alpha, eta1, eta2, r, s.kmax)
        } else if s.epsilon.is_some() {
            return Err("--epsilon with manual scales needs --relaxed".into());
        } else {
            ParamSchedule::manual(alpha, eta1, eta2, r, s.kmax)
        }
    } else {
        if s.relaxed {
            return Err("--relaxed needs the manual scales".into());
        }
        let (Some(rho), Some(eps)) = (s.rho, s.epsilon) else {
            return Err("give --rho and --epsilon, or --alpha --eta1 --eta2 --r".into());
        };
        parameter_schedule(eps, rho, s.alpha).map(|p| p.with_k_max(s.kmax))
    };
    schedule.map_err(|e| e.to_string())
}

fn parse_base(spec: &str, seed: u64) -> Result<BaseSelection, String> {
    let bad = || format!("bad --base value '{spec}'");
    if spec == "all" {
        return Ok(BaseSelection::All);
    }
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "sparse" => {
            let min_dist: f64 = rest.parse().map_err(|_| bad())?;
            Ok(BaseSelection::Sparse { min_dist, seed })
        }
        "centers" => {
            let (e, m) = rest.split_once(',').ok_or_else(bad)?;
            Ok(BaseSelection::Centers {
                edge_len: e.trim().parse().map_err(|_| bad())?,
                min_size: m.trim().parse().map_err(|_| bad())?,
            })
        }
        "list" => {
            let text = std::fs::read_to_string(rest).map_err(|e| format!("{rest}: {e}"))?;
            let list = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| format!("{rest}: bad index '{t}'"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(BaseSelection::List(list))
        }
        _ => Err(bad()),
    }
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

#[derive(Serialize)]
struct RepeatedReport<'a> {
    schedule: &'a ParamSchedule,
    centers: Vec<RepeatedCenterReport>,
}

fn estimate(
    a: EstimateArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult {
    let schedule = build_schedule(&a.schedule)?;
    let strategy = parse_base(&a.base, a.seed)?;
    let cloud = read_cloud(a.input.as_deref(), a.header, stdin)?;
    let mut budget = Budget::default();
    if let Some(b) = a.budget {
        budget.max_simplices = b;
    }
    if let Some(v) = a.vertex_budget {
        budget.max_vertices = v;
    }

    if let Some(trials) = a.trials {
        let bases = strategy.select(&cloud).map_err(|e| e.to_string())?;
        let centers = bases
            .iter()
            .map(|&c| {
                repeated_center_estimate(&cloud, &schedule, c, a.subsample, trials, a.seed, budget)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let any = centers.iter().any(|c| c.estimated_dimension.is_some());
        let json = serde_json::to_string_pretty(&RepeatedReport {
            schedule: &schedule,
            centers,
        })
        .expect("report serializes");
        emit(&(json + "\n"), a.out.as_deref(), stdout)?;
        return Ok(if any { EXIT_OK } else { EXIT_NO_ESTIMATE });
    }

    let options = EstimateOptions {
        budget,
        truth: a.truth,
        record_timings: a.timings,
    };
    let report =
        estimate_dimension(&cloud, &schedule, &strategy, options).map_err(|e| e.to_string())?;
    emit(&(report.to_json() + "\n"), a.out.as_deref(), stdout)?;
    if let Some(p) = &a.summary {
        let f = File::create(p).map_err(|e| format!("{}: {e}", p.display()))?;
        report
            .write_summary_csv(io::BufWriter::new(f))
            .map_err(|e| e.to_string())?;
    }
    if report.has_estimate() {
        Ok(EXIT_OK)
    } else {
        let why = if report.ambiguous {
            "tie between sphere dimensions"
        } else {
            "no base point classified as a sphere"
        };
        let _ = writeln!(stderr, "no estimate: {why}");
        Ok(EXIT_NO_ESTIMATE)
    }
}

fn generate(g: Generator, out: GenOutput, stdout: &mut dyn Write) -> CliResult {
    let (cloud, name, params, seed) = match g {
        Generator::SphereCap {
            n,
            cap_angle,
            epsilon,
            seed,
        } => (
            datagen::sphere_cap(n, cap_angle, epsilon, seed),
            "sphere-cap",
            serde_json::json!({"n": n, "cap_angle": cap_angle, "epsilon": epsilon}),
            Some(seed),
        ),
        Generator::Shift {
            image_w,
            image_h,
            patch_w,
            patch_h,
            stride,
        } => (
            datagen::shift_images(image_w, image_h, patch_w, patch_h, stride),
            "shift",
            serde_json::json!({
                "image_w": image_w, "image_h": image_h,
                "patch_w": patch_w, "patch_h": patch_h, "stride": stride
            }),
            None,
        ),
        Generator::Torus { steps, noise, seed } => {
            let axis = Axis {
                start: 0.0,
                end: std::f64::consts::TAU,
                steps,
                periodic: true,
            };
            (
                datagen::parametric_noisy(datagen::flat_torus, &[axis, axis], noise, seed),
                "torus",
                serde_json::json!({"steps": steps, "noise": noise}),
                Some(seed),
            )
        }
    };
    let cloud = cloud.map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    datagen::write_csv(&cloud, &mut csv).map_err(|e| e.to_string())?;
    let manifest = Manifest {
        generator: name.into(),
        params,
        seed,
        points: cloud.len(),
        dim: cloud.dim(),
    };
    let manifest_path = out.manifest.clone().or_else(|| {
        out.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    match &out.out {
        Some(p) => std::fs::write(p, &csv).map_err(|e| format!("{}: {e}", p.display()))?,
        None => stdout.write_all(&csv).map_err(|e| e.to_string())?,
    }
    if let Some(p) = manifest_path {
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&p, text + "\n").map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(EXIT_OK)
}

fn centers(a: CentersArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> CliResult {
    let cloud = read_cloud(a.input.as_deref(), a.header, stdin)?;
    let graph = build_neighborhood_graph(&cloud, a.edge_len).map_err(|e| e.to_string())?;
    for c in component_centers(&graph, a.min_size) {
        writeln!(stdout, "{c}").map_err(|e| e.to_string())?;
    }
    Ok(EXIT_OK)
}

fn verify(trials: usize, seed: u64, stdout: &mut dyn Write) -> CliResult {
    let summary = run_oracle_suite(trials, seed);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    writeln!(stdout, "{json}").map_err(|e| e.to_string())?;
    Ok(if summary.all_agree() {
        EXIT_OK
    } else {
        EXIT_NO_ESTIMATE
    })
}
