use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use nlbv::cheeger::{certificate_check, cheeger_solve};
use nlbv::energy::{k_perimeter, k_variation};
use nlbv::fidelity::{lambda_grid, sweep, write_sweep_csv, SweepDatum};
use nlbv::func::{FuncSolver, Stacking};
use nlbv::geom::GeomSolver;
use nlbv::grid::{DiscreteFunction, DiscreteSet, Exterior, GridDomain, WeightMeasure};
use nlbv::kernel::{check_assumptions, Kernel, KernelFamily, KernelSpec, KernelTable};
use nlbv::pnm;
use nlbv::verify::{run_suite, write_csv, Suite, VerifyConfig};

/// Non-local BV energies, exact TV-L1 denoising and Cheeger sets on pixel grids.
#[derive(Parser, Debug)]
#[command(name = "nlbv", version, about)]
pub struct Cli {
    /// JSON file supplying defaults for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (NLBV_THREADS takes precedence)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the structural report of a kernel as JSON
    KernelInfo {
        #[arg(long)]
        kernel: Option<PathBuf>,
        /// Smallest probe radius
        #[arg(long)]
        probe_min: Option<f64>,
        /// Largest probe radius
        #[arg(long)]
        probe_max: Option<f64>,
        /// Number of geometric probe radii
        #[arg(long)]
        probes: Option<usize>,
    },
    /// K-variation of a graymap
    Tv {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// K-perimeter of a bitmap
    Perimeter {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Extremal minimizers of the geometric problem
    Geom {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out_min: Option<PathBuf>,
        #[arg(long)]
        out_max: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Exact TV-L1 denoising of a graymap
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        /// Quantization levels of the datum
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, value_enum)]
        stacking: Option<StackingArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Energy breakdown CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Cheeger constant and set of a bitmap domain
    Cheeger {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dinkelbach iterates as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Solutions along a geometric grid of fidelity parameters
    Sweep {
        /// Bitmap (set datum) or graymap (function datum)
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Quantization levels for graymap data
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Seeded property suites; exits 1 if any check fails
    Verify {
        #[arg(long, value_enum)]
        suite: Option<SuiteArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Lattice tolerance factor for the rearrangement checks
        #[arg(long)]
        c_lat: Option<f64>,
        /// Directory for inputs of failed checks
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Kernel description (JSON)
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Pixel spacing
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum)]
    exterior: Option<ExteriorArg>,
    /// Graymap of weight densities
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Density assigned to black weight pixels
    #[arg(long)]
    weight_min: Option<f64>,
    /// Density assigned to white weight pixels
    #[arg(long)]
    weight_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ExteriorArg {
    Vacuum,
    Detached,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StackingArg {
    Minimal,
    Maximal,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SuiteArg {
    Energy,
    Geom,
    Cheeger,
    Fidelity,
    Rearrange,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Energy => Suite::Energy,
            SuiteArg::Geom => Suite::Geom,
            SuiteArg::Cheeger => Suite::Cheeger,
            SuiteArg::Fidelity => Suite::Fidelity,
            SuiteArg::Rearrange => Suite::Rearrange,
            SuiteArg::All => Suite::All,
        }
    }
}

/// Kernel given inline or as a path to a JSON file.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum KernelSource {
    Path(PathBuf),
    Inline(KernelSpec),
}

/// Contents of `--config`; keys are flag names with underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    threads: Option<usize>,
    kernel: Option<KernelSource>,
    h: Option<f64>,
    exterior: Option<ExteriorArg>,
    weight: Option<PathBuf>,
    weight_min: Option<f64>,
    weight_max: Option<f64>,
    lambda: Option<f64>,
    levels: Option<usize>,
    stacking: Option<StackingArg>,
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    points: Option<usize>,
    suite: Option<SuiteArg>,
    seed: Option<u64>,
    c_lat: Option<f64>,
    probe_min: Option<f64>,
    probe_max: Option<f64>,
    probes: Option<usize>,
}

const DEFAULT_LEVELS: usize = 16;
const DEFAULT_POINTS: usize = 16;
const DEFAULT_WEIGHT_RANGE: (f64, f64) = (0.5, 2.0);

/// Exits with status 2 after printing the synopsis.
fn usage(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> T {
    flag.or(config)
        .unwrap_or_else(|| usage(format!("--{name} is required (as a flag or in --config)")))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_kernel(flag: Option<&PathBuf>, config: Option<&KernelSource>) -> Result<Kernel> {
    let spec = match (flag, config) {
        (Some(p), _) | (None, Some(KernelSource::Path(p))) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing kernel {}", p.display()))?
        }
        (None, Some(KernelSource::Inline(spec))) => spec.clone(),
        (None, None) => KernelSpec::new(KernelFamily::Fractional { s: 0.5 }, 2),
    };
    Ok(Kernel::new(spec)?)
}

/// Everything a grid-based subcommand needs.
struct Setup {
    grid: GridDomain,
    table: KernelTable,
    nu: WeightMeasure,
}

impl Setup {
    fn new(args: &GridArgs, config: &Config, rows: usize, cols: usize) -> Result<Self> {
        let h = args.h.or(config.h).unwrap_or(1.0);
        let exterior = match args.exterior.or(config.exterior).unwrap_or(ExteriorArg::Vacuum) {
            ExteriorArg::Vacuum => Exterior::Vacuum,
            ExteriorArg::Detached => Exterior::Detached,
        };
        let grid = GridDomain::rect(rows, cols, h)?.with_exterior(exterior);
        let kernel = load_kernel(args.kernel.as_ref(), config.kernel.as_ref())?;
        let table = KernelTable::new(&kernel, &grid)?;
        let nu = match args.weight.as_ref().or(config.weight.as_ref()) {
            None => WeightMeasure::lebesgue(&grid),
            Some(path) => {
                let w = pnm::load_pgm(path).with_context(|| format!("reading {}", path.display()))?;
                let w = on_grid(&w, &grid)?;
                let lo = args.weight_min.or(config.weight_min).unwrap_or(DEFAULT_WEIGHT_RANGE.0);
                let hi = args.weight_max.or(config.weight_max).unwrap_or(DEFAULT_WEIGHT_RANGE.1);
                WeightMeasure::from_unit_values(&w, lo, hi)?
            }
        };
        Ok(Self { grid, table, nu })
    }
}

fn check_shape(a: &GridDomain, b: &GridDomain) -> Result<()> {
    anyhow::ensure!(a.dims() == b.dims(), "image is {:?} but the grid is {:?}", a.dims(), b.dims());
    Ok(())
}

fn on_grid(f: &DiscreteFunction, grid: &GridDomain) -> Result<DiscreteFunction> {
    check_shape(f.grid(), grid)?;
    Ok(DiscreteFunction::new(grid, f.values().to_vec())?)
}

fn set_on_grid(e: &DiscreteSet, grid: &GridDomain) -> Result<DiscreteSet> {
    check_shape(e.grid(), grid)?;
    Ok(DiscreteSet::from_bits(grid, e.bits().to_vec())?)
}

fn load_function(path: &Path) -> Result<DiscreteFunction> {
    pnm::load_pgm(path).with_context(|| format!("reading {}", path.display()))
}

fn load_set(path: &Path) -> Result<DiscreteSet> {
    pnm::load_pbm(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn configure_threads(flag: Option<usize>, config: Option<usize>) -> Result<()> {
    let env = match std::env::var("NLBV_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .unwrap_or_else(|_| usage(format!("NLBV_THREADS={v:?} is not a thread count"))),
        ),
        Err(_) => None,
    };
    if let Some(n) = env.or(flag).or(config) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Runs the parsed command. Returns whether every check passed, which only
/// `verify` can make false.
pub fn run(cli: Cli) -> Result<bool> {
    let config = load_config(cli.config.as_deref())?;
    configure_threads(cli.threads, config.threads)?;

    match cli.command {
        Command::KernelInfo {
            kernel,
            probe_min,
            probe_max,
            probes,
        } => {
            let k = load_kernel(kernel.as_ref(), config.kernel.as_ref())?;
            let radii = lambda_grid(
                probe_min.or(config.probe_min).unwrap_or(1e-3),
                probe_max.or(config.probe_max).unwrap_or(1e2),
                probes.or(config.probes).unwrap_or(41),
            )?;
            let report = check_assumptions(&k, &radii);
            let out = serde_json::json!({
                "spec": k.spec(),
                "support_radius": k.support_radius(),
                "integrable": k.is_integrable(),
                "total_mass": k.is_integrable().then(|| k.total_mass()),
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Tv { input, grid } => {
            let f = load_function(&input)?;
            let [rows, cols] = f.grid().dims();
            let s = Setup::new(&grid, &config, rows, cols)?;
            println!("{}", k_variation(&on_grid(&f, &s.grid)?, &s.table)?);
        }
        Command::Perimeter { input, grid } => {
            let e = load_set(&input)?;
            let [rows, cols] = e.grid().dims();
            let s = Setup::new(&grid, &config, rows, cols)?;
            println!("{}", k_perimeter(&set_on_grid(&e, &s.grid)?, &s.table)?);
        }
        Command::Geom {
            input,
            lambda,
            out_min,
            out_max,
            grid,
        } => {
            let lambda = required(lambda, config.lambda, "lambda");
            let e = load_set(&input)?;
            let [rows, cols] = e.grid().dims();
            let s = Setup::new(&grid, &config, rows, cols)?;
            let e = set_on_grid(&e, &s.grid)?;
            let sol = GeomSolver::new(&s.table, &s.nu)?.solve(&e, lambda)?;
            println!("lambda,energy,n_min,n_max");
            println!("{},{},{},{}", lambda, sol.energy.total, sol.minimal.count(), sol.maximal.count());
            if let Some(p) = out_min {
                pnm::save_pbm(&p, &sol.minimal)?;
            }
            if let Some(p) = out_max {
                pnm::save_pbm(&p, &sol.maximal)?;
            }
        }
        Command::Denoise {
            input,
            lambda,
            levels,
            stacking,
            out,
            csv,
            grid,
        } => {
            let lambda = required(lambda, config.lambda, "lambda");
            let levels = levels.or(config.levels).unwrap_or(DEFAULT_LEVELS);
            let stacking = match stacking.or(config.stacking).unwrap_or(StackingArg::Minimal) {
                StackingArg::Minimal => Stacking::Minimal,
                StackingArg::Maximal => Stacking::Maximal,
            };
            let f = load_function(&input)?;
            let [rows, cols] = f.grid().dims();
            let s = Setup::new(&grid, &config, rows, cols)?;
            let f = on_grid(&f, &s.grid)?;
            let sol = FuncSolver::new(&s.table, &s.nu)?.solve(&f, lambda, levels, stacking)?;
            if let Some(p) = out {
                pnm::save_pgm(&p, &sol.u, 0.0, 1.0)?;
            }
            let mut w: Box<dyn Write> = match csv {
                Some(p) => Box::new(create(&p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            writeln!(w, "lambda,levels,tv,fidelity,total,quantization_bound")?;
            let e = &sol.energy;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                lambda,
                levels,
                e.tv_term,
                e.lambda * e.fidelity_term,
                e.total,
                sol.quantization_bound
            )?;
            w.flush()?;
        }
        Command::Cheeger {
            domain,
            out,
            trace,
            grid,
        } => {
            let omega = load_set(&domain)?;
            let [rows, cols] = omega.grid().dims();
            let s = Setup::new(&grid, &config, rows, cols)?;
            let omega = set_on_grid(&omega, &s.grid)?;
            let res = cheeger_solve(&omega, &s.nu, &s.table)?;
            let certified = certificate_check(&res, &omega, &s.nu, &s.table)?;
            println!("h,ratio_num,ratio_den,size,maximal_size,certified");
            println!(
                "{},{},{},{},{},{}",
                res.h,
                res.ratio.num,
                res.ratio.den,
                res.cheeger_set.count(),
                res.maximal_set.count(),
                u8::from(certified)
            );
            if let Some(p) = out {
                pnm::save_pbm(&p, &res.cheeger_set)?;
            }
            if let Some(p) = trace {
                let mut w = create(&p)?;
                writeln!(w, "step,h,ratio_num,ratio_den,size,min_value")?;
                for (k, t) in res.trace.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        k,
                        t.h,
                        t.ratio.num,
                        t.ratio.den,
                        t.set.count(),
                        t.min_value
                    )?;
                }
                w.flush()?;
            }
        }
        Command::Sweep {
            input,
            lambda_min,
            lambda_max,
            points,
            levels,
            csv,
            grid,
        } => {
            let lo = required(lambda_min, config.lambda_min, "lambda-min");
            let hi = required(lambda_max, config.lambda_max, "lambda-max");
            let points = points.or(config.points).unwrap_or(DEFAULT_POINTS);
            let bytes = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let (datum, rows, cols) = match bytes.get(..2) {
                Some(b"P1") | Some(b"P4") => {
                    let e = pnm::parse_pbm(&bytes)?;
                    let [r, c] = e.grid().dims();
                    (SweepDatum::Set(e), r, c)
                }
                _ => {
                    let f = pnm::parse_pgm(&bytes)?;
                    let [r, c] = f.grid().dims();
                    (SweepDatum::Function(f, levels.or(config.levels).unwrap_or(DEFAULT_LEVELS)), r, c)
                }
            };
            let s = Setup::new(&grid, &config, rows, cols)?;
            let datum = match datum {
                SweepDatum::Set(e) => SweepDatum::Set(set_on_grid(&e, &s.grid)?),
                SweepDatum::Function(f, m) => SweepDatum::Function(on_grid(&f, &s.grid)?, m),
            };
            let records = sweep(&datum, &lambda_grid(lo, hi, points)?, &s.nu, &s.table)?;
            match csv {
                Some(p) => {
                    let mut w = create(&p)?;
                    write_sweep_csv(&records, &mut w)?;
                    w.flush()?;
                }
                None => write_sweep_csv(&records, std::io::stdout().lock())?,
            }
        }
        Command::Verify {
            suite,
            seed,
            csv,
            c_lat,
            artifacts,
        } => {
            let suite: Suite = suite.or(config.suite).unwrap_or(SuiteArg::All).into();
            let defaults = VerifyConfig::default();
            let vc = VerifyConfig {
                seed: seed.or(config.seed).unwrap_or(defaults.seed),
                c_lat: c_lat.or(config.c_lat).unwrap_or(defaults.c_lat),
                artifacts,
            };
            let rows = run_suite(suite, &vc)?;
            for r in &rows {
                eprintln!(
                    "{} {}/{} {} ({}/{} failed)",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.suite,
                    r.check,
                    r.detail,
                    r.failures,
                    r.instances
                );
            }
            match csv {
                Some(p) => {
                    let mut w = create(&p)?;
                    write_csv(&rows, &mut w)?;
                    w.flush()?;
                }
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            return Ok(rows.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}
