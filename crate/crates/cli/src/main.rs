mod manifest;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hmimo_core::binary::QuadraticForm;
use hmimo_core::harness::{
    compare_feeding, run_realizations, sd_bench, sweep_antennas, sweep_power, write_csv, ArrayAxis,
    ExperimentSpec, RunRecord, RunSummaryRow, Solver, TraceRow,
};
use hmimo_core::miso::{snr_sweep, write_rows, Architecture, MisoConfig};
use hmimo_core::sphere::SdVariant;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use manifest::{sha256_hex, Manifest, Versions};

#[derive(Debug, Parser)]
#[command(
    name = "hmimo",
    version,
    about = "Holographic MIMO beamforming experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment spec as TOML; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// First seed; realization r uses seed + r.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Overrides the realization count of the spec.
    #[arg(long, global = true)]
    realizations: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one solver over the configured realizations.
    Run {
        /// Overrides the solver of the spec.
        #[arg(long)]
        solver: Option<Solver>,
    },
    /// Average sum rate versus total power budget.
    SweepPower {
        #[arg(long, value_delimiter = ',', default_value = "wmmse-hc")]
        solvers: Vec<Solver>,
        #[arg(long, value_delimiter = ',', default_value = "0,10,20,30,40")]
        p_tot_dbm: Vec<f64>,
        /// Also write the per-iteration traces of every run.
        #[arg(long)]
        traces: bool,
    },
    /// Average sum rate versus array size.
    SweepAntennas {
        #[arg(long, value_delimiter = ',', default_value = "wmmse-hc")]
        solvers: Vec<Solver>,
        /// `rf_chains` grows the number of microstrips, `elements_per_rf`
        /// their length.
        #[arg(long, default_value = "rf_chains")]
        axis: ArrayAxis,
        #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
        counts: Vec<usize>,
    },
    /// Closed-form versus simulated MISO SNR for the four architectures.
    SnrScaling {
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<usize>>,
        /// Waveguide attenuation, 1/m.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Sphere-decoder node counts on binary quadratic programs.
    SdBench {
        /// Instance files in the `quadform` text format; random instances
        /// are generated when none are given.
        instances: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
        dims: Vec<usize>,
        /// Random instances per dimension.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "plain,optimal_condition,lower_bound,accelerated"
        )]
        variants: Vec<SdVariant>,
    },
    /// Paired edge- versus center-fed runs.
    CompareFeeding,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Run { .. } => "run",
            Self::SweepPower { .. } => "sweep-power",
            Self::SweepAntennas { .. } => "sweep-antennas",
            Self::SnrScaling { .. } => "snr-scaling",
            Self::SdBench { .. } => "sd-bench",
            Self::CompareFeeding => "compare-feeding",
        }
    }
}

fn load_spec(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentSpec::from_toml(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(r) = common.realizations {
        spec.realizations = r;
    }
    spec.validate()?;
    Ok(spec)
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf)> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((BufWriter::new(file), path))
}

fn write_runs(dir: &Path, runs: &[RunRecord], traces: bool) -> Result<Vec<PathBuf>> {
    let rows: Vec<RunSummaryRow> = runs.iter().map(RunSummaryRow::from).collect();
    let (w, runs_path) = create(dir, "runs.csv")?;
    write_csv(&rows, w)?;
    let mut out = vec![runs_path];
    if traces {
        let (w, path) = create(dir, "trace.csv")?;
        TraceRow::write_all(runs, w)?;
        out.push(path);
    }
    Ok(out)
}

fn random_instances(dims: &[usize], count: usize, seed: u64) -> Vec<QuadraticForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dims.iter()
        .flat_map(|&m| (0..count).map(move |_| m))
        .map(|m| QuadraticForm::random(m, &mut rng))
        .collect()
}

/// Executes the command, returning the effective config text and the files
/// written.
fn execute(cli: &Cli) -> Result<(String, Vec<PathBuf>)> {
    let dir = &cli.common.out_dir;
    let seed = cli.common.seed;
    match &cli.command {
        Command::Run { solver } => {
            let mut spec = load_spec(&cli.common)?;
            if let Some(s) = solver {
                spec.solver = *s;
                spec.validate()?;
            }
            let runs = run_realizations(&spec, seed)?;
            let rates: Vec<f64> = runs.iter().map(|r| r.sum_rate).collect();
            log::info!(
                "{}: mean sum rate {:.3} bit/s/Hz over {} runs",
                spec.solver.name(),
                hmimo_core::harness::mean(&rates),
                runs.len()
            );
            Ok((spec.to_toml()?, write_runs(dir, &runs, true)?))
        }
        Command::SweepPower {
            solvers,
            p_tot_dbm,
            traces,
        } => {
            let spec = load_spec(&cli.common)?;
            let (rows, runs) = sweep_power(&spec, solvers, p_tot_dbm, seed)?;
            let (w, path) = create(dir, "sweep_power.csv")?;
            write_csv(&rows, w)?;
            let mut out = vec![path];
            out.extend(write_runs(dir, &runs, *traces)?);
            Ok((spec.to_toml()?, out))
        }
        Command::SweepAntennas {
            solvers,
            axis,
            counts,
        } => {
            let spec = load_spec(&cli.common)?;
            let (rows, runs) = sweep_antennas(&spec, solvers, *axis, counts, seed)?;
            let (w, path) = create(dir, "sweep_antennas.csv")?;
            write_csv(&rows, w)?;
            let mut out = vec![path];
            out.extend(write_runs(dir, &runs, false)?);
            Ok((spec.to_toml()?, out))
        }
        Command::SnrScaling { elements, alpha } => {
            let elements = elements
                .clone()
                .unwrap_or_else(|| (4..=100).step_by(4).collect());
            if elements.is_empty() || elements.contains(&0) {
                bail!("element counts must be positive");
            }
            let mut base = MisoConfig::reference(elements[0]);
            if let Some(a) = alpha {
                base.alpha = *a;
            }
            base.validate()?;
            let rows = snr_sweep(&base, &elements, &Architecture::ALL);
            let (w, path) = create(dir, "snr_scaling.csv")?;
            write_rows(&rows, w)?;
            Ok((format!("{base:?}\nelements = {elements:?}\n"), vec![path]))
        }
        Command::SdBench {
            instances,
            dims,
            count,
            variants,
        } => {
            let problems = if instances.is_empty() {
                random_instances(dims, *count, seed)
            } else {
                instances
                    .iter()
                    .map(|p| {
                        let text = std::fs::read_to_string(p)
                            .with_context(|| format!("reading {}", p.display()))?;
                        QuadraticForm::from_text(&text)
                            .with_context(|| format!("parsing {}", p.display()))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let rows = sd_bench(&problems, variants)?;
            let (w, path) = create(dir, "sd_bench.csv")?;
            write_csv(&rows, w)?;
            let names: Vec<&str> = variants.iter().map(|v| v.name()).collect();
            let config = match instances.is_empty() {
                true => format!("dims = {dims:?}\ncount = {count}\nvariants = {names:?}\n"),
                false => format!("instances = {instances:?}\nvariants = {names:?}\n"),
            };
            Ok((config, vec![path]))
        }
        Command::CompareFeeding => {
            let spec = load_spec(&cli.common)?;
            let rows = compare_feeding(&spec, seed)?;
            let (w, path) = create(dir, "feeding.csv")?;
            write_csv(&rows, w)?;
            Ok((spec.to_toml()?, vec![path]))
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    std::fs::create_dir_all(&cli.common.out_dir)
        .with_context(|| format!("creating {}", cli.common.out_dir.display()))?;
    let start = Instant::now();
    let (config, outputs) = execute(&cli)?;
    let manifest = Manifest {
        command: cli.command.name().to_string(),
        args: std::env::args().skip(1).collect(),
        config_sha256: sha256_hex(&config),
        config,
        seed: cli.common.seed,
        versions: Versions::current(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    let path = manifest.write(&cli.common.out_dir)?;
    log::info!("wrote {}", path.display());
    Ok(())
}
