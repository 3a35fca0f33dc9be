use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use ksmix_core::diagnostics::{certificate, normalize_unit, rage_average, semigroup_bound_check, SEMIGROUP_CONSTANT};
use ksmix_core::experiment::{run_experiment, sweep_amplitude, SWEEP_FILE};
use ksmix_core::{kernel_l1_norms, lp_norm, make_flow, read_snapshot, KsError, Lp, SimConfig};

#[derive(Parser)]
#[command(name = "ksmix", version, about = "Aggregation-advection simulator and mixing diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifacts to output.dir.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat a simulation over several values of a parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parameter to vary. Only the advection amplitude is supported.
        #[arg(long, default_value = "A")]
        param: String,
        /// Comma-separated list of values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Standalone diagnostics on the configured flow and initial data.
    Diag {
        kind: DiagKind,
        #[arg(long)]
        config: PathBuf,
        /// Projection radius (defaults to diag.N).
        #[arg(long = "N")]
        modes: Option<usize>,
        /// Averaging horizon for rage (defaults to T).
        #[arg(long = "T")]
        horizon: Option<f64>,
        /// Comma-separated evaluation times for semigroup.
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
    },
    /// Print the header and statistics of a snapshot file.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagKind {
    Rage,
    Semigroup,
    Certificate,
}

fn exit_code(e: &KsError) -> u8 {
    if e.is_validation() {
        1
    } else if e.is_io() {
        3
    } else {
        2
    }
}

fn run_cli(cli: Cli) -> Result<(), KsError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = SimConfig::load(&config)?;
            let s = run_experiment(&cfg)?;
            println!("classification={}", s.report.classification);
            println!("t_final={}", s.report.t_final);
            println!("peak_linf={}", s.report.peak_linf);
            println!("output={}", s.dir.display());
        }
        Command::Sweep { config, param, values } => {
            if param != "A" {
                return Err(KsError::InvalidParameter {
                    name: "param",
                    reason: format!("only A can be swept, got {param:?}"),
                });
            }
            let cfg = SimConfig::load(&config)?;
            let rows = sweep_amplitude(&cfg, &values)?;
            for row in &rows {
                match &row.outcome {
                    Ok(s) => println!("A={} {}", row.amplitude, s.report.classification),
                    Err(e) => println!("A={} failed: {e}", row.amplitude),
                }
            }
            println!("output={}", cfg.output.dir.join(SWEEP_FILE).display());
        }
        Command::Diag { kind, config, modes, horizon, t_grid } => {
            let cfg = SimConfig::load(&config)?;
            let grid = cfg.grid()?;
            let modes = modes.unwrap_or(cfg.diag_modes);
            let rho0 = cfg.initial_field()?;
            match kind {
                DiagKind::Rage => {
                    let flow = Arc::new(make_flow(&cfg.flow_spec()?, grid)?);
                    let t = horizon.unwrap_or(cfg.horizon);
                    let (hat, _) = normalize_unit(&rho0)?;
                    let phi0 = ksmix_core::inverse_transform(&hat);
                    let r = rage_average(flow, cfg.amplitude, &phi0, modes, t, cfg.c_cfl, cfg.dt_max)?;
                    println!("N={modes} T={t} A={}", cfg.amplitude);
                    println!("initial_low_energy={}", r.initial_low_energy);
                    println!("average={}", r.average);
                    println!("ratio={}", r.average / r.initial_low_energy);
                }
                DiagKind::Semigroup => {
                    let flow = Arc::new(make_flow(&cfg.flow_spec()?, grid)?);
                    let times = t_grid.unwrap_or_else(|| (0..=10).map(|i| 0.05 * i as f64).collect());
                    let r = semigroup_bound_check(flow, cfg.amplitude, &rho0, modes, &times, cfg.c_cfl, cfg.dt_max)?;
                    for (t, ratio) in &r.ratios {
                        println!("t={t} ratio={ratio}");
                    }
                    println!("max_ratio={}", r.max_ratio);
                    println!("within_C={} (C={SEMIGROUP_CONSTANT}, convention)", r.within(SEMIGROUP_CONSTANT));
                }
                DiagKind::Certificate => {
                    let spec = cfg.kernel()?;
                    let c = certificate(&rho0, &spec, grid)?;
                    let norms = kernel_l1_norms(&spec, grid)?;
                    println!("C0={} (C=1 convention, quadrature n={})", c.c0, norms.resolution);
                    println!("C0_coarse={} (n={})", norms.lap_k_coarse, norms.coarse_resolution);
                    println!("C0_sensitivity={}", norms.lap_sensitivity());
                    println!("grad_K_l1={}", norms.grad_k);
                    println!("C_inf={}", c.c_inf);
                    println!("B0={}", c.b0);
                    println!("mean0={}", c.mean0);
                    println!("tau0={} (T0 taken as unbounded)", c.tau0);
                    println!("tau1={} (C=1 convention)", c.tau1);
                    println!("theta={}", c.theta);
                }
            }
        }
        Command::Inspect { path } => {
            let f = read_snapshot(&path)?;
            let g = f.grid();
            println!("dim={} n={} points={}", g.dim(), g.n(), g.len());
            println!("min={} max={} mean={}", f.min(), f.max(), f.mean());
            println!("l2={} linf={}", lp_norm(&f, Lp::L2), lp_norm(&f, Lp::Inf));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
