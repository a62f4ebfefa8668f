use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cardiac_sdc::adaptivity::DropMode;
use cardiac_sdc::config::SimulationConfig;
use cardiac_sdc::driver::{benchmark, Simulation};
use cardiac_sdc::output;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Cardiac excitation with adaptive spectral deferred correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots, stats.csv and run.jsonl.
    Run(Overrides),
    /// Time the run with and without adaptivity and write bench.json.
    Bench(Overrides),
}

#[derive(Args)]
struct Overrides {
    config: PathBuf,
    /// Disable algebraic adaptivity.
    #[arg(long)]
    no_adapt: bool,
    /// SDC tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Empirical drop factor, TOL_drop = alpha * tol.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot every n steps (0 disables).
    #[arg(long)]
    snapshots: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<SimulationConfig> {
        let mut c = SimulationConfig::from_file(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if self.no_adapt {
            c.adaptivity.mode = DropMode::Off;
        }
        if let Some(t) = self.tol {
            c.sdc.tol = t;
        }
        if let Some(a) = self.alpha {
            c.adaptivity.alpha = a;
            c.adaptivity.tol_drop = None;
        }
        if let Some(o) = &self.out {
            c.output.dir = o.display().to_string();
        }
        if let Some(n) = self.snapshots {
            c.output.snapshot_every = n;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cfg: SimulationConfig) -> Result<()> {
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let sim = Simulation::new(cfg)?;
    log::info!("{} dofs, {} steps", sim.ops.dofs().len(), sim.config.sdc.num_steps());
    let out = sim.run_with(|rec, _| {
        log::debug!("step {} t={:e} sweeps={:?}", rec.step, rec.t, rec.active_dofs());
    })?;
    if sim.config.output.vtk {
        let gating: Vec<usize> = sim.ops.dofs().gating_points().iter().map(|p| p.dof).collect();
        let gating = if out.state.w.is_empty() { &[][..] } else { &gating[..] };
        for (i, state) in &out.snapshots {
            let path = dir.join(format!("snapshot_{i:06}.vtk"));
            output::write_vtk(&path, &sim.mesh, sim.ops.dofs(), state, gating)?;
        }
    }
    output::write_run_files(&dir, &out.log)?;
    summarize(&dir, &out.log);
    Ok(())
}

fn summarize(dir: &Path, log: &cardiac_sdc::driver::RunLog) {
    let sweeps: usize = log.steps.iter().map(|s| s.sweeps.len()).sum();
    println!(
        "{} steps, {} sweeps, {:.1} ms; output in {}",
        log.steps.len(),
        sweeps,
        log.total_wall_ms,
        dir.display()
    );
}

fn bench(cfg: SimulationConfig) -> Result<()> {
    let dir = PathBuf::from(&cfg.output.dir);
    let report = benchmark(cfg)?;
    output::write_bench(&dir, &report)?;
    println!(
        "baseline {:.1} ms, adaptive {:.1} ms, speedup {:.3}, max diff {:.3e}",
        report.wall_baseline_ms, report.wall_adaptive_ms, report.speedup, report.final_state_max_diff
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(o) => run(o.load()?),
        Command::Bench(o) => bench(o.load()?),
    }
}
