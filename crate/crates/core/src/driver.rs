//! Fixed-step time marching, stimulus and benchmark.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::adaptivity::{
    compute_eta, drop_tolerance, required_sweeps, select_active, AdaptivityError, DropMode, DropPolicy,
    SweepSystem,
};
use crate::assembly::{AssemblyError, ModelOperators, SdcProblem};
use crate::collocation::{CollocationError, CollocationScheme};
use crate::config::{ConfigError, MeshConfig, SimulationConfig, StimulusConfig};
use crate::mesh::{DofMap, DofMode, Mesh, MeshError};
use crate::sdc::{check_termination, sdc_sweep, SdcError, SdcState};
use crate::sparse::CgSettings;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Collocation(#[from] CollocationError),
    #[error("stimulus does not touch any dof")]
    EmptyStimulus,
    #[error("step {step}, sweep {sweep}: {source}")]
    Sweep { step: usize, sweep: usize, source: SdcError },
    #[error("step {step}, sweep {sweep}: {source}")]
    Restrict { step: usize, sweep: usize, source: AdaptivityError },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

/// Potential and gating values at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// Mesh, operators and collocation scheme built from a config.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimulationConfig,
    pub mesh: Mesh,
    pub ops: ModelOperators,
    pub scheme: CollocationScheme,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self, DriverError> {
        config.validate()?;
        let current = config.model.membrane_current();
        let (mesh, ops) = match &config.mesh {
            MeshConfig::Cartesian { cells, extent } => {
                let mesh = Mesh::cartesian(cells, extent)?;
                let dofs = DofMap::new(&mesh, DofMode::Monodomain);
                let ops = ModelOperators::monodomain(&mesh, dofs, &config.physics, current)?;
                (mesh, ops)
            }
            other => {
                let layout = other.emi_layout().expect("non-cartesian meshes are EMI layouts");
                let mesh = Mesh::emi(&layout)?;
                let dofs = DofMap::new(&mesh, DofMode::Emi);
                let ops = ModelOperators::emi(&mesh, dofs, &config.physics, current)?;
                (mesh, ops)
            }
        };
        let scheme = CollocationScheme::radau_iia(config.sdc.nodes)?;
        Ok(Self { config, mesh, ops, scheme })
    }

    /// Resting state with the configured stimulus applied.
    pub fn initial_state(&self) -> Result<State, DriverError> {
        let mut s = State {
            t: 0.0,
            u: vec![0.0; self.ops.len()],
            w: vec![0.0; self.ops.gating_points().len()],
        };
        apply_stimulus(&mut s, &self.mesh, self.ops.dofs(), &self.config.stimulus)?;
        Ok(s)
    }

    pub fn step_settings(&self) -> StepSettings {
        let a = &self.config.adaptivity;
        StepSettings {
            tol: self.config.sdc.tol,
            max_sweeps: self.config.sdc.max_sweeps,
            cg: self.config.sdc.cg(),
            mode: a.mode,
            alpha: a.alpha,
            tol_drop: a.tol_drop,
        }
    }
}

/// Sets the stimulated dofs. Balls and boxes select dofs by vertex
/// position, a myocyte stimulus selects that subdomain's dofs.
pub fn apply_stimulus(
    state: &mut State,
    mesh: &Mesh,
    dofs: &DofMap,
    spec: &StimulusConfig,
) -> Result<(), DriverError> {
    let mut hit = 0;
    match spec {
        StimulusConfig::None => return Ok(()),
        StimulusConfig::Ball { center, radius, value } => {
            if !(*radius > 0.0) {
                return Err(DriverError::EmptyStimulus);
            }
            for d in 0..dofs.len() {
                let p = mesh.vertex(dofs.vertex_of(d));
                let r2: f64 = center.iter().enumerate().map(|(k, c)| (p[k] - c).powi(2)).sum();
                if r2.sqrt() <= *radius {
                    state.u[d] = *value;
                    hit += 1;
                }
            }
        }
        StimulusConfig::Box { min, max, value } => {
            for d in 0..dofs.len() {
                let p = mesh.vertex(dofs.vertex_of(d));
                if min.iter().zip(max).enumerate().all(|(k, (a, b))| *a <= p[k] && p[k] <= *b) {
                    state.u[d] = *value;
                    hit += 1;
                }
            }
        }
        StimulusConfig::Myocyte { id, value } => {
            for d in 0..dofs.len() {
                if dofs.subdomain_of(d) == *id {
                    state.u[d] = *value;
                    hit += 1;
                }
            }
        }
    }
    if hit == 0 {
        return Err(DriverError::EmptyStimulus);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub tol: f64,
    pub max_sweeps: usize,
    pub cg: CgSettings,
    pub mode: DropMode,
    pub alpha: f64,
    /// Absolute drop tolerance overriding `alpha * tol`.
    pub tol_drop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub active_dofs: usize,
    pub cg_iterations: usize,
    pub unconverged_solves: usize,
    /// Sum of squared correction energy norms.
    pub correction: f64,
    pub max_correction: f64,
    pub rho: f64,
    /// Drop tolerance used to select the next sweep's dofs.
    pub tol_drop: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub sweeps: Vec<SweepRecord>,
    pub converged: bool,
    pub wall_ms: f64,
}

impl StepRecord {
    pub fn active_dofs(&self) -> Vec<usize> {
        self.sweeps.iter().map(|s| s.active_dofs).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLog {
    pub config_hash: String,
    pub dofs: usize,
    pub steps: Vec<StepRecord>,
    pub total_wall_ms: f64,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Advances `state` by one step of size `dt`.
pub fn step<P: SdcProblem + ?Sized>(
    state: &mut State,
    problem: &P,
    scheme: &CollocationScheme,
    dt: f64,
    settings: &StepSettings,
    eta_of: &dyn Fn(&SdcState, &[usize]) -> f64,
    index: usize,
) -> Result<StepRecord, DriverError> {
    let start = Instant::now();
    let m = scheme.num_nodes();
    let mut sdc = SdcState::new(dt, state.u.clone(), state.w.clone(), m);
    let mut system = SweepSystem::full(problem);
    let mut sweeps = Vec::new();
    let mut converged = false;
    let mut policy = DropPolicy {
        mode: settings.mode,
        alpha: settings.alpha,
        eta: 0.0,
        dt,
        rho: sdc.rho,
        r: 0,
        tol: settings.tol,
    };
    for k in 1..=settings.max_sweeps {
        let t0 = Instant::now();
        let report = sdc_sweep(&mut sdc, problem, scheme, &system, &settings.cg)
            .map_err(|source| DriverError::Sweep { step: index, sweep: k, source })?;
        converged = check_termination(&report.norms, sdc.rho, settings.tol);
        let mut record = SweepRecord {
            active_dofs: report.active_dofs,
            cg_iterations: report.iterations(),
            unconverged_solves: report.solves.iter().filter(|s| !s.converged).count(),
            correction: report.norm_sq_sum(),
            max_correction: report.max_correction(),
            rho: sdc.rho,
            tol_drop: 0.0,
            wall_ms: 0.0,
        };
        if converged || k == settings.max_sweeps {
            record.wall_ms = ms(t0);
            sweeps.push(record);
            break;
        }
        policy.rho = sdc.rho;
        if k == 1 && settings.mode == DropMode::Theoretical {
            policy.eta = eta_of(&sdc, system.active().indices());
            let c = report.max_correction();
            policy.r = if c > 0.0 { required_sweeps(c, sdc.rho, settings.tol) } else { 0 };
        }
        let tol_drop = match (settings.mode, settings.tol_drop) {
            (DropMode::Empirical, Some(t)) => t,
            _ => drop_tolerance(&policy),
        };
        record.tol_drop = tol_drop;
        let next = select_active(&report.corrections, tol_drop, system.active());
        system = system
            .restrict(problem, next)
            .map_err(|source| DriverError::Restrict { step: index, sweep: k, source })?;
        record.wall_ms = ms(t0);
        sweeps.push(record);
    }
    if !converged {
        log::warn!("step {index}: no convergence after {} sweeps, accepting", settings.max_sweeps);
    }
    state.t += dt;
    state.u = sdc.u.pop().expect("nodes");
    state.w = sdc.w.pop().expect("nodes");
    Ok(StepRecord { step: index, t: state.t, sweeps, converged, wall_ms: ms(start) })
}

/// `eta` sampled over the active dofs at all collocation nodes.
pub fn eta_for(ops: &ModelOperators) -> impl Fn(&SdcState, &[usize]) -> f64 + '_ {
    move |sdc: &SdcState, rows: &[usize]| {
        let current = ops.current();
        let (beta, c_m) = (1.0, ops.capacitance());
        match ops.dofs().mode() {
            DofMode::Monodomain => {
                let gated = !sdc.w[0].is_empty();
                let samples = sdc.u.iter().zip(&sdc.w).flat_map(|(u, w)| {
                    rows.iter().map(move |&r| (u[r], if gated { w[r] } else { 0.0 }))
                });
                compute_eta(current, samples, beta, c_m)
            }
            DofMode::Emi => {
                let points = ops.dofs().gating_points();
                let gated = !ops.gating_points().is_empty();
                let samples = sdc.u.iter().zip(&sdc.w).flat_map(|(u, w)| {
                    points.iter().enumerate().filter(|(_, p)| rows.binary_search(&p.dof).is_ok()).map(
                        move |(g, p)| (ops.gating_voltage(u, p), if gated { w[g] } else { 0.0 }),
                    )
                });
                compute_eta(current, samples, beta, c_m)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: State,
    pub snapshots: Vec<(usize, State)>,
    pub log: RunLog,
}

impl Simulation {
    /// Marches to the end time. `observe` sees every completed step.
    pub fn run_with(
        &self,
        mut observe: impl FnMut(&StepRecord, &State),
    ) -> Result<RunOutput, DriverError> {
        let start = Instant::now();
        let mut state = self.initial_state()?;
        let settings = self.step_settings();
        let every = self.config.output.snapshot_every;
        let mut snapshots = Vec::new();
        if every > 0 {
            snapshots.push((0, state.clone()));
        }
        let eta = eta_for(&self.ops);
        let n = self.config.sdc.num_steps();
        let mut steps = Vec::with_capacity(n);
        for i in 1..=n {
            let mut rec = step(&mut state, &self.ops, &self.scheme, self.config.sdc.dt, &settings, &eta, i)?;
            state.t = i as f64 * self.config.sdc.dt;
            rec.t = state.t;
            observe(&rec, &state);
            if every > 0 && (i % every == 0 || i == n) {
                snapshots.push((i, state.clone()));
            }
            steps.push(rec);
        }
        let log = RunLog {
            config_hash: self.config.hash(),
            dofs: self.ops.len(),
            steps,
            total_wall_ms: ms(start),
        };
        Ok(RunOutput { state, snapshots, log })
    }

    pub fn run(&self) -> Result<RunOutput, DriverError> {
        self.run_with(|_, _| {})
    }
}

pub fn run(config: SimulationConfig) -> Result<RunOutput, DriverError> {
    Simulation::new(config)?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub wall_adaptive_ms: f64,
    pub wall_baseline_ms: f64,
    pub speedup: f64,
    pub final_state_max_diff: f64,
}

/// Runs the configured problem without and with adaptivity.
pub fn benchmark(config: SimulationConfig) -> Result<BenchReport, DriverError> {
    benchmark_runs(config).map(|(report, _, _)| report)
}

/// As [`benchmark`], also returning the baseline and adaptive runs.
pub fn benchmark_runs(config: SimulationConfig) -> Result<(BenchReport, RunOutput, RunOutput), DriverError> {
    let mut adaptive = config;
    adaptive.output.snapshot_every = 0;
    let mut baseline = adaptive.clone();
    baseline.adaptivity.mode = DropMode::Off;
    let base = Simulation::new(baseline)?.run()?;
    let adapt = Simulation::new(adaptive)?.run()?;
    let diff = base.state.u.iter().zip(&adapt.state.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let (wa, wb) = (adapt.log.total_wall_ms, base.log.total_wall_ms);
    let report = BenchReport { wall_adaptive_ms: wa, wall_baseline_ms: wb, speedup: wb / wa, final_state_max_diff: diff };
    Ok((report, base, adapt))
}
