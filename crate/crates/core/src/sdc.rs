//! One time step of spectral deferred correction with LU-trick sweeps.

use thiserror::Error;

use crate::adaptivity::SweepSystem;
use crate::assembly::{AssemblyError, SdcProblem};
use crate::collocation::CollocationScheme;
use crate::sparse::{energy_norm, pcg_jacobi, CgSettings, LinalgError, SolveReport};

#[derive(Debug, Error, PartialEq)]
pub enum SdcError {
    #[error("state has {got} entries where {expected} were expected")]
    Dimension { expected: usize, got: usize },
    #[error("node {node}: {source}")]
    Solve { node: usize, source: LinalgError },
    #[error("gating point {point}, node {node}: non-positive pivot {pivot}")]
    GatingPivot { point: usize, node: usize, pivot: f64 },
    #[error("reaction Jacobian entry ({row}, {col}) is outside the sweep matrix pattern")]
    Pattern { row: usize, col: usize },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Initial guess for the contraction factor.
pub const RHO_INITIAL: f64 = 0.05;

/// Iterate of one time step. Node 0 holds the initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct SdcState {
    pub dt: f64,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub sweep: usize,
    /// Sum of squared correction energy norms, one entry per sweep.
    pub history: Vec<f64>,
    pub rho: f64,
}

impl SdcState {
    /// Spreads the initial value to all `m` collocation nodes.
    pub fn new(dt: f64, u0: Vec<f64>, w0: Vec<f64>, m: usize) -> Self {
        Self {
            dt,
            u: vec![u0; m + 1],
            w: vec![w0; m + 1],
            sweep: 0,
            history: Vec::new(),
            rho: RHO_INITIAL,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.u.len() - 1
    }

    pub fn end_u(&self) -> &[f64] {
        self.u.last().expect("at least one node")
    }

    pub fn end_w(&self) -> &[f64] {
        self.w.last().expect("at least one node")
    }

    fn check<P: SdcProblem + ?Sized>(&self, problem: &P, scheme: &CollocationScheme) -> Result<(), SdcError> {
        let m = scheme.num_nodes();
        if self.u.len() != m + 1 || self.w.len() != m + 1 {
            return Err(SdcError::Dimension { expected: m + 1, got: self.u.len().min(self.w.len()) });
        }
        let (n, g) = (problem.len(), problem.gating_points().len());
        for u in &self.u {
            if u.len() != n {
                return Err(SdcError::Dimension { expected: n, got: u.len() });
            }
        }
        for w in &self.w {
            if w.len() != g {
                return Err(SdcError::Dimension { expected: g, got: w.len() });
            }
        }
        Ok(())
    }
}

/// Collocation residuals on the given rows:
/// `Phi_i = -M (u_{i+1} - u_i) - dt sum_j S_ij (A u_j + b_j)`, plus
/// `Psi_i = -(w_{i+1} - w_i) + dt sum_j S_ij R_j` on the given gating points.
struct Residual {
    phi: Vec<Vec<f64>>,
    /// Lumped reaction Jacobians at `u^k`, indexed by node (entry 0 unused).
    jac: Vec<Vec<f64>>,
    /// Jump couplings at `u^k` in active positions, clamped at zero.
    jumps: Vec<Vec<LocalJump>>,
}

struct LocalJump {
    a: Option<usize>,
    b: Option<usize>,
    g: f64,
}

fn local_jumps<P: SdcProblem + ?Sized>(
    problem: &P,
    u: &[f64],
    w: &[f64],
    local: &mut Option<Vec<usize>>,
    rows: &[usize],
) -> Result<Vec<LocalJump>, SdcError> {
    let jumps = problem.jump_jacobian(u, w)?;
    if jumps.is_empty() {
        return Ok(Vec::new());
    }
    let local = local.get_or_insert_with(|| {
        let mut l = vec![usize::MAX; problem.len()];
        for (k, &r) in rows.iter().enumerate() {
            l[r] = k;
        }
        l
    });
    let at = |d: usize| Some(local[d]).filter(|&k| k != usize::MAX);
    Ok(jumps
        .into_iter()
        .filter(|j| j.g > 0.0)
        .filter_map(|j| {
            let (a, b) = (at(j.dofs[0]), at(j.dofs[1]));
            (a.is_some() || b.is_some()).then_some(LocalJump { a, b, g: j.g })
        })
        .collect())
}

/// `out -= c J x` for the jump part of the Jacobian.
fn sub_jumps(jumps: &[LocalJump], c: f64, x: &[f64], out: &mut [f64]) {
    for j in jumps {
        let d = j.a.map_or(0.0, |a| x[a]) - j.b.map_or(0.0, |b| x[b]);
        if let Some(a) = j.a {
            out[a] -= c * j.g * d;
        }
        if let Some(b) = j.b {
            out[b] += c * j.g * d;
        }
    }
}

fn potential_residual<P: SdcProblem + ?Sized>(
    state: &SdcState,
    problem: &P,
    scheme: &CollocationScheme,
    rows: &[usize],
) -> Result<Residual, SdcError> {
    let m = scheme.num_nodes();
    let n = rows.len();
    let s = scheme.s();
    let mut f = vec![vec![0.0; n]; m + 1];
    let mut jac = vec![vec![0.0; n]; m + 1];
    let mut jumps = Vec::with_capacity(m + 1);
    jumps.push(Vec::new());
    let mut local = None;
    let mut b = vec![0.0; n];
    for j in 1..=m {
        problem.stiffness().mul_rows(&state.u[j], rows, &mut f[j]);
        problem.reaction(&state.u[j], &state.w[j], rows, &mut b, &mut jac[j])?;
        jumps.push(local_jumps(problem, &state.u[j], &state.w[j], &mut local, rows)?);
        for (fj, bj) in f[j].iter_mut().zip(&b) {
            *fj += bj;
        }
    }
    let mut mu = vec![vec![0.0; n]; m + 1];
    for (j, out) in mu.iter_mut().enumerate() {
        problem.mass().mul_rows(&state.u[j], rows, out);
    }
    let mut phi = vec![vec![0.0; n]; m];
    for (i, p) in phi.iter_mut().enumerate() {
        for a in 0..n {
            let mut q = 0.0;
            for j in 1..=m {
                q += s[(i, j)] * f[j][a];
            }
            p[a] = -(mu[i + 1][a] - mu[i][a]) - state.dt * q;
        }
    }
    Ok(Residual { phi, jac, jumps })
}

fn gating_rates<P: SdcProblem + ?Sized>(
    problem: &P,
    u: &[Vec<f64>],
    w: &[Vec<f64>],
    g: usize,
) -> Result<(Vec<f64>, Vec<f64>), SdcError> {
    let p = &problem.gating_points()[g];
    let mut r = vec![0.0; u.len()];
    let mut d = vec![0.0; u.len()];
    for j in 1..u.len() {
        let (rj, dj) = problem.gating_rate(problem.gating_voltage(&u[j], p), w[j][g])?;
        r[j] = rj;
        d[j] = dj;
    }
    Ok((r, d))
}

/// Full collocation residuals `(Phi, Psi)`, one vector per node interval.
pub fn sdc_residual<P: SdcProblem + ?Sized>(
    state: &SdcState,
    problem: &P,
    scheme: &CollocationScheme,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), SdcError> {
    state.check(problem, scheme)?;
    let rows: Vec<usize> = (0..problem.len()).collect();
    let phi = potential_residual(state, problem, scheme, &rows)?.phi;
    let m = scheme.num_nodes();
    let ng = problem.gating_points().len();
    let mut psi = vec![vec![0.0; ng]; m];
    for g in 0..ng {
        let (r, _) = gating_rates(problem, &state.u, &state.w, g)?;
        for i in 0..m {
            let q: f64 = (1..=m).map(|j| scheme.s()[(i, j)] * r[j]).sum();
            psi[i][g] = -(state.w[i + 1][g] - state.w[i][g]) + state.dt * q;
        }
    }
    Ok((phi, psi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// `||du_i||` in the energy norm of node `i`'s sweep matrix, `i = 1..=m`.
    pub norms: Vec<f64>,
    /// Potential corrections on the active dofs, one vector per node `1..=m`.
    pub corrections: Vec<Vec<f64>>,
    pub solves: Vec<SolveReport>,
    pub active_dofs: usize,
}

impl SweepReport {
    pub fn norm_sq_sum(&self) -> f64 {
        self.norms.iter().map(|x| x * x).sum()
    }

    pub fn iterations(&self) -> usize {
        self.solves.iter().map(|s| s.iterations).sum()
    }

    /// Largest potential correction over nodes and dofs.
    pub fn max_correction(&self) -> f64 {
        self.corrections.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// One sweep on the active set of `system`: the potential at every node,
/// then the gating variables with the updated potential. Appends to the
/// state's norm history and refreshes its contraction estimate.
pub fn sdc_sweep<P: SdcProblem + ?Sized>(
    state: &mut SdcState,
    problem: &P,
    scheme: &CollocationScheme,
    system: &SweepSystem<'_>,
    cg: &CgSettings,
) -> Result<SweepReport, SdcError> {
    state.check(problem, scheme)?;
    let m = scheme.num_nodes();
    let rows = system.active().indices();
    let n = rows.len();
    let dt = state.dt;
    let shat = scheme.shat();

    let Residual { phi, jac, jumps } = potential_residual(state, problem, scheme, rows)?;
    let jac_plus: Vec<Vec<f64>> = jac.iter().map(|j| j.iter().map(|x| x.max(0.0)).collect()).collect();
    let (a, mass) = (system.stiffness(), system.mass());

    let mut du = vec![vec![0.0; n]; m + 1];
    let mut norms = Vec::with_capacity(m);
    let mut solves = Vec::with_capacity(m);
    let mut tmp = vec![0.0; n];
    for i in 0..m {
        let node = i + 1;
        let mut rhs = phi[i].clone();
        if i > 0 {
            mass.mul_vec_into(&du[i], &mut tmp);
            for (r, t) in rhs.iter_mut().zip(&tmp) {
                *r += t;
            }
        }
        for j in 1..=i {
            let c = dt * shat[(i, j)];
            a.mul_vec_into(&du[j], &mut tmp);
            for k in 0..n {
                rhs[k] -= c * (tmp[k] + jac_plus[j][k] * du[j][k]);
            }
            sub_jumps(&jumps[j], c, &du[j], &mut rhs);
        }
        let c = dt * shat[(i, node)];
        let mut sys = mass.add_scaled_same_pattern(c, a);
        let diag = sys.diagonal_positions();
        {
            let vals = sys.values_mut();
            for (k, pos) in diag.iter().enumerate() {
                let pos = pos.ok_or(SdcError::Solve {
                    node,
                    source: LinalgError::NonPositiveDiagonal { row: k, value: 0.0 },
                })?;
                vals[pos] += c * jac_plus[node][k];
            }
        }
        for j in &jumps[node] {
            let cj = c * j.g;
            let mut add = |r: usize, col: usize, v: f64| {
                let pos = sys.position(r, col).ok_or(SdcError::Pattern { row: r, col })?;
                sys.values_mut()[pos] += v;
                Ok::<(), SdcError>(())
            };
            if let Some(a) = j.a {
                add(a, a, cj)?;
            }
            if let Some(b) = j.b {
                add(b, b, cj)?;
            }
            if let (Some(a), Some(b)) = (j.a, j.b) {
                add(a, b, -cj)?;
                add(b, a, -cj)?;
            }
        }
        let (x, report) =
            pcg_jacobi(&sys, &rhs, &vec![0.0; n], cg).map_err(|source| SdcError::Solve { node, source })?;
        norms.push(energy_norm(&sys, &x).map_err(|source| SdcError::Solve { node, source })?);
        solves.push(report);
        let u = &mut state.u[node];
        for (k, &r) in rows.iter().enumerate() {
            u[r] += x[k];
        }
        du[node] = x;
    }

    let gating = system.gating();
    if !gating.is_empty() {
        let mut dw = vec![0.0; m + 1];
        for &g in gating {
            let (r, d) = gating_rates(problem, &state.u, &state.w, g)?;
            dw[0] = 0.0;
            for i in 0..m {
                let node = i + 1;
                let q: f64 = (1..=m).map(|j| scheme.s()[(i, j)] * r[j]).sum();
                let mut rhs = -(state.w[node][g] - state.w[i][g]) + dt * q + dw[i];
                for j in 1..=i {
                    rhs += dt * shat[(i, j)] * d[j] * dw[j];
                }
                let pivot = 1.0 - dt * shat[(i, node)] * d[node];
                if !(pivot > 0.0) {
                    return Err(SdcError::GatingPivot { point: g, node, pivot });
                }
                dw[node] = rhs / pivot;
            }
            for node in 1..=m {
                state.w[node][g] += dw[node];
            }
        }
    }

    let report = SweepReport { norms, corrections: du.split_off(1), solves, active_dofs: n };
    state.sweep += 1;
    state.history.push(report.norm_sq_sum());
    state.rho = estimate_rho(&state.history);
    Ok(report)
}

/// Contraction estimate from successive squared correction norms.
pub fn estimate_rho(history: &[f64]) -> f64 {
    match history {
        [.., prev, last] => {
            if *prev <= 0.0 {
                return if *last <= 0.0 { 0.01 } else { 0.95 };
            }
            (last / prev).sqrt().clamp(0.01, 0.95)
        }
        _ => RHO_INITIAL,
    }
}

/// Geometric-series stopping test on one sweep's correction energy norms.
pub fn check_termination(norms: &[f64], rho: f64, tol: f64) -> bool {
    let sum: f64 = norms.iter().map(|x| x * x).sum();
    let bound = (1.0 - rho) / rho * tol;
    sum <= bound * bound
}
