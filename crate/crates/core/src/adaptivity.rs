//! Drop tolerances, nested active dof sets and restricted sweep systems.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::SdcProblem;
use crate::ionic::MembraneCurrent;
use crate::sparse::{LinalgError, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum AdaptivityError {
    #[error("active set of {child} dofs was not selected from a parent of {parent} dofs")]
    NotNested { parent: usize, child: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Sorted dof indices used by one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    indices: Vec<usize>,
    /// Positions of `indices` within the parent set.
    in_parent: Vec<usize>,
    parent_len: usize,
    sweep: usize,
}

impl ActiveSet {
    /// All `n` dofs; sweep 1.
    pub fn full(n: usize) -> Self {
        Self { indices: (0..n).collect(), in_parent: (0..n).collect(), parent_len: n, sweep: 1 }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn sweep(&self) -> usize {
        self.sweep
    }

    pub fn parent_len(&self) -> usize {
        self.parent_len
    }

    pub fn positions_in_parent(&self) -> &[usize] {
        &self.in_parent
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.indices.binary_search(&dof).is_ok()
    }

    pub fn is_subset_of(&self, other: &ActiveSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropMode {
    Off,
    Empirical,
    Theoretical,
}

/// Inputs of the drop tolerance. `eta`, `rho` and `r` are only read in
/// theoretical mode, `alpha` only in empirical mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropPolicy {
    pub mode: DropMode,
    pub alpha: f64,
    pub eta: f64,
    pub dt: f64,
    pub rho: f64,
    pub r: usize,
    pub tol: f64,
}

impl DropPolicy {
    pub fn empirical(alpha: f64, tol: f64) -> Self {
        Self { mode: DropMode::Empirical, alpha, eta: 0.0, dt: 0.0, rho: 0.05, r: 0, tol }
    }

    pub fn off() -> Self {
        Self { mode: DropMode::Off, ..Self::empirical(0.1, 0.0) }
    }
}

pub fn drop_tolerance(policy: &DropPolicy) -> f64 {
    match policy.mode {
        DropMode::Off => 0.0,
        DropMode::Empirical => policy.alpha * policy.tol,
        DropMode::Theoretical => {
            (-policy.eta * policy.dt).exp() * (1.0 - policy.rho) / (policy.r as f64 + 1.0) * policy.tol
        }
    }
}

/// Smallest `r >= 0` with `c * rho^r <= (1 - rho) * tol`.
pub fn required_sweeps(c: f64, rho: f64, tol: f64) -> usize {
    let target = (1.0 - rho) * tol / c;
    if target >= 1.0 {
        return 0;
    }
    let r = target.ln() / rho.ln();
    // Absorb rounding when r lands on an integer.
    (r - 1e-9).ceil().max(0.0) as usize
}

/// Keeps the parent dofs whose correction reaches `tol_drop` at some node.
/// `corrections[node][a]` is indexed by position `a` in `parent`.
pub fn select_active(corrections: &[Vec<f64>], tol_drop: f64, parent: &ActiveSet) -> ActiveSet {
    let mut indices = Vec::new();
    let mut in_parent = Vec::new();
    for (a, &dof) in parent.indices.iter().enumerate() {
        let peak = corrections.iter().fold(0.0f64, |m, c| m.max(c[a].abs()));
        if peak >= tol_drop {
            indices.push(dof);
            in_parent.push(a);
        }
    }
    ActiveSet { indices, in_parent, parent_len: parent.len(), sweep: parent.sweep + 1 }
}

/// `max(0, -min dI/dv) / (beta c_m)` over the sampled `(v, w)` pairs.
pub fn compute_eta(
    current: &MembraneCurrent,
    samples: impl IntoIterator<Item = (f64, f64)>,
    beta: f64,
    c_m: f64,
) -> f64 {
    let min = samples.into_iter().map(|(v, w)| current.dcurrent_dv(v, w)).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return 0.0;
    }
    (-min).max(0.0) / (beta * c_m)
}

/// Stiffness and mass restricted to an active set; dropped dofs carry a
/// homogeneous Dirichlet condition on the correction.
#[derive(Debug, Clone)]
pub struct SweepSystem<'a> {
    active: ActiveSet,
    a: Cow<'a, SparseMatrix>,
    m: Cow<'a, SparseMatrix>,
    gating: Vec<usize>,
}

impl<'a> SweepSystem<'a> {
    /// The unrestricted system; borrows the problem's matrices.
    pub fn full<P: SdcProblem + ?Sized>(problem: &'a P) -> Self {
        Self {
            active: ActiveSet::full(problem.len()),
            a: Cow::Borrowed(problem.stiffness()),
            m: Cow::Borrowed(problem.mass()),
            gating: (0..problem.gating_points().len()).collect(),
        }
    }

    /// Extracts the child's system from this one using positions relative to
    /// this set, so the cost scales with the current active set.
    pub fn restrict<P: SdcProblem + ?Sized>(
        &self,
        problem: &P,
        child: ActiveSet,
    ) -> Result<SweepSystem<'a>, AdaptivityError> {
        let nested = child.parent_len == self.active.len()
            && child.in_parent.iter().zip(&child.indices).all(|(&p, &i)| self.active.indices.get(p) == Some(&i));
        if !nested {
            return Err(AdaptivityError::NotNested { parent: self.active.len(), child: child.len() });
        }
        let (a, m) = if child.len() == self.active.len() {
            (self.a.clone(), self.m.clone())
        } else {
            (
                Cow::Owned(self.a.submatrix(&child.in_parent)?),
                Cow::Owned(self.m.submatrix(&child.in_parent)?),
            )
        };
        let points = problem.gating_points();
        let gating = self.gating.iter().copied().filter(|&g| child.contains(points[g].dof)).collect();
        Ok(SweepSystem { active: child, a, m, gating })
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.m
    }

    /// Gating points whose dof is active.
    pub fn gating(&self) -> &[usize] {
        &self.gating
    }
}

/// Values of `full` on the active dofs.
pub fn restrict_vector(full: &[f64], active: &ActiveSet) -> Vec<f64> {
    active.indices.iter().map(|&i| full[i]).collect()
}

/// Zero-padded extension of an active-set vector.
pub fn prolong(local: &[f64], active: &ActiveSet, full_size: usize) -> Vec<f64> {
    let mut out = vec![0.0; full_size];
    for (&i, &x) in active.indices.iter().zip(local) {
        out[i] = x;
    }
    out
}
