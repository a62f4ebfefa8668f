#![allow(dead_code)]

use std::path::PathBuf;

use cardiac_sdc::adaptivity::SweepSystem;
use cardiac_sdc::assembly::{AssemblyError, ModelOperators, SdcProblem};
use cardiac_sdc::collocation::CollocationScheme;
use cardiac_sdc::config::SimulationConfig;
use cardiac_sdc::driver::{RunOutput, Simulation, State};
use cardiac_sdc::mesh::MembraneKind;
use cardiac_sdc::sdc::{sdc_sweep, SdcState};
use cardiac_sdc::sparse::{CgSettings, SparseMatrix};
use nalgebra::{DMatrix, DVector};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> SimulationConfig {
    SimulationConfig::from_file(&config_path(name)).expect("bundled config loads")
}

/// The 65x65 monodomain front with output switched off.
pub fn standard_config() -> SimulationConfig {
    let mut c = load_config("monodomain_2d.toml");
    c.output.snapshot_every = 0;
    c
}

/// Same problem solved to a tight tolerance without dropping dofs.
pub fn reference_of(c: &SimulationConfig) -> SimulationConfig {
    let mut r = c.clone();
    r.sdc.tol = 1e-10;
    r.sdc.cg_reduction = 1e-8;
    r.sdc.max_sweeps = 60;
    r.adaptivity.tol_drop = Some(0.0);
    r
}

pub fn run(c: &SimulationConfig) -> RunOutput {
    Simulation::new(c.clone()).expect("simulation builds").run().expect("run completes")
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn tight_cg() -> CgSettings {
    CgSettings { reduction: 1e-15, max_iter: 10_000, ..CgSettings::default() }
}

/// Sweeps on the full dof set until the largest correction falls below
/// `tol`. Returns the number of sweeps.
pub fn converge<P: SdcProblem + ?Sized>(
    state: &mut SdcState,
    problem: &P,
    scheme: &CollocationScheme,
    tol: f64,
    max_sweeps: usize,
) -> usize {
    let system = SweepSystem::full(problem);
    for k in 1..=max_sweeps {
        let report = sdc_sweep(state, problem, scheme, &system, &tight_cg()).expect("sweep");
        if report.max_correction() <= tol {
            return k;
        }
    }
    max_sweeps
}

fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| d[i][j])
}

/// Collocation solution of `M u' = -K u` on one step by a dense block solve:
/// `M U_i + dt sum_j Q_ij K U_j = M u0`, `i = 1..=m`.
pub fn dense_collocation(m_mat: &SparseMatrix, k_mat: &SparseMatrix, u0: &[f64], dt: f64, q: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = u0.len();
    let m = q.nrows();
    let (mm, kk) = (dense(m_mat), dense(k_mat));
    let mu0 = &mm * DVector::from_column_slice(u0);
    let mut big = DMatrix::zeros(m * n, m * n);
    let mut rhs = DVector::zeros(m * n);
    for i in 0..m {
        for j in 0..m {
            let mut block = &kk * (dt * q[(i, j + 1)]);
            if i == j {
                block += &mm;
            }
            big.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
        rhs.rows_mut(i * n, n).copy_from(&mu0);
    }
    let x = big.lu().solve(&rhs).expect("collocation system is regular");
    (0..m).map(|i| x.rows(i * n, n).iter().copied().collect()).collect()
}

/// Scalar `u' = -u^p` with `M = 1`, `A = 0`.
pub struct PowerDecay {
    p: i32,
    a: SparseMatrix,
    m: SparseMatrix,
}

impl PowerDecay {
    pub fn new(p: i32) -> Self {
        assert!(p >= 2);
        Self {
            p,
            a: SparseMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]).unwrap(),
            m: SparseMatrix::identity(1),
        }
    }

    /// Exact solution from `u(0) = 1`: `(1 + (p - 1) t)^(-1 / (p - 1))`.
    pub fn exact(&self, t: f64) -> f64 {
        let q = f64::from(self.p - 1);
        (1.0 + q * t).powf(-1.0 / q)
    }
}

impl SdcProblem for PowerDecay {
    fn len(&self) -> usize {
        1
    }

    fn stiffness(&self) -> &SparseMatrix {
        &self.a
    }

    fn mass(&self) -> &SparseMatrix {
        &self.m
    }

    fn reaction(&self, u: &[f64], _: &[f64], rows: &[usize], b: &mut [f64], jac: &mut [f64]) -> Result<(), AssemblyError> {
        for (k, &r) in rows.iter().enumerate() {
            b[k] = u[r].powi(self.p);
            jac[k] = f64::from(self.p) * u[r].powi(self.p - 1);
        }
        Ok(())
    }
}

/// Linear `u' = lambda u` with `lambda < 0`.
pub struct Decay {
    a: SparseMatrix,
    m: SparseMatrix,
}

impl Decay {
    pub fn new(lambda: f64) -> Self {
        Self { a: SparseMatrix::from_dense(&[vec![-lambda]]), m: SparseMatrix::identity(1) }
    }
}

impl SdcProblem for Decay {
    fn len(&self) -> usize {
        1
    }

    fn stiffness(&self) -> &SparseMatrix {
        &self.a
    }

    fn mass(&self) -> &SparseMatrix {
        &self.m
    }

    fn reaction(&self, _: &[f64], _: &[f64], rows: &[usize], b: &mut [f64], jac: &mut [f64]) -> Result<(), AssemblyError> {
        b[..rows.len()].fill(0.0);
        jac[..rows.len()].fill(0.0);
        Ok(())
    }
}

/// Mean transmembrane voltage over the outer membrane of each myocyte,
/// indexed by myocyte id (entry 0 unused).
pub fn membrane_means(sim: &Simulation, state: &State) -> Vec<f64> {
    let ops: &ModelOperators = &sim.ops;
    let k = sim.mesh.num_myocytes() as usize + 1;
    let mut sum = vec![0.0; k];
    let mut count = vec![0.0; k];
    for fd in ops.dofs().facet_dofs() {
        let f = &sim.mesh.membrane_facets()[fd.facet];
        if f.kind != MembraneKind::OuterMembrane {
            continue;
        }
        let cell = f.sides.1 as usize;
        for i in 0..2 {
            sum[cell] += state.u[fd.second[i]] - state.u[fd.first[i]];
            count[cell] += 1.0;
        }
    }
    sum.iter().zip(&count).map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 }).collect()
}

/// Time at which each series first reaches `level`, linearly interpolated
/// between samples.
pub fn crossing_times(times: &[f64], series: &[Vec<f64>], level: f64) -> Vec<Option<f64>> {
    let k = series.first().map_or(0, |s| s.len());
    (0..k)
        .map(|c| {
            if series[0][c] >= level {
                return Some(times[0]);
            }
            (1..series.len()).find(|&i| series[i][c] >= level).map(|i| {
                let (a, b) = (series[i - 1][c], series[i][c]);
                times[i - 1] + (level - a) / (b - a) * (times[i] - times[i - 1])
            })
        })
        .collect()
}
