//! Radau IIa collocation on the reference step `[0, 1]`.
//!
//! Quadrature matrices have `m + 1` columns; column 0 belongs to the start
//! point `tau_0 = 0`, which is not an interpolation node, so it is zero.
//! Row `i` of `s` integrates over `[tau_i, tau_{i+1}]`.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

pub const MAX_NODES: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum CollocationError {
    #[error("node count {0} outside the supported range 1..={MAX_NODES}")]
    UnsupportedNodeCount(usize),
    #[error("collocation nodes must be distinct")]
    DuplicateNodes,
    #[error("zero pivot in row {0}: collocation block has no LU factorization without pivoting")]
    SingularBlock(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationScheme {
    nodes: Vec<f64>,
    s: DMatrix<f64>,
    q: DMatrix<f64>,
    shat: DMatrix<f64>,
}

impl CollocationScheme {
    pub fn radau_iia(m: usize) -> Result<Self, CollocationError> {
        let nodes = radau_iia_nodes(m)?;
        let (s, q) = quadrature_matrix(&nodes)?;
        let shat = lu_trick(&q)?;
        Ok(Self { nodes, s, q, shat })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `tau_1 < ... < tau_m = 1`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node-to-node weights, `m x (m+1)`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Cumulative weights `int_0^{tau_i}`, `m x (m+1)`.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Lower-triangular sweep weights, `m x (m+1)`; row `i` uses columns `..=i+1`.
    pub fn shat(&self) -> &DMatrix<f64> {
        &self.shat
    }
}

/// Eigenvalues of the symmetric tridiagonal Jacobi matrix of a three-term
/// recurrence, with the first components of the eigenvectors.
fn golub_welsch(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let j = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            diag[r]
        } else if r + 1 == c {
            off[r]
        } else if c + 1 == r {
            off[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Legendre `P_n(x)` and `P_{n-1}(x)` with derivatives.
fn legendre(n: usize, x: f64) -> ((f64, f64), (f64, f64)) {
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    if n == 0 {
        return ((1.0, 0.0), (0.0, 0.0));
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        let d2 = ((2.0 * k + 1.0) * (p1 + x * d1) - k * d0) / (k + 1.0);
        (p0, p1, d0, d1) = (p1, p2, d1, d2);
    }
    ((p1, d1), (p0, d0))
}

/// Right Radau points on `(0, 1]`.
///
/// The interior points are the zeros of the Jacobi polynomial
/// `P^{(1,0)}_{m-1}` on `[-1, 1]`, computed as eigenvalues of its Jacobi
/// matrix and polished by Newton on `P_m - P_{m-1}`.
pub fn radau_iia_nodes(m: usize) -> Result<Vec<f64>, CollocationError> {
    if !(1..=MAX_NODES).contains(&m) {
        return Err(CollocationError::UnsupportedNodeCount(m));
    }
    let (alpha, beta) = (1.0f64, 0.0f64);
    let n = m - 1;
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let s = 2.0 * k as f64 + alpha + beta;
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            let s = 2.0 * k + alpha + beta;
            (4.0 * k * (k + alpha) * (k + beta) * (k + alpha + beta)
                / (s * s * (s + 1.0) * (s - 1.0)))
                .sqrt()
        })
        .collect();
    let (roots, _) = if n > 0 { golub_welsch(&diag, &off) } else { (Vec::new(), Vec::new()) };
    let mut nodes: Vec<f64> = roots
        .into_iter()
        .map(|mut x| {
            for _ in 0..2 {
                let ((pm, dm), (pm1, dm1)) = legendre(m, x);
                x -= (pm - pm1) / (dm - dm1);
            }
            0.5 * (x + 1.0)
        })
        .collect();
    nodes.push(1.0);
    Ok(nodes)
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let off: Vec<f64> = (1..n).map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt()).collect();
    let (x, v0) = golub_welsch(&vec![0.0; n], &off);
    let nodes = x.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let weights = v0.iter().map(|v| v * v).collect();
    (nodes, weights)
}

fn lagrange(nodes: &[f64], j: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &tk)| (t - tk) / (nodes[j] - tk))
        .product()
}

/// Spectral quadrature on the collocation nodes: returns `(S, Q)` with
/// `S[i][j] = int_{tau_i}^{tau_{i+1}} l_j` and `Q[i] = sum_{i' <= i} S[i']`.
pub fn quadrature_matrix(nodes: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), CollocationError> {
    let m = nodes.len();
    for a in 0..m {
        for b in a + 1..m {
            if nodes[a] == nodes[b] {
                return Err(CollocationError::DuplicateNodes);
            }
        }
    }
    // The basis has degree m-1, so ceil(m/2) Gauss points would do.
    let (gx, gw) = gauss_legendre_unit(m.max(1));
    let mut s = DMatrix::zeros(m, m + 1);
    let mut left = 0.0;
    for (i, &right) in nodes.iter().enumerate() {
        let h = right - left;
        for j in 0..m {
            s[(i, j + 1)] =
                gx.iter().zip(&gw).map(|(x, w)| w * h * lagrange(nodes, j, left + h * x)).sum();
        }
        left = right;
    }
    let mut q = s.clone();
    for i in 1..m {
        for j in 0..=m {
            q[(i, j)] += q[(i - 1, j)];
        }
    }
    Ok((s, q))
}

/// LU trick: factor the transposed collocation block `Q_c^T = L U` without
/// pivoting and take `Q_hat = U^T`; the sweep weights are row differences of
/// `Q_hat`.
pub fn lu_trick(q: &DMatrix<f64>) -> Result<DMatrix<f64>, CollocationError> {
    let m = q.nrows();
    let mut u = q.columns(1, m).transpose();
    for k in 0..m {
        let pivot = u[(k, k)];
        if pivot.abs() <= f64::EPSILON * u.amax() {
            return Err(CollocationError::SingularBlock(k));
        }
        for r in k + 1..m {
            let l = u[(r, k)] / pivot;
            for c in k..m {
                u[(r, c)] -= l * u[(k, c)];
            }
            u[(r, k)] = 0.0;
        }
    }
    let qhat = u.transpose();
    let mut shat = DMatrix::zeros(m, m + 1);
    for i in 0..m {
        for j in 0..m {
            let prev = if i > 0 { qhat[(i - 1, j)] } else { 0.0 };
            shat[(i, j + 1)] = qhat[(i, j)] - prev;
        }
    }
    Ok(shat)
}
