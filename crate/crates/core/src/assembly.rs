//! P1 finite element operators for `M u' = -A u - b(u, w)`, `w' = R(u, w)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ionic::{GapJunction, IonicError, MembraneCurrent};
use crate::mesh::{DofMap, DofMode, GatingPoint, MembraneKind, Mesh};
use crate::sparse::{LinalgError, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("no conductivity given for subdomain {0}")]
    MissingConductivity(u32),
    #[error("conductivity of subdomain {0} must be positive")]
    BadConductivity(u32),
    #[error("membrane mass needs an EMI dof map")]
    NotEmi,
    #[error("dof map mode does not match the requested model")]
    ModeMismatch,
    #[error("state vectors sized {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Ionic(#[from] IonicError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Physical parameters; defaults are the tabulated values for both models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    /// Monodomain conductivity [S/m].
    pub sigma_m: f64,
    /// Extracellular conductivity [S/m].
    pub sigma_extra: f64,
    /// Intracellular conductivity [S/m].
    pub sigma_intra: f64,
    /// Membrane capacitance [F/m^2].
    pub c_m: f64,
    /// Gap junction resistance [Ohm m^2].
    pub r_g: f64,
    /// Membrane area per volume [1/m], used as beta.
    pub chi: f64,
    /// Robin coefficient on the outer boundary in the EMI model [S/m^2].
    pub robin_eps: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            sigma_m: 0.3,
            sigma_extra: 2.0,
            sigma_intra: 0.3,
            c_m: 1e-4,
            r_g: 4.5e-4,
            chi: 1400.0,
            robin_eps: 1.0,
        }
    }
}

impl Physics {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("sigma_m", self.sigma_m),
            ("sigma_extra", self.sigma_extra),
            ("sigma_intra", self.sigma_intra),
            ("c_m", self.c_m),
            ("r_g", self.r_g),
            ("chi", self.chi),
            ("robin_eps", self.robin_eps),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("physics.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Gradients of the P1 basis on a triangle, times twice the area.
fn scaled_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = [
        [p[1][1] - p[2][1], p[2][0] - p[1][0]],
        [p[2][1] - p[0][1], p[0][0] - p[2][0]],
        [p[0][1] - p[1][1], p[1][0] - p[0][0]],
    ];
    (g, area2)
}

fn element_dofs(mesh: &Mesh, dofs: &DofMap, e: usize) -> Vec<usize> {
    match dofs.mode() {
        DofMode::Monodomain => mesh.element(e).to_vec(),
        DofMode::Emi => dofs.element_dofs(mesh, e)[..mesh.dim() + 1].to_vec(),
    }
}

/// Stiffness with per-subdomain conductivity `conductivity[id]`, plus
/// `robin_eps` times the boundary mass.
pub fn assemble_stiffness(
    mesh: &Mesh,
    dofs: &DofMap,
    conductivity: &[f64],
    robin_eps: f64,
) -> Result<SparseMatrix, AssemblyError> {
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let s = mesh.subdomain(e);
        let sigma =
            *conductivity.get(s as usize).ok_or(AssemblyError::MissingConductivity(s))?;
        if !(sigma > 0.0) {
            return Err(AssemblyError::BadConductivity(s));
        }
        let d = element_dofs(mesh, dofs, e);
        let nodes = mesh.element(e);
        if mesh.dim() == 1 {
            let k = sigma / mesh.element_measure(e);
            for a in 0..2 {
                for b in 0..2 {
                    t.push((d[a], d[b], if a == b { k } else { -k }));
                }
            }
        } else {
            let (g, area2) = scaled_gradients([nodes[0], nodes[1], nodes[2]].map(|v| mesh.vertex(v)));
            let f = sigma / (2.0 * area2);
            for a in 0..3 {
                for b in 0..3 {
                    t.push((d[a], d[b], f * (g[a][0] * g[b][0] + g[a][1] * g[b][1])));
                }
            }
        }
    }
    if robin_eps > 0.0 {
        for bf in mesh.boundary_facets() {
            let s = mesh.subdomain(bf.element);
            let map = |v: usize| match dofs.mode() {
                DofMode::Monodomain => v,
                DofMode::Emi => dofs.dof(v, s).expect("boundary vertex carries its subdomain"),
            };
            if let [v] = bf.vertices[..] {
                t.push((map(v), map(v), robin_eps));
            } else {
                let [a, b] = [bf.vertices[0], bf.vertices[1]];
                let l = mesh.facet_length([a, b]);
                let (da, db) = (map(a), map(b));
                for (x, y, w) in [(da, da, 2.0), (db, db, 2.0), (da, db, 1.0), (db, da, 1.0)] {
                    t.push((x, y, robin_eps * l * w / 6.0));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(dofs.len(), dofs.len(), &t)?)
}

/// Consistent P1 mass scaled by `beta * c_m`.
pub fn assemble_mass_monodomain(mesh: &Mesh, beta: f64, c_m: f64) -> SparseMatrix {
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    let scale = beta * c_m;
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element(e);
        let meas = mesh.element_measure(e);
        let k = nodes.len();
        // P1 simplex mass: |T| (1 + delta_ab) / ((d+1)(d+2))
        let denom = (k * (k + 1)) as f64;
        for a in 0..k {
            for b in 0..k {
                let w = if a == b { 2.0 } else { 1.0 };
                t.push((nodes[a], nodes[b], scale * meas * w / denom));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("vertex ids in range")
}

/// Row-sum lumped P1 mass (unscaled).
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element(e);
        let share = mesh.element_measure(e) / nodes.len() as f64;
        for &v in nodes {
            out[v] += share;
        }
    }
    out
}

/// Capacitive coupling on membrane facets: each facet contributes
/// `c_m * [Mf, -Mf; -Mf, Mf]` over its two sides' dofs, `Mf` the P1 facet mass.
pub fn assemble_membrane_mass_emi(
    mesh: &Mesh,
    dofs: &DofMap,
    c_m: f64,
) -> Result<SparseMatrix, AssemblyError> {
    if dofs.mode() != DofMode::Emi {
        return Err(AssemblyError::NotEmi);
    }
    let mut t = Vec::with_capacity(16 * dofs.facet_dofs().len());
    for fd in dofs.facet_dofs() {
        let l = mesh.facet_length(mesh.membrane_facets()[fd.facet].vertices);
        for a in 0..2 {
            for b in 0..2 {
                let mf = c_m * l * if a == b { 2.0 } else { 1.0 } / 6.0;
                t.push((fd.first[a], fd.first[b], mf));
                t.push((fd.second[a], fd.second[b], mf));
                t.push((fd.first[a], fd.second[b], -mf));
                t.push((fd.second[a], fd.first[b], -mf));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(dofs.len(), dofs.len(), &t)?)
}

/// Everything the SDC sweep needs from a semidiscrete model:
/// `M u' = -A u - b(u, w)` and pointwise `w' = R(v, w)` on gating points.
pub trait SdcProblem {
    fn len(&self) -> usize;

    /// Stiffness; shares its sparsity pattern with [`SdcProblem::mass`].
    fn stiffness(&self) -> &SparseMatrix;

    fn mass(&self) -> &SparseMatrix;

    /// Reaction `b` and the diagonal of its lumped Jacobian on the given rows.
    fn reaction(
        &self,
        u: &[f64],
        w: &[f64],
        rows: &[usize],
        b: &mut [f64],
        jac: &mut [f64],
    ) -> Result<(), AssemblyError>;

    /// Off-diagonal part of the reaction Jacobian as couplings between a
    /// dof pair whose load depends on their difference only.
    fn jump_jacobian(&self, _u: &[f64], _w: &[f64]) -> Result<Vec<JumpCoupling>, AssemblyError> {
        Ok(Vec::new())
    }

    fn gating_points(&self) -> &[GatingPoint] {
        &[]
    }

    /// Transmembrane voltage seen by a gating point.
    fn gating_voltage(&self, u: &[f64], p: &GatingPoint) -> f64 {
        u[p.dof] - p.partner.map_or(0.0, |q| u[q])
    }

    /// `(R(v, w), dR/dw)`.
    fn gating_rate(&self, _v: f64, _w: f64) -> Result<(f64, f64), AssemblyError> {
        Ok((0.0, 0.0))
    }
}

/// Jacobian block `g [[1, -1], [-1, 1]]` on `dofs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCoupling {
    pub dofs: [usize; 2],
    pub g: f64,
}

#[derive(Debug, Clone)]
struct EmiFacet {
    kind: MembraneKind,
    len: f64,
    first: [usize; 2],
    second: [usize; 2],
}

#[derive(Debug, Clone)]
enum Reaction {
    Monodomain { scale: f64, lumped: Vec<f64> },
    Emi { facets: Vec<EmiFacet>, gap: GapJunction, gating_index: Vec<usize> },
}

/// Assembled operators of either model. `A` and `M` are stored on a common
/// sparsity pattern so sweep matrices `M + c (A + D)` are formed entrywise.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    dofs: DofMap,
    a: SparseMatrix,
    m: SparseMatrix,
    current: MembraneCurrent,
    reaction: Reaction,
    gating: Vec<GatingPoint>,
    capacitance: f64,
}

impl ModelOperators {
    /// `chi c_m (v' + I) = div(sigma_m grad v)` in Aliev-Panfilov model time,
    /// i.e. `v' = D lap v - I` with `D = sigma_m / (chi c_m)`.
    pub fn monodomain(
        mesh: &Mesh,
        dofs: DofMap,
        physics: &Physics,
        current: MembraneCurrent,
    ) -> Result<Self, AssemblyError> {
        if dofs.mode() != DofMode::Monodomain {
            return Err(AssemblyError::ModeMismatch);
        }
        let a = assemble_stiffness(mesh, &dofs, &[physics.sigma_m], 0.0)?;
        let m = assemble_mass_monodomain(mesh, physics.chi, physics.c_m);
        let (a, m) = (a.on_union_pattern(&m), m.on_union_pattern(&a));
        let gating = if current.gated().is_some() { dofs.gating_points().to_vec() } else { Vec::new() };
        Ok(Self {
            reaction: Reaction::Monodomain { scale: physics.chi * physics.c_m, lumped: lumped_mass(mesh) },
            dofs,
            a,
            m,
            current,
            gating,
            capacitance: 1.0,
        })
    }

    /// Cell-by-cell model in seconds: `c_m v' + I(v)` on membranes,
    /// `v / r_g` across gap junctions.
    pub fn emi(
        mesh: &Mesh,
        dofs: DofMap,
        physics: &Physics,
        current: MembraneCurrent,
    ) -> Result<Self, AssemblyError> {
        if dofs.mode() != DofMode::Emi {
            return Err(AssemblyError::ModeMismatch);
        }
        let mut sigma = vec![physics.sigma_intra; mesh.num_myocytes() as usize + 1];
        sigma[0] = physics.sigma_extra;
        let a = assemble_stiffness(mesh, &dofs, &sigma, physics.robin_eps)?;
        let m = assemble_membrane_mass_emi(mesh, &dofs, physics.c_m)?;
        let (a, m) = (a.on_union_pattern(&m), m.on_union_pattern(&a));
        let facets = dofs
            .facet_dofs()
            .iter()
            .map(|fd| {
                let f = &mesh.membrane_facets()[fd.facet];
                EmiFacet { kind: f.kind, len: mesh.facet_length(f.vertices), first: fd.first, second: fd.second }
            })
            .collect();
        let gating = if current.gated().is_some() { dofs.gating_points().to_vec() } else { Vec::new() };
        let mut gating_index = vec![usize::MAX; dofs.len()];
        for (g, p) in gating.iter().enumerate() {
            gating_index[p.dof] = g;
        }
        Ok(Self {
            reaction: Reaction::Emi { facets, gap: GapJunction { r_g: physics.r_g }, gating_index },
            dofs,
            a,
            m,
            current,
            gating,
            capacitance: physics.c_m,
        })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn current(&self) -> &MembraneCurrent {
        &self.current
    }

    /// Factor between the potential's rate of change and the membrane
    /// current: 1 for the monodomain model in model time, `c_m` for EMI.
    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    fn check_state(&self, u: &[f64], w: &[f64]) -> Result<(), AssemblyError> {
        let n = self.dofs.len();
        if u.len() != n {
            return Err(AssemblyError::Dimension { expected: n, got: u.len() });
        }
        if w.len() != self.gating.len() {
            return Err(AssemblyError::Dimension { expected: self.gating.len(), got: w.len() });
        }
        Ok(())
    }

    /// Full reaction vector and its diagonal Jacobian. The diagonal is zero
    /// for EMI, where the Jacobian is carried by [`Self::jump_jacobian`].
    pub fn assemble_reaction(
        &self,
        u: &[f64],
        w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), AssemblyError> {
        self.check_state(u, w)?;
        let n = self.dofs.len();
        let mut b = vec![0.0; n];
        let mut jac = vec![0.0; n];
        match &self.reaction {
            Reaction::Monodomain { .. } => {
                let rows: Vec<usize> = (0..n).collect();
                self.monodomain_rows(u, w, &rows, &mut b, &mut jac);
            }
            Reaction::Emi { facets, gap, gating_index } => {
                self.emi_full(facets, gap, gating_index, u, w, &mut b, None);
            }
        }
        Ok((b, jac))
    }

    fn monodomain_rows(&self, u: &[f64], w: &[f64], rows: &[usize], b: &mut [f64], jac: &mut [f64]) {
        let Reaction::Monodomain { scale, lumped } = &self.reaction else { unreachable!() };
        let gated = !w.is_empty();
        for (k, &r) in rows.iter().enumerate() {
            let wr = if gated { w[r] } else { 0.0 };
            let s = scale * lumped[r];
            b[k] = s * self.current.current(u[r], wr);
            jac[k] = s * self.current.dcurrent_dv(u[r], wr);
        }
    }

    /// Nodal quadrature on every membrane facet: each facet vertex carries
    /// `len/2 * I(v)` with `v = u_second - u_first`, loaded `+` on the second
    /// side and `-` on the first. Pushes the matching jump Jacobian entries.
    #[allow(clippy::too_many_arguments)]
    fn emi_full(
        &self,
        facets: &[EmiFacet],
        gap: &GapJunction,
        gating_index: &[usize],
        u: &[f64],
        w: &[f64],
        b: &mut [f64],
        mut pairs: Option<&mut Vec<JumpCoupling>>,
    ) {
        let w_at = |dof: usize| match gating_index[dof] {
            usize::MAX => 0.0,
            g => w[g],
        };
        for f in facets {
            for k in 0..2 {
                let (s, fi) = (f.second[k], f.first[k]);
                let v = u[s] - u[fi];
                let (i, g) = match f.kind {
                    MembraneKind::OuterMembrane => {
                        let wk = w_at(s);
                        (self.current.current(v, wk), self.current.dcurrent_dv(v, wk))
                    }
                    MembraneKind::GapJunction => (gap.current(v), gap.conductance()),
                };
                let h = 0.5 * f.len;
                b[s] += h * i;
                b[fi] -= h * i;
                if let Some(p) = pairs.as_deref_mut() {
                    p.push(JumpCoupling { dofs: [s, fi], g: h * g });
                }
            }
        }
    }

    /// Jacobian of the EMI membrane load as jump couplings; empty for the
    /// monodomain model, whose Jacobian is diagonal.
    pub fn jump_jacobian(&self, u: &[f64], w: &[f64]) -> Result<Vec<JumpCoupling>, AssemblyError> {
        let mut out = Vec::new();
        if let Reaction::Emi { facets, gap, gating_index } = &self.reaction {
            self.check_state(u, w)?;
            let mut b = vec![0.0; u.len()];
            self.emi_full(facets, gap, gating_index, u, w, &mut b, Some(&mut out));
        }
        Ok(out)
    }
}

impl SdcProblem for ModelOperators {
    fn len(&self) -> usize {
        self.dofs.len()
    }

    fn stiffness(&self) -> &SparseMatrix {
        &self.a
    }

    fn mass(&self) -> &SparseMatrix {
        &self.m
    }

    fn reaction(
        &self,
        u: &[f64],
        w: &[f64],
        rows: &[usize],
        b: &mut [f64],
        jac: &mut [f64],
    ) -> Result<(), AssemblyError> {
        match &self.reaction {
            Reaction::Monodomain { .. } => self.monodomain_rows(u, w, rows, b, jac),
            Reaction::Emi { .. } => {
                let (fb, fj) = self.assemble_reaction(u, w)?;
                for (k, &r) in rows.iter().enumerate() {
                    b[k] = fb[r];
                    jac[k] = fj[r];
                }
            }
        }
        Ok(())
    }

    fn jump_jacobian(&self, u: &[f64], w: &[f64]) -> Result<Vec<JumpCoupling>, AssemblyError> {
        ModelOperators::jump_jacobian(self, u, w)
    }

    fn gating_points(&self) -> &[GatingPoint] {
        &self.gating
    }

    fn gating_rate(&self, v: f64, w: f64) -> Result<(f64, f64), AssemblyError> {
        match self.current.gated() {
            Some(ap) => Ok((ap.r_gate(v, w)?, ap.dr_dw(v, w)?)),
            None => Ok((0.0, 0.0)),
        }
    }
}
