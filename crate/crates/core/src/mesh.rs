//! Structured simplicial meshes and the finite element dof numbering.
//!
//! Two families are supported: Cartesian grids for the homogenized
//! monodomain model (1D segments or 2D triangles), and 2D cell-by-cell
//! layouts where axis-aligned rectangular myocytes sit in an extracellular
//! bath. Every element carries a subdomain id (0 = bath/tissue, 1..N =
//! myocytes). Facets between elements of different subdomains are membranes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Subdomain id of the extracellular bath (or homogenized tissue).
pub const EXTRACELLULAR: u32 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("cell count must be positive on every axis, got {0:?}")]
    ZeroCells(Vec<usize>),
    #[error("extent must be positive and finite on every axis, got {0:?}")]
    BadExtent(Vec<f64>),
    #[error("dimension must be 1 or 2 with matching axis data, got dim={dim} cells={cells} extents={extents}")]
    BadDimension { dim: usize, cells: usize, extents: usize },
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("myocyte {index} is empty or inverted")]
    DegenerateMyocyte { index: usize },
    #[error("coordinate {value} of myocyte {index} is not on the grid of spacing {spacing}")]
    OffGrid { index: usize, value: f64, spacing: f64 },
    #[error("myocytes {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("myocyte {index} is not strictly inside the bath")]
    OutsideBath { index: usize },
    #[error("bath margin must be non-negative, got {0}")]
    BadMargin(f64),
    #[error("an EMI layout needs at least one myocyte")]
    NoMyocytes,
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    fn interiors_overlap(&self, other: &Rect) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MembraneKind {
    /// Between a myocyte and the extracellular bath.
    OuterMembrane,
    /// Between two myocytes.
    GapJunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    /// One vertex in 1D, two in 2D.
    pub vertices: Vec<usize>,
    pub element: usize,
}

/// A facet shared by elements of two distinct subdomains. `sides.0 < sides.1`,
/// so for an outer membrane `sides.0` is the bath.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneFacet {
    pub vertices: [usize; 2],
    pub sides: (u32, u32),
    pub kind: MembraneKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<[f64; 2]>,
    /// Flat connectivity, `dim + 1` vertices per element.
    connectivity: Vec<usize>,
    subdomains: Vec<u32>,
    boundary_facets: Vec<BoundaryFacet>,
    membrane_facets: Vec<MembraneFacet>,
    volume: f64,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.subdomains.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.connectivity[e * n..(e + 1) * n]
    }

    pub fn subdomain(&self, e: usize) -> u32 {
        self.subdomains[e]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn membrane_facets(&self) -> &[MembraneFacet] {
        &self.membrane_facets
    }

    /// Volume (length/area) of the bounding domain.
    pub fn domain_volume(&self) -> f64 {
        self.volume
    }

    /// Highest subdomain id present.
    pub fn num_myocytes(&self) -> u32 {
        self.subdomains.iter().copied().max().unwrap_or(0)
    }

    /// Signed length (1D) or area (2D) of an element.
    pub fn element_measure(&self, e: usize) -> f64 {
        let nodes = self.element(e);
        match self.dim {
            1 => (self.vertices[nodes[1]][0] - self.vertices[nodes[0]][0]).abs(),
            _ => {
                let [a, b, c] = [nodes[0], nodes[1], nodes[2]].map(|v| self.vertices[v]);
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    pub fn facet_length(&self, vertices: [usize; 2]) -> f64 {
        let [a, b] = vertices.map(|v| self.vertices[v]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Uniform Cartesian grid. In 2D each quad is split along its (+x,+y)
    /// diagonal into two counter-clockwise triangles.
    pub fn cartesian(cells: &[usize], extent: &[f64]) -> Result<Mesh, MeshError> {
        let dim = cells.len();
        if !(1..=2).contains(&dim) || extent.len() != dim {
            return Err(MeshError::BadDimension { dim, cells: cells.len(), extents: extent.len() });
        }
        if cells.contains(&0) {
            return Err(MeshError::ZeroCells(cells.to_vec()));
        }
        if extent.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(MeshError::BadExtent(extent.to_vec()));
        }
        if dim == 1 {
            let n = cells[0];
            let h = extent[0] / n as f64;
            let vertices = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
            let connectivity = (0..n).flat_map(|i| [i, i + 1]).collect();
            let boundary_facets = vec![
                BoundaryFacet { vertices: vec![0], element: 0 },
                BoundaryFacet { vertices: vec![n], element: n - 1 },
            ];
            return Ok(Mesh {
                dim,
                vertices,
                connectivity,
                subdomains: vec![EXTRACELLULAR; n],
                boundary_facets,
                membrane_facets: Vec::new(),
                volume: extent[0],
            });
        }
        let (nx, ny) = (cells[0], cells[1]);
        let (hx, hy) = (extent[0] / nx as f64, extent[1] / ny as f64);
        Ok(Self::structured_2d(nx, ny, hx, hy, [0.0, 0.0], |_, _| EXTRACELLULAR))
    }

    /// Cell-by-cell layout on a structured grid. Elements inside myocyte `k`
    /// get subdomain id `k + 1`, everything else is bath.
    pub fn emi(layout: &EmiLayout) -> Result<Mesh, MeshError> {
        let bath = layout.validate()?;
        let h = layout.spacing;
        let nx = ((bath.max[0] - bath.min[0]) / h).round() as usize;
        let ny = ((bath.max[1] - bath.min[1]) / h).round() as usize;
        let origin = bath.min;
        let myocytes = &layout.myocytes;
        Ok(Self::structured_2d(nx, ny, h, h, origin, |cx, cy| {
            myocytes
                .iter()
                .position(|r| r.contains([cx, cy]))
                .map_or(EXTRACELLULAR, |k| k as u32 + 1)
        }))
    }

    fn structured_2d(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        origin: [f64; 2],
        tag: impl Fn(f64, f64) -> u32,
    ) -> Mesh {
        let vid = |i: usize, j: usize| i + (nx + 1) * j;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([origin[0] + i as f64 * hx, origin[1] + j as f64 * hy]);
            }
        }
        let mut connectivity = Vec::with_capacity(6 * nx * ny);
        let mut subdomains = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let sub = tag(origin[0] + (i as f64 + 0.5) * hx, origin[1] + (j as f64 + 0.5) * hy);
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                connectivity.extend_from_slice(&[v00, v10, v11]);
                connectivity.extend_from_slice(&[v00, v11, v01]);
                subdomains.extend_from_slice(&[sub, sub]);
            }
        }

        // Edge -> incident elements, ordered by vertex pair for determinism.
        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for e in 0..subdomains.len() {
            let t = &connectivity[3 * e..3 * e + 3];
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.entry((a.min(b), a.max(b))).or_default().push(e);
            }
        }
        let mut boundary_facets = Vec::new();
        let mut membrane_facets = Vec::new();
        for ((a, b), elems) in edges {
            match elems.as_slice() {
                [e] => boundary_facets.push(BoundaryFacet { vertices: vec![a, b], element: *e }),
                [e, f] if subdomains[*e] != subdomains[*f] => {
                    let (s, t) = (subdomains[*e], subdomains[*f]);
                    let sides = (s.min(t), s.max(t));
                    let kind = if sides.0 == EXTRACELLULAR {
                        MembraneKind::OuterMembrane
                    } else {
                        MembraneKind::GapJunction
                    };
                    membrane_facets.push(MembraneFacet { vertices: [a, b], sides, kind });
                }
                _ => {}
            }
        }
        Mesh {
            dim: 2,
            vertices,
            connectivity,
            subdomains,
            boundary_facets,
            membrane_facets,
            volume: nx as f64 * hx * ny as f64 * hy,
        }
    }
}

/// Rectangular myocytes on a grid of spacing `spacing`. The bath is either
/// given explicitly or taken as the myocytes' bounding box grown by
/// `bath_margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmiLayout {
    pub spacing: f64,
    pub myocytes: Vec<Rect>,
    #[serde(default)]
    pub bath_margin: f64,
    #[serde(default)]
    pub bath: Option<Rect>,
}

impl EmiLayout {
    /// `cols x rows` myocytes of size `cell`, separated by `gap` (0 gives
    /// gap junctions between neighbours), lower-left corner at the origin.
    pub fn grid(
        cols: usize,
        rows: usize,
        cell: [f64; 2],
        gap: f64,
        spacing: f64,
        bath_margin: f64,
    ) -> Self {
        let mut myocytes = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                let x0 = c as f64 * (cell[0] + gap);
                let y0 = r as f64 * (cell[1] + gap);
                myocytes.push(Rect::new([x0, y0], [x0 + cell[0], y0 + cell[1]]));
            }
        }
        Self { spacing, myocytes, bath_margin, bath: None }
    }

    /// Returns the bath rectangle.
    fn validate(&self) -> Result<Rect, MeshError> {
        let h = self.spacing;
        if !(h > 0.0 && h.is_finite()) {
            return Err(MeshError::BadSpacing(h));
        }
        if !(self.bath_margin >= 0.0) {
            return Err(MeshError::BadMargin(self.bath_margin));
        }
        if self.myocytes.is_empty() {
            return Err(MeshError::NoMyocytes);
        }
        let on_grid = |x: f64| ((x / h).round() * h - x).abs() <= 1e-9 * h.max(x.abs());
        for (index, r) in self.myocytes.iter().enumerate() {
            if !(r.max[0] > r.min[0] && r.max[1] > r.min[1]) {
                return Err(MeshError::DegenerateMyocyte { index });
            }
            for value in [r.min[0], r.min[1], r.max[0], r.max[1]] {
                if !on_grid(value) {
                    return Err(MeshError::OffGrid { index, value, spacing: h });
                }
            }
        }
        for i in 0..self.myocytes.len() {
            for j in i + 1..self.myocytes.len() {
                if self.myocytes[i].interiors_overlap(&self.myocytes[j]) {
                    return Err(MeshError::Overlap(i, j));
                }
            }
        }
        let bath = match self.bath {
            Some(b) => b,
            None => {
                let mut b = self.myocytes[0];
                for r in &self.myocytes[1..] {
                    b.min = [b.min[0].min(r.min[0]), b.min[1].min(r.min[1])];
                    b.max = [b.max[0].max(r.max[0]), b.max[1].max(r.max[1])];
                }
                let m = self.bath_margin;
                Rect::new([b.min[0] - m, b.min[1] - m], [b.max[0] + m, b.max[1] + m])
            }
        };
        for value in [bath.min[0], bath.min[1], bath.max[0], bath.max[1]] {
            if !on_grid(value) {
                return Err(MeshError::OffGrid { index: usize::MAX, value, spacing: h });
            }
        }
        for (index, r) in self.myocytes.iter().enumerate() {
            let inside = r.min[0] >= bath.min[0]
                && r.min[1] >= bath.min[1]
                && r.max[0] <= bath.max[0]
                && r.max[1] <= bath.max[1];
            if !inside {
                return Err(MeshError::OutsideBath { index });
            }
        }
        Ok(bath)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DofMode {
    Monodomain,
    Emi,
}

/// A gating state location. In the monodomain model every dof carries one;
/// in the EMI model they sit on the intracellular side of outer membranes,
/// and `partner` is the bath dof at the same vertex (v = u[dof] - u[partner]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatingPoint {
    pub dof: usize,
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetDofs {
    pub facet: usize,
    /// Dofs of `sides.0` at the two facet vertices.
    pub first: [usize; 2],
    /// Dofs of `sides.1` at the two facet vertices.
    pub second: [usize; 2],
}

/// Numbering of (vertex, subdomain) pairs. Dofs are assigned vertex by
/// vertex, and within a vertex by ascending subdomain id.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    mode: DofMode,
    /// `offsets[v]..offsets[v+1]` indexes `subdomain_of` for vertex `v`.
    offsets: Vec<usize>,
    subdomain_of: Vec<u32>,
    vertex_of: Vec<usize>,
    facet_dofs: Vec<FacetDofs>,
    gating: Vec<GatingPoint>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, mode: DofMode) -> Self {
        let nv = mesh.num_vertices();
        let mut per_vertex: Vec<Vec<u32>> = vec![Vec::new(); nv];
        match mode {
            DofMode::Monodomain => per_vertex.iter_mut().for_each(|s| s.push(EXTRACELLULAR)),
            DofMode::Emi => {
                for e in 0..mesh.num_elements() {
                    let s = mesh.subdomain(e);
                    for &v in mesh.element(e) {
                        if !per_vertex[v].contains(&s) {
                            per_vertex[v].push(s);
                        }
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(nv + 1);
        let mut subdomain_of = Vec::new();
        let mut vertex_of = Vec::new();
        offsets.push(0);
        for (v, subs) in per_vertex.iter_mut().enumerate() {
            subs.sort_unstable();
            for &s in subs.iter() {
                subdomain_of.push(s);
                vertex_of.push(v);
            }
            offsets.push(subdomain_of.len());
        }
        let mut map = DofMap {
            mode,
            offsets,
            subdomain_of,
            vertex_of,
            facet_dofs: Vec::new(),
            gating: Vec::new(),
        };

        if mode == DofMode::Monodomain {
            map.gating = (0..map.len()).map(|dof| GatingPoint { dof, partner: None }).collect();
            return map;
        }

        let mut facet_dofs = Vec::with_capacity(mesh.membrane_facets().len());
        let mut gating = BTreeMap::new();
        for (facet, f) in mesh.membrane_facets().iter().enumerate() {
            let [a, b] = f.vertices;
            let lookup = |v, s| map.dof(v, s).expect("membrane vertex carries both subdomains");
            let first = [lookup(a, f.sides.0), lookup(b, f.sides.0)];
            let second = [lookup(a, f.sides.1), lookup(b, f.sides.1)];
            if f.kind == MembraneKind::OuterMembrane {
                for k in 0..2 {
                    gating.insert(second[k], first[k]);
                }
            }
            facet_dofs.push(FacetDofs { facet, first, second });
        }
        map.facet_dofs = facet_dofs;
        map.gating =
            gating.into_iter().map(|(dof, p)| GatingPoint { dof, partner: Some(p) }).collect();
        map
    }

    pub fn mode(&self) -> DofMode {
        self.mode
    }

    /// Total number of dofs, N_h.
    pub fn len(&self) -> usize {
        self.vertex_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_of.is_empty()
    }

    pub fn dof(&self, vertex: usize, subdomain: u32) -> Option<usize> {
        let range = self.offsets[vertex]..self.offsets[vertex + 1];
        let local = self.subdomain_of[range.clone()].iter().position(|&s| s == subdomain)?;
        Some(range.start + local)
    }

    pub fn dofs_at(&self, vertex: usize) -> std::ops::Range<usize> {
        self.offsets[vertex]..self.offsets[vertex + 1]
    }

    pub fn vertex_of(&self, dof: usize) -> usize {
        self.vertex_of[dof]
    }

    pub fn subdomain_of(&self, dof: usize) -> u32 {
        self.subdomain_of[dof]
    }

    /// Paired dofs of each membrane facet, in `mesh.membrane_facets()` order.
    pub fn facet_dofs(&self) -> &[FacetDofs] {
        &self.facet_dofs
    }

    pub fn gating_points(&self) -> &[GatingPoint] {
        &self.gating
    }

    /// Dofs of one element, taking the element's own subdomain copy of each vertex.
    pub fn element_dofs(&self, mesh: &Mesh, e: usize) -> [usize; 3] {
        let s = mesh.subdomain(e);
        let nodes = mesh.element(e);
        let mut out = [usize::MAX; 3];
        for (k, &v) in nodes.iter().enumerate() {
            out[k] = self.dof(v, s).expect("element vertex carries element subdomain");
        }
        out
    }

    /// The dof across the membrane from `dof` on facet `fd`, if `dof` is on it.
    pub fn paired(&self, fd: &FacetDofs, dof: usize) -> Option<usize> {
        (0..2).find_map(|k| {
            if fd.first[k] == dof {
                Some(fd.second[k])
            } else if fd.second[k] == dof {
                Some(fd.first[k])
            } else {
                None
            }
        })
    }
}
