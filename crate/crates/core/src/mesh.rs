//! Structured meshes, the P1 displacement space with homogeneous Dirichlet
//! conditions, and the assembled discrete operators.
//!
//! Displacements and velocities are P1 nodal fields stored on the free
//! (non-Dirichlet) degrees of freedom only. Stresses are stored at one
//! quadrature point per element, which is exact for the piecewise constant
//! symmetric gradient of a P1 field; every quadrature point carries `nv`
//! Mandel coefficients, so quadrature fields are flat vectors of length
//! `elements · nv`.

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, DMat};
use crate::resolvent::TripleField;
use crate::scalar::Real;
use crate::tensor::{nv, MaterialModel, Rank4Tensor, SymTensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            "bottom" => Some(Side::Bottom),
            "top" => Some(Side::Top),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    pub side: Side,
    pub dirichlet: bool,
}

/// Structured simplicial mesh of an interval or a rectangle.
#[derive(Debug, Clone)]
pub struct Mesh<S> {
    pub dim: usize,
    pub extents: Vec<S>,
    pub resolution: Vec<usize>,
    /// Node coordinates; unused components are zero.
    pub coords: Vec<[S; 2]>,
    /// Node indices of each cell, counter-clockwise for triangles.
    pub cells: Vec<Vec<usize>>,
    pub facets: Vec<BoundaryFacet>,
    pub dirichlet_node: Vec<bool>,
}

/// Builds a structured mesh of `[0, L₁] (× [0, L₂])`. Rectangles are split
/// into two triangles along the diagonal from the lower-left corner.
pub fn build_mesh<S: Real>(
    dim: usize,
    extents: &[S],
    resolution: &[usize],
    dirichlet: &[Side],
) -> Result<Mesh<S>> {
    if !(1..=2).contains(&dim) {
        return Err(Error::Unsupported(format!("meshes are available in 1 and 2 dimensions, not {dim}")));
    }
    if extents.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: extents.len() });
    }
    if resolution.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: resolution.len() });
    }
    if let Some(l) = extents.iter().find(|&&l| !(l > S::zero())) {
        return Err(Error::Mesh(format!("domain extent must be positive, got {l}")));
    }
    if resolution.contains(&0) {
        return Err(Error::Mesh("resolution must be at least one cell per direction".into()));
    }
    if dirichlet.is_empty() {
        return Err(Error::Mesh("the Dirichlet boundary is empty; it must have positive measure".into()));
    }
    if dim == 1 {
        if let Some(s) = dirichlet.iter().find(|s| matches!(s, Side::Bottom | Side::Top)) {
            return Err(Error::Mesh(format!("side {s:?} does not exist on an interval")));
        }
    }

    let mut coords = Vec::new();
    let mut cells = Vec::new();
    let mut facets = Vec::new();
    if dim == 1 {
        let n = resolution[0];
        let h = extents[0] / S::lit(n as f64);
        for i in 0..=n {
            coords.push([h * S::lit(i as f64), S::zero()]);
        }
        for i in 0..n {
            cells.push(vec![i, i + 1]);
        }
        facets.push(BoundaryFacet { nodes: vec![0], side: Side::Left, dirichlet: false });
        facets.push(BoundaryFacet { nodes: vec![n], side: Side::Right, dirichlet: false });
    } else {
        let (nx, ny) = (resolution[0], resolution[1]);
        let hx = extents[0] / S::lit(nx as f64);
        let hy = extents[1] / S::lit(ny as f64);
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([hx * S::lit(i as f64), hy * S::lit(j as f64)]);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                cells.push(vec![a, b, c]);
                cells.push(vec![a, c, d]);
            }
        }
        for i in 0..nx {
            facets.push(BoundaryFacet { nodes: vec![id(i, 0), id(i + 1, 0)], side: Side::Bottom, dirichlet: false });
            facets.push(BoundaryFacet { nodes: vec![id(i, ny), id(i + 1, ny)], side: Side::Top, dirichlet: false });
        }
        for j in 0..ny {
            facets.push(BoundaryFacet { nodes: vec![id(0, j), id(0, j + 1)], side: Side::Left, dirichlet: false });
            facets.push(BoundaryFacet { nodes: vec![id(nx, j), id(nx, j + 1)], side: Side::Right, dirichlet: false });
        }
    }
    let mut dirichlet_node = vec![false; coords.len()];
    for f in &mut facets {
        if dirichlet.contains(&f.side) {
            f.dirichlet = true;
            for &n in &f.nodes {
                dirichlet_node[n] = true;
            }
        }
    }
    Ok(Mesh {
        dim,
        extents: extents.to_vec(),
        resolution: resolution.to_vec(),
        coords,
        cells,
        facets,
        dirichlet_node,
    })
}

impl<S: Real> Mesh<S> {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn domain_measure(&self) -> S {
        self.extents.iter().fold(S::one(), |p, &l| p * l)
    }
}

/// Per-element geometric data of the P1 space.
#[derive(Debug, Clone)]
pub struct Element<S> {
    pub nodes: Vec<usize>,
    /// Free-dof index of each local dof `(node a, component c) ↦ a·d + c`.
    pub dofs: Vec<Option<usize>>,
    /// Symmetric-gradient operator, `nv × (nodes·d)`.
    pub strain: DMat<S>,
    /// Gradients of the local shape functions.
    pub shape_grads: Vec<[S; 2]>,
    pub measure: S,
}

/// P1 vector space on a mesh with homogeneous Dirichlet conditions on the
/// Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct FeSpace<S> {
    pub mesh: Mesh<S>,
    pub dim: usize,
    /// Free index of each global dof `node·d + c`.
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
    pub elements: Vec<Element<S>>,
}

impl<S: Real> FeSpace<S> {
    pub fn new(mesh: Mesh<S>) -> Result<Self> {
        let dim = mesh.dim;
        let mut free_index = vec![None; mesh.n_nodes() * dim];
        let mut n_free = 0;
        for node in 0..mesh.n_nodes() {
            if mesh.dirichlet_node[node] {
                continue;
            }
            for c in 0..dim {
                free_index[node * dim + c] = Some(n_free);
                n_free += 1;
            }
        }
        if n_free == 0 {
            return Err(Error::Mesh("no free degrees of freedom remain".into()));
        }
        let scale = mesh.domain_measure() / S::lit(mesh.n_cells() as f64);
        let mut elements = Vec::with_capacity(mesh.n_cells());
        for (e, cell) in mesh.cells.iter().enumerate() {
            let (shape_grads, measure) = shape_gradients(&mesh, cell);
            if !(measure > scale * S::lit(1e-12)) {
                return Err(Error::DegenerateElement { element: e, measure: measure.as_f64() });
            }
            let dofs = cell
                .iter()
                .flat_map(|&n| (0..dim).map(move |c| n * dim + c))
                .map(|g| free_index[g])
                .collect();
            let strain = strain_operator(dim, &shape_grads);
            elements.push(Element { nodes: cell.clone(), dofs, strain, shape_grads, measure });
        }
        Ok(Self { mesh, dim, free_index, n_free, elements })
    }

    pub fn nv(&self) -> usize {
        nv(self.dim)
    }

    pub fn n_points(&self) -> usize {
        self.elements.len()
    }

    pub fn n_full(&self) -> usize {
        self.mesh.n_nodes() * self.dim
    }

    /// Restricts a full nodal vector to the free dofs.
    pub fn restrict(&self, full: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.n_free];
        for (g, idx) in self.free_index.iter().enumerate() {
            if let Some(i) = idx {
                out[*i] = full[g];
            }
        }
        out
    }

    /// Extends a free-dof vector by zero on the Dirichlet dofs.
    pub fn prolong_zero(&self, free: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.n_full()];
        for (g, idx) in self.free_index.iter().enumerate() {
            if let Some(i) = idx {
                out[g] = free[*i];
            }
        }
        out
    }

    /// Interpolates a vector field given on node coordinates, restricted to free dofs.
    pub fn interpolate(&self, f: impl Fn([S; 2]) -> Vec<S>) -> Vec<S> {
        let mut full = vec![S::zero(); self.n_full()];
        for (n, &x) in self.mesh.coords.iter().enumerate() {
            let val = f(x);
            for c in 0..self.dim {
                full[n * self.dim + c] = val[c];
            }
        }
        self.restrict(&full)
    }

    /// Symmetric gradient of a full nodal field at every quadrature point.
    pub fn sym_grad_full(&self, u_full: &[S]) -> Vec<S> {
        let n = self.nv();
        let mut out = vec![S::zero(); self.n_points() * n];
        for (e, el) in self.elements.iter().enumerate() {
            let local: Vec<S> = el
                .nodes
                .iter()
                .flat_map(|&a| (0..self.dim).map(move |c| a * self.dim + c))
                .map(|g| u_full[g])
                .collect();
            out[e * n..(e + 1) * n].copy_from_slice(&el.strain.matvec(&local));
        }
        out
    }
}

fn shape_gradients<S: Real>(mesh: &Mesh<S>, cell: &[usize]) -> (Vec<[S; 2]>, S) {
    if mesh.dim == 1 {
        let h = mesh.coords[cell[1]][0] - mesh.coords[cell[0]][0];
        (vec![[-S::one() / h, S::zero()], [S::one() / h, S::zero()]], h)
    } else {
        let [x0, y0] = mesh.coords[cell[0]];
        let [x1, y1] = mesh.coords[cell[1]];
        let [x2, y2] = mesh.coords[cell[2]];
        let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
        let area = det / S::lit(2.0);
        let grads = vec![
            [(y1 - y2) / det, (x2 - x1) / det],
            [(y2 - y0) / det, (x0 - x2) / det],
            [(y0 - y1) / det, (x1 - x0) / det],
        ];
        (grads, area)
    }
}

fn strain_operator<S: Real>(dim: usize, grads: &[[S; 2]]) -> DMat<S> {
    let nn = grads.len();
    let mut b = DMat::zeros(nv(dim), nn * dim);
    let half_r2 = S::lit(0.5) * S::lit(2.0).sqrt();
    for (a, g) in grads.iter().enumerate() {
        if dim == 1 {
            b[(0, a)] = g[0];
        } else {
            b[(0, a * 2)] = g[0];
            b[(1, a * 2 + 1)] = g[1];
            b[(2, a * 2)] = half_r2 * g[1];
            b[(2, a * 2 + 1)] = half_r2 * g[0];
        }
    }
    b
}

/// Scalar P1 element mass matrix from the edge-midpoint rule (triangles) or
/// two-point Gauss rule (intervals), both exact for P1 × P1.
fn local_mass<S: Real>(dim: usize, measure: S) -> DMat<S> {
    let (points, weight): (Vec<Vec<S>>, S) = if dim == 1 {
        let g = S::lit(0.5) / S::lit(3.0).sqrt();
        let h = S::lit(0.5);
        (vec![vec![h + g, h - g], vec![h - g, h + g]], h)
    } else {
        let h = S::lit(0.5);
        let z = S::zero();
        (vec![vec![h, h, z], vec![z, h, h], vec![h, z, h]], S::one() / S::lit(3.0))
    };
    let nn = dim + 1;
    let mut m = DMat::zeros(nn, nn);
    for bary in &points {
        for a in 0..nn {
            for b in 0..nn {
                m[(a, b)] += weight * measure * bary[a] * bary[b];
            }
        }
    }
    m
}

/// Assembled operators on the free dofs together with the space and material.
#[derive(Debug, Clone)]
pub struct DiscreteOperators<S> {
    pub space: FeSpace<S>,
    pub material: MaterialModel<S>,
    /// Vector mass matrix `M`, consistent or lumped.
    pub mass: DMat<S>,
    /// `Bᵀ W D B`.
    pub stiffness_d: DMat<S>,
    /// Vector Laplacian `∫ ∇f : ∇g`.
    pub laplacian: DMat<S>,
    /// Quadrature weight of every stress point.
    pub weights: Vec<S>,
    pub lumped: bool,
    stiffness_d_factor: Cholesky<S>,
    mass_factor: Cholesky<S>,
}

impl<S: Real> DiscreteOperators<S> {
    pub fn assemble(space: FeSpace<S>, material: MaterialModel<S>, lumped: bool) -> Result<Self> {
        if material.dim != space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, got: material.dim });
        }
        let n = space.n_free;
        let d = space.dim;
        let mut mass = DMat::zeros(n, n);
        let mut laplacian = DMat::zeros(n, n);
        for el in &space.elements {
            let mut ml = local_mass(d, el.measure);
            if lumped {
                let nn = el.nodes.len();
                for a in 0..nn {
                    let row: S = (0..nn).map(|b| ml[(a, b)]).sum();
                    for b in 0..nn {
                        ml[(a, b)] = if a == b { row } else { S::zero() };
                    }
                }
            }
            for a in 0..el.nodes.len() {
                for b in 0..el.nodes.len() {
                    let kab = el.measure * (el.shape_grads[a][0] * el.shape_grads[b][0] + el.shape_grads[a][1] * el.shape_grads[b][1]);
                    for c in 0..d {
                        if let (Some(i), Some(j)) = (el.dofs[a * d + c], el.dofs[b * d + c]) {
                            mass[(i, j)] += ml[(a, b)];
                            laplacian[(i, j)] += kab;
                        }
                    }
                }
            }
        }
        let weights: Vec<S> = space.elements.iter().map(|e| e.measure).collect();
        let d_tensor = material.stiffness_d;
        let stiffness_d = assemble_point_stiffness(&space, &weights, |_| d_tensor);
        let stiffness_d_factor = Cholesky::factor(&stiffness_d)?;
        let mass_factor = Cholesky::factor(&mass)?;
        Ok(Self { space, material, mass, stiffness_d, laplacian, weights, lumped, stiffness_d_factor, mass_factor })
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn nv(&self) -> usize {
        self.space.nv()
    }

    /// Number of free displacement dofs.
    pub fn n_u(&self) -> usize {
        self.space.n_free
    }

    pub fn n_points(&self) -> usize {
        self.space.n_points()
    }

    /// Length of a quadrature field.
    pub fn n_q(&self) -> usize {
        self.n_points() * self.nv()
    }

    pub fn domain_measure(&self) -> S {
        self.space.mesh.domain_measure()
    }

    pub fn point(&self, field: &[S], p: usize) -> SymTensor2<S> {
        let n = self.nv();
        SymTensor2::from_mandel(self.dim(), &field[p * n..(p + 1) * n]).expect("quadrature field layout")
    }

    pub fn set_point(&self, field: &mut [S], p: usize, t: &SymTensor2<S>) {
        let n = self.nv();
        field[p * n..(p + 1) * n].copy_from_slice(t.as_slice());
    }

    /// Builds a quadrature field from a pointwise rule.
    pub fn quad_field(&self, mut f: impl FnMut(usize) -> SymTensor2<S>) -> Vec<S> {
        let mut out = vec![S::zero(); self.n_q()];
        for p in 0..self.n_points() {
            let t = f(p);
            self.set_point(&mut out, p, &t);
        }
        out
    }

    /// Applies a constant fourth-order tensor at every quadrature point.
    pub fn apply_tensor(&self, t: &Rank4Tensor<S>, field: &[S]) -> Vec<S> {
        let n = self.nv();
        let mut out = vec![S::zero(); field.len()];
        for (x, y) in field.chunks(n).zip(out.chunks_mut(n)) {
            t.apply_slice(x, y);
        }
        out
    }

    pub fn apply_tensor_transpose(&self, t: &Rank4Tensor<S>, field: &[S]) -> Vec<S> {
        let n = self.nv();
        let mut out = vec![S::zero(); field.len()];
        for (x, y) in field.chunks(n).zip(out.chunks_mut(n)) {
            t.apply_transpose_slice(x, y);
        }
        out
    }

    /// Symmetric gradient `B u` of a free-dof displacement.
    pub fn sym_grad(&self, u: &[S]) -> Vec<S> {
        let n = self.nv();
        let mut out = vec![S::zero(); self.n_q()];
        for (e, el) in self.space.elements.iter().enumerate() {
            let local: Vec<S> = el.dofs.iter().map(|d| d.map_or(S::zero(), |i| u[i])).collect();
            out[e * n..(e + 1) * n].copy_from_slice(&el.strain.matvec(&local));
        }
        out
    }

    /// `Bᵀ W τ`, i.e. the load vector `∫ τ : ∇ˢφ_i`.
    pub fn sym_grad_t_w(&self, tau: &[S]) -> Vec<S> {
        let n = self.nv();
        let mut out = vec![S::zero(); self.n_u()];
        for (e, el) in self.space.elements.iter().enumerate() {
            let w = self.weights[e];
            let sig: Vec<S> = tau[e * n..(e + 1) * n].iter().map(|&x| x * w).collect();
            let local = el.strain.matvec_t(&sig);
            for (d, v) in el.dofs.iter().zip(local) {
                if let Some(i) = d {
                    out[*i] += v;
                }
            }
        }
        out
    }

    /// Discrete divergence `div_h τ = −Bᵀ W τ`.
    pub fn div_h(&self, tau: &[S]) -> Vec<S> {
        self.sym_grad_t_w(tau).into_iter().map(|x| -x).collect()
    }

    /// `Σ_p w_p B_pᵀ G_p B_p` for pointwise tensors `G_p`.
    pub fn assemble_point_stiffness(&self, g: impl FnMut(usize) -> Rank4Tensor<S>) -> DMat<S> {
        assemble_point_stiffness(&self.space, &self.weights, g)
    }

    pub fn mass_apply(&self, u: &[S]) -> Vec<S> {
        self.mass.matvec(u)
    }

    pub fn solve_mass(&self, rhs: &[S]) -> Vec<S> {
        self.mass_factor.solve(rhs)
    }

    pub fn solve_stiffness_d(&self, rhs: &[S]) -> Vec<S> {
        self.stiffness_d_factor.solve(rhs)
    }

    /// `Σ_p w_p a_p : b_p`.
    pub fn q_inner(&self, a: &[S], b: &[S]) -> S {
        let n = self.nv();
        a.chunks(n).zip(b.chunks(n)).zip(&self.weights).fold(S::zero(), |s, ((x, y), &w)| s + w * dot(x, y))
    }

    pub fn mass_inner(&self, a: &[S], b: &[S]) -> S {
        dot(a, &self.mass.matvec(b))
    }

    pub fn energy_inner(&self, a: &[S], b: &[S]) -> S {
        dot(a, &self.stiffness_d.matvec(b))
    }

    /// Inner product of the state space: `⟨D∇u₁,∇u₂⟩ + ⟨v₁,v₂⟩ + ⟨q₁,q₂⟩`.
    pub fn h_inner(&self, x: &TripleField<S>, y: &TripleField<S>) -> S {
        self.energy_inner(&x.u, &y.u) + self.mass_inner(&x.v, &y.v) + self.q_inner(&x.q, &y.q)
    }

    pub fn h_norm(&self, x: &TripleField<S>) -> S {
        self.h_inner(x, x).max(S::zero()).sqrt()
    }
}

fn assemble_point_stiffness<S: Real>(
    space: &FeSpace<S>,
    weights: &[S],
    mut g: impl FnMut(usize) -> Rank4Tensor<S>,
) -> DMat<S> {
    let n = space.n_free;
    let mut k = DMat::zeros(n, n);
    for (e, el) in space.elements.iter().enumerate() {
        let ge = g(e).to_dmat();
        let b = &el.strain;
        let local = b.transpose().matmul(&ge).matmul(b);
        for (a, da) in el.dofs.iter().enumerate() {
            let Some(i) = da else { continue };
            for (c, dc) in el.dofs.iter().enumerate() {
                if let Some(j) = dc {
                    k[(*i, *j)] += weights[e] * local[(a, c)];
                }
            }
        }
    }
    k
}
