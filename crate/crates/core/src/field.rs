//! Uniform rectangular meshes and the fields living on them.
//!
//! Cells are numbered row-major with x fastest; nodes the same. A
//! [`CellField`] is piecewise constant (one vector of `channels` values per
//! cell), a [`NodalField`] is the coefficient vector of a continuous Q1
//! field. Both are plain value types.

use crate::error::Error;
use crate::polytope::Polytope;
use crate::Result;

/// Uniform rectangular mesh on `(0, lx) × (0, ly)` with `nx × ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
}

impl Mesh {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidArgument("domain lengths must be positive".into()));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("cell counts must be at least 1".into()));
        }
        Ok(Mesh { lx, ly, nx, ny })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    /// Cell coordinates `(i, j)` of a cell index.
    pub fn cell_coords(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn cell_centroid(&self, e: usize) -> (f64, f64) {
        let (i, j) = self.cell_coords(e);
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn node_coords(&self, a: usize) -> (f64, f64) {
        let i = a % (self.nx + 1);
        let j = a / (self.nx + 1);
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    /// The four nodes of a cell in counterclockwise order, starting at the
    /// lower-left corner.
    pub fn cell_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.cell_coords(e);
        [
            self.node_index(i, j),
            self.node_index(i + 1, j),
            self.node_index(i + 1, j + 1),
            self.node_index(i, j + 1),
        ]
    }
}

/// Piecewise-constant vector field: `channels` values per cell, stored
/// cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    mesh: Mesh,
    channels: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(mesh: Mesh, channels: usize) -> Self {
        CellField {
            mesh,
            channels,
            values: vec![0.0; mesh.num_cells() * channels],
        }
    }

    /// Constant field with the same vector value in every cell.
    pub fn constant(mesh: Mesh, value: &[f64]) -> Self {
        let mut f = CellField::zeros(mesh, value.len());
        for e in 0..mesh.num_cells() {
            f.cell_mut(e).copy_from_slice(value);
        }
        f
    }

    pub fn from_values(mesh: Mesh, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_cells() * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                mesh.num_cells() * channels,
                values.len()
            )));
        }
        Ok(CellField {
            mesh,
            channels,
            values,
        })
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell(&self, e: usize) -> &[f64] {
        &self.values[e * self.channels..(e + 1) * self.channels]
    }

    pub fn cell_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.values[e * self.channels..(e + 1) * self.channels]
    }

    pub fn same_shape(&self, other: &CellField) -> bool {
        self.mesh == other.mesh && self.channels == other.channels
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Q1 nodal vector field: `channels` values per node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    mesh: Mesh,
    channels: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(mesh: Mesh, channels: usize) -> Self {
        NodalField {
            mesh,
            channels,
            values: vec![0.0; mesh.num_nodes() * channels],
        }
    }

    pub fn from_values(mesh: Mesh, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                mesh.num_nodes() * channels,
                values.len()
            )));
        }
        Ok(NodalField {
            mesh,
            channels,
            values,
        })
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node(&self, a: usize) -> &[f64] {
        &self.values[a * self.channels..(a + 1) * self.channels]
    }

    pub fn node_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.values[a * self.channels..(a + 1) * self.channels]
    }
}

/// `∫_Ω a·b dx` for piecewise-constant fields: `cell_area · Σ_e a_e·b_e`.
pub fn integrate_dot(a: &CellField, b: &CellField) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(
            "integrate_dot arguments differ in mesh or channel count".into(),
        ));
    }
    let s: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .sum();
    Ok(a.mesh.cell_area() * s)
}

/// Stationarity residual `Σ_e |Ω_e| · |min_v d_e·(v − η_e)|`.
///
/// The inner minimum over polytope vertices is nonpositive whenever `η_e`
/// lies in the polytope, and the residual vanishes exactly at points
/// satisfying the first-order variational inequality.
pub fn vertex_gap_residual(p: &Polytope, d: &CellField, eta: &CellField) -> Result<f64> {
    if !d.same_shape(eta) {
        return Err(Error::ShapeMismatch(
            "direction and design fields differ in mesh or channel count".into(),
        ));
    }
    if d.channels() != p.dim() {
        return Err(Error::ShapeMismatch(format!(
            "field has {} channels, polytope dimension is {}",
            d.channels(),
            p.dim()
        )));
    }
    let area = d.mesh.cell_area();
    let mut res = 0.0;
    for e in 0..d.mesh.num_cells() {
        res += area * p.min_vertex_gap(d.cell(e), eta.cell(e)).abs();
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Polytope {
        Polytope::new(2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn integrate_constant_over_domain() {
        for (nx, ny) in [(1, 1), (3, 5), (12, 4)] {
            let mesh = Mesh::new(3.0, 1.0, nx, ny).unwrap();
            let a = CellField::constant(mesh, &[1.0]);
            assert!((integrate_dot(&a, &a).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_orthogonal_channels() {
        let mesh = Mesh::new(3.0, 1.0, 4, 2).unwrap();
        let a = CellField::constant(mesh, &[1.0, 0.0]);
        let b = CellField::constant(mesh, &[0.0, 1.0]);
        assert_eq!(integrate_dot(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn integrate_matches_hand_sum() {
        let mesh = Mesh::new(1.0, 1.0, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let av: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bv: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = CellField::from_values(mesh, 1, av.clone()).unwrap();
        let b = CellField::from_values(mesh, 1, bv.clone()).unwrap();
        let hand = 0.25 * (av[0] * bv[0] + av[1] * bv[1] + av[2] * bv[2] + av[3] * bv[3]);
        assert!((integrate_dot(&a, &b).unwrap() - hand).abs() < 1e-15);
    }

    #[test]
    fn integrate_rejects_shape_mismatch() {
        let m1 = Mesh::new(1.0, 1.0, 2, 2).unwrap();
        let m2 = Mesh::new(1.0, 1.0, 2, 3).unwrap();
        let a = CellField::constant(m1, &[1.0]);
        let b = CellField::constant(m2, &[1.0]);
        assert!(integrate_dot(&a, &b).is_err());
    }

    #[test]
    fn gap_residual_at_square_centroid() {
        let mesh = Mesh::new(1.0, 1.0, 2, 2).unwrap();
        let p = unit_square();
        let eta = CellField::constant(mesh, &[0.5, 0.5]);
        let d = CellField::constant(mesh, &[1.0, 0.0]);
        let r = vertex_gap_residual(&p, &d, &eta).unwrap();
        assert!((r - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gap_residual_zero_for_zero_direction() {
        let mesh = Mesh::new(1.0, 1.0, 2, 2).unwrap();
        let p = unit_square();
        let eta = CellField::constant(mesh, &[0.3, 0.8]);
        let d = CellField::zeros(mesh, 2);
        assert_eq!(vertex_gap_residual(&p, &d, &eta).unwrap(), 0.0);
    }

    #[test]
    fn gap_residual_zero_at_supported_vertex() {
        // η at vertex (0,0) and d pointing into the square: d·(v − η) ≥ 0
        // for every vertex, so the stationarity measure vanishes.
        let mesh = Mesh::new(1.0, 1.0, 1, 1).unwrap();
        let p = unit_square();
        let eta = CellField::constant(mesh, &[0.0, 0.0]);
        let d = CellField::constant(mesh, &[1.0, 1.0]);
        assert_eq!(vertex_gap_residual(&p, &d, &eta).unwrap(), 0.0);
    }

    #[test]
    fn gap_residual_matches_exhaustive_scan() {
        let mesh = Mesh::new(1.0, 1.0, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = Vec::new();
        for _ in 0..7 {
            data.push(rng.random_range(-1.0..1.0));
            data.push(rng.random_range(-1.0..1.0));
        }
        let p = match Polytope::new(2, &data) {
            Ok(p) => p,
            Err(_) => return, // astronomically unlikely with this seed
        };
        let psi = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let eta_pt = p.gradient_map(&psi).unwrap().point;
        let d_pt = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let eta = CellField::constant(mesh, &eta_pt);
        let d = CellField::constant(mesh, &d_pt);

        let mut brute = f64::INFINITY;
        for i in 0..p.num_vertices() {
            let v = p.vertex(i);
            let g = d_pt[0] * (v[0] - eta_pt[0]) + d_pt[1] * (v[1] - eta_pt[1]);
            brute = brute.min(g);
        }
        assert!(brute <= 0.0);
        let r = vertex_gap_residual(&p, &d, &eta).unwrap();
        assert!((r - brute.abs()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn gap_residual_positively_homogeneous(scale in 0.01f64..100.0, dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let mesh = Mesh::new(2.0, 1.0, 3, 2).unwrap();
            let p = unit_square();
            let eta = CellField::constant(mesh, &[0.25, 0.6]);
            let d1 = CellField::constant(mesh, &[dx, dy]);
            let d2 = CellField::constant(mesh, &[scale * dx, scale * dy]);
            let r1 = vertex_gap_residual(&p, &d1, &eta).unwrap();
            let r2 = vertex_gap_residual(&p, &d2, &eta).unwrap();
            prop_assert!(r1 >= 0.0);
            prop_assert!((r2 - scale * r1).abs() <= 1e-12 * (1.0 + r2.abs()));
        }
    }
}
