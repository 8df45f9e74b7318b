//! Minimal 2D finite elements on the uniform mesh: Q1 plane-stress
//! elasticity, the Helmholtz density filter, and the compliance objective
//! with its adjoint-consistent gradient.
//!
//! Everything uses 2×2 Gauss quadrature, which is exact for the bilinear
//! forms on rectangular cells. Dirichlet conditions are eliminated
//! symmetrically inside [`SpdOperator`]; the filter operator is factored
//! once and reused because its matrix does not depend on the design.

use crate::error::Error;
use crate::field::{CellField, Mesh, NodalField};
use crate::materials::Voigt3;
use crate::Result;

/// Sparse SPD operator with Dirichlet mask and cached factorization.
pub type SpdOperator = crate::linalg::BandedSpd;

/// Selection of domain edges, used for Dirichlet boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeSet {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl EdgeSet {
    pub const NONE: EdgeSet = EdgeSet {
        left: false,
        right: false,
        bottom: false,
        top: false,
    };

    pub const ALL: EdgeSet = EdgeSet {
        left: true,
        right: true,
        bottom: true,
        top: true,
    };

    pub fn left() -> EdgeSet {
        EdgeSet {
            left: true,
            ..EdgeSet::NONE
        }
    }

    pub fn horizontal() -> EdgeSet {
        EdgeSet {
            bottom: true,
            top: true,
            ..EdgeSet::NONE
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.left || self.right || self.bottom || self.top)
    }

    /// Does node `a` lie on a selected edge (corners included)?
    pub fn contains_node(&self, mesh: &Mesh, a: usize) -> bool {
        let i = a % (mesh.nx() + 1);
        let j = a / (mesh.nx() + 1);
        (self.left && i == 0)
            || (self.right && i == mesh.nx())
            || (self.bottom && j == 0)
            || (self.top && j == mesh.ny())
    }
}

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/√3
/// Gauss points on the reference square, same ordering as the cell nodes.
const GP: [(f64, f64); 4] = [
    (-GAUSS, -GAUSS),
    (GAUSS, -GAUSS),
    (GAUSS, GAUSS),
    (-GAUSS, GAUSS),
];

/// Q1 shape values at a reference point, node order LL, LR, UR, UL.
fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// Physical shape gradients `(∂N/∂x, ∂N/∂y)` on a `hx×hy` cell.
fn shape_gradients(xi: f64, eta: f64, hx: f64, hy: f64) -> [[f64; 2]; 4] {
    let dx = 2.0 / hx;
    let dy = 2.0 / hy;
    [
        [-0.25 * (1.0 - eta) * dx, -0.25 * (1.0 - xi) * dy],
        [0.25 * (1.0 - eta) * dx, -0.25 * (1.0 + xi) * dy],
        [0.25 * (1.0 + eta) * dx, 0.25 * (1.0 + xi) * dy],
        [-0.25 * (1.0 + eta) * dx, 0.25 * (1.0 - xi) * dy],
    ]
}

/// Helmholtz filter `(ε²K + M) η̃ = B η` with Dirichlet boundary `Γ_F`,
/// factored once at assembly.
pub struct FilterOperator {
    mesh: Mesh,
    epsilon: f64,
    op: SpdOperator,
}

/// Assemble the filter operator. `ε = 0` degenerates to the plain `L²`
/// projection onto Q1, which maps global constants to themselves when no
/// boundary nodes are pinned.
pub fn assemble_filter(mesh: Mesh, epsilon: f64, gamma_f: EdgeSet) -> Result<FilterOperator> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument("filter length scale must be ≥ 0".into()));
    }
    let mut op = SpdOperator::zeros(mesh.num_nodes(), mesh.nx() + 2);
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let detj = hx * hy / 4.0;

    let mut ke = [[0.0f64; 4]; 4];
    let mut me = [[0.0f64; 4]; 4];
    for &(xi, eta) in GP.iter() {
        let nv = shape_values(xi, eta);
        let gv = shape_gradients(xi, eta, hx, hy);
        for a in 0..4 {
            for b in 0..4 {
                ke[a][b] += (gv[a][0] * gv[b][0] + gv[a][1] * gv[b][1]) * detj;
                me[a][b] += nv[a] * nv[b] * detj;
            }
        }
    }

    for e in 0..mesh.num_cells() {
        let nodes = mesh.cell_nodes(e);
        // Each unordered local pair once; `add` normalizes the index order.
        for a in 0..4 {
            for b in 0..=a {
                op.add(nodes[a], nodes[b], epsilon * epsilon * ke[a][b] + me[a][b]);
            }
        }
    }
    for a in 0..mesh.num_nodes() {
        if gamma_f.contains_node(&mesh, a) {
            op.constrain(a);
        }
    }
    op.factorize()?;
    Ok(FilterOperator {
        mesh,
        epsilon,
        op,
    })
}

impl FilterOperator {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Filter a cell field channelwise: one solve per channel against the
    /// shared factorization.
    pub fn apply_filter(&mut self, eta: &CellField) -> Result<NodalField> {
        if eta.mesh() != self.mesh {
            return Err(Error::ShapeMismatch("field mesh does not match filter mesh".into()));
        }
        let nch = eta.channels();
        let quarter_area = self.mesh.cell_area() / 4.0;
        let mut out = NodalField::zeros(self.mesh, nch);
        let mut rhs = vec![0.0; self.mesh.num_nodes()];
        for c in 0..nch {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for e in 0..self.mesh.num_cells() {
                let v = eta.cell(e)[c] * quarter_area;
                for a in self.mesh.cell_nodes(e) {
                    rhs[a] += v;
                }
            }
            let z = self.op.solve(&rhs, None)?;
            for (a, &val) in z.iter().enumerate() {
                out.node_mut(a)[c] = val;
            }
        }
        Ok(out)
    }

    /// Transport a nodal sensitivity back to cells:
    /// `Bᵀ(ε²K+M)⁻¹ s / cell_area`, the piecewise-constant representative of
    /// the chain rule through the filter.
    pub fn filter_adjoint(&mut self, s: &NodalField) -> Result<CellField> {
        if s.mesh() != self.mesh {
            return Err(Error::ShapeMismatch("field mesh does not match filter mesh".into()));
        }
        let nch = s.channels();
        let mut out = CellField::zeros(self.mesh, nch);
        let mut rhs = vec![0.0; self.mesh.num_nodes()];
        for c in 0..nch {
            for (a, v) in rhs.iter_mut().enumerate() {
                *v = s.node(a)[c];
            }
            let z = self.op.solve(&rhs, None)?;
            for e in 0..self.mesh.num_cells() {
                let nodes = self.mesh.cell_nodes(e);
                // (area/4 · Σ z_a) / area
                out.cell_mut(e)[c] = 0.25 * nodes.iter().map(|&a| z[a]).sum::<f64>();
            }
        }
        Ok(out)
    }
}

/// Assemble Q1 plane-stress elasticity with the stiffness `c_gp[e*4 + g]`
/// at Gauss point `g` of cell `e`. Each stiffness must be symmetric positive
/// semidefinite; displacements vanish on `Γ_D`.
pub fn assemble_elasticity(mesh: Mesh, c_gp: &[Voigt3], gamma_d: EdgeSet) -> Result<SpdOperator> {
    if c_gp.len() != 4 * mesh.num_cells() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} quadrature stiffnesses, got {}",
            4 * mesh.num_cells(),
            c_gp.len()
        )));
    }
    for (k, c) in c_gp.iter().enumerate() {
        let tr = c.trace();
        if c.min_eigenvalue() < -1e-10 * tr.abs().max(1.0) {
            return Err(Error::InvalidMaterial(format!(
                "indefinite stiffness at quadrature point {k}"
            )));
        }
    }

    let ndof = 2 * mesh.num_nodes();
    let mut op = SpdOperator::zeros(ndof, 2 * (mesh.nx() + 1) + 3);
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let detj = hx * hy / 4.0;

    let mut ke = [[0.0f64; 8]; 8];
    for e in 0..mesh.num_cells() {
        ke.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v = 0.0));
        for (g, &(xi, eta)) in GP.iter().enumerate() {
            let gv = shape_gradients(xi, eta, hx, hy);
            let c = &c_gp[e * 4 + g].0;
            // K_e += Bᵀ C B · detJ with B the 3×8 strain-displacement matrix.
            let mut bmat = [[0.0f64; 8]; 3];
            for a in 0..4 {
                bmat[0][2 * a] = gv[a][0];
                bmat[1][2 * a + 1] = gv[a][1];
                bmat[2][2 * a] = gv[a][1];
                bmat[2][2 * a + 1] = gv[a][0];
            }
            let mut cb = [[0.0f64; 8]; 3];
            for i in 0..3 {
                for j in 0..8 {
                    cb[i][j] = (0..3).map(|k| c[i][k] * bmat[k][j]).sum();
                }
            }
            for i in 0..8 {
                for j in 0..=i {
                    let v: f64 = (0..3).map(|k| bmat[k][i] * cb[k][j]).sum();
                    ke[i][j] += v * detj;
                    if i != j {
                        ke[j][i] += v * detj;
                    }
                }
            }
        }

        let nodes = mesh.cell_nodes(e);
        let dofs: Vec<usize> = nodes.iter().flat_map(|&a| [2 * a, 2 * a + 1]).collect();
        for p in 0..8 {
            for q in 0..=p {
                op.add(dofs[p], dofs[q], ke[p][q]);
            }
        }
    }
    for a in 0..mesh.num_nodes() {
        if gamma_d.contains_node(&mesh, a) {
            op.constrain(2 * a);
            op.constrain(2 * a + 1);
        }
    }
    Ok(op)
}

/// Body load `f` over the disc `|x − center| ≤ radius`, integrated against
/// the Q1 shape functions. A cell contributes when its centroid lies in the
/// disc; if no centroid qualifies on a coarse mesh, the single cell with the
/// nearest centroid is loaded instead. Returns the global load vector and
/// the loaded cells.
pub fn disc_load_vector(
    mesh: Mesh,
    center: (f64, f64),
    radius: f64,
    force: (f64, f64),
) -> (Vec<f64>, Vec<usize>) {
    let mut cells = Vec::new();
    let mut nearest = (0usize, f64::INFINITY);
    for e in 0..mesh.num_cells() {
        let (cx, cy) = mesh.cell_centroid(e);
        let d = ((cx - center.0).powi(2) + (cy - center.1).powi(2)).sqrt();
        if d <= radius {
            cells.push(e);
        }
        if d < nearest.1 {
            nearest = (e, d);
        }
    }
    if cells.is_empty() {
        cells.push(nearest.0);
    }
    let mut rhs = vec![0.0; 2 * mesh.num_nodes()];
    let quarter_area = mesh.cell_area() / 4.0;
    for &e in &cells {
        for a in mesh.cell_nodes(e) {
            rhs[2 * a] += force.0 * quarter_area;
            rhs[2 * a + 1] += force.1 * quarter_area;
        }
    }
    (rhs, cells)
}

/// Pointwise material law used by the compliance pipeline: stiffness and its
/// derivative with respect to each filtered design channel.
pub trait MaterialModel {
    fn channels(&self) -> usize;
    /// Evaluate at one quadrature point; fills `dc` (length `channels`) and
    /// returns the stiffness.
    fn evaluate(&self, eta_tilde: &[f64], dc: &mut [Voigt3]) -> Voigt3;
}

/// Everything the compliance evaluation produces.
pub struct ComplianceOutput {
    /// `F = ∫ f·u dx`.
    pub compliance: f64,
    /// `∇F` as the piecewise-constant L² representative.
    pub gradient: CellField,
    /// Filtered design field.
    pub filtered: NodalField,
    /// Displacement (2 channels).
    pub displacement: NodalField,
}

/// Compliance and its design gradient for the pipeline
/// `η → η̃ (filter) → C(η̃) → K u = f → F = f·u`.
///
/// The problem is self-adjoint, so the sensitivity needs no extra solve:
/// `∂F/∂η̃ = −(∂C/∂η̃):ε(u):ε(u)` accumulated at nodes through the shape
/// values, then pulled back through the filter.
pub fn compliance_and_gradient(
    material: &dyn MaterialModel,
    eta: &CellField,
    fop: &mut FilterOperator,
    load: &[f64],
    gamma_d: EdgeSet,
) -> Result<ComplianceOutput> {
    let mesh = eta.mesh();
    if eta.channels() != material.channels() {
        return Err(Error::ShapeMismatch(format!(
            "design field has {} channels, material expects {}",
            eta.channels(),
            material.channels()
        )));
    }
    if load.len() != 2 * mesh.num_nodes() {
        return Err(Error::ShapeMismatch("load vector length mismatch".into()));
    }
    let nch = eta.channels();
    let filtered = fop.apply_filter(eta)?;

    // Material evaluation at every Gauss point.
    let num_gp = 4 * mesh.num_cells();
    let mut c_gp = vec![Voigt3::ZERO; num_gp];
    let mut dc_gp = vec![Voigt3::ZERO; num_gp * nch];
    let mut point_vals = vec![0.0; nch];
    for e in 0..mesh.num_cells() {
        let nodes = mesh.cell_nodes(e);
        for (g, &(xi, et)) in GP.iter().enumerate() {
            let nv = shape_values(xi, et);
            for c in 0..nch {
                point_vals[c] = (0..4).map(|a| nv[a] * filtered.node(nodes[a])[c]).sum();
            }
            let idx = e * 4 + g;
            c_gp[idx] =
                material.evaluate(&point_vals, &mut dc_gp[idx * nch..(idx + 1) * nch]);
        }
    }

    let mut stiffness = assemble_elasticity(mesh, &c_gp, gamma_d)?;
    let u = stiffness.solve(load, None)?;
    let compliance: f64 = load.iter().zip(&u).map(|(f, x)| f * x).sum();

    // Nodal sensitivity of F with respect to the filtered field.
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let detj = hx * hy / 4.0;
    let mut sens = NodalField::zeros(mesh, nch);
    for e in 0..mesh.num_cells() {
        let nodes = mesh.cell_nodes(e);
        let mut ue = [0.0f64; 8];
        for (a, &node) in nodes.iter().enumerate() {
            ue[2 * a] = u[2 * node];
            ue[2 * a + 1] = u[2 * node + 1];
        }
        for (g, &(xi, et)) in GP.iter().enumerate() {
            let gv = shape_gradients(xi, et, hx, hy);
            let nv = shape_values(xi, et);
            let mut eps = [0.0f64; 3];
            for a in 0..4 {
                eps[0] += gv[a][0] * ue[2 * a];
                eps[1] += gv[a][1] * ue[2 * a + 1];
                eps[2] += gv[a][1] * ue[2 * a] + gv[a][0] * ue[2 * a + 1];
            }
            let idx = e * 4 + g;
            for c in 0..nch {
                let energy = dc_gp[idx * nch + c].quadratic_form(&eps);
                let contrib = -energy * detj;
                for (a, &node) in nodes.iter().enumerate() {
                    sens.node_mut(node)[c] += contrib * nv[a];
                }
            }
        }
    }

    let gradient = fop.filter_adjoint(&sens)?;
    let mut displacement = NodalField::zeros(mesh, 2);
    for a in 0..mesh.num_nodes() {
        displacement.node_mut(a)[0] = u[2 * a];
        displacement.node_mut(a)[1] = u[2 * a + 1];
    }
    Ok(ComplianceOutput {
        compliance,
        gradient,
        filtered,
        displacement,
    })
}
