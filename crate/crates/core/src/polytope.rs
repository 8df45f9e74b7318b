//! Convex polytopes by vertex matrix and the entropy-based design map.
//!
//! A polytope `P = conv{v_1, …, v_q} ⊂ R^n` is stored through its `n×q`
//! vertex matrix `V`. The map
//!
//! ```text
//! ψ ∈ R^n  ↦  λ = softmax(Vᵀψ) ∈ Δ^{q-1}  ↦  η = Vλ ∈ int P
//! ```
//!
//! is smooth, surjective onto the (relative) interior of `P`, and invertible
//! there up to translations of `ψ` along directions that are constant on all
//! vertices. Its convex-analysis counterpart is the entropy
//! `R(η) = min{Σλᵢ ln λᵢ : Vλ = η}` with conjugate
//! `R*(ψ) = logsumexp(Vᵀψ)`; [`Polytope::inverse_map`] evaluates `∇R` by a
//! damped Newton iteration on the smooth concave dual.

use crate::error::Error;
use crate::linalg::{sym_eigen, sym_solve_in_place};
use crate::Result;

/// Rank tolerance for the vertex matrix, relative to its largest singular
/// value.
const RANK_TOL: f64 = 1e-10;

/// Vertices must be pairwise farther apart than this.
const DISTINCT_TOL: f64 = 1e-12;

/// A point of a polytope together with maximum-entropy barycentric
/// coordinates with respect to the vertices.
#[derive(Debug, Clone)]
pub struct BarycentricPoint {
    /// Barycentric weights, strictly positive with unit sum.
    pub lambda: Vec<f64>,
    /// The point `V·λ` in design coordinates.
    pub point: Vec<f64>,
}

/// Convex polytope given by its vertices, plus cached geometry for the
/// design map. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    num_vertices: usize,
    /// Vertex-major storage: vertex `i` occupies `[i*dim, (i+1)*dim)`.
    vertices: Vec<f64>,
    centroid: Vec<f64>,
    centered: Vec<f64>,
    row_rank: usize,
    /// Orthonormal basis of the row space of the centered vertex matrix;
    /// basis vector `k` occupies `[k*dim, (k+1)*dim)`.
    row_basis: Vec<f64>,
}

impl Polytope {
    /// Build a polytope from `q = data.len() / dim` vertices stored
    /// vertex-major. Rejects duplicate vertices and, for `q ≥ 3`, vertex sets
    /// that span at most a line.
    pub fn new(dim: usize, data: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("polytope dimension must be ≥ 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "vertex data length {} not divisible by dimension {}",
                data.len(),
                dim
            )));
        }
        let q = data.len() / dim;
        if q < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 vertices, got {q}"
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vertex coordinate".into()));
        }
        for i in 0..q {
            for j in (i + 1)..q {
                let d2: f64 = (0..dim)
                    .map(|k| (data[i * dim + k] - data[j * dim + k]).powi(2))
                    .sum();
                if d2.sqrt() <= DISTINCT_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "vertices {i} and {j} coincide"
                    )));
                }
            }
        }

        let mut centroid = vec![0.0; dim];
        for i in 0..q {
            for k in 0..dim {
                centroid[k] += data[i * dim + k];
            }
        }
        for c in centroid.iter_mut() {
            *c /= q as f64;
        }
        let mut centered = data.to_vec();
        for i in 0..q {
            for k in 0..dim {
                centered[i * dim + k] -= centroid[k];
            }
        }

        // Row rank and row-space basis from the n×n Gram matrix of the
        // centered vertex matrix.
        let mut gram = vec![0.0; dim * dim];
        for i in 0..q {
            let v = &centered[i * dim..(i + 1) * dim];
            for r in 0..dim {
                for c in 0..dim {
                    gram[r * dim + c] += v[r] * v[c];
                }
            }
        }
        let (evals, evecs) = sym_eigen(dim, &gram);
        let sigma_max = evals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
        let mut row_rank = 0;
        let mut row_basis = Vec::new();
        for (k, &ev) in evals.iter().enumerate() {
            let sigma = ev.max(0.0).sqrt();
            if sigma > RANK_TOL * sigma_max {
                row_rank += 1;
                for r in 0..dim {
                    row_basis.push(evecs[r * dim + k]);
                }
            }
        }

        if q >= 3 && row_rank <= 1 {
            return Err(Error::InvalidArgument(
                "vertices span at most a line; drop redundant vertices or reduce the dimension"
                    .into(),
            ));
        }

        Ok(Polytope {
            dim,
            num_vertices: q,
            vertices: data.to_vec(),
            centroid,
            centered,
            row_rank,
            row_basis,
        })
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices `q`.
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Numerical rank of the centered vertex matrix.
    pub fn row_rank(&self) -> usize {
        self.row_rank
    }

    /// Vertex centroid.
    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    /// Coordinates of vertex `i`.
    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    /// Centered vertex coordinates `v_i − centroid`.
    pub fn centered_vertex(&self, i: usize) -> &[f64] {
        &self.centered[i * self.dim..(i + 1) * self.dim]
    }

    /// `Vᵀψ`: one score per vertex.
    pub fn scores_into(&self, psi: &[f64], scores: &mut [f64]) {
        debug_assert_eq!(psi.len(), self.dim);
        debug_assert_eq!(scores.len(), self.num_vertices);
        for (i, s) in scores.iter_mut().enumerate() {
            let v = self.vertex(i);
            *s = dot(v, psi);
        }
    }

    /// Barycentric weights `softmax(Vᵀψ)` without allocating.
    pub fn lambda_into(&self, psi: &[f64], lambda: &mut [f64]) {
        self.scores_into(psi, lambda);
        softmax_in_place(lambda);
    }

    /// `V·λ` without allocating.
    pub fn point_from_lambda(&self, lambda: &[f64], point: &mut [f64]) {
        debug_assert_eq!(lambda.len(), self.num_vertices);
        debug_assert_eq!(point.len(), self.dim);
        point.iter_mut().for_each(|x| *x = 0.0);
        for (i, &w) in lambda.iter().enumerate() {
            let v = self.vertex(i);
            for k in 0..self.dim {
                point[k] += w * v[k];
            }
        }
    }

    /// The design map `ψ ↦ (softmax(Vᵀψ), V·softmax(Vᵀψ))`. The returned
    /// point lies in the relative interior of the polytope.
    pub fn gradient_map(&self, psi: &[f64]) -> Result<BarycentricPoint> {
        if psi.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "latent vector has length {}, polytope dimension is {}",
                psi.len(),
                self.dim
            )));
        }
        if psi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite latent vector".into()));
        }
        let mut lambda = vec![0.0; self.num_vertices];
        self.lambda_into(psi, &mut lambda);
        let mut point = vec![0.0; self.dim];
        self.point_from_lambda(&lambda, &mut point);
        Ok(BarycentricPoint { lambda, point })
    }

    /// Conjugate entropy `R*(ψ) = logsumexp(Vᵀψ)`, evaluated with a max
    /// shift so it cannot overflow for finite input.
    pub fn conjugate_value(&self, psi: &[f64]) -> f64 {
        debug_assert_eq!(psi.len(), self.dim);
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.num_vertices {
            m = m.max(dot(self.vertex(i), psi));
        }
        let mut sum = 0.0;
        for i in 0..self.num_vertices {
            sum += (dot(self.vertex(i), psi) - m).exp();
        }
        m + sum.ln()
    }

    /// Jacobian of the design map, `V (diag λ − λλᵀ) Vᵀ`, as a row-major
    /// `n×n` matrix. Symmetric positive semidefinite; positive definite when
    /// the polytope is full-dimensional.
    pub fn map_jacobian(&self, psi: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut lambda = vec![0.0; self.num_vertices];
        self.lambda_into(psi, &mut lambda);
        let mut point = vec![0.0; n];
        self.point_from_lambda(&lambda, &mut point);
        let mut jac = vec![0.0; n * n];
        for (i, &w) in lambda.iter().enumerate() {
            let v = self.vertex(i);
            for r in 0..n {
                for c in 0..n {
                    jac[r * n + c] += w * v[r] * v[c];
                }
            }
        }
        for r in 0..n {
            for c in 0..n {
                jac[r * n + c] -= point[r] * point[c];
            }
        }
        jac
    }

    /// Orthogonal projection onto the row space of the centered vertex
    /// matrix. Latent vectors differing by a null-space component map to the
    /// same design point; this picks the minimal-norm representative.
    pub fn project_to_row_space(&self, psi: &mut [f64]) {
        let n = self.dim;
        let mut proj = vec![0.0; n];
        for k in 0..self.row_rank {
            let b = &self.row_basis[k * n..(k + 1) * n];
            let coef = dot(b, psi);
            for r in 0..n {
                proj[r] += coef * b[r];
            }
        }
        psi.copy_from_slice(&proj);
    }

    /// Invert the design map: find `ψ` with `|V softmax(Vᵀψ) − η| ≤ tol`.
    ///
    /// Damped Newton on the strictly concave dual `ψ·η − R*(ψ)` starting from
    /// `ψ = 0`, with the Jacobian as (regularized) Hessian. For rank-deficient
    /// polytopes the iterate is kept in the row space of the centered vertex
    /// matrix, so the minimal-norm representative is returned.
    pub fn inverse_map(&self, eta: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        self.inverse_map_from(eta, None, tol, max_iter)
    }

    /// [`Polytope::inverse_map`] with an explicit starting point.
    pub fn inverse_map_from(
        &self,
        eta: &[f64],
        start: Option<&[f64]>,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>> {
        let n = self.dim;
        if eta.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "target point has length {}, polytope dimension is {n}",
                eta.len()
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("inverse-map tolerance must be positive".into()));
        }
        let mut psi = match start {
            Some(s) => {
                let mut p = s.to_vec();
                self.project_to_row_space(&mut p);
                p
            }
            None => vec![0.0; n],
        };
        let mut lambda = vec![0.0; self.num_vertices];
        let mut point = vec![0.0; n];
        let mut residual = f64::INFINITY;

        let dual = |p: &[f64]| dot(p, eta) - self.conjugate_value(p);

        for it in 0..max_iter {
            self.lambda_into(&psi, &mut lambda);
            self.point_from_lambda(&lambda, &mut point);
            let mut grad = vec![0.0; n];
            let mut r2 = 0.0;
            for k in 0..n {
                grad[k] = eta[k] - point[k];
                r2 += grad[k] * grad[k];
            }
            residual = r2.sqrt();
            if residual <= tol {
                self.project_to_row_space(&mut psi);
                return Ok(psi);
            }

            let mut hess = self.map_jacobian(&psi);
            for k in 0..n {
                hess[k * n + k] += 1e-12;
            }
            let mut step = grad.clone();
            sym_solve_in_place(n, &mut hess, &mut step).map_err(|_| Error::BoundaryProximity {
                residual,
                iterations: it,
            })?;
            self.project_to_row_space(&mut step);

            // Backtracking ascent on the dual. Near the optimum the ascent
            // per step drops below the float resolution of the dual value;
            // the absolute slack keeps full Newton steps acceptable there.
            let phi0 = dual(&psi);
            let slack = 1e-14 * (1.0 + phi0.abs());
            let slope = dot(&grad, &step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = psi.iter().zip(&step).map(|(p, s)| p + t * s).collect();
                if dual(&trial) >= phi0 + 1e-4 * t * slope - slack {
                    psi = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::BoundaryProximity {
                    residual,
                    iterations: it,
                });
            }
        }
        Err(Error::BoundaryProximity {
            residual,
            iterations: max_iter,
        })
    }

    /// Entropy `R(η) = ψ·η − R*(ψ)` at `ψ = ∇R(η)`, which by conjugacy
    /// equals `min{Σλᵢ ln λᵢ : Vλ = η}`.
    pub fn entropy_value(&self, eta: &[f64], psi_hint: Option<&[f64]>) -> Result<f64> {
        let psi = self.inverse_map_from(eta, psi_hint, 1e-12, 200)?;
        Ok(dot(&psi, eta) - self.conjugate_value(&psi))
    }

    /// Bregman divergence `D_R(η, v) = R(η) − R(v) − ∇R(v)·(η − v)`.
    /// Nonnegative, zero iff the arguments coincide.
    pub fn bregman_divergence(&self, eta: &[f64], v: &[f64]) -> Result<f64> {
        let psi_v = self.inverse_map(v, 1e-12, 200)?;
        let r_v = dot(&psi_v, v) - self.conjugate_value(&psi_v);
        let r_eta = self.entropy_value(eta, Some(&psi_v))?;
        let mut lin = 0.0;
        for k in 0..self.dim {
            lin += psi_v[k] * (eta[k] - v[k]);
        }
        Ok(r_eta - r_v - lin)
    }

    /// `min_i d·(v_i − η)`: the cellwise ingredient of the stationarity
    /// residual. Nonpositive whenever `η ∈ P`.
    pub fn min_vertex_gap(&self, d: &[f64], eta: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.num_vertices {
            let v = self.vertex(i);
            let mut g = 0.0;
            for k in 0..self.dim {
                g += d[k] * (v[k] - eta[k]);
            }
            best = best.min(g);
        }
        best
    }

    /// Serialize as plain text: one vertex per line, coordinates whitespace
    /// separated.
    pub fn to_vertex_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.num_vertices {
            let v = self.vertex(i);
            for (k, x) in v.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{x:.17e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parse the plain-text vertex format. Blank lines and `#` comments are
    /// ignored; the dimension is inferred from the first vertex line.
    pub fn from_vertex_text(text: &str) -> Result<Self> {
        let mut dim = 0;
        let mut data = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!(
                            "line {}: cannot parse '{t}' as a number",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            if dim == 0 {
                dim = fields.len();
            } else if fields.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected {dim} fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            data.extend_from_slice(&fields);
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("no vertices in input".into()));
        }
        Polytope::new(dim, &data)
    }
}

/// Numerically stable softmax: shifts by the maximum before exponentiating,
/// so any finite input is safe. Entries land in `(0, 1]` and sum to one.
pub fn stable_softmax(y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty vector".into()));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite softmax input".into()));
    }
    let mut out = y.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(y: &mut [f64]) {
    let m = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in y.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in y.iter_mut() {
        *v /= sum;
    }
}

/// Regular `num_angles`-gon base with an apex on the remaining coordinate
/// axis of `R³`: the design set for one isotropic-or-void phase plus one
/// rotating anisotropic phase.
///
/// Base vertex `i` sits at angle `βᵢ = 2π·i/num_angles` in the coordinate
/// plane orthogonal to the apex axis. With `periodic = true` the vertex
/// represents the physical orientation `θᵢ = βᵢ/2` (double-angle encoding of
/// π-periodic material tensors); otherwise it represents `θᵢ = βᵢ` directly.
/// Either way the base is a regular polygon, so the flag does not change the
/// geometry — it documents which decoding the consumer applies.
///
/// `apex` must be a signed standard basis vector; `apex_first` controls
/// whether it precedes or follows the base vertices in the vertex order.
pub fn regular_polygon_with_apex(
    num_angles: usize,
    periodic: bool,
    apex: [f64; 3],
    apex_first: bool,
) -> Result<Polytope> {
    let _ = periodic;
    if num_angles < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 base angles, got {num_angles}"
        )));
    }
    let mut axis = None;
    for (k, &a) in apex.iter().enumerate() {
        if a != 0.0 {
            if axis.is_some() || (a - 1.0).abs() > 1e-15 && (a + 1.0).abs() > 1e-15 {
                axis = None;
                break;
            }
            axis = Some(k);
        }
    }
    let axis = axis.ok_or_else(|| {
        Error::InvalidArgument("apex must be a signed standard basis vector of R³".into())
    })?;
    let (ca, cb) = ((axis + 1) % 3, (axis + 2) % 3);

    let mut data = Vec::with_capacity(3 * (num_angles + 1));
    if apex_first {
        data.extend_from_slice(&apex);
    }
    for i in 0..num_angles {
        let beta = 2.0 * std::f64::consts::PI * i as f64 / num_angles as f64;
        let mut v = [0.0; 3];
        v[ca] = beta.cos();
        v[cb] = beta.sin();
        data.extend_from_slice(&v);
    }
    if !apex_first {
        data.extend_from_slice(&apex);
    }
    Polytope::new(3, &data)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn unit_square() -> Polytope {
        Polytope::new(2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap()
    }

    pub(crate) fn segment() -> Polytope {
        Polytope::new(1, &[0.0, 1.0]).unwrap()
    }

    fn simplex3() -> Polytope {
        Polytope::new(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn random_polytope(rng: &mut ChaCha8Rng, dim: usize, q: usize) -> Polytope {
        loop {
            let data: Vec<f64> = (0..dim * q).map(|_| rng.random_range(-0.5..0.5)).collect();
            if let Ok(p) = Polytope::new(dim, &data) {
                return p;
            }
        }
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let s = stable_softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_huge_inputs() {
        let s = stable_softmax(&[1e6, 1e6, 1e6]).unwrap();
        for v in &s {
            assert!(v.is_finite());
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn softmax_of_logs_is_exact() {
        let s = stable_softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        assert!((s[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((s[1] - 2.0 / 6.0).abs() < 1e-15);
        assert!((s[2] - 3.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(stable_softmax(&[0.0, f64::NAN]).is_err());
        assert!(stable_softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn construction_rejects_duplicates_and_lines() {
        assert!(Polytope::new(2, &[0.0, 0.0, 0.0, 0.0]).is_err());
        // Three collinear points.
        assert!(Polytope::new(2, &[0.0, 0.0, 0.5, 0.5, 1.0, 1.0]).is_err());
        // A plain segment is fine.
        assert!(Polytope::new(2, &[0.0, 0.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn centered_vertices_sum_to_zero() {
        let p = unit_square();
        for k in 0..p.dim() {
            let s: f64 = (0..p.num_vertices()).map(|i| p.centered_vertex(i)[k]).sum();
            assert!(s.abs() <= 1e-14);
        }
        assert_eq!(p.row_rank(), 2);
        // The standard simplex in R³ is rank-deficient by one.
        assert_eq!(simplex3().row_rank(), 2);
    }

    #[test]
    fn gradient_map_centroid_at_zero_latent() {
        let p = unit_square();
        let b = p.gradient_map(&[0.0, 0.0]).unwrap();
        assert!((b.point[0] - 0.5).abs() < 1e-15);
        assert!((b.point[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_map_reduces_to_logistic_on_segment() {
        let p = segment();
        for s in [-3.0, 0.0, 0.7, 5.0] {
            let b = p.gradient_map(&[s]).unwrap();
            let logistic = 1.0 / (1.0 + (-s).exp());
            assert!((b.point[0] - logistic).abs() < 1e-15, "s = {s}");
        }
    }

    #[test]
    fn gradient_map_on_simplex_is_softmax() {
        let p = simplex3();
        let psi = [1f64.ln(), 2f64.ln(), 3f64.ln()];
        let b = p.gradient_map(&psi).unwrap();
        assert!((b.point[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((b.point[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.point[2] - 1.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_examples() {
        assert!((unit_square().conjugate_value(&[0.0, 0.0]) - 4f64.ln()).abs() < 1e-15);
        assert!((segment().conjugate_value(&[0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn conjugate_shifts_linearly_along_invariant_directions() {
        // For the simplex, ψ + c·1 has all vertex scores shifted by c.
        let p = simplex3();
        let psi = [0.3, -0.2, 0.9];
        let c = 1.7;
        let shifted = [psi[0] + c, psi[1] + c, psi[2] + c];
        let diff = p.conjugate_value(&shifted) - p.conjugate_value(&psi);
        assert!((diff - c).abs() < 1e-12);
    }

    #[test]
    fn jacobian_at_square_center() {
        let p = unit_square();
        let j = p.map_jacobian(&[0.0, 0.0]);
        let expect = [0.25, 0.0, 0.0, 0.25];
        for (a, b) in j.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_polytope(&mut rng, 2, 5);
            let psi: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let jac = p.map_jacobian(&psi);
            let h = 1e-6;
            for c in 0..2 {
                let mut pp = psi.clone();
                pp[c] += h;
                let mut pm = psi.clone();
                pm[c] -= h;
                let fp = p.gradient_map(&pp).unwrap().point;
                let fm = p.gradient_map(&pm).unwrap().point;
                for r in 0..2 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!((jac[r * 2 + c] - fd).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn jacobian_positive_definite_for_full_rank() {
        let p = unit_square();
        let j = p.map_jacobian(&[1.0, -0.5]);
        let (evals, _) = sym_eigen(2, &j);
        assert!(evals[0] > 0.0);
    }

    #[test]
    fn inverse_map_examples() {
        let p = unit_square();
        let psi = p.inverse_map(&[0.5, 0.5], 1e-12, 100).unwrap();
        assert!(psi[0].abs() < 1e-10 && psi[1].abs() < 1e-10);

        // Minimal-norm representative on the simplex: mean-centered logs.
        let p = simplex3();
        let eta = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 2.0];
        let psi = p.inverse_map(&eta, 1e-13, 100).unwrap();
        let logs = [(1f64 / 6.0).ln(), (1f64 / 3.0).ln(), (1f64 / 2.0).ln()];
        let mean = (logs[0] + logs[1] + logs[2]) / 3.0;
        for k in 0..3 {
            assert!((psi[k] - (logs[k] - mean)).abs() < 1e-10, "{psi:?}");
        }
    }

    #[test]
    fn inverse_map_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let p = random_polytope(&mut rng, 3, 6);
            let mut psi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = rng.random_range(0.1..10.0);
            let len: f64 = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
            psi.iter_mut().for_each(|x| *x *= norm / len);
            let eta = p.gradient_map(&psi).unwrap().point;
            let rec = p.inverse_map(&eta, 1e-14, 200).unwrap();
            p.project_to_row_space(&mut psi);
            for k in 0..3 {
                assert!((rec[k] - psi[k]).abs() < 1e-8, "{rec:?} vs {psi:?}");
            }
        }
    }

    #[test]
    fn inverse_map_fails_outside_the_polytope() {
        let p = unit_square();
        let err = p.inverse_map(&[1.5, 0.5], 1e-12, 60).unwrap_err();
        assert!(matches!(err, Error::BoundaryProximity { .. }), "{err:?}");
    }

    #[test]
    fn entropy_examples() {
        let p = unit_square();
        let r = p.entropy_value(&[0.5, 0.5], None).unwrap();
        assert!((r + 4f64.ln()).abs() < 1e-10);

        let p = simplex3();
        let eta = [1.0f64 / 6.0, 1.0 / 3.0, 1.0 / 2.0];
        let gibbs: f64 = eta.iter().map(|&x| x * x.ln()).sum();
        let r = p.entropy_value(&eta, None).unwrap();
        assert!((r - gibbs).abs() < 1e-10, "{r} vs {gibbs}");
    }

    #[test]
    fn entropy_matches_brute_force_on_hexagon() {
        let mut data = Vec::new();
        for i in 0..6 {
            let a = std::f64::consts::PI / 3.0 * i as f64;
            data.push(a.cos());
            data.push(a.sin());
        }
        let p = Polytope::new(2, &data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let psi: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
            let eta = p.gradient_map(&psi).unwrap().point;
            let r = p.entropy_value(&eta, None).unwrap();
            let (_, oracle) = oracles::min_entropy_barycentric(2, &data, &eta).unwrap();
            assert!((r - oracle).abs() < 1e-6, "{r} vs {oracle}");
        }
    }

    #[test]
    fn bregman_of_point_from_itself_is_zero() {
        let p = unit_square();
        let d = p.bregman_divergence(&[0.4, 0.7], &[0.4, 0.7]).unwrap();
        assert!(d.abs() < 1e-10);
    }

    #[test]
    fn bregman_matches_binary_entropy_on_segment() {
        let p = segment();
        let v = 1.0 / (1.0 + (-1.0f64).exp()); // sigmoid(1)
        let d = p.bregman_divergence(&[0.5], &[v]).unwrap();
        let expect = oracles::binary_entropy_bregman(0.5, v);
        assert!((d - expect).abs() < 1e-9, "{d} vs {expect}");
    }

    #[test]
    fn bregman_second_order_taylor() {
        let p = unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let psi: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = p.gradient_map(&psi).unwrap().point;
            let dir: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale = 1e-4 / dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let eta: Vec<f64> = v.iter().zip(&dir).map(|(a, b)| a + b * scale).collect();
            let d = p.bregman_divergence(&eta, &v).unwrap();
            // ∇²R(v) is the inverse of the map Jacobian at ψ(v).
            let mut jac = p.map_jacobian(&psi);
            let mut z: Vec<f64> = eta.iter().zip(&v).map(|(a, b)| a - b).collect();
            let diff = z.clone();
            sym_solve_in_place(2, &mut jac, &mut z).unwrap();
            let quad = 0.5 * (diff[0] * z[0] + diff[1] * z[1]);
            assert!(d >= 0.0);
            assert!((d - quad).abs() <= 1e-2 * quad.abs().max(1e-300), "{d} vs {quad}");
        }
    }

    #[test]
    fn saturation_toward_unique_argmax_vertex() {
        let p = unit_square();
        // Unique argmax at vertex (1,1); the score margin to the runner-up
        // is 40·0.7 = 28, far past saturation.
        let d = [0.9, 0.7];
        let psi = [40.0 * d[0], 40.0 * d[1]];
        let b = p.gradient_map(&psi).unwrap();
        let gap = ((b.point[0] - 1.0).powi(2) + (b.point[1] - 1.0).powi(2)).sqrt();
        assert!(gap < 1e-10, "gap {gap}");
    }

    #[test]
    fn polygon_builder_octagon_with_apex_first() {
        let p = regular_polygon_with_apex(8, true, [1.0, 0.0, 0.0], true).unwrap();
        assert_eq!(p.num_vertices(), 9);
        assert_eq!(p.row_rank(), 3);
        assert_eq!(p.vertex(0), &[1.0, 0.0, 0.0]);
        // Base vertex i at angle 2θᵢ with θᵢ = iπ/8, in the (y, z) plane.
        for i in 0..8 {
            let beta = std::f64::consts::PI * i as f64 / 4.0;
            let v = p.vertex(1 + i);
            assert!(v[0].abs() < 1e-15);
            assert!((v[1] - beta.cos()).abs() < 1e-15);
            assert!((v[2] - beta.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn polygon_builder_motor_layout() {
        let p = regular_polygon_with_apex(12, false, [0.0, 0.0, 1.0], false).unwrap();
        assert_eq!(p.num_vertices(), 13);
        for i in 0..12 {
            let phi = std::f64::consts::PI * i as f64 / 6.0;
            let v = p.vertex(i);
            assert!((v[0] - phi.cos()).abs() < 1e-15);
            assert!((v[1] - phi.sin()).abs() < 1e-15);
            assert!(v[2].abs() < 1e-15);
        }
        assert_eq!(p.vertex(12), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn polygon_builder_square_base() {
        let p = regular_polygon_with_apex(4, true, [0.0, 0.0, 1.0], false).unwrap();
        assert_eq!(p.num_vertices(), 5);
        assert!(regular_polygon_with_apex(2, true, [0.0, 0.0, 1.0], false).is_err());
    }

    #[test]
    fn vertex_text_roundtrip() {
        let p = regular_polygon_with_apex(5, false, [0.0, 0.0, 1.0], false).unwrap();
        let text = p.to_vertex_text();
        let q = Polytope::from_vertex_text(&text).unwrap();
        assert_eq!(p.num_vertices(), q.num_vertices());
        for i in 0..p.num_vertices() {
            for k in 0..3 {
                assert_eq!(p.vertex(i)[k], q.vertex(i)[k]);
            }
        }
        assert!(Polytope::from_vertex_text("1 2\n3\n").is_err());
    }

    proptest! {
        #[test]
        fn softmax_translation_invariance(values in proptest::collection::vec(-40.0f64..40.0, 2..8), shift in -30.0f64..30.0) {
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let a = stable_softmax(&values).unwrap();
            let b = stable_softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn map_stays_interior(psi in proptest::collection::vec(-30.0f64..30.0, 2)) {
            let p = super::tests::unit_square();
            let b = p.gradient_map(&psi).unwrap();
            prop_assert!(b.lambda.iter().all(|&l| l > 0.0));
            prop_assert!((b.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_equivariance_of_gradient_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_polytope(&mut rng, 2, 6);
            let shift = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let mut moved = Vec::new();
            for i in 0..p.num_vertices() {
                moved.push(p.vertex(i)[0] + shift[0]);
                moved.push(p.vertex(i)[1] + shift[1]);
            }
            let ps = Polytope::new(2, &moved).unwrap();
            let psi = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let a = p.gradient_map(&psi).unwrap().point;
            let b = ps.gradient_map(&psi).unwrap().point;
            for k in 0..2 {
                assert!((b[k] - (a[k] + shift[k])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn conjugacy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let p = random_polytope(&mut rng, 2, 5);
            let psi = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let eta = p.gradient_map(&psi).unwrap().point;
            let psi_rec = p.inverse_map(&eta, 1e-13, 200).unwrap();
            let r = p.entropy_value(&eta, None).unwrap();
            let lhs = r + p.conjugate_value(&psi_rec);
            let rhs: f64 = psi_rec.iter().zip(&eta).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }
}
