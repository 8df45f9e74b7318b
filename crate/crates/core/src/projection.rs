//! Bregman projection of a latent field onto the global linear constraints.
//!
//! The constraint set is `M = {η : ∫ W η dx ⪯ b}`. Projecting a latent
//! field `ψ` onto `M` in the Bregman geometry subtracts `Wᵀμ` from `ψ` with
//! multipliers `μ ⪰ 0` solving a small dual problem. One constraint reduces
//! to a scalar root-find on the monotone mass function
//! `h(μ) = ∫ w·∇R*(ψ − μw) dx`, handled by the Illinois variant of regula
//! falsi; several constraints are handled by cyclic Dykstra sweeps over the
//! half-spaces.
//!
//! Because the correction is the same vector in every cell, a projection is
//! fully described by `μ`, and all mass evaluations run on precomputed
//! per-cell vertex scores `Vᵀψ` shifted by multiples of `Vᵀw`.

use crate::error::Error;
use crate::field::CellField;
use crate::polytope::{softmax_in_place, Polytope};
use crate::Result;

/// Global linear constraints `∫ W η dx ⪯ b`, one row of `W` per constraint.
#[derive(Debug, Clone)]
pub struct GlobalConstraints {
    channels: usize,
    rows: Vec<f64>,
    bounds: Vec<f64>,
}

impl GlobalConstraints {
    /// Build from per-constraint weight rows and bounds. Rows of zeros are
    /// rejected: they are either vacuous or infeasible and always a mistake.
    pub fn new(channels: usize, rows: &[Vec<f64>], bounds: &[f64]) -> Result<Self> {
        if rows.len() != bounds.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weight rows but {} bounds",
                rows.len(),
                bounds.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != channels {
                return Err(Error::ShapeMismatch(format!(
                    "constraint {i} has {} weights, expected {channels}",
                    row.len()
                )));
            }
            if row.iter().all(|&w| w == 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "constraint {i} has all-zero weights"
                )));
            }
            if row.iter().any(|w| !w.is_finite()) || !bounds[i].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "constraint {i} has non-finite data"
                )));
            }
        }
        Ok(GlobalConstraints {
            channels,
            rows: rows.iter().flatten().copied().collect(),
            bounds: bounds.to_vec(),
        })
    }

    /// No constraints at all.
    pub fn none(channels: usize) -> Self {
        GlobalConstraints {
            channels,
            rows: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_constraints(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.channels..(i + 1) * self.channels]
    }

    pub fn bound(&self, i: usize) -> f64 {
        self.bounds[i]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Certify strict feasibility with a user-supplied interior design point:
    /// the constant field at `point` must satisfy every constraint strictly,
    /// and `point` must lie in the (relative) interior of the polytope, which
    /// is checked by inverting the design map at it.
    pub fn check_strictly_feasible(
        &self,
        polytope: &Polytope,
        point: &[f64],
        domain_area: f64,
    ) -> Result<()> {
        polytope
            .inverse_map(point, 1e-9, 200)
            .map_err(|e| Error::Infeasible(format!("certificate point is not interior: {e}")))?;
        for i in 0..self.num_constraints() {
            let w = self.row(i);
            let v: f64 = w.iter().zip(point).map(|(a, b)| a * b).sum::<f64>() * domain_area;
            if !(v < self.bound(i)) {
                return Err(Error::Infeasible(format!(
                    "certificate point violates constraint {i}: {v:.6e} ≥ {:.6e}",
                    self.bound(i)
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a Bregman projection.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Projected latent field `ψ_half − Wᵀμ`.
    pub psi: CellField,
    /// Dual multipliers, one per constraint, all nonnegative.
    pub multipliers: Vec<f64>,
    /// Post-projection constraint slack `∫Wη dx − b` per constraint.
    pub violation: Vec<f64>,
    /// Dykstra sweeps used (1 for a single constraint).
    pub sweeps: usize,
}

/// Per-cell vertex scores `Vᵀψ_e`, the working representation for mass
/// evaluations.
struct ScoreTable {
    q: usize,
    num_cells: usize,
    scores: Vec<f64>,
}

impl ScoreTable {
    fn build(polytope: &Polytope, psi: &CellField) -> ScoreTable {
        let q = polytope.num_vertices();
        let num_cells = psi.mesh().num_cells();
        let mut scores = vec![0.0; q * num_cells];
        for e in 0..num_cells {
            polytope.scores_into(psi.cell(e), &mut scores[e * q..(e + 1) * q]);
        }
        ScoreTable {
            q,
            num_cells,
            scores,
        }
    }

    /// `∫ w·∇R*(ψ − shift − μ·w) dx` where `dir = Vᵀw` and `shift` is an
    /// already-combined score-space offset.
    fn directional_mass(&self, shift: &[f64], dir: &[f64], mu: f64, cell_area: f64) -> f64 {
        let q = self.q;
        let mut z = vec![0.0; q];
        let mut total = 0.0;
        for e in 0..self.num_cells {
            let t = &self.scores[e * q..(e + 1) * q];
            for v in 0..q {
                z[v] = t[v] - shift[v] - mu * dir[v];
            }
            softmax_in_place(&mut z);
            let mut m = 0.0;
            for v in 0..q {
                m += dir[v] * z[v];
            }
            total += m;
        }
        total * cell_area
    }
}

/// `∫ W·∇R*(ψ) dx` componentwise.
pub fn constraint_values(
    polytope: &Polytope,
    psi: &CellField,
    constraints: &GlobalConstraints,
) -> Result<Vec<f64>> {
    check_shapes(polytope, psi, constraints)?;
    let r = constraints.num_constraints();
    let n = polytope.dim();
    let area = psi.mesh().cell_area();
    let mut lambda = vec![0.0; polytope.num_vertices()];
    let mut point = vec![0.0; n];
    let mut out = vec![0.0; r];
    for e in 0..psi.mesh().num_cells() {
        polytope.lambda_into(psi.cell(e), &mut lambda);
        polytope.point_from_lambda(&lambda, &mut point);
        for i in 0..r {
            let w = constraints.row(i);
            let mut d = 0.0;
            for k in 0..n {
                d += w[k] * point[k];
            }
            out[i] += d;
        }
    }
    for v in out.iter_mut() {
        *v *= area;
    }
    Ok(out)
}

/// Dual objective `g(μ) = −∫ R*(ψ − Wᵀμ) dx − μ·b`; concave in `μ`.
pub fn dual_objective(
    polytope: &Polytope,
    psi_half: &CellField,
    constraints: &GlobalConstraints,
    mu: &[f64],
) -> Result<f64> {
    check_shapes(polytope, psi_half, constraints)?;
    if mu.len() != constraints.num_constraints() {
        return Err(Error::ShapeMismatch("multiplier count mismatch".into()));
    }
    if mu.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidArgument("multipliers must be nonnegative".into()));
    }
    let n = polytope.dim();
    let area = psi_half.mesh().cell_area();
    let mut shifted = vec![0.0; n];
    let mut val = 0.0;
    for e in 0..psi_half.mesh().num_cells() {
        let psi = psi_half.cell(e);
        for k in 0..n {
            shifted[k] = psi[k];
            for (i, &m) in mu.iter().enumerate() {
                shifted[k] -= m * constraints.row(i)[k];
            }
        }
        val -= polytope.conjugate_value(&shifted);
    }
    val *= area;
    for (i, &m) in mu.iter().enumerate() {
        val -= m * constraints.bound(i);
    }
    Ok(val)
}

/// Projection onto a single half-space constraint `∫ w·η dx ≤ b`.
///
/// If the input is already feasible it is returned untouched with `μ = 0`.
/// Otherwise the unique `μ* > 0` with `h(μ*) = b` is bracketed by geometric
/// growth from `[0, 1]` and polished by the Illinois algorithm; the bracket
/// cap surfaces genuinely infeasible constraint directions.
pub fn project_single(
    polytope: &Polytope,
    psi_half: &CellField,
    w: &[f64],
    b: f64,
    tol_g: f64,
) -> Result<ProjectionResult> {
    let c = GlobalConstraints::new(psi_half.channels(), &[w.to_vec()], &[b])?;
    check_shapes(polytope, psi_half, &c)?;
    if !(tol_g > 0.0) {
        return Err(Error::InvalidArgument("projection tolerance must be positive".into()));
    }
    let table = ScoreTable::build(polytope, psi_half);
    let mut dir = vec![0.0; polytope.num_vertices()];
    polytope.scores_into(w, &mut dir);
    let zero_shift = vec![0.0; polytope.num_vertices()];
    let area = psi_half.mesh().cell_area();

    let mu = solve_half_space(&table, &zero_shift, &dir, b, area, tol_g)?;
    let (psi, violation) = apply_multipliers(polytope, psi_half, &c, &[mu]);
    Ok(ProjectionResult {
        psi,
        multipliers: vec![mu],
        violation,
        sweeps: 1,
    })
}

/// Bregman–Dykstra projection onto the intersection of `r` half-spaces.
///
/// Cyclic sweeps in ascending constraint order; each inner step re-solves the
/// single-constraint root-find with that constraint's stored correction
/// removed, so multipliers can shrink back to zero. Terminates when measured
/// violations, the sweep-to-sweep latent change, and the complementary
/// slackness products are all within `tol_g`.
pub fn project_multi(
    polytope: &Polytope,
    psi_half: &CellField,
    constraints: &GlobalConstraints,
    tol_g: f64,
    max_sweeps: usize,
) -> Result<ProjectionResult> {
    check_shapes(polytope, psi_half, constraints)?;
    let r = constraints.num_constraints();
    if r == 0 {
        return Err(Error::InvalidArgument("no constraints to project onto".into()));
    }
    if r == 1 {
        return project_single(
            polytope,
            psi_half,
            constraints.row(0),
            constraints.bound(0),
            tol_g,
        );
    }
    if !(tol_g > 0.0) {
        return Err(Error::InvalidArgument("projection tolerance must be positive".into()));
    }

    let q = polytope.num_vertices();
    let area = psi_half.mesh().cell_area();
    let table = ScoreTable::build(polytope, psi_half);
    let dirs: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut d = vec![0.0; q];
            polytope.scores_into(constraints.row(i), &mut d);
            d
        })
        .collect();

    let mut mu = vec![0.0; r];
    let mut shift = vec![0.0; q];
    let mut last_violation = vec![f64::INFINITY; r];

    for sweep in 1..=max_sweeps {
        let mu_prev = mu.clone();
        for i in 0..r {
            // Score-space offset of all corrections except constraint i's.
            for v in 0..q {
                shift[v] = 0.0;
                for j in 0..r {
                    if j != i {
                        shift[v] += mu[j] * dirs[j][v];
                    }
                }
            }
            mu[i] = solve_half_space(
                &table,
                &shift,
                &dirs[i],
                constraints.bound(i),
                area,
                tol_g,
            )?;
        }

        // Measure the settled state.
        for v in 0..q {
            shift[v] = (0..r).map(|j| mu[j] * dirs[j][v]).sum();
        }
        let mut violations_ok = true;
        let mut slack_ok = true;
        for i in 0..r {
            let cv = table.directional_mass(&shift, &dirs[i], 0.0, area);
            last_violation[i] = cv - constraints.bound(i);
            if last_violation[i] > tol_g {
                violations_ok = false;
            }
            if (mu[i] * last_violation[i]).abs() > tol_g * constraints.bound(i).abs().max(1.0) {
                slack_ok = false;
            }
        }
        let mut latent_delta: f64 = 0.0;
        for k in 0..constraints.channels() {
            let d: f64 = (0..r)
                .map(|i| (mu[i] - mu_prev[i]) * constraints.row(i)[k])
                .sum();
            latent_delta = latent_delta.max(d.abs());
        }

        if violations_ok && slack_ok && latent_delta <= tol_g {
            let (psi, violation) = apply_multipliers(polytope, psi_half, constraints, &mu);
            return Ok(ProjectionResult {
                psi,
                multipliers: mu,
                violation,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_sweeps,
        residual: last_violation.iter().cloned().fold(0.0, f64::max),
    })
}

/// Root-find for one half-space: smallest `μ ≥ 0` bringing the directional
/// mass to its bound. Returns 0 when already feasible.
fn solve_half_space(
    table: &ScoreTable,
    shift: &[f64],
    dir: &[f64],
    bound: f64,
    area: f64,
    tol_g: f64,
) -> Result<f64> {
    let f = |mu: f64| table.directional_mass(shift, dir, mu, area) - bound;
    let f0 = f(0.0);
    if f0 <= 0.0 {
        return Ok(0.0);
    }
    // Geometric bracket growth: h is nonincreasing in μ.
    let mut lo = 0.0;
    let mut flo = f0;
    let mut hi = 1.0;
    let mut fhi = f(hi);
    while fhi > 0.0 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        if hi > (1u64 << 60) as f64 {
            return Err(Error::Infeasible(format!(
                "no strictly feasible point in the constraint direction (mass excess {:.3e} at μ = 2^60)",
                fhi
            )));
        }
        fhi = f(hi);
    }

    // Illinois: regula falsi with stale-side function halving.
    let accept = |mu: f64, fmu: f64| fmu.abs() <= tol_g.min(tol_g * bound.abs().max(1.0) / mu.abs().max(1.0));
    if accept(hi, fhi) {
        return Ok(hi);
    }
    let (mut a, mut fa, mut b, mut fb) = (lo, flo, hi, fhi);
    for _ in 0..500 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if accept(c, fc) {
            return Ok(c);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
        if (a - b).abs() <= f64::EPSILON * a.abs().max(b.abs()) {
            // Bracket exhausted at machine precision; take the better side.
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(Error::NonConvergence {
        iterations: 500,
        residual: fb.abs(),
    })
}

fn apply_multipliers(
    polytope: &Polytope,
    psi_half: &CellField,
    constraints: &GlobalConstraints,
    mu: &[f64],
) -> (CellField, Vec<f64>) {
    let n = constraints.channels();
    let mut correction = vec![0.0; n];
    for (i, &m) in mu.iter().enumerate() {
        for k in 0..n {
            correction[k] += m * constraints.row(i)[k];
        }
    }
    let mut psi = psi_half.clone();
    for e in 0..psi.mesh().num_cells() {
        let cell = psi.cell_mut(e);
        for k in 0..n {
            cell[k] -= correction[k];
        }
    }
    let cv = constraint_values(polytope, &psi, constraints).expect("shapes already checked");
    let violation: Vec<f64> = cv
        .iter()
        .zip(constraints.bounds())
        .map(|(v, b)| v - b)
        .collect();
    (psi, violation)
}

fn check_shapes(
    polytope: &Polytope,
    psi: &CellField,
    constraints: &GlobalConstraints,
) -> Result<()> {
    if psi.channels() != polytope.dim() {
        return Err(Error::ShapeMismatch(format!(
            "latent field has {} channels, polytope dimension is {}",
            psi.channels(),
            polytope.dim()
        )));
    }
    if constraints.channels() != polytope.dim() {
        return Err(Error::ShapeMismatch(format!(
            "constraints have {} channels, polytope dimension is {}",
            constraints.channels(),
            polytope.dim()
        )));
    }
    if !psi.is_finite() {
        return Err(Error::InvalidArgument("non-finite latent field".into()));
    }
    Ok(())
}
