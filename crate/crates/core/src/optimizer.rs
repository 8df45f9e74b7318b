//! The projected mirror-descent loop.
//!
//! Each iteration takes a latent gradient step `ψ^{k+1/2} = ψ^k − α∇F(η^k)`,
//! projects onto the global constraints (`ψ^{k+1} = ψ^{k+1/2} − Wᵀμ`), maps
//! back to the design (`η^{k+1} = V softmax(Vᵀψ^{k+1})`), and accepts the
//! step when the generalized Armijo condition holds, halving `α` otherwise.
//! The step proposal is the generalized Barzilai–Borwein ratio built from
//! the previous accepted iterates. Runs stop on the vertex-gap stationarity
//! residual, absolute or relative to its first value.
//!
//! Latent iterates are clamped componentwise to a configurable box before
//! projection: far beyond saturation the design is a pure phase to machine
//! precision anyway, and the clamp keeps every barycentric weight strictly
//! positive in floating point.

use crate::error::Error;
use crate::field::{vertex_gap_residual, CellField};
use crate::polytope::Polytope;
use crate::projection::{
    constraint_values, project_multi, project_single, GlobalConstraints, ProjectionResult,
};
use crate::Result;

/// Objective callback: value and piecewise-constant L² gradient at a design.
pub trait Objective {
    fn evaluate(&mut self, eta: &CellField) -> Result<(f64, CellField)>;
}

/// Blanket impl so plain closures work as objectives in tests and small
/// experiments.
impl<F> Objective for F
where
    F: FnMut(&CellField) -> Result<(f64, CellField)>,
{
    fn evaluate(&mut self, eta: &CellField) -> Result<(f64, CellField)> {
        self(eta)
    }
}

/// Options of the Bregman projection inside the loop.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    /// Absolute tolerance on constraint values, in `∫Wη` units.
    pub tolerance: f64,
    /// Dykstra sweep cap for several constraints.
    pub max_sweeps: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tolerance: 1e-10,
            max_sweeps: 500,
        }
    }
}

/// Optimizer options.
#[derive(Debug, Clone, Copy)]
pub struct OptOptions {
    /// Armijo constant.
    pub c1: f64,
    /// Stop when the residual falls to this absolute value.
    pub tol_abs: f64,
    /// Stop when `res_k / res_0` falls to this value.
    pub tol_rel: f64,
    /// Step size of the very first iteration (Barzilai–Borwein takes over
    /// afterwards).
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_iters: usize,
    /// Armijo halvings per iteration before the last trial is accepted with
    /// a warning flag.
    pub max_backtracks: usize,
    /// Componentwise clamp on the pre-projection latent field. Keeps the
    /// softmax weights representable: with unit-scale vertices the default
    /// keeps every barycentric weight strictly positive in f64 while sitting
    /// far beyond the saturation scale, so it does not bind in practice.
    /// Scale it down for polytopes with large vertex coordinates.
    pub latent_bound: f64,
    pub projection: ProjectionOptions,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            c1: 1e-4,
            tol_abs: 0.0,
            tol_rel: 1e-4,
            alpha0: 1.0,
            alpha_min: 1e-12,
            alpha_max: 1e12,
            max_iters: 1000,
            max_backtracks: 40,
            latent_bound: 300.0,
            projection: ProjectionOptions::default(),
        }
    }
}

impl OptOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::InvalidArgument("c1 must lie in (0, 1)".into()));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha0 && self.alpha0 <= self.alpha_max)
        {
            return Err(Error::InvalidArgument(
                "need 0 < alpha_min ≤ alpha0 ≤ alpha_max".into(),
            ));
        }
        if self.max_backtracks < 1 {
            return Err(Error::InvalidArgument("max_backtracks must be ≥ 1".into()));
        }
        if !(self.tol_abs >= 0.0 && self.tol_rel >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be ≥ 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be ≥ 1".into()));
        }
        if !(self.latent_bound > 0.0) {
            return Err(Error::InvalidArgument("latent_bound must be positive".into()));
        }
        if !(self.projection.tolerance > 0.0) || self.projection.max_sweeps == 0 {
            return Err(Error::InvalidArgument("invalid projection options".into()));
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub k: usize,
    /// Objective of the accepted iterate `η^{k+1}`.
    pub objective: f64,
    /// Vertex-gap residual `res_k`.
    pub residual: f64,
    /// Final step size of the iteration (after any halving).
    pub alpha: f64,
    pub backtracks: usize,
    /// The line search ran out of halvings and the last trial was accepted.
    pub backtrack_exhausted: bool,
    pub multipliers: Vec<f64>,
    /// `∫Wη dx` of the accepted iterate.
    pub constraint_values: Vec<f64>,
    /// Smallest barycentric weight over all cells of the accepted iterate.
    pub min_barycentric: f64,
    /// Dykstra sweeps spent in the projection.
    pub sweeps: usize,
}

/// Run log: initial values plus one record per accepted iteration.
#[derive(Debug, Clone, Default)]
pub struct OptHistory {
    pub initial_objective: f64,
    pub initial_residual: f64,
    pub records: Vec<IterRecord>,
}

impl OptHistory {
    /// CSV with header `k,F,res,alpha,backtracks,mu_1..mu_r,c_1..c_r`,
    /// decimal values at 17 significant digits, one row per accepted
    /// iteration.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let r = self.records.first().map_or(0, |rec| rec.multipliers.len());
        let mut header = String::from("k,F,res,alpha,backtracks");
        for i in 1..=r {
            header.push_str(&format!(",mu_{i}"));
        }
        for i in 1..=r {
            header.push_str(&format!(",c_{i}"));
        }
        writeln!(w, "{header}")?;
        for rec in &self.records {
            let mut line = format!(
                "{},{:.16e},{:.16e},{:.16e},{}",
                rec.k, rec.objective, rec.residual, rec.alpha, rec.backtracks
            );
            for m in &rec.multipliers {
                line.push_str(&format!(",{m:.16e}"));
            }
            for c in &rec.constraint_values {
                line.push_str(&format!(",{c:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopStatus {
    /// `res_k ≤ tol_abs` or `res_k/res_0 ≤ tol_rel`.
    ToleranceMet,
    /// Iteration cap reached first.
    MaxIterations,
}

/// Successful run outcome.
#[derive(Debug)]
pub struct RunResult {
    pub eta: CellField,
    pub objective: f64,
    pub status: StopStatus,
    pub history: OptHistory,
}

/// Failed run carrying whatever history had accumulated.
#[derive(Debug)]
pub struct RunAborted {
    pub error: Error,
    pub history: OptHistory,
}

impl std::fmt::Display for RunAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "optimization aborted after {} iterations: {}",
            self.history.records.len(),
            self.error
        )
    }
}

impl std::error::Error for RunAborted {}

/// Generalized Barzilai–Borwein step
/// `|∫Δη·Δψ dx / ∫Δη·Δ∇F dx|` clamped to `[alpha_min, alpha_max]`;
/// degenerate denominators fall back to `alpha_max`.
#[allow(clippy::too_many_arguments)]
pub fn gbb_step(
    eta_k: &CellField,
    eta_km1: &CellField,
    psi_k: &CellField,
    psi_km1: &CellField,
    g_k: &CellField,
    g_km1: &CellField,
    alpha_min: f64,
    alpha_max: f64,
) -> f64 {
    debug_assert!(eta_k.same_shape(eta_km1) && psi_k.same_shape(psi_km1));
    let area = eta_k.mesh().cell_area();
    let mut num = 0.0;
    let mut den = 0.0;
    let ek = eta_k.values();
    let em = eta_km1.values();
    let pk = psi_k.values();
    let pm = psi_km1.values();
    let gk = g_k.values();
    let gm = g_km1.values();
    for i in 0..ek.len() {
        let de = ek[i] - em[i];
        num += de * (pk[i] - pm[i]);
        den += de * (gk[i] - gm[i]);
    }
    num *= area;
    den *= area;
    if den.abs() < 1e-300 {
        return alpha_max;
    }
    (num / den).abs().clamp(alpha_min, alpha_max)
}

/// Generalized Armijo condition
/// `F(η⁺) ≤ F(η) + c₁ ∫ ∇F(η)·(η⁺ − η) dx` (non-strict).
pub fn armijo_accept(
    f_new: f64,
    f_old: f64,
    g_k: &CellField,
    eta_new: &CellField,
    eta_k: &CellField,
    c1: f64,
) -> bool {
    let area = g_k.mesh().cell_area();
    let gv = g_k.values();
    let en = eta_new.values();
    let ek = eta_k.values();
    let mut directional = 0.0;
    for i in 0..gv.len() {
        directional += gv[i] * (en[i] - ek[i]);
    }
    f_new <= f_old + c1 * area * directional
}

/// Run the projected mirror-descent loop from an initial latent field.
///
/// Callers that start from a design rather than a latent field build `ψ⁰`
/// with [`Polytope::inverse_map`] cellwise first. The initial latent is
/// Bregman-projected onto the global constraints before iteration 0: the
/// line search compares against `F(η^k)`, and with an infeasible `η⁰` the
/// first comparison can be unsatisfiable at any step size (the projection
/// displacement does not vanish as `α → 0`). The observer, when given, sees
/// every accepted record together with the accepted design.
pub fn simpl_run<O: Objective + ?Sized>(
    problem: &mut O,
    polytope: &Polytope,
    constraints: &GlobalConstraints,
    psi0: CellField,
    opts: &OptOptions,
    mut observer: Option<&mut dyn FnMut(&IterRecord, &CellField)>,
) -> std::result::Result<RunResult, Box<RunAborted>> {
    let mut history = OptHistory::default();
    let abort = |error: Error, history: OptHistory| Box::new(RunAborted { error, history });

    if let Err(e) = opts.validate() {
        return Err(abort(e, history));
    }
    if psi0.channels() != polytope.dim() {
        return Err(abort(
            Error::ShapeMismatch(format!(
                "initial latent field has {} channels, polytope dimension is {}",
                psi0.channels(),
                polytope.dim()
            )),
            history,
        ));
    }
    if !psi0.is_finite() {
        return Err(abort(
            Error::InvalidArgument("non-finite initial latent field".into()),
            history,
        ));
    }

    let mesh = psi0.mesh();
    let n = polytope.dim();
    let num_cells = mesh.num_cells();
    let map_design = |psi: &CellField| -> (CellField, f64) {
        let mut eta = CellField::zeros(mesh, n);
        let mut lambda = vec![0.0; polytope.num_vertices()];
        let mut min_lambda = f64::INFINITY;
        for e in 0..num_cells {
            polytope.lambda_into(psi.cell(e), &mut lambda);
            for &l in &lambda {
                min_lambda = min_lambda.min(l);
            }
            polytope.point_from_lambda(&lambda, eta.cell_mut(e));
        }
        (eta, min_lambda)
    };

    let mut psi_k = psi0;
    {
        let bound = opts.latent_bound;
        for v in psi_k.values_mut() {
            *v = v.clamp(-bound, bound);
        }
    }
    if !constraints.is_empty() {
        let projected = if constraints.num_constraints() == 1 {
            project_single(
                polytope,
                &psi_k,
                constraints.row(0),
                constraints.bound(0),
                opts.projection.tolerance,
            )
        } else {
            project_multi(
                polytope,
                &psi_k,
                constraints,
                opts.projection.tolerance,
                opts.projection.max_sweeps,
            )
        };
        match projected {
            Ok(p) => psi_k = p.psi,
            Err(e) => return Err(abort(e, history)),
        }
    }
    let (mut eta_k, _) = map_design(&psi_k);
    let (mut f_k, mut g_k) = match problem.evaluate(&eta_k) {
        Ok(v) => v,
        Err(e) => return Err(abort(e, history)),
    };
    history.initial_objective = f_k;

    let mut prev: Option<(CellField, CellField, CellField)> = None; // (η, ψ, ∇F) at k−1
    let mut res_0 = f64::NAN;
    let mut status = StopStatus::MaxIterations;

    for k in 0..opts.max_iters {
        let mut alpha = match &prev {
            None => opts.alpha0,
            Some((eta_p, psi_p, g_p)) => gbb_step(
                &eta_k,
                eta_p,
                &psi_k,
                psi_p,
                &g_k,
                g_p,
                opts.alpha_min,
                opts.alpha_max,
            ),
        };

        let mut backtracks = 0usize;
        let mut exhausted = false;
        let (psi_next, eta_next, f_next, g_next, min_lambda, projection) = loop {
            // ψ^{k+1/2} = clamp(ψ^k − α ∇F(η^k))
            let mut psi_half = psi_k.clone();
            {
                let pv = psi_half.values_mut();
                let gv = g_k.values();
                let bound = opts.latent_bound;
                for i in 0..pv.len() {
                    pv[i] = (pv[i] - alpha * gv[i]).clamp(-bound, bound);
                }
            }
            let projection: Option<ProjectionResult> = if constraints.is_empty() {
                None
            } else {
                let res = if constraints.num_constraints() == 1 {
                    project_single(
                        polytope,
                        &psi_half,
                        constraints.row(0),
                        constraints.bound(0),
                        opts.projection.tolerance,
                    )
                } else {
                    project_multi(
                        polytope,
                        &psi_half,
                        constraints,
                        opts.projection.tolerance,
                        opts.projection.max_sweeps,
                    )
                };
                match res {
                    Ok(p) => Some(p),
                    Err(e) => return Err(abort(e, history)),
                }
            };
            let psi_next = projection
                .as_ref()
                .map_or_else(|| psi_half.clone(), |p| p.psi.clone());
            let (eta_next, min_lambda) = map_design(&psi_next);
            let (f_next, g_next) = match problem.evaluate(&eta_next) {
                Ok(v) => v,
                Err(e) => return Err(abort(e, history)),
            };
            if armijo_accept(f_next, f_k, &g_k, &eta_next, &eta_k, opts.c1) {
                break (psi_next, eta_next, f_next, g_next, min_lambda, projection);
            }
            if backtracks >= opts.max_backtracks {
                exhausted = true;
                break (psi_next, eta_next, f_next, g_next, min_lambda, projection);
            }
            alpha *= 0.5;
            backtracks += 1;
        };

        // Stationarity residual at the pre-update design. The scaled latent
        // update (ψ^k − ψ^{k+1})/α equals ∇F(η^k) + Wᵀμ/α; the right-hand
        // side stays meaningful for cells sitting at the latent clamp, where
        // the raw difference would drop the gradient term.
        let mut d = g_k.clone();
        if let Some(p) = &projection {
            let mut correction = vec![0.0; n];
            for (i, &m) in p.multipliers.iter().enumerate() {
                for c in 0..n {
                    correction[c] += m * constraints.row(i)[c] / alpha;
                }
            }
            for e in 0..num_cells {
                let cell = d.cell_mut(e);
                for c in 0..n {
                    cell[c] += correction[c];
                }
            }
        }
        let residual = vertex_gap_residual(polytope, &d, &eta_k).expect("shapes match");
        if k == 0 {
            res_0 = residual;
            history.initial_residual = residual;
        }

        let constraint_vals = if constraints.is_empty() {
            Vec::new()
        } else {
            match constraint_values(polytope, &psi_next, constraints) {
                Ok(v) => v,
                Err(e) => return Err(abort(e, history)),
            }
        };
        let record = IterRecord {
            k,
            objective: f_next,
            residual,
            alpha,
            backtracks,
            backtrack_exhausted: exhausted,
            multipliers: projection.as_ref().map_or_else(Vec::new, |p| p.multipliers.clone()),
            constraint_values: constraint_vals,
            min_barycentric: min_lambda,
            sweeps: projection.as_ref().map_or(0, |p| p.sweeps),
        };
        if let Some(obs) = observer.as_deref_mut() {
            obs(&record, &eta_next);
        }
        history.records.push(record);

        prev = Some((
            std::mem::replace(&mut eta_k, eta_next),
            std::mem::replace(&mut psi_k, psi_next),
            std::mem::replace(&mut g_k, g_next),
        ));
        f_k = f_next;

        if residual <= opts.tol_abs || residual / res_0 <= opts.tol_rel {
            status = StopStatus::ToleranceMet;
            break;
        }
    }

    Ok(RunResult {
        eta: eta_k,
        objective: f_k,
        status,
        history,
    })
}
