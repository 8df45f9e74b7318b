//! Benchmark problem builders: compliance minimization on the 3×1 cantilever
//! with either a stack of isotropic materials or one rotating orthotropic
//! material plus void.
//!
//! A built problem bundles the objective (filter + elasticity pipeline), the
//! design polytope, the global mass constraints, and the initial latent
//! field, ready for [`crate::optimizer::simpl_run`].

use crate::error::Error;
use crate::fem::{
    assemble_filter, compliance_and_gradient, disc_load_vector, EdgeSet, FilterOperator,
    MaterialModel,
};
use crate::field::{CellField, Mesh, NodalField};
use crate::materials::{eff_youngs, iso_voigt, rotated_ortho_c, IsoStack, OrthoSpec, Voigt3};
use crate::polytope::{regular_polygon_with_apex, Polytope};
use crate::projection::GlobalConstraints;
use crate::Result;

/// Isotropic multi-material cantilever configuration. Defaults reproduce the
/// 2D benchmark at desk resolution.
#[derive(Debug, Clone)]
pub struct IsoConfig {
    pub nx: usize,
    pub ny: usize,
    pub lengths: (f64, f64),
    pub filter_epsilon: f64,
    /// Young's moduli per phase; phase 0 is void.
    pub moduli: Vec<f64>,
    pub poisson: f64,
    pub simp_exponent: f64,
    /// Absolute mass bounds `∫η_i dx ≤ bound` for phases 1….
    pub mass_bounds: Vec<f64>,
    pub load_center: (f64, f64),
    pub load_radius: f64,
    pub load_force: (f64, f64),
    pub gamma_d: EdgeSet,
    pub gamma_f: EdgeSet,
    /// Constant initial latent vector; zeros (uniform mixture) when absent.
    pub initial_psi: Option<Vec<f64>>,
}

impl Default for IsoConfig {
    fn default() -> Self {
        IsoConfig {
            nx: 96,
            ny: 32,
            lengths: (3.0, 1.0),
            filter_epsilon: 0.06 / (2.0 * 3.0f64.sqrt()),
            moduli: vec![1e-6, 1.0, 3.0, 5.0],
            poisson: 0.3,
            simp_exponent: 3.0,
            mass_bounds: vec![0.18, 0.36, 0.36],
            load_center: (2.9, 0.5),
            load_radius: 0.05,
            load_force: (0.0, -1.0),
            gamma_d: EdgeSet::left(),
            gamma_f: EdgeSet::horizontal(),
            initial_psi: None,
        }
    }
}

/// Orthotropic-with-void cantilever configuration.
#[derive(Debug, Clone)]
pub struct OrthoConfig {
    pub nx: usize,
    pub ny: usize,
    pub lengths: (f64, f64),
    pub filter_epsilon: f64,
    pub e_x: f64,
    pub e_y: f64,
    pub nu_xy: f64,
    /// Orientation penalization exponent (even).
    pub exponent: u32,
    /// Number of discrete fiber angles on the polytope base.
    pub num_angles: usize,
    /// Minimum void volume as a fraction of `|Ω|`.
    pub min_void_fraction: f64,
    /// Uniform ellipticity floor, as a multiple of the unit isotropic
    /// stiffness, keeping the pure-void state solvable.
    pub stiffness_floor: f64,
    pub load_center: (f64, f64),
    pub load_radius: f64,
    pub load_force: (f64, f64),
    pub gamma_d: EdgeSet,
    pub gamma_f: EdgeSet,
    pub initial_psi: [f64; 3],
    /// Replace the regular-polygon polytope, e.g. with vertices read from a
    /// file. Must be 3-dimensional with the void apex convention.
    pub polytope_override: Option<Polytope>,
}

impl Default for OrthoConfig {
    fn default() -> Self {
        OrthoConfig {
            nx: 96,
            ny: 32,
            lengths: (3.0, 1.0),
            filter_epsilon: 0.06 / (2.0 * 3.0f64.sqrt()),
            e_x: 5.0,
            e_y: 0.5,
            nu_xy: 0.3,
            exponent: 4,
            num_angles: 8,
            min_void_fraction: 0.3,
            stiffness_floor: 1e-6,
            load_center: (2.9, 0.5),
            load_radius: 0.05,
            load_force: (0.0, -1.0),
            gamma_d: EdgeSet::left(),
            gamma_f: EdgeSet::horizontal(),
            initial_psi: [0.0, 0.1, 0.0],
            polytope_override: None,
        }
    }
}

/// SIMP stack material: `C(η̃) = E_eff(η̃) · C_iso(1, ν)`.
pub struct SimpMaterial {
    stack: IsoStack,
    unit: Voigt3,
}

impl SimpMaterial {
    pub fn new(stack: IsoStack) -> Result<Self> {
        let unit = iso_voigt(1.0, stack.poisson())?;
        Ok(SimpMaterial { stack, unit })
    }
}

impl MaterialModel for SimpMaterial {
    fn channels(&self) -> usize {
        self.stack.num_phases()
    }
    fn evaluate(&self, eta_tilde: &[f64], dc: &mut [Voigt3]) -> Voigt3 {
        let (e, de) = eff_youngs(&self.stack, eta_tilde);
        for (d, g) in dc.iter_mut().zip(&de) {
            *d = self.unit.scaled(*g);
        }
        self.unit.scaled(e)
    }
}

/// Void-plus-rotating-orthotropic material on channels `(η_void, a, b)`:
/// the void apex carries no stiffness of its own, a uniform floor keeps the
/// system solvable everywhere.
pub struct OrientedMaterial {
    spec: OrthoSpec,
    floor: Voigt3,
}

impl OrientedMaterial {
    pub fn new(spec: OrthoSpec, floor: Voigt3) -> Self {
        OrientedMaterial { spec, floor }
    }
}

impl MaterialModel for OrientedMaterial {
    fn channels(&self) -> usize {
        3
    }
    fn evaluate(&self, eta_tilde: &[f64], dc: &mut [Voigt3]) -> Voigt3 {
        let (s, a, b) = (eta_tilde[0], eta_tilde[1], eta_tilde[2]);
        let (mut c, dc_da, dc_db, dc_ds) = rotated_ortho_c(&self.spec, a, b, s, &Voigt3::ZERO);
        c.add_scaled(&self.floor, 1.0);
        dc[0] = dc_ds;
        dc[1] = dc_da;
        dc[2] = dc_db;
        c
    }
}

/// Compliance objective: filter, assemble, solve, and differentiate.
pub struct ComplianceProblem {
    mesh: Mesh,
    material: Box<dyn MaterialModel>,
    filter: FilterOperator,
    load: Vec<f64>,
    loaded_cells: Vec<usize>,
    gamma_d: EdgeSet,
    last_state: Option<(NodalField, NodalField)>,
}

impl ComplianceProblem {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn loaded_cells(&self) -> &[usize] {
        &self.loaded_cells
    }

    /// Filtered field and displacement of the most recent evaluation.
    pub fn last_state(&self) -> Option<&(NodalField, NodalField)> {
        self.last_state.as_ref()
    }
}

impl crate::optimizer::Objective for ComplianceProblem {
    fn evaluate(&mut self, eta: &CellField) -> Result<(f64, CellField)> {
        let out = compliance_and_gradient(
            self.material.as_ref(),
            eta,
            &mut self.filter,
            &self.load,
            self.gamma_d,
        )?;
        self.last_state = Some((out.filtered, out.displacement));
        Ok((out.compliance, out.gradient))
    }
}

/// A fully wired benchmark instance.
pub struct BuiltProblem {
    pub problem: ComplianceProblem,
    pub polytope: Polytope,
    pub constraints: GlobalConstraints,
    pub initial_psi: CellField,
    /// Optimizer options tuned for this problem: benchmark stopping rule and
    /// a first step size matched to the initial gradient scale. The
    /// mostly-void orthotropic start has gradients of order 10⁵, so its
    /// first step must be small; Barzilai–Borwein adapts from there.
    pub recommended_options: crate::optimizer::OptOptions,
}

fn validate_geometry(
    mesh: &Mesh,
    center: (f64, f64),
    radius: f64,
) -> Result<()> {
    if !(center.0 >= 0.0 && center.0 <= mesh.lx() && center.1 >= 0.0 && center.1 <= mesh.ly()) {
        return Err(Error::InvalidArgument(format!(
            "load center ({}, {}) outside the domain",
            center.0, center.1
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("load radius must be positive".into()));
    }
    Ok(())
}

/// Build the isotropic multi-material cantilever.
pub fn build_isotropic_cantilever(cfg: &IsoConfig) -> Result<BuiltProblem> {
    let mesh = Mesh::new(cfg.lengths.0, cfg.lengths.1, cfg.nx, cfg.ny)?;
    validate_geometry(&mesh, cfg.load_center, cfg.load_radius)?;
    let n = cfg.moduli.len();
    if cfg.mass_bounds.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "{} mass bounds for {} material phases (void is unconstrained)",
            cfg.mass_bounds.len(),
            n - 1
        )));
    }
    if cfg.gamma_d.is_empty() {
        return Err(Error::InvalidArgument("elasticity needs a clamped boundary".into()));
    }

    // Standard simplex: vertex i is the pure phase i.
    let mut vertices = vec![0.0; n * n];
    for i in 0..n {
        vertices[i * n + i] = 1.0;
    }
    let polytope = Polytope::new(n, &vertices)?;
    debug_assert_eq!(polytope.row_rank(), n - 1);

    let rows: Vec<Vec<f64>> = (1..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    let constraints = GlobalConstraints::new(n, &rows, &cfg.mass_bounds)?;

    // Strict-feasibility certificate: half of each bound, remainder void.
    let area = mesh.lx() * mesh.ly();
    let mut certificate = vec![0.0; n];
    let mut used = 0.0;
    for i in 1..n {
        certificate[i] = 0.5 * cfg.mass_bounds[i - 1] / area;
        used += certificate[i];
    }
    if used >= 1.0 {
        return Err(Error::Infeasible(
            "mass bounds leave no room for a strictly interior design".into(),
        ));
    }
    certificate[0] = 1.0 - used;
    constraints.check_strictly_feasible(&polytope, &certificate, area)?;

    let stack = IsoStack::new(&cfg.moduli, cfg.poisson, cfg.simp_exponent)?;
    let material = SimpMaterial::new(stack)?;
    let filter = assemble_filter(mesh, cfg.filter_epsilon, cfg.gamma_f)?;
    let (load, loaded_cells) =
        disc_load_vector(mesh, cfg.load_center, cfg.load_radius, cfg.load_force);

    let initial = match &cfg.initial_psi {
        Some(v) => {
            if v.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "initial latent vector has {} entries, expected {n}",
                    v.len()
                )));
            }
            CellField::constant(mesh, v)
        }
        None => CellField::zeros(mesh, n),
    };

    Ok(BuiltProblem {
        problem: ComplianceProblem {
            mesh,
            material: Box::new(material),
            filter,
            load,
            loaded_cells,
            gamma_d: cfg.gamma_d,
            last_state: None,
        },
        polytope,
        constraints,
        initial_psi: initial,
        recommended_options: crate::optimizer::OptOptions {
            tol_rel: 1e-4,
            max_iters: 200,
            ..crate::optimizer::OptOptions::default()
        },
    })
}

/// Build the orthotropic-with-void cantilever.
pub fn build_orthotropic_cantilever(cfg: &OrthoConfig) -> Result<BuiltProblem> {
    let mesh = Mesh::new(cfg.lengths.0, cfg.lengths.1, cfg.nx, cfg.ny)?;
    validate_geometry(&mesh, cfg.load_center, cfg.load_radius)?;
    if cfg.gamma_d.is_empty() {
        return Err(Error::InvalidArgument("elasticity needs a clamped boundary".into()));
    }
    if !(cfg.min_void_fraction > 0.0 && cfg.min_void_fraction < 1.0) {
        return Err(Error::InvalidArgument("void fraction must lie in (0, 1)".into()));
    }
    if !(cfg.stiffness_floor > 0.0) {
        return Err(Error::InvalidArgument("stiffness floor must be positive".into()));
    }

    let polytope = match &cfg.polytope_override {
        Some(p) => {
            if p.dim() != 3 {
                return Err(Error::InvalidArgument(
                    "override polytope must live in R³ (void, a, b)".into(),
                ));
            }
            p.clone()
        }
        None => regular_polygon_with_apex(cfg.num_angles, true, [1.0, 0.0, 0.0], true)?,
    };
    if polytope.row_rank() != 3 {
        return Err(Error::InvalidArgument(
            "orientation polytope must be full-dimensional".into(),
        ));
    }

    // Minimum void volume: −∫η_void dx ≤ −fraction·|Ω|.
    let area = mesh.lx() * mesh.ly();
    let constraints = GlobalConstraints::new(
        3,
        &[vec![-1.0, 0.0, 0.0]],
        &[-cfg.min_void_fraction * area],
    )?;
    let certificate = [
        0.5 + 0.5 * cfg.min_void_fraction,
        0.25 * (1.0 - cfg.min_void_fraction),
        0.0,
    ];
    constraints.check_strictly_feasible(&polytope, &certificate, area)?;

    let spec = OrthoSpec::new(cfg.e_x, cfg.e_y, cfg.nu_xy, cfg.exponent)?;
    let floor = iso_voigt(1.0, cfg.nu_xy)?.scaled(cfg.stiffness_floor);
    let material = OrientedMaterial::new(spec, floor);
    let filter = assemble_filter(mesh, cfg.filter_epsilon, cfg.gamma_f)?;
    let (load, loaded_cells) =
        disc_load_vector(mesh, cfg.load_center, cfg.load_radius, cfg.load_force);
    let initial = CellField::constant(mesh, &cfg.initial_psi);

    Ok(BuiltProblem {
        problem: ComplianceProblem {
            mesh,
            material: Box::new(material),
            filter,
            load,
            loaded_cells,
            gamma_d: cfg.gamma_d,
            last_state: None,
        },
        polytope,
        constraints,
        initial_psi: initial,
        recommended_options: crate::optimizer::OptOptions {
            tol_rel: 1e-4,
            max_iters: 200,
            alpha0: 1e-6,
            ..crate::optimizer::OptOptions::default()
        },
    })
}

/// Mean pure-phase saturation of a `(void, a, b)` design:
/// cellwise `max(η_void, r)` averaged over the mesh.
pub fn mean_phase_saturation(eta: &CellField) -> Result<f64> {
    if eta.channels() != 3 {
        return Err(Error::ShapeMismatch("saturation expects 3 channels".into()));
    }
    let mut acc = 0.0;
    for e in 0..eta.mesh().num_cells() {
        let c = eta.cell(e);
        let r = (c[1] * c[1] + c[2] * c[2]).sqrt();
        acc += c[0].max(r);
    }
    Ok(acc / eta.mesh().num_cells() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Objective;
    use crate::projection::{constraint_values, project_multi};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_iso() -> IsoConfig {
        IsoConfig {
            nx: 12,
            ny: 4,
            ..IsoConfig::default()
        }
    }

    fn small_ortho() -> OrthoConfig {
        OrthoConfig {
            nx: 12,
            ny: 4,
            ..OrthoConfig::default()
        }
    }

    #[test]
    fn iso_bounds_encode_the_volume_split() {
        let cfg = IsoConfig::default();
        let total: f64 = cfg.mass_bounds.iter().sum();
        assert!((total - 0.30 * cfg.lengths.0 * cfg.lengths.1).abs() < 1e-15);
    }

    #[test]
    fn iso_uniform_design_activates_first_constraint() {
        let built = build_isotropic_cantilever(&small_iso()).unwrap();
        let psi = CellField::zeros(built.problem.mesh(), 4);
        let cv = constraint_values(&built.polytope, &psi, &built.constraints).unwrap();
        // Uniform mixture: ∫η_i = 0.75 for every phase.
        assert!((cv[0] - 0.75).abs() < 1e-12);
        assert!(cv[0] > built.constraints.bound(0));
        // Projection must therefore be active.
        let res = project_multi(&built.polytope, &psi, &built.constraints, 1e-10, 500).unwrap();
        assert!(res.multipliers[0] > 0.0);
    }

    #[test]
    fn iso_void_dominant_design_is_slack() {
        let built = build_isotropic_cantilever(&small_iso()).unwrap();
        let psi = CellField::constant(built.problem.mesh(), &[40.0, 0.0, 0.0, 0.0]);
        let res = project_multi(&built.polytope, &psi, &built.constraints, 1e-10, 500).unwrap();
        assert!(res.multipliers.iter().all(|&m| m == 0.0));
        assert_eq!(res.psi, psi);
    }

    #[test]
    fn iso_polytope_is_rank_deficient_simplex() {
        let built = build_isotropic_cantilever(&small_iso()).unwrap();
        assert_eq!(built.polytope.dim(), 4);
        assert_eq!(built.polytope.num_vertices(), 4);
        assert_eq!(built.polytope.row_rank(), 3);
    }

    #[test]
    fn ortho_initial_design_is_interior_and_biased() {
        let built = build_orthotropic_cantilever(&small_ortho()).unwrap();
        let b = built
            .polytope
            .gradient_map(built.initial_psi.cell(0))
            .unwrap();
        assert!(b.lambda.iter().all(|&l| l > 0.0));
        // Slight bias toward the θ = 0 orientation vertex (0, 1, 0).
        assert!(b.point[1] > 0.0);
        assert!(b.point[1].abs() > b.point[2].abs());
    }

    #[test]
    fn ortho_pure_void_has_finite_compliance() {
        let mut built = build_orthotropic_cantilever(&small_ortho()).unwrap();
        let eta = CellField::constant(built.problem.mesh(), &[1.0, 0.0, 0.0]);
        let (f, _) = built.problem.evaluate(&eta).unwrap();
        assert!(f.is_finite());
        assert!(f > 0.0);
    }

    #[test]
    fn ortho_polytope_full_rank() {
        let built = build_orthotropic_cantilever(&small_ortho()).unwrap();
        assert_eq!(built.polytope.num_vertices(), 9);
        assert_eq!(built.polytope.row_rank(), 3);
    }

    #[test]
    fn both_builders_pass_gradient_checks() {
        // Central finite differences against the assembled gradient on a
        // 12×4 mesh, random cells and channels.
        let mut rng = ChaCha8Rng::seed_from_u64(101);

        let mut built = build_isotropic_cantilever(&small_iso()).unwrap();
        let mesh = built.problem.mesh();
        let mut psi = CellField::zeros(mesh, 4);
        for v in psi.values_mut() {
            *v = rng.random_range(-0.3..0.3);
        }
        let mut eta = CellField::zeros(mesh, 4);
        for e in 0..mesh.num_cells() {
            let b = built.polytope.gradient_map(psi.cell(e)).unwrap();
            eta.cell_mut(e).copy_from_slice(&b.point);
        }
        check_fd(&mut built.problem, &eta, &mut rng, 3);

        let mut built = build_orthotropic_cantilever(&small_ortho()).unwrap();
        let mut psi = CellField::zeros(mesh, 3);
        for v in psi.values_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut eta = CellField::zeros(mesh, 3);
        for e in 0..mesh.num_cells() {
            let b = built.polytope.gradient_map(psi.cell(e)).unwrap();
            eta.cell_mut(e).copy_from_slice(&b.point);
        }
        check_fd(&mut built.problem, &eta, &mut rng, 3);
    }

    fn check_fd(
        problem: &mut ComplianceProblem,
        eta: &CellField,
        rng: &mut ChaCha8Rng,
        samples: usize,
    ) {
        let mesh = eta.mesh();
        let area = mesh.cell_area();
        let (_, grad) = problem.evaluate(eta).unwrap();
        let h = 1e-5;
        for _ in 0..samples {
            let cell = rng.random_range(0..mesh.num_cells());
            let ch = rng.random_range(0..eta.channels());
            let mut ep = eta.clone();
            ep.cell_mut(cell)[ch] += h;
            let mut em = eta.clone();
            em.cell_mut(cell)[ch] -= h;
            let fp = problem.evaluate(&ep).unwrap().0;
            let fm = problem.evaluate(&em).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            let analytic = grad.cell(cell)[ch] * area;
            assert!(
                (analytic - fd).abs() <= 1e-4 * fd.abs().max(1e-10),
                "cell {cell} channel {ch}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn saturation_of_pure_phase_is_one() {
        let mesh = Mesh::new(1.0, 1.0, 2, 2).unwrap();
        let eta = CellField::constant(mesh, &[1.0, 0.0, 0.0]);
        assert!((mean_phase_saturation(&eta).unwrap() - 1.0).abs() < 1e-15);
        let eta = CellField::constant(mesh, &[0.0, 0.6, 0.8]);
        assert!((mean_phase_saturation(&eta).unwrap() - 1.0).abs() < 1e-15);
    }
}
