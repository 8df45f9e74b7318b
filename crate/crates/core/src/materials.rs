//! Material interpolation laws and their exact derivatives.
//!
//! Two interpolations feed the elasticity assembly:
//!
//! - a multi-material SIMP recursion on cumulative densities, producing an
//!   effective Young's modulus per evaluation point ([`eff_youngs`]);
//! - an isotropic-plus-rotating-orthotropic blend where the planar design
//!   coordinates `(a, b)` encode the fiber orientation through the double
//!   angle, `(a, b) = r·(cos 2θ, sin 2θ)` ([`rotated_ortho_c`]).
//!
//! The rotated stiffness is evaluated in closed form: every Voigt entry of
//! `C(θ)` is a trig polynomial `A + B cos2θ + C sin2θ + D cos4θ + E sin4θ`,
//! so `r^p·C(θ)` becomes a combination of `r^p`, `a·r^{p−1}`, `b·r^{p−1}`,
//! `(a²−b²)·r^{p−2}`, `2ab·r^{p−2}` whose partial derivatives are exact and
//! vanish at `r = 0` for even `p ≥ 2`.

use crate::error::Error;
use crate::Result;

/// Symmetric 3×3 plane-stress stiffness in Voigt notation
/// `(σxx, σyy, σxy) = C (εxx, εyy, γxy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Voigt3(pub [[f64; 3]; 3]);

impl Voigt3 {
    pub const ZERO: Voigt3 = Voigt3([[0.0; 3]; 3]);

    pub fn scaled(&self, s: f64) -> Voigt3 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Voigt3, s: f64) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += s * other.0[i][j];
            }
        }
    }

    /// `εᵀ C ε` for a Voigt strain vector.
    pub fn quadratic_form(&self, eps: &[f64; 3]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += eps[i] * self.0[i][j] * eps[j];
            }
        }
        acc
    }

    /// Smallest eigenvalue, used for positive-semidefiniteness checks.
    pub fn min_eigenvalue(&self) -> f64 {
        let flat = [
            self.0[0][0], self.0[0][1], self.0[0][2], //
            self.0[1][0], self.0[1][1], self.0[1][2], //
            self.0[2][0], self.0[2][1], self.0[2][2],
        ];
        let (evals, _) = crate::linalg::sym_eigen(3, &flat);
        evals[0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }
}

/// Isotropic plane-stress stiffness `E/(1−ν²)·[[1,ν,0],[ν,1,0],[0,0,(1−ν)/2]]`.
pub fn iso_voigt(e: f64, nu: f64) -> Result<Voigt3> {
    if !(e > 0.0) {
        return Err(Error::InvalidMaterial(format!("Young's modulus {e} must be positive")));
    }
    if !(1.0 - nu * nu > 0.0) {
        return Err(Error::InvalidMaterial(format!(
            "Poisson ratio {nu} gives a singular plane-stress matrix"
        )));
    }
    let f = e / (1.0 - nu * nu);
    Ok(Voigt3([
        [f, f * nu, 0.0],
        [f * nu, f, 0.0],
        [0.0, 0.0, f * (1.0 - nu) / 2.0],
    ]))
}

/// Stack of isotropic phases for the SIMP recursion. Phase 0 is the void
/// phase with a tiny but positive modulus.
#[derive(Debug, Clone)]
pub struct IsoStack {
    moduli: Vec<f64>,
    poisson: f64,
    exponent: f64,
}

impl IsoStack {
    pub fn new(moduli: &[f64], poisson: f64, exponent: f64) -> Result<Self> {
        if moduli.len() < 2 {
            return Err(Error::InvalidMaterial("need at least two phases".into()));
        }
        if moduli.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidMaterial("all moduli must be positive".into()));
        }
        if !(1.0 - poisson * poisson > 0.0) {
            return Err(Error::InvalidMaterial("invalid Poisson ratio".into()));
        }
        if !(exponent >= 1.0) {
            return Err(Error::InvalidMaterial("penalization exponent must be ≥ 1".into()));
        }
        Ok(IsoStack {
            moduli: moduli.to_vec(),
            poisson,
            exponent,
        })
    }

    pub fn num_phases(&self) -> usize {
        self.moduli.len()
    }

    pub fn poisson(&self) -> f64 {
        self.poisson
    }

    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

/// Effective Young's modulus by the cumulative-density recursion
///
/// ```text
/// E⁽¹⁾ = E_1,   E⁽ʲ⁾ = E⁽ʲ⁻¹⁾[1 − (η̃_j/S_j)^p] + E_j (η̃_j/S_j)^p,
/// ```
///
/// with `S_j = Σ_{i≤j} η̃_i` and the convention `0/0 := 0`. Filtered inputs
/// are clipped to `[0, 1]` first; the returned derivative is with respect to
/// the raw inputs (zero where the clip saturates).
pub fn eff_youngs(stack: &IsoStack, eta_tilde: &[f64]) -> (f64, Vec<f64>) {
    let n = stack.moduli.len();
    debug_assert_eq!(eta_tilde.len(), n);
    let p = stack.exponent;
    let clipped: Vec<f64> = eta_tilde.iter().map(|&x| x.clamp(0.0, 1.0)).collect();

    let mut e = stack.moduli[0];
    let mut grad = vec![0.0; n];
    let mut s = clipped[0];
    let mut dt = vec![0.0; n];
    for j in 1..n {
        s += clipped[j];
        let ej = stack.moduli[j];
        let t = if s > 0.0 {
            let u = clipped[j] / s;
            let dt_du = p * u.powf(p - 1.0);
            let inv_s = 1.0 / s;
            // ∂u/∂η̃_i = δ_{ij}/S − η̃_j/S² for i ≤ j, zero for i > j.
            for (i, d) in dt.iter_mut().enumerate() {
                *d = if i > j {
                    0.0
                } else if i == j {
                    dt_du * (inv_s - clipped[j] * inv_s * inv_s)
                } else {
                    dt_du * (-clipped[j] * inv_s * inv_s)
                };
            }
            u.powf(p)
        } else {
            dt.iter_mut().for_each(|d| *d = 0.0);
            0.0
        };
        // E ← E(1−t) + E_j t, so ∇E ← ∇E(1−t) + (E_j − E)∇t.
        for i in 0..n {
            grad[i] = grad[i] * (1.0 - t) + (ej - e) * dt[i];
        }
        e = e * (1.0 - t) + ej * t;
    }
    // Chain rule through the clip: zero outside [0, 1].
    for (g, &x) in grad.iter_mut().zip(eta_tilde) {
        if !(0.0..=1.0).contains(&x) {
            *g = 0.0;
        }
    }
    (e, grad)
}

/// Orthotropic phase description: directional moduli plus the derived
/// reciprocal Poisson ratio and shear modulus.
#[derive(Debug, Clone, Copy)]
pub struct OrthoSpec {
    pub e_x: f64,
    pub e_y: f64,
    pub nu_xy: f64,
    /// Orientation penalization exponent; even and at least 2 so the
    /// interpolation is differentiable through `r = 0`.
    pub exponent: u32,
}

impl OrthoSpec {
    pub fn new(e_x: f64, e_y: f64, nu_xy: f64, exponent: u32) -> Result<Self> {
        if !(e_x > 0.0 && e_y > 0.0) {
            return Err(Error::InvalidMaterial("directional moduli must be positive".into()));
        }
        let nu_yx = nu_xy * e_y / e_x;
        if !(1.0 - nu_xy * nu_yx > 0.0) {
            return Err(Error::InvalidMaterial(
                "Poisson ratios give a non-positive-definite compliance".into(),
            ));
        }
        if exponent < 2 || exponent % 2 != 0 {
            return Err(Error::InvalidMaterial(
                "orientation exponent must be even and ≥ 2".into(),
            ));
        }
        Ok(OrthoSpec {
            e_x,
            e_y,
            nu_xy,
            exponent,
        })
    }

    pub fn nu_yx(&self) -> f64 {
        self.nu_xy * self.e_y / self.e_x
    }

    /// `G_xy = √(E_x E_y) / (2(1 + √(ν_xy ν_yx)))`.
    pub fn shear_modulus(&self) -> f64 {
        (self.e_x * self.e_y).sqrt() / (2.0 * (1.0 + (self.nu_xy * self.nu_yx()).sqrt()))
    }
}

/// Plane-stress orthotropic stiffness at the reference orientation.
pub fn ortho_voigt(spec: &OrthoSpec) -> Voigt3 {
    let nu_yx = spec.nu_yx();
    let d = 1.0 - spec.nu_xy * nu_yx;
    Voigt3([
        [spec.e_x / d, spec.nu_xy * spec.e_y / d, 0.0],
        [spec.nu_xy * spec.e_y / d, spec.e_y / d, 0.0],
        [0.0, 0.0, spec.shear_modulus()],
    ])
}

/// Harmonic decomposition of the rotated orthotropic stiffness: per Voigt
/// entry the coefficients of `1, cos2θ, sin2θ, cos4θ, sin4θ`.
struct Harmonics {
    a0: Voigt3,
    c2: Voigt3,
    s2: Voigt3,
    c4: Voigt3,
    s4: Voigt3,
}

fn harmonics(c_ani: &Voigt3) -> Harmonics {
    let q11 = c_ani.0[0][0];
    let q12 = c_ani.0[0][1];
    let q22 = c_ani.0[1][1];
    let q66 = c_ani.0[2][2];

    let mut a0 = Voigt3::ZERO;
    let mut c2 = Voigt3::ZERO;
    let mut s2 = Voigt3::ZERO;
    let mut c4 = Voigt3::ZERO;
    let mut s4 = Voigt3::ZERO;

    // C11(θ) = q11 m⁴ + 2(q12+2q66) m²n² + q22 n⁴
    a0.0[0][0] = (3.0 * (q11 + q22)) / 8.0 + (q12 + 2.0 * q66) / 4.0;
    c2.0[0][0] = (q11 - q22) / 2.0;
    c4.0[0][0] = (q11 + q22) / 8.0 - (q12 + 2.0 * q66) / 4.0;

    // C22(θ): same but with the sign of the cos2θ term flipped.
    a0.0[1][1] = a0.0[0][0];
    c2.0[1][1] = -(q11 - q22) / 2.0;
    c4.0[1][1] = c4.0[0][0];

    // C12(θ) = (q11+q22−4q66) m²n² + q12(m⁴+n⁴)
    a0.0[0][1] = (q11 + q22 - 4.0 * q66) / 8.0 + 3.0 * q12 / 4.0;
    c4.0[0][1] = -(q11 + q22 - 4.0 * q66) / 8.0 + q12 / 4.0;

    // C66(θ) = (q11+q22−2q12−2q66) m²n² + q66(m⁴+n⁴)
    a0.0[2][2] = (q11 + q22 - 2.0 * q12 - 2.0 * q66) / 8.0 + 3.0 * q66 / 4.0;
    c4.0[2][2] = -(q11 + q22 - 2.0 * q12 - 2.0 * q66) / 8.0 + q66 / 4.0;

    // C16(θ) = (q11−q12−2q66) m³n + (q12−q22+2q66) mn³
    s2.0[0][2] = (q11 - q22) / 4.0;
    s4.0[0][2] = (q11 + q22 - 2.0 * q12 - 4.0 * q66) / 8.0;

    // C26(θ): same sin2θ coefficient, opposite sin4θ coefficient.
    s2.0[1][2] = (q11 - q22) / 4.0;
    s4.0[1][2] = -(q11 + q22 - 2.0 * q12 - 4.0 * q66) / 8.0;

    // Symmetrize.
    for m in [&mut a0, &mut c2, &mut s2, &mut c4, &mut s4] {
        m.0[1][0] = m.0[0][1];
        m.0[2][0] = m.0[0][2];
        m.0[2][1] = m.0[1][2];
    }
    Harmonics { a0, c2, s2, c4, s4 }
}

/// Interpolated stiffness `C(a, b, s) = s^p C_iso + r^p C_ani(φ/2)` with
/// `(r, φ)` the polar coordinates of `(a, b)`, plus exact partial
/// derivatives with respect to `a`, `b`, and `s`.
///
/// At `r = 0` the anisotropic term and its first derivatives vanish, so the
/// interpolation is differentiable along the isotropic axis.
pub fn rotated_ortho_c(
    spec: &OrthoSpec,
    a: f64,
    b: f64,
    s: f64,
    c_iso: &Voigt3,
) -> (Voigt3, Voigt3, Voigt3, Voigt3) {
    let p = spec.exponent as i32;
    let c_ani = ortho_voigt(spec);
    let h = harmonics(&c_ani);

    let sp = s.powi(p);
    let dsp = p as f64 * s.powi(p - 1);
    let mut c = c_iso.scaled(sp);
    let dc_ds = c_iso.scaled(dsp);
    let mut dc_da = Voigt3::ZERO;
    let mut dc_db = Voigt3::ZERO;

    let r2 = a * a + b * b;
    if r2 > 0.0 {
        let r = r2.sqrt();
        let pf = p as f64;
        // Scalar factors multiplying the five harmonic coefficient matrices,
        // and their partial derivatives (∂r/∂a = a/r).
        let t0 = r.powi(p);
        let t0_a = pf * a * r.powi(p - 2);
        let t0_b = pf * b * r.powi(p - 2);

        let rp1 = r.powi(p - 1);
        let t1 = a * rp1;
        let t1_a = rp1 + (pf - 1.0) * a * a * r.powi(p - 3);
        let t1_b = (pf - 1.0) * a * b * r.powi(p - 3);

        let t2 = b * rp1;
        let t2_a = (pf - 1.0) * a * b * r.powi(p - 3);
        let t2_b = rp1 + (pf - 1.0) * b * b * r.powi(p - 3);

        let rp2 = r.powi(p - 2);
        let t3 = (a * a - b * b) * rp2;
        let t3_a = 2.0 * a * rp2 + (pf - 2.0) * (a * a - b * b) * a * r.powi(p - 4);
        let t3_b = -2.0 * b * rp2 + (pf - 2.0) * (a * a - b * b) * b * r.powi(p - 4);

        let t4 = 2.0 * a * b * rp2;
        let t4_a = 2.0 * b * rp2 + (pf - 2.0) * 2.0 * a * b * a * r.powi(p - 4);
        let t4_b = 2.0 * a * rp2 + (pf - 2.0) * 2.0 * a * b * b * r.powi(p - 4);

        c.add_scaled(&h.a0, t0);
        c.add_scaled(&h.c2, t1);
        c.add_scaled(&h.s2, t2);
        c.add_scaled(&h.c4, t3);
        c.add_scaled(&h.s4, t4);

        dc_da.add_scaled(&h.a0, t0_a);
        dc_da.add_scaled(&h.c2, t1_a);
        dc_da.add_scaled(&h.s2, t2_a);
        dc_da.add_scaled(&h.c4, t3_a);
        dc_da.add_scaled(&h.s4, t4_a);

        dc_db.add_scaled(&h.a0, t0_b);
        dc_db.add_scaled(&h.c2, t1_b);
        dc_db.add_scaled(&h.s2, t2_b);
        dc_db.add_scaled(&h.c4, t3_b);
        dc_db.add_scaled(&h.s4, t4_b);
    }
    (c, dc_da, dc_db, dc_ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::voigt_rotate;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn paper_spec() -> OrthoSpec {
        OrthoSpec::new(5.0, 0.5, 0.3, 4).unwrap()
    }

    fn assert_matrix_close(a: &Voigt3, b: &Voigt3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (a.0[i][j] - b.0[i][j]).abs() < tol,
                    "entry ({i},{j}): {} vs {}",
                    a.0[i][j],
                    b.0[i][j]
                );
            }
        }
    }

    #[test]
    fn iso_voigt_examples() {
        let c = iso_voigt(1.0, 0.0).unwrap();
        assert_matrix_close(
            &c,
            &Voigt3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]),
            1e-15,
        );
        assert!(iso_voigt(-1.0, 0.3).is_err());
        assert!(iso_voigt(1.0, 1.0).is_err());
    }

    #[test]
    fn ortho_reduces_to_iso_in_isotropy_limit() {
        let spec = OrthoSpec::new(2.0, 2.0, 0.25, 4).unwrap();
        let c = ortho_voigt(&spec);
        let iso = iso_voigt(2.0, 0.25).unwrap();
        assert_matrix_close(&c, &iso, 1e-12);
    }

    #[test]
    fn shear_modulus_of_paper_material() {
        let spec = paper_spec();
        assert!((spec.nu_yx() - 0.03).abs() < 1e-15);
        let expect = (2.5f64).sqrt() / (2.0 * (1.0 + 0.009f64.sqrt()));
        assert!((spec.shear_modulus() - expect).abs() < 1e-15);
    }

    #[test]
    fn eff_youngs_pure_phases() {
        let stack = IsoStack::new(&[1e-6, 1.0, 3.0, 5.0], 0.3, 3.0).unwrap();
        for j in 0..4 {
            let mut eta = [0.0; 4];
            eta[j] = 1.0;
            let (e, _) = eff_youngs(&stack, &eta);
            assert!(
                (e - stack.moduli()[j]).abs() < 1e-15,
                "phase {j}: {e}"
            );
        }
    }

    #[test]
    fn eff_youngs_derivative_matches_finite_differences() {
        let stack = IsoStack::new(&[1e-6, 1.0, 3.0, 5.0], 0.3, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            // Random interior point of the simplex.
            let mut eta: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = eta.iter().sum();
            eta.iter_mut().for_each(|x| *x /= sum);
            let (_, grad) = eff_youngs(&stack, &eta);
            let h = 1e-6;
            for i in 0..4 {
                let mut ep = eta.clone();
                ep[i] += h;
                let mut em = eta.clone();
                em[i] -= h;
                let fd = (eff_youngs(&stack, &ep).0 - eff_youngs(&stack, &em).0) / (2.0 * h);
                let denom = fd.abs().max(1e-8);
                assert!(
                    (grad[i] - fd).abs() / denom < 1e-5,
                    "channel {i}: {} vs {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn eff_youngs_handles_all_zero_input() {
        let stack = IsoStack::new(&[1e-6, 1.0], 0.3, 3.0).unwrap();
        let (e, g) = eff_youngs(&stack, &[0.0, 0.0]);
        assert_eq!(e, 1e-6);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rotated_at_apex_is_isotropic() {
        let spec = paper_spec();
        let iso = iso_voigt(1.0, 0.3).unwrap();
        let (c, da, db, _ds) = rotated_ortho_c(&spec, 0.0, 0.0, 1.0, &iso);
        assert_matrix_close(&c, &iso, 1e-15);
        assert_matrix_close(&da, &Voigt3::ZERO, 1e-15);
        assert_matrix_close(&db, &Voigt3::ZERO, 1e-15);
    }

    #[test]
    fn rotated_at_reference_orientation_is_plain_ortho() {
        let spec = paper_spec();
        let (c, _, _, _) = rotated_ortho_c(&spec, 1.0, 0.0, 0.0, &Voigt3::ZERO);
        assert_matrix_close(&c, &ortho_voigt(&spec), 1e-13);
    }

    #[test]
    fn rotated_at_opposite_point_swaps_moduli() {
        let spec = paper_spec();
        let (c, _, _, _) = rotated_ortho_c(&spec, -1.0, 0.0, 0.0, &Voigt3::ZERO);
        let oracle = voigt_rotate(&ortho_voigt(&spec).0, std::f64::consts::FRAC_PI_2);
        assert_matrix_close(&c, &Voigt3(oracle), 1e-12);
    }

    #[test]
    fn rotated_matches_rotation_matrix_oracle() {
        let spec = paper_spec();
        let c_ani = ortho_voigt(&spec);
        for k in 0..16 {
            let theta = std::f64::consts::PI * k as f64 / 16.0;
            let (a, b) = ((2.0 * theta).cos(), (2.0 * theta).sin());
            let (c, _, _, _) = rotated_ortho_c(&spec, a, b, 0.0, &Voigt3::ZERO);
            let oracle = Voigt3(voigt_rotate(&c_ani.0, theta));
            assert_matrix_close(&c, &oracle, 1e-12);
        }
    }

    #[test]
    fn rotated_partials_match_finite_differences() {
        let spec = paper_spec();
        let iso = iso_voigt(1.0, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let h = 1e-6;
        for _ in 0..20 {
            let a = rng.random_range(-0.9..0.9);
            let b = rng.random_range(-0.9..0.9);
            let s = rng.random_range(0.0..1.0);
            let (_, da, db, ds) = rotated_ortho_c(&spec, a, b, s, &iso);
            let fd = |f: &dyn Fn(f64) -> Voigt3, x: f64| {
                let cp = f(x + h);
                let cm = f(x - h);
                let mut out = Voigt3::ZERO;
                for i in 0..3 {
                    for j in 0..3 {
                        out.0[i][j] = (cp.0[i][j] - cm.0[i][j]) / (2.0 * h);
                    }
                }
                out
            };
            let fa = fd(&|x| rotated_ortho_c(&spec, x, b, s, &iso).0, a);
            let fb = fd(&|x| rotated_ortho_c(&spec, a, x, s, &iso).0, b);
            let fs = fd(&|x| rotated_ortho_c(&spec, a, b, x, &iso).0, s);
            for i in 0..3 {
                for j in 0..3 {
                    let scale = 1.0f64.max(fa.0[i][j].abs());
                    assert!((da.0[i][j] - fa.0[i][j]).abs() / scale < 1e-5);
                    let scale = 1.0f64.max(fb.0[i][j].abs());
                    assert!((db.0[i][j] - fb.0[i][j]).abs() / scale < 1e-5);
                    let scale = 1.0f64.max(fs.0[i][j].abs());
                    assert!((ds.0[i][j] - fs.0[i][j]).abs() / scale < 1e-5);
                }
            }
        }
    }

    #[test]
    fn rotated_stiffness_is_psd_inside_polytope() {
        let spec = paper_spec();
        let iso = iso_voigt(1.0, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let r = rng.random_range(0.0..1.0);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let s = rng.random_range(0.0..(1.0 - r));
            let (c, _, _, _) = rotated_ortho_c(&spec, r * phi.cos(), r * phi.sin(), s, &iso);
            assert!(c.min_eigenvalue() >= -1e-12 * c.trace().max(1.0));
        }
    }

    #[test]
    fn ortho_spec_validation() {
        assert!(OrthoSpec::new(5.0, 0.5, 0.3, 3).is_err()); // odd exponent
        assert!(OrthoSpec::new(5.0, 0.5, 0.3, 0).is_err());
        assert!(OrthoSpec::new(-1.0, 0.5, 0.3, 4).is_err());
    }
}
