//! Independent reference computations for the verification suite.
//!
//! Everything in this module deliberately avoids the algorithms it is used
//! to check: entropy values come from an augmented-Lagrangian solve in
//! barycentric coordinates rather than the dual Newton iteration, projection
//! multipliers from plain bisection or projected gradient ascent rather than
//! Illinois/Dykstra, and constrained minimizers from Euclidean projections.
//! The `oracle` CLI subcommand prints a few of these values for inspection.

use crate::error::Error;
use crate::field::CellField;
use crate::polytope::Polytope;
use crate::projection::GlobalConstraints;
use crate::Result;

/// Euclidean projection onto the probability simplex `{λ ⪰ 0, Σλ = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = (v[i] - theta).max(0.0);
    }
    out
}

/// Constrained entropy minimization `min{Σλᵢ ln λᵢ : Vλ = x, λ ∈ Δ}` by an
/// augmented Lagrangian with projected-gradient inner solves.
///
/// `vertex_data` is vertex-major as in [`Polytope::new`]. Returns the
/// minimizing barycentric coordinates and the entropy value. Slow but
/// independent of the dual Newton route.
pub fn min_entropy_barycentric(
    dim: usize,
    vertex_data: &[f64],
    target: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let q = vertex_data.len() / dim;
    assert_eq!(target.len(), dim);
    let vdot = |lambda: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &w) in lambda.iter().enumerate() {
            for k in 0..dim {
                out[k] += w * vertex_data[i * dim + k];
            }
        }
    };
    let entropy = |lambda: &[f64]| -> f64 {
        lambda
            .iter()
            .map(|&l| if l > 0.0 { l * l.ln() } else { 0.0 })
            .sum()
    };

    let mut lambda = vec![1.0 / q as f64; q];
    let mut y = vec![0.0; dim];
    let mut rho = 10.0;
    let mut vx = vec![0.0; dim];

    let lagrangian = |lambda: &[f64], y: &[f64], rho: f64, vx: &mut [f64]| -> f64 {
        vdot(lambda, vx);
        let mut val = entropy(lambda);
        for k in 0..dim {
            let r = vx[k] - target[k];
            val += y[k] * r + 0.5 * rho * r * r;
        }
        val
    };

    for _outer in 0..60 {
        // Inner projected-gradient descent with backtracking.
        for _inner in 0..20_000 {
            vdot(&lambda, &mut vx);
            let mut grad = vec![0.0; q];
            for i in 0..q {
                grad[i] = lambda[i].max(1e-300).ln() + 1.0;
                for k in 0..dim {
                    grad[i] += vertex_data[i * dim + k] * (y[k] + rho * (vx[k] - target[k]));
                }
            }
            let l0 = lagrangian(&lambda, &y, rho, &mut vx);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = lambda
                    .iter()
                    .zip(&grad)
                    .map(|(l, g)| l - t * g)
                    .collect();
                let trial = project_simplex(&trial);
                let step2: f64 = trial
                    .iter()
                    .zip(&lambda)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if lagrangian(&trial, &y, rho, &mut vx) <= l0 - 0.25 * step2 / t {
                    let done = step2.sqrt() <= 1e-13;
                    lambda = trial;
                    moved = !done;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        vdot(&lambda, &mut vx);
        let mut viol: f64 = 0.0;
        for k in 0..dim {
            let r = vx[k] - target[k];
            y[k] += rho * r;
            viol = viol.max(r.abs());
        }
        if viol <= 1e-11 {
            return Ok((lambda.clone(), entropy(&lambda)));
        }
        rho = (rho * 2.0).min(1e9);
    }
    vdot(&lambda, &mut vx);
    let viol = (0..dim)
        .map(|k| (vx[k] - target[k]).abs())
        .fold(0.0, f64::max);
    if viol <= 1e-8 {
        // Good enough for 1e-6 comparisons.
        return Ok((lambda.clone(), entropy(&lambda)));
    }
    Err(Error::NonConvergence {
        iterations: 60,
        residual: viol,
    })
}

/// Closed-form Bregman divergence of the binary entropy on `[0, 1]`:
/// `x ln(x/y) + (1−x) ln((1−x)/(1−y))`.
pub fn binary_entropy_bregman(x: f64, y: f64) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    term(x, y) + term(1.0 - x, 1.0 - y)
}

/// The logistic function, the single-material design map on `[0, 1]`.
pub fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Plain bisection for a root of a nonincreasing function on `[lo, hi]`,
/// assuming `f(lo) ≥ 0 ≥ f(hi)`. Runs until the bracket is at most `xtol`
/// wide and returns the midpoint.
pub fn bisection_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo < 0.0 || fhi > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bisection bracket does not straddle the root: f({lo}) = {flo:.3e}, f({hi}) = {fhi:.3e}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= xtol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Multipliers of the global-constraint dual by projected gradient ascent on
/// `g(μ) = −∫ R*(ψ − Wᵀμ) dx − μ·b`, the slow generic alternative to the
/// Dykstra sweep.
pub fn dual_ascent_multipliers(
    polytope: &Polytope,
    psi_half: &CellField,
    constraints: &GlobalConstraints,
    max_iter: usize,
) -> Vec<f64> {
    let r = constraints.num_constraints();
    let n = polytope.dim();
    let area = psi_half.mesh().cell_area();
    let num_cells = psi_half.mesh().num_cells();

    let g_value = |mu: &[f64]| -> f64 {
        let mut val = 0.0;
        let mut shifted = vec![0.0; n];
        for e in 0..num_cells {
            let psi = psi_half.cell(e);
            for k in 0..n {
                shifted[k] = psi[k];
                for (i, m) in mu.iter().enumerate() {
                    shifted[k] -= m * constraints.row(i)[k];
                }
            }
            val -= area * polytope.conjugate_value(&shifted);
        }
        for i in 0..r {
            val -= mu[i] * constraints.bound(i);
        }
        val
    };
    // ∂g/∂μ_i = ∫ w_i·∇R*(ψ − Wᵀμ) dx − b_i.
    let g_grad = |mu: &[f64], grad: &mut [f64]| {
        let mut shifted = vec![0.0; n];
        let mut lambda = vec![0.0; polytope.num_vertices()];
        let mut point = vec![0.0; n];
        grad.iter_mut()
            .zip(0..r)
            .for_each(|(g, i)| *g = -constraints.bound(i));
        for e in 0..num_cells {
            let psi = psi_half.cell(e);
            for k in 0..n {
                shifted[k] = psi[k];
                for (i, m) in mu.iter().enumerate() {
                    shifted[k] -= m * constraints.row(i)[k];
                }
            }
            polytope.lambda_into(&shifted, &mut lambda);
            polytope.point_from_lambda(&lambda, &mut point);
            for i in 0..r {
                let w = constraints.row(i);
                let mut dotv = 0.0;
                for k in 0..n {
                    dotv += w[k] * point[k];
                }
                grad[i] += area * dotv;
            }
        }
    };

    let mut mu = vec![0.0; r];
    let mut grad = vec![0.0; r];
    for _ in 0..max_iter {
        g_grad(&mu, &mut grad);
        let g0 = g_value(&mu);
        let mut t = 1.0;
        let mut advanced = false;
        for _ in 0..60 {
            let trial: Vec<f64> = mu
                .iter()
                .zip(&grad)
                .map(|(m, g)| (m + t * g).max(0.0))
                .collect();
            let step2: f64 = trial
                .iter()
                .zip(&mu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if step2 == 0.0 {
                break;
            }
            if g_value(&trial) >= g0 + 0.25 * step2 / t {
                mu = trial;
                advanced = step2.sqrt() > 1e-13;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    mu
}

/// Euclidean projection of a single-channel target field onto
/// `{0 ⪯ η ⪯ 1, cell_area·Ση ≤ bound}` by bisection on the uniform shift.
/// This is the exact minimizer of `½∫(η − target)² dx` over that set.
pub fn euclidean_box_mass_projection(target: &[f64], cell_area: f64, bound: f64) -> Vec<f64> {
    let clamp01 = |x: f64| x.clamp(0.0, 1.0);
    let mass = |mu: f64| -> f64 {
        target.iter().map(|&t| clamp01(t - mu)).sum::<f64>() * cell_area
    };
    if mass(0.0) <= bound {
        return target.iter().map(|&t| clamp01(t)).collect();
    }
    let mut lo = 0.0;
    let mut hi = target.iter().cloned().fold(0.0f64, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    target.iter().map(|&t| clamp01(t - mu)).collect()
}

/// Plane-stress Voigt stiffness of a material whose axes are rotated by `θ`
/// from the physical frame, via the explicit strain transformation matrix:
/// `C(θ) = T_ε(θ)ᵀ C T_ε(θ)`.
pub fn voigt_rotate(c: &[[f64; 3]; 3], theta: f64) -> [[f64; 3]; 3] {
    let (m, n) = (theta.cos(), theta.sin());
    let t = [
        [m * m, n * n, m * n],
        [n * n, m * m, -m * n],
        [-2.0 * m * n, 2.0 * m * n, m * m - n * n],
    ];
    let mut ct = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                ct[i][j] += c[i][k] * t[k][j];
            }
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += t[k][i] * ct[k][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = project_simplex(&[2.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        let p = project_simplex(&[-5.0, -5.0, 1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn entropy_oracle_on_identity_vertices() {
        // V = I₃: the constraint pins λ = target, entropy is the plain Gibbs sum.
        let v = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let target = [0.2, 0.3, 0.5];
        let (lambda, val) = min_entropy_barycentric(3, &v, &target).unwrap();
        let expect: f64 = target.iter().map(|&x| x * x.ln()).sum();
        for (a, b) in lambda.iter().zip(target) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((val - expect).abs() < 1e-8, "{val} vs {expect}");
    }

    #[test]
    fn bisection_finds_root_of_affine() {
        let root = bisection_root(|x| 3.0 - x, 0.0, 10.0, 1e-14, 200).unwrap();
        assert!((root - 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_mass_projection_interior_case() {
        // All-interior clamp: η = target − μ with uniform μ.
        let target = [0.3, 0.4, 0.6, 0.7];
        let eta = euclidean_box_mass_projection(&target, 0.25, 0.4);
        let mass: f64 = eta.iter().sum::<f64>() * 0.25;
        assert!((mass - 0.4).abs() < 1e-10);
        let mu = target[0] - eta[0];
        for (t, e) in target.iter().zip(&eta) {
            assert!(((t - e) - mu).abs() < 1e-10);
        }
    }

    #[test]
    fn voigt_rotation_by_half_pi_swaps_axes() {
        let c = [[5.0, 0.3, 0.0], [0.3, 0.8, 0.0], [0.0, 0.0, 0.7]];
        let r = voigt_rotate(&c, std::f64::consts::FRAC_PI_2);
        assert!((r[0][0] - c[1][1]).abs() < 1e-12);
        assert!((r[1][1] - c[0][0]).abs() < 1e-12);
        assert!((r[0][1] - c[0][1]).abs() < 1e-12);
        assert!((r[2][2] - c[2][2]).abs() < 1e-12);
        assert!(r[0][2].abs() < 1e-12 && r[1][2].abs() < 1e-12);
    }

    #[test]
    fn voigt_rotation_is_pi_periodic() {
        let c = [[5.0, 0.3, 0.0], [0.3, 0.8, 0.0], [0.0, 0.0, 0.7]];
        for theta in [0.3, 1.1, 2.0] {
            let a = voigt_rotate(&c, theta);
            let b = voigt_rotate(&c, theta + std::f64::consts::PI);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-12);
                }
            }
        }
    }
}
