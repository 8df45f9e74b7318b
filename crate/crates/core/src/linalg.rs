//! Small dense symmetric kernels and a banded Cholesky factorization.
//!
//! The design-map Newton iteration needs `n×n` symmetric solves and a
//! symmetric eigendecomposition for `n ≤ 4` or so; the FEM stack needs an SPD
//! solver for banded matrices from structured Q1 meshes. Both are small
//! enough that hand-rolled routines beat pulling in a linear-algebra crate.

use crate::error::Error;
use crate::Result;

/// Solve `A x = b` for symmetric positive definite `A` (row-major `n×n`),
/// overwriting `b` with the solution. `A` is destroyed.
///
/// Plain Cholesky without pivoting; callers regularize near-singular systems
/// before calling.
pub fn sym_solve_in_place(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    // Factor A = L Lᵀ in the lower triangle.
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::LinearSolve(format!(
                "non-positive pivot {d:.3e} at index {j}"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    // Forward substitution L y = b.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // Back substitution Lᵀ x = y.
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix (row-major `n×n`) by cyclic
/// Jacobi rotations. Returns `(eigenvalues, eigenvectors)` with eigenvalues
/// ascending and eigenvectors as columns of a row-major `n×n` matrix.
pub fn sym_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * (1.0 + frobenius(n, &m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut evecs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            evecs[k * n + new] = v[k * n + old];
        }
    }
    (evals, evecs)
}

fn frobenius(n: usize, m: &[f64]) -> f64 {
    m.iter().take(n * n).map(|x| x * x).sum::<f64>().sqrt()
}

/// Symmetric matrix in lower-band storage with a Dirichlet mask, plus a
/// cached Cholesky factor.
///
/// Entry `(i, j)` with `i ≥ j ≥ i − hb` lives at `data[i*(hb+1) + j − i + hb]`.
/// The full (pre-elimination) matrix is kept so that inhomogeneous Dirichlet
/// values can be moved to the right-hand side at solve time.
pub struct BandedSpd {
    n: usize,
    half_bandwidth: usize,
    full: Vec<f64>,
    constrained: Vec<bool>,
    factor: Option<Vec<f64>>,
}

impl BandedSpd {
    /// Zero matrix with the given size and half bandwidth.
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        BandedSpd {
            n,
            half_bandwidth,
            full: vec![0.0; n * (half_bandwidth + 1)],
            constrained: vec![false; n],
            factor: None,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    /// Add `value` at `(i, j)`. Only the lower triangle is stored; symmetric
    /// counterparts must be added by the caller exactly once per pair.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.half_bandwidth, "entry outside band");
        self.full[r * (self.half_bandwidth + 1) + c + self.half_bandwidth - r] += value;
        self.factor = None;
    }

    /// Read entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.half_bandwidth {
            return 0.0;
        }
        self.full[r * (self.half_bandwidth + 1) + c + self.half_bandwidth - r]
    }

    /// Mark a degree of freedom as Dirichlet-constrained.
    pub fn constrain(&mut self, i: usize) {
        self.constrained[i] = true;
        self.factor = None;
    }

    /// `y = A x` using the full (pre-elimination) matrix.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let hb = self.half_bandwidth;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(hb);
            let row = &self.full[i * (hb + 1)..(i + 1) * (hb + 1)];
            for j in lo..=i {
                let a = row[j + hb - i];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
    }

    /// Factor the eliminated matrix (identity rows and columns on constrained
    /// dofs). Fails on a non-positive pivot, which is how rigid-body modes of
    /// an unconstrained elasticity system surface.
    pub fn factorize(&mut self) -> Result<()> {
        let hb = self.half_bandwidth;
        let w = hb + 1;
        let mut f = self.full.clone();
        // Symmetric elimination of constrained dofs.
        for i in 0..self.n {
            let lo = i.saturating_sub(hb);
            for j in lo..=i {
                if self.constrained[i] || self.constrained[j] {
                    f[i * w + j + hb - i] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let mut max_diag: f64 = 0.0;
        for i in 0..self.n {
            max_diag = max_diag.max(f[i * w + hb].abs());
        }
        let pivot_floor = 1e-10 * max_diag;
        for i in 0..self.n {
            let lo = i.saturating_sub(hb);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(hb));
                let mut s = f[i * w + j + hb - i];
                for k in klo..j {
                    s -= f[i * w + k + hb - i] * f[j * w + k + hb - j];
                }
                if j < i {
                    f[i * w + j + hb - i] = s / f[j * w + hb];
                } else {
                    if !(s > pivot_floor) {
                        self.factor = None;
                        return Err(Error::LinearSolve(format!(
                            "pivot {s:.3e} below floor {pivot_floor:.3e} at dof {i} (singular or indefinite)"
                        )));
                    }
                    f[i * w + hb] = s.sqrt();
                }
            }
        }
        self.factor = Some(f);
        Ok(())
    }

    /// Solve `A x = rhs` with homogeneous or prescribed Dirichlet values.
    ///
    /// Verifies the relative residual of the eliminated system and fails when
    /// it exceeds `1e-10`.
    pub fn solve(&mut self, rhs: &[f64], dirichlet: Option<&[f64]>) -> Result<Vec<f64>> {
        debug_assert_eq!(rhs.len(), self.n);
        if self.factor.is_none() {
            self.factorize()?;
        }
        let hb = self.half_bandwidth;
        let w = hb + 1;

        let mut b = rhs.to_vec();
        // Move prescribed values to the right-hand side: for free i,
        // b_i -= Σ_{j constrained} A_ij g_j; for constrained i, b_i = g_i.
        for i in 0..self.n {
            if self.constrained[i] {
                b[i] = dirichlet.map_or(0.0, |g| g[i]);
            }
        }
        if let Some(g) = dirichlet {
            for i in 0..self.n {
                let lo = i.saturating_sub(hb);
                let row = &self.full[i * w..(i + 1) * w];
                for j in lo..=i {
                    let a = row[j + hb - i];
                    if self.constrained[j] && !self.constrained[i] {
                        b[i] -= a * g[j];
                    }
                    if self.constrained[i] && !self.constrained[j] && j != i {
                        b[j] -= a * g[i];
                    }
                }
            }
        }

        let f = self.factor.as_ref().unwrap();
        let mut x = b.clone();
        for i in 0..self.n {
            let lo = i.saturating_sub(hb);
            let mut s = x[i];
            for k in lo..i {
                s -= f[i * w + k + hb - i] * x[k];
            }
            x[i] = s / f[i * w + hb];
        }
        for i in (0..self.n).rev() {
            let hi = (i + hb).min(self.n - 1);
            let mut s = x[i];
            for k in (i + 1)..=hi {
                s -= f[k * w + i + hb - k] * x[k];
            }
            x[i] = s / f[i * w + hb];
        }

        // Residual of the eliminated system.
        let mut r = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(hb);
            let row = &self.full[i * w..(i + 1) * w];
            for j in lo..=i {
                let a = if self.constrained[i] || self.constrained[j] {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    row[j + hb - i]
                };
                r[i] += a * x[j];
                if j != i {
                    r[j] += a * x[i];
                }
            }
        }
        let mut rn = 0.0;
        let mut bn = 0.0;
        for i in 0..self.n {
            rn += (r[i] - b[i]) * (r[i] - b[i]);
            bn += b[i] * b[i];
        }
        let rel = rn.sqrt() / bn.sqrt().max(f64::MIN_POSITIVE);
        if bn > 0.0 && rel > 1e-10 {
            return Err(Error::LinearSolve(format!(
                "relative residual {rel:.3e} exceeds 1e-10"
            )));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sym_solve_matches_known_solution() {
        // A = LLᵀ with L = [[2,0],[1,3]] → A = [[4,2],[2,10]].
        let mut a = vec![4.0, 2.0, 2.0, 10.0];
        let x_true = [0.5, -1.25];
        let mut b = [
            4.0 * x_true[0] + 2.0 * x_true[1],
            2.0 * x_true[0] + 10.0 * x_true[1],
        ];
        sym_solve_in_place(2, &mut a, &mut b).unwrap();
        assert!((b[0] - x_true[0]).abs() < 1e-14);
        assert!((b[1] - x_true[1]).abs() < 1e-14);
    }

    #[test]
    fn sym_solve_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3, -1
        let mut b = [1.0, 1.0];
        assert!(sym_solve_in_place(2, &mut a, &mut b).is_err());
    }

    #[test]
    fn jacobi_eigen_recovers_spectrum() {
        // Symmetric with known eigenvalues {1, 2, 4}: diag in rotated basis.
        let a = vec![
            2.0, -1.0, 0.0, //
            -1.0, 2.0, -1.0, //
            0.0, -1.0, 2.0,
        ];
        let (evals, evecs) = sym_eigen(3, &a);
        let expected = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (got, want) in evals.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // A v = λ v for each column.
        for c in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|k| a[r * 3 + k] * evecs[k * 3 + c]).sum();
                assert!((av - evals[c] * evecs[r * 3 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn banded_matches_dense_solve_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let hb = 3;
        let mut m = BandedSpd::zeros(n, hb);
        // Diagonally dominant symmetric band.
        for i in 0..n {
            m.add(i, i, 8.0 + rng.random::<f64>());
            for j in i.saturating_sub(hb)..i {
                m.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = m.solve(&rhs, None).unwrap();

        // Dense oracle: Gaussian elimination on the expanded matrix.
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dense[i * n + j] = m.get(i, j);
            }
        }
        let mut aug = dense.clone();
        let mut y = rhs.clone();
        for col in 0..n {
            let piv = aug[col * n + col];
            for row in (col + 1)..n {
                let f = aug[row * n + col] / piv;
                for k in col..n {
                    aug[row * n + k] -= f * aug[col * n + k];
                }
                y[row] -= f * y[col];
            }
        }
        let mut x_ref = vec![0.0; n];
        for row in (0..n).rev() {
            let mut s = y[row];
            for k in (row + 1)..n {
                s -= aug[row * n + k] * x_ref[k];
            }
            x_ref[row] = s / aug[row * n + row];
        }
        for i in 0..n {
            assert!((x[i] - x_ref[i]).abs() < 1e-10, "dof {i}");
        }
    }

    #[test]
    fn banded_identity_returns_rhs() {
        let mut m = BandedSpd::zeros(4, 1);
        for i in 0..4 {
            m.add(i, i, 1.0);
        }
        let rhs = [1.0, -2.0, 3.0, 0.5];
        let x = m.solve(&rhs, None).unwrap();
        for i in 0..4 {
            assert_eq!(x[i], rhs[i]);
        }
    }

    #[test]
    fn banded_singular_system_errors() {
        // Graph Laplacian of a path: singular (constant kernel).
        let mut m = BandedSpd::zeros(4, 1);
        for i in 0..4 {
            let deg = if i == 0 || i == 3 { 1.0 } else { 2.0 };
            m.add(i, i, deg);
        }
        for i in 1..4 {
            m.add(i, i - 1, -1.0);
        }
        assert!(m.factorize().is_err());
    }

    #[test]
    fn dirichlet_values_enter_solution() {
        // 1D Laplacian, u(0)=1, u(3)=4 → linear interpolation.
        let n = 4;
        let mut m = BandedSpd::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 2.0);
        }
        for i in 1..n {
            m.add(i, i - 1, -1.0);
        }
        m.constrain(0);
        m.constrain(3);
        let g = [1.0, 0.0, 0.0, 4.0];
        let x = m.solve(&[0.0; 4], Some(&g)).unwrap();
        let expected = [1.0, 2.0, 3.0, 4.0];
        for i in 0..n {
            assert!((x[i] - expected[i]).abs() < 1e-12, "{:?}", x);
        }
    }
}
