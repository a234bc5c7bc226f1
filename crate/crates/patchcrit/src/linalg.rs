//! Compressed sparse row matrices and the two Krylov solvers the spectral
//! and time-stepping code need. Everything here is single-threaded and
//! allocation-light on purpose: solves inside parameter sweeps must be
//! bitwise reproducible regardless of thread count, so parallelism lives at
//! the sweep level, not here.

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form. Column indices within each row are
/// ascending; `row_ptr.len() == n + 1`.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Assemble from per-row (column, value) lists. Rows need not be sorted
    /// on input; duplicates within a row are summed.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Csr {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|(c, _)| *c);
            let mut it = row.into_iter();
            if let Some((mut c0, mut v0)) = it.next() {
                for (c, v) in it {
                    if c == c0 {
                        v0 += v;
                    } else {
                        cols.push(c0);
                        vals.push(v0);
                        c0 = c;
                        v0 = v;
                    }
                }
                cols.push(c0);
                vals.push(v0);
            }
            row_ptr.push(cols.len());
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Identity plus a scalar multiple: `I + s A`. Used to form the two
    /// time-stepping matrices from one operator.
    pub fn identity_plus_scaled(&self, s: f64) -> Csr {
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut row: Vec<(u32, f64)> = self
                .row_slice(i)
                .map(|(c, v)| (c, s * v))
                .collect();
            row.push((i as u32, 1.0));
            rows.push(row);
        }
        Csr::from_rows(rows)
    }

    /// Shift the diagonal: `A + s I`, in place.
    #[cfg(test)]
    pub fn shift_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut found = false;
            for k in lo..hi {
                if self.cols[k] as usize == i {
                    self.vals[k] += s;
                    found = true;
                    break;
                }
            }
            assert!(found, "operator row {i} has no diagonal entry");
        }
    }

    fn row_slice(&self, i: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] as usize == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }

    /// Symmetry defect `max |A_ij - A_ji|` over stored entries; 0 for the
    /// pure-diffusion operator, positive once advection enters.
    #[cfg(test)]
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (c, v) in self.row_slice(i) {
                let j = c as usize;
                let vt = self
                    .row_slice(j)
                    .find(|(cc, _)| *cc as usize == i)
                    .map(|(_, vv)| vv)
                    .unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Iteration count and final relative residual of an inner solve. Mostly
/// diagnostic; the solvers' `Ok`/`Err` split already encodes convergence.
#[cfg_attr(not(test), allow(dead_code))]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients with Jacobi preconditioning, for the symmetric
/// positive definite case (no advection). `x` carries the initial guess in
/// and the solution out; tolerance is on `|r| / |b|`.
pub fn cg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n;
    let inv_d: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = norm2(&r) / bnorm;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::Numeric(format!(
                "conjugate gradients broke down (p'Ap = {pap}); the operator is not positive definite"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r) / bnorm;
    if res <= tol * 10.0 {
        // Close enough that the caller's outer iteration can absorb it.
        return Ok(SolveStats {
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::Numeric(format!(
        "conjugate gradients stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}

/// BiCGStab with Jacobi preconditioning, for the nonsymmetric case
/// (advection present). Same contract as [`cg`].
pub fn bicgstab(
    a: &Csr,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.n;
    let inv_d: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 0..max_iter {
        let res = norm2(&r) / bnorm;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        let rho_next = dot(&r0, &r);
        if rho_next.abs() < f64::MIN_POSITIVE {
            return Err(Error::Numeric(
                "BiCGStab broke down (rho = 0); restart with a different guess".into(),
            ));
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            phat[i] = p[i] * inv_d[i];
        }
        a.mul_vec(&phat, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(SolveStats {
                iterations: it + 1,
                residual: norm2(&s) / bnorm,
            });
        }
        for i in 0..n {
            shat[i] = s[i] * inv_d[i];
        }
        a.mul_vec(&shat, &mut t);
        let tt = dot(&t, &t);
        if !(tt > 0.0) {
            return Err(Error::Numeric("BiCGStab broke down (t = 0)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.abs() < f64::MIN_POSITIVE {
            return Err(Error::Numeric("BiCGStab broke down (omega = 0)".into()));
        }
    }
    let res = norm2(&r) / bnorm;
    if res <= tol * 10.0 {
        return Ok(SolveStats {
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::Numeric(format!(
        "BiCGStab stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// 1-D Dirichlet Laplacian, tridiag(-1, 2, -1) / h^2 on n unknowns.
    fn laplacian_1d(n: usize, h: f64) -> Csr {
        let s = 1.0 / (h * h);
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![(i as u32, 2.0 * s)];
                if i > 0 {
                    row.push((i as u32 - 1, -s));
                }
                if i + 1 < n {
                    row.push((i as u32 + 1, -s));
                }
                row
            })
            .collect();
        Csr::from_rows(rows)
    }

    #[test]
    fn csr_assembly_sums_duplicates() {
        let a = Csr::from_rows(vec![vec![(0, 1.0), (1, 2.0), (0, 3.0)], vec![(1, 5.0)]]);
        assert_eq!(a.row_ptr, vec![0, 2, 3]);
        assert_eq!(a.cols, vec![0, 1, 1]);
        assert_eq!(a.vals, vec![4.0, 2.0, 5.0]);
    }

    #[test]
    fn matvec_against_dense() {
        let a = laplacian_1d(4, 0.2);
        let x = [1.0, -2.0, 3.0, 0.5];
        let mut y = [0.0; 4];
        a.mul_vec(&x, &mut y);
        let s = 25.0;
        assert_relative_eq!(y[0], s * (2.0 * 1.0 + 2.0), max_relative = 1e-14);
        assert_relative_eq!(y[1], s * (-1.0 - 4.0 - 3.0), max_relative = 1e-14);
        assert_relative_eq!(y[2], s * (2.0 + 6.0 - 0.5), max_relative = 1e-14);
        assert_relative_eq!(y[3], s * (-3.0 + 1.0), max_relative = 1e-14);
    }

    #[test]
    fn identity_plus_scaled_matches_manual() {
        let a = laplacian_1d(3, 1.0);
        let m = a.identity_plus_scaled(0.5);
        let x = [1.0, 2.0, 3.0];
        let mut ax = [0.0; 3];
        let mut mx = [0.0; 3];
        a.mul_vec(&x, &mut ax);
        m.mul_vec(&x, &mut mx);
        for i in 0..3 {
            assert_relative_eq!(mx[i], x[i] + 0.5 * ax[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn diagonal_shift() {
        let mut a = laplacian_1d(3, 1.0);
        a.shift_diagonal(-0.75);
        assert_eq!(a.diagonal(), vec![1.25, 1.25, 1.25]);
    }

    #[test]
    fn asymmetry_detects_advection_pattern() {
        let sym = laplacian_1d(5, 0.1);
        assert_eq!(sym.asymmetry(), 0.0);
        let mut skew = laplacian_1d(5, 0.1);
        // Perturb one off-diagonal entry.
        skew.vals[1] += 1.0;
        assert_relative_eq!(skew.asymmetry(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn cg_solves_poisson() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0: u(x) = x(1-x)/2.
        let n = 99;
        let h = 1.0 / (n as f64 + 1.0);
        let a = laplacian_1d(n, h);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let stats = cg(&a, &b, &mut x, 1e-12, 10 * n).unwrap();
        assert!(stats.residual <= 1e-12);
        for i in 0..n {
            let xi = (i as f64 + 1.0) * h;
            assert_relative_eq!(x[i], xi * (1.0 - xi) / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn cg_rejects_indefinite() {
        let mut a = laplacian_1d(20, 1.0);
        a.shift_diagonal(-3.0); // spectrum straddles zero
        let b = vec![1.0; 20];
        let mut x = vec![0.0; 20];
        assert!(cg(&a, &b, &mut x, 1e-12, 200).is_err());
    }

    #[test]
    fn bicgstab_solves_advection_diffusion() {
        // -u'' + c u' = 1 discretised with central differences; compare
        // against the answer from a dense Gaussian elimination.
        let n = 40;
        let h = 1.0 / (n as f64 + 1.0);
        let c = 3.0;
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|i| {
                let mut row = vec![(i as u32, 2.0 / (h * h))];
                if i > 0 {
                    row.push((i as u32 - 1, -1.0 / (h * h) - c / (2.0 * h)));
                }
                if i + 1 < n {
                    row.push((i as u32 + 1, -1.0 / (h * h) + c / (2.0 * h)));
                }
                row
            })
            .collect();
        let a = Csr::from_rows(rows);
        let b = vec![1.0; n];

        // Dense reference (Thomas algorithm).
        let mut sub = vec![0.0; n];
        let mut dia = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k] as usize;
                if j + 1 == i {
                    sub[i] = a.vals[k];
                } else if j == i {
                    dia[i] = a.vals[k];
                } else {
                    sup[i] = a.vals[k];
                }
            }
        }
        let mut rhs = b.clone();
        let mut diag = dia.clone();
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut reference = vec![0.0; n];
        reference[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            reference[i] = (rhs[i] - sup[i] * reference[i + 1]) / diag[i];
        }

        let mut x = vec![0.0; n];
        let stats = bicgstab(&a, &b, &mut x, 1e-12, 800).unwrap();
        assert!(stats.residual <= 1e-12);
        for i in 0..n {
            assert_relative_eq!(x[i], reference[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn warm_start_reduces_work() {
        let n = 99;
        let h = 1.0 / (n as f64 + 1.0);
        let a = laplacian_1d(n, h);
        let b = vec![1.0; n];
        let mut cold = vec![0.0; n];
        let cold_stats = cg(&a, &b, &mut cold, 1e-12, 10 * n).unwrap();
        let mut warm = cold.clone();
        let warm_stats = cg(&a, &b, &mut warm, 1e-12, 10 * n).unwrap();
        assert!(warm_stats.iterations <= 1);
        assert!(cold_stats.iterations > warm_stats.iterations);
    }
}
