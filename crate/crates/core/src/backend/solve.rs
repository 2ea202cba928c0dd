use rayon::prelude::*;

use super::Backend;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

// Columns of the Cholesky factor are filled in parallel only past this size.
const PARALLEL_CHOLESKY_MIN: usize = 128;

/// Square-root-free Cholesky factor `M = L D Lᵀ`, `L` unit lower triangular.
#[derive(Clone, Debug)]
pub struct Cholesky {
    // Strict lower part holds L, diagonal holds D.
    ld: Matrix,
}

impl Cholesky {
    /// Left-looking factorization. Each entry of a column depends only on
    /// earlier columns, so filling a column in parallel is deterministic.
    pub fn factor(m: &Matrix, backend: &Backend) -> Result<Self> {
        let n = square(m)?;
        let mut ld = Matrix::zeros(n, n);
        let mut scaled = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let data = ld.as_mut_slice();
        for j in 0..n {
            let (head, tail) = data.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            // scaled[k] = L_jk d_k
            for k in 0..j {
                scaled[k] = row_j[k] * diag[k];
            }
            let w = &scaled[..j];
            let d = m[(j, j)] - dot(&row_j[..j], w);
            if d.is_nan() || d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            row_j[j] = d;
            diag[j] = d;
            let fill = |(r, row_i): (usize, &mut [f64])| {
                let i = j + 1 + r;
                row_i[j] = (m[(i, j)] - dot(&row_i[..j], w)) / d;
            };
            if backend.is_parallel() && n >= PARALLEL_CHOLESKY_MIN && n - j > 32 {
                backend.install(|| tail.par_chunks_mut(n).enumerate().for_each(fill));
            } else {
                tail.chunks_mut(n).enumerate().for_each(fill);
            }
        }
        Ok(Cholesky { ld })
    }

    /// Packed factor: `D` on the diagonal, `L` strictly below it.
    pub fn factor_matrix(&self) -> &Matrix {
        &self.ld
    }

    pub fn dim(&self) -> usize {
        self.ld.rows()
    }

    /// Solves `L D Lᵀ X = B`.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::dims(format!(
                "solve: system is {n}x{n}, right-hand side has {} rows",
                b.rows()
            )));
        }
        let mut x = b.clone();
        let k = x.cols();
        let data = x.as_mut_slice();
        // L z = b
        for i in 0..n {
            let (done, rest) = data.split_at_mut(i * k);
            let xi = &mut rest[..k];
            for j in 0..i {
                let lij = self.ld[(i, j)];
                for (v, z) in xi.iter_mut().zip(&done[j * k..(j + 1) * k]) {
                    *v -= lij * z;
                }
            }
        }
        for (i, row) in data.chunks_exact_mut(k.max(1)).enumerate().take(n) {
            let d = self.ld[(i, i)];
            row.iter_mut().for_each(|v| *v /= d);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let (head, done) = data.split_at_mut((i + 1) * k);
            let xi = &mut head[i * k..];
            for j in (i + 1)..n {
                let lji = self.ld[(j, i)];
                for (v, y) in xi.iter_mut().zip(&done[(j - i - 1) * k..(j - i) * k]) {
                    *v -= lji * y;
                }
            }
        }
        Ok(x)
    }
}

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &Matrix) -> Result<Self> {
        let n = square(m)?;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let (best, best_val) =
                (col..n)
                    .map(|r| (r, lu[(r, col)].abs()))
                    .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best_val.is_nan() || best_val <= scale * f64::EPSILON * n as f64 {
                return Err(Error::Singular { pivot: col });
            }
            if best != col {
                perm.swap(best, col);
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(best, j)];
                    lu[(best, j)] = tmp;
                }
            }
            let p = lu[(col, col)];
            for r in (col + 1)..n {
                let f = lu[(r, col)] / p;
                lu[(r, col)] = f;
                if f != 0.0 {
                    for j in (col + 1)..n {
                        let u = lu[(col, j)];
                        lu[(r, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(Error::dims(format!(
                "solve: system is {n}x{n}, right-hand side has {} rows",
                b.rows()
            )));
        }
        let k = b.cols();
        let mut x = Matrix::zeros(n, k);
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).copy_from_slice(b.row(p));
        }
        for i in 0..n {
            for j in 0..i {
                let f = self.lu[(i, j)];
                for c in 0..k {
                    let v = x[(j, c)];
                    x[(i, c)] -= f * v;
                }
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let f = self.lu[(i, j)];
                for c in 0..k {
                    let v = x[(j, c)];
                    x[(i, c)] -= f * v;
                }
            }
            let d = self.lu[(i, i)];
            for c in 0..k {
                x[(i, c)] /= d;
            }
        }
        Ok(x)
    }

    /// Dense inverse; for validation on small systems.
    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.lu.rows()))
    }
}

/// How hard [`SpdFactor::factor`] tries before giving up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorPolicy {
    /// First jitter is `base_jitter * trace / n`, added after a plain attempt fails.
    pub base_jitter: f64,
    /// Number of ×10 increases after the first jittered attempt.
    pub escalations: u32,
    pub lu_fallback: bool,
    pub symmetry_tol: f64,
}

impl FactorPolicy {
    /// Jitter escalation then LU.
    pub fn with_fallback() -> Self {
        FactorPolicy {
            lu_fallback: true,
            ..FactorPolicy::strict()
        }
    }

    /// Jitter escalation only.
    pub fn strict() -> Self {
        FactorPolicy {
            base_jitter: 1e-12,
            escalations: 3,
            lu_fallback: false,
            symmetry_tol: 1e-9,
        }
    }
}

impl Default for FactorPolicy {
    fn default() -> Self {
        FactorPolicy::with_fallback()
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Cholesky(Cholesky),
    Lu(Lu),
}

/// Reusable factorization of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    kind: Kind,
    jitter: f64,
}

impl SpdFactor {
    pub fn factor(m: &Matrix, backend: &Backend, policy: FactorPolicy) -> Result<Self> {
        let n = square(m)?;
        check_symmetric(m, policy.symmetry_tol)?;
        let first_failure = match Cholesky::factor(m, backend) {
            Ok(c) => {
                return Ok(SpdFactor {
                    kind: Kind::Cholesky(c),
                    jitter: 0.0,
                })
            }
            Err(e) => e,
        };

        let mean_diag = if n > 0 { m.trace() / n as f64 } else { 0.0 };
        let mut jitter = policy.base_jitter * if mean_diag > 0.0 { mean_diag } else { 1.0 };
        for _ in 0..=policy.escalations {
            let mut shifted = m.clone();
            shifted.add_diagonal(jitter);
            if let Ok(c) = Cholesky::factor(&shifted, backend) {
                return Ok(SpdFactor {
                    kind: Kind::Cholesky(c),
                    jitter,
                });
            }
            jitter *= 10.0;
        }

        if policy.lu_fallback {
            if let Ok(lu) = Lu::factor(m) {
                return Ok(SpdFactor {
                    kind: Kind::Lu(lu),
                    jitter: 0.0,
                });
            }
        }
        Err(first_failure)
    }

    /// Diagonal shift that made the factorization succeed (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.kind, Kind::Cholesky(_))
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        match &self.kind {
            Kind::Cholesky(c) => c.solve(b),
            Kind::Lu(lu) => lu.solve(b),
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(&Matrix::column_vector(b))?.into_vec())
    }
}

fn square(m: &Matrix) -> Result<usize> {
    if m.rows() != m.cols() {
        return Err(Error::dims(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.rows())
}

fn check_symmetric(m: &Matrix, tol: f64) -> Result<()> {
    let tol = tol * m.max_abs().max(1.0);
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            let deviation = (m[(i, j)] - m[(j, i)]).abs();
            if deviation.is_nan() || deviation > tol {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    deviation,
                });
            }
        }
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
