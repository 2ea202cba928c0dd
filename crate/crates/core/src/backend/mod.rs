//! Dense linear-algebra execution in serial or multi-worker mode.
//!
//! Every GEMM entry is reduced in one canonical order: the inner dimension is
//! cut into fixed blocks of [`INNER_BLOCK`] terms, each block is summed
//! sequentially from zero, and block sums are added to the output in block
//! order. Serial and parallel execution both follow that order, so results are
//! bitwise identical across modes and worker counts. Turning
//! `deterministic_reduction` off lets the parallel path split long inner
//! dimensions by worker instead, which changes rounding.

mod solve;
mod timing;

use std::env;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use solve::{Cholesky, FactorPolicy, Lu, SpdFactor};
pub use timing::{Phase, PhaseScope, TimingRecord};

/// Caps the worker count of parallel backends. Read when a backend is built.
pub const MAX_WORKERS_ENV: &str = "FAGP_MAX_WORKERS";

/// Inner-dimension block length of the canonical reduction order.
pub const INNER_BLOCK: usize = 256;

/// Smallest row block handed to one worker.
pub const MIN_ROW_BLOCK: usize = 32;

const DEFAULT_MEMORY_CAP: u64 = 8 << 30;

// Below this many multiply-adds the parallel path runs serially.
const PARALLEL_MIN_WORK: usize = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Serial,
    Parallel,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Serial => "serial",
            Mode::Parallel => "parallel",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether a GEMM operand is used as is or transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

#[derive(Clone)]
pub struct Backend {
    mode: Mode,
    workers: usize,
    deterministic_reduction: bool,
    memory_cap: u64,
    pool: Option<Arc<ThreadPool>>,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend")
            .field("mode", &self.mode)
            .field("workers", &self.workers)
            .field("deterministic_reduction", &self.deterministic_reduction)
            .field("memory_cap", &self.memory_cap)
            .finish()
    }
}

impl Default for Backend {
    fn default() -> Self {
        Backend::serial()
    }
}

impl Backend {
    pub fn serial() -> Self {
        Backend {
            mode: Mode::Serial,
            workers: 1,
            deterministic_reduction: true,
            memory_cap: DEFAULT_MEMORY_CAP,
            pool: None,
        }
    }

    /// A backend with its own pool of `workers` threads, capped by
    /// `FAGP_MAX_WORKERS` when that variable holds a positive integer.
    pub fn parallel(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::param("parallel backend needs at least one worker"));
        }
        let workers = match env::var(MAX_WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            Some(cap) if cap > 0 => workers.min(cap),
            _ => workers,
        };
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("fagp-worker-{i}"))
            .build()
            .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
        Ok(Backend {
            mode: Mode::Parallel,
            workers,
            deterministic_reduction: true,
            memory_cap: DEFAULT_MEMORY_CAP,
            pool: Some(Arc::new(pool)),
        })
    }

    /// Parallel backend sized to the machine.
    pub fn parallel_auto() -> Result<Self> {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        Backend::parallel(n)
    }

    pub fn with_deterministic_reduction(mut self, on: bool) -> Self {
        self.deterministic_reduction = on;
        self
    }

    /// Largest single output allocation, in bytes, a GEMM may make.
    pub fn with_memory_cap(mut self, bytes: u64) -> Self {
        self.memory_cap = bytes;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn deterministic_reduction(&self) -> bool {
        self.deterministic_reduction
    }

    pub fn memory_cap(&self) -> u64 {
        self.memory_cap
    }

    /// Short label such as `serial` or `parallel:8`.
    pub fn label(&self) -> String {
        match self.mode {
            Mode::Serial => "serial".to_string(),
            Mode::Parallel => format!("parallel:{}", self.workers),
        }
    }

    /// Runs `f` inside the worker pool (or directly in serial mode).
    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    pub(crate) fn is_parallel(&self) -> bool {
        self.pool.is_some() && self.workers > 1
    }

    /// Fills `out` (row-major, `cols` wide) row by row with `f(row, slice)`.
    /// Rows are independent so the result does not depend on the worker count.
    pub(crate) fn fill_rows<F>(&self, out: &mut [f64], cols: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if cols == 0 {
            return;
        }
        let rows = out.len() / cols;
        if self.is_parallel() && rows >= 2 * MIN_ROW_BLOCK {
            let chunk = self.row_block(rows);
            self.install(|| {
                out.par_chunks_mut(chunk * cols).enumerate().for_each(|(c, block)| {
                    for (r, row) in block.chunks_exact_mut(cols).enumerate() {
                        f(c * chunk + r, row);
                    }
                })
            });
        } else {
            for (r, row) in out.chunks_exact_mut(cols).enumerate() {
                f(r, row);
            }
        }
    }

    fn row_block(&self, rows: usize) -> usize {
        MIN_ROW_BLOCK.max(rows.div_ceil(self.workers))
    }

    /// `C = op(A) · op(B)`.
    pub fn gemm(&self, a: &Matrix, op_a: Op, b: &Matrix, op_b: Op) -> Result<Matrix> {
        let (m, k) = match op_a {
            Op::N => a.shape(),
            Op::T => (a.cols(), a.rows()),
        };
        let (kb, n) = match op_b {
            Op::N => b.shape(),
            Op::T => (b.cols(), b.rows()),
        };
        if k != kb {
            return Err(Error::dims(format!("gemm: op(A) is {m}x{k} but op(B) is {kb}x{n}")));
        }
        let bytes = (m as u128) * (n as u128) * 8;
        if bytes > self.memory_cap as u128 {
            return Err(Error::AllocationTooLarge {
                bytes,
                cap_bytes: self.memory_cap,
            });
        }

        // Row access to op(B) must be contiguous.
        let b_owned;
        let b = match op_b {
            Op::N => b,
            Op::T => {
                b_owned = b.transpose();
                &b_owned
            }
        };
        let lhs = Lhs { m: a, op: op_a };
        let mut c = Matrix::zeros(m, n);
        if m == 0 || n == 0 {
            return Ok(c);
        }
        if k == 0 {
            return Ok(c);
        }

        let work = m.saturating_mul(n).saturating_mul(k);
        if !self.is_parallel() || work < PARALLEL_MIN_WORK {
            canonical_rows(&lhs, b, 0..m, c.as_mut_slice());
            return Ok(c);
        }

        let chunk = self.row_block(m);
        if m.div_ceil(chunk) >= 2 {
            self.install(|| {
                c.as_mut_slice()
                    .par_chunks_mut(chunk * n)
                    .enumerate()
                    .for_each(|(ci, out)| {
                        let start = ci * chunk;
                        let rows = start..start + out.len() / n;
                        canonical_rows(&lhs, b, rows, out);
                    })
            });
        } else if k <= INNER_BLOCK {
            canonical_rows(&lhs, b, 0..m, c.as_mut_slice());
        } else if self.deterministic_reduction {
            self.inner_split_canonical(&lhs, b, c.as_mut_slice());
        } else {
            self.inner_split_by_worker(&lhs, b, c.as_mut_slice());
        }
        Ok(c)
    }

    /// `A · B` without transposes.
    pub fn matmul(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        self.gemm(a, Op::N, b, Op::N)
    }

    /// Solves `M X = B` for symmetric positive-definite `M`.
    ///
    /// Cholesky with escalating diagonal jitter; no LU fallback, so an
    /// indefinite `M` fails with the pivot where factorization broke down.
    pub fn spd_solve(&self, m: &Matrix, b: &Matrix) -> Result<Matrix> {
        let factor = SpdFactor::factor(m, self, FactorPolicy::strict())?;
        factor.solve(b)
    }

    // Few output rows, long inner dimension: parallelize over the canonical
    // inner blocks, then add the block sums in block order. Processed in
    // waves of `workers` blocks so scratch stays at workers * |C|.
    fn inner_split_canonical(&self, lhs: &Lhs<'_>, b: &Matrix, out: &mut [f64]) {
        let k = b.rows();
        let blocks: Vec<Range<usize>> = (0..k)
            .step_by(INNER_BLOCK)
            .map(|s| s..(s + INNER_BLOCK).min(k))
            .collect();
        let rows = lhs.rows();
        for wave in blocks.chunks(self.workers) {
            let partials: Vec<Vec<f64>> = self.install(|| {
                wave.par_iter()
                    .map(|ks| {
                        let mut tmp = vec![0.0; out.len()];
                        block_kernel(lhs, b, 0..rows, ks.clone(), &mut tmp);
                        tmp
                    })
                    .collect()
            });
            for p in &partials {
                for (o, v) in out.iter_mut().zip(p) {
                    *o += v;
                }
            }
        }
    }

    fn inner_split_by_worker(&self, lhs: &Lhs<'_>, b: &Matrix, out: &mut [f64]) {
        let k = b.rows();
        let span = k.div_ceil(self.workers).max(1);
        let rows = lhs.rows();
        let partials: Vec<Vec<f64>> = self.install(|| {
            (0..k)
                .step_by(span)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|s| {
                    let mut tmp = vec![0.0; out.len()];
                    block_kernel(lhs, b, 0..rows, s..(s + span).min(k), &mut tmp);
                    tmp
                })
                .collect()
        });
        for p in &partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
    }
}

struct Lhs<'a> {
    m: &'a Matrix,
    op: Op,
}

impl Lhs<'_> {
    fn rows(&self) -> usize {
        match self.op {
            Op::N => self.m.rows(),
            Op::T => self.m.cols(),
        }
    }

    #[inline]
    fn at(&self, i: usize, k: usize) -> f64 {
        match self.op {
            Op::N => self.m[(i, k)],
            Op::T => self.m[(k, i)],
        }
    }
}

/// Canonical-order product for output rows `rows`, written into `out`
/// (zeroed, `rows.len() * b.cols()` long).
fn canonical_rows(lhs: &Lhs<'_>, b: &Matrix, rows: Range<usize>, out: &mut [f64]) {
    let k = b.rows();
    if k <= INNER_BLOCK {
        block_kernel(lhs, b, rows, 0..k, out);
        return;
    }
    let mut tmp = vec![0.0; out.len()];
    for s in (0..k).step_by(INNER_BLOCK) {
        tmp.fill(0.0);
        block_kernel(lhs, b, rows.clone(), s..(s + INNER_BLOCK).min(k), &mut tmp);
        for (o, v) in out.iter_mut().zip(&tmp) {
            *o += v;
        }
    }
}

/// `out[i, :] += Σ_{k in ks} op(A)[i, k] · B[k, :]`, accumulating in `k` order.
#[inline]
fn block_kernel(lhs: &Lhs<'_>, b: &Matrix, rows: Range<usize>, ks: Range<usize>, out: &mut [f64]) {
    let n = b.cols();
    for (r, i) in rows.enumerate() {
        let c_row = &mut out[r * n..(r + 1) * n];
        for k in ks.clone() {
            let a = lhs.at(i, k);
            for (c, bv) in c_row.iter_mut().zip(b.row(k)) {
                *c += a * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
        })
    }

    fn max_rel(a: &Matrix, b: &Matrix) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_is_bitwise_neutral() {
        let a = random(7, 5, 1);
        let c = Backend::serial().matmul(&a, &Matrix::identity(5)).unwrap();
        assert_eq!(c, a);
        let c = Backend::parallel(4).unwrap().matmul(&Matrix::identity(7), &a).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn small_product_matches_triple_loop() {
        let a = random(2, 3, 2);
        let b = random(3, 2, 3);
        let c = Backend::serial().matmul(&a, &b).unwrap();
        assert!(max_rel(&c, &triple_loop(&a, &b)) < 1e-14);
    }

    #[test]
    fn transposes_match_explicit_transpose() {
        let a = random(300, 6, 4);
        let b = random(300, 9, 5);
        let be = Backend::serial();
        let c = be.gemm(&a, Op::T, &b, Op::N).unwrap();
        let reference = triple_loop(&a.transpose(), &b);
        assert!(c.max_abs_diff(&reference) < 1e-12);
        let d = be.gemm(&b, Op::T, &a, Op::N).unwrap();
        let e = be.gemm(&a, Op::T, &b, Op::N).unwrap().transpose();
        assert!(d.max_abs_diff(&e) < 1e-12);
        let f = be.gemm(&a, Op::N, &a, Op::T).unwrap();
        assert!(f.max_abs_diff(&triple_loop(&a, &a.transpose())) < 1e-12);
    }

    #[test]
    fn serial_and_parallel_are_bitwise_equal() {
        let a = random(200, 200, 6);
        let b = random(200, 200, 7);
        let s = Backend::serial().matmul(&a, &b).unwrap();
        let p = Backend::parallel(8).unwrap().matmul(&a, &b).unwrap();
        assert_eq!(s, p);
        assert!(max_rel(&s, &triple_loop(&a, &b)) < 1e-10 || s.max_abs_diff(&triple_loop(&a, &b)) < 1e-12);
    }

    #[test]
    fn inner_split_paths() {
        // Few output rows, long inner dimension.
        let phi = random(5000, 12, 8);
        let y = random(5000, 1, 9);
        let s = Backend::serial().gemm(&phi, Op::T, &y, Op::N).unwrap();
        for w in [2, 3, 8] {
            let det = Backend::parallel(w).unwrap();
            assert_eq!(det.gemm(&phi, Op::T, &y, Op::N).unwrap(), s);
            let loose = det.with_deterministic_reduction(false);
            let l = loose.gemm(&phi, Op::T, &y, Op::N).unwrap();
            assert!(max_rel(&l, &s) < 1e-10);
        }
    }

    #[test]
    fn associativity_within_tolerance() {
        let a = random(50, 50, 10);
        let b = random(50, 50, 11);
        let c = random(50, 50, 12);
        let be = Backend::serial();
        let left = be.matmul(&be.matmul(&a, &b).unwrap(), &c).unwrap();
        let right = be.matmul(&a, &be.matmul(&b, &c).unwrap()).unwrap();
        let scale = a.max_abs() * b.max_abs() * c.max_abs() * 50.0 * 50.0;
        assert!(left.max_abs_diff(&right) <= 1e-10 * scale);
    }

    #[test]
    fn dimension_mismatch_and_cap() {
        let a = random(3, 4, 1);
        let b = random(3, 4, 2);
        assert!(matches!(
            Backend::serial().matmul(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
        let be = Backend::serial().with_memory_cap(64);
        assert!(matches!(
            be.gemm(&a, Op::N, &b, Op::T),
            Err(Error::AllocationTooLarge { .. })
        ));
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(Backend::parallel(0).is_err());
    }
}
