//! Mercer eigenpairs of the squared-exponential kernel.
//!
//! For `k(x, x') = exp(-ε²(x - x')²)` and global scale factor `ρ`:
//!
//! ```text
//! β  = (1 + (2ε/ρ)²)^(1/4)
//! δ² = (ρ²/2)(β² - 1)
//! γ_i = sqrt(β / (2^(i-1) (i-1)!))
//! φ_i(x) = γ_i exp(-δ² x²) H_{i-1}(ρβx)
//! λ_i = sqrt(ρ² / (ρ² + δ² + ε²)) · (ε² / (ρ² + δ² + ε²))^(i-1)
//! ```
//!
//! The eigenfunctions are orthonormal under the weight `(ρ/√π) exp(-ρ²x²)`.
//! In `p` dimensions the eigenpairs are tensor products over a multi-index.

use crate::backend::{Backend, Op};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::budget::MemoryBudget;
use super::hermite;
use super::{ArdKernelParams, KernelParams1D};

/// Product eigenvalues below `λ_max` times this are raised to it before `Λ⁻¹` is formed.
pub const EIGENVALUE_FLOOR_RATIO: f64 = 1e-14;

/// Which `δ²` formula to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeltaConvention {
    /// `δ² = (ρ²/2)(β² - 1)`. The expansion converges to the kernel.
    #[default]
    ScaleSquared,
    /// `δ² = (ρ/2)(β² - 1)`. Only agrees with the above at `ρ = 1`; kept for comparison.
    ScaleLinear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeParams {
    pub beta: f64,
    pub delta2: f64,
    /// `γ_1 .. γ_n`.
    pub gamma: Vec<f64>,
}

pub fn shape_params(params: &KernelParams1D, n: usize) -> ShapeParams {
    shape_params_with(params, n, DeltaConvention::default())
}

pub fn shape_params_with(params: &KernelParams1D, n: usize, convention: DeltaConvention) -> ShapeParams {
    let (beta, delta2) = beta_delta2(params, convention);
    let mut gamma = Vec::with_capacity(n);
    if n > 0 {
        gamma.push(beta.sqrt());
    }
    for i in 1..n {
        // γ_{i+1} / γ_i = 1 / sqrt(2i)
        let prev = gamma[i - 1];
        gamma.push(prev / (2.0 * i as f64).sqrt());
    }
    ShapeParams { beta, delta2, gamma }
}

fn beta_delta2(params: &KernelParams1D, convention: DeltaConvention) -> (f64, f64) {
    let (eps, rho) = (params.epsilon(), params.rho());
    let r = 2.0 * eps / rho;
    let beta2 = (1.0 + r * r).sqrt();
    let beta = beta2.sqrt();
    let scale = match convention {
        DeltaConvention::ScaleSquared => rho * rho,
        DeltaConvention::ScaleLinear => rho,
    };
    (beta, 0.5 * scale * (beta2 - 1.0))
}

/// `λ_1 .. λ_n`, before any flooring. Zero beyond the first when `ε = 0`.
pub fn eigenvalues_1d(params: &KernelParams1D, n: usize) -> Vec<f64> {
    eigenvalues_1d_with(params, n, DeltaConvention::default())
}

pub fn eigenvalues_1d_with(params: &KernelParams1D, n: usize, convention: DeltaConvention) -> Vec<f64> {
    let (_, delta2) = beta_delta2(params, convention);
    let (eps2, rho2) = (params.epsilon().powi(2), params.rho().powi(2));
    let denom = rho2 + delta2 + eps2;
    let lead = (rho2 / denom).sqrt();
    let ratio = eps2 / denom;
    (0..n).map(|i| lead * ratio.powi(i as i32)).collect()
}

/// `φ_i(x)` for `i ≥ 1`.
pub fn eigenfunction_1d(i: usize, x: f64, params: &KernelParams1D) -> Result<f64> {
    eigenfunction_1d_with(i, x, params, DeltaConvention::default())
}

pub fn eigenfunction_1d_with(i: usize, x: f64, params: &KernelParams1D, convention: DeltaConvention) -> Result<f64> {
    if i == 0 {
        return Err(Error::param("eigenfunction index starts at 1"));
    }
    if !x.is_finite() {
        return Err(Error::param(format!("non-finite input {x}")));
    }
    let mut out = vec![0.0; i];
    eigenfunctions_1d(x, params, convention, &mut out);
    Ok(out[i - 1])
}

/// Fills `out[k] = φ_{k+1}(x)` for every `k < out.len()`.
///
/// Computed as `sqrt(β) exp(-δ²x²) h_k(ρβx)` with the normalized Hermite
/// recurrence, so no `γ_i` or `H_k` is formed on its own.
pub fn eigenfunctions_1d(x: f64, params: &KernelParams1D, convention: DeltaConvention, out: &mut [f64]) {
    let (beta, delta2) = beta_delta2(params, convention);
    hermite::normalized(params.rho() * beta * x, out);
    let envelope = beta.sqrt() * (-delta2 * x * x).exp();
    out.iter_mut().for_each(|v| *v *= envelope);
}

/// One-based index of a univariate eigenpair per input dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// All `n^p` multi-indices in lexicographic order, first dimension slowest.
///
/// The budget is checked for zero sample rows, i.e. only the `n^p` system itself.
pub fn multi_indices(n: usize, p: usize, budget: &MemoryBudget) -> Result<Vec<MultiIndex>> {
    if n == 0 || p == 0 {
        return Err(Error::param(format!("need n >= 1 and p >= 1, got n={n}, p={p}")));
    }
    let count = budget.check(0, n, p)?;
    Ok(enumerate(n, p, count))
}

fn enumerate(n: usize, p: usize, count: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![1usize; p];
    for _ in 0..count {
        out.push(MultiIndex(cur.clone()));
        // Odometer: last dimension fastest.
        for d in (0..p).rev() {
            if cur[d] < n {
                cur[d] += 1;
                break;
            }
            cur[d] = 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MercerOptions {
    pub convention: DeltaConvention,
    pub budget: MemoryBudget,
    pub floor_ratio: f64,
}

impl Default for MercerOptions {
    fn default() -> Self {
        MercerOptions {
            convention: DeltaConvention::default(),
            budget: MemoryBudget::default(),
            floor_ratio: EIGENVALUE_FLOOR_RATIO,
        }
    }
}

/// Truncated expansion evaluated at a set of points: `Φ` (rows = points,
/// columns = multi-indices) and the matching product eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    lambda: Vec<f64>,
    lambda_floored: Vec<f64>,
    phi: Matrix,
    indices: Vec<MultiIndex>,
    params: ArdKernelParams,
    n: usize,
    convention: DeltaConvention,
}

/// [`EigenSystem::build`] with default options on a serial backend.
pub fn eigensystem(x: &Matrix, params: &ArdKernelParams, n: usize) -> Result<EigenSystem> {
    EigenSystem::build(x, params, n, &MercerOptions::default(), &Backend::serial())
}

impl EigenSystem {
    pub fn build(
        x: &Matrix,
        params: &ArdKernelParams,
        n: usize,
        options: &MercerOptions,
        backend: &Backend,
    ) -> Result<Self> {
        let p = params.dim();
        params.check_dim(x.cols(), "input matrix")?;
        if n == 0 {
            return Err(Error::param("need at least one eigenvalue"));
        }
        if let Some((i, d)) = x.find_non_finite() {
            return Err(Error::param(format!("non-finite input at row {i}, column {d}")));
        }
        let count = options.budget.check(x.rows(), n, p)?;
        let indices = enumerate(n, p, count);

        let per_dim_lambda: Vec<Vec<f64>> = params
            .per_dim()
            .iter()
            .map(|k| eigenvalues_1d_with(k, n, options.convention))
            .collect();
        let lambda: Vec<f64> = indices
            .iter()
            .map(|idx| {
                idx.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(d, &i)| per_dim_lambda[d][i - 1])
                    .product()
            })
            .collect();
        let lambda_max = lambda.iter().copied().fold(0.0, f64::max);
        let floor = lambda_max * options.floor_ratio;
        let lambda_floored = lambda.iter().map(|&l| l.max(floor)).collect();

        let mut phi = Matrix::zeros(x.rows(), count);
        let convention = options.convention;
        backend.fill_rows(phi.as_mut_slice(), count, |i, out| {
            // table[d * n + k] = φ_{k+1}(x_{i,d})
            let mut table = vec![0.0; p * n];
            for (d, chunk) in table.chunks_exact_mut(n).enumerate() {
                eigenfunctions_1d(x[(i, d)], params.get(d), convention, chunk);
            }
            for (v, idx) in out.iter_mut().zip(&indices) {
                let mut prod = 1.0;
                for (d, &k) in idx.as_slice().iter().enumerate() {
                    prod *= table[d * n + k - 1];
                }
                *v = prod;
            }
        });
        if let Some((row, col)) = phi.find_non_finite() {
            return Err(Error::NonFinite { row, col });
        }

        Ok(EigenSystem {
            lambda,
            lambda_floored,
            phi,
            indices,
            params: params.clone(),
            n,
            convention,
        })
    }

    /// Product eigenvalues as computed (may contain zeros or subnormals).
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Product eigenvalues raised to at least `λ_max · floor_ratio`; strictly positive.
    pub fn lambda_floored(&self) -> &[f64] {
        &self.lambda_floored
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn params(&self) -> &ArdKernelParams {
        &self.params
    }

    pub fn n_eigen(&self) -> usize {
        self.n
    }

    pub fn convention(&self) -> DeltaConvention {
        self.convention
    }

    pub fn n_points(&self) -> usize {
        self.phi.rows()
    }

    /// `n^p`.
    pub fn n_features(&self) -> usize {
        self.lambda.len()
    }

    /// `Φ · diag(sqrt(λ))`.
    pub fn scaled_features(&self) -> Matrix {
        let roots: Vec<f64> = self.lambda.iter().map(|l| l.sqrt()).collect();
        let mut psi = self.phi.clone();
        psi.scale_columns(&roots);
        psi
    }

    pub(crate) fn check_compatible(&self, other: &EigenSystem) -> Result<()> {
        if self.params != other.params || self.n != other.n || self.convention != other.convention {
            return Err(Error::param(
                "eigensystems were built with different kernel parameters or eigenvalue counts",
            ));
        }
        Ok(())
    }
}

/// `Φ_A Λ Φ_Bᵀ`, the truncated-expansion approximation of the kernel matrix.
///
/// Evaluated as `Ψ_A Ψ_Bᵀ` with `Ψ = Φ Λ^{1/2}`, which is exactly symmetric
/// when both sides are the same point set.
pub fn reconstruct_kernel(a: &EigenSystem, b: &EigenSystem) -> Result<Matrix> {
    a.check_compatible(b)?;
    Backend::serial().gemm(&a.scaled_features(), Op::N, &b.scaled_features(), Op::T)
}
