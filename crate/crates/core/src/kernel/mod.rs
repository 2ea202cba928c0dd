//! Squared-exponential kernels and their Mercer expansion.

mod budget;
pub mod hermite;
mod mercer;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use budget::MemoryBudget;
pub use mercer::{
    eigenfunction_1d, eigenfunction_1d_with, eigenfunctions_1d, eigensystem, eigenvalues_1d, eigenvalues_1d_with,
    multi_indices, reconstruct_kernel, shape_params, shape_params_with, DeltaConvention, EigenSystem, MercerOptions,
    MultiIndex, ShapeParams, EIGENVALUE_FLOOR_RATIO,
};

/// Parameters of the unit-amplitude kernel `exp(-ε²(x - x')²)` together with
/// the global scale factor `ρ` of its Mercer expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams1D {
    epsilon: f64,
    rho: f64,
}

impl KernelParams1D {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param(format!("rho must be finite and > 0, got {rho}")));
        }
        Ok(KernelParams1D { epsilon, rho })
    }

    /// Inverse length scale.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// One [`KernelParams1D`] per input dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ArdKernelParams {
    per_dim: Vec<KernelParams1D>,
}

impl ArdKernelParams {
    pub fn new(per_dim: Vec<KernelParams1D>) -> Result<Self> {
        if per_dim.is_empty() {
            return Err(Error::param("ARD kernel needs at least one dimension"));
        }
        Ok(ArdKernelParams { per_dim })
    }

    /// Same `ε`, `ρ` in every one of `p` dimensions.
    pub fn isotropic(epsilon: f64, rho: f64, p: usize) -> Result<Self> {
        let one = KernelParams1D::new(epsilon, rho)?;
        ArdKernelParams::new(vec![one; p])
    }

    pub fn dim(&self) -> usize {
        self.per_dim.len()
    }

    pub fn per_dim(&self) -> &[KernelParams1D] {
        &self.per_dim
    }

    pub fn get(&self, d: usize) -> &KernelParams1D {
        &self.per_dim[d]
    }

    pub(crate) fn check_dim(&self, p: usize, what: &str) -> Result<()> {
        if p != self.dim() {
            return Err(Error::dims(format!(
                "{what} has {p} columns but the kernel has {} dimensions",
                self.dim()
            )));
        }
        Ok(())
    }
}

pub fn se_kernel(x: f64, x2: f64, params: &KernelParams1D) -> f64 {
    let d = x - x2;
    (-(params.epsilon * params.epsilon) * d * d).exp()
}

pub fn ard_kernel(x: &[f64], x2: &[f64], params: &ArdKernelParams) -> Result<f64> {
    params.check_dim(x.len(), "first point")?;
    params.check_dim(x2.len(), "second point")?;
    Ok(ard_unchecked(x, x2, params))
}

#[inline]
fn ard_unchecked(x: &[f64], x2: &[f64], params: &ArdKernelParams) -> f64 {
    let mut s = 0.0;
    for ((a, b), k) in x.iter().zip(x2).zip(&params.per_dim) {
        let d = a - b;
        s += k.epsilon * k.epsilon * d * d;
    }
    (-s).exp()
}

/// Exact kernel matrix with entry `(i, j) = k(a_i, b_j)`.
pub fn gram_matrix(a: &Matrix, b: &Matrix, params: &ArdKernelParams) -> Result<Matrix> {
    params.check_dim(a.cols(), "A")?;
    params.check_dim(b.cols(), "B")?;
    Ok(Matrix::from_fn(a.rows(), b.rows(), |i, j| {
        ard_unchecked(a.row(i), b.row(j), params)
    }))
}
