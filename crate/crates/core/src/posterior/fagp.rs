use super::{check_inputs, residual, GpModel, PosteriorResult, WoodburyPath};
use crate::backend::{Backend, FactorPolicy, Op, SpdFactor};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::kernel::EigenSystem;
use crate::matrix::Matrix;

/// Factorized `Λ̄ = Λ⁻¹ + ΦᵀΦ/σ²`, built from the floored eigenvalues.
#[derive(Clone, Debug)]
pub struct LambdaBar {
    matrix: Matrix,
    factor: SpdFactor,
}

impl LambdaBar {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        self.factor.solve(b)
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }
}

/// `ΦᵀΦ / σ²`, exactly symmetric.
fn scaled_gram(phi: &Matrix, noise_var: f64, backend: &Backend) -> Result<Matrix> {
    let mut g = backend.gemm(phi, Op::T, phi, Op::N)?;
    g.scale(1.0 / noise_var);
    g.symmetrize();
    Ok(g)
}

fn lambda_bar_from_gram(g: &Matrix, lambda: &[f64], backend: &Backend, policy: FactorPolicy) -> Result<LambdaBar> {
    let mut matrix = g.clone();
    for (i, l) in lambda.iter().enumerate() {
        matrix[(i, i)] += 1.0 / l;
    }
    let factor = SpdFactor::factor(&matrix, backend, policy)?;
    Ok(LambdaBar { matrix, factor })
}

pub fn lambda_bar(es: &EigenSystem, noise_var: f64, backend: &Backend) -> Result<LambdaBar> {
    if noise_var.is_nan() || noise_var <= 0.0 {
        return Err(Error::param(format!("noise variance must be > 0, got {noise_var}")));
    }
    let g = scaled_gram(es.phi(), noise_var, backend)?;
    lambda_bar_from_gram(&g, es.lambda_floored(), backend, FactorPolicy::with_fallback())
}

/// `(ΦΛΦᵀ + σ²I)⁻¹` through the Woodbury identity, as an explicit `N × N`
/// matrix. Only meant for checking the identity on small problems.
pub fn woodbury_inverse(phi: &Matrix, lambda: &[f64], noise_var: f64, backend: &Backend) -> Result<Matrix> {
    if lambda.len() != phi.cols() {
        return Err(Error::dims(format!(
            "{} eigenvalues for {} feature columns",
            lambda.len(),
            phi.cols()
        )));
    }
    let g = scaled_gram(phi, noise_var, backend)?;
    let lb = lambda_bar_from_gram(&g, lambda, backend, FactorPolicy::with_fallback())?;
    // Σ⁻¹ - Σ⁻¹ Φ Λ̄⁻¹ Φᵀ Σ⁻¹
    let z = lb.solve(&phi.transpose())?;
    let mut out = backend.gemm(phi, Op::N, &z, Op::N)?;
    out.scale(-1.0 / (noise_var * noise_var));
    out.add_diagonal(1.0 / noise_var);
    Ok(out)
}

/// FAGP predictive posterior: builds both eigensystems then calls [`fagp_from_eigen`].
pub fn fagp_posterior(
    train: &Dataset,
    xstar: &Matrix,
    model: &GpModel,
    backend: &Backend,
    want_cov: bool,
) -> Result<PosteriorResult> {
    check_inputs(train.x(), train.y(), xstar, model)?;
    let mercer = &model.options.mercer;
    mercer
        .budget
        .check(train.x().rows() + xstar.rows(), model.n_eigen, model.kernel.dim())?;
    let es = EigenSystem::build(train.x(), &model.kernel, model.n_eigen, mercer, backend)?;
    let es_star = EigenSystem::build(xstar, &model.kernel, model.n_eigen, mercer, backend)?;
    fagp_from_eigen(&es, train.y(), &es_star, model, backend, want_cov)
}

/// FAGP posterior from prebuilt eigensystems of the training and test inputs.
///
/// No `N × N` or `N* × N` intermediate is formed; the only factorization is
/// of an `n^p × n^p` matrix.
pub fn fagp_from_eigen(
    train: &EigenSystem,
    y: &[f64],
    test: &EigenSystem,
    model: &GpModel,
    backend: &Backend,
    want_cov: bool,
) -> Result<PosteriorResult> {
    train.check_compatible(test)?;
    if y.len() != train.n_points() {
        return Err(Error::dims(format!(
            "{} targets for {} training rows",
            y.len(),
            train.n_points()
        )));
    }
    if train.params() != &model.kernel || train.n_eigen() != model.n_eigen {
        return Err(Error::param("eigensystem does not match the model"));
    }
    let r = residual(y, model.mean);
    match model.options.path {
        WoodburyPath::ScaledFeatures => scaled_path(train, &r, test, model, backend, want_cov),
        WoodburyPath::Literal => literal_path(train, &r, test, model, backend, want_cov),
    }
}

fn add_mean(correction: &Matrix, model: &GpModel) -> Vec<f64> {
    let m = model.mean.value();
    let sign = if model.options.inject_sign_fault { -1.0 } else { 1.0 };
    correction.as_slice().iter().map(|c| m + sign * c).collect()
}

// μ* = m + Ψ* (σ²I + ΨᵀΨ)⁻¹ Ψᵀ r
// Σ* = σ² Ψ* (σ²I + ΨᵀΨ)⁻¹ Ψ*ᵀ
fn scaled_path(
    train: &EigenSystem,
    r: &[f64],
    test: &EigenSystem,
    model: &GpModel,
    backend: &Backend,
    want_cov: bool,
) -> Result<PosteriorResult> {
    let s2 = model.noise_var();
    let psi = train.scaled_features();
    let psi_star = test.scaled_features();

    let mut a = backend.gemm(&psi, Op::T, &psi, Op::N)?;
    a.symmetrize();
    a.add_diagonal(s2);
    let factor = SpdFactor::factor(&a, backend, model.options.factor)?;

    let b = backend.gemm(&psi, Op::T, &Matrix::column_vector(r), Op::N)?;
    let c = factor.solve(&b)?;
    let mean = add_mean(&backend.matmul(&psi_star, &c)?, model);

    let cov = if want_cov {
        let z = factor.solve(&psi_star.transpose())?;
        let mut cov = backend.matmul(&psi_star, &z)?;
        cov.scale(s2);
        cov.symmetrize();
        Some(cov)
    } else {
        None
    };
    Ok(PosteriorResult { mean, cov })
}

// Right-to-left vector pipeline with Λ̄ = Λ⁻¹ + G, G = ΦᵀΦ/σ²:
//   t1 = r/σ², t2 = Φᵀt1, t3 = Λ̄⁻¹t2, t4 = Φt3, t5 = t1 - t4/σ²,
//   u = Φᵀt5, μ* = m + Φ*(Λu)
//   Σ* = Φ*[Λ - Λ(G - G Λ̄⁻¹ G)Λ]Φ*ᵀ
fn literal_path(
    train: &EigenSystem,
    r: &[f64],
    test: &EigenSystem,
    model: &GpModel,
    backend: &Backend,
    want_cov: bool,
) -> Result<PosteriorResult> {
    let s2 = model.noise_var();
    let phi = train.phi();
    let lambda = train.lambda_floored();
    let g = scaled_gram(phi, s2, backend)?;
    let lb = lambda_bar_from_gram(&g, lambda, backend, model.options.factor)?;

    let t1 = Matrix::column_vector(&r.iter().map(|v| v / s2).collect::<Vec<_>>());
    let t2 = backend.gemm(phi, Op::T, &t1, Op::N)?;
    let t3 = lb.solve(&t2)?;
    let t4 = backend.matmul(phi, &t3)?;
    let t5: Vec<f64> = t1
        .as_slice()
        .iter()
        .zip(t4.as_slice())
        .map(|(a, b)| a - b / s2)
        .collect();
    let mut u = backend.gemm(phi, Op::T, &Matrix::column_vector(&t5), Op::N)?;
    for (v, l) in u.as_mut_slice().iter_mut().zip(lambda) {
        *v *= l;
    }
    let mean = add_mean(&backend.matmul(test.phi(), &u)?, model);

    let cov = if want_cov {
        let g_solve = lb.solve(&g)?;
        let gg = backend.matmul(&g, &g_solve)?;
        let m = lambda.len();
        let mut core = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                core[(i, j)] = -lambda[i] * (g[(i, j)] - gg[(i, j)]) * lambda[j];
            }
            core[(i, i)] += lambda[i];
        }
        core.symmetrize();
        let left = backend.matmul(test.phi(), &core)?;
        let mut cov = backend.gemm(&left, Op::N, test.phi(), Op::T)?;
        cov.symmetrize();
        Some(cov)
    } else {
        None
    };
    Ok(PosteriorResult { mean, cov })
}
