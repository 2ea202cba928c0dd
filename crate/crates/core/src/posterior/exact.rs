use super::{check_inputs, residual, GpModel, PosteriorResult};
use crate::backend::{Backend, Op, SpdFactor};
use crate::datagen::Dataset;
use crate::error::Result;
use crate::kernel::gram_matrix;
use crate::matrix::Matrix;

/// Full GP posterior with the exact kernel, through a factorization of
/// `K + σ²I`. Cubic in the training size; the reference for FAGP.
pub fn exact_posterior(train: &Dataset, xstar: &Matrix, model: &GpModel, want_cov: bool) -> Result<PosteriorResult> {
    let (x, y) = (train.x(), train.y());
    check_inputs(x, y, xstar, model)?;
    let backend = Backend::serial();

    let mut k = gram_matrix(x, x, &model.kernel)?;
    k.add_diagonal(model.noise_var());
    let factor = SpdFactor::factor(&k, &backend, model.options.factor)?;

    let k_star = gram_matrix(xstar, x, &model.kernel)?;
    let alpha = factor.solve(&Matrix::column_vector(&residual(y, model.mean)))?;
    let correction = backend.matmul(&k_star, &alpha)?;
    let m = model.mean.value();
    let mean = correction.as_slice().iter().map(|c| m + c).collect();

    let cov = if want_cov {
        let v = factor.solve(&k_star.transpose())?;
        let reduction = backend.gemm(&k_star, Op::N, &v, Op::N)?;
        let mut cov = gram_matrix(xstar, xstar, &model.kernel)?;
        for (c, r) in cov.as_mut_slice().iter_mut().zip(reduction.as_slice()) {
            *c -= r;
        }
        cov.symmetrize();
        Some(cov)
    } else {
        None
    };
    Ok(PosteriorResult { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ArdKernelParams;
    use crate::posterior::PriorMean;

    fn one_d(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::new(Matrix::column_vector(xs), ys.to_vec()).unwrap()
    }

    #[test]
    fn single_point_closed_form() {
        let model = GpModel::new(ArdKernelParams::isotropic(1.0, 1.0, 1).unwrap(), 1.0, 1).unwrap();
        let r = exact_posterior(&one_d(&[0.0], &[1.0]), &Matrix::column_vector(&[0.0]), &model, true).unwrap();
        assert!((r.mean[0] - 0.5).abs() < 1e-15);
        assert!((r.cov.unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_returns_prior_mean() {
        let model = GpModel::new(ArdKernelParams::isotropic(1.0, 1.0, 1).unwrap(), 0.1, 1)
            .unwrap()
            .with_mean(PriorMean::Constant(2.5));
        let train = one_d(&[-0.5, 0.1, 0.7], &[2.5, 2.5, 2.5]);
        let r = exact_posterior(&train, &Matrix::column_vector(&[0.0, 0.3]), &model, false).unwrap();
        assert_eq!(r.mean, vec![2.5, 2.5]);
        assert!(r.cov.is_none());
    }

    #[test]
    fn far_test_points_recover_prior() {
        let model = GpModel::new(ArdKernelParams::isotropic(3.0, 1.0, 1).unwrap(), 0.01, 1).unwrap();
        let train = one_d(&[0.0, 0.2], &[1.0, -0.4]);
        let xs = Matrix::column_vector(&[10.0, 10.5]);
        let r = exact_posterior(&train, &xs, &model, true).unwrap();
        assert!(r.mean.iter().all(|m| m.abs() < 1e-9));
        let prior = gram_matrix(&xs, &xs, &model.kernel).unwrap();
        assert!(r.cov.unwrap().max_abs_diff(&prior) < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let model = GpModel::new(ArdKernelParams::isotropic(1.0, 1.0, 2).unwrap(), 0.1, 1).unwrap();
        let train = one_d(&[0.0], &[1.0]);
        assert!(exact_posterior(&train, &Matrix::zeros(1, 2), &model, false).is_err());
    }
}
