//! Self-check suite: each check compares the library against an independent
//! route (exact GP, dense inversion, exact Gram matrix, quadrature, serial
//! backend).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use fagp::backend::{Lu, Op};
use fagp::datagen::{generate, test_inputs, Domain};
use fagp::kernel::{eigenfunctions_1d, eigensystem, gram_matrix, reconstruct_kernel, DeltaConvention};
use fagp::posterior::{exact_posterior, fagp_posterior, woodbury_inverse, WoodburyPath};
use fagp::{ArdKernelParams, Backend, GpModel, KernelParams1D, Matrix};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl FromStr for Level {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            _ => Err(BenchError::usage(format!("unknown level `{s}` (fast or full)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{:<22} {status}  {:>7.3}s  {}", self.name, self.seconds, self.detail)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Break the FAGP mean pipeline on purpose.
    pub inject_fault: bool,
}

type Check = fn(Level, &VerifyOptions) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 6] = [
    ("oracle-equivalence", oracle_equivalence),
    ("woodbury", woodbury),
    ("reconstruction", reconstruction),
    ("orthonormality", orthonormality),
    ("path-equivalence", path_equivalence),
    ("backend-equivalence", backend_equivalence),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

pub fn run_verify(level: Level, opts: &VerifyOptions) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(level, opts) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence(level: Level, opts: &VerifyOptions) -> Result<(bool, String)> {
    let (n_train, n_test) = match level {
        Level::Fast => (200, 100),
        Level::Full => (1000, 200),
    };
    let dom = [Domain::default()];
    let train = generate(n_train, 1, 2024, 0.05, &dom)?;
    let test = test_inputs(n_test, 1, 2024, &dom)?;
    let mut model = GpModel::new(ArdKernelParams::isotropic(1.0, 1.0, 1)?, 1e-2, 1)?;
    model.options.inject_sign_fault = opts.inject_fault;
    let exact = exact_posterior(&train, &test, &model, false)?;
    let y_max = train.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut errs = Vec::new();
    for n in [5, 10, 15, 20, 25] {
        model.n_eigen = n;
        let approx = fagp_posterior(&train, &test, &model, &Backend::serial(), false)?;
        errs.push(max_abs_diff(&exact.mean, &approx.mean));
    }
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last = *errs.last().unwrap();
    let ok = monotone && last < 1e-3 * y_max;
    Ok((
        ok,
        format!(
            "max|Δμ| at n=25: {last:.3e} (limit {:.3e}), monotone: {monotone}",
            1e-3 * y_max
        ),
    ))
}

fn woodbury(_: Level, _: &VerifyOptions) -> Result<(bool, String)> {
    // Small LCG so the instances do not depend on the generator under test.
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = move || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let backend = Backend::serial();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = 5 + (next() * 36.0) as usize;
        let m = 1 + (next() * 10.0) as usize;
        let phi = Matrix::from_fn(n, m, |_, _| 2.0 * next() - 1.0);
        let lambda: Vec<f64> = (0..m).map(|_| 0.05 + 2.0 * next()).collect();
        let s2 = 0.05 + next();
        let mut scaled = phi.clone();
        scaled.scale_columns(&lambda);
        let mut direct = backend.gemm(&scaled, Op::N, &phi, Op::T)?;
        direct.add_diagonal(s2);
        let direct = Lu::factor(&direct)?.inverse()?;
        let wood = woodbury_inverse(&phi, &lambda, s2, &backend)?;
        worst = worst.max(wood.max_abs_diff(&direct) / direct.max_abs());
    }
    Ok((
        worst < 1e-8,
        format!("worst relative error over 20 instances: {worst:.3e}"),
    ))
}

fn reconstruction(_: Level, _: &VerifyOptions) -> Result<(bool, String)> {
    let x = Matrix::from_fn(21, 1, |i, _| -1.0 + i as f64 / 10.0);
    let params = ArdKernelParams::isotropic(1.0, 1.0, 1)?;
    let exact = gram_matrix(&x, &x, &params)?;
    let mut errs = Vec::new();
    for n in [2, 5, 10, 20, 30] {
        let es = eigensystem(&x, &params, n)?;
        errs.push(reconstruct_kernel(&es, &es)?.max_abs_diff(&exact));
    }
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last = *errs.last().unwrap();
    Ok((
        monotone && last < 1e-6,
        format!("max error at n=30: {last:.3e}, monotone: {monotone}"),
    ))
}

fn orthonormality(_: Level, _: &VerifyOptions) -> Result<(bool, String)> {
    let params = KernelParams1D::new(1.0, 1.0)?;
    let (n, nodes) = (10, 200);
    let rho = params.rho();
    let (a, b) = (-8.0 / rho, 8.0 / rho);
    let h = (b - a) / (nodes - 1) as f64;
    let mut g = vec![0.0; n * n];
    let mut phi = vec![0.0; n];
    for k in 0..nodes {
        let x = a + h * k as f64;
        let trap = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        let w = trap * h * rho / std::f64::consts::PI.sqrt() * (-rho * rho * x * x).exp();
        eigenfunctions_1d(x, &params, DeltaConvention::ScaleSquared, &mut phi);
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] += w * phi[i] * phi[j];
            }
        }
    }
    let worst = (0..n * n)
        .map(|k| (g[k] - if k / n == k % n { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-6, format!("max |<φi,φj> - δij|: {worst:.3e}")))
}

fn path_equivalence(_: Level, _: &VerifyOptions) -> Result<(bool, String)> {
    let train = generate(80, 1, 5, 0.05, &[])?;
    let test = test_inputs(20, 1, 5, &[])?;
    let model = GpModel::new(ArdKernelParams::isotropic(0.7, 1.0, 1)?, 0.05, 10)?;
    let a = fagp_posterior(&train, &test, &model, &Backend::serial(), false)?;
    let b = fagp_posterior(
        &train,
        &test,
        &model.clone().with_path(WoodburyPath::Literal),
        &Backend::serial(),
        false,
    )?;
    let scale = a.mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = max_abs_diff(&a.mean, &b.mean) / scale;
    Ok((rel < 1e-8, format!("scaled vs literal relative difference: {rel:.3e}")))
}

fn backend_equivalence(level: Level, _: &VerifyOptions) -> Result<(bool, String)> {
    let n_train = match level {
        Level::Fast => 2000,
        Level::Full => 5000,
    };
    let train = generate(n_train, 2, 17, 0.05, &[])?;
    let test = test_inputs(200, 2, 17, &[])?;
    let model = GpModel::new(ArdKernelParams::isotropic(1.0, 1.0, 2)?, 0.0025, 8)?;
    let serial = fagp_posterior(&train, &test, &model, &Backend::serial(), false)?;
    let par = Backend::parallel(8)?;
    let det = fagp_posterior(&train, &test, &model, &par, false)?;
    let loose = fagp_posterior(&train, &test, &model, &par.with_deterministic_reduction(false), false)?;
    let bitwise = serial.mean == det.mean;
    let rel = serial
        .mean
        .iter()
        .zip(&loose.mean)
        .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok((
        bitwise && rel < 1e-10,
        format!("deterministic bitwise: {bitwise}, unordered reduction rel diff: {rel:.3e}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suite_passes() {
        let results = run_verify(Level::Fast, &VerifyOptions::default());
        for r in &results {
            assert!(r.passed, "{r}");
        }
        assert_eq!(results.len(), check_names().len());
    }

    #[test]
    fn injected_fault_is_caught() {
        let results = run_verify(Level::Fast, &VerifyOptions { inject_fault: true });
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        assert_eq!(failed, vec!["oracle-equivalence"]);
    }
}
