//! One-shot fit/predict from CSV to CSV.

use std::io::Write;

use fagp::datagen::fmt_f64;
use fagp::posterior::{exact_posterior, fagp_posterior};
use fagp::{Backend, Dataset, GpModel, Matrix, PosteriorResult};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Fagp,
    Exact,
}

pub fn predict(
    train: &Dataset,
    xstar: &Matrix,
    model: &GpModel,
    backend: &Backend,
    method: Method,
    want_variance: bool,
) -> Result<PosteriorResult> {
    Ok(match method {
        Method::Fagp => fagp_posterior(train, xstar, model, backend, want_variance)?,
        Method::Exact => exact_posterior(train, xstar, model, want_variance)?,
    })
}

/// Header `x1,...,xp,mean[,variance]`.
pub fn write_predictions<W: Write>(xstar: &Matrix, result: &PosteriorResult, mut w: W) -> std::io::Result<()> {
    let mut header: Vec<String> = (1..=xstar.cols()).map(|d| format!("x{d}")).collect();
    header.push("mean".into());
    let variance = result.variance();
    if variance.is_some() {
        header.push("variance".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..xstar.rows() {
        let mut fields: Vec<String> = xstar.row(i).iter().map(|v| fmt_f64(*v)).collect();
        fields.push(fmt_f64(result.mean[i]));
        if let Some(v) = &variance {
            fields.push(fmt_f64(v[i]));
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()
}
