//! Monte Carlo timing sweep over backend × p × n × repetition.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::io::Write;

use fagp::datagen::{generate, test_inputs, Domain};
use fagp::kernel::{EigenSystem, MemoryBudget, MercerOptions};
use fagp::posterior::fagp_from_eigen;
use fagp::{Backend, GpModel, Phase, TimingRecord};

use crate::config::BenchConfig;
use crate::error::{BenchError, Result};

pub const RESULTS_HEADER: &str = "backend,p,n,rep,phase,seconds";

/// Phase name of the row written when `(p, n)` exceeds the memory cap.
pub const SKIPPED_PHASE: &str = "skipped";

/// One timed (backend, p, n, rep) point.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub backend: String,
    pub p: usize,
    pub n: usize,
    pub rep: usize,
    pub record: TimingRecord,
}

#[derive(Debug, Default)]
pub struct BenchSummary {
    pub rows_written: usize,
    pub skipped: Vec<(String, usize, usize)>,
    /// Mean total seconds per (p, n, backend label).
    pub mean_totals: BTreeMap<(usize, usize, String), f64>,
}

impl BenchSummary {
    /// Serial mean total over each parallel mean total, per (p, n, parallel label).
    pub fn speedups(&self) -> Vec<(usize, usize, String, f64)> {
        let mut out = Vec::new();
        for ((p, n, label), t) in &self.mean_totals {
            if label == "serial" {
                continue;
            }
            if let Some(serial) = self.mean_totals.get(&(*p, *n, "serial".to_string())) {
                out.push((*p, *n, label.clone(), serial / t));
            }
        }
        out
    }
}

/// Times one prediction: staging, both eigensystems, the FAGP mean and copying it out.
pub fn time_prediction(backend: &Backend, cfg: &BenchConfig, p: usize, n: usize, rep: usize) -> Result<TimingRecord> {
    let seed = cfg.seed_base.wrapping_add(rep as u64);
    let domain = [Domain::default()];
    let train = generate(cfg.n_train, p, seed, cfg.noise_var.sqrt(), &domain)?;
    let xstar = test_inputs(cfg.n_test, p, seed, &domain)?;
    let model = GpModel::new(cfg.kernel(p)?, cfg.noise_var, n)?;
    let mercer = MercerOptions {
        budget: MemoryBudget::new(cfg.memory_cap),
        ..model.options.mercer
    };

    let record = TimingRecord::new(backend.label(), cfg.n_train, p, n, rep);
    let (x, y, xs) = record.time(Phase::Setup, || (train.x().clone(), train.y().to_vec(), xstar.clone()))?;
    let (es, es_star) = record.time(Phase::Eigen, || -> fagp::Result<_> {
        Ok((
            EigenSystem::build(&x, &model.kernel, n, &mercer, backend)?,
            EigenSystem::build(&xs, &model.kernel, n, &mercer, backend)?,
        ))
    })??;
    let post = record.time(Phase::Mean, || {
        fagp_from_eigen(&es, &y, &es_star, &model, backend, false)
    })??;
    let mean = record.time(Phase::Retrieve, || post.mean.clone())?;
    black_box(mean);
    Ok(record)
}

/// Runs the sweep, writing `backend,p,n,rep,phase,seconds` rows to `out` in
/// (backend, p, n, rep, phase) order. Everything but `seconds` is deterministic.
pub fn run_bench<W: Write>(
    cfg: &BenchConfig,
    mut out: W,
    mut progress: impl FnMut(&RunOutcome),
) -> Result<BenchSummary> {
    cfg.validate()?;
    let io = |e| BenchError::io("writing results", e);
    writeln!(out, "{RESULTS_HEADER}").map_err(io)?;
    let budget = MemoryBudget::new(cfg.memory_cap);
    let mut summary = BenchSummary::default();

    for spec in &cfg.backends {
        let backend = spec.build()?.with_memory_cap(cfg.memory_cap);
        let label = backend.label();
        for &p in &cfg.dims {
            for &n in cfg.eigen_counts_for(p) {
                if budget.check(cfg.n_train + cfg.n_test, n, p).is_err() {
                    writeln!(out, "{label},{p},{n},0,{SKIPPED_PHASE},-1").map_err(io)?;
                    summary.rows_written += 1;
                    summary.skipped.push((backend.label(), p, n));
                    continue;
                }
                let mut total = 0.0;
                for rep in 0..cfg.reps {
                    let record = time_prediction(&backend, cfg, p, n, rep)?;
                    for phase in Phase::ALL {
                        writeln!(out, "{label},{p},{n},{rep},{phase},{:.9}", record.seconds(phase)).map_err(io)?;
                        summary.rows_written += 1;
                    }
                    out.flush().map_err(io)?;
                    total += record.total();
                    progress(&RunOutcome {
                        backend: backend.label(),
                        p,
                        n,
                        rep,
                        record,
                    });
                }
                summary
                    .mean_totals
                    .insert((p, n, backend.label()), total / cfg.reps as f64);
            }
        }
    }
    Ok(summary)
}

/// `|backends| · Σ_p |eigen_counts(p)| · reps · 4`, not counting skip rows.
pub fn expected_rows(cfg: &BenchConfig) -> usize {
    let per_backend: usize = cfg.dims.iter().map(|&p| cfg.eigen_counts_for(p).len()).sum();
    cfg.backends.len() * per_backend * cfg.reps * Phase::ALL.len()
}
