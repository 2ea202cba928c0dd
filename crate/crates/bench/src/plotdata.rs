//! Aggregates sweep results into one plot-ready table per input dimension.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use fagp::Phase;

use crate::bench::{RESULTS_HEADER, SKIPPED_PHASE};
use crate::error::{BenchError, Result};

pub const PLOT_HEADER: &str =
    "backend,n,mean_total_s,std_total_s,mean_eigen_s,mean_mean_s,mean_setup_s,mean_retrieve_s,reps";

pub fn plot_file_name(p: usize) -> String {
    format!("plot_p{p}.csv")
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub backend: String,
    pub n: usize,
    pub mean_total: f64,
    pub std_total: f64,
    pub mean_phase: [f64; 4],
    pub reps: usize,
}

#[derive(Default)]
struct Group {
    // rep -> per-phase seconds
    reps: BTreeMap<usize, [f64; 4]>,
}

/// Per `p`, rows ordered by first appearance of `(backend, n)` in the input.
pub type Aggregate = BTreeMap<usize, Vec<AggregateRow>>;

pub fn aggregate<R: BufRead>(input: R) -> Result<Aggregate> {
    let parse_err = |line: usize, message: String| BenchError::Core(fagp::Error::Parse { line, message });
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty results file".into()))?
        .map_err(|e| BenchError::io("reading results", e))?;
    if header.trim_end() != RESULTS_HEADER {
        return Err(parse_err(1, format!("expected header `{RESULTS_HEADER}`")));
    }

    let mut order: Vec<(usize, String, usize)> = Vec::new();
    let mut groups: BTreeMap<(usize, String, usize), Group> = BTreeMap::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line.map_err(|e| BenchError::io("reading results", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(line_no, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| parse_err(line_no, format!("bad number `{}`", f[i])))
        };
        let int = |i: usize| -> Result<usize> {
            f[i].parse()
                .map_err(|_| parse_err(line_no, format!("bad integer `{}`", f[i])))
        };
        let (p, n, rep) = (int(1)?, int(2)?, int(3)?);
        if f[4] == SKIPPED_PHASE {
            continue;
        }
        let phase: Phase = f[4]
            .parse()
            .map_err(|_| parse_err(line_no, format!("unknown phase `{}`", f[4])))?;
        let key = (p, f[0].to_string(), n);
        let group = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Group::default()
        });
        group.reps.entry(rep).or_default()[phase as usize] += num(5)?;
    }

    let mut out: Aggregate = BTreeMap::new();
    for key in order {
        let group = &groups[&key];
        let totals: Vec<f64> = group.reps.values().map(|s| s.iter().sum()).collect();
        let (mean_total, std_total) = mean_std(&totals);
        let mut mean_phase = [0.0; 4];
        for s in group.reps.values() {
            for (m, v) in mean_phase.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean_phase.iter_mut().for_each(|m| *m /= totals.len() as f64);
        let (p, backend, n) = key;
        out.entry(p).or_default().push(AggregateRow {
            backend,
            n,
            mean_total,
            std_total,
            mean_phase,
            reps: totals.len(),
        });
    }
    Ok(out)
}

/// Arithmetic mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_plot<W: Write>(rows: &[AggregateRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{PLOT_HEADER}")?;
    for r in rows {
        let [setup, eigen, mean, retrieve] = r.mean_phase;
        writeln!(
            w,
            "{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{}",
            r.backend, r.n, r.mean_total, r.std_total, eigen, mean, setup, retrieve, r.reps
        )?;
    }
    Ok(())
}
