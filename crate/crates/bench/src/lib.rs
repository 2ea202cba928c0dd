//! Benchmark and verification harness around the `fagp` library.

pub mod bench;
pub mod config;
pub mod error;
pub mod plotdata;
pub mod predict;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use fagp::datagen::{dataset_file_name, generate, save_csv, Domain};

use crate::error::{BenchError, Result};

/// Writes `train_N{N}_p{p}_seed{S}.csv` for every `p` in `dims` and every seed
/// in `seed_start .. seed_start + n_seeds`. Returns the written paths.
pub fn generate_datasets(
    out_dir: &Path,
    n_samples: usize,
    dims: &[usize],
    seed_start: u64,
    n_seeds: u64,
    noise_std: f64,
    domain: Domain,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| BenchError::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    for &p in dims {
        for seed in seed_start..seed_start + n_seeds {
            let ds = generate(n_samples, p, seed, noise_std, &[domain])?;
            let path = out_dir.join(dataset_file_name(n_samples, p, seed));
            save_csv(&ds, &path).map_err(|e| match e {
                fagp::Error::Io(io) => BenchError::io(format!("writing {}", path.display()), io),
                other => other.into(),
            })?;
            written.push(path);
        }
    }
    Ok(written)
}
