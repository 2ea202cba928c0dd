//! Synthetic regression data `y = Σ_d cos(x_d) + ν`, `ν ~ N(0, σ²)`, and its
//! CSV form.
//!
//! Randomness comes from ChaCha8 seeded with the dataset seed. Independent
//! streams of the same seed are used for training inputs, noise and test
//! inputs, so changing the noise level never moves the inputs.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const STREAM_TRAIN_INPUTS: u64 = 0;
const STREAM_TEST_INPUTS: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Closed interval `[lo, hi]`; `lo == hi` pins the coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    lo: f64,
    hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::param(format!("invalid domain [{lo}, {hi}]")));
        }
        Ok(Domain { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        let v = self.lo + (self.hi - self.lo) * u;
        v.min(self.hi)
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain { lo: -1.0, hi: 1.0 }
    }
}

pub const DEFAULT_NOISE_STD: f64 = 0.05;

/// How a generated dataset came to be.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationMeta {
    pub noise_std: f64,
    pub seed: u64,
    pub domain: Vec<Domain>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    meta: Option<GenerationMeta>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::param("dataset needs at least one sample"));
        }
        if x.cols() == 0 {
            return Err(Error::param("dataset needs at least one input dimension"));
        }
        if x.rows() != y.len() {
            return Err(Error::dims(format!("{} input rows but {} targets", x.rows(), y.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite target at row {i}")));
        }
        Ok(Dataset { x, y, meta: None })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Present for generated datasets, absent for loaded ones.
    pub fn meta(&self) -> Option<&GenerationMeta> {
        self.meta.as_ref()
    }
}

/// Noise-free target.
pub fn target(x: &[f64]) -> f64 {
    x.iter().map(|v| v.cos()).sum()
}

/// `domain` holds either one interval for all dimensions or one per dimension.
pub fn generate(n_samples: usize, dim: usize, seed: u64, noise_std: f64, domain: &[Domain]) -> Result<Dataset> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::param(format!("noise std must be >= 0, got {noise_std}")));
    }
    let domain = broadcast(domain, dim)?;
    let x = sample_inputs(n_samples, &domain, seed, STREAM_TRAIN_INPUTS)?;
    let mut noise = stream(seed, STREAM_NOISE);
    let y = (0..n_samples)
        .map(|i| {
            let nu: f64 = noise.sample(StandardNormal);
            target(x.row(i)) + noise_std * nu
        })
        .collect();
    let mut ds = Dataset::new(x, y)?;
    ds.meta = Some(GenerationMeta {
        noise_std,
        seed,
        domain,
    });
    Ok(ds)
}

/// Uniform test inputs, drawn from a stream independent of [`generate`]'s.
pub fn test_inputs(n_points: usize, dim: usize, seed: u64, domain: &[Domain]) -> Result<Matrix> {
    let domain = broadcast(domain, dim)?;
    sample_inputs(n_points, &domain, seed, STREAM_TEST_INPUTS)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn broadcast(domain: &[Domain], dim: usize) -> Result<Vec<Domain>> {
    if dim == 0 {
        return Err(Error::param("dimension must be >= 1"));
    }
    match domain.len() {
        0 => Ok(vec![Domain::default(); dim]),
        1 => Ok(vec![domain[0]; dim]),
        k if k == dim => Ok(domain.to_vec()),
        k => Err(Error::dims(format!("{k} domains for {dim} dimensions"))),
    }
}

fn sample_inputs(n: usize, domain: &[Domain], seed: u64, id: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let mut rng = stream(seed, id);
    let p = domain.len();
    let data = (0..n * p).map(|k| domain[k % p].sample(&mut rng)).collect();
    Matrix::from_vec(n, p, data)
}

/// Conventional file name used by the benchmark runner.
pub fn dataset_file_name(n_samples: usize, dim: usize, seed: u64) -> String {
    format!("train_N{n_samples}_p{dim}_seed{seed}.csv")
}

/// Header `x1,...,xp,y`, one row per sample, 17 significant digits.
pub fn write_csv<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    let header: Vec<String> = (1..=ds.dim()).map(|d| format!("x{d}")).collect();
    writeln!(w, "{},y", header.join(","))?;
    for i in 0..ds.len() {
        for v in ds.x.row(i) {
            write!(w, "{},", fmt_f64(*v))?;
        }
        writeln!(w, "{}", fmt_f64(ds.y[i]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_csv(ds, BufWriter::new(file))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(BufReader::new(fs::File::open(path)?))
}

pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
    let (x, y) = read_table(r, true)?;
    Dataset::new(x, y.expect("targets requested")).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })
}

/// Reads a CSV of inputs only: header `x1,...,xp`, optionally followed by a
/// `y` column that is ignored.
pub fn read_inputs_csv<R: Read>(r: R) -> Result<Matrix> {
    let (x, _) = read_table(r, false)?;
    if x.rows() == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(x)
}

/// Shortest round-trip text with at least 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_table<R: Read>(r: R, need_y: bool) -> Result<(Matrix, Option<Vec<f64>>)> {
    let mut lines = BufReader::new(r).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::Parse {
                line: 0,
                message: "empty file".into(),
            })
        }
    };
    let names: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    let has_y = names.last() == Some(&"y");
    let p = if has_y { names.len() - 1 } else { names.len() };
    let well_formed = p >= 1 && names[..p].iter().enumerate().all(|(d, n)| *n == format!("x{}", d + 1));
    if !well_formed || (need_y && !has_y) {
        let expect = if need_y { "x1,...,xp,y" } else { "x1,...,xp[,y]" };
        return Err(Error::Parse {
            line: 1,
            message: format!("malformed header `{header}`, expected {expect}"),
        });
    }

    let width = names.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("field {} is not a number: `{f}`", c + 1),
            })?;
            if c < p {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let rows = xs.len() / p;
    let x = Matrix::from_vec(rows, p, xs)?;
    Ok((x, has_y.then_some(ys)))
}
