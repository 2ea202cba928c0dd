//! Sweep configuration and its `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! n_train = 10000
//! n_test = 1000
//! dims = 1,2,4
//! eigen_counts = 1:8,16,32; 2:3,5,7; 4:2,3,4
//! reps = 10
//! backends = serial, parallel:8
//! epsilon = 1.0          # one value, or one per dimension
//! rho = 1.0
//! noise_var = 0.0025
//! seed_base = 1
//! memory_cap = 8GiB
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use fagp::{ArdKernelParams, Backend, KernelParams1D};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendSpec {
    Serial,
    /// `None` sizes the pool to the machine.
    Parallel(Option<usize>),
}

impl BackendSpec {
    pub fn build(self) -> Result<Backend> {
        Ok(match self {
            BackendSpec::Serial => Backend::serial(),
            BackendSpec::Parallel(Some(w)) => Backend::parallel(w)?,
            BackendSpec::Parallel(None) => Backend::parallel_auto()?,
        })
    }
}

impl FromStr for BackendSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "serial" => Ok(BackendSpec::Serial),
            None if s == "parallel" => Ok(BackendSpec::Parallel(None)),
            Some(("parallel", w)) => match w.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(BackendSpec::Parallel(Some(w))),
                _ => Err(BenchError::usage(format!("bad worker count in `{s}`"))),
            },
            _ => Err(BenchError::usage(format!(
                "unknown backend `{s}` (expected serial, parallel or parallel:K)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub dims: Vec<usize>,
    /// Eigenvalue counts per input dimension.
    pub eigen_counts: BTreeMap<usize, Vec<usize>>,
    pub reps: usize,
    pub backends: Vec<BackendSpec>,
    pub epsilon: Vec<f64>,
    pub rho: Vec<f64>,
    pub noise_var: f64,
    pub seed_base: u64,
    pub memory_cap: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let eigen_counts = BTreeMap::from([
            (1, vec![8, 16, 32, 64, 128]),
            (2, vec![3, 5, 7, 9, 11]),
            (4, vec![2, 3, 4, 5, 6, 7]),
        ]);
        BenchConfig {
            n_train: 10_000,
            n_test: 1_000,
            dims: vec![1, 2, 4],
            eigen_counts,
            reps: 10,
            backends: vec![BackendSpec::Serial, BackendSpec::Parallel(None)],
            epsilon: vec![1.0],
            rho: vec![1.0],
            noise_var: 0.0025,
            seed_base: 1,
            memory_cap: 8 << 30,
        }
    }
}

const FALLBACK_EIGEN_COUNTS: [usize; 3] = [2, 3, 4];

impl BenchConfig {
    pub fn eigen_counts_for(&self, p: usize) -> &[usize] {
        self.eigen_counts
            .get(&p)
            .map_or(&FALLBACK_EIGEN_COUNTS[..], Vec::as_slice)
    }

    pub fn kernel(&self, p: usize) -> Result<ArdKernelParams> {
        let pick = |v: &[f64], d: usize, name: &str| -> Result<f64> {
            match v.len() {
                1 => Ok(v[0]),
                k if d < k => Ok(v[d]),
                k => Err(BenchError::usage(format!(
                    "{name} has {k} values, need 1 or at least {p}"
                ))),
            }
        };
        let per_dim = (0..p)
            .map(|d| {
                let k = KernelParams1D::new(pick(&self.epsilon, d, "epsilon")?, pick(&self.rho, d, "rho")?)?;
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ArdKernelParams::new(per_dim)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("n_train", self.n_train), ("n_test", self.n_test), ("reps", self.reps)];
        for (name, v) in positive {
            if v == 0 {
                return Err(BenchError::usage(format!("{name} must be positive")));
            }
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(BenchError::usage("dims must be a non-empty list of positive integers"));
        }
        for &p in &self.dims {
            if self.eigen_counts_for(p).contains(&0) {
                return Err(BenchError::usage(format!("eigen count 0 for p={p}")));
            }
            self.kernel(p)?;
        }
        if self.backends.is_empty() {
            return Err(BenchError::usage("no backends selected"));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(BenchError::usage("noise_var must be positive"));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "n_train" => self.n_train = parse_num(key, value)?,
            "n_test" => self.n_test = parse_num(key, value)?,
            "dims" => self.dims = parse_list(key, value)?,
            "eigen_counts" => self.eigen_counts = parse_eigen_counts(value)?,
            "reps" => self.reps = parse_num(key, value)?,
            "backends" => self.backends = value.split(',').map(str::parse).collect::<Result<Vec<BackendSpec>>>()?,
            "epsilon" => self.epsilon = parse_list(key, value)?,
            "rho" => self.rho = parse_list(key, value)?,
            "noise_var" => self.noise_var = parse_num(key, value)?,
            "seed_base" => self.seed_base = parse_num(key, value)?,
            "memory_cap" => self.memory_cap = parse_bytes(value)?,
            other => return Err(BenchError::usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = BenchConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let to_config = |e: BenchError| BenchError::Config {
                line: i + 1,
                message: e.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| to_config(BenchError::usage(format!("expected `key = value`, got `{line}`"))))?;
            self.set(key, value).map_err(to_config)?;
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| BenchError::usage(format!("{}: cannot parse `{v}`", key.trim())))
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s)).collect()
}

/// `1:8,16; 2:3,5` → {1: [8, 16], 2: [3, 5]}.
pub fn parse_eigen_counts(v: &str) -> Result<BTreeMap<usize, Vec<usize>>> {
    let mut out = BTreeMap::new();
    for group in v.split(';').map(str::trim).filter(|g| !g.is_empty()) {
        let (p, counts) = group
            .split_once(':')
            .ok_or_else(|| BenchError::usage(format!("eigen_counts group `{group}` lacks `p:`")))?;
        let p: usize = parse_num("eigen_counts", p)?;
        out.insert(p, parse_list("eigen_counts", counts)?);
    }
    Ok(out)
}

/// Plain bytes or with a `KiB`/`MiB`/`GiB` suffix.
pub fn parse_bytes(v: &str) -> Result<u64> {
    let v = v.trim();
    let (num, shift) = [("KiB", 10), ("MiB", 20), ("GiB", 30)]
        .iter()
        .find_map(|(suf, sh)| v.strip_suffix(suf).map(|n| (n.trim(), *sh)))
        .unwrap_or((v, 0));
    let n: u64 = parse_num("memory_cap", num)?;
    n.checked_mul(1 << shift)
        .ok_or_else(|| BenchError::usage(format!("memory_cap `{v}` overflows")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = BenchConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_train, 10_000);
        assert_eq!(cfg.dims, vec![1, 2, 4]);
    }

    #[test]
    fn parses_all_keys() {
        let cfg = BenchConfig::parse(
            "# sweep\nn_train = 200\nn_test=20\ndims = 1, 2\neigen_counts = 1:3,4; 2:2\nreps = 2\n\
             backends = serial,parallel:3\nepsilon = 1.0, 0.5\nrho = 1\nnoise_var = 1e-2\nseed_base = 9\nmemory_cap = 1MiB\n",
        )
        .unwrap();
        assert_eq!(cfg.n_train, 200);
        assert_eq!(cfg.eigen_counts_for(1), &[3, 4]);
        assert_eq!(cfg.eigen_counts_for(2), &[2]);
        assert_eq!(cfg.backends, vec![BackendSpec::Serial, BackendSpec::Parallel(Some(3))]);
        assert_eq!(cfg.memory_cap, 1 << 20);
        assert_eq!(cfg.kernel(2).unwrap().get(1).epsilon(), 0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_reports_line() {
        match BenchConfig::parse("reps = 2\nbogus = 1\n") {
            Err(BenchError::Config { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(BenchConfig::parse("reps 2\n").is_err());
        assert!(BenchConfig::parse("reps = two\n").is_err());
    }

    #[test]
    fn backend_specs() {
        assert_eq!("serial".parse::<BackendSpec>().unwrap(), BackendSpec::Serial);
        assert_eq!("parallel".parse::<BackendSpec>().unwrap(), BackendSpec::Parallel(None));
        assert!("parallel:0".parse::<BackendSpec>().is_err());
        assert!("gpu".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn validation_failures() {
        let bad = [
            BenchConfig {
                dims: vec![0],
                ..BenchConfig::default()
            },
            BenchConfig {
                epsilon: vec![1.0, 2.0],
                ..BenchConfig::default()
            },
            BenchConfig {
                reps: 0,
                ..BenchConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn byte_suffixes() {
        assert_eq!(parse_bytes("1048576").unwrap(), 1 << 20);
        assert_eq!(parse_bytes("8GiB").unwrap(), 8 << 30);
        assert_eq!(parse_bytes("4 KiB").unwrap(), 4096);
        assert!(parse_bytes("lots").is_err());
    }
}
