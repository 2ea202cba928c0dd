//! Per-phase wall-clock accounting for one benchmark repetition.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};

/// The four timed stages of a prediction run.
///
/// `Setup` and `Retrieve` cover input staging and result materialization; on
/// CPU backends they are small but always recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Setup,
    Eigen,
    Mean,
    Retrieve,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Setup, Phase::Eigen, Phase::Mean, Phase::Retrieve];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::Eigen => "eigen",
            Phase::Mean => "mean",
            Phase::Retrieve => "retrieve",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param(format!("unknown phase `{s}`")))
    }
}

/// Timings of one repetition. Single-owner: the interior cells make it `!Sync`.
#[derive(Debug, Clone)]
pub struct TimingRecord {
    pub backend: String,
    pub n_samples: usize,
    pub dim: usize,
    pub n_eigen: usize,
    pub rep: usize,
    seconds: [Cell<f64>; 4],
    open: Cell<Option<Phase>>,
}

impl TimingRecord {
    pub fn new(backend: impl Into<String>, n_samples: usize, dim: usize, n_eigen: usize, rep: usize) -> Self {
        TimingRecord {
            backend: backend.into(),
            n_samples,
            dim,
            n_eigen,
            rep,
            seconds: Default::default(),
            open: Cell::new(None),
        }
    }

    /// Starts timing `phase` until the returned scope is dropped.
    ///
    /// Scopes do not nest: opening any phase while another is open is an error.
    /// Sequential scopes of the same phase add up.
    pub fn phase_scope(&self, phase: Phase) -> Result<PhaseScope<'_>> {
        if let Some(current) = self.open.get() {
            return Err(Error::Usage(format!(
                "cannot enter phase `{phase}` while `{current}` is open"
            )));
        }
        self.open.set(Some(phase));
        Ok(PhaseScope {
            record: self,
            phase,
            start: Instant::now(),
        })
    }

    /// Times `f` under `phase`.
    pub fn time<R>(&self, phase: Phase, f: impl FnOnce() -> R) -> Result<R> {
        let _scope = self.phase_scope(phase)?;
        Ok(f())
    }

    pub fn seconds(&self, phase: Phase) -> f64 {
        self.seconds[phase.slot()].get()
    }

    pub fn total(&self) -> f64 {
        Phase::ALL.iter().map(|&p| self.seconds(p)).sum()
    }
}

pub struct PhaseScope<'a> {
    record: &'a TimingRecord,
    phase: Phase,
    start: Instant,
}

impl Drop for PhaseScope<'_> {
    fn drop(&mut self) {
        let cell = &self.record.seconds[self.phase.slot()];
        cell.set(cell.get() + self.start.elapsed().as_secs_f64());
        self.record.open.set(None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread::sleep;
    use std::time::Duration;

    #[test]
    fn unused_phase_is_zero() {
        let r = TimingRecord::new("serial", 10, 1, 3, 0);
        for p in Phase::ALL {
            assert_eq!(r.seconds(p), 0.0);
        }
        assert_eq!(r.total(), 0.0);
    }

    #[test]
    fn sequential_scopes_accumulate() {
        let r = TimingRecord::new("serial", 10, 1, 3, 0);
        r.time(Phase::Mean, || sleep(Duration::from_millis(5))).unwrap();
        let first = r.seconds(Phase::Mean);
        r.time(Phase::Mean, || sleep(Duration::from_millis(5))).unwrap();
        assert!(r.seconds(Phase::Mean) > first);
        assert!(r.seconds(Phase::Mean) >= 0.010);
        assert_eq!(r.total(), r.seconds(Phase::Mean));
    }

    #[test]
    fn sleep_smoke() {
        let r = TimingRecord::new("serial", 10, 1, 3, 0);
        r.time(Phase::Eigen, || sleep(Duration::from_millis(50))).unwrap();
        let ms = r.seconds(Phase::Eigen) * 1e3;
        assert!((45.0..=500.0).contains(&ms), "{ms} ms");
    }

    #[test]
    fn nesting_is_rejected() {
        let r = TimingRecord::new("serial", 10, 1, 3, 0);
        let outer = r.phase_scope(Phase::Setup).unwrap();
        assert!(matches!(r.phase_scope(Phase::Setup), Err(Error::Usage(_))));
        assert!(matches!(r.phase_scope(Phase::Eigen), Err(Error::Usage(_))));
        drop(outer);
        assert!(r.phase_scope(Phase::Eigen).is_ok());
    }

    #[test]
    fn phase_names_round_trip() {
        for p in Phase::ALL {
            assert_eq!(p.name().parse::<Phase>().unwrap(), p);
        }
        assert!("skipped".parse::<Phase>().is_err());
    }
}
