use crate::error::{Error, Result};

/// Memory cap for the `n^p` tensor expansion.
///
/// The estimate is `8 · (N·n^p + n^{2p} + 2·n^p)` bytes: the feature matrix, one
/// dense `n^p × n^p` system and two `n^p` vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub cap_bytes: u64,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget { cap_bytes: 8 << 30 }
    }
}

impl MemoryBudget {
    pub fn new(cap_bytes: u64) -> Self {
        MemoryBudget { cap_bytes }
    }

    pub fn unlimited() -> Self {
        MemoryBudget { cap_bytes: u64::MAX }
    }

    /// `n^p`, or `None` if it does not fit in `u128`.
    pub fn feature_count(n: usize, p: usize) -> Option<u128> {
        let p = u32::try_from(p).ok()?;
        (n as u128).checked_pow(p)
    }

    /// Estimated bytes for `rows` samples, saturating at `u128::MAX`.
    pub fn estimate_bytes(rows: usize, n: usize, p: usize) -> u128 {
        let Some(m) = Self::feature_count(n, p) else {
            return u128::MAX;
        };
        let words = (rows as u128)
            .checked_mul(m)
            .and_then(|a| m.checked_mul(m).and_then(|b| a.checked_add(b)))
            .and_then(|s| s.checked_add(2 * m));
        words.and_then(|w| w.checked_mul(8)).unwrap_or(u128::MAX)
    }

    /// Returns `n^p` when the expansion for `rows` samples fits.
    pub fn check(&self, rows: usize, n: usize, p: usize) -> Result<usize> {
        let count = Self::feature_count(n, p).unwrap_or(u128::MAX);
        let required_bytes = Self::estimate_bytes(rows, n, p);
        if required_bytes > self.cap_bytes as u128 || count > usize::MAX as u128 {
            return Err(Error::BudgetExceeded {
                n,
                p,
                count,
                required_bytes,
                cap_bytes: self.cap_bytes,
            });
        }
        Ok(count as usize)
    }
}
