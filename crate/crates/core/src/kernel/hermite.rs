//! Physicists' Hermite polynomials.

/// `H_n(z)` by the three-term recurrence `H_{k+1} = 2z H_k - 2k H_{k-1}`.
///
/// Overflows for large `n` and `|z|`; [`normalized`] is the stable variant.
pub fn hermite(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = H_k(z) / sqrt(2^k k!)` for `k < out.len()`.
///
/// Uses `h_{k+1} = z sqrt(2/(k+1)) h_k - sqrt(k/(k+1)) h_{k-1}`, which keeps
/// values of order `exp(z²/2)` instead of letting `H_k` and the normalizer
/// overflow separately.
pub fn normalized(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = z * std::f64::consts::SQRT_2;
    for k in 1..out.len() - 1 {
        let kf = k as f64;
        out[k + 1] = z * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}
