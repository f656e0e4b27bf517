//! Small numeric helpers shared across the solver and the belief filter.
//!
//! Everything that exponentiates goes through the max-shift trick so that
//! temperatures down to the hard-max cutoff stay finite.

/// Stable `log(sum(exp(xs)))`.
///
/// Returns `-inf` for an all-`-inf` (or empty) input rather than NaN, which
/// is the convention the belief filter relies on.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // Either empty, all -inf (no mass anywhere), or something is NaN/+inf;
        // propagating the max covers all three honestly.
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Smooth maximum `beta * log(sum(exp(q / beta)))`, computed as
/// `m + beta * log(sum(exp((q - m) / beta)))` with `m = max(q)`.
///
/// Approaches `max(q)` as `beta -> 0` and `max(q) + beta*ln(len)` for flat rows.
pub fn smooth_max(q: &[f64], beta: f64) -> f64 {
    debug_assert!(beta > 0.0, "smooth_max needs a positive temperature");
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = q.iter().map(|&x| ((x - m) / beta).exp()).sum();
    m + beta * sum.ln()
}

/// Log-probabilities of the Boltzmann distribution `softmax(q / beta)`.
///
/// Row entries are always <= 0 and `logsumexp` of the result is 0, so the
/// exponentiated row sums to 1 regardless of the scale of `q`.
pub fn log_softmax_scaled(q: &[f64], beta: f64) -> Vec<f64> {
    let lse = smooth_max(q, beta);
    q.iter().map(|&x| (x - lse) / beta).collect()
}

/// Indices attaining the row maximum, with a small relative slack so that
/// symmetric constructions that differ only in rounding still count as ties.
pub fn argmax_set(q: &[f64]) -> Vec<usize> {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * (1.0 + m.abs());
    q.iter()
        .enumerate()
        .filter(|(_, &x)| x >= m - tol)
        .map(|(i, _)| i)
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
