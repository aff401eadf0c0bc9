//! Cyclic correlation inner loops shared by codebook validation and detection.

use crate::sample::Sample;

/// Raw cyclic correlation at every lag: `out[lag] = sum_p a[p] * b[(p - lag) mod n]`.
///
/// With this orientation, an accumulator holding `b` cyclically delayed by `d`
/// (chip k at position (k + d) mod n) peaks exactly at `lag == d`.
pub(crate) fn cyclic_corr_raw<S: Sample>(a: &[S], b: &[S]) -> Vec<S> {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let mut out = Vec::with_capacity(n);
    for lag in 0..n {
        let mut sum = S::zero();
        let mut bi = n - lag;
        if bi == n {
            bi = 0;
        }
        for &av in a.iter() {
            sum = sum + av * b[bi];
            bi += 1;
            if bi == n {
                bi = 0;
            }
        }
        out.push(sum);
    }
    out
}

pub(crate) fn norm<S: Sample>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt()
}
