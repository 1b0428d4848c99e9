//! Kendall's tau with ties scored as zero.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// `τ = (1/(C(C−1))) Σ_{i≠j} sign(a_i−a_j)·sign(b_i−b_j)`.
///
/// Tied pairs in either argument contribute zero, so `τ` is *not* the
/// tie-corrected tau-b. Runs in `O(C log C)` using Knight's merge-sort count.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!("kendall_tau length mismatch: {} vs {}", a.len(), b.len())));
    }
    let c = a.len();
    if c < 2 {
        return Err(Error::validation("kendall_tau needs at least two items"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("kendall_tau inputs must be finite"));
    }

    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let pairs = |t: i64| t * (t - 1) / 2;
    let (mut ties_a, mut ties_joint) = (0i64, 0i64);
    let (mut run_a, mut run_joint) = (1i64, 1i64);
    for w in order.windows(2) {
        let (p, q) = (w[0], w[1]);
        if a[p] == a[q] {
            run_a += 1;
            if b[p] == b[q] {
                run_joint += 1;
            } else {
                ties_joint += pairs(run_joint);
                run_joint = 1;
            }
        } else {
            ties_a += pairs(run_a);
            ties_joint += pairs(run_joint);
            run_a = 1;
            run_joint = 1;
        }
    }
    ties_a += pairs(run_a);
    ties_joint += pairs(run_joint);

    let mut seq: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let mut buf = seq.clone();
    let swaps = merge_count(&mut seq, &mut buf);

    let mut ties_b = 0i64;
    let mut run_b = 1i64;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            run_b += 1;
        } else {
            ties_b += pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += pairs(run_b);

    let total = pairs(c as i64);
    let concordant_minus_discordant = total - ties_a - ties_b + ties_joint - 2 * swaps;
    Ok((2 * concordant_minus_discordant) as f64 / (c as i64 * (c as i64 - 1)) as f64)
}

/// Sorts `v` ascending, returning the number of strictly inverted pairs.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(left, bl) + merge_count(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}
