//! Mann-Whitney U test.
//!
//! Exact two-sided p-values come from the null distribution of U (all
//! `C(n_a + n_b, n_a)` rank arrangements counted by recurrence) when the pooled
//! size is at most [`EXACT_MAX_N`] and there are no ties. Otherwise the normal
//! approximation with tie and continuity corrections is used.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreaterIn {
    SampleA,
    SampleB,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MwuMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwuResult {
    /// U of `sample_a`: its rank sum minus `n_a (n_a + 1) / 2`.
    pub u: f64,
    pub p_two_sided: f64,
    /// Sample with the larger mean rank.
    pub greater_in: GreaterIn,
    pub method: MwuMethod,
}

/// Midranks (1-based) of the pooled values; also returns the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // positions i..j share the mean of ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of rank arrangements giving each U value, for sizes `m` and `n`
/// (index = U, length `m*n + 1`).
pub fn u_null_counts(m: usize, n: usize) -> Vec<u64> {
    // counts[j][u] for the current m, built up from m = 0
    let mut prev: Vec<Vec<u64>> = (0..=n).map(|_| vec![1u64]).collect();
    for mi in 1..=m {
        let mut cur: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1u64]);
        for ni in 1..=n {
            let len = mi * ni + 1;
            let mut row = vec![0u64; len];
            // f(mi, ni, u) = f(mi-1, ni, u-ni) + f(mi, ni-1, u)
            for (u, slot) in row.iter_mut().enumerate() {
                let a = if u >= ni {
                    prev[ni].get(u - ni).copied().unwrap_or(0)
                } else {
                    0
                };
                let b = cur[ni - 1].get(u).copied().unwrap_or(0);
                *slot = a + b;
            }
            cur.push(row);
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

pub fn mann_whitney_u(sample_a: &[f64], sample_b: &[f64]) -> Result<MwuResult> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample_a.iter().chain(sample_b).any(|x| x.is_nan()) {
        return Err(Error::NonFinite("NaN in Mann-Whitney sample".into()));
    }
    let (na, nb) = (sample_a.len(), sample_b.len());
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let rank_sum_b: f64 = ranks[na..].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;

    // mean-rank comparison without division: R_a / n_a vs R_b / n_b
    let lhs = rank_sum_a * nb as f64;
    let rhs = rank_sum_b * na as f64;
    let greater_in = if lhs > rhs {
        GreaterIn::SampleA
    } else if lhs < rhs {
        GreaterIn::SampleB
    } else {
        GreaterIn::Neither
    };

    let n = na + nb;
    if n <= EXACT_MAX_N && ties.is_empty() {
        let counts = u_null_counts(na, nb);
        let total: u64 = counts.iter().sum();
        let u_int = u.round() as usize;
        let le: u64 = counts[..=u_int].iter().sum();
        let ge: u64 = counts[u_int..].iter().sum();
        let p = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
        return Ok(MwuResult {
            u,
            p_two_sided: p,
            greater_in,
            method: MwuMethod::Exact,
        });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let mean = naf * nbf / 2.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MwuResult {
        u,
        p_two_sided: p,
        greater_in,
        method: MwuMethod::Normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_exact() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, MwuMethod::Exact);
        // enumerate C(4,2) = 6 arrangements; U=0 occurs once, so 2 * 1/6
        assert!((r.p_two_sided - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.greater_in, GreaterIn::SampleB);
    }

    #[test]
    fn null_counts_small() {
        assert_eq!(u_null_counts(2, 2), vec![1, 1, 2, 1, 1]);
        assert_eq!(u_null_counts(1, 3), vec![1, 1, 1, 1]);
        assert_eq!(u_null_counts(0, 3), vec![1]);
        let c = u_null_counts(5, 7);
        assert_eq!(c.iter().sum::<u64>(), 792);
        // symmetric about m*n/2
        assert!(c.iter().eq(c.iter().rev()));
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 4.0, 1.5, 9.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
        assert_eq!(r.greater_in, GreaterIn::Neither);
        let r = mann_whitney_u(&[2.0; 4], &[2.0; 6]).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn strongly_shifted() {
        let a: Vec<f64> = (10..=20).map(f64::from).collect();
        let b: Vec<f64> = (0..=5).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u, 66.0);
        assert!(r.p_two_sided < 0.01);
        assert_eq!(r.greater_in, GreaterIn::SampleA);
    }

    #[test]
    fn ties_use_midranks() {
        let r = mann_whitney_u(&[1.0, 2.0, 2.0], &[2.0, 3.0]).unwrap();
        // ranks: 1, 3, 3 | 3, 5  -> R_a = 7, U_a = 1
        assert_eq!(r.u, 1.0);
        assert_eq!(r.method, MwuMethod::Normal);
    }

    #[test]
    fn empty_sample_errors() {
        assert!(matches!(
            mann_whitney_u(&[], &[1.0]),
            Err(Error::EmptySample)
        ));
    }
}
