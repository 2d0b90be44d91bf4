//! Helpers for exhaustive enumeration of `GF(p)^n`.
//!
//! Vectors are ranked big-endian: coordinate 0 is the most significant digit,
//! so all vectors sharing a prefix occupy one contiguous index range.

use crate::error::{Error, Result};

/// Default cap on the number of enumerated points.
pub const ENUMERATION_BUDGET: f64 = (1u64 << 24) as f64;

/// `p^n` as a float, so overflow cannot hide a budget violation.
pub fn space_size(p: usize, n: usize) -> f64 {
    (p as f64).powi(n as i32)
}

pub fn check_budget(what: &'static str, needed: f64, limit: f64) -> Result<()> {
    if needed > limit {
        return Err(Error::Budget { what, needed, limit });
    }
    Ok(())
}

pub fn rank(p: usize, v: &[u8]) -> usize {
    v.iter().fold(0, |acc, &s| acc * p + s as usize)
}

pub fn unrank(p: usize, mut k: usize, out: &mut [u8]) {
    for s in out.iter_mut().rev() {
        *s = (k % p) as u8;
        k /= p;
    }
}

/// Advances `v` to the next vector in big-endian order; false after the last.
pub fn advance(p: u8, v: &mut [u8]) -> bool {
    for s in v.iter_mut().rev() {
        *s += 1;
        if *s < p {
            return true;
        }
        *s = 0;
    }
    false
}

/// Calls `f` on every vector of `GF(p)^n` in big-endian order.
pub fn for_each_vector(p: u8, n: usize, mut f: impl FnMut(&[u8])) {
    let mut v = vec![0u8; n];
    loop {
        f(&v);
        if !advance(p, &mut v) {
            break;
        }
    }
}

/// All vectors of `GF(p)^n`, big-endian order.
pub fn all_vectors(p: u8, n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::with_capacity(space_size(p as usize, n) as usize);
    for_each_vector(p, n, |v| out.push(v.to_vec()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_matches_enumeration_order() {
        for (k, v) in all_vectors(3, 4).iter().enumerate() {
            assert_eq!(rank(3, v), k);
            let mut back = vec![0; 4];
            unrank(3, k, &mut back);
            assert_eq!(&back, v);
        }
        assert_eq!(all_vectors(2, 0), vec![Vec::<u8>::new()]);
    }
}
