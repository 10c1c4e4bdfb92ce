//! Binomial coefficients and the lexicographic combinatorial number system.
//!
//! A `k`-subset `{p_0 < p_1 < ... < p_{k-1}}` of `{0, .., n-1}` is ranked by its
//! position in the lexicographic enumeration of all `k`-subsets, so index 0 is
//! `{0, 1, .., k-1}` and index `C(n,k) - 1` is `{n-k, .., n-1}`.

use crate::error::{Error, Result};

/// `C(n, k)` as `u128`, or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays exact because acc = C(n, i) * ... is divisible
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `ln C(n, k)` via the log-gamma-free sum, used when `C(n, k)` overflows `u128`.
fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Number of information bits carried by the support of a `k`-sparse vector of
/// length `n`: `floor(log2 C(n, k))`.
pub fn svc_capacity(n: usize, k: usize) -> Result<u32> {
    if k > n {
        return Err(Error::Domain(format!("sparsity k={k} exceeds length n={n}")));
    }
    match binomial(n as u64, k as u64) {
        Some(c) => Ok(127 - c.leading_zeros()),
        None => {
            // Only reachable far beyond u128; the float estimate is exact to the
            // floor except when log2 C(n,k) sits within 1e-9 of an integer.
            Ok((ln_binomial(n as u64, k as u64) / std::f64::consts::LN_2).floor() as u32)
        }
    }
}

/// Table of `C(i, j)` for `i <= n`, `j <= k`, used by the rank/unrank routines.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    n: usize,
    k: usize,
    rows: Vec<u128>,
}

impl BinomialTable {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::Domain(format!("sparsity k={k} exceeds length n={n}")));
        }
        let mut rows = vec![0u128; (n + 1) * (k + 1)];
        for i in 0..=n {
            rows[i * (k + 1)] = 1;
            for j in 1..=k.min(i) {
                let a = rows[(i - 1) * (k + 1) + j - 1];
                let b = if j < i { rows[(i - 1) * (k + 1) + j] } else { 0 };
                rows[i * (k + 1) + j] = a
                    .checked_add(b)
                    .ok_or_else(|| Error::Domain(format!("C({n},{k}) overflows u128")))?;
            }
        }
        Ok(Self { n, k, rows })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u128 {
        if j > i || j > self.k || i > self.n {
            0
        } else {
            self.rows[i * (self.k + 1) + j]
        }
    }

    /// `C(n, k)`, the number of supports.
    pub fn count(&self) -> u128 {
        self.get(self.n, self.k)
    }

    /// Support (sorted ascending) at lexicographic rank `index`.
    pub fn index_to_support(&self, index: u128) -> Result<Vec<usize>> {
        let (n, k) = (self.n, self.k);
        if index >= self.count() {
            return Err(Error::Domain(format!(
                "index {index} out of range for C({n},{k}) = {}",
                self.count()
            )));
        }
        let mut rest = index;
        let mut support = Vec::with_capacity(k);
        let mut next = 0usize;
        for slot in 0..k {
            let remaining = k - slot - 1;
            // Skip candidates whose block of completions lies entirely below `rest`.
            loop {
                let block = self.get(n - next - 1, remaining);
                if rest < block {
                    break;
                }
                rest -= block;
                next += 1;
            }
            support.push(next);
            next += 1;
        }
        Ok(support)
    }

    /// Lexicographic rank of a strictly increasing support.
    pub fn support_to_index(&self, support: &[usize]) -> Result<u128> {
        let (n, k) = (self.n, self.k);
        if support.len() != k {
            return Err(Error::Domain(format!(
                "support has {} entries, expected {k}",
                support.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support.last().is_some_and(|&p| p >= n) {
            return Err(Error::Domain(format!(
                "support {support:?} is not strictly increasing within 0..{n}"
            )));
        }
        let mut index = 0u128;
        let mut start = 0usize;
        for (slot, &p) in support.iter().enumerate() {
            let remaining = k - slot - 1;
            for skipped in start..p {
                index += self.get(n - skipped - 1, remaining);
            }
            start = p + 1;
        }
        Ok(index)
    }
}

/// Convenience wrapper around [`BinomialTable::index_to_support`].
pub fn index_to_support(index: u128, n: usize, k: usize) -> Result<Vec<usize>> {
    BinomialTable::new(n, k)?.index_to_support(index)
}

/// Convenience wrapper around [`BinomialTable::support_to_index`].
pub fn support_to_index(support: &[usize], n: usize, k: usize) -> Result<u128> {
    BinomialTable::new(n, k)?.support_to_index(support)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Lexicographic enumeration of all k-subsets, independent of the ranking code.
    fn enumerate_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for p in start..n {
                cur.push(p);
                rec(p + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, k, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(svc_capacity(9, 2).unwrap(), 5);
        assert_eq!(binomial(92, 2), Some(4186));
        assert_eq!(svc_capacity(92, 2).unwrap(), 12);
        assert_eq!(svc_capacity(17, 0).unwrap(), 0);
        assert!(matches!(svc_capacity(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn capacity_without_overflow_up_to_1024() {
        for &(n, k) in &[(1024usize, 2usize), (1024, 17), (1024, 512), (1000, 100)] {
            let exact = ln_binomial(n as u64, k as u64) / std::f64::consts::LN_2;
            assert_eq!(svc_capacity(n, k).unwrap(), exact.floor() as u32, "({n},{k})");
        }
    }

    #[test]
    fn first_index_and_nine_choose_two() {
        let t = BinomialTable::new(9, 2).unwrap();
        assert_eq!(t.index_to_support(0).unwrap(), vec![0, 1]);
        let all = enumerate_subsets(9, 2);
        assert_eq!(all.len(), 36);
        let oracle = all.iter().position(|s| s == &vec![1, 6]).unwrap() as u128;
        assert_eq!(oracle, 12);
        assert_eq!(t.support_to_index(&[1, 6]).unwrap(), oracle);
        assert_eq!(t.index_to_support(oracle).unwrap(), vec![1, 6]);
    }

    #[test]
    fn matches_enumeration_oracle() {
        for n in 0..=12 {
            for k in 0..=n {
                let t = BinomialTable::new(n, k).unwrap();
                let all = enumerate_subsets(n, k);
                assert_eq!(all.len() as u128, t.count(), "C({n},{k})");
                for (i, s) in all.iter().enumerate() {
                    assert_eq!(&t.index_to_support(i as u128).unwrap(), s);
                    assert_eq!(t.support_to_index(s).unwrap(), i as u128);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = BinomialTable::new(9, 2).unwrap();
        assert!(t.index_to_support(36).is_err());
        assert!(t.support_to_index(&[3, 3]).is_err());
        assert!(t.support_to_index(&[6, 1]).is_err());
        assert!(t.support_to_index(&[1, 9]).is_err());
        assert!(t.support_to_index(&[1]).is_err());
    }
}
