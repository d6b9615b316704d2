//! Index-subset samplers and exhaustive subset enumeration.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Produces the component subset `S^k` updated at iteration `k`.
pub trait SubsetSampler {
    /// Writes `tau` distinct indices in `0..n`, sorted ascending, into `out`.
    fn draw(&mut self, n: usize, tau: usize, k: usize, out: &mut Vec<usize>);
}

/// Uniform sampling over all `C(n, tau)` subsets by a partial Fisher-Yates
/// shuffle of a persistent index array.
#[derive(Debug, Clone)]
pub struct UniformSubsets {
    rng: ChaCha8Rng,
    perm: Vec<usize>,
}

impl UniformSubsets {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            perm: Vec::new(),
        }
    }
}

impl SubsetSampler for UniformSubsets {
    fn draw(&mut self, n: usize, tau: usize, _k: usize, out: &mut Vec<usize>) {
        if self.perm.len() != n {
            self.perm = (0..n).collect();
        }
        for j in 0..tau {
            let r = self.rng.random_range(j..n);
            self.perm.swap(j, r);
        }
        out.clear();
        out.extend_from_slice(&self.perm[..tau]);
        out.sort_unstable();
    }
}

/// Deterministic cyclic order: iteration `k` updates
/// `{k*tau mod n, ..., k*tau + tau - 1 mod n}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cyclic;

impl SubsetSampler for Cyclic {
    fn draw(&mut self, n: usize, tau: usize, k: usize, out: &mut Vec<usize>) {
        out.clear();
        let start = (k * tau) % n;
        out.extend((0..tau).map(|j| (start + j) % n));
        out.sort_unstable();
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc: u64 = 1;
    for j in 0..k {
        acc = acc.checked_mul(n - j)? / (j + 1);
    }
    Some(acc)
}

/// Calls `visit` once for every `tau`-subset of `0..n` in lexicographic
/// order.
pub fn for_each_subset(n: usize, tau: usize, mut visit: impl FnMut(&[usize])) {
    if tau > n {
        return;
    }
    let mut idx: Vec<usize> = (0..tau).collect();
    loop {
        visit(&idx);
        // rightmost position that can still advance
        let Some(pos) = (0..tau).rev().find(|&p| idx[p] < p + n - tau) else {
            return;
        };
        idx[pos] += 1;
        for j in (pos + 1)..tau {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    #[test]
    fn enumeration_counts() {
        for n in 1..=7 {
            for tau in 0..=n {
                let mut count = 0u64;
                let mut last: Option<Vec<usize>> = None;
                for_each_subset(n, tau, |s| {
                    count += 1;
                    assert!(s.windows(2).all(|w| w[0] < w[1]));
                    if let Some(prev) = &last {
                        assert!(prev.as_slice() < s);
                    }
                    last = Some(s.to_vec());
                });
                assert_eq!(count, binomial(n, tau).unwrap(), "n={n} tau={tau}");
            }
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), Some(20));
        assert_eq!(binomial(50, 25), Some(126_410_606_437_752));
        assert_eq!(binomial(3, 5), Some(0));
    }

    #[test]
    fn cyclic_visits_in_order() {
        let mut s = Cyclic;
        let mut out = Vec::new();
        let seen: Vec<usize> = (0..8)
            .map(|k| {
                s.draw(4, 1, k, &mut out);
                out[0]
            })
            .collect();
        assert_eq!(seen, [0, 1, 2, 3, 0, 1, 2, 3]);
    }

    #[test]
    fn uniform_sampler_is_deterministic() {
        let mut a = UniformSubsets::new(9);
        let mut b = UniformSubsets::new(9);
        let (mut oa, mut ob) = (Vec::new(), Vec::new());
        for k in 0..100 {
            a.draw(7, 3, k, &mut oa);
            b.draw(7, 3, k, &mut ob);
            assert_eq!(oa, ob);
        }
    }

    /// Chi-square goodness of fit over all C(5,2) = 10 subsets.
    #[test]
    fn uniform_sampler_chi_square() {
        let (n, tau, draws) = (5, 2, 20_000);
        let mut s = UniformSubsets::new(1234);
        let mut out = Vec::new();
        let mut counts: BTreeMap<Vec<usize>, u32> = BTreeMap::new();
        for k in 0..draws {
            s.draw(n, tau, k, &mut out);
            assert_eq!(out.len(), tau);
            assert!(out.windows(2).all(|w| w[0] < w[1]));
            *counts.entry(out.clone()).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, 99.9% quantile.
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }
}
