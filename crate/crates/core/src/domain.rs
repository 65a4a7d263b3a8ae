//! Distributions over `{0,1}^m`, entropy measures and flat sources.
//!
//! Bit strings are plain `u64` values. All logarithms are base 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest domain width a dense distribution may have.
pub const MAX_WIDTH: u32 = 24;

const SUM_TOL: f64 = 1e-9;

/// Dense probability vector over `{0,1}^width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct Distribution {
    width: u32,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    width: u32,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        Distribution::new(raw.width, raw.probs)
    }
}

impl Distribution {
    pub fn new(width: u32, probs: Vec<f64>) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::WidthTooLarge(width, MAX_WIDTH));
        }
        if probs.len() != 1usize << width {
            return Err(Error::InvalidDistribution(format!(
                "expected {} entries for width {}, got {}",
                1usize << width,
                width,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {bad} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { width, probs })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(width: u32, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution("weights must have positive finite sum".into()));
        }
        Self::new(width, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(width: u32) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::WidthTooLarge(width, MAX_WIDTH));
        }
        let size = 1usize << width;
        Ok(Self { width, probs: vec![1.0 / size as f64; size] })
    }

    pub fn point_mass(width: u32, x: u64) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::WidthTooLarge(width, MAX_WIDTH));
        }
        if x >> width != 0 {
            return Err(Error::Range(format!("point {x} outside width {width}")));
        }
        let mut probs = vec![0.0; 1usize << width];
        probs[x as usize] = 1.0;
        Ok(Self { width, probs })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn size(&self) -> usize {
        self.probs.len()
    }
}

/// Uniform distribution over a support set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFlat")]
pub struct FlatSource {
    width: u32,
    support: Vec<u64>,
}

#[derive(Deserialize)]
struct RawFlat {
    width: u32,
    support: Vec<u64>,
}

impl TryFrom<RawFlat> for FlatSource {
    type Error = Error;
    fn try_from(raw: RawFlat) -> Result<Self> {
        FlatSource::new(raw.width, raw.support)
    }
}

impl FlatSource {
    /// Builds a flat source; the support is sorted and must be duplicate-free.
    pub fn new(width: u32, mut support: Vec<u64>) -> Result<Self> {
        if width > 63 {
            return Err(Error::WidthTooLarge(width, 63));
        }
        if support.is_empty() {
            return Err(Error::Range("flat source support must be nonempty".into()));
        }
        support.sort_unstable();
        if support.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Range("flat source support has duplicates".into()));
        }
        if support.last().is_some_and(|&x| x >> width != 0) {
            return Err(Error::Range(format!("support element outside width {width}")));
        }
        Ok(Self { width, support })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn min_entropy(&self) -> f64 {
        (self.support.len() as f64).log2()
    }

    pub fn to_distribution(&self) -> Result<Distribution> {
        if self.width > MAX_WIDTH {
            return Err(Error::WidthTooLarge(self.width, MAX_WIDTH));
        }
        let mut probs = vec![0.0; 1usize << self.width];
        let p = 1.0 / self.support.len() as f64;
        for &x in &self.support {
            probs[x as usize] = p;
        }
        Ok(Distribution { width: self.width, probs })
    }
}

/// Joint distribution of side information `Z` and source `X`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointSource {
    side_width: u32,
    source_width: u32,
    weights: Vec<f64>,
    conditionals: Vec<Distribution>,
}

impl JointSource {
    /// `weights[z]` is `Pr[Z = z]`; `conditionals[z]` is `X | Z = z`.
    pub fn new(side_width: u32, weights: Vec<f64>, conditionals: Vec<Distribution>) -> Result<Self> {
        if weights.len() != 1usize << side_width || conditionals.len() != weights.len() {
            return Err(Error::InvalidDistribution(
                "joint source needs one weight and one conditional per side value".into(),
            ));
        }
        let source_width = conditionals[0].width();
        if let Some(c) = conditionals.iter().find(|c| c.width() != source_width) {
            return Err(Error::WidthMismatch(c.width(), source_width));
        }
        Distribution::new(side_width, weights.clone())?;
        Ok(Self { side_width, source_width, weights, conditionals })
    }

    /// Side information independent of the source.
    pub fn independent(side_width: u32, source: &Distribution) -> Result<Self> {
        let count = 1usize << side_width;
        Self::new(side_width, vec![1.0 / count as f64; count], vec![source.clone(); count])
    }

    pub fn side_width(&self) -> u32 {
        self.side_width
    }

    pub fn source_width(&self) -> u32 {
        self.source_width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn conditionals(&self) -> &[Distribution] {
        &self.conditionals
    }
}

pub fn min_entropy(p: &Distribution) -> f64 {
    let max = p.probs.iter().cloned().fold(0.0_f64, f64::max);
    -max.log2()
}

pub fn shannon_entropy(p: &Distribution) -> f64 {
    p.probs.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum()
}

/// `H̃∞(X|Z) = −log2 E_z[max_x Pr[X=x | Z=z]]`.
pub fn conditional_min_entropy(j: &JointSource) -> f64 {
    let guess: f64 = j
        .weights
        .iter()
        .zip(&j.conditionals)
        .map(|(w, c)| w * c.probs.iter().cloned().fold(0.0_f64, f64::max))
        .sum();
    -guess.log2()
}

/// Pushes `p` forward through the table `f: {0,1}^m → {0,1}^out_width`.
pub fn pushforward(p: &Distribution, f: &[u64], out_width: u32) -> Result<Distribution> {
    if f.len() != p.size() {
        return Err(Error::WidthMismatch(f.len().trailing_zeros(), p.width));
    }
    if out_width > MAX_WIDTH {
        return Err(Error::WidthTooLarge(out_width, MAX_WIDTH));
    }
    let mut probs = vec![0.0; 1usize << out_width];
    for (&q, &y) in p.probs.iter().zip(f) {
        if y >> out_width != 0 {
            return Err(Error::Range(format!("table value {y} outside width {out_width}")));
        }
        probs[y as usize] += q;
    }
    Ok(Distribution { width: out_width, probs })
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic walk over `K`-subsets of `{0, …, N−1}`.
///
/// `advance` reports the first position that changed so callers can update
/// incremental state for the changed tail only.
#[derive(Clone, Debug)]
pub struct LexCombination {
    universe: u64,
    idx: Vec<u64>,
}

impl LexCombination {
    pub fn first(universe: u64, k: usize) -> Self {
        Self { universe, idx: (0..k as u64).collect() }
    }

    pub fn from_indices(universe: u64, idx: Vec<u64>) -> Self {
        Self { universe, idx }
    }

    pub fn indices(&self) -> &[u64] {
        &self.idx
    }

    /// Moves to the next subset, returning the first changed position.
    pub fn advance(&mut self) -> Option<usize> {
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.universe - (k - i) as u64 {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(i);
            }
        }
        None
    }

    /// The subset with the given lexicographic rank.
    pub fn unrank(universe: u64, k: usize, mut rank: u128) -> Self {
        let mut idx = Vec::with_capacity(k);
        let mut next = 0u64;
        for slot in 0..k {
            loop {
                let rest = binomial(universe - next - 1, (k - slot - 1) as u64);
                if rank < rest {
                    break;
                }
                rank -= rest;
                next += 1;
            }
            idx.push(next);
            next += 1;
        }
        Self { universe, idx }
    }
}

/// Stream of every flat source of size `k` on `n` bits, in lexicographic order.
pub struct FlatSourceIter {
    width: u32,
    comb: Option<LexCombination>,
}

impl Iterator for FlatSourceIter {
    type Item = FlatSource;
    fn next(&mut self) -> Option<FlatSource> {
        let comb = self.comb.as_mut()?;
        let out = FlatSource { width: self.width, support: comb.indices().to_vec() };
        if comb.advance().is_none() {
            self.comb = None;
        }
        Some(out)
    }
}

pub fn enumerate_flat_sources(n: u32, k: u64, cap: u64) -> Result<FlatSourceIter> {
    if n > 63 {
        return Err(Error::WidthTooLarge(n, 63));
    }
    let universe = 1u64 << n;
    if k == 0 || k > universe {
        return Err(Error::Range(format!("source size {k} not in 1..={universe}")));
    }
    let count = binomial(universe, k);
    if count > cap as u128 {
        return Err(Error::CountExceedsCap { count, cap });
    }
    Ok(FlatSourceIter { width: n, comb: Some(LexCombination::first(universe, k as usize)) })
}

/// `K = ⌊2^k⌋` for fractional min-entropy `k`.
pub fn flat_size(k: f64) -> u64 {
    (k.exp2() + 1e-9).floor().max(1.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn entropies_of_simple_distributions() {
        let u3 = Distribution::uniform(3).unwrap();
        assert!(close(min_entropy(&u3), 3.0));
        assert!(close(shannon_entropy(&u3), 3.0));
        let point = Distribution::point_mass(2, 1).unwrap();
        assert_eq!(min_entropy(&point), 0.0);
        assert_eq!(shannon_entropy(&point), 0.0);
        let flat = FlatSource::new(3, vec![1, 4, 6]).unwrap().to_distribution().unwrap();
        assert!(close(min_entropy(&flat), 3f64.log2()));
        let dyadic = Distribution::new(2, vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        assert!(close(shannon_entropy(&dyadic), 1.5));
    }

    #[test]
    fn conditional_min_entropy_cases() {
        let u2 = Distribution::uniform(2).unwrap();
        let indep = JointSource::independent(1, &u2).unwrap();
        assert!(close(conditional_min_entropy(&indep), 2.0));

        // Z = X for X uniform on two bits.
        let same: Vec<_> = (0..4).map(|x| Distribution::point_mass(2, x).unwrap()).collect();
        let j = JointSource::new(2, vec![0.25; 4], same).unwrap();
        assert!(close(conditional_min_entropy(&j), 0.0));

        // Z = top bit of X: each conditional is uniform on two points.
        let half = |hi: u64| {
            let mut p = vec![0.0; 4];
            p[(hi << 1) as usize] = 0.5;
            p[(hi << 1 | 1) as usize] = 0.5;
            Distribution::new(2, p).unwrap()
        };
        let j = JointSource::new(1, vec![0.5, 0.5], vec![half(0), half(1)]).unwrap();
        assert!(close(conditional_min_entropy(&j), 1.0));
    }

    #[test]
    fn pushforward_cases() {
        let p = Distribution::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(pushforward(&p, &[0, 1, 2, 3], 2).unwrap(), p);
        let c = pushforward(&p, &[2, 2, 2, 2], 2).unwrap();
        assert!(close(c.probs()[2], 1.0));
        // x ↦ (x, 0^{m−1}) puts x in the most significant bit.
        let one = Distribution::point_mass(1, 1).unwrap();
        let m = 4;
        let embedded = pushforward(&one, &[0, 1 << (m - 1)], m).unwrap();
        assert_eq!(embedded, Distribution::point_mass(m, 0b1000).unwrap());
        assert!(pushforward(&p, &[0, 1], 2).is_err());
    }

    #[test]
    fn flat_source_counts() {
        assert_eq!(enumerate_flat_sources(2, 1, 100).unwrap().count(), 4);
        assert_eq!(enumerate_flat_sources(4, 2, 1000).unwrap().count(), 120);
        assert_eq!(enumerate_flat_sources(5, 4, 1_000_000).unwrap().count(), 35960);
        assert!(matches!(
            enumerate_flat_sources(5, 16, 1_000_000),
            Err(Error::CountExceedsCap { count: 601_080_390, .. })
        ));
    }

    #[test]
    fn lexicographic_order_and_unrank_agree() {
        let all: Vec<_> = enumerate_flat_sources(4, 3, 10_000).unwrap().collect();
        for (rank, src) in all.iter().enumerate() {
            let c = LexCombination::unrank(16, 3, rank as u128);
            assert_eq!(c.indices(), src.support());
        }
        assert!(all.windows(2).all(|w| w[0].support() < w[1].support()));
    }

    #[test]
    fn validation_errors() {
        assert!(Distribution::new(1, vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(1, vec![1.0]).is_err());
        assert!(Distribution::new(1, vec![1.5, -0.5]).is_err());
        assert!(FlatSource::new(2, vec![1, 1]).is_err());
        assert!(FlatSource::new(2, vec![4]).is_err());
        assert_eq!(flat_size(3f64.log2()), 3);
        assert_eq!(flat_size(2.0), 4);
    }
}
