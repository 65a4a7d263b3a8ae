//! Hash families over GF(2^n) and the leftover-hash extractors built from them.

pub mod gf2;

use std::sync::Arc;

use serde::Serialize;

pub use gf2::{gf2_mul, Gf2};

use crate::compose::{mask, Claim, Extractor, Strength};
use crate::divergences::DivergenceKind;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `h_{a,b}(x) = trunc_m(a·x + b)`, seed `(a, b)`.
    Pairwise,
    /// `h_a(x) = trunc_m(a·x)`, seed `a`.
    Universal,
    /// `h_{α,β}(x) = trunc_m(β · Σ_i block_i α^i)` over GF(2^w), seed `(α, β)`.
    AlmostUniversal { w: u32, blocks: u32 },
    /// Zero output bits and no seed.
    Empty,
}

/// A seeded family `{0,1}^n → {0,1}^m`.
///
/// Truncation keeps the low-order `m` bits; seeds pack their first component
/// in the high bits.
#[derive(Clone, Debug, Serialize)]
pub struct HashFamily {
    pub n: u32,
    pub m: u32,
    pub d: u32,
    /// Collision probability is at most `(1 + eps_au)·2^{−m}`.
    pub eps_au: f64,
    pub kind: FamilyKind,
    #[serde(skip)]
    field: Option<Gf2>,
}

impl HashFamily {
    #[inline]
    pub fn eval(&self, seed: u64, x: u64) -> u64 {
        let out = mask(self.m);
        match &self.kind {
            FamilyKind::Empty => 0,
            FamilyKind::Pairwise => {
                let f = self.field.as_ref().expect("field present");
                let (a, b) = (seed >> self.n, seed & mask(self.n));
                (f.mul(a, x) ^ b) & out
            }
            FamilyKind::Universal => {
                let f = self.field.as_ref().expect("field present");
                f.mul(seed, x) & out
            }
            FamilyKind::AlmostUniversal { w, blocks } => {
                let f = self.field.as_ref().expect("field present");
                let (alpha, beta) = (seed >> w, seed & mask(*w));
                // Horner from the most significant block.
                let mut acc = 0u64;
                for i in (0..*blocks).rev() {
                    let block = (x >> (i * w)) & mask(*w);
                    acc = f.mul(acc, alpha) ^ block;
                }
                f.mul(beta, acc) & out
            }
        }
    }

    /// Declared D₂ error of the leftover-hash extractor at min-entropy `k`.
    pub fn lhl_error(&self, k: f64) -> f64 {
        if self.m == 0 {
            return 0.0;
        }
        ((self.m as f64 - k).exp2() + 1.0 + self.eps_au).log2()
    }

    /// Exact collision count over all seeds for one pair of inputs.
    pub fn collisions(&self, x: u64, y: u64) -> u64 {
        (0..1u64 << self.d).filter(|&s| self.eval(s, x) == self.eval(s, y)).count() as u64
    }
}

fn check_out(n: u32, m: u32) -> Result<()> {
    if m > n {
        return Err(Error::Range(format!("output width {m} exceeds input width {n}")));
    }
    Ok(())
}

pub fn empty_family(n: u32) -> HashFamily {
    HashFamily { n, m: 0, d: 0, eps_au: 0.0, kind: FamilyKind::Empty, field: None }
}

/// Pairwise-independent family; seeds are `2n` bits so `n ≤ 31`.
pub fn pairwise_family(n: u32, m: u32) -> Result<HashFamily> {
    check_out(n, m)?;
    if !(1..=31).contains(&n) {
        return Err(Error::Range(format!("pairwise family needs 1 ≤ n ≤ 31, got {n}")));
    }
    Ok(HashFamily { n, m, d: 2 * n, eps_au: 0.0, kind: FamilyKind::Pairwise, field: Some(Gf2::new(n)?) })
}

/// Universal family `trunc_m(a·x)`, seed `n` bits.
pub fn universal_family(n: u32, m: u32) -> Result<HashFamily> {
    check_out(n, m)?;
    if !(1..=63).contains(&n) {
        return Err(Error::Range(format!("universal family needs 1 ≤ n ≤ 63, got {n}")));
    }
    Ok(HashFamily { n, m, d: n, eps_au: 0.0, kind: FamilyKind::Universal, field: Some(Gf2::new(n)?) })
}

/// Block width for the almost-universal family.
pub fn almost_universal_width(n: u32, m: u32, eps: f64) -> u32 {
    m + ((n as f64 / m as f64) / eps).log2().ceil().max(0.0) as u32
}

/// Polynomial-evaluation family followed by one multiplicative hash.
///
/// The first stage alone is not almost universal (inputs differing only in
/// the high bits of block 0 always collide after truncation), hence the
/// second key `β`.
pub fn almost_universal_family(n: u32, m: u32, eps: f64) -> Result<HashFamily> {
    check_out(n, m)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Range(format!("eps {eps} not in (0, 1)")));
    }
    if m == 0 {
        return Err(Error::Range("almost-universal family needs m ≥ 1".into()));
    }
    let w = almost_universal_width(n, m, eps);
    if w > 31 {
        return Err(Error::Range(format!("block width {w} exceeds 31 bits")));
    }
    let blocks = n.div_ceil(w).max(1);
    let eps_au = (blocks - 1) as f64 * (m as f64 - w as f64).exp2();
    Ok(HashFamily {
        n,
        m,
        d: 2 * w,
        eps_au,
        kind: FamilyKind::AlmostUniversal { w, blocks },
        field: Some(Gf2::new(w)?),
    })
}

/// Both leftover-hash extractors for one family.
#[derive(Clone, Debug)]
pub struct LhlExtractors {
    /// `Ext(x, h) = (h, h(x))`, output `d + m` bits.
    pub full: Extractor,
    /// `Ext'(x, h) = h(x)`.
    pub strong: Extractor,
}

/// Leftover-hash extractors with D₂ claims at every integer `k ≤ n`.
///
/// The full form carries average-case claims; the strong form carries
/// strong average-case claims obtained by prepending the seed.
pub fn lhl_extractor(fam: &HashFamily) -> Result<LhlExtractors> {
    let fam = Arc::new(fam.clone());
    let (n, d, m) = (fam.n, fam.d, fam.m);
    let f1 = fam.clone();
    let mut full = Extractor::new(format!("lhl-full({n}->{m})"), n, d, d + m, Arc::new(move |x, s| (s << m) | f1.eval(s, x)))?;
    let f2 = fam.clone();
    let mut strong = Extractor::new(format!("lhl({n}->{m})"), n, d, m, Arc::new(move |x, s| f2.eval(s, x)))?;
    for k in 0..=n {
        let eps = fam.lhl_error(k as f64);
        let d2 = DivergenceKind::Renyi(2.0);
        full.push_claim(Claim::new(d2, k as f64, eps, Strength::Avg, "leftover hash lemma"));
        strong.push_claim(Claim::new(d2, k as f64, eps, Strength::StrongAvg, "leftover hash lemma, seed prepended"));
    }
    Ok(LhlExtractors { full, strong })
}

/// Smallest-seed family whose strong LHL error at `k` is within `budget`.
///
/// Returns `None` when even a perfect family cannot meet the budget.
pub fn cheapest_lhl_family(n: u32, m: u32, k: f64, budget: f64) -> Result<Option<HashFamily>> {
    if m == 0 {
        return Ok(Some(empty_family(n)));
    }
    let room = budget.exp2() - 1.0 - (m as f64 - k).exp2();
    if room < 0.0 {
        return Ok(None);
    }
    let mut best = universal_family(n, m)?;
    if room > 0.0 {
        let eps = room.min(0.999);
        if let Ok(au) = almost_universal_family(n, m, eps) {
            if au.d < best.d && au.eps_au <= room {
                best = au;
            }
        }
    }
    Ok(Some(best))
}
