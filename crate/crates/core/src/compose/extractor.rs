use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::divergences::DivergenceKind;
use crate::error::{Error, Result};

/// Pure evaluation function `(x, s) ↦ output`.
pub type EvalFn = Arc<dyn Fn(u64, u64) -> u64 + Send + Sync>;

/// How an error guarantee quantifies over seeds and side information.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Plain,
    Strong,
    Avg,
    StrongAvg,
}

impl Strength {
    pub fn from_flags(strong: bool, avg: bool) -> Self {
        match (strong, avg) {
            (false, false) => Strength::Plain,
            (true, false) => Strength::Strong,
            (false, true) => Strength::Avg,
            (true, true) => Strength::StrongAvg,
        }
    }

    pub fn is_strong(self) -> bool {
        matches!(self, Strength::Strong | Strength::StrongAvg)
    }

    pub fn is_avg(self) -> bool {
        matches!(self, Strength::Avg | Strength::StrongAvg)
    }

    /// Whether a guarantee of strength `self` yields one of strength `want`.
    ///
    /// Dropping the seed average (strong ⇒ plain) is Jensen's inequality and
    /// needs a divergence convex in its first argument.
    pub fn implies(self, want: Strength, convex: bool) -> bool {
        if want.is_strong() && !self.is_strong() {
            return false;
        }
        if want.is_avg() && !self.is_avg() {
            return false;
        }
        if self.is_strong() && !want.is_strong() && !convex {
            return false;
        }
        true
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strength::Plain => "plain",
            Strength::Strong => "strong",
            Strength::Avg => "avg",
            Strength::StrongAvg => "strong_avg",
        };
        f.write_str(s)
    }
}

/// A declared error bound: every source with min-entropy at least `k`
/// yields divergence at most `eps` from uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub kind: DivergenceKind,
    pub k: f64,
    pub eps: f64,
    pub strength: Strength,
    pub provenance: String,
    /// Additive constant the builder folded into `eps` beyond the formula.
    #[serde(default)]
    pub slack: f64,
}

impl Claim {
    pub fn new(kind: DivergenceKind, k: f64, eps: f64, strength: Strength, provenance: impl Into<String>) -> Self {
        Self { kind: kind.canonical(), k, eps, strength, provenance: provenance.into(), slack: 0.0 }
    }

    /// Error this claim guarantees for a request, if it applies at all.
    ///
    /// A claim at lower entropy covers higher entropy, and a Rényi claim of
    /// order β covers every order α ≤ β.
    pub fn covers(&self, kind: DivergenceKind, k: f64, strength: Strength) -> Option<f64> {
        if self.k > k + 1e-9 {
            return None;
        }
        let kind = kind.canonical();
        let kind_ok = match (self.kind.renyi_order(), kind.renyi_order()) {
            (Some(have), Some(want)) => want <= have,
            _ => self.kind == kind,
        };
        if !kind_ok || !self.strength.implies(strength, kind.is_convex()) {
            return None;
        }
        Some(self.eps)
    }
}

/// Side output used for re-extraction, with its injectivity guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injectivity {
    /// `(x, s) ↦ (Ext(x,s), Waste(x,s))` is injective.
    Pair,
    /// `(x, s) ↦ (s, Ext(x,s), Waste(x,s))` is injective.
    WithSeed,
}

#[derive(Clone)]
pub struct Waste {
    pub width: u32,
    pub map: EvalFn,
    pub injectivity: Injectivity,
}

/// A seeded map `{0,1}^n × {0,1}^d → {0,1}^m` with its claim ledger.
#[derive(Clone)]
pub struct Extractor {
    label: String,
    n: u32,
    d: u32,
    m: u32,
    eval: EvalFn,
    waste: Option<Waste>,
    claims: Vec<Claim>,
}

impl fmt::Debug for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Extractor")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("waste_width", &self.waste.as_ref().map(|w| w.width))
            .field("claims", &self.claims)
            .finish()
    }
}

/// Widths must leave room to pack `(x, s)` into one word.
pub const MAX_INPUT_BITS: u32 = 64;

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Extractor {
    pub fn new(label: impl Into<String>, n: u32, d: u32, m: u32, eval: EvalFn) -> Result<Self> {
        if n > 63 || d > 63 || m > 63 || n + d > MAX_INPUT_BITS {
            return Err(Error::Range(format!("widths n={n}, d={d}, m={m} too large")));
        }
        Ok(Self { label: label.into(), n, d, m, eval, waste: None, claims: Vec::new() })
    }

    /// Extractor given by an explicit table indexed by `x·2^d + s`.
    pub fn from_table(label: impl Into<String>, n: u32, d: u32, m: u32, table: Vec<u64>) -> Result<Self> {
        if n + d > 26 || table.len() != 1usize << (n + d) {
            return Err(Error::Range("table must have 2^(n+d) entries with n+d ≤ 26".into()));
        }
        if table.iter().any(|&y| y & !mask(m) != 0) {
            return Err(Error::Range(format!("table value exceeds {m} bits")));
        }
        let table = Arc::new(table);
        Self::new(label, n, d, m, Arc::new(move |x, s| table[((x << d) | s) as usize]))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn eval(&self, x: u64, s: u64) -> u64 {
        (self.eval)(x, s)
    }

    pub fn eval_fn(&self) -> EvalFn {
        self.eval.clone()
    }

    pub fn waste(&self) -> Option<&Waste> {
        self.waste.as_ref()
    }

    pub fn claims(&self) -> &[Claim] {
        &self.claims
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_waste(mut self, waste: Waste) -> Self {
        self.waste = Some(waste);
        self
    }

    pub fn without_claims(mut self) -> Self {
        self.claims.clear();
        self
    }

    pub fn with_claim(mut self, claim: Claim) -> Self {
        self.push_claim(claim);
        self
    }

    pub fn push_claim(&mut self, claim: Claim) {
        self.claims.push(claim);
    }

    /// Smallest error any claim guarantees for the request.
    pub fn best_claim(&self, kind: DivergenceKind, k: f64, strength: Strength) -> Option<&Claim> {
        self.claims
            .iter()
            .filter_map(|c| c.covers(kind, k, strength).map(|e| (e, c)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, c)| c)
    }

    pub fn claimed_error(&self, kind: DivergenceKind, k: f64, strength: Strength) -> Option<f64> {
        self.best_claim(kind, k, strength).map(|c| c.eps)
    }

    /// The prepended form `(x, s) ↦ (s, Ext(x, s))` without claims.
    pub fn prepend_seed(&self) -> Result<Extractor> {
        let (m, eval) = (self.m, self.eval.clone());
        Extractor::new(
            format!("prepend({})", self.label),
            self.n,
            self.d,
            self.d + m,
            Arc::new(move |x, s| (s << m) | eval(x, s)),
        )
    }

    /// Full evaluation table indexed by `x·2^d + s`, when small enough.
    pub fn table(&self) -> Option<Vec<u64>> {
        if self.n + self.d > 26 {
            return None;
        }
        let d = self.d;
        Some((0..1u64 << (self.n + d)).map(|i| self.eval(i >> d, i & mask(d))).collect())
    }

    /// Exhaustively checks the waste map's declared injectivity.
    ///
    /// Returns `Ok(false)` on a collision and errors when there is no waste
    /// map or the domain exceeds `2^max_bits`.
    pub fn verify_waste_injective(&self, max_bits: u32) -> Result<bool> {
        let w = self.waste.as_ref().ok_or_else(|| Error::Precondition("extractor has no waste map".into()))?;
        let bits = self.n + self.d;
        if bits > max_bits {
            return Err(Error::Infeasible(format!("{bits} input bits exceed the exhaustive limit {max_bits}")));
        }
        let key_bits = self.m + w.width + if w.injectivity == Injectivity::WithSeed { self.d } else { 0 };
        if key_bits > 128 {
            return Err(Error::Range("injectivity key exceeds 128 bits".into()));
        }
        let mut seen: HashSet<u128> = HashSet::with_capacity(1usize << bits);
        for x in 0..1u64 << self.n {
            for s in 0..1u64 << self.d {
                let mut key = ((self.eval(x, s) as u128) << w.width) | (w.map)(x, s) as u128;
                if w.injectivity == Injectivity::WithSeed {
                    key |= (s as u128) << (self.m + w.width);
                }
                if !seen.insert(key) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strength_lattice() {
        use Strength::*;
        assert!(StrongAvg.implies(Strong, false));
        assert!(StrongAvg.implies(Avg, true));
        assert!(!StrongAvg.implies(Avg, false));
        assert!(Avg.implies(Plain, false));
        assert!(Strong.implies(Plain, true));
        assert!(!Strong.implies(Plain, false));
        assert!(!Plain.implies(Strong, true));
        assert!(!Strong.implies(Avg, true));
    }

    #[test]
    fn claim_coverage_rules() {
        let c = Claim::new(DivergenceKind::Renyi(2.0), 3.0, 0.5, Strength::StrongAvg, "test");
        assert_eq!(c.covers(DivergenceKind::Kl, 3.0, Strength::Avg), Some(0.5));
        assert_eq!(c.covers(DivergenceKind::Renyi(2.0), 4.0, Strength::Strong), Some(0.5));
        // Averaging over seeds needs convexity, which order 2 lacks.
        assert_eq!(c.covers(DivergenceKind::Renyi(2.0), 3.0, Strength::Plain), None);
        assert_eq!(c.covers(DivergenceKind::Renyi(3.0), 3.0, Strength::Strong), None);
        assert_eq!(c.covers(DivergenceKind::Kl, 2.5, Strength::Strong), None);
        assert_eq!(c.covers(DivergenceKind::Tv, 3.0, Strength::Strong), None);
    }

    #[test]
    fn injectivity_check_finds_collisions() {
        let id = Extractor::new("xor", 3, 3, 3, Arc::new(|x, s| x ^ s)).unwrap();
        let good = id.clone().with_waste(Waste { width: 3, map: Arc::new(|_, s| s), injectivity: Injectivity::Pair });
        assert!(good.verify_waste_injective(20).unwrap());
        let bad = id.with_waste(Waste { width: 3, map: Arc::new(|_, _| 0), injectivity: Injectivity::Pair });
        assert!(!bad.verify_waste_injective(20).unwrap());
    }
}
