//! Averaging samplers: conversions to and from extractors, the concrete
//! pairwise, expander and subgaussian samplers, and exhaustive-coin failure
//! measurement.

use std::f64::consts::LN_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose::{high_entropy_kl, mask, Claim, EvalFn, Extractor, ExtractorProvider, Strength};
use crate::divergences::{
    kl_to_subexponential, kl_to_subgaussian, subexponential_maxdev, subexponential_scale, subgaussian_maxdev,
    subgaussian_scale, DivergenceKind, TGrid,
};
use crate::error::{Error, Result};
use crate::expanders::{expander_l2_error, extractor_from_graph, power_walk, GraphProvider};
use crate::hashing::pairwise_family;

/// Test-function classes a sampler can be certified for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionClass {
    /// `f: {0,1}^m → [0, 1]`.
    Bounded01,
    /// `E f(U_m)² ≤ 1`.
    M2,
    Subgaussian,
    Subexponential,
}

impl FunctionClass {
    pub const ALL: [FunctionClass; 4] =
        [FunctionClass::Bounded01, FunctionClass::M2, FunctionClass::Subgaussian, FunctionClass::Subexponential];

    /// Divergence whose extractors are samplers for this class.
    pub fn divergence(self) -> DivergenceKind {
        match self {
            FunctionClass::Bounded01 => DivergenceKind::Tv,
            FunctionClass::M2 => DivergenceKind::MomentClass(2.0),
            FunctionClass::Subgaussian => DivergenceKind::Subgaussian,
            FunctionClass::Subexponential => DivergenceKind::Subexponential,
        }
    }

    /// `sup_f max_y f(y) − E f(U_m)`.
    pub fn maxdev(self, m: u32) -> f64 {
        match self {
            FunctionClass::Bounded01 => 1.0,
            FunctionClass::M2 => (m as f64 / 2.0).exp2(),
            FunctionClass::Subgaussian => subgaussian_maxdev(m),
            FunctionClass::Subexponential => subexponential_maxdev(m),
        }
    }

    /// Random member as a full table on `{0,1}^m`.
    pub fn generate(self, m: u32, rng: &mut impl Rng) -> Vec<f64> {
        let size = 1usize << m;
        let shape = rng.gen_range(0..3);
        let raw: Vec<f64> = match shape {
            0 => (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            1 => {
                let mut v = vec![0.0; size];
                v[rng.gen_range(0..size)] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                v
            }
            _ => {
                let p = rng.gen_range(0.05..0.95);
                (0..size).map(|_| if rng.gen_bool(p) { 1.0 } else { 0.0 }).collect()
            }
        };
        let grid = TGrid::default();
        match self {
            FunctionClass::Bounded01 => {
                let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
                if hi > lo {
                    raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
                } else {
                    vec![rng.gen(); size]
                }
            }
            FunctionClass::M2 => {
                let norm = (raw.iter().map(|v| v * v).sum::<f64>() / size as f64).sqrt();
                if norm > 0.0 {
                    raw.iter().map(|v| v / norm * (1.0 - 1e-12)).collect()
                } else {
                    vec![0.0; size]
                }
            }
            FunctionClass::Subgaussian | FunctionClass::Subexponential => {
                let mean = raw.iter().sum::<f64>() / size as f64;
                let g: Vec<f64> = raw.iter().map(|v| v - mean).collect();
                let c = if self == FunctionClass::Subgaussian {
                    subgaussian_scale(&g, &grid)
                } else {
                    subexponential_scale(&g, &grid)
                };
                g.iter().map(|v| v * c).collect()
            }
        }
    }

    /// Membership check on a full table.
    pub fn certify(self, f: &[f64]) -> bool {
        let size = f.len() as f64;
        match self {
            FunctionClass::Bounded01 => f.iter().all(|v| (0.0..=1.0).contains(v)),
            FunctionClass::M2 => (f.iter().map(|v| v * v).sum::<f64>() / size).sqrt() <= 1.0 + 1e-9,
            FunctionClass::Subgaussian | FunctionClass::Subexponential => {
                let mean = f.iter().sum::<f64>() / size;
                let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
                // Hoeffding's lemma certifies range ≤ 1 outright; otherwise the grid decides.
                let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
                let limit = (self == FunctionClass::Subexponential).then_some(2.0);
                hi - lo <= 1.0 + 1e-12 || TGrid::default().admits(&centered, limit)
            }
        }
    }
}

impl std::fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FunctionClass::Bounded01 => "bounded01",
            FunctionClass::M2 => "m2",
            FunctionClass::Subgaussian => "subgaussian",
            FunctionClass::Subexponential => "subexponential",
        };
        f.write_str(s)
    }
}

/// `(δ, ε)` guarantee for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerClaim {
    pub class: FunctionClass,
    pub delta: f64,
    pub eps: f64,
    /// Holds for per-index function tuples.
    pub strong: bool,
    /// Bounds `|error|` rather than the one-sided error.
    pub absolute: bool,
    pub provenance: String,
}

/// `Samp: {0,1}^n → ({0,1}^m)^D`.
#[derive(Clone)]
pub struct Sampler {
    label: String,
    n: u32,
    m: u32,
    samples: u64,
    points: EvalFn,
    claims: Vec<SamplerClaim>,
}

impl std::fmt::Debug for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sampler")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("samples", &self.samples)
            .field("claims", &self.claims)
            .finish()
    }
}

impl Sampler {
    /// `points(x, i)` must be an `m`-bit value for every `i < samples`.
    pub fn new(label: impl Into<String>, n: u32, m: u32, samples: u64, points: EvalFn) -> Result<Self> {
        if n > 63 || m > 63 || samples == 0 {
            return Err(Error::Range(format!("sampler widths n={n}, m={m} or sample count {samples} out of range")));
        }
        Ok(Self { label: label.into(), n, m, samples, points, claims: Vec::new() })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Randomness complexity.
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Sample complexity `D`.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn claims(&self) -> &[SamplerClaim] {
        &self.claims
    }

    pub fn point(&self, x: u64, i: u64) -> u64 {
        (self.points)(x, i)
    }

    pub fn points(&self, x: u64) -> Vec<u64> {
        (0..self.samples).map(|i| self.point(x, i)).collect()
    }

    pub fn points_fn(&self) -> EvalFn {
        self.points.clone()
    }

    pub fn with_claim(mut self, claim: SamplerClaim) -> Self {
        self.push_claim(claim);
        self
    }

    /// Adds a claim unless one at least as strong is present.
    pub fn push_claim(&mut self, claim: SamplerClaim) {
        let dominated = self.claims.iter().any(|c| {
            c.class == claim.class
                && c.strong >= claim.strong
                && c.absolute == claim.absolute
                && c.delta <= claim.delta
                && c.eps <= claim.eps
        });
        if !dominated {
            self.claims.retain(|c| {
                !(c.class == claim.class
                    && claim.strong >= c.strong
                    && c.absolute == claim.absolute
                    && claim.delta <= c.delta
                    && claim.eps <= c.eps)
            });
            self.claims.push(claim);
        }
    }
}

/// `(1/D)·Σ_i f(Samp(x)_i)`.
pub fn estimate_mean(s: &Sampler, f: &[f64], x: u64) -> Result<f64> {
    if f.len() != 1usize << s.m() {
        return Err(Error::WidthMismatch(f.len().trailing_zeros(), s.m()));
    }
    if x >> s.n() != 0 {
        return Err(Error::Range(format!("coin string wider than {} bits", s.n())));
    }
    Ok((0..s.samples()).map(|i| f[s.point(x, i) as usize]).sum::<f64>() / s.samples() as f64)
}

/// Classes and errors implied by one extractor claim.
fn implied_classes(kind: DivergenceKind, eps: f64, m: u32) -> Vec<(FunctionClass, f64)> {
    match kind.canonical() {
        DivergenceKind::Tv => vec![(FunctionClass::Bounded01, eps)],
        DivergenceKind::Lp(p) if p == 2.0 => vec![(FunctionClass::M2, eps * (m as f64 / 2.0).exp2())],
        DivergenceKind::MomentClass(q) if q == 2.0 => vec![(FunctionClass::M2, eps)],
        DivergenceKind::Subgaussian => vec![(FunctionClass::Subgaussian, eps)],
        DivergenceKind::Subexponential => vec![(FunctionClass::Subexponential, eps)],
        k if k.renyi_order().is_some_and(|a| a >= 1.0) => vec![
            // Rényi orders at least 1 dominate KL; the bounds below are concave
            // in KL so they survive averaging over seeds.
            (FunctionClass::Subgaussian, kl_to_subgaussian(eps)),
            (FunctionClass::Subexponential, kl_to_subexponential(eps)),
            (FunctionClass::Bounded01, (LN_2 / 2.0 * eps).sqrt()),
        ],
        _ => Vec::new(),
    }
}

/// `Samp(x)_i = Ext(x, i)`: an `(n − log(1/δ), ε)` claim becomes a one-sided
/// `(δ, ε)` claim and a `(2δ, ε)` absolute claim.
pub fn extractor_to_sampler(ext: &Extractor) -> Result<Sampler> {
    let eval = ext.eval_fn();
    let mut s = Sampler::new(format!("sampler({})", ext.label()), ext.n(), ext.m(), 1u64 << ext.d(), eval)?;
    for claim in ext.claims() {
        if claim.k >= ext.n() as f64 {
            continue;
        }
        let delta = (claim.k - ext.n() as f64).exp2();
        let strong = claim.strength.is_strong();
        for (class, eps) in implied_classes(claim.kind, claim.eps, ext.m()) {
            let provenance = format!("extractor to sampler, from {} ({})", claim.kind, claim.provenance);
            s.push_claim(SamplerClaim { class, delta, eps, strong, absolute: false, provenance: provenance.clone() });
            if 2.0 * delta < 1.0 {
                s.push_claim(SamplerClaim {
                    class,
                    delta: 2.0 * delta,
                    eps,
                    strong,
                    absolute: true,
                    provenance: format!("{provenance}, symmetric doubling"),
                });
            }
        }
    }
    if s.claims().is_empty() {
        return Err(Error::MissingClaim(format!("'{}' has no claim that converts to a sampler claim", ext.label())));
    }
    Ok(s)
}

/// `Ext(x, i) = Samp(x)_i` with the best claim for `class`: an extractor claim
/// `ε + δ·2^{n−k}·maxdev` at `k` and an average-case claim `ε + η·maxdev` at
/// `n − log(1/δ) + log(1/η)`.
pub fn sampler_to_extractor(s: &Sampler, class: FunctionClass, k: f64, eta: f64) -> Result<Extractor> {
    if !s.samples().is_power_of_two() {
        return Err(Error::Precondition(format!("sample count {} is not a power of two", s.samples())));
    }
    if !(k >= 0.0 && k <= s.n() as f64) || !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Range(format!("need 0 ≤ k ≤ n and 0 < η ≤ 1; got {k}, {eta}")));
    }
    let maxdev = class.maxdev(s.m());
    if !maxdev.is_finite() {
        return Err(Error::Unsupported(format!("class {class} has no finite maximum deviation")));
    }
    let best = s
        .claims()
        .iter()
        .filter(|c| c.class == class)
        .min_by(|a, b| {
            let cost = |c: &SamplerClaim| c.eps + c.delta * (s.n() as f64 - k).exp2() * maxdev;
            cost(a).total_cmp(&cost(b))
        })
        .ok_or_else(|| Error::MissingClaim(format!("sampler '{}' has no {class} claim", s.label())))?;
    let kind = class.divergence();
    let d = s.samples().trailing_zeros();
    let points = s.points_fn();
    let ext = Extractor::new(format!("extractor({})", s.label()), s.n(), d, s.m(), points)?;
    let eps_k = best.eps + best.delta * (s.n() as f64 - k).exp2() * maxdev;
    let provenance = format!("sampler to extractor, from ({}, {}) {class} claim", best.delta, best.eps);
    let strength = Strength::from_flags(best.strong, false);
    let avg_strength = Strength::from_flags(best.strong, true);
    let mut ext = ext.with_claim(Claim::new(kind, k, eps_k, strength, provenance.clone()));
    if best.delta <= eta {
        let k_avg = s.n() as f64 - (1.0 / best.delta).log2() + (1.0 / eta).log2();
        ext.push_claim(Claim::new(kind, k_avg, best.eps + eta * maxdev, avg_strength, format!("{provenance}, average case")));
    }
    Ok(ext)
}

/// Chebyshev constant in the pairwise sampler's sample count.
pub const PAIRWISE_CONSTANT: f64 = 4.0;

/// `Samp(h)_i = h(i)` for `h` from a pairwise-independent family `[D] → {0,1}^m`.
pub fn pairwise_sampler(m: u32, delta: f64, eps: f64) -> Result<Sampler> {
    if !(delta > 0.0 && delta < 1.0 && eps > 0.0) {
        return Err(Error::Range(format!("need 0 < δ < 1 and ε > 0; got {delta}, {eps}")));
    }
    if 1.0 / (delta * eps * eps) >= (m as f64).exp2() {
        return Err(Error::Precondition(format!("1/(δε²) must be below 2^m = {}", 1u64 << m)));
    }
    let samples = (PAIRWISE_CONSTANT / (eps * eps * delta)).ceil() as u64;
    let width = (64 - (samples - 1).leading_zeros()).max(m);
    let fam = pairwise_family(width, m)?;
    let n = fam.d;
    let points: EvalFn = Arc::new(move |h, i| fam.eval(h, i));
    let provenance = "pairwise independence with Chebyshev".to_string();
    Ok(Sampler::new(format!("pairwise(m={m})"), n, m, samples, points)?.with_claim(SamplerClaim {
        class: FunctionClass::M2,
        delta,
        eps,
        strong: true,
        absolute: true,
        provenance,
    }))
}

/// Expander-neighbor sampler on `{0,1}^m` with `n = m` coins.
pub fn expander_sampler(m: u32, delta: f64, eps: f64, provider: &dyn GraphProvider) -> Result<Sampler> {
    if !(delta > 0.0 && delta < 1.0 && eps > 0.0) {
        return Err(Error::Range(format!("need 0 < δ < 1 and ε > 0; got {delta}, {eps}")));
    }
    let delta_log = (1.0 / delta).log2();
    let g = provider.graph(m)?;
    let target = eps * (-(m as f64) / 2.0).exp2();
    let k = m as f64 - delta_log;
    let walk = (1..=64u32)
        .find(|w| expander_l2_error(g.lambda_bound.powi(*w as i32), m, k) <= target)
        .filter(|w| g.d * w <= 30)
        .ok_or_else(|| Error::Infeasible(format!("walks on {} long enough for ℓ2 error {target} exceed 30 seed bits", g.name)))?;
    let ext = extractor_from_graph(&power_walk(&g, walk)?, delta_log)?;
    let mut s = extractor_to_sampler(&ext)?;
    s.label = format!("expander({}, m={m}, walk={walk})", g.name);
    Ok(s)
}

/// Thm-6.1-style sampler: the high-entropy KL extractor at error `ε²` and
/// failure `δ/2`, converted to subgaussian and subexponential claims.
pub fn subgaussian_sampler(
    m: u32,
    delta: f64,
    eps: f64,
    alpha: f64,
    inner: &dyn ExtractorProvider,
    graphs: &dyn GraphProvider,
) -> Result<Sampler> {
    if !(delta > 0.0 && delta < 1.0 && eps > 0.0) {
        return Err(Error::Range(format!("need 0 < δ < 1 and ε > 0; got {delta}, {eps}")));
    }
    let build = high_entropy_kl(m, delta / 2.0, eps * eps, alpha, inner, graphs)?;
    let ext = build.extractor;
    let k = ext.n() as f64 - build.report.delta_log as f64;
    let kl = ext
        .best_claim(DivergenceKind::Kl, k, Strength::StrongAvg)
        .ok_or_else(|| Error::MissingClaim("high-entropy extractor lost its KL claim".into()))?
        .eps;
    let delta_half = (k - ext.n() as f64).exp2();
    let mut s = Sampler::new(format!("subgaussian(m={m})"), ext.n(), m, 1u64 << ext.d(), ext.eval_fn())?;
    for (class, e) in [(FunctionClass::Subgaussian, kl_to_subgaussian(kl)), (FunctionClass::Subexponential, kl_to_subexponential(kl))] {
        debug_assert!(e <= eps + 1e-12);
        for strong in [false, true] {
            let provenance = "high-entropy KL extractor as sampler".to_string();
            s.push_claim(SamplerClaim { class, delta: delta_half, eps: e, strong, absolute: false, provenance: provenance.clone() });
            s.push_claim(SamplerClaim {
                class,
                delta: 2.0 * delta_half,
                eps: e,
                strong,
                absolute: true,
                provenance: format!("{provenance}, symmetric doubling"),
            });
        }
    }
    Ok(s)
}

/// Largest count table the failure meter allocates.
pub const MAX_COUNT_CELLS: usize = 1 << 24;

/// Empirical failure of one claim.
#[derive(Clone, Debug, Serialize)]
pub struct FailureReport {
    pub claim: SamplerClaim,
    /// Functions (or function tuples) tested.
    pub functions: usize,
    /// Worst fraction of coin strings with error above `ε`.
    pub worst_failure: f64,
    /// Mean over the tested functions.
    pub mean_failure: f64,
    /// Index classes sharing a function in strong tuples (`D` means fully independent).
    pub index_classes: u64,
}

impl FailureReport {
    pub fn within(&self) -> bool {
        self.worst_failure <= self.claim.delta
    }
}

/// Point counts per coin string and index class.
pub struct CoinTable {
    n: u32,
    m: u32,
    samples: u64,
    classes: u64,
    /// `counts[(x·G + g)·M + y]`.
    counts: Vec<u32>,
}

impl CoinTable {
    /// Enumerates every coin string. Indices are grouped by `i mod G` with
    /// `G` the largest power of two up to `max_classes` that fits the budget.
    pub fn build(s: &Sampler, max_classes: u64) -> Result<Self> {
        if s.n() > 20 {
            return Err(Error::Infeasible(format!("{} coin bits exceed exhaustive enumeration", s.n())));
        }
        let (xs, mm) = (1usize << s.n(), 1usize << s.m());
        if xs * mm > MAX_COUNT_CELLS {
            return Err(Error::Infeasible("count table exceeds the memory budget".into()));
        }
        let mut classes = max_classes.min(s.samples()).max(1);
        classes = 1 << (63 - classes.leading_zeros());
        while classes > 1 && xs * classes as usize * mm > MAX_COUNT_CELLS {
            classes /= 2;
        }
        let g = classes as usize;
        let samples = s.samples();
        let counts: Vec<u32> = (0..xs as u64)
            .into_par_iter()
            .flat_map_iter(|x| {
                let mut row = vec![0u32; g * mm];
                for i in 0..samples {
                    let y = s.point(x, i) & mask(s.m());
                    row[(i as usize % g) * mm + y as usize] += 1;
                }
                row
            })
            .collect();
        Ok(Self { n: s.n(), m: s.m(), samples, classes, counts })
    }

    pub fn classes(&self) -> u64 {
        self.classes
    }

    fn class_size(&self, g: u64) -> f64 {
        (self.samples / self.classes + u64::from(g < self.samples % self.classes)) as f64
    }

    /// Deviation `E_i f_i(Samp(x)_i) − E f_i(U_m)` for every coin string, where
    /// index class `g` uses `fs[assign[g]]`.
    pub fn deviations(&self, fs: &[Vec<f64>], assign: &[usize]) -> Vec<f64> {
        let (mm, g) = (1usize << self.m, self.classes as usize);
        let means: Vec<f64> = fs.iter().map(|f| f.iter().sum::<f64>() / mm as f64).collect();
        let offset: f64 = (0..g).map(|c| self.class_size(c as u64) * means[assign[c]]).sum::<f64>() / self.samples as f64;
        (0..1usize << self.n)
            .map(|x| {
                let mut acc = 0.0;
                for (c, &a) in assign.iter().enumerate() {
                    let row = &self.counts[(x * g + c) * mm..(x * g + c + 1) * mm];
                    let f = &fs[a];
                    acc += row.iter().zip(f).map(|(k, v)| *k as f64 * v).sum::<f64>();
                }
                acc / self.samples as f64 - offset
            })
            .collect()
    }
}

/// Measures every claim of `s` over all coin strings with `functions` random
/// certified members (non-strong) or member tuples (strong).
pub fn measure_failures(s: &Sampler, functions: usize, seed: u64) -> Result<Vec<FailureReport>> {
    let needs_strong = s.claims().iter().any(|c| c.strong);
    let plain = CoinTable::build(s, 1)?;
    let strong_table = if needs_strong { Some(CoinTable::build(s, s.samples())?) } else { None };
    let mut out = Vec::new();
    for (ci, claim) in s.claims().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ci as u64) << 40);
        let pool: Vec<Vec<f64>> = (0..functions).map(|_| claim.class.generate(s.m(), &mut rng)).collect();
        if let Some(bad) = pool.iter().position(|f| !claim.class.certify(f)) {
            return Err(Error::Precondition(format!("generated {} member {bad} failed certification", claim.class)));
        }
        let table = if claim.strong { strong_table.as_ref().expect("built when needed") } else { &plain };
        let g = table.classes() as usize;
        let mut worst = 0.0f64;
        let mut total = 0.0;
        for t in 0..functions {
            let assign: Vec<usize> = if claim.strong { (0..g).map(|_| rng.gen_range(0..functions)).collect() } else { vec![t; g] };
            let devs = table.deviations(&pool, &assign);
            let bad = devs.iter().filter(|d| if claim.absolute { d.abs() > claim.eps } else { **d > claim.eps }).count();
            let frac = bad as f64 / devs.len() as f64;
            worst = worst.max(frac);
            total += frac;
        }
        out.push(FailureReport {
            claim: claim.clone(),
            functions,
            worst_failure: worst,
            mean_failure: total / functions as f64,
            index_classes: if claim.strong { table.classes() } else { 1 },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::LhlProvider;
    use crate::expanders::{Mgg, XorComplete};
    use crate::hashing::lhl_extractor;

    #[test]
    fn generated_members_certify() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for class in FunctionClass::ALL {
            for m in [1, 3, 5] {
                for _ in 0..30 {
                    let f = class.generate(m, &mut rng);
                    assert!(class.certify(&f), "{class} m={m}");
                }
            }
        }
    }

    #[test]
    fn estimate_mean_examples() {
        let full = Sampler::new("enum", 2, 3, 8, Arc::new(|_, i| i)).unwrap();
        let f: Vec<f64> = (0..8).map(|v| v as f64).collect();
        assert!((estimate_mean(&full, &f, 1).unwrap() - 3.5).abs() < 1e-12);
        assert_eq!(estimate_mean(&full, &[0.25; 8], 3).unwrap(), 0.25);
    }

    #[test]
    fn extractor_claim_becomes_sampler_claim() {
        let ext = Extractor::new("pad", 4, 4, 4, Arc::new(|x, s| x ^ s))
            .unwrap()
            .with_claim(Claim::new(DivergenceKind::Tv, 2.0, 0.1, Strength::Plain, "test"));
        let s = extractor_to_sampler(&ext).unwrap();
        let one_sided = s.claims().iter().find(|c| !c.absolute).unwrap();
        assert_eq!((one_sided.class, one_sided.delta, one_sided.eps), (FunctionClass::Bounded01, 0.25, 0.1));
        let abs = s.claims().iter().find(|c| c.absolute).unwrap();
        assert_eq!(abs.delta, 0.5);
    }

    #[test]
    fn round_trip_claim_arithmetic() {
        let ext = Extractor::new("pad", 4, 4, 4, Arc::new(|x, s| x ^ s))
            .unwrap()
            .with_claim(Claim::new(DivergenceKind::Tv, 2.0, 0.1, Strength::Plain, "test"));
        let s = extractor_to_sampler(&ext).unwrap();
        let back = sampler_to_extractor(&s, FunctionClass::Bounded01, 3.0, 0.5).unwrap();
        // ε + δ·2^{n−k}·maxdev with δ = 1/4, n − k = 1, maxdev = 1.
        assert!((back.claimed_error(DivergenceKind::Tv, 3.0, Strength::Plain).unwrap() - 0.6).abs() < 1e-12);
        // Average case at n − 2 + 1 = 3 with η = 1/2.
        assert!((back.claimed_error(DivergenceKind::Tv, 3.0, Strength::Avg).unwrap() - 0.6).abs() < 1e-12);
        let zero = Sampler::new("z", 3, 2, 4, Arc::new(|_, i| i)).unwrap().with_claim(SamplerClaim {
            class: FunctionClass::Bounded01,
            delta: 0.0,
            eps: 0.2,
            strong: false,
            absolute: false,
            provenance: "test".into(),
        });
        let e = sampler_to_extractor(&zero, FunctionClass::Bounded01, 1.0, 1.0).unwrap();
        assert_eq!(e.claimed_error(DivergenceKind::Tv, 1.0, Strength::Plain), Some(0.2));
    }

    #[test]
    fn perfect_extractor_sampler_never_fails() {
        let ext = Extractor::new("pad", 3, 3, 3, Arc::new(|x, s| x ^ s))
            .unwrap()
            .with_claim(Claim::new(DivergenceKind::Tv, 2.0, 0.0, Strength::Plain, "test"));
        let s = extractor_to_sampler(&ext).unwrap();
        for r in measure_failures(&s, 50, 1).unwrap() {
            assert_eq!(r.worst_failure, 0.0);
        }
    }

    #[test]
    fn lhl_sampler_within_claims() {
        let ext = lhl_extractor(&pairwise_family(5, 1).unwrap()).unwrap().strong;
        let s = extractor_to_sampler(&ext).unwrap();
        assert!(s.claims().iter().any(|c| c.class == FunctionClass::Subgaussian));
        for r in measure_failures(&s, 100, 3).unwrap() {
            assert!(r.within(), "{r:?}");
        }
    }

    #[test]
    fn pairwise_sampler_shape() {
        let s = pairwise_sampler(6, 0.25, 0.5).unwrap();
        assert_eq!(s.samples(), 64);
        assert_eq!(s.n(), 12);
        assert!(pairwise_sampler(3, 0.25, 0.5).is_err());
        // Constant functions have zero variance, hence zero failure.
        let t = CoinTable::build(&s, 1).unwrap();
        assert!(t.deviations(&[vec![0.7; 64]], &[0]).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn expander_sampler_uses_m_coins() {
        let s = expander_sampler(4, 0.25, 1.0, &Mgg).unwrap();
        assert_eq!(s.n(), 4);
        let c = s.claims().iter().find(|c| c.class == FunctionClass::M2 && !c.absolute && c.delta == 0.25).unwrap();
        assert!(c.eps <= 1.0 + 1e-12);
        let x = sampler_to_extractor(&s, FunctionClass::M2, 4.0, 1.0);
        assert!(x.is_ok());
    }

    #[test]
    fn subgaussian_sampler_ledger() {
        let s = subgaussian_sampler(4, 0.5, 1.2, 1.0, &LhlProvider, &XorComplete).unwrap();
        assert_eq!(s.m(), 4);
        for c in s.claims() {
            assert!(c.eps <= 1.2);
            assert!(c.delta <= 0.5 + 1e-12);
        }
        assert!(s.claims().iter().any(|c| c.class == FunctionClass::Subexponential && c.absolute && c.strong));
    }
}
