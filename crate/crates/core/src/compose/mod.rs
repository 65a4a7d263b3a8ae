//! Extractor combinators with claim bookkeeping.
//!
//! Every combinator derives its output claims from component claims by a
//! fixed formula and refuses to build when a required component claim, of the
//! exact strength the argument needs, is missing.

pub mod extractor;

use std::sync::Arc;

use serde::Serialize;

pub use extractor::*;

use crate::divergences::{binary_entropy, DivergenceKind};
use crate::error::{Error, Result};
use crate::expanders::{extractor_from_graph, power_walk, walk_length, GraphProvider};
use crate::hashing::{cheapest_lhl_family, lhl_extractor};

const KL: DivergenceKind = DivergenceKind::Kl;

/// `{0,1}^n → {0,1}^0`, perfect at every entropy.
pub fn empty_extractor(n: u32) -> Result<Extractor> {
    Ok(Extractor::new(format!("empty({n})"), n, 0, 0, Arc::new(|_, _| 0))?
        .with_claim(Claim::new(DivergenceKind::MaxDiv, 0.0, 0.0, Strength::StrongAvg, "trivial: empty output")))
}

/// `Ext(·, s) = s` on an empty source: the seed itself, perfect at every entropy.
pub fn seed_passthrough(d: u32) -> Result<Extractor> {
    Ok(Extractor::new(format!("seed({d})"), 0, d, d, Arc::new(|_, s| s))?
        .with_claim(Claim::new(DivergenceKind::MaxDiv, 0.0, 0.0, Strength::Avg, "trivial: uniform seed")))
}

/// Widens the seed by `extra` high-order bits the extractor ignores.
///
/// Claims carry over unchanged; the waste becomes the whole padded seed.
pub fn pad_seed(ext: &Extractor, extra: u32) -> Result<Extractor> {
    if extra == 0 {
        return Ok(ext.clone());
    }
    let (d, eval) = (ext.d(), ext.eval_fn());
    let mut out = Extractor::new(
        format!("pad{extra}({})", ext.label()),
        ext.n(),
        d + extra,
        ext.m(),
        Arc::new(move |x, s| eval(x, s & mask(d))),
    )?;
    for c in ext.claims() {
        out.push_claim(c.clone());
    }
    if let Some(w) = ext.waste() {
        if w.injectivity == Injectivity::Pair && is_seed_waste(ext)? {
            out = out.with_waste(Waste { width: d + extra, map: Arc::new(|_, s| s), injectivity: Injectivity::Pair });
        }
    }
    Ok(out)
}

fn is_seed_waste(ext: &Extractor) -> Result<bool> {
    let w = ext.waste().ok_or_else(|| Error::Precondition("no waste".into()))?;
    if w.width != ext.d() {
        return Ok(false);
    }
    // Spot-check; the seed-as-waste shape is what the expander builder emits.
    Ok((0..1u64 << ext.d().min(8)).all(|s| (w.map)(0, s) == s && (w.map)(mask(ext.n()), s) == s))
}

fn clamp_k(k: f64) -> f64 {
    k.max(0.0)
}

fn missing(what: &str, ext: &Extractor, kind: DivergenceKind, k: f64, strength: Strength) -> Error {
    Error::MissingClaim(format!("{what} '{}' has no {strength} {kind} claim at k = {k}", ext.label()))
}

/// Block composition `Ext((x, y), s) = Ext_out(x, Ext_in(y, s))`.
///
/// The source packs `x` in the high `outer.n` bits. The outer extractor needs a
/// `D_{1+α}` claim at `outer.n − Δ`, the inner an average-case KL claim at
/// `inner.n − Δ`; the result claims KL error `ε_out + (1 + 1/α)·ε_in` at
/// `outer.n + inner.n − Δ`. It is strong when the inner claim is strong
/// average-case, and average-case when the outer claim is.
pub fn compose_block(outer: &Extractor, inner: &Extractor, alpha: f64, delta_log: f64) -> Result<Extractor> {
    if inner.m() != outer.d() {
        return Err(Error::WidthMismatch(inner.m(), outer.d()));
    }
    if !(alpha > 0.0) || delta_log < 0.0 {
        return Err(Error::Range(format!("need alpha > 0 and delta ≥ 0, got {alpha}, {delta_log}")));
    }
    let order = DivergenceKind::Renyi(1.0 + alpha).canonical();
    let k_out = clamp_k(outer.n() as f64 - delta_log);
    let k_in = clamp_k(inner.n() as f64 - delta_log);
    let factor = 1.0 + 1.0 / alpha;

    let mut derived = Vec::new();
    for (want_strong, want_avg) in [(false, false), (false, true), (true, false), (true, true)] {
        let out_strength = Strength::from_flags(false, want_avg);
        let in_strength = Strength::from_flags(want_strong, true);
        let (Some(e_out), Some(e_in)) = (outer.claimed_error(order, k_out, out_strength), inner.claimed_error(KL, k_in, in_strength)) else {
            continue;
        };
        derived.push(Claim::new(
            KL,
            outer.n() as f64 + inner.n() as f64 - delta_log,
            e_out + factor * e_in,
            Strength::from_flags(want_strong, want_avg),
            format!("block composition, outer D_{{1+{alpha}}} and inner average-case KL"),
        ));
    }
    if derived.is_empty() {
        if outer.claimed_error(order, k_out, Strength::Plain).is_none() {
            return Err(missing("outer", outer, order, k_out, Strength::Plain));
        }
        return Err(missing("inner", inner, KL, k_in, Strength::Avg));
    }

    let low = inner.n();
    let (fo, fi) = (outer.eval_fn(), inner.eval_fn());
    let mut ext = Extractor::new(
        format!("block({}, {})", outer.label(), inner.label()),
        outer.n() + inner.n(),
        inner.d(),
        outer.m(),
        Arc::new(move |xy, s| fo(xy >> low, fi(xy & mask(low), s))),
    )?;
    for c in derived {
        ext.push_claim(c);
    }
    Ok(ext)
}

/// Re-extraction from waste: `Ext(x, (s, t)) = (Ext₁(x, s), Ext₂(Waste₁(x, s), t))`.
///
/// The seed packs `s` above `t` and the output packs `Ext₁` above `Ext₂`.
/// For each KL claim `(k₁, ε₁)` of `ext1` this derives `(k₁, ε₁ + ε₂)`:
///
/// * non-strong, when `(Ext₁, Waste₁)` is injective and `ext2` is
///   average-case at `k₁ + d₁ − m₁`; average-case if `ext1` is;
/// * strong, when `(s, Ext₁, Waste₁)` is injective, `ext1` is strong and `ext2`
///   is strong average-case at `k₁ − m₁`; average-case if `ext1` is.
pub fn reextract(ext1: &Extractor, ext2: &Extractor) -> Result<Extractor> {
    let waste = ext1.waste().ok_or_else(|| Error::Precondition(format!("'{}' has no waste map", ext1.label())))?;
    if ext2.n() != waste.width {
        return Err(Error::WidthMismatch(ext2.n(), waste.width));
    }
    let (d1, m1) = (ext1.d() as f64, ext1.m() as f64);
    let mut ks: Vec<f64> = ext1.claims().iter().filter(|c| c.covers(KL, c.k, Strength::Plain).is_some()).map(|c| c.k).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();

    let mut derived: Vec<Claim> = Vec::new();
    for &k1 in &ks {
        // Non-strong route needs the pair to be injective.
        if waste.injectivity == Injectivity::Pair {
            if let Some(e2) = ext2.claimed_error(KL, clamp_k(k1 + d1 - m1), Strength::Avg) {
                for avg in [false, true] {
                    if let Some(e1) = ext1.claimed_error(KL, k1, Strength::from_flags(false, avg)) {
                        derived.push(Claim::new(KL, k1, e1 + e2, Strength::from_flags(false, avg), "re-extraction from waste"));
                    }
                }
            }
        }
        // Strong route: either injectivity form suffices since Pair implies WithSeed.
        if let Some(e2) = ext2.claimed_error(KL, clamp_k(k1 - m1), Strength::StrongAvg) {
            for avg in [false, true] {
                if let Some(e1) = ext1.claimed_error(KL, k1, Strength::from_flags(true, avg)) {
                    derived.push(Claim::new(KL, k1, e1 + e2, Strength::from_flags(true, avg), "strong re-extraction from waste"));
                }
            }
        }
    }
    if derived.is_empty() {
        return Err(Error::MissingClaim(format!(
            "no KL claim of '{}' meets the entropy precondition of '{}'",
            ext1.label(),
            ext2.label()
        )));
    }
    derived.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.eps.total_cmp(&b.eps)));
    derived.dedup_by(|a, b| a.k == b.k && a.strength == b.strength);

    let (m2, d2) = (ext2.m(), ext2.d());
    let (f1, f2, wm) = (ext1.eval_fn(), ext2.eval_fn(), waste.map.clone());
    let mut ext = Extractor::new(
        format!("reextract({}, {})", ext1.label(), ext2.label()),
        ext1.n(),
        ext1.d() + d2,
        ext1.m() + m2,
        Arc::new(move |x, st| {
            let (s, t) = (st >> d2, st & mask(d2));
            (f1(x, s) << m2) | f2(wm(x, s), t)
        }),
    )?;
    for c in derived {
        ext.push_claim(c);
    }
    Ok(ext)
}

/// Widths up to which composite waste maps are re-verified exhaustively.
pub const ZIGZAG_VERIFY_BITS: u32 = 22;

/// Block composition carrying the composite waste `(Waste_out, Waste_in)`,
/// checked for `(Ext, Waste)` injectivity when small enough.
pub fn zigzag_block(outer: &Extractor, inner: &Extractor, alpha: f64, delta_log: f64) -> Result<Extractor> {
    let wo = outer.waste().ok_or_else(|| Error::Precondition(format!("outer '{}' has no waste map", outer.label())))?;
    let wi = inner.waste().ok_or_else(|| Error::Precondition(format!("inner '{}' has no waste map", inner.label())))?;
    if wo.injectivity != Injectivity::Pair || wi.injectivity != Injectivity::Pair {
        return Err(Error::Precondition("zig-zag needs (Ext, Waste) injective for both components".into()));
    }
    let block = compose_block(outer, inner, alpha, delta_log)?;
    let (low, w_in) = (inner.n(), wi.width);
    let (fi, wo_map, wi_map) = (inner.eval_fn(), wo.map.clone(), wi.map.clone());
    let width = wo.width + w_in;
    let block = block.with_waste(Waste {
        width,
        map: Arc::new(move |xy, s| {
            let (x, y) = (xy >> low, xy & mask(low));
            (wo_map(x, fi(y, s)) << w_in) | wi_map(y, s)
        }),
        injectivity: Injectivity::Pair,
    });
    if block.n() + block.d() <= ZIGZAG_VERIFY_BITS && !block.verify_waste_injective(ZIGZAG_VERIFY_BITS)? {
        return Err(Error::Precondition("composite waste map is not injective".into()));
    }
    Ok(block)
}

/// Zig-zag: block composition whose waste is re-extracted.
///
/// The composite waste `(Waste_out(x, Ext_in(y, s)), Waste_in(y, s))` is
/// injective together with the block output whenever both component pairs
/// are; this is re-checked exhaustively when the block has at most
/// [`ZIGZAG_VERIFY_BITS`] input bits.
pub fn zigzag(outer: &Extractor, inner: &Extractor, waste_ext: &Extractor, alpha: f64, delta_log: f64) -> Result<Extractor> {
    let block = zigzag_block(outer, inner, alpha, delta_log)?;
    let out = reextract(&block, waste_ext)?;
    Ok(out.with_label(format!("zigzag({}, {}, {})", outer.label(), inner.label(), waste_ext.label())))
}

/// Entropy-loss reduction: re-extract the source itself with a leftover-hash
/// extractor.
///
/// `ext1` must be a strong KL extractor with error at most `ε/2` at `k`;
/// `ext2` is the cheapest strong LHL extractor with error at most `ε/2` at
/// `d_extra`, with as many output bits as that allows.
pub fn rrv_transform(ext1: &Extractor, k: f64, d_extra: u32, eps: f64) -> Result<Extractor> {
    let loss = k - ext1.m() as f64;
    if d_extra as f64 > loss + 1e-9 {
        return Err(Error::Range(format!("d_extra = {d_extra} exceeds the entropy loss {loss}")));
    }
    let e1 = ext1.claimed_error(KL, k, Strength::Strong).ok_or_else(|| missing("ext1", ext1, KL, k, Strength::Strong))?;
    if e1 > eps / 2.0 + 1e-12 {
        return Err(Error::Precondition(format!("ext1 error {e1} exceeds eps/2 = {}", eps / 2.0)));
    }
    let n = ext1.n();
    let mut ext2 = None;
    for m2 in (0..=d_extra.min(n)).rev() {
        if let Some(fam) = cheapest_lhl_family(n, m2, d_extra as f64, eps / 2.0)? {
            ext2 = Some(if m2 == 0 { empty_extractor(n)? } else { lhl_extractor(&fam)?.strong });
            break;
        }
    }
    let ext2 = ext2.expect("m2 = 0 always fits");
    let with_waste = ext1.clone().with_waste(Waste { width: n, map: Arc::new(|x, _| x), injectivity: Injectivity::WithSeed });
    let out = reextract(&with_waste, &ext2)?;
    Ok(out.with_label(format!("rrv({}, +{})", ext1.label(), d_extra)))
}

/// Adds `(k, m·ε' + h(ε'))` KL claims for every TV claim with `ε' ≤ 1/2`.
pub fn tv_to_kl(ext: &Extractor) -> Result<Extractor> {
    let m = ext.m() as f64;
    let new: Vec<Claim> = ext
        .claims()
        .iter()
        .filter(|c| c.kind == DivergenceKind::Tv && c.eps <= 0.5)
        .map(|c| Claim::new(KL, c.k, m * c.eps + binary_entropy(c.eps), c.strength, "TV to KL via Fano-type bound"))
        .collect();
    if new.is_empty() {
        return Err(Error::Precondition(format!("'{}' has no TV claim with error ≤ 1/2", ext.label())));
    }
    let mut out = ext.clone();
    for c in new {
        out.push_claim(c);
    }
    Ok(out)
}

/// TV error that suffices for KL error `eps` on `m` output bits.
pub fn tv_eps_for_kl(eps: f64, m: u32) -> f64 {
    eps.min(0.5) / (48.0 * (m as f64 + (1.0 / eps).log2().max(0.0)))
}

/// Source of strong average-case KL extractors for the high-entropy builder.
pub trait ExtractorProvider: Send + Sync {
    fn name(&self) -> &str;
    /// Smallest integer min-entropy at which an `m`-bit output can reach `eps`.
    fn min_entropy(&self, m: u32, eps: f64) -> Result<u32>;
    /// Strong average-case `(k, eps)` KL extractor `{0,1}^n → {0,1}^m` whose
    /// waste makes `(Ext, Waste)` injective.
    fn strong_avg_kl(&self, n: u32, m: u32, k: u32, eps: f64) -> Result<Extractor>;
}

/// Leftover-hash extractors with waste `(x, s)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LhlProvider;

impl ExtractorProvider for LhlProvider {
    fn name(&self) -> &str {
        "lhl"
    }

    fn min_entropy(&self, m: u32, eps: f64) -> Result<u32> {
        if !(eps > 0.0) {
            return Err(Error::Range(format!("eps must be positive, got {eps}")));
        }
        if m == 0 {
            return Ok(0);
        }
        let k = m as f64 - (eps.exp2() - 1.0).log2();
        Ok(k.ceil().max(0.0) as u32)
    }

    fn strong_avg_kl(&self, n: u32, m: u32, k: u32, eps: f64) -> Result<Extractor> {
        let fam = cheapest_lhl_family(n, m, k as f64, eps)?
            .ok_or_else(|| Error::Infeasible(format!("no hash family reaches {eps} at k = {k}, m = {m}")))?;
        let ext = if m == 0 { empty_extractor(n)? } else { lhl_extractor(&fam)?.strong };
        let d = ext.d();
        if n + d > 63 {
            return Err(Error::Infeasible(format!("waste of {} bits", n + d)));
        }
        Ok(ext.with_waste(Waste { width: n + d, map: Arc::new(move |x, s| (x << d) | s), injectivity: Injectivity::Pair }))
    }
}

/// The parts and error budget of a high-min-entropy KL extractor.
#[derive(Clone, Debug)]
pub struct HighEntropyBuild {
    pub extractor: Extractor,
    pub outer: Extractor,
    pub inner: Extractor,
    pub waste: Extractor,
    pub report: HighEntropyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct HighEntropyReport {
    pub m: u32,
    pub n: u32,
    pub d: u32,
    /// `⌈log2(1/δ)⌉`; the claim holds at `k = n − delta_log`.
    pub delta_log: u32,
    pub n_out: u32,
    pub d_out: u32,
    pub walk: u32,
    pub n_in: u32,
    pub k_in: u32,
    pub d_in: u32,
    pub d_waste: u32,
    pub eps_out: f64,
    pub eps_in: f64,
    pub eps_waste: f64,
    /// `eps_out + 2·eps_in + eps_waste`.
    pub total: f64,
    pub eps: f64,
    /// `α` with `n = m + (1 + α)·delta_log`.
    pub achieved_alpha: f64,
    /// `d_out / log2(4/(δε))`.
    pub seed_constant: f64,
}

/// High-min-entropy strong average-case KL extractor with output exactly `m`.
///
/// An expander outer extractor (D₂, error ≤ ε/4) consumes `n_out` bits with
/// seed `d_out = m − n_out`; the inner extractor supplies that seed at error
/// ε/4; the waste extractor recovers `d_out` more bits at error ε/4. Zig-zag
/// with the D₂ outer costs a factor 2 on the inner error, so the total is at
/// most ε. `alpha` is accepted for interface parity; the composition runs at
/// Rényi order 2 and the report states the α actually achieved.
pub fn high_entropy_kl(
    m: u32,
    delta: f64,
    eps: f64,
    alpha: f64,
    inner_provider: &dyn ExtractorProvider,
    graphs: &dyn GraphProvider,
) -> Result<HighEntropyBuild> {
    if !(delta > 0.0 && delta < 1.0) || !(eps > 0.0) || !(alpha > 0.0) {
        return Err(Error::Range(format!("need 0 < δ < 1, ε > 0, α > 0; got {delta}, {eps}, {alpha}")));
    }
    let delta_log = (1.0 / delta).log2().ceil() as u32;
    let dl = delta_log as f64;
    let quarter = eps / 4.0;

    // Largest outer width whose cheapest walk still fits in the remaining seed.
    let mut chosen = None;
    for n_out in (2..m).rev() {
        let Ok(g) = graphs.graph(n_out) else { continue };
        if g.d > m - n_out {
            continue;
        }
        if let Some(w) = walk_length(g.lambda_bound, n_out, dl, quarter, (m - n_out) / g.d.max(1)) {
            chosen = Some((n_out, g, w));
            break;
        }
    }
    let (n_out, g, walk) =
        chosen.ok_or_else(|| Error::Infeasible(format!("no {} graph leaves room for an m = {m} output", graphs.name())))?;
    let d_out = m - n_out;
    let outer = pad_seed(&extractor_from_graph(&power_walk(&g, walk)?, dl)?, d_out - g.d * walk)?;
    let eps_out = outer
        .claimed_error(DivergenceKind::Renyi(2.0), n_out as f64 - dl, Strength::Plain)
        .ok_or_else(|| missing("outer", &outer, DivergenceKind::Renyi(2.0), n_out as f64 - dl, Strength::Plain))?;

    let k_in = inner_provider.min_entropy(d_out, quarter)?;
    let n_in = k_in + delta_log;
    let inner = inner_provider.strong_avg_kl(n_in, d_out, k_in, quarter)?;
    let eps_in = inner
        .claimed_error(KL, k_in as f64, Strength::StrongAvg)
        .ok_or_else(|| missing("inner", &inner, KL, k_in as f64, Strength::StrongAvg))?;

    let w_out = outer.waste().map(|w| w.width).unwrap_or(0);
    let w_in = inner.waste().map(|w| w.width).unwrap_or(0);
    let waste = inner_provider.strong_avg_kl(w_out + w_in, d_out, k_in, quarter)?;
    let eps_waste = waste
        .claimed_error(KL, k_in as f64, Strength::StrongAvg)
        .ok_or_else(|| missing("waste", &waste, KL, k_in as f64, Strength::StrongAvg))?;

    let extractor = zigzag(&outer, &inner, &waste, 1.0, dl)?.with_label(format!("high-entropy-kl(m={m})"));
    let n = n_out + n_in;
    let total = eps_out + 2.0 * eps_in + eps_waste;
    let claimed = extractor
        .claimed_error(KL, n as f64 - dl, Strength::StrongAvg)
        .ok_or_else(|| missing("assembly", &extractor, KL, n as f64 - dl, Strength::StrongAvg))?;
    if extractor.m() != m || (claimed - total).abs() > 1e-12 || total > eps + 1e-12 {
        return Err(Error::Precondition(format!("assembly arithmetic failed: m = {}, claim {claimed}, budget {total} vs {eps}", extractor.m())));
    }
    let report = HighEntropyReport {
        m,
        n,
        d: extractor.d(),
        delta_log,
        n_out,
        d_out,
        walk,
        n_in,
        k_in,
        d_in: inner.d(),
        d_waste: waste.d(),
        eps_out,
        eps_in,
        eps_waste,
        total,
        eps,
        achieved_alpha: (n as f64 - m as f64) / dl - 1.0,
        seed_constant: d_out as f64 / (4.0 / (delta * eps)).log2(),
    };
    Ok(HighEntropyBuild { extractor, outer, inner, waste, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expanders::{Mgg, XorComplete};
    use crate::hashing::universal_family;

    #[test]
    fn block_claim_formula() {
        let outer = extractor_from_graph(&XorComplete.graph(3).unwrap(), 1.0).unwrap();
        let fam = universal_family(5, 3).unwrap();
        let inner = lhl_extractor(&fam).unwrap().strong;
        for alpha in [1.0, 0.5] {
            let ext = compose_block(&outer, &inner, alpha, 1.0).unwrap();
            let e_in = fam.lhl_error(4.0);
            let got = ext.claimed_error(KL, 7.0, Strength::StrongAvg);
            // XOR outer is perfect; λ = 0.
            assert!((got.unwrap() - (1.0 + 1.0 / alpha) * e_in).abs() < 1e-12);
        }
        assert_eq!(compose_block(&outer, &inner, 1.0, 1.0).unwrap().n(), 8);
    }

    #[test]
    fn block_with_degenerate_inner_is_outer() {
        let outer = extractor_from_graph(&Mgg.graph(4).unwrap(), 1.0).unwrap();
        let inner = seed_passthrough(outer.d()).unwrap();
        let ext = compose_block(&outer, &inner, 1.0, 1.0).unwrap();
        let e_out = outer.claimed_error(DivergenceKind::Renyi(2.0), 3.0, Strength::Plain).unwrap();
        assert_eq!(ext.claimed_error(KL, 3.0, Strength::Avg), Some(e_out));
        for x in 0..16 {
            for s in 0..1u64 << outer.d() {
                assert_eq!(ext.eval(x, s), outer.eval(x, s));
            }
        }
    }

    #[test]
    fn block_rejects_mismatch() {
        let outer = extractor_from_graph(&XorComplete.graph(3).unwrap(), 1.0).unwrap();
        let inner = lhl_extractor(&universal_family(5, 2).unwrap()).unwrap().strong;
        assert!(matches!(compose_block(&outer, &inner, 1.0, 1.0), Err(Error::WidthMismatch(2, 3))));
        let bare = Extractor::new("bare", 5, 5, 3, Arc::new(|x, s| (x ^ s) & 7)).unwrap();
        assert!(matches!(compose_block(&outer, &bare, 1.0, 1.0), Err(Error::MissingClaim(_))));
    }

    #[test]
    fn reextract_with_empty_is_padding() {
        let ext1 = extractor_from_graph(&Mgg.graph(4).unwrap(), 1.0).unwrap();
        let ext2 = empty_extractor(ext1.waste().unwrap().width).unwrap();
        let out = reextract(&ext1, &ext2).unwrap();
        assert_eq!((out.d(), out.m()), (ext1.d(), ext1.m()));
        assert_eq!(out.claimed_error(KL, 3.0, Strength::Avg), ext1.claimed_error(KL, 3.0, Strength::Avg));
    }

    #[test]
    fn reextract_strong_precondition() {
        let fam = universal_family(6, 2).unwrap();
        let ext1 = lhl_extractor(&fam)
            .unwrap()
            .strong
            .with_waste(Waste { width: 6, map: Arc::new(|x, _| x), injectivity: Injectivity::WithSeed });
        let ext2 = lhl_extractor(&universal_family(6, 1).unwrap()).unwrap().strong;
        let out = reextract(&ext1, &ext2).unwrap();
        // k₂ ≤ k₁ − m₁: at k₁ = 5 the inner request is at 3.
        let want = fam.lhl_error(5.0) + universal_family(6, 1).unwrap().lhl_error(3.0);
        assert!((out.claimed_error(KL, 5.0, Strength::StrongAvg).unwrap() - want).abs() < 1e-12);
        // WithSeed gives no non-strong route, but strong implies plain for KL.
        assert!(out.claims().iter().all(|c| c.strength.is_strong()));
        let bare = Extractor::new("bare", 6, 6, 2, Arc::new(|x, s| (x ^ s) & 3)).unwrap();
        assert!(matches!(reextract(&bare, &ext2), Err(Error::Precondition(_))));
    }

    #[test]
    fn rrv_shapes() {
        let fam = universal_family(6, 2).unwrap();
        let ext1 = lhl_extractor(&fam).unwrap().strong;
        let e1 = fam.lhl_error(5.0);
        let same = rrv_transform(&ext1, 5.0, 0, 2.0 * e1).unwrap();
        assert_eq!(same.m(), 2);
        // A tight budget leaves no room for extra output.
        assert_eq!(rrv_transform(&ext1, 5.0, 3, 2.0 * e1).unwrap().m(), 2);
        let grown = rrv_transform(&ext1, 5.0, 3, 2.0).unwrap();
        assert_eq!(grown.m(), 5);
        assert!(grown.claimed_error(KL, 5.0, Strength::Strong).unwrap() <= 2.0 + 1e-12);
        assert!(matches!(rrv_transform(&ext1, 5.0, 4, 2.0 * e1), Err(Error::Range(_))));
    }

    #[test]
    fn tv_to_kl_arithmetic() {
        let base = Extractor::new("t", 4, 2, 4, Arc::new(|x, s| x ^ s)).unwrap();
        let a = tv_to_kl(&base.clone().with_claim(Claim::new(DivergenceKind::Tv, 2.0, 0.5, Strength::Strong, "t"))).unwrap();
        assert_eq!(a.claimed_error(KL, 2.0, Strength::Strong), Some(3.0));
        let z = tv_to_kl(&base.clone().with_claim(Claim::new(DivergenceKind::Tv, 2.0, 0.0, Strength::Plain, "t"))).unwrap();
        assert_eq!(z.claimed_error(KL, 2.0, Strength::Plain), Some(0.0));
        assert!(tv_to_kl(&base.with_claim(Claim::new(DivergenceKind::Tv, 2.0, 0.6, Strength::Plain, "t"))).is_err());
        assert!((tv_eps_for_kl(0.5, 3) - 0.5 / (48.0 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn high_entropy_output_width_and_budget() {
        let b = high_entropy_kl(4, 0.5, 1.5, 1.0, &LhlProvider, &XorComplete).unwrap();
        let r = &b.report;
        assert_eq!(b.extractor.m(), 4);
        assert_eq!(r.n_out + b.waste.m(), 4);
        assert_eq!((r.n, r.d, r.delta_log), (7, 17, 1));
        assert!((r.total - (r.eps_out + 2.0 * r.eps_in + r.eps_waste)).abs() < 1e-15);
        assert!(r.total <= 1.5);
        let big = high_entropy_kl(4, 0.25, 1.0, 1.0, &LhlProvider, &XorComplete).unwrap();
        assert_eq!(big.extractor.m(), 4);
        assert!(big.report.total <= 1.0);
    }
}
