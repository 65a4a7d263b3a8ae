use divext::compose::LhlProvider;
use divext::divergences::{log_mgf, DivergenceKind};
use divext::expanders::XorComplete;
use divext::hashing::{lhl_extractor, pairwise_family};
use divext::samplers::{
    estimate_mean, extractor_to_sampler, measure_failures, pairwise_sampler, sampler_to_extractor, subgaussian_sampler,
    FunctionClass,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRID: [f64; 13] = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Checked here against the MGF definition directly, not the library certifier.
    #[test]
    fn generated_subgaussian_members_meet_the_mgf_grid((m, seed) in (1u32..=6, any::<u64>())) {
        let f = FunctionClass::Subgaussian.generate(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        let range = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min);
        for t in GRID.iter().flat_map(|t| [*t, -*t]) {
            // Hoeffding certifies range ≤ 1 at every t.
            let allowed = if range <= 1.0 + 1e-12 { t * t / 8.0 + 1e-12 } else { t * t / 8.0 * (1.0 - 1e-3) };
            prop_assert!(log_mgf(&f, t) <= allowed, "t={t}: {} > {allowed}", log_mgf(&f, t));
        }
    }

    #[test]
    fn generated_m2_members_have_unit_norm((m, seed) in (1u32..=8, any::<u64>())) {
        let f = FunctionClass::M2.generate(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let norm = (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt();
        prop_assert!(norm <= 1.0 + 1e-9);
    }

    #[test]
    fn estimates_lie_between_extremes((x, seed) in (0u64..1 << 12, any::<u64>())) {
        let s = pairwise_sampler(6, 0.25, 0.5).unwrap();
        let f = FunctionClass::Bounded01.generate(6, &mut ChaCha8Rng::seed_from_u64(seed));
        let e = estimate_mean(&s, &f, x).unwrap();
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        prop_assert!(lo - 1e-12 <= e && e <= hi + 1e-12);
    }
}

#[test]
fn lhl_sampler_round_trip_keeps_claim_arithmetic() {
    let ext = lhl_extractor(&pairwise_family(5, 1).unwrap()).unwrap().strong;
    let s = extractor_to_sampler(&ext).unwrap();
    let k = 4.0;
    let eta = 0.25;
    let back = sampler_to_extractor(&s, FunctionClass::Bounded01, k, eta).unwrap();
    let best = s
        .claims()
        .iter()
        .filter(|c| c.class == FunctionClass::Bounded01)
        .map(|c| c.eps + c.delta * (5.0 - k as f64).exp2())
        .fold(f64::INFINITY, f64::min);
    let claimed = back.claimed_error(DivergenceKind::Tv, k, divext::compose::Strength::Strong).unwrap();
    assert!((claimed - best).abs() < 1e-12);
}

#[test]
fn tiny_lhl_sampler_fails_rarely_on_subgaussian_functions() {
    let ext = lhl_extractor(&pairwise_family(5, 2).unwrap()).unwrap().strong;
    let s = extractor_to_sampler(&ext).unwrap();
    for r in measure_failures(&s, 100, 11).unwrap() {
        assert!(r.worst_failure <= r.claim.delta, "{r:?}");
    }
}

#[test]
fn subgaussian_sampler_claims_track_the_kl_budget() {
    let s = subgaussian_sampler(4, 0.5, 1.2, 1.0, &LhlProvider, &XorComplete).unwrap();
    for c in s.claims() {
        assert!(c.eps <= 1.2 + 1e-12);
        let one_sided = if c.absolute { c.delta / 2.0 } else { c.delta };
        assert!((one_sided - 0.25).abs() < 1e-12, "{c:?}");
    }
}
