use std::collections::BTreeSet;

use divext::divergences::{
    binary_entropy, divergence, kl, lp_distance, moment_class_distance, subgaussian_distance, tv, DivergenceKind,
    SolverConfig, TGrid,
};
use divext::domain::{
    conditional_min_entropy, min_entropy, pushforward, shannon_entropy, Distribution, FlatSource, JointSource,
};
use proptest::prelude::*;

/// Weights with a fair chance of exact zeros, normalized.
fn weights(size: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..4, 0.0f64..1.0), size).prop_map(|v| {
        let mut w: Vec<f64> = v.into_iter().map(|(tag, x)| if tag == 0 { 0.0 } else { x + 1e-3 }).collect();
        if w.iter().all(|x| *x == 0.0) {
            w[0] = 1.0;
        }
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    })
}

fn dist(m: u32) -> impl Strategy<Value = Distribution> {
    weights(1 << m).prop_map(move |w| Distribution::new(m, w).unwrap())
}

fn width_and_pair(max: u32) -> impl Strategy<Value = (u32, Distribution, Distribution)> {
    (1..=max).prop_flat_map(|m| (Just(m), dist(m), dist(m)))
}

fn width_pair_and_map(max: u32) -> impl Strategy<Value = (Distribution, Distribution, Vec<u64>, u32)> {
    (1..=max, 1..=max).prop_flat_map(|(m, out)| {
        (dist(m), dist(m), prop::collection::vec(0..1u64 << out, 1usize << m), Just(out))
    })
}

fn uniform(m: u32) -> Distribution {
    Distribution::uniform(m).unwrap()
}

const ORDERS: [f64; 8] = [0.0, 0.25, 0.5, 0.9, 1.0, 1.5, 2.0, 3.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn entropy_sandwich(p in (1u32..=6).prop_flat_map(dist)) {
        let (h_min, h) = (min_entropy(&p), shannon_entropy(&p));
        prop_assert!(h_min <= h + 1e-12);
        prop_assert!(h <= p.width() as f64 + 1e-12);
    }

    #[test]
    fn pushforward_preserves_mass((p, _, f, out) in width_pair_and_map(6)) {
        let image = pushforward(&p, &f, out).unwrap();
        prop_assert!((image.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_source_min_entropy_is_log_size(
        (n, support) in (1u32..=8).prop_flat_map(|n| (Just(n), prop::collection::btree_set(0..1u64 << n, 1..=(1usize << n).min(40))))
    ) {
        let f = FlatSource::new(n, support.iter().copied().collect()).unwrap();
        let h = min_entropy(&f.to_distribution().unwrap());
        let expected = (support.len() as f64).log2();
        if support.len().is_power_of_two() {
            prop_assert_eq!(h, expected);
        } else {
            prop_assert!((h - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_min_entropy_identity(
        (w, conds) in (1usize..=4).prop_flat_map(|z| (weights(z), prop::collection::vec(weights(8), z)))
    ) {
        let z = w.len();
        let side = z.next_power_of_two().trailing_zeros();
        let mut ws = w.clone();
        ws.resize(1 << side, 0.0);
        let mut cs: Vec<Distribution> = conds.into_iter().map(|c| Distribution::new(3, c).unwrap()).collect();
        cs.resize(1 << side, uniform(3));
        let joint = JointSource::new(side, ws.clone(), cs.clone()).unwrap();
        let lhs = (-conditional_min_entropy(&joint)).exp2();
        let rhs: f64 = ws.iter().zip(&cs).map(|(w, c)| w * (-min_entropy(c)).exp2()).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn renyi_is_monotone_in_order((_, p, q) in width_and_pair(5)) {
        let cfg = SolverConfig::fast();
        let vals: Vec<f64> = ORDERS.iter().map(|a| divergence(DivergenceKind::Renyi(*a), &p, &q, &cfg).unwrap().upper).collect();
        let max = divergence(DivergenceKind::MaxDiv, &p, &q, &cfg).unwrap().upper;
        for w in vals.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-9, "{vals:?}");
        }
        prop_assert!(vals[vals.len() - 1] <= max + 1e-9);
    }

    #[test]
    fn lp_distance_is_nonincreasing_in_p((_, p, q) in width_and_pair(5)) {
        let vals: Vec<f64> = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0].iter().map(|e| lp_distance(*e, &p, &q).unwrap()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn data_processing_for_tv_kl_and_renyi((p, q, f, out) in width_pair_and_map(5)) {
        let (fp, fq) = (pushforward(&p, &f, out).unwrap(), pushforward(&q, &f, out).unwrap());
        let cfg = SolverConfig::fast();
        let kinds = [DivergenceKind::Tv, DivergenceKind::Kl, DivergenceKind::MaxDiv]
            .into_iter()
            .chain(ORDERS.iter().map(|a| DivergenceKind::Renyi(*a)));
        for kind in kinds {
            let before = divergence(kind, &p, &q, &cfg).unwrap().upper;
            let after = divergence(kind, &fp, &fq, &cfg).unwrap().upper;
            prop_assert!(after <= before + 1e-9 || before.is_infinite(), "{kind}: {after} > {before}");
        }
    }

    #[test]
    fn kl_to_uniform_is_bounded_by_tv(p in (1u32..=6).prop_flat_map(dist)) {
        let m = p.width();
        let u = uniform(m);
        let t = tv(&p, &u).unwrap();
        prop_assert!(kl(&p, &u).unwrap() <= m as f64 * t + binary_entropy(t) + 1e-9);
    }

    #[test]
    fn moment_class_rescales_lp((_, p, q) in width_and_pair(6)) {
        let m = p.width() as f64;
        for (pw, qexp) in [(1.0, f64::INFINITY), (2.0, 2.0), (4.0, 4.0 / 3.0)] {
            let lp = lp_distance(pw, &p, &q).unwrap();
            let dm = moment_class_distance(qexp, &p, &q).unwrap().value;
            let scale = if qexp.is_infinite() { 1.0 } else { (-m / qexp).exp2() };
            prop_assert!((lp - scale * dm).abs() <= 1e-9 * lp.max(1.0), "p={pw}: {lp} vs {}", scale * dm);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn subgaussian_distance_below_pinsker(p in (1u32..=4).prop_flat_map(dist)) {
        let u = uniform(p.width());
        let dg = subgaussian_distance(&p, &u, &TGrid::default(), &SolverConfig::default()).unwrap();
        let bound = (std::f64::consts::LN_2 / 2.0 * kl(&p, &u).unwrap()).sqrt();
        prop_assert!(dg.lower <= bound + 1e-6, "{} > {bound}", dg.lower);
        prop_assert!(dg.lower <= dg.upper + 1e-9);
    }

    #[test]
    fn subgaussian_distance_below_scaled_lp((m, p, q) in width_and_pair(4)) {
        let dg = subgaussian_distance(&p, &q, &TGrid::default(), &SolverConfig::default()).unwrap();
        for a in [0.5, 1.0, 2.0] {
            let bound = (m as f64 * a / (1.0 + a)).exp2() * (1.0 + 1.0 / a).sqrt() * lp_distance(1.0 + a, &p, &q).unwrap();
            prop_assert!(dg.lower <= bound + 1e-6, "α={a}: {} > {bound}", dg.lower);
        }
    }
}

#[test]
fn identical_distributions_have_zero_divergence() {
    let cfg = SolverConfig::default();
    let p = Distribution::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    for kind in ["tv", "lp:2", "renyi:0.5", "kl", "maxdiv", "moment:2", "subgaussian", "subexponential"] {
        let r = divergence(kind.parse().unwrap(), &p, &p, &cfg).unwrap();
        assert!(r.lower.abs() < 1e-12 && r.upper.abs() < 1e-9, "{kind}: {r:?}");
    }
}

#[test]
fn flat_support_sets_are_canonical() {
    let a = FlatSource::new(3, vec![5, 1, 3]).unwrap();
    let b = FlatSource::new(3, BTreeSet::from([1, 3, 5]).into_iter().collect()).unwrap();
    assert_eq!(a, b);
}
