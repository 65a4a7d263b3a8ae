//! Property batteries: divergence inequalities, random-function tails, the
//! subgaussian data-processing failure and the disperser equivalence.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::compose::Extractor;
use crate::divergences::{
    binary_entropy, kl, kl_to_subexponential, kl_to_subgaussian, lp_distance, max_div, moment_class_distance, renyi,
    subexponential_distance, subgaussian_distance, tv, SolverConfig, TGrid,
};
use crate::domain::{binomial, enumerate_flat_sources, pushforward, Distribution};
use crate::error::{Error, Result};

use super::flat::{FlatOracle, SourceFamily};

/// Tolerance for closed-form inequalities.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance for inequalities involving witness-search values.
pub const SOLVER_TOL: f64 = 1e-6;

/// Tally for one inequality.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub instances: u64,
    pub violations: u64,
    /// Smallest observed `rhs − lhs`; negative beyond tolerance means a violation.
    pub worst_margin: f64,
}

/// Results of [`inequality_suite`].
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub checks: Vec<CheckOutcome>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn violations(&self) -> u64 {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

#[derive(Default)]
struct Tally(BTreeMap<&'static str, CheckOutcome>);

impl Tally {
    /// Records `lhs ≤ rhs` with a tolerance relative to the magnitudes.
    fn le(&mut self, name: &'static str, lhs: f64, rhs: f64, tol: f64) {
        let e = self.0.entry(name).or_insert_with(|| CheckOutcome {
            name: name.to_string(),
            instances: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        });
        e.instances += 1;
        let margin = rhs - lhs;
        e.worst_margin = e.worst_margin.min(margin);
        if !(margin >= -tol * lhs.abs().max(rhs.abs()).max(1.0)) {
            e.violations += 1;
        }
    }

    fn close(&mut self, name: &'static str, a: f64, b: f64, tol: f64) {
        self.le(name, (a - b).abs(), 0.0, tol);
    }
}

/// Random distribution drawn from one of several shapes, including
/// near-degenerate and sparse ones.
pub fn random_distribution(m: u32, rng: &mut impl Rng) -> Distribution {
    let size = 1usize << m;
    let shape = rng.gen_range(0..6);
    let probs: Vec<f64> = match shape {
        0 => (0..size).map(|_| rng.gen::<f64>()).collect(),
        1 => {
            let sharp = rng.gen_range(2.0..12.0);
            (0..size).map(|_| rng.gen::<f64>().powf(sharp)).collect()
        }
        2 => (0..size).map(|_| if rng.gen_bool(0.4) { rng.gen::<f64>() } else { 0.0 }).collect(),
        3 => {
            let mut v = vec![1e-12 / size as f64; size];
            v[rng.gen_range(0..size)] = 1.0 - 1e-12;
            v
        }
        4 => {
            let mut v = vec![0.0; size];
            v[rng.gen_range(0..size)] = 1.0;
            v
        }
        _ => (0..size).map(|_| 1.0 + 0.05 * rng.gen_range(-1.0..1.0)).collect(),
    };
    let probs = if probs.iter().sum::<f64>() > 0.0 { probs } else { vec![1.0; size] };
    Distribution::from_weights(m, probs).expect("positive weights")
}

fn full_support(m: u32, rng: &mut impl Rng) -> Distribution {
    let size = 1usize << m;
    let floor = rng.gen_range(0.02..0.5) / size as f64;
    let p = random_distribution(m, rng);
    Distribution::from_weights(m, p.probs().iter().map(|v| v + floor).collect()).expect("positive weights")
}

/// Random function table `{0,1}^m → {0,1}^out`.
fn random_map(m: u32, out: u32, rng: &mut impl Rng) -> Vec<u64> {
    (0..1u64 << m).map(|_| rng.gen_range(0..1u64 << out)).collect()
}

/// Runs every inequality battery on `samples` random pairs per width in `widths`.
pub fn inequality_suite(samples: usize, widths: &[u32], seed: u64) -> Result<InequalityReport> {
    let cfg = SolverConfig::fast();
    let grid = TGrid::default();
    let mut t = Tally::default();
    for &m in widths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (m as u64) << 32);
        let mf = m as f64;
        let u = Distribution::uniform(m)?;
        for i in 0..samples {
            let p = random_distribution(m, &mut rng);
            let q = if i % 4 == 0 { u.clone() } else { random_distribution(m, &mut rng) };
            let d_tv = tv(&p, &q)?;

            // Subgaussian sandwich around TV.
            let g = subgaussian_distance(&p, &q, &grid, &cfg)?;
            t.le("tv <= d_G (certified witness)", d_tv, g.lower, SOLVER_TOL);
            t.le("d_G witness <= sqrt(2 ln2 m) tv", g.lower, (2.0 * LN_2 * mf).sqrt() * d_tv, SOLVER_TOL);

            // Rényi-norm comparisons.
            for alpha in [0.5, 1.0, 2.0] {
                let l = lp_distance(1.0 + alpha, &p, &q)?;
                let factor = (mf * alpha / (1.0 + alpha)).exp2();
                t.le("l1 <= 2^(m a/(1+a)) l_(1+a)", 2.0 * d_tv, factor * l, EXACT_TOL);
                t.le(
                    "d_G witness <= 2^(m a/(1+a)) sqrt(1+1/a) l_(1+a)",
                    g.lower,
                    factor * (1.0 + 1.0 / alpha).sqrt() * l,
                    SOLVER_TOL,
                );
            }
            t.close("l1 = 2 tv", lp_distance(1.0, &p, &q)?, 2.0 * d_tv, EXACT_TOL);

            // Distances to uniform controlled by KL.
            let kl_u = kl(&p, &u)?;
            let tv_u = tv(&p, &u)?;
            let gu = if i % 4 == 0 { g.clone() } else { subgaussian_distance(&p, &u, &grid, &cfg)? };
            t.le("d_G(P,U) witness <= sqrt(ln2/2 KL)", gu.lower, kl_to_subgaussian(kl_u), SOLVER_TOL);
            let eu = subexponential_distance(&p, &u, &grid, &cfg)?;
            t.le("d_E(P,U) witness <= piecewise KL bound", eu.lower, kl_to_subexponential(kl_u), SOLVER_TOL);
            t.le("d_G(P,U) witness <= d_E(P,U) witness", gu.lower, eu.lower, SOLVER_TOL);
            t.le("KL(P,U) <= m tv + h(tv)", kl_u, mf * tv_u + binary_entropy(tv_u), EXACT_TOL);

            // Pinsker in bits.
            if q.probs().iter().all(|v| *v > 0.0) {
                t.le("2 tv^2 / ln2 <= KL", 2.0 * d_tv * d_tv / LN_2, kl(&p, &q)?, EXACT_TOL);
            }

            // Skewed triangle inequality for KL.
            let r = full_support(m, &mut rng);
            for alpha in [0.5, 1.0, 2.0] {
                let lhs = kl(&p, &r)?;
                let rhs = (1.0 + 1.0 / alpha) * kl(&p, &q)? + renyi(1.0 + alpha, &q, &r)?;
                if rhs.is_finite() {
                    t.le("KL(P,R) <= (1+1/a) KL(P,Q) + D_(1+a)(Q,R)", lhs, rhs, EXACT_TOL);
                }
            }

            // ℓp norms equal rescaled moment-class distances.
            for (pw, qexp) in [(1.0, f64::INFINITY), (2.0, 2.0), (4.0, 4.0 / 3.0)] {
                let lp = lp_distance(pw, &p, &q)?;
                let dm = moment_class_distance(qexp, &p, &q)?.value;
                let scale = if qexp.is_infinite() { 1.0 } else { (-mf / qexp).exp2() };
                t.close("l_p = 2^(-m/q) d_Mq", lp, scale * dm, EXACT_TOL);
            }

            // Monotonicity.
            let orders = [0.0, 0.5, 1.0, 2.0, 3.0, f64::INFINITY];
            let values: Vec<f64> = orders
                .iter()
                .map(|a| if a.is_infinite() { max_div(&p, &r) } else { renyi(*a, &p, &r) })
                .collect::<Result<_>>()?;
            for w in values.windows(2) {
                t.le("Renyi nondecreasing in order", w[0], w[1], EXACT_TOL);
            }
            let norms: Vec<f64> = [1.0, 2.0, 4.0, f64::INFINITY]
                .iter()
                .map(|pw| lp_distance(*pw, &p, &q))
                .collect::<Result<_>>()?;
            for w in norms.windows(2) {
                t.le("l_p nonincreasing in p", w[1], w[0], EXACT_TOL);
            }

            // Data processing under a random map.
            let out = rng.gen_range(1..=m);
            let f = random_map(m, out, &mut rng);
            let (fp, fq, fr) = (pushforward(&p, &f, out)?, pushforward(&q, &f, out)?, pushforward(&r, &f, out)?);
            t.le("DPI tv", tv(&fp, &fq)?, d_tv, EXACT_TOL);
            t.le("DPI KL", kl(&fp, &fr)?, kl(&p, &r)?, EXACT_TOL);
            for a in [0.5, 2.0] {
                t.le("DPI Renyi", renyi(a, &fp, &fr)?, renyi(a, &p, &r)?, EXACT_TOL);
            }
        }
    }
    Ok(InequalityReport { checks: t.0.into_values().collect() })
}

/// Empirical tail of the random-function KL bound.
#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub n: u32,
    pub d: u32,
    pub m: u32,
    pub k_size: u64,
    pub eps: f64,
    pub trials: u64,
    pub exceed: u64,
    pub tail: f64,
    /// `min(1, 2^{MD − KDε/3})`.
    pub bound: f64,
    /// Binomial standard deviation at the bound.
    pub sigma: f64,
}

impl TailReport {
    pub fn within(&self) -> bool {
        self.tail <= self.bound + 3.0 * self.sigma
    }
}

/// Fraction of uniformly random `Ext` tables with `E_s KL(Ext(X,s), U_m) > eps`
/// for a fixed flat `X` of size `k_size`.
pub fn random_function_kl_tail(n: u32, d: u32, m: u32, k_size: u64, eps: f64, trials: u64, seed: u64) -> Result<TailReport> {
    if trials == 0 {
        return Err(Error::Range("trials must be positive".into()));
    }
    if k_size == 0 || k_size > 1u64 << n || m > 20 || d > 20 {
        return Err(Error::Range(format!("size {k_size} or widths out of range")));
    }
    let (mm, dd) = (1u64 << m, 1u64 << d);
    let exceed: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
            let mut counts = vec![0u32; mm as usize];
            let mut total = 0.0;
            for _ in 0..dd {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..k_size {
                    counts[rng.gen_range(0..mm) as usize] += 1;
                }
                let k = k_size as f64;
                total += m as f64
                    + counts.iter().filter(|c| **c > 0).map(|&c| (c as f64 / k) * (c as f64 / k).log2()).sum::<f64>();
            }
            u64::from(total / dd as f64 > eps)
        })
        .sum();
    let bound = ((mm * dd) as f64 - (k_size * dd) as f64 * eps / 3.0).exp2().min(1.0);
    Ok(TailReport {
        n,
        d,
        m,
        k_size,
        eps,
        trials,
        exceed,
        tail: exceed as f64 / trials as f64,
        bound,
        sigma: (bound * (1.0 - bound) / trials as f64).sqrt(),
    })
}

/// One row of the embedding experiment.
#[derive(Clone, Debug, Serialize)]
pub struct DpiRow {
    pub m: u32,
    /// `d_G` bracket of the one-bit point masses.
    pub pre_lower: f64,
    pub pre_upper: f64,
    /// `d_G` bracket after embedding into `{0,1}^m`.
    pub post_lower: f64,
    pub post_upper: f64,
    /// Violations among TV, KL and Rényi data processing on the same pair.
    pub dpi_violations: u32,
}

/// Point masses on `0` and `1` in one bit, embedded by `x ↦ (x, 0^{m−1})`.
/// The embedding is injective, so it is a post-processing whose inverse is
/// also a post-processing; TV, KL and Rényi must be unchanged while the
/// subgaussian distance grows with `m`.
pub fn dpi_counterexample(m_list: &[u32]) -> Result<Vec<DpiRow>> {
    let cfg = SolverConfig::default();
    let grid = TGrid::default();
    let (p1, q1) = (Distribution::point_mass(1, 0)?, Distribution::point_mass(1, 1)?);
    let pre = subgaussian_distance(&p1, &q1, &grid, &cfg)?;
    m_list
        .par_iter()
        .map(|&m| {
            if m == 0 || m > 12 {
                return Err(Error::Range(format!("embedding width {m} outside 1..=12")));
            }
            let embed: Vec<u64> = vec![0, 1u64 << (m - 1)];
            let (p, q) = (pushforward(&p1, &embed, m)?, pushforward(&q1, &embed, m)?);
            let post = subgaussian_distance(&p, &q, &grid, &cfg)?;
            let mut violations = 0;
            // Both directions of processing must preserve every f-divergence.
            let pairs = [(tv(&p, &q)?, tv(&p1, &q1)?), (kl(&p, &q)?, kl(&p1, &q1)?), (renyi(0.5, &p, &q)?, renyi(0.5, &p1, &q1)?)];
            for (a, b) in pairs {
                if !(a == b || (a - b).abs() <= EXACT_TOL) {
                    violations += 1;
                }
            }
            Ok(DpiRow {
                m,
                pre_lower: pre.lower,
                pre_upper: pre.upper,
                post_lower: post.lower,
                post_upper: post.upper,
                dpi_violations: violations,
            })
        })
        .collect()
}

/// Both sides of the disperser equivalence at one `(k, eps)`.
#[derive(Clone, Debug, Serialize)]
pub struct DisperserReport {
    pub k: f64,
    pub eps: f64,
    /// Worst `D₀(Ext(X, U_d), U_m)` over flat sources.
    pub worst_d0: f64,
    /// Smallest image size over flat sources, counted directly.
    pub min_coverage: u64,
    pub d0_predicate: bool,
    pub coverage_predicate: bool,
}

impl DisperserReport {
    pub fn agree(&self) -> bool {
        self.d0_predicate == self.coverage_predicate
    }
}

/// Compares the D₀-extractor condition with the coverage condition on all
/// flat sources of min-entropy `k`.
pub fn disperser_check(ext: &Extractor, k: f64, eps: f64, cap: u64) -> Result<DisperserReport> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Range(format!("eps {eps} outside [0, 1)")));
    }
    let o = FlatOracle::new(ext, crate::divergences::DivergenceKind::Renyi(0.0), false)?;
    let worst = o.worst(k, &SourceFamily::ExhaustiveFlat { cap })?;
    let size = crate::domain::flat_size(k);
    let seeds = 1u64 << ext.d();
    let images: Vec<Vec<u64>> = (0..1u64 << ext.n()).map(|x| (0..seeds).map(|s| ext.eval(x, s)).collect()).collect();
    let mut min_cov = u64::MAX;
    let mut seen = vec![false; 1usize << ext.m()];
    debug_assert!(binomial(1u64 << ext.n(), size) <= cap as u128);
    for src in enumerate_flat_sources(ext.n(), size, cap)? {
        seen.iter_mut().for_each(|b| *b = false);
        let mut cov = 0;
        for &x in src.support() {
            for &y in &images[x as usize] {
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    cov += 1;
                }
            }
        }
        min_cov = min_cov.min(cov);
    }
    let mm = (ext.m() as f64).exp2();
    Ok(DisperserReport {
        k,
        eps,
        worst_d0: worst.worst,
        min_coverage: min_cov,
        d0_predicate: worst.worst <= (1.0 / (1.0 - eps)).log2() + 1e-12,
        coverage_predicate: min_cov as f64 >= (1.0 - eps) * mm - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    #[test]
    fn small_battery_passes() {
        let r = inequality_suite(150, &[1, 2, 3, 4], 3).unwrap();
        for c in &r.checks {
            assert_eq!(c.violations, 0, "{} margin {}", c.name, c.worst_margin);
        }
    }

    #[test]
    fn tail_trivial_cases() {
        // KL against U_m never exceeds m.
        let r = random_function_kl_tail(4, 1, 2, 4, 2.0, 200, 0).unwrap();
        assert_eq!(r.exceed, 0);
        // A single point gives KL = m on every seed.
        let r = random_function_kl_tail(4, 0, 2, 1, 1.9, 50, 0).unwrap();
        assert_eq!(r.exceed, 50);
        let r = random_function_kl_tail(4, 0, 2, 1, 2.0, 50, 0).unwrap();
        assert_eq!(r.exceed, 0);
    }

    #[test]
    fn embedding_identity_at_one_bit() {
        let rows = dpi_counterexample(&[1]).unwrap();
        assert!((rows[0].post_lower - rows[0].pre_lower).abs() < 1e-12);
        assert_eq!(rows[0].dpi_violations, 0);
    }

    #[test]
    fn disperser_examples() {
        let full = Extractor::new("xor", 3, 3, 3, Arc::new(|x, s| x ^ s)).unwrap();
        let r = disperser_check(&full, 0.0, 0.0, 100).unwrap();
        assert!(r.d0_predicate && r.coverage_predicate);
        let half = Extractor::new("half", 3, 2, 2, Arc::new(|_, s| s & 1)).unwrap();
        let r = disperser_check(&half, 1.0, 0.4, 100).unwrap();
        assert!(!r.d0_predicate && !r.coverage_predicate);
        assert!(disperser_check(&half, 1.0, 0.5, 100).unwrap().coverage_predicate);
    }
}
