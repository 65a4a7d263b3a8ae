//! Consistently labelled expanders and the expander extractor.
//!
//! The base family is a Gabber–Galil style graph on `Z_q × Z_q`, `q = 2^{n/2}`,
//! with vertex `(x, y)` packed as `x·q + y`. Its eight affine maps are
//!
//! ```text
//! (x ± y, y)   (x + y + 1, y)   (x − y − 1, y)
//! (x, y ± x)   (x, y + x + 1)   (x, y − x − 1)
//! ```
//!
//! which come in inverse pairs, so the transition matrix is symmetric. Eight
//! self-loops pad the degree to 16.
//!
//! λ is measured: dense eigensolve up to 2^8 vertices, Lanczos with full
//! reorthogonalization up to 2^16, and beyond that the value measured at the
//! largest tractable width of the same parity is reused.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::compose::{mask, Claim, Extractor, Injectivity, Strength, Waste};
use crate::divergences::DivergenceKind;
use crate::error::{Error, Result};

pub type NeighborFn = Arc<dyn Fn(u64, u64) -> u64 + Send + Sync>;

/// Regular graph on `{0,1}^n` with `2^d` labelled edges per vertex.
#[derive(Clone)]
pub struct LabeledGraph {
    pub name: String,
    pub n: u32,
    pub d: u32,
    neighbor: NeighborFn,
    pub lambda_bound: f64,
    /// How `lambda_bound` was obtained.
    pub lambda_source: LambdaSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    Exact,
    Dense,
    Lanczos,
    Extrapolated,
    Formula,
}

impl std::fmt::Debug for LabeledGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LabeledGraph")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("lambda_bound", &self.lambda_bound)
            .field("lambda_source", &self.lambda_source)
            .finish()
    }
}

const DENSE_MAX: u32 = 8;
const LANCZOS_MAX: u32 = 16;

impl LabeledGraph {
    pub fn new(name: impl Into<String>, n: u32, d: u32, neighbor: NeighborFn, lambda_bound: f64, source: LambdaSource) -> Self {
        Self { name: name.into(), n, d, neighbor, lambda_bound, lambda_source: source }
    }

    #[inline]
    pub fn neighbor(&self, v: u64, i: u64) -> u64 {
        (self.neighbor)(v, i)
    }

    pub fn neighbor_fn(&self) -> NeighborFn {
        self.neighbor.clone()
    }

    pub fn degree(&self) -> u64 {
        1u64 << self.d
    }

    /// Every label acts as a permutation of the vertices.
    pub fn is_consistently_labelled(&self) -> Result<bool> {
        if self.n > 20 {
            return Err(Error::Infeasible(format!("exhaustive labelling check at n = {}", self.n)));
        }
        let size = 1usize << self.n;
        let mut hit = vec![0u64; size];
        for i in 0..self.degree() {
            let stamp = i + 1;
            for v in 0..size as u64 {
                let u = self.neighbor(v, i);
                if u >> self.n != 0 || hit[u as usize] == stamp {
                    return Ok(false);
                }
                hit[u as usize] = stamp;
            }
        }
        Ok(true)
    }

    pub fn is_connected(&self) -> Result<bool> {
        if self.n > 20 {
            return Err(Error::Infeasible(format!("BFS at n = {}", self.n)));
        }
        let size = 1usize << self.n;
        let mut seen = vec![false; size];
        let mut queue = VecDeque::from([0u64]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for i in 0..self.degree() {
                let u = self.neighbor(v, i) as usize;
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u as u64);
                }
            }
        }
        Ok(count == size)
    }

    /// Edge-count matrix `A[v][u]`, requiring symmetry.
    fn adjacency(&self) -> Result<Vec<Vec<(usize, f64)>>> {
        let size = 1usize << self.n;
        let deg = self.degree() as f64;
        let mut rows: Vec<HashMap<usize, f64>> = vec![HashMap::new(); size];
        for v in 0..size {
            for i in 0..self.degree() {
                *rows[v].entry(self.neighbor(v as u64, i) as usize).or_default() += 1.0 / deg;
            }
        }
        for (v, row) in rows.iter().enumerate() {
            for (&u, &w) in row {
                if (rows[u].get(&v).copied().unwrap_or(0.0) - w).abs() > 1e-12 {
                    return Err(Error::Precondition(format!("{} is not undirected", self.name)));
                }
            }
        }
        Ok(rows
            .into_iter()
            .map(|r| {
                let mut r: Vec<_> = r.into_iter().collect();
                r.sort_unstable_by_key(|e| e.0);
                r
            })
            .collect())
    }

    /// Second-largest absolute eigenvalue of the transition matrix.
    pub fn measure_lambda(&self) -> Result<(f64, LambdaSource)> {
        if self.n > LANCZOS_MAX {
            return Err(Error::Infeasible(format!("eigensolve at n = {}", self.n)));
        }
        let rows = self.adjacency()?;
        if self.n <= DENSE_MAX {
            let size = rows.len();
            let mut m = DMatrix::<f64>::zeros(size, size);
            for (v, row) in rows.iter().enumerate() {
                for &(u, w) in row {
                    m[(v, u)] = w;
                }
            }
            let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            let lambda = if eig.len() < 2 { 0.0 } else { eig[1].max(-eig[eig.len() - 1]) };
            return Ok((lambda.clamp(0.0, 1.0), LambdaSource::Dense));
        }
        Ok((lanczos_lambda(&rows, 200).clamp(0.0, 1.0), LambdaSource::Lanczos))
    }
}

/// Largest Ritz value in absolute value of a symmetric stochastic operator on `1^⊥`.
///
/// The Rayleigh quotient matrix is assembled in full rather than trusted to
/// be tridiagonal: graphs with many symmetries exhaust their Krylov space
/// early, after which the three-term recurrence only propagates rounding.
fn lanczos_lambda(rows: &[Vec<(usize, f64)>], steps: usize) -> f64 {
    let size = rows.len();
    let steps = steps.min(size - 1);
    let apply = |v: &DVector<f64>| {
        DVector::from_iterator(size, rows.iter().map(|r| r.iter().map(|&(u, w)| w * v[u]).sum::<f64>()))
    };
    let ones = DVector::from_element(size, 1.0 / (size as f64).sqrt());
    let deflate = |v: &mut DVector<f64>| {
        let c = v.dot(&ones);
        v.axpy(-c, &ones, 1.0);
    };
    // Deterministic pseudo-random start vector.
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut q = DVector::from_fn(size, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    deflate(&mut q);
    q /= q.norm();
    let mut basis: Vec<DVector<f64>> = vec![q];
    let mut h: Vec<Vec<f64>> = Vec::new();
    for j in 0..steps {
        let mut w = apply(&basis[j]);
        h.push(basis.iter().map(|b| w.dot(b)).collect());
        for _ in 0..2 {
            deflate(&mut w);
            for b in &basis {
                let c = w.dot(b);
                w.axpy(-c, b, 1.0);
            }
        }
        let bnorm = w.norm();
        if bnorm < 1e-6 || j + 1 == steps {
            break;
        }
        basis.push(w / bnorm);
    }
    let k = h.len();
    let t = DMatrix::<f64>::from_fn(k, k, |i, j| if i <= j { h[j][i] } else { h[i][j] });
    SymmetricEigen::new(t).eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
}

/// Source of base graphs for expander extractors.
pub trait GraphProvider: Send + Sync {
    fn name(&self) -> &str;
    /// A consistently labelled graph on `{0,1}^n` with its λ bound.
    fn graph(&self, n: u32) -> Result<LabeledGraph>;
}

/// Gabber–Galil graphs, tensored with an edge for odd `n`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Mgg;

/// Complete graph with loops: `Γ(x, s) = x ⊕ s`, `d = n`, λ = 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct XorComplete;

impl GraphProvider for Mgg {
    fn name(&self) -> &str {
        "mgg"
    }
    fn graph(&self, n: u32) -> Result<LabeledGraph> {
        if n % 2 == 0 {
            mgg_graph(n)
        } else if n >= 3 {
            patch_odd(&mgg_graph(n - 1)?)
        } else {
            Err(Error::Range(format!("no Gabber–Galil graph on {n} bits")))
        }
    }
}

impl GraphProvider for XorComplete {
    fn name(&self) -> &str {
        "xor-complete"
    }
    fn graph(&self, n: u32) -> Result<LabeledGraph> {
        if !(1..=30).contains(&n) {
            return Err(Error::Range(format!("complete graph on {n} bits")));
        }
        Ok(LabeledGraph::new(format!("xor({n})"), n, n, Arc::new(|v, s| v ^ s), 0.0, LambdaSource::Exact))
    }
}

fn lambda_cache() -> &'static Mutex<HashMap<(String, u32), (f64, LambdaSource)>> {
    static CACHE: OnceLock<Mutex<HashMap<(String, u32), (f64, LambdaSource)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached_lambda(g: &LabeledGraph) -> Result<(f64, LambdaSource)> {
    let key = (g.name.clone(), g.n);
    if let Some(v) = lambda_cache().lock().expect("cache lock").get(&key) {
        return Ok(*v);
    }
    let v = g.measure_lambda()?;
    lambda_cache().lock().expect("cache lock").insert(key, v);
    Ok(v)
}

fn mgg_neighbor(half: u32) -> NeighborFn {
    let q = mask(half);
    Arc::new(move |v, i| {
        let (x, y) = (v >> half, v & q);
        let (x, y) = match i {
            0 => (x.wrapping_add(y), y),
            1 => (x.wrapping_sub(y), y),
            2 => (x.wrapping_add(y).wrapping_add(1), y),
            3 => (x.wrapping_sub(y).wrapping_sub(1), y),
            4 => (x, y.wrapping_add(x)),
            5 => (x, y.wrapping_sub(x)),
            6 => (x, y.wrapping_add(x).wrapping_add(1)),
            7 => (x, y.wrapping_sub(x).wrapping_sub(1)),
            _ => (x, y),
        };
        ((x & q) << half) | (y & q)
    })
}

/// Degree-16 Gabber–Galil graph on `n` bits (`n` even, `2 ≤ n ≤ 48`).
pub fn mgg_graph(n: u32) -> Result<LabeledGraph> {
    if n % 2 != 0 || !(2..=48).contains(&n) {
        return Err(Error::Range(format!("Gabber–Galil graph needs even 2 ≤ n ≤ 48, got {n}")));
    }
    let mut g = LabeledGraph::new(format!("mgg({n})"), n, 4, mgg_neighbor(n / 2), 1.0, LambdaSource::Formula);
    let (lambda, source) = if n <= LANCZOS_MAX {
        cached_lambda(&g)?
    } else {
        let (l, _) = cached_lambda(&mgg_graph(LANCZOS_MAX)?)?;
        (l, LambdaSource::Extrapolated)
    };
    g.lambda_bound = lambda;
    g.lambda_source = source;
    Ok(g)
}

/// Tensor product of `g` with the two-vertex graph with loops.
///
/// Label `i < D` moves inside the copy, label `D + i` also flips the top
/// bit. The transition matrix is `((I + X)/2) ⊗ P`, so λ is that of `g`.
pub fn patch_odd(g: &LabeledGraph) -> Result<LabeledGraph> {
    let n = g.n + 1;
    let d = g.d + 1;
    let (inner, low, base_deg) = (g.neighbor_fn(), g.n, g.degree());
    let neighbor: NeighborFn = Arc::new(move |v, i| {
        let (top, u) = (v >> low, v & mask(low));
        let top = if i < base_deg { top } else { top ^ 1 };
        (top << low) | inner(u, i & (base_deg - 1))
    });
    let mut out = LabeledGraph::new(format!("patch({})", g.name), n, d, neighbor, g.lambda_bound, LambdaSource::Formula);
    if n <= LANCZOS_MAX {
        let (l, s) = cached_lambda(&out)?;
        out.lambda_bound = l;
        out.lambda_source = s;
    }
    Ok(out)
}

/// The `w`-step walk graph; label `(i₁, …, i_w)` packs `i₁` in the high bits.
pub fn power_walk(g: &LabeledGraph, w: u32) -> Result<LabeledGraph> {
    if w == 0 {
        return Err(Error::Range("walk length must be ≥ 1".into()));
    }
    if w == 1 {
        return Ok(g.clone());
    }
    let d = g.d * w;
    if d > 62 {
        return Err(Error::Range(format!("walk labels need {d} bits")));
    }
    let (inner, step) = (g.neighbor_fn(), g.d);
    let neighbor: NeighborFn = Arc::new(move |mut v, labels| {
        for j in (0..w).rev() {
            v = inner(v, (labels >> (j * step)) & mask(step));
        }
        v
    });
    Ok(LabeledGraph::new(
        format!("{}^{w}", g.name),
        g.n,
        d,
        neighbor,
        g.lambda_bound.powi(w as i32),
        g.lambda_source,
    ))
}

/// D₂ error of one walk step from a min-entropy-`k` source.
pub fn expander_d2_error(lambda: f64, n: u32, k: f64) -> f64 {
    (1.0 + lambda * lambda * ((n as f64 - k).exp2() - 1.0).max(0.0)).log2()
}

/// ℓ2 error of one walk step from a min-entropy-`k` source.
pub fn expander_l2_error(lambda: f64, n: u32, k: f64) -> f64 {
    lambda * ((-k).exp2() - (-(n as f64)).exp2()).max(0.0).sqrt()
}

/// `Ext(x, s) = Γ(x, s)` with `Waste(x, s) = s`, claims from the walk graph's λ.
pub fn extractor_from_graph(g: &LabeledGraph, delta_log: f64) -> Result<Extractor> {
    let n = g.n;
    let nb = g.neighbor_fn();
    let mut ext = Extractor::new(format!("expander[{}]", g.name), n, g.d, n, Arc::new(move |x, s| nb(x, s)))?
        .with_waste(Waste { width: g.d, map: Arc::new(|_, s| s), injectivity: Injectivity::Pair });
    let lambda = g.lambda_bound;
    let mut ks: Vec<f64> = (0..=n).map(f64::from).collect();
    let target = n as f64 - delta_log;
    if target >= 0.0 && target.fract() != 0.0 {
        ks.push(target);
    }
    for k in ks {
        ext.push_claim(Claim::new(
            DivergenceKind::Renyi(2.0),
            k,
            expander_d2_error(lambda, n, k),
            Strength::Avg,
            "expander mixing: l2 contraction by lambda",
        ));
        ext.push_claim(Claim::new(DivergenceKind::Lp(2.0), k, expander_l2_error(lambda, n, k), Strength::Avg, "expander mixing: l2 contraction by lambda"));
    }
    Ok(ext)
}

/// Smallest walk length whose D₂ error at min-entropy `n − Δ` is within `eps`.
///
/// `None` when λ = 1 or the walk would need more than `max_walk` steps.
pub fn walk_length(lambda: f64, n: u32, delta_log: f64, eps: f64, max_walk: u32) -> Option<u32> {
    if lambda >= 1.0 {
        return None;
    }
    (1..=max_walk.max(1)).find(|&w| expander_d2_error(lambda.powi(w as i32), n, n as f64 - delta_log) <= eps)
}

/// Expander extractor at entropy deficiency `delta_log` and target error `eps`.
pub fn expander_extractor_with(provider: &dyn GraphProvider, n: u32, delta_log: f64, eps: f64) -> Result<Extractor> {
    if n < 2 {
        return Err(Error::Range("expander extractor needs n ≥ 2".into()));
    }
    if !(eps > 0.0) || delta_log < 0.0 {
        return Err(Error::Range("need eps > 0 and delta ≥ 0".into()));
    }
    let g = provider.graph(n)?;
    let w = walk_length(g.lambda_bound, n, delta_log, eps, 30 / g.d.max(1))
        .ok_or_else(|| Error::Infeasible(format!("{} needs a seed over 30 bits for eps = {eps}", g.name)))?;
    extractor_from_graph(&power_walk(&g, w)?, delta_log)
}

pub fn expander_extractor(n: u32, delta_log: f64, eps: f64) -> Result<Extractor> {
    expander_extractor_with(&Mgg, n, delta_log, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mgg_labels_are_permutations_with_inverse_pairs() {
        let g = mgg_graph(4).unwrap();
        assert!(g.is_consistently_labelled().unwrap());
        for v in 0..16 {
            for (a, b) in [(0, 1), (2, 3), (4, 5), (6, 7)] {
                assert_eq!(g.neighbor(g.neighbor(v, a), b), v);
            }
            for loop_label in 8..16 {
                assert_eq!(g.neighbor(v, loop_label), v);
            }
        }
        assert!(mgg_graph(5).is_err());
    }

    #[test]
    fn mgg_lambda_below_one() {
        for n in [2, 4, 6, 8, 10] {
            let g = mgg_graph(n).unwrap();
            assert!(g.lambda_bound < 1.0, "n = {n}: {}", g.lambda_bound);
            assert!(g.is_connected().unwrap());
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let g = mgg_graph(8).unwrap();
        let (dense, src) = g.measure_lambda().unwrap();
        assert_eq!(src, LambdaSource::Dense);
        let rows = g.adjacency().unwrap();
        assert!((lanczos_lambda(&rows, 200) - dense).abs() < 1e-8);
    }

    #[test]
    fn patch_odd_matching_and_connectivity() {
        let g = patch_odd(&mgg_graph(4).unwrap()).unwrap();
        assert_eq!((g.n, g.d), (5, 5));
        assert!(g.is_consistently_labelled().unwrap());
        assert!(g.is_connected().unwrap());
        // Base label 8 is a loop, so label 24 is the pure top-bit matching.
        for v in 0..32 {
            assert_eq!(g.neighbor(v, 24), v ^ 16);
        }
        let base = mgg_graph(4).unwrap().lambda_bound;
        assert!((g.lambda_bound - base).abs() < 1e-9);
    }

    #[test]
    fn power_walk_labels_and_lambda() {
        let g = mgg_graph(4).unwrap();
        let g2 = power_walk(&g, 2).unwrap();
        for v in 0..16 {
            for i in 0..16 {
                for j in 0..16 {
                    assert_eq!(g2.neighbor(v, i << 4 | j), g.neighbor(g.neighbor(v, i), j));
                }
            }
        }
        let (l1, _) = g.measure_lambda().unwrap();
        let (l2, _) = g2.measure_lambda().unwrap();
        assert!((l2 - l1 * l1).abs() < 1e-6);
        assert_eq!(g2.lambda_bound, g.lambda_bound.powi(2));
        assert!(g2.is_consistently_labelled().unwrap());
        let g1 = power_walk(&g, 1).unwrap();
        assert_eq!(g1.d, g.d);
    }

    #[test]
    fn expander_extractor_is_injective_with_its_seed() {
        let ext = expander_extractor(5, 1.0, 0.5).unwrap();
        assert!(ext.verify_waste_injective(24).unwrap());
        // Uniform input stays uniform: every output is hit equally often.
        let mut hits = vec![0u32; 32];
        for x in 0..32 {
            for s in 0..1u64 << ext.d() {
                hits[ext.eval(x, s) as usize] += 1;
            }
        }
        assert!(hits.iter().all(|&h| h == hits[0]));
    }

    #[test]
    fn xor_provider_is_perfect() {
        let ext = expander_extractor_with(&XorComplete, 3, 1.0, 0.1).unwrap();
        assert_eq!(ext.d(), 3);
        assert_eq!(ext.claimed_error(DivergenceKind::Renyi(2.0), 2.0, Strength::Avg), Some(0.0));
    }
}
