//! Worst-case extractor error over flat sources.
//!
//! Every supported divergence is convex in its first argument, so the worst
//! min-entropy-`k` source is a flat source on `⌊2^k⌋` points. The oracle
//! tabulates the extractor once, merges seeds that induce the same partition
//! of the inputs (divergence from uniform does not see output labels), and
//! then walks subsets incrementally.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose::{mask, Extractor};
use crate::divergences::{conjugate, DivergenceKind};
use crate::domain::{binomial, flat_size, FlatSource, LexCombination};
use crate::error::{Error, Result};

/// Largest `n + d` the oracle tabulates.
pub const MAX_TABLE_BITS: u32 = 24;
/// Default number of sources enumerated before switching to structured search.
pub const DEFAULT_CAP: u64 = 20_000_000;

/// Which flat sources to examine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SourceFamily {
    /// Every flat source; errors when there are more than `cap`.
    ExhaustiveFlat { cap: u64 },
    /// Subcubes, Hamming balls, intervals, affine subspaces, `samples` random
    /// supports and `local_search` swap steps from the best of those.
    StructuredFlat { samples: usize, local_search: usize, seed: u64 },
    /// `count` uniformly random supports.
    SampledFlat { count: usize, seed: u64 },
    /// Exhaustive when at most `cap` sources, else structured.
    Auto { cap: u64, samples: usize, seed: u64 },
}

impl Default for SourceFamily {
    fn default() -> Self {
        SourceFamily::Auto { cap: DEFAULT_CAP, samples: 100_000, seed: 0 }
    }
}

/// Result of a worst-case search.
#[derive(Clone, Debug, Serialize)]
pub struct WorstReport {
    pub worst: f64,
    pub witness: FlatSource,
    pub kind: DivergenceKind,
    pub k: f64,
    pub strong: bool,
    pub sources: u64,
    /// Whether `worst` is the maximum over all flat sources of this size.
    pub exact: bool,
    pub label: String,
}

const EXACT_LABEL: &str = "exact worst case";
const LOWER_LABEL: &str = "lower bound on worst case";

#[derive(Clone, Copy, Debug)]
enum Rule {
    Kl,
    Tv,
    Lp(f64),
    Renyi(f64),
    Renyi0,
    MaxDiv,
    LInf,
}

impl Rule {
    /// Rule and output multiplier for a kind.
    fn of(kind: DivergenceKind, m: u32) -> Result<(Rule, f64)> {
        Ok(match kind.canonical() {
            DivergenceKind::Kl => (Rule::Kl, 1.0),
            DivergenceKind::Tv => (Rule::Tv, 1.0),
            DivergenceKind::MaxDiv => (Rule::MaxDiv, 1.0),
            DivergenceKind::Renyi(a) if a == 0.0 => (Rule::Renyi0, 1.0),
            DivergenceKind::Renyi(a) => (Rule::Renyi(a), 1.0),
            DivergenceKind::Lp(p) if p.is_infinite() => (Rule::LInf, 1.0),
            DivergenceKind::Lp(p) => (Rule::Lp(p), 1.0),
            DivergenceKind::MomentClass(q) => {
                let p = conjugate(q);
                let scale = (m as f64 / q).exp2();
                if p.is_infinite() {
                    (Rule::LInf, scale)
                } else {
                    (Rule::Lp(p), scale)
                }
            }
            k @ (DivergenceKind::Subgaussian | DivergenceKind::Subexponential) => {
                return Err(Error::Unsupported(format!("{k} has no exact flat-source oracle")))
            }
        })
    }

    fn additive(self) -> bool {
        !matches!(self, Rule::MaxDiv | Rule::LInf)
    }

    #[inline]
    fn g(self, c: f64, n: f64, m: f64) -> f64 {
        match self {
            Rule::Kl => {
                if c > 0.0 {
                    c * c.log2()
                } else {
                    0.0
                }
            }
            Rule::Tv => (c * m - n).abs(),
            Rule::Lp(p) => (c / n - 1.0 / m).abs().powf(p),
            Rule::Renyi(a) => {
                if c > 0.0 {
                    c.powf(a)
                } else {
                    0.0
                }
            }
            Rule::Renyi0 => {
                if c > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Rule::MaxDiv | Rule::LInf => 0.0,
        }
    }

    #[inline]
    fn phi(self, acc: f64, n: f64, m: f64) -> f64 {
        match self {
            Rule::Kl => (acc / n + m.log2() - n.log2()).max(0.0),
            Rule::Tv => acc / (2.0 * n * m),
            Rule::Lp(p) => {
                if p == 1.0 {
                    acc
                } else {
                    acc.powf(1.0 / p)
                }
            }
            Rule::Renyi(a) => ((acc.log2() + (a - 1.0) * m.log2() - a * n.log2()) / (a - 1.0)).max(0.0),
            Rule::Renyi0 => (m / acc).log2().max(0.0),
            Rule::MaxDiv | Rule::LInf => unreachable!("scan rules have no accumulator"),
        }
    }

    fn scan(self, counts: &[u32], implicit_zeros: f64, n: f64, m: f64) -> f64 {
        let top = counts.iter().copied().max().unwrap_or(0) as f64;
        match self {
            Rule::MaxDiv => (top * m / n).log2(),
            Rule::LInf => {
                let low = if implicit_zeros > 0.0 { 1.0 / m } else { 0.0 };
                counts.iter().fold(low, |b, &c| b.max((c as f64 / n - 1.0 / m).abs()))
            }
            _ => unreachable!("additive rules use the accumulator"),
        }
    }
}

enum Rows {
    /// `cells[x·C + c] = c·L + label`.
    Strong(Vec<u32>),
    /// Per-input sparse histogram over global labels.
    Plain { offsets: Vec<usize>, cells: Vec<u32>, counts: Vec<u32> },
}

/// Tabulated extractor ready for flat-source evaluation.
pub struct FlatOracle {
    n: u32,
    m: u32,
    d: u32,
    strong: bool,
    kind: DivergenceKind,
    rule: Rule,
    scale: f64,
    classes: usize,
    labels: usize,
    weights: Vec<f64>,
    rows: Rows,
}

impl FlatOracle {
    pub fn new(ext: &Extractor, kind: DivergenceKind, strong: bool) -> Result<Self> {
        let (n, d, m) = (ext.n(), ext.d(), ext.m());
        if n + d > MAX_TABLE_BITS {
            return Err(Error::Infeasible(format!("tabulating {} input bits exceeds {MAX_TABLE_BITS}", n + d)));
        }
        if m > 52 {
            return Err(Error::Range(format!("output width {m} too large for the oracle")));
        }
        let (rule, scale) = Rule::of(kind, m)?;
        let (size, seeds) = (1usize << n, 1usize << d);
        let table: Vec<u64> = (0..size * seeds).map(|i| ext.eval((i / seeds) as u64, (i % seeds) as u64)).collect();
        if table.iter().any(|&y| y & !mask(m) != 0) {
            return Err(Error::Range(format!("'{}' produced a value wider than {m} bits", ext.label())));
        }
        let mut out = Self {
            n,
            m,
            d,
            strong,
            kind: kind.canonical(),
            rule,
            scale,
            classes: 1,
            labels: 0,
            weights: vec![1.0],
            rows: Rows::Strong(Vec::new()),
        };
        if strong {
            let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
            let mut columns: Vec<Vec<u32>> = Vec::new();
            let mut mult: Vec<u64> = Vec::new();
            let mut labels = 0usize;
            for s in 0..seeds {
                let mut seen: HashMap<u64, u32> = HashMap::new();
                let col: Vec<u32> = (0..size)
                    .map(|x| {
                        let next = seen.len() as u32;
                        *seen.entry(table[x * seeds + s]).or_insert(next)
                    })
                    .collect();
                labels = labels.max(seen.len());
                match index.get(&col) {
                    Some(&c) => mult[c] += 1,
                    None => {
                        index.insert(col.clone(), columns.len());
                        columns.push(col);
                        mult.push(1);
                    }
                }
            }
            let classes = columns.len();
            let mut cells = vec![0u32; size * classes];
            for (c, col) in columns.iter().enumerate() {
                for x in 0..size {
                    cells[x * classes + c] = (c * labels) as u32 + col[x];
                }
            }
            out.classes = classes;
            out.labels = labels;
            out.weights = mult.iter().map(|&k| k as f64 / seeds as f64).collect();
            out.rows = Rows::Strong(cells);
        } else {
            let mut global: HashMap<u64, u32> = HashMap::new();
            let mut offsets = vec![0usize];
            let (mut cells, mut counts) = (Vec::new(), Vec::new());
            for x in 0..size {
                let mut row: Vec<u32> = table[x * seeds..(x + 1) * seeds]
                    .iter()
                    .map(|&y| {
                        let next = global.len() as u32;
                        *global.entry(y).or_insert(next)
                    })
                    .collect();
                row.sort_unstable();
                for chunk in row.chunk_by(|a, b| a == b) {
                    cells.push(chunk[0]);
                    counts.push(chunk.len() as u32);
                }
                offsets.push(cells.len());
            }
            out.labels = global.len();
            out.rows = Rows::Plain { offsets, cells, counts };
        }
        Ok(out)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn strong(&self) -> bool {
        self.strong
    }

    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    /// Seed classes after merging relabelings (1 in plain mode).
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Exact error on the flat source with this support.
    pub fn error_of(&self, support: &[u64]) -> Result<f64> {
        if support.is_empty() || support.iter().any(|&x| x >> self.n != 0) {
            return Err(Error::Range("support must be nonempty and inside {0,1}^n".into()));
        }
        let mut st = State::new(self, support.len());
        for &x in support {
            st.add(x);
        }
        Ok(st.exact())
    }

    /// Worst error over the family at min-entropy `k`.
    pub fn worst(&self, k: f64, family: &SourceFamily) -> Result<WorstReport> {
        let size = flat_size(k);
        if size > 1u64 << self.n {
            return Err(Error::Range(format!("no flat source of size {size} on {} bits", self.n)));
        }
        let count = binomial(1u64 << self.n, size);
        let (value, support, sources, exact) = match *family {
            SourceFamily::ExhaustiveFlat { cap } => {
                if count > cap as u128 {
                    return Err(Error::CountExceedsCap { count, cap });
                }
                let (v, s) = self.exhaustive(size as usize, count);
                (v, s, count as u64, true)
            }
            SourceFamily::Auto { cap, samples, seed } if count <= cap as u128 => {
                let _ = (samples, seed);
                let (v, s) = self.exhaustive(size as usize, count);
                (v, s, count as u64, true)
            }
            SourceFamily::Auto { samples, seed, .. } => {
                let (v, s, c) = self.structured(size as usize, samples, samples / 10 + 100, seed);
                (v, s, c, false)
            }
            SourceFamily::StructuredFlat { samples, local_search, seed } => {
                let (v, s, c) = self.structured(size as usize, samples, local_search, seed);
                (v, s, c, false)
            }
            SourceFamily::SampledFlat { count: draws, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let cands: Vec<Vec<u64>> = (0..draws).map(|_| random_support(&mut rng, self.n, size as usize)).collect();
                let (v, s) = self.best_of(&cands);
                (v, s, draws as u64, false)
            }
        };
        Ok(WorstReport {
            worst: value,
            witness: FlatSource::new(self.n, support)?,
            kind: self.kind,
            k,
            strong: self.strong,
            sources,
            exact,
            label: if exact { EXACT_LABEL } else { LOWER_LABEL }.to_string(),
        })
    }

    /// Lexicographic walk split into a fixed number of rank ranges.
    fn exhaustive(&self, size: usize, count: u128) -> (f64, Vec<u64>) {
        let universe = 1u64 << self.n;
        let chunks = count.min(256) as u128;
        let results: Vec<(f64, Vec<u64>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = count * c / chunks;
                let hi = count * (c + 1) / chunks;
                let mut comb = LexCombination::unrank(universe, size, lo);
                let mut cur = comb.indices().to_vec();
                let mut st = State::new(self, size);
                for &x in &cur {
                    st.add(x);
                }
                let mut best = (st.exact(), cur.clone());
                let mut steps = 0u64;
                for _ in lo + 1..hi {
                    let i = comb.advance().expect("rank range inside the walk");
                    let next = comb.indices();
                    for j in i..size {
                        st.remove(cur[j]);
                    }
                    for j in i..size {
                        st.add(next[j]);
                        cur[j] = next[j];
                    }
                    steps += 1;
                    if steps % 65_536 == 0 {
                        st.resync();
                    }
                    if st.value() > best.0 + 1e-12 * best.0.abs().max(1.0) {
                        let v = st.exact();
                        if v > best.0 {
                            best = (v, cur.clone());
                        }
                    }
                }
                best
            })
            .collect();
        merge(results)
    }

    fn best_of(&self, cands: &[Vec<u64>]) -> (f64, Vec<u64>) {
        let results: Vec<(f64, Vec<u64>)> = cands
            .par_chunks(64)
            .map(|group| {
                let mut best = (f64::NEG_INFINITY, Vec::new());
                for s in group {
                    let v = self.error_of(s).expect("valid support");
                    let mut sorted = s.clone();
                    sorted.sort_unstable();
                    if v > best.0 || (v == best.0 && sorted < best.1) {
                        best = (v, sorted);
                    }
                }
                best
            })
            .collect();
        merge(results)
    }

    fn structured(&self, size: usize, samples: usize, local_search: usize, seed: u64) -> (f64, Vec<u64>, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cands = structured_supports(self.n, size, &mut rng);
        for _ in 0..samples {
            cands.push(random_support(&mut rng, self.n, size));
        }
        let mut total = cands.len() as u64;
        let (mut best, mut support) = self.best_of(&cands);
        // Swap search from the best structured source.
        if local_search > 0 && size < (1usize << self.n) {
            let mut st = State::new(self, size);
            for &x in &support {
                st.add(x);
            }
            let mut inside: Vec<bool> = vec![false; 1 << self.n];
            for &x in &support {
                inside[x as usize] = true;
            }
            let mut cur = support.clone();
            for _ in 0..local_search {
                let i = rng.gen_range(0..size);
                let y = loop {
                    let y = rng.gen_range(0..1u64 << self.n);
                    if !inside[y as usize] {
                        break y;
                    }
                };
                let x = cur[i];
                st.remove(x);
                st.add(y);
                total += 1;
                let v = st.exact();
                if v > best {
                    best = v;
                    inside[x as usize] = false;
                    inside[y as usize] = true;
                    cur[i] = y;
                    support = cur.clone();
                    support.sort_unstable();
                } else {
                    st.remove(y);
                    st.add(x);
                }
            }
        }
        (best, support, total)
    }
}

fn merge(results: Vec<(f64, Vec<u64>)>) -> (f64, Vec<u64>) {
    results
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .expect("at least one chunk")
}

struct State<'a> {
    o: &'a FlatOracle,
    counts: Vec<u32>,
    acc: Vec<f64>,
    n_total: f64,
    m_size: f64,
    zero_cells: f64,
    table: Option<Vec<f64>>,
}

impl<'a> State<'a> {
    fn new(o: &'a FlatOracle, size: usize) -> Self {
        let per_class = if o.strong { 1 } else { 1usize << o.d };
        let n_total = (size * per_class) as f64;
        let m_size = (o.m as f64).exp2();
        let zero_cells = m_size - o.labels as f64;
        let limit = size * per_class;
        let table = (o.rule.additive() && limit <= 1 << 22)
            .then(|| (0..=limit).map(|c| o.rule.g(c as f64, n_total, m_size)).collect());
        let mut st = Self {
            o,
            counts: vec![0; o.classes * o.labels],
            acc: vec![0.0; o.classes],
            n_total,
            m_size,
            zero_cells,
            table,
        };
        st.resync();
        st
    }

    #[inline]
    fn g(&self, c: u32) -> f64 {
        match &self.table {
            Some(t) => t[c as usize],
            None => self.o.rule.g(c as f64, self.n_total, self.m_size),
        }
    }

    #[inline]
    fn bump(&mut self, cell: u32, delta: i64, class: usize) {
        let old = self.counts[cell as usize];
        let new = (old as i64 + delta) as u32;
        self.counts[cell as usize] = new;
        if self.o.rule.additive() {
            self.acc[class] += self.g(new) - self.g(old);
        }
    }

    fn apply(&mut self, x: u64, sign: i64) {
        let o = self.o;
        match &o.rows {
            Rows::Strong(cells) => {
                let base = x as usize * o.classes;
                for c in 0..o.classes {
                    self.bump(cells[base + c], sign, c);
                }
            }
            Rows::Plain { offsets, cells, counts } => {
                for i in offsets[x as usize]..offsets[x as usize + 1] {
                    self.bump(cells[i], sign * counts[i] as i64, 0);
                }
            }
        }
    }

    fn add(&mut self, x: u64) {
        self.apply(x, 1);
    }

    fn remove(&mut self, x: u64) {
        self.apply(x, -1);
    }

    fn resync(&mut self) {
        if !self.o.rule.additive() {
            return;
        }
        let l = self.o.labels;
        let base = self.zero_cells * self.o.rule.g(0.0, self.n_total, self.m_size);
        for c in 0..self.o.classes {
            self.acc[c] = base + self.counts[c * l..(c + 1) * l].iter().map(|&k| self.g(k)).sum::<f64>();
        }
    }

    fn value(&self) -> f64 {
        let (o, n, m) = (self.o, self.n_total, self.m_size);
        let l = o.labels;
        let total: f64 = (0..o.classes)
            .map(|c| {
                let v = if o.rule.additive() {
                    o.rule.phi(self.acc[c], n, m)
                } else {
                    o.rule.scan(&self.counts[c * l..(c + 1) * l], self.zero_cells, n, m)
                };
                o.weights[c] * v
            })
            .sum();
        o.scale * total
    }

    fn exact(&mut self) -> f64 {
        self.resync();
        self.value()
    }
}

fn random_support(rng: &mut ChaCha8Rng, n: u32, size: usize) -> Vec<u64> {
    let mut s: Vec<u64> = sample(rng, 1usize << n, size).into_iter().map(|x| x as u64).collect();
    s.sort_unstable();
    s
}

const STRUCTURED_CAP: usize = 20_000;

/// Subcubes, Hamming balls, cyclic intervals and random affine subspaces.
pub fn structured_supports(n: u32, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    let universe = 1u64 << n;
    let mut out: Vec<Vec<u64>> = Vec::new();
    let pow2 = size.is_power_of_two();
    let j = size.trailing_zeros();
    // Subcubes: choose j free coordinates and fix the rest.
    if pow2 && j <= n {
        let fixed_bits = n - j;
        let coord_sets = binomial(n as u64, j as u64);
        let total = coord_sets.saturating_mul(1u128 << fixed_bits);
        let mut coords = LexCombination::first(n as u64, j as usize);
        let every = (total / STRUCTURED_CAP as u128).max(1);
        let mut idx: u128 = 0;
        loop {
            let free: Vec<u64> = coords.indices().to_vec();
            let free_mask: u64 = free.iter().fold(0, |a, &b| a | (1 << b));
            for fixed in 0..1u64 << fixed_bits {
                if idx % every == 0 {
                    let base = deposit(fixed, !free_mask & mask(n));
                    out.push((0..size as u64).map(|v| base | deposit(v, free_mask)).collect());
                }
                idx += 1;
            }
            if j == 0 || coords.advance().is_none() {
                break;
            }
        }
    }
    // Hamming balls, ties broken by offset.
    let mut offsets: Vec<u64> = (0..universe).collect();
    offsets.sort_by_key(|&v| (v.count_ones(), v));
    offsets.truncate(size);
    let centers = universe.min(STRUCTURED_CAP as u64 / 2);
    for i in 0..centers {
        let c = if universe <= centers { i } else { rng.gen_range(0..universe) };
        out.push(offsets.iter().map(|&v| c ^ v).collect());
    }
    // Cyclic intervals.
    for i in 0..centers {
        let a = if universe <= centers { i } else { rng.gen_range(0..universe) };
        out.push((0..size as u64).map(|v| (a + v) & mask(n)).collect());
    }
    // Random affine subspaces.
    if pow2 && j <= n {
        for _ in 0..1000 {
            let mut basis: Vec<u64> = Vec::new();
            let mut span = vec![0u64];
            while basis.len() < j as usize {
                let v = rng.gen_range(1..universe);
                if !span.contains(&v) {
                    let more: Vec<u64> = span.iter().map(|s| s ^ v).collect();
                    span.extend(more);
                    basis.push(v);
                }
            }
            let shift = rng.gen_range(0..universe);
            out.push(span.into_iter().map(|s| s ^ shift).collect());
        }
    }
    for s in &mut out {
        s.sort_unstable();
    }
    out
}

/// Scatters the low bits of `v` into the set positions of `m`.
fn deposit(mut v: u64, m: u64) -> u64 {
    let mut out = 0;
    let mut bits = m;
    while bits != 0 {
        let low = bits & bits.wrapping_neg();
        if v & 1 == 1 {
            out |= low;
        }
        v >>= 1;
        bits ^= low;
    }
    out
}

/// Worst-case flat-source error of `ext` at min-entropy `k`.
pub fn worst_flat_error(ext: &Extractor, kind: DivergenceKind, k: f64, family: &SourceFamily, strong: bool) -> Result<WorstReport> {
    FlatOracle::new(ext, kind, strong)?.worst(k, family)
}
