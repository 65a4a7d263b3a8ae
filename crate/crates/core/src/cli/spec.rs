//! JSON specs for extractors and samplers.
//!
//! Composite specs nest: `{"kind":"zigzag","outer":{…},"inner":{…},"waste":{…},"alpha":…}`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::compose::{
    compose_block, empty_extractor, high_entropy_kl, pad_seed, reextract, rrv_transform, tv_to_kl, zigzag, Extractor,
    LhlProvider,
};
use crate::error::{Error, Result};
use crate::expanders::{expander_extractor_with, GraphProvider, Mgg, XorComplete};
use crate::hashing::{almost_universal_family, lhl_extractor, pairwise_family, universal_family};
use crate::samplers::{expander_sampler, extractor_to_sampler, pairwise_sampler, subgaussian_sampler, Sampler};

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        // Tagged enums buffer their content, which hides the path below the tag.
        if path == "." {
            if let Some(p) = serde_json::from_str::<Value>(text).ok().and_then(|v| culprit::<T>(&v)) {
                path = p;
            }
        }
        Error::Spec(format!("at '{path}': {}", e.into_inner()))
    })
}

/// Dotted path of the field responsible for `v` failing to parse as `T`:
/// nested specs first, then the field whose removal changes the error.
fn culprit<T: DeserializeOwned>(v: &Value) -> Option<String> {
    let Value::Object(map) = v else { return None };
    let original = serde_json::from_value::<T>(v.clone()).err()?.to_string();
    for (key, child) in map {
        if child.get("kind").is_some() {
            if let Some(p) = culprit::<ExtractorSpec>(child) {
                return Some(format!("{key}.{p}"));
            }
        }
    }
    map.keys().filter(|k| *k != "kind").find_map(|key| {
        let mut trimmed = map.clone();
        trimmed.remove(key);
        match serde_json::from_value::<T>(Value::Object(trimmed)) {
            Err(e) if e.to_string() == original => None,
            _ => Some(key.clone()),
        }
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashKind {
    #[default]
    Pairwise,
    Universal,
    /// Almost universal; needs `eps`.
    Au,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    #[default]
    Mgg,
    Xor,
}

impl GraphKind {
    pub fn provider(self) -> &'static dyn GraphProvider {
        match self {
            GraphKind::Mgg => &Mgg,
            GraphKind::Xor => &XorComplete,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    1.0
}

/// Extractor construction tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtractorSpec {
    /// Leftover-hash extractor; `strong` selects `h(x)` over `(h, h(x))`.
    Lhl {
        n: u32,
        m: u32,
        #[serde(default)]
        family: HashKind,
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default = "default_true")]
        strong: bool,
    },
    /// Expander walk with entropy deficiency `delta` (bits) and D₂ error `eps`.
    Expander {
        n: u32,
        delta: f64,
        eps: f64,
        #[serde(default)]
        graph: GraphKind,
    },
    Empty { n: u32 },
    Block { outer: Box<ExtractorSpec>, inner: Box<ExtractorSpec>, alpha: f64, delta: f64 },
    Reextract { first: Box<ExtractorSpec>, second: Box<ExtractorSpec> },
    Zigzag { outer: Box<ExtractorSpec>, inner: Box<ExtractorSpec>, waste: Box<ExtractorSpec>, alpha: f64, delta: f64 },
    Rrv { base: Box<ExtractorSpec>, k: f64, d_extra: u32, eps: f64 },
    TvToKl { base: Box<ExtractorSpec> },
    PadSeed { base: Box<ExtractorSpec>, extra: u32 },
    /// High-min-entropy KL extractor with failure probability `delta`.
    HighEntropy {
        m: u32,
        delta: f64,
        eps: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        graph: GraphKind,
    },
}

impl ExtractorSpec {
    pub fn build(&self) -> Result<Extractor> {
        use ExtractorSpec::*;
        match self {
            Lhl { n, m, family, eps, strong } => {
                let fam = match family {
                    HashKind::Pairwise => pairwise_family(*n, *m)?,
                    HashKind::Universal => universal_family(*n, *m)?,
                    HashKind::Au => {
                        let eps = eps.ok_or_else(|| Error::Spec("almost-universal family needs 'eps'".into()))?;
                        almost_universal_family(*n, *m, eps)?
                    }
                };
                let pair = lhl_extractor(&fam)?;
                Ok(if *strong { pair.strong } else { pair.full })
            }
            Expander { n, delta, eps, graph } => expander_extractor_with(graph.provider(), *n, *delta, *eps),
            Empty { n } => empty_extractor(*n),
            Block { outer, inner, alpha, delta } => compose_block(&outer.build()?, &inner.build()?, *alpha, *delta),
            Reextract { first, second } => reextract(&first.build()?, &second.build()?),
            Zigzag { outer, inner, waste, alpha, delta } => {
                zigzag(&outer.build()?, &inner.build()?, &waste.build()?, *alpha, *delta)
            }
            Rrv { base, k, d_extra, eps } => rrv_transform(&base.build()?, *k, *d_extra, *eps),
            TvToKl { base } => tv_to_kl(&base.build()?),
            PadSeed { base, extra } => pad_seed(&base.build()?, *extra),
            HighEntropy { m, delta, eps, alpha, graph } => {
                Ok(high_entropy_kl(*m, *delta, *eps, *alpha, &LhlProvider, graph.provider())?.extractor)
            }
        }
    }
}

/// Sampler construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Pairwise { m: u32, delta: f64, eps: f64 },
    Expander {
        m: u32,
        delta: f64,
        eps: f64,
        #[serde(default)]
        graph: GraphKind,
    },
    Subgaussian {
        m: u32,
        delta: f64,
        eps: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        graph: GraphKind,
    },
    /// `Samp(x)_i = Ext(x, i)`.
    Extractor { extractor: ExtractorSpec },
}

impl SamplerSpec {
    pub fn build(&self) -> Result<Sampler> {
        match self {
            SamplerSpec::Pairwise { m, delta, eps } => pairwise_sampler(*m, *delta, *eps),
            SamplerSpec::Expander { m, delta, eps, graph } => expander_sampler(*m, *delta, *eps, graph.provider()),
            SamplerSpec::Subgaussian { m, delta, eps, alpha, graph } => {
                subgaussian_sampler(*m, *delta, *eps, *alpha, &LhlProvider, graph.provider())
            }
            SamplerSpec::Extractor { extractor } => extractor_to_sampler(&extractor.build()?),
        }
    }
}

/// `width`-bit value as hex, most significant digit first, zero-padded.
pub fn to_hex(value: u64, width: u32) -> String {
    let digits = width.div_ceil(4).max(1) as usize;
    format!("{value:0digits$x}")
}

/// Parses hex (optional `0x`) and checks it fits `width` bits.
pub fn from_hex(text: &str, width: u32) -> Result<u64> {
    let t = text.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    let v = u64::from_str_radix(t, 16).map_err(|e| Error::Spec(format!("bad hex string {text:?}: {e}")))?;
    if width < 64 && v >> width != 0 {
        return Err(Error::Spec(format!("hex value {text:?} exceeds {width} bits")));
    }
    Ok(v)
}
