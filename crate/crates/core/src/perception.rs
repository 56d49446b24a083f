//! Feature extraction and incremental nearest-neighbor property classifiers.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::WorldObject;

/// Footprint area that maps to a size feature of 1.0.
pub const SIZE_AREA_UNIT: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("feature has dimension {got}, classifier expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("symbol {symbol} belongs to {symbol_kind}, not {classifier_kind}")]
    PropertyMismatch {
        symbol: PerceptSymbol,
        symbol_kind: PropertyKind,
        classifier_kind: PropertyKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Color,
    Size,
    Shape,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 3] = [PropertyKind::Color, PropertyKind::Size, PropertyKind::Shape];

    pub fn as_str(&self) -> &'static str {
        match self {
            PropertyKind::Color => "color",
            PropertyKind::Size => "size",
            PropertyKind::Shape => "shape",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == word)
    }

    /// Position in [`PropertyKind::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn dim(&self) -> usize {
        match self {
            PropertyKind::Size => 1,
            _ => 3,
        }
    }

    /// Largest possible distance between two features of this kind.
    pub fn diameter(&self) -> f64 {
        match self {
            PropertyKind::Size => 1.0,
            _ => 3f64.sqrt(),
        }
    }

    fn prefix(&self) -> char {
        match self {
            PropertyKind::Color => 'c',
            PropertyKind::Size => 's',
            PropertyKind::Shape => 'h',
        }
    }

    fn from_prefix(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.prefix() == c)
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Agent-internal symbol for a perceptual category, e.g. `c1` or `h7`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PerceptSymbol {
    kind: PropertyKind,
    n: u32,
}

impl PerceptSymbol {
    pub fn new(kind: PropertyKind, n: u32) -> Self {
        PerceptSymbol { kind, n }
    }

    pub fn kind(&self) -> PropertyKind {
        self.kind
    }
}

impl fmt::Display for PerceptSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.n)
    }
}

impl TryFrom<String> for PerceptSymbol {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let mut chars = s.chars();
        let kind = chars
            .next()
            .and_then(PropertyKind::from_prefix)
            .ok_or_else(|| format!("bad symbol {s:?}"))?;
        let n = chars.as_str().parse().map_err(|_| format!("bad symbol {s:?}"))?;
        Ok(PerceptSymbol { kind, n })
    }
}

impl From<PerceptSymbol> for String {
    fn from(s: PerceptSymbol) -> String {
        s.to_string()
    }
}

/// Standard deviations of the per-observation Gaussian feature noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureNoise {
    pub color: f64,
    pub size: f64,
    pub shape: f64,
}

impl Default for FeatureNoise {
    fn default() -> Self {
        FeatureNoise { color: 0.02, size: 0.02, shape: 0.08 }
    }
}

impl FeatureNoise {
    pub fn none() -> Self {
        FeatureNoise { color: 0.0, size: 0.0, shape: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFeatures {
    pub color: [f64; 3],
    pub size: f64,
    pub shape: [f64; 3],
}

impl ObjectFeatures {
    pub fn get(&self, kind: PropertyKind) -> Vec<f64> {
        match kind {
            PropertyKind::Color => self.color.to_vec(),
            PropertyKind::Size => vec![self.size],
            PropertyKind::Shape => self.shape.to_vec(),
        }
    }
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

/// One noisy reading of an object's property features.
pub fn extract_features<R: Rng + ?Sized>(
    obj: &WorldObject,
    noise: &FeatureNoise,
    rng: &mut R,
) -> ObjectFeatures {
    let color = obj.color.map(|c| (c + jitter(rng, noise.color)).clamp(0.0, 1.0));
    let area = obj.bbox[0] * obj.bbox[1];
    let size = area / SIZE_AREA_UNIT + jitter(rng, noise.size);
    let shape = obj.shape_descriptor.map(|d| d + jitter(rng, noise.shape));
    ObjectFeatures { color, size, shape }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    Known { symbol: PerceptSymbol, confidence: f64 },
    Unknown,
}

impl Classification {
    pub fn symbol(&self) -> Option<&PerceptSymbol> {
        match self {
            Classification::Known { symbol, .. } => Some(symbol),
            Classification::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Example {
    feature: Vec<f64>,
    symbol: PerceptSymbol,
}

/// Distance-weighted k-nearest-neighbor classifier for one property kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyClassifier {
    pub kind: PropertyKind,
    pub k: usize,
    pub sigma: f64,
    pub threshold: f64,
    examples: Vec<Example>,
    /// Symbols in order of their first training example.
    order: Vec<PerceptSymbol>,
}

impl PropertyClassifier {
    pub fn new(kind: PropertyKind) -> Self {
        PropertyClassifier {
            kind,
            k: 3,
            sigma: 0.1 * kind.diameter(),
            threshold: 0.5,
            examples: Vec::new(),
            order: Vec::new(),
        }
    }

    fn check(&self, feature: &[f64]) -> Result<(), PerceptionError> {
        if feature.len() != self.kind.dim() {
            return Err(PerceptionError::DimensionMismatch {
                expected: self.kind.dim(),
                got: feature.len(),
            });
        }
        Ok(())
    }

    pub fn train(&mut self, feature: &[f64], symbol: &PerceptSymbol) -> Result<(), PerceptionError> {
        self.check(feature)?;
        if symbol.kind() != self.kind {
            return Err(PerceptionError::PropertyMismatch {
                symbol: symbol.clone(),
                symbol_kind: symbol.kind(),
                classifier_kind: self.kind,
            });
        }
        if !self.order.contains(symbol) {
            self.order.push(symbol.clone());
        }
        self.examples.push(Example { feature: feature.to_vec(), symbol: symbol.clone() });
        Ok(())
    }

    pub fn classify(&self, feature: &[f64]) -> Result<Classification, PerceptionError> {
        self.check(feature)?;
        if self.examples.is_empty() {
            return Ok(Classification::Unknown);
        }
        let mut by_distance: Vec<(f64, &Example)> = self
            .examples
            .iter()
            .map(|e| (euclidean(&e.feature, feature), e))
            .collect();
        // stable sort keeps insertion order among equal distances
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
        let two_sigma_sq = 2.0 * self.sigma * self.sigma;
        let mut votes = vec![0.0; self.order.len()];
        for (d, e) in by_distance.iter().take(self.k) {
            let slot = self.order.iter().position(|s| s == &e.symbol).expect("trained symbol");
            votes[slot] += (-d * d / two_sigma_sq).exp();
        }
        let total: f64 = votes.iter().sum();
        if total <= 0.0 {
            return Ok(Classification::Unknown);
        }
        let mut best = 0;
        for (i, v) in votes.iter().enumerate() {
            if *v > votes[best] {
                best = i;
            }
        }
        let confidence = votes[best] / total;
        if confidence < self.threshold {
            return Ok(Classification::Unknown);
        }
        Ok(Classification::Known { symbol: self.order[best].clone(), confidence })
    }

    pub fn example_count(&self, symbol: &PerceptSymbol) -> usize {
        self.examples.iter().filter(|e| &e.symbol == symbol).count()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The three property classifiers plus the shared symbol counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifiers {
    pub color: PropertyClassifier,
    pub size: PropertyClassifier,
    pub shape: PropertyClassifier,
    pub next_symbol: u32,
}

impl Default for Classifiers {
    fn default() -> Self {
        Classifiers {
            color: PropertyClassifier::new(PropertyKind::Color),
            size: PropertyClassifier::new(PropertyKind::Size),
            shape: PropertyClassifier::new(PropertyKind::Shape),
            next_symbol: 1,
        }
    }
}

impl Classifiers {
    pub fn get(&self, kind: PropertyKind) -> &PropertyClassifier {
        match kind {
            PropertyKind::Color => &self.color,
            PropertyKind::Size => &self.size,
            PropertyKind::Shape => &self.shape,
        }
    }

    pub fn get_mut(&mut self, kind: PropertyKind) -> &mut PropertyClassifier {
        match kind {
            PropertyKind::Color => &mut self.color,
            PropertyKind::Size => &mut self.size,
            PropertyKind::Shape => &mut self.shape,
        }
    }

    pub fn new_symbol(&mut self, kind: PropertyKind) -> PerceptSymbol {
        let s = PerceptSymbol::new(kind, self.next_symbol);
        self.next_symbol += 1;
        s
    }

    pub fn train(
        &mut self,
        features: &ObjectFeatures,
        symbol: &PerceptSymbol,
    ) -> Result<(), PerceptionError> {
        self.get_mut(symbol.kind()).train(&features.get(symbol.kind()), symbol)
    }

    /// Classifies every property; the result is indexed like `PropertyKind::ALL`.
    pub fn classify_all(&self, features: &ObjectFeatures) -> [Classification; 3] {
        PropertyKind::ALL.map(|k| {
            self.get(k)
                .classify(&features.get(k))
                .expect("features have the classifier's dimension")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(kind: PropertyKind, n: u32) -> PerceptSymbol {
        PerceptSymbol::new(kind, n)
    }

    #[test]
    fn empty_classifier_is_unknown() {
        let c = PropertyClassifier::new(PropertyKind::Color);
        assert_eq!(c.classify(&[0.1, 0.2, 0.3]).unwrap(), Classification::Unknown);
    }

    #[test]
    fn dimension_and_property_mismatch() {
        let mut c = PropertyClassifier::new(PropertyKind::Size);
        assert!(matches!(
            c.classify(&[0.1, 0.2]),
            Err(PerceptionError::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(matches!(
            c.train(&[0.5], &sym(PropertyKind::Color, 1)),
            Err(PerceptionError::PropertyMismatch { .. })
        ));
    }

    #[test]
    fn single_example_classifies_with_full_confidence() {
        let mut c = PropertyClassifier::new(PropertyKind::Color);
        c.train(&[1.0, 0.0, 0.0], &sym(PropertyKind::Color, 1)).unwrap();
        match c.classify(&[0.9, 0.1, 0.0]).unwrap() {
            Classification::Known { symbol, confidence } => {
                assert_eq!(symbol, sym(PropertyKind::Color, 1));
                assert_eq!(confidence, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn far_query_underflows_to_unknown() {
        let mut c = PropertyClassifier::new(PropertyKind::Size);
        c.sigma = 0.001;
        c.train(&[0.0], &sym(PropertyKind::Size, 1)).unwrap();
        assert_eq!(c.classify(&[100.0]).unwrap(), Classification::Unknown);
    }

    #[test]
    fn vote_tie_goes_to_earliest_symbol() {
        let mut c = PropertyClassifier::new(PropertyKind::Size);
        c.train(&[0.0], &sym(PropertyKind::Size, 2)).unwrap();
        c.train(&[1.0], &sym(PropertyKind::Size, 1)).unwrap();
        match c.classify(&[0.5]).unwrap() {
            Classification::Known { symbol, confidence } => {
                assert_eq!(symbol, sym(PropertyKind::Size, 2));
                assert!((confidence - 0.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn one_symbol_can_cover_disjoint_regions() {
        let mut c = PropertyClassifier::new(PropertyKind::Size);
        let (small_or_huge, medium) = (sym(PropertyKind::Size, 1), sym(PropertyKind::Size, 2));
        for x in [0.0, 0.05, 1.0, 0.95] {
            c.train(&[x], &small_or_huge).unwrap();
        }
        c.train(&[0.5], &medium).unwrap();
        c.train(&[0.45], &medium).unwrap();
        for (q, want) in [(0.02, &small_or_huge), (0.98, &small_or_huge), (0.48, &medium)] {
            match c.classify(&[q]).unwrap() {
                Classification::Known { symbol, .. } => assert_eq!(&symbol, want, "{q}"),
                other => panic!("{q}: {other:?}"),
            }
        }
    }

    #[test]
    fn symbols_round_trip_and_counter_is_shared() {
        let mut cs = Classifiers::default();
        let a = cs.new_symbol(PropertyKind::Color);
        let b = cs.new_symbol(PropertyKind::Shape);
        assert_eq!(a.to_string(), "c1");
        assert_eq!(b.to_string(), "h2");
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<PerceptSymbol>(&json).unwrap(), b);
        assert!(serde_json::from_str::<PerceptSymbol>("\"x9\"").is_err());
    }

    #[test]
    fn noise_free_features() {
        let obj = WorldObject {
            id: crate::world::ObjectId(1),
            pose: [0.5, 0.5, 0.05],
            bbox: [0.1, 0.1, 0.1],
            color: [0.2, 0.4, 0.6],
            size_class: 0.1,
            shape_descriptor: [0.1, 0.9, 0.3],
            graspable: true,
        };
        let mut rng = rand::rng();
        let f = extract_features(&obj, &FeatureNoise::none(), &mut rng);
        assert_eq!(f.color, [0.2, 0.4, 0.6]);
        assert!((f.size - 1.0).abs() < 1e-12);
        assert_eq!(f.shape, [0.1, 0.9, 0.3]);
    }
}
