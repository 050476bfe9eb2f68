//! Vector math shared by every stage: the embedding newtype, dot/norm
//! kernels, cosine similarity and the clamped component similarity used by
//! the unit scoring rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as degenerate embeddings.
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Default embedding width for new indexes.
pub const DEFAULT_DIM: usize = 384;

/// A finite, non-empty embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct SemanticVector {
    values: Vec<f32>,
}

impl SemanticVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    /// Builds a vector and checks it against the configured width.
    pub fn with_dim(values: Vec<f32>, dim: usize) -> Result<Self> {
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub(crate) fn view(&self) -> VecRef<'_> {
        VecRef::new(&self.values)
    }
}

impl TryFrom<Vec<f32>> for SemanticVector {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SemanticVector> for Vec<f32> {
    fn from(v: SemanticVector) -> Self {
        v.values
    }
}

/// Dot product with eight f64 accumulators. Every f32 product is exact in
/// f64, so results depend only on the fixed lane/summation order.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for lane in 0..8 {
            acc[lane] += x[lane] as f64 * y[lane] as f64;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// A borrowed vector with its norm precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct VecRef<'a> {
    pub values: &'a [f32],
    pub norm: f64,
}

impl<'a> VecRef<'a> {
    pub fn new(values: &'a [f32]) -> Self {
        Self {
            values,
            norm: norm(values),
        }
    }

    pub fn with_norm(values: &'a [f32], norm: f64) -> Self {
        Self { values, norm }
    }
}

/// Cosine of two borrowed vectors whose norms are already known.
#[inline]
pub(crate) fn cosine_ref(a: VecRef<'_>, b: VecRef<'_>) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            expected: a.values.len(),
            actual: b.values.len(),
        });
    }
    if a.norm < ZERO_NORM_EPS || b.norm < ZERO_NORM_EPS {
        return Err(Error::ZeroNormVector);
    }
    let c = dot(a.values, b.values) / (a.norm * b.norm);
    Ok(c.clamp(-1.0, 1.0))
}

/// Cosine similarity, in [-1, 1].
pub fn cosine_sim(a: &SemanticVector, b: &SemanticVector) -> Result<f64> {
    cosine_ref(a.view(), b.view())
}

/// `1 - cosine_sim(a, b)`, in [0, 2].
pub fn cos_distance(a: &SemanticVector, b: &SemanticVector) -> Result<f64> {
    cosine_sim(a, b).map(|c| 1.0 - c)
}

/// Cosine that reads a degenerate (zero-norm) operand as "no similarity".
#[inline]
pub(crate) fn cosine_or_zero(a: VecRef<'_>, b: VecRef<'_>) -> Result<f64> {
    match cosine_ref(a, b) {
        Ok(c) => Ok(c),
        Err(Error::ZeroNormVector) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// One role term of a unit comparison: clamped cosine when both sides are
/// present, 1 when both are absent, 0 when exactly one is.
#[inline]
pub(crate) fn component_sim(a: Option<VecRef<'_>>, b: Option<VecRef<'_>>) -> Result<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(cosine_or_zero(a, b)?.max(0.0)),
        (None, None) => Ok(1.0),
        _ => Ok(0.0),
    }
}

/// L2-normalises `values` in place; returns false when the norm is degenerate.
pub(crate) fn normalize_in_place(values: &mut [f32]) -> bool {
    let n = norm(values);
    if n < ZERO_NORM_EPS {
        return false;
    }
    for v in values.iter_mut() {
        *v = (*v as f64 / n) as f32;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f32]) -> SemanticVector {
        SemanticVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn self_and_antipodal() {
        let a = v(&[0.3, -1.2, 4.0, 0.5]);
        let neg = v(&[-0.3, 1.2, -4.0, -0.5]);
        assert!((cosine_sim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!((cosine_sim(&a, &neg).unwrap() + 1.0).abs() < 1e-9);
        assert!(cos_distance(&a, &a).unwrap().abs() < 1e-9);
    }

    #[test]
    fn orthogonal_basis() {
        let e1 = v(&[1.0, 0.0, 0.0]);
        let e2 = v(&[0.0, 1.0, 0.0]);
        assert_eq!(cosine_sim(&e1, &e2).unwrap(), 0.0);
        assert_eq!(cos_distance(&e1, &e2).unwrap(), 1.0);
    }

    #[test]
    fn worked_example() {
        // 32 / sqrt(14 * 77), evaluated with 40-digit arithmetic.
        let a = v(&[1.0, 2.0, 3.0]);
        let b = v(&[4.0, 5.0, 6.0]);
        assert!((cosine_sim(&a, &b).unwrap() - 0.974_631_846).abs() < 1e-6);
        assert!((cos_distance(&a, &b).unwrap() - 0.025_368_154).abs() < 1e-6);
    }

    #[test]
    fn zero_norm_and_mismatch() {
        let z = v(&[0.0, 0.0, 0.0]);
        let a = v(&[1.0, 0.0, 0.0]);
        assert!(matches!(cosine_sim(&z, &a), Err(Error::ZeroNormVector)));
        let b = v(&[1.0, 0.0]);
        assert!(matches!(
            cosine_sim(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            SemanticVector::new(vec![1.0, f32::NAN]),
            Err(Error::NonFinite)
        ));
        assert!(SemanticVector::new(vec![]).is_err());
        assert!(SemanticVector::with_dim(vec![1.0; 3], 4).is_err());
    }

    #[test]
    fn component_rules() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[-1.0, 0.0]);
        assert_eq!(component_sim(Some(a.view()), Some(b.view())).unwrap(), 0.0);
        assert_eq!(component_sim(None, None).unwrap(), 1.0);
        assert_eq!(component_sim(Some(a.view()), None).unwrap(), 0.0);
    }

    #[test]
    fn dot_matches_naive_on_odd_lengths() {
        for len in [1usize, 7, 8, 9, 23, 384] {
            let a: Vec<f32> = (0..len).map(|i| (i as f32 * 0.37).sin()).collect();
            let b: Vec<f32> = (0..len).map(|i| (i as f32 * 0.11).cos()).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-9);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f32>> {
            prop::collection::vec(-10.0f32..10.0, dim)
                .prop_filter("non-degenerate", |xs| norm(xs) > 1e-3)
        }

        proptest! {
            #[test]
            fn symmetric(a in vec_strategy(16), b in vec_strategy(16)) {
                let (a, b) = (v(&a), v(&b));
                let ab = cosine_sim(&a, &b).unwrap();
                let ba = cosine_sim(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-9);
                prop_assert!((-1.0..=1.0).contains(&ab));
            }

            #[test]
            fn positive_scale_invariant(a in vec_strategy(12), b in vec_strategy(12), c in 0.01f32..100.0, k in -10i32..10) {
                let base = cosine_sim(&v(&a), &v(&b)).unwrap();
                // Power-of-two scaling is exact in f32.
                let p = 2f32.powi(k);
                let exact: Vec<f32> = a.iter().map(|x| x * p).collect();
                prop_assert!((base - cosine_sim(&v(&exact), &v(&b)).unwrap()).abs() <= 1e-9);
                // Arbitrary scaling rounds each coordinate in f32.
                let scaled: Vec<f32> = a.iter().map(|x| x * c).collect();
                prop_assert!((base - cosine_sim(&v(&scaled), &v(&b)).unwrap()).abs() <= 1e-6);
            }

            #[test]
            fn distance_complements_similarity(a in vec_strategy(8), b in vec_strategy(8)) {
                let (a, b) = (v(&a), v(&b));
                let s = cosine_sim(&a, &b).unwrap();
                let d = cos_distance(&a, &b).unwrap();
                prop_assert!((s + d - 1.0).abs() <= 1e-12);
            }
        }
    }
}
