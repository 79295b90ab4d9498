//! Point-biserial correlation between semantic masks and radio signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenegen::SemanticClass;

/// Point-biserial correlation over pixels where `valid` is set and the
/// signal is finite:
///
/// `r = (mu1 - mu0) / sigma * sqrt(n1 * n0 / n^2)`, population `sigma`.
pub fn point_biserial(mask: &[bool], signal: &[f64], valid: &[bool]) -> Result<f64> {
    if mask.len() != signal.len() || mask.len() != valid.len() {
        return Err(Error::DimensionMismatch {
            expected: (mask.len(), 1),
            got: (signal.len().min(valid.len()), 1),
        });
    }
    let (mut n1, mut n0) = (0usize, 0usize);
    let (mut s1, mut s0) = (0.0, 0.0);
    for ((&m, &s), &ok) in mask.iter().zip(signal).zip(valid) {
        if !ok || !s.is_finite() {
            continue;
        }
        if m {
            n1 += 1;
            s1 += s;
        } else {
            n0 += 1;
            s0 += s;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::Undefined(format!("degenerate mask: n1 = {n1}, n0 = {n0}")));
    }
    let n = (n1 + n0) as f64;
    let mean = (s1 + s0) / n;
    let var = mask
        .iter()
        .zip(signal)
        .zip(valid)
        .filter(|((_, s), ok)| **ok && s.is_finite())
        .map(|(( _, s), _)| (s - mean).powi(2))
        .sum::<f64>()
        / n;
    if var <= 0.0 {
        return Err(Error::Undefined("constant signal".into()));
    }
    let (mu1, mu0) = (s1 / n1 as f64, s0 / n0 as f64);
    let r = (mu1 - mu0) / var.sqrt() * ((n1 as f64 * n0 as f64) / (n * n)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

/// Semantic concepts correlated against path gain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Concept {
    Roads,
    Buildings,
    Roofs,
}

impl Concept {
    pub const ALL: [Concept; 3] = [Concept::Roads, Concept::Buildings, Concept::Roofs];

    pub fn name(self) -> &'static str {
        match self {
            Concept::Roads => "Roads",
            Concept::Buildings => "Buildings",
            Concept::Roofs => "Roofs",
        }
    }

    pub fn contains(self, class: SemanticClass) -> bool {
        match self {
            Concept::Roads => class == SemanticClass::Road,
            Concept::Buildings => class.is_building(),
            Concept::Roofs => class == SemanticClass::BuildingRoof,
        }
    }
}

pub fn concept_mask(semantic: &[SemanticClass], concept: Concept) -> Vec<bool> {
    semantic.iter().map(|&c| concept.contains(c)).collect()
}

/// Mean and population standard deviation across images.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(Summary {
        mean,
        std: var.sqrt(),
        count: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: [bool; 4] = [true; 4];

    #[test]
    fn hand_examples() {
        let m = [true, true, false, false];
        assert!((point_biserial(&m, &[1.0, 1.0, 0.0, 0.0], &T).unwrap() - 1.0).abs() < 1e-9);
        let r = point_biserial(&m, &[1.0, 2.0, 3.0, 4.0], &T).unwrap();
        assert!((r + 0.894427190999916).abs() < 1e-9, "{r}");
    }

    #[test]
    fn undefined_cases() {
        let m = [true, true, false, false];
        assert!(matches!(point_biserial(&m, &[2.0; 4], &T), Err(Error::Undefined(_))));
        assert!(matches!(point_biserial(&[true; 4], &[1.0, 2.0, 3.0, 4.0], &T), Err(Error::Undefined(_))));
        // Only invalid pixels differ from the rest.
        assert!(point_biserial(&m, &[1.0, 2.0, 3.0, 4.0], &[true, true, false, false]).is_err());
        assert!(point_biserial(&m, &[1.0, 2.0, 3.0], &T).is_err());
    }

    #[test]
    fn nan_pixels_are_skipped() {
        let m = [true, true, false, false, true];
        let r = point_biserial(&m, &[1.0, 2.0, 3.0, 4.0, f64::NAN], &[true; 5]).unwrap();
        assert!((r + 0.894427190999916).abs() < 1e-9);
    }

    #[test]
    fn concept_masks() {
        let s = [SemanticClass::Road, SemanticClass::BuildingWall, SemanticClass::BuildingRoof, SemanticClass::Sky];
        assert_eq!(concept_mask(&s, Concept::Roads), vec![true, false, false, false]);
        assert_eq!(concept_mask(&s, Concept::Buildings), vec![false, true, true, false]);
        assert_eq!(concept_mask(&s, Concept::Roofs), vec![false, false, true, false]);
    }

    #[test]
    fn summary() {
        let s = summarize(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.count), (2.0, 1.0, 2));
        assert!(summarize(&[]).is_none());
    }

    fn inputs() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
        (4usize..64).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn bounded_sign_flip_affine((mask, signal) in inputs(), a in 0.01f64..100.0, b in -1e3f64..1e3) {
            let valid = vec![true; mask.len()];
            let Ok(r) = point_biserial(&mask, &signal, &valid) else { return Ok(()) };
            prop_assert!((-1.0..=1.0).contains(&r));
            let flipped: Vec<bool> = mask.iter().map(|m| !m).collect();
            prop_assert!((point_biserial(&flipped, &signal, &valid).unwrap() + r).abs() < 1e-12);
            let t: Vec<f64> = signal.iter().map(|s| a * s + b).collect();
            prop_assert!((point_biserial(&mask, &t, &valid).unwrap() - r).abs() < 1e-9);
        }
    }
}
