use serde::{Deserialize, Serialize};

use crate::error::{PcisError, Result};

/// Closed axis-aligned box `[lo_0, hi_0] × … × [lo_{n-1}, hi_{n-1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(PcisError::InvalidArgument(format!(
                "box bounds of dimension {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(PcisError::InvalidArgument(format!(
                    "box axis {i} has bounds [{l}, {h}]; need finite lo < hi"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Box from `[lo, hi]` pairs, one per axis.
    pub fn from_bounds(bounds: &[[f64; 2]]) -> Result<Self> {
        Self::new(
            bounds.iter().map(|b| b[0]).collect(),
            bounds.iter().map(|b| b[1]).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&p, (&l, &h))| l <= p && p <= h)
    }

    /// Euclidean distance from `point` to the box (zero inside).
    pub fn distance_to(&self, point: &[f64]) -> f64 {
        point
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&p, (&l, &h))| {
                let d = if p < l {
                    l - p
                } else if p > h {
                    p - h
                } else {
                    0.0
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Volume of the intersection with `other`.
    pub fn overlap_volume(&self, other: &AxisBox) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((&l1, &h1), (&l2, &h2))| (h1.min(h2) - l1.max(l2)).max(0.0))
            .product()
    }
}

impl TryFrom<Vec<[f64; 2]>> for AxisBox {
    type Error = PcisError;

    fn try_from(bounds: Vec<[f64; 2]>) -> Result<Self> {
        AxisBox::from_bounds(&bounds)
    }
}

impl From<AxisBox> for Vec<[f64; 2]> {
    fn from(b: AxisBox) -> Self {
        b.lo.iter().zip(&b.hi).map(|(&l, &h)| [l, h]).collect()
    }
}

/// Union of pairwise non-overlapping boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    boxes: Vec<AxisBox>,
    volume: f64,
}

impl Region {
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        let Some(first) = boxes.first() else {
            return Err(PcisError::InvalidArgument("region has no boxes".into()));
        };
        let dim = first.dim();
        if let Some(b) = boxes.iter().find(|b| b.dim() != dim) {
            return Err(PcisError::InvalidArgument(format!(
                "region mixes boxes of dimension {dim} and {}",
                b.dim()
            )));
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].overlap_volume(&boxes[j]) > 0.0 {
                    return Err(PcisError::InvalidArgument(format!(
                        "region boxes {i} and {j} overlap"
                    )));
                }
            }
        }
        let volume = boxes.iter().map(AxisBox::volume).sum();
        Ok(Self { boxes, volume })
    }

    pub fn from_box(b: AxisBox) -> Self {
        let volume = b.volume();
        Self {
            boxes: vec![b],
            volume,
        }
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    /// Lebesgue measure φ(Q).
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(point))
    }

    /// Smallest box containing every box of the region.
    pub fn bounding_box(&self) -> AxisBox {
        let dim = self.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for b in &self.boxes {
            for i in 0..dim {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        AxisBox { lo, hi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_and_geometry() {
        let b = AxisBox::from_bounds(&[[0.0, 2.0], [1.0, 4.0]]).unwrap();
        assert_eq!(b.volume(), 6.0);
        assert_eq!(b.center(), vec![1.0, 2.5]);
        assert!((b.diameter() - 13f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.distance_to(&[3.0, 2.0]), 1.0);
        assert_eq!(b.distance_to(&[1.0, 2.0]), 0.0);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(AxisBox::from_bounds(&[[1.0, 1.0]]).is_err());
        assert!(AxisBox::from_bounds(&[[0.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn overlapping_boxes_are_rejected() {
        let a = AxisBox::from_bounds(&[[0.0, 2.0]]).unwrap();
        let b = AxisBox::from_bounds(&[[1.0, 3.0]]).unwrap();
        assert!(Region::new(vec![a.clone(), b]).is_err());
        let c = AxisBox::from_bounds(&[[2.0, 3.0]]).unwrap();
        let r = Region::new(vec![a, c]).unwrap();
        assert_eq!(r.volume(), 3.0);
        assert!(r.contains(&[2.5]));
    }

    #[test]
    fn serde_uses_bound_pairs() {
        let b: AxisBox = serde_json::from_str("[[23, 28]]").unwrap();
        assert_eq!(b.lo(), &[23.0]);
        assert_eq!(serde_json::to_string(&b).unwrap(), "[[23.0,28.0]]");
        assert!(serde_json::from_str::<AxisBox>("[[2, 1]]").is_err());
    }
}
