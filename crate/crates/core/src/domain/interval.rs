use crate::error::{Error, Result};
use crate::network::{Activation, AffineMap};

/// Elementwise box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Interval {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::ShapeMismatch { expected: vec![lower.len()], got: vec![upper.len()] });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
            return Err(Error::InvalidArgument("interval bounds must be finite with lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[max(0, x−δ), min(1, x+δ)]` per coordinate.
    pub fn input_region(x: &[f64], delta: f64) -> Self {
        let lower = x.iter().map(|v| (v - delta).max(0.0)).collect();
        let upper = x.iter().map(|v| (v + delta).min(1.0)).collect();
        Self { lower, upper }
    }

    pub(crate) fn from_parts(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, point: &[f64], slack: f64) -> bool {
        point.len() == self.len()
            && point.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= l - slack && *v <= u + slack)
    }

    /// True when `self` lies inside `other`.
    pub fn is_within(&self, other: &Interval, slack: f64) -> bool {
        self.len() == other.len()
            && self.lower.iter().zip(&other.lower).all(|(a, b)| *a >= b - slack)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| *a <= b + slack)
    }

    /// Centre/radius interval arithmetic: `W·mid + b ± |W|·rad`.
    pub fn affine(&self, map: &AffineMap) -> Interval {
        let mid: Vec<f64> = self.lower.iter().zip(&self.upper).map(|(l, u)| (l + u) / 2.0).collect();
        let rad: Vec<f64> = self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l) / 2.0).collect();
        let (mut lower, mut upper) = (Vec::with_capacity(map.outputs()), Vec::with_capacity(map.outputs()));
        for (row, b) in map.rows.iter().zip(&map.bias) {
            let (mut m, mut r) = (*b, 0.0);
            for &(i, w) in row {
                m += w * mid[i];
                r += w.abs() * rad[i];
            }
            lower.push(m - r);
            upper.push(m + r);
        }
        Interval { lower, upper }
    }

    /// Image under a monotone activation.
    pub fn activation(&self, a: Activation) -> Interval {
        Interval {
            lower: self.lower.iter().map(|&v| a.apply(v)).collect(),
            upper: self.upper.iter().map(|&v| a.apply(v)).collect(),
        }
    }

    pub fn maxpool(&self, groups: &[Vec<usize>]) -> Interval {
        let pick = |b: &[f64], g: &[usize]| g.iter().map(|&j| b[j]).fold(f64::NEG_INFINITY, f64::max);
        Interval {
            lower: groups.iter().map(|g| pick(&self.lower, g)).collect(),
            upper: groups.iter().map(|g| pick(&self.upper, g)).collect(),
        }
    }

    /// Lower bound of `score_c − score_k` without correlation information.
    pub fn dominance_lower_bound(&self, c: usize, k: usize) -> f64 {
        self.lower[c] - self.upper[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_uses_absolute_weights_for_radius() {
        let b = Interval::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let map = AffineMap { bias: vec![0.5], rows: vec![vec![(0, 2.0), (1, -1.0)]] };
        let out = b.affine(&map);
        // 2*[-1,1] - [0,2] + 0.5 = [-4, 2.5]
        assert_eq!(out.lower(), &[-3.5]);
        assert_eq!(out.upper(), &[2.5]);
    }

    #[test]
    fn input_region_clips_to_unit_box() {
        let r = Interval::input_region(&[0.05, 0.97], 0.1);
        assert!((r.lower()[0] - 0.0).abs() < 1e-15 && (r.upper()[0] - 0.15).abs() < 1e-15);
        assert!((r.lower()[1] - 0.87).abs() < 1e-15 && r.upper()[1] == 1.0);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Interval::new(vec![1.0], vec![0.0]).is_err());
        assert!(Interval::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }
}
