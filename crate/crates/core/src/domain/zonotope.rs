use rayon::prelude::*;

use super::interval::Interval;
use crate::error::{Error, Result};
use crate::network::{sigmoid, Activation, AffineMap};

/// `{ c + G·ε : ε ∈ [−1,1]^k }` with `G` stored row-major (`n × k`).
///
/// Noise symbols are shared across dimensions, so correlations survive affine
/// layers. Only the nonlinear transformers add symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: Vec<f64>,
    generators: Vec<f64>,
    symbols: usize,
}

/// Rows at or above this many coefficients are processed in parallel.
const PARALLEL_WORK: usize = 1 << 16;

impl Zonotope {
    pub fn new(center: Vec<f64>, generators: Vec<f64>, symbols: usize) -> Result<Self> {
        if generators.len() != center.len() * symbols {
            return Err(Error::ShapeMismatch {
                expected: vec![center.len(), symbols],
                got: vec![generators.len()],
            });
        }
        if center.iter().chain(&generators).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("zonotope"));
        }
        Ok(Self { center, generators, symbols })
    }

    /// One private symbol per dimension encoding the box.
    pub fn from_interval(b: &Interval) -> Self {
        let n = b.len();
        let mut generators = vec![0.0; n * n];
        let center = b
            .lower()
            .iter()
            .zip(b.upper())
            .enumerate()
            .map(|(i, (l, u))| {
                generators[i * n + i] = (u - l) / 2.0;
                (l + u) / 2.0
            })
            .collect();
        Self { center, generators, symbols: n }
    }

    /// The clipped L∞ ball `[max(0, x−δ), min(1, x+δ)]`.
    pub fn input_region(x: &[f64], delta: f64) -> Self {
        Self::from_interval(&Interval::input_region(x, delta))
    }

    pub fn dims(&self) -> usize {
        self.center.len()
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.generators[i * self.symbols..(i + 1) * self.symbols]
    }

    fn radius(&self, i: usize) -> f64 {
        self.row(i).iter().map(|g| g.abs()).sum()
    }

    /// Concretization: `c_i ± Σ_j |G_ij|`.
    pub fn bounds(&self) -> Interval {
        let (lower, upper) = (0..self.dims())
            .map(|i| {
                let r = self.radius(i);
                (self.center[i] - r, self.center[i] + r)
            })
            .unzip();
        Interval::from_parts(lower, upper)
    }

    /// Point of the zonotope for a given noise assignment.
    pub fn evaluate(&self, eps: &[f64]) -> Vec<f64> {
        (0..self.dims())
            .map(|i| self.center[i] + self.row(i).iter().zip(eps).map(|(g, e)| g * e).sum::<f64>())
            .collect()
    }

    /// Exact image under `x ↦ W·x + b`.
    pub fn affine(&self, map: &AffineMap) -> Zonotope {
        let k = self.symbols;
        let n = map.outputs();
        let mut generators = vec![0.0; n * k];
        let fill = |(o, out): (usize, &mut [f64])| {
            for &(i, w) in &map.rows[o] {
                let src = &self.generators[i * k..(i + 1) * k];
                for (d, s) in out.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        };
        if k > 0 {
            if n * k >= PARALLEL_WORK {
                generators.par_chunks_mut(k).enumerate().for_each(fill);
            } else {
                generators.chunks_mut(k).enumerate().for_each(fill);
            }
        }
        let center = map
            .rows
            .iter()
            .zip(&map.bias)
            .map(|(row, b)| b + row.iter().map(|&(i, w)| w * self.center[i]).sum::<f64>())
            .collect();
        Zonotope { center, generators, symbols: k }
    }

    /// Rebuilds the zonotope row by row. `per_row` returns the row scale, the
    /// new centre and, optionally, the magnitude of a fresh symbol.
    fn map_rows(&self, per_row: impl Fn(usize, f64, f64) -> RowUpdate) -> Zonotope {
        let bounds = self.bounds();
        let updates: Vec<RowUpdate> =
            (0..self.dims()).map(|i| per_row(i, bounds.lower()[i], bounds.upper()[i])).collect();
        let fresh = updates.iter().filter(|u| u.fresh.is_some()).count();
        let k = self.symbols + fresh;
        let mut generators = vec![0.0; self.dims() * k];
        let mut next = self.symbols;
        let mut center = Vec::with_capacity(self.dims());
        for (i, u) in updates.iter().enumerate() {
            let dst = &mut generators[i * k..(i + 1) * k];
            if u.scale != 0.0 {
                for (d, s) in dst.iter_mut().zip(self.row(i)) {
                    *d = u.scale * s;
                }
            }
            if let Some(m) = u.fresh {
                dst[next] = m;
                next += 1;
            }
            center.push(u.center);
        }
        Zonotope { center, generators, symbols: k }
    }

    /// Minimal-area parallelogram relaxation of ReLU.
    pub fn relu(&self) -> Zonotope {
        self.map_rows(|i, l, u| {
            let c = self.center[i];
            if l >= 0.0 {
                RowUpdate { scale: 1.0, center: c, fresh: None }
            } else if u <= 0.0 {
                RowUpdate { scale: 0.0, center: 0.0, fresh: None }
            } else {
                let lambda = u / (u - l);
                let mu = -lambda * l / 2.0;
                RowUpdate { scale: lambda, center: lambda * c + mu, fresh: Some(mu) }
            }
        })
    }

    /// Relaxation of sigmoid / tanh with slope `min(g'(l), g'(u))`.
    pub fn sshape(&self, g: Activation) -> Zonotope {
        assert!(g != Activation::Relu, "sshape transformer needs sigmoid or tanh");
        let (f, df): (fn(f64) -> f64, fn(f64) -> f64) = match g {
            Activation::Sigmoid => (sigmoid, |v| {
                let s = sigmoid(v);
                s * (1.0 - s)
            }),
            _ => (f64::tanh, |v| 1.0 - v.tanh().powi(2)),
        };
        self.map_rows(|i, l, u| {
            if l == u {
                return RowUpdate { scale: 0.0, center: f(l), fresh: None };
            }
            let (gl, gu) = (f(l), f(u));
            let lambda = df(l).min(df(u));
            let mu1 = (gu + gl - lambda * (u + l)) / 2.0;
            let mu2 = (gu - gl - lambda * (u - l)) / 2.0;
            RowUpdate { scale: lambda, center: lambda * self.center[i] + mu1, fresh: Some(mu2) }
        })
    }

    pub fn activation(&self, a: Activation) -> Zonotope {
        match a {
            Activation::Relu => self.relu(),
            _ => self.sshape(a),
        }
    }

    /// Max pooling over `groups` (flattened input indices per output).
    ///
    /// A cell whose lower bound dominates every other cell's upper bound is
    /// passed through exactly; otherwise the pool becomes an uncorrelated
    /// interval `[max l, max u]` on a fresh symbol.
    pub fn maxpool(&self, groups: &[Vec<usize>]) -> Zonotope {
        let b = self.bounds();
        let (lo, hi) = (b.lower(), b.upper());
        enum Out {
            Pass(usize),
            Fresh(f64, f64),
        }
        let outs: Vec<Out> = groups
            .iter()
            .map(|g| {
                let dominant = g.iter().copied().find(|&j| g.iter().all(|&i| i == j || lo[j] >= hi[i]));
                match dominant {
                    Some(j) => Out::Pass(j),
                    None => {
                        let l = g.iter().map(|&j| lo[j]).fold(f64::NEG_INFINITY, f64::max);
                        let u = g.iter().map(|&j| hi[j]).fold(f64::NEG_INFINITY, f64::max);
                        Out::Fresh(l, u)
                    }
                }
            })
            .collect();
        let fresh = outs.iter().filter(|o| matches!(o, Out::Fresh(l, u) if u > l)).count();
        let k = self.symbols + fresh;
        let mut generators = vec![0.0; groups.len() * k];
        let mut center = Vec::with_capacity(groups.len());
        let mut next = self.symbols;
        for (p, out) in outs.iter().enumerate() {
            let dst = &mut generators[p * k..(p + 1) * k];
            match *out {
                Out::Pass(j) => {
                    dst[..self.symbols].copy_from_slice(self.row(j));
                    center.push(self.center[j]);
                }
                Out::Fresh(l, u) => {
                    center.push((l + u) / 2.0);
                    if u > l {
                        dst[next] = (u - l) / 2.0;
                        next += 1;
                    }
                }
            }
        }
        Zonotope { center, generators, symbols: k }
    }

    /// Drops noise symbols whose coefficients are zero in every row.
    pub fn compact(&self) -> Zonotope {
        let k = self.symbols;
        let mut live = vec![false; k];
        for row in self.generators.chunks_exact(k.max(1)) {
            for (flag, g) in live.iter_mut().zip(row) {
                *flag |= *g != 0.0;
            }
        }
        let keep: Vec<usize> = (0..k).filter(|&j| live[j]).collect();
        if keep.len() == k {
            return self.clone();
        }
        let mut generators = Vec::with_capacity(self.dims() * keep.len());
        for i in 0..self.dims() {
            let row = self.row(i);
            generators.extend(keep.iter().map(|&j| row[j]));
        }
        Zonotope { center: self.center.clone(), generators, symbols: keep.len() }
    }

    /// Certified lower bound of `y_c − y_k`, computed on the difference form
    /// so shared symbols cancel.
    pub fn dominance_lower_bound(&self, c: usize, k: usize) -> f64 {
        let spread: f64 = self.row(c).iter().zip(self.row(k)).map(|(a, b)| (a - b).abs()).sum();
        (self.center[c] - self.center[k]) - spread
    }
}

struct RowUpdate {
    scale: f64,
    center: f64,
    fresh: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(center: f64, gens: &[f64]) -> Zonotope {
        Zonotope::new(vec![center], gens.to_vec(), gens.len()).unwrap()
    }

    #[test]
    fn degenerate_region() {
        let z = Zonotope::input_region(&[0.3, 0.7], 0.0);
        assert_eq!(z.center(), &[0.3, 0.7]);
        assert!(z.generators.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn clipped_region() {
        let z = Zonotope::input_region(&[0.05], 0.1);
        assert_abs_diff_eq!(z.center()[0], 0.075, epsilon = 1e-15);
        assert_abs_diff_eq!(z.row(0)[0], 0.075, epsilon = 1e-15);
    }

    #[test]
    fn interior_region() {
        let z = Zonotope::input_region(&[0.5, 0.5], 0.1);
        assert_eq!(z.symbols(), 2);
        let b = z.bounds();
        for i in 0..2 {
            assert_abs_diff_eq!(b.lower()[i], 0.4, epsilon = 1e-15);
            assert_abs_diff_eq!(b.upper()[i], 0.6, epsilon = 1e-15);
        }
    }

    #[test]
    fn affine_identity_is_noop() {
        let z = Zonotope::input_region(&[0.2, 0.9, 0.4], 0.05);
        let map = AffineMap { bias: vec![0.0; 3], rows: (0..3).map(|i| vec![(i, 1.0)]).collect() };
        assert_eq!(z.affine(&map), z);
    }

    #[test]
    fn affine_sum_of_two_symbols() {
        let z = Zonotope::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let map = AffineMap { bias: vec![0.0], rows: vec![vec![(0, 1.0), (1, 1.0)]] };
        let out = z.affine(&map);
        assert_eq!(out.center(), &[0.0]);
        assert_eq!(out.row(0), &[1.0, 1.0]);
        assert_eq!((out.bounds().lower()[0], out.bounds().upper()[0]), (-2.0, 2.0));
    }

    #[test]
    fn relu_stable_cases() {
        let pos = single(3.5, &[1.5]).relu();
        assert_eq!((pos.center()[0], pos.row(0)), (3.5, &[1.5][..]));
        let neg = single(-3.5, &[1.5]).relu();
        assert_eq!(neg.center()[0], 0.0);
        assert!(neg.row(0).iter().all(|&g| g == 0.0));
        assert_eq!(neg.symbols(), 1);
    }

    #[test]
    fn relu_crossing_neuron() {
        let z = single(0.0, &[1.0]).relu();
        assert_eq!(z.center(), &[0.25]);
        assert_eq!(z.row(0), &[0.5, 0.25]);
        let b = z.bounds();
        assert_eq!((b.lower()[0], b.upper()[0]), (-0.5, 1.0));
    }

    #[test]
    fn sshape_point_interval() {
        let z = single(0.0, &[0.0]).sshape(Activation::Sigmoid);
        assert_eq!(z.center(), &[0.5]);
        assert_eq!(z.symbols(), 1);
    }

    #[test]
    fn tanh_symmetric_interval() {
        let z = single(0.0, &[1.0]).sshape(Activation::Tanh);
        let lambda = 1.0 - 1f64.tanh().powi(2);
        assert_abs_diff_eq!(lambda, 0.41997, epsilon = 1e-5);
        assert_abs_diff_eq!(z.center()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.row(0)[0], lambda, epsilon = 1e-15);
        // tanh(1) − λ = 0.761594 − 0.419974
        assert_abs_diff_eq!(z.row(0)[1], 1f64.tanh() - lambda, epsilon = 1e-15);
        assert_abs_diff_eq!(z.row(0)[1], 0.34162, epsilon = 1e-5);
    }

    #[test]
    fn maxpool_cases() {
        // Dominant first cell: bounds {[3,4],[0,1],[0,1],[0,1]}.
        let z = Zonotope::new(vec![3.5, 0.5, 0.5, 0.5], vec![0.5, 0.0, 0.0, 0.5, 0.0, 0.5, 0.5, 0.0], 2).unwrap();
        let p = z.maxpool(&[vec![0, 1, 2, 3]]);
        assert_eq!(p.center(), &[3.5]);
        assert_eq!(p.row(0), &[0.5, 0.0]);

        // {[0,2],[1,3]} -> [1,3] on a fresh symbol.
        let z = Zonotope::new(vec![1.0, 2.0], vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let p = z.maxpool(&[vec![0, 1]]);
        assert_eq!(p.center(), &[2.0]);
        assert_eq!(p.row(0), &[0.0, 0.0, 1.0]);

        // Constant pool.
        let z = Zonotope::new(vec![0.7; 4], vec![0.0; 4], 1).unwrap();
        let p = z.maxpool(&[vec![0, 1, 2, 3]]);
        assert_eq!(p.center(), &[0.7]);
        assert_eq!(p.bounds().upper(), &[0.7]);
    }

    #[test]
    fn dominance_uses_difference_form() {
        let z = Zonotope::new(vec![1.0, 1.0], vec![0.3, -0.2, 0.3, -0.2], 2).unwrap();
        assert_eq!(z.dominance_lower_bound(0, 1), 0.0);
        let z = Zonotope::new(vec![1.0, 0.0], vec![0.5, 0.5], 1).unwrap();
        assert_eq!(z.dominance_lower_bound(0, 1), 1.0);
        // Per-class bounds lose the shared symbol.
        assert_eq!(z.bounds().dominance_lower_bound(0, 1), 0.0);
        let z = Zonotope::new(vec![1.0, 0.0], vec![0.5, -0.5], 1).unwrap();
        assert_eq!(z.dominance_lower_bound(0, 1), 0.0);
    }

    #[test]
    fn compact_drops_dead_symbols() {
        let z = Zonotope::new(vec![0.0, 0.0], vec![1.0, 0.0, 2.0, 0.0, 0.0, 3.0], 3).unwrap();
        let c = z.compact();
        assert_eq!(c.symbols(), 2);
        assert_eq!(c.row(0), &[1.0, 2.0]);
        assert_eq!(c.row(1), &[0.0, 3.0]);
        assert_eq!(c.bounds(), z.bounds());
    }
}
