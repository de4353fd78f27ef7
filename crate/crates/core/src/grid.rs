//! Periodic Cartesian grids on a 3-torus.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec3;

/// Node-centered periodic grid. Node `(i, j, k)` sits at
/// `origin + (i Δx, j Δy, k Δz)`, the lower corner of cell `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    pub origin: Vec3,
}

impl GridSpec {
    pub fn new(dims: [usize; 3], lengths: [f64; 3], origin: Vec3) -> Result<Self> {
        for m in 0..3 {
            if dims[m] < 4 {
                return Err(Error::Config(format!(
                    "grid dimension {} is {}, need at least 4",
                    m, dims[m]
                )));
            }
            if !(lengths[m] > 0.0 && lengths[m].is_finite()) {
                return Err(Error::Config(format!(
                    "grid length {} must be positive, got {}",
                    m, lengths[m]
                )));
            }
            if !origin[m].is_finite() {
                return Err(Error::Config("grid origin must be finite".into()));
            }
        }
        Ok(GridSpec {
            dims,
            lengths,
            origin,
        })
    }

    /// `[-2π, 2π]³` with the given resolution, the domain of every scenario.
    pub fn periodic_box(dims: [usize; 3]) -> Result<Self> {
        GridSpec::new(dims, [4.0 * PI; 3], [-2.0 * PI; 3])
    }

    pub fn cubic(n: usize) -> Result<Self> {
        GridSpec::periodic_box([n, n, n])
    }

    /// Same physical box, different resolution.
    pub fn with_dims(&self, dims: [usize; 3]) -> Result<Self> {
        GridSpec::new(dims, self.lengths, self.origin)
    }

    #[inline]
    pub fn spacing(&self) -> Vec3 {
        [
            self.lengths[0] / self.dims[0] as f64,
            self.lengths[1] / self.dims[1] as f64,
            self.lengths[2] / self.dims[2] as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        [
            self.origin[0] + i as f64 * h[0],
            self.origin[1] + j as f64 * h[1],
            self.origin[2] + k as f64 * h[2],
        ]
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.unflatten(idx);
        self.node(i, j, k)
    }

    /// Wrap a coordinate into `[origin, origin + L)` along axis `m`.
    #[inline]
    pub fn wrap_axis(&self, m: usize, x: f64) -> f64 {
        let l = self.lengths[m];
        let r = (x - self.origin[m]).rem_euclid(l);
        // rem_euclid can round up to exactly l
        if r >= l {
            0.0
        } else {
            r
        }
    }

    /// Cell containing `x` and the fractional position inside it, each in
    /// `[0, 1)`. A point exactly on a node lands in the cell whose lower
    /// corner is that node; coordinates within a few ulps of a node are
    /// snapped onto it so node round trips are exact.
    #[inline]
    pub fn locate(&self, x: Vec3) -> ([usize; 3], Vec3) {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for m in 0..3 {
            let n = self.dims[m];
            let mut s = self.wrap_axis(m, x[m]) * (n as f64 / self.lengths[m]);
            let r = s.round();
            if (s - r).abs() <= 1e-12 * n as f64 {
                s = if r >= n as f64 { 0.0 } else { r };
            }
            let mut c = s.floor();
            if c >= n as f64 {
                c = (n - 1) as f64;
            }
            cell[m] = c as usize;
            frac[m] = (s - c).clamp(0.0, 1.0);
        }
        (cell, frac)
    }

    /// Shortest signed separation `a - b` on the torus along each axis.
    pub fn periodic_delta(&self, a: Vec3, b: Vec3) -> Vec3 {
        let mut d = [0.0; 3];
        for m in 0..3 {
            let l = self.lengths[m];
            let mut v = (a[m] - b[m]).rem_euclid(l);
            if v > 0.5 * l {
                v -= l;
            }
            d[m] = v;
        }
        d
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.len()).map(move |idx| self.node_at(idx))
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.dims[0], self.dims[1], self.dims[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_dims() {
        assert!(GridSpec::periodic_box([3, 8, 8]).is_err());
        assert!(GridSpec::new([8, 8, 8], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn locate_wraps_and_ties_to_lower_corner() {
        let g = GridSpec::cubic(8).unwrap();
        let h = g.spacing()[0];
        let node = g.node(3, 0, 7);
        let (c, f) = g.locate(node);
        assert_eq!(c, [3, 0, 7]);
        assert_eq!(f, [0.0, 0.0, 0.0]);

        // one full period away lands on the same cell
        let shifted = [node[0] + 4.0 * PI, node[1] - 8.0 * PI, node[2]];
        let (c2, f2) = g.locate(shifted);
        assert_eq!(c2, c);
        assert!(f2.iter().all(|v| *v < 1e-12 || (1.0 - *v) < 1e-12));

        let mid = [node[0] + 0.5 * h, node[1], node[2]];
        let (c3, f3) = g.locate(mid);
        assert_eq!(c3[0], 3);
        assert!((f3[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn index_round_trip() {
        let g = GridSpec::periodic_box([5, 6, 7]).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.unflatten(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    proptest::proptest! {
        #[test]
        fn periodic_delta_is_short_and_congruent(
            a in proptest::array::uniform3(-50.0..50.0f64),
            b in proptest::array::uniform3(-50.0..50.0f64),
        ) {
            let g = GridSpec::new([8, 12, 16], [4.0, 6.0, 2.0], [-1.0, 0.0, 3.0]).unwrap();
            let d = g.periodic_delta(a, b);
            for m in 0..3 {
                let l = g.lengths[m];
                proptest::prop_assert!(d[m].abs() <= 0.5 * l + 1e-12);
                let turns = (a[m] - b[m] - d[m]) / l;
                proptest::prop_assert!((turns - turns.round()).abs() < 1e-9);
            }
        }

        #[test]
        fn locate_lands_in_cell(x in proptest::array::uniform3(-30.0..30.0f64)) {
            let g = GridSpec::periodic_box([8, 10, 12]).unwrap();
            let (cell, s) = g.locate(x);
            for m in 0..3 {
                proptest::prop_assert!(cell[m] < g.dims[m]);
                proptest::prop_assert!((0.0..=1.0).contains(&s[m]));
            }
        }
    }
}
