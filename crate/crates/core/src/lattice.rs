//! Uniform node lattices in one to three dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a node lies on a face.
pub(crate) const GEOM_TOL: f64 = 1e-9;

/// Nodes `origin + i * h`, `0 <= i_k < shape[k]`; axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub h: f64,
    pub origin: [f64; 3],
    pub shape: [usize; 3],
}

impl Lattice {
    pub fn new(dim: usize, h: f64, origin: &[f64], shape: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("lattice spacing {h} must be positive")));
        }
        if origin.len() != dim || shape.len() != dim {
            return Err(Error::invalid("origin/shape length does not match dimension"));
        }
        let mut o = [0.0; 3];
        let mut s = [1usize; 3];
        for k in 0..dim {
            if shape[k] == 0 {
                return Err(Error::invalid("empty lattice axis"));
            }
            o[k] = origin[k];
            s[k] = shape[k];
        }
        Ok(Lattice {
            dim,
            h,
            origin: o,
            shape: s,
        })
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.shape[0], self.shape[0] * self.shape[1]]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.shape[0] * (ijk[1] + self.shape[1] * ijk[2])
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.shape[0];
        let r = idx / self.shape[0];
        [i, r % self.shape[1], r / self.shape[1]]
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.origin[k] + c[k] as f64 * self.h;
        }
        x
    }

    /// Physical volume attached to one node.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Whether all forward neighbours of `idx` exist, i.e. `idx` is the lower corner of a cell.
    pub fn is_cell(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).all(|k| c[k] + 1 < self.shape[k])
    }

    /// Node offsets of the `2^dim` corners of a cell; bit `k` of the corner id selects `+e_k`.
    pub fn corner_offsets(&self) -> Vec<usize> {
        let st = self.strides();
        (0..1usize << self.dim)
            .map(|s| (0..self.dim).filter(|k| s >> k & 1 == 1).map(|k| st[k]).sum())
            .collect()
    }

    /// Face neighbours (2·dim at most).
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(idx);
        let st = self.strides();
        (0..self.dim).flat_map(move |k| {
            let lo = (c[k] > 0).then(|| idx - st[k]);
            let hi = (c[k] + 1 < self.shape[k]).then(|| idx + st[k]);
            lo.into_iter().chain(hi)
        })
    }

    /// Whether `idx` lies on a face of the lattice box.
    pub fn on_face(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).any(|k| c[k] == 0 || c[k] + 1 == self.shape[k])
    }

    /// Continuous index coordinate of `x` along axis `k`.
    pub fn fractional_index(&self, x: f64, k: usize) -> f64 {
        (x - self.origin[k]) / self.h
    }

    /// Index ranges (inclusive) of nodes whose Chebyshev distance to `center` is `<= radius`
    /// (or `< radius` when `open`), clipped to the lattice; `None` if empty.
    pub fn box_range(&self, center: &[f64], radius: f64, open: bool) -> Option<[(usize, usize); 3]> {
        let mut out = [(0usize, 0usize); 3];
        for k in 0..self.dim {
            let c = self.fractional_index(center[k], k);
            let r = radius / self.h;
            let (lo, hi) = if open {
                ((c - r + GEOM_TOL).floor() + 1.0, (c + r - GEOM_TOL).ceil() - 1.0)
            } else {
                ((c - r - GEOM_TOL).ceil(), (c + r + GEOM_TOL).floor())
            };
            let lo = lo.max(0.0);
            let hi = hi.min(self.shape[k] as f64 - 1.0);
            if hi < lo {
                return None;
            }
            out[k] = (lo as usize, hi as usize);
        }
        Some(out)
    }

    /// Node indices in a (clipped) index box, in lattice order.
    pub fn nodes_in_range(&self, r: [(usize, usize); 3]) -> Vec<usize> {
        let mut v = Vec::new();
        for c in r[2].0..=r[2].1 {
            for b in r[1].0..=r[1].1 {
                for a in r[0].0..=r[0].1 {
                    v.push(self.index([a, b, c]));
                }
            }
        }
        v
    }

    /// Whether a closed cube of the given center and half-edge fits inside the lattice box.
    pub fn covers_cube(&self, center: &[f64], half: f64) -> bool {
        (0..self.dim).all(|k| {
            let c = self.fractional_index(center[k], k);
            let r = half / self.h;
            c - r >= -GEOM_TOL && c + r <= (self.shape[k] - 1) as f64 + GEOM_TOL
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let l = Lattice::new(3, 0.5, &[0.0, 0.0, 0.0], &[4, 3, 5]).unwrap();
        for i in 0..l.len() {
            assert_eq!(l.index(l.coords(i)), i);
        }
        assert_eq!(l.corner_offsets(), vec![0, 1, 4, 5, 12, 13, 16, 17]);
        assert_eq!(l.neighbors(0).count(), 3);
    }

    #[test]
    fn box_range_open_and_closed() {
        let l = Lattice::new(1, 0.25, &[-1.0], &[9]).unwrap();
        let closed = l.box_range(&[0.0], 0.5, false).unwrap();
        assert_eq!(closed[0], (2, 6));
        let open = l.box_range(&[0.0], 0.5, true).unwrap();
        assert_eq!(open[0], (3, 5));
    }
}
