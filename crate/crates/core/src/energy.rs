//! Discrete p-Dirichlet energy on lattice cells.
//!
//! Each cell contributes the average over its `2^N` corners of `ψ(|ξ|²)`,
//! where `ξ` collects the one-sided differences along the cell edges that
//! meet at that corner and `ψ(s) = scale·(s + ε²)^{p/2}`. In one dimension
//! this is the usual edge energy. Averaging over corners removes the
//! orientation bias of a single forward-difference stencil.

use crate::lattice::Lattice;
use crate::par;

#[derive(Debug, Clone)]
pub(crate) struct CellEnergy {
    dim: usize,
    ncorner: usize,
    h: f64,
    /// Node volume times `2^{-N}`.
    corner_weight: f64,
    pub p: f64,
    pub eps: f64,
    pub scale: f64,
    /// Lower-corner node index of every active cell.
    cells: Vec<usize>,
    /// Per active cell coefficient (1 when absent).
    weights: Option<Vec<f64>>,
    /// Node offsets of the cell corners.
    offsets: Vec<usize>,
    /// CSR map node -> slots `cell * ncorner + corner`.
    gather_start: Vec<usize>,
    gather_slot: Vec<u32>,
}

/// Per-corner Hessian blocks (symmetric, stored as full `dim × dim`).
#[derive(Debug, Clone)]
pub(crate) struct HessianModel {
    blocks: Vec<f64>,
    diag: Vec<f64>,
}

impl CellEnergy {
    /// Builds the energy over all lattice cells having at least one node with `active[node]`.
    pub fn new(lat: &Lattice, h: f64, p: f64, eps: f64, scale: f64, active: &[bool]) -> Self {
        let dim = lat.dim;
        let ncorner = 1usize << dim;
        let offsets = lat.corner_offsets();
        let cells: Vec<usize> = (0..lat.len())
            .filter(|&c| lat.is_cell(c) && offsets.iter().any(|&o| active[c + o]))
            .collect();

        let n = lat.len();
        let mut counts = vec![0usize; n + 1];
        for &c in &cells {
            for &o in &offsets {
                counts[c + o + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut slots = vec![0u32; counts[n]];
        for (ci, &c) in cells.iter().enumerate() {
            for (s, &o) in offsets.iter().enumerate() {
                let node = c + o;
                slots[fill[node]] = (ci * ncorner + s) as u32;
                fill[node] += 1;
            }
        }
        CellEnergy {
            dim,
            ncorner,
            h,
            corner_weight: h.powi(dim as i32) / ncorner as f64,
            p,
            eps,
            scale,
            cells,
            weights: None,
            offsets,
            gather_start: counts,
            gather_slot: slots,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Lower-corner node of active cell `i`.
    pub fn cell_node(&self, i: usize) -> usize {
        self.cells[i]
    }

    pub fn corner_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn set_weights(&mut self, w: Vec<f64>) {
        assert_eq!(w.len(), self.cells.len());
        self.weights = Some(w);
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    #[inline]
    fn corner_values(&self, c: usize, u: &[f64], cv: &mut [f64; 8]) {
        for (s, &o) in self.offsets.iter().enumerate() {
            cv[s] = u[c + o];
        }
    }

    /// Edge differences `ξ` (already divided by `h`) at corner `s`.
    #[inline]
    fn xi(&self, cv: &[f64; 8], s: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (k, xk) in x.iter_mut().enumerate().take(self.dim) {
            let b = 1usize << k;
            *xk = (cv[s | b] - cv[s & !b]) / self.h;
        }
        x
    }

    #[inline]
    fn norm2(&self, x: &[f64; 3]) -> f64 {
        x[..self.dim].iter().map(|v| v * v).sum()
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let half_p = 0.5 * self.p;
        let e2 = self.eps * self.eps;
        let w0 = self.corner_weight * self.scale;
        par::sum_by(self.cells.len(), |i| {
            let mut cv = [0.0; 8];
            self.corner_values(self.cells[i], u, &mut cv);
            let mut acc = 0.0;
            for s in 0..self.ncorner {
                let x = self.xi(&cv, s);
                let s2 = self.norm2(&x) + e2;
                if s2 > 0.0 {
                    acc += s2.powf(half_p);
                }
            }
            w0 * self.weight(i) * acc
        })
    }

    fn gather(&self, contrib: &[f64], out: &mut [f64]) {
        par::fill(out, |n| {
            let (a, b) = (self.gather_start[n], self.gather_start[n + 1]);
            let mut s = 0.0;
            for &slot in &self.gather_slot[a..b] {
                s += contrib[slot as usize];
            }
            s
        });
    }

    /// Gradient of the energy with respect to every node value.
    pub fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let nc = self.ncorner;
        let dim = self.dim;
        let e2 = self.eps * self.eps;
        let expo = 0.5 * self.p - 1.0;
        let w0 = self.corner_weight * self.scale * self.p;
        let mut contrib = vec![0.0; self.cells.len() * nc];
        par::chunks_mut(&mut contrib, nc * 256, |start, chunk| {
            let first = start / nc;
            for (j, block) in chunk.chunks_mut(nc).enumerate() {
                let i = first + j;
                let mut cv = [0.0; 8];
                self.corner_values(self.cells[i], u, &mut cv);
                let f = w0 * self.weight(i) / self.h;
                for s in 0..nc {
                    let x = self.xi(&cv, s);
                    let s2 = self.norm2(&x) + e2;
                    if s2 <= 0.0 {
                        continue;
                    }
                    let k0 = f * s2.powf(expo);
                    for (k, xk) in x.iter().enumerate().take(dim) {
                        let b = 1usize << k;
                        let d = k0 * xk;
                        block[s | b] += d;
                        block[s & !b] -= d;
                    }
                }
            }
        });
        self.gather(&contrib, out);
    }

    /// Hessian blocks of the energy with the magnitude regularised by `eps_model`
    /// (the larger of it and the energy's own `eps` is used).
    pub fn hessian(&self, u: &[f64], eps_model: f64) -> HessianModel {
        let nc = self.ncorner;
        let dim = self.dim;
        let bs = dim * dim;
        let em = eps_model.max(self.eps);
        let e2 = em * em;
        let p = self.p;
        let w0 = self.corner_weight * self.scale * p;
        let h2 = self.h * self.h;
        let mut blocks = vec![0.0; self.cells.len() * nc * bs];
        par::chunks_mut(&mut blocks, nc * bs * 128, |start, chunk| {
            let first = start / (nc * bs);
            for (j, cell) in chunk.chunks_mut(nc * bs).enumerate() {
                let i = first + j;
                let mut cv = [0.0; 8];
                self.corner_values(self.cells[i], u, &mut cv);
                let f = w0 * self.weight(i) / h2;
                for s in 0..nc {
                    let x = self.xi(&cv, s);
                    let s2 = self.norm2(&x) + e2;
                    let a = f * s2.powf(0.5 * p - 1.0);
                    let b = if s2 > 0.0 { a * (p - 2.0) / s2 } else { 0.0 };
                    let m = &mut cell[s * bs..(s + 1) * bs];
                    for r in 0..dim {
                        for c in 0..dim {
                            m[r * dim + c] = b * x[r] * x[c] + if r == c { a } else { 0.0 };
                        }
                    }
                }
            }
        });
        // Diagonal: a unit perturbation of corner t changes ξ at corner s by
        // +1 along k if t = s|b, -1 if t = s&!b.
        let mut dcontrib = vec![0.0; self.cells.len() * nc];
        par::chunks_mut(&mut dcontrib, nc * 256, |start, chunk| {
            let first = start / nc;
            for (j, out) in chunk.chunks_mut(nc).enumerate() {
                let i = first + j;
                let cell = &blocks[i * nc * bs..(i + 1) * nc * bs];
                for (t, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for s in 0..nc {
                        let mut d = [0.0; 3];
                        for (k, dk) in d.iter_mut().enumerate().take(dim) {
                            let b = 1usize << k;
                            if t == s | b {
                                *dk = 1.0;
                            } else if t == s & !b {
                                *dk = -1.0;
                            }
                        }
                        let m = &cell[s * bs..(s + 1) * bs];
                        for r in 0..dim {
                            for c in 0..dim {
                                acc += d[r] * m[r * dim + c] * d[c];
                            }
                        }
                    }
                    *o = acc;
                }
            }
        });
        let mut diag = vec![0.0; self.gather_start.len() - 1];
        self.gather(&dcontrib, &mut diag);
        HessianModel { blocks, diag }
    }

    pub fn apply_hessian(&self, hm: &HessianModel, v: &[f64], out: &mut [f64]) {
        let nc = self.ncorner;
        let dim = self.dim;
        let bs = dim * dim;
        let mut contrib = vec![0.0; self.cells.len() * nc];
        par::chunks_mut(&mut contrib, nc * 256, |start, chunk| {
            let first = start / nc;
            for (j, block) in chunk.chunks_mut(nc).enumerate() {
                let i = first + j;
                let mut cv = [0.0; 8];
                self.corner_values(self.cells[i], v, &mut cv);
                let cell = &hm.blocks[i * nc * bs..(i + 1) * nc * bs];
                for s in 0..nc {
                    let mut d = [0.0; 3];
                    for (k, dk) in d.iter_mut().enumerate().take(dim) {
                        let b = 1usize << k;
                        *dk = cv[s | b] - cv[s & !b];
                    }
                    let m = &cell[s * bs..(s + 1) * bs];
                    for r in 0..dim {
                        let y: f64 = (0..dim).map(|c| m[r * dim + c] * d[c]).sum();
                        let b = 1usize << r;
                        block[s | b] += y;
                        block[s & !b] -= y;
                    }
                }
            }
        });
        self.gather(&contrib, out);
    }
}

impl HessianModel {
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice2() -> Lattice {
        Lattice::new(2, 0.25, &[0.0, 0.0], &[5, 4]).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let lat = lattice2();
        let active = vec![true; lat.len()];
        let e = CellEnergy::new(&lat, lat.h, 1.7, 1e-3, 1.0, &active);
        let u: Vec<f64> = (0..lat.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut g = vec![0.0; lat.len()];
        e.gradient(&u, &mut g);
        for i in [0, 3, 7, 11, 19] {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (e.value(&up) - e.value(&dn)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let lat = Lattice::new(3, 0.5, &[0.0; 3], &[3, 3, 3]).unwrap();
        let active = vec![true; lat.len()];
        let e = CellEnergy::new(&lat, lat.h, 1.6, 0.0, 1.0, &active);
        let u: Vec<f64> = (0..lat.len()).map(|i| (i as f64 * 1.3).cos() + i as f64 * 0.1).collect();
        let v: Vec<f64> = (0..lat.len()).map(|i| (i as f64 * 0.4).sin()).collect();
        let hm = e.hessian(&u, 0.0);
        let mut hv = vec![0.0; lat.len()];
        e.apply_hessian(&hm, &v, &mut hv);
        let t = 1e-6;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + t * b).collect();
        let dn: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - t * b).collect();
        let (mut gu, mut gd) = (vec![0.0; lat.len()], vec![0.0; lat.len()]);
        e.gradient(&up, &mut gu);
        e.gradient(&dn, &mut gd);
        for i in 0..lat.len() {
            let fd = (gu[i] - gd[i]) / (2.0 * t);
            assert!((fd - hv[i]).abs() < 1e-5 * (1.0 + fd.abs()));
        }
        // diagonal agrees with e_i^T H e_i
        for i in [0, 13, 26] {
            let mut ei = vec![0.0; lat.len()];
            ei[i] = 1.0;
            e.apply_hessian(&hm, &ei, &mut hv);
            assert!((hv[i] - hm.diagonal()[i]).abs() < 1e-10 * hv[i].abs().max(1.0));
        }
    }

    #[test]
    fn one_dimensional_energy_is_edge_sum() {
        let lat = Lattice::new(1, 0.5, &[0.0], &[4]).unwrap();
        let e = CellEnergy::new(&lat, lat.h, 1.5, 0.0, 1.0, &[true; 4]);
        let u = [0.0, 1.0, 1.0, 3.0];
        let expected: f64 = [2.0f64, 0.0, 4.0].iter().map(|d| 0.5 * d.powf(1.5)).sum();
        assert!((e.value(&u) - expected).abs() < 1e-14);
    }
}
