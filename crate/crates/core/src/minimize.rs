//! Newton–CG minimisation of convex lattice energies.
//!
//! Objective: `E_cell(u) + (m/2)·Σ (u_i − r_i)² − Σ b_i u_i` over the free
//! nodes; fixed nodes keep their values. The Hessian of the cell energy is
//! regularised (`eps_model`) only inside the Newton model; the line search
//! works on the directional derivative of the true objective, which stays
//! accurate long after function values stop resolving the decrease.

use crate::energy::{CellEnergy, HessianModel};
use crate::par;

pub(crate) struct Objective<'a> {
    pub cells: &'a CellEnergy,
    pub free: &'a [bool],
    /// `(m, r)`: mass coefficient and reference state.
    pub mass: Option<(f64, &'a [f64])>,
    pub load: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOptions {
    pub max_iter: usize,
    /// Stop when the relative objective decrease of one iteration falls below this (0 disables).
    pub rel_decrease_tol: f64,
    /// Stop when `max |∇J_i| / residual_scale` over free nodes falls below this.
    pub grad_tol: f64,
    pub residual_scale: f64,
    pub eps_model: f64,
    pub clamp: Option<(f64, f64)>,
    pub cg_max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 100_000,
            rel_decrease_tol: 1e-10,
            grad_tol: 0.0,
            residual_scale: 1.0,
            eps_model: 1e-8,
            clamp: None,
            cg_max_iter: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    pub value: f64,
    pub converged: bool,
}

impl Objective<'_> {
    pub fn value(&self, u: &[f64]) -> f64 {
        let mut v = self.cells.value(u);
        if let Some((m, r)) = self.mass {
            v += 0.5 * m * par::sum_by(u.len(), |i| if self.free[i] { (u[i] - r[i]).powi(2) } else { 0.0 });
        }
        if let Some(b) = self.load {
            v -= par::sum_by(u.len(), |i| if self.free[i] { b[i] * u[i] } else { 0.0 });
        }
        v
    }

    pub fn gradient(&self, u: &[f64], g: &mut [f64]) {
        self.cells.gradient(u, g);
        let (mass, load, free) = (self.mass, self.load, self.free);
        let snapshot: &[f64] = g;
        let mut out = vec![0.0; g.len()];
        par::fill(&mut out, |i| {
            if !free[i] {
                return 0.0;
            }
            let mut v = snapshot[i];
            if let Some((m, r)) = mass {
                v += m * (u[i] - r[i]);
            }
            if let Some(b) = load {
                v -= b[i];
            }
            v
        });
        g.copy_from_slice(&out);
    }

    fn hessian_apply(&self, hm: &HessianModel, v: &[f64], out: &mut [f64]) {
        self.cells.apply_hessian(hm, v, out);
        let m = self.mass.map_or(0.0, |(m, _)| m);
        for i in 0..out.len() {
            out[i] = if self.free[i] { out[i] + m * v[i] } else { 0.0 };
        }
    }
}

fn max_abs(g: &[f64]) -> f64 {
    par::max_by(g.len(), |i| g[i].abs()).max(0.0)
}

/// Preconditioned CG for `H d = -g` restricted to free nodes.
fn pcg(obj: &Objective, hm: &HessianModel, g: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.len();
    let m_diag = obj.mass.map_or(0.0, |(m, _)| m);
    let precond: Vec<f64> = (0..n)
        .map(|i| {
            let d = hm.diagonal()[i] + m_diag;
            if obj.free[i] && d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        })
        .collect();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let r0 = par::dot(&r, &r).sqrt();
    if r0 == 0.0 {
        return x;
    }
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        obj.hessian_apply(hm, &p, &mut ap);
        let pap = par::dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if par::dot(&r, &r).sqrt() <= rel_tol * r0 {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn apply_clamp(u: &mut [f64], free: &[bool], clamp: Option<(f64, f64)>) {
    if let Some((lo, hi)) = clamp {
        for (v, &f) in u.iter_mut().zip(free) {
            if f {
                *v = v.clamp(lo, hi);
            }
        }
    }
}

/// Minimises `obj` starting from `u` (fixed entries of `u` are left untouched).
pub(crate) fn newton(obj: &Objective, u: &mut [f64], opts: &NewtonOptions) -> NewtonStats {
    let n = u.len();
    apply_clamp(u, obj.free, opts.clamp);
    let mut g = vec![0.0; n];
    obj.gradient(u, &mut g);
    let mut value = obj.value(u);
    let g0 = par::dot(&g, &g).sqrt();
    let mut residual = max_abs(&g) / opts.residual_scale;
    let mut trial = vec![0.0; n];
    let mut gt = vec![0.0; n];

    for it in 0..opts.max_iter {
        if residual <= opts.grad_tol || g0 == 0.0 {
            return NewtonStats { iterations: it, residual, value, converged: true };
        }
        let gn = par::dot(&g, &g).sqrt();
        let forcing = (gn / g0).sqrt().clamp(1e-10, 0.5);
        let hm = obj.cells.hessian(u, opts.eps_model);
        let mut d = pcg(obj, &hm, &g, forcing, opts.cg_max_iter);
        let mut slope = par::dot(&g, &d);
        if !(slope < 0.0) {
            // Fall back to the negative gradient.
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }

        // Backtracking on φ(α) = J(u + α d): accept once φ'(α) is non-positive
        // or small relative to φ'(0), rejecting visible increases of J.
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-14 {
            for i in 0..n {
                trial[i] = if obj.free[i] { u[i] + alpha * d[i] } else { u[i] };
            }
            let vt = obj.value(&trial);
            if vt <= value + 1e-13 * value.abs().max(1e-300) {
                obj.gradient(&trial, &mut gt);
                let dphi = par::dot(&gt, &d);
                if dphi <= 0.25 * slope.abs() {
                    accepted = Some(vt);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(_) = accepted else {
            // No representable decrease left: the relative-decrease criterion is met.
            let converged = residual <= opts.grad_tol || opts.rel_decrease_tol > 0.0;
            return NewtonStats { iterations: it, residual, value, converged };
        };
        apply_clamp(&mut trial, obj.free, opts.clamp);
        u.copy_from_slice(&trial);
        let new_value = obj.value(u);
        obj.gradient(u, &mut g);
        residual = max_abs(&g) / opts.residual_scale;
        let decrease = value - new_value;
        value = new_value;
        if opts.rel_decrease_tol > 0.0 && decrease.abs() <= opts.rel_decrease_tol * value.abs() {
            return NewtonStats { iterations: it + 1, residual, value, converged: true };
        }
    }
    NewtonStats {
        iterations: opts.max_iter,
        residual,
        value,
        converged: residual <= opts.grad_tol,
    }
}

/// Replaces the free values of `u` by the discrete harmonic (p = 2) extension of the fixed ones.
pub(crate) fn harmonic_warm_start(cells: &CellEnergy, free: &[bool], u: &mut [f64]) {
    let mut quad = cells.clone();
    quad.p = 2.0;
    quad.eps = 0.0;
    quad.scale = 1.0;
    let obj = Objective { cells: &quad, free, mass: None, load: None };
    let hm = quad.hessian(u, 0.0);
    let mut g = vec![0.0; u.len()];
    obj.gradient(u, &mut g);
    let d = pcg(&obj, &hm, &g, 1e-8, 4000);
    for i in 0..u.len() {
        if free[i] {
            u[i] += d[i];
        }
    }
}
