//! Harnack-type functionals evaluated on solver fields.
//!
//! The constants in these inequalities are only known to exist, so each
//! check reports the smallest (or largest) constant that makes the inequality
//! hold on the given field. Integrals are node sums `h^N Σ u` over the closed
//! cube, and `sup`/`inf` run over contained nodes and stored times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{harnack_lambda, Cube, Cylinder};
use crate::pde::{truncate, zero_extend, Field, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnackConstants {
    /// Waiting-time constant of the weak Harnack inequality.
    pub c: f64,
    pub eta: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta_lemma: f64,
}

impl Default for HarnackConstants {
    fn default() -> Self {
        HarnackConstants {
            c: 0.5,
            eta: 0.5,
            gamma: 2.0,
            gamma1: 2.0,
            gamma2: 2.0,
            delta_lemma: 0.5,
        }
    }
}

impl HarnackConstants {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(unit(self.c) && unit(self.eta) && unit(self.delta_lemma)) {
            return Err(Error::invalid("c, η and δ must lie in (0, 1)"));
        }
        if !(self.gamma > 0.0 && self.gamma1 > 1.0 && self.gamma2 > 1.0) {
            return Err(Error::invalid("γ must be positive and γ₁, γ₂ must exceed 1"));
        }
        Ok(())
    }
}

/// Evaluated inequality `lhs ≤ rhs` with every unknown constant set to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Smallest constant making the inequality hold (largest `η` for the weak Harnack check).
    pub empirical_constant: f64,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
}

impl HarnackReport {
    fn new(check: &str, lhs: f64, rhs: f64, empirical_constant: f64, pass: bool) -> Self {
        HarnackReport {
            check: check.to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            empirical_constant,
            pass,
            details: BTreeMap::new(),
        }
    }

    fn detail(mut self, key: &str, v: f64) -> Self {
        self.details.insert(key.to_string(), v);
        self
    }
}

/// `θ = c·(average of u over K at time s)^{2−p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Theta {
    Finite(f64),
    /// Zero average: the waiting time is unbounded.
    Infinite,
}

impl Theta {
    pub fn value(self) -> f64 {
        match self {
            Theta::Finite(v) => v,
            Theta::Infinite => f64::INFINITY,
        }
    }
}

fn nodes_of(u: &Field, k: &Cube) -> Vec<usize> {
    u.lattice
        .box_range(&k.center, k.half_edge, false)
        .map(|r| u.lattice.nodes_in_range(r))
        .unwrap_or_default()
}

fn covered(u: &Field, k: &Cube) -> Result<Vec<usize>> {
    if k.dim() != u.dim() {
        return Err(Error::invalid("cube dimension does not match the field"));
    }
    if !u.lattice.covers_cube(&k.center, k.half_edge) {
        return Err(Error::Geometry(format!(
            "cube of half-edge {} around {:?} leaves the lattice",
            k.half_edge, k.center
        )));
    }
    Ok(nodes_of(u, k))
}

fn require_inside(u: &Field, k: &Cube) -> Result<()> {
    let nodes = covered(u, k)?;
    if nodes.iter().any(|&i| !u.inside[i]) {
        return Err(Error::Geometry(format!(
            "cube of half-edge {} around {:?} is not contained in E",
            k.half_edge, k.center
        )));
    }
    Ok(())
}

fn integral(u: &Field, n: usize, nodes: &[usize]) -> f64 {
    let vol = u.h().powi(u.dim() as i32);
    vol * nodes.iter().map(|&i| u.values[n][i]).sum::<f64>()
}

fn stored_times(u: &Field, a: f64, b: f64) -> Result<Vec<usize>> {
    if b > *u.times.last().unwrap_or(&0.0) + 1e-9 * (1.0 + b.abs()) || a < u.times[0] - 1e-9 * (1.0 + a.abs()) {
        return Err(Error::Geometry(format!(
            "time window [{a}, {b}] leaves the stored interval [{}, {}]",
            u.times[0],
            u.times.last().unwrap_or(&0.0)
        )));
    }
    let idx = u.times_in(a, b);
    if idx.is_empty() {
        return Err(Error::Geometry(format!("no stored time in [{a}, {b}]; refine the time step")));
    }
    Ok(idx)
}

pub fn intrinsic_theta(u: &Field, k: &Cube, s: f64, c: f64, p: f64) -> Result<Theta> {
    let nodes = covered(u, k)?;
    let n = u.time_index(s);
    if nodes.iter().any(|&i| u.values[n][i] < 0.0) {
        return Err(Error::invalid("u must be nonnegative on the cube"));
    }
    let avg = nodes.iter().map(|&i| u.values[n][i]).sum::<f64>() / nodes.len() as f64;
    Ok(if avg > 0.0 {
        Theta::Finite(c * avg.powf(2.0 - p))
    } else {
        Theta::Infinite
    })
}

/// Measures `η` in `inf_{K_{2ρ}(y)} u(·,t) ≥ η·avg_{K_{2ρ}(y)} u(·,s)` for `t ∈ [s + ¾θρ^p, s + θρ^p]`.
///
/// `details["eta_k8"]` is the same ratio with the infimum over `K_{8ρ}(y)`.
pub fn weak_harnack_ratio(u: &Field, y: &[f64], rho: f64, s: f64, c: f64, p: f64) -> Result<HarnackReport> {
    let k2 = Cube::new(y, 2.0 * rho)?;
    let k8 = Cube::new(y, 8.0 * rho)?;
    require_inside(u, &Cube::new(y, 16.0 * rho)?)?;
    let theta = intrinsic_theta(u, &k2, s, c, p)?;
    let n0 = u.time_index(s);
    let nodes2 = nodes_of(u, &k2);
    let avg = nodes2.iter().map(|&i| u.values[n0][i]).sum::<f64>() / nodes2.len() as f64;
    let Theta::Finite(th) = theta else {
        return Ok(HarnackReport::new("weak", 0.0, 0.0, f64::NAN, false).detail("theta", f64::INFINITY));
    };
    let span = th * rho.powf(p);
    let window = stored_times(u, s, s + span)?;
    let late: Vec<usize> = window
        .into_iter()
        .filter(|&n| u.times[n] >= s + 0.75 * span - 1e-12 * (1.0 + s.abs()))
        .collect();
    if late.is_empty() {
        return Err(Error::Geometry(format!(
            "no stored time in [s + ¾θρ^p, s + θρ^p] = [{}, {}]; refine the time step",
            s + 0.75 * span,
            s + span
        )));
    }
    let nodes8 = nodes_of(u, &k8);
    let inf_over = |nodes: &[usize]| {
        late.iter()
            .flat_map(|&n| nodes.iter().map(move |&i| u.values[n][i]))
            .fold(f64::INFINITY, f64::min)
    };
    let inf2 = inf_over(&nodes2);
    let inf8 = inf_over(&nodes8);
    let eta = inf2 / avg;
    Ok(HarnackReport::new("weak", inf2, avg, eta, eta > 0.0)
        .detail("theta", th)
        .detail("average", avg)
        .detail("eta_k8", inf8 / avg)
        .detail("t_lo", s + 0.75 * span)
        .detail("t_hi", s + span))
}

fn time_term(t: f64, s: f64, rho: f64, lambda: f64, p: f64) -> f64 {
    ((t - s) / rho.powf(lambda)).powf(1.0 / (2.0 - p))
}

/// Measures `γ` in `sup_τ ∫_{K_ρ(y)} u ≤ γ inf_τ ∫_{K_{2ρ}(y)} u + γ((t−s)/ρ^λ)^{1/(2−p)}`, `τ ∈ [s, t]`.
pub fn l1_harnack_gap(u: &Field, y: &[f64], rho: f64, s: f64, t: f64, p: f64) -> Result<HarnackReport> {
    if !(t > s) {
        return Err(Error::invalid("the time interval must be nonempty"));
    }
    let k1 = Cube::new(y, rho)?;
    let k2 = Cube::new(y, 2.0 * rho)?;
    require_inside(u, &k2)?;
    let times = stored_times(u, s, t)?;
    let n1 = nodes_of(u, &k1);
    let n2 = nodes_of(u, &k2);
    let lhs = times.iter().map(|&n| integral(u, n, &n1)).fold(f64::NEG_INFINITY, f64::max);
    let first = times.iter().map(|&n| integral(u, n, &n2)).fold(f64::INFINITY, f64::min);
    let lambda = harnack_lambda(u.dim(), p);
    let second = time_term(t, s, rho, lambda, p);
    let gamma = lhs / (first + second);
    Ok(HarnackReport::new("l1", lhs, first + second, gamma, gamma.is_finite())
        .detail("lambda", lambda)
        .detail("first", first)
        .detail("second", second))
}

/// `v = μ − u_k` on `Q`, with `u_k = (u − k)_+` extended by zero and `μ = sup_Q u_k`.
pub fn boundary_super_solution(u: &Field, k: f64, q: &Cylinder) -> Result<Field> {
    let uk = zero_extend(&truncate(u, k, Sign::Plus), q)?;
    let nodes = nodes_of(&uk, &q.base);
    let mu = uk
        .values
        .iter()
        .flat_map(|v| nodes.iter().map(move |&i| v[i]))
        .fold(0.0f64, f64::max);
    Ok(uk.map(move |x| mu - x))
}

/// Measures `γ` in `sup_{s<τ<t} ∫_{K_ρ} v ≤ γ ∫_{K_{2ρ}} v(·,t) + γ((t−s)/ρ^λ)^{1/(2−p)}`.
///
/// Also evaluates the special time `s̄ = t − [∫_{K_{2ρ}} v(·,t)]^{2−p} ρ^λ`; when it lies in
/// the stored window, `details["reduced_constant"]` is the smallest `γ` in
/// `sup_{s̄<τ<t} ∫_{K_ρ} v ≤ γ ∫_{K_{2ρ}} v(·,t)`.
pub fn boundary_l1_harnack_gap(v: &Field, x_o: &[f64], rho: f64, s: f64, t: f64, p: f64) -> Result<HarnackReport> {
    if !(t > s) {
        return Err(Error::invalid("the time interval must be nonempty"));
    }
    let k1 = Cube::new(x_o, rho)?;
    let k2 = Cube::new(x_o, 2.0 * rho)?;
    covered(v, &k2)?;
    let times = stored_times(v, s, t)?;
    let n1 = nodes_of(v, &k1);
    let n2 = nodes_of(v, &k2);
    let nt = *times.last().unwrap();
    let sup_over = |from: f64| {
        times
            .iter()
            .filter(|&&n| v.times[n] >= from - 1e-12)
            .map(|&n| integral(v, n, &n1))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let lhs = sup_over(s);
    let first = integral(v, nt, &n2);
    let lambda = harnack_lambda(v.dim(), p);
    let second = time_term(t, s, rho, lambda, p);
    let gamma = lhs / (first + second);
    let mut report = HarnackReport::new("boundary-l1", lhs, first + second, gamma, gamma.is_finite())
        .detail("lambda", lambda)
        .detail("first", first)
        .detail("second", second);
    let s_bar = t - first.max(0.0).powf(2.0 - p) * rho.powf(lambda);
    report = report.detail("s_bar", s_bar);
    if s_bar > 0.0 && s_bar >= v.times[0] - 1e-12 && first > 0.0 {
        let sup_bar = sup_over(s_bar);
        report = report
            .detail("reduced_lhs", sup_bar)
            .detail("reduced_constant", sup_bar / first)
            .detail("constant_at_s_bar", sup_bar / (first + time_term(t, s_bar, rho, lambda, p)));
    }
    Ok(report)
}

/// Measures `γ(p)` in
/// `(1/ρ)∫_s^t∫_{K_{σρ}} |Dv|^{p−1} ≤ δ sup_τ ∫_{K_ρ} v + γ(p)/[δ²(1−σ)^p]^{(p−1)/(2−p)} ((t−s)/ρ^λ)^{1/(2−p)}`.
///
/// `|Dv|` uses forward differences; the time integral is the right-endpoint rule on stored times.
/// `details["budget"]` is the part of the left side not covered by the first term.
#[allow(clippy::too_many_arguments)]
pub fn gradient_l1_estimate(
    v: &Field,
    x_o: &[f64],
    rho: f64,
    sigma: f64,
    delta: f64,
    s: f64,
    t: f64,
    p: f64,
) -> Result<HarnackReport> {
    if !(sigma > 0.0 && sigma < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("σ and δ must lie in (0, 1)"));
    }
    if !(t > s) {
        return Err(Error::invalid("the time interval must be nonempty"));
    }
    let k1 = Cube::new(x_o, rho)?;
    let ks = Cube::new(x_o, sigma * rho)?;
    covered(v, &k1.scaled(1.0 + 2.0 * v.h() / rho))?;
    let times = stored_times(v, s, t)?;
    let lat = &v.lattice;
    let dim = lat.dim;
    let h = lat.h;
    let vol = h.powi(dim as i32);
    let strides = lat.strides();
    let ns = nodes_of(v, &ks);
    let grad_term = |n: usize| {
        let vals = &v.values[n];
        vol * ns
            .iter()
            .map(|&i| {
                let g2: f64 = (0..dim)
                    .map(|k| {
                        let d = (vals[i + strides[k]] - vals[i]) / h;
                        d * d
                    })
                    .sum();
                g2.sqrt().powf(p - 1.0)
            })
            .sum::<f64>()
    };
    let mut lhs = 0.0;
    for &n in &times {
        if n == 0 || v.times[n] <= s + 1e-12 {
            continue;
        }
        let dt = v.times[n] - v.times[n - 1].max(s);
        lhs += dt * grad_term(n);
    }
    lhs /= rho;
    let n1 = nodes_of(v, &k1);
    let sup = times.iter().map(|&n| integral(v, n, &n1)).fold(f64::NEG_INFINITY, f64::max);
    let lambda = harnack_lambda(dim, p);
    let weight = (delta * delta * (1.0 - sigma).powf(p)).powf((p - 1.0) / (2.0 - p));
    let second = time_term(t, s, rho, lambda, p) / weight;
    let budget = (lhs - delta * sup).max(0.0);
    let gamma = budget / second;
    Ok(HarnackReport::new("gradient", lhs, delta * sup + second, gamma, gamma.is_finite())
        .detail("sup", sup)
        .detail("second", second)
        .detail("budget", budget)
        .detail("lambda", lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    fn constant_field(c: f64, h: f64) -> Field {
        field_with_step(c, h, 0.025, 1.0)
    }

    fn field_with_step(c: f64, h: f64, dt: f64, t_end: f64) -> Field {
        let n = (2.0 / h).round() as usize + 1;
        let lat = Lattice::new(2, h, &[-1.0, -1.0], &[n, n]).unwrap();
        let inside = (0..lat.len()).map(|i| !lat.on_face(i)).collect();
        let times: Vec<f64> = (0..=(t_end / dt).round() as usize).map(|k| k as f64 * dt).collect();
        Field {
            values: vec![vec![c; lat.len()]; times.len()],
            lattice: lat,
            inside,
            times,
        }
    }

    #[test]
    fn theta_examples() {
        let k = Cube::new(&[0.0, 0.0], 0.25).unwrap();
        assert_eq!(intrinsic_theta(&constant_field(1.0, 0.125), &k, 0.0, 0.5, 1.8).unwrap(), Theta::Finite(0.5));
        assert_eq!(intrinsic_theta(&constant_field(4.0, 0.125), &k, 0.0, 1.0, 1.5).unwrap(), Theta::Finite(2.0));
        assert_eq!(intrinsic_theta(&constant_field(0.0, 0.125), &k, 0.0, 1.0, 1.5).unwrap(), Theta::Infinite);
    }

    #[test]
    fn constant_fields() {
        let w = weak_harnack_ratio(&field_with_step(2.0, 1.0 / 64.0, 1e-4, 0.11), &[0.0, 0.0], 0.05, 0.1, 0.5, 1.8).unwrap();
        let u = constant_field(2.0, 1.0 / 64.0);
        assert!(w.pass && (w.empirical_constant - 1.0).abs() < 1e-14);
        let l = l1_harnack_gap(&u, &[0.0, 0.0], 0.1, 0.0, 0.5, 1.8).unwrap();
        assert!(l.pass && l.empirical_constant <= 1.0);
        let g = gradient_l1_estimate(&u, &[0.0, 0.0], 0.2, 0.5, 0.5, 0.0, 0.5, 1.8).unwrap();
        assert_eq!(g.lhs, 0.0);
        assert_eq!(g.empirical_constant, 0.0);
    }

    #[test]
    fn vanishing_field_fails_weak_check() {
        let mut u = field_with_step(1.0, 1.0 / 64.0, 1e-4, 0.01);
        for v in u.values.iter_mut().skip(1) {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        let w = weak_harnack_ratio(&u, &[0.0, 0.0], 0.05, 0.0, 0.5, 1.8).unwrap();
        assert_eq!(w.empirical_constant, 0.0);
        assert!(!w.pass);
    }

    #[test]
    fn containment_is_checked() {
        let u = constant_field(1.0, 1.0 / 16.0);
        assert!(matches!(
            weak_harnack_ratio(&u, &[0.5, 0.0], 0.05, 0.0, 0.5, 1.8),
            Err(Error::Geometry(_))
        ));
    }
}
