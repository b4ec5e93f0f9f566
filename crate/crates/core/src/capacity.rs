//! Elliptic p-capacity, its parabolic slice integral and the capacity density `δ(ρ)`.
//!
//! A condenser is a node set `K` inside an open window `Ω`. The capacitary
//! potential is 1 on `K`, 0 on every node not strictly inside `Ω`, and
//! minimises the discrete p-Dirichlet energy elsewhere. Solves run in lattice
//! units; the physical value is `h^{N−p}` times the lattice energy.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::energy::CellEnergy;
use crate::error::{Error, Result};
use crate::geometry::{rasterize_cube_difference, Cube, GridDomain, Phase, Shape};
use crate::lattice::{Lattice, GEOM_TOL};
use crate::minimize::{harmonic_warm_start, newton, NewtonOptions, Objective};
use crate::par;

/// Open window of a condenser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Cube(Cube),
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Region::Cube(c) => &c.center,
            Region::Ball { center, .. } => center,
        }
    }

    /// Half-edge of the smallest axis-parallel cube containing the region.
    pub fn bounding_half_edge(&self) -> f64 {
        match self {
            Region::Cube(c) => c.half_edge,
            Region::Ball { radius, .. } => *radius,
        }
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        match self {
            Region::Cube(c) => c.contains_open(x),
            Region::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                d2.sqrt() < radius * (1.0 - GEOM_TOL)
            }
        }
    }

    /// The image under `x ↦ s·x`.
    pub fn scaled(&self, s: f64) -> Region {
        match self {
            Region::Cube(c) => Region::Cube(Cube {
                center: c.center.iter().map(|v| v * s).collect(),
                half_edge: c.half_edge * s,
            }),
            Region::Ball { center, radius } => Region::Ball {
                center: center.iter().map(|v| v * s).collect(),
                radius: radius * s,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityProblem {
    /// Node indices of `K` on `lattice`.
    pub inner: Vec<usize>,
    pub window: Region,
    pub p: f64,
    pub lattice: Lattice,
}

impl CapacityProblem {
    /// Condenser whose core is every node of `lattice` satisfying `in_core`.
    pub fn from_predicate(lattice: &Lattice, window: Region, p: f64, in_core: impl Fn(&[f64]) -> bool) -> Self {
        let dim = lattice.dim;
        let inner = (0..lattice.len())
            .filter(|&i| in_core(&lattice.point(i)[..dim]))
            .collect();
        CapacityProblem {
            inner,
            window,
            p,
            lattice: lattice.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityOptions {
    /// Stop once one Newton step lowers the energy by less than this fraction.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Regularisation of the Newton model, in lattice units; `None` uses `1e-8 × (cells across the window)`.
    pub eps_model: Option<f64>,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            rel_tol: 1e-10,
            max_iter: 100_000,
            eps_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub value: f64,
    /// Capacitary potential on `lattice` (the window plus one layer of nodes).
    pub potential: Vec<f64>,
    pub lattice: Lattice,
    pub iterations: usize,
    /// Final max-norm of the energy gradient over free nodes, in lattice units.
    pub residual: f64,
}

pub fn p_capacity(problem: &CapacityProblem) -> Result<CapacityResult> {
    p_capacity_with(problem, &CapacityOptions::default())
}

pub fn p_capacity_with(problem: &CapacityProblem, opts: &CapacityOptions) -> Result<CapacityResult> {
    let lat = &problem.lattice;
    let dim = lat.dim;
    let p = problem.p;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("exponent p = {p} must exceed 1")));
    }
    if problem.window.dim() != dim {
        return Err(Error::invalid("window dimension does not match the lattice"));
    }
    if !(problem.window.bounding_half_edge() > 0.0) {
        return Err(Error::invalid("window must be nonempty"));
    }

    // Sub-lattice: the window's interior nodes plus the first layer outside.
    let h = lat.h;
    let mut lo = [0i64; 3];
    let mut shape = [1usize; 3];
    let r = problem.window.bounding_half_edge() / h;
    for k in 0..dim {
        let c = lat.fractional_index(problem.window.center()[k], k);
        lo[k] = (c - r + GEOM_TOL).floor() as i64;
        let hi = (c + r - GEOM_TOL).ceil() as i64;
        shape[k] = (hi - lo[k] + 1) as usize;
    }
    let origin: Vec<f64> = (0..dim).map(|k| lat.origin[k] + lo[k] as f64 * h).collect();
    let sub = Lattice::new(dim, h, &origin, &shape[..dim])?;
    let n = sub.len();

    let mut interior = vec![false; n];
    par::fill(&mut interior, |i| problem.window.contains_open(&sub.point(i)[..dim]));

    let mut core = vec![false; n];
    for &g in &problem.inner {
        if g >= lat.len() {
            return Err(Error::invalid(format!("condenser node {g} outside the lattice")));
        }
        let c = lat.coords(g);
        let mut sc = [0usize; 3];
        for k in 0..dim {
            let v = c[k] as i64 - lo[k];
            if v < 0 || v >= shape[k] as i64 {
                return Err(Error::invalid("condenser is not contained in the window"));
            }
            sc[k] = v as usize;
        }
        let s = sub.index(sc);
        if !interior[s] {
            return Err(Error::invalid("condenser is not contained in the window"));
        }
        core[s] = true;
    }
    if !core.iter().any(|&c| c) {
        return Ok(CapacityResult {
            value: 0.0,
            potential: vec![0.0; n],
            lattice: sub,
            iterations: 0,
            residual: 0.0,
        });
    }

    // The potential must have room to fall from 1 to 0: no core node may touch the zero layer.
    let strides = sub.strides();
    for i in (0..n).filter(|&i| core[i]) {
        let c = sub.coords(i);
        for code in 0..3usize.pow(dim as u32) {
            let mut j = i as i64;
            let mut ok = true;
            let mut rem = code;
            for k in 0..dim {
                let d = (rem % 3) as i64 - 1;
                rem /= 3;
                let v = c[k] as i64 + d;
                if v < 0 || v >= shape[k] as i64 {
                    ok = false;
                    break;
                }
                j += d * strides[k] as i64;
            }
            if ok && !interior[j as usize] {
                return Err(Error::Resolution(format!(
                    "condenser gap not resolved: a core node at {:?} is adjacent to the window boundary (h = {h})",
                    &sub.point(i)[..dim]
                )));
            }
        }
    }

    let free: Vec<bool> = (0..n).map(|i| interior[i] && !core[i]).collect();
    let unit = Lattice::new(dim, 1.0, &vec![0.0; dim], &shape[..dim])?;
    let cells = CellEnergy::new(&unit, 1.0, p, 0.0, 1.0, &free);
    let mut u: Vec<f64> = core.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    harmonic_warm_start(&cells, &free, &mut u);
    let across = shape[..dim].iter().copied().max().unwrap_or(1) as f64;
    let nopts = NewtonOptions {
        max_iter: opts.max_iter,
        rel_decrease_tol: opts.rel_tol,
        grad_tol: 0.0,
        eps_model: opts.eps_model.unwrap_or(1e-8 * across),
        clamp: Some((0.0, 1.0)),
        ..NewtonOptions::default()
    };
    let obj = Objective {
        cells: &cells,
        free: &free,
        mass: None,
        load: None,
    };
    let stats = newton(&obj, &mut u, &nopts);
    if !stats.converged {
        return Err(Error::Convergence {
            iterations: stats.iterations,
            residual: stats.residual,
        });
    }
    let energy = cells.value(&u);
    Ok(CapacityResult {
        value: h.powf(dim as f64 - p) * energy,
        potential: u,
        lattice: sub,
        iterations: stats.iterations,
        residual: stats.residual,
    })
}

/// Capacities of the condenser and of its image under `x ↦ s·x` (lattice scaled with it).
pub fn capacity_scaling_check(problem: &CapacityProblem, s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale factor {s} must be positive")));
    }
    let lat = &problem.lattice;
    let origin: Vec<f64> = lat.origin[..lat.dim].iter().map(|o| o * s).collect();
    let scaled = CapacityProblem {
        inner: problem.inner.clone(),
        window: problem.window.scaled(s),
        p: problem.p,
        lattice: Lattice::new(lat.dim, lat.h * s, &origin, &lat.shape[..lat.dim])?,
    };
    let (a, b) = rayon_pair(|| p_capacity(problem), || p_capacity(&scaled));
    Ok((a?.value, b?.value))
}

fn rayon_pair<A: Send, B: Send>(fa: impl FnOnce() -> A + Send, fb: impl FnOnce() -> B + Send) -> (A, B) {
    #[cfg(feature = "parallel")]
    if par::parallel_enabled() {
        return rayon::join(fa, fb);
    }
    (fa(), fb())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSlice {
    pub t0: f64,
    pub t1: f64,
    /// Node indices of `K_τ` for `τ ∈ (t0, t1)`.
    pub nodes: Vec<usize>,
}

/// `K = ⋃ K_τ × (t0, t1)` inside `Ω × (t_lo, t_hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicCondenser {
    pub lattice: Lattice,
    pub window: Region,
    pub time: (f64, f64),
    pub slices: Vec<TimeSlice>,
    pub p: f64,
}

/// `γ_p(K, Q) = Σ (t1 − t0)·cap_p(K_τ, Ω)` over the slices (midpoint rule on the slice grid).
pub fn parabolic_capacity(cond: &ParabolicCondenser) -> Result<f64> {
    let (lo, hi) = cond.time;
    if !(hi > lo) {
        return Err(Error::invalid("empty time interval"));
    }
    let mut keys: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut slot = Vec::with_capacity(cond.slices.len());
    for s in &cond.slices {
        if !(s.t1 > s.t0) || s.t0 < lo - 1e-12 || s.t1 > hi + 1e-12 {
            return Err(Error::invalid(format!(
                "slice ({}, {}) is not a subinterval of ({lo}, {hi})",
                s.t0, s.t1
            )));
        }
        let mut key = s.nodes.clone();
        key.sort_unstable();
        key.dedup();
        let next = keys.len();
        let id = *index.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            next
        });
        slot.push(id);
    }
    let caps = par::map(keys.len(), |i| {
        p_capacity(&CapacityProblem {
            inner: keys[i].clone(),
            window: cond.window.clone(),
            p: cond.p,
            lattice: cond.lattice.clone(),
        })
        .map(|r| r.value)
    });
    let caps: Vec<f64> = caps.into_iter().collect::<Result<_>>()?;
    Ok(cond
        .slices
        .iter()
        .zip(&slot)
        .map(|(s, &i)| (s.t1 - s.t0) * caps[i])
        .sum())
}

/// How `δ(ρ)` is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DensityMode {
    /// On the domain's own lattice (needs `ρ ≥ 8h`).
    Native,
    /// On a lattice with a fixed number of cells per `ρ`, rasterising the analytic shape afresh.
    Resampled { cells_per_rho: usize },
    /// Resampled when the domain carries an analytic shape, native otherwise.
    Auto { cells_per_rho: usize },
}

impl Default for DensityMode {
    fn default() -> Self {
        DensityMode::Auto { cells_per_rho: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityOptions {
    pub mode: DensityMode,
    pub capacity: CapacityOptions,
}

/// Minimum number of lattice cells across `ρ` for a native density.
pub const MIN_CELLS_PER_RHO: f64 = 8.0;

/// `δ(ρ) = cap_p(K_ρ(x_o) \ E, K_{3ρ/2}(x_o)) / cap_p(K_ρ(x_o), K_{3ρ/2}(x_o))` on the domain's lattice.
pub fn capacity_density(e: &GridDomain, x_o: &[f64], rho: f64, p: f64) -> Result<f64> {
    let opts = DensityOptions {
        mode: DensityMode::Native,
        ..Default::default()
    };
    capacity_density_with(e, x_o, rho, p, &opts)
}

pub fn capacity_density_with(e: &GridDomain, x_o: &[f64], rho: f64, p: f64, opts: &DensityOptions) -> Result<f64> {
    match (opts.mode, &e.shape) {
        (DensityMode::Resampled { cells_per_rho }, Some(shape)) | (DensityMode::Auto { cells_per_rho }, Some(shape)) => {
            density_resampled(shape, x_o, rho, p, cells_per_rho, &opts.capacity)
        }
        (DensityMode::Resampled { .. }, None) => Err(Error::invalid(
            "resampled density needs a domain with an analytic shape",
        )),
        _ => density_native(e, x_o, rho, p, &opts.capacity),
    }
}

fn check_density_args(x_o: &[f64], dim: usize, rho: f64) -> Result<()> {
    if x_o.len() != dim {
        return Err(Error::invalid("probe point dimension mismatch"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("scale ρ = {rho} must be positive")));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

fn density_native(e: &GridDomain, x_o: &[f64], rho: f64, p: f64, copts: &CapacityOptions) -> Result<f64> {
    check_density_args(x_o, e.dim(), rho)?;
    if rho / e.h() < MIN_CELLS_PER_RHO * (1.0 - 1e-9) {
        return Err(Error::Resolution(format!(
            "ρ = {rho} spans fewer than {MIN_CELLS_PER_RHO} cells of h = {}",
            e.h()
        )));
    }
    let k = Cube::new(x_o, rho)?;
    let window = k.scaled(1.5);
    if !e.covers(&window) {
        return Err(Error::Geometry(format!(
            "K_{{3ρ/2}} around {x_o:?} with ρ = {rho} leaves the bounding box"
        )));
    }
    let num_nodes = rasterize_cube_difference(&k, e)?;
    let make = |inner| CapacityProblem {
        inner,
        window: Region::Cube(window.clone()),
        p,
        lattice: e.lattice.clone(),
    };
    if num_nodes.is_empty() {
        return Ok(0.0);
    }
    let all = e.nodes_in_cube(&k);
    let (num, den) = rayon_pair(
        || p_capacity_with(&make(num_nodes), copts),
        || p_capacity_with(&make(all), copts),
    );
    Ok(ratio(num?.value, den?.value))
}

/// `δ(ρ)` for an analytic shape on a local lattice with `cells_per_rho` cells across `ρ`.
pub fn density_resampled(
    shape: &Shape,
    x_o: &[f64],
    rho: f64,
    p: f64,
    cells_per_rho: usize,
    copts: &CapacityOptions,
) -> Result<f64> {
    let dim = shape.dim();
    check_density_args(x_o, dim, rho)?;
    if cells_per_rho < MIN_CELLS_PER_RHO as usize || cells_per_rho % 2 != 0 {
        return Err(Error::Resolution(format!(
            "resampling needs an even number of at least {MIN_CELLS_PER_RHO} cells per ρ, got {cells_per_rho}"
        )));
    }
    let k = Cube::new(x_o, rho)?;
    let window = k.scaled(1.5);
    if !shape.bbox.contains_cube(&window) {
        return Err(Error::Geometry(format!(
            "K_{{3ρ/2}} around {x_o:?} with ρ = {rho} leaves the bounding box"
        )));
    }
    let n = cells_per_rho;
    let m = 3 * n / 2;
    let hr = rho / n as f64;
    let (shift, count) = match shape.phase_for(p) {
        Phase::Node => (m as f64, 2 * m + 1),
        Phase::Cell => (m as f64 + 0.5, 2 * m + 2),
    };
    let origin: Vec<f64> = x_o.iter().map(|c| c - shift * hr).collect();
    let lat = Lattice::new(dim, hr, &origin, &vec![count; dim])?;
    let in_k: Vec<usize> = (0..lat.len())
        .filter(|&i| k.contains_closed(&lat.point(i)[..dim]))
        .collect();
    let num_nodes: Vec<usize> = in_k
        .iter()
        .copied()
        .filter(|&i| !shape.contains(&lat.point(i)[..dim]))
        .collect();
    if num_nodes.is_empty() {
        return Ok(0.0);
    }
    let make = |inner| CapacityProblem {
        inner,
        window: Region::Cube(window.clone()),
        p,
        lattice: lat.clone(),
    };
    let (num, den) = rayon_pair(
        || p_capacity_with(&make(num_nodes), copts),
        || p_capacity_with(&make(in_k), copts),
    );
    Ok(ratio(num?.value, den?.value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatnessEvidence {
    pub point: Vec<f64>,
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatnessReport {
    pub fat: bool,
    pub evidence: Vec<FatnessEvidence>,
}

/// Complement nodes with a face neighbour in `E`.
pub fn boundary_points(e: &GridDomain) -> Vec<Vec<f64>> {
    e.boundary_nodes().into_iter().map(|i| e.point(i)).collect()
}

/// Tests `δ ≥ γ_o` at the scales `ρ_o/2^k`, `k = 0..levels`, at each point
/// (all boundary points whose `K_{3ρ_o/2}` fits in the box when `points` is `None`).
pub fn is_uniformly_p_fat(
    e: &GridDomain,
    points: Option<&[Vec<f64>]>,
    gamma_o: f64,
    rho_o: f64,
    levels: usize,
    p: f64,
    opts: &DensityOptions,
) -> Result<FatnessReport> {
    if !(gamma_o > 0.0 && gamma_o <= 1.0) {
        return Err(Error::invalid(format!("threshold γ_o = {gamma_o} not in (0, 1]")));
    }
    if levels == 0 {
        return Err(Error::invalid("at least one scale is required"));
    }
    let pts: Vec<Vec<f64>> = match points {
        Some(p) => p.to_vec(),
        None => boundary_points(e)
            .into_iter()
            .filter(|x| e.covers(&Cube { center: x.clone(), half_edge: 1.5 * rho_o }))
            .collect(),
    };
    let scales: Vec<f64> = (0..levels).map(|k| rho_o / 2f64.powi(k as i32)).collect();
    let jobs: Vec<(usize, usize)> = (0..pts.len())
        .flat_map(|i| (0..scales.len()).map(move |j| (i, j)))
        .collect();
    let ratios = par::map(jobs.len(), |j| {
        let (i, s) = jobs[j];
        capacity_density_with(e, &pts[i], scales[s], p, opts)
    });
    let mut evidence = Vec::with_capacity(jobs.len());
    for (&(i, s), r) in jobs.iter().zip(ratios) {
        evidence.push(FatnessEvidence {
            point: pts[i].clone(),
            scale: scales[s],
            ratio: r?,
        });
    }
    let fat = evidence.iter().all(|ev| ev.ratio >= gamma_o);
    Ok(FatnessReport { fat, evidence })
}

/// `|E ∩ K_ρ(x_o)| ≤ (1 − α_*)|K_ρ(x_o)|`, counting lattice nodes.
pub fn geometric_density(e: &GridDomain, x_o: &[f64], rho: f64, alpha: f64) -> bool {
    let Ok(k) = Cube::new(x_o, rho) else {
        return false;
    };
    let nodes = e.nodes_in_cube(&k);
    let inside = nodes.iter().filter(|&&i| e.inside[i]).count();
    inside as f64 <= (1.0 - alpha) * nodes.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichardsonEstimate {
    pub fine: f64,
    pub coarse: f64,
    /// `2·fine − coarse`: removes an error term linear in `h`.
    pub extrapolated: f64,
}

/// Capacity at spacing `h` and `2h` with first-order extrapolation.
///
/// Condensers with curved boundaries rasterised on nodes carry a staircase
/// error proportional to `h`; `build(h)` must rasterise the same analytic pair.
pub fn capacity_extrapolated(build: impl Fn(f64) -> Result<CapacityProblem> + Sync, h: f64) -> Result<RichardsonEstimate> {
    let (fine, coarse) = rayon_pair(|| p_capacity(&build(h)?), || p_capacity(&build(2.0 * h)?));
    let (fine, coarse) = (fine?.value, coarse?.value);
    Ok(RichardsonEstimate {
        fine,
        coarse,
        extrapolated: 2.0 * fine - coarse,
    })
}

/// Closed-form capacity of concentric balls `B_r ⊂ B_R` in dimension 2 or 3 (`p < N`).
pub fn radial_capacity(dim: usize, p: f64, r: f64, big_r: f64) -> f64 {
    let omega = match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    };
    let a = (dim as f64 - p) / (p - 1.0);
    omega * a.powf(p - 1.0) * (r.powf(-a) - big_r.powf(-a)).powf(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{benchmark_domain, BenchParams};

    fn line(h: f64, half: f64) -> Lattice {
        let n = (2.0 * half / h).round() as usize + 1;
        Lattice::new(1, h, &[-half], &[n]).unwrap()
    }

    #[test]
    fn one_dimensional_capacity_is_exact() {
        for &(r, big_r, p) in &[(0.25, 1.0, 1.8), (1.0, 2.0, 1.5), (0.5, 0.75, 1.3)] {
            let lat = line(1.0 / 64.0, 2.0);
            let pr = CapacityProblem::from_predicate(
                &lat,
                Region::Cube(Cube::new(&[0.0], big_r).unwrap()),
                p,
                |x| x[0].abs() <= r + 1e-12,
            );
            let res = p_capacity(&pr).unwrap();
            let exact = 2.0 * (big_r - r).powf(1.0 - p);
            assert!((res.value / exact - 1.0).abs() < 1e-10, "{} vs {exact}", res.value);
            assert!(res.potential.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn empty_condenser() {
        let lat = line(0.1, 1.0);
        let pr = CapacityProblem {
            inner: vec![],
            window: Region::Cube(Cube::new(&[0.0], 0.5).unwrap()),
            p: 1.5,
            lattice: lat,
        };
        let res = p_capacity(&pr).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.potential.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unresolved_gap_is_reported() {
        let lat = line(0.25, 1.0);
        let pr = CapacityProblem::from_predicate(
            &lat,
            Region::Cube(Cube::new(&[0.0], 0.75).unwrap()),
            1.5,
            |x| x[0].abs() <= 0.5 + 1e-12,
        );
        assert!(matches!(p_capacity(&pr), Err(Error::Resolution(_))));
    }

    #[test]
    fn one_dimensional_scaling_ratio() {
        let lat = line(1.0 / 16.0, 2.0);
        let pr = CapacityProblem::from_predicate(
            &lat,
            Region::Cube(Cube::new(&[0.0], 2.0).unwrap()),
            1.5,
            |x| x[0].abs() <= 1.0 + 1e-12,
        );
        let (a, b) = capacity_scaling_check(&pr, 2.0).unwrap();
        assert!((b / a - 2f64.powf(-0.5)).abs() < 1e-12);
        let (a, b) = capacity_scaling_check(&pr, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coarse_radial_capacity_in_two_dimensions() {
        let h = 1.0 / 32.0;
        let lat = Lattice::new(2, h, &[-0.5, -0.5], &[33, 33]).unwrap();
        let window = Region::Ball { center: vec![0.0, 0.0], radius: 0.5 };
        let pr = CapacityProblem::from_predicate(&lat, window, 1.8, |x| x[0].hypot(x[1]) <= 0.25);
        let v = p_capacity(&pr).unwrap().value;
        let exact = radial_capacity(2, 1.8, 0.25, 0.5);
        assert!((v / exact - 1.0).abs() < 0.1, "{v} vs {exact}");
    }

    #[test]
    fn parabolic_slices() {
        let lat = line(1.0 / 32.0, 1.0);
        let window = Region::Cube(Cube::new(&[0.0], 1.0).unwrap());
        let d: Vec<usize> = (0..lat.len()).filter(|&i| lat.point(i)[0].abs() <= 0.25 + 1e-12).collect();
        let d2: Vec<usize> = (0..lat.len()).filter(|&i| lat.point(i)[0].abs() <= 0.5 + 1e-12).collect();
        let elliptic = |nodes: &Vec<usize>| {
            p_capacity(&CapacityProblem { inner: nodes.clone(), window: window.clone(), p: 1.7, lattice: lat.clone() })
                .unwrap()
                .value
        };
        let cond = |slices| ParabolicCondenser { lattice: lat.clone(), window: window.clone(), time: (0.0, 3.0), slices, p: 1.7 };
        let one = cond(vec![TimeSlice { t0: 0.5, t1: 2.5, nodes: d.clone() }]);
        assert!((parabolic_capacity(&one).unwrap() / (2.0 * elliptic(&d)) - 1.0).abs() < 1e-12);
        let two = cond(vec![
            TimeSlice { t0: 0.0, t1: 1.0, nodes: d.clone() },
            TimeSlice { t0: 1.0, t1: 2.0, nodes: d2.clone() },
        ]);
        let want = elliptic(&d) + elliptic(&d2);
        assert!((parabolic_capacity(&two).unwrap() / want - 1.0).abs() < 1e-12);
        let empty = cond(vec![TimeSlice { t0: 0.0, t1: 3.0, nodes: vec![] }]);
        assert_eq!(parabolic_capacity(&empty).unwrap(), 0.0);
    }

    #[test]
    fn density_trivial_cases() {
        let params = BenchParams { h: 1.0 / 32.0, ..Default::default() };
        let full = benchmark_domain("full_cube", &params).unwrap();
        assert_eq!(capacity_density(&full, &[0.0, 0.0], 0.25, 1.8).unwrap(), 0.0);
        let empty = GridDomain::new(2, full.h(), full.bbox.clone(), vec![false; full.lattice.len()]).unwrap();
        assert_eq!(capacity_density(&empty, &[0.0, 0.0], 0.25, 1.8).unwrap(), 1.0);
        assert!(matches!(
            capacity_density(&empty, &[0.0, 0.0], 0.125, 1.8),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            capacity_density(&empty, &[0.9, 0.0], 0.25, 1.8),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn geometric_density_cases() {
        let params = BenchParams { h: 1.0 / 16.0, ..Default::default() };
        let full = benchmark_domain("full_cube", &params).unwrap();
        let empty = GridDomain::new(2, full.h(), full.bbox.clone(), vec![false; full.lattice.len()]).unwrap();
        assert!(geometric_density(&empty, &[0.0, 0.0], 0.5, 0.99));
        assert!(!geometric_density(&full, &[0.0, 0.0], 0.5, 0.01));
        let hs = benchmark_domain("half_space", &params).unwrap();
        assert!(geometric_density(&hs, &[0.0, 0.0], 0.5, 0.4));
    }
}
