//! Dyadic capacity weights, the oscillation recursion, the Wiener integral and
//! the resulting modulus of continuity at a boundary point.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_density_with, DensityOptions};
use crate::error::{Error, Result};
use crate::geometry::{make_cylinder, Cube, Cylinder, CylinderKind, GridDomain};
use crate::par;
use crate::pde::BoundaryData;

/// `A = δ^{1/(p−1)} / (4γ₂)`.
pub fn weight_a(delta: f64, gamma2: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("density δ = {delta} outside [0, 1]")));
    }
    if !(gamma2 > 1.0) {
        return Err(Error::invalid(format!("γ₂ = {gamma2} must exceed 1")));
    }
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::invalid(format!("p = {p} must lie in (1, 2)")));
    }
    Ok(delta.powf(1.0 / (p - 1.0)) / (4.0 * gamma2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulusParams {
    pub dim: usize,
    pub p: f64,
    pub gamma2: f64,
    pub c: f64,
    pub nu: f64,
}

impl Default for ModulusParams {
    fn default() -> Self {
        ModulusParams {
            dim: 2,
            p: 1.8,
            gamma2: 2.0,
            c: 0.5,
            nu: 0.5,
        }
    }
}

impl ModulusParams {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        let m = ModulusParams {
            dim,
            p,
            ..Default::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::invalid(format!("dimension {} not supported", self.dim)));
        }
        if !(self.p > 1.0 && self.p < 2.0) {
            return Err(Error::invalid(format!("p = {} must lie in (1, 2)", self.p)));
        }
        if !(self.gamma2 > 1.0) {
            return Err(Error::invalid(format!("γ₂ = {} must exceed 1", self.gamma2)));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid("c must be positive"));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::invalid(format!("ν = {} must lie in (0, 1)", self.nu)));
        }
        Ok(())
    }

    /// `λ̄ = 1 − 1/(4γ₂)`.
    pub fn lambda_bar(&self) -> f64 {
        1.0 - 1.0 / (4.0 * self.gamma2)
    }

    /// `α = p / ((p−2) ln λ̄ / ln 2 + p)`.
    pub fn alpha(&self) -> f64 {
        let p = self.p;
        p / ((p - 2.0) * self.lambda_bar().ln() / std::f64::consts::LN_2 + p)
    }

    /// `γ = 2^{(N−p)/(p−1)}`.
    pub fn gamma(&self) -> f64 {
        let p = self.p;
        2f64.powf((self.dim as f64 - p) / (p - 1.0))
    }

    pub fn a_max(&self) -> f64 {
        1.0 / (4.0 * self.gamma2)
    }
}

/// Which term of `ω_{j+1} = min{ω_j, max{(1−A_j)ω_j, 2g_j}}` was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Capacity decay `(1−A_j)ω_j`.
    Decay,
    /// Boundary data `2g_j`.
    Boundary,
    /// `2g_j ≥ ω_j`: nothing left to reduce, `ω` is kept.
    Saturated,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Decay => "decay",
            Branch::Boundary => "boundary",
            Branch::Saturated => "saturated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationTrace {
    /// `r_j = R_o/2^j`, one per step.
    pub r: Vec<f64>,
    pub delta: Vec<f64>,
    pub a: Vec<f64>,
    /// `ω_0..ω_m` (one longer than the per-step vectors).
    pub omega: Vec<f64>,
    pub g_osc: Vec<f64>,
    pub branch: Vec<Branch>,
    /// `λ̄^l ω_o`, accumulated by repeated multiplication.
    pub lower_bound: Vec<f64>,
    /// `ω_o exp(−Σ_{j<m} A_j) + 2 max_{j<m} g_j`, enlarged by the relative rounding
    /// error `(m + 4)ε` that `m` floating-point steps of the recursion can accumulate.
    pub product_bound: Vec<f64>,
}

impl OscillationTrace {
    pub fn steps(&self) -> usize {
        self.a.len()
    }

    /// First `l` with `ω_{l+1} > ω_l`.
    pub fn monotonicity_violation(&self) -> Option<usize> {
        self.omega.windows(2).position(|w| w[1] > w[0])
    }

    pub fn lower_bound_violation(&self) -> Option<usize> {
        self.omega.iter().zip(&self.lower_bound).position(|(w, b)| w < b)
    }

    pub fn product_bound_violation(&self) -> Option<usize> {
        self.omega.iter().zip(&self.product_bound).position(|(w, b)| w > b)
    }
}

/// Runs the recursion with radii `R_o/2^j`.
pub fn oscillation_iteration(
    omega_o: f64,
    deltas: &[f64],
    g_osc: &[f64],
    r_o: f64,
    params: &ModulusParams,
) -> Result<OscillationTrace> {
    iterate(omega_o, deltas, g_osc, r_o, params, false)
}

/// The recursion with `A` negated and the `min` cap removed; used to check that the invariant checks bite.
pub(crate) fn oscillation_iteration_tampered(
    omega_o: f64,
    deltas: &[f64],
    g_osc: &[f64],
    r_o: f64,
    params: &ModulusParams,
) -> Result<OscillationTrace> {
    iterate(omega_o, deltas, g_osc, r_o, params, true)
}

fn iterate(
    omega_o: f64,
    deltas: &[f64],
    g_osc: &[f64],
    r_o: f64,
    params: &ModulusParams,
    tamper: bool,
) -> Result<OscillationTrace> {
    params.validate()?;
    if !(omega_o > 0.0) {
        return Err(Error::invalid(format!("ω_o = {omega_o} must be positive")));
    }
    if omega_o > 1.0 {
        return Err(Error::Normalization(format!(
            "ω_o = {omega_o} exceeds 1; divide the data by ω_o and rescale time by ω_o^(2−p)"
        )));
    }
    if deltas.len() != g_osc.len() {
        return Err(Error::invalid(format!(
            "{} densities but {} boundary oscillations",
            deltas.len(),
            g_osc.len()
        )));
    }
    if g_osc.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::invalid("boundary oscillations must be finite and nonnegative"));
    }
    if !(r_o > 0.0) {
        return Err(Error::invalid("R_o must be positive"));
    }
    let m = deltas.len();
    let lambda_bar = params.lambda_bar();
    let mut tr = OscillationTrace {
        r: (0..m).map(|j| r_o / 2f64.powi(j as i32)).collect(),
        delta: deltas.to_vec(),
        a: Vec::with_capacity(m),
        omega: vec![omega_o],
        g_osc: g_osc.to_vec(),
        branch: Vec::with_capacity(m),
        lower_bound: vec![omega_o],
        product_bound: vec![omega_o],
    };
    let mut sum_a = 0.0;
    let mut g_max = 0.0f64;
    for j in 0..m {
        let mut a = weight_a(deltas[j], params.gamma2, params.p)?;
        if tamper {
            a = -a;
        }
        let w = tr.omega[j];
        let decay = (1.0 - a) * w;
        let boundary = 2.0 * g_osc[j];
        let (next, branch) = if boundary >= w && !tamper {
            (w, Branch::Saturated)
        } else if decay >= boundary {
            (decay, Branch::Decay)
        } else {
            (boundary, Branch::Boundary)
        };
        tr.a.push(a);
        tr.branch.push(branch);
        tr.omega.push(next);
        tr.lower_bound.push(tr.lower_bound[j] * lambda_bar);
        sum_a += a;
        g_max = g_max.max(g_osc[j]);
        let rounding = 1.0 + (j as f64 + 5.0) * f64::EPSILON;
        tr.product_bound.push((omega_o * (-sum_a).exp() + 2.0 * g_max) * rounding);
    }
    Ok(tr)
}

/// A density profile `s ↦ δ(s)`.
#[derive(Clone)]
pub enum DeltaProfile {
    Constant(f64),
    /// `δ_j` on `(r_{j+1}, r_j]` for decreasing radii; the end values extend outward.
    Steps { radii: Vec<f64>, values: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for DeltaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaProfile::Constant(c) => write!(f, "Constant({c})"),
            DeltaProfile::Steps { radii, values } => write!(f, "Steps({radii:?}, {values:?})"),
            DeltaProfile::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl DeltaProfile {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DeltaProfile::Function(Arc::new(f))
    }

    pub fn steps(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.len() != values.len() {
            return Err(Error::invalid("step profile needs matching, nonempty radii and values"));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) || !(radii[radii.len() - 1] > 0.0) {
            return Err(Error::invalid("step radii must be positive and strictly decreasing"));
        }
        Ok(DeltaProfile::Steps { radii, values })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            DeltaProfile::Constant(c) => *c,
            DeltaProfile::Function(f) => f(s),
            DeltaProfile::Steps { radii, values } => {
                let j = radii.iter().skip(1).take_while(|&&r| s <= r).count();
                values[j]
            }
        }
    }
}

/// `Σ_j A(δ_j)` over the supplied dyadic samples.
pub fn wiener_sum(deltas: &[f64], p: f64, gamma2: f64) -> Result<f64> {
    deltas.iter().map(|&d| weight_a(d, gamma2, p)).sum()
}

const QUAD_TOL: f64 = 1e-12;
const QUAD_DEPTH: usize = 48;

/// `∫_{ρ_lo}^{ρ_hi} A(δ(s)) ds/s`, exact for constant and step profiles, adaptive Simpson in `ln s` otherwise.
pub fn wiener_integral(delta: &DeltaProfile, rho_lo: f64, rho_hi: f64, p: f64, gamma2: f64) -> Result<f64> {
    if !(rho_lo > 0.0 && rho_hi >= rho_lo && rho_hi.is_finite()) {
        return Err(Error::invalid(format!("integration range [{rho_lo}, {rho_hi}] is not admissible")));
    }
    let a = |s: f64| weight_a(delta.eval(s), gamma2, p);
    match delta {
        DeltaProfile::Constant(_) => Ok(a(rho_hi)? * (rho_hi / rho_lo).ln()),
        DeltaProfile::Steps { radii, .. } => {
            let mut cuts: Vec<f64> = radii
                .iter()
                .skip(1)
                .copied()
                .filter(|&r| r > rho_lo && r < rho_hi)
                .collect();
            cuts.insert(0, rho_hi);
            cuts.push(rho_lo);
            let mut total = 0.0;
            for w in cuts.windows(2) {
                total += a(w[0])? * (w[0] / w[1]).ln();
            }
            Ok(total)
        }
        DeltaProfile::Function(_) => {
            let (u0, u1) = (rho_lo.ln(), rho_hi.ln());
            if u1 == u0 {
                return Ok(0.0);
            }
            let f = |u: f64| a(u.exp());
            let (fa, fm, fb) = (f(u0)?, f(0.5 * (u0 + u1))?, f(u1)?);
            let whole = (u1 - u0) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&f, u0, u1, fa, fm, fb, whole, QUAD_TOL, QUAD_DEPTH)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::Tolerance(format!(
            "adaptive Simpson on [{:.3e}, {:.3e}] (log scale) stalled with error {:.3e}",
            a,
            b,
            err.abs()
        )));
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    /// `∫_{2^{−m}r}^{r} A ds/s`.
    pub integral: f64,
    /// `Σ_{j<m} A(2^{−j}r)`.
    pub sum: f64,
    pub gamma: f64,
    /// `max A(s)/A(2y)` over sampled `s ∈ (y, 2y)`.
    pub worst_ratio: f64,
    /// `A(s) ≤ γ A(2y)` held at every sample.
    pub comparable: bool,
    pub integral_le_gamma_sum: bool,
}

/// Checks the dyadic comparability of `A` and the resulting integral/sum inequality.
pub fn dyadic_comparability(
    delta: &DeltaProfile,
    r: f64,
    m: usize,
    params: &ModulusParams,
    samples: usize,
) -> Result<Comparability> {
    params.validate()?;
    let (p, g2) = (params.p, params.gamma2);
    let gamma = params.gamma();
    let integral = wiener_integral(delta, r / 2f64.powi(m as i32), r, p, g2)?;
    let mut sum = 0.0;
    let mut worst = 0.0f64;
    for j in 0..m {
        let top = r / 2f64.powi(j as i32);
        let a_top = weight_a(delta.eval(top), g2, p)?;
        sum += a_top;
        let y = 0.5 * top;
        for k in 1..=samples.max(1) {
            let s = y * (1.0 + k as f64 / (samples.max(1) + 1) as f64);
            let a_s = weight_a(delta.eval(s), g2, p)?;
            let ratio = if a_s == 0.0 {
                0.0
            } else if a_top == 0.0 {
                f64::INFINITY
            } else {
                a_s / a_top
            };
            worst = worst.max(ratio);
        }
    }
    Ok(Comparability {
        integral,
        sum,
        gamma,
        worst_ratio: worst,
        comparable: worst <= gamma,
        integral_le_gamma_sum: integral <= gamma * sum * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusBound {
    pub bound: f64,
    /// `ω_o exp{−(1−ν)/γ² ∫_{ρ^α}^1 A ds/s}`.
    pub decay_term: f64,
    /// `2 g_osc(Q̃_o(ρ))`.
    pub boundary_term: f64,
    pub integral: f64,
    /// `r = [ω̄(ρ^α)]^ν`.
    pub r: f64,
    pub cylinder: Cylinder,
    /// `r > R_o`: the reference cylinder is larger than the region the estimate is about.
    pub r_exceeds_r_o: bool,
}

/// `Q̃_o(ρ) = K_{2r}(x_o) × [t_o − cω_o^{2−p}·2(2r)^p, t_o + cω_o^{2−p}(2r)^p]`.
pub fn reference_cylinder(x_o: &[f64], t_o: f64, r: f64, omega_o: f64, params: &ModulusParams) -> Result<Cylinder> {
    let theta = params.c * omega_o.powf(2.0 - params.p);
    make_cylinder(Cube::new(x_o, 2.0 * r)?, t_o, 2.0 * theta, theta, CylinderKind::Centered, params.p)
}

#[allow(clippy::too_many_arguments)]
pub fn modulus_bound(
    omega_o: f64,
    delta: &DeltaProfile,
    g_osc: &dyn Fn(&Cylinder) -> f64,
    x_o: &[f64],
    t_o: f64,
    rho: f64,
    params: &ModulusParams,
    r_o: f64,
) -> Result<ModulusBound> {
    params.validate()?;
    if !(rho > 0.0 && rho < r_o) {
        return Err(Error::invalid(format!("ρ = {rho} must lie in (0, R_o = {r_o})")));
    }
    if !(omega_o > 0.0) {
        return Err(Error::invalid(format!("ω_o = {omega_o} must be positive")));
    }
    if omega_o > 1.0 {
        return Err(Error::Normalization(format!("ω_o = {omega_o} exceeds 1; rescale the data")));
    }
    let gamma = params.gamma();
    let lo = rho.powf(params.alpha());
    let integral = if lo < 1.0 {
        wiener_integral(delta, lo, 1.0, params.p, params.gamma2)?
    } else {
        0.0
    };
    let decay_term = omega_o * (-(1.0 - params.nu) / (gamma * gamma) * integral).exp();
    let r = (-integral / gamma).exp().powf(params.nu);
    let cylinder = reference_cylinder(x_o, t_o, r, omega_o, params)?;
    let boundary_term = 2.0 * g_osc(&cylinder);
    Ok(ModulusBound {
        bound: decay_term + boundary_term,
        decay_term,
        boundary_term,
        integral,
        r,
        cylinder,
        r_exceeds_r_o: r > r_o,
    })
}

/// `β = α(1−ν)γ_o^{1/(p−1)} / (4γ₂γ²)`.
pub fn holder_exponent(gamma_o: f64, params: &ModulusParams) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&gamma_o) {
        return Err(Error::invalid(format!("fatness constant γ_o = {gamma_o} outside [0, 1]")));
    }
    let g = params.gamma();
    Ok(params.alpha() * (1.0 - params.nu) * gamma_o.powf(1.0 / (params.p - 1.0)) / (4.0 * params.gamma2 * g * g))
}

/// Oscillation of `g` over the lateral boundary inside `Q`, sampled on complement nodes
/// next to `E` and at the given times.
pub fn boundary_oscillation(e: &GridDomain, g: &BoundaryData, q: &Cylinder, times: &[f64]) -> f64 {
    let nodes: Vec<usize> = e
        .boundary_nodes()
        .into_iter()
        .filter(|&i| q.base.contains_closed(&e.point(i)))
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in times.iter().filter(|&&t| q.contains_time(t)) {
        for &i in &nodes {
            let v = g.eval(&e.point(i), t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WienerLabel {
    Wiener,
    NonWienerEvidence,
    Inconclusive,
}

impl fmt::Display for WienerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WienerLabel::Wiener => "wiener",
            WienerLabel::NonWienerEvidence => "non-wiener-evidence",
            WienerLabel::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierOptions {
    /// Largest radius `r_0`; scales are `r_0/2^j`.
    pub r0: f64,
    pub scales: usize,
    pub gamma2: f64,
    /// Minimum mean increment over the last half of scales, in units of `1/(4γ₂)`, for a divergent label.
    pub rate_floor: f64,
    /// The last-half mean increment must keep this fraction of the first-half mean.
    pub persistence: f64,
    /// Bound on the last-half sum, in units of `1/(4γ₂)`, for a convergent label.
    pub cauchy_tol: f64,
    pub density: DensityOptions,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        ClassifierOptions {
            r0: 0.5,
            scales: 6,
            gamma2: 2.0,
            rate_floor: 0.01,
            persistence: 0.5,
            cauchy_tol: 0.05,
            density: DensityOptions::default(),
        }
    }
}

pub const MIN_SCALES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerClassification {
    pub label: WienerLabel,
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
    /// `S_k = Σ_{j<k} A_j`, `k = 1..`.
    pub partial_sums: Vec<f64>,
    /// Least-squares slope of `S_k` against `k`.
    pub slope: f64,
    pub intercept: f64,
    pub first_half_mean: f64,
    pub last_half_mean: f64,
    pub last_half_sum: f64,
}

/// Labels `x_o` from the growth of `Σ A(δ(r_0/2^j))`.
pub fn classify_wiener_point(e: &GridDomain, x_o: &[f64], p: f64, opts: &ClassifierOptions) -> Result<WienerClassification> {
    if opts.scales < MIN_SCALES {
        return Err(Error::Resolution(format!(
            "classification needs at least {MIN_SCALES} dyadic scales, got {}",
            opts.scales
        )));
    }
    let radii: Vec<f64> = (0..opts.scales).map(|j| opts.r0 / 2f64.powi(j as i32)).collect();
    let deltas = par::map(radii.len(), |j| capacity_density_with(e, x_o, radii[j], p, &opts.density))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    classify_densities(radii, deltas, p, opts)
}

/// The labelling rule of [`classify_wiener_point`] applied to precomputed densities.
pub fn classify_densities(radii: Vec<f64>, deltas: Vec<f64>, p: f64, opts: &ClassifierOptions) -> Result<WienerClassification> {
    let k = deltas.len();
    if k < MIN_SCALES {
        return Err(Error::Resolution(format!("classification needs at least {MIN_SCALES} dyadic scales, got {k}")));
    }
    let weights = deltas
        .iter()
        .map(|&d| weight_a(d, opts.gamma2, p))
        .collect::<Result<Vec<f64>>>()?;
    let partial_sums: Vec<f64> = weights
        .iter()
        .scan(0.0, |s, a| {
            *s += a;
            Some(*s)
        })
        .collect();
    let (slope, intercept) = linear_fit(
        &(1..=k).map(|i| i as f64).collect::<Vec<_>>(),
        &partial_sums,
    );
    let half = k / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let first_half_mean = mean(&weights[..half]);
    let last_half_sum: f64 = weights[half..].iter().sum();
    let last_half_mean = last_half_sum / (k - half) as f64;
    let a_max = 1.0 / (4.0 * opts.gamma2);
    let label = if last_half_mean >= opts.rate_floor * a_max && last_half_mean >= opts.persistence * first_half_mean {
        WienerLabel::Wiener
    } else if last_half_sum <= opts.cauchy_tol * a_max {
        WienerLabel::NonWienerEvidence
    } else {
        WienerLabel::Inconclusive
    };
    Ok(WienerClassification {
        label,
        radii,
        deltas,
        weights,
        partial_sums,
        slope,
        intercept,
        first_half_mean,
        last_half_mean,
        last_half_sum,
    })
}

/// Least-squares `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_examples() {
        assert_eq!(weight_a(0.0, 2.0, 1.8).unwrap(), 0.0);
        assert_eq!(weight_a(1.0, 2.0, 1.8).unwrap(), 0.125);
        assert_relative_eq!(weight_a(0.25, 2.0, 1.5).unwrap(), 0.0078125, max_relative = 1e-15);
        assert!(weight_a(1.5, 2.0, 1.8).is_err());
    }

    #[test]
    fn params_formulas() {
        let m = ModulusParams::new(2, 1.8).unwrap();
        assert_eq!(m.lambda_bar(), 0.875);
        let alpha = 1.8 / (-0.2 * 0.875f64.ln() / 2f64.ln() + 1.8);
        assert_relative_eq!(m.alpha(), alpha, max_relative = 1e-15);
        assert_relative_eq!(m.gamma(), 2f64.powf(0.25), max_relative = 1e-15);
        assert!(m.alpha() > 0.0 && m.gamma() >= 1.0);
    }

    #[test]
    fn recursion_examples() {
        let m = ModulusParams::new(2, 1.8).unwrap();
        let tr = oscillation_iteration(0.7, &[0.0; 5], &[0.0; 5], 1.0, &m).unwrap();
        assert!(tr.omega.iter().all(|&w| w == 0.7));
        let tr = oscillation_iteration(1.0, &[1.0; 10], &[0.0; 10], 1.0, &m).unwrap();
        for (j, w) in tr.omega.iter().enumerate() {
            assert_relative_eq!(*w, 0.875f64.powi(j as i32), max_relative = 1e-12);
        }
        assert!(matches!(
            oscillation_iteration(1.5, &[1.0], &[0.0], 1.0, &m),
            Err(Error::Normalization(_))
        ));
        let tr = oscillation_iteration(0.5, &[1.0, 1.0], &[0.3, 0.2], 1.0, &m).unwrap();
        assert_eq!(tr.branch, vec![Branch::Saturated, Branch::Decay]);
    }

    #[test]
    fn integral_examples() {
        let (p, g2) = (1.8, 2.0);
        assert_eq!(wiener_integral(&DeltaProfile::Constant(0.0), 0.01, 1.0, p, g2).unwrap(), 0.0);
        let a = weight_a(0.4, g2, p).unwrap();
        let f = DeltaProfile::function(|_| 0.4);
        assert_relative_eq!(
            wiener_integral(&f, 1e-3, 0.5, p, g2).unwrap(),
            a * 500f64.ln(),
            max_relative = 1e-12
        );
        // ∫ (1 + ln(1/s))^{−1/(p−1)·2} ds/s has an elementary antiderivative.
        let profile = DeltaProfile::function(|s: f64| 1.0 / (1.0 - s.ln()).powi(2));
        let q = 2.0 / (p - 1.0);
        let exact = |lo: f64| (1.0 - (1.0 - lo.ln()).powf(1.0 - q)) / ((q - 1.0) * 4.0 * g2);
        for lo in [1e-2, 1e-6, 1e-12] {
            assert_relative_eq!(wiener_integral(&profile, lo, 1.0, p, g2).unwrap(), exact(lo), max_relative = 1e-9);
        }
    }

    #[test]
    fn step_profile_matches_dyadic_sum() {
        let m = ModulusParams::new(2, 1.8).unwrap();
        let c = dyadic_comparability(&DeltaProfile::Constant(0.3), 1.0, 8, &m, 5).unwrap();
        assert_relative_eq!(c.integral, std::f64::consts::LN_2 * c.sum, max_relative = 1e-13);
        assert!(c.comparable && c.integral_le_gamma_sum);
    }

    #[test]
    fn holder_examples() {
        let mut m = ModulusParams::new(2, 1.8).unwrap();
        assert_eq!(holder_exponent(0.0, &m).unwrap(), 0.0);
        m.nu = 1e-12;
        let g = m.gamma();
        assert_relative_eq!(holder_exponent(1.0, &m).unwrap(), m.alpha() / (8.0 * g * g), max_relative = 1e-10);
    }

    #[test]
    fn modulus_without_decay() {
        let m = ModulusParams::new(2, 1.8).unwrap();
        let b = modulus_bound(0.6, &DeltaProfile::Constant(0.0), &|_| 0.1, &[0.0, 0.0], 1.0, 0.1, &m, 1.0).unwrap();
        assert_eq!(b.bound, 0.6 + 0.2);
        assert_eq!(b.r, 1.0);
    }

    #[test]
    fn classifier_on_synthetic_profiles() {
        let opts = ClassifierOptions::default();
        let radii: Vec<f64> = (0..8).map(|j| 0.5 / 2f64.powi(j)).collect();
        let c = classify_densities(radii.clone(), vec![1.0; 8], 1.8, &opts).unwrap();
        assert_eq!(c.label, WienerLabel::Wiener);
        assert_relative_eq!(c.slope, 0.125, max_relative = 1e-12);
        let decaying: Vec<f64> = (0..8).map(|j| 0.5 * 0.25f64.powi(j)).collect();
        let c = classify_densities(radii, decaying, 1.8, &opts).unwrap();
        assert_eq!(c.label, WienerLabel::NonWienerEvidence);
    }
}
