//! Implicit solver for the Cauchy–Dirichlet problem `u_t − div A(x,t,u,Du) = 0`.
//!
//! Every backward-Euler step minimises
//! `Σ h^N (w − u^n)²/(2Δt) + Σ_cells a_c·(1/p)·(|ξ|² + ε²)^{p/2} − Σ h^N f w`
//! over the nodes of `E`, with the complement carrying `g(·, t_{n+1})`.
//! Its Euler–Lagrange equation is the discrete equation with flux
//! `a·(|ξ|² + ε²)^{(p−2)/2} ξ`. Coefficients depending on `u` are frozen
//! per step and updated by Picard iteration.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::CellEnergy;
use crate::error::{Error, Result};
use crate::geometry::{Cylinder, GridDomain};
use crate::lattice::Lattice;
use crate::minimize::{newton, NewtonOptions, Objective};
use crate::par;

/// Space-time scalar function `f(x, t)`.
pub type ScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// Modulation `m(u)`.
pub type ModulationFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Arithmetic expression in `x, y, z, t` (`+ − * / ^`, `sin cos exp abs min max` and the other usual functions).
#[derive(Clone)]
pub struct Expression {
    source: String,
    expr: meval::Expr,
}

thread_local! {
    static BUILTINS: meval::Context<'static> = meval::Context::new();
}

impl Expression {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let get = |k: usize| x.get(k).copied().unwrap_or(0.0);
        let vars = [("x", get(0)), ("y", get(1)), ("z", get(2)), ("t", t)];
        BUILTINS.with(|ctx| self.expr.eval_with_context((vars, ctx)).unwrap_or(f64::NAN))
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let expr: meval::Expr = s
            .parse()
            .map_err(|e| Error::Parse(format!("expression '{s}': {e}")))?;
        let vars = [("x", 0.1), ("y", 0.2), ("z", 0.3), ("t", 0.4)];
        BUILTINS
            .with(|ctx| expr.eval_with_context((vars, ctx)))
            .map_err(|e| Error::Parse(format!("expression '{s}': {e}")))?;
        Ok(Expression {
            source: s.to_string(),
            expr,
        })
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({:?})", self.source)
    }
}

#[derive(Clone)]
pub enum FluxKind {
    Prototype,
    /// `a(x,t)·|ξ|^{p−2}ξ` with `a ∈ [C_o, C_1]`.
    ScalarCoefficient(ScalarFn),
    /// `m(u)·|ξ|^{p−2}ξ` with `m ∈ [C_o, C_1]` Lipschitz with constant `Λ`.
    UModulated(ModulationFn),
}

#[derive(Clone)]
pub struct FluxSpec {
    pub kind: FluxKind,
    pub p: f64,
    pub c_o: f64,
    pub c_1: f64,
    pub lipschitz: f64,
    /// Regularisation of `|ξ|`; `None` lets the solver pick `1e-8·osc(g)/h`.
    pub eps: Option<f64>,
}

impl fmt::Debug for FluxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxSpec")
            .field("kind", &self.name())
            .field("p", &self.p)
            .field("c_o", &self.c_o)
            .field("c_1", &self.c_1)
            .field("lipschitz", &self.lipschitz)
            .field("eps", &self.eps)
            .finish()
    }
}

impl FluxSpec {
    pub fn prototype(p: f64) -> Self {
        FluxSpec {
            kind: FluxKind::Prototype,
            p,
            c_o: 1.0,
            c_1: 1.0,
            lipschitz: 0.0,
            eps: None,
        }
    }

    pub fn scalar_coefficient(p: f64, c_o: f64, c_1: f64, a: ScalarFn) -> Self {
        FluxSpec {
            kind: FluxKind::ScalarCoefficient(a),
            p,
            c_o,
            c_1,
            lipschitz: 0.0,
            eps: None,
        }
    }

    /// `m(u) = C_o + (C_1 − C_o)(1 + tanh(κu))/2` with `κ = 2Λ/(C_1 − C_o)`, whose Lipschitz constant is `Λ`.
    pub fn u_modulated(p: f64, c_o: f64, c_1: f64, lipschitz: f64) -> Self {
        let spread = c_1 - c_o;
        let kappa = if spread > 0.0 { 2.0 * lipschitz / spread } else { 0.0 };
        let m: ModulationFn = Arc::new(move |u: f64| c_o + spread * 0.5 * (1.0 + (kappa * u).tanh()));
        FluxSpec {
            kind: FluxKind::UModulated(m),
            p,
            c_o,
            c_1,
            lipschitz,
            eps: None,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FluxKind::Prototype => "prototype",
            FluxKind::ScalarCoefficient(_) => "scalar_coefficient",
            FluxKind::UModulated(_) => "u_modulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p < 2.0) {
            return Err(Error::invalid(format!("p = {} outside the singular range (1, 2)", self.p)));
        }
        if !(self.c_o > 0.0 && self.c_o <= self.c_1) {
            return Err(Error::invalid("ellipticity constants must satisfy 0 < C_o <= C_1"));
        }
        if !(self.lipschitz >= 0.0) {
            return Err(Error::invalid("Lipschitz constant must be nonnegative"));
        }
        if matches!(self.eps, Some(e) if !(e >= 0.0)) {
            return Err(Error::invalid("regularisation must be nonnegative"));
        }
        Ok(())
    }

    /// The scalar multiplying `|ξ|^{p−2}ξ`.
    pub fn coefficient(&self, x: &[f64], t: f64, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Prototype => 1.0,
            FluxKind::ScalarCoefficient(a) => a(x, t),
            FluxKind::UModulated(m) => m(u),
        }
    }

    fn depends_on_u(&self) -> bool {
        matches!(self.kind, FluxKind::UModulated(_))
    }
}

/// `A(x,t,u,ξ) = coefficient·(|ξ|² + ε²)^{(p−2)/2} ξ`.
pub fn flux(spec: &FluxSpec, x: &[f64], t: f64, u: f64, xi: &[f64]) -> Vec<f64> {
    let eps = spec.eps.unwrap_or(0.0);
    let s2: f64 = xi.iter().map(|v| v * v).sum::<f64>() + eps * eps;
    if s2 == 0.0 {
        return vec![0.0; xi.len()];
    }
    let k = spec.coefficient(x, t, u) * s2.powf(0.5 * spec.p - 1.0);
    xi.iter().map(|v| k * v).collect()
}

/// Dirichlet data `g` on the parabolic boundary, with an optional modulus of continuity.
#[derive(Clone)]
pub struct BoundaryData {
    g: ScalarFn,
    modulus: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    label: String,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryData({})", self.label)
    }
}

impl BoundaryData {
    pub fn from_fn(label: impl Into<String>, g: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryData {
            g: Arc::new(g),
            modulus: None,
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        BoundaryData::from_fn(format!("{c}"), move |_, _| c).with_modulus(|_| 0.0)
    }

    pub fn from_expr(src: &str) -> Result<Self> {
        let e: Expression = src.parse()?;
        Ok(BoundaryData::from_fn(src.to_string(), move |x, t| e.eval(x, t)))
    }

    /// Node values on `lattice` at the given times, linear in time and nearest-node in space.
    pub fn sampled(lattice: Lattice, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid("sampled data needs one value array per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must increase"));
        }
        if values.iter().any(|v| v.len() != lattice.len()) {
            return Err(Error::invalid("sampled values do not match the lattice"));
        }
        let g = move |x: &[f64], t: f64| {
            let mut c = [0usize; 3];
            for k in 0..lattice.dim {
                let f = lattice.fractional_index(x[k], k).round();
                c[k] = f.clamp(0.0, (lattice.shape[k] - 1) as f64) as usize;
            }
            let i = lattice.index(c);
            let j = times.partition_point(|&s| s <= t);
            if j == 0 {
                return values[0][i];
            }
            if j == times.len() {
                return values[j - 1][i];
            }
            let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
            (1.0 - w) * values[j - 1][i] + w * values[j][i]
        };
        Ok(BoundaryData::from_fn("sampled", g))
    }

    pub fn with_modulus(mut self, w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.modulus = Some(Arc::new(w));
        self
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.g)(x, t)
    }

    /// Supplied modulus `ω_g(r)`, if any.
    pub fn modulus(&self, r: f64) -> Option<f64> {
        self.modulus.as_ref().map(|w| w(r))
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Solver controls; every tolerance is overridable.
#[derive(Clone)]
pub struct Controls {
    /// Time step; `None` selects `h^p·osc(g)^{2−p}/4`.
    pub dt: Option<f64>,
    /// Flux regularisation when the flux spec leaves it open; `None` selects `1e-8·osc(g)/h`.
    pub eps: Option<f64>,
    /// Residual max-norm tolerance of each step (per unit node volume).
    pub tol: f64,
    pub max_newton: usize,
    pub picard_tol: f64,
    pub max_picard: usize,
    /// Keep every `store_every`-th step (the final time is always kept).
    pub store_every: usize,
    /// Source term `f(x,t)`, for manufactured-solution verification only.
    pub source: Option<ScalarFn>,
    /// Initial data on `E`; defaults to `g(·, 0)`.
    pub initial: Option<ScalarFn>,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            dt: None,
            eps: None,
            tol: 1e-8,
            max_newton: 200,
            picard_tol: 1e-10,
            max_picard: 100,
            store_every: 1,
            source: None,
            initial: None,
        }
    }
}

impl fmt::Debug for Controls {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Controls")
            .field("dt", &self.dt)
            .field("eps", &self.eps)
            .field("tol", &self.tol)
            .field("max_newton", &self.max_newton)
            .field("store_every", &self.store_every)
            .field("source", &self.source.is_some())
            .finish()
    }
}

/// Solution values on a space lattice at a sequence of times.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub lattice: Lattice,
    /// Nodes of `E`; the others carry boundary data.
    pub inside: Vec<bool>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Field {
    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.lattice.point(i)[..self.dim()].to_vec()
    }

    /// Index of the stored time closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let j = self.times.partition_point(|&s| s < t);
        if j == 0 {
            0
        } else if j == self.times.len() {
            j - 1
        } else if (self.times[j] - t).abs() < (t - self.times[j - 1]).abs() {
            j
        } else {
            j - 1
        }
    }

    /// Indices of stored times in `[a, b]` (with a relative slack of 1e-9).
    pub fn times_in(&self, a: f64, b: f64) -> Vec<usize> {
        let slack = 1e-9 * (1.0 + a.abs().max(b.abs()));
        (0..self.times.len())
            .filter(|&n| self.times[n] >= a - slack && self.times[n] <= b + slack)
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Field {
        Field {
            values: self.values.iter().map(|v| v.iter().map(|&x| f(x)).collect()).collect(),
            ..self.clone()
        }
    }

    /// `max_E u − min_E u` at stored time `n`, over nodes of `E` and its boundary data.
    pub fn oscillation(&self, n: usize) -> f64 {
        let v = &self.values[n];
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = v.iter().copied().fold(f64::INFINITY, f64::min);
        mx - mn
    }
}

fn data_oscillation(domain: &GridDomain, g: &BoundaryData, initial: Option<&ScalarFn>) -> (f64, f64) {
    let lat = &domain.lattice;
    let dim = lat.dim;
    let vals = par::map(lat.len(), |i| {
        let x = &lat.point(i)[..dim];
        match (domain.inside[i], initial) {
            (true, Some(f)) => f(x, 0.0),
            _ => g.eval(x, 0.0),
        }
    });
    let mx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mn = vals.iter().copied().fold(f64::INFINITY, f64::min);
    (mn, mx)
}

/// Number of backward-Euler steps and their size for horizon `t_end`.
pub fn time_grid(domain: &GridDomain, spec: &FluxSpec, g: &BoundaryData, t_end: f64, controls: &Controls) -> (usize, f64) {
    let dt = controls.dt.unwrap_or_else(|| {
        let (mn, mx) = data_oscillation(domain, g, controls.initial.as_ref());
        let osc = mx - mn;
        let h = domain.h();
        if osc > 0.0 {
            0.25 * h.powf(spec.p) * osc.powf(2.0 - spec.p)
        } else {
            0.25 * h.powf(spec.p)
        }
    });
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

pub fn solve_cauchy_dirichlet(
    spec: &FluxSpec,
    domain: &GridDomain,
    g: &BoundaryData,
    t_end: f64,
    controls: &Controls,
) -> Result<Field> {
    spec.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("horizon T = {t_end} must be positive")));
    }
    if let Some(dt) = controls.dt {
        if !(dt > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
    }
    let lat = &domain.lattice;
    let dim = lat.dim;
    let n = lat.len();
    let h = lat.h;
    let free: Vec<bool> = domain.inside.clone();
    if !free.iter().any(|&f| f) {
        return Err(Error::Resolution("the domain has no lattice node inside E".into()));
    }

    let (mut lo, mut hi) = data_oscillation(domain, g, controls.initial.as_ref());
    let osc = hi - lo;
    let eps = spec
        .eps
        .or(controls.eps)
        .unwrap_or_else(|| 1e-8 * if osc > 0.0 { osc } else { 1.0 } / h);
    let (steps, dt) = time_grid(domain, spec, g, t_end, controls);

    let mut cells = CellEnergy::new(lat, h, spec.p, eps, 1.0 / spec.p, &free);
    let offsets = cells.corner_offsets().to_vec();
    let ncells = cells.num_cells();
    let centers: Vec<Vec<f64>> = (0..ncells)
        .map(|c| {
            let x = lat.point(cells.cell_node(c));
            (0..dim).map(|k| x[k] + 0.5 * h).collect()
        })
        .collect();

    let points: Vec<Vec<f64>> = (0..n).map(|i| lat.point(i)[..dim].to_vec()).collect();
    let mut u: Vec<f64> = par::map(n, |i| match (free[i], &controls.initial) {
        (true, Some(f)) => f(&points[i], 0.0),
        _ => g.eval(&points[i], 0.0),
    });
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial data is not finite"));
    }
    let vol = h.powi(dim as i32);
    let mut field = Field {
        lattice: lat.clone(),
        inside: domain.inside.clone(),
        times: vec![0.0],
        values: vec![u.clone()],
    };
    let store_every = controls.store_every.max(1);

    for step in 1..=steps {
        let t = step as f64 * dt;
        let prev = u.clone();
        let boundary = par::map(n, |i| if free[i] { 0.0 } else { g.eval(&points[i], t) });
        for i in 0..n {
            if !free[i] {
                u[i] = boundary[i];
                lo = lo.min(u[i]);
                hi = hi.max(u[i]);
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("boundary data not finite at t = {t}")));
        }
        let load: Option<Vec<f64>> = controls.source.as_ref().map(|f| {
            par::map(n, |i| if free[i] { vol * f(&points[i], t) } else { 0.0 })
        });
        let opts = NewtonOptions {
            max_iter: controls.max_newton,
            rel_decrease_tol: 0.0,
            grad_tol: controls.tol,
            residual_scale: vol,
            eps_model: eps,
            clamp: if controls.source.is_none() { Some((lo, hi)) } else { None },
            ..NewtonOptions::default()
        };

        let picard = if spec.depends_on_u() { controls.max_picard.max(1) } else { 1 };
        let mut residual = f64::INFINITY;
        for sweep in 0..picard {
            if !matches!(spec.kind, FluxKind::Prototype) {
                let weights = par::map(ncells, |c| {
                    let base = cells.cell_node(c);
                    let ubar = offsets.iter().map(|&o| u[base + o]).sum::<f64>() / offsets.len() as f64;
                    spec.coefficient(&centers[c], t, ubar)
                });
                if let Some(w) = weights.iter().find(|w| !(**w >= spec.c_o * (1.0 - 1e-12) && **w <= spec.c_1 * (1.0 + 1e-12))) {
                    return Err(Error::invalid(format!(
                        "coefficient {w} outside [C_o, C_1] = [{}, {}]",
                        spec.c_o, spec.c_1
                    )));
                }
                cells.set_weights(weights);
            }
            let before = u.clone();
            let obj = Objective {
                cells: &cells,
                free: &free,
                mass: Some((vol / dt, &prev)),
                load: load.as_deref(),
            };
            let stats = newton(&obj, &mut u, &opts);
            residual = stats.residual;
            if !stats.converged {
                return Err(Error::StepFailure { step, time: t, residual });
            }
            let change = (0..n).map(|i| (u[i] - before[i]).abs()).fold(0.0, f64::max);
            if !spec.depends_on_u() || (sweep > 0 && change <= controls.picard_tol) {
                break;
            }
            if sweep + 1 == picard {
                return Err(Error::StepFailure { step, time: t, residual: change });
            }
        }
        if !residual.is_finite() {
            return Err(Error::StepFailure { step, time: t, residual });
        }
        if step % store_every == 0 || step == steps {
            field.times.push(t);
            field.values.push(u.clone());
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// `(u − k)_+` or `(u − k)_−` nodewise.
pub fn truncate(u: &Field, k: f64, sign: Sign) -> Field {
    match sign {
        Sign::Plus => u.map(move |v| (v - k).max(0.0)),
        Sign::Minus => u.map(move |v| (k - v).max(0.0)),
    }
}

/// Extends a truncation `u_k` by zero outside `E` within `Q`, keeping the stored times inside `Q`.
///
/// Complement nodes carry `g`, so `u_k` there equals `(g − k)_±`; a positive
/// value on the lateral boundary inside `Q` means the level violates
/// `k ≥ sup_Σ g` (or `k ≤ inf_Σ g`) and the extension would not be a sub-solution.
pub fn zero_extend(u_k: &Field, q: &Cylinder) -> Result<Field> {
    if q.base.dim() != u_k.dim() {
        return Err(Error::invalid("cylinder dimension does not match the field"));
    }
    let times = u_k.times_in(q.t_lo(), q.t_hi());
    if times.is_empty() {
        return Err(Error::Geometry("no stored time inside the cylinder".into()));
    }
    let lat = &u_k.lattice;
    let dim = lat.dim;
    let boundary: Vec<usize> = (0..lat.len())
        .filter(|&i| !u_k.inside[i] && lat.neighbors(i).any(|j| u_k.inside[j]))
        .filter(|&i| q.base.contains_closed(&lat.point(i)[..dim]))
        .collect();
    let tol = 1e-12;
    for &n in &times {
        if let Some(&i) = boundary.iter().find(|&&i| u_k.values[n][i] > tol) {
            return Err(Error::InvalidLevel(format!(
                "truncation is {} at the boundary node {:?}, t = {}",
                u_k.values[n][i],
                &lat.point(i)[..dim],
                u_k.times[n]
            )));
        }
    }
    Ok(Field {
        lattice: lat.clone(),
        inside: u_k.inside.clone(),
        times: times.iter().map(|&n| u_k.times[n]).collect(),
        values: times
            .iter()
            .map(|&n| {
                u_k.values[n]
                    .iter()
                    .zip(&u_k.inside)
                    .map(|(&v, &ins)| if ins { v } else { 0.0 })
                    .collect()
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `max (v − u)` over interior nodes and stored times (`−∞` when there are none).
    pub max_violation: f64,
    pub time: f64,
    pub point: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Default tolerance for discrete comparison: `1e-8` plus the Newton tolerance.
pub const COMPARISON_TOL: f64 = 2e-8;

/// Checks `v ≤ u` in the interior given `v ≤ u` on the discrete parabolic boundary.
pub fn check_comparison(u: &Field, v: &Field, tol: f64) -> Result<ComparisonReport> {
    if u.lattice != v.lattice || u.inside != v.inside || u.times.len() != v.times.len() {
        return Err(Error::invalid("fields live on different lattices or time grids"));
    }
    if u.times.iter().zip(&v.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs())) {
        return Err(Error::invalid("fields have different time grids"));
    }
    let n = u.lattice.len();
    let slack = 1e-12;
    for (k, (uu, vv)) in u.values.iter().zip(&v.values).enumerate() {
        for i in 0..n {
            let on_boundary = k == 0 || !u.inside[i];
            if on_boundary && vv[i] > uu[i] + slack {
                return Err(Error::invalid(format!(
                    "boundary ordering fails at {:?}, t = {}",
                    u.point(i),
                    u.times[k]
                )));
            }
        }
    }
    let mut worst = (f64::NEG_INFINITY, 0usize, 0usize);
    for k in 1..u.times.len() {
        for i in (0..n).filter(|&i| u.inside[i]) {
            let d = v.values[k][i] - u.values[k][i];
            if d > worst.0 {
                worst = (d, k, i);
            }
        }
    }
    Ok(ComparisonReport {
        max_violation: worst.0,
        time: u.times[worst.1],
        point: u.point(worst.2),
        tolerance: tol,
        pass: worst.0 <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{benchmark_domain, BenchParams, Cube};

    #[test]
    fn flux_examples() {
        let proto = FluxSpec::prototype(1.5).with_eps(0.0);
        assert_eq!(flux(&proto, &[0.0, 0.0], 0.0, 0.0, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(flux(&proto, &[0.0, 0.0], 0.0, 0.0, &[1.0, 0.0]), vec![1.0, 0.0]);
        let a = FluxSpec::scalar_coefficient(1.8, 1.0, 2.0, Arc::new(|_, _| 2.0)).with_eps(0.0);
        let f = flux(&a, &[0.0, 0.0], 0.0, 0.0, &[2.0, 0.0]);
        assert!((f[0] - 2.0 * 2f64.powf(0.8)).abs() < 1e-12 && (f[0] - 3.4822).abs() < 1e-4);
    }

    #[test]
    fn expressions() {
        let e: Expression = "max(x, y) + abs(t) * sin(z) - 2^x / exp(0)".parse().unwrap();
        let v = e.eval(&[1.0, 0.5, 0.0], -3.0);
        assert!((v - (1.0 - 2.0)).abs() < 1e-15);
        assert!("x + w".parse::<Expression>().is_err());
        assert!("x +".parse::<Expression>().is_err());
    }

    #[test]
    fn constant_data_stays_constant() {
        let d = benchmark_domain("slit", &BenchParams { h: 1.0 / 16.0, ..Default::default() }).unwrap();
        let f = solve_cauchy_dirichlet(&FluxSpec::prototype(1.8), &d, &BoundaryData::constant(0.7), 0.05, &Controls::default())
            .unwrap();
        for v in &f.values {
            assert!(v.iter().all(|x| (x - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn truncation_and_extension() {
        let lat = Lattice::new(1, 0.25, &[-1.0], &[9]).unwrap();
        let inside: Vec<bool> = (0..9).map(|i| i > 0 && i < 8).collect();
        let u = Field {
            values: vec![(0..9).map(|i| lat.point(i)[0]).collect()],
            lattice: lat,
            inside,
            times: vec![0.0],
        };
        let m = truncate(&u, 0.0, Sign::Minus);
        assert_eq!(m.values[0][0], 1.0);
        assert_eq!(m.values[0][8], 0.0);
        assert!(truncate(&u, 1.0, Sign::Plus).values[0].iter().all(|&v| v == 0.0));
        let q = crate::geometry::make_cylinder(
            Cube::new(&[0.0], 1.0).unwrap(),
            0.0,
            1.0,
            1.0,
            crate::geometry::CylinderKind::Centered,
            1.8,
        )
        .unwrap();
        assert!(matches!(zero_extend(&truncate(&u, 0.5, Sign::Plus), &q), Err(Error::InvalidLevel(_))));
        let ext = zero_extend(&truncate(&u, 1.0, Sign::Plus), &q).unwrap();
        assert!(ext.values[0].iter().all(|&v| v == 0.0));
    }
}
