//! End-to-end verification runs and the randomized property suite.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{
    capacity_density_with, capacity_scaling_check, p_capacity, parabolic_capacity, CapacityProblem, DensityMode,
    DensityOptions, ParabolicCondenser, Region, TimeSlice,
};
use crate::error::{Error, Result};
use crate::geometry::{benchmark_domain, nested_cylinders, BenchParams, Cube, GridDomain};
use crate::harnack::{l1_harnack_gap, weak_harnack_ratio};
use crate::io::{read_domain, BoundaryFile};
use crate::lattice::Lattice;
use crate::pde::{check_comparison, flux, solve_cauchy_dirichlet, BoundaryData, Controls, Expression, Field, FluxSpec};
use crate::wiener::{
    boundary_oscillation, classify_wiener_point, linear_fit, modulus_bound, oscillation_iteration,
    oscillation_iteration_tampered, weight_a, ClassifierOptions, DeltaProfile, ModulusParams, WienerClassification,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluxConfig {
    /// `prototype`, `scalar` or `u_modulated`.
    pub kind: String,
    pub c_o: f64,
    pub c_1: f64,
    pub lipschitz: f64,
    /// Coefficient `a(x, t)` for the scalar family.
    pub coefficient: Option<String>,
}

impl Default for FluxConfig {
    fn default() -> Self {
        FluxConfig {
            kind: "prototype".into(),
            c_o: 1.0,
            c_1: 1.0,
            lipschitz: 0.0,
            coefficient: None,
        }
    }
}

impl FluxConfig {
    pub fn build(&self, p: f64) -> Result<FluxSpec> {
        let spec = match self.kind.as_str() {
            "prototype" => FluxSpec::prototype(p),
            "scalar" => {
                let src = self
                    .coefficient
                    .as_deref()
                    .ok_or_else(|| Error::invalid("the scalar flux needs a coefficient expression"))?;
                let e: Expression = src.parse()?;
                FluxSpec::scalar_coefficient(p, self.c_o, self.c_1, Arc::new(move |x, t| e.eval(x, t)))
            }
            "u_modulated" => FluxSpec::u_modulated(p, self.c_o, self.c_1, self.lipschitz),
            other => return Err(Error::invalid(format!("unknown flux family '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let c = Controls::default();
        SolverConfig {
            dt: c.dt,
            eps: c.eps,
            tol: c.tol,
            max_newton: c.max_newton,
        }
    }
}

impl SolverConfig {
    pub fn controls(&self) -> Controls {
        Controls {
            dt: self.dt,
            eps: self.eps,
            tol: self.tol,
            max_newton: self.max_newton,
            ..Default::default()
        }
    }
}

/// Everything a verification run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Benchmark name or path to a domain file.
    pub domain: String,
    pub bench: BenchParams,
    pub flux: FluxConfig,
    pub boundary: BoundaryFile,
    /// Initial data on `E`; defaults to `g(·, 0)`.
    pub initial: Option<String>,
    /// Probe point; defaults to the domain's own probe.
    pub x_o: Option<Vec<f64>>,
    pub t_o: f64,
    /// Horizon; defaults to `t_o`.
    pub t_end: Option<f64>,
    /// `R_o`; the ladder is `R_o/2^j`, `j = 1..=scales`.
    pub r_o: f64,
    pub scales: usize,
    pub constants: ModulusParams,
    /// Values of `γ₂` searched for a bound that dominates the measurements.
    pub gamma2_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub density: DensityOptions,
    /// Run the Wiener classifier as part of the report.
    pub classify: bool,
    pub classifier: ClassifierOptions,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: "square_with_corner".into(),
            bench: BenchParams::default(),
            flux: FluxConfig::default(),
            boundary: BoundaryFile::Expr {
                expr: "max(0, 1 - x^2 - y^2)".into(),
            },
            initial: None,
            x_o: None,
            t_o: 0.3,
            t_end: None,
            r_o: 0.5,
            scales: 4,
            constants: ModulusParams::default(),
            gamma2_grid: vec![1.25, 2.0, 4.0, 8.0],
            c_grid: vec![0.25, 0.5, 1.0],
            density: DensityOptions::default(),
            classify: false,
            classifier: ClassifierOptions::default(),
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn build_domain(&self) -> Result<GridDomain> {
        let mut params = self.bench.clone();
        params.p = self.constants.p;
        if crate::geometry::BENCHMARK_NAMES.contains(&self.domain.as_str()) {
            benchmark_domain(&self.domain, &params)
        } else {
            read_domain(std::path::Path::new(&self.domain))
        }
    }

    pub fn ladder(&self) -> Vec<f64> {
        (1..=self.scales).map(|j| self.r_o / 2f64.powi(j as i32)).collect()
    }

    pub fn validate(&self, domain: &GridDomain) -> Result<Vec<f64>> {
        self.constants.validate()?;
        if self.constants.dim != domain.dim() {
            return Err(Error::invalid(format!(
                "constants are for N = {}, the domain has N = {}",
                self.constants.dim,
                domain.dim()
            )));
        }
        if self.scales == 0 || !(self.r_o > 0.0) {
            return Err(Error::invalid("the scale ladder needs R_o > 0 and at least one scale"));
        }
        if !(self.t_o > 0.0) {
            return Err(Error::invalid("t_o must be positive"));
        }
        if self.gamma2_grid.iter().any(|g| !(*g > 1.0)) || self.c_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::invalid("search grid needs γ₂ > 1 and c > 0"));
        }
        let x_o = self
            .x_o
            .clone()
            .or_else(|| domain.meta.probe.clone())
            .ok_or_else(|| Error::invalid("no probe point given and the domain has none"))?;
        if x_o.len() != domain.dim() {
            return Err(Error::invalid("probe point dimension mismatch"));
        }
        let reach = domain.h() * (domain.dim() as f64).sqrt() * (1.0 + 1e-9);
        let near = domain.boundary_nodes().into_iter().any(|i| {
            let y = domain.point(i);
            y.iter().zip(&x_o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= reach
        });
        // A cusp tip finer than the lattice has no boundary node next to it.
        let on_shape = domain
            .shape
            .as_ref()
            .is_some_and(|s| s.bbox.contains_open(&x_o) && !s.contains(&x_o));
        if !(near || on_shape) {
            return Err(Error::invalid(format!(
                "probe {x_o:?} is not on the rasterised lateral boundary"
            )));
        }
        Ok(x_o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub rho: f64,
    pub delta: f64,
    pub a: f64,
    pub bound: f64,
    pub measured: f64,
    /// Radius of the reference cylinder of the bound.
    pub r_ref: f64,
    pub r_exceeds_r_o: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub gamma2: f64,
    pub c: f64,
    pub bound_slope: f64,
    /// Measured oscillation below the bound at every scale.
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub domain: String,
    pub x_o: Vec<f64>,
    pub t_o: f64,
    pub constants: ModulusParams,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda_bar: f64,
    /// Oscillation of the solution over `K_{R_o} × [0, T]`, before normalisation.
    pub omega_o: f64,
    /// Factor the data was divided by so that `ω_o ≤ 1`.
    pub normalization: f64,
    pub rows: Vec<ScaleRow>,
    /// Slope of `log osc` against `log ρ`.
    pub measured_slope: f64,
    pub bound_slope: f64,
    pub grid: Vec<GridResult>,
    pub classification: Option<WienerClassification>,
    pub pass: bool,
    pub failure: Option<String>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

/// Oscillation of `u` over `(K_ρ(x_o) ∩ E) × [t_lo, t_hi]`; uses the stored time nearest `t_ref` if none falls inside.
pub fn measured_oscillation(u: &Field, x_o: &[f64], rho: f64, t_lo: f64, t_hi: f64, t_ref: f64) -> f64 {
    let k = Cube {
        center: x_o.to_vec(),
        half_edge: rho,
    };
    let nodes: Vec<usize> = (0..u.lattice.len())
        .filter(|&i| u.inside[i] && k.contains_closed(&u.point(i)))
        .collect();
    let mut times = u.times_in(t_lo, t_hi);
    if times.is_empty() {
        times.push(u.time_index(t_ref));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in times {
        for &i in &nodes {
            lo = lo.min(u.values[n][i]);
            hi = hi.max(u.values[n][i]);
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn log_slope(rho: &[f64], v: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = rho
        .iter()
        .zip(v)
        .filter(|(_, y)| **y > 0.0)
        .map(|(r, y)| (r.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linear_fit(&x, &y).0
}

/// Solves, measures the oscillation over `Q_ρ(ω_o)` at each scale and compares with the modulus bound.
pub fn run_verification(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let domain = config.build_domain()?;
    let x_o = config.validate(&domain)?;
    let params = config.constants;
    let p = params.p;
    let spec = config.flux.build(p)?;
    let g = config.boundary.to_data()?;
    let mut controls = config.solver.controls();
    if let Some(src) = &config.initial {
        let e: Expression = src.parse()?;
        controls.initial = Some(Arc::new(move |x, t| e.eval(x, t)));
    }
    let t_end = config.t_end.unwrap_or(config.t_o).max(config.t_o);
    let ladder = config.ladder();
    let mut report = ExperimentReport {
        domain: if domain.meta.name.is_empty() { config.domain.clone() } else { domain.meta.name.clone() },
        x_o: x_o.clone(),
        t_o: config.t_o,
        constants: params,
        alpha: params.alpha(),
        gamma: params.gamma(),
        lambda_bar: params.lambda_bar(),
        omega_o: f64::NAN,
        normalization: 1.0,
        rows: Vec::new(),
        measured_slope: f64::NAN,
        bound_slope: f64::NAN,
        grid: Vec::new(),
        classification: None,
        pass: false,
        failure: None,
        runtime_seconds: 0.0,
    };

    let deltas = crate::par::map(ladder.len(), |j| capacity_density_with(&domain, &x_o, ladder[j], p, &config.density));
    let mut delta = Vec::with_capacity(ladder.len());
    for d in deltas {
        match d {
            Ok(v) => delta.push(v),
            Err(e) => {
                report.failure = Some(format!("density: {e}"));
                report.runtime_seconds = start.elapsed().as_secs_f64();
                return Ok(report);
            }
        }
    }

    let u = match solve_cauchy_dirichlet(&spec, &domain, &g, t_end, &controls) {
        Ok(u) => u,
        Err(e @ (Error::StepFailure { .. } | Error::Convergence { .. })) => {
            report.failure = Some(format!("solver: {e}"));
            report.runtime_seconds = start.elapsed().as_secs_f64();
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let omega_raw = measured_oscillation(&u, &x_o, config.r_o, 0.0, t_end, config.t_o);
    let kappa = omega_raw.max(1.0);
    let omega_n = (omega_raw / kappa).max(f64::MIN_POSITIVE);
    report.omega_o = omega_raw;
    report.normalization = kappa;

    let window = |rho: f64, c: f64| {
        let th = 0.25 * c * omega_raw.max(f64::MIN_POSITIVE).powf(2.0 - p) * rho.powf(p);
        (config.t_o - 2.0 * th, (config.t_o + th).min(t_end))
    };
    let measured: Vec<f64> = ladder
        .iter()
        .map(|&rho| {
            let (lo, hi) = window(rho, params.c);
            measured_oscillation(&u, &x_o, rho, lo, hi, config.t_o)
        })
        .collect();
    let profile = DeltaProfile::steps(ladder.clone(), delta.clone())?;
    let g_osc = |q: &crate::geometry::Cylinder| boundary_oscillation(&domain, &g, q, &u.times) / kappa;
    let bounds = |m: &ModulusParams| -> Result<Vec<crate::wiener::ModulusBound>> {
        ladder
            .iter()
            .map(|&rho| modulus_bound(omega_n, &profile, &g_osc, &x_o, config.t_o, rho, m, config.r_o))
            .collect()
    };
    let main = bounds(&params)?;
    for (k, &rho) in ladder.iter().enumerate() {
        report.rows.push(ScaleRow {
            rho,
            delta: delta[k],
            a: weight_a(delta[k], params.gamma2, p)?,
            bound: kappa * main[k].bound,
            measured: measured[k],
            r_ref: main[k].r,
            r_exceeds_r_o: main[k].r_exceeds_r_o,
        });
    }
    report.measured_slope = log_slope(&ladder, &measured);
    report.bound_slope = log_slope(&ladder, &report.rows.iter().map(|r| r.bound).collect::<Vec<_>>());
    for &gamma2 in &config.gamma2_grid {
        for &c in &config.c_grid {
            let m = ModulusParams { gamma2, c, ..params };
            let b: Vec<f64> = bounds(&m)?.iter().map(|b| kappa * b.bound).collect();
            let meas: Vec<f64> = ladder
                .iter()
                .map(|&rho| {
                    let (lo, hi) = window(rho, c);
                    measured_oscillation(&u, &x_o, rho, lo, hi, config.t_o)
                })
                .collect();
            report.grid.push(GridResult {
                gamma2,
                c,
                bound_slope: log_slope(&ladder, &b),
                dominates: meas.iter().zip(&b).all(|(m, b)| *m <= *b * (1.0 + 1e-12)),
            });
        }
    }
    if config.classify {
        report.classification = Some(classify_wiener_point(&domain, &x_o, p, &config.classifier)?);
    }
    report.pass = report.grid.iter().any(|g| g.dominates);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Problem sizes of the property suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSizes {
    pub traces: usize,
    pub trace_len: usize,
    pub cylinders: usize,
    pub capacity_pairs: usize,
    pub density_triples: usize,
    pub structure_samples: usize,
    pub pde_cases: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        SuiteSizes::small()
    }
}

impl SuiteSizes {
    pub fn small() -> Self {
        SuiteSizes {
            traces: 200,
            trace_len: 24,
            cylinders: 100,
            capacity_pairs: 3,
            density_triples: 3,
            structure_samples: 10_000,
            pde_cases: 2,
        }
    }
}

/// A deliberately broken computation, used to show the suite detects it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Negates the weights `A_j` in the oscillation recursion.
    NegateWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub module: String,
    pub check: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest violation (or error) seen; `0` when every case passed.
    pub worst: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyLedger {
    pub seed: u64,
    pub sizes: SuiteSizes,
    pub fault: Fault,
    pub entries: Vec<LedgerEntry>,
    pub pass: bool,
}

impl PropertyLedger {
    /// 0 when every check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

struct Tally {
    cases: usize,
    failures: usize,
    worst: f64,
    note: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            cases: 0,
            failures: 0,
            worst: 0.0,
            note: None,
        }
    }

    fn record(&mut self, violation: f64) {
        self.cases += 1;
        if violation > 0.0 || violation.is_nan() {
            self.failures += 1;
            if !(violation <= self.worst) {
                self.worst = violation;
            }
        }
    }

    fn error(&mut self, e: Error) {
        self.cases += 1;
        self.failures += 1;
        self.note.get_or_insert_with(|| e.to_string());
    }

    fn entry(self, module: &str, check: &str) -> LedgerEntry {
        LedgerEntry {
            module: module.into(),
            check: check.into(),
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            pass: self.failures == 0,
            note: self.note,
        }
    }
}

fn rng_for(seed: u64, check: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ check.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs every invariant check with the given seed; deterministic in `(seed, sizes, fault)`.
pub fn run_property_suite(seed: u64, sizes: &SuiteSizes, fault: Fault) -> PropertyLedger {
    let checks: Vec<(&str, &str, fn(&mut ChaCha8Rng, &SuiteSizes, Fault) -> Tally)> = vec![
        ("geometry", "nested-cylinder-containment", check_nested_cylinders),
        ("capacity", "monotone-under-inclusion", check_capacity_monotone),
        ("capacity", "potential-in-unit-interval", check_potential_range),
        ("capacity", "homogeneity", check_homogeneity),
        ("capacity", "slice-formula", check_slice_formula),
        ("capacity", "density-range-and-monotonicity", check_density),
        ("pde", "structure-conditions", check_structure),
        ("pde", "maximum-principle", check_max_principle),
        ("pde", "comparison", check_comparison_pairs),
        ("pde", "l1-decay", check_l1_decay),
        ("harnack", "constant-solution", check_harnack_constant),
        ("wiener", "recursion-monotone", check_recursion_monotone),
        ("wiener", "recursion-lower-bound", check_recursion_lower),
        ("wiener", "recursion-product-bound", check_recursion_product),
        ("wiener", "constant-density-closed-form", check_recursion_closed_form),
        ("wiener", "modulus-without-density", check_modulus_zero),
    ];
    let entries: Vec<LedgerEntry> = checks
        .iter()
        .enumerate()
        .map(|(k, (module, name, f))| {
            let mut rng = rng_for(seed, k as u64 + 1);
            f(&mut rng, sizes, fault).entry(module, name)
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    PropertyLedger {
        seed,
        sizes: *sizes,
        fault,
        entries,
        pass,
    }
}

fn check_nested_cylinders(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for _ in 0..sizes.cylinders {
        let mut omega: Vec<f64> = (0..8).map(|_| rng.gen_range(1e-3..=1.0)).collect();
        omega.sort_by(|a, b| b.total_cmp(a));
        let p = rng.gen_range(1.05..1.95);
        let c = rng.gen_range(0.1..1.0);
        match nested_cylinders(&[0.0, 0.0], 1.0, 1.0, &omega, c, p) {
            Ok(q) => {
                let bad = q.windows(2).filter(|w| !w[0].contains(&w[1])).count();
                t.record(bad as f64);
            }
            Err(e) => t.error(e),
        }
    }
    t
}

fn square_lattice(dim: usize, h: f64, half: f64) -> Lattice {
    let n = (2.0 * half / h).round() as usize + 1;
    Lattice::new(dim, h, &vec![-half; dim], &vec![n; dim]).expect("valid lattice")
}

fn random_condenser(rng: &mut ChaCha8Rng, dim: usize) -> (CapacityProblem, CapacityProblem) {
    let h = if dim == 1 { 1.0 / 64.0 } else { 1.0 / 16.0 };
    let lat = square_lattice(dim, h, 0.75);
    let p = rng.gen_range(1.2..1.95);
    let window = Region::Cube(Cube {
        center: vec![0.0; dim],
        half_edge: 0.5,
    });
    let r_big = rng.gen_range(0.15..0.3);
    let r_small = rng.gen_range(0.05..r_big);
    let small = CapacityProblem::from_predicate(&lat, window.clone(), p, |x| x.iter().all(|v| v.abs() <= r_small));
    let big = CapacityProblem::from_predicate(&lat, window, p, |x| x.iter().all(|v| v.abs() <= r_big));
    (small, big)
}

fn check_capacity_monotone(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for k in 0..sizes.capacity_pairs {
        let (small, big) = random_condenser(rng, 1 + k % 2);
        match (p_capacity(&small), p_capacity(&big)) {
            (Ok(a), Ok(b)) => t.record(a.value - b.value * (1.0 + 1e-9)),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t
}

fn check_potential_range(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for k in 0..sizes.capacity_pairs {
        let (small, _) = random_condenser(rng, 1 + k % 2);
        match p_capacity(&small) {
            Ok(r) => {
                let out = r.potential.iter().map(|&v| (-v).max(v - 1.0)).fold(0.0, f64::max);
                t.record(out);
            }
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_homogeneity(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for k in 0..sizes.capacity_pairs {
        let dim = 1 + k % 2;
        let (problem, _) = random_condenser(rng, dim);
        match capacity_scaling_check(&problem, 2.0) {
            Ok((a, b)) => {
                let expected = 2f64.powf(dim as f64 - problem.p);
                t.record((b / a / expected - 1.0).abs() - 0.01);
            }
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_slice_formula(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for k in 0..sizes.capacity_pairs {
        let (problem, _) = random_condenser(rng, 1 + k % 2);
        let a = rng.gen_range(0.0..0.5);
        let b = a + rng.gen_range(0.1..1.0);
        let cond = ParabolicCondenser {
            lattice: problem.lattice.clone(),
            window: problem.window.clone(),
            time: (a - 0.1, b + 0.1),
            slices: vec![TimeSlice {
                t0: a,
                t1: b,
                nodes: problem.inner.clone(),
            }],
            p: problem.p,
        };
        match (parabolic_capacity(&cond), p_capacity(&problem)) {
            (Ok(g), Ok(c)) => {
                let expected = (b - a) * c.value;
                t.record((g / expected - 1.0).abs() - 1e-6);
            }
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t
}

fn check_density(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    let names = ["half_space", "square_with_corner", "slit", "checker_fat"];
    let native = DensityOptions {
        mode: DensityMode::Native,
        ..Default::default()
    };
    for k in 0..sizes.density_triples {
        let params = BenchParams {
            h: 1.0 / 32.0,
            half_extent: 0.5,
            ..Default::default()
        };
        let d = match benchmark_domain(names[k % names.len()], &params) {
            Ok(d) => d,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        let rho = 0.25;
        let x_o: Vec<f64> = (0..2).map(|_| rng.gen_range(-2..=2) as f64 / 32.0).collect();
        let removed: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| rng.gen_range(-8..=8) as f64 / 32.0).collect())
            .collect();
        let shrunk = match d.clone().with_removed_points(&removed) {
            Ok(s) => s,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        match (
            capacity_density_with(&d, &x_o, rho, 1.8, &native),
            capacity_density_with(&shrunk, &x_o, rho, 1.8, &native),
        ) {
            (Ok(a), Ok(b)) => {
                let range = (-a).max(a - 1.0).max(-b).max(b - 1.0);
                t.record(range.max(a - b - 1e-9));
            }
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t
}

fn check_structure(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for _ in 0..sizes.structure_samples {
        let p = rng.gen_range(1.05..1.95);
        let c_o = rng.gen_range(0.2..1.0);
        let c_1 = c_o + rng.gen_range(0.0..2.0);
        let eps = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.1) };
        let spec = match rng.gen_range(0..3) {
            0 => FluxSpec::prototype(p),
            1 => FluxSpec::scalar_coefficient(p, c_o, c_1, Arc::new(move |x, _| c_o + (c_1 - c_o) * x[0].sin().abs())),
            _ => FluxSpec::u_modulated(p, c_o, c_1, rng.gen_range(0.0..3.0)),
        }
        .with_eps(eps);
        let dim = rng.gen_range(1..=3);
        let scale = 10f64.powf(rng.gen_range(-4.0..2.0));
        let xi: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = rng.gen_range(-2.0..2.0);
        let a = flux(&spec, &x, 0.0, u, &xi);
        let s = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dot: f64 = a.iter().zip(&xi).map(|(a, b)| a * b).sum();
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = 1e-12;
        let coercive = spec.c_o * (s.powf(p) - eps.powf(p)) - dot * (1.0 + tol);
        let growth = if s > 0.0 { norm - spec.c_1 * s.powf(p - 1.0) * (1.0 + tol) } else { norm };
        t.record(coercive.max(growth));
    }
    t
}

fn small_domain(name: &str) -> Result<GridDomain> {
    benchmark_domain(
        name,
        &BenchParams {
            h: 1.0 / 16.0,
            half_extent: 0.5,
            ..Default::default()
        },
    )
}

fn random_data(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    (rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0))
}

fn check_max_principle(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for k in 0..sizes.pde_cases {
        let name = if k % 2 == 0 { "square_with_corner" } else { "slit" };
        let (a, b, c) = random_data(rng);
        let d = match small_domain(name) {
            Ok(d) => d,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        let g = BoundaryData::from_fn("g", move |x, s| c * (a * x[0] + b).sin() * (1.0 - s) + x[1]);
        let ctl = Controls {
            dt: Some(0.02),
            ..Default::default()
        };
        match solve_cauchy_dirichlet(&FluxSpec::prototype(1.8), &d, &g, 0.2, &ctl) {
            Ok(u) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (n, vals) in u.values.iter().enumerate() {
                    for i in 0..u.lattice.len() {
                        if n == 0 || !u.inside[i] {
                            lo = lo.min(vals[i]);
                            hi = hi.max(vals[i]);
                        }
                    }
                }
                let worst = u
                    .values
                    .iter()
                    .flat_map(|v| v.iter().map(|&x| (lo - x).max(x - hi)))
                    .fold(f64::NEG_INFINITY, f64::max);
                t.record(worst - 1e-10);
            }
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_comparison_pairs(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for _ in 0..sizes.pde_cases {
        let (a, b, c) = random_data(rng);
        let bump = rng.gen_range(0.01..0.5);
        let d = match small_domain("square_with_corner") {
            Ok(d) => d,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        let g1 = BoundaryData::from_fn("g1", move |x, s| c * (a * x[0] + b).sin() * (1.0 - s) + x[1] * x[1]);
        let g2 = BoundaryData::from_fn("g2", move |x, s| {
            c * (a * x[0] + b).sin() * (1.0 - s) + x[1] * x[1] + bump * (-10.0 * (x[0] - 0.2).powi(2)).exp()
        });
        let ctl = Controls {
            dt: Some(0.02),
            ..Default::default()
        };
        let spec = FluxSpec::prototype(1.8);
        match (
            solve_cauchy_dirichlet(&spec, &d, &g1, 0.2, &ctl),
            solve_cauchy_dirichlet(&spec, &d, &g2, 0.2, &ctl),
        ) {
            (Ok(u1), Ok(u2)) => match check_comparison(&u2, &u1, 1e-8) {
                Ok(r) => t.record(r.max_violation - r.tolerance),
                Err(e) => t.error(e),
            },
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t
}

fn check_l1_decay(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for _ in 0..sizes.pde_cases {
        let cx = rng.gen_range(-0.2..0.2);
        let amp = rng.gen_range(0.2..2.0);
        let d = match small_domain("full_cube") {
            Ok(d) => d,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        let ctl = Controls {
            dt: Some(0.01),
            initial: Some(Arc::new(move |x, _| amp * (1.0 - 16.0 * ((x[0] - cx).powi(2) + x[1] * x[1])).max(0.0))),
            ..Default::default()
        };
        match solve_cauchy_dirichlet(&FluxSpec::prototype(1.8), &d, &BoundaryData::constant(0.0), 0.1, &ctl) {
            Ok(u) => {
                let mass: Vec<f64> = u.values.iter().map(|v| v.iter().sum::<f64>()).collect();
                let worst = mass.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                t.record(worst - 1e-9 * mass[0]);
            }
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_harnack_constant(rng: &mut ChaCha8Rng, _: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for _ in 0..4 {
        let c = rng.gen_range(0.1..5.0);
        let lat = square_lattice(2, 1.0 / 32.0, 1.0);
        let dt = 2e-4;
        let times: Vec<f64> = (0..=250).map(|k| k as f64 * dt).collect();
        let u = Field {
            inside: (0..lat.len()).map(|i| !lat.on_face(i)).collect(),
            values: vec![vec![c; lat.len()]; times.len()],
            lattice: lat,
            times,
        };
        match (
            weak_harnack_ratio(&u, &[0.0, 0.0], 0.05, 0.0, 0.5, 1.8),
            l1_harnack_gap(&u, &[0.0, 0.0], 0.1, 0.0, 0.05, 1.8),
        ) {
            (Ok(w), Ok(l)) => t.record((1.0 - w.empirical_constant).abs().max(l.empirical_constant - 1.0) - 1e-12),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t
}

fn random_traces(
    rng: &mut ChaCha8Rng,
    sizes: &SuiteSizes,
    fault: Fault,
    constant: bool,
) -> Vec<(ModulusParams, f64, Result<crate::wiener::OscillationTrace>)> {
    (0..sizes.traces)
        .map(|_| {
            let params = ModulusParams {
                dim: rng.gen_range(1..=3),
                p: rng.gen_range(1.05..1.95),
                gamma2: rng.gen_range(1.1..8.0),
                ..Default::default()
            };
            let m = sizes.trace_len;
            let omega_o = rng.gen_range(1e-3..=1.0);
            let (deltas, g): (Vec<f64>, Vec<f64>) = if constant {
                (vec![1.0; m], vec![0.0; m])
            } else {
                (
                    (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect(),
                    (0..m)
                        .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.5) })
                        .collect(),
                )
            };
            let tr = match fault {
                Fault::None => oscillation_iteration(omega_o, &deltas, &g, 1.0, &params),
                Fault::NegateWeights => oscillation_iteration_tampered(omega_o, &deltas, &g, 1.0, &params),
            };
            (params, omega_o, tr)
        })
        .collect()
}

fn check_recursion_monotone(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, fault: Fault) -> Tally {
    let mut t = Tally::new();
    for (_, _, tr) in random_traces(rng, sizes, fault, false) {
        match tr {
            Ok(tr) => t.record(tr.omega.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)),
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_recursion_lower(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, fault: Fault) -> Tally {
    let mut t = Tally::new();
    for (_, _, tr) in random_traces(rng, sizes, fault, false) {
        match tr {
            Ok(tr) => t.record(tr.lower_bound.iter().zip(&tr.omega).map(|(b, w)| b - w).fold(0.0, f64::max)),
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_recursion_product(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, fault: Fault) -> Tally {
    let mut t = Tally::new();
    for (_, _, tr) in random_traces(rng, sizes, fault, false) {
        match tr {
            Ok(tr) => t.record(tr.omega.iter().zip(&tr.product_bound).map(|(w, b)| w - b).fold(0.0, f64::max)),
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_recursion_closed_form(rng: &mut ChaCha8Rng, sizes: &SuiteSizes, fault: Fault) -> Tally {
    let mut t = Tally::new();
    let sub = SuiteSizes {
        traces: sizes.traces.min(100),
        ..*sizes
    };
    for (params, w, tr) in random_traces(rng, &sub, fault, true) {
        match tr {
            Ok(tr) => {
                let lb = params.lambda_bar();
                let worst = tr
                    .omega
                    .iter()
                    .enumerate()
                    .map(|(m, om)| (om - w * lb.powi(m as i32)).abs() / w)
                    .fold(0.0, f64::max);
                t.record(worst - 1e-12);
            }
            Err(e) => t.error(e),
        }
    }
    t
}

fn check_modulus_zero(rng: &mut ChaCha8Rng, _: &SuiteSizes, _: Fault) -> Tally {
    let mut t = Tally::new();
    for _ in 0..20 {
        let w = rng.gen_range(1e-3..=1.0);
        let g = rng.gen_range(0.0..0.5);
        let rho = rng.gen_range(1e-4..0.9);
        let m = ModulusParams::default();
        match modulus_bound(w, &DeltaProfile::Constant(0.0), &|_| g, &[0.0, 0.0], 1.0, rho, &m, 1.0) {
            Ok(b) => t.record((b.bound - (w + 2.0 * g)).abs()),
            Err(e) => t.error(e),
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_injection_is_detected() {
        let sizes = SuiteSizes {
            traces: 50,
            ..SuiteSizes::small()
        };
        let tampered: Vec<LedgerEntry> = [check_recursion_monotone, check_recursion_product]
            .iter()
            .map(|f| f(&mut rng_for(1, 1), &sizes, Fault::NegateWeights).entry("wiener", "x"))
            .collect();
        assert!(tampered.iter().all(|e| !e.pass));
        let honest = check_recursion_product(&mut rng_for(1, 1), &sizes, Fault::None).entry("wiener", "x");
        assert!(honest.pass);
    }
}
