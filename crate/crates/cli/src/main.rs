//! `wlab`: command-line front end for wiener-lab.
//!
//! Exit codes: 0 success, 2 invariant failure, 3 numerical non-convergence, 4 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wiener_lab::capacity::{
    capacity_density_with, is_uniformly_p_fat, p_capacity, parabolic_capacity, CapacityProblem, DensityMode,
    DensityOptions, ParabolicCondenser, Region, TimeSlice,
};
use wiener_lab::experiment::{run_property_suite, run_verification, ExperimentConfig, Fault, SuiteSizes};
use wiener_lab::geometry::{benchmark_domain, make_cylinder, BenchParams, Cube, CylinderKind, GridDomain, BENCHMARK_NAMES};
use wiener_lab::harnack::{
    boundary_l1_harnack_gap, boundary_super_solution, gradient_l1_estimate, l1_harnack_gap, weak_harnack_ratio,
};
use wiener_lab::io::{parse_point, parse_region, read_boundary, read_domain, read_field, write_field, write_table};
use wiener_lab::lattice::Lattice;
use wiener_lab::pde::{solve_cauchy_dirichlet, BoundaryData, Controls, Expression};
use wiener_lab::wiener::{
    classify_wiener_point, holder_exponent, modulus_bound, oscillation_iteration, ClassifierOptions, DeltaProfile,
    ModulusParams,
};
use wiener_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "wlab", version, about = "Boundary estimates for the singular parabolic p-Laplacian")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (JSON) for `verify`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// Benchmark name or domain JSON file.
    #[arg(long)]
    domain: String,
    /// Spacing for benchmark domains.
    #[arg(long, default_value_t = 1.0 / 32.0)]
    h: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Half-edge of a benchmark box.
    #[arg(long, default_value_t = 1.0)]
    half_extent: f64,
    /// Decay rate of the exponential cusp.
    #[arg(long, default_value_t = 0.15)]
    kappa: f64,
    /// Exponent of the power cusp.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
}

impl DomainArgs {
    fn load(&self, p: f64) -> Result<GridDomain> {
        if BENCHMARK_NAMES.contains(&self.domain.as_str()) {
            benchmark_domain(
                &self.domain,
                &BenchParams {
                    dim: self.dim,
                    h: self.h,
                    half_extent: self.half_extent,
                    p,
                    exponent: self.exponent,
                    kappa: self.kappa,
                },
            )
        } else {
            read_domain(Path::new(&self.domain))
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Native,
    Resampled,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Weak,
    L1,
    BoundaryL1,
    Gradient,
}

#[derive(Subcommand)]
enum Command {
    /// Elliptic p-capacity of a condenser.
    Cap {
        /// Restrict the inner set to the complement of this domain.
        #[arg(long)]
        domain: Option<String>,
        /// `cube:c1,c2[,c3]@half` or `ball:c1,c2[,c3]@radius`.
        #[arg(long)]
        inner: String,
        #[arg(long)]
        window: String,
        #[arg(long)]
        p: f64,
        /// Lattice spacing when no domain is given.
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
        /// Write the capacitary potential as CSV.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Parabolic capacity of a time-constant condenser.
    GammaP {
        #[arg(long)]
        inner: String,
        #[arg(long)]
        window: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
        /// Time interval `a,b` during which the inner set is present.
        #[arg(long)]
        times: String,
    },
    /// Capacity density δ(ρ) at a point.
    Delta {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 8)]
        cells: usize,
    },
    /// Uniform p-fatness test over boundary points and dyadic scales.
    Fat {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        gamma_o: f64,
        #[arg(long)]
        rho_o: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        p: f64,
        /// Test only this point.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
    /// Cauchy-Dirichlet solve; writes the field CSV.
    Solve {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        p: f64,
        /// prototype, scalar or u_modulated.
        #[arg(long, default_value = "prototype")]
        flux: String,
        #[arg(long)]
        coefficient: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        c_o: f64,
        #[arg(long, default_value_t = 1.0)]
        c_1: f64,
        #[arg(long, default_value_t = 0.0)]
        lipschitz: f64,
        /// Boundary data JSON file.
        #[arg(long)]
        g: Option<PathBuf>,
        /// Boundary data expression in x, y, z, t.
        #[arg(long)]
        g_expr: Option<String>,
        #[arg(long)]
        initial: Option<String>,
        #[arg(long = "T")]
        t_end: f64,
        /// Time step or `auto`.
        #[arg(long, default_value = "auto")]
        dt: String,
        #[arg(long, default_value_t = 1)]
        store_every: usize,
        /// Field CSV path (default: field.csv in --out).
        #[arg(long = "field")]
        field_out: Option<PathBuf>,
    },
    /// Harnack-type checks on a stored field.
    Harnack {
        #[arg(long)]
        field: PathBuf,
        /// Domain file supplying the inside mask (default: all non-face nodes).
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        s: f64,
        /// End time (all checks except `weak`).
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Truncation level for the boundary checks.
        #[arg(long, allow_hyphen_values = true)]
        level: Option<f64>,
    },
    /// Wiener classification and the oscillation recursion at a boundary point.
    Wiener {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 8)]
        scales: usize,
        #[arg(long, default_value_t = 0.25)]
        r0: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma2: f64,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        omega_o: f64,
        #[arg(long, default_value_t = 8)]
        cells: usize,
    },
    /// Modulus bound for a constant density.
    Modulus {
        #[arg(long)]
        gamma_o: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        omega_o: f64,
        /// Comma-separated scales ρ.
        #[arg(long, default_value = "0.5,0.25,0.125,0.0625,0.03125,0.015625")]
        rho: String,
        #[arg(long, default_value_t = 1.0)]
        r_o: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma2: f64,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        /// Constant boundary oscillation on every reference cylinder.
        #[arg(long, default_value_t = 0.0)]
        g_osc: f64,
    },
    /// End-to-end verification run from --config.
    Verify,
    /// Randomized invariant suite.
    Selftest {
        /// Negate the capacity weights in the recursion.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long, default_value_t = 200)]
        traces: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn path(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.dir {
            Some(d) => {
                fs::create_dir_all(d)?;
                Ok(Some(d.join(name)))
            }
            None => Ok(None),
        }
    }

    /// Prints `v` and, with `--out`, also writes it to `name`.
    fn json(&self, name: &str, v: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v)?;
        println!("{text}");
        if let Some(p) = self.path(name)? {
            fs::write(p, text + "\n")?;
        }
        Ok(())
    }
}

fn density_options(mode: Mode, cells: usize) -> DensityOptions {
    DensityOptions {
        mode: match mode {
            Mode::Native => DensityMode::Native,
            Mode::Resampled => DensityMode::Resampled { cells_per_rho: cells },
            Mode::Auto => DensityMode::Auto { cells_per_rho: cells },
        },
        ..Default::default()
    }
}

fn probe(point: &Option<String>, domain: &GridDomain) -> Result<Vec<f64>> {
    match point {
        Some(s) => parse_point(s),
        None => domain
            .meta
            .probe
            .clone()
            .ok_or_else(|| Error::InvalidArgument("--point is required for this domain".into())),
    }
}

/// Node lattice covering the region's bounding cube plus one layer.
fn lattice_around(window: &Region, h: f64) -> Result<Lattice> {
    let dim = window.dim();
    let half = window.bounding_half_edge();
    let cells = (half / h).ceil() as usize + 1;
    let origin: Vec<f64> = window.center().iter().map(|c| c - cells as f64 * h).collect();
    Lattice::new(dim, h, &origin, &vec![2 * cells + 1; dim])
}

fn region_nodes(lat: &Lattice, r: &Region) -> Vec<usize> {
    let dim = lat.dim;
    (0..lat.len())
        .filter(|&i| {
            let x = &lat.point(i)[..dim];
            match r {
                Region::Cube(c) => c.contains_closed(x),
                Region::Ball { center, radius } => {
                    center.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius * (1.0 + 1e-9)
                }
            }
        })
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let v = parse_point(s)?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Parse(format!("expected 'a,b', got '{s}'"))),
    }
}

fn run(cli: Cli) -> Result<u8> {
    let out = Output {
        dir: cli.global.out.clone(),
    };
    match cli.command {
        Command::Cap {
            domain,
            inner,
            window,
            p,
            h,
            potential,
        } => {
            let inner = parse_region(&inner)?;
            let window = parse_region(&window)?;
            let (lattice, nodes) = match domain {
                Some(d) => {
                    let args = DomainArgs {
                        domain: d,
                        h,
                        dim: window.dim(),
                        half_extent: 1.0,
                        kappa: 0.15,
                        exponent: 1.0,
                    };
                    let e = args.load(p)?;
                    let nodes: Vec<usize> = region_nodes(&e.lattice, &inner).into_iter().filter(|&i| !e.inside[i]).collect();
                    (e.lattice, nodes)
                }
                None => {
                    let lat = lattice_around(&window, h)?;
                    let nodes = region_nodes(&lat, &inner);
                    (lat, nodes)
                }
            };
            let problem = CapacityProblem {
                inner: nodes,
                window,
                p,
                lattice,
            };
            let r = p_capacity(&problem)?;
            if let Some(path) = potential {
                let dim = r.lattice.dim;
                let mut header = vec!["x", "y", "z"][..dim].to_vec();
                header.push("phi");
                let rows: Vec<Vec<String>> = (0..r.lattice.len())
                    .map(|i| {
                        let mut row: Vec<String> = r.lattice.point(i)[..dim].iter().map(|v| v.to_string()).collect();
                        row.push(r.potential[i].to_string());
                        row
                    })
                    .collect();
                write_table(fs::File::create(path)?, &header, &rows)?;
            }
            out.json(
                "cap.json",
                &json!({"value": r.value, "iterations": r.iterations, "residual": r.residual}),
            )?;
            Ok(0)
        }
        Command::GammaP {
            inner,
            window,
            p,
            h,
            times,
        } => {
            let inner = parse_region(&inner)?;
            let window = parse_region(&window)?;
            let (a, b) = parse_pair(&times)?;
            let lattice = lattice_around(&window, h)?;
            let nodes = region_nodes(&lattice, &inner);
            let elliptic = p_capacity(&CapacityProblem {
                inner: nodes.clone(),
                window: window.clone(),
                p,
                lattice: lattice.clone(),
            })?;
            let value = parabolic_capacity(&ParabolicCondenser {
                lattice,
                window,
                time: (a, b),
                slices: vec![TimeSlice { t0: a, t1: b, nodes }],
                p,
            })?;
            out.json(
                "gamma_p.json",
                &json!({"value": value, "elliptic": elliptic.value, "slice_formula": (b - a) * elliptic.value}),
            )?;
            Ok(0)
        }
        Command::Delta {
            domain,
            point,
            rho,
            p,
            mode,
            cells,
        } => {
            let e = domain.load(p)?;
            let x = probe(&point, &e)?;
            let delta = capacity_density_with(&e, &x, rho, p, &density_options(mode, cells))?;
            out.json("delta.json", &json!({"point": x, "rho": rho, "p": p, "delta": delta}))?;
            Ok(0)
        }
        Command::Fat {
            domain,
            gamma_o,
            rho_o,
            levels,
            p,
            point,
            mode,
        } => {
            let e = domain.load(p)?;
            let pts = point.as_deref().map(parse_point).transpose()?.map(|x| vec![x]);
            let report = is_uniformly_p_fat(&e, pts.as_deref(), gamma_o, rho_o, levels, p, &density_options(mode, 8))?;
            out.json("fat.json", &serde_json::to_value(&report)?)?;
            Ok(0)
        }
        Command::Solve {
            domain,
            p,
            flux,
            coefficient,
            c_o,
            c_1,
            lipschitz,
            g,
            g_expr,
            initial,
            t_end,
            dt,
            store_every,
            field_out,
        } => {
            let e = domain.load(p)?;
            let spec = wiener_lab::experiment::FluxConfig {
                kind: flux,
                c_o,
                c_1,
                lipschitz,
                coefficient,
            }
            .build(p)?;
            let data = match (g, g_expr) {
                (Some(path), None) => read_boundary(&path)?,
                (None, Some(expr)) => BoundaryData::from_expr(&expr)?,
                _ => return Err(Error::InvalidArgument("give exactly one of --g and --g-expr".into())),
            };
            let mut controls = Controls {
                store_every,
                ..Default::default()
            };
            if dt != "auto" {
                controls.dt = Some(dt.parse().map_err(|_| Error::Parse(format!("time step '{dt}'")))?);
            }
            if let Some(src) = initial {
                let ex: Expression = src.parse()?;
                controls.initial = Some(Arc::new(move |x, t| ex.eval(x, t)));
            }
            let field = solve_cauchy_dirichlet(&spec, &e, &data, t_end, &controls)?;
            let path = match field_out {
                Some(p) => Some(p),
                None => out.path("field.csv")?,
            };
            if let Some(path) = &path {
                write_field(path, &field)?;
            }
            let last = field.values.last().expect("at least one stored time");
            let (lo, hi) = last
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            out.json(
                "solve.json",
                &json!({
                    "flux": spec.name(),
                    "stored_times": field.times.len(),
                    "t_end": field.times.last(),
                    "min": lo,
                    "max": hi,
                    "field": path.map(|p| p.display().to_string()),
                }),
            )?;
            Ok(0)
        }
        Command::Harnack {
            field,
            domain,
            check,
            point,
            rho,
            s,
            t,
            p,
            c,
            sigma,
            delta,
            level,
        } => {
            let mut u = read_field(&field)?;
            if let Some(d) = domain {
                let e = read_domain(&d)?;
                if e.lattice != u.lattice {
                    return Err(Error::InvalidArgument("domain and field lattices differ".into()));
                }
                u.inside = e.inside;
            }
            let y = parse_point(&point)?;
            let need_t = || t.ok_or_else(|| Error::InvalidArgument("--t is required for this check".into()));
            let boundary_v = |t: f64| -> Result<_> {
                let k = level.ok_or_else(|| Error::InvalidArgument("--level is required for boundary checks".into()))?;
                let q = make_cylinder(Cube::new(&y, 16.0 * rho)?, s, 0.0, (t - s) / (16.0 * rho).powf(p), CylinderKind::Forward, p)?;
                boundary_super_solution(&u, k, &q)
            };
            let report = match check {
                Check::Weak => weak_harnack_ratio(&u, &y, rho, s, c, p)?,
                Check::L1 => l1_harnack_gap(&u, &y, rho, s, need_t()?, p)?,
                Check::BoundaryL1 => {
                    let t = need_t()?;
                    boundary_l1_harnack_gap(&boundary_v(t)?, &y, rho, s, t, p)?
                }
                Check::Gradient => {
                    let t = need_t()?;
                    gradient_l1_estimate(&boundary_v(t)?, &y, rho, sigma, delta, s, t, p)?
                }
            };
            out.json("harnack.json", &serde_json::to_value(&report)?)?;
            Ok(0)
        }
        Command::Wiener {
            domain,
            point,
            p,
            scales,
            r0,
            gamma2,
            nu,
            c,
            omega_o,
            cells,
        } => {
            let e = domain.load(p)?;
            let x = probe(&point, &e)?;
            let opts = ClassifierOptions {
                r0,
                scales,
                gamma2,
                density: density_options(Mode::Auto, cells),
                ..Default::default()
            };
            let class = classify_wiener_point(&e, &x, p, &opts)?;
            let params = ModulusParams {
                dim: e.dim(),
                p,
                gamma2,
                c,
                nu,
            };
            let trace = oscillation_iteration(omega_o, &class.deltas, &vec![0.0; scales], r0, &params)?;
            let rows: Vec<Vec<String>> = (0..trace.steps())
                .map(|j| {
                    vec![
                        j.to_string(),
                        trace.r[j].to_string(),
                        trace.delta[j].to_string(),
                        trace.a[j].to_string(),
                        trace.omega[j + 1].to_string(),
                        trace.branch[j].to_string(),
                    ]
                })
                .collect();
            let header = ["j", "r_j", "delta_j", "A_j", "omega_j", "branch"];
            match out.path("trace.csv")? {
                Some(path) => write_table(fs::File::create(path)?, &header, &rows)?,
                None => write_table(std::io::stderr(), &header, &rows)?,
            }
            let profile = DeltaProfile::steps(class.radii.clone(), class.deltas.clone())?;
            let samples: Vec<Value> = class
                .radii
                .iter()
                .filter(|&&rho| rho < r0)
                .map(|&rho| {
                    modulus_bound(omega_o, &profile, &|_| 0.0, &x, 1.0, rho, &params, r0)
                        .map(|b| json!({"rho": rho, "bound": b.bound, "r": b.r, "r_exceeds_r_o": b.r_exceeds_r_o}))
                })
                .collect::<Result<_>>()?;
            out.json(
                "wiener.json",
                &json!({
                    "classification": class.label.to_string(),
                    "slope": class.slope,
                    "partial_sums": class.partial_sums,
                    "deltas": class.deltas,
                    "modulus_samples": samples,
                    "constants": params,
                }),
            )?;
            Ok(0)
        }
        Command::Modulus {
            gamma_o,
            p,
            dim,
            omega_o,
            rho,
            r_o,
            gamma2,
            nu,
            c,
            g_osc,
        } => {
            let params = ModulusParams { dim, p, gamma2, c, nu };
            let profile = DeltaProfile::Constant(gamma_o);
            let x = vec![0.0; dim];
            let rows: Vec<Value> = parse_point(&rho)?
                .into_iter()
                .map(|r| {
                    modulus_bound(omega_o, &profile, &|_| g_osc, &x, 0.0, r, &params, r_o).map(|b| {
                        json!({"rho": r, "bound": b.bound, "decay_term": b.decay_term,
                               "boundary_term": b.boundary_term, "r": b.r, "r_exceeds_r_o": b.r_exceeds_r_o})
                    })
                })
                .collect::<Result<_>>()?;
            out.json(
                "modulus.json",
                &json!({
                    "beta": holder_exponent(gamma_o, &params)?,
                    "alpha": params.alpha(),
                    "gamma": params.gamma(),
                    "lambda_bar": params.lambda_bar(),
                    "samples": rows,
                }),
            )?;
            Ok(0)
        }
        Command::Verify => {
            let mut config: ExperimentConfig = match &cli.global.config {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => ExperimentConfig::default(),
            };
            config.seed = cli.global.seed;
            let report = run_verification(&config)?;
            eprintln!("runtime: {:.2} s", report.runtime_seconds);
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    [r.rho, r.delta, r.a, r.bound, r.measured, r.r_ref]
                        .iter()
                        .map(|v| v.to_string())
                        .collect()
                })
                .collect();
            if let Some(path) = out.path("scales.csv")? {
                write_table(fs::File::create(path)?, &["rho", "delta", "A", "bound", "measured", "r_ref"], &rows)?;
            }
            out.json("report.json", &serde_json::to_value(&report)?)?;
            Ok(match (&report.failure, report.pass) {
                (Some(_), _) => 3,
                (None, true) => 0,
                (None, false) => 2,
            })
        }
        Command::Selftest { inject_fault, traces } => {
            let sizes = SuiteSizes {
                traces,
                ..SuiteSizes::small()
            };
            let fault = if inject_fault { Fault::NegateWeights } else { Fault::None };
            let ledger = run_property_suite(cli.global.seed, &sizes, fault);
            out.json("ledger.json", &serde_json::to_value(&ledger)?)?;
            Ok(ledger.exit_code() as u8)
        }
    }
}
