//! Cubes, space-time cylinders, rasterised domains and the benchmark domain library.
//!
//! Cubes are axis-parallel and parametrised by their half-edge, so `K_ρ(y)`
//! is `Cube::new(y, ρ)`. A [`GridDomain`] marks the lattice nodes of the
//! open set `E`; a node belongs to `E` iff its position lies in the analytic
//! description, and nodes on the faces of the bounding box never do.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, GEOM_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub half_edge: f64,
}

impl Cube {
    pub fn new(center: &[f64], half_edge: f64) -> Result<Self> {
        if !(half_edge > 0.0 && half_edge.is_finite()) {
            return Err(Error::invalid(format!("cube half-edge {half_edge} must be positive")));
        }
        if center.is_empty() || center.len() > 3 {
            return Err(Error::invalid("cube center must have 1 to 3 coordinates"));
        }
        Ok(Cube {
            center: center.to_vec(),
            half_edge,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `K_{aρ}(y)` from `K_ρ(y)`.
    pub fn scaled(&self, a: f64) -> Cube {
        Cube {
            center: self.center.clone(),
            half_edge: a * self.half_edge,
        }
    }

    fn cheb(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c).abs())
            .fold(0.0, f64::max)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.cheb(x) <= self.half_edge * (1.0 + GEOM_TOL)
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        self.cheb(x) < self.half_edge * (1.0 - GEOM_TOL)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        self.cheb(&other.center) + other.half_edge <= self.half_edge * (1.0 + GEOM_TOL)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_edge).powi(self.dim() as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CylinderKind {
    Forward,
    Backward,
    Centered,
}

/// `K × (s − θ₁ρ^p, s + θ₂ρ^p]` with `ρ` the half-edge of the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub base: Cube,
    pub t_ref: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub kind: CylinderKind,
    pub p: f64,
}

impl Cylinder {
    pub fn t_lo(&self) -> f64 {
        self.t_ref - self.theta1 * self.base.half_edge.powf(self.p)
    }

    pub fn t_hi(&self) -> f64 {
        self.t_ref + self.theta2 * self.base.half_edge.powf(self.p)
    }

    pub fn contains_time(&self, t: f64) -> bool {
        let slack = 1e-12 * (1.0 + t.abs());
        t >= self.t_lo() - slack && t <= self.t_hi() + slack
    }

    pub fn contains(&self, other: &Cylinder) -> bool {
        let slack = 1e-12 * (1.0 + self.t_ref.abs());
        self.base.contains_cube(&other.base)
            && other.t_lo() >= self.t_lo() - slack
            && other.t_hi() <= self.t_hi() + slack
    }

    /// Parabolic diameter `max(spatial diameter, time extent^{1/p})`.
    pub fn diameter(&self) -> f64 {
        let space = 2.0 * self.base.half_edge * (self.base.dim() as f64).sqrt();
        let time = (self.t_hi() - self.t_lo()).max(0.0).powf(1.0 / self.p);
        space.max(time)
    }
}

pub fn make_cylinder(base: Cube, s: f64, theta1: f64, theta2: f64, kind: CylinderKind, p: f64) -> Result<Cylinder> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("exponent p = {p} must exceed 1")));
    }
    if theta1 < 0.0 || theta2 < 0.0 || !theta1.is_finite() || !theta2.is_finite() {
        return Err(Error::invalid("time coefficients must be finite and nonnegative"));
    }
    let ok = match kind {
        CylinderKind::Forward => theta1 == 0.0 && theta2 > 0.0,
        CylinderKind::Backward => theta2 == 0.0 && theta1 > 0.0,
        CylinderKind::Centered => theta1 > 0.0 && theta2 > 0.0,
    };
    if !ok {
        return Err(Error::invalid(format!(
            "coefficients θ₁ = {theta1}, θ₂ = {theta2} inconsistent with {kind:?} cylinder"
        )));
    }
    Ok(Cylinder {
        base,
        t_ref: s,
        theta1,
        theta2,
        kind,
        p,
    })
}

/// The intrinsic family `Q̃_j = K_{2r_j}(x_o) × [t_o − (c/4)ω_{j−1}^{2−p}·2(2r_j)^p, t_o + (c/4)ω_{j−1}^{2−p}(2r_j)^p]`,
/// `r_j = R_o/2^j`, for `j = 1..=ω.len()`.
pub fn nested_cylinders(x_o: &[f64], t_o: f64, r_o: f64, omega: &[f64], c: f64, p: f64) -> Result<Vec<Cylinder>> {
    if !(r_o > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("R_o and c must be positive"));
    }
    if omega.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("oscillations must be positive"));
    }
    if omega.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("oscillation sequence must be nonincreasing"));
    }
    omega
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let j = i + 1;
            let r = r_o / 2f64.powi(j as i32);
            let theta2 = 0.25 * c * w.powf(2.0 - p);
            make_cylinder(Cube::new(x_o, 2.0 * r)?, t_o, 2.0 * theta2, theta2, CylinderKind::Centered, p)
        })
        .collect()
}

/// Structural data of the operator family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralData {
    pub p: f64,
    pub dim: usize,
    pub c_o: f64,
    pub c_1: f64,
    pub lipschitz: f64,
}

impl StructuralData {
    pub fn new(p: f64, dim: usize, c_o: f64, c_1: f64, lipschitz: f64) -> Result<Self> {
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::invalid(format!("p = {p} outside the singular range (1, 2)")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not supported")));
        }
        if !(c_o > 0.0 && c_o <= c_1) {
            return Err(Error::invalid("ellipticity constants must satisfy 0 < C_o <= C_1"));
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::invalid("Lipschitz constant must be nonnegative"));
        }
        Ok(StructuralData { p, dim, c_o, c_1, lipschitz })
    }

    /// `λ = N(p − 2) + p`.
    pub fn lambda(&self) -> f64 {
        harnack_lambda(self.dim, self.p)
    }

    pub fn supercritical(&self) -> bool {
        self.p > 2.0 * self.dim as f64 / (self.dim as f64 + 1.0)
    }

    /// Errors unless `2N/(N+1) < p < 2`, the range in which the Harnack-type estimates apply.
    pub fn require_supercritical(&self) -> Result<()> {
        if self.supercritical() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "p = {} not in the supercritical range ({}, 2) for N = {}",
                self.p,
                2.0 * self.dim as f64 / (self.dim as f64 + 1.0),
                self.dim
            )))
        }
    }
}

pub fn harnack_lambda(dim: usize, p: f64) -> f64 {
    dim as f64 * (p - 2.0) + p
}

/// Where the probe point sits relative to the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// The probe is a lattice node.
    Node,
    /// The probe is a cell center (half a spacing off every axis).
    Cell,
}

/// Analytic description of `E` near the probe point `origin`, intersected with an open box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    FullCube,
    HalfSpace,
    /// `E = {x : x_k > o_k ∀k}`: a cube whose corner is the probe.
    SquareWithCorner,
    /// Complement `{x_0 ≥ o_0, x_1 = o_1}`.
    Slit,
    /// Complement `{x_0 ≥ o_0, |x' − o'|_∞ ≤ (x_0 − o_0)^q}`.
    PowerCusp { exponent: f64 },
    /// Complement `{x_0 ≥ o_0, |x' − o'|_∞ ≤ t·exp(−κ/t)}`, `t = x_0 − o_0`.
    ExponentialCusp { kappa: f64 },
    /// Complement: alternating half-shells `2^{-j-1} < |x − o|_∞ ≤ 2^{-j}`.
    CheckerFat,
    /// Complement `{o}`.
    PointHole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub origin: Vec<f64>,
    /// `E` is contained in this open box.
    pub bbox: Cube,
}

impl Shape {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Whether `x` belongs to `E`.
    pub fn contains(&self, x: &[f64]) -> bool {
        if !self.bbox.contains_open(x) {
            return false;
        }
        let o = &self.origin;
        let n = self.dim();
        let scale = self.bbox.half_edge;
        let thin = 1e-9 * scale;
        let rel: Vec<f64> = (0..n).map(|k| x[k] - o[k]).collect();
        let transverse = || rel[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match &self.kind {
            ShapeKind::FullCube => true,
            ShapeKind::HalfSpace => rel[0] > thin,
            ShapeKind::SquareWithCorner => rel.iter().all(|v| *v > thin),
            ShapeKind::Slit => {
                if n == 1 {
                    rel[0] < -thin
                } else {
                    !(rel[0] >= -thin && rel[1].abs() <= thin)
                }
            }
            ShapeKind::PowerCusp { exponent } => {
                let t = rel[0];
                if t < -thin {
                    return true;
                }
                if n == 1 {
                    return false;
                }
                transverse() > t.max(0.0).powf(*exponent) + thin
            }
            ShapeKind::ExponentialCusp { kappa } => {
                let t = rel[0];
                if t < -thin {
                    return true;
                }
                if n == 1 {
                    return false;
                }
                let w = if t > 0.0 { t * (-kappa / t).exp() } else { 0.0 };
                transverse() > w + thin
            }
            ShapeKind::CheckerFat => {
                let r = rel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if r <= thin {
                    return false;
                }
                let shell = (-(r / scale).log2()).floor() as i64;
                let in_complement = if shell.rem_euclid(2) == 0 { rel[0] >= 0.0 } else { rel[0] <= 0.0 };
                !in_complement
            }
            ShapeKind::PointHole => rel.iter().any(|v| v.abs() > thin),
        }
    }

    /// Dimension of the measure-zero part of the complement touching the probe, if any.
    pub fn thin_dimension(&self) -> Option<usize> {
        let n = self.dim();
        match self.kind {
            ShapeKind::Slit => Some(n - 1),
            ShapeKind::PowerCusp { exponent } if exponent > 1.0 => Some(1),
            ShapeKind::ExponentialCusp { .. } => Some(1),
            ShapeKind::PointHole => Some(0),
            _ => None,
        }
    }

    /// Lattice phase for resampling around the probe: measure-zero pieces are
    /// placed on nodes exactly when their dimension exceeds `N − p`, i.e. when
    /// they carry positive p-capacity.
    pub fn phase_for(&self, p: f64) -> Phase {
        match (&self.kind, self.thin_dimension()) {
            (ShapeKind::FullCube, _) => Phase::Node,
            (_, Some(d)) if d as f64 > self.dim() as f64 - p => Phase::Node,
            _ => Phase::Cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DomainMeta {
    pub name: String,
    pub probe: Option<Vec<f64>>,
    /// Complement uniformly p-fat at the probe by construction.
    pub complement_uniformly_fat: Option<bool>,
    pub positive_geometric_density: Option<bool>,
}

/// Rasterised open set on a uniform lattice covering its bounding cube.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    pub lattice: Lattice,
    pub bbox: Cube,
    pub inside: Vec<bool>,
    pub shape: Option<Shape>,
    pub meta: DomainMeta,
}

fn lattice_for_bbox(dim: usize, h: f64, bbox: &Cube) -> Result<Lattice> {
    if bbox.dim() != dim {
        return Err(Error::invalid("bounding box dimension mismatch"));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("lattice spacing must be positive"));
    }
    let cells = 2.0 * bbox.half_edge / h;
    let n = cells.round();
    if (cells - n).abs() > 1e-6 || n < 2.0 {
        return Err(Error::invalid(format!(
            "bounding box edge {} is not a multiple of h = {h}",
            2.0 * bbox.half_edge
        )));
    }
    let origin: Vec<f64> = bbox.center.iter().map(|c| c - bbox.half_edge).collect();
    Lattice::new(dim, h, &origin, &vec![n as usize + 1; dim])
}

impl GridDomain {
    pub fn new(dim: usize, h: f64, bbox: Cube, inside: Vec<bool>) -> Result<Self> {
        let lattice = lattice_for_bbox(dim, h, &bbox)?;
        if inside.len() != lattice.len() {
            return Err(Error::invalid(format!(
                "inside mask has {} entries, lattice has {}",
                inside.len(),
                lattice.len()
            )));
        }
        if (0..lattice.len()).any(|i| inside[i] && lattice.on_face(i)) {
            return Err(Error::invalid("nodes on the bounding box faces cannot belong to E"));
        }
        Ok(GridDomain {
            lattice,
            bbox,
            inside,
            shape: None,
            meta: DomainMeta::default(),
        })
    }

    pub fn from_shape(shape: Shape, h: f64) -> Result<Self> {
        let dim = shape.dim();
        let bbox = shape.bbox.clone();
        let lattice = lattice_for_bbox(dim, h, &bbox)?;
        let inside = (0..lattice.len())
            .map(|i| !lattice.on_face(i) && shape.contains(&lattice.point(i)[..dim]))
            .collect();
        Ok(GridDomain {
            lattice,
            bbox,
            inside,
            shape: Some(shape),
            meta: DomainMeta::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.lattice.point(idx)[..self.dim()].to_vec()
    }

    /// Removes the nodes nearest to the given points from `E` (drops the analytic shape).
    pub fn with_removed_points(mut self, points: &[Vec<f64>]) -> Result<Self> {
        for x in points {
            let idx = self.nearest_node(x)?;
            self.inside[idx] = false;
        }
        self.shape = None;
        Ok(self)
    }

    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        let mut c = [0usize; 3];
        for k in 0..self.dim() {
            let f = self.lattice.fractional_index(x[k], k).round();
            if f < 0.0 || f > (self.lattice.shape[k] - 1) as f64 {
                return Err(Error::Geometry(format!("point {x:?} outside the lattice")));
            }
            c[k] = f as usize;
        }
        Ok(self.lattice.index(c))
    }

    /// Lattice nodes of the closed cube.
    pub fn nodes_in_cube(&self, k: &Cube) -> Vec<usize> {
        self.lattice
            .box_range(&k.center, k.half_edge, false)
            .map(|r| self.lattice.nodes_in_range(r))
            .unwrap_or_default()
    }

    /// Complement nodes with a face neighbour in `E` (the discrete lateral boundary).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.lattice.len())
            .filter(|&i| !self.inside[i] && self.lattice.neighbors(i).any(|j| self.inside[j]))
            .collect()
    }

    pub fn covers(&self, k: &Cube) -> bool {
        self.lattice.covers_cube(&k.center, k.half_edge)
    }
}

/// Nodes of the closed cube `K` not marked inside `E`: the compact set `K \ E`.
pub fn rasterize_cube_difference(k: &Cube, e: &GridDomain) -> Result<Vec<usize>> {
    if k.dim() != e.dim() {
        return Err(Error::invalid("cube dimension does not match the domain"));
    }
    if !e.covers(k) {
        return Err(Error::Geometry("cube not inside the bounding box".into()));
    }
    Ok(e.nodes_in_cube(k).into_iter().filter(|&i| !e.inside[i]).collect())
}

/// Multiplies all geometry by `s` keeping the node pattern; `s` must be a power of two.
pub fn scale_domain(d: &GridDomain, s: f64) -> Result<GridDomain> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale factor {s} must be positive")));
    }
    let k = s.log2().round();
    if (s - 2f64.powi(k as i32)).abs() > 0.0 {
        return Err(Error::invalid(format!("scale factor {s} is not commensurate with dyadic lattices")));
    }
    let bbox = Cube {
        center: d.bbox.center.iter().map(|c| c * s).collect(),
        half_edge: d.bbox.half_edge * s,
    };
    let mut out = GridDomain::new(d.dim(), d.h() * s, bbox, d.inside.clone())?;
    out.shape = d.shape.as_ref().and_then(|sh| {
        let kind = match &sh.kind {
            // These profiles are not dilation invariant; only the raster is kept.
            ShapeKind::ExponentialCusp { .. } => return None,
            ShapeKind::PowerCusp { exponent } if *exponent != 1.0 => return None,
            other => other.clone(),
        };
        Some(Shape {
            kind,
            origin: sh.origin.iter().map(|c| c * s).collect(),
            bbox: Cube {
                center: sh.bbox.center.iter().map(|c| c * s).collect(),
                half_edge: sh.bbox.half_edge * s,
            },
        })
    });
    out.meta = d.meta.clone();
    if let Some(pr) = &mut out.meta.probe {
        pr.iter_mut().for_each(|c| *c *= s);
    }
    Ok(out)
}

/// Parameters for [`benchmark_domain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchParams {
    pub dim: usize,
    pub h: f64,
    /// Half-edge of the box around the probe (before the half-cell shift of cell-phased lattices).
    pub half_extent: f64,
    /// Exponent used by the phase rule for measure-zero complements.
    pub p: f64,
    pub exponent: f64,
    pub kappa: f64,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            dim: 2,
            h: 1.0 / 32.0,
            half_extent: 1.0,
            p: 1.8,
            exponent: 1.0,
            kappa: 0.15,
        }
    }
}

pub const BENCHMARK_NAMES: [&str; 8] = [
    "full_cube",
    "half_space",
    "square_with_corner",
    "slit",
    "power_cusp",
    "exponential_cusp",
    "checker_fat",
    "point_hole",
];

/// Builds a benchmark domain with the probe point at the origin.
pub fn benchmark_shape(name: &str, params: &BenchParams) -> Result<Shape> {
    let dim = params.dim;
    if !(1..=3).contains(&dim) {
        return Err(Error::invalid(format!("dimension {dim} not supported")));
    }
    let kind = match name {
        "full_cube" => ShapeKind::FullCube,
        "half_space" => ShapeKind::HalfSpace,
        "square_with_corner" => ShapeKind::SquareWithCorner,
        "slit" => ShapeKind::Slit,
        "power_cusp" => ShapeKind::PowerCusp { exponent: params.exponent },
        "exponential_cusp" => ShapeKind::ExponentialCusp { kappa: params.kappa },
        "checker_fat" => ShapeKind::CheckerFat,
        "point_hole" => ShapeKind::PointHole,
        other => {
            return Err(Error::invalid(format!(
                "unknown benchmark domain '{other}' (expected one of {})",
                BENCHMARK_NAMES.join(", ")
            )))
        }
    };
    let origin = vec![0.0; dim];
    let mut shape = Shape {
        kind,
        origin: origin.clone(),
        bbox: Cube::new(&origin, params.half_extent)?,
    };
    if shape.phase_for(params.p) == Phase::Cell {
        shape.bbox.half_edge += 0.5 * params.h;
    }
    Ok(shape)
}

pub fn benchmark_domain(name: &str, params: &BenchParams) -> Result<GridDomain> {
    let shape = benchmark_shape(name, params)?;
    let dim = params.dim;
    let thin_positive = shape
        .thin_dimension()
        .map(|d| d as f64 > dim as f64 - params.p);
    let (fat, density) = match &shape.kind {
        ShapeKind::FullCube | ShapeKind::HalfSpace | ShapeKind::SquareWithCorner | ShapeKind::CheckerFat => {
            (true, true)
        }
        ShapeKind::PowerCusp { exponent } if *exponent <= 1.0 => (true, true),
        _ => (thin_positive.unwrap_or(false), false),
    };
    let mut d = GridDomain::from_shape(shape, params.h)?;
    d.meta = DomainMeta {
        name: name.to_string(),
        probe: Some(vec![0.0; dim]),
        complement_uniformly_fat: Some(fat),
        positive_geometric_density: Some(density),
    };
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_time_intervals() {
        let k = Cube::new(&[0.0], 1.0).unwrap();
        let c = make_cylinder(k.clone(), 0.0, 0.0, 1.0, CylinderKind::Forward, 1.5).unwrap();
        assert_eq!((c.t_lo(), c.t_hi()), (0.0, 1.0));
        let c = make_cylinder(Cube::new(&[0.0], 2.0).unwrap(), 0.0, 1.0, 0.0, CylinderKind::Backward, 1.5).unwrap();
        assert!((c.t_lo() + 2f64.powf(1.5)).abs() < 1e-15);
        assert!((c.t_lo() + 2.8284).abs() < 1e-4);
        assert_eq!(c.t_hi(), 0.0);
        let c = make_cylinder(k.clone(), 5.0, 2.0, 1.0, CylinderKind::Centered, 1.8).unwrap();
        assert_eq!((c.t_lo(), c.t_hi()), (3.0, 6.0));
        assert!(make_cylinder(k.clone(), 0.0, 1.0, 1.0, CylinderKind::Forward, 1.5).is_err());
        assert!(make_cylinder(k, 0.0, 0.0, 1.0, CylinderKind::Centered, 1.5).is_err());
    }

    #[test]
    fn nested_cylinder_examples() {
        let cyl = nested_cylinders(&[0.0, 0.0], 0.0, 1.0, &[1.0], 1.0, 1.8).unwrap();
        assert_eq!(cyl[0].base.half_edge, 1.0);
        assert!((cyl[0].t_lo() + 0.5).abs() < 1e-15);
        assert!((cyl[0].t_hi() - 0.25).abs() < 1e-15);

        let ones = vec![1.0; 6];
        let cyl = nested_cylinders(&[0.0], 0.0, 1.0, &ones, 0.7, 1.6).unwrap();
        for w in cyl.windows(2) {
            let ratio = (w[0].t_hi() - w[0].t_ref) / (w[1].t_hi() - w[1].t_ref);
            assert!((ratio - 2f64.powf(1.6)).abs() < 1e-12);
        }

        let omega: Vec<f64> = (0..=10).map(|j| 0.875f64.powi(j)).collect();
        let cyl = nested_cylinders(&[0.0, 0.0], 0.0, 1.0, &omega, 0.5, 1.8).unwrap();
        for w in cyl.windows(2) {
            assert!(w[0].contains(&w[1]));
        }
        assert!(nested_cylinders(&[0.0], 0.0, 1.0, &[0.5, 0.6], 0.5, 1.8).is_err());
    }

    #[test]
    fn half_space_density_is_exactly_half() {
        let d = benchmark_domain("half_space", &BenchParams { h: 1.0 / 16.0, ..Default::default() }).unwrap();
        for rho in [0.25, 0.5] {
            let nodes = d.nodes_in_cube(&Cube::new(&[0.0, 0.0], rho).unwrap());
            let inside = nodes.iter().filter(|&&i| d.inside[i]).count();
            assert_eq!(2 * inside, nodes.len());
        }
    }

    #[test]
    fn cube_difference_cases() {
        let params = BenchParams { h: 0.125, ..Default::default() };
        let full = benchmark_domain("full_cube", &params).unwrap();
        let k = Cube::new(&[0.0, 0.0], 0.5).unwrap();
        assert!(rasterize_cube_difference(&k, &full).unwrap().is_empty());
        let empty = GridDomain::new(2, 0.125, full.bbox.clone(), vec![false; full.lattice.len()]).unwrap();
        assert_eq!(rasterize_cube_difference(&k, &empty).unwrap().len(), 81);
        // Node-phased half-space through the center of K: the middle column stays in the complement.
        let mut hs = empty.clone();
        for i in 0..hs.lattice.len() {
            hs.inside[i] = !hs.lattice.on_face(i) && hs.point(i)[0] > 1e-12;
        }
        let n = rasterize_cube_difference(&k, &hs).unwrap().len();
        assert_eq!(n, 45);
        assert!((n as f64 - 81.0 / 2.0).abs() <= 9.0);
        let far = Cube::new(&[5.0, 0.0], 0.5).unwrap();
        assert!(rasterize_cube_difference(&far, &hs).is_err());
    }

    #[test]
    fn scale_domain_roundtrip_and_errors() {
        let d = benchmark_domain("square_with_corner", &BenchParams::default()).unwrap();
        let up = scale_domain(&d, 2.0).unwrap();
        assert_eq!(up.inside, d.inside);
        assert_eq!(up.h(), 2.0 * d.h());
        let back = scale_domain(&up, 0.5).unwrap();
        assert_eq!(back, d);
        assert_eq!(scale_domain(&d, 1.0).unwrap(), d);
        assert!(scale_domain(&d, 3.0).is_err());
    }

    #[test]
    fn unknown_benchmark_rejected() {
        assert!(benchmark_domain("moebius", &BenchParams::default()).is_err());
    }

    #[test]
    fn phase_rule() {
        let p2 = BenchParams::default();
        let p3 = BenchParams { dim: 3, ..Default::default() };
        assert_eq!(benchmark_shape("slit", &p2).unwrap().phase_for(1.8), Phase::Node);
        assert_eq!(benchmark_shape("exponential_cusp", &p2).unwrap().phase_for(1.8), Phase::Node);
        assert_eq!(benchmark_shape("exponential_cusp", &p3).unwrap().phase_for(1.8), Phase::Cell);
        assert_eq!(benchmark_shape("point_hole", &p2).unwrap().phase_for(1.8), Phase::Cell);
        assert_eq!(benchmark_shape("half_space", &p2).unwrap().phase_for(1.8), Phase::Cell);
    }

    #[test]
    fn supercritical_lambda() {
        for dim in 1..=3 {
            let lo = 2.0 * dim as f64 / (dim as f64 + 1.0);
            for k in 1..20 {
                let p = lo + (2.0 - lo) * k as f64 / 20.0;
                if p <= 1.0 {
                    continue;
                }
                let s = StructuralData::new(p, dim, 1.0, 1.0, 0.0).unwrap();
                assert!(s.supercritical() && s.lambda() > 0.0);
            }
        }
    }
}
