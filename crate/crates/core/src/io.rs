//! File formats: domain JSON, field CSV, boundary-data JSON and the cube syntax.
//!
//! Domain files hold `{"n", "h", "bbox", "inside"}` where `n` is the number of
//! nodes per axis, `bbox` is `[center..., half_edge]` and `inside` is a list of
//! run lengths of alternating `false`/`true` nodes, starting with `false`, in
//! index order (axis 0 fastest).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::Region;
use crate::error::{Error, Result};
use crate::geometry::{Cube, GridDomain};
use crate::lattice::Lattice;
use crate::pde::{BoundaryData, Field};

pub fn encode_rle(bits: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &b in bits {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn decode_rle(runs: &[usize], len: usize) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(len);
    for (k, &r) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat(k % 2 == 1).take(r));
    }
    if bits.len() != len {
        return Err(Error::Parse(format!("run lengths cover {} nodes, expected {len}", bits.len())));
    }
    Ok(bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    pub n: usize,
    pub h: f64,
    pub bbox: Vec<f64>,
    pub inside: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Vec<f64>>,
}

impl DomainFile {
    pub fn from_domain(d: &GridDomain) -> Self {
        let mut bbox = d.bbox.center.clone();
        bbox.push(d.bbox.half_edge);
        DomainFile {
            n: d.lattice.shape[0],
            h: d.h(),
            bbox,
            inside: encode_rle(&d.inside),
            name: (!d.meta.name.is_empty()).then(|| d.meta.name.clone()),
            probe: d.meta.probe.clone(),
        }
    }

    pub fn to_domain(&self) -> Result<GridDomain> {
        if !(2..=4).contains(&self.bbox.len()) {
            return Err(Error::Parse("bbox must be [center..., half_edge] in 1 to 3 dimensions".into()));
        }
        let dim = self.bbox.len() - 1;
        let bbox = Cube::new(&self.bbox[..dim], self.bbox[dim])?;
        let len = self.n.pow(dim as u32);
        let inside = decode_rle(&self.inside, len)?;
        let mut d = GridDomain::new(dim, self.h, bbox, inside)?;
        if d.lattice.shape[0] != self.n {
            return Err(Error::Parse(format!(
                "n = {} disagrees with bbox and h ({} nodes per axis)",
                self.n, d.lattice.shape[0]
            )));
        }
        d.meta.name = self.name.clone().unwrap_or_default();
        d.meta.probe = self.probe.clone();
        Ok(d)
    }
}

pub fn domain_to_json(d: &GridDomain) -> Result<String> {
    Ok(serde_json::to_string(&DomainFile::from_domain(d))?)
}

pub fn domain_from_json(s: &str) -> Result<GridDomain> {
    let f: DomainFile = serde_json::from_str(s)?;
    f.to_domain()
}

pub fn read_domain(path: &Path) -> Result<GridDomain> {
    domain_from_json(&fs::read_to_string(path)?)
}

pub fn write_domain(path: &Path, d: &GridDomain) -> Result<()> {
    fs::write(path, domain_to_json(d)?)?;
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("'{v}' is not a number")))
        })
        .collect()
}

/// Parses `cube:c1,c2[,c3]@half`.
pub fn parse_cube(s: &str) -> Result<Cube> {
    let body = s
        .strip_prefix("cube:")
        .ok_or_else(|| Error::Parse(format!("'{s}' does not start with 'cube:'")))?;
    let (c, half) = body
        .split_once('@')
        .ok_or_else(|| Error::Parse(format!("'{s}' lacks '@half_edge'")))?;
    let center = parse_list(c)?;
    let half: f64 = half
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("half edge '{half}' is not a number")))?;
    Cube::new(&center, half)
}

/// Parses `cube:...@half` or `ball:c1,c2[,c3]@radius`.
pub fn parse_region(s: &str) -> Result<Region> {
    if let Some(body) = s.strip_prefix("ball:") {
        let (c, r) = body
            .split_once('@')
            .ok_or_else(|| Error::Parse(format!("'{s}' lacks '@radius'")))?;
        let radius: f64 = r
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("radius '{r}' is not a number")))?;
        if !(radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        return Ok(Region::Ball {
            center: parse_list(c)?,
            radius,
        });
    }
    Ok(Region::Cube(parse_cube(s)?))
}

pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    parse_list(s)
}

pub fn format_cube(k: &Cube) -> String {
    let c: Vec<String> = k.center.iter().map(|v| v.to_string()).collect();
    format!("cube:{}@{}", c.join(","), k.half_edge)
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn write_field_csv(field: &Field, mut w: impl Write) -> Result<()> {
    let dim = field.dim();
    let mut header = vec!["t"];
    header.extend(&AXES[..dim]);
    header.push("u");
    writeln!(w, "{}", header.join(","))?;
    let points: Vec<Vec<f64>> = (0..field.lattice.len()).map(|i| field.point(i)).collect();
    for (t, vals) in field.times.iter().zip(&field.values) {
        for (x, u) in points.iter().zip(vals) {
            write!(w, "{t}")?;
            for c in x {
                write!(w, ",{c}")?;
            }
            writeln!(w, ",{u}")?;
        }
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; nodes off the lattice faces are marked inside.
pub fn read_field_csv(r: impl Read) -> Result<Field> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let dim = cols.len().saturating_sub(2);
    if !(1..=3).contains(&dim) || cols[0] != "t" || cols[dim + 1] != "u" || cols[1..=dim] != AXES[..dim] {
        return Err(Error::Parse(format!("unexpected field header '{header}'")));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_list(&line).map_err(|e| Error::Parse(format!("line {}: {e}", k + 2)))?;
        if row.len() != dim + 2 {
            return Err(Error::Parse(format!("line {} has {} columns", k + 2, row.len())));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("field file has no rows".into()));
    }
    let mut times: Vec<f64> = Vec::new();
    for r in &rows {
        if times.last() != Some(&r[0]) {
            times.push(r[0]);
        }
    }
    let per_time = rows.len() / times.len();
    if per_time * times.len() != rows.len() {
        return Err(Error::Parse("every time must list the same nodes".into()));
    }
    let first = &rows[..per_time];
    let mut origin = vec![0.0; dim];
    let mut extent = vec![0.0; dim];
    for k in 0..dim {
        origin[k] = first.iter().map(|r| r[k + 1]).fold(f64::INFINITY, f64::min);
        extent[k] = first.iter().map(|r| r[k + 1]).fold(f64::NEG_INFINITY, f64::max) - origin[k];
    }
    let h = if per_time > 1 { (first[1][1] - first[0][1]).abs() } else { 0.0 };
    if !(h > 0.0) {
        return Err(Error::Parse("cannot infer the lattice spacing".into()));
    }
    let shape: Vec<usize> = extent.iter().map(|e| (e / h).round() as usize + 1).collect();
    let lattice = Lattice::new(dim, h, &origin, &shape)?;
    if lattice.len() != per_time {
        return Err(Error::Parse(format!(
            "{} nodes per time do not form a {:?} lattice",
            per_time, shape
        )));
    }
    let values: Vec<Vec<f64>> = rows.chunks(per_time).map(|c| c.iter().map(|r| r[dim + 1]).collect()).collect();
    for (n, chunk) in rows.chunks(per_time).enumerate() {
        if chunk.iter().any(|r| r[0] != times[n]) {
            return Err(Error::Parse("rows of one time must be contiguous".into()));
        }
    }
    let inside = (0..lattice.len()).map(|i| !lattice.on_face(i)).collect();
    Ok(Field {
        lattice,
        inside,
        times,
        values,
    })
}

pub fn read_field(path: &Path) -> Result<Field> {
    read_field_csv(fs::File::open(path)?)
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_field_csv(field, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Boundary data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryFile {
    Expr {
        expr: String,
    },
    /// Node values on the lattice of `bbox` and `h`, one array per time.
    Sampled {
        h: f64,
        bbox: Vec<f64>,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl BoundaryFile {
    pub fn to_data(&self) -> Result<BoundaryData> {
        match self {
            BoundaryFile::Expr { expr } => BoundaryData::from_expr(expr),
            BoundaryFile::Sampled { h, bbox, times, values } => {
                if !(2..=4).contains(&bbox.len()) {
                    return Err(Error::Parse("bbox must be [center..., half_edge]".into()));
                }
                let dim = bbox.len() - 1;
                let half = bbox[dim];
                let n = (2.0 * half / h).round() as usize + 1;
                let origin: Vec<f64> = bbox[..dim].iter().map(|c| c - half).collect();
                let lattice = Lattice::new(dim, *h, &origin, &vec![n; dim])?;
                BoundaryData::sampled(lattice, times.clone(), values.clone())
            }
        }
    }
}

pub fn read_boundary(path: &Path) -> Result<BoundaryData> {
    let f: BoundaryFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    f.to_data()
}

/// Writes a CSV table; floats use the shortest round-trip representation.
pub fn write_table(mut w: impl Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{benchmark_domain, BenchParams};

    #[test]
    fn rle_round_trip() {
        let bits = vec![true, true, false, true, false, false];
        let runs = encode_rle(&bits);
        assert_eq!(runs, vec![0, 2, 1, 1, 2]);
        assert_eq!(decode_rle(&runs, 6).unwrap(), bits);
        assert!(decode_rle(&runs, 7).is_err());
    }

    #[test]
    fn domain_round_trip() {
        let d = benchmark_domain("square_with_corner", &BenchParams::default()).unwrap();
        let back = domain_from_json(&domain_to_json(&d).unwrap()).unwrap();
        assert_eq!(back.inside, d.inside);
        assert_eq!(back.lattice, d.lattice);
        assert_eq!(back.meta.probe, d.meta.probe);
    }

    #[test]
    fn cube_syntax() {
        let k = parse_cube("cube:0.5,-0.25@0.125").unwrap();
        assert_eq!(k.center, vec![0.5, -0.25]);
        assert_eq!(k.half_edge, 0.125);
        assert_eq!(parse_cube(&format_cube(&k)).unwrap(), k);
        assert!(parse_cube("cube:1,2").is_err());
        assert!(parse_cube("box:1@1").is_err());
        assert!(matches!(parse_region("ball:0,0@0.5").unwrap(), Region::Ball { radius, .. } if radius == 0.5));
    }

    #[test]
    fn field_round_trip() {
        let lat = Lattice::new(2, 0.25, &[0.0, 0.0], &[5, 5]).unwrap();
        let values = vec![(0..25).map(|i| i as f64 * 0.1).collect(), vec![0.5; 25]];
        let f = Field {
            inside: (0..25).map(|i| !lat.on_face(i)).collect(),
            lattice: lat,
            times: vec![0.0, 0.125],
            values,
        };
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        assert_eq!(read_field_csv(&buf[..]).unwrap(), f);
    }

    #[test]
    fn boundary_files() {
        let f: BoundaryFile = serde_json::from_str(r#"{"kind":"expr","expr":"x + 2*t"}"#).unwrap();
        assert_eq!(f.to_data().unwrap().eval(&[1.0, 0.0], 0.5), 2.0);
        let f: BoundaryFile = serde_json::from_str(
            r#"{"kind":"sampled","h":1,"bbox":[0,1],"times":[0,1],"values":[[0,0,0],[1,2,3]]}"#,
        )
        .unwrap();
        let g = f.to_data().unwrap();
        assert_eq!(g.eval(&[1.0], 0.5), 1.5);
    }
}
