//! File formats: versioned grid descriptors (JSON), densities (CSV and
//! binary), and rotation spectra (binary with a JSON header).
//!
//! # Grid descriptor (JSON)
//!
//! A versioned document wrapping the grid's construction parameters:
//!
//! ```json
//! {"version":1,"grid":{"group":"So3","chart":"EulerZxz","shape":[16,16,16]}}
//! ```
//!
//! Noncompact grids carry the truncation half-width as `half_width`.
//! Rebuilding from the descriptor reproduces nodes and weights bit for
//! bit, since grid construction is deterministic.
//!
//! # Density CSV
//!
//! Line 1 embeds the grid descriptor as a comment, so the file is
//! self-contained; line 2 names the columns — chart coordinates in axis
//! order, then the sample value; each remaining line is one grid node in
//! flat (row-major) node order. Floats are written in shortest
//! round-trip form, so parsing the file back reproduces the samples
//! exactly.
//!
//! ```text
//! # grid: {"version":1,"grid":{...}}
//! alpha,beta,gamma,value
//! 0,0.0485,0,1.25
//! ```
//!
//! # Density binary
//!
//! ```text
//! bytes 0..8    magic "DFLD0001"
//! bytes 8..12   u32 LE: byte length n of the grid descriptor JSON
//! bytes 12..12+n  grid descriptor (same document as the JSON format)
//! next 8 bytes  u64 LE: sample count (must equal the grid size)
//! rest          count f64 LE samples in flat node order
//! ```
//!
//! # Spectrum binary
//!
//! ```text
//! bytes 0..8    magic "SO3S0001"
//! bytes 8..12   u32 LE: byte length n of the header JSON
//! bytes 12..12+n  header {"version":1,"l_max":L}
//! rest          blocks l = 0..=L in order; each block is its
//!               (2l+1) x (2l+1) entries row-major, each entry a
//!               (re, im) pair of f64 LE
//! ```

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::group::ChartId;
use crate::harmonic::So3Spectrum;
use crate::quadrature::{Grid, GridSpec};

/// Version stamp of the grid descriptor document.
pub const GRID_FORMAT_VERSION: u32 = 1;

const DENSITY_MAGIC: &[u8; 8] = b"DFLD0001";
const SPECTRUM_MAGIC: &[u8; 8] = b"SO3S0001";

#[derive(Serialize, Deserialize)]
struct GridDocument {
    version: u32,
    grid: GridSpec,
}

#[derive(Serialize, Deserialize)]
struct SpectrumHeader {
    version: u32,
    l_max: usize,
}

/// Column names for a chart's coordinates, in axis order.
pub fn axis_labels(chart: ChartId) -> &'static [&'static str] {
    match chart {
        ChartId::EulerZxz | ChartId::AlphaBetaGamma => &["alpha", "beta", "gamma"],
        ChartId::AxisAngleExp | ChartId::ExpCoords => &["x1", "x2", "x3"],
        ChartId::CartesianTheta => &["x", "y", "theta"],
        ChartId::Iwasawa => &["theta", "t", "xi"],
        ChartId::Line => &["x"],
        ChartId::Angle => &["theta"],
    }
}

/// Serialize a grid to its versioned JSON descriptor.
pub fn grid_to_json(grid: &Grid) -> Result<String> {
    Ok(serde_json::to_string(&GridDocument {
        version: GRID_FORMAT_VERSION,
        grid: grid.spec().clone(),
    })?)
}

/// Rebuild a grid from its JSON descriptor.
pub fn grid_from_json(text: &str) -> Result<Arc<Grid>> {
    let doc: GridDocument = serde_json::from_str(text)?;
    if doc.version != GRID_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported grid descriptor version {} (supported: {GRID_FORMAT_VERSION})",
            doc.version
        )));
    }
    Grid::from_spec(&doc.grid)
}

pub fn save_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, grid_to_json(grid)?)?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Arc<Grid>> {
    grid_from_json(&std::fs::read_to_string(path)?)
}

/// Render a density as a self-contained CSV (see module docs).
pub fn density_to_csv(d: &DensityField) -> Result<String> {
    let grid = d.grid();
    let labels = axis_labels(grid.chart());
    let mut out = String::new();
    out.push_str("# grid: ");
    out.push_str(&grid_to_json(grid)?);
    out.push('\n');
    out.push_str(&labels.join(","));
    out.push_str(",value\n");
    for (idx, v) in d.values().iter().enumerate() {
        for q in grid.coords(idx) {
            out.push_str(&format!("{q},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    Ok(out)
}

/// Parse a density CSV produced by [`density_to_csv`]. The embedded
/// descriptor rebuilds the grid; each row's coordinates are checked
/// against the rebuilt nodes so a file paired with the wrong grid is
/// rejected rather than silently re-indexed.
pub fn density_from_csv(text: &str) -> Result<DensityField> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty density CSV".into()))?;
    let descriptor = first
        .strip_prefix("# grid: ")
        .ok_or_else(|| Error::Parse("line 1 must be '# grid: {descriptor}'".into()))?;
    let grid = grid_from_json(descriptor)?;
    let labels = axis_labels(grid.chart());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("missing CSV header row".into()))?;
    let expect_header = format!("{},value", labels.join(","));
    if header.trim() != expect_header {
        return Err(Error::Parse(format!(
            "unexpected CSV header {header:?} (want {expect_header:?})"
        )));
    }
    let dim = labels.len();
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, got {}",
                lineno + 1,
                dim + 1,
                fields.len()
            )));
        }
        let idx = values.len();
        if idx >= grid.len() {
            return Err(Error::Parse(format!(
                "line {}: more rows than grid nodes ({})",
                lineno + 1,
                grid.len()
            )));
        }
        let node = grid.coords(idx);
        for (ax, field) in fields[..dim].iter().enumerate() {
            let q: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: bad coordinate {field:?}", lineno + 1))
            })?;
            if (q - node[ax]).abs() > 1e-9 * node[ax].abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "line {}: coordinate {} = {q} does not match grid node {}",
                    lineno + 1,
                    labels[ax],
                    node[ax]
                )));
            }
        }
        let v: f64 = fields[dim].trim().parse().map_err(|_| {
            Error::Parse(format!(
                "line {}: bad value {:?}",
                lineno + 1,
                fields[dim]
            ))
        })?;
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(Error::Parse(format!(
            "row count {} does not cover the grid ({} nodes)",
            values.len(),
            grid.len()
        )));
    }
    DensityField::new(grid, values)
}

pub fn save_density_csv(d: &DensityField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, density_to_csv(d)?)?;
    Ok(())
}

pub fn load_density_csv(path: impl AsRef<Path>) -> Result<DensityField> {
    density_from_csv(&std::fs::read_to_string(path)?)
}

/// Serialize a density to the binary layout in the module docs.
pub fn density_to_bytes(d: &DensityField) -> Result<Vec<u8>> {
    let json = grid_to_json(d.grid())?;
    let mut out = Vec::with_capacity(28 + json.len() + 8 * d.values().len());
    out.extend_from_slice(DENSITY_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    out.extend_from_slice(&(d.values().len() as u64).to_le_bytes());
    for v in d.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parse the binary density layout; the round trip is bit-exact.
pub fn density_from_bytes(bytes: &[u8]) -> Result<DensityField> {
    let rest = expect_magic(bytes, DENSITY_MAGIC, "density")?;
    let (json, rest) = take_json_block(rest)?;
    let grid = grid_from_json(json)?;
    if rest.len() < 8 {
        return Err(Error::Parse("density payload truncated before count".into()));
    }
    let count = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
    if count != grid.len() {
        return Err(Error::Parse(format!(
            "sample count {count} does not match the grid ({} nodes)",
            grid.len()
        )));
    }
    let payload = &rest[8..];
    if payload.len() != 8 * count {
        return Err(Error::Parse(format!(
            "density payload holds {} bytes, want {}",
            payload.len(),
            8 * count
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DensityField::new(grid, values)
}

pub fn save_density(d: &DensityField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, density_to_bytes(d)?)?;
    Ok(())
}

pub fn load_density(path: impl AsRef<Path>) -> Result<DensityField> {
    density_from_bytes(&std::fs::read(path)?)
}

/// Serialize a rotation spectrum to the binary layout in the module
/// docs: JSON header with the bandwidth, then row-major complex blocks.
pub fn spectrum_to_bytes(spec: &So3Spectrum) -> Result<Vec<u8>> {
    let header = serde_json::to_string(&SpectrumHeader {
        version: 1,
        l_max: spec.l_max(),
    })?;
    let entries: usize = (0..=spec.l_max()).map(|l| (2 * l + 1) * (2 * l + 1)).sum();
    let mut out = Vec::with_capacity(12 + header.len() + 16 * entries);
    out.extend_from_slice(SPECTRUM_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for l in 0..=spec.l_max() {
        let blk = spec.block(l);
        let dim = 2 * l + 1;
        for r in 0..dim {
            for c in 0..dim {
                out.extend_from_slice(&blk[(r, c)].re.to_le_bytes());
                out.extend_from_slice(&blk[(r, c)].im.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parse the binary spectrum layout; the round trip is bit-exact.
pub fn spectrum_from_bytes(bytes: &[u8]) -> Result<So3Spectrum> {
    let rest = expect_magic(bytes, SPECTRUM_MAGIC, "spectrum")?;
    let (json, rest) = take_json_block(rest)?;
    let header: SpectrumHeader = serde_json::from_str(json)?;
    if header.version != 1 {
        return Err(Error::Parse(format!(
            "unsupported spectrum version {}",
            header.version
        )));
    }
    let entries: usize = (0..=header.l_max)
        .map(|l| (2 * l + 1) * (2 * l + 1))
        .sum();
    if rest.len() != 16 * entries {
        return Err(Error::Parse(format!(
            "spectrum payload holds {} bytes, want {} for bandwidth {}",
            rest.len(),
            16 * entries,
            header.l_max
        )));
    }
    let mut spec = So3Spectrum::zeros(header.l_max);
    let mut at = 0;
    let mut read = |from: &[u8]| {
        let re = f64::from_le_bytes(from[at..at + 8].try_into().unwrap());
        let im = f64::from_le_bytes(from[at + 8..at + 16].try_into().unwrap());
        at += 16;
        C64::new(re, im)
    };
    for l in 0..=header.l_max {
        let dim = 2 * l + 1;
        for r in 0..dim {
            for c in 0..dim {
                spec.block_mut(l)[(r, c)] = read(rest);
            }
        }
    }
    Ok(spec)
}

pub fn save_spectrum(spec: &So3Spectrum, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, spectrum_to_bytes(spec)?)?;
    Ok(())
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<So3Spectrum> {
    spectrum_from_bytes(&std::fs::read(path)?)
}

fn expect_magic<'a>(bytes: &'a [u8], magic: &[u8; 8], what: &str) -> Result<&'a [u8]> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(Error::Parse(format!("not a {what} file (bad magic)")));
    }
    Ok(&bytes[8..])
}

/// Split a `u32 LE length + JSON` block off the front of a byte slice.
fn take_json_block(bytes: &[u8]) -> Result<(&str, &[u8])> {
    if bytes.len() < 4 {
        return Err(Error::Parse("truncated before header length".into()));
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() < 4 + n {
        return Err(Error::Parse("truncated inside header".into()));
    }
    let json = std::str::from_utf8(&bytes[4..4 + n])
        .map_err(|_| Error::Parse("header is not UTF-8".into()))?;
    Ok((json, &bytes[4 + n..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::band_limited_rotation_density;
    use crate::group::GroupId;

    #[test]
    fn grid_descriptor_round_trips() {
        let grid = Grid::build(GroupId::Se2, &[8, 8, 6], Some(4.0)).unwrap();
        let text = grid_to_json(&grid).unwrap();
        assert!(text.contains("\"version\":1"));
        let back = grid_from_json(&text).unwrap();
        assert_eq!(back.spec(), grid.spec());
        assert_eq!(back.weights(), grid.weights());
        // Unknown version refuses.
        let bumped = text.replace("\"version\":1", "\"version\":9");
        assert!(matches!(grid_from_json(&bumped), Err(Error::Parse(_))));
    }

    #[test]
    fn density_csv_round_trips_and_validates() {
        let grid = Grid::build(GroupId::So3, &[8, 6, 8], None).unwrap();
        let (d, _) = band_limited_rotation_density(&grid, 2, 0.5, 4).unwrap();
        let text = density_to_csv(&d).unwrap();
        assert!(text.lines().nth(1) == Some("alpha,beta,gamma,value"));
        let back = density_from_csv(&text).unwrap();
        assert_eq!(back.values(), d.values());
        assert_eq!(back.grid().spec(), d.grid().spec());
        // A coordinate that is not the node it claims to be is rejected.
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = {
            let mut f: Vec<String> = lines[2].split(',').map(String::from).collect();
            f[1] = "0.77".into();
            f.join(",")
        };
        let tampered = lines.join("\n");
        assert!(matches!(density_from_csv(&tampered), Err(Error::Parse(_))));
        // Short files are rejected.
        let short = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(density_from_csv(&short), Err(Error::Parse(_))));
    }

    #[test]
    fn density_binary_round_trip_is_bit_exact() {
        let grid = Grid::build(GroupId::R1, &[32], Some(6.0)).unwrap();
        let mut d = DensityField::from_chart_fn(grid, |q| (-0.5 * q[0] * q[0]).exp()).unwrap();
        d.normalize().unwrap();
        let bytes = density_to_bytes(&d).unwrap();
        let back = density_from_bytes(&bytes).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.values()), bits(d.values()));
        assert!(matches!(
            density_from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Parse(_))
        ));
        assert!(matches!(density_from_bytes(b"junkjunk"), Err(Error::Parse(_))));
    }

    #[test]
    fn spectrum_round_trip_is_bit_exact() {
        let grid = Grid::build(GroupId::So3, &[8, 6, 8], None).unwrap();
        let (_, spec) = band_limited_rotation_density(&grid, 3, 0.5, 4).unwrap();
        let bytes = spectrum_to_bytes(&spec).unwrap();
        let back = spectrum_from_bytes(&bytes).unwrap();
        assert_eq!(back.l_max(), spec.l_max());
        for l in 0..=spec.l_max() {
            assert_eq!(back.block(l), spec.block(l));
        }
        assert!(matches!(
            spectrum_from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn file_helpers_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::build(GroupId::So2, &[16], None).unwrap();
        let d = DensityField::from_chart_fn(grid.clone(), |q| 1.0 + 0.3 * q[0].cos()).unwrap();

        let gp = dir.path().join("grid.json");
        save_grid(&grid, &gp).unwrap();
        assert_eq!(load_grid(&gp).unwrap().spec(), grid.spec());

        let cp = dir.path().join("density.csv");
        save_density_csv(&d, &cp).unwrap();
        assert_eq!(load_density_csv(&cp).unwrap().values(), d.values());

        let bp = dir.path().join("density.dfld");
        save_density(&d, &bp).unwrap();
        assert_eq!(load_density(&bp).unwrap().values(), d.values());

        let (_, spec) = band_limited_rotation_density(
            &Grid::build(GroupId::So3, &[8, 6, 8], None).unwrap(),
            2,
            0.4,
            1,
        )
        .unwrap();
        let sp = dir.path().join("spec.so3s");
        save_spectrum(&spec, &sp).unwrap();
        assert_eq!(load_spectrum(&sp).unwrap().block(2), spec.block(2));
    }
}
