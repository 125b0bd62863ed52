//! File output: legacy VTK, CSV tables and JSON reports.
//!
//! Every writer renders to memory first and then renames a temporary file
//! into place, so a crashed run never leaves a half-written artifact.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{ContactError, Result};
use crate::mesh::LayerMesh;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Self::Float(v) => write!(out, "{v:.16e}").unwrap(),
            Self::Int(v) => write!(out, "{v}").unwrap(),
            Self::Text(s) if s.contains([',', '"', '\n']) => write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap(),
            Self::Text(s) => out.push_str(s),
        }
    }
}

/// A table with a fixed header.
pub trait Table {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<Cell>>;
}

/// Writes `contents` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| ContactError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut file = std::fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(contents).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Renders a table as CSV with 17 significant digits per float.
pub fn render_csv(table: &dyn Table) -> String {
    let mut out = table.header().join(",");
    out.push('\n');
    for row in table.rows() {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            cell.render(&mut out);
        }
        out.push('\n');
    }
    out
}

pub fn export_csv(table: &dyn Table, path: &Path) -> Result<()> {
    write_atomic(path, render_csv(table).as_bytes())
}

pub fn export_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Renders one layer as a legacy ASCII unstructured grid with a
/// `displacement` point vector.
pub fn render_vtk(layer: &LayerMesh, displacement: &[[f64; 3]], title: &str) -> Result<String> {
    if displacement.len() != layer.nodes.len() {
        return Err(ContactError::DimensionMismatch { expected: layer.nodes.len(), actual: displacement.len() });
    }
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let n = layer.nodes.len();
    let m = layer.tets.len();
    let mut out = String::with_capacity(64 * (n + m));
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(&title);
    out.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {n} double").unwrap();
    for p in &layer.nodes {
        writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(out, "CELLS {m} {}", 5 * m).unwrap();
    for t in &layer.tets {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
    }
    writeln!(out, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        out.push_str("10\n");
    }
    writeln!(out, "POINT_DATA {n}").unwrap();
    out.push_str("VECTORS displacement double\n");
    for u in displacement {
        writeln!(out, "{:?} {:?} {:?}", u[0], u[1], u[2]).unwrap();
    }
    Ok(out)
}

pub fn export_vtk(layer: &LayerMesh, displacement: &[[f64; 3]], title: &str, path: &Path) -> Result<()> {
    write_atomic(path, render_vtk(layer, displacement, title)?.as_bytes())
}

/// Contents of a legacy VTK file as written by [`render_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub displacement: Vec<[f64; 3]>,
}

struct Tokens<'a> {
    inner: Box<dyn Iterator<Item = &'a str> + 'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.inner.next().ok_or_else(|| malformed(&format!("unexpected end before {what}")))
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let s = self.next(what)?;
        s.parse().map_err(|_| malformed(&format!("bad {what} {s:?}")))
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let got = self.next(keyword)?;
        if got == keyword { Ok(()) } else { Err(malformed(&format!("expected {keyword}, found {got}"))) }
    }

    fn vectors(&mut self, n: usize) -> Result<Vec<[f64; 3]>> {
        (0..n).map(|_| Ok([self.num("x")?, self.num("y")?, self.num("z")?])).collect()
    }
}

fn malformed(msg: &str) -> ContactError {
    ContactError::Config(format!("malformed VTK: {msg}"))
}

/// Parses the unstructured-grid subset produced by [`render_vtk`].
pub fn parse_vtk(text: &str) -> Result<VtkGrid> {
    let mut lines = text.lines();
    if lines.next() != Some("# vtk DataFile Version 3.0") {
        return Err(malformed("missing version header"));
    }
    let title = lines.next().ok_or_else(|| malformed("missing title"))?.to_string();
    if lines.next() != Some("ASCII") || lines.next() != Some("DATASET UNSTRUCTURED_GRID") {
        return Err(malformed("expected ASCII unstructured grid"));
    }
    let mut tok = Tokens { inner: Box::new(lines.flat_map(str::split_whitespace)) };

    tok.expect("POINTS")?;
    let n: usize = tok.num("point count")?;
    tok.next("point type")?;
    let points = tok.vectors(n)?;
    tok.expect("CELLS")?;
    let m: usize = tok.num("cell count")?;
    let _: usize = tok.num("cell list size")?;
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let k: usize = tok.num("cell size")?;
        let cell = (0..k).map(|_| tok.num("cell index")).collect::<Result<Vec<usize>>>()?;
        if let Some(&i) = cell.iter().find(|&&i| i >= n) {
            return Err(malformed(&format!("cell references point {i} of {n}")));
        }
        cells.push(cell);
    }
    tok.expect("CELL_TYPES")?;
    if tok.num::<usize>("cell type count")? != m {
        return Err(malformed("cell type count differs from cell count"));
    }
    let cell_types = (0..m).map(|_| tok.num("cell type")).collect::<Result<Vec<u8>>>()?;
    tok.expect("POINT_DATA")?;
    if tok.num::<usize>("point data count")? != n {
        return Err(malformed("point data count differs from point count"));
    }
    tok.expect("VECTORS")?;
    tok.next("vector name")?;
    tok.next("vector type")?;
    let displacement = tok.vectors(n)?;
    Ok(VtkGrid { title, points, cells, cell_types, displacement })
}

pub fn read_vtk(path: &Path) -> Result<VtkGrid> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ContactError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_vtk(&text)
}
