//! Input parsing: points CSV, grids (matrix text or PGM) and single series.

use std::fs;
use std::path::Path;

use image::DynamicImage;
use spatassoc::{Error, PointSample, Result};

const POINT_COLUMNS: [&str; 4] = ["s1", "s2", "x", "y"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => io_err(path, e),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => parse_err(
            path,
            line,
            format!("ragged row: {len} fields, expected {expected_len}"),
        ),
        _ => parse_err(path, line, e.to_string()),
    }
}

fn number(path: &Path, line: usize, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("not a number: {cell:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value: {cell:?}")));
    }
    Ok(v)
}

/// Reads `s1,s2,x,y` rows. Columns are matched by header name when all four
/// are present, otherwise the first four columns are used in that order.
pub fn parse_points_csv(path: &Path) -> Result<PointSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let named: Option<Vec<usize>> = POINT_COLUMNS
        .iter()
        .map(|want| header.iter().position(|h| h.eq_ignore_ascii_case(want)))
        .collect();
    let cols = match named {
        Some(c) => c,
        None if header.len() >= 4 => vec![0, 1, 2, 3],
        None => {
            return Err(parse_err(
                path,
                1,
                format!("expected columns s1,s2,x,y, found {} columns", header.len()),
            ))
        }
    };
    let (mut coords, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v: Vec<f64> = cols
            .iter()
            .map(|&c| number(path, line, &rec[c]))
            .collect::<Result<_>>()?;
        coords.push([v[0], v[1]]);
        x.push(v[2]);
        y.push(v[3]);
    }
    PointSample::new(coords, x, y)
}

/// Values of a single-column CSV with a header (extra columns are ignored).
pub fn parse_series(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let cell = rec
            .get(0)
            .ok_or_else(|| parse_err(path, line, "empty row"))?;
        out.push(number(path, line, cell)?);
    }
    Ok(out)
}

/// A row-major raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Reads a PGM (P2 or P5, detected by magic number) or a whitespace/comma
/// separated matrix of numbers. Blank lines and `#` comments are skipped in
/// matrix text.
pub fn read_grid(path: &Path) -> Result<Grid> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return read_pgm(path, &bytes);
    }
    let text = String::from_utf8(bytes).map_err(|_| parse_err(path, 0, "not UTF-8 text"))?;
    let mut values = Vec::new();
    let (mut rows, mut cols) = (0, 0);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| number(path, i + 1, s))
            .collect::<Result<_>>()?;
        if rows == 0 {
            cols = row.len();
        } else if row.len() != cols {
            return Err(parse_err(
                path,
                i + 1,
                format!("ragged row: {} values, expected {cols}", row.len()),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(path, 0, "empty matrix"));
    }
    Ok(Grid { rows, cols, values })
}

fn read_pgm(path: &Path, bytes: &[u8]) -> Result<Grid> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Pnm)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(f64::from).collect(),
        _ => return Err(parse_err(path, 0, "not a grayscale image")),
    };
    Ok(Grid { rows, cols, values })
}

/// Two equally sized rasters as a unit-spaced grid sample: row `r`, column
/// `c` sits at `(c, r)`.
pub fn parse_grid(path_x: &Path, path_y: &Path) -> Result<PointSample> {
    let gx = read_grid(path_x)?;
    let gy = read_grid(path_y)?;
    if (gx.rows, gx.cols) != (gy.rows, gy.cols) {
        return Err(Error::InvalidInput(format!(
            "grid dimensions differ: {}x{} ({}) vs {}x{} ({})",
            gx.rows,
            gx.cols,
            path_x.display(),
            gy.rows,
            gy.cols,
            path_y.display()
        )));
    }
    PointSample::from_grid(gx.rows, gx.cols, gx.values, gy.values)
}
