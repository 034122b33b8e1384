//! Codispersion coefficient: the cross-variogram normalized by the two
//! variograms,
//!
//! ```text
//! ρ̂(h) = Σ (x_i - x_j)(y_i - y_j) / sqrt(Σ (x_i - x_j)² · Σ (y_i - y_j)²)
//! ```
//!
//! with the sums over the pairs belonging to lag `h`: a distance class
//! ([`codisp_binned`]), a lag vector with tolerance ([`codisp_directional`]),
//! a polar cell ([`codisp_map`]) or an integer time lag ([`comovement`]).
//! Lags whose increments have zero energy in either variable have no value
//! (`None`), never 0 or NaN.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{fold_pairs, max_pair_distance, Binning, LagClasses, Point, PointSample};
use crate::lattice::{self, Engine, LagIncrements};

/// Running increment sums for one lag, class or cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Increments {
    sxy: f64,
    sxx: f64,
    syy: f64,
    pairs: u64,
}

impl Increments {
    #[inline]
    fn add_pair(&mut self, dx: f64, dy: f64) {
        self.sxy += dx * dy;
        self.sxx += dx * dx;
        self.syy += dy * dy;
        self.pairs += 1;
    }

    #[inline]
    fn add_lag(&mut self, l: &LagIncrements) {
        self.sxy += l.sxy;
        self.sxx += l.sxx;
        self.syy += l.syy;
        self.pairs += l.count;
    }

    fn merge(&mut self, o: &Increments) {
        self.sxy += o.sxy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.pairs += o.pairs;
    }

    fn coefficient(&self) -> Option<f64> {
        (self.pairs > 0 && self.sxx > 0.0 && self.syy > 0.0)
            .then(|| (self.sxy / (self.sxx * self.syy).sqrt()).clamp(-1.0, 1.0))
    }
}

fn merge_all(a: &mut [Increments], b: Vec<Increments>) {
    a.iter_mut().zip(&b).for_each(|(u, v)| u.merge(v));
}

/// Per-class codispersion curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodispResult {
    /// `None` for empty classes or classes without variation.
    pub coef: Vec<Option<f64>>,
    pub classes: LagClasses,
}

impl CodispResult {
    /// Largest defined value and its class index.
    pub fn max(&self) -> Option<(usize, f64)> {
        self.coef
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.map(|v| (k, v)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

impl fmt::Display for CodispResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Codispersion coefficient")?;
        writeln!(f, "Upper bound  Cardinality  Coefficient")?;
        for ((ub, card), c) in self
            .classes
            .upper_bounds
            .iter()
            .zip(&self.classes.card)
            .zip(&self.coef)
        {
            match c {
                Some(v) => writeln!(f, "{ub:>11.4}  {card:>11}  {v:>11.4}")?,
                None => writeln!(f, "{ub:>11.4}  {card:>11}  {:>11}", "NA")?,
            }
        }
        Ok(())
    }
}

pub fn codisp_binned(sample: &PointSample, binning: Binning) -> Result<CodispResult> {
    codisp_binned_with(sample, binning, Engine::Auto)
}

pub fn codisp_binned_with(
    sample: &PointSample,
    binning: Binning,
    engine: Engine,
) -> Result<CodispResult> {
    let coords = sample.coords();
    let (classes, sums) = match engine.lattice_for(coords)? {
        Some(lat) => {
            let lags = lattice::increment_sums(&lat, sample.x(), sample.y());
            let counts: Vec<(f64, u64)> = lags.iter().map(|l| (norm(l.vector), l.count)).collect();
            let classes = LagClasses::from_lag_counts(sample.len(), binning, &counts)?;
            let mut sums = vec![Increments::default(); classes.len()];
            for l in &lags {
                if let Some(k) = classes.class_of(norm(l.vector)) {
                    sums[k].add_lag(l);
                }
            }
            (classes, sums)
        }
        None => {
            let classes = LagClasses::build(coords, binning)?;
            let (x, y) = (sample.x(), sample.y());
            let k = classes.len();
            let sums = fold_pairs(
                coords,
                || vec![Increments::default(); k],
                |acc, i, j, d| {
                    if let Some(c) = classes.class_of(d) {
                        acc[c].add_pair(x[i] - x[j], y[i] - y[j]);
                    }
                },
                |a: &mut Vec<Increments>, b| merge_all(a, b),
            );
            (classes, sums)
        }
    };
    if classes.card.iter().all(|&c| c == 0) {
        return Err(Error::InvalidInput("every lag class is empty".into()));
    }
    Ok(CodispResult {
        coef: sums.iter().map(Increments::coefficient).collect(),
        classes,
    })
}

#[inline]
fn norm(v: Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

#[inline]
fn within(v: Point, h: Point, tol: f64) -> bool {
    norm([v[0] - h[0], v[1] - h[1]]) <= tol
}

/// Codispersion over the ordered pairs with `‖(s_i - s_j) - h‖ <= tol`.
/// `None` when no pair qualifies.
pub fn codisp_directional(sample: &PointSample, h: Point, tol: f64) -> Result<Option<f64>> {
    codisp_directional_with(sample, h, tol, Engine::Auto)
}

pub fn codisp_directional_with(
    sample: &PointSample,
    h: Point,
    tol: f64,
    engine: Engine,
) -> Result<Option<f64>> {
    if !(tol >= 0.0) || !h.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "lag must be finite and tolerance >= 0".into(),
        ));
    }
    let mut acc = Increments::default();
    match engine.lattice_for(sample.coords())? {
        Some(lat) => {
            for l in lattice::increment_sums(&lat, sample.x(), sample.y()) {
                let v = l.vector;
                if within(v, h, tol) {
                    acc.add_lag(&l);
                }
                if within([-v[0], -v[1]], h, tol) {
                    acc.add_lag(&l);
                }
            }
        }
        None => {
            let (coords, x, y) = (sample.coords(), sample.x(), sample.y());
            acc = fold_pairs(
                coords,
                Increments::default,
                |acc, i, j, _| {
                    let v = [coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]];
                    let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
                    if within(v, h, tol) {
                        acc.add_pair(dx, dy);
                    }
                    if within([-v[0], -v[1]], h, tol) {
                        acc.add_pair(dx, dy);
                    }
                },
                |a, b| a.merge(&b),
            );
        }
    }
    Ok(acc.coefficient())
}

/// Polar lag grid for the codispersion map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapGrid {
    pub n_angles: usize,
    pub n_radii: usize,
    pub max_radius: f64,
    /// Radial tolerance; defaults to half the radial spacing.
    pub tol: Option<f64>,
}

impl MapGrid {
    pub fn angles(&self) -> Vec<f64> {
        (1..=self.n_angles)
            .map(|a| (a as f64 - 0.5) * PI / self.n_angles as f64)
            .collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        (1..=self.n_radii)
            .map(|j| j as f64 * self.max_radius / self.n_radii as f64)
            .collect()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
            .unwrap_or(0.5 * self.max_radius / self.n_radii as f64)
    }

    /// Cell of a pair vector: nearest angle in `[0, π)` (after identifying
    /// `v` with `-v`) and nearest radius within the tolerance.
    #[inline]
    fn cell_of(&self, v: Point, tol: f64) -> Option<(usize, usize)> {
        let v = if v[1] < 0.0 || (v[1] == 0.0 && v[0] < 0.0) {
            [-v[0], -v[1]]
        } else {
            v
        };
        let r = norm(v);
        if r == 0.0 {
            return None;
        }
        let step = self.max_radius / self.n_radii as f64;
        let j = (r / step).round();
        if j < 1.0 || j > self.n_radii as f64 || (r - j * step).abs() > tol {
            return None;
        }
        let phi = v[1].atan2(v[0]);
        let a = ((phi / (PI / self.n_angles as f64)) as usize).min(self.n_angles - 1);
        Some((a, j as usize - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodispMap {
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
    /// `values[a][r]`, `None` where the cell holds no usable pair.
    pub values: Vec<Vec<Option<f64>>>,
    pub npairs: Vec<Vec<u64>>,
    pub tolerance: f64,
}

pub fn codisp_map(sample: &PointSample, grid: MapGrid) -> Result<CodispMap> {
    codisp_map_with(sample, grid, Engine::Auto)
}

pub fn codisp_map_with(sample: &PointSample, grid: MapGrid, engine: Engine) -> Result<CodispMap> {
    if grid.n_angles < 2 || grid.n_radii < 1 {
        return Err(Error::InvalidInput(
            "map needs >= 2 angles and >= 1 radius".into(),
        ));
    }
    let tol = grid.tolerance();
    if !(grid.max_radius > 0.0) || !(tol >= 0.0) {
        return Err(Error::InvalidInput(
            "map radius and tolerance must be positive".into(),
        ));
    }
    let cells = grid.n_angles * grid.n_radii;
    let idx = |(a, r): (usize, usize)| a * grid.n_radii + r;
    let coords = sample.coords();
    let sums = match engine.lattice_for(coords)? {
        Some(lat) => {
            let lags = lattice::increment_sums(&lat, sample.x(), sample.y());
            let dmax = lags.iter().map(|l| norm(l.vector)).fold(0.0, f64::max);
            check_radius(grid.max_radius, dmax)?;
            let mut sums = vec![Increments::default(); cells];
            for l in &lags {
                if let Some(c) = grid.cell_of(l.vector, tol) {
                    sums[idx(c)].add_lag(l);
                }
            }
            sums
        }
        None => {
            check_radius(grid.max_radius, max_pair_distance(coords)?)?;
            let (x, y) = (sample.x(), sample.y());
            fold_pairs(
                coords,
                || vec![Increments::default(); cells],
                |acc, i, j, _| {
                    let v = [coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]];
                    if let Some(c) = grid.cell_of(v, tol) {
                        acc[idx(c)].add_pair(x[i] - x[j], y[i] - y[j]);
                    }
                },
                |a: &mut Vec<Increments>, b| merge_all(a, b),
            )
        }
    };
    let rows = |f: &dyn Fn(&Increments) -> _| -> Vec<_> {
        sums.chunks(grid.n_radii)
            .map(|row| row.iter().map(f).collect())
            .collect()
    };
    Ok(CodispMap {
        angles: grid.angles(),
        radii: grid.radii(),
        values: rows(&|s: &Increments| s.coefficient()),
        npairs: sums
            .chunks(grid.n_radii)
            .map(|row| row.iter().map(|s| s.pairs).collect())
            .collect(),
        tolerance: tol,
    })
}

fn check_radius(max_radius: f64, dmax: f64) -> Result<()> {
    if max_radius > dmax * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "map radius {max_radius} exceeds the largest pair distance {dmax}"
        )));
    }
    Ok(())
}

/// Comovement of two equally spaced series at integer lags `1..=max_lag`
/// (default `ceil(T/2)`, capped at `T - 2`).
pub fn comovement(x: &[f64], y: &[f64], max_lag: Option<usize>) -> Result<Vec<Option<f64>>> {
    let t = x.len();
    if y.len() != t {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            t,
            y.len()
        )));
    }
    if t < 3 {
        return Err(Error::InvalidInput(format!("series too short: T = {t}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::ConstantVariable("x"));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::ConstantVariable("y"));
    }
    let max_lag = max_lag.unwrap_or(t.div_ceil(2).min(t - 2));
    if max_lag < 1 || max_lag > t - 2 {
        return Err(Error::InvalidInput(format!(
            "max lag must be in 1..={}, got {max_lag}",
            t - 2
        )));
    }
    Ok((1..=max_lag)
        .map(|h| {
            let mut acc = Increments::default();
            for s in 0..t - h {
                acc.add_pair(x[s + h] - x[s], y[s + h] - y[s]);
            }
            acc.coefficient()
        })
        .collect())
}
