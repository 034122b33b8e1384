//! Locations, pair streaming and lag classes.
//!
//! Every estimator in the crate is built on [`fold_pairs`], which visits each
//! unordered pair `(i, j)`, `i < j`, exactly once and never materializes the
//! `n x n` distance matrix. Lag classes are equal-width intervals
//! `((k-1)·D/K, k·D/K]` over `(0, D]`, where `D` is the largest pairwise
//! distance (or a user cutoff, see [`LagRange`]). Pairs at distance zero fall
//! in no class and are counted separately.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{self, Engine};
use crate::par;

pub type Point = [f64; 2];

/// Default number of lag classes.
pub const DEFAULT_NCLASS: usize = 13;

#[inline]
pub fn distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Number of unordered pairs among `n` points.
#[inline]
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Two variables observed at the same `n` locations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSample {
    coords: Vec<Point>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PointSample {
    /// Validates lengths (`n >= 3`), finiteness and nonzero variance of both
    /// variables.
    pub fn new(coords: Vec<Point>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if x.len() != n || y.len() != n {
            return Err(Error::InvalidInput(format!(
                "length mismatch: {} locations, {} x values, {} y values",
                n,
                x.len(),
                y.len()
            )));
        }
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "at least 3 locations required, got {n}"
            )));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        if is_constant(&x) {
            return Err(Error::ConstantVariable("x"));
        }
        if is_constant(&y) {
            return Err(Error::ConstantVariable("y"));
        }
        Ok(Self { coords, x, y })
    }

    /// A `rows x cols` unit-spaced grid in row-major order; row `r`, column
    /// `c` sits at `(c, r)`.
    pub fn from_grid(rows: usize, cols: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(grid_coords(rows, cols), x, y)
    }

    /// A time series embedded at `(t, 1)`, `t = 1..=T`.
    pub fn from_series(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let coords = (1..=x.len()).map(|t| [t as f64, 1.0]).collect();
        Self::new(coords, x, y)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Same locations, variables exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            coords: self.coords.clone(),
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// Replaces the variables, keeping the locations.
    pub fn with_values(&self, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(self.coords.clone(), x, y)
    }

    /// Applies `f` to every location.
    pub fn map_coords(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        Self::new(
            self.coords.iter().map(|&p| f(p)).collect(),
            self.x.clone(),
            self.y.clone(),
        )
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

pub fn grid_coords(rows: usize, cols: usize) -> Vec<Point> {
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| [c as f64, r as f64]))
        .collect()
}

/// Visits every unordered pair `(i, j)`, `i < j`, in lexicographic order.
pub fn for_each_pair(coords: &[Point], mut visitor: impl FnMut(usize, usize, f64)) {
    for (i, a) in coords.iter().enumerate() {
        for (j, b) in coords.iter().enumerate().skip(i + 1) {
            visitor(i, j, distance(a, b));
        }
    }
}

/// Chunked fold over all unordered pairs.
///
/// Each chunk of rows starts from `init()` and is visited in lexicographic
/// order; chunk accumulators are then merged left to right into a fresh
/// `init()`. The result is identical for every thread count.
pub fn fold_pairs<A, I, V, M>(coords: &[Point], init: I, visit: V, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, usize, usize, f64) + Sync + Send,
    M: Fn(&mut A, A),
{
    let n = coords.len();
    let chunks = par::pair_row_chunks(n);
    let parts = par::map_chunks(&chunks, |rows| {
        let mut acc = init();
        for i in rows {
            let a = &coords[i];
            for (j, b) in coords.iter().enumerate().skip(i + 1) {
                visit(&mut acc, i, j, distance(a, b));
            }
        }
        acc
    });
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Largest pairwise distance. The diameter is attained between convex hull
/// vertices, so only those pairs are compared.
pub fn max_pair_distance(coords: &[Point]) -> Result<f64> {
    let hull = convex_hull(coords);
    let mut d = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            d = d.max(distance(a, b));
        }
    }
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry)
    }
}

/// How many lag classes to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NClass {
    Fixed(usize),
    /// `K = ceil(1 + log2(P))` with `P = n(n-1)/2` the number of pairs.
    Sturges,
}

impl Default for NClass {
    fn default() -> Self {
        NClass::Fixed(DEFAULT_NCLASS)
    }
}

impl NClass {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            NClass::Fixed(0) => Err(Error::InvalidInput("nclass must be >= 1".into())),
            NClass::Fixed(k) => Ok(k),
            NClass::Sturges => {
                let p = pair_count(n).max(1) as f64;
                Ok((1.0 + p.log2()).ceil() as usize)
            }
        }
    }
}

/// Distance range covered by the lag classes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum LagRange {
    /// `(0, D]` with `D` the largest pairwise distance.
    #[default]
    Full,
    /// `(0, D/2]`; pairs farther apart are left out of every class.
    Half,
    /// `(0, d]` for a fixed `d > 0`.
    UpTo(f64),
}

/// Lag-class configuration shared by the binned estimators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Binning {
    pub nclass: NClass,
    pub range: LagRange,
}

impl Binning {
    pub fn classes(nclass: usize) -> Self {
        Self {
            nclass: NClass::Fixed(nclass),
            range: LagRange::Full,
        }
    }

    pub fn sturges() -> Self {
        Self {
            nclass: NClass::Sturges,
            range: LagRange::Full,
        }
    }

    pub fn with_range(mut self, range: LagRange) -> Self {
        self.range = range;
        self
    }
}

/// Monotone-chain hull; collinear boundary points are kept.
fn convex_hull(coords: &[Point]) -> Vec<Point> {
    let mut pts = coords.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) < 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Equal-width distance strata with their pair counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagClasses {
    pub upper_bounds: Vec<f64>,
    pub card: Vec<u64>,
    /// Upper end of the last class.
    pub max_dist: f64,
    /// Pairs at distance exactly zero.
    pub zero_pairs: u64,
    /// Pairs farther apart than `max_dist` (only with a range cutoff).
    pub beyond_pairs: u64,
}

impl LagClasses {
    /// Class boundaries for `nclass` classes over `(0, max_dist]`, with
    /// all counts zero.
    pub fn empty(nclass: usize, max_dist: f64) -> Result<Self> {
        if nclass == 0 {
            return Err(Error::InvalidInput("nclass must be >= 1".into()));
        }
        if !(max_dist > 0.0 && max_dist.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "maximum lag distance must be positive, got {max_dist}"
            )));
        }
        let mut upper_bounds: Vec<f64> = (1..=nclass)
            .map(|k| max_dist * k as f64 / nclass as f64)
            .collect();
        upper_bounds[nclass - 1] = max_dist;
        Ok(Self {
            upper_bounds,
            card: vec![0; nclass],
            max_dist,
            zero_pairs: 0,
            beyond_pairs: 0,
        })
    }

    /// Streams all pairs twice: once for the maximum distance, once for the
    /// class counts.
    pub fn build(coords: &[Point], binning: Binning) -> Result<Self> {
        let nclass = binning.nclass.resolve(coords.len())?;
        let dmax = max_pair_distance(coords)?;
        let range = match binning.range {
            LagRange::Full => dmax,
            LagRange::Half => dmax / 2.0,
            LagRange::UpTo(d) => d,
        };
        let mut classes = Self::empty(nclass, range)?;
        let k = classes.len();
        let (card, zero, beyond) = fold_pairs(
            coords,
            || (vec![0u64; k], 0u64, 0u64),
            |(card, zero, beyond), _, _, d| match classes.class_of(d) {
                Some(c) => card[c] += 1,
                None if d == 0.0 => *zero += 1,
                None => *beyond += 1,
            },
            |(card, zero, beyond), (c2, z2, b2)| {
                card.iter_mut().zip(c2).for_each(|(a, b)| *a += b);
                *zero += z2;
                *beyond += b2;
            },
        );
        classes.card = card;
        classes.zero_pairs = zero;
        classes.beyond_pairs = beyond;
        Ok(classes)
    }

    /// Builds the classes with the given engine: FFT lag counts on regular
    /// grids, pair streaming otherwise.
    pub fn build_with(coords: &[Point], binning: Binning, engine: Engine) -> Result<Self> {
        match engine.lattice_for(coords)? {
            Some(lattice) => {
                Self::from_lag_counts(coords.len(), binning, &lattice::lag_counts(&lattice))
            }
            None => Self::build(coords, binning),
        }
    }

    /// Classes from `(distance, pair count)` totals, e.g. per lag vector.
    pub fn from_lag_counts(n: usize, binning: Binning, lags: &[(f64, u64)]) -> Result<Self> {
        let nclass = binning.nclass.resolve(n)?;
        let dmax = lags
            .iter()
            .filter(|l| l.1 > 0)
            .map(|l| l.0)
            .fold(0.0, f64::max);
        if dmax <= 0.0 {
            return Err(Error::DegenerateGeometry);
        }
        let range = match binning.range {
            LagRange::Full => dmax,
            LagRange::Half => dmax / 2.0,
            LagRange::UpTo(d) => d,
        };
        let mut classes = Self::empty(nclass, range)?;
        for &(d, c) in lags {
            match classes.class_of(d) {
                Some(k) => classes.card[k] += c,
                None if d == 0.0 => classes.zero_pairs += c,
                None => classes.beyond_pairs += c,
            }
        }
        Ok(classes)
    }

    pub fn len(&self) -> usize {
        self.upper_bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper_bounds.is_empty()
    }

    /// Class index of a pair at distance `d`, or `None` when `d == 0` or
    /// `d > max_dist`.
    #[inline]
    pub fn class_of(&self, d: f64) -> Option<usize> {
        if d <= 0.0 || d > self.max_dist {
            return None;
        }
        let k = self.len();
        let ub = &self.upper_bounds;
        let mut c = ((d * k as f64 / self.max_dist).ceil() as usize).clamp(1, k) - 1;
        while c > 0 && d <= ub[c - 1] {
            c -= 1;
        }
        while c + 1 < k && d > ub[c] {
            c += 1;
        }
        Some(c)
    }

    /// Lower end of class `k`.
    pub fn lower_bound(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.upper_bounds[k - 1]
        }
    }

    pub fn total_pairs(&self) -> u64 {
        self.card.iter().sum::<u64>() + self.zero_pairs + self.beyond_pairs
    }
}
