//! Lag-vector sums on regular grids via FFT cross-correlation.
//!
//! When the locations are (a subset of) a rectangular lattice, every pair
//! `(s, s + v)` is determined by its lag vector `v`, and sums such as
//! `Σ_s x(s) y(s + v)` over all present pairs are cross-correlations of
//! masked fields. Computing them for every `v` at once with zero-padded 2-D
//! FFTs costs `O(n log n)` instead of the `O(n²)` pair stream, which is what
//! makes image-sized inputs practical.
//!
//! Only the half-plane of lags `{a > 0} ∪ {a = 0, b > 0}` (row lag `a`,
//! column lag `b`) is reported: each unordered pair appears there exactly once.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{LagClasses, Point};

/// Relative tolerance for matching coordinates to lattice nodes.
const NODE_TOL: f64 = 1e-9;

/// Lattices with more than this many nodes per point are not worth padding.
const MAX_FILL_RATIO: usize = 4;

/// A regular grid carrying the sample's locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub rows: usize,
    pub cols: usize,
    /// Node spacing along the first (column) and second (row) coordinate.
    pub spacing: [f64; 2],
    /// Row-major node index of every sample point.
    pub node: Vec<usize>,
}

impl Lattice {
    /// Recognizes locations lying on distinct nodes of a regular grid.
    pub fn detect(coords: &[Point]) -> Option<Lattice> {
        let n = coords.len();
        if n < 2 {
            return None;
        }
        let (c0, step0, cols) = axis_nodes(coords.iter().map(|p| p[0]))?;
        let (r0, step1, rows) = axis_nodes(coords.iter().map(|p| p[1]))?;
        let cells = rows.checked_mul(cols)?;
        if cells > MAX_FILL_RATIO * n + 64 {
            return None;
        }
        let mut seen = vec![false; cells];
        let mut node = Vec::with_capacity(n);
        for p in coords {
            let c = ((p[0] - c0) / step0).round() as usize;
            let r = ((p[1] - r0) / step1).round() as usize;
            let idx = r * cols + c;
            if seen[idx] {
                return None;
            }
            seen[idx] = true;
            node.push(idx);
        }
        Some(Lattice {
            rows,
            cols,
            spacing: [step0, step1],
            node,
        })
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Physical lag vector of row lag `a`, column lag `b`.
    #[inline]
    pub fn lag_vector(&self, a: isize, b: isize) -> Point {
        [b as f64 * self.spacing[0], a as f64 * self.spacing[1]]
    }

    /// Scatters per-point values onto the node grid (zero at empty nodes).
    fn scatter(&self, values: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut grid = vec![0.0; self.cells()];
        for (&idx, v) in self.node.iter().zip(values) {
            grid[idx] = v;
        }
        grid
    }

    fn mask(&self) -> Vec<f64> {
        self.scatter(std::iter::repeat(1.0))
    }
}

fn axis_nodes(values: impl Iterator<Item = f64>) -> Option<(f64, f64, usize)> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    let origin = v[0];
    if v.len() == 1 {
        return Some((origin, 1.0, 1));
    }
    let step = v
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if !(step > 0.0) {
        return None;
    }
    let mut count = 0usize;
    for &u in &v {
        let k = ((u - origin) / step).round();
        if (u - (origin + k * step)).abs() > NODE_TOL * u.abs().max(step) {
            return None;
        }
        count = count.max(k as usize + 1);
    }
    Some((origin, step, count))
}

pub(crate) fn next_fast_len(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5, 7] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

thread_local! {
    // the planner caches plans by length, so repeated analyses skip planning
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `(coef, f, g)` in [`Fft2::correlate`].
pub(crate) type Term<'a> = (f64, &'a [Complex<f64>], &'a [Complex<f64>]);

/// Zero-padded 2-D FFT of size `prow x pcol`.
///
/// Spectra are kept in transposed (column-major) layout; only elementwise
/// products are taken between them, and [`Fft2::inverse`] restores row-major
/// order.
pub(crate) struct Fft2 {
    pub prow: usize,
    pub pcol: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(prow: usize, pcol: usize) -> Self {
        PLANNER.with_borrow_mut(|planner| Self {
            prow,
            pcol,
            row_fwd: planner.plan_fft_forward(pcol),
            row_inv: planner.plan_fft_inverse(pcol),
            col_fwd: planner.plan_fft_forward(prow),
            col_inv: planner.plan_fft_inverse(prow),
        })
    }

    /// Smallest fast size that holds all lags of a `rows x cols` grid without
    /// wrap-around.
    pub fn for_lags(rows: usize, cols: usize) -> Self {
        Self::new(
            (2 * rows - 1).next_power_of_two(),
            (2 * cols - 1).next_power_of_two(),
        )
    }

    pub fn len(&self) -> usize {
        self.prow * self.pcol
    }

    /// Forward transform of a `rows x cols` real grid placed at the origin.
    pub fn forward_real(&self, grid: &[f64], rows: usize, cols: usize) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len()];
        for r in 0..rows {
            for c in 0..cols {
                buf[r * self.pcol + c] = Complex::new(grid[r * cols + c], 0.0);
            }
        }
        self.forward(buf)
    }

    /// Forward transform of a full `prow x pcol` row-major buffer.
    pub fn forward(&self, mut buf: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.row_fwd.process(&mut buf);
        let mut t = transpose(&buf, self.prow, self.pcol);
        self.col_fwd.process(&mut t);
        t
    }

    /// Inverse transform (normalized), back to row-major layout.
    pub fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.col_inv.process(&mut spec);
        let mut buf = transpose(&spec, self.pcol, self.prow);
        self.row_inv.process(&mut buf);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    /// Row-major index of lag `(a, b)` in a padded buffer.
    #[inline]
    pub fn lag_index(&self, a: isize, b: isize) -> usize {
        let r = a.rem_euclid(self.prow as isize) as usize;
        let c = b.rem_euclid(self.pcol as isize) as usize;
        r * self.pcol + c
    }

    /// `Σ coef · corr(f_i, f_j)` for the given spectra, where
    /// `corr(f, g)(v) = Σ_s f(s) g(s + v)`. Returns the real row-major grid.
    pub fn correlate(&self, terms: &[Term]) -> Vec<f64> {
        let mut acc = vec![Complex::new(0.0, 0.0); self.len()];
        for &(coef, f, g) in terms {
            for ((a, fv), gv) in acc.iter_mut().zip(f).zip(g) {
                *a += coef * fv.conj() * gv;
            }
        }
        self.inverse(acc).into_iter().map(|z| z.re).collect()
    }
}

fn transpose(buf: &[Complex<f64>], rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); buf.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = buf[r * cols + c];
        }
    }
    out
}

/// Iterates the half-plane of nonzero lags of a `rows x cols` grid.
pub(crate) fn half_plane_lags(rows: usize, cols: usize) -> impl Iterator<Item = (isize, isize)> {
    let (rows, cols) = (rows as isize, cols as isize);
    let first = (1..cols).map(|b| (0, b));
    let rest = (1..rows).flat_map(move |a| (-(cols - 1)..cols).map(move |b| (a, b)));
    first.chain(rest)
}

/// Increment sums over all ordered pairs `(s + v, s)` sharing one lag vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagIncrements {
    pub row_lag: isize,
    pub col_lag: isize,
    pub vector: Point,
    pub count: u64,
    /// `Σ (x(s+v) - x(s)) (y(s+v) - y(s))`
    pub sxy: f64,
    /// `Σ (x(s+v) - x(s))²`
    pub sxx: f64,
    /// `Σ (y(s+v) - y(s))²`
    pub syy: f64,
}

/// Increment sums for every half-plane lag with at least one pair.
pub fn increment_sums(lattice: &Lattice, x: &[f64], y: &[f64]) -> Vec<LagIncrements> {
    let (rows, cols) = (lattice.rows, lattice.cols);
    let xm = mean(x);
    let ym = mean(y);
    let fft = Fft2::for_lags(rows, cols);
    let grid = |f: &dyn Fn(usize) -> f64| lattice.scatter((0..x.len()).map(f));
    let fm = fft.forward_real(&lattice.mask(), rows, cols);
    let fx = fft.forward_real(&grid(&|i| x[i] - xm), rows, cols);
    let fy = fft.forward_real(&grid(&|i| y[i] - ym), rows, cols);
    let fxy = fft.forward_real(&grid(&|i| (x[i] - xm) * (y[i] - ym)), rows, cols);
    let fxx = fft.forward_real(&grid(&|i| (x[i] - xm).powi(2)), rows, cols);
    let fyy = fft.forward_real(&grid(&|i| (y[i] - ym).powi(2)), rows, cols);

    // (x' - x)(y' - y) = x'y' + xy - x'y - xy'  with x' = x(s + v)
    let count = fft.correlate(&[(1.0, &fm, &fm)]);
    let sxy = fft.correlate(&[
        (1.0, &fm, &fxy),
        (1.0, &fxy, &fm),
        (-1.0, &fy, &fx),
        (-1.0, &fx, &fy),
    ]);
    let sxx = fft.correlate(&[(1.0, &fm, &fxx), (1.0, &fxx, &fm), (-2.0, &fx, &fx)]);
    let syy = fft.correlate(&[(1.0, &fm, &fyy), (1.0, &fyy, &fm), (-2.0, &fy, &fy)]);
    // transform roundoff scales with n times the total energy
    let n = x.len() as f64;
    let floor = |e: f64| 1e-12 * n * e;
    let (ex, ey) = (
        floor(x.iter().map(|v| (v - xm).powi(2)).sum()),
        floor(y.iter().map(|v| (v - ym).powi(2)).sum()),
    );
    let snap = |v: f64, tol: f64| if v <= tol { 0.0 } else { v };

    half_plane_lags(rows, cols)
        .filter_map(|(a, b)| {
            let idx = fft.lag_index(a, b);
            let c = count[idx].round();
            (c >= 1.0).then(|| LagIncrements {
                row_lag: a,
                col_lag: b,
                vector: lattice.lag_vector(a, b),
                count: c as u64,
                sxy: sxy[idx],
                sxx: snap(sxx[idx], ex),
                syy: snap(syy[idx], ey),
            })
        })
        .collect()
}

/// Centered cross-product sums over all pairs sharing one lag vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagProducts {
    pub row_lag: isize,
    pub col_lag: isize,
    pub distance: f64,
    pub count: u64,
    /// `Σ (x(s) - x̄)(x(s+v) - x̄)`
    pub pxx: f64,
    /// `Σ (y(s) - ȳ)(y(s+v) - ȳ)`
    pub pyy: f64,
}

pub fn centered_products(lattice: &Lattice, x: &[f64], y: &[f64]) -> Vec<LagProducts> {
    let (rows, cols) = (lattice.rows, lattice.cols);
    let xm = mean(x);
    let ym = mean(y);
    let fft = Fft2::for_lags(rows, cols);
    let fm = fft.forward_real(&lattice.mask(), rows, cols);
    let fx = fft.forward_real(&lattice.scatter(x.iter().map(|v| v - xm)), rows, cols);
    let fy = fft.forward_real(&lattice.scatter(y.iter().map(|v| v - ym)), rows, cols);
    let count = fft.correlate(&[(1.0, &fm, &fm)]);
    let pxx = fft.correlate(&[(1.0, &fx, &fx)]);
    let pyy = fft.correlate(&[(1.0, &fy, &fy)]);
    half_plane_lags(rows, cols)
        .filter_map(|(a, b)| {
            let idx = fft.lag_index(a, b);
            let c = count[idx].round();
            (c >= 1.0).then(|| {
                let v = lattice.lag_vector(a, b);
                LagProducts {
                    row_lag: a,
                    col_lag: b,
                    distance: (v[0] * v[0] + v[1] * v[1]).sqrt(),
                    count: c as u64,
                    pxx: pxx[idx],
                    pyy: pyy[idx],
                }
            })
        })
        .collect()
}

/// Class co-occurrence matrix `Q[k][l] = Σ_i m_ik m_il` (row-major `K x K`),
/// where `m_ik` counts the neighbours of point `i` in class `k`.
pub fn class_cooccurrence(lattice: &Lattice, classes: &LagClasses) -> Vec<u64> {
    let (rows, cols) = (lattice.rows, lattice.cols);
    let k = classes.len();
    let fft = Fft2::for_lags(rows, cols);
    let mask = lattice.mask();
    let fm = fft.forward_real(&mask, rows, cols);

    let mut class_of_lag = vec![usize::MAX; fft.len()];
    for (a, b) in half_plane_lags(rows, cols) {
        let v = lattice.lag_vector(a, b);
        if let Some(c) = classes.class_of((v[0] * v[0] + v[1] * v[1]).sqrt()) {
            class_of_lag[fft.lag_index(a, b)] = c;
            class_of_lag[fft.lag_index(-a, -b)] = c;
        }
    }

    let present: Vec<usize> = (0..lattice.cells()).filter(|&i| mask[i] > 0.0).collect();
    // neighbours[class][point]
    let mut neighbours = vec![vec![0u64; present.len()]; k];
    for (c, counts) in neighbours.iter_mut().enumerate() {
        if classes.card[c] == 0 {
            continue;
        }
        let kernel: Vec<Complex<f64>> = class_of_lag
            .iter()
            .map(|&l| Complex::new(if l == c { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let fk = fft.forward(kernel);
        // Σ_v K(v) m(s + v) = corr(K, m)(s)
        let conv = fft.correlate(&[(1.0, &fk, &fm)]);
        for (slot, &cell) in counts.iter_mut().zip(&present) {
            let (r, col) = (cell / cols, cell % cols);
            *slot = conv[r * fft.pcol + col].round().max(0.0) as u64;
        }
    }

    let mut q = vec![0u64; k * k];
    for a in 0..k {
        for b in a..k {
            let s: u64 = neighbours[a]
                .iter()
                .zip(&neighbours[b])
                .map(|(u, v)| u * v)
                .sum();
            q[a * k + b] = s;
            q[b * k + a] = s;
        }
    }
    q
}

/// Which traversal computes the lag sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum Engine {
    /// FFT lag sums when the locations form a regular grid, pair streaming otherwise.
    #[default]
    Auto,
    /// Always stream pairs.
    Pairs,
    /// Require a regular grid.
    Lattice,
}

impl Engine {
    /// The lattice to use, `None` for pair streaming.
    pub fn lattice_for(self, coords: &[Point]) -> crate::Result<Option<Lattice>> {
        match self {
            Engine::Pairs => Ok(None),
            Engine::Auto => Ok(Lattice::detect(coords)),
            Engine::Lattice => Lattice::detect(coords).map(Some).ok_or_else(|| {
                crate::Error::InvalidInput("locations do not form a regular grid".into())
            }),
        }
    }
}

/// Distance and pair count of every half-plane lag with at least one pair.
pub fn lag_counts(lattice: &Lattice) -> Vec<(f64, u64)> {
    let (rows, cols) = (lattice.rows, lattice.cols);
    let fft = Fft2::for_lags(rows, cols);
    let fm = fft.forward_real(&lattice.mask(), rows, cols);
    let count = fft.correlate(&[(1.0, &fm, &fm)]);
    half_plane_lags(rows, cols)
        .filter_map(|(a, b)| {
            let c = count[fft.lag_index(a, b)].round();
            let v = lattice.lag_vector(a, b);
            (c >= 1.0).then(|| ((v[0] * v[0] + v[1] * v[1]).sqrt(), c as u64))
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
