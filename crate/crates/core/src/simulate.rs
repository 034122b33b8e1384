//! Correlated Gaussian field pairs from a nonseparable space-"time"
//! covariance, used with the time lag `u` indexing the two variables:
//!
//! ```text
//! C(h, u) = η(‖h‖² / ψ(u²)) / ψ(u²)^{d/2},  ψ(r) = (a r^α + 1)^β,
//! η(r) = (1 + (r / σ²)^{γ/2})^{-c/γ}
//! ```
//!
//! `η` is the generalized Cauchy family in distance, `(1 + (‖h‖/σ)^γ)^{-c/γ}`
//! at `u = 0`, which is positive definite for `0 < γ <= 2`. Raising `r = ‖h‖²`
//! itself to `γ` (so `‖h‖^{2γ}`) is not: with `γ = 2` the block covariance
//! already has negative eigenvalues on a 4 x 4 grid.
//!
//! `Σ = [[C(·,0), C(·,1)], [C(·,1), C(·,0)]]` is factorized densely
//! ([`GaussianPairSampler`]). For regular grids beyond the dense cap,
//! [`GridPairSampler`] draws exact samples by circulant embedding.
//!
//! Every draw uses ChaCha20 seeded with a `u64` (see [`RNG_NAME`]).

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use serde::Serialize;

use crate::codispersion::codisp_binned;
use crate::error::{Error, Result};
use crate::geometry::{distance, grid_coords, pair_count, Binning, Point, PointSample};
use crate::lattice::{next_fast_len, Fft2};
use crate::mttest::modified_ttest;

/// Recorded in output metadata so runs can be replayed.
pub const RNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.9) seed_from_u64";

/// Largest `n` for which the dense `2n x 2n` covariance is built.
pub const DEFAULT_CAP: usize = 4096;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovSpec {
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub c: f64,
    pub gamma: f64,
    pub d: u32,
}

impl Default for CovSpec {
    /// `a = α = β = σ = 1`, `c = 3`, `γ = 2`, `d = 2`.
    fn default() -> Self {
        Self {
            a: 1.0,
            alpha: 1.0,
            beta: 1.0,
            sigma: 1.0,
            c: 3.0,
            gamma: 2.0,
            d: 2,
        }
    }
}

impl CovSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let checks = [
            (self.a > 0.0 && self.a.is_finite(), "a > 0"),
            (unit(self.alpha), "alpha in (0, 1]"),
            (unit(self.beta), "beta in (0, 1]"),
            (self.sigma > 0.0 && self.sigma.is_finite(), "sigma > 0"),
            (self.c > 0.0 && self.c.is_finite(), "c > 0"),
            (self.gamma > 0.0 && self.gamma <= 2.0, "gamma in (0, 2]"),
            (self.d >= 1, "d >= 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(Error::InvalidInput(format!(
                "covariance spec requires {what}"
            ))),
            None => Ok(()),
        }
    }

    fn psi(&self, r: f64) -> f64 {
        (self.a * r.powf(self.alpha) + 1.0).powf(self.beta)
    }

    fn eta(&self, r: f64) -> f64 {
        (1.0 + (r / (self.sigma * self.sigma)).powf(self.gamma / 2.0)).powf(-self.c / self.gamma)
    }
}

/// `C(‖h‖, u)`.
pub fn nonsep_cov(h_norm: f64, u: f64, spec: &CovSpec) -> f64 {
    let p = spec.psi(u * u);
    spec.eta(h_norm * h_norm / p) / p.powf(spec.d as f64 / 2.0)
}

pub fn build_block_sigma(coords: &[Point], spec: &CovSpec) -> Result<DMatrix<f64>> {
    build_block_sigma_capped(coords, spec, DEFAULT_CAP)
}

pub fn build_block_sigma_capped(
    coords: &[Point],
    spec: &CovSpec,
    cap: usize,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = coords.len();
    if n > cap {
        return Err(Error::CapExceeded { size: n, cap });
    }
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..=i {
            let h = distance(&coords[i], &coords[j]);
            let c0 = nonsep_cov(h, 0.0, spec);
            let c1 = nonsep_cov(h, 1.0, spec);
            for (r, c, v) in [
                (i, j, c0),
                (n + i, n + j, c0),
                (n + i, j, c1),
                (n + j, i, c1),
            ] {
                s[(r, c)] = v;
                s[(c, r)] = v;
            }
        }
    }
    Ok(s)
}

/// Lower Cholesky factor, adding `δI` with `δ = 1e-10, 1e-9, …, 1e-6` if the
/// plain factorization fails. Returns the factor and the jitter used.
pub fn factorize(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(ch) = sigma.clone().cholesky() {
        return Ok((ch.l(), 0.0));
    }
    let mut delta = JITTER_START;
    while delta <= JITTER_MAX * (1.0 + 1e-9) {
        let mut m = sigma.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += delta;
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.l(), delta));
        }
        delta *= 10.0;
    }
    Err(Error::NotPositiveDefinite(JITTER_MAX))
}

/// Dense sampler: factorizes `Σ` once, then draws `Z = L ε`.
#[derive(Debug, Clone)]
pub struct GaussianPairSampler {
    l: DMatrix<f64>,
    jitter: f64,
}

impl GaussianPairSampler {
    pub fn new(coords: &[Point], spec: &CovSpec) -> Result<Self> {
        let sigma = build_block_sigma(coords, spec)?;
        let (l, jitter) = factorize(&sigma)?;
        Ok(Self { l, jitter })
    }

    pub fn len(&self) -> usize {
        self.l.nrows() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let eps = DVector::from_iterator(
            2 * n,
            (0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        let z = &self.l * eps;
        let z = z.as_slice();
        (z[..n].to_vec(), z[n..].to_vec())
    }
}

pub fn sample_gaussian_pair(
    coords: &[Point],
    spec: &CovSpec,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(GaussianPairSampler::new(coords, spec)?.sample(&mut rng(seed)))
}

/// Exact sampler on a `rows x cols` unit grid by circulant embedding.
///
/// `W₁ = (X + Y)/√2` and `W₂ = (X - Y)/√2` are independent stationary fields
/// with covariances `C(·,0) ± C(·,1)`; each is embedded in a periodic grid
/// (doubled until its spectrum is nonnegative) and drawn with one FFT.
pub struct GridPairSampler {
    rows: usize,
    cols: usize,
    fft: Fft2,
    /// `sqrt(λ N)` for each field, in the FFT's spectral layout.
    scale: [Vec<f64>; 2],
}

/// Largest embedding tried, as a multiple of the grid side.
const MAX_EMBED_FACTOR: usize = 16;

impl GridPairSampler {
    pub fn new(rows: usize, cols: usize, spec: &CovSpec) -> Result<Self> {
        spec.validate()?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        let (mut prow, mut pcol) = (next_fast_len(2 * rows), next_fast_len(2 * cols));
        loop {
            let fft = Fft2::new(prow, pcol);
            let plus = embedding_spectrum(&fft, |h| {
                nonsep_cov(h, 0.0, spec) + nonsep_cov(h, 1.0, spec)
            });
            let minus = embedding_spectrum(&fft, |h| {
                nonsep_cov(h, 0.0, spec) - nonsep_cov(h, 1.0, spec)
            });
            if let (Some(p), Some(m)) = (plus, minus) {
                return Ok(Self {
                    rows,
                    cols,
                    fft,
                    scale: [p, m],
                });
            }
            if prow >= MAX_EMBED_FACTOR * rows && pcol >= MAX_EMBED_FACTOR * cols {
                return Err(Error::NotPositiveDefinite(0.0));
            }
            prow = next_fast_len(2 * prow);
            pcol = next_fast_len(2 * pcol);
        }
    }

    pub fn embedding(&self) -> (usize, usize) {
        (self.fft.prow, self.fft.pcol)
    }

    /// Row-major fields on the grid.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut w = self.scale.iter().map(|s| {
            let spec: Vec<Complex<f64>> = s
                .iter()
                .map(|&v| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex::new(v * re, v * im)
                })
                .collect();
            self.fft.inverse(spec)
        });
        let (w1, w2) = (w.next().unwrap(), w.next().unwrap());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut x = Vec::with_capacity(self.rows * self.cols);
        let mut y = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let k = i * self.fft.pcol + j;
                x.push(r * (w1[k].re + w2[k].re));
                y.push(r * (w1[k].re - w2[k].re));
            }
        }
        (x, y)
    }

    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> Result<PointSample> {
        let (x, y) = self.sample(rng);
        PointSample::from_grid(self.rows, self.cols, x, y)
    }
}

/// `sqrt(λ N)` of the periodic covariance with wrapped distances, or `None`
/// when a clearly negative eigenvalue shows the embedding is too small.
fn embedding_spectrum(fft: &Fft2, cov: impl Fn(f64) -> f64) -> Option<Vec<f64>> {
    let (p, q) = (fft.prow, fft.pcol);
    let mut base = vec![Complex::new(0.0, 0.0); p * q];
    for i in 0..p {
        let di = i.min(p - i) as f64;
        for j in 0..q {
            let dj = j.min(q - j) as f64;
            base[i * q + j] = Complex::new(cov((di * di + dj * dj).sqrt()), 0.0);
        }
    }
    let lambda = fft.forward(base);
    let top = lambda.iter().map(|z| z.re).fold(0.0, f64::max);
    let n = (p * q) as f64;
    let mut out = Vec::with_capacity(lambda.len());
    for z in lambda {
        if z.re < -1e-10 * top {
            return None;
        }
        out.push((z.re.max(0.0) * n).sqrt());
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Codisp,
    Ttest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Circulant embedding.
    #[default]
    Grid,
    /// Dense Cholesky, `n <= DEFAULT_CAP`.
    Dense,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<BenchMethod>,
    pub nclass: usize,
    pub spec: CovSpec,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// Each timing repeats the call until this much time has accumulated.
    pub min_time: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![8, 16, 32, 64],
            reps: 10,
            methods: vec![BenchMethod::Codisp, BenchMethod::Ttest],
            nclass: crate::geometry::DEFAULT_NCLASS,
            spec: CovSpec::default(),
            seed: 1,
            sampler: SamplerKind::Grid,
            min_time: Duration::from_millis(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub n: usize,
    pub method: BenchMethod,
    pub reps: usize,
    pub mean_secs: f64,
    pub ops: u64,
}

/// `(nclass + 1) n (n - 1) / 2`, plus `n²` for the t-test.
pub fn op_count(n: usize, nclass: usize, method: BenchMethod) -> u64 {
    let base = (nclass as u64 + 1) * pair_count(n);
    match method {
        BenchMethod::Codisp => base,
        BenchMethod::Ttest => base + (n as u64) * (n as u64),
    }
}

type Draw = dyn Fn(&mut ChaCha20Rng) -> Result<PointSample>;

/// Times the analyses on simulated `size x size` field pairs. Replicates run
/// one after another.
pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.reps == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidInput(
            "bench needs reps >= 1 and a method".into(),
        ));
    }
    let mut rng = rng(cfg.seed);
    let binning = Binning::classes(cfg.nclass);
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        if size < 2 {
            return Err(Error::InvalidInput(format!("grid size {size} < 2")));
        }
        let n = size * size;
        let draw: Box<Draw> = match cfg.sampler {
            SamplerKind::Grid => {
                let s = GridPairSampler::new(size, size, &cfg.spec)?;
                Box::new(move |r| s.sample_pair(r))
            }
            SamplerKind::Dense => {
                let s = GaussianPairSampler::new(&grid_coords(size, size), &cfg.spec)?;
                Box::new(move |r| {
                    let (x, y) = s.sample(r);
                    PointSample::from_grid(size, size, x, y)
                })
            }
        };
        let mut total = vec![0.0; cfg.methods.len()];
        for _ in 0..cfg.reps {
            let sample = draw(&mut rng)?;
            for (t, m) in total.iter_mut().zip(&cfg.methods) {
                *t += match m {
                    BenchMethod::Codisp => {
                        time_call(cfg.min_time, || codisp_binned(&sample, binning).map(drop))?
                    }
                    BenchMethod::Ttest => {
                        time_call(cfg.min_time, || modified_ttest(&sample, binning).map(drop))?
                    }
                };
            }
        }
        for (t, &m) in total.iter().zip(&cfg.methods) {
            rows.push(BenchRow {
                size,
                n,
                method: m,
                reps: cfg.reps,
                mean_secs: t / cfg.reps as f64,
                ops: op_count(n, cfg.nclass, m),
            });
        }
    }
    Ok(rows)
}

/// Mean seconds per call.
fn time_call(min_time: Duration, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        f()?;
        calls += 1;
        let el = start.elapsed();
        if el >= min_time {
            return Ok(el.as_secs_f64() / calls as f64);
        }
    }
}
