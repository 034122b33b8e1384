//! Brute-force references: full matrices and explicit double loops, written
//! straight from the definitions and sharing no code with the library.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Pt = [f64; 2];

pub fn dist(a: Pt, b: Pt) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn max_dist(c: &[Pt]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..c.len() {
        for j in 0..c.len() {
            d = d.max(dist(c[i], c[j]));
        }
    }
    d
}

/// Upper bounds `D k / K`, last bound exactly `D`.
pub fn bounds(c: &[Pt], k: usize) -> Vec<f64> {
    let d = max_dist(c);
    let mut b: Vec<f64> = (1..=k).map(|i| d * i as f64 / k as f64).collect();
    b[k - 1] = d;
    b
}

/// Class of a distance by linear search over `(lb, ub]`.
pub fn class(b: &[f64], d: f64) -> Option<usize> {
    let mut lb = 0.0;
    for (k, &ub) in b.iter().enumerate() {
        if d > lb && d <= ub {
            return Some(k);
        }
        lb = ub;
    }
    None
}

pub fn card(c: &[Pt], b: &[f64]) -> Vec<u64> {
    let mut n = vec![0; b.len()];
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            if let Some(k) = class(b, dist(c[i], c[j])) {
                n[k] += 1;
            }
        }
    }
    n
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `Ĉ(0)` (divisor n) followed by `Ĉ(k)` per class, 0 for empty classes.
pub fn class_cov(c: &[Pt], v: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let m = mean(v);
    let n = v.len();
    let c0 = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n as f64;
    let mut s = vec![0.0; b.len()];
    let mut cnt = vec![0u64; b.len()];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if let Some(k) = class(b, dist(c[i], c[j])) {
                    s[k] += (v[i] - m) * (v[j] - m);
                    cnt[k] += 1;
                }
            }
        }
    }
    let ck = s
        .iter()
        .zip(&cnt)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    (c0, ck)
}

/// `Σ̂[i,i] = Ĉ(0)`, `Σ̂[i,j] = Ĉ(class(i,j))`, 0 outside every class.
pub fn sigma_matrix(c: &[Pt], v: &[f64], b: &[f64]) -> DMatrix<f64> {
    let (c0, ck) = class_cov(c, v, b);
    let n = c.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c0
        } else {
            class(b, dist(c[i], c[j])).map_or(0.0, |k| ck[k])
        }
    })
}

/// `tr(B Σ_X B Σ_Y) / (tr(B Σ_X) tr(B Σ_Y))` with explicit `n x n` matrices.
pub fn sigma2_dutilleul(c: &[Pt], x: &[f64], y: &[f64], b: &[f64]) -> f64 {
    let n = c.len();
    let bm = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let sx = sigma_matrix(c, x, b);
    let sy = sigma_matrix(c, y, b);
    let bx = &bm * sx;
    let by = &bm * sy;
    (&bx * &by).trace() / (bx.trace() * by.trace())
}

/// `Σ_k n_k Ĉ_X(k) Ĉ_Y(k) / (n² Ĉ_X(0) Ĉ_Y(0))`, `n_k` the unordered pair count.
pub fn sigma2_clifford(c: &[Pt], x: &[f64], y: &[f64], b: &[f64]) -> f64 {
    let (cx0, cx) = class_cov(c, x, b);
    let (cy0, cy) = class_cov(c, y, b);
    let nk = card(c, b);
    let n = c.len() as f64;
    let s: f64 = (0..b.len()).map(|k| nk[k] as f64 * cx[k] * cy[k]).sum();
    s / (n * n * cx0 * cy0)
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Codispersion per class; `None` without pairs or variation.
pub fn codisp(c: &[Pt], x: &[f64], y: &[f64], b: &[f64]) -> Vec<Option<f64>> {
    let k = b.len();
    let (mut sxy, mut sxx, mut syy) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            if let Some(q) = class(b, dist(c[i], c[j])) {
                let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
                sxy[q] += dx * dy;
                sxx[q] += dx * dx;
                syy[q] += dy * dy;
            }
        }
    }
    (0..k)
        .map(|q| (sxx[q] > 0.0 && syy[q] > 0.0).then(|| sxy[q] / (sxx[q] * syy[q]).sqrt()))
        .collect()
}

/// Ordered-pair directional codispersion, `‖(s_i - s_j) - h‖ <= tol`.
pub fn codisp_dir(c: &[Pt], x: &[f64], y: &[f64], h: Pt, tol: f64) -> Option<f64> {
    let (mut sxy, mut sxx, mut syy, mut any) = (0.0, 0.0, 0.0, false);
    for i in 0..c.len() {
        for j in 0..c.len() {
            if i == j {
                continue;
            }
            let v = [c[i][0] - c[j][0] - h[0], c[i][1] - c[j][1] - h[1]];
            if (v[0] * v[0] + v[1] * v[1]).sqrt() <= tol {
                let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
                sxy += dx * dy;
                sxx += dx * dx;
                syy += dy * dy;
                any = true;
            }
        }
    }
    (any && sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Tjøstheim's A from the definition: rank `r` holds the `r`-th smallest
/// value, earlier index first among ties.
pub fn tjostheim(c: &[Pt], x: &[f64], y: &[f64]) -> f64 {
    let n = c.len();
    let (m0, m1) = (
        c.iter().map(|p| p[0]).sum::<f64>() / n as f64,
        c.iter().map(|p| p[1]).sum::<f64>() / n as f64,
    );
    let cc: Vec<Pt> = c.iter().map(|p| [p[0] - m0, p[1] - m1]).collect();
    let rank = |v: &[f64], i: usize| -> usize {
        1 + (0..n)
            .filter(|&j| v[j] < v[i] || (v[j] == v[i] && j < i))
            .count()
    };
    let holder = |v: &[f64], r: usize| -> usize { (0..n).find(|&i| rank(v, i) == r).unwrap() };
    let (mut num, mut ax, mut ay) = (0.0, 0.0, 0.0);
    for r in 1..=n {
        let px = cc[holder(x, r)];
        let py = cc[holder(y, r)];
        num += px[0] * py[0] + px[1] * py[1];
        ax += px[0] * px[0] + px[1] * px[1];
        ay += py[0] * py[0] + py[1] * py[1];
    }
    num / (ax * ay).sqrt()
}

/// A random sample: uniform scattered points, or a full small grid.
pub struct Case {
    pub coords: Vec<Pt>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub nclass: usize,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Pt> = if seed % 4 == 3 {
        let (r, c) = (rng.random_range(3..=12), rng.random_range(4..=16));
        (0..r)
            .flat_map(|i| (0..c).map(move |j| [j as f64, i as f64]))
            .collect()
    } else {
        let n = rng.random_range(10..=200);
        (0..n)
            .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..60.0)])
            .collect()
    };
    let n = coords.len();
    let x: Vec<f64> = coords
        .iter()
        .map(|p| (p[0] / 17.0).sin() + rng.random_range(-1.0..1.0))
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 0.6 * x[i] + rng.random_range(-1.0..1.0))
        .collect();
    Case {
        coords,
        x,
        y,
        nclass: rng.random_range(1..=15),
    }
}
