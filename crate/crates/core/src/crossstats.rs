//! Per-class covariance estimates and Moran indices.
//!
//! For class `k` with `n_k` pairs,
//! `Ĉ_v(k) = Σ_{(i,j) ∈ k} (v_i - v̄)(v_j - v̄) / n_k`, and `Ĉ_v(0)` is the
//! variance with divisor `n`. Empty classes get `Ĉ(k) = 0`.
//!
//! Alongside the covariances we record the class co-occurrence matrix
//! `Q[k][l] = Σ_i m_ik m_il`, where `m_ik` is the number of points in class
//! `k` around point `i`. It depends on geometry only and lets the modified
//! t-test evaluate `1ᵀ Σ̂_X Σ̂_Y 1` exactly from class sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance, fold_pairs, LagClasses, PointSample};
use crate::lattice::{self, Engine};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumCovariances {
    pub c_x: Vec<f64>,
    pub c_y: Vec<f64>,
    pub c_x0: f64,
    pub c_y0: f64,
    pub classes: LagClasses,
    pub n: usize,
    /// Row-major `K x K` co-occurrence counts.
    pub cooccurrence: Vec<u64>,
}

impl StratumCovariances {
    pub fn nclass(&self) -> usize {
        self.classes.len()
    }

    /// `Q[k][l]`
    pub fn q(&self, k: usize, l: usize) -> u64 {
        self.cooccurrence[k * self.nclass() + l]
    }
}

pub fn stratum_covariances(
    sample: &PointSample,
    classes: &LagClasses,
) -> Result<StratumCovariances> {
    stratum_covariances_with(sample, classes, Engine::Auto)
}

pub fn stratum_covariances_with(
    sample: &PointSample,
    classes: &LagClasses,
    engine: Engine,
) -> Result<StratumCovariances> {
    let n = sample.len();
    let (xm, c_x0) = mean_and_variance(sample.x());
    let (ym, c_y0) = mean_and_variance(sample.y());
    if c_x0 <= 0.0 {
        return Err(Error::ConstantVariable("x"));
    }
    if c_y0 <= 0.0 {
        return Err(Error::ConstantVariable("y"));
    }
    let k = classes.len();

    let (sum_x, sum_y, cooccurrence) = match engine.lattice_for(sample.coords())? {
        Some(lat) => {
            let mut sx = vec![0.0; k];
            let mut sy = vec![0.0; k];
            for p in lattice::centered_products(&lat, sample.x(), sample.y()) {
                if let Some(c) = classes.class_of(p.distance) {
                    sx[c] += p.pxx;
                    sy[c] += p.pyy;
                }
            }
            (sx, sy, lattice::class_cooccurrence(&lat, classes))
        }
        None => {
            let (x, y) = (sample.x(), sample.y());
            let (sx, sy) = fold_pairs(
                sample.coords(),
                || (vec![0.0; k], vec![0.0; k]),
                |(sx, sy), i, j, d| {
                    if let Some(c) = classes.class_of(d) {
                        sx[c] += (x[i] - xm) * (x[j] - xm);
                        sy[c] += (y[i] - ym) * (y[j] - ym);
                    }
                },
                |(sx, sy), (ox, oy)| {
                    sx.iter_mut().zip(ox).for_each(|(a, b)| *a += b);
                    sy.iter_mut().zip(oy).for_each(|(a, b)| *a += b);
                },
            );
            (sx, sy, cooccurrence_by_rows(sample, classes))
        }
    };

    let per_pair = |s: Vec<f64>| -> Vec<f64> {
        s.into_iter()
            .zip(&classes.card)
            .map(|(v, &c)| if c == 0 { 0.0 } else { v / c as f64 })
            .collect()
    };
    let c_x = per_pair(sum_x);
    let c_y = per_pair(sum_y);
    if c_x.iter().chain(&c_y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite class covariance".into()));
    }
    Ok(StratumCovariances {
        c_x,
        c_y,
        c_x0,
        c_y0,
        classes: classes.clone(),
        n,
        cooccurrence,
    })
}

/// One pass over all ordered pairs: per point, count neighbours per class and
/// accumulate the outer product of those counts.
fn cooccurrence_by_rows(sample: &PointSample, classes: &LagClasses) -> Vec<u64> {
    let coords = sample.coords();
    let n = coords.len();
    let k = classes.len();
    let chunks = par::uniform_chunks(n, n);
    let parts = par::map_chunks(&chunks, |rows| {
        let mut q = vec![0u64; k * k];
        let mut m = vec![0u64; k];
        for i in rows {
            m.iter_mut().for_each(|v| *v = 0);
            let a = &coords[i];
            for (j, b) in coords.iter().enumerate() {
                if j != i {
                    if let Some(c) = classes.class_of(distance(a, b)) {
                        m[c] += 1;
                    }
                }
            }
            for (r, &mr) in m.iter().enumerate() {
                if mr == 0 {
                    continue;
                }
                for (c, &mc) in m.iter().enumerate() {
                    q[r * k + c] += mr * mc;
                }
            }
        }
        q
    });
    let mut q = vec![0u64; k * k];
    for p in parts {
        q.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    q
}

/// `K x 2` matrix of Moran indices `[Ĉ_X(k)/Ĉ_X(0), Ĉ_Y(k)/Ĉ_Y(0)]`.
pub fn moran_indices(cov: &StratumCovariances) -> Vec<[f64; 2]> {
    cov.c_x
        .iter()
        .zip(&cov.c_y)
        .map(|(cx, cy)| [cx / cov.c_x0, cy / cov.c_y0])
        .collect()
}

/// Mean and variance with divisor `n`.
pub(crate) fn mean_and_variance(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
    (m, var)
}
