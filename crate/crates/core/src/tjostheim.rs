//! Tjøstheim's rank-based coefficient of spatial association.
//!
//! Both coordinate columns are centered, each variable is ranked (ties broken
//! by first occurrence), and `F(i)`, `G(i)` denote the first and second
//! coordinate of the observation holding rank `i`. Then
//!
//! ```text
//! A = Σ_i [F_X(i) F_Y(i) + G_X(i) G_Y(i)]
//!     / sqrt(Σ_i [F_X(i)² + G_X(i)²] · Σ_i [F_Y(i)² + G_Y(i)²])
//! ```
//!
//! and under independence
//!
//! ```text
//! Var(A) = [(Σ s₁²)² + 2 (Σ s₁ s₂)² + (Σ s₂²)²] / [(n - 1) (Σ s₁² + Σ s₂²)²]
//! ```
//!
//! with centered coordinates. Ties in the data are handled by the ranking
//! convention only; the variance formula assumes continuous data.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, PointSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TjostheimResult {
    pub coef: f64,
    pub variance: f64,
}

impl fmt::Display for TjostheimResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Tjostheim's coefficient: {:.4}", self.coef)?;
        write!(f, "attr(,\"variance\"): {:.4}", self.variance)
    }
}

/// Ranks `1..=n`; equal values are ranked in order of appearance.
pub fn rank_first(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps earlier indices first among ties
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Coordinates of the observation holding each rank: `F[r-1]`, `G[r-1]` are
/// the first and second coordinate of the point whose rank is `r`.
pub fn coordinate_of_rank(coords: &[Point], ranks: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = coords.len();
    if ranks.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} ranks for {} locations",
            ranks.len(),
            n
        )));
    }
    let mut f = vec![f64::NAN; n];
    let mut g = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (p, &r) in coords.iter().zip(ranks) {
        if r == 0 || r > n || seen[r - 1] {
            return Err(Error::InvalidInput(
                "ranks are not a permutation of 1..n".into(),
            ));
        }
        seen[r - 1] = true;
        f[r - 1] = p[0];
        g[r - 1] = p[1];
    }
    Ok((f, g))
}

/// Coordinates shifted so both columns have mean zero.
pub fn centered_coords(coords: &[Point]) -> Result<Vec<Point>> {
    let n = coords.len() as f64;
    let m0 = coords.iter().map(|p| p[0]).sum::<f64>() / n;
    let m1 = coords.iter().map(|p| p[1]).sum::<f64>() / n;
    for col in 0..2 {
        if coords.iter().all(|p| p[col] == coords[0][col]) {
            return Err(Error::DegenerateCoordinates(col + 1));
        }
    }
    Ok(coords.iter().map(|p| [p[0] - m0, p[1] - m1]).collect())
}

pub fn tjostheim_coef(sample: &PointSample) -> Result<TjostheimResult> {
    let centered = centered_coords(sample.coords())?;
    let (fx, gx) = coordinate_of_rank(&centered, &rank_first(sample.x()))?;
    let (fy, gy) = coordinate_of_rank(&centered, &rank_first(sample.y()))?;

    let mut num = 0.0;
    let (mut ssx, mut ssy) = (0.0, 0.0);
    for i in 0..fx.len() {
        num += fx[i] * fy[i] + gx[i] * gy[i];
        ssx += fx[i] * fx[i] + gx[i] * gx[i];
        ssy += fy[i] * fy[i] + gy[i] * gy[i];
    }
    Ok(TjostheimResult {
        coef: num / (ssx * ssy).sqrt(),
        variance: null_variance(&centered),
    })
}

/// Variance of `A` under independence, from centered coordinates.
pub fn null_variance(centered: &[Point]) -> f64 {
    let n = centered.len() as f64;
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for p in centered {
        s11 += p[0] * p[0];
        s12 += p[0] * p[1];
        s22 += p[1] * p[1];
    }
    (s11 * s11 + 2.0 * s12 * s12 + s22 * s22) / ((n - 1.0) * (s11 + s22).powi(2))
}
