//! Modified t-test for the correlation between two spatially autocorrelated
//! variables.
//!
//! The variance of the sample correlation `r` is estimated from class
//! covariances, the effective sample size is `M = 1 + 1/σ̂_r²`, and
//! `F = (M - 2) r² / (1 - r²)` is referred to an `F(1, M - 2)` distribution.
//!
//! Two estimators of `σ̂_r²` are available. The default is the trace form
//!
//! ```text
//! σ̂_r² = tr(B Σ̂_X B Σ̂_Y) / (tr(B Σ̂_X) tr(B Σ̂_Y)),   B = I - 11ᵀ/n,
//! ```
//!
//! with `Σ̂[i,i] = Ĉ(0)` and `Σ̂[i,j] = Ĉ(class(i, j))`. Neither `B` nor the
//! `Σ̂` matrices are formed: expanding `B` gives
//!
//! ```text
//! tr(B Σ_X B Σ_Y) = tr(Σ_X Σ_Y) - (2/n) 1ᵀΣ_X Σ_Y 1 + (1/n²)(1ᵀΣ_X 1)(1ᵀΣ_Y 1)
//! tr(B Σ)         = tr(Σ) - (1/n) 1ᵀΣ 1
//! ```
//!
//! and every term is a combination of class sums, class counts and the class
//! co-occurrence matrix. The alternative is the stratified sum
//! `Σ_k n_k Ĉ_X(k) Ĉ_Y(k) / (n² Ĉ_X(0) Ĉ_Y(0))`.

use std::fmt;

use serde::Serialize;

use crate::crossstats::{moran_indices, stratum_covariances_with, StratumCovariances};
use crate::error::{Error, Result};
use crate::fdist::f_sf;
use crate::geometry::{Binning, LagClasses, PointSample};
use crate::lattice::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceEstimator {
    /// Trace form with the centering matrix.
    #[default]
    Dutilleul,
    /// Stratified sum over lag classes.
    Clifford,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TTestOptions {
    pub binning: Binning,
    pub variance: VarianceEstimator,
    pub engine: Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MTTestResult {
    pub fstat: f64,
    /// Denominator degrees of freedom `M - 2` (the numerator has 1).
    pub dof: f64,
    /// Effective sample size `M`.
    pub ess: f64,
    pub p_value: f64,
    /// Pearson correlation.
    pub corr: f64,
    pub sigma2_r: f64,
    pub imoran: Vec<[f64; 2]>,
    pub classes: LagClasses,
    pub variance: VarianceEstimator,
}

pub fn effective_variance_dutilleul(cov: &StratumCovariances) -> Result<f64> {
    let n = cov.n as f64;
    let k = cov.nclass();
    let card = |c: usize| cov.classes.card[c] as f64;

    let mut tr_xy = n * cov.c_x0 * cov.c_y0;
    let mut pair_x = 0.0; // Σ_k 2 n_k Ĉ_X(k) = Σ_{i≠j} Σ̂_X[i,j]
    let mut pair_y = 0.0;
    for c in 0..k {
        tr_xy += 2.0 * card(c) * cov.c_x[c] * cov.c_y[c];
        pair_x += 2.0 * card(c) * cov.c_x[c];
        pair_y += 2.0 * card(c) * cov.c_y[c];
    }
    let sum_x = n * cov.c_x0 + pair_x; // 1ᵀ Σ̂_X 1
    let sum_y = n * cov.c_y0 + pair_y;

    // 1ᵀ Σ̂_X Σ̂_Y 1 = Σ_i (row sum of Σ̂_X at i)(row sum of Σ̂_Y at i)
    let mut quad = 0.0;
    for a in 0..k {
        for b in 0..k {
            quad += cov.c_x[a] * cov.q(a, b) as f64 * cov.c_y[b];
        }
    }
    let row_xy = n * cov.c_x0 * cov.c_y0 + cov.c_x0 * pair_y + cov.c_y0 * pair_x + quad;

    let num = tr_xy - 2.0 / n * row_xy + sum_x * sum_y / (n * n);
    let tb_x = n * cov.c_x0 - sum_x / n;
    let tb_y = n * cov.c_y0 - sum_y / n;
    positive(num / (tb_x * tb_y))
}

pub fn effective_variance_clifford(cov: &StratumCovariances, n: usize) -> Result<f64> {
    let n = n as f64;
    let num: f64 = cov
        .c_x
        .iter()
        .zip(&cov.c_y)
        .zip(&cov.classes.card)
        .map(|((cx, cy), &c)| c as f64 * cx * cy)
        .sum();
    positive(num / (n * n * cov.c_x0 * cov.c_y0))
}

fn positive(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonpositiveEffectiveVariance(v))
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - xm, b - ym);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// Modified t-test with the default (trace) variance estimator.
pub fn modified_ttest(sample: &PointSample, binning: Binning) -> Result<MTTestResult> {
    modified_ttest_with(
        sample,
        &TTestOptions {
            binning,
            ..Default::default()
        },
    )
}

pub fn modified_ttest_with(sample: &PointSample, opts: &TTestOptions) -> Result<MTTestResult> {
    let classes = LagClasses::build_with(sample.coords(), opts.binning, opts.engine)?;
    let cov = stratum_covariances_with(sample, &classes, opts.engine)?;
    let corr = pearson(sample.x(), sample.y());
    let one_minus_r2 = 1.0 - corr * corr;
    if !(one_minus_r2 > 0.0) {
        return Err(Error::DegenerateCorrelation);
    }
    let sigma2_r = match opts.variance {
        VarianceEstimator::Dutilleul => effective_variance_dutilleul(&cov)?,
        VarianceEstimator::Clifford => effective_variance_clifford(&cov, sample.len())?,
    };
    let ess = 1.0 + 1.0 / sigma2_r;
    if !(ess > 2.0) {
        return Err(Error::InsufficientEffectiveSampleSize(ess));
    }
    let dof = ess - 2.0;
    let fstat = dof * corr * corr / one_minus_r2;
    Ok(MTTestResult {
        fstat,
        dof,
        ess,
        p_value: f_sf(fstat, 1.0, dof),
        corr,
        sigma2_r,
        imoran: moran_indices(&cov),
        classes,
        variance: opts.variance,
    })
}

impl MTTestResult {
    /// Test line plus the per-class bounds, cardinalities and Moran indices.
    pub fn summary(&self) -> String {
        let mut s = format!("{self}\n\nClass  Upper bound  Cardinality  Moran(x)  Moran(y)\n");
        for (k, ((ub, card), im)) in self
            .classes
            .upper_bounds
            .iter()
            .zip(&self.classes.card)
            .zip(&self.imoran)
            .enumerate()
        {
            s.push_str(&format!(
                "{:>5}  {:>11.4}  {:>11}  {:>8.4}  {:>8.4}\n",
                k + 1,
                ub,
                card,
                im[0],
                im[1]
            ));
        }
        s
    }
}

impl fmt::Display for MTTestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Corrected Pearson's correlation for spatial autocorrelation"
        )?;
        writeln!(
            f,
            "F = {:.4}, dof = (1, {:.4}), p-value = {:.4}",
            self.fstat, self.dof, self.p_value
        )?;
        writeln!(f, "correlation: {:.4}", self.corr)?;
        write!(f, "effective sample size: {:.4}", self.ess)
    }
}
