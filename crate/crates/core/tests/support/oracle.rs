//! Streamed estimators against the dense references.

use spatassoc::codispersion::codisp_binned;
use spatassoc::crossstats::stratum_covariances;
use spatassoc::mttest::{effective_variance_clifford, effective_variance_dutilleul, pearson};
use spatassoc::{tjostheim_coef, Binning, LagClasses, PointSample};

use super::dense::{self, random_case};

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleErrors {
    pub cov: f64,
    pub dutilleul: f64,
    pub clifford: f64,
    pub codisp: f64,
    pub corr: f64,
    pub tjostheim: f64,
}

impl OracleErrors {
    pub fn max(&self) -> f64 {
        [
            self.cov,
            self.dutilleul,
            self.clifford,
            self.codisp,
            self.corr,
            self.tjostheim,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn absorb(&mut self, o: OracleErrors) {
        self.cov = self.cov.max(o.cov);
        self.dutilleul = self.dutilleul.max(o.dutilleul);
        self.clifford = self.clifford.max(o.clifford);
        self.codisp = self.codisp.max(o.codisp);
        self.corr = self.corr.max(o.corr);
        self.tjostheim = self.tjostheim.max(o.tjostheim);
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Largest absolute deviations over the given seeds. Structural mismatches
/// (class counts, defined/undefined strata) are errors.
pub fn compare(seeds: impl IntoIterator<Item = u64>) -> Result<OracleErrors, String> {
    let mut worst = OracleErrors::default();
    for seed in seeds {
        worst.absorb(compare_one(seed).map_err(|e| format!("seed {seed}: {e}"))?);
    }
    Ok(worst)
}

pub fn compare_one(seed: u64) -> Result<OracleErrors, String> {
    let case = random_case(seed);
    let (c, x, y, k) = (&case.coords, &case.x, &case.y, case.nclass);
    let sample = PointSample::new(c.clone(), x.clone(), y.clone()).map_err(|e| e.to_string())?;
    let binning = Binning::classes(k);
    let classes = LagClasses::build(sample.coords(), binning).map_err(|e| e.to_string())?;

    let b = dense::bounds(c, k);
    if classes.upper_bounds != b {
        return Err(format!(
            "bounds differ: {:?} vs {:?}",
            classes.upper_bounds, b
        ));
    }
    if classes.card != dense::card(c, &b) {
        return Err(format!(
            "cardinalities differ: {:?} vs {:?}",
            classes.card,
            dense::card(c, &b)
        ));
    }

    let cov = stratum_covariances(&sample, &classes).map_err(|e| e.to_string())?;
    let (cx0, cx) = dense::class_cov(c, x, &b);
    let (cy0, cy) = dense::class_cov(c, y, &b);
    let mut e = OracleErrors {
        cov: max_abs(&cov.c_x, &cx)
            .max(max_abs(&cov.c_y, &cy))
            .max((cov.c_x0 - cx0).abs())
            .max((cov.c_y0 - cy0).abs()),
        ..Default::default()
    };

    let dut = effective_variance_dutilleul(&cov);
    let dut_ref = dense::sigma2_dutilleul(c, x, y, &b);
    e.dutilleul = match dut {
        Ok(v) => (v - dut_ref).abs(),
        // the guard may only fire where the reference is not positive
        Err(_) if dut_ref <= 1e-12 => 0.0,
        Err(err) => return Err(format!("dutilleul: {err} (reference {dut_ref})")),
    };
    let cli = effective_variance_clifford(&cov, c.len());
    let cli_ref = dense::sigma2_clifford(c, x, y, &b);
    e.clifford = match cli {
        Ok(v) => (v - cli_ref).abs(),
        Err(_) if cli_ref <= 1e-12 => 0.0,
        Err(err) => return Err(format!("clifford: {err} (reference {cli_ref})")),
    };
    e.corr = (pearson(x, y) - dense::pearson(x, y)).abs();

    let cd = codisp_binned(&sample, binning).map_err(|e| e.to_string())?;
    for (got, want) in cd.coef.iter().zip(dense::codisp(c, x, y, &b)) {
        match (got, want) {
            (Some(g), Some(w)) => e.codisp = e.codisp.max((g - w).abs()),
            (None, None) => {}
            _ => return Err(format!("codisp definedness differs: {got:?} vs {want:?}")),
        }
    }

    let a = tjostheim_coef(&sample).map_err(|e| e.to_string())?;
    e.tjostheim = (a.coef - dense::tjostheim(c, x, y)).abs();
    Ok(e)
}
