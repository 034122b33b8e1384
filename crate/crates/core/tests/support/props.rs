//! Invariance properties, each run for a given number of random cases.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};
use spatassoc::codispersion::{codisp_directional_with, codisp_map_with};
use spatassoc::{
    codisp_binned, modified_ttest, tjostheim_coef, Binning, Engine, Error, MTTestResult, MapGrid,
    PointSample,
};

pub type Sample = (Vec<[f64; 2]>, Vec<f64>, Vec<f64>);

/// Scattered points with values on a coarse lattice of levels, so that
/// ties occur now and then.
pub fn sample_strategy() -> impl Strategy<Value = Sample> {
    (5usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(
                (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(a, b)| [a, b]),
                n,
            ),
            prop::collection::vec(-1000i32..1000, n)
                .prop_map(|v| v.into_iter().map(|a| a as f64 / 10.0).collect()),
            prop::collection::vec(-100.0..100.0f64, n),
        )
    })
}

fn build(s: &Sample) -> Option<PointSample> {
    PointSample::new(s.0.clone(), s.1.clone(), s.2.clone()).ok()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn same_curve(a: &[Option<f64>], b: &[Option<f64>], tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (u, v) in a.iter().zip(b) {
        match (u, v) {
            (Some(u), Some(v)) => prop_assert!(close(*u, *v, tol), "{} vs {}", u, v),
            (None, None) => {}
            _ => {
                return Err(TestCaseError::fail(format!(
                    "definedness differs: {u:?} vs {v:?}"
                )))
            }
        }
    }
    Ok(())
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(why, v) => format!("{why} for {v:?}"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

pub fn codisp_bounded(cases: u32) -> Result<(), String> {
    run(cases, sample_strategy(), |s| {
        let Some(p) = build(&s) else { return Ok(()) };
        for k in [1, 4, 13] {
            for c in codisp_binned(&p, Binning::classes(k))
                .unwrap()
                .coef
                .into_iter()
                .flatten()
            {
                prop_assert!(c.abs() <= 1.0, "{}", c);
            }
        }
        let grid = MapGrid {
            n_angles: 6,
            n_radii: 3,
            max_radius: 30.0,
            tol: Some(5.0),
        };
        if let Ok(m) = codisp_map_with(&p, grid, Engine::Pairs) {
            for v in m.values.into_iter().flatten().flatten() {
                prop_assert!(v.abs() <= 1.0);
            }
        }
        if let Some(v) = codisp_directional_with(&p, [10.0, 5.0], 8.0, Engine::Pairs).unwrap() {
            prop_assert!(v.abs() <= 1.0);
        }
        Ok(())
    })
}

pub fn codisp_translation(cases: u32) -> Result<(), String> {
    run(
        cases,
        (sample_strategy(), -1e3..1e3f64, -1e3..1e3f64),
        |(s, a, b)| {
            let Some(p) = build(&s) else { return Ok(()) };
            let q = p
                .with_values(
                    p.x().iter().map(|v| v + a).collect(),
                    p.y().iter().map(|v| v + b).collect(),
                )
                .unwrap();
            let bin = Binning::default();
            same_curve(
                &codisp_binned(&p, bin).unwrap().coef,
                &codisp_binned(&q, bin).unwrap().coef,
                1e-8,
            )
        },
    )
}

pub fn codisp_sign_equivariance(cases: u32) -> Result<(), String> {
    let scale = prop_oneof![-100.0..-0.01f64, 0.01..100.0f64];
    run(
        cases,
        (sample_strategy(), scale.clone(), scale),
        |(s, a, c)| {
            let Some(p) = build(&s) else { return Ok(()) };
            let q = p
                .with_values(
                    p.x().iter().map(|v| v * a).collect(),
                    p.y().iter().map(|v| v * c).collect(),
                )
                .unwrap();
            let bin = Binning::default();
            let sign = (a * c).signum();
            let base: Vec<Option<f64>> = codisp_binned(&p, bin)
                .unwrap()
                .coef
                .iter()
                .map(|v| v.map(|v| sign * v))
                .collect();
            same_curve(&base, &codisp_binned(&q, bin).unwrap().coef, 1e-12)?;
            // and symmetry in the pair
            same_curve(
                &codisp_binned(&p, bin).unwrap().coef,
                &codisp_binned(&p.swapped(), bin).unwrap().coef,
                1e-12,
            )
        },
    )
}

pub fn tjostheim_monotone_and_symmetric(cases: u32) -> Result<(), String> {
    run(cases, sample_strategy(), |s| {
        let Some(p) = build(&s) else { return Ok(()) };
        let Ok(a) = tjostheim_coef(&p) else {
            return Ok(());
        };
        // strictly increasing maps keep every rank, ties included
        let q = p
            .with_values(
                p.x().iter().map(|v| (v / 10.0).exp()).collect(),
                p.y().iter().map(|v| v * v * v + 3.0 * v).collect(),
            )
            .unwrap();
        prop_assert_eq!(tjostheim_coef(&q).unwrap(), a);
        let sw = tjostheim_coef(&p.swapped()).unwrap();
        prop_assert!(close(sw.coef, a.coef, 1e-12));
        prop_assert_eq!(sw.variance, a.variance);
        Ok(())
    })
}

fn ttest_outcome(p: &PointSample) -> Result<MTTestResult, Error> {
    modified_ttest(p, Binning::default())
}

pub fn ttest_affine(cases: u32) -> Result<(), String> {
    let scale = prop_oneof![-50.0..-0.05f64, 0.05..50.0f64];
    run(
        cases,
        (
            sample_strategy(),
            scale.clone(),
            -100.0..100.0f64,
            scale,
            -100.0..100.0f64,
        ),
        |(s, a, b, c, d)| {
            let Some(p) = build(&s) else { return Ok(()) };
            let q = p
                .with_values(
                    p.x().iter().map(|v| a * v + b).collect(),
                    p.y().iter().map(|v| c * v + d).collect(),
                )
                .unwrap();
            match (ttest_outcome(&p), ttest_outcome(&q)) {
                (Ok(r), Ok(t)) => {
                    prop_assert!(close(r.fstat, t.fstat, 1e-10), "{} vs {}", r.fstat, t.fstat);
                    prop_assert!(close(r.ess, t.ess, 1e-10));
                    prop_assert!(close(r.p_value, t.p_value, 1e-10));
                    prop_assert!(close(r.corr * (a * c).signum(), t.corr, 1e-10));
                }
                (Err(e), Err(f)) => {
                    prop_assert_eq!(std::mem::discriminant(&e), std::mem::discriminant(&f))
                }
                (r, t) => {
                    return Err(TestCaseError::fail(format!(
                        "outcomes differ: {r:?} vs {t:?}"
                    )))
                }
            }
            Ok(())
        },
    )
}

pub fn rigid_motion(cases: u32) -> Result<(), String> {
    run(
        cases,
        (
            sample_strategy(),
            0.0..std::f64::consts::TAU,
            -1e3..1e3f64,
            -1e3..1e3f64,
            any::<bool>(),
        ),
        |(s, theta, tx, ty, mirror)| {
            let Some(p) = build(&s) else { return Ok(()) };
            let (sn, cs) = theta.sin_cos();
            let q = p
                .map_coords(|[u, v]| {
                    let v = if mirror { -v } else { v };
                    [cs * u - sn * v + tx, sn * u + cs * v + ty]
                })
                .unwrap();
            let bin = Binning::default();
            same_curve(
                &codisp_binned(&p, bin).unwrap().coef,
                &codisp_binned(&q, bin).unwrap().coef,
                1e-9,
            )?;
            // a rotation can make a constant coordinate column non-constant
            if let (Ok(a), Ok(b)) = (tjostheim_coef(&p), tjostheim_coef(&q)) {
                prop_assert!(close(a.coef, b.coef, 1e-9), "{} vs {}", a.coef, b.coef);
                prop_assert!(close(a.variance, b.variance, 1e-9));
            }
            match (ttest_outcome(&p), ttest_outcome(&q)) {
                (Ok(r), Ok(t)) => {
                    prop_assert!(close(r.fstat, t.fstat, 1e-9), "{} vs {}", r.fstat, t.fstat);
                    prop_assert!(close(r.ess, t.ess, 1e-9));
                }
                (Err(e), Err(f)) => {
                    prop_assert_eq!(std::mem::discriminant(&e), std::mem::discriminant(&f))
                }
                (r, t) => {
                    return Err(TestCaseError::fail(format!(
                        "outcomes differ: {r:?} vs {t:?}"
                    )))
                }
            }
            Ok(())
        },
    )
}

/// Every property, by name.
pub type Property = fn(u32) -> Result<(), String>;

pub fn all() -> Vec<(&'static str, Property)> {
    vec![
        ("codispersion bound", codisp_bounded),
        ("codispersion translation invariance", codisp_translation),
        (
            "codispersion sign equivariance and symmetry",
            codisp_sign_equivariance,
        ),
        (
            "tjostheim monotone invariance and symmetry",
            tjostheim_monotone_and_symmetric,
        ),
        ("t-test affine invariance", ttest_affine),
        ("rigid-motion invariance", rigid_motion),
    ]
}
