use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatassoc::codispersion::{codisp_binned_with, codisp_map_with};
use spatassoc::simulate::{rng, CovSpec, GridPairSampler};
use spatassoc::{
    modified_ttest_with, with_threads, Binning, Engine, MapGrid, PointSample, TTestOptions,
};

fn scattered(n: usize, seed: u64) -> PointSample {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| [r.random_range(0.0..10.0), r.random_range(0.0..10.0)])
        .collect();
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let y = x.iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
    PointSample::new(coords, x, y).unwrap()
}

#[test]
fn thread_count_does_not_change_results() {
    let s = scattered(900, 1);
    let opts = TTestOptions::default();
    let run = || {
        (
            modified_ttest_with(&s, &opts).unwrap(),
            codisp_binned_with(&s, Binning::default(), Engine::Pairs).unwrap(),
        )
    };
    let reference = with_threads(1, run);
    for t in [2, 3, 8] {
        assert_eq!(with_threads(t, run), reference, "threads = {t}");
    }
}

#[test]
fn isotropic_field_gives_flat_map_across_angles() {
    let sampler = GridPairSampler::new(96, 96, &CovSpec::default()).unwrap();
    let s = sampler.sample_pair(&mut rng(2024)).unwrap();
    let grid = MapGrid {
        n_angles: 8,
        n_radii: 10,
        max_radius: 20.0,
        tol: None,
    };
    let m = codisp_map_with(&s, grid, Engine::Auto).unwrap();
    for r in 1..m.radii.len() {
        let vals: Vec<f64> = m.values.iter().filter_map(|row| row[r]).collect();
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
            - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.15, "radius {}: {vals:?}", m.radii[r]);
    }
}

#[test]
fn white_noise_effective_size_is_close_to_n() {
    let n = 120;
    let mut ess: Vec<f64> = (0..101)
        .map(|seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let coords = (0..n)
                .map(|_| [r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
                .collect();
            let x = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let y = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let s = PointSample::new(coords, x, y).unwrap();
            modified_ttest_with(&s, &TTestOptions::default())
                .unwrap()
                .ess
        })
        .collect();
    ess.sort_by(f64::total_cmp);
    let median = ess[50];
    assert!(
        (median - n as f64).abs() <= 0.15 * n as f64,
        "median ESS {median}"
    );
}
