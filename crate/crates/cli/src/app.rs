//! Argument parsing, dispatch and result serialization.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spatassoc::codispersion::{codisp_binned_with, codisp_directional_with, codisp_map_with};
use spatassoc::geometry::max_pair_distance;
use spatassoc::simulate::{
    self, BenchConfig, BenchMethod, CovSpec, GaussianPairSampler, GridPairSampler, SamplerKind,
    RNG_NAME,
};
use spatassoc::{
    comovement, modified_ttest_with, tjostheim_coef, with_threads, Binning, Engine, Error,
    LagRange, MapGrid, NClass, PointSample, TTestOptions, VarianceEstimator,
};

use crate::io;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "spatassoc",
    version,
    about = "Association between two spatial processes"
)]
struct Cli {
    /// Worker threads; 1 is the sequential, bit-reproducible reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Modified t-test for the correlation of x and y.
    Ttest(TtestArgs),
    /// Tjostheim's rank coefficient and its null variance.
    Tjostheim(TjostheimArgs),
    /// Codispersion per distance class, or along one lag vector.
    Codisp(CodispArgs),
    /// Codispersion of two time series per integer lag.
    Comovement(ComovementArgs),
    /// Codispersion over a polar grid of lag vectors.
    Map(MapArgs),
    /// Simulate a correlated Gaussian field pair on a grid.
    Simulate(SimulateArgs),
    /// Time codisp and ttest on simulated grids of increasing size.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Points CSV with columns s1,s2,x,y.
    #[arg(long, required_unless_present = "image_x", conflicts_with_all = ["image_x", "image_y"])]
    coords: Option<PathBuf>,
    /// Raster (PGM or matrix text) holding x.
    #[arg(long, requires = "image_y")]
    image_x: Option<PathBuf>,
    /// Raster holding y, same dimensions as --image-x.
    #[arg(long, requires = "image_x")]
    image_y: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self) -> spatassoc::Result<PointSample> {
        match (&self.coords, &self.image_x, &self.image_y) {
            (Some(p), _, _) => io::parse_points_csv(p),
            (None, Some(x), Some(y)) => io::parse_grid(x, y),
            _ => Err(Error::InvalidInput("no input given".into())),
        }
    }
}

#[derive(Args, Debug)]
struct BinArgs {
    /// Number of equal-width distance classes.
    #[arg(long, default_value_t = spatassoc::geometry::DEFAULT_NCLASS, conflicts_with = "sturges")]
    nclass: usize,
    /// Choose the number of classes by Sturges' rule on the pair count.
    #[arg(long)]
    sturges: bool,
    /// Classes cover (0, D/2] instead of (0, D].
    #[arg(long, conflicts_with = "max_dist")]
    half_range: bool,
    /// Classes cover (0, MAX_DIST].
    #[arg(long)]
    max_dist: Option<f64>,
}

impl BinArgs {
    fn binning(&self) -> Binning {
        Binning {
            nclass: if self.sturges {
                NClass::Sturges
            } else {
                NClass::Fixed(self.nclass)
            },
            range: match (self.half_range, self.max_dist) {
                (true, _) => LagRange::Half,
                (_, Some(d)) => LagRange::UpTo(d),
                _ => LagRange::Full,
            },
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EngineArg {
    Auto,
    Pairs,
    Lattice,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => Engine::Auto,
            EngineArg::Pairs => Engine::Pairs,
            EngineArg::Lattice => Engine::Lattice,
        }
    }
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TtestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bins: BinArgs,
    #[arg(long, value_enum, default_value_t = VarianceArg::Dutilleul)]
    variance: VarianceArg,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    engine: EngineArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VarianceArg {
    Dutilleul,
    Clifford,
}

#[derive(Args, Debug)]
struct TjostheimArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CodispArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bins: BinArgs,
    /// Evaluate along one lag vector instead of per class, e.g. `--direction 1,0`.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 2,
        allow_negative_numbers = true
    )]
    direction: Option<Vec<f64>>,
    /// Tolerance around --direction.
    #[arg(long, default_value_t = 0.0, requires = "direction")]
    tol: f64,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    engine: EngineArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ComovementArgs {
    /// Series CSV (header, first column used).
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// Largest lag (default ceil(T/2)).
    #[arg(long)]
    max_lag: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 18)]
    angles: usize,
    #[arg(long, default_value_t = 10)]
    radii: usize,
    /// Largest radius (default half the largest pair distance).
    #[arg(long)]
    max_radius: Option<f64>,
    /// Radial tolerance (default half the radial spacing).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    engine: EngineArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Copy)]
struct SpecArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 3.0)]
    c: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2)]
    d: u32,
}

impl From<SpecArgs> for CovSpec {
    fn from(s: SpecArgs) -> Self {
        CovSpec {
            a: s.a,
            alpha: s.alpha,
            beta: s.beta,
            sigma: s.sigma,
            c: s.c,
            gamma: s.gamma,
            d: s.d,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SamplerArg {
    Dense,
    Grid,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Dense => SamplerKind::Dense,
            SamplerArg::Grid => SamplerKind::Grid,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 32)]
    rows: usize,
    #[arg(long, default_value_t = 32)]
    cols: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    spec: SpecArgs,
    /// Dense Cholesky (n <= 4096) or circulant embedding.
    #[arg(long, value_enum, default_value_t = SamplerArg::Dense)]
    sampler: SamplerArg,
    /// Points CSV output (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON sidecar path (default `<out>.json` when --out is given).
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Codisp,
    Ttest,
    Both,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    #[arg(long, default_value_t = spatassoc::geometry::DEFAULT_NCLASS)]
    nclass: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerArg::Grid)]
    sampler: SamplerArg,
    /// Each timing repeats the call for at least this long.
    #[arg(long, default_value_t = 20)]
    min_time_ms: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure of one invocation, carrying the exit code.
struct Failure {
    code: i32,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            },
            msg: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let shown = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{shown}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{shown}");
                0
            };
        }
    };
    // results are buffered so the analysis can run inside a worker pool
    let mut buf = Vec::new();
    let outcome = match cli.threads {
        Some(0) => Err(Failure {
            code: EXIT_INPUT,
            msg: "--threads must be >= 1".into(),
        }),
        Some(t) => with_threads(t, || dispatch(cli.cmd, &mut buf)),
        None => dispatch(cli.cmd, &mut buf),
    };
    let outcome = outcome.and_then(|()| emit(&None, &String::from_utf8_lossy(&buf), stdout));
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.msg);
            f.code
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Ttest(a) => ttest(a, stdout),
        Command::Tjostheim(a) => tjostheim(a, stdout),
        Command::Codisp(a) => codisp(a, stdout),
        Command::Comovement(a) => comove(a, stdout),
        Command::Map(a) => map(a, stdout),
        Command::Simulate(a) => simulate_cmd(a, stdout),
        Command::Bench(a) => bench_cmd(a, stdout),
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Outcome {
    let res = match out {
        Some(p) => fs::write(p, text).map_err(|e| (p.display().to_string(), e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| ("<stdout>".to_string(), e)),
    };
    res.map_err(|(path, e)| {
        Failure::from(Error::Io {
            path,
            msg: e.to_string(),
        })
    })
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable result");
    s.push('\n');
    s
}

/// Shortest round-trip decimal, `null` when missing.
fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |v| v.to_string())
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

#[derive(Serialize)]
struct TtestJson<'a> {
    fstat: f64,
    dof: f64,
    ess: f64,
    p_value: f64,
    corr: f64,
    sigma2_r: f64,
    upper_bounds: &'a [f64],
    card: &'a [u64],
    imoran: &'a [[f64; 2]],
}

fn ttest(a: TtestArgs, stdout: &mut dyn Write) -> Outcome {
    let sample = a.input.load()?;
    let opts = TTestOptions {
        binning: a.bins.binning(),
        variance: match a.variance {
            VarianceArg::Dutilleul => VarianceEstimator::Dutilleul,
            VarianceArg::Clifford => VarianceEstimator::Clifford,
        },
        engine: a.engine.into(),
    };
    let r = modified_ttest_with(&sample, &opts)?;
    let text = match a.out.format {
        Format::Json => json(&TtestJson {
            fstat: r.fstat,
            dof: r.dof,
            ess: r.ess,
            p_value: r.p_value,
            corr: r.corr,
            sigma2_r: r.sigma2_r,
            upper_bounds: &r.classes.upper_bounds,
            card: &r.classes.card,
            imoran: &r.imoran,
        }),
        Format::Csv => csv_table(
            &["fstat", "dof", "ess", "p_value", "corr", "sigma2_r"],
            [[r.fstat, r.dof, r.ess, r.p_value, r.corr, r.sigma2_r]
                .iter()
                .map(|v| num(Some(*v)))
                .collect()],
        ),
        Format::Text => r.summary(),
    };
    emit(&a.out.out, &text, stdout)
}

fn tjostheim(a: TjostheimArgs, stdout: &mut dyn Write) -> Outcome {
    let r = tjostheim_coef(&a.input.load()?)?;
    let text = match a.out.format {
        Format::Json => json(&r),
        Format::Csv => csv_table(
            &["coef", "variance"],
            [vec![num(Some(r.coef)), num(Some(r.variance))]],
        ),
        Format::Text => format!("{r}\n"),
    };
    emit(&a.out.out, &text, stdout)
}

fn codisp(a: CodispArgs, stdout: &mut dyn Write) -> Outcome {
    let sample = a.input.load()?;
    let engine = a.engine.into();
    if let Some(h) = &a.direction {
        let h = [h[0], h[1]];
        let v = codisp_directional_with(&sample, h, a.tol, engine)?;
        #[derive(Serialize)]
        struct Directional {
            h: [f64; 2],
            tol: f64,
            coef: Option<f64>,
        }
        let text = match a.out.format {
            Format::Json => json(&Directional {
                h,
                tol: a.tol,
                coef: v,
            }),
            Format::Csv => csv_table(
                &["h1", "h2", "tol", "coef"],
                [vec![
                    num(Some(h[0])),
                    num(Some(h[1])),
                    num(Some(a.tol)),
                    num(v),
                ]],
            ),
            Format::Text => format!(
                "Codispersion at h = ({}, {}), tol = {}: {}\n",
                h[0],
                h[1],
                a.tol,
                match v {
                    Some(v) => format!("{v:.4}"),
                    None => "NA".into(),
                }
            ),
        };
        return emit(&a.out.out, &text, stdout);
    }
    let r = codisp_binned_with(&sample, a.bins.binning(), engine)?;
    #[derive(Serialize)]
    struct Binned<'a> {
        upper_bounds: &'a [f64],
        card: &'a [u64],
        coef: &'a [Option<f64>],
    }
    let text = match a.out.format {
        Format::Json => json(&Binned {
            upper_bounds: &r.classes.upper_bounds,
            card: &r.classes.card,
            coef: &r.coef,
        }),
        Format::Csv => csv_table(
            &["upper_bound", "card", "coef"],
            r.classes
                .upper_bounds
                .iter()
                .zip(&r.classes.card)
                .zip(&r.coef)
                .map(|((ub, card), c)| vec![num(Some(*ub)), card.to_string(), num(*c)]),
        ),
        Format::Text => r.to_string(),
    };
    emit(&a.out.out, &text, stdout)
}

fn comove(a: ComovementArgs, stdout: &mut dyn Write) -> Outcome {
    let x = io::parse_series(&a.x)?;
    let y = io::parse_series(&a.y)?;
    let c = comovement(&x, &y, a.max_lag)?;
    #[derive(Serialize)]
    struct Comove {
        lag: Vec<usize>,
        coef: Vec<Option<f64>>,
    }
    let text = match a.out.format {
        Format::Json => json(&Comove {
            lag: (1..=c.len()).collect(),
            coef: c,
        }),
        Format::Csv => csv_table(
            &["lag", "coef"],
            c.iter()
                .enumerate()
                .map(|(h, v)| vec![(h + 1).to_string(), num(*v)]),
        ),
        Format::Text => {
            let mut s = String::from("  Lag  Comovement\n");
            for (h, v) in c.iter().enumerate() {
                s += &match v {
                    Some(v) => format!("{:>5}  {v:>10.4}\n", h + 1),
                    None => format!("{:>5}  {:>10}\n", h + 1, "NA"),
                };
            }
            s
        }
    };
    emit(&a.out.out, &text, stdout)
}

fn map(a: MapArgs, stdout: &mut dyn Write) -> Outcome {
    let sample = a.input.load()?;
    let max_radius = match a.max_radius {
        Some(r) => r,
        None => max_pair_distance(sample.coords())? / 2.0,
    };
    let grid = MapGrid {
        n_angles: a.angles,
        n_radii: a.radii,
        max_radius,
        tol: a.tol,
    };
    let m = codisp_map_with(&sample, grid, a.engine.into())?;
    let text = match a.out.format {
        Format::Json => json(&m),
        Format::Csv | Format::Text => {
            let mut rows = Vec::new();
            for (ai, angle) in m.angles.iter().enumerate() {
                for (ri, radius) in m.radii.iter().enumerate() {
                    rows.push(vec![
                        num(Some(*angle)),
                        num(Some(*radius)),
                        num(m.values[ai][ri]),
                        m.npairs[ai][ri].to_string(),
                    ]);
                }
            }
            csv_table(&["angle_rad", "radius", "value", "npairs"], rows)
        }
    };
    emit(&a.out.out, &text, stdout)
}

#[derive(Serialize)]
struct SimulationMeta {
    spec: CovSpec,
    seed: u64,
    rng: &'static str,
    sampler: SamplerKind,
    rows: usize,
    cols: usize,
    jitter: f64,
}

fn simulate_cmd(a: SimulateArgs, stdout: &mut dyn Write) -> Outcome {
    let spec: CovSpec = a.spec.into();
    if a.rows == 0 || a.cols == 0 {
        return Err(
            Error::InvalidInput("grid must have at least one row and column".into()).into(),
        );
    }
    let mut rng = simulate::rng(a.seed);
    let coords = spatassoc::geometry::grid_coords(a.rows, a.cols);
    let sampler: SamplerKind = a.sampler.into();
    let ((x, y), jitter) = match sampler {
        SamplerKind::Dense => {
            let s = GaussianPairSampler::new(&coords, &spec)?;
            (s.sample(&mut rng), s.jitter())
        }
        SamplerKind::Grid => (
            GridPairSampler::new(a.rows, a.cols, &spec)?.sample(&mut rng),
            0.0,
        ),
    };
    let text = csv_table(
        &["s1", "s2", "x", "y"],
        coords.iter().zip(x.iter().zip(&y)).map(|(p, (x, y))| {
            vec![
                num(Some(p[0])),
                num(Some(p[1])),
                num(Some(*x)),
                num(Some(*y)),
            ]
        }),
    );
    emit(&a.out, &text, stdout)?;
    let meta_path = a
        .meta
        .clone()
        .or_else(|| a.out.as_deref().map(sidecar_path));
    if let Some(p) = meta_path {
        let meta = SimulationMeta {
            spec,
            seed: a.seed,
            rng: RNG_NAME,
            sampler,
            rows: a.rows,
            cols: a.cols,
            jitter,
        };
        emit(&Some(p), &json(&meta), stdout)?;
    }
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn bench_cmd(a: BenchArgs, stdout: &mut dyn Write) -> Outcome {
    let cfg = BenchConfig {
        sizes: a.sizes,
        reps: a.reps,
        methods: match a.method {
            MethodArg::Codisp => vec![BenchMethod::Codisp],
            MethodArg::Ttest => vec![BenchMethod::Ttest],
            MethodArg::Both => vec![BenchMethod::Codisp, BenchMethod::Ttest],
        },
        nclass: a.nclass,
        seed: a.seed,
        sampler: a.sampler.into(),
        min_time: Duration::from_millis(a.min_time_ms),
        ..Default::default()
    };
    let rows = simulate::bench(&cfg)?;
    let text = match a.format {
        Format::Json => json(&rows),
        Format::Csv | Format::Text => csv_table(
            &["size", "n", "method", "reps", "mean_secs", "ops"],
            rows.iter().map(|r| {
                vec![
                    r.size.to_string(),
                    r.n.to_string(),
                    match r.method {
                        BenchMethod::Codisp => "codisp".into(),
                        BenchMethod::Ttest => "ttest".into(),
                    },
                    r.reps.to_string(),
                    num(Some(r.mean_secs)),
                    r.ops.to_string(),
                ]
            }),
        ),
    };
    emit(&a.out, &text, stdout)
}
