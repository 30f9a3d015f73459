//! Batch experiment driver for the flatlens toolkit.
//!
//! Angles are given on the command line in units of pi (`--theta 0.25` means
//! pi/4) so branch boundaries stay exact. `FLATLENS_THREADS` caps sweep
//! parallelism. Exit codes: 0 ok, 1 usage error, 2 check failure.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flatlens::config::{
    gamma_w, is_admissible, is_separated, lens_to_slits, parse_lens_config_json, LensConfigJson,
    LensConfiguration, SlitConfiguration,
};
use flatlens::covers::{
    build_complex, classify_torus_covers, sl2z_orbit, torus_cover_table, CyclicCover,
};
use flatlens::flow::{
    compare_models, compile_lenses, compile_skeleton, seed_start, trace, trap_stats, CompiledModel,
    FlowState, Termination, Trajectory,
};
use flatlens::geom::{Lattice, Segment, Vec2};
use flatlens::iet::{cocycle, extract_iet, rigidity_scan, standard_plane_gamma, IetJson};
use flatlens::skeleton::{builtin_skeleton, parse_skeleton_json, Skeleton, SkeletonJson};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "flatlens", version, about = "Eaton-lens fields, slit-fold skeletons and cover calculus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cyclic pillowcase cover calculus.
    Covers {
        #[command(subcommand)]
        cmd: CoversCmd,
    },
    /// Lens/slit configuration tools.
    Config {
        #[command(subcommand)]
        cmd: ConfigCmd,
    },
    /// Trace one trajectory and emit CSV + SVG.
    Trace(TraceArgs),
    /// Direction sweeps with statistics.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
    /// Interval-exchange extraction and rigidity scanning.
    Iet {
        #[command(subcommand)]
        cmd: IetCmd,
    },
}

#[derive(Subcommand)]
enum CoversCmd {
    /// Print the genus-1 cover census table (degrees 3, 4, 6).
    Table,
    /// Cross-check gcd formulas against the gluing complex.
    Oracle {
        #[arg(long, default_value_t = 12)]
        dmax: u32,
    },
    /// SL2(Z) orbit of a cover.
    Orbit { degree: u32, w_h: u32, w_v: u32 },
    /// Genus and fiber data of one cover.
    Genus { degree: u32, w_h: u32, w_v: u32 },
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Emit gamma_w(theta) as configuration JSON.
    GammaW {
        /// Angle in units of pi.
        #[arg(long)]
        theta: f64,
    },
    /// Check admissibility of a configuration.
    CheckAdmissible {
        #[command(flatten)]
        source: LensSource,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Emit the flat (slit) replacement of a configuration as skeleton JSON.
    ToSlits {
        #[command(flatten)]
        source: LensSource,
    },
    /// Check separation of the slit system by a lattice vector.
    Separated {
        #[command(flatten)]
        source: LensSource,
        /// Lattice vector coefficients m n (w = m g1 + n g2).
        #[arg(long, num_args = 2, value_names = ["M", "N"], allow_hyphen_values = true)]
        w: Vec<i64>,
    },
}

#[derive(Args)]
struct LensSource {
    /// Path to configuration JSON.
    #[arg(long, conflicts_with = "curve")]
    config: Option<PathBuf>,
    /// Built-in curve name (gamma-w).
    #[arg(long)]
    curve: Option<String>,
    /// Angle in units of pi (curve parameter and slit direction).
    #[arg(long)]
    theta: f64,
}

impl LensSource {
    fn load(&self) -> Result<LensConfiguration> {
        match (&self.config, &self.curve) {
            (Some(path), None) => {
                let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                parse_lens_config_json(&bytes).map_err(|e| anyhow!("{e}"))
            }
            (None, Some(curve)) if curve == "gamma-w" => Ok(gamma_w(self.theta * std::f64::consts::PI)),
            (None, Some(curve)) => bail!("unknown curve `{curve}`"),
            _ => bail!("give exactly one of --config or --curve"),
        }
    }

    fn theta_rad(&self) -> f64 {
        self.theta * std::f64::consts::PI
    }
}

#[derive(Args)]
struct TraceArgs {
    /// Built-in skeleton name (wollmilchsau, x2, x4, c6_3_1).
    #[arg(long, conflicts_with_all = ["skeleton_json", "lenses_json"])]
    builtin: Option<String>,
    /// Path to skeleton JSON.
    #[arg(long)]
    skeleton_json: Option<PathBuf>,
    /// Path to lens configuration JSON.
    #[arg(long)]
    lenses_json: Option<PathBuf>,
    /// Angle in units of pi.
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, default_value_t = 1000.0)]
    path: f64,
    /// Start position; defaults to a seeded point.
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    checkpoints: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Minimal-width growth diagnostics over a direction sweep.
    Trapping(SweepArgs),
    /// Cell-count and growth diagnostics along the ergodic curve.
    Ergodic(SweepArgs),
    /// Lens-vs-slit itinerary agreement along the ergodic curve.
    Compare(SweepArgs),
}

#[derive(Args, Clone)]
struct SweepArgs {
    /// Built-in model: single-lens | separated-slits | gamma-w.
    #[arg(long, default_value = "gamma-w")]
    builtin: String,
    /// Number of sampled directions.
    #[arg(long, default_value_t = 50)]
    thetas: usize,
    #[arg(long, default_value_t = 1e5)]
    path: f64,
    /// Rays per direction (compare only).
    #[arg(long, default_value_t = 1000)]
    rays: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Growth-exponent cutoff declaring a direction trapped.
    #[arg(long, default_value_t = 0.1)]
    trap_cutoff: f64,
    /// Growth-exponent floor declaring a direction spreading.
    #[arg(long, default_value_t = 0.3)]
    spread_floor: f64,
    /// Distinct-cell floor declaring a direction spreading.
    #[arg(long, default_value_t = 50)]
    cell_floor: usize,
    /// Match-fraction floor per direction (compare only).
    #[arg(long, default_value_t = 0.99)]
    match_floor: f64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum IetCmd {
    /// Extract the doubled-section return map and dump it as JSON.
    Extract(IetArgs),
    /// Extract and run the rigidity-time essential-value scan.
    Rigidity {
        #[command(flatten)]
        iet: IetArgs,
        #[arg(long, default_value_t = 600)]
        hmax: usize,
        #[arg(long, default_value_t = 0.02)]
        rigid_tol: f64,
        #[arg(long, default_value_t = 0.15)]
        measure_floor: f64,
        #[arg(long, default_value_t = 1200)]
        samples: usize,
    },
}

#[derive(Args)]
struct IetArgs {
    #[arg(long, default_value = "wollmilchsau")]
    builtin: String,
    /// Angle in units of pi.
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Section endpoints x1 y1 x2 y2.
    #[arg(long, num_args = 4, value_names = ["X1", "Y1", "X2", "Y2"], allow_hyphen_values = true)]
    section: Vec<f64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let code = if matches!(e.kind(), DisplayHelp | DisplayVersion) { 0 } else { 1 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Covers { cmd } => covers_cmd(cmd),
        Cmd::Config { cmd } => config_cmd(cmd),
        Cmd::Trace(args) => trace_cmd(args),
        Cmd::Experiment { cmd } => experiment_cmd(cmd),
        Cmd::Iet { cmd } => iet_cmd(cmd),
    }
}

// ---------------------------------------------------------------------------
// covers
// ---------------------------------------------------------------------------

fn covers_cmd(cmd: CoversCmd) -> Result<i32> {
    match cmd {
        CoversCmd::Table => {
            println!("degree,w_h,w_v,fiber_p1,fiber_p2,fiber_p3,surface");
            for row in torus_cover_table(6) {
                let c = row.cover;
                println!(
                    "{},{},{},{},{},{},X_{}({},{})",
                    c.degree, c.w_h, c.w_v, row.fibers.0, row.fibers.1, row.fibers.2, c.degree, c.w_h, c.w_v
                );
            }
            Ok(0)
        }
        CoversCmd::Oracle { dmax } => {
            let mut checked = 0usize;
            let mut mismatches = 0usize;
            for d in 2..=dmax {
                for w_h in 1..d {
                    for w_v in 1..d {
                        let c = CyclicCover { degree: d, w_h, w_v };
                        if !c.is_connected() || !c.branched_over_three() {
                            continue;
                        }
                        checked += 1;
                        let gc = build_complex(&c);
                        let genus_ok = gc.euler_char() == 2 - 2 * c.genus().unwrap() as i64;
                        let fibers_ok = gc.fiber_counts() == c.fiber_counts();
                        let orders_ok = gc.singularity_orders() == c.cone_angles();
                        if !(genus_ok && fibers_ok && orders_ok) {
                            mismatches += 1;
                            eprintln!("MISMATCH at X_{}({},{})", d, w_h, w_v);
                        }
                    }
                }
            }
            println!("checked {checked} covers up to degree {dmax}: {mismatches} mismatches");
            if mismatches == 0 {
                println!("OK 0 mismatches");
                Ok(0)
            } else {
                Ok(2)
            }
        }
        CoversCmd::Orbit { degree, w_h, w_v } => {
            let c = CyclicCover::new(degree, w_h, w_v).map_err(|e| anyhow!("{e}"))?;
            for o in sl2z_orbit(&c) {
                println!("X_{}({},{})", o.degree, o.w_h, o.w_v);
            }
            let classes = classify_torus_covers(6);
            println!("# genus-1 classes up to SL2(Z) and renaming (d <= 6): {}", classes.len());
            Ok(0)
        }
        CoversCmd::Genus { degree, w_h, w_v } => {
            let c = CyclicCover::new(degree, w_h, w_v).map_err(|e| anyhow!("{e}"))?;
            match c.genus() {
                Ok(g) => {
                    let (n1, n2, n3) = c.fiber_counts();
                    println!("genus {g}, fibers over (p1,p2,p3) = ({n1},{n2},{n3})");
                    Ok(0)
                }
                Err(e) => {
                    println!("{e}");
                    Ok(2)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

fn config_cmd(cmd: ConfigCmd) -> Result<i32> {
    match cmd {
        ConfigCmd::GammaW { theta } => {
            let cfg = gamma_w(theta * std::f64::consts::PI);
            println!("{}", serde_json::to_string_pretty(&LensConfigJson::from_config(&cfg))?);
            Ok(0)
        }
        ConfigCmd::CheckAdmissible { source, tol } => {
            let cfg = source.load()?;
            let (ok, worst) = is_admissible(&cfg, tol);
            match worst {
                Some((i, j, slack)) => {
                    println!("admissible: {ok} (worst pair {i},{j} with slack {slack:.3e})")
                }
                None => println!("admissible: {ok} (no lens pairs)"),
            }
            Ok(if ok { 0 } else { 2 })
        }
        ConfigCmd::ToSlits { source } => {
            let cfg = source.load()?;
            let slits = lens_to_slits(&cfg, source.theta_rad());
            let skel = slits.skeleton();
            println!("{}", serde_json::to_string_pretty(&SkeletonJson::from_skeleton(&skel))?);
            Ok(0)
        }
        ConfigCmd::Separated { source, w } => {
            let cfg = source.load()?;
            let slits = lens_to_slits(&cfg, source.theta_rad());
            let wv = cfg.lattice.g1 * w[0] as f64 + cfg.lattice.g2 * w[1] as f64;
            match is_separated(&slits, wv) {
                Ok(sep) => {
                    println!("separated by ({},{}): {sep}", w[0], w[1]);
                    Ok(if sep { 0 } else { 2 })
                }
                Err(e) => {
                    println!("separation undefined: {e}");
                    Ok(2)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

enum Model {
    Skeleton(Skeleton),
    Lenses(LensConfiguration),
}

fn load_trace_model(args: &TraceArgs) -> Result<Model> {
    if let Some(name) = &args.builtin {
        return Ok(Model::Skeleton(builtin_skeleton(name).map_err(|e| anyhow!("{e}"))?));
    }
    if let Some(p) = &args.skeleton_json {
        let bytes = fs::read(p)?;
        return Ok(Model::Skeleton(parse_skeleton_json(&bytes).map_err(|e| anyhow!("{e}"))?));
    }
    if let Some(p) = &args.lenses_json {
        let bytes = fs::read(p)?;
        return Ok(Model::Lenses(parse_lens_config_json(&bytes).map_err(|e| anyhow!("{e}"))?));
    }
    bail!("give one of --builtin, --skeleton-json, --lenses-json")
}

fn trace_cmd(args: TraceArgs) -> Result<i32> {
    let theta = args.theta * std::f64::consts::PI;
    let model = load_trace_model(&args)?;
    let (compiled, overlay) = match &model {
        Model::Skeleton(s) => (compile_skeleton(s), overlay_skeleton(s)),
        Model::Lenses(c) => (compile_lenses(c), overlay_lenses(c)),
    };
    let start_pos = match &args.start {
        Some(v) => Vec2::new(v[0], v[1]),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            match &model {
                Model::Lenses(c) => {
                    seed_start(&mut rng, c, theta)
                        .ok_or_else(|| anyhow!("could not seed a start"))?
                        .pos
                }
                Model::Skeleton(s) => seed_in_skeleton(&mut rng, s),
            }
        }
    };
    let tr = trace(&compiled, FlowState::new(start_pos, 1, theta), args.path, args.checkpoints);
    fs::create_dir_all(&args.out_dir)?;
    let csv_path = args.out_dir.join("trajectory.csv");
    fs::write(&csv_path, trajectory_csv(&tr))?;
    let svg_path = args.out_dir.join("trajectory.svg");
    fs::write(&svg_path, trajectory_svg(&tr, &overlay))?;
    println!(
        "traced path {:.1} with {} events ({} checkpoints); wrote {} and {}",
        tr.final_state.path_length,
        tr.events.len(),
        tr.displacement_samples.len(),
        csv_path.display(),
        svg_path.display()
    );
    if tr.terminated == Termination::Singular {
        println!("trajectory terminated on a singular hit");
    }
    Ok(0)
}

fn seed_in_skeleton<R: Rng>(rng: &mut R, skel: &Skeleton) -> Vec2 {
    match skel.lattice {
        Some(lat) => lat.g1 * rng.gen::<f64>() + lat.g2 * rng.gen::<f64>(),
        None => Vec2::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0),
    }
}

fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::from("path_length,x,y,deck_i,deck_j,event_kind\n");
    let mut rows: Vec<(f64, Vec2, (i64, i64), String)> = Vec::new();
    let step = if tr.displacement_samples.is_empty() {
        0.0
    } else {
        tr.final_state.path_length / tr.displacement_samples.len() as f64
    };
    for (k, (d, cell)) in tr.displacement_samples.iter().zip(tr.deck_samples.iter()).enumerate() {
        rows.push((step * (k + 1) as f64, *d + tr.start, *cell, "checkpoint".into()));
    }
    for e in &tr.events {
        rows.push((
            e.path_length,
            e.location,
            e.lambda,
            format!("{:?}", e.kind).to_lowercase(),
        ));
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (p, pos, cell, kind) in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", p, pos.x, pos.y, cell.0, cell.1, kind));
    }
    out
}

enum OverlayItem {
    Line(Segment),
    Circle(Vec2, f64),
}

fn overlay_skeleton(s: &Skeleton) -> Vec<OverlayItem> {
    s.slit_folds().into_iter().map(|f| OverlayItem::Line(f.seg)).collect()
}

fn overlay_lenses(c: &LensConfiguration) -> Vec<OverlayItem> {
    c.lenses.iter().map(|&(center, r)| OverlayItem::Circle(center, r)).collect()
}

fn trajectory_svg(tr: &Trajectory, overlay: &[OverlayItem]) -> String {
    let pts: Vec<Vec2> = tr.displacement_samples.iter().map(|&d| d + tr.start).collect();
    let mut min = Vec2::new(-1.0, -1.0);
    let mut max = Vec2::new(1.0, 1.0);
    for p in pts.iter().chain(std::iter::once(&tr.start)) {
        min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
        max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
    }
    let pad = 0.05 * ((max.x - min.x) + (max.y - min.y)).max(1.0);
    let (w, h) = (max.x - min.x + 2.0 * pad, max.y - min.y + 2.0 * pad);
    let sw = (w.max(h) / 400.0).max(1e-3);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        min.x - pad,
        -(max.y + pad),
        w,
        h
    );
    for item in overlay {
        match item {
            OverlayItem::Line(s) => {
                svg.push_str(&format!(
                    "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\" stroke-width=\"{}\"/>\n",
                    s.a.x,
                    -s.a.y,
                    s.b.x,
                    -s.b.y,
                    sw * 2.0
                ));
            }
            OverlayItem::Circle(c, r) => {
                svg.push_str(&format!(
                    "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"#888\" stroke-width=\"{}\"/>\n",
                    c.x,
                    -c.y,
                    r,
                    sw * 2.0
                ));
            }
        }
    }
    if !pts.is_empty() {
        let path: Vec<String> = pts.iter().map(|p| format!("{},{}", p.x, -p.y)).collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#c33\" stroke-width=\"{}\"/>\n",
            path.join(" "),
            sw
        ));
    }
    svg.push_str(&format!(
        "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#36c\"/>\n",
        tr.start.x,
        -tr.start.y,
        sw * 3.0
    ));
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DirectionRecord {
    theta_over_pi: f64,
    growth_exponent: Option<f64>,
    min_width: Option<f64>,
    cell_count: Option<usize>,
    match_fraction: Option<f64>,
    singular: bool,
}

#[derive(Serialize)]
struct SweepSummary {
    experiment: String,
    builtin: String,
    thetas: usize,
    path: f64,
    rays: usize,
    seed: u64,
    trap_cutoff: f64,
    spread_floor: f64,
    cell_floor: usize,
    match_floor: f64,
    records: Vec<DirectionRecord>,
    trapped_fraction: Option<f64>,
    spreading_fraction: Option<f64>,
    min_match_fraction: Option<f64>,
    pass: bool,
}

fn pool() -> rayon::ThreadPool {
    let n = std::env::var("FLATLENS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .expect("thread pool")
}

/// A model per direction: trapping sweeps use a fixed model, the ergodic
/// curve re-evaluates gamma_w at every theta.
fn sweep_model(builtin: &str, theta: f64) -> Result<(CompiledModel, Option<LensConfiguration>)> {
    match builtin {
        "single-lens" => {
            let lat = Lattice::new(Vec2::new(0.0, 4.0), Vec2::new(4.0, 2.0)).unwrap();
            let cfg = LensConfiguration::new(lat, vec![(Vec2::ZERO, 1.0)]).map_err(|e| anyhow!("{e}"))?;
            Ok((compile_lenses(&cfg), Some(cfg)))
        }
        "separated-slits" => {
            let lat = Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
            let slits = SlitConfiguration {
                lattice: lat,
                direction: Vec2::new(1.0, 0.0),
                slits: vec![(Vec2::new(0.2, 0.25), 0.1), (Vec2::new(0.6, 0.75), 0.1)],
            };
            Ok((compile_skeleton(&slits.skeleton()), None))
        }
        "gamma-w" => {
            let cfg = gamma_w(theta);
            Ok((compile_lenses(&cfg), Some(cfg)))
        }
        other => {
            let skel = builtin_skeleton(other).map_err(|e| anyhow!("{e}"))?;
            Ok((compile_skeleton(&skel), None))
        }
    }
}

fn experiment_cmd(cmd: ExperimentCmd) -> Result<i32> {
    let (name, args) = match &cmd {
        ExperimentCmd::Trapping(a) => ("trapping", a.clone()),
        ExperimentCmd::Ergodic(a) => ("ergodic", a.clone()),
        ExperimentCmd::Compare(a) => ("compare", a.clone()),
    };
    let summary = run_sweep(name, &args)?;
    fs::create_dir_all(&args.out_dir)?;
    let path = args.out_dir.join(format!("{name}_summary.json"));
    fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    println!("wrote {}", path.display());
    println!(
        "{name}: pass = {} (trapped {:?}, spreading {:?}, min match {:?})",
        summary.pass, summary.trapped_fraction, summary.spreading_fraction, summary.min_match_fraction
    );
    Ok(if summary.pass { 0 } else { 2 })
}

fn run_sweep(name: &str, args: &SweepArgs) -> Result<SweepSummary> {
    use rayon::prelude::*;
    // directions drawn once, sequentially, so threading cannot affect them
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let thetas: Vec<f64> = (0..args.thetas).map(|_| rng.gen::<f64>() * std::f64::consts::PI).collect();
    let records: Vec<DirectionRecord> = pool().install(|| {
        thetas
            .par_iter()
            .enumerate()
            .map(|(i, &theta)| direction_record(name, args, i, theta))
            .collect()
    });
    let mut summary = SweepSummary {
        experiment: name.into(),
        builtin: args.builtin.clone(),
        thetas: args.thetas,
        path: args.path,
        rays: args.rays,
        seed: args.seed,
        trap_cutoff: args.trap_cutoff,
        spread_floor: args.spread_floor,
        cell_floor: args.cell_floor,
        match_floor: args.match_floor,
        records,
        trapped_fraction: None,
        spreading_fraction: None,
        min_match_fraction: None,
        pass: false,
    };
    let usable: Vec<&DirectionRecord> = summary.records.iter().filter(|r| !r.singular).collect();
    let total = usable.len().max(1) as f64;
    match name {
        "trapping" => {
            let trapped = usable
                .iter()
                .filter(|r| r.growth_exponent.map_or(false, |g| g <= args.trap_cutoff))
                .count() as f64;
            summary.trapped_fraction = Some(trapped / total);
            summary.pass = trapped / total >= 0.8;
        }
        "ergodic" => {
            let spreading = usable
                .iter()
                .filter(|r| {
                    r.growth_exponent.map_or(false, |g| g >= args.spread_floor)
                        || r.cell_count.map_or(false, |c| c >= args.cell_floor)
                })
                .count() as f64;
            summary.spreading_fraction = Some(spreading / total);
            summary.pass = spreading / total >= 0.6;
        }
        "compare" => {
            let min_match = usable
                .iter()
                .filter_map(|r| r.match_fraction)
                .fold(f64::INFINITY, f64::min);
            summary.min_match_fraction = Some(if min_match.is_finite() { min_match } else { 1.0 });
            summary.pass = summary.min_match_fraction.unwrap() >= args.match_floor;
        }
        _ => unreachable!(),
    }
    Ok(summary)
}

fn direction_record(name: &str, args: &SweepArgs, index: usize, theta: f64) -> DirectionRecord {
    let mut rec = DirectionRecord {
        theta_over_pi: theta / std::f64::consts::PI,
        growth_exponent: None,
        min_width: None,
        cell_count: None,
        match_fraction: None,
        singular: false,
    };
    let per_dir_seed = args.seed.wrapping_add(1 + index as u64);
    let Ok((model, cfg)) = sweep_model(&args.builtin, theta) else {
        rec.singular = true;
        return rec;
    };
    if name == "compare" {
        let Some(cfg) = cfg else {
            rec.singular = true;
            return rec;
        };
        let slits = lens_to_slits(&cfg, theta).skeleton();
        let rep = compare_models(&cfg, &slits, theta, args.rays, args.path, per_dir_seed);
        rec.match_fraction = Some(rep.match_fraction());
        return rec;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(per_dir_seed);
    let start = match &cfg {
        Some(c) => match seed_start(&mut rng, c, theta) {
            Some(s) => s,
            None => {
                rec.singular = true;
                return rec;
            }
        },
        None => FlowState::new(Vec2::new(rng.gen::<f64>(), rng.gen::<f64>()), 1, theta),
    };
    let tr = trace(&model, start, args.path, 1024);
    if tr.terminated == Termination::Singular && tr.displacement_samples.len() < 10 {
        rec.singular = true;
        return rec;
    }
    match trap_stats(&tr) {
        Ok(st) => {
            rec.growth_exponent = Some(st.growth_exponent);
            rec.min_width = Some(st.min_width);
            rec.cell_count = Some(st.cell_count);
        }
        Err(_) => rec.singular = true,
    }
    rec
}

// ---------------------------------------------------------------------------
// iet
// ---------------------------------------------------------------------------

fn iet_cmd(cmd: IetCmd) -> Result<i32> {
    match cmd {
        IetCmd::Extract(args) => {
            let iet = extract_from_args(&args)?;
            println!("{}", serde_json::to_string_pretty(&IetJson::from_iet(&iet))?);
            Ok(0)
        }
        IetCmd::Rigidity {
            iet: args,
            hmax,
            rigid_tol,
            measure_floor,
            samples,
        } => {
            let iet = extract_from_args(&args)?;
            let psi = cocycle(&iet, &standard_plane_gamma());
            match rigidity_scan(&iet, &psi, hmax, rigid_tol, measure_floor, samples) {
                Ok(rep) => {
                    for c in &rep.candidates {
                        println!(
                            "h={} g=({},{}) measure={:.3} sup_disp={:.2e}",
                            c.rigidity_time, c.g[0], c.g[1], c.measure, c.sup_displacement
                        );
                    }
                    println!(
                        "candidates: {}, generated subgroup index: {:?}",
                        rep.candidates.len(),
                        rep.subgroup_index
                    );
                    Ok(0)
                }
                Err(e) => {
                    println!("scan aborted: {e}");
                    Ok(2)
                }
            }
        }
    }
}

fn extract_from_args(args: &IetArgs) -> Result<flatlens::iet::IetWithCocycle> {
    let skel = builtin_skeleton(&args.builtin).map_err(|e| anyhow!("{e}"))?;
    let theta = args.theta * std::f64::consts::PI;
    let section = Segment::new(
        Vec2::new(args.section[0], args.section[1]),
        Vec2::new(args.section[2], args.section[3]),
    );
    extract_iet(&skel, theta, section).map_err(|e| anyhow!("{e}"))
}
