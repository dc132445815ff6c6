use clap::{Args, Parser, Subcommand, ValueEnum};
use reachplan::baseregion::{BaseRegion, GraspOptions, QueryMode, RegionError, WitnessStrategy};
use reachplan::kinematics::{forward_kinematics, refine_ik, IkOutcome, RefineOptions};
use reachplan::pipeline::{
    build_scene_db, intersections_svg, plan_scene, plan_svg, region_svg, regions_in_task_order, scene_regions, simulate_scene,
    DbParams, IntersectionAnalysis, PipelineError,
};
use reachplan::pose::Pose6;
use reachplan::reachdb::{DbError, ReachDb};
use reachplan::regiongeo::{ErrorModel, UncertaintyModel};
use reachplan::robustsim::{SimOptions, TimeModel};
use reachplan::scene::{parse_scene, Scene, SceneError};
use reachplan::sequencer::{PlanOptions, PlanResult, SaSchedule, SequencerError};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Parser)]
#[command(name = "reachplan", version, about = "Reachability-database base placement and stop sequencing")]
struct Cli {
    /// Worker threads (default: available parallelism). REACHPLAN_THREADS overrides.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the arm's joint space and save a reachability database.
    BuildDb(BuildDbArgs),
    /// Look up stored configurations for an end-effector pose.
    QueryIk(QueryIkArgs),
    /// Compute base regions for task trays.
    Region(RegionArgs),
    /// Enumerate region intersections and filter them by uncertainty.
    Intersect(IntersectArgs),
    /// Select and order base stops.
    Plan(PlanArgs),
    /// Monte Carlo evaluation of a plan under base positioning error.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct BuildDbArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Joint sampling step, radians.
    #[arg(long)]
    dtheta: f64,
    /// Voxel lengths "dx,dy,dz,droll,dpitch,dyaw".
    #[arg(long)]
    voxel: String,
    /// Minimum manipulability kept.
    #[arg(long, default_value_t = 0.0)]
    wmin: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryIkArgs {
    #[arg(long)]
    db: PathBuf,
    /// Target "x,y,z,roll,pitch,yaw" in the base frame.
    #[arg(long, allow_hyphen_values = true)]
    pose: String,
    /// Search the surrounding interval instead of the single voxel.
    #[arg(long)]
    interval: bool,
    /// Refine each configuration to an exact solution (needs --scene for the chain).
    #[arg(long, requires = "scene")]
    refine: bool,
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Multi,
    Single,
}

#[derive(Clone, Copy, ValueEnum)]
enum Query {
    Interval,
    Exact,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    db: PathBuf,
    /// Tray id; all task trays when omitted.
    #[arg(long)]
    tray: Vec<String>,
    #[arg(long, value_enum, default_value = "multi")]
    strategy: Strategy,
    #[arg(long, value_enum, default_value = "interval")]
    query: Query,
    /// Extra inflation of robot shapes, meters (overrides the scene).
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IntersectArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    regions: PathBuf,
    /// Filter threshold (default: the scene's sigma).
    #[arg(long)]
    sigma: Option<f64>,
    /// Largest intersection order (default: number of trays).
    #[arg(long)]
    lambda_max: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    regions: PathBuf,
    #[arg(long)]
    sigma: Option<f64>,
    /// "x,y" (default: the scene's start).
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    /// "x,y" (default: the scene's goal).
    #[arg(long, allow_hyphen_values = true)]
    goal: Option<String>,
    #[arg(long, default_value_t = 42)]
    sa_seed: u64,
    #[arg(long)]
    lambda_max: Option<usize>,
    /// Directory for plan.txt and plan.svg.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Region directory (default: the plan file's directory).
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    sigma: Option<f64>,
    /// uniform, gaussian or boundary (default: the scene's model).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shrink the error radius by half a cell diagonal.
    #[arg(long)]
    slack: bool,
    /// Travel speed, m/s.
    #[arg(long, default_value_t = 0.5)]
    speed: f64,
    /// Time per stop, s.
    #[arg(long, default_value_t = 20.0)]
    overhead: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("{0}")]
    Format(String),
}

impl CliError {
    fn code(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("USAGE", 2),
            CliError::Scene(e) => (e.code.as_str(), 3),
            CliError::Io { .. } => ("IO", 5),
            CliError::Db(DbError::Io(_)) => ("IO", 5),
            CliError::Db(DbError::FingerprintMismatch)
            | CliError::Pipeline(PipelineError::Db(DbError::FingerprintMismatch))
            | CliError::Pipeline(PipelineError::Region(RegionError::Db(DbError::FingerprintMismatch))) => ("DB_MISMATCH", 3),
            CliError::Db(DbError::Load(_)) => ("FORMAT", 5),
            CliError::Db(_) => ("DB", 1),
            CliError::Pipeline(PipelineError::Sequencer(SequencerError::Infeasible { .. })) => ("INFEASIBLE", 4),
            CliError::Pipeline(PipelineError::UnknownTray(_)) => ("SCENE_UNKNOWN_TRAY", 3),
            CliError::Pipeline(_) => ("PIPELINE", 1),
            CliError::Format(_) => ("FORMAT", 5),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String> {
    io(path, fs::read_to_string(path))
}

fn write(path: &Path, text: &str) -> Result<()> {
    io(path, fs::write(path, text))
}

fn load_scene(path: &Path) -> Result<Scene> {
    Ok(parse_scene(&read(path)?)?)
}

fn numbers<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("{what}: expected {N} comma-separated numbers, got {s:?}")))?;
    v.try_into()
        .map_err(|_| CliError::Usage(format!("{what}: expected {N} comma-separated numbers, got {s:?}")))
}

fn uncertainty(scene: &Scene, sigma: Option<f64>, model: Option<&str>, seed: Option<u64>) -> Result<UncertaintyModel> {
    let model = match model {
        Some(m) => ErrorModel::parse(m).ok_or_else(|| CliError::Usage(format!("unknown error model {m:?}")))?,
        None => scene.uncertainty.model,
    };
    UncertaintyModel::new(
        sigma.unwrap_or(scene.uncertainty.sigma),
        model,
        seed.unwrap_or(scene.uncertainty.seed),
    )
    .map_err(|e| CliError::Usage(e.to_string()))
}

fn region_path(dir: &Path, tray: &str) -> PathBuf {
    dir.join(format!("region_{tray}.txt"))
}

fn load_regions(scene: &Scene, dir: &Path) -> Result<Vec<BaseRegion>> {
    let mut regions = Vec::new();
    for tray in scene.task_trays() {
        let path = region_path(dir, &tray);
        let r = BaseRegion::from_text(&read(&path)?).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        if r.grid != scene.base_grid {
            return Err(CliError::Format(format!("{}: grid differs from the scene's base grid", path.display())));
        }
        regions.push(r);
    }
    Ok(regions_in_task_order(scene, regions)?)
}

fn build_db(a: BuildDbArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let voxel = numbers::<6>(&a.voxel, "--voxel")?;
    let (db, stats) = build_scene_db(
        &scene,
        &DbParams {
            dtheta: a.dtheta,
            voxel,
            w_min: a.wmin,
        },
    )?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        io(dir, fs::create_dir_all(dir))?;
    }
    io(&a.out, fs::write(&a.out, db.to_bytes()))?;
    println!("sampled {} records {} voxels {}", stats.sampled, stats.stored, stats.voxels);
    Ok(())
}

fn fmt_config(q: &[f64]) -> String {
    q.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
}

fn fmt_pose(p: &Pose6) -> String {
    fmt_config(&p.to_array())
}

fn query_ik(a: QueryIkArgs) -> Result<()> {
    let target = Pose6::from_array(numbers::<6>(&a.pose, "--pose")?);
    let chain = match &a.scene {
        Some(s) => Some(load_scene(s)?.chain()),
        None => None,
    };
    let db = match &chain {
        Some(c) => ReachDb::load_for_chain(&a.db, c)?,
        None => ReachDb::load(&a.db)?,
    };
    let records: Vec<_> = if a.interval {
        db.query_interval(&target)
    } else {
        db.query(&target).iter().collect()
    };
    println!("{} configurations", records.len());
    for r in &records {
        let mut line = format!("config {} w={:.6} pose={}", fmt_config(r.config.as_slice()), r.manipulability, fmt_pose(&r.pose));
        if a.refine {
            let chain = chain.as_ref().expect("--refine requires --scene");
            match refine_ik(chain, &r.config, &target, &RefineOptions::default()).map_err(PipelineError::from)? {
                IkOutcome::Converged { config, .. } => {
                    let p = forward_kinematics(chain, &config).map_err(PipelineError::from)?;
                    line.push_str(&format!(" refined={} refined_pose={}", fmt_config(config.as_slice()), fmt_pose(&p)));
                }
                IkOutcome::NoConvergence => line.push_str(" refined=none"),
            }
        }
        println!("{line}");
    }
    Ok(())
}

fn region(a: RegionArgs) -> Result<()> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(m) = a.margin {
        if !(m >= 0.0) {
            return Err(CliError::Usage(format!("--margin must be non-negative, got {m}")));
        }
        scene.robot.margin = m;
    }
    let db = ReachDb::load(&a.db)?;
    let options = GraspOptions {
        query: match a.query {
            Query::Interval => QueryMode::Interval,
            Query::Exact => QueryMode::Exact,
        },
        strategy: match a.strategy {
            Strategy::Multi => WitnessStrategy::MultiWitness,
            Strategy::Single => WitnessStrategy::SingleWitness,
        },
        refine: None,
    };
    let regions = scene_regions(&scene, &db, &a.tray, &options)?;
    io(&a.out, fs::create_dir_all(&a.out))?;
    for r in &regions {
        write(&region_path(&a.out, &r.tray), &r.to_text())?;
        write(&a.out.join(format!("region_{}.svg", r.tray)), &region_svg(&scene, r))?;
        println!("region {} cells {}", r.tray, r.mask.count());
    }
    Ok(())
}

fn intersect(a: IntersectArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let regions = load_regions(&scene, &a.regions)?;
    let u = uncertainty(&scene, a.sigma, None, None)?;
    let analysis = IntersectionAnalysis::new(&regions, &u, a.lambda_max)?;
    io(&a.out, fs::create_dir_all(&a.out))?;
    write(&a.out.join("intersections.txt"), &analysis.records_text())?;
    write(&a.out.join("filter.txt"), &analysis.report())?;
    write(&a.out.join("intersections.svg"), &intersections_svg(&scene, &regions, &analysis))?;
    print!("{}", analysis.report());
    Ok(())
}

fn plan(a: PlanArgs) -> Result<()> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(s) = &a.start {
        scene.start = numbers::<2>(s, "--start")?;
    }
    if let Some(g) = &a.goal {
        scene.goal = numbers::<2>(g, "--goal")?;
    }
    let regions = load_regions(&scene, &a.regions)?;
    let u = uncertainty(&scene, a.sigma, None, None)?;
    let options = PlanOptions {
        lambda_max: a.lambda_max,
        sa: SaSchedule {
            seed: a.sa_seed,
            ..SaSchedule::default()
        },
    };
    let plan = plan_scene(&scene, &regions, &u, &options)?;
    let text = plan.to_text();
    if let Some(dir) = &a.out {
        io(dir, fs::create_dir_all(dir))?;
        write(&dir.join("plan.txt"), &text)?;
        write(&dir.join("plan.svg"), &plan_svg(&scene, &regions, &plan))?;
    }
    print!("{text}");
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let plan = PlanResult::from_text(&read(&a.plan)?).map_err(|e| CliError::Format(format!("{}: {e}", a.plan.display())))?;
    let dir = match &a.regions {
        Some(d) => d.clone(),
        None => a.plan.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    let regions = load_regions(&scene, &dir)?;
    let u = uncertainty(&scene, a.sigma, a.model.as_deref(), a.seed)?;
    let time = TimeModel::new(a.speed, a.overhead).map_err(|e| CliError::Usage(e.to_string()))?;
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let report = simulate_scene(
        &scene,
        &regions,
        &plan,
        &u,
        &SimOptions {
            trials: a.trials,
            quantization_slack: a.slack,
            time,
        },
    )?;
    let text = report.to_text();
    if let Some(out) = &a.out {
        write(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let env = match std::env::var("REACHPLAN_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("REACHPLAN_THREADS must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = env.or(flag) {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::BuildDb(a) => build_db(a),
        Command::QueryIk(a) => query_ik(a),
        Command::Region(a) => region(a),
        Command::Intersect(a) => intersect(a),
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error: code=USAGE message={}", one_line(&e.kind().to_string()));
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, exit) = e.code();
            eprintln!("error: code={code} message={}", one_line(&e.to_string()));
            ExitCode::from(exit)
        }
    }
}
