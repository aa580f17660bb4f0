mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manifest::{sibling, FileDigest, RunManifest, RNG};
use sphereabout_core::assignment::AssignmentRecord;
use sphereabout_core::experiments::{
    evaluate_all, run_table_with, top_conflicting_flows_with, write_table_csv, TableReport,
};
use sphereabout_core::output::sig6;
use sphereabout_core::sensitivity::{fixed_lag_on, random_velocity_on, TravelTimeSummary};
use sphereabout_core::{
    build_conflict_graph, build_layout, travel_time_stats, validate_clearances, Config,
    ConflictHistogram, TravelTimeSource,
};

#[derive(Parser)]
#[command(
    name = "sphereabout",
    version,
    about = "Spherical UAV intersection: layout, conflicts, throughput and timing studies"
)]
struct Cli {
    /// TOML config, or a run manifest (`.json`) to reproduce.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Primary output file; side files are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override `radius_m`.
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Override `d_min_m`.
    #[arg(long, global = true)]
    dmin: Option<f64>,
    /// Override the Monte-Carlo master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Node coordinates and clearance validation (JSON).
    Layout,
    /// Pairwise min distances and conflict flags over all candidate paths (CSV).
    Conflicts,
    /// Throughput table over the exhaustive scenario sweep (CSV + report JSON).
    Table {
        /// Also write every scenario's assignment as JSON.
        #[arg(long)]
        assignments: Option<PathBuf>,
    },
    /// Timing Monte Carlo over the target pool (histogram CSV + summary JSON).
    Montecarlo {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Travel-time statistics per radius and speed (CSV + histogram CSV).
    Traveltime {
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        velocities: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Source::Candidates)]
        source: Source,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    FixedLag,
    RandomVelocity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Candidates,
    Sweep,
}

enum Failure {
    Config(String),
    Validation(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Config(_) => 2,
            Failure::Validation(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<sphereabout_core::Error> for Failure {
    fn from(e: sphereabout_core::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

/// Collects written files for the manifest.
struct Run {
    config: Config,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    command: Vec<String>,
}

impl Run {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Outcome<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, bytes)
            .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
        self.outputs.push(FileDigest::of(path, bytes));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Outcome<()> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    fn finish(self, out: &Path) -> Outcome<()> {
        let m = RunManifest {
            tool: "sphereabout".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            seed: self.config.seed,
            config: self.config,
            rng: RNG.into(),
            inputs: self.inputs,
            outputs: self.outputs.clone(),
        };
        let path = sibling(out, "manifest.json");
        let mut bytes =
            serde_json::to_vec_pretty(&m).map_err(|e| Failure::Internal(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes)
            .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

fn load_config(cli: &Cli) -> Outcome<(Config, Vec<FileDigest>)> {
    let (mut config, inputs) = match &cli.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let digest = FileDigest::of(path, &bytes);
            let config = if path.extension().is_some_and(|e| e == "json") {
                let m: RunManifest = serde_json::from_slice(&bytes)
                    .map_err(|e| Failure::Config(format!("{}: not a run manifest: {e}", path.display())))?;
                m.config
            } else {
                Config::load(path).map_err(|e| match e {
                    e if e.is_config() && !matches!(e, sphereabout_core::Error::ConfigFile { .. }) => {
                        Failure::Config(format!("{}: {e}", path.display()))
                    }
                    e => e.into(),
                })?
            };
            (config, vec![digest])
        }
        None => match (cli.radius, cli.dmin) {
            (Some(r), Some(d)) => (Config::new(r, d), Vec::new()),
            _ => {
                return Err(Failure::Config(
                    "no --config given; `radius_m` and `d_min_m` must then come from --radius and --dmin".into(),
                ))
            }
        },
    };
    if let Some(r) = cli.radius {
        config.radius_m = r;
    }
    if let Some(d) = cli.dmin {
        config.d_min_m = d;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok((config, inputs))
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn cmd_layout(run: &mut Run, out: &Path) -> Outcome<()> {
    let layout = run.config.layout()?;
    let clearance = run.config.clearance()?;
    let report = validate_clearances(&layout, &clearance, run.config.d_min_m);
    #[derive(Serialize)]
    struct LayoutFile<'a> {
        layout: sphereabout_core::geometry::LayoutExport,
        validation: &'a sphereabout_core::ValidationReport,
    }
    run.write_json(
        out,
        &LayoutFile {
            layout: layout.export(),
            validation: &report,
        },
    )?;
    if !report.passed() {
        let names: Vec<String> = report
            .failures()
            .map(|c| format!("{} ({} < {})", c.name, sig6(c.measured), sig6(c.required)))
            .collect();
        return Err(Failure::Validation(names.join(", ")));
    }
    Ok(())
}

fn cmd_conflicts(run: &mut Run, out: &Path) -> Outcome<()> {
    let graph = build_conflict_graph(&run.config.layout()?, &run.config.policy())?;
    let mut buf = Vec::new();
    graph.write_csv(&mut buf)?;
    run.write(out, &buf)
}

fn cmd_table(run: &mut Run, out: &Path, assignments: Option<&Path>) -> Outcome<()> {
    let experiment = run.config.experiment();
    let graph = experiment.graph()?;
    let rows = run_table_with(&experiment, &graph)?;
    let mut buf = Vec::new();
    write_table_csv(&rows, &mut buf)?;
    run.write(out, &buf)?;

    let top = top_conflicting_flows_with(&experiment, &graph)?;
    let report = TableReport::new(&experiment, rows, top);
    run.write_json(&sibling(out, "report.json"), &report)?;

    if let Some(path) = assignments {
        let mut records = Vec::new();
        for &n in &experiment.n_uavs {
            for o in evaluate_all(n, &graph)? {
                records.push(AssignmentRecord::new(&o.scenario, &o.assignment, o.class));
            }
        }
        // one record per line keeps the file diffable without pretty-print bloat
        let mut buf = b"[\n".to_vec();
        for (k, r) in records.iter().enumerate() {
            serde_json::to_writer(&mut buf, r).map_err(|e| Failure::Internal(e.to_string()))?;
            buf.extend_from_slice(if k + 1 < records.len() { b",\n" } else { b"\n" });
        }
        buf.extend_from_slice(b"]\n");
        run.write(path, &buf)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct McSummary {
    mode: &'static str,
    n_experiments: usize,
    pool_size: usize,
    mean_conflicting_pairs: f64,
    fraction_conflict_free: f64,
    histogram: ConflictHistogram,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineSummary>,
}

#[derive(Serialize)]
struct BaselineSummary {
    mean_conflicting_pairs: f64,
    fraction_conflict_free: f64,
    histogram: ConflictHistogram,
}

fn cmd_montecarlo(run: &mut Run, out: &Path, mode: Mode) -> Outcome<()> {
    let mc = run.config.mc();
    let experiment = run.config.experiment();
    let (graph, targets) = mc.targets(&experiment)?;
    if targets.is_empty() {
        eprintln!("warning: Monte-Carlo target set is empty; writing an empty histogram");
    }
    let (hist, baseline, label) = match mode {
        Mode::FixedLag => {
            let s = fixed_lag_on(&targets, &graph, &experiment.policy, &mc)?;
            (s.lagged, Some(s.baseline), "fixed_lag")
        }
        Mode::RandomVelocity => (
            random_velocity_on(&targets, &graph, &experiment.policy, &mc)?,
            None,
            "random_velocity",
        ),
    };
    let mut buf = Vec::new();
    hist.write_csv(&mut buf)?;
    run.write(out, &buf)?;
    let summary = McSummary {
        mode: label,
        n_experiments: hist.n_experiments,
        pool_size: targets.len(),
        mean_conflicting_pairs: hist.mean(),
        fraction_conflict_free: hist.fraction_conflict_free(),
        baseline: baseline.map(|b| BaselineSummary {
            mean_conflicting_pairs: b.mean(),
            fraction_conflict_free: b.fraction_conflict_free(),
            histogram: b,
        }),
        histogram: hist,
    };
    run.write_json(&sibling(out, "summary.json"), &summary)
}

fn cmd_traveltime(
    run: &mut Run,
    out: &Path,
    radii: Option<&[f64]>,
    velocities: Option<&[f64]>,
    source: Source,
) -> Outcome<()> {
    let c = &run.config;
    let radii = radii
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![c.radius_m]);
    let speeds = velocities
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| c.travel_time_speeds_mps.clone());
    let source = match source {
        Source::Candidates => TravelTimeSource::CandidatePaths,
        Source::Sweep => TravelTimeSource::Sweep {
            n_uavs: c.n_uavs.clone(),
            policy: c.policy(),
        },
    };
    let mut all: Vec<TravelTimeSummary> = Vec::new();
    for r in radii {
        let layout = build_layout(
            r,
            c.equatorial_offset_deg,
            c.polar_offset_deg,
            c.circulation,
        )?;
        all.extend(travel_time_stats(
            &layout,
            &speeds,
            &source,
            c.travel_time_bin_s,
        )?);
    }
    let mut summary = String::from("radius_m,speed_mps,paths,min_s,mean_s,max_s\n");
    let mut hist = String::from("radius_m,speed_mps,bin_start_s,bin_end_s,paths\n");
    for s in &all {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig6(s.radius_m),
            sig6(s.speed_mps),
            s.count,
            sig6(s.min_s),
            sig6(s.mean_s),
            sig6(s.max_s)
        ));
        for (start, n) in &s.histogram {
            hist.push_str(&format!(
                "{},{},{},{},{n}\n",
                sig6(s.radius_m),
                sig6(s.speed_mps),
                sig6(*start),
                sig6(start + s.bin_width_s)
            ));
        }
    }
    run.write(out, summary.as_bytes())?;
    run.write(&sibling(out, "histogram.csv"), hist.as_bytes())
}

fn command_line(cmd: &Command) -> Vec<String> {
    let mut v = Vec::new();
    let list = |xs: &[f64]| {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    match cmd {
        Command::Layout => v.push("layout".into()),
        Command::Conflicts => v.push("conflicts".into()),
        Command::Table { assignments } => {
            v.push("table".into());
            if let Some(p) = assignments {
                v.extend(["--assignments".into(), p.display().to_string()]);
            }
        }
        Command::Montecarlo { mode } => {
            let m = match mode {
                Mode::FixedLag => "fixed-lag",
                Mode::RandomVelocity => "random-velocity",
            };
            v.extend(["montecarlo".into(), "--mode".into(), m.into()]);
        }
        Command::Traveltime {
            radii,
            velocities,
            source,
        } => {
            v.push("traveltime".into());
            if let Some(r) = radii {
                v.extend(["--radii".into(), list(r)]);
            }
            if let Some(s) = velocities {
                v.extend(["--velocities".into(), list(s)]);
            }
            let s = match source {
                Source::Candidates => "candidates",
                Source::Sweep => "sweep",
            };
            v.extend(["--source".into(), s.into()]);
        }
    }
    v
}

fn run(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let (config, inputs) = load_config(&cli)?;
    let mut run = Run {
        config,
        inputs,
        outputs: Vec::new(),
        command: command_line(&cli.command),
    };
    let (out, result) = match &cli.command {
        Command::Layout => {
            let out = out_path(&cli, "layout.json");
            let r = cmd_layout(&mut run, &out);
            (out, r)
        }
        Command::Conflicts => {
            let out = out_path(&cli, "conflicts.csv");
            let r = cmd_conflicts(&mut run, &out);
            (out, r)
        }
        Command::Table { assignments } => {
            let out = out_path(&cli, "table.csv");
            let r = cmd_table(&mut run, &out, assignments.as_deref());
            (out, r)
        }
        Command::Montecarlo { mode } => {
            let out = out_path(&cli, "montecarlo.csv");
            let r = cmd_montecarlo(&mut run, &out, *mode);
            (out, r)
        }
        Command::Traveltime {
            radii,
            velocities,
            source,
        } => {
            let out = out_path(&cli, "traveltime.csv");
            let r = cmd_traveltime(
                &mut run,
                &out,
                radii.as_deref(),
                velocities.as_deref(),
                *source,
            );
            (out, r)
        }
    };
    // a failed validation still leaves its report and manifest behind
    if result.is_ok() || matches!(result, Err(Failure::Validation(_))) {
        run.finish(&out)?;
    }
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
