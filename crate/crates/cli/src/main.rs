mod annotate;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;
use weavetrack_core::bench::{run_suite, Suite};
use weavetrack_core::imagecore::load_image;
use weavetrack_core::records::{write_record, TrackRecord};
use weavetrack_core::synth::{generate_sequence, Schedule, WeaveSpec};
use weavetrack_core::tracker::FrameFeatures;
use weavetrack_core::{Config, Error, TrackStatus, Tracker};

use annotate::Canvas;

#[derive(Parser)]
#[command(name = "weavetrack", version, about = "Fabric texture tracking and thread counting")]
struct Cli {
    /// TOML config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed (and the synthetic spec seed for `gen`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log stage progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Translation,
    Rotation,
    Static,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Translation,
    Rotation,
    Thread,
    Speed,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic weave sequence and its truth file.
    Gen {
        #[arg(long, value_enum, default_value = "translation")]
        schedule: ScheduleArg,
        /// Keep only the first N poses of the schedule.
        #[arg(long)]
        frames: Option<usize>,
        /// Weave spec as JSON; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Additive noise sigma, 1.0 = full 8-bit range.
        #[arg(long)]
        noise: Option<f64>,
        /// Per-blob placement jitter sigma, pixels.
        #[arg(long)]
        jitter: Option<f64>,
    },
    /// Track a frame sequence and write one record per frame.
    Track {
        /// Frame files in order, or a directory of .pgm/.png files.
        #[arg(required = true)]
        frames: Vec<PathBuf>,
        /// Write one PNG per frame with regions, matches and the lattice.
        #[arg(long, value_name = "DIR")]
        dump_annotated: Option<PathBuf>,
        /// Write the detected regions of each frame as JSON lines.
        #[arg(long, value_name = "DIR")]
        dump_features: Option<PathBuf>,
        /// Include stage timings in the records (not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Detect the weave lattice in one image.
    Lattice {
        image: PathBuf,
        /// Draw the anchor, neighbours and basis onto a copy of the image.
        #[arg(long, value_name = "PNG")]
        annotate: Option<PathBuf>,
    },
    /// Run benchmark suites on generated data.
    Bench {
        #[arg(value_enum, default_value = "all")]
        suite: SuiteArg,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Stage(anyhow::Error),
    Gate,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let stage = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(|e| e.failed_stage().is_some()));
        if stage { Failure::Stage(e) } else { Failure::Usage(e) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Gate) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    match cli.command {
        Command::Gen { schedule, frames, spec, noise, jitter } => {
            cmd_gen(schedule, frames, spec, noise, jitter, cli.seed, cli.out)
        }
        Command::Track { frames, dump_annotated, dump_features, timings } => {
            cmd_track(&frames, config, cli.out, dump_annotated, dump_features, timings)
        }
        Command::Lattice { image, annotate } => cmd_lattice(&image, config, cli.out, annotate),
        Command::Bench { suite } => cmd_bench(suite, &config, cli.out),
    }
}

fn cmd_gen(
    schedule: ScheduleArg,
    frames: Option<usize>,
    spec_path: Option<PathBuf>,
    noise: Option<f64>,
    jitter: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<WeaveSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => WeaveSpec::default(),
    };
    if let Some(n) = noise {
        spec.noise_sigma = n;
    }
    if let Some(j) = jitter {
        spec.jitter_sigma = j;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if frames == Some(0) {
        return Err(Failure::Usage(anyhow::anyhow!("--frames must be at least 1")));
    }
    let schedule = match schedule {
        ScheduleArg::Translation => Schedule::Translation,
        ScheduleArg::Rotation => Schedule::Rotation,
        ScheduleArg::Static => Schedule::Static,
    };
    let out = out.unwrap_or_else(|| PathBuf::from("frames"));
    let seq = generate_sequence(&spec, &schedule.poses(&spec, frames), &out)?;
    info!("wrote {} frames to {}", seq.frames.len(), out.display());
    println!("{}", seq.truth_path.display());
    Ok(())
}

fn expand_frames(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension()
                        .and_then(|x| x.to_str())
                        .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "pgm" | "png" | "pnm"))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn features_dump(path: &Path, f: &FrameFeatures) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let described: std::collections::HashSet<usize> = f.features.iter().map(|x| x.region).collect();
    let individual: std::collections::HashSet<usize> = f.individual.iter().copied().collect();
    for (i, r) in f.regions.iter().enumerate() {
        let line = json!({
            "region": i,
            "x": r.centroid.0,
            "y": r.centroid.1,
            "area": r.area,
            "major": r.ellipse.major,
            "minor": r.ellipse.minor,
            "orientation_deg": r.ellipse.orientation_deg,
            "individual": individual.contains(&i),
            "described": described.contains(&i),
        });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_track(
    inputs: &[PathBuf],
    config: Config,
    out: Option<PathBuf>,
    annotated: Option<PathBuf>,
    features: Option<PathBuf>,
    timings: bool,
) -> Result<(), Failure> {
    let frames = expand_frames(inputs)?;
    if frames.len() < 2 {
        return Err(Failure::Usage(anyhow::anyhow!("track needs at least 2 frames, got {}", frames.len())));
    }
    for dir in [&annotated, &features].into_iter().flatten() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };

    let first = load_image(&frames[0])?;
    let mut tracker = Tracker::init(first, config).with_context(|| format!("initialising on {}", frames[0].display()))?;
    info!("init: {} regions, lattice {:?}", tracker.previous().regions.len(), tracker.lattice());
    if let Some(dir) = &annotated {
        let f = tracker.previous();
        let mut c = Canvas::from_gray(&f.image);
        c.regions(&f.regions);
        c.lattice(tracker.lattice(), 3);
        c.save(&dir.join("annotated_0000.png"))?;
    }
    if let Some(dir) = &features {
        features_dump(&dir.join("features_0000.jsonl"), tracker.previous())?;
    }

    for path in &frames[1..] {
        let img = load_image(path)?;
        let copy = annotated.as_ref().map(|_| img.clone());
        let r = tracker.process(img);
        info!("{}: {} inliers {} {}", path.display(), r.status.name(), r.inlier_count, r.failure.as_deref().unwrap_or(""));
        write_record(&mut sink, &TrackRecord::from_result(&r, timings))?;
        let ok = r.status != TrackStatus::Lost;
        if let Some(dir) = &annotated {
            let mut c = match (&copy, ok) {
                (_, true) => Canvas::from_gray(&tracker.previous().image),
                (Some(img), false) => Canvas::from_gray(img),
                (None, false) => unreachable!("image kept when annotating"),
            };
            if ok {
                c.regions(&tracker.previous().regions);
                c.matches(&r.correspondences);
                c.lattice(tracker.lattice(), 3);
            }
            c.save(&dir.join(format!("annotated_{:04}.png", r.frame_index)))?;
        }
        if let (Some(dir), true) = (&features, ok) {
            features_dump(&dir.join(format!("features_{:04}.jsonl", r.frame_index)), tracker.previous())?;
        }
    }
    sink.flush().context("writing records")?;
    Ok(())
}

fn cmd_lattice(image: &Path, config: Config, out: Option<PathBuf>, annotate: Option<PathBuf>) -> Result<(), Failure> {
    let img = load_image(image)?;
    let tracker = Tracker::init(img, config)?;
    let b = tracker.lattice();
    let d = tracker.lattice_detail();
    let o = tracker.orientations();
    let (p1, p2) = b.pitches();
    println!("anchor      {:.4} {:.4}", b.anchor.x, b.anchor.y);
    println!("v1          {:.4} {:.4}  |v1| {:.4}", b.v1.x, b.v1.y, p1);
    println!("v2          {:.4} {:.4}  |v2| {:.4}", b.v2.x, b.v2.y, p2);
    println!("theta_refs  {:.3} {:.3}", b.theta_refs[0], b.theta_refs[1]);
    println!("spectral peaks (angle_deg magnitude radius)");
    for p in &o.all_peaks {
        println!("  {:>9.3} {:>14.2} {:>8.2}", p.angle_deg, p.magnitude, p.radius);
    }
    println!("correlation peaks (x y score)");
    for p in &d.neighbors {
        println!("  {:>9.3} {:>9.3} {:>7.4}", p.position.x, p.position.y, p.score);
    }
    if let Some(path) = out {
        let summary = json!({
            "anchor": [b.anchor.x, b.anchor.y],
            "v1": [b.v1.x, b.v1.y],
            "v2": [b.v2.x, b.v2.y],
            "theta_refs": b.theta_refs,
            "spectral_peaks": o.all_peaks.iter().map(|p| json!({"angle_deg": p.angle_deg, "magnitude": p.magnitude, "radius": p.radius})).collect::<Vec<_>>(),
            "correlation_peaks": d.neighbors.iter().map(|p| json!({"x": p.position.x, "y": p.position.y, "score": p.score})).collect::<Vec<_>>(),
        });
        fs::write(&path, format!("{summary}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = annotate {
        let f = tracker.previous();
        let mut c = Canvas::from_gray(&f.image);
        c.regions(f.individual.iter().map(|&i| &f.regions[i]));
        c.lattice(b, 3);
        c.save(&path)?;
    }
    Ok(())
}

fn cmd_bench(suite: SuiteArg, config: &Config, out: Option<PathBuf>) -> Result<(), Failure> {
    let suites = match suite {
        SuiteArg::Translation => vec![Suite::Translation],
        SuiteArg::Rotation => vec![Suite::Rotation],
        SuiteArg::Thread => vec![Suite::Thread],
        SuiteArg::Speed => vec![Suite::Speed],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let mut reports = Vec::new();
    for s in suites {
        let r = run_suite(s, config)?;
        print!("{}", r.table());
        println!();
        reports.push(r);
    }
    let path = out.unwrap_or_else(|| PathBuf::from("bench_summary.json"));
    let text = serde_json::to_string_pretty(&reports).context("serialising summary")?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    info!("summary in {}", path.display());
    if reports.iter().all(|r| r.pass()) {
        Ok(())
    } else {
        Err(Failure::Gate)
    }
}
