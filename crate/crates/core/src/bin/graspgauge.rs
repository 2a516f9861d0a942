use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use graspgauge::gripper::{default_registry, find_gripper, load_gripper_registry};
use graspgauge::mesh::degrade::{degrade_mesh, DegradeParams};
use graspgauge::mesh::io::{load_mesh_with_units, write_obj, Units};
use graspgauge::oracle::SimParams;
use graspgauge::runner::bop::ingest_bop_poses;
use graspgauge::runner::corpus::primitive_mesh;
use graspgauge::runner::{run_condition, write_outputs, ExperimentCondition, ExperimentConfig, PoseSource};
use graspgauge::sampler::{build_library_with_oracle, save_library, SamplerParams};
use graspgauge::se3::RigidTransform;
use graspgauge::{Error, Result, TriMesh};

#[derive(Parser)]
#[command(name = "graspgauge", version, about = "Grasp success under pose error and mesh degradation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 means one per core. Never changes results.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, or output file for `sample` and `degrade`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    /// Length unit of input meshes and pose files: mm or m.
    #[arg(long, global = true, value_parser = parse_units)]
    units: Option<Units>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample antipodal grasps and label them at the identity pose.
    Sample(SampleArgs),
    /// Write a degraded copy of a mesh as OBJ.
    Degrade(DegradeArgs),
    /// Run one experimental condition from a config.
    Eval {
        #[arg(long, value_parser = parse_condition)]
        condition: Option<ExperimentCondition>,
    },
    /// Run a synthetic pose-noise sweep from a config.
    Sweep {
        #[arg(long, value_parser = parse_condition)]
        condition: Option<ExperimentCondition>,
        /// Noise levels as `sigma_t:sigma_r` pairs, comma separated.
        #[arg(long, value_parser = parse_levels)]
        levels: Option<Levels>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Pair BOP estimates with ground truth and write them as JSON Lines.
    IngestBop {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        scene_id: u32,
    },
    /// Print the summary of a finished run directory.
    Report {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MeshArgs {
    /// OBJ or PLY mesh.
    #[arg(long, conflicts_with = "primitive")]
    mesh: Option<PathBuf>,
    /// Built-in shape name.
    #[arg(long)]
    primitive: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long)]
    gripper: String,
    /// Gripper registry; the built-in one when absent.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    object_id: Option<String>,
}

#[derive(Args)]
struct DegradeArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    smooth: usize,
    #[arg(long, default_value_t = 1.0)]
    decimate: f64,
    #[arg(long, default_value_t = 0)]
    holes: usize,
}

#[derive(Clone)]
struct Levels(Vec<[f64; 2]>);

fn parse_units(s: &str) -> std::result::Result<Units, String> {
    match s {
        "mm" | "millimeters" => Ok(Units::Millimeters),
        "m" | "meters" => Ok(Units::Meters),
        _ => Err(format!("unknown unit `{s}` (use mm or m)")),
    }
}

fn parse_condition(s: &str) -> std::result::Result<ExperimentCondition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_levels(s: &str) -> std::result::Result<Levels, String> {
    s.split(',')
        .map(|pair| {
            let (t, r) = pair.split_once(':').ok_or(format!("level `{pair}` is not sigma_t:sigma_r"))?;
            let t: f64 = t.trim().parse().map_err(|_| format!("bad sigma_t in `{pair}`"))?;
            let r: f64 = r.trim().parse().map_err(|_| format!("bad sigma_r in `{pair}`"))?;
            Ok([t, r])
        })
        .collect::<std::result::Result<_, String>>()
        .map(Levels)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Cmd::Sample(a) => sample(g, a),
        Cmd::Degrade(a) => degrade(g, a),
        Cmd::Eval { condition } => {
            let mut cfg = load_config(g)?;
            if let Some(c) = condition {
                cfg.condition = c;
            }
            execute(&cfg)
        }
        Cmd::Sweep {
            condition,
            levels,
            trials,
        } => {
            let mut cfg = load_config(g)?;
            if let Some(c) = condition {
                cfg.condition = c;
            }
            match &mut cfg.poses {
                PoseSource::Synthetic {
                    levels: l,
                    trials_per_level,
                    ..
                } => {
                    if let Some(Levels(v)) = levels {
                        *l = v;
                    }
                    if let Some(n) = trials {
                        *trials_per_level = n;
                    }
                }
                PoseSource::Bop { .. } => {
                    return Err(Error::Config("sweep needs a synthetic pose source".into()));
                }
            }
            execute(&cfg)
        }
        Cmd::IngestBop {
            estimates,
            ground_truth,
            scene_id,
        } => ingest(g, &estimates, &ground_truth, scene_id),
        Cmd::Report { dir } => {
            let dir = dir.or_else(|| g.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            report(&dir)
        }
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = g.n_samples {
        cfg.n_samples = n;
    }
    if let Some(u) = g.units {
        for o in &mut cfg.objects {
            o.units = u;
        }
        if let PoseSource::Bop { units, .. } = &mut cfg.poses {
            *units = u;
        }
    }
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_condition(cfg)?;
    write_outputs(&out, &cfg.output_dir)?;
    let a = &out.aggregate;
    println!(
        "{} pairs ({} without library), {} trials, pooled S_est {}, mean S_gen {}",
        a.pairs,
        a.pairs_without_library,
        out.records.len(),
        pct(a.pooled_s_est),
        pct(a.mean_s_gen)
    );
    for l in &out.level_stats {
        println!(
            "  sigma_t {:>6.2} mm  sigma_r {:>6.2} deg  S_est {}",
            l.sigma_t_mm,
            l.sigma_r_deg,
            pct(l.s_est)
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.1}%"))
}

fn load_input_mesh(g: &Global, m: &MeshArgs) -> Result<(String, TriMesh)> {
    match (&m.mesh, &m.primitive) {
        (Some(p), None) => {
            let id = p.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
            Ok((id, load_mesh_with_units(p, g.units.unwrap_or_default())?))
        }
        (None, Some(name)) => Ok((name.clone(), primitive_mesh(name, None)?)),
        _ => Err(Error::Config("give either --mesh or --primitive".into())),
    }
}

fn sample(g: &Global, a: SampleArgs) -> Result<()> {
    let (id, mesh) = load_input_mesh(g, &a.mesh)?;
    let registry = match &a.registry {
        Some(p) => load_gripper_registry(p)?,
        None => default_registry(),
    };
    let gripper = find_gripper(&registry, &a.gripper)?;
    let n = a.n.or(g.n_samples).unwrap_or(5000);
    let id = a.object_id.unwrap_or(id);
    let lib = build_library_with_oracle(
        &id,
        &mesh,
        &mesh,
        gripper,
        n,
        g.seed.unwrap_or(42),
        &SamplerParams::default(),
        &SimParams::default(),
    )?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("library.jsonl"));
    save_library(&lib, &out)?;
    println!(
        "{} candidates, {} successful at identity, wrote {}",
        lib.candidates.len(),
        lib.n_gt(),
        out.display()
    );
    Ok(())
}

fn degrade(g: &Global, a: DegradeArgs) -> Result<()> {
    let (_, mesh) = load_input_mesh(g, &a.mesh)?;
    let params = DegradeParams {
        vertex_noise_sigma: a.noise,
        smoothing_iterations: a.smooth,
        decimation_ratio: a.decimate,
        hole_punch_count: a.holes,
    };
    params.validate().map_err(|e| Error::Config(e.to_string()))?;
    let out_mesh = degrade_mesh(&mesh, &params, g.seed.unwrap_or(42))?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("degraded.obj"));
    write_obj(&out_mesh, &out)?;
    println!("{} triangles, wrote {}", out_mesh.triangle_count(), out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct IngestedPair {
    scene_id: u32,
    im_id: u32,
    obj_id: u32,
    gt: RigidTransform,
    est: RigidTransform,
}

fn ingest(g: &Global, est: &Path, gt: &Path, scene_id: u32) -> Result<()> {
    let r = ingest_bop_poses(est, gt, scene_id, g.units.unwrap_or_default())?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("pairs.jsonl"));
    let mut text = String::new();
    for (k, p) in &r.pairs {
        let row = IngestedPair {
            scene_id: k.scene_id,
            im_id: k.im_id,
            obj_id: k.obj_id,
            gt: p.gt,
            est: p.est,
        };
        text.push_str(&serde_json::to_string(&row).expect("pair serializes"));
        text.push('\n');
    }
    std::fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    println!("{} pairs, {} unmatched estimates, wrote {}", r.pairs.len(), r.unmatched.len(), out.display());
    for k in &r.unmatched {
        println!("  unmatched {k}");
    }
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let path = dir.join("summary.csv");
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Content(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let cols: Vec<usize> = ["object_id", "gripper", "condition", "n_gt", "s_gen", "s_est", "trials"]
        .iter()
        .filter_map(|c| col(c))
        .collect();
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let line = |w: &mut std::io::StdoutLock, fields: Vec<&str>| {
        let _ = writeln!(w, "{}", fields.iter().map(|f| format!("{f:>14}")).collect::<String>());
    };
    line(&mut w, cols.iter().map(|&i| &headers[i]).collect());
    for row in reader.records() {
        let row = row.map_err(|e| Error::Content(format!("{}: {e}", path.display())))?;
        line(&mut w, cols.iter().map(|&i| row.get(i).unwrap_or("")).collect());
    }
    let levels = dir.join("levels.csv");
    if levels.exists() {
        let text = std::fs::read_to_string(&levels).map_err(|e| Error::io(&levels, e))?;
        let _ = writeln!(w, "\n{text}");
    }
    Ok(())
}
