use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use risas::io::{self, DescriptorRecord};
use risas::pipeline::{evaluate, extract_features, Features};
use risas::synth::{presets, render, render_pair};
use risas::{matching, CameraIntrinsics, PipelineConfig, Pose, RgbdFrame, SceneSpec};

#[derive(Parser)]
#[command(
    name = "risas",
    version,
    about = "RGB-D keypoints and descriptors from intensity and surface shape"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON file overriding any pipeline parameter.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for intermediate images and keypoint lists.
    #[arg(long, global = true, value_name = "DIR")]
    dump_intermediates: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Wedge,
    Cluttered,
    Box,
}

#[derive(Args)]
struct FrameArgs {
    #[arg(long)]
    color: PathBuf,
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    intrinsics: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic RGB-D frame, or a pair with --relative.
    Synth {
        /// Scene description (JSON).
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        spec: Option<PathBuf>,
        /// Built-in scene at 640x480.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        out_color: PathBuf,
        #[arg(long)]
        out_depth: PathBuf,
        /// Camera pose, or the b-to-a pose when rendering a pair.
        #[arg(long)]
        out_pose: Option<PathBuf>,
        #[arg(long)]
        out_intrinsics: Option<PathBuf>,
        /// Pose of the second camera relative to the first (JSON).
        #[arg(long, requires_all = ["out_color_b", "out_depth_b"])]
        relative: Option<PathBuf>,
        #[arg(long)]
        out_color_b: Option<PathBuf>,
        #[arg(long)]
        out_depth_b: Option<PathBuf>,
    },
    /// Detect keypoints and write them as JSON.
    Detect {
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe keypoints (detected, or read from --keypoints) into a binary descriptor file.
    Describe {
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long)]
        keypoints: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ratio-test matching of two descriptor files, written as CSV.
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Defaults to eval.ratio_max from the configuration.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score two descriptor files against a ground-truth pose (b to a).
    Evaluate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        pose: PathBuf,
        /// Precision/recall CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out_svg: Option<PathBuf>,
        #[arg(long)]
        out_matches: Option<PathBuf>,
    },
    /// Detect, describe, match and evaluate a frame pair; writes a JSON report.
    Pipeline {
        #[arg(long)]
        color_a: PathBuf,
        #[arg(long)]
        depth_a: PathBuf,
        #[arg(long)]
        color_b: PathBuf,
        #[arg(long)]
        depth_b: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        /// Pose mapping frame-b coordinates into frame a.
        #[arg(long)]
        pose: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out_pr: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
        #[arg(long)]
        out_matches: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> risas::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_frame(f: &FrameArgs) -> risas::Result<RgbdFrame> {
    io::load_frame(&f.color, &f.depth, &f.intrinsics)
}

fn dump(dir: Option<&Path>, tag: &str, feats: &Features) -> anyhow::Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    let sub = dir.join(tag);
    fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
    io::save_dot_product(sub.join("dot_product.png"), &feats.dot_product)?;
    io::save_angle_labels(&sub, &feats.labels)?;
    io::write_json(sub.join("keypoints.json"), &feats.keypoints)?;
    io::write_json(sub.join("rejected.json"), &feats.described.rejected)?;
    if let Some(m) = &feats.main {
        io::write_json(sub.join("main_normal.json"), &m.vector.as_slice())?;
    }
    info!("intermediates written to {}", sub.display());
    Ok(())
}

fn records_to_vecs(records: &[DescriptorRecord]) -> Vec<Vec<f64>> {
    records
        .iter()
        .map(|r| r.bins.iter().map(|&b| b as f64).collect())
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(cli.common.config.as_deref())?;
    let dump_dir = cli.common.dump_intermediates.as_deref();
    match cli.command {
        Command::Synth {
            spec,
            preset,
            out_color,
            out_depth,
            out_pose,
            out_intrinsics,
            relative,
            out_color_b,
            out_depth_b,
        } => {
            let scene: SceneSpec = match (spec, preset) {
                (Some(p), _) => io::read_json(p)?,
                (None, Some(p)) => {
                    let k = CameraIntrinsics::default();
                    match p {
                        Preset::Wedge => presets::wedge(k),
                        Preset::Cluttered => presets::cluttered(k),
                        Preset::Box => presets::box_on_backdrop(k, true),
                    }
                }
                (None, None) => bail!("one of --spec or --preset is required"),
            };
            let pose = match relative {
                Some(rel) => {
                    let rel: Pose = io::read_json(rel)?;
                    let (a, b, pose) = render_pair(&scene, &rel)?;
                    io::save_frame(&a, &out_color, &out_depth)?;
                    io::save_frame(
                        &b,
                        out_color_b.expect("required by clap"),
                        out_depth_b.expect("required by clap"),
                    )?;
                    pose
                }
                None => {
                    let f = render(&scene)?;
                    io::save_frame(&f, &out_color, &out_depth)?;
                    scene.camera_pose
                }
            };
            if let Some(p) = out_pose {
                io::write_json(p, &pose)?;
            }
            if let Some(p) = out_intrinsics {
                io::write_json(p, &scene.intrinsics)?;
            }
        }
        Command::Detect { frame, out } => {
            let f = load_frame(&frame)?;
            let feats = extract_features(&f, &config)?;
            dump(dump_dir, "frame", &feats)?;
            io::write_json(&out, &feats.keypoints)?;
            println!("{} keypoints", feats.keypoints.len());
        }
        Command::Describe { frame, keypoints, out } => {
            let f = load_frame(&frame)?;
            let described = match keypoints {
                Some(kp_path) => {
                    let kps = io::load_keypoints(kp_path, f.intrinsics())?;
                    let nimg = risas::surface::estimate_normals_with(&f, &config.normals())?;
                    risas::describe_frame(&f, &nimg, &kps, &config.descriptor)?
                }
                None => {
                    let feats = extract_features(&f, &config)?;
                    dump(dump_dir, "frame", &feats)?;
                    feats.described
                }
            };
            io::save_descriptors(&out, &described.descriptors, config.descriptor.dim())?;
            println!(
                "{} descriptors, {} keypoints rejected",
                described.descriptors.len(),
                described.rejected.len()
            );
        }
        Command::Match { a, b, ratio, out } => {
            let da = records_to_vecs(&io::load_descriptors(a)?);
            let db = records_to_vecs(&io::load_descriptors(b)?);
            let matches = matching::nndr_match(&da, &db, ratio.unwrap_or(config.eval.ratio_max))?;
            io::write_text(&out, &io::matches_csv(&matches))?;
            println!("{} matches", matches.len());
        }
        Command::Evaluate {
            a,
            b,
            intrinsics,
            pose,
            out,
            out_svg,
            out_matches,
        } => {
            let k = io::load_intrinsics(intrinsics)?;
            let pose: Pose = io::read_json(pose)?;
            let (ra, rb) = (io::load_descriptors(a)?, io::load_descriptors(b)?);
            let pa: Vec<_> = ra.iter().map(|r| r.position(&k)).collect();
            let pb: Vec<_> = rb.iter().map(|r| r.position(&k)).collect();
            let (da, db) = (records_to_vecs(&ra), records_to_vecs(&rb));
            let curve = matching::pr_curve(&da, &db, &pa, &pb, &pose, &config.eval)?;
            io::write_text(&out, &io::pr_csv(&curve))?;
            if let Some(p) = out_svg {
                io::write_text(p, &io::pr_svg(&curve, "precision / recall"))?;
            }
            let mut matches = matching::nndr_match(&da, &db, config.eval.ratio_max)?;
            matching::label_correct(&mut matches, &pa, &pb, &pose, config.eval.d_min);
            if let Some(p) = out_matches {
                io::write_text(p, &io::matches_csv(&matches))?;
            }
            println!(
                "{} matches at ratio {}, inlier percentage {:.3}",
                matches.len(),
                config.eval.ratio_max,
                matching::inlier_percentage(&matches)
            );
        }
        Command::Pipeline {
            color_a,
            depth_a,
            color_b,
            depth_b,
            intrinsics,
            pose,
            out,
            out_pr,
            out_svg,
            out_matches,
        } => {
            let k = io::load_intrinsics(intrinsics)?;
            let fa = io::load_frame_with(color_a, depth_a, k)?;
            let fb = io::load_frame_with(color_b, depth_b, k)?;
            let pose: Pose = io::read_json(pose)?;
            let feats_a = extract_features(&fa, &config)?;
            dump(dump_dir, "a", &feats_a)?;
            let feats_b = extract_features(&fb, &config)?;
            dump(dump_dir, "b", &feats_b)?;
            let report = evaluate(&feats_a, &feats_b, &pose, &config)?;
            io::write_json(&out, &report)?;
            if let Some(p) = out_pr {
                io::write_text(p, &io::pr_csv(&report.pr_curve))?;
            }
            if let Some(p) = out_svg {
                io::write_text(p, &io::pr_svg(&report.pr_curve, "precision / recall"))?;
            }
            if let Some(p) = out_matches {
                io::write_text(p, &io::matches_csv(&report.matches))?;
            }
            println!(
                "keypoints {}/{}, matched {}, correct {}, inlier percentage {:.3}",
                report.frame_a.keypoints,
                report.frame_b.keypoints,
                report.matched,
                report.correct,
                report.inlier_percentage
            );
            for e in &report.errors {
                eprintln!("warning: {e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let input = match e.downcast_ref::<risas::Error>() {
                Some(err) => {
                    eprintln!("error: {err}");
                    err.is_input_error()
                }
                // Argument and filesystem problems outside the library.
                None => {
                    eprintln!("error: {e:#}");
                    true
                }
            };
            ExitCode::from(if input { 2 } else { 3 })
        }
    }
}
