use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use artictwin_core::eval::{
    aggregate_report, check_executability, eval_joints, eval_segmentation, JointEvalOptions, Split,
    SuccessThresholds, SweepConfig,
};
use artictwin_core::geometry::{load_cloud, load_masks, masks_to_json, points_to_mesh, save_obj, CloudFormat, MeshMethod};
use artictwin_core::pipeline::{run_pipeline, ObjectResult, PipelineConfig, JOBS_ENV};
use artictwin_core::regularize::regularize_dataset;
use artictwin_core::schema::{assemble_urdf, parse_prediction_with, AssembleOptions, ParseOptions, SchemaError};
use artictwin_core::seg::{load_features, load_params, load_tokens, segment};
use artictwin_core::urdf::{emit_urdf, parse_urdf};
use artictwin_core::views::{sample_equatorial, sample_min_energy, MinEnergyOptions};

use crate::{Command, MeshKind, PipelineArgs, SuccessArgs, ViewMode};

pub struct Output {
    pub json: bool,
    pub quiet: bool,
}

impl Output {
    /// Writes `value` as JSON to `file` when given, then prints either the
    /// JSON or `text` to stdout.
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String, file: Option<&Path>) -> Result<()> {
        let body = serde_json::to_string_pretty(value)?;
        if let Some(path) = file {
            write_file(path, &body)?;
        }
        if !self.quiet {
            if self.json {
                println!("{body}");
            } else {
                print!("{}", text());
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Sizes the global worker pool from the environment, if set.
pub fn init_thread_pool() {
    let Ok(value) = std::env::var(JOBS_ENV) else { return };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring {JOBS_ENV}={value:?}; expected a positive integer"),
    }
}

fn thresholds(s: &SuccessArgs) -> Option<SuccessThresholds> {
    match (s.axis_tol, s.origin_tol) {
        (Some(axis), Some(origin)) => Some(SuccessThresholds { axis, origin }),
        _ => None,
    }
}

pub fn run(command: Command, out: &Output) -> Result<ExitCode> {
    match command {
        Command::Regularize { input, out: dir, max_parts } => {
            let outcomes = regularize_dataset(&input, &dir, max_parts)?;
            out.emit(
                &outcomes,
                || {
                    outcomes
                        .iter()
                        .map(|(id, o)| {
                            let status = serde_json::to_value(o).ok();
                            let status = status
                                .as_ref()
                                .and_then(|v| v["status"].as_str())
                                .unwrap_or("?")
                                .to_string();
                            format!("{id}: {status}\n")
                        })
                        .collect()
                },
                None,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Convert {
            pred,
            mesh_dir,
            out: urdf,
            allow_missing_mesh,
            repair,
            require_explicit_base,
            name,
        } => Ok(convert(
            &pred,
            &mesh_dir,
            &urdf,
            ParseOptions {
                repair,
                require_explicit_base,
                defer_parameter_checks: false,
            },
            allow_missing_mesh,
            name,
            out,
        )),
        Command::Mesh {
            points,
            masks,
            out_dir,
            method,
            alpha_radius,
        } => {
            let method = match method {
                MeshKind::ConvexHull => MeshMethod::ConvexHull,
                MeshKind::Alpha => MeshMethod::Alpha {
                    radius: alpha_radius.context("--alpha-radius is required for the alpha method")?,
                },
            };
            let cloud = load_cloud(&points, CloudFormat::from_path(&points))?;
            let masks = load_masks(&masks)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let mut summary = BTreeMap::new();
            let mut failed = 0;
            for mask in &masks {
                let entry = match points_to_mesh(&cloud, mask, method) {
                    Ok(mesh) => {
                        let file = out_dir.join(format!("{}.obj", mask.part_name));
                        save_obj(&mesh, &file)?;
                        json!({"vertices": mesh.vertices.len(), "faces": mesh.faces.len(), "volume": mesh.volume()})
                    }
                    Err(e) => {
                        failed += 1;
                        json!({"error": e.to_string()})
                    }
                };
                summary.insert(mask.part_name.clone(), entry);
            }
            out.emit(
                &summary,
                || {
                    summary
                        .iter()
                        .map(|(k, v)| match v.get("error") {
                            Some(e) => format!("{k}: failed: {}\n", e.as_str().unwrap_or("")),
                            None => format!("{k}: {} faces\n", v["faces"]),
                        })
                        .collect()
                },
                None,
            )?;
            Ok(if failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::SampleViews {
            mode,
            n,
            elevation,
            seed,
            radius,
            restarts,
            max_iters,
            out: file,
        } => {
            if !(radius.is_finite() && radius > 0.0) {
                bail!("--radius must be positive");
            }
            let set = match mode {
                ViewMode::Equator => sample_equatorial(n, elevation)?,
                ViewMode::Sphere => sample_min_energy(
                    n,
                    seed,
                    &MinEnergyOptions {
                        max_iters,
                        restarts,
                        ..MinEnergyOptions::default()
                    },
                )?,
            }
            .with_radius(radius);
            let value = json!({
                "directions": set.directions,
                "radius": set.radius,
                "energy": set.energy,
                "cameras": set.camera_poses(),
            });
            out.emit(
                &value,
                || {
                    let mut s = String::new();
                    if let Some(e) = set.energy {
                        s.push_str(&format!("energy {e:.9}\n"));
                    }
                    for c in set.camera_poses() {
                        s.push_str(&format!("{:.6} {:.6} {:.6}\n", c.position[0], c.position[1], c.position[2]));
                    }
                    s
                },
                file.as_deref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalJoints {
            pred,
            gt,
            policy,
            axis_line,
            sign_invariant,
            success,
            out: file,
        } => {
            let prediction = parse_prediction_with(&read(&pred)?, ParseOptions::default())
                .with_context(|| pred.display().to_string())?
                .prediction;
            let model = parse_urdf(&read(&gt)?).with_context(|| gt.display().to_string())?.model;
            let opts = JointEvalOptions {
                policy,
                axis_line,
                sign_invariant,
            };
            let errors = eval_joints(&prediction, &model, &opts);
            let rate = thresholds(&success).and_then(|t| errors.success_rate(t.axis, t.origin));
            let value = json!({"errors": errors, "success_rate": rate});
            out.emit(
                &value,
                || {
                    let f = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.6}"));
                    let mut s = format!(
                        "type error {}\naxis error (rad) {}\norigin error (m) {}\n",
                        f(errors.type_error),
                        f(errors.axis_error),
                        f(errors.origin_error)
                    );
                    if let Some(r) = rate {
                        s.push_str(&format!("success rate {r:.4}\n"));
                    }
                    s
                },
                file.as_deref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalSeg {
            pred,
            gt,
            points,
            out: file,
        } => {
            let cloud = load_cloud(&points, CloudFormat::from_path(&points))?;
            let result = eval_segmentation(&load_masks(&pred)?, &load_masks(&gt)?, cloud.len())?;
            out.emit(
                &result,
                || format!("mIoU {:.6}\ncount match {}\n", result.miou, result.count_match),
                file.as_deref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Execute {
            urdf,
            samples,
            bound,
            out: file,
        } => {
            if samples < 2 || !(bound.is_finite() && bound > 0.0) {
                bail!("--samples must be at least 2 and --bound positive");
            }
            let sweep = SweepConfig {
                samples_per_joint: samples,
                bound_factor: bound,
            };
            let verdict = check_executability(&urdf, &sweep).with_context(|| urdf.display().to_string())?;
            out.emit(
                &verdict,
                || {
                    let mut s = String::new();
                    for d in &verdict.details {
                        s.push_str(&format!("[{}] {}: {}\n", if d.passed { "ok" } else { "FAIL" }, d.check, d.message));
                    }
                    s.push_str(&format!("executable: {} ({})\n", verdict.passed, verdict.failure_category));
                    s
                },
                file.as_deref(),
            )?;
            Ok(if verdict.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Segment {
            params,
            features,
            tokens,
            threshold,
            out: file,
        } => {
            let mut params = load_params(&params)?;
            if let Some(t) = threshold {
                if !(0.0..=1.0).contains(&t) {
                    bail!("--threshold must be in [0, 1]");
                }
                params.threshold = t;
            }
            let masks = segment(&params, &load_tokens(&tokens)?, &load_features(&features)?)?;
            let body = masks_to_json(&masks);
            if let Some(path) = &file {
                write_file(path, &body)?;
            }
            if !out.quiet {
                if out.json {
                    println!("{body}");
                } else {
                    for m in &masks {
                        println!("{}: {} points", m.part_name, m.len());
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Pipeline(args) => {
            let cfg = pipeline_config(args)?;
            let report = run_pipeline(&cfg)?;
            out.emit(
                &report,
                || {
                    let mut s = report.eval.to_table();
                    if let Some(c) = report.mean_chamfer {
                        s.push_str(&format!("{:<22} {c:>10.6}\n", "mean chamfer"));
                    }
                    for (id, e) in &report.failures {
                        s.push_str(&format!("failed {id}: {e}\n"));
                    }
                    s
                },
                None,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            dir,
            splits,
            success,
            out: file,
        } => {
            let objects = if dir.join("objects").is_dir() { dir.join("objects") } else { dir };
            let mut entries: Vec<PathBuf> = fs::read_dir(&objects)
                .with_context(|| format!("reading {}", objects.display()))?
                .filter_map(|e| e.ok().map(|e| e.path().join("result.json")))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            let mut verdicts = BTreeMap::new();
            let mut joints = BTreeMap::new();
            let mut seg = BTreeMap::new();
            for path in entries {
                let r: ObjectResult =
                    serde_json::from_str(&read(&path)?).with_context(|| path.display().to_string())?;
                verdicts.insert(r.id.clone(), r.verdict);
                joints.insert(r.id.clone(), r.joints);
                seg.insert(r.id, r.segmentation);
            }
            let splits: BTreeMap<String, Split> = match splits {
                Some(p) => serde_json::from_str(&read(&p)?).with_context(|| p.display().to_string())?,
                None => BTreeMap::new(),
            };
            let splits = if splits.is_empty() {
                splits
            } else {
                verdicts
                    .keys()
                    .map(|k| (k.clone(), splits.get(k).copied().unwrap_or_default()))
                    .collect()
            };
            let report = aggregate_report(&verdicts, &joints, &seg, &splits, thresholds(&success))?;
            out.emit(&report, || report.to_table(), file.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { out: dir } => {
            let objects = artictwin_core::synth::fixture_objects();
            artictwin_core::synth::write_dataset(&dir, &objects)
                .with_context(|| format!("writing {}", dir.display()))?;
            let ids: Vec<&str> = objects.iter().map(|o| o.id.as_str()).collect();
            out.emit(&ids, || ids.iter().map(|i| format!("{i}\n")).collect(), None)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Defaults, then the config file, then command-line flags.
fn pipeline_config(args: PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&read(path)?).with_context(|| path.display().to_string())?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.data_dir, args.data);
    set!(cfg.out_dir, args.out);
    set!(cfg.noise.axis_tilt_rad, args.axis_tilt);
    set!(cfg.noise.origin_sigma_m, args.origin_sigma);
    set!(cfg.noise.type_flip_prob, args.type_flip);
    set!(cfg.noise.drop_part_prob, args.drop_part);
    set!(cfg.points_per_link, args.points_per_link);
    set!(cfg.feature_sigma, args.feature_sigma);
    set!(cfg.joint_eval.policy, args.policy);
    set!(cfg.chamfer_samples, args.chamfer_samples);
    if args.splits.is_some() {
        cfg.splits = args.splits;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    if args.max_parts.is_some() {
        cfg.max_parts = args.max_parts;
    }
    if let Some(t) = thresholds(&args.success) {
        cfg.success_thresholds = Some(t);
    }
    cfg.joint_eval.axis_line |= args.axis_line;
    cfg.joint_eval.sign_invariant |= args.sign_invariant;
    cfg.validate()?;
    Ok(cfg)
}

/// Mesh filename prefix as seen from the URDF's directory.
fn mesh_prefix(mesh_dir: &Path, urdf: &Path) -> Result<String> {
    let urdf_dir = urdf.parent().unwrap_or(Path::new(""));
    if let Ok(rel) = mesh_dir.strip_prefix(urdf_dir) {
        return Ok(rel.to_string_lossy().into_owned());
    }
    let abs = std::path::absolute(mesh_dir).with_context(|| mesh_dir.display().to_string())?;
    Ok(abs.to_string_lossy().into_owned())
}

fn convert_failure(code: u8, kind: &str, path: &str, message: &str) -> ExitCode {
    let category = match code {
        1 => "format",
        2 => "consistency",
        _ => "io",
    };
    eprintln!(
        "{}",
        json!({"error": category, "kind": kind, "path": path, "message": message})
    );
    ExitCode::from(code)
}

fn convert(
    pred: &Path,
    mesh_dir: &Path,
    urdf: &Path,
    options: ParseOptions,
    allow_missing_mesh: bool,
    name: String,
    out: &Output,
) -> ExitCode {
    let text = match fs::read_to_string(pred) {
        Ok(t) => t,
        Err(e) => return convert_failure(3, "Io", &pred.display().to_string(), &e.to_string()),
    };
    let schema_failure = |e: SchemaError| {
        let (code, kind) = match &e {
            SchemaError::JsonSyntax { .. } => (1, "JsonSyntax"),
            SchemaError::SchemaViolation { .. } => (1, "SchemaViolation"),
            SchemaError::ConsistencyViolation { .. } => (2, "ConsistencyViolation"),
            SchemaError::Tree(_) => (2, "TreeViolation"),
            SchemaError::MissingMesh { .. } => (3, "MissingMesh"),
        };
        convert_failure(code, kind, &e.path(), &e.to_string())
    };
    let parsed = match parse_prediction_with(&text, options) {
        Ok(p) => p,
        Err(e) => return schema_failure(e),
    };
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let prefix = match mesh_prefix(mesh_dir, urdf) {
        Ok(p) => p,
        Err(e) => return convert_failure(3, "Io", &mesh_dir.display().to_string(), &format!("{e:#}")),
    };
    let assemble = AssembleOptions {
        model_name: name,
        allow_missing_mesh,
        filename_prefix: Some(prefix),
    };
    let model = match assemble_urdf(&parsed.prediction, mesh_dir, &assemble) {
        Ok(m) => m,
        Err(e) => return schema_failure(e),
    };
    let xml = match emit_urdf(&model) {
        Ok(x) => x,
        Err(e) => return convert_failure(2, "TreeViolation", "$", &e.to_string()),
    };
    if let Err(e) = write_file(urdf, &xml) {
        return convert_failure(3, "Io", &urdf.display().to_string(), &format!("{e:#}"));
    }
    let summary = json!({
        "urdf": urdf.display().to_string(),
        "links": model.links.len(),
        "joints": model.joints.len(),
        "warnings": parsed.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    });
    if let Err(e) = out.emit(
        &summary,
        || format!("wrote {} ({} links, {} joints)\n", urdf.display(), model.links.len(), model.joints.len()),
        None,
    ) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
