//! End-to-end evaluation over a directory of ground-truth objects:
//! regularize, sample a cloud, mock-predict, segment, mesh, assemble,
//! check executability and score.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{
    aggregate_report, check_executability, eval_joints, eval_segmentation, EvalError, EvalReport,
    ExecutabilityVerdict, JointErrors, JointEvalOptions, SegmentationResult, Split,
    SuccessThresholds, SweepConfig,
};
use crate::geometry::{mesh_chamfer, points_to_mesh, save_masks, save_obj, MeshMethod, PartMask, PointCloud, TriMesh};
use crate::regularize::{find_urdf, regularize};
use crate::schema::{assemble_urdf, mock_predict, AssembleOptions, NoiseSpec, BASE_LINK};
use crate::seg::{oracle_fixture, segment};
use crate::urdf::rotation::rigid_inverse;
use crate::urdf::{emit_urdf, parse_urdf, rest_pose, UrdfModel};
use crate::util::{derive_seed, fnv1a, rng};

pub const JOBS_ENV: &str = "ARTICTWIN_JOBS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// One sub-directory per object, each holding a URDF and its meshes.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// JSON map object id → "ID" | "OOD"; defaults to `<data_dir>/splits.json`
    /// when that file exists.
    pub splits: Option<PathBuf>,
    /// Required: the pipeline always samples point clouds.
    pub seed: Option<u64>,
    pub noise: NoiseSpec,
    pub points_per_link: usize,
    /// Gaussian noise on the synthetic point features fed to the decoder.
    pub feature_sigma: f64,
    pub seg_gain: f64,
    pub mesh_method: MeshMethod,
    pub joint_eval: JointEvalOptions,
    pub sweep: SweepConfig,
    pub success_thresholds: Option<SuccessThresholds>,
    pub chamfer_samples: usize,
    /// Skip objects with this many or more articulated parts.
    pub max_parts: Option<usize>,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: PathBuf::new(),
            out_dir: PathBuf::new(),
            splits: None,
            seed: None,
            noise: NoiseSpec::default(),
            points_per_link: 512,
            feature_sigma: 0.0,
            seg_gain: 8.0,
            mesh_method: MeshMethod::ConvexHull,
            joint_eval: JointEvalOptions::default(),
            sweep: SweepConfig::default(),
            success_thresholds: None,
            chamfer_samples: crate::geometry::MESH_SAMPLES,
            max_parts: None,
            jobs: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.data_dir.as_os_str().is_empty() {
            return bad("data_dir is required".into());
        }
        if self.out_dir.as_os_str().is_empty() {
            return bad("out_dir is required".into());
        }
        if self.data_dir == self.out_dir {
            return bad("data_dir and out_dir must differ".into());
        }
        if self.seed.is_none() {
            return bad("seed is required".into());
        }
        self.noise.validate().map_err(PipelineError::Config)?;
        if self.points_per_link == 0 {
            return bad("points_per_link must be positive".into());
        }
        if !(self.feature_sigma.is_finite() && self.feature_sigma >= 0.0) {
            return bad(format!("feature_sigma must be >= 0, got {}", self.feature_sigma));
        }
        if !(self.seg_gain.is_finite() && self.seg_gain > 0.0) {
            return bad(format!("seg_gain must be > 0, got {}", self.seg_gain));
        }
        if self.chamfer_samples == 0 {
            return bad("chamfer_samples must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        if self.max_parts == Some(0) {
            return bad("max_parts must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectResult {
    pub id: String,
    pub verdict: ExecutabilityVerdict,
    pub joints: JointErrors,
    pub segmentation: SegmentationResult,
    pub chamfer: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub noise: NoiseSpec,
    pub eval: EvalReport,
    pub chamfer: BTreeMap<String, f64>,
    pub mean_chamfer: Option<f64>,
    pub filtered: Vec<String>,
    pub failures: BTreeMap<String, String>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

enum Outcome {
    Done(Box<ObjectResult>),
    Filtered,
    Failed(String),
}

/// Runs every object under `data_dir`, writing per-object artifacts to
/// `<out_dir>/objects/<id>/` and `report.json` plus `report.txt` to
/// `out_dir`. Per-object failures are recorded in the report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    let mut objects: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(&cfg.data_dir).map_err(io_err(&cfg.data_dir))? {
        let path = entry.map_err(io_err(&cfg.data_dir))?.path();
        if !path.is_dir() {
            continue;
        }
        if let Some(urdf) = find_urdf(&path).map_err(io_err(&path))? {
            let id = path.file_name().expect("dir entry").to_string_lossy().into_owned();
            objects.push((id, urdf));
        }
    }
    objects.sort();
    let splits = load_splits(cfg)?;
    let objects_dir = cfg.out_dir.join("objects");
    fs::create_dir_all(&objects_dir).map_err(io_err(&objects_dir))?;

    let work = || -> Vec<(String, Outcome)> {
        objects
            .par_iter()
            .map(|(id, urdf)| (id.clone(), run_object(cfg, id, urdf, &objects_dir.join(id))))
            .collect()
    };
    let outcomes = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut verdicts = BTreeMap::new();
    let mut joints = BTreeMap::new();
    let mut seg = BTreeMap::new();
    let mut chamfer = BTreeMap::new();
    let mut filtered = Vec::new();
    let mut failures = BTreeMap::new();
    for (id, outcome) in outcomes {
        match outcome {
            Outcome::Done(r) => {
                if let Some(c) = r.chamfer {
                    chamfer.insert(id.clone(), c);
                }
                verdicts.insert(id.clone(), r.verdict);
                joints.insert(id.clone(), r.joints);
                seg.insert(id, r.segmentation);
            }
            Outcome::Filtered => filtered.push(id),
            Outcome::Failed(e) => {
                failures.insert(id, e);
            }
        }
    }
    let splits: BTreeMap<String, Split> = if splits.is_empty() {
        splits
    } else {
        verdicts
            .keys()
            .map(|k| (k.clone(), splits.get(k).copied().unwrap_or_default()))
            .collect()
    };
    let eval = aggregate_report(&verdicts, &joints, &seg, &splits, cfg.success_thresholds)?;
    let mean_chamfer = (!chamfer.is_empty()).then(|| chamfer.values().sum::<f64>() / chamfer.len() as f64);
    let report = PipelineReport {
        seed: cfg.seed.expect("validated"),
        noise: cfg.noise,
        eval,
        chamfer,
        mean_chamfer,
        filtered,
        failures,
    };
    let path = cfg.out_dir.join("report.json");
    fs::write(&path, report.to_json()).map_err(io_err(&path))?;
    let path = cfg.out_dir.join("report.txt");
    fs::write(&path, report.eval.to_table()).map_err(io_err(&path))?;
    Ok(report)
}

fn load_splits(cfg: &PipelineConfig) -> Result<BTreeMap<String, Split>, PipelineError> {
    let default = cfg.data_dir.join("splits.json");
    let path = match &cfg.splits {
        Some(p) => p.clone(),
        None if default.is_file() => default,
        None => return Ok(BTreeMap::new()),
    };
    let text = fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn run_object(cfg: &PipelineConfig, id: &str, urdf: &Path, out: &Path) -> Outcome {
    match evaluate_object(cfg, id, urdf, out) {
        Ok(Some(r)) => Outcome::Done(Box::new(r)),
        Ok(None) => Outcome::Filtered,
        Err(e) => Outcome::Failed(e),
    }
}

/// World-frame rest meshes per link, in model order; links without
/// geometry are omitted.
fn world_link_meshes(model: &UrdfModel, dir: &Path) -> Result<Vec<(String, TriMesh)>, String> {
    let frames = rest_pose(model).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for link in &model.links {
        let mut mesh = TriMesh::default();
        for v in &link.visuals {
            let m = crate::geometry::load_obj(&dir.join(&v.filename)).map_err(|e| e.to_string())?;
            mesh.append(&m.transformed(&(frames[link.name.as_str()] * v.origin.to_matrix())));
        }
        if !mesh.faces.is_empty() {
            out.push((link.name.clone(), mesh));
        }
    }
    Ok(out)
}

fn evaluate_object(
    cfg: &PipelineConfig,
    id: &str,
    urdf: &Path,
    out: &Path,
) -> Result<Option<ObjectResult>, String> {
    let seed = derive_seed(cfg.seed.expect("validated"), &format!("{:016x}", fnv1a(id.as_bytes())));
    let text = fs::read_to_string(urdf).map_err(|e| format!("{}: {e}", urdf.display()))?;
    let original = parse_urdf(&text).map_err(|e| e.to_string())?.model;
    if cfg.max_parts.is_some_and(|m| original.articulated_part_count() >= m) {
        return Ok(None);
    }
    let (gt, _) = regularize(&original).map_err(|e| e.to_string())?;
    let src_dir = urdf.parent().unwrap_or(Path::new("."));
    let old_root = original.root().expect("validated model has a root").to_string();
    let canonical = |name: &str| if name == old_root { BASE_LINK.to_string() } else { name.to_string() };

    // Ground-truth cloud with per-point link labels.
    let gt_meshes = world_link_meshes(&original, src_dir)?;
    let parts: Vec<String> = gt.links.iter().map(|l| l.name.clone()).filter(|n| n != BASE_LINK).collect();
    let mut sampler = rng(derive_seed(seed, "cloud"));
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (name, mesh) in &gt_meshes {
        let name = canonical(name);
        let label = parts.iter().position(|p| *p == name).unwrap_or(usize::MAX);
        for p in mesh.sample_surface(cfg.points_per_link, &mut sampler) {
            points.push(p);
            labels.push(label);
        }
    }
    let cloud = PointCloud::from_points(points).map_err(|e| format!("ground-truth cloud: {e}"))?;
    let gt_masks: Vec<PartMask> = parts
        .iter()
        .enumerate()
        .map(|(k, name)| {
            PartMask::new(name.clone(), (0..labels.len()).filter(|&i| labels[i] == k).collect())
        })
        .collect();

    let pred = mock_predict(&gt, &cfg.noise, derive_seed(seed, "mock")).map_err(|e| e.to_string())?;
    fs::create_dir_all(out.join("meshes")).map_err(|e| e.to_string())?;
    fs::write(out.join("pred.json"), pred.to_json()).map_err(|e| e.to_string())?;

    // Segmentation through the decoder with oracle weights.
    let mut feat_rng = rng(derive_seed(seed, "features"));
    let fixture = oracle_fixture(&labels, &parts, cfg.seg_gain, cfg.feature_sigma, &mut feat_rng);
    let tokens: Vec<_> = pred
        .links
        .iter()
        .filter_map(|l| fixture.tokens.iter().find(|(n, _)| *n == l.link_name).cloned())
        .collect();
    let pred_masks = segment(&fixture.params, &tokens, &fixture.features).map_err(|e| e.to_string())?;
    save_masks(&pred_masks, &out.join("masks.json")).map_err(|e| e.to_string())?;
    save_masks(&gt_masks, &out.join("gt_masks.json")).map_err(|e| e.to_string())?;

    // Mesh each predicted part; the base takes every point no part claimed.
    let mut notes = Vec::new();
    let mut model = assemble_urdf(
        &pred,
        &out.join("meshes"),
        &AssembleOptions {
            model_name: id.to_string(),
            allow_missing_mesh: true,
            filename_prefix: Some("meshes".into()),
        },
    )
    .map_err(|e| e.to_string())?;
    let frames = rest_pose(&model).map_err(|e| e.to_string())?;
    let mut claimed = vec![false; cloud.len()];
    for m in &pred_masks {
        for &i in &m.indices {
            claimed[i] = true;
        }
    }
    let residual = PartMask::new(BASE_LINK, (0..cloud.len()).filter(|&i| !claimed[i]).collect());
    let mut pred_world = TriMesh::default();
    for link in &mut model.links {
        let mask = if link.name == BASE_LINK {
            &residual
        } else {
            match pred_masks.iter().find(|m| m.part_name == link.name) {
                Some(m) => m,
                None => continue,
            }
        };
        if mask.is_empty() && link.name == BASE_LINK {
            link.visuals.clear();
            link.collisions.clear();
            continue;
        }
        match points_to_mesh(&cloud, mask, cfg.mesh_method) {
            Ok(world) => {
                pred_world.append(&world);
                let local = world.transformed(&rigid_inverse(&frames[link.name.as_str()]));
                save_obj(&local, &out.join("meshes").join(format!("{}.obj", link.name)))
                    .map_err(|e| e.to_string())?;
            }
            Err(e) => {
                notes.push(format!("link {:?} has no mesh: {e}", link.name));
                link.visuals.clear();
                link.collisions.clear();
            }
        }
    }
    let urdf_out = out.join("pred.urdf");
    fs::write(&urdf_out, emit_urdf(&model).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let verdict = check_executability(&urdf_out, &cfg.sweep).map_err(|e| e.to_string())?;
    let joints = eval_joints(&pred, &gt, &cfg.joint_eval);
    let mut segmentation = eval_segmentation(&pred_masks, &gt_masks, cloud.len()).map_err(|e| e.to_string())?;
    segmentation.count_match = pred.articulated_part_count() == gt.articulated_part_count();

    let mut gt_world = TriMesh::default();
    for (_, m) in &gt_meshes {
        gt_world.append(m);
    }
    let chamfer = if pred_world.faces.is_empty() || gt_world.faces.is_empty() {
        None
    } else {
        Some(
            mesh_chamfer(&pred_world, &gt_world, cfg.chamfer_samples, derive_seed(seed, "chamfer"))
                .map_err(|e| e.to_string())?,
        )
    };
    let result = ObjectResult {
        id: id.to_string(),
        verdict,
        joints,
        segmentation,
        chamfer,
        notes,
    };
    let json = serde_json::to_string_pretty(&result).expect("serializable");
    fs::write(out.join("result.json"), json).map_err(|e| e.to_string())?;
    Ok(Some(result))
}
