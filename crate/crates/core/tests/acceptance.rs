//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output; exits non-zero on any FAIL.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use artictwin_core::eval::{
    check_executability, eval_joints, min_cost_assignment, FailureCategory, JointEvalOptions, MatchPolicy, SweepConfig,
};
use artictwin_core::geometry::{chamfer_points, save_obj, PartMask, TriMesh};
use artictwin_core::pipeline::{run_pipeline, PipelineConfig};
use artictwin_core::regularize::regularize;
use artictwin_core::schema::{assemble_urdf, mock_predict, parse_prediction, AssembleOptions, NoiseSpec, BASE_LINK};
use artictwin_core::seg::seg_loss_from_logits;
use artictwin_core::synth::{fixture_objects, write_dataset, FAUCET_JSON};
use artictwin_core::urdf::{emit_urdf, parse_urdf, JointSpec, JointType, Limit, LinkSpec, Pose, UrdfModel};
use artictwin_core::views::{sample_min_energy, MinEnergyOptions};

use common::{flat_model, max_abs_diff, random_model, rest_frames, rng, TreeShape};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<f64>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let secs = start.elapsed().as_secs_f64();
    match limit {
        Some(l) => {
            o.detail.push_str(&format!("; {secs:.2} s (limit {l} s)"));
            o.pass &= secs < l;
        }
        None => o.detail.push_str(&format!("; {secs:.2} s")),
    }
    o
}

fn c1_urdf_round_trip() -> Outcome {
    let mut r = rng(0xc1);
    let mut failures = 0;
    for i in 0..100 {
        let m = random_model(&mut r, &TreeShape { links: 1 + i % 15, max_depth: 5, exotic: i % 2 == 0 });
        let ok = emit_urdf(&m)
            .ok()
            .and_then(|xml| parse_urdf(&xml).ok())
            .is_some_and(|p| p.model == m);
        failures += usize::from(!ok);
    }
    outcome(failures == 0, format!("100 fuzzed models, {failures} failures"))
}

fn c2_regularizer() -> Outcome {
    let mut r = rng(0xc2);
    let mut worst: f64 = 0.0;
    let mut idempotent = 0;
    let mut depth4 = 0;
    for i in 0..50 {
        let m = random_model(&mut r, &TreeShape { links: 3 + i % 10, max_depth: 4, exotic: false });
        if tree_depth(&m) == 4 {
            depth4 += 1;
        }
        let Ok((reg, _)) = regularize(&m) else {
            return outcome(false, format!("model {i} failed to regularize"));
        };
        let before = rest_frames(&m);
        let after = rest_frames(&reg);
        let root = m.root().unwrap();
        for (name, frame) in &before {
            let key = if name == root { BASE_LINK } else { name.as_str() };
            worst = worst.max(max_abs_diff(frame, &after[key]));
        }
        if regularize(&reg).is_ok_and(|(again, _)| again == reg) {
            idempotent += 1;
        }
    }
    outcome(
        worst < 1e-9 && idempotent == 50,
        format!("50 trees ({depth4} of depth 4), max FK deviation {worst:.2e} (< 1e-9), idempotent {idempotent}/50"),
    )
}

fn tree_depth(m: &UrdfModel) -> usize {
    let depth_of = |name: &str| {
        let mut link = name.to_string();
        let mut d = 0;
        while let Some(j) = m.joints.iter().find(|j| j.child == link) {
            link = j.parent.clone();
            d += 1;
        }
        d
    };
    m.links.iter().map(|l| depth_of(&l.name)).max().unwrap_or(0)
}

fn c3_faucet() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let pred = match parse_prediction(FAUCET_JSON) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("parse: {e}")),
    };
    let meshes = dir.path().join("meshes");
    fs::create_dir_all(&meshes).unwrap();
    for name in std::iter::once(BASE_LINK).chain(pred.links.iter().map(|l| l.link_name.as_str())) {
        save_obj(&TriMesh::cuboid([0.0; 3], [0.05, 0.05, 0.05]), &meshes.join(format!("{name}.obj"))).unwrap();
    }
    let opts = AssembleOptions {
        model_name: "faucet".into(),
        filename_prefix: Some("meshes".into()),
        ..AssembleOptions::default()
    };
    let model = match assemble_urdf(&pred, &meshes, &opts) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("assemble: {e}")),
    };
    let urdf = dir.path().join("faucet.urdf");
    fs::write(&urdf, emit_urdf(&model).unwrap()).unwrap();
    let verdict = check_executability(&urdf, &SweepConfig::default()).unwrap();
    let back = parse_urdf(&fs::read_to_string(&urdf).unwrap()).unwrap().model;
    let mut exact = 0;
    let mut values = 0;
    for pj in &pred.joints {
        let Some(bj) = back.joint(&pj.id) else { continue };
        let a = pj.origin.xyz.iter().chain(&pj.origin.rpy).chain(&pj.axis);
        let b = bj.origin.xyz.iter().chain(&bj.origin.rpy).chain(&bj.axis);
        for (x, y) in a.zip(b) {
            values += 1;
            if x.to_bits() == y.to_bits() && format!("{x:.16e}") == format!("{y:.16e}") {
                exact += 1;
            }
        }
    }
    outcome(
        verdict.passed && values == 36 && exact == values,
        format!(
            "executable: {} ({}), {exact}/{values} axis/origin values bit-exact",
            verdict.passed, verdict.failure_category
        ),
    )
}

fn c4_loss_gradient() -> Outcome {
    let mut r = rng(0xc4);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = r.random_range(2..=64);
        let logits: Vec<f64> = (0..m).map(|_| r.random_range(-4.0..4.0)).collect();
        let gt = PartMask::new("p", (0..m).filter(|_| r.random_bool(0.4)).collect());
        let (lb, ld) = (r.random_range(0.1..2.0), r.random_range(0.1..2.0));
        let analytic = seg_loss_from_logits(&logits, &gt, lb, ld).unwrap().grad;
        let loss = |z: &[f64]| seg_loss_from_logits(z, &gt, lb, ld).unwrap().loss;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            let mut up = logits.clone();
            let mut down = logits.clone();
            up[i] += eps;
            down[i] -= eps;
            let fd = (loss(&up) - loss(&down)) / (2.0 * eps);
            num += (analytic[i] - fd).powi(2);
            den += fd * fd;
        }
        worst = worst.max(num.sqrt() / den.sqrt().max(1e-12));
    }
    outcome(worst < 1e-5, format!("20 instances, max relative error {worst:.2e} (< 1e-5)"))
}

fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        return brute_assignment(&t);
    }
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(cost[row][j] + go(cost, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cols])
}

fn brute_chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let d2 = |p: &[f64; 3], q: &[f64; 3]| (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
    let one = |x: &[[f64; 3]], y: &[[f64; 3]]| {
        x.iter().map(|p| y.iter().map(|q| d2(p, q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
    };
    one(a, b) + one(b, a)
}

fn random_cloud(r: &mut impl Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect()
}

fn c5_metric_oracles() -> Outcome {
    let mut r = rng(0xc5);
    let mut hungarian_ok = 0;
    for _ in 0..50 {
        let (rows, cols) = (r.random_range(1..=6), r.random_range(1..=6));
        let cost: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| r.random_range(0.0..10.0)).collect()).collect();
        let pairs = min_cost_assignment(&cost);
        let got: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
        if pairs.len() == rows.min(cols) && (got - brute_assignment(&cost)).abs() < 1e-9 {
            hungarian_ok += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, m) = (r.random_range(1..=200), r.random_range(1..=200));
        let a = random_cloud(&mut r, n);
        let b = random_cloud(&mut r, m);
        worst = worst.max((chamfer_points(&a, &b).unwrap() - brute_chamfer(&a, &b)).abs());
    }
    outcome(
        hungarian_ok == 50 && worst <= 1e-12,
        format!("hungarian {hungarian_ok}/50 optimal, chamfer max |kd - brute| {worst:.1e} (<= 1e-12)"),
    )
}

fn c6_harness_sensitivity() -> Outcome {
    let by_id = JointEvalOptions {
        policy: MatchPolicy::ById,
        ..JointEvalOptions::default()
    };
    let mut r = rng(0xc6);
    let models: Vec<UrdfModel> = (0..10)
        .map(|i| random_model(&mut r, &TreeShape { links: 4 + i, max_depth: 4, exotic: false }))
        .collect();
    let mut tilt_dev: f64 = 0.0;
    for delta in [0.05, 0.132, 0.5] {
        let noise = NoiseSpec {
            axis_tilt_rad: delta,
            ..NoiseSpec::default()
        };
        for (k, m) in models.iter().enumerate() {
            let p = mock_predict(m, &noise, k as u64).unwrap();
            let e = eval_joints(&p, m, &by_id).axis_error.unwrap();
            tilt_dev = tilt_dev.max((e - delta).abs());
        }
    }
    let sigma = 0.1;
    let closed = sigma * 2.0 * 2f64.sqrt() / PI.sqrt();
    let mut g = rng(0xc6c6);
    let draws = 1_000_000;
    let mc = (0..draws)
        .map(|_| {
            let v: [f64; 3] = std::array::from_fn(|_| sigma * g.sample::<f64, _>(StandardNormal));
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        })
        .sum::<f64>()
        / draws as f64;
    let flat = flat_model(1000);
    let noise = NoiseSpec {
        origin_sigma_m: sigma,
        ..NoiseSpec::default()
    };
    let p = mock_predict(&flat, &noise, 6).unwrap();
    let origin = eval_joints(&p, &flat, &by_id).origin_error.unwrap();
    let rel = (origin - closed).abs() / closed;
    outcome(
        tilt_dev < 1e-6 && rel < 0.05 && (mc - closed).abs() / closed < 0.005,
        format!(
            "tilt max |err - delta| {tilt_dev:.1e} (< 1e-6); origin mean {origin:.5} vs {closed:.5} ({:.2}% < 5%), monte carlo {mc:.5}",
            100.0 * rel
        ),
    )
}

fn defect_model(r: &mut impl Rng) -> UrdfModel {
    let mut m = UrdfModel::new("box");
    m.links.push(LinkSpec::with_mesh("base", "base.obj"));
    m.links.push(LinkSpec::with_mesh("lid", "lid.obj"));
    m.joints.push(JointSpec {
        id: "hinge".into(),
        joint_type: JointType::Revolute,
        parent: "base".into(),
        child: "lid".into(),
        origin: Pose::new([0.0, r.random_range(0.1..0.3), r.random_range(0.05..0.2)], [0.0; 3]),
        axis: [1.0, 0.0, 0.0],
        limit: Some(Limit {
            lower: 0.0,
            upper: r.random_range(0.5..2.0),
        }),
    });
    m
}

fn c7_executability_confusion() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut r = rng(0xc7);
    let model = defect_model(&mut r);
    save_obj(&TriMesh::cuboid([0.0; 3], [0.2, 0.2, 0.1]), &d.join("base.obj")).unwrap();
    save_obj(&TriMesh::cuboid([0.0, -0.2, 0.01], [0.2, 0.2, 0.01]), &d.join("lid.obj")).unwrap();
    let clean = emit_urdf(&model).unwrap();
    let check = |name: &str, text: &str| {
        let path = d.join(name);
        fs::write(&path, text).unwrap();
        check_executability(&path, &SweepConfig::default()).unwrap()
    };
    let mut far = model.clone();
    far.joints[0].origin.xyz[0] = 1e6;
    let limit_tag = clean.lines().find(|l| l.contains("<limit")).unwrap().to_string();
    let cases: Vec<(&str, String, FailureCategory)> = vec![
        ("xml.urdf", clean[..clean.len() / 2].to_string(), FailureCategory::JsonFormat),
        ("pred.json", "{\"joints\": [{\"id\": ".into(), FailureCategory::JsonFormat),
        (
            "cycle.urdf",
            clean.replace("</robot>", "<joint name=\"back\" type=\"fixed\"><parent link=\"lid\"/><child link=\"base\"/></joint></robot>"),
            FailureCategory::TreeStructure,
        ),
        ("limit.urdf", clean.replace(&limit_tag, ""), FailureCategory::Parameter),
        ("mesh.urdf", clean.replace("lid.obj", "gone.obj"), FailureCategory::Mesh),
        ("far.urdf", emit_urdf(&far).unwrap(), FailureCategory::Motion),
    ];
    let clean_ok = check("clean.urdf", &clean).passed;
    let mut confusion = Vec::new();
    let mut correct = 0;
    for (name, text, want) in &cases {
        let v = check(name, text);
        if v.failure_category == *want && !v.passed {
            correct += 1;
        }
        confusion.push(format!("{name}->{}", v.failure_category));
    }
    outcome(
        clean_ok && correct == cases.len(),
        format!("clean passes: {clean_ok}, {correct}/{} defects classified [{}]", cases.len(), confusion.join(", ")),
    )
}

fn c8_viewpoint_energies() -> Outcome {
    let targets = [
        (2, 0.5),
        (3, 3f64.sqrt()),
        (4, 3.674_234_6),
        (6, 9.985_281_3),
        (12, 49.165_253_058),
    ];
    let opts = MinEnergyOptions::default();
    let mut worst: f64 = 0.0;
    let mut got = Vec::new();
    for (n, e) in targets {
        let v = sample_min_energy(n, 0, &opts).unwrap();
        let energy = v.energy.unwrap();
        worst = worst.max((energy - e).abs());
        got.push(format!("n={n}: {energy:.9}"));
    }
    outcome(worst < 1e-5, format!("{} (max deviation {worst:.1e} < 1e-5)", got.join(", ")))
}

fn c9_pipeline() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data, &fixture_objects()).unwrap();
    let cfg = |out: &str, noise: NoiseSpec| PipelineConfig {
        data_dir: data.clone(),
        out_dir: dir.path().join(out),
        seed: Some(2024),
        noise,
        ..PipelineConfig::default()
    };
    let noisy = NoiseSpec {
        axis_tilt_rad: 0.132,
        origin_sigma_m: 0.05,
        type_flip_prob: 0.2,
        drop_part_prob: 0.2,
    };
    let a = run_pipeline(&cfg("a", noisy));
    let b = run_pipeline(&cfg("b", noisy));
    let zero = run_pipeline(&cfg("zero", NoiseSpec::default()));
    let (Ok(_), Ok(_), Ok(zero)) = (a, b, zero) else {
        return outcome(false, "pipeline returned an error");
    };
    let read = |d: &str| fs::read(dir.path().join(d).join("report.json")).unwrap();
    let identical = read("a") == read("b");
    let m = &zero.eval.all;
    let perfect = zero.failures.is_empty()
        && m.objects == 5
        && m.miou == Some(1.0)
        && m.executability_rate == 1.0
        && m.joint_type_error == Some(0.0)
        && m.joint_axis_error == Some(0.0)
        && m.joint_origin_error == Some(0.0);
    outcome(
        identical && perfect,
        format!(
            "reruns byte-identical: {identical}; zero noise over {} objects: mIoU {:?}, executability {}, joint errors {:?}/{:?}/{:?}",
            m.objects, m.miou, m.executability_rate, m.joint_type_error, m.joint_axis_error, m.joint_origin_error
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, Option<f64>, fn() -> Outcome)> = vec![
        ("URDF round-trip", Some(5.0), c1_urdf_round_trip),
        ("regularizer pose preservation", Some(5.0), c2_regularizer),
        ("faucet fixture", None, c3_faucet),
        ("loss gradients", Some(2.0), c4_loss_gradient),
        ("metric oracles", None, c5_metric_oracles),
        ("harness sensitivity", None, c6_harness_sensitivity),
        ("executability confusion", Some(3.0), c7_executability_confusion),
        ("viewpoint energies", Some(10.0), c8_viewpoint_energies),
        ("end-to-end determinism", None, c9_pipeline),
    ];
    let mut failed = BTreeMap::new();
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let o = timed(limit, f);
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed.insert(i + 1, name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
