use std::collections::BTreeMap;
use std::path::Path;

use graspgauge::oracle::{OutcomeKind, TrialRecord};
use graspgauge::runner::{run_condition, write_outputs, ExperimentCondition, ExperimentConfig, RunOutput};
use graspgauge::sampler::write_library_jsonl;

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(body, "test.toml").unwrap()
}

fn two_by_two(objects: [&str; 2], grippers: [&str; 2]) -> String {
    format!(
        "seed = 11\nn_samples = 150\ngrippers = [\"{}\", \"{}\"]\n\
         [poses]\nsource = \"synthetic\"\nlevels = [[0, 0], [6, 4]]\ntrials_per_level = 3\n\
         [[object]]\nid = \"{}\"\nprimitive = \"{}\"\n[[object]]\nid = \"{}\"\nprimitive = \"{}\"\n",
        grippers[0], grippers[1], objects[0], objects[0], objects[1], objects[1]
    )
}

fn per_pair(out: &RunOutput) -> BTreeMap<(String, String), (Vec<u8>, Vec<String>)> {
    let mut map = BTreeMap::new();
    for lib in &out.libraries {
        let mut bytes = Vec::new();
        write_library_jsonl(lib, &mut bytes).unwrap();
        let records: Vec<String> = out
            .records
            .iter()
            .filter(|r| r.object_id == lib.object_id && r.gripper == lib.gripper_name)
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        map.insert((lib.object_id.clone(), lib.gripper_name.clone()), (bytes, records));
    }
    map
}

#[test]
fn pair_order_does_not_change_pair_outputs() {
    let a = run_condition(&config(&two_by_two(["cube", "box"], ["Robotiq 2F-85", "WSG 50"]))).unwrap();
    let b = run_condition(&config(&two_by_two(["box", "cube"], ["WSG 50", "Robotiq 2F-85"]))).unwrap();
    let (pa, pb) = (per_pair(&a), per_pair(&b));
    assert_eq!(pa.len(), 4);
    assert_eq!(pa, pb);
    assert!(pa.values().all(|(_, records)| !records.is_empty()));
}

#[test]
fn records_are_ordered_and_counted() {
    let out = run_condition(&config(&two_by_two(["cube", "cylinder"], ["Franka Hand", "WSG 50"]))).unwrap();
    let key = |r: &TrialRecord| (r.object_id.clone(), r.gripper.clone(), r.pose_id.clone(), r.grasp_index);
    let keys: Vec<_> = out.records.iter().map(key).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), keys.len(), "one record per (pair, pose, grasp)");
    for lib in &out.libraries {
        let n = out
            .records
            .iter()
            .filter(|r| r.object_id == lib.object_id && r.gripper == lib.gripper_name)
            .count();
        // two levels of three draws each
        assert_eq!(n, lib.n_gt() * 6);
    }
    let zero_level: Vec<_> = out.records.iter().filter(|r| r.pose_id.starts_with("level0/")).collect();
    assert!(zero_level.iter().all(|r| r.outcome.outcome == OutcomeKind::Success));
}

#[test]
fn reference_mesh_changes_errors_but_not_outcomes() {
    let body = "seed = 3\nn_samples = 150\ngrippers = [\"Robotiq 2F-85\"]\n\
                [poses]\nsource = \"synthetic\"\nlevels = [[4, 3]]\ntrials_per_level = 4\n\
                [[object]]\nid = \"bracket\"\nprimitive = \"l_bracket\"\n\
                [object.degrade]\nvertex_noise_sigma = 1.0\nsmoothing_iterations = 0\n\
                decimation_ratio = 1.0\nhole_punch_count = 0\n";
    let gt = run_condition(&config(body)).unwrap();
    let mut cfg = config(body);
    cfg.condition = ExperimentCondition::GtGraspReconRefPose;
    let recon_ref = run_condition(&cfg).unwrap();
    // grasps come from the same mesh, trials run on the same mesh
    let outcomes = |o: &RunOutput| o.records.iter().map(|r| r.outcome.outcome).collect::<Vec<_>>();
    assert_eq!(outcomes(&gt), outcomes(&recon_ref));
    assert!(!gt.records.is_empty());
    let differs = gt
        .records
        .iter()
        .zip(&recon_ref.records)
        .any(|(a, b)| (a.errors.add - b.errors.add).abs() > 1e-9);
    assert!(differs, "pose errors are measured on the reconstruction");
    // translation and rotation errors do not depend on the mesh
    for (a, b) in gt.records.iter().zip(&recon_ref.records) {
        assert_eq!(a.errors.translation, b.errors.translation);
        assert_eq!(a.errors.rotation, b.errors.rotation);
    }

    cfg.condition = ExperimentCondition::ReconGraspReconRefPose;
    let recon = run_condition(&cfg).unwrap();
    assert_ne!(recon.libraries[0].candidates, gt.libraries[0].candidates);
}

#[test]
fn bop_estimates_drive_trials() {
    let dir = tempfile::tempdir().unwrap();
    let est = dir.path().join("est.csv");
    let gt = dir.path().join("scene_gt.json");
    std::fs::write(
        &est,
        "scene_id,im_id,obj_id,score,R,t,time\n\
         2,1,7,0.9,1 0 0 0 1 0 0 0 1,0 0 500,0.1\n\
         2,2,7,0.8,1 0 0 0 1 0 0 0 1,0 0 500,0.1\n\
         2,9,7,0.8,1 0 0 0 1 0 0 0 1,0 0 500,0.1\n",
    )
    .unwrap();
    std::fs::write(
        &gt,
        r#"{"1": [{"cam_R_m2c": [1,0,0,0,1,0,0,0,1], "cam_t_m2c": [0, 0, 500], "obj_id": 7}],
            "2": [{"cam_R_m2c": [1,0,0,0,1,0,0,0,1], "cam_t_m2c": [40, 0, 500], "obj_id": 7}]}"#,
    )
    .unwrap();
    let cfg_path = dir.path().join("bop.toml");
    std::fs::write(
        &cfg_path,
        "seed = 5\nn_samples = 150\ngrippers = [\"Franka Hand\"]\n\
         [poses]\nsource = \"bop\"\nestimates = \"est.csv\"\nground_truth = \"scene_gt.json\"\nscene_id = 2\n\
         objects = { \"7\" = \"cube\" }\n\
         [[object]]\nid = \"cube\"\nprimitive = \"cube\"\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let out = run_condition(&cfg).unwrap();
    let n_gt = out.libraries[0].n_gt();
    assert_eq!(out.records.len(), 2 * n_gt);
    assert_eq!(out.manifest.unmatched_estimates, vec!["2/9/7".to_string()]);
    let exact: Vec<_> = out.records.iter().filter(|r| r.pose_id == "2/1").collect();
    assert!(exact.iter().all(|r| r.outcome.outcome == OutcomeKind::Success));
    // 40 mm off on a 40 mm cube: the grasps land beside the object
    let off = out.records.iter().filter(|r| r.pose_id == "2/2");
    assert!(off.clone().all(|r| (r.errors.translation - 40.0).abs() < 1e-9));
    assert!(off.filter(|r| r.outcome.outcome == OutcomeKind::Success).count() < n_gt / 2);
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn outputs_are_written_and_parse() {
    let cfg = config(&two_by_two(["cube", "icosphere"], ["Robotiq 2F-85", "Franka Hand"]));
    let out = run_condition(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&out, dir.path()).unwrap();
    let records = read(dir.path(), "records.jsonl");
    assert_eq!(records.lines().count(), out.records.len());
    for line in records.lines() {
        let r: TrialRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.condition, ExperimentCondition::GtGraspGtRefPose);
    }
    for (name, rows) in [
        ("summary.csv", out.summary.len()),
        ("poses.csv", out.pose_stats.len()),
        ("levels.csv", 2),
    ] {
        let text = read(dir.path(), name);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(reader.records().count(), rows, "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["aggregate"]["pooled_s_est"].is_number());
    let dynamics = &manifest["reference_dynamics"];
    assert_eq!(dynamics["friction"], 0.5);
    assert_eq!(dynamics["rate_hz"], 240);
    assert_eq!(dynamics["solver_iterations"], 100);
    assert_eq!(manifest["sim"]["friction"], 0.5);
    assert_eq!(manifest["sim"]["gravity"][2], -9.81);
    let libs = std::fs::read_dir(dir.path().join("libraries")).unwrap().count();
    assert_eq!(libs, 4);
}
