use std::path::Path;
use std::process::{Command, Output};

fn place3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_place3d")).args(args).output().expect("spawn place3d")
}

fn gen(dir: &Path, cells: &str, seed: &str) -> String {
    let design = dir.join(format!("d{cells}_{seed}.txt"));
    let out = place3d(&["gen", "--out", design.to_str().unwrap(), "--cells", cells, "--seed", seed]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    design.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_solution_report_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let design = gen(dir.path(), "300", "2");
    let sol = dir.path().join("sol.txt");
    let fields = dir.path().join("fields.json");
    let out = place3d(&[
        "--input",
        &design,
        "--out",
        sol.to_str().unwrap(),
        "--check",
        "--dump-fields",
        fields.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("check PASS"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sol.report.json")).unwrap()).unwrap();
    for key in ["hpwl", "hbt_count", "raw_score", "runtime", "final_overflow"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("sol.iter.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("Iter,WL,#HBTs,OVFL"));
    assert!(csv.lines().count() > 10);
    let snap: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fields).unwrap()).unwrap();
    let g = &snap["grid"];
    let bins = g["nx"].as_u64().unwrap() * g["ny"].as_u64().unwrap() * g["nz"].as_u64().unwrap();
    assert_eq!(snap["rho"].as_array().unwrap().len() as u64, bins);

    let chk = place3d(&["check", "--input", &design, "--solution", sol.to_str().unwrap()]);
    assert_eq!(chk.status.code(), Some(0));
    let text = String::from_utf8_lossy(&chk.stdout);
    let score = report["raw_score"].as_f64().unwrap();
    assert!(text.contains(&format!("raw score {score:.1}")), "{text}");
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let design = gen(dir.path(), "400", "5");
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let sol = dir.path().join(format!("sol{threads}.txt"));
        let out = place3d(&["--input", &design, "--out", sol.to_str().unwrap(), "--seed", "9", "--threads", threads]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(sol).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn skip_rotation_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let design = gen(dir.path(), "200", "1");
    let sol = dir.path().join("s.txt");
    let out = place3d(&["--input", &design, "--out", sol.to_str().unwrap(), "--skip-rotation", "--flow", "2d"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.report.json")).unwrap()).unwrap();
    assert_eq!(report["rotation_skipped"], true);
    assert_eq!(report["flow"], "2d");
    assert_eq!(report["rotations"].as_array().unwrap().len(), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "DieSize 0 0 10\nnonsense here\n").unwrap();
    let sol = dir.path().join("s.txt");
    let out = place3d(&["--input", bad.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let inf = dir.path().join("inf.txt");
    let out = place3d(&["gen", "--out", inf.to_str().unwrap(), "--macro-ratio", "1.5"]);
    assert_eq!(out.status.code(), Some(3));

    let out = place3d(&["--seed", "3"]);
    assert!(!out.status.success());
}

#[test]
fn check_rejects_overlapping_solution() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "200", "1");
    let sol = dir.path().join("s.txt");
    assert!(place3d(&["--input", &a, "--out", sol.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&sol).unwrap();
    // Pile every instance onto the first placement line's coordinates.
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let first = lines.iter().position(|l| l.starts_with("Inst ")).expect("placement lines");
    let coords: Vec<String> = lines[first].split_whitespace().skip(2).take(2).map(str::to_owned).collect();
    for l in lines.iter_mut().filter(|l| l.starts_with("Inst ")) {
        let mut f: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        f[2] = coords[0].clone();
        f[3] = coords[1].clone();
        *l = f.join(" ");
    }
    let broken = dir.path().join("broken.txt");
    std::fs::write(&broken, lines.join("\n") + "\n").unwrap();
    let out = place3d(&["check", "--input", &a, "--solution", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("overlap"));
}
