use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const KINK: &[&str] = &[
    "--model",
    "sine-gordon",
    "--solution",
    "kink",
    "--a",
    "1",
    "--d",
    "0",
    "--lambda",
    "1",
];
const SMALL: &[&str] = &["--grid", "-1,1,101,-1,1,101"];

fn solsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solsurf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(parts: &[&[&str]]) -> Output {
    solsurf(&parts.concat())
}

#[test]
fn verify_shipped_configuration_passes() {
    let out = run(&[&["verify"], KINK]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["zcc_symmetry"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["characteristic"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["flow3", "trans1", "trans2"]);
    assert_eq!(report["thresholds"]["zcc"].as_f64(), Some(1e-10));
}

#[test]
fn verify_bogus_characteristic_fails() {
    let out = run(&[&["verify"], KINK, SMALL, &["--characteristic", "bogus"]]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    let check = &report["zcc_symmetry"][0];
    assert_eq!(check["characteristic"], "bogus");
    assert_eq!(check["passed"], false);
    assert!(check["report"]["max_abs"].as_f64().unwrap() > 1e-2);
    assert!(report["lsp_symmetry"][0]["skipped"].is_string());
}

#[test]
fn configuration_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["verify", "--a", "1", "--d", "0", "--lambda", "0"],
        &["verify", "--a", "1"],
        &["verify", "--a", "5", "--d", "0"],
        &["verify", "--a", "1", "--d", "0", "--b", "2"],
        &["verify", "--a", "1", "--d", "0", "--grid", "0,1,2"],
        &["verify", "--a", "1", "--d", "0", "--solution", "breather"],
        &["verify", "--a", "1", "--d", "0", "--model", "kdv"],
        &["verify", "--a", "1", "--d", "0", "--characteristic", "nope"],
        &["verify", "--a", "1", "--d", "0", "--tol-zcc", "0"],
        &["surface", "--a", "1", "--d", "0", "--immersion", "gauge"],
        &[
            "surface",
            "--a",
            "1",
            "--d",
            "0",
            "--immersion",
            "generalized",
            "--characteristic",
            "bogus",
        ],
        &[
            "surface",
            "--a",
            "1",
            "--d",
            "0",
            "--immersion",
            "sym-tafel",
            "--alpha",
            "x1",
        ],
        &["surface", "--a", "1", "--d", "0", "--immersion", "sideways"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(code(&solsurf(args)), 2, "{args:?}");
    }
}

#[test]
fn models_command() {
    let out = solsurf(&["models", "list"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout)
        .lines()
        .any(|l| l == "sine-gordon"));
    let out = solsurf(&["models", "show", "sine-gordon"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("r1c1 = \"-i*lambda\""));
    assert_eq!(code(&solsurf(&["models", "show", "nope"])), 2);
}

#[test]
fn model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sg.toml");
    std::fs::write(&path, solsurf(&["models", "show", "sine-gordon"]).stdout).unwrap();
    let out = run(&[
        &[
            "verify",
            "--model-file",
            path.to_str().unwrap(),
            "--a",
            "1",
            "--d",
            "0",
        ],
        SMALL,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reports_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str, name: &str| std::fs::read(dir.path().join(sub).join(name)).unwrap();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = ["--out", out_dir.to_str().unwrap()];
        assert_eq!(
            code(&run(&[&["verify"], KINK, SMALL, &["--seed", "7"], &out])),
            0
        );
        assert_eq!(
            code(&run(&[
                &["surface", "--immersion", "sym-tafel", "--cross-check"],
                KINK,
                SMALL,
                &out
            ])),
            0
        );
    }
    for name in [
        "verify.json",
        "surface.json",
        "immersion.json",
        "mesh.obj",
        "curvature.json",
    ] {
        assert_eq!(read("a", name), read("b", name), "{name} differs");
    }
    let report = json(&dir.path().join("a/verify.json"));
    assert_eq!(report["run"]["seed"], 7);
    let text = String::from_utf8(read("a", "verify.json")).unwrap();
    assert!(text.contains("\"max_abs\": "));
    assert!(text.contains("e-"), "floats are written in exponent form");
}

#[test]
fn surface_routes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();

    let out = run(&[
        &[
            "surface",
            "--immersion",
            "generalized",
            "--characteristic",
            "trans1",
            "--out",
            out_dir,
        ],
        KINK,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "immersion.json",
        "mesh.obj",
        "curvature.json",
        "surface.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report = json(&dir.path().join("surface.json"));
    assert_eq!(report["consistency_passed"], true);
    assert_eq!(report["halving"]["converged"], true);

    let out = run(&[
        &[
            "surface",
            "--immersion",
            "sym-tafel",
            "--alpha",
            "1",
            "--cross-check",
            "--out",
            out_dir,
        ],
        KINK,
    ]);
    assert_eq!(code(&out), 0);
    let report = json(&dir.path().join("surface.json"));
    assert!(
        report["cross_check"]["max_interior_difference"]
            .as_f64()
            .unwrap()
            < 1e-3
    );
    assert_eq!(report["closure"]["passed"], true);

    let out = run(&[
        &[
            "surface",
            "--immersion",
            "gauge",
            "--S",
            "e3",
            "--format",
            "csv",
            "--out",
            out_dir,
        ],
        KINK,
    ]);
    assert_eq!(code(&out), 0);
    let report = json(&dir.path().join("surface.json"));
    assert!((report["orbit_norm"]["min"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!((report["orbit_norm"]["max"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("mesh.csv")).unwrap();
    assert!(csv.starts_with("i,j,x1,x2,X,Y,Z\n"));
}

#[test]
fn gauge_from_file_and_bogus_from_tangents() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.toml");
    std::fs::write(
        &s,
        "r1c1 = \"-i/2\"\nr1c2 = \"0\"\nr2c1 = \"0\"\nr2c2 = \"i/2\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        &[
            "surface",
            "--immersion",
            "gauge",
            "--S",
            s.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        KINK,
        SMALL,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(
        (json(&out_dir.join("surface.json"))["orbit_norm"]["max"]
            .as_f64()
            .unwrap()
            - 1.0)
            .abs()
            < 1e-8
    );

    let flags = [
        "surface",
        "--immersion",
        "generalized",
        "--characteristic",
        "bogus",
        "--from-tangents",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let out = run(&[&flags, KINK, SMALL]);
    assert_eq!(code(&out), 1);
    let report = json(&out_dir.join("surface.json"));
    assert_eq!(report["consistency_passed"], false);
    assert!(report["consistency"]["max_abs"].as_f64().unwrap() > 1e-2);
}
