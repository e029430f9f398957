use std::path::PathBuf;
use std::process::{Command, Output};

use qbd_core::solver::SolutionTerm;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn qbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbd")).args(args).output().unwrap()
}

fn run_on(sub: &str, name: &str, extra: &[&str]) -> Output {
    let path = fixture(name);
    let mut args = vec![sub, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    qbd(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn compare_passes_on_every_supported_fixture() {
    for name in [
        "power_states",
        "fatigue",
        "virus",
        "equal_bases",
        "split_bases",
        "mm1",
        "zero_base_up_jump",
    ] {
        let o = run_on("compare", &format!("{name}.json"), &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(v["sup_error"].as_f64().unwrap() <= 1e-8);
        assert_eq!(v["pass"], true);
    }
}

#[test]
fn compare_breach_exits_one() {
    let o = run_on("compare", "virus.json", &["--sup-tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("disagrees"), "{}", stderr(&o));
}

#[test]
fn skip_free_violation_exits_two() {
    for sub in ["validate", "solve", "compare", "oracle", "metrics"] {
        let o = run_on(sub, "bad_skip.json", &[]);
        assert_eq!(o.status.code(), Some(2), "{sub}");
        assert!(
            stderr(&o).contains("jumps[0].delta: skip-free violated"),
            "{}",
            stderr(&o)
        );
    }
}

#[test]
fn mixed_multiplicity_exits_one() {
    for sub in ["solve", "compare", "metrics"] {
        let o = run_on(sub, "mixed_multiplicity.json", &[]);
        assert_eq!(o.status.code(), Some(1), "{sub}");
        assert!(
            stderr(&o).contains("Unsupported multiplicity pattern"),
            "{}",
            stderr(&o)
        );
    }
    // The chain itself is valid, and the oracles handle it.
    assert_eq!(
        run_on("validate", "mixed_multiplicity.json", &[]).status.code(),
        Some(0)
    );
    assert_eq!(run_on("oracle", "mixed_multiplicity.json", &[]).status.code(), Some(0));
}

#[test]
fn unreadable_or_malformed_input_exits_two() {
    let dir = std::env::temp_dir().join(format!("qbd-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let empty = dir.join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let o = qbd(&["solve", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));

    let unstable = dir.join("unstable.json");
    std::fs::write(
        &unstable,
        r#"{"j0": 0, "phases": [{"lambda": 2, "mu": 1}], "boundary": {"states": ["e"],
            "into_repeating": [{"from": "e", "phase": 0, "rate": 1}],
            "out_of_repeating": [{"phase": 0, "to": "e", "rate": 1}]}}"#,
    )
    .unwrap();
    for sub in ["validate", "solve"] {
        let o = qbd(&[sub, unstable.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{sub}");
        assert!(stderr(&o).contains("unstable final phase"), "{}", stderr(&o));
    }
    assert_eq!(
        qbd(&["solve", dir.join("missing.json").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn csv_matches_json_terms() {
    for name in ["power_states", "fatigue", "virus", "equal_bases", "split_bases"] {
        let file = format!("{name}.json");
        let json: serde_json::Value = serde_json::from_slice(&run_on("solve", &file, &[]).stdout).unwrap();
        let csv_out = run_on("solve", &file, &["--out", "csv"]);
        assert_eq!(csv_out.status.code(), Some(0));
        let spec = qbd_cli::parse_spec(&std::fs::read_to_string(fixture(&file)).unwrap()).unwrap();
        let j0 = spec.j0();
        let mut rows = csv::Reader::from_reader(csv_out.stdout.as_slice());
        let mut count = 0;
        for row in rows.deserialize::<(usize, u64, f64)>() {
            let (phase, level, p) = row.unwrap();
            let expect = if level == j0 {
                json["level_j0"][phase].as_f64().unwrap()
            } else {
                json["terms"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter(|t| t["phase"].as_u64().unwrap() as usize == phase)
                    .map(|t| {
                        SolutionTerm {
                            coeff: t["coeff"].as_f64().unwrap(),
                            base: t["base"].as_f64().unwrap(),
                            degree: t["degree"].as_u64().unwrap() as u32,
                        }
                        .at(level - j0)
                    })
                    .sum::<f64>()
                    .max(0.0)
            };
            assert!((p - expect).abs() <= 1e-13, "{name} ({phase},{level}): {p} vs {expect}");
            count += 1;
        }
        assert_eq!(count, spec.num_phases() * 51);
    }
}

#[test]
fn metrics_tails_flag() {
    let o = run_on("metrics", "power_states.json", &["--tails", "1,10,20,40"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let tail: Vec<f64> = v["tail"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["probability"].as_f64().unwrap())
        .collect();
    assert_eq!(tail.len(), 4);
    assert!(tail.windows(2).all(|w| w[1] <= w[0]));
    // Level j0 = 1 is the bottom of the repeating portion.
    assert!((tail[0] - (1.0 - v["boundary_mass"].as_f64().unwrap())).abs() <= 1e-14);
    let marginals: f64 = v["phase_marginals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((marginals + v["boundary_mass"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn oracle_reports_levels_and_rate_matrix() {
    let o = run_on("oracle", "mm1.json", &["--jmax", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["converged"], true);
    assert!((v["rate_matrix"][0][0].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert!((v["levels"][1][0].as_f64().unwrap() - 0.125).abs() <= 1e-12);
}
