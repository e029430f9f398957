//! `solve` output for the bundled fixtures against checked-in files.
//! Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::PathBuf;

use qbd_cli::parse_spec;
use qbd_cli::report::{SolutionDoc, DEFAULT_TAILS};
use qbd_core::solve;
use serde_json::Value;

const FIXTURES: [&str; 7] = [
    "power_states",
    "fatigue",
    "virus",
    "equal_bases",
    "split_bases",
    "mm1",
    "zero_base_up_jump",
];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Same shape, same strings, numbers equal to 1e-12 relative.
fn same(a: &Value, b: &Value, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300) || (x - y).abs() <= 1e-300 {
                Ok(())
            } else {
                Err(format!("{at}: {x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (x, y))| same(x, y, &format!("{at}[{i}]"))),
        (Value::Object(x), Value::Object(y)) if x.keys().eq(y.keys()) => {
            x.iter().try_for_each(|(k, v)| same(v, &y[k], &format!("{at}.{k}")))
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} vs {b}")),
    }
}

#[test]
fn solve_output_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in FIXTURES {
        let text = std::fs::read_to_string(root().join("fixtures").join(format!("{name}.json"))).unwrap();
        let dist = solve(&parse_spec(&text).unwrap()).unwrap();
        let doc = serde_json::to_value(SolutionDoc::new(&dist, &DEFAULT_TAILS)).unwrap();
        let path = root().join("tests/golden").join(format!("{name}.json"));
        if update {
            std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
            continue;
        }
        let golden: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        if let Err(e) = same(&doc, &golden, name) {
            panic!("{e}");
        }
    }
}
