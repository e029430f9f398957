use std::path::PathBuf;

use qbd_cli::{parse_spec, serialize_spec};
use qbd_core::{fixtures, ChainSpec};

fn read(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"));
    std::fs::read_to_string(path).unwrap()
}

fn library_fixtures() -> Vec<(&'static str, ChainSpec)> {
    let mut all = fixtures::supported();
    all.push(("mixed_multiplicity", fixtures::mixed_multiplicity()));
    all
}

#[test]
fn files_match_the_library_fixtures() {
    for (name, spec) in library_fixtures() {
        assert_eq!(parse_spec(&read(name)).unwrap(), spec, "{name}");
    }
}

#[test]
fn parse_then_serialize_is_the_identity_on_files() {
    for (name, _) in library_fixtures() {
        let text = read(name);
        assert_eq!(serialize_spec(&parse_spec(&text).unwrap()), text, "{name}");
    }
}

#[test]
fn power_states_shape() {
    let spec = parse_spec(&read("power_states")).unwrap();
    assert_eq!(spec.max_phase(), 2);
    assert_eq!(spec.j0(), 1);
}
