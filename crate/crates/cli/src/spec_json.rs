//! JSON chain format. Boundary states are referenced by name in the file and by
//! index in [`ChainSpec`].

use qbd_core::chain::{BoundaryRate, BoundarySpec, EntryRate, ExitRate, PhaseJump, PhaseRates};
use qbd_core::{ChainSpec, SpecError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{field}: unknown boundary state {name:?}")]
    UnknownState { field: String, name: String },
    #[error(transparent)]
    Invalid(#[from] SpecError),
}

impl ParseError {
    /// 1-based line of a syntax or type error, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Json { source, .. } if source.line() > 0 => Some(source.line()),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    j0: u64,
    phases: Vec<PhaseDoc>,
    #[serde(default)]
    jumps: Vec<JumpDoc>,
    boundary: BoundaryDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseDoc {
    lambda: f64,
    mu: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JumpDoc {
    from: usize,
    to: usize,
    delta: i64,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryDoc {
    states: Vec<String>,
    #[serde(default)]
    internal: Vec<InternalDoc>,
    #[serde(default)]
    into_repeating: Vec<EntryDoc>,
    #[serde(default)]
    out_of_repeating: Vec<ExitDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InternalDoc {
    from: String,
    to: String,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    from: String,
    phase: usize,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExitDoc {
    phase: usize,
    to: String,
    rate: f64,
}

pub fn parse_spec(text: &str) -> Result<ChainSpec, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SpecDoc = serde_path_to_error::deserialize(de).map_err(|e| ParseError::Json {
        path: match e.path().to_string() {
            p if p == "." => "document".to_string(),
            p => p,
        },
        source: e.into_inner(),
    })?;

    let states = doc.boundary.states;
    let lookup = |field: String, name: &str| {
        states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ParseError::UnknownState {
                field,
                name: name.to_string(),
            })
    };
    let internal = doc
        .boundary
        .internal
        .iter()
        .enumerate()
        .map(|(n, t)| {
            Ok(BoundaryRate {
                from: lookup(format!("boundary.internal[{n}].from"), &t.from)?,
                to: lookup(format!("boundary.internal[{n}].to"), &t.to)?,
                rate: t.rate,
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    let into_repeating = doc
        .boundary
        .into_repeating
        .iter()
        .enumerate()
        .map(|(n, t)| {
            Ok(EntryRate {
                from: lookup(format!("boundary.into_repeating[{n}].from"), &t.from)?,
                phase: t.phase,
                rate: t.rate,
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    let out_of_repeating = doc
        .boundary
        .out_of_repeating
        .iter()
        .enumerate()
        .map(|(n, t)| {
            Ok(ExitRate {
                phase: t.phase,
                to: lookup(format!("boundary.out_of_repeating[{n}].to"), &t.to)?,
                rate: t.rate,
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    let phases = doc
        .phases
        .iter()
        .map(|p| PhaseRates {
            lambda: p.lambda,
            mu: p.mu,
        })
        .collect();
    let jumps = doc
        .jumps
        .iter()
        .map(|j| PhaseJump {
            from: j.from,
            to: j.to,
            delta: j.delta,
            rate: j.rate,
        })
        .collect();
    let boundary = BoundarySpec {
        states,
        internal,
        into_repeating,
        out_of_repeating,
    };
    Ok(ChainSpec::new(doc.j0, phases, jumps, boundary)?)
}

pub fn serialize_spec(spec: &ChainSpec) -> String {
    let b = spec.boundary();
    let name = |i: usize| b.states[i].clone();
    let doc = SpecDoc {
        j0: spec.j0(),
        phases: spec
            .phases()
            .iter()
            .map(|p| PhaseDoc {
                lambda: p.lambda,
                mu: p.mu,
            })
            .collect(),
        jumps: spec
            .jumps()
            .iter()
            .map(|j| JumpDoc {
                from: j.from,
                to: j.to,
                delta: j.delta,
                rate: j.rate,
            })
            .collect(),
        boundary: BoundaryDoc {
            states: b.states.clone(),
            internal: b
                .internal
                .iter()
                .map(|t| InternalDoc {
                    from: name(t.from),
                    to: name(t.to),
                    rate: t.rate,
                })
                .collect(),
            into_repeating: b
                .into_repeating
                .iter()
                .map(|t| EntryDoc {
                    from: name(t.from),
                    phase: t.phase,
                    rate: t.rate,
                })
                .collect(),
            out_of_repeating: b
                .out_of_repeating
                .iter()
                .map(|t| ExitDoc {
                    phase: t.phase,
                    to: name(t.to),
                    rate: t.rate,
                })
                .collect(),
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("spec documents always serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use qbd_core::fixtures;

    #[test]
    fn round_trip_fixtures() {
        let mut all = fixtures::supported();
        all.push(("mixed_multiplicity", fixtures::mixed_multiplicity()));
        for (name, spec) in all {
            let text = serialize_spec(&spec);
            assert_eq!(parse_spec(&text).unwrap(), spec, "{name}");
        }
    }

    #[test]
    fn empty_document() {
        let e = parse_spec("").unwrap_err();
        assert!(matches!(e, ParseError::Json { .. }));
        assert_eq!(e.line(), Some(1));
    }

    #[test]
    fn type_errors_name_the_field_and_line() {
        let text =
            "{\n  \"j0\": 0,\n  \"phases\": [{\"lambda\": 1, \"mu\": \"fast\"}],\n  \"boundary\": {\"states\": []}\n}";
        let e = parse_spec(text).unwrap_err();
        assert_eq!(e.line(), Some(3));
        assert!(e.to_string().starts_with("phases[0].mu: "), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"j0": 0, "phases": [{"lambda": 1, "mu": 2, "nu": 3}], "boundary": {"states": []}}"#;
        let e = parse_spec(text).unwrap_err();
        assert!(e.to_string().contains("nu"), "{e}");
    }

    #[test]
    fn skip_free_violation() {
        let text = r#"{"j0": 0, "phases": [{"lambda": 1, "mu": 2}, {"lambda": 1, "mu": 3}],
            "jumps": [{"from": 0, "to": 1, "delta": 2, "rate": 0.5}], "boundary": {"states": []}}"#;
        let e = parse_spec(text).unwrap_err();
        assert!(matches!(e, ParseError::Invalid(SpecError::SkipFree { .. })));
        assert!(e.to_string().contains("jumps[0].delta: skip-free violated"), "{e}");
    }

    #[test]
    fn unknown_state_names() {
        let text = r#"{"j0": 0, "phases": [{"lambda": 1, "mu": 2}],
            "boundary": {"states": ["e"], "out_of_repeating": [{"phase": 0, "to": "f", "rate": 1}]}}"#;
        let e = parse_spec(text).unwrap_err();
        assert_eq!(
            e.to_string(),
            "boundary.out_of_repeating[0].to: unknown boundary state \"f\""
        );
    }
}
