//! JSON model format, reports and command-line front end for `qbd-core`.

pub mod report;
pub mod spec_json;

pub use spec_json::{parse_spec, serialize_spec, ParseError};
