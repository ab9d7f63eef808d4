//! Shared helpers for the integration suites: corpus loading and the
//! model configurations under test.

use std::fs;
use std::path::PathBuf;

use oek_core::{parse, validate, ValidatedProgram};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_path(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

pub fn corpus_source(name: &str) -> String {
    let path = corpus_path(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn corpus_program(name: &str) -> ValidatedProgram {
    let src = corpus_source(name);
    let parsed = parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    validate(parsed).unwrap_or_else(|errs| {
        panic!(
            "{name}: {}",
            errs.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )
    })
}

/// Every valid corpus program.
pub fn corpus_names() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .filter_map(|e| {
            let e = e.ok()?;
            let name = e.file_name().into_string().ok()?;
            (e.file_type().ok()?.is_file() && name.ends_with(".oek")).then_some(name)
        })
        .collect();
    names.sort();
    assert!(names.len() >= 12, "corpus has at least 12 programs");
    names
}
