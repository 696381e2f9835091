//! The JSON files under `scenarios/` are exactly the built-in scenarios.

use std::path::PathBuf;

use fairsim_core::harness::{builtin, Scenario};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_builtin_is_shipped_and_current() {
    for s in builtin::all() {
        let path = dir().join(format!("{}.json", s.name));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let parsed = Scenario::from_json(&text).unwrap();
        assert_eq!(
            parsed,
            s,
            "{} is stale; re-export with `fairsim scenario {}`",
            path.display(),
            s.name
        );
        assert_eq!(text.trim_end(), s.to_json());
    }
}

#[test]
fn no_orphan_files() {
    let names = builtin::names();
    for entry in std::fs::read_dir(dir()).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        assert!(
            names.contains(&stem),
            "{} has no built-in counterpart",
            path.display()
        );
    }
}
