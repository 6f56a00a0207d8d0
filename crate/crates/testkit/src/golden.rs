//! Frozen expected outputs. `UPDATE_GOLDEN=1` rewrites them.

use std::path::{Path, PathBuf};

/// Directory holding the frozen files.
pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../golden")
}

pub fn path(name: &str) -> PathBuf {
    dir().join(name)
}

pub fn updating() -> bool {
    std::env::var("UPDATE_GOLDEN").is_ok_and(|v| v == "1")
}

/// Compare `actual` with the frozen file, or rewrite it when updating.
/// Returns a description of the first difference.
pub fn compare(name: &str, actual: &str) -> Result<(), String> {
    let p = path(name);
    if updating() {
        std::fs::create_dir_all(p.parent().unwrap_or(&dir())).map_err(|e| e.to_string())?;
        std::fs::write(&p, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = read(&p)?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
    Err(format!(
        "{} differs at line {}: expected {:?}, got {:?} (UPDATE_GOLDEN=1 to refreeze)",
        p.display(),
        line + 1,
        expected.lines().nth(line).unwrap_or("<eof>"),
        actual.lines().nth(line).unwrap_or("<eof>")
    ))
}

/// Panicking form of [`compare`].
pub fn check(name: &str, actual: &str) {
    if let Err(e) = compare(name, actual) {
        panic!("{e}");
    }
}

fn read(p: &Path) -> Result<String, String> {
    std::fs::read_to_string(p).map_err(|e| format!("{}: {e} (UPDATE_GOLDEN=1 to create)", p.display()))
}
