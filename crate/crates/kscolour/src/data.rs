//! Bundled ray-set data. Sets are embedded so that the library and CLI work
//! without a data directory; the `KSCOLOUR_DATA_DIR` environment variable can
//! point at a directory of additional `<name>.json` files.

use crate::error::{KsError, Result};
use crate::sets::RaySet;
use std::path::PathBuf;

pub const CONWAY_KOCHEN_JSON: &str = include_str!("../data/conway-kochen.json");

/// The bundled 31-direction Conway-Kochen set.
pub fn conway_kochen() -> RaySet {
    RaySet::from_json(CONWAY_KOCHEN_JSON).expect("bundled set is valid")
}

/// Names resolvable without a file path.
pub const BUNDLED_NAMES: &[&str] = &["conway-kochen"];

/// Where a resolved ray set came from, with the exact bytes read (for input
/// digests in reports).
pub struct ResolvedRaySet {
    pub set: RaySet,
    /// Digest label: the file path, or `bundled:<name>`.
    pub label: String,
    pub bytes: Vec<u8>,
}

/// Resolves `--set` arguments: an existing file path wins; otherwise
/// `$KSCOLOUR_DATA_DIR/<name>.json`; otherwise a bundled name.
pub fn resolve_ray_set(spec: &str) -> Result<RaySet> {
    Ok(resolve_ray_set_with_source(spec)?.set)
}

/// Like [`resolve_ray_set`], also reporting the provenance.
pub fn resolve_ray_set_with_source(spec: &str) -> Result<ResolvedRaySet> {
    let path = PathBuf::from(spec);
    if path.is_file() {
        let bytes = std::fs::read(&path)?;
        let set = RaySet::from_json(std::str::from_utf8(&bytes).map_err(|e| {
            KsError::Parse(format!("{spec}: not UTF-8: {e}"))
        })?)?;
        return Ok(ResolvedRaySet {
            set,
            label: spec.to_string(),
            bytes,
        });
    }
    if let Ok(dir) = std::env::var("KSCOLOUR_DATA_DIR") {
        let candidate = PathBuf::from(dir).join(format!("{spec}.json"));
        if candidate.is_file() {
            let bytes = std::fs::read(&candidate)?;
            let set = RaySet::from_json(std::str::from_utf8(&bytes).map_err(|e| {
                KsError::Parse(format!("{}: not UTF-8: {e}", candidate.display()))
            })?)?;
            return Ok(ResolvedRaySet {
                set,
                label: candidate.display().to_string(),
                bytes,
            });
        }
    }
    match spec {
        "conway-kochen" => Ok(ResolvedRaySet {
            set: conway_kochen(),
            label: format!("bundled:{spec}"),
            bytes: CONWAY_KOCHEN_JSON.as_bytes().to_vec(),
        }),
        other => Err(KsError::Parse(format!(
            "'{other}' is neither a readable file nor a bundled set name {BUNDLED_NAMES:?}"
        ))),
    }
}
