//! On-disk cache of assembled forms, keyed by a hash of what they depend on.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use frachs::radialops::assemble;
use frachs::{AssembledForms, ProblemParams, RadialGrid};
use sha2::{Digest, Sha256};

/// `$FRACHS_CACHE_DIR`, else `<tmp>/frachs-cache`.
pub fn cache_dir() -> PathBuf {
    match std::env::var_os("FRACHS_CACHE_DIR") {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => std::env::temp_dir().join("frachs-cache"),
    }
}

/// Hex SHA-256 of `(n, α, N, r_min, R)`; the forms do not depend on `s`, `γ`, `λ`.
/// Floats enter by bit pattern so nearby values never collide.
pub fn forms_key(grid: &RadialGrid, alpha: f64) -> String {
    let mut h = Sha256::new();
    h.update(b"frachs-forms-v1");
    for x in [grid.dim(), alpha, grid.len() as f64, grid.r_min(), grid.r_max()] {
        h.update(x.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Load the forms for `grid` from `dir`, assembling and storing them on a miss.
/// Unreadable or stale entries are rebuilt; a failed store is not an error.
pub fn load_or_assemble(dir: Option<&Path>, grid: Arc<RadialGrid>, params: &ProblemParams) -> frachs::Result<AssembledForms> {
    let Some(dir) = dir else {
        return assemble(grid, params);
    };
    let path = dir.join(format!("forms-{}.csv", forms_key(&grid, params.alpha())));
    if let Ok(f) = File::open(&path) {
        if let Ok(forms) = AssembledForms::read_csv(BufReader::new(f), grid.clone(), params) {
            return Ok(forms);
        }
    }
    let forms = assemble(grid, params)?;
    let _ = store(&path, &forms);
    Ok(forms)
}

fn store(path: &Path, forms: &AssembledForms) -> frachs::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    // write then rename so concurrent runs never read half a file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    forms.write_csv(BufWriter::new(File::create(&tmp)?))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_tracks_every_input() {
        let g = RadialGrid::new(3.0, 1e-6, 1.0, 50).unwrap();
        let k = forms_key(&g, 1.0);
        assert_eq!(k.len(), 64);
        assert_eq!(k, forms_key(&g, 1.0));
        assert_ne!(k, forms_key(&g, 1.5));
        assert_ne!(k, forms_key(&RadialGrid::new(2.0, 1e-6, 1.0, 50).unwrap(), 1.0));
        assert_ne!(k, forms_key(&RadialGrid::new(3.0, 1e-5, 1.0, 50).unwrap(), 1.0));
        assert_ne!(k, forms_key(&RadialGrid::new(3.0, 1e-6, 2.0, 50).unwrap(), 1.0));
        assert_ne!(k, forms_key(&RadialGrid::new(3.0, 1e-6, 1.0, 51).unwrap(), 1.0));
    }

    #[test]
    fn cached_forms_match_fresh_assembly() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemParams::new(3.0, 1.0, 0.5, 0.2, 0.0).unwrap();
        let g = Arc::new(RadialGrid::new(3.0, 1e-4, 1.0, 40).unwrap());
        let a = load_or_assemble(Some(dir.path()), g.clone(), &p).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = load_or_assemble(Some(dir.path()), g, &p).unwrap();
        assert_eq!(a.gagliardo(), b.gagliardo());
        assert_eq!(a.mass(), b.mass());
    }
}
