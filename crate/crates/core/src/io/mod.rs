//! File formats and artifact plumbing.

mod lgw;
mod manifest;
mod plot;
mod table;
mod wav;

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use lgw::{
    compare_fixture, load_fixture, load_weights, read_container, save_fixture, save_weights, write_container,
    Container, Fixture, FixtureReport, LayerError, TensorEntry, FIXTURE_TOLERANCE, MAGIC,
};
pub use manifest::{Artifact, RunManifest, MANIFEST_NAME};
pub use plot::{emit_plot, render_svg, PlotSeries};
pub use table::{
    read_matrix, read_probe_csv, read_series_csv, read_track_csv, write_assignments, write_matrix, write_probe_csv,
    write_series_csv, write_track_csv,
};
pub use wav::{encode_wav, read_wav, write_wav, WavEncoding};

/// Write `bytes` to a sibling temp file, sync it, then rename over `path`.
/// Readers never observe a partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
