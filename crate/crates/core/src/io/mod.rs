//! Persistent formats: network descriptions, the binary tensor container
//! (weights, calibration batches, quantized bundles), configuration files
//! and exploration reports.

pub mod bits;
pub mod bundle;
pub mod config_file;
pub mod container;
pub mod description;
pub mod report;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use bundle::{load_bundle, quantize_bundle, ACTIVATIONS_RECORD};
pub use config_file::{load_config, load_quant_config, save_config, save_quant_config, ConfigFile, Metadata, QuantConfigFile};
pub use container::{Container, Payload, Record};
pub use description::{load_model, parse_description, save_model, weights_container, NetworkDescription};
pub use report::{curve_csv, load_report, render_table, write_report, ReportFile, ReportFormat};

/// Reads a whole file.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|_| Error::Schema {
        location: path.display().to_string(),
        message: "file is not UTF-8".into(),
    })
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // temporary files are created owner-only
        let perms = std::fs::Permissions::from_mode(0o644);
        tmp.as_file().set_permissions(perms).map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_container(path: &Path) -> Result<Container> {
    Container::from_bytes(&read_file(path)?)
}

/// Calibration samples from a container file, in record order.
pub fn load_calibration(path: &Path) -> Result<Vec<crate::Tensor>> {
    container::samples_from_container(&load_container(path)?)
}

pub fn save_calibration(path: &Path, samples: &[crate::Tensor]) -> Result<()> {
    write_atomic(path, &container::samples_container(samples).to_bytes())
}

/// Schema error from a serde path-tracking failure.
pub(crate) fn schema_error<E: std::fmt::Display>(err: serde_path_to_error::Error<E>) -> Error {
    let location = err.path().to_string();
    Error::Schema {
        location: if location == "." { "<root>".into() } else { location },
        message: err.inner().to_string(),
    }
}
