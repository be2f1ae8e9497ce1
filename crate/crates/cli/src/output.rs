//! Atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{HarnessError, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
/// Parent directories are created as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(HarnessError::io(&tmp))?;
    file.write_all(bytes).map_err(HarnessError::io(&tmp))?;
    file.sync_all().map_err(HarnessError::io(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(HarnessError::io(path))
}
