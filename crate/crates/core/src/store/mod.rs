//! Reading and writing spectra, reference data and fitted models.

pub mod adapt;
pub mod canonical;
pub mod container;
pub mod merge;
pub mod model;
pub mod reference;

use std::io::Write;
use std::path::Path;

pub use adapt::{adapt_kssl, adapt_lucas, read_kssl, read_lucas, resample_to_grid, AdapterOptions, ReflectanceUnit};
pub use canonical::{canonical_header, load_canonical, read_canonical, save_canonical, write_canonical};
pub use container::{Container, ModelKind, NamedArray, FORMAT_VERSION};
pub use merge::{merge, MergeReport};
pub use model::{fit, load_model, save_model, Estimator, FitOptions, Fitted, Model};
pub use reference::{load_reference_table1, xrd_comparison, Group, ReferenceRow, ReferenceTable, XrdComparison, TABLE1};

use crate::error::{Error, Result};

/// Write `bytes` to a temporary file next to `path`, then rename it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::InvalidParams(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
