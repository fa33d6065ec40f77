//! Loaders for annotated corpora and story sets, and a seeded generator of
//! synthetic fixture bundles.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

mod fixture;
mod glucose;
mod stories;

pub use fixture::{make_fixture, AlignmentFixture, FixtureBundle, FixtureShape};
pub use glucose::{
    load_glucose, read_glucose, reference_sets, ColumnMapping, GlucoseLoad, GlucoseRecord,
    RowDiagnostic,
};
pub use stories::{
    load_stories, read_graphs, read_stories, save_stories, write_graphs, write_stories,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a sibling temporary file so readers never see a partial
/// file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    use std::io::Write;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}
