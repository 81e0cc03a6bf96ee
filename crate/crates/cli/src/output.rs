//! Exit-code mapping and atomic file output.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nbplc_core::Error;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_FIT: u8 = 4;

/// A failed command: the process exit code and a diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    pub fn fit(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_FIT,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Classifies a toolkit error raised while processing inputs. I/O errors at
/// this stage concern reading, so they count as input errors too.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Fit(_) => Failure::fit(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

pub fn read_input(path: &Path) -> CmdResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

pub fn read_input_string(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult {
    let tmp = temp_sibling(path);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Failure::io(format!("cannot write {}: {e}", path.display()))
    })
}

/// Renders with `render` into memory, then writes atomically.
pub fn write_with(
    path: &Path,
    render: impl FnOnce(&mut Vec<u8>) -> nbplc_core::Result<()>,
) -> CmdResult {
    let mut buf = Vec::new();
    render(&mut buf).map_err(|e| Failure::io(format!("cannot encode {}: {e}", path.display())))?;
    write_atomic(path, &buf)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::io(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::io(format!("cannot create directory {}: {e}", dir.display())))
}

/// `dir/stem.suffix` next to `path`, where `stem` drops the last extension.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_names() {
        let p = Path::new("/tmp/run/report.json");
        assert_eq!(
            companion(p, "residual.csv"),
            Path::new("/tmp/run/report.residual.csv")
        );
        assert_eq!(companion(Path::new("x"), "pdf.csv"), Path::new("x.pdf.csv"));
    }

    #[test]
    fn error_classes() {
        assert_eq!(Failure::from(Error::Fit("x".into())).code, EXIT_FIT);
        assert_eq!(
            Failure::from(Error::UnknownPreset("m".into())).code,
            EXIT_INPUT
        );
        assert_eq!(Failure::from(Error::Parse("p".into())).code, EXIT_INPUT);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("nbplc-out-{}", std::process::id()));
        create_dir(&dir).unwrap();
        let p = dir.join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
