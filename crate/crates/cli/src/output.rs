use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::config::Resolved;
use crate::CliError;

/// Creates `name` in the output directory, starting with a `#` line that
/// records the program version and the configuration hash.
pub fn create(run: &Resolved, name: &str) -> Result<(BufWriter<File>, PathBuf), CliError> {
    let path = run.output_dir().join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "# dryfric {} config_sha256={}", env!("CARGO_PKG_VERSION"), run.hash)?;
    Ok((w, path))
}

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn finish(mut w: BufWriter<File>, path: PathBuf) -> Result<(), CliError> {
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}
