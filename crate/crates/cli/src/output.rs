//! Output files: versioned JSON documents with fixed-format floats, and CSVs
//! whose first line records the effective configuration.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dichotomy::output::sig12;
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter, Serializer};

use crate::config::EffectiveConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Wraps a JSON formatter so that floats use 12 significant digits.
struct Sig12<F>(F);

impl<F: Formatter> Formatter for Sig12<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(sig12(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn encode<T: Serialize, F: Formatter>(value: &T, fmt: F) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig12(fmt));
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// Single-line JSON with fixed-format floats.
pub fn compact<T: Serialize>(value: &T) -> Result<String, CliError> {
    encode(value, CompactFormatter)
}

#[derive(Serialize)]
struct Document<'a, R> {
    schema_version: u32,
    command: &'a str,
    config: &'a EffectiveConfig,
    result: &'a R,
}

/// `{schema_version, command, config, result}` as pretty JSON text.
pub fn document<R: Serialize>(command: &str, config: &EffectiveConfig, result: &R) -> Result<String, CliError> {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    };
    let mut s = encode(&doc, PrettyFormatter::new())?;
    s.push('\n');
    Ok(s)
}

/// Output directory handle.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(OutDir { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<R: Serialize>(
        &self,
        name: &str,
        command: &str,
        config: &EffectiveConfig,
        result: &R,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, document(command, config, result)?)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Opens `name` and writes the `# schema_version=… config=…` line; the
    /// caller writes the table.
    pub fn csv(&self, name: &str, config: &EffectiveConfig) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# schema_version={SCHEMA_VERSION} config={}", compact(config)?)?;
        Ok(w)
    }
}
