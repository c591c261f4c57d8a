//! Writing result files. JSON objects are emitted with sorted keys and
//! shortest round-trip floats, so reruns are byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
}

impl Meta {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Meta {
            command: cfg.command.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: VERSION,
        }
    }
}

pub struct OutputDir {
    dir: PathBuf,
    meta: Meta,
}

impl OutputDir {
    pub fn create(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
        Ok(OutputDir {
            dir: cfg.out.clone(),
            meta: Meta::new(cfg),
        })
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(file))
    }

    /// Writes `payload` (an object) with a `meta` field added.
    pub fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<(), CliError> {
        let mut value = serde_json::to_value(payload)?;
        match value.as_object_mut() {
            Some(obj) => {
                obj.insert("meta".into(), serde_json::to_value(&self.meta)?);
            }
            None => value = json!({ "meta": self.meta, "value": value }),
        }
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, &value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// JSON lines: a header record with the metadata, then one record per item.
    pub fn write_jsonl<T: Serialize>(&self, name: &str, items: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        serde_json::to_writer(&mut w, &json!({ "header": self.meta }))?;
        w.write_all(b"\n")?;
        for item in items {
            serde_json::to_writer(&mut w, &serde_json::to_value(item)?)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with a leading `# ...` comment line carrying the metadata.
    pub fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        let mut w = self.open(name)?;
        writeln!(
            w,
            "# command={} seed={} config_hash={} version={}",
            self.meta.command, self.meta.seed, self.meta.config_hash, self.meta.version
        )?;
        Ok(csv::Writer::from_writer(w))
    }
}

/// Reads a result file back as JSON.
pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// A JSON number holding an arbitrarily large integer.
pub fn big_integer(digits: &str) -> Value {
    serde_json::from_str(digits).expect("decimal digits form a JSON number")
}
