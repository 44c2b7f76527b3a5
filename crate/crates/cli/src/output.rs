use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Records every file a command writes and emits the JSON sidecar.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    code_version: &'a str,
    seed: Option<u64>,
    config_hash: String,
    config: &'a RunConfig,
    outputs: Vec<OutputEntry<'a>>,
}

#[derive(Serialize)]
struct OutputEntry<'a> {
    file: &'a str,
    sha256: &'a str,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir, files: Vec::new() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        self.files.push((name.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        popcode::neuron::write_csv(BufWriter::new(file), rows).map_err(|e| io_err(&path, e))?;
        self.record(name)
    }

    /// Wide numeric table: a header row, then one row per index.
    pub fn table(&mut self, name: &str, header: &[String], columns: &[&[f64]]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
        for i in 0..n {
            w.write_record(columns.iter().map(|c| c[i].to_string())).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.record(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| io_err(&path, e))?;
        self.record(name)
    }

    /// Registers a file written by someone else (plots).
    pub fn external(&mut self, name: &str) -> Result<(), CliError> {
        self.record(name)
    }

    pub fn finish(self, command: &str, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let sidecar = Sidecar {
            command,
            code_version: env!("CARGO_PKG_VERSION"),
            seed: cfg.run.seed,
            config_hash: cfg.hash(),
            config: cfg,
            outputs: self.files.iter().map(|(f, h)| OutputEntry { file: f, sha256: h }).collect(),
        };
        let path = self.path(&format!("{command}.meta.json"));
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &sidecar).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    popcode::neuron::read_csv(file).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_lists_every_file_with_its_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path().to_path_buf());
        out.table("t.csv", &["x".into(), "y".into()], &[&[1.0, 2.0], &[3.0, 4.0, 5.0]]).unwrap();
        out.json("r.json", &vec![1, 2]).unwrap();
        let cfg = RunConfig::default().resolve(Some(4), None, None);
        let meta = out.finish("demo", &cfg).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), "x,y\n1,3\n2,4\n");
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(meta).unwrap()).unwrap();
        assert_eq!(v["seed"], 4);
        assert_eq!(v["config_hash"], cfg.hash());
        let files: Vec<&str> = v["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
        assert_eq!(files, ["t.csv", "r.json"]);
        let expected = hex::encode(Sha256::digest(std::fs::read(dir.path().join("t.csv")).unwrap()));
        assert_eq!(v["outputs"][0]["sha256"], expected);
    }
}
