//! File emission and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::Snapshot;

/// A file written by a subcommand, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducedFile {
    pub path: String,
    pub role: String,
}

/// What a subcommand did and what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Effective TOML configuration, when the command takes one.
    pub config: Option<String>,
    pub out_dir: PathBuf,
    pub files: Vec<ProducedFile>,
    pub version: String,
    pub seed: Option<u64>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            args,
            config: None,
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
        }
    }

    /// Writes `contents` to `name` inside the output directory and lists it.
    pub fn write(&mut self, name: &str, role: &str, contents: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(ProducedFile {
            path: name.to_string(),
            role: role.to_string(),
        });
        Ok(path)
    }

    /// Writes every snapshot as `node{i}_t{t}.csv` and `.pgm` (nodes 1-based).
    pub fn write_snapshots<T: Scalar>(&mut self, snapshots: &[Snapshot<T>]) -> Result<()> {
        for s in snapshots {
            let stem = snapshot_stem(s.node, s.t.to_f64_lossy());
            self.write(&format!("{stem}_u.csv"), "snapshot_u", s.u.to_csv().as_bytes())?;
            self.write(&format!("{stem}_v.csv"), "snapshot_v", s.v.to_csv().as_bytes())?;
            self.write(&format!("{stem}_u.pgm"), "image_u", s.u.to_pgm().as_bytes())?;
        }
        Ok(())
    }

    /// Writes `manifest.json` last, after checking that every listed file exists.
    pub fn finish(mut self) -> Result<PathBuf> {
        for f in &self.files {
            if !self.out_dir.join(&f.path).is_file() {
                return Err(Error::Config(format!("listed output {} is missing", f.path)));
            }
        }
        self.files.push(ProducedFile {
            path: MANIFEST_NAME.to_string(),
            role: "manifest".to_string(),
        });
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(MANIFEST_NAME);
        fs::write(&path, json)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

/// `node3_t150` for 0-based node 2 at `t = 150`.
pub fn snapshot_stem(node: usize, t: f64) -> String {
    format!("node{}_t{}", node + 1, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid};

    #[test]
    fn manifest_lists_existing_files_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut m = RunManifest::new("simulate", vec!["--out".into(), "run".into()], &out);
        m.seed = Some(7);
        m.config = Some("seed = 7\n".into());
        let grid = Grid::unit_spacing(4).unwrap();
        let snap = Snapshot {
            t: 1.5,
            node: 0,
            u: Field::from_fn(grid, |x, y| x - y),
            v: Field::zeros(grid),
        };
        m.write_snapshots(&[snap.clone()]).unwrap();
        let path = m.clone().finish().unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.files.len(), 4);
        for f in &back.files {
            assert!(out.join(&f.path).is_file(), "{}", f.path);
        }
        let text = std::fs::read_to_string(out.join("node1_t1.5_u.csv")).unwrap();
        let u = Field::from_csv(&text, 4.0, 4.0).unwrap();
        assert_eq!(u, snap.u);
    }

    #[test]
    fn missing_listed_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("fit", Vec::new(), dir.path());
        m.files.push(ProducedFile {
            path: "ghost.csv".into(),
            role: "fit".into(),
        });
        assert!(m.finish().is_err());
    }
}
