//! Dataset files: one CSV per trajectory (`t,x1,...,xn` header, rows in
//! ascending time) plus a `manifest.csv` listing file names, labels, and
//! generation provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Faulty,
    Unknown,
}

/// One manifest row. `gains` is a free-form `kp/ki/kd` string for systems
/// that have them, empty otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub label: Label,
    pub system: String,
    pub gains: String,
    pub seed: u64,
    pub noise_sigma: f64,
}

#[derive(Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub entries: Vec<(Trajectory, ManifestEntry)>,
}

impl Dataset {
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.entries.iter().map(|(t, _)| t.clone()).collect()
    }
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    out.push('t');
    for i in 1..=traj.dim() {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (i, t) in traj.times().iter().enumerate() {
        out.push_str(&format!("{t}"));
        for v in traj.sample(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let csv_err = |line: u64, reason: String| Error::Csv {
        path: display.clone(),
        line: Some(line),
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(csv_err(
            1,
            format!("expected header `t,x1,...`, got {header:?}"),
        ));
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(csv_err(
                idx as u64 + 1,
                format!("expected {} fields, got {}", dim + 1, fields.len()),
            ));
        }
        let t: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| csv_err(idx as u64 + 1, format!("bad time {:?}", fields[0])))?;
        times.push(t);
        for f in &fields[1..] {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| csv_err(idx as u64 + 1, format!("bad value {f:?}")))?;
            states.push(v);
        }
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    Trajectory::new(id, times, states, dim)
}

/// Write a dataset directory: one CSV per trajectory plus the manifest.
pub fn write_dataset(dir: &Path, entries: &[(Trajectory, ManifestEntry)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let manifest_path = dir.join(MANIFEST_NAME);
    let mut writer = csv::Writer::from_path(&manifest_path).map_err(|e| {
        Error::io(
            manifest_path.display().to_string(),
            std::io::Error::other(e),
        )
    })?;
    for (traj, entry) in entries {
        write_trajectory_csv(&dir.join(&entry.file), traj)?;
        writer.serialize(entry).map_err(|e| Error::Csv {
            path: manifest_path.display().to_string(),
            line: None,
            reason: e.to_string(),
        })?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    Ok(())
}

/// Read a dataset directory via its manifest.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let mut reader = csv::Reader::from_path(&manifest_path).map_err(|e| Error::Csv {
        path: manifest_path.display().to_string(),
        line: None,
        reason: e.to_string(),
    })?;
    let mut entries = Vec::new();
    for record in reader.deserialize() {
        let entry: ManifestEntry = record.map_err(|e| Error::Csv {
            path: manifest_path.display().to_string(),
            line: None,
            reason: e.to_string(),
        })?;
        let traj = read_trajectory_csv(&dir.join(&entry.file))?;
        entries.push((traj, entry));
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset {
        dir: dir.to_path_buf(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_traj(id: &str) -> Trajectory {
        Trajectory::new(
            id,
            vec![0.0, 0.5, 1.25],
            vec![1.0, -2.0, 0.25, 3.5, -0.125, 0.0625],
            2,
        )
        .unwrap()
    }

    #[test]
    fn trajectory_csv_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let traj = sample_traj("a");
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        assert_eq!(back.id(), "a");
        assert_eq!(back.times(), traj.times());
        assert_eq!(back.states_flat(), traj.states_flat());
    }

    #[test]
    fn dataset_roundtrip_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            (
                sample_traj("n0"),
                ManifestEntry {
                    file: "n0.csv".into(),
                    label: Label::Normal,
                    system: "academic".into(),
                    gains: String::new(),
                    seed: 1,
                    noise_sigma: 0.0,
                },
            ),
            (
                sample_traj("f0"),
                ManifestEntry {
                    file: "f0.csv".into(),
                    label: Label::Faulty,
                    system: "academic-faulty".into(),
                    gains: String::new(),
                    seed: 2,
                    noise_sigma: 0.01,
                },
            ),
        ];
        write_dataset(dir.path(), &entries).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        assert_eq!(ds.entries.len(), 2);
        assert_eq!(ds.entries[0].1.label, Label::Normal);
        assert_eq!(ds.entries[1].1.label, Label::Faulty);
        assert_eq!(ds.entries[1].1.noise_sigma, 0.01);
        assert_eq!(ds.entries[0].0.states_flat(), entries[0].0.states_flat());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,x1\n0.0,1.0\n0.1,nope\n").unwrap();
        let err = read_trajectory_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "message was {msg}");
    }

    #[test]
    fn missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "0.0,1.0\n0.1,2.0\n").unwrap();
        assert!(read_trajectory_csv(&path).is_err());
    }
}
