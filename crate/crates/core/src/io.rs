//! On-disk dataset layout used by the command-line tool.
//!
//! A dataset directory holds one `task_NNNN.csv` per task (columns
//! `y,x1..xp`, novel task last), a `manifest.json` listing the files and,
//! for generated data, `truth.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, MetaDataset, SupportSet, TaskData};
use crate::synth::GenConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub prior_tasks: Vec<String>,
    pub novel_task: String,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<GenConfig>,
}

fn write_task(task: &TaskData, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let names: Vec<String> = (1..=task.n_features()).map(|j| format!("x{j}")).collect();
    writeln!(out, "y,{}", names.join(",")).map_err(io)?;
    for (i, row) in task.x.rows().into_iter().enumerate() {
        let mut line = format!("{:e}", task.y[i]);
        for v in row {
            line.push(',');
            line.push_str(&format!("{v:e}"));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a `y,x1..xp` task file.
pub fn read_task(task_id: usize, path: &Path) -> Result<TaskData> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("y") || header.len() < 2 {
        return Err(Error::parse(path, "header must be y,x1..xp"));
    }
    let p = header.len() - 1;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("line {}: non-numeric value {cell:?}", i + 2)))?;
            if j == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, p), xs).map_err(|e| Error::parse(path, e.to_string()))?;
    TaskData::new(task_id, x, Array1::from(ys)).map_err(|e| Error::parse(path, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes `data` (and `truth`, if given) into `dir`, creating it.
pub fn write_dataset(
    data: &MetaDataset,
    truth: Option<&GroundTruth>,
    config: Option<&GenConfig>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = |t: usize| format!("task_{t:04}.csv");
    let mut prior = Vec::new();
    for task in &data.prior_tasks {
        let file = name(prior.len());
        write_task(task, &dir.join(&file))?;
        prior.push(file);
    }
    let novel = name(prior.len());
    write_task(&data.novel_task, &dir.join(&novel))?;
    let manifest = Manifest { prior_tasks: prior, novel_task: novel, p: data.p, config: config.cloned() };
    write_json(&manifest, &dir.join("manifest.json"))?;
    if let Some(truth) = truth {
        write_json(truth, &dir.join("truth.json"))?;
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))
}

/// Loads a directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<MetaDataset> {
    let manifest = read_manifest(dir)?;
    let path = |f: &String| -> PathBuf { dir.join(f) };
    let prior = manifest
        .prior_tasks
        .iter()
        .enumerate()
        .map(|(t, f)| read_task(t, &path(f)))
        .collect::<Result<Vec<_>>>()?;
    let novel = read_task(prior.len(), &path(&manifest.novel_task))?;
    MetaDataset::new(prior, novel)
}

pub fn read_truth(dir: &Path) -> Result<Option<GroundTruth>> {
    let path = dir.join("truth.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::parse(&path, e.to_string()))
}

/// A one-column CSV with header `index` and zero-based feature indices.
pub fn read_support_csv(path: &Path, p: usize) -> Result<SupportSet> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != 1 || header.get(0).map(str::trim) != Some("index") {
        return Err(Error::parse(path, "expected a single `index` column"));
    }
    let mut idx = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cell = rec.get(0).unwrap_or("").trim();
        idx.push(
            cell.parse::<usize>()
                .map_err(|_| Error::parse(path, format!("line {}: bad index {cell:?}", i + 2)))?,
        );
    }
    SupportSet::new(idx, p).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_support_csv(support: &SupportSet, path: &Path) -> Result<()> {
    let mut text = String::from("index\n");
    for j in support.indices() {
        text.push_str(&format!("{j}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate;

    #[test]
    fn dataset_round_trips_exactly() {
        let cfg = GenConfig { p: 6, k: 2, l: 4, t: 3, seed: 7, ..GenConfig::default() };
        let (data, truth) = generate(&cfg, &cfg.true_weights().unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&data, Some(&truth), Some(&cfg), dir.path()).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), data);
        assert_eq!(read_truth(dir.path()).unwrap().unwrap(), truth);
        assert_eq!(read_manifest(dir.path()).unwrap().novel_task, "task_0003.csv");
    }

    #[test]
    fn support_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = SupportSet::new([4, 0, 2], 5).unwrap();
        write_support_csv(&s, &path).unwrap();
        assert_eq!(read_support_csv(&path, 5).unwrap(), s);
        assert!(read_support_csv(&path, 4).is_err());
    }
}
