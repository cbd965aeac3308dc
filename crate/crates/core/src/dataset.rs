//! Labeled clips and the dataset manifest.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use crate::audio::{read_wav, Waveform};
use crate::error::{Error, Result};

pub const N_FOLDS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Original,
    ClassicalAug,
    Gan,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::ClassicalAug => "classical_aug",
            Origin::Gan => "gan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Origin::Original),
            "classical_aug" => Ok(Origin::ClassicalAug),
            "gan" => Ok(Origin::Gan),
            _ => Err(Error::Parameter(format!("unknown origin {s:?}"))),
        }
    }
}

/// A waveform with its class and fold. `id` is a stable name, usually the
/// file name.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub id: String,
    pub label: usize,
    pub fold: u8,
    pub origin: Origin,
    pub waveform: Waveform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: PathBuf,
    pub fold: u8,
    pub class_id: usize,
    pub class_name: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    /// Class names indexed by class id.
    pub fn class_names(&self) -> Vec<String> {
        let map: BTreeMap<usize, &str> = self.rows.iter().map(|r| (r.class_id, r.class_name.as_str())).collect();
        map.values().map(|s| s.to_string()).collect()
    }

    pub fn n_classes(&self) -> usize {
        self.rows.iter().map(|r| r.class_id + 1).max().unwrap_or(0)
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.class_name == name).map(|r| r.class_id)
    }

    /// Decode every row into a clip.
    pub fn load_clips(&self) -> Result<Vec<LabeledClip>> {
        self.rows
            .iter()
            .map(|r| {
                Ok(LabeledClip {
                    id: file_stem(&r.path),
                    label: r.class_id,
                    fold: r.fold,
                    origin: r.origin,
                    waveform: read_wav(&r.path)?,
                })
            })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["path", "fold", "classID", "class", "origin"])?;
        for r in &self.rows {
            w.write_record([
                r.path.to_string_lossy().as_ref(),
                &r.fold.to_string(),
                &r.class_id.to_string(),
                &r.class_name,
                r.origin.as_str(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a manifest written by [`DatasetManifest::write_csv`].
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).ok_or_else(|| Error::Validation(vec![format!("row {}: missing column {k}", i + 1)]));
            rows.push(ManifestRow {
                path: PathBuf::from(field(0)?),
                fold: parse_num(field(1)?, i + 1, "fold")?,
                class_id: parse_num(field(2)?, i + 1, "classID")?,
                class_name: field(3)?.to_string(),
                origin: Origin::parse(field(4)?)?,
            });
        }
        Ok(Self { rows })
    }
}

pub(crate) fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn parse_num<T: std::str::FromStr>(s: &str, row: usize, col: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Validation(vec![format!("row {row}: {col} {s:?} is not a valid number")]))
}

/// Validate a `slice_file_name,fold,classID,class` metadata CSV against the
/// audio files under `dataset_dir`. Files are looked up directly in
/// `dataset_dir` and then in `dataset_dir/fold<k>/`.
///
/// Every problem is collected; rows are numbered from 1 after the header.
pub fn ingest(dataset_dir: impl AsRef<Path>, manifest_csv: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dataset_dir.as_ref();
    let mut reader = csv::Reader::from_path(manifest_csv.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(c_file), Some(c_fold), Some(c_id), Some(c_class)) =
        (col("slice_file_name"), col("fold"), col("classID"), col("class"))
    else {
        return Err(Error::Validation(vec![
            "manifest needs columns slice_file_name, fold, classID, class".into(),
        ]));
    };

    let mut problems = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let get = |c: usize| rec.get(c).unwrap_or("").trim();
        let file = get(c_file);
        let fold = match get(c_fold).parse::<u8>() {
            Ok(f) if (1..=N_FOLDS).contains(&f) => Some(f),
            _ => {
                problems.push(format!("row {row}: fold {:?} outside 1..{N_FOLDS}", get(c_fold)));
                None
            }
        };
        let class_id = match get(c_id).parse::<usize>() {
            Ok(c) => Some(c),
            Err(_) => {
                problems.push(format!("row {row}: classID {:?} is not a class index", get(c_id)));
                None
            }
        };
        let class_name = get(c_class).to_string();
        if let Some(c) = class_id {
            match names.get(&c) {
                Some(n) if *n != class_name => {
                    problems.push(format!("row {row}: classID {c} named {class_name:?}, earlier {n:?}"))
                }
                None => {
                    names.insert(c, class_name.clone());
                }
                _ => {}
            }
        }
        if !seen.insert(file.to_string()) {
            problems.push(format!("row {row}: duplicate file {file:?}"));
        }
        let candidates = [Some(dir.join(file)), fold.map(|f| dir.join(format!("fold{f}")).join(file))];
        let path = candidates.into_iter().flatten().find(|p| p.is_file());
        if path.is_none() {
            problems.push(format!("row {row}: audio file {file:?} not found under {}", dir.display()));
        }
        if let (Some(path), Some(fold), Some(class_id)) = (path, fold, class_id) {
            rows.push(ManifestRow {
                path,
                fold,
                class_id,
                class_name,
                origin: Origin::Original,
            });
        }
    }
    if let Some((&max, _)) = names.last_key_value() {
        let missing: Vec<String> = (0..=max).filter(|c| !names.contains_key(c)).map(|c| c.to_string()).collect();
        if !missing.is_empty() {
            problems.push(format!("class ids are not dense; missing {}", missing.join(", ")));
        }
    }
    if rows.is_empty() && problems.is_empty() {
        problems.push("manifest has no rows".into());
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(DatasetManifest { rows })
}
