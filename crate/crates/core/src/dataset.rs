//! Labeled collections of equally shaped series, with CSV and JSONL I/O.
//!
//! CSV (univariate): one instance per line, `label,v1,...,vT`, no header.
//! JSONL (multivariate): one object per line,
//! `{"label": <int>, "channels": [[...], ...]}`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{validate_series, ClassId, Series};

/// On-disk dataset layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    CsvUni,
    JsonlMulti,
}

impl DatasetFormat {
    /// `.csv` maps to [`DatasetFormat::CsvUni`], `.jsonl`/`.json` to [`DatasetFormat::JsonlMulti`].
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(DatasetFormat::CsvUni),
            "jsonl" | "json" => Some(DatasetFormat::JsonlMulti),
            _ => None,
        }
    }
}

/// A nonempty list of `(Series, ClassId)` sharing one `(D, T)` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    instances: Vec<(Series, ClassId)>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(instances: Vec<(Series, ClassId)>, n_classes: usize) -> Result<Self> {
        let Some((first, _)) = instances.first() else {
            return Err(Error::BadParams("dataset is empty".into()));
        };
        let shape = first.shape();
        for (i, (s, label)) in instances.iter().enumerate() {
            if s.shape() != shape {
                return Err(Error::ShapeMismatch(i));
            }
            if *label >= n_classes {
                return Err(Error::LabelOutOfRange(i));
            }
        }
        Ok(LabeledDataset {
            instances,
            n_classes,
        })
    }

    /// Like [`LabeledDataset::new`] with `n_classes = max label + 1`.
    pub fn from_instances(instances: Vec<(Series, ClassId)>) -> Result<Self> {
        let n_classes = instances.iter().map(|(_, l)| l + 1).max().unwrap_or(0);
        Self::new(instances, n_classes)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// `(D, T)` shared by every instance.
    pub fn shape(&self) -> (usize, usize) {
        self.instances[0].0.shape()
    }

    pub fn get(&self, i: usize) -> Option<&(Series, ClassId)> {
        self.instances.get(i)
    }

    pub fn series(&self, i: usize) -> &Series {
        &self.instances[i].0
    }

    pub fn label(&self, i: usize) -> ClassId {
        self.instances[i].1
    }

    pub fn instances(&self) -> &[(Series, ClassId)] {
        &self.instances
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Series, ClassId)> {
        self.instances.iter()
    }

    pub fn labels(&self) -> Vec<ClassId> {
        self.instances.iter().map(|(_, l)| *l).collect()
    }

    /// Number of distinct labels present.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.n_classes];
        for (_, l) in &self.instances {
            seen[*l] = true;
        }
        seen.into_iter().filter(|s| *s).count()
    }

    /// Errors with [`Error::SingleClass`] unless two labels are present.
    pub fn require_two_classes(&self) -> Result<()> {
        if self.distinct_labels() < 2 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// Pointwise mean over all instances.
    pub fn mean_series(&self) -> Series {
        let (d, t) = self.shape();
        let mut acc = vec![0.0; d * t];
        for (s, _) in &self.instances {
            for (a, v) in acc.iter_mut().zip(s.values()) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Series::from_flat(d, t, acc).expect("mean of finite series is finite")
    }

    /// Applies `f` to every series, keeping labels.
    pub fn map_series(&self, f: impl Fn(&Series) -> Series) -> Self {
        LabeledDataset {
            instances: self.instances.iter().map(|(s, l)| (f(s), *l)).collect(),
            n_classes: self.n_classes,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    label: i64,
    channels: Vec<Vec<f64>>,
}

fn label_from_i64(v: i64, index: usize) -> Result<ClassId> {
    usize::try_from(v).map_err(|_| Error::LabelOutOfRange(index))
}

/// Parses dataset text in the given format.
pub fn parse_dataset(text: &str, format: DatasetFormat) -> Result<LabeledDataset> {
    let mut instances = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let index = instances.len();
        let parse_err = |msg: String| Error::ParseError { line: line_no, msg };
        let (rows, label) = match format {
            DatasetFormat::CsvUni => {
                let mut fields = line.split(',').map(str::trim);
                let label_txt = fields.next().unwrap_or_default();
                let label: i64 = label_txt
                    .parse()
                    .map_err(|_| parse_err(format!("bad label {label_txt:?}")))?;
                let values = fields
                    .map(|f| {
                        f.parse::<f64>()
                            .map_err(|_| parse_err(format!("bad value {f:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (vec![values], label)
            }
            DatasetFormat::JsonlMulti => {
                let rec: JsonlRecord =
                    serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
                (rec.channels, rec.label)
            }
        };
        let label = label_from_i64(label, index)?;
        let series = validate_series(&rows).map_err(|e| parse_err(e.to_string()))?;
        if let Some((first, _)) = instances.first() {
            if !series.same_shape(first) {
                return Err(Error::ShapeMismatch(index));
            }
        }
        instances.push((series, label));
    }
    if instances.is_empty() {
        return Err(Error::ParseError {
            line: 1,
            msg: "no instances".into(),
        });
    }
    LabeledDataset::from_instances(instances)
}

/// Reads a dataset file.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, format)
}

/// Serializes a dataset. Floats use the shortest round-trip representation,
/// so [`parse_dataset`] restores every value bit for bit.
pub fn format_dataset(ds: &LabeledDataset, format: DatasetFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        DatasetFormat::CsvUni => {
            if ds.shape().0 != 1 {
                return Err(Error::BadParams(
                    "CSV format holds univariate series only".into(),
                ));
            }
            for (s, l) in ds.iter() {
                write!(out, "{l}").unwrap();
                for v in s.row(0) {
                    write!(out, ",{v:?}").unwrap();
                }
                out.push('\n');
            }
        }
        DatasetFormat::JsonlMulti => {
            for (s, l) in ds.iter() {
                let rec = JsonlRecord {
                    label: *l as i64,
                    channels: s.to_rows(),
                };
                out.push_str(&serde_json::to_string(&rec).expect("finite values serialize"));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Writes a dataset file.
pub fn save_dataset(ds: &LabeledDataset, path: &Path, format: DatasetFormat) -> Result<()> {
    fs::write(path, format_dataset(ds, format)?)?;
    Ok(())
}
