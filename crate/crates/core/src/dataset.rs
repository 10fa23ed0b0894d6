//! Handwritten-digits CSV ingestion.
//!
//! One image per line: 64 comma-separated integers in `[0, 16]` followed by an
//! integer label. A non-numeric first line is treated as a header. Intensities
//! are mapped to 16 levels by clipping 16 to 15.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::encoding::{Database, ImageData};
use crate::error::{Error, Result};

pub const DIGIT_PIXELS: usize = 64;
pub const DIGIT_LEVELS: u32 = 16;
const RAW_MAX: u32 = 16;

/// Ten rows of the UCI optical-digits data, one per label 0..=9.
pub const BUILTIN_DIGITS_CSV: &str = include_str!("../data/digits_0_9.csv");

/// First image seen for each label.
#[derive(Clone, Debug, Default)]
pub struct DigitsSet {
    representatives: BTreeMap<u32, ImageData>,
    rows: usize,
}

impl DigitsSet {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_DIGITS_CSV.as_bytes()).expect("bundled digits CSV is well-formed")
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut set = DigitsSet::default();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 1;
            if i == 0 && record.iter().any(|f| f.trim().parse::<f64>().is_err()) {
                continue;
            }
            if record.len() != DIGIT_PIXELS + 1 {
                return Err(Error::Dataset {
                    line,
                    msg: format!("expected {} fields, found {}", DIGIT_PIXELS + 1, record.len()),
                });
            }
            let parse = |s: &str| -> Result<u32> {
                let v: f64 = s.trim().parse().map_err(|_| Error::Dataset {
                    line,
                    msg: format!("non-numeric field {s:?}"),
                })?;
                if v.fract() != 0.0 || v < 0.0 {
                    return Err(Error::Dataset {
                        line,
                        msg: format!("field {s:?} is not a non-negative integer"),
                    });
                }
                Ok(v as u32)
            };
            let mut pixels = Vec::with_capacity(DIGIT_PIXELS);
            for field in record.iter().take(DIGIT_PIXELS) {
                let g = parse(field)?;
                if g > RAW_MAX {
                    return Err(Error::Dataset {
                        line,
                        msg: format!("pixel value {g} outside [0, {RAW_MAX}]"),
                    });
                }
                pixels.push(g.min(DIGIT_LEVELS - 1));
            }
            let label = parse(&record[DIGIT_PIXELS])?;
            set.rows += 1;
            set.representatives
                .entry(label)
                .or_insert(ImageData::new(pixels, DIGIT_LEVELS)?);
        }
        Ok(set)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn labels(&self) -> Vec<u32> {
        self.representatives.keys().copied().collect()
    }

    pub fn image(&self, label: u32) -> Result<&ImageData> {
        self.representatives
            .get(&label)
            .ok_or_else(|| Error::InvalidArgument(format!("no image with label {label}")))
    }

    /// Database whose index `k` holds the representative of `labels[k]`.
    pub fn database(&self, labels: &[u32]) -> Result<Database> {
        let images = labels
            .iter()
            .map(|&l| self.image(l).cloned())
            .collect::<Result<Vec<_>>>()?;
        Database::new(images, Some(labels.iter().map(|l| l.to_string()).collect()))
    }
}

/// Loads a digits CSV and returns the database of digits 0..=7.
pub fn load_digits_csv(path: impl AsRef<Path>) -> Result<Database> {
    DigitsSet::from_path(path)?.database(&[0, 1, 2, 3, 4, 5, 6, 7])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn row(pixels: &[u32], label: u32) -> String {
        let mut s: Vec<String> = pixels.iter().map(|p| p.to_string()).collect();
        s.push(label.to_string());
        s.join(",")
    }

    #[test]
    fn zero_row_is_black() {
        let set = DigitsSet::from_reader(row(&[0; 64], 0).as_bytes()).unwrap();
        let img = set.image(0).unwrap();
        assert!(img.intensities().iter().all(|&g| g == 0));
        assert_eq!((img.n_pixels(), img.pixel_qubits()), (64, 6));
    }

    #[test]
    fn ten_labels_give_eight_image_database() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for label in 0..10 {
            writeln!(f, "{}", row(&[label; 64], label)).unwrap();
        }
        let db = load_digits_csv(f.path()).unwrap();
        assert_eq!(db.len(), 8);
        for (k, img) in db.images().iter().enumerate() {
            assert_eq!(img.intensities()[0], k as u32);
            assert_eq!(db.labels()[k], k.to_string());
        }
    }

    #[test]
    fn header_skipped_and_sixteen_clipped() {
        let mut text = String::from("p0");
        for j in 1..64 {
            text.push_str(&format!(",p{j}"));
        }
        text.push_str(",label\n");
        text.push_str(&row(&[16; 64], 3));
        let set = DigitsSet::from_reader(text.as_bytes()).unwrap();
        assert!(set.image(3).unwrap().intensities().iter().all(|&g| g == 15));
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(matches!(
            DigitsSet::from_reader(row(&[0; 10], 0).as_bytes()),
            Err(Error::Dataset { line: 1, .. })
        ));
        let bad = format!("{}\n{}", row(&[0; 64], 0), row(&[17; 64], 1));
        assert!(matches!(
            DigitsSet::from_reader(bad.as_bytes()),
            Err(Error::Dataset { line: 2, .. })
        ));
    }

    #[test]
    fn builtin_has_all_digits() {
        let set = DigitsSet::builtin();
        assert_eq!(set.labels(), (0..10).collect::<Vec<_>>());
        assert_eq!(set.rows(), 10);
    }
}
