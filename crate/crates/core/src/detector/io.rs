//! `scores.csv` and `thresholds.json`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Provenance, ThresholdModel};
use crate::error::{Error, Result};
use crate::transforms::{Family, SUITE_LEN};

/// One scored image: id (split/source/index), provenance, class label and
/// the nine divergence scores in suite order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub image_id: String,
    pub source: Provenance,
    pub label: usize,
    pub scores: [f64; SUITE_LEN],
}

pub fn scores_csv_header() -> Vec<&'static str> {
    let mut h = vec!["image_id", "source", "label"];
    h.extend(Family::ALL.iter().map(|f| f.column()));
    h
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}

pub fn write_scores_csv<W: Write>(w: W, rows: &[ScoreRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(scores_csv_header()).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.image_id.clone(), r.source.name().to_string(), r.label.to_string()];
        rec.extend(r.scores.iter().map(f64::to_string));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::format(format!("csv: {e}")))
}

pub fn read_scores_csv<R: Read>(r: R) -> Result<Vec<ScoreRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != scores_csv_header() {
        return Err(Error::format(format!("unexpected scores header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::format(format!("bad score `{}`", &rec[i])))
        };
        let mut scores = [0.0; SUITE_LEN];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = num(3 + j)?;
        }
        rows.push(ScoreRow {
            image_id: rec[0].to_string(),
            source: Provenance::parse(&rec[1])?,
            label: rec[2].parse().map_err(|_| Error::format(format!("bad label `{}`", &rec[2])))?,
            scores,
        });
    }
    Ok(rows)
}

/// Contents of `thresholds.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub config_hash: String,
    pub seed: u64,
    /// One detector per suite entry, in suite order.
    pub detectors: Vec<ThresholdModel>,
    /// Detectors for the wider parameter sweep, when it was run.
    #[serde(default)]
    pub sweep: Vec<ThresholdModel>,
}

pub fn write_thresholds(path: &Path, set: &ThresholdSet) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(set)?).map_err(|e| Error::io(path, e))
}

pub fn read_thresholds(path: &Path) -> Result<ThresholdSet> {
    Ok(serde_json::from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_round_trip_exactly() {
        let rows = vec![
            ScoreRow {
                image_id: "train/benign/0001".into(),
                source: Provenance::Benign,
                label: 3,
                scores: [0.1, 1e-17, 0.0, 3.25, 7.0, 0.333_333_333_333_333_3, 1e300, 2.0, 0.5],
            },
            ScoreRow {
                image_id: "test/cw/0000".into(),
                source: Provenance::Cw,
                label: 9,
                scores: [1.0; SUITE_LEN],
            },
        ];
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "image_id,source,label,noise,smoothing,bitdepth,featurefilter,translation,flip,rotation,shear,scale\n"
        ));
        assert_eq!(read_scores_csv(buf.as_slice()).unwrap(), rows);
    }
}
