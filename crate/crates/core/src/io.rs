//! Dataset and score-file formats.
//!
//! * CSV, one file per series: header `t,x0[,x1,...][,label]`, with an
//!   optional sidecar `<id>.meta.json` (or a directory-wide `meta.json`)
//!   holding `{"train_end": int}`.
//! * ndjson: one object per line,
//!   `{"id", "values": [[...]], "labels": [...], "train_end": int}`.
//! * Score files: CSV `t,score[,pred0,...]` named `<model_id>__<series_id>.csv`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/load cycle reproduces every value bit for bit.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Dataset, ModelOutput, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Csv,
    Ndjson,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "ndjson" | "jsonl" => Ok(DataFormat::Ndjson),
            other => Err(Error::Config(format!("unknown data format '{other}'"))),
        }
    }
}

impl DataFormat {
    fn extensions(self) -> &'static [&'static str] {
        match self {
            DataFormat::Csv => &["csv"],
            DataFormat::Ndjson => &["ndjson", "jsonl"],
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Meta {
    train_end: usize,
}

/// Loads a dataset from a single file or a directory of files.
///
/// Series ids come from file stems for CSV, and from the `"id"` field for
/// ndjson (falling back to the file stem). Series keep file-name order.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    let name = stem(path);
    let files = if path.is_dir() {
        list_files(path, format.extensions())?
    } else if path.exists() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::missing(format!("dataset path {}", path.display())));
    };
    if files.is_empty() {
        return Err(Error::missing(format!(
            "{format:?} files in {}",
            path.display()
        )));
    }
    let mut series = Vec::new();
    for file in &files {
        match format {
            DataFormat::Csv => series.push(read_csv_series(file)?),
            DataFormat::Ndjson => series.extend(read_ndjson_file(file)?),
        }
    }
    Dataset::new(name, series)
}

/// Writes `dataset` so that [`load_dataset`] reproduces it exactly.
///
/// CSV goes to a directory (one file per series plus meta sidecars); ndjson
/// goes to a single file.
pub fn write_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Csv => {
            fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
            for s in &dataset.series {
                write_csv_series(s, &path.join(format!("{}.csv", s.id)))?;
            }
            Ok(())
        }
        DataFormat::Ndjson => {
            let mut out = String::new();
            for s in &dataset.series {
                out.push_str(&serde_json::to_string(&NdjsonSeries::from(s))?);
                out.push('\n');
            }
            write_file(path, &out)
        }
    }
}

/// Writes one series as CSV, plus `<stem>.meta.json` when it has a train segment.
pub fn write_csv_series(series: &TimeSeries, path: &Path) -> Result<()> {
    let d = series.dim();
    let mut out = String::from("t");
    for j in 0..d {
        out.push_str(&format!(",x{j}"));
    }
    if series.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (t, row) in series.values.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        if let Some(labels) = &series.labels {
            out.push(',');
            out.push_str(&labels[t].to_string());
        }
        out.push('\n');
    }
    write_file(path, &out)?;
    if let Some(te) = series.train_end {
        let meta = path.with_file_name(format!("{}.meta.json", stem(path)));
        write_file(&meta, &serde_json::to_string(&Meta { train_end: te })?)?;
    }
    Ok(())
}

fn read_csv_series(path: &Path) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::parse(
            path,
            1,
            "header must start with 't' followed by value columns",
        ));
    }
    let has_label = cols.last() == Some(&"label");
    let d = cols.len() - 1 - usize::from(has_label);
    if d == 0 {
        return Err(Error::parse(path, 1, "no value columns"));
    }
    for (j, c) in cols[1..=d].iter().enumerate() {
        if *c != format!("x{j}") {
            return Err(Error::parse(
                path,
                1,
                format!("expected column 'x{j}', found '{c}'"),
            ));
        }
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", cols.len(), rec.len()),
            ));
        }
        rec[0]
            .parse::<i64>()
            .map_err(|_| Error::parse(path, line, format!("bad time index '{}'", &rec[0])))?;
        let mut row = Vec::with_capacity(d);
        for field in rec.iter().skip(1).take(d) {
            row.push(parse_finite(field).map_err(|m| Error::parse(path, line, m))?);
        }
        values.push(row);
        if has_label {
            labels.push(parse_label(&rec[d + 1]).map_err(|m| Error::parse(path, line, m))?);
        }
    }
    if values.is_empty() {
        return Err(Error::parse(path, 2, "no observations"));
    }
    let train_end = read_meta(path)?;
    let labels = has_label.then_some(labels);
    TimeSeries::new(stem(path), values, labels, train_end)
        .map_err(|e| Error::parse(path, 0, e.to_string()))
}

fn read_meta(csv_path: &Path) -> Result<Option<usize>> {
    let own = csv_path.with_file_name(format!("{}.meta.json", stem(csv_path)));
    let shared = csv_path.with_file_name("meta.json");
    for meta in [own, shared] {
        if meta.is_file() {
            let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
            let m: Meta = serde_json::from_str(&text)
                .map_err(|e| Error::parse(&meta, e.line(), e.to_string()))?;
            return Ok(Some(m.train_end));
        }
    }
    Ok(None)
}

#[derive(Debug, Serialize, Deserialize)]
struct NdjsonSeries {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    values: NdValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_end: Option<usize>,
}

/// Accepts `[[..],[..]]` and, for univariate data, a flat `[..]`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NdValues {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl From<&TimeSeries> for NdjsonSeries {
    fn from(s: &TimeSeries) -> Self {
        NdjsonSeries {
            id: Some(s.id.clone()),
            values: NdValues::Rows(s.values.clone()),
            labels: s.labels.clone(),
            train_end: s.train_end,
        }
    }
}

fn read_ndjson_file(path: &Path) -> Result<Vec<TimeSeries>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let single = lines.len() == 1;
    let mut out = Vec::with_capacity(lines.len());
    for (k, (line, body)) in lines.into_iter().enumerate() {
        // Non-finite numbers are not valid JSON, so "NaN" fails here with a line number.
        let rec: NdjsonSeries =
            serde_json::from_str(body).map_err(|e| Error::parse(path, line, e.to_string()))?;
        let id = rec.id.unwrap_or_else(|| {
            if single {
                stem(path)
            } else {
                format!("{}_{k}", stem(path))
            }
        });
        let values = match rec.values {
            NdValues::Rows(rows) => rows,
            NdValues::Flat(v) => v.into_iter().map(|x| vec![x]).collect(),
        };
        let s = TimeSeries::new(id, values, rec.labels, rec.train_end)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(s);
    }
    Ok(out)
}

/// Serializes one series as an ndjson line with extra annotation fields.
pub fn ndjson_line(series: &TimeSeries, extra: &[(&str, serde_json::Value)]) -> Result<String> {
    let mut v = serde_json::to_value(NdjsonSeries::from(series))?;
    if let serde_json::Value::Object(map) = &mut v {
        for (k, val) in extra {
            map.insert((*k).to_string(), val.clone());
        }
    }
    Ok(serde_json::to_string(&v)?)
}

/// Splits `<model_id>__<series_id>.csv` at the first `__`.
pub fn parse_score_file_name(path: &Path) -> Option<(String, String)> {
    let name = path.file_name()?.to_str()?;
    let base = name.strip_suffix(".csv")?;
    let (model, series) = base.split_once("__")?;
    if model.is_empty() || series.is_empty() {
        return None;
    }
    Some((model.to_string(), series.to_string()))
}

pub fn score_file_name(model_id: &str, series_id: &str) -> String {
    format!("{model_id}__{series_id}.csv")
}

/// Reads a score file; lengths are checked later against the series.
pub fn read_score_file(path: &Path) -> Result<ModelOutput> {
    let (model_id, series_id) = parse_score_file_name(path).ok_or_else(|| {
        Error::parse(
            path,
            0,
            "score file name must be <model_id>__<series_id>.csv",
        )
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 2 || cols[0] != "t" || cols[1] != "score" {
        return Err(Error::parse(path, 1, "header must be t,score[,pred0,...]"));
    }
    let d = cols.len() - 2;
    for (j, c) in cols[2..].iter().enumerate() {
        if *c != format!("pred{j}") {
            return Err(Error::parse(
                path,
                1,
                format!("expected column 'pred{j}', found '{c}'"),
            ));
        }
    }
    let mut scores = Vec::new();
    let mut preds = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", cols.len(), rec.len()),
            ));
        }
        let s = parse_finite(&rec[1]).map_err(|m| Error::parse(path, line, m))?;
        if s < 0.0 {
            return Err(Error::parse(path, line, format!("negative score {s}")));
        }
        scores.push(s);
        if d > 0 {
            let row = rec
                .iter()
                .skip(2)
                .map(parse_finite)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|m| Error::parse(path, line, m))?;
            preds.push(row);
        }
    }
    Ok(ModelOutput {
        model_id,
        series_id,
        scores,
        predictions: (d > 0).then_some(preds),
    })
}

/// Writes `output` as `<dir>/<model_id>__<series_id>.csv`; `t` counts from
/// `t_offset` (the test-segment start of the series).
pub fn write_score_file(output: &ModelOutput, dir: &Path, t_offset: usize) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(score_file_name(&output.model_id, &output.series_id));
    let d = output
        .predictions
        .as_ref()
        .and_then(|p| p.first())
        .map_or(0, Vec::len);
    let mut out = String::from("t,score");
    for j in 0..d {
        out.push_str(&format!(",pred{j}"));
    }
    out.push('\n');
    for (i, s) in output.scores.iter().enumerate() {
        out.push_str(&format!("{},{s}", t_offset + i));
        if let Some(p) = &output.predictions {
            for v in &p[i] {
                out.push(',');
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    write_file(&path, &out)?;
    Ok(path)
}

/// Regular files in `dir` with one of `exts`, sorted by name.
pub fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| exts.contains(&e))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

fn parse_finite(field: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("bad number '{field}'"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value '{field}'"))
    }
}

fn parse_label(field: &str) -> std::result::Result<u8, String> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("label '{other}' outside {{0,1}}")),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_single_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "s1.csv",
            "t,x0,label\n0,1.0,0\n1,2.0,0\n2,3.5,1\n3,1.0,0\n4,0.5,0\n5,2.0,0\n",
        );
        let ds = load_dataset(&p, DataFormat::Csv).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.series[0].len(), 6);
        assert_eq!(ds.series[0].id, "s1");
        assert_eq!(ds.series[0].labels.as_ref().unwrap()[2], 1);
        assert_eq!(ds.series[0].train_end, None);
    }

    #[test]
    fn nan_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "t,x0\n0,1.0\n1,NaN\n");
        let err = load_dataset(&p, DataFormat::Csv).unwrap_err().to_string();
        assert!(err.contains("s.csv:3"), "{err}");
    }

    #[test]
    fn bad_label_and_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "t,x0,label\n0,1.0,2\n");
        assert!(load_dataset(&p, DataFormat::Csv)
            .unwrap_err()
            .to_string()
            .contains("label"));
        let p = write(dir.path(), "b.csv", "t,x0,x1\n0,1.0,2.0\n1,1.0\n");
        assert!(load_dataset(&p, DataFormat::Csv)
            .unwrap_err()
            .to_string()
            .contains("b.csv:3"));
    }

    #[test]
    fn meta_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "s.csv", "t,x0\n0,1\n1,2\n2,3\n");
        write(dir.path(), "s.meta.json", "{\"train_end\": 2}");
        let ds = load_dataset(dir.path(), DataFormat::Csv).unwrap();
        assert_eq!(ds.series[0].train_end, Some(2));
    }

    #[test]
    fn ndjson_directory_ids_from_filenames() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a", "b", "c"] {
            write(
                dir.path(),
                &format!("{name}.ndjson"),
                "{\"values\": [[1.0],[2.0],[3.0]], \"labels\": [0,1,0]}\n",
            );
        }
        let ds = load_dataset(dir.path(), DataFormat::Ndjson).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.ids().collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn score_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let out = ModelOutput {
            model_id: "ma_h4".into(),
            series_id: "s_1".into(),
            scores: vec![0.0, 0.1, 1e-300],
            predictions: Some(vec![vec![1.0, 2.0], vec![0.1 + 0.2, -3.0], vec![5.0, 6.0]]),
        };
        let p = write_score_file(&out, dir.path(), 10).unwrap();
        assert_eq!(p.file_name().unwrap(), "ma_h4__s_1.csv");
        assert_eq!(read_score_file(&p).unwrap(), out);
    }

    #[test]
    fn negative_score_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m__s.csv", "t,score\n0,1.0\n1,-0.5\n");
        assert!(read_score_file(&p)
            .unwrap_err()
            .to_string()
            .contains("m__s.csv:3"));
    }
}
