//! CSV dumps: `sample_id,score,label` for scores and `sample_id,label,f0..fK`
//! for features.

use std::fs;
use std::path::Path;

use super::{FeatureVector, MiaScore};
use crate::error::{Error, Result};

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn score_csv_bytes<'a>(rows: impl IntoIterator<Item = &'a MiaScore>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "score", "label"])?;
    for r in rows {
        w.write_record([r.sample_id.to_string(), r.score.to_string(), r.label.to_string()])?;
    }
    finish(w)
}

pub fn feature_csv_bytes<'a>(rows: impl IntoIterator<Item = (&'a FeatureVector, u8)>) -> Result<Vec<u8>> {
    let mut rows = rows.into_iter().peekable();
    let width = rows.peek().map(|(f, _)| f.values.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend((0..width).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for (f, label) in rows {
        if f.values.len() != width {
            return Err(Error::contract("feature vectors in one dump must share a length"));
        }
        let mut rec = vec![f.sample_id.to_string(), label.to_string()];
        rec.extend(f.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn write_score_csv<'a>(path: impl AsRef<Path>, rows: impl IntoIterator<Item = &'a MiaScore>) -> Result<()> {
    fs::write(path, score_csv_bytes(rows)?)?;
    Ok(())
}

pub fn write_feature_csv<'a>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = (&'a FeatureVector, u8)>,
) -> Result<()> {
    fs::write(path, feature_csv_bytes(rows)?)?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::format(Some(line), format!("cannot parse {what} from '{field}'")))
}

fn parse_label(field: &str, line: usize) -> Result<u8> {
    match field.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::format(Some(line), format!("label must be 0 or 1, got '{other}'"))),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    Ok(csv::ReaderBuilder::new().flexible(true).from_path(path)?)
}

pub fn read_score_csv(path: impl AsRef<Path>) -> Result<Vec<MiaScore>> {
    let mut rdr = reader(path.as_ref())?;
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["sample_id", "score", "label"] {
        return Err(Error::format(Some(1), "expected header sample_id,score,label"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(Some(line), e.to_string()))?;
        if rec.len() != 3 {
            return Err(Error::format(Some(line), format!("expected 3 fields, got {}", rec.len())));
        }
        let score: f64 = parse(&rec[1], line, "score")?;
        if !score.is_finite() {
            return Err(Error::format(Some(line), "score must be finite"));
        }
        out.push(MiaScore {
            sample_id: parse(&rec[0], line, "sample_id")?,
            score,
            label: parse_label(&rec[2], line)?,
        });
    }
    Ok(out)
}

pub fn read_feature_csv(path: impl AsRef<Path>, schema_id: &str) -> Result<Vec<(FeatureVector, u8)>> {
    let mut rdr = reader(path.as_ref())?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err(Error::format(Some(1), "expected header sample_id,label,f0.."));
    }
    let width = header.len() - 2;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(Some(line), e.to_string()))?;
        if rec.len() != width + 2 {
            return Err(Error::format(Some(line), format!("expected {} fields, got {}", width + 2, rec.len())));
        }
        let values = (2..rec.len())
            .map(|k| parse::<f64>(&rec[k], line, "feature"))
            .collect::<Result<Vec<_>>>()?;
        out.push((
            FeatureVector {
                sample_id: parse(&rec[0], line, "sample_id")?,
                values,
                schema_id: schema_id.to_string(),
            },
            parse_label(&rec[1], line)?,
        ));
    }
    Ok(out)
}

/// Sniffs whether a dump holds scores or features from its header.
pub fn is_feature_csv(path: impl AsRef<Path>) -> Result<bool> {
    let mut rdr = reader(path.as_ref())?;
    let header = rdr.headers()?;
    Ok(header.len() >= 2 && &header[1] == "label")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![
            MiaScore { sample_id: 3, score: 0.1 + 0.2, label: 1 },
            MiaScore { sample_id: 9, score: -1e-300, label: 0 },
        ];
        write_score_csv(&path, &rows).unwrap();
        assert_eq!(read_score_csv(&path).unwrap(), rows);
        assert!(!is_feature_csv(&path).unwrap());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        fs::write(&path, "sample_id,score,label\n1,0.5,1\n2,abc,0\n").unwrap();
        match read_score_csv(&path) {
            Err(Error::Format { line: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "sample_id,score,label\n1,0.5,2\n").unwrap();
        assert!(matches!(read_score_csv(&path), Err(Error::Format { line: Some(2), .. })));
    }

    #[test]
    fn feature_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = FeatureVector { sample_id: 4, values: vec![1.5, 2.0, -0.125], schema_id: "gsa1".into() };
        write_feature_csv(&path, [(&f, 1u8)]).unwrap();
        assert!(is_feature_csv(&path).unwrap());
        assert_eq!(read_feature_csv(&path, "gsa1").unwrap(), vec![(f, 1)]);
    }
}
