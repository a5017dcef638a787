//! Observed-data files for `lppg solve`.
//!
//! CSV form: comment lines `# dims: 31 31` (required) and `# rows: 16 16`
//! (optional), then `index,re,im` rows. JSON form:
//! `{"dims": [31, 31], "rows": [16, 16], "entries": [[index, re, im], ...]}`.
//! Indices are linear, column-major with level 1 fastest.

use std::path::Path;

use lppg_core::model::{ObservedData, SampleMask};
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct SignalFile {
    pub dims: Vec<usize>,
    pub rows: Option<Vec<usize>>,
    pub data: ObservedData,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonFile {
    dims: Vec<usize>,
    #[serde(default)]
    rows: Option<Vec<usize>>,
    entries: Vec<(usize, f64, f64)>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn build(dims: Vec<usize>, rows: Option<Vec<usize>>, mut entries: Vec<(usize, f64, f64)>) -> Result<SignalFile, CliError> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(bad("dims must list positive sizes"));
    }
    let len: usize = dims.iter().product();
    entries.sort_by_key(|e| e.0);
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(bad(format!("index {} appears twice", w[0].0)));
    }
    if entries.iter().any(|e| !e.1.is_finite() || !e.2.is_finite()) {
        return Err(bad("sample values must be finite"));
    }
    let mask = SampleMask::new(entries.iter().map(|e| e.0).collect(), len).map_err(|e| bad(e.to_string()))?;
    let values: Vec<Complex64> = entries.iter().map(|e| Complex64::new(e.1, e.2)).collect();
    let data = ObservedData::from_values(mask, &values).map_err(|e| bad(e.to_string()))?;
    Ok(SignalFile { dims, rows, data })
}

fn parse_header_list(line: &str, key: &str) -> Option<Result<Vec<usize>, CliError>> {
    let rest = line.trim_start_matches('#').trim();
    let value = rest.strip_prefix(key)?.trim_start().strip_prefix(':')?;
    Some(
        value
            .split(|c: char| c == ',' || c.is_whitespace() || c == 'x')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad {key} entry {s:?}"))))
            .collect(),
    )
}

pub fn parse_csv(text: &str) -> Result<SignalFile, CliError> {
    let mut dims = None;
    let mut rows = None;
    let mut body = String::new();
    for line in text.lines() {
        if line.trim_start().starts_with('#') {
            if let Some(d) = parse_header_list(line, "dims") {
                dims = Some(d?);
            } else if let Some(r) = parse_header_list(line, "rows") {
                rows = Some(r?);
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let dims = dims.ok_or_else(|| bad("missing `# dims:` header"))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "re", "im"] {
        return Err(bad(format!("expected columns index,re,im, found {:?}", headers)));
    }
    let entries = reader
        .deserialize::<(usize, f64, f64)>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(e.to_string()))?;
    build(dims, rows, entries)
}

pub fn parse_json(text: &str) -> Result<SignalFile, CliError> {
    let f: JsonFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    build(f.dims, f.rows, f.entries)
}

/// Reads a signal file, choosing the format from the extension (`.json`, else CSV).
pub fn read_signal_file(path: &Path) -> Result<SignalFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => parse_json(&text),
        _ => parse_csv(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let csv = "# dims: 3 2\n# rows: 2 1\nindex,re,im\n4,1.5,-2\n0, 1, 0\n";
        let json = r#"{"dims": [3, 2], "rows": [2, 1], "entries": [[0, 1, 0], [4, 1.5, -2]]}"#;
        let a = parse_csv(csv).unwrap();
        let b = parse_json(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data.mask.indices(), &[0, 4]);
        assert_eq!(a.data.samples[4], Complex64::new(1.5, -2.0));
        assert_eq!(a.rows, Some(vec![2, 1]));
    }

    #[test]
    fn rejects_malformed_files() {
        for text in [
            "index,re,im\n0,1,0\n",
            "# dims: 4\nindex,re,im\n4,1,0\n",
            "# dims: 4\nindex,re,im\n1,1,0\n1,2,0\n",
            "# dims: 4\ni,re,im\n1,1,0\n",
            "# dims: 4\nindex,re,im\n",
            "# dims: 4\nindex,re,im\n1,NaN,0\n",
        ] {
            assert_eq!(parse_csv(text).unwrap_err().exit_code(), 1, "{text}");
        }
        assert!(parse_json(r#"{"dims": [4], "entries": [[7, 0, 0]]}"#).is_err());
    }
}
