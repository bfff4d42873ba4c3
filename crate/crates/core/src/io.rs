//! File formats: the JSON IFS document, flat `key = value` reports and CSV
//! rows with 17 significant digits.
//!
//! ```json
//! { "name": "sierpinski",
//!   "dimension": 2,
//!   "maps": [ { "matrix": [[0.5, 0.0], [0.0, 0.5]], "translation": [0.0, 0.0] } ] }
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affine::{validate_ifs, AffineIfs, AffineMap};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IfsDocument {
    name: String,
    dimension: usize,
    maps: Vec<MapDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDocument {
    matrix: Vec<Vec<f64>>,
    translation: Vec<f64>,
}

/// Formats `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// 1-based line of the `index`-th occurrence of `"matrix"` in the text, or of
/// the `"maps"` key when there are fewer occurrences.
fn map_line(text: &str, index: usize) -> usize {
    let line_of = |offset: usize| text[..offset].matches('\n').count() + 1;
    text.match_indices("\"matrix\"")
        .nth(index)
        .map(|(o, _)| line_of(o))
        .or_else(|| text.find("\"maps\"").map(line_of))
        .unwrap_or(1)
}

/// Parses an IFS document without running [`validate_ifs`].
pub fn parse_ifs_str(text: &str) -> Result<AffineIfs> {
    let doc: IfsDocument =
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line().max(1), message: e.to_string() })?;
    let d = doc.dimension;
    if !(1..=crate::linalg::MAX_DIM).contains(&d) {
        return Err(Error::Parse {
            line: text.find("\"dimension\"").map(|o| text[..o].matches('\n').count() + 1).unwrap_or(1),
            message: format!("dimension {d} outside supported range 1..={}", crate::linalg::MAX_DIM),
        });
    }
    if doc.maps.is_empty() {
        return Err(Error::Parse { line: map_line(text, 0), message: "no maps".into() });
    }
    let mut maps = Vec::with_capacity(doc.maps.len());
    for (i, m) in doc.maps.iter().enumerate() {
        let fail = |message: String| Error::Parse { line: map_line(text, i), message: format!("map {i}: {message}") };
        if m.matrix.len() != d {
            return Err(fail(format!("matrix has {} rows, expected {d}", m.matrix.len())));
        }
        if let Some((r, row)) = m.matrix.iter().enumerate().find(|(_, row)| row.len() != d) {
            return Err(fail(format!("matrix row {r} has length {}, expected {d}", row.len())));
        }
        if m.translation.len() != d {
            return Err(fail(format!("translation has length {}, expected {d}", m.translation.len())));
        }
        let matrix = Matrix::from_rows(&m.matrix).map_err(|e| fail(e.to_string()))?;
        maps.push(AffineMap::new(matrix, m.translation.clone()));
    }
    AffineIfs::new(doc.name, maps).map_err(|e| Error::Parse { line: 1, message: e.to_string() })
}

/// Reads, parses and validates an IFS file.
pub fn parse_ifs_file(path: impl AsRef<Path>) -> Result<AffineIfs> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let ifs = parse_ifs_str(&text)?;
    validate_ifs(&ifs).map_err(|e| {
        let line = match &e {
            Error::NotContractive { index, .. } => map_line(&text, *index),
            Error::InvalidIfs(msg) => msg
                .strip_prefix("map ")
                .and_then(|rest| rest.split_whitespace().next())
                .and_then(|idx| idx.parse().ok())
                .map(|idx| map_line(&text, idx))
                .unwrap_or(1),
            _ => 1,
        };
        Error::Parse { line, message: e.to_string() }
    })?;
    Ok(ifs)
}

/// Pretty-printed JSON; floats use the shortest round-trip representation.
pub fn ifs_to_json(ifs: &AffineIfs) -> String {
    let doc = IfsDocument {
        name: ifs.name().to_string(),
        dimension: ifs.dim(),
        maps: ifs
            .maps()
            .iter()
            .map(|m| MapDocument { matrix: m.matrix.rows(), translation: m.translation.clone() })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("IFS document serializes");
    out.push('\n');
    out
}

/// Ordered `key = value` report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvReport {
    entries: Vec<(String, String)>,
}

impl KvReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, fmt17(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Parse { line: i + 1, message: "expected `key = value`".into() })?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }
}

/// `t,n,P_n` rows.
pub fn pressure_csv(rows: &[(f64, usize, f64)]) -> String {
    let mut out = String::from("t,n,P_n\n");
    for (t, n, p) in rows {
        writeln!(out, "{},{n},{}", fmt17(*t), fmt17(*p)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{
  "name": "cantor",
  "dimension": 1,
  "maps": [
    { "matrix": [[0.3333333333333333]], "translation": [0.0] },
    { "matrix": [[0.3333333333333333]], "translation": [0.6666666666666666] }
  ]
}"#;

    #[test]
    fn parses_minimal_document() {
        let ifs = parse_ifs_str(MINIMAL).unwrap();
        assert_eq!(ifs.dim(), 1);
        assert_eq!(ifs.len(), 2);
        assert_eq!(ifs.name(), "cantor");
    }

    #[test]
    fn row_length_error_names_map() {
        let text = r#"{
  "name": "bad",
  "dimension": 2,
  "maps": [
    { "matrix": [[0.5, 0.0], [0.0, 0.5]], "translation": [0.0, 0.0] },
    { "matrix": [[0.5, 0.0, 0.1], [0.0, 0.5]], "translation": [1.0, 0.0] }
  ]
}"#;
        match parse_ifs_str(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("map 1"), "{message}");
                assert!(message.contains("row 0"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let text = "{\n  \"name\": \"x\",\n  \"dimension\": 1,\n  \"maps\": [ oops ]\n}";
        assert!(matches!(parse_ifs_str(text), Err(Error::Parse { line: 4, .. })));
        let unknown = "{\"name\":\"x\",\"dimension\":1,\"maps\":[],\"extra\":1}";
        assert!(parse_ifs_str(unknown).is_err());
    }

    #[test]
    fn file_validation_rejects_singular() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(
            &path,
            r#"{"name":"s","dimension":2,"maps":[
{"matrix":[[0.2,0.4],[0.1,0.2]],"translation":[0,0]},
{"matrix":[[0.3,0],[0,0.3]],"translation":[1,0]}]}"#,
        )
        .unwrap();
        match parse_ifs_file(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("singular"));
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, MINIMAL).unwrap();
        assert!(parse_ifs_file(&path).is_ok());
        assert!(matches!(parse_ifs_file(dir.path().join("missing.json")), Err(Error::Io(_))));
    }

    #[test]
    fn kv_report_round_trip() {
        let mut r = KvReport::new();
        r.push("tool", "affinity 0.1.0").push_f64("value", 0.1);
        let text = r.render();
        assert_eq!(text, "tool = affinity 0.1.0\nvalue = 1.0000000000000001e-1\n");
        assert_eq!(KvReport::parse(&text).unwrap(), r);
        assert_eq!(r.get("value"), Some("1.0000000000000001e-1"));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, std::f64::consts::PI, -1e-300, 123456.789] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(pressure_csv(&[(1.0, 2, -0.5)]), "t,n,P_n\n1.0000000000000000e0,2,-5.0000000000000000e-1\n");
    }

    fn ifs_strategy() -> impl Strategy<Value = AffineIfs> {
        (1usize..=4, 2usize..5).prop_flat_map(|(d, count)| {
            proptest::collection::vec(
                (proptest::collection::vec(-1.0f64..1.0, d * d), proptest::collection::vec(-10.0f64..10.0, d)),
                count,
            )
            .prop_map(move |maps| {
                let maps = maps
                    .into_iter()
                    .map(|(entries, translation)| {
                        let rows: Vec<Vec<f64>> = entries.chunks(d).map(|c| c.to_vec()).collect();
                        AffineMap::new(Matrix::from_rows(&rows).unwrap(), translation)
                    })
                    .collect();
                AffineIfs::new("generated", maps).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(ifs in ifs_strategy()) {
            let back = parse_ifs_str(&ifs_to_json(&ifs)).unwrap();
            prop_assert_eq!(back.content_hash(), ifs.content_hash());
            prop_assert_eq!(back, ifs);
        }
    }
}
