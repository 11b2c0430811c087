//! Deterministic artifact files and the hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kicked_rotor::series::ObservableSeries;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::CliError;

pub const ARTIFACT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const SERIES_HEADER: [&str; 3] = ["time_dimensionless", "time_ps", "value"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: u32,
    pub config_hash: String,
    /// File name to SHA-256.
    pub files: BTreeMap<String, String>,
}

/// Collects the files of one run and writes the manifest last.
pub struct Artifacts {
    dir: PathBuf,
    stem: String,
    hash: String,
    formats: Vec<Format>,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn create(dir: &Path, stem: &str, hash: &str, formats: &[Format]) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: stem.into(),
            hash: hash.into(),
            formats: formats.to_vec(),
            files: BTreeMap::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Writes `{stem}{suffix}` and records its digest.
    pub fn write(&mut self, suffix: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let name = format!("{}{suffix}", self.stem);
        let path = self.dir.join(&name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(name, sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(suffix, text.as_bytes())
    }

    pub fn finish(self) -> Result<Manifest, CliError> {
        let manifest = Manifest { artifact_version: ARTIFACT_VERSION, config_hash: self.hash, files: self.files };
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// 12 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// CSV with a `# config_hash=` comment line, LF endings.
pub fn table_csv(hash: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|v| num(*v))).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii");
    format!("# config_hash={hash}\n{body}")
}

pub fn series_csv(hash: &str, series: &ObservableSeries, trev_ps: f64) -> String {
    let scale = trev_ps / std::f64::consts::TAU;
    table_csv(hash, &SERIES_HEADER, series.times.iter().zip(&series.values).map(|(&t, &v)| vec![t, t * scale, v]))
}

/// Parsed table: the embedded hash, the header and the numeric rows.
#[cfg(test)]
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[cfg(test)]
pub fn read_table(text: &str) -> Result<Table, String> {
    let (first, rest) = text.split_once('\n').ok_or("empty file")?;
    let hash = first.strip_prefix("# config_hash=").ok_or("missing `# config_hash=` line")?.to_string();
    let mut r = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            rec.iter().map(|f| f.parse::<f64>().map_err(|e| format!("`{f}`: {e}"))).collect()
        })
        .collect::<Result<_, String>>()?;
    Ok(Table { hash, header, rows })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    Missing(String),
    Digest(String),
    HashNotEmbedded(String),
    ConfigHash { manifest: String, config: String },
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Problem::Missing(n) => write!(f, "{n}: missing"),
            Problem::Digest(n) => write!(f, "{n}: content does not match its digest"),
            Problem::HashNotEmbedded(n) => write!(f, "{n}: config hash not embedded"),
            Problem::ConfigHash { manifest, config } => write!(f, "manifest hash {manifest} != config hash {config}"),
        }
    }
}

/// Re-hashes every file listed in `dir/manifest.json`.
pub fn verify_dir(dir: &Path, expected_hash: Option<&str>) -> Result<(Manifest, Vec<Problem>), CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Verify(format!("{}: {e}", path.display())))?;
    let mut problems = Vec::new();
    if let Some(h) = expected_hash {
        if h != manifest.config_hash {
            problems.push(Problem::ConfigHash { manifest: manifest.config_hash.clone(), config: h.into() });
        }
    }
    for (name, digest) in &manifest.files {
        let Ok(bytes) = fs::read(dir.join(name)) else {
            problems.push(Problem::Missing(name.clone()));
            continue;
        };
        if &sha256_hex(&bytes) != digest {
            problems.push(Problem::Digest(name.clone()));
        }
        if !String::from_utf8_lossy(&bytes).contains(&manifest.config_hash) {
            problems.push(Problem::HashNotEmbedded(name.clone()));
        }
    }
    Ok((manifest, problems))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kicked_rotor::series::{ObservableName, SeriesMeta};

    fn series(times: Vec<f64>, values: Vec<f64>) -> ObservableSeries {
        ObservableSeries::new(ObservableName::Cos2phi, times, values, SeriesMeta::default()).unwrap()
    }

    #[test]
    fn empty_series_is_header_only() {
        let text = series_csv("abc", &series(vec![], vec![]), 8.0);
        assert_eq!(text, "# config_hash=abc\ntime_dimensionless,time_ps,value\n");
    }

    #[test]
    fn series_round_trip_to_twelve_digits() {
        let s = series(vec![0.0, 0.1, 2.0 / 3.0, 6.2], vec![0.5, -1.0 / 7.0, 1e-17, 0.123456789012345]);
        let trev = 8.382692380331525;
        let t = read_table(&series_csv("h", &s, trev)).unwrap();
        assert_eq!(t.hash, "h");
        assert_eq!(t.header, SERIES_HEADER);
        for (row, (&tt, &v)) in t.rows.iter().zip(s.times.iter().zip(&s.values)) {
            assert!((row[0] - tt).abs() <= 5e-12 * tt.abs());
            assert!((row[2] - v).abs() <= 5e-12 * v.abs());
            assert!((row[1] - tt * trev / std::f64::consts::TAU).abs() <= 5e-12 * row[1].abs());
        }
        assert_eq!(num(1.0 / 3.0), "3.33333333333e-1");
    }

    #[test]
    fn csv_uses_lf_only() {
        let text = table_csv("h", &["a", "b"], vec![vec![1.0, 2.0]]);
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn verify_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path(), "x", "feedbeef", &[Format::Csv]).unwrap();
        a.write(".csv", table_csv("feedbeef", &["v"], vec![vec![1.0]]).as_bytes()).unwrap();
        a.write(".txt", b"no hash here").unwrap();
        a.finish().unwrap();
        let (_, problems) = verify_dir(dir.path(), Some("feedbeef")).unwrap();
        assert_eq!(problems, vec![Problem::HashNotEmbedded("x.txt".into())]);
        fs::write(dir.path().join("x.csv"), "changed feedbeef").unwrap();
        fs::remove_file(dir.path().join("x.txt")).unwrap();
        let (_, problems) = verify_dir(dir.path(), Some("other")).unwrap();
        assert_eq!(problems.len(), 3, "{problems:?}");
    }
}
