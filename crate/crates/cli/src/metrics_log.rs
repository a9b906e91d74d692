//! Append-only JSONL metrics log, one object per line.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLogLine {
    pub timestamp: String,
    pub run_id: String,
    pub event: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
    pub fields: BTreeMap<String, f64>,
}

pub struct MetricsLog {
    path: PathBuf,
    run_id: String,
}

impl MetricsLog {
    pub fn new(path: impl Into<PathBuf>, run_id: impl Into<String>) -> Self {
        MetricsLog {
            path: path.into(),
            run_id: run_id.into(),
        }
    }

    /// `<label>-s<seed>-<utc timestamp>`.
    pub fn run_id_for(label: &str, seed: u64) -> String {
        format!("{label}-s{seed}-{}", Utc::now().format("%Y%m%dT%H%M%S%.3fZ"))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<I, K>(&self, event: &str, epoch: Option<usize>, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<String>,
    {
        let line = MetricsLogLine {
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            run_id: self.run_id.clone(),
            event: event.to_string(),
            epoch,
            fields: fields.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        };
        let mut text = serde_json::to_string(&line).expect("log line serializes");
        text.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| CliError::io(&self.path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<MetricsLogLine>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appends_valid_lines() {
        let dir = tempfile::tempdir().unwrap();
        let log = MetricsLog::new(dir.path().join("m.jsonl"), "r1");
        log.append("epoch", Some(1), [("loss", 0.5)]).unwrap();
        log.append("summary", None, [("accuracy", 0.9), ("f1", 0.8)]).unwrap();
        let lines = read_log(log.path()).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].epoch, Some(1));
        assert_eq!(lines[1].fields["f1"], 0.8);
        assert!(lines.iter().all(|l| l.run_id == "r1"));
    }
}
