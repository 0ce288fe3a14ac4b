//! Result persistence: schema-versioned JSON records and CSV emission with
//! embedded config lines. Floats carry 17 significant digits.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

pub fn build_id() -> String {
    format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Everything needed to reproduce a run bit-for-bit on the same build.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub params: serde_json::Value,
    pub master_seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub build: String,
    pub config: ExperimentConfig,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub replica_seeds: Vec<u64>,
    pub result: serde_json::Value,
}

pub struct RunTimer {
    started: u128,
}

impl RunTimer {
    pub fn start() -> Self {
        Self { started: now_ms() }
    }

    pub fn finish(
        self,
        config: ExperimentConfig,
        replica_seeds: Vec<u64>,
        result: serde_json::Value,
    ) -> RunRecord {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            build: build_id(),
            config,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            replica_seeds,
            result,
        }
    }
}

pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV payload: '#'-prefixed config lines, then a header row, then data.
pub fn csv_document(config: &ExperimentConfig, header: &str, rows: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", build_id()));
    out.push_str(&format!(
        "# config: {}\n",
        serde_json::to_string(config).unwrap_or_default()
    ));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

pub fn emit(record: &RunRecord, csv: Option<String>) -> std::io::Result<()> {
    match (&record.config.out, record.config.format.as_str(), csv) {
        (Some(path), "csv", Some(doc)) => std::fs::write(path, doc),
        (Some(path), _, _) => {
            let json = serde_json::to_string_pretty(record).expect("serializable record");
            std::fs::write(path, json + "\n")
        }
        (None, "csv", Some(doc)) => {
            print!("{doc}");
            Ok(())
        }
        (None, _, _) => {
            let json = serde_json::to_string_pretty(record).expect("serializable record");
            println!("{json}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            command: "test".into(),
            params: serde_json::json!({"x": 1}),
            master_seed: 7,
            threads: None,
            out: None,
            format: "csv".into(),
        }
    }

    #[test]
    fn empty_result_set_yields_header_only() {
        let doc = csv_document(&config(), "a,b,c", &[]);
        let data: Vec<&str> = doc.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["a,b,c"]);
    }

    #[test]
    fn float17_round_trips_exactly() {
        for x in [0.1, 1.0 / 3.0, 8.620957389698741e-1, 1e-300, -273.15] {
            let printed = float17(x);
            let back: f64 = printed.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{printed}");
        }
    }

    #[test]
    fn record_round_trips_through_json() {
        let timer = RunTimer::start();
        let record = timer.finish(config(), vec![1, 2], serde_json::json!({"v": 0.25}));
        let text = serde_json::to_string(&record).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["result"]["v"], 0.25);
        assert_eq!(back["config"]["master_seed"], 7);
        assert_eq!(back["schema_version"], SCHEMA_VERSION);
    }
}
