//! Dataset download with checksum records. Re-running against intact
//! files is a no-op; a corrupted file is reported with a re-fetch hint.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable overriding the dataset location.
pub const URL_ENV: &str = "PEEKC_URL";

/// Public repository the interaction logs are published in.
pub const DEFAULT_URL: &str =
    "https://raw.githubusercontent.com/sahanbull/PEEKC-Dataset/main/data";

pub const DATA_FILES: [&str; 2] = ["train.csv", "test.csv"];

const CHECKSUM_FILE: &str = "checksums.json";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("network error fetching {url}: {reason}")]
    Network { url: String, reason: String },
    #[error("checksum mismatch for {file}: expected {expected}, got {actual}; delete the file and re-run fetch")]
    ChecksumMismatch {
        file: String,
        expected: String,
        actual: String,
    },
    #[error("missing local file {0} (offline mode)")]
    MissingFile(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checksum record: {0}")]
    Record(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChecksumRecord {
    pub sha256: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn record_path(dest: &Path) -> PathBuf {
    dest.join(CHECKSUM_FILE)
}

fn load_record(dest: &Path) -> ChecksumRecord {
    fs::read(record_path(dest))
        .ok()
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .unwrap_or_default()
}

/// Outcome per file, in `DATA_FILES` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileStatus {
    Downloaded,
    AlreadyPresent,
}

/// Fetches `train.csv`/`test.csv` into `dest`, recording content
/// checksums. Files whose checksum matches the record are not
/// re-downloaded. With `offline` set, local files are verified and
/// recorded instead of downloaded.
pub fn fetch(
    base_url: &str,
    dest: &Path,
    offline: bool,
) -> Result<Vec<(String, FileStatus)>, FetchError> {
    fs::create_dir_all(dest)?;
    let mut record = load_record(dest);
    let mut statuses = Vec::new();
    for file in DATA_FILES {
        let path = dest.join(file);
        if path.exists() {
            let actual = sha256_hex(&fs::read(&path)?);
            match record.sha256.get(file) {
                Some(expected) if *expected == actual => {
                    statuses.push((file.to_string(), FileStatus::AlreadyPresent));
                    continue;
                }
                Some(expected) => {
                    return Err(FetchError::ChecksumMismatch {
                        file: file.to_string(),
                        expected: expected.clone(),
                        actual,
                    });
                }
                None => {
                    // present but unrecorded: adopt it
                    record.sha256.insert(file.to_string(), actual);
                    statuses.push((file.to_string(), FileStatus::AlreadyPresent));
                    continue;
                }
            }
        }
        if offline {
            return Err(FetchError::MissingFile(path));
        }
        let url = format!("{}/{}", base_url.trim_end_matches('/'), file);
        let bytes = download(&url)?;
        fs::write(&path, &bytes)?;
        record.sha256.insert(file.to_string(), sha256_hex(&bytes));
        statuses.push((file.to_string(), FileStatus::Downloaded));
    }
    fs::write(record_path(dest), serde_json::to_vec_pretty(&record)?)?;
    Ok(statuses)
}

fn download(url: &str) -> Result<Vec<u8>, FetchError> {
    let network_err = |reason: String| FetchError::Network {
        url: url.to_string(),
        reason,
    };
    let response = reqwest::blocking::get(url).map_err(|e| network_err(e.to_string()))?;
    if !response.status().is_success() {
        return Err(network_err(format!("HTTP {}", response.status())));
    }
    Ok(response
        .bytes()
        .map_err(|e| network_err(e.to_string()))?
        .to_vec())
}

/// Base URL after applying the environment override.
pub fn resolve_url(flag: Option<&str>) -> String {
    flag.map(str::to_string)
        .or_else(|| std::env::var(URL_ENV).ok())
        .unwrap_or_else(|| DEFAULT_URL.to_string())
}
