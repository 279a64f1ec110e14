//! Domain types for PEEKC-format interaction logs and their CSV ingestion.
//!
//! A row in `train.csv`/`test.csv` has 16 columns: lecture id, video id,
//! part id, timestamp, user id, five (kc id, coverage) pairs and a binary
//! label. Missing KC slots are padded with a `-1` id and zero coverage.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel kc id marking an unused annotation slot.
pub const KC_SENTINEL: i64 = -1;

/// Number of (kc id, coverage) column pairs in a PEEKC row.
pub const KC_SLOTS: usize = 5;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("row {row}: malformed row: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: coverage {value} outside [0, 1]")]
    CoverageOutOfRange { row: usize, value: f64 },
    #[error("row {row}: label {value} is not 0 or 1")]
    LabelNotBinary { row: usize, value: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Identifies one ~5-minute fragment of a lecture video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FragmentId {
    pub lecture_id: u64,
    pub video_id: u64,
    pub part_id: u64,
}

/// One KC annotation on a fragment: a Wikipedia-concept id and its
/// cosine topic-coverage score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KcAnnotationSlot {
    pub kc_id: u64,
    pub coverage: f64,
}

/// One learner x fragment watch record with up to five KC annotations and
/// the binary engagement label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementEvent {
    pub fragment: FragmentId,
    pub timestamp: u64,
    pub user_id: u64,
    pub kcs: Vec<KcAnnotationSlot>,
    pub label: u8,
}

impl EngagementEvent {
    pub fn kc_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.kcs.iter().map(|s| s.kc_id)
    }

    pub fn engaged(&self) -> bool {
        self.label == 1
    }
}

/// Time-ordered watch history of a single learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub user_id: u64,
    pub events: Vec<EngagementEvent>,
}

/// A set of sessions plus the KC vocabulary they span.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub sessions: BTreeMap<u64, Session>,
    pub kc_vocabulary: BTreeSet<u64>,
    pub kc_titles: BTreeMap<u64, String>,
}

impl Dataset {
    pub fn n_learners(&self) -> usize {
        self.sessions.len()
    }

    pub fn n_events(&self) -> usize {
        self.sessions.values().map(|s| s.events.len()).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &EngagementEvent> {
        self.sessions.values().flat_map(|s| s.events.iter())
    }
}

/// Column layout of the interaction CSV. Only the documented 16-column
/// order is supported; the type exists so alternative layouts can be
/// added without touching the parser loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct ColumnLayout {
    /// Skip the first line (header row).
    pub has_header: bool,
}

fn parse_num<T: std::str::FromStr>(
    field: &str,
    row: usize,
    name: &str,
) -> Result<T, DataError> {
    field
        .trim()
        .parse()
        .map_err(|_| DataError::MalformedRow {
            row,
            reason: format!("non-numeric {name} field {field:?}"),
        })
}

/// Parses PEEKC-format CSV into validated events, preserving row order.
///
/// Sentinel slots (kc id -1) are dropped from the event's KC list. Every
/// failure carries the 1-based row number.
pub fn parse_events<R: Read>(
    source: R,
    schema: ColumnLayout,
) -> Result<Vec<EngagementEvent>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut events = Vec::new();
    let offset = if schema.has_header { 2 } else { 1 };
    for (i, record) in reader.records().enumerate() {
        let row = i + offset;
        let record = record.map_err(|e| DataError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        events.push(parse_row(&record, row)?);
    }
    Ok(events)
}

fn parse_row(record: &csv::StringRecord, row: usize) -> Result<EngagementEvent, DataError> {
    let expected = 5 + 2 * KC_SLOTS + 1;
    if record.len() != expected {
        return Err(DataError::MalformedRow {
            row,
            reason: format!("expected {expected} columns, got {}", record.len()),
        });
    }
    let fragment = FragmentId {
        lecture_id: parse_num(&record[0], row, "lecture id")?,
        video_id: parse_num(&record[1], row, "video id")?,
        part_id: parse_num(&record[2], row, "part id")?,
    };
    let timestamp: u64 = parse_num(&record[3], row, "timestamp")?;
    let user_id: u64 = parse_num(&record[4], row, "user id")?;
    let mut kcs = Vec::new();
    for slot in 0..KC_SLOTS {
        let kc_id: i64 = parse_num(&record[5 + 2 * slot], row, "kc id")?;
        let coverage: f64 = parse_num(&record[6 + 2 * slot], row, "coverage")?;
        if kc_id == KC_SENTINEL {
            continue;
        }
        if !(0.0..=1.0).contains(&coverage) {
            return Err(DataError::CoverageOutOfRange {
                row,
                value: coverage,
            });
        }
        kcs.push(KcAnnotationSlot {
            kc_id: kc_id as u64,
            coverage,
        });
    }
    let label_field = record[5 + 2 * KC_SLOTS].trim();
    let label = match label_field {
        "0" => 0,
        "1" => 1,
        other => {
            // accept float-formatted binary labels ("1.0")
            match other.parse::<f64>() {
                Ok(v) if v == 0.0 => 0,
                Ok(v) if v == 1.0 => 1,
                _ => {
                    return Err(DataError::LabelNotBinary {
                        row,
                        value: label_field.to_string(),
                    })
                }
            }
        }
    };
    Ok(EngagementEvent {
        fragment,
        timestamp,
        user_id,
        kcs,
        label,
    })
}

/// Serializes events back to the 16-column layout, padding with sentinels.
pub fn write_events<W: std::io::Write>(
    sink: W,
    events: &[EngagementEvent],
) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    for event in events {
        let mut record = vec![
            event.fragment.lecture_id.to_string(),
            event.fragment.video_id.to_string(),
            event.fragment.part_id.to_string(),
            event.timestamp.to_string(),
            event.user_id.to_string(),
        ];
        for slot in 0..KC_SLOTS {
            match event.kcs.get(slot) {
                Some(kc) => {
                    record.push(kc.kc_id.to_string());
                    record.push(format!("{}", kc.coverage));
                }
                None => {
                    record.push(KC_SENTINEL.to_string());
                    record.push("0".to_string());
                }
            }
        }
        record.push(event.label.to_string());
        writer.write_record(&record).map_err(|e| {
            DataError::MalformedRow {
                row: 0,
                reason: e.to_string(),
            }
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Partitions events by learner and time-sorts each session.
///
/// Sorting is stable, so events sharing a timestamp keep file order.
pub fn group_sessions(events: Vec<EngagementEvent>) -> Dataset {
    let mut sessions: BTreeMap<u64, Session> = BTreeMap::new();
    let mut kc_vocabulary = BTreeSet::new();
    for event in events {
        kc_vocabulary.extend(event.kc_ids());
        sessions
            .entry(event.user_id)
            .or_insert_with(|| Session {
                user_id: event.user_id,
                events: Vec::new(),
            })
            .events
            .push(event);
    }
    for session in sessions.values_mut() {
        session.events.sort_by_key(|e| e.timestamp);
    }
    Dataset {
        sessions,
        kc_vocabulary,
        kc_titles: BTreeMap::new(),
    }
}

/// Fraction of events carrying a positive label.
pub fn positive_rate(ds: &Dataset) -> Result<f64, DataError> {
    let total = ds.n_events();
    if total == 0 {
        return Err(DataError::EmptyDataset);
    }
    let positives = ds.events().filter(|e| e.engaged()).count();
    Ok(positives as f64 / total as f64)
}

/// Loads the optional two-column `kc_id,title` mapping.
pub fn parse_kc_titles<R: Read>(source: R) -> Result<BTreeMap<u64, String>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut titles = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(DataError::MalformedRow {
                row,
                reason: "expected kc_id,title".to_string(),
            });
        }
        let kc_id: u64 = parse_num(&record[0], row, "kc id")?;
        titles.insert(kc_id, record[1].trim().to_string());
    }
    Ok(titles)
}
