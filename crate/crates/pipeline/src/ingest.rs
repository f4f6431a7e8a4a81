//! CSV ingestion for the four input files (calls, profiles, estates,
//! aliases), alias canonicalization, and high-degree user filtering.
//!
//! All files are UTF-8 CSV with a header row; lines starting with `#`
//! are ignored. Malformed rows are skipped and counted by default;
//! strict mode aborts with the row number.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cdrflow_core::geofeat::Estate;
use cdrflow_core::model::{CallRecord, Location, ProvinceCode, Sex, UserId, UserProfile};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad header, expected `{expected}`")]
    BadHeader { path: String, expected: String },
    #[error("{path} row {row}: {reason}")]
    BadRow {
        path: String,
        row: u64,
        reason: String,
    },
    #[error("{path}: duplicate profile for user {user}")]
    DuplicateProfile { path: String, user: u64 },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Accepted/rejected row counts for one parsed file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseStats {
    pub accepted: u64,
    pub rejected: u64,
    /// Reject reasons with counts, for the ingest log.
    pub reasons: HashMap<String, u64>,
}

impl ParseStats {
    fn reject(&mut self, reason: &str) {
        self.rejected += 1;
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(file))
}

fn check_header(
    rdr: &mut csv::Reader<std::fs::File>,
    path: &Path,
    expected: &[&str],
) -> Result<(), IngestError> {
    let headers = rdr.headers().map_err(|source| IngestError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(IngestError::BadHeader {
            path: path.display().to_string(),
            expected: expected.join(","),
        });
    }
    Ok(())
}

/// Parses `caller,callee,start,end,lat,lon`. Rows violating the record
/// invariants (end < start, self-call, bad coordinates) are rejected.
pub fn parse_call_log(
    path: &Path,
    strict: bool,
) -> Result<(Vec<CallRecord>, ParseStats), IngestError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["caller", "callee", "start", "end", "lat", "lon"])?;
    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    let mut row_no = 1u64;
    for result in rdr.records() {
        row_no += 1;
        let reject = |stats: &mut ParseStats, reason: &str| -> Result<(), IngestError> {
            if strict {
                Err(IngestError::BadRow {
                    path: path.display().to_string(),
                    row: row_no,
                    reason: reason.to_string(),
                })
            } else {
                stats.reject(reason);
                Ok(())
            }
        };
        let record = match result {
            Ok(r) => r,
            Err(_) => {
                reject(&mut stats, "unreadable row")?;
                continue;
            }
        };
        let parsed = (|| -> Option<CallRecord> {
            let caller = UserId(record.get(0)?.trim().parse().ok()?);
            let callee = UserId(record.get(1)?.trim().parse().ok()?);
            let start: i64 = record.get(2)?.trim().parse().ok()?;
            let end: i64 = record.get(3)?.trim().parse().ok()?;
            let lat: f64 = record.get(4)?.trim().parse().ok()?;
            let lon: f64 = record.get(5)?.trim().parse().ok()?;
            Some(CallRecord {
                caller,
                callee,
                start,
                end,
                tower: Location::new(lat, lon),
            })
        })();
        match parsed {
            Some(r) if r.is_valid() => {
                stats.accepted += 1;
                out.push(r);
            }
            Some(_) => reject(&mut stats, "invariant violation")?,
            None => reject(&mut stats, "malformed field")?,
        }
    }
    Ok((out, stats))
}

/// Parses `user,birth_year,sex,province`; locality is derived from the
/// configured home province. Duplicate users are fatal; rows with an
/// unknown sex code are rejected.
pub fn parse_profiles(
    path: &Path,
    home_province: ProvinceCode,
) -> Result<(HashMap<UserId, UserProfile>, ParseStats), IngestError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["user", "birth_year", "sex", "province"])?;
    let mut out = HashMap::new();
    let mut stats = ParseStats::default();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(_) => {
                stats.reject("unreadable row");
                continue;
            }
        };
        let parsed = (|| -> Option<UserProfile> {
            let user = UserId(record.get(0)?.trim().parse().ok()?);
            let birth_year: i32 = record.get(1)?.trim().parse().ok()?;
            let sex = match record.get(2)?.trim() {
                "M" => Sex::M,
                "F" => Sex::F,
                _ => return None,
            };
            let birth_province: ProvinceCode = record.get(3)?.trim().parse().ok()?;
            Some(UserProfile {
                user,
                birth_year,
                sex,
                birth_province,
                is_local: birth_province == home_province,
            })
        })();
        match parsed {
            Some(p) => {
                if out.insert(p.user, p).is_some() {
                    return Err(IngestError::DuplicateProfile {
                        path: path.display().to_string(),
                        user: p.user.0,
                    });
                }
                stats.accepted += 1;
            }
            None => stats.reject("malformed field or unknown sex code"),
        }
    }
    Ok((out, stats))
}

/// Parses `estate_id,lat,lon,price`; non-positive prices are rejected.
pub fn parse_estates(path: &Path) -> Result<(Vec<Estate>, ParseStats), IngestError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["estate_id", "lat", "lon", "price"])?;
    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(_) => {
                stats.reject("unreadable row");
                continue;
            }
        };
        let parsed = (|| -> Option<Estate> {
            let estate_id: u64 = record.get(0)?.trim().parse().ok()?;
            let lat: f64 = record.get(1)?.trim().parse().ok()?;
            let lon: f64 = record.get(2)?.trim().parse().ok()?;
            let price: f64 = record.get(3)?.trim().parse().ok()?;
            Some(Estate {
                estate_id,
                loc: Location::new(lat, lon),
                price,
            })
        })();
        match parsed {
            Some(e) if e.price > 0.0 && e.loc.is_valid() => {
                stats.accepted += 1;
                out.push(e);
            }
            Some(_) => stats.reject("invariant violation"),
            None => stats.reject("malformed field"),
        }
    }
    Ok((out, stats))
}

/// Phone-number to canonical user-id mapping.
pub type AliasMap = HashMap<UserId, UserId>;

/// Parses `phone,user`.
pub fn parse_aliases(path: &Path) -> Result<(AliasMap, ParseStats), IngestError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["phone", "user"])?;
    let mut out = AliasMap::new();
    let mut stats = ParseStats::default();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(_) => {
                stats.reject("unreadable row");
                continue;
            }
        };
        let parsed = (|| -> Option<(UserId, UserId)> {
            let phone = UserId(record.get(0)?.trim().parse().ok()?);
            let user = UserId(record.get(1)?.trim().parse().ok()?);
            Some((phone, user))
        })();
        match parsed {
            Some((phone, user)) => {
                out.insert(phone, user);
                stats.accepted += 1;
            }
            None => stats.reject("malformed field"),
        }
    }
    Ok((out, stats))
}

/// Rewrites caller/callee to canonical ids; records that become
/// self-calls after merging are dropped. Returns the dropped count.
pub fn apply_aliases(records: Vec<CallRecord>, aliases: &AliasMap) -> (Vec<CallRecord>, u64) {
    let mut dropped = 0u64;
    let canonical = |u: UserId| aliases.get(&u).copied().unwrap_or(u);
    let out = records
        .into_iter()
        .filter_map(|mut r| {
            r.caller = canonical(r.caller);
            r.callee = canonical(r.callee);
            if r.caller == r.callee {
                dropped += 1;
                None
            } else {
                Some(r)
            }
        })
        .collect();
    (out, dropped)
}

/// How abnormal users are detected.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighDegreeRule {
    /// Remove users with more unique contacts than this count.
    Absolute(usize),
    /// Remove users above this quantile of the unique-contact
    /// distribution (e.g. 0.999).
    Percentile(f64),
}

/// Removes all records touching users whose unique-contact count
/// (undirected, over the whole dataset) exceeds the threshold. Returns
/// the surviving records and the sorted list of removed users.
pub fn filter_high_degree(
    records: Vec<CallRecord>,
    rule: HighDegreeRule,
) -> (Vec<CallRecord>, Vec<UserId>) {
    let mut contacts: HashMap<UserId, HashSet<UserId>> = HashMap::new();
    for r in &records {
        contacts.entry(r.caller).or_default().insert(r.callee);
        contacts.entry(r.callee).or_default().insert(r.caller);
    }
    let threshold = match rule {
        HighDegreeRule::Absolute(max) => max,
        HighDegreeRule::Percentile(q) => {
            let mut counts: Vec<usize> = contacts.values().map(|s| s.len()).collect();
            counts.sort_unstable();
            if counts.is_empty() {
                return (records, Vec::new());
            }
            let rank = ((counts.len() as f64 - 1.0) * q.clamp(0.0, 1.0)).round() as usize;
            counts[rank]
        }
    };
    let mut removed: Vec<UserId> = contacts
        .iter()
        .filter(|(_, s)| s.len() > threshold)
        .map(|(u, _)| *u)
        .collect();
    removed.sort_unstable();
    let removed_set: HashSet<UserId> = removed.iter().copied().collect();
    let out = records
        .into_iter()
        .filter(|r| !removed_set.contains(&r.caller) && !removed_set.contains(&r.callee))
        .collect();
    (out, removed)
}

/// Writes a call log in the ingest schema.
pub fn write_call_log(path: &Path, records: &[CallRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["caller", "callee", "start", "end", "lat", "lon"])?;
    for r in records {
        w.write_record([
            r.caller.to_string(),
            r.callee.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            format!("{:.6}", r.tower.lat),
            format!("{:.6}", r.tower.lon),
        ])?;
    }
    w.flush()
}

/// Writes profiles in the ingest schema (sorted by user id).
pub fn write_profiles(path: &Path, profiles: &HashMap<UserId, UserProfile>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["user", "birth_year", "sex", "province"])?;
    let mut users: Vec<&UserProfile> = profiles.values().collect();
    users.sort_by_key(|p| p.user);
    for p in users {
        w.write_record([
            p.user.to_string(),
            p.birth_year.to_string(),
            match p.sex {
                Sex::M => "M".to_string(),
                Sex::F => "F".to_string(),
            },
            p.birth_province.to_string(),
        ])?;
    }
    w.flush()
}

/// Writes estates in the ingest schema.
pub fn write_estates(path: &Path, estates: &[Estate]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["estate_id", "lat", "lon", "price"])?;
    for e in estates {
        w.write_record([
            e.estate_id.to_string(),
            format!("{:.6}", e.loc.lat),
            format!("{:.6}", e.loc.lon),
            format!("{:.2}", e.price),
        ])?;
    }
    w.flush()
}
