//! SQLite-backed record store with review workflow and JSON Lines interchange.
//!
//! One connection behind a mutex: writes are serialized, and review actions
//! can compare-and-set on the record version inside a single transaction.

mod filter;

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use filter::{BadFilter, Page, QueryFilter, DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE};

use crate::schema::latex::normalize_symbol;
use crate::schema::{
    validate_record, ConstitutiveModelRecord, MechanismClass, ReviewStatus, ValidationReport,
};

/// Interchange file suffix.
pub const EXPORT_EXTENSION: &str = ".cmdb.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("record failed validation ({} errors)", .0.errors.len())]
    InvalidRecord(ValidationReport),
    #[error("edit payload failed validation ({} errors)", .0.errors.len())]
    InvalidEdit(ValidationReport),
    #[error("record {0} not found")]
    NotFound(String),
    #[error("version conflict on {record_id}: expected {expected}, current {current}")]
    VersionConflict {
        record_id: String,
        expected: i64,
        current: i64,
    },
    #[error(transparent)]
    BadFilter(#[from] BadFilter),
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("line {line}: {message}")]
    Import { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Unavailable(e.to_string())
    }
}

/// A record together with its store bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    #[serde(flatten)]
    pub record: ConstitutiveModelRecord,
    pub version: i64,
    pub updated_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertOutcome {
    pub record_id: String,
    pub created: bool,
    pub changed: bool,
    pub version: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ReviewAction {
    Verify,
    Reject,
    Edit { payload: Value },
}

impl ReviewAction {
    fn name(&self) -> &'static str {
        match self {
            ReviewAction::Verify => "verify",
            ReviewAction::Reject => "reject",
            ReviewAction::Edit { .. } => "edit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub record_id: String,
    pub version: i64,
    pub action: String,
    pub note: String,
    pub at: String,
    /// Full record content as of this version.
    pub snapshot: ConstitutiveModelRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismBucket {
    pub mechanism: MechanismClass,
    pub count: u64,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismHistogram {
    pub buckets: Vec<MechanismBucket>,
    pub total: u64,
}

/// Rounds a share to one decimal place of a percent.
pub fn percent_one_decimal(count: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (count as f64 * 1000.0 / total as f64).round() / 10.0
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS records (
    record_id     TEXT PRIMARY KEY,
    doc_id        TEXT NOT NULL,
    canon         TEXT NOT NULL,
    material_name TEXT NOT NULL,
    material_fold TEXT NOT NULL,
    material_class TEXT NOT NULL,
    mechanism     TEXT NOT NULL,
    review_status TEXT NOT NULL,
    search_text   TEXT NOT NULL,
    version       INTEGER NOT NULL,
    updated_at    TEXT NOT NULL,
    json          TEXT NOT NULL,
    UNIQUE (doc_id, canon, material_fold)
);
CREATE INDEX IF NOT EXISTS records_order ON records (material_name, record_id);
CREATE TABLE IF NOT EXISTS params (
    record_id TEXT NOT NULL REFERENCES records(record_id) ON DELETE CASCADE,
    symbol    TEXT NOT NULL,
    value_si  REAL NOT NULL
);
CREATE INDEX IF NOT EXISTS params_lookup ON params (symbol, value_si);
CREATE INDEX IF NOT EXISTS params_record ON params (record_id);
CREATE TABLE IF NOT EXISTS audit (
    id        INTEGER PRIMARY KEY AUTOINCREMENT,
    record_id TEXT NOT NULL,
    version   INTEGER NOT NULL,
    action    TEXT NOT NULL,
    note      TEXT NOT NULL,
    at        TEXT NOT NULL,
    json      TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS audit_record ON audit (record_id, version);
";

pub struct Store {
    conn: Mutex<Option<Connection>>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn to_json(r: &ConstitutiveModelRecord) -> String {
    serde_json::to_string(r).expect("record serializes")
}

fn from_json(s: &str) -> Result<ConstitutiveModelRecord, StoreError> {
    serde_json::from_str(s).map_err(|e| StoreError::Unavailable(format!("corrupt stored record: {e}")))
}

struct Key {
    canon: String,
    material_fold: String,
}

fn key_of(r: &ConstitutiveModelRecord) -> Result<Key, StoreError> {
    let (_, canon, material_fold) = r
        .dedup_key()
        .map_err(|e| StoreError::InvalidRecord(ValidationReport::syntax_error(e.to_string())))?;
    Ok(Key { canon, material_fold })
}

fn check(r: &ConstitutiveModelRecord) -> Result<(), ValidationReport> {
    let report = validate_record(&serde_json::to_value(r).expect("record serializes"));
    if report.valid {
        Ok(())
    } else {
        Err(report)
    }
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    /// Opens the store at `CM_DB_PATH`, or `default` when unset.
    pub fn open_from_env(default: &Path) -> Result<Self, StoreError> {
        match std::env::var_os("CM_DB_PATH") {
            Some(p) => Self::open(Path::new(&p)),
            None => Self::open(default),
        }
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(Some(conn)),
        })
    }

    /// Drops the connection; every later call fails with `Unavailable`.
    pub fn close(&self) {
        self.conn.lock().unwrap_or_else(|e| e.into_inner()).take();
    }

    fn with<T>(&self, f: impl FnOnce(&mut Connection) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let mut guard = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let conn = guard
            .as_mut()
            .ok_or_else(|| StoreError::Unavailable("store is closed".into()))?;
        f(conn)
    }

    pub fn ping(&self) -> Result<(), StoreError> {
        self.with(|c| {
            c.query_row("SELECT 1", [], |_| Ok(()))?;
            Ok(())
        })
    }

    pub fn count(&self) -> Result<u64, StoreError> {
        self.with(|c| Ok(c.query_row("SELECT COUNT(*) FROM records", [], |r| r.get::<_, i64>(0))? as u64))
    }

    /// Inserts or updates a record keyed on `(doc_id, canonical equation,
    /// case-folded material name)`. Re-upserting identical content is a no-op.
    pub fn upsert_record(&self, record: &ConstitutiveModelRecord) -> Result<UpsertOutcome, StoreError> {
        check(record).map_err(StoreError::InvalidRecord)?;
        let key = key_of(record)?;
        self.with(|c| {
            let tx = c.transaction()?;
            let existing: Option<(String, i64, String)> = tx
                .query_row(
                    "SELECT record_id, version, json FROM records WHERE doc_id = ?1 AND canon = ?2 AND material_fold = ?3",
                    params![record.doc_id, key.canon, key.material_fold],
                    |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
                )
                .optional()?;
            let outcome = match existing {
                Some((id, version, json)) => {
                    let mut incoming = record.clone();
                    incoming.record_id = id.clone();
                    if from_json(&json)? == incoming {
                        UpsertOutcome {
                            record_id: id,
                            created: false,
                            changed: false,
                            version,
                        }
                    } else {
                        write_row(&tx, &incoming, &key, version + 1, false)?;
                        audit(&tx, &incoming, version + 1, "upsert", "")?;
                        UpsertOutcome {
                            record_id: id,
                            created: false,
                            changed: true,
                            version: version + 1,
                        }
                    }
                }
                None => {
                    let mut incoming = record.clone();
                    incoming.record_id = free_id(&tx, &record.record_id)?;
                    write_row(&tx, &incoming, &key, 1, true)?;
                    audit(&tx, &incoming, 1, "create", "")?;
                    UpsertOutcome {
                        record_id: incoming.record_id,
                        created: true,
                        changed: true,
                        version: 1,
                    }
                }
            };
            tx.commit()?;
            Ok(outcome)
        })
    }

    pub fn get(&self, record_id: &str) -> Result<Option<StoredRecord>, StoreError> {
        self.with(|c| {
            c.query_row(
                "SELECT json, version, updated_at FROM records WHERE record_id = ?1",
                [record_id],
                |r| Ok((r.get::<_, String>(0)?, r.get(1)?, r.get(2)?)),
            )
            .optional()?
            .map(|(json, version, updated_at)| {
                Ok(StoredRecord {
                    record: from_json(&json)?,
                    version,
                    updated_at,
                })
            })
            .transpose()
        })
    }

    pub fn records_for_doc(&self, doc_id: &str) -> Result<Vec<StoredRecord>, StoreError> {
        self.with(|c| {
            let mut stmt = c.prepare(
                "SELECT json, version, updated_at FROM records WHERE doc_id = ?1 ORDER BY material_name, record_id",
            )?;
            let rows = stmt.query_map([doc_id], |r| Ok((r.get::<_, String>(0)?, r.get(1)?, r.get(2)?)))?;
            rows.map(|row| {
                let (json, version, updated_at) = row?;
                Ok(StoredRecord {
                    record: from_json(&json)?,
                    version,
                    updated_at,
                })
            })
            .collect()
        })
    }

    /// Conjunctive filtered search, ordered by `(material_name, record_id)`.
    pub fn query_models(&self, f: &QueryFilter) -> Result<Page<StoredRecord>, StoreError> {
        f.validate()?;
        let mut clauses: Vec<String> = Vec::new();
        let mut args: Vec<rusqlite::types::Value> = Vec::new();
        let mut push = |clause: &str, v: rusqlite::types::Value| {
            args.push(v);
            clauses.push(clause.replace('?', &format!("?{}", args.len())));
        };
        if let Some(c) = f.material_class {
            push("material_class = ?", c.as_str().to_string().into());
        }
        if let Some(m) = f.mechanism {
            push("mechanism = ?", m.as_str().to_string().into());
        }
        if let Some(s) = f.review_status {
            push("review_status = ?", s.as_str().to_string().into());
        }
        if let Some(sub) = &f.material_name_substring {
            push("instr(material_fold, ?) > 0", sub.trim().to_lowercase().into());
        }
        if let Some(q) = &f.text {
            push("instr(search_text, ?) > 0", filter::fold(q).into());
        }
        if let Some(sym) = &f.parameter_symbol {
            let sym = normalize_symbol(sym).expect("validated filter");
            let lo = f.param_min_si.unwrap_or(f64::NEG_INFINITY);
            let hi = f.param_max_si.unwrap_or(f64::INFINITY);
            args.push(sym.into());
            args.push(lo.into());
            args.push(hi.into());
            let n = args.len();
            clauses.push(format!(
                "record_id IN (SELECT record_id FROM params WHERE symbol = ?{} AND value_si >= ?{} AND value_si <= ?{})",
                n - 2,
                n - 1,
                n
            ));
        }
        let where_sql = if clauses.is_empty() {
            String::new()
        } else {
            format!("WHERE {}", clauses.join(" AND "))
        };
        let offset = i64::from(f.page - 1) * i64::from(f.page_size);
        self.with(|c| {
            let total: i64 = c.query_row(
                &format!("SELECT COUNT(*) FROM records {where_sql}"),
                rusqlite::params_from_iter(args.iter()),
                |r| r.get(0),
            )?;
            let sql = format!(
                "SELECT json, version, updated_at FROM records {where_sql} ORDER BY material_name, record_id LIMIT {} OFFSET {offset}",
                f.page_size
            );
            let mut stmt = c.prepare(&sql)?;
            let rows = stmt.query_map(rusqlite::params_from_iter(args.iter()), |r| {
                Ok((r.get::<_, String>(0)?, r.get(1)?, r.get(2)?))
            })?;
            let items = rows
                .map(|row| {
                    let (json, version, updated_at) = row?;
                    Ok(StoredRecord {
                        record: from_json(&json)?,
                        version,
                        updated_at,
                    })
                })
                .collect::<Result<Vec<_>, StoreError>>()?;
            Ok(Page {
                items,
                total: total as u64,
                page: f.page,
                page_size: f.page_size,
            })
        })
    }

    /// Counts per mechanism over every record not rejected by a reviewer.
    pub fn mechanism_distribution(&self) -> Result<MechanismHistogram, StoreError> {
        let counts: Vec<(String, i64)> = self.with(|c| {
            let mut stmt = c.prepare(
                "SELECT mechanism, COUNT(*) FROM records WHERE review_status != 'rejected' GROUP BY mechanism",
            )?;
            let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })?;
        let total: u64 = counts.iter().map(|(_, n)| *n as u64).sum();
        let buckets = MechanismClass::ALL
            .iter()
            .filter_map(|m| {
                let count = counts.iter().find(|(name, _)| name == m.as_str())?.1 as u64;
                Some(MechanismBucket {
                    mechanism: *m,
                    count,
                    percentage: percent_one_decimal(count, total),
                })
            })
            .collect();
        Ok(MechanismHistogram { buckets, total })
    }

    /// Applies a reviewer action. With `expected_version` the update only
    /// happens if the record is still at that version.
    pub fn set_review_status(
        &self,
        record_id: &str,
        action: &ReviewAction,
        note: &str,
        expected_version: Option<i64>,
    ) -> Result<StoredRecord, StoreError> {
        // validate the edit before touching the database
        let edited = match action {
            ReviewAction::Edit { payload } => {
                let mut payload = payload.clone();
                if let Value::Object(obj) = &mut payload {
                    obj.insert("record_id".into(), Value::String(record_id.to_string()));
                    obj.insert("review_status".into(), Value::String("edited".into()));
                }
                let report = validate_record(&payload);
                if !report.valid {
                    return Err(StoreError::InvalidEdit(report));
                }
                let rec: ConstitutiveModelRecord = serde_json::from_value(payload)
                    .map_err(|e| StoreError::InvalidEdit(ValidationReport::syntax_error(e.to_string())))?;
                Some(rec)
            }
            _ => None,
        };

        self.with(|c| {
            let tx = c.transaction()?;
            let (json, version): (String, i64) = tx
                .query_row(
                    "SELECT json, version FROM records WHERE record_id = ?1",
                    [record_id],
                    |r| Ok((r.get(0)?, r.get(1)?)),
                )
                .optional()?
                .ok_or_else(|| StoreError::NotFound(record_id.to_string()))?;
            if let Some(expected) = expected_version {
                if expected != version {
                    return Err(StoreError::VersionConflict {
                        record_id: record_id.to_string(),
                        expected,
                        current: version,
                    });
                }
            }
            let current = from_json(&json)?;
            let mut record = match edited {
                // an edit may not move the record to another document
                Some(rec) => ConstitutiveModelRecord {
                    doc_id: current.doc_id,
                    ..rec
                },
                None => current,
            };
            record.review_status = match action {
                ReviewAction::Verify => ReviewStatus::Verified,
                ReviewAction::Reject => ReviewStatus::Rejected,
                ReviewAction::Edit { .. } => ReviewStatus::Edited,
            };
            let key = key_of(&record)?;
            let clash: Option<String> = tx
                .query_row(
                    "SELECT record_id FROM records WHERE doc_id = ?1 AND canon = ?2 AND material_fold = ?3 AND record_id != ?4",
                    params![record.doc_id, key.canon, key.material_fold, record_id],
                    |r| r.get(0),
                )
                .optional()?;
            if let Some(other) = clash {
                return Err(StoreError::InvalidEdit(ValidationReport::syntax_error(format!(
                    "edit would duplicate record {other}"
                ))));
            }
            let next = version + 1;
            write_row(&tx, &record, &key, next, false)?;
            audit(&tx, &record, next, action.name(), note)?;
            tx.commit()?;
            Ok(StoredRecord {
                record,
                version: next,
                updated_at: now(),
            })
        })
    }

    pub fn audit_trail(&self, record_id: &str) -> Result<Vec<AuditEntry>, StoreError> {
        self.with(|c| {
            let mut stmt = c.prepare(
                "SELECT record_id, version, action, note, at, json FROM audit WHERE record_id = ?1 ORDER BY version, id",
            )?;
            let rows = stmt.query_map([record_id], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, i64>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                ))
            })?;
            rows.map(|row| {
                let (record_id, version, action, note, at, json) = row?;
                Ok(AuditEntry {
                    record_id,
                    version,
                    action,
                    note,
                    at,
                    snapshot: from_json(&json)?,
                })
            })
            .collect()
        })
    }

    /// Every record, ordered by record id.
    pub fn all_records(&self) -> Result<Vec<ConstitutiveModelRecord>, StoreError> {
        self.with(|c| {
            let mut stmt = c.prepare("SELECT json FROM records ORDER BY record_id")?;
            let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
            rows.map(|row| from_json(&row?)).collect()
        })
    }

    /// Writes one JSON record per line, ordered by record id.
    pub fn export_jsonl<W: Write>(&self, mut out: W) -> Result<usize, StoreError> {
        let records = self.all_records()?;
        for r in &records {
            writeln!(out, "{}", to_json(r))?;
        }
        out.flush()?;
        Ok(records.len())
    }

    pub fn export_to_path(&self, path: &Path) -> Result<usize, StoreError> {
        let file = std::fs::File::create(path)?;
        self.export_jsonl(std::io::BufWriter::new(file))
    }

    /// Upserts every line of a JSON Lines export. Blank lines are skipped.
    pub fn import_jsonl<R: BufRead>(&self, input: R) -> Result<usize, StoreError> {
        let mut n = 0;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = parse_record_line(&line).map_err(|message| StoreError::Import { line: i + 1, message })?;
            self.upsert_record(&record).map_err(|e| StoreError::Import {
                line: i + 1,
                message: e.to_string(),
            })?;
            n += 1;
        }
        Ok(n)
    }

    pub fn import_from_path(&self, path: &Path) -> Result<usize, StoreError> {
        let file = std::fs::File::open(path)?;
        self.import_jsonl(std::io::BufReader::new(file))
    }
}

/// Parses one interchange line, reporting schema violations by path.
pub fn parse_record_line(line: &str) -> Result<ConstitutiveModelRecord, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let report = validate_record(&value);
    if !report.valid {
        let msgs: Vec<String> = report.errors.iter().map(ToString::to_string).collect();
        return Err(msgs.join("; "));
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Reads a whole JSON Lines export into memory.
pub fn read_jsonl(path: &Path) -> Result<Vec<ConstitutiveModelRecord>, StoreError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record_line(l).map_err(|message| StoreError::Import { line: i + 1, message }))
        .collect()
}

fn free_id(tx: &Transaction<'_>, wanted: &str) -> Result<String, StoreError> {
    let taken = |id: &str| -> Result<bool, StoreError> {
        Ok(tx
            .query_row("SELECT 1 FROM records WHERE record_id = ?1", [id], |_| Ok(()))
            .optional()?
            .is_some())
    };
    if !wanted.is_empty() && !taken(wanted)? {
        return Ok(wanted.to_string());
    }
    let base = if wanted.is_empty() { "rec" } else { wanted };
    let mut n = 2;
    loop {
        let id = format!("{base}-{n}");
        if !taken(&id)? {
            return Ok(id);
        }
        n += 1;
    }
}

fn write_row(
    tx: &Transaction<'_>,
    r: &ConstitutiveModelRecord,
    key: &Key,
    version: i64,
    insert: bool,
) -> Result<(), StoreError> {
    let json = to_json(r);
    let at = now();
    let search = filter::search_text(r);
    if insert {
        tx.execute(
            "INSERT INTO records (record_id, doc_id, canon, material_name, material_fold, material_class, mechanism,
                                  review_status, search_text, version, updated_at, json)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12)",
            params![
                r.record_id,
                r.doc_id,
                key.canon,
                r.material.material_name,
                key.material_fold,
                r.material.material_class.as_str(),
                r.mechanism.as_str(),
                r.review_status.as_str(),
                search,
                version,
                at,
                json
            ],
        )?;
    } else {
        tx.execute(
            "UPDATE records SET doc_id = ?2, canon = ?3, material_name = ?4, material_fold = ?5, material_class = ?6,
                                mechanism = ?7, review_status = ?8, search_text = ?9, version = ?10,
                                updated_at = ?11, json = ?12
             WHERE record_id = ?1",
            params![
                r.record_id,
                r.doc_id,
                key.canon,
                r.material.material_name,
                key.material_fold,
                r.material.material_class.as_str(),
                r.mechanism.as_str(),
                r.review_status.as_str(),
                search,
                version,
                at,
                json
            ],
        )?;
        tx.execute("DELETE FROM params WHERE record_id = ?1", [&r.record_id])?;
    }
    let mut stmt = tx.prepare_cached("INSERT INTO params (record_id, symbol, value_si) VALUES (?1, ?2, ?3)")?;
    for p in &r.parameters {
        let sym = normalize_symbol(&p.symbol).unwrap_or_else(|| p.symbol.clone());
        stmt.execute(params![r.record_id, sym, p.value_si])?;
    }
    Ok(())
}

fn audit(tx: &Transaction<'_>, r: &ConstitutiveModelRecord, version: i64, action: &str, note: &str) -> Result<(), StoreError> {
    tx.execute(
        "INSERT INTO audit (record_id, version, action, note, at, json) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
        params![r.record_id, version, action, note, now(), to_json(r)],
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{MaterialClass, MaterialMeta, ParameterEntry, SymbolBinding, ValidationInfo};

    fn rec(doc: &str, material: &str, mech: MechanismClass, e_gpa: f64) -> ConstitutiveModelRecord {
        ConstitutiveModelRecord::build(
            doc,
            "\\sigma = E \\epsilon",
            vec![
                SymbolBinding::new("\\sigma", "stress", "Pa"),
                SymbolBinding::new("E", "Young's modulus", "Pa"),
                SymbolBinding::new("\\epsilon", "strain", "dimensionless"),
            ],
            MaterialMeta {
                material_name: material.into(),
                material_class: MaterialClass::Stone,
                provenance_note: String::new(),
                test_conditions: String::new(),
            },
            vec![ParameterEntry::from_printed("E", e_gpa, None, "GPa", "Table 1", None).unwrap()],
            ValidationInfo::new("uniaxial compression"),
            mech,
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn upsert_is_idempotent() {
        let s = Store::open_in_memory().unwrap();
        let r = rec("d1", "Sandstone", MechanismClass::Elasticity, 12.0);
        let a = s.upsert_record(&r).unwrap();
        assert!(a.created);
        let b = s.upsert_record(&r).unwrap();
        assert_eq!((b.record_id.as_str(), b.created, b.changed, b.version), (a.record_id.as_str(), false, false, 1));
        // same key, different content: update in place
        let mut r2 = r.clone();
        r2.material.material_name = "SANDSTONE".into();
        r2.confidence = 0.5;
        let c = s.upsert_record(&r2).unwrap();
        assert_eq!((c.record_id, c.changed, c.version), (a.record_id, true, 2));
        assert_eq!(s.count().unwrap(), 1);
    }

    #[test]
    fn invalid_record_leaves_store_untouched() {
        let s = Store::open_in_memory().unwrap();
        let mut r = rec("d1", "Sandstone", MechanismClass::Elasticity, 12.0);
        r.material.material_name = " ".into();
        assert!(matches!(s.upsert_record(&r), Err(StoreError::InvalidRecord(_))));
        assert_eq!(s.count().unwrap(), 0);
    }

    #[test]
    fn review_flow_and_audit() {
        let s = Store::open_in_memory().unwrap();
        let id = s.upsert_record(&rec("d1", "Sandstone", MechanismClass::Elasticity, 12.0)).unwrap().record_id;
        let v = s.set_review_status(&id, &ReviewAction::Verify, "checked table 1", None).unwrap();
        assert_eq!(v.record.review_status, ReviewStatus::Verified);
        let r = s.set_review_status(&id, &ReviewAction::Reject, "wrong specimen", Some(2)).unwrap();
        assert_eq!(r.record.review_status, ReviewStatus::Rejected);
        assert!(matches!(
            s.set_review_status(&id, &ReviewAction::Verify, "", Some(2)),
            Err(StoreError::VersionConflict { current: 3, .. })
        ));
        let trail = s.audit_trail(&id).unwrap();
        let actions: Vec<&str> = trail.iter().map(|a| a.action.as_str()).collect();
        assert_eq!(actions, ["create", "verify", "reject"]);
        assert_eq!(trail.last().unwrap().snapshot, s.get(&id).unwrap().unwrap().record);
    }

    #[test]
    fn edit_versions_and_validates() {
        let s = Store::open_in_memory().unwrap();
        let original = rec("d1", "Sandstone", MechanismClass::Elasticity, 12.0);
        let id = s.upsert_record(&original).unwrap().record_id;
        let mut payload = serde_json::to_value(&original).unwrap();
        payload["parameters"][0]["value_si"] = serde_json::json!(1.2e9);
        assert!(matches!(
            s.set_review_status(&id, &ReviewAction::Edit { payload: payload.clone() }, "", None),
            Err(StoreError::InvalidEdit(_))
        ));
        payload["parameters"][0]["value_raw"] = serde_json::json!(1.2);
        let e = s.set_review_status(&id, &ReviewAction::Edit { payload }, "scale fix", None).unwrap();
        assert_eq!(e.version, 2);
        assert_eq!(e.record.review_status, ReviewStatus::Edited);
        let trail = s.audit_trail(&id).unwrap();
        assert_eq!(trail[0].snapshot.parameters[0].value_si, 1.2e10);
        assert_eq!(trail[1].snapshot.parameters[0].value_si, 1.2e9);
        assert!(matches!(
            s.set_review_status("nope", &ReviewAction::Verify, "", None),
            Err(StoreError::NotFound(_))
        ));
    }

    #[test]
    fn histogram_rounding() {
        assert_eq!(percent_one_decimal(59, 185), 31.9);
        assert_eq!(percent_one_decimal(23, 185), 12.4);
        assert_eq!(percent_one_decimal(57, 185), 30.8);
        assert_eq!(percent_one_decimal(1, 1), 100.0);
        assert_eq!(percent_one_decimal(0, 0), 0.0);

        let s = Store::open_in_memory().unwrap();
        assert_eq!(s.mechanism_distribution().unwrap().total, 0);
        s.upsert_record(&rec("d1", "Sandstone", MechanismClass::FailureDamage, 12.0)).unwrap();
        let h = s.mechanism_distribution().unwrap();
        assert_eq!(h.total, 1);
        assert_eq!(h.buckets.len(), 1);
        assert_eq!(h.buckets[0].percentage, 100.0);
    }

    #[test]
    fn closed_store_is_unavailable() {
        let s = Store::open_in_memory().unwrap();
        s.close();
        assert!(matches!(s.ping(), Err(StoreError::Unavailable(_))));
    }

    #[test]
    fn filter_validation() {
        let s = Store::open_in_memory().unwrap();
        let bad = QueryFilter {
            param_min_si: Some(1.0),
            ..QueryFilter::default()
        };
        assert!(matches!(s.query_models(&bad), Err(StoreError::BadFilter(_))));
        let bad = QueryFilter {
            page_size: 501,
            ..QueryFilter::default()
        };
        assert!(matches!(s.query_models(&bad), Err(StoreError::BadFilter(_))));
    }
}
