// SPDX-License-Identifier: Apache-2.0

//! Replay-verified session store.
//!
//! Layout under the data directory:
//!
//! ```text
//! sessions/<session-id>.json   one canonical StoredSession per file
//! index.jsonl                  cache of the headers, rebuilt on open
//! scenarios/*.json             extra scenarios besides the built-in one
//! quarantine/                  unreadable session files moved aside on open
//! ```
//!
//! A session file appears under its final name only through an atomic
//! rename of a fully synced temporary file, so a crash leaves either the
//! whole record or nothing.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analytics::{CohortRecord, StudentResult};
use crate::canonical;
use crate::scenario::fixture::verano;
use crate::scenario::{parse_scenario, Scenario};
use crate::session::{replay_record, Mode, ScoreReport, SessionRecord};

const SESSIONS: &str = "sessions";
const SCENARIOS: &str = "scenarios";
const QUARANTINE: &str = "quarantine";
const INDEX: &str = "index.jsonl";
const TMP_SUFFIX: &str = ".tmp";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage error: {0}")]
    Io(#[from] io::Error),
    #[error("cannot parse session record: {0}")]
    Parse(String),
    #[error("record does not replay to its embedded report: {0}")]
    ReplayMismatch(String),
    #[error("session `{0}` is already stored")]
    Duplicate(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("scenario file {path}: {message}")]
    Catalog { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("port must be in 1..=65535, got {0}")]
pub struct PortError(pub i64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub auth_token: Option<String>,
}

impl StoreConfig {
    pub fn new(data_dir: impl Into<PathBuf>, port: i64, auth_token: Option<String>) -> Result<Self, PortError> {
        let port = u16::try_from(port).ok().filter(|&p| p != 0).ok_or(PortError(port))?;
        Ok(Self { data_dir: data_dir.into(), port, auth_token: auth_token.filter(|t| !t.is_empty()) })
    }
}

/// Ids become file names, so they are restricted to a safe alphabet.
pub fn valid_session_id(id: &str) -> bool {
    (1..=128).contains(&id.len())
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSession {
    pub session_id: String,
    pub scenario_id: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub record: SessionRecord,
    pub score_report: ScoreReport,
}

impl StoredSession {
    fn entry(&self) -> IndexEntry {
        IndexEntry {
            session_id: self.session_id.clone(),
            scenario_id: self.scenario_id.clone(),
            mode: self.mode,
            student_id: self.student_id.clone(),
            group: self.group.clone(),
            created_at: self.created_at,
            score: self.score_report.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub session_id: String,
    pub scenario_id: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub created_at: u64,
    pub score: f64,
}

impl IndexEntry {
    fn key(&self) -> (u64, &str) {
        (self.created_at, &self.session_id)
    }
}

/// Scenarios known to the store, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    scenarios: BTreeMap<String, Arc<Scenario>>,
}

impl Catalog {
    /// The built-in fixture only.
    pub fn builtin() -> Self {
        let mut c = Self::default();
        c.insert(verano());
        c
    }

    /// Built-in fixture plus every `*.json` in `dir` (if it exists).
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let mut c = Self::builtin();
        let entries = match fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(c),
            Err(e) => return Err(e.into()),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path)?;
            let sc = parse_scenario(&text)
                .map_err(|e| StoreError::Catalog { path: path.clone(), message: e.to_string() })?;
            c.insert(sc);
        }
        Ok(c)
    }

    pub fn insert(&mut self, scenario: Scenario) {
        self.scenarios.insert(scenario.id.clone(), Arc::new(scenario));
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Scenario>> {
        self.scenarios.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.scenarios.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Scenario>> {
        self.scenarios.values()
    }
}

/// What `open` found on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpenReport {
    pub sessions: usize,
    pub removed_temp_files: usize,
    pub quarantined: Vec<String>,
    pub index_rebuilt: bool,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    catalog: Catalog,
    /// Sorted by (created_at, session_id). The write lock also serializes
    /// ingests.
    index: RwLock<Vec<IndexEntry>>,
    opened: OpenReport,
}

impl Store {
    /// Opens or creates a store, cleaning up after any interrupted ingest.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let catalog = Catalog::load(&root.join(SCENARIOS))?;
        Self::open_with(root, catalog)
    }

    pub fn open_with(root: impl Into<PathBuf>, catalog: Catalog) -> Result<Self, StoreError> {
        let root = root.into();
        let sessions = root.join(SESSIONS);
        fs::create_dir_all(&sessions)?;
        let mut opened = OpenReport::default();
        let mut entries = Vec::new();

        let mut names: Vec<String> =
            fs::read_dir(&sessions)?.filter_map(Result::ok).filter_map(|e| e.file_name().into_string().ok()).collect();
        names.sort();
        for name in names {
            let path = sessions.join(&name);
            if name.ends_with(TMP_SUFFIX) {
                fs::remove_file(&path)?;
                opened.removed_temp_files += 1;
                continue;
            }
            let Some(id) = name.strip_suffix(".json") else { continue };
            match read_stored(&path) {
                Ok(s) if s.session_id == id => entries.push(s.entry()),
                _ => {
                    let q = root.join(QUARANTINE);
                    fs::create_dir_all(&q)?;
                    fs::rename(&path, q.join(&name))?;
                    opened.quarantined.push(name);
                }
            }
        }
        for e in fs::read_dir(&root)?.filter_map(Result::ok) {
            let name = e.file_name();
            let name = name.to_string_lossy();
            if name.starts_with('.') && name.ends_with(TMP_SUFFIX) {
                fs::remove_file(e.path())?;
                opened.removed_temp_files += 1;
            }
        }
        if opened.removed_temp_files > 0 || !opened.quarantined.is_empty() {
            sync_dir(&sessions)?;
        }
        entries.sort_by(|a, b| a.key().cmp(&b.key()));
        opened.sessions = entries.len();

        let index_path = root.join(INDEX);
        let wanted = index_text(&entries);
        if fs::read_to_string(&index_path).ok().as_deref() != Some(wanted.as_str()) {
            write_atomic(&root, &index_path, wanted.as_bytes())?;
            opened.index_rebuilt = true;
        }
        Ok(Self { root, catalog, index: RwLock::new(entries), opened })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn open_report(&self) -> &OpenReport {
        &self.opened
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index entries in (created_at, session_id) order.
    pub fn entries(&self) -> Vec<IndexEntry> {
        self.index.read().expect("index lock").clone()
    }

    pub fn ingest(&self, document: &str) -> Result<StoredSession, StoreError> {
        self.ingest_at(document, now_ms())
    }

    /// Parses, replays and durably stores a record. Returns only after the
    /// session file and its directory entry are on disk.
    pub fn ingest_at(&self, document: &str, created_at: u64) -> Result<StoredSession, StoreError> {
        let record = SessionRecord::parse(document).map_err(|e| StoreError::Parse(e.to_string()))?;
        self.ingest_record(record, created_at)
    }

    pub fn ingest_record(&self, record: SessionRecord, created_at: u64) -> Result<StoredSession, StoreError> {
        let h = &record.header;
        if !valid_session_id(&h.session_id) {
            return Err(StoreError::InvalidId(h.session_id.clone()));
        }
        let scenario =
            self.catalog.get(&h.scenario_id).ok_or_else(|| StoreError::UnknownScenario(h.scenario_id.clone()))?;
        let replayed = replay_record(scenario, &record).map_err(|e| StoreError::ReplayMismatch(e.to_string()))?;
        if replayed != record.report {
            return Err(StoreError::ReplayMismatch(format!(
                "embedded score {} but replay gives {}",
                record.report.score, replayed.score
            )));
        }
        let stored = StoredSession {
            session_id: h.session_id.clone(),
            scenario_id: h.scenario_id.clone(),
            mode: h.mode,
            student_id: h.student_id.clone(),
            group: h.group.clone(),
            created_at,
            score_report: replayed,
            record,
        };
        let text = canonical::to_string(&stored).map_err(|e| StoreError::Parse(e.to_string()))?;

        let mut index = self.index.write().expect("index lock");
        let path = self.session_path(&stored.session_id);
        if index.iter().any(|e| e.session_id == stored.session_id) || path.exists() {
            return Err(StoreError::Duplicate(stored.session_id));
        }
        write_atomic(&self.root.join(SESSIONS), &path, text.as_bytes())?;

        let entry = stored.entry();
        let mut line = serde_json::to_string(&entry).expect("index entry serializes");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join(INDEX))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        let at = index.partition_point(|e| e.key() <= entry.key());
        index.insert(at, entry);
        Ok(stored)
    }

    pub fn get(&self, session_id: &str) -> Result<Option<StoredSession>, StoreError> {
        if !valid_session_id(session_id) {
            return Ok(None);
        }
        let known = self.index.read().expect("index lock").iter().any(|e| e.session_id == session_id);
        if !known {
            return Ok(None);
        }
        read_stored(&self.session_path(session_id)).map(Some)
    }

    /// Sessions of one group on one scenario, one result per student (the
    /// most recent session wins). Sessions without a student id count as
    /// their own student.
    pub fn query_cohort(&self, group: &str, scenario_id: &str) -> Result<CohortRecord, StoreError> {
        let matching: Vec<IndexEntry> = self
            .entries()
            .into_iter()
            .filter(|e| e.group.as_deref() == Some(group) && e.scenario_id == scenario_id)
            .collect();
        let mut order: Vec<String> = Vec::new();
        let mut latest: HashMap<String, StudentResult> = HashMap::new();
        for e in matching {
            let stored = read_stored(&self.session_path(&e.session_id))?;
            let student = e.student_id.clone().unwrap_or_else(|| e.session_id.clone());
            let result = StudentResult::from_report(student.clone(), &stored.score_report);
            if latest.insert(student.clone(), result).is_none() {
                order.push(student);
            }
        }
        let mut cohort = CohortRecord::new(group);
        for s in order {
            cohort.push(latest.remove(&s).expect("collected above")).expect("student ids are unique");
        }
        Ok(cohort)
    }

    /// Re-reads and re-replays every stored session. Returns the ids that
    /// fail.
    pub fn verify(&self) -> Vec<(String, String)> {
        let mut bad = Vec::new();
        for e in self.entries() {
            let check = read_stored(&self.session_path(&e.session_id)).and_then(|s| {
                let sc = self
                    .catalog
                    .get(&s.scenario_id)
                    .ok_or_else(|| StoreError::UnknownScenario(s.scenario_id.clone()))?;
                let r = replay_record(sc, &s.record).map_err(|err| StoreError::ReplayMismatch(err.to_string()))?;
                if r != s.score_report || r != s.record.report {
                    return Err(StoreError::ReplayMismatch("stored report differs from replay".into()));
                }
                Ok(())
            });
            if let Err(err) = check {
                bad.push((e.session_id, err.to_string()));
            }
        }
        bad
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join(SESSIONS).join(format!("{id}.json"))
    }
}

fn read_stored(path: &Path) -> Result<StoredSession, StoreError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| StoreError::Parse(format!("{}: {e}", path.display())))
}

fn index_text(entries: &[IndexEntry]) -> String {
    entries.iter().map(|e| serde_json::to_string(e).expect("index entry serializes") + "\n").collect()
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

/// Write to a sibling temp file, fsync, rename over `path`, fsync the
/// directory.
fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{}{TMP_SUFFIX}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{Attempt, HintConfig, ScoringRules, Session};

    fn record(id: &str, student: &str, group: &str, fail_s3: bool) -> SessionRecord {
        let sc = verano();
        let rules = ScoringRules::default_for(&sc);
        let mut s = Session::start(id, sc.clone(), Mode::Examination, HintConfig::NONE, rules).unwrap();
        for step in &sc.steps {
            if fail_s3 && step.id == "s3-loosen-cover-bolts" {
                s.attempt(&Attempt::correct_for(step).with_tool("socket-set")).unwrap();
            }
            assert!(s.attempt(&Attempt::correct_for(step)).unwrap().accepted);
        }
        SessionRecord::from_session(&s, Some(student.into()), Some(group.into())).unwrap()
    }

    #[test]
    fn ingest_and_get() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.is_empty());
        let stored = store.ingest_at(&record("a", "s1", "VR", false).to_canonical_string(), 5).unwrap();
        assert_eq!(stored.score_report.score, 100.0);
        assert_eq!(store.get("a").unwrap().unwrap(), stored);
        assert_eq!(store.get("zzz").unwrap(), None);
        assert_eq!(store.get("../etc").unwrap(), None);
    }

    #[test]
    fn edited_score_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut r = record("a", "s1", "VR", true);
        assert_eq!(r.report.score, 95.0);
        r.report.score = 100.0;
        let err = store.ingest(&r.to_canonical_string()).unwrap_err();
        assert!(matches!(err, StoreError::ReplayMismatch(_)), "{err}");
        assert!(store.is_empty());
    }

    #[test]
    fn duplicate_and_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let text = record("a", "s1", "VR", false).to_canonical_string();
        store.ingest(&text).unwrap();
        assert!(matches!(store.ingest(&text), Err(StoreError::Duplicate(_))));
        assert!(matches!(store.ingest("{"), Err(StoreError::Parse(_))));
        let mut r = record("b", "s2", "VR", false);
        r.header.scenario_id = "other".into();
        assert!(matches!(store.ingest(&r.to_canonical_string()), Err(StoreError::UnknownScenario(_))));
    }

    #[test]
    fn invalid_ids() {
        assert!(valid_session_id("sess-1.a_b"));
        for bad in ["", ".hidden", "a/b", "a b", &"x".repeat(129)] {
            assert!(!valid_session_id(bad), "{bad}");
        }
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut r = record("a", "s1", "VR", false);
        r.header.session_id = "../../evil".into();
        assert!(matches!(store.ingest(&r.to_canonical_string()), Err(StoreError::InvalidId(_))));
    }

    #[test]
    fn cohort_query_order_and_filters() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.query_cohort("VR", "verano-s1-s7").unwrap().is_empty());
        store.ingest_at(&record("b", "s2", "VR", false).to_canonical_string(), 10).unwrap();
        store.ingest_at(&record("a", "s1", "VR", true).to_canonical_string(), 10).unwrap();
        store.ingest_at(&record("c", "s3", "Traditional", false).to_canonical_string(), 1).unwrap();
        let c = store.query_cohort("VR", "verano-s1-s7").unwrap();
        let ids: Vec<&str> = c.students.iter().map(|s| s.student_id.as_str()).collect();
        assert_eq!(ids, ["s1", "s2"]);
        assert_eq!(c.scores(), [95.0, 100.0]);
        assert!(store.query_cohort("nobody", "verano-s1-s7").unwrap().is_empty());
        assert!(store.query_cohort("VR", "other").unwrap().is_empty());
    }

    #[test]
    fn latest_session_per_student() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.ingest_at(&record("a", "s1", "VR", true).to_canonical_string(), 1).unwrap();
        store.ingest_at(&record("b", "s1", "VR", false).to_canonical_string(), 2).unwrap();
        assert_eq!(store.query_cohort("VR", "verano-s1-s7").unwrap().scores(), [100.0]);
    }

    #[test]
    fn reopen_recovers() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.ingest_at(&record("a", "s1", "VR", false).to_canonical_string(), 1).unwrap();
            store.ingest_at(&record("b", "s2", "VR", false).to_canonical_string(), 2).unwrap();
        }
        let sessions = dir.path().join(SESSIONS);
        fs::write(sessions.join(".c.json.99.tmp"), "{\"half").unwrap();
        fs::write(dir.path().join(".index.jsonl.99.tmp"), "x").unwrap();
        fs::write(sessions.join("junk.json"), "not json").unwrap();
        fs::write(dir.path().join(INDEX), "garbage\n").unwrap();

        let store = Store::open(dir.path()).unwrap();
        let rep = store.open_report();
        assert_eq!(rep.sessions, 2);
        assert_eq!(rep.removed_temp_files, 2);
        assert_eq!(rep.quarantined, ["junk.json"]);
        assert!(rep.index_rebuilt);
        assert!(store.verify().is_empty());
        assert_eq!(store.len(), 2);

        let again = Store::open(dir.path()).unwrap();
        assert!(!again.open_report().index_rebuilt);
    }

    #[test]
    fn extra_scenarios_are_loaded() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = verano();
        sc.id = "copy".into();
        fs::create_dir_all(dir.path().join(SCENARIOS)).unwrap();
        fs::write(dir.path().join(SCENARIOS).join("copy.json"), crate::scenario::serialize_scenario(&sc)).unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.catalog().ids().collect::<Vec<_>>(), ["copy", "verano-s1-s7"]);

        fs::write(dir.path().join(SCENARIOS).join("bad.json"), "{}").unwrap();
        assert!(matches!(Store::open(dir.path()), Err(StoreError::Catalog { .. })));
    }

    #[test]
    fn config_port_range() {
        assert!(StoreConfig::new("d", 8080, None).is_ok());
        assert_eq!(StoreConfig::new("d", 0, None), Err(PortError(0)));
        assert_eq!(StoreConfig::new("d", 65536, None), Err(PortError(65536)));
        assert_eq!(StoreConfig::new("d", 1, Some(String::new())).unwrap().auth_token, None);
    }
}
