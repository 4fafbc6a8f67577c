use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{parse_omni_payload, read_local, KpScale, SolarError, SolarTable};

/// OMNIWeb data retrieval endpoint behind the daily-data form.
pub const OMNIWEB_ENDPOINT: &str = "https://omniweb.gsfc.nasa.gov/cgi/nx1.cgi";

/// Environment variable naming the payload cache directory.
pub const CACHE_DIR_ENV: &str = "SCINT_CACHE_DIR";

// OMNI2 variable numbers: 38 = Kp*10, 39 = sunspot number R, 50 = F10.7.
const OMNI_VARS: [u32; 3] = [38, 39, 50];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum IndexSource {
    Remote,
    LocalFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexQuery {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub source: IndexSource,
}

impl IndexQuery {
    pub fn check_range(&self) -> Result<(), SolarError> {
        if self.start_date > self.end_date {
            return Err(SolarError::EmptyRange {
                start: self.start_date,
                end: self.end_date,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    pub endpoint: String,
    pub cache_dir: Option<PathBuf>,
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RemoteClient {
    fn default() -> Self {
        Self {
            endpoint: OMNIWEB_ENDPOINT.to_owned(),
            cache_dir: std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from),
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }
}

fn inflight_lock(key: &str) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut locks = LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    locks.entry(key.to_owned()).or_default().clone()
}

impl RemoteClient {
    pub fn request_url(&self, start: NaiveDate, end: NaiveDate) -> String {
        let mut url = format!(
            "{}?activity=retrieve&res=daily&spacecraft=omni2_daily&start_date={}&end_date={}",
            self.endpoint,
            start.format("%Y%m%d"),
            end.format("%Y%m%d"),
        );
        for v in OMNI_VARS {
            url.push_str(&format!("&vars={v}"));
        }
        url
    }

    fn cache_path(&self, url: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let digest = Sha256::digest(url.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Some(dir.join(format!("omni-{}.txt", &hex[..32])))
    }

    /// Fetches the raw payload for the query range, consulting the cache
    /// first. Transport failures and 5xx responses are retried with
    /// exponential backoff.
    pub fn fetch_remote(&self, query: &IndexQuery) -> Result<String, SolarError> {
        query.check_range()?;
        let url = self.request_url(query.start_date, query.end_date);
        let lock = inflight_lock(&url);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

        let cache_path = self.cache_path(&url);
        if let Some(path) = &cache_path {
            if let Ok(text) = std::fs::read_to_string(path) {
                return Ok(text);
            }
        }
        let payload = self.get_with_retries(&url)?;
        if let Some(path) = &cache_path {
            write_atomic(path, &payload)?;
        }
        Ok(payload)
    }

    fn get_with_retries(&self, url: &str) -> Result<String, SolarError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| SolarError::Network(e.to_string()))?;
        let mut backoff = self.initial_backoff;
        let mut last_err = SolarError::Network("no attempts made".into());
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match client.get(url).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.text().map_err(|e| SolarError::Network(e.to_string()));
                    }
                    last_err = SolarError::Service(status.as_u16());
                    if !status.is_server_error() {
                        break;
                    }
                }
                Err(e) => last_err = SolarError::Network(e.to_string()),
            }
        }
        Err(last_err)
    }

    /// Resolves a query to a table restricted to its date range.
    pub fn load(&self, query: &IndexQuery, kp_scale: KpScale) -> Result<SolarTable, SolarError> {
        query.check_range()?;
        let table = match &query.source {
            IndexSource::Remote => parse_omni_payload(&self.fetch_remote(query)?, kp_scale)?,
            IndexSource::LocalFile { path } => read_local(path, kp_scale)?,
        };
        Ok(table.restrict(query.start_date, query.end_date))
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), SolarError> {
    let io = |source| SolarError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
