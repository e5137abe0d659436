//! Clients for the two external services the pipeline depends on — text
//! generation (OpenAI-compatible chat completions) and web search
//! (Serper-compatible) — behind a content-addressed response cache.
//!
//! Every request is keyed by a cryptographic hash of its canonical JSON
//! form and served from the store when present. In record mode a miss goes
//! to the network and the response is written back; in replay mode a miss
//! is an error, which makes runs over a committed store fully hermetic.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use veracity_core::builder::{truncate_chars, CONTEXT_BODY_CAP};

/// Default number of search results requested per query.
pub const DEFAULT_K: usize = 3;

/// Attempts per network call (first try + retries).
const ATTEMPTS: u32 = 3;

/// One text-generation call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model_name: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One retrieved search hit. `fetched_body` carries up to
/// [`CONTEXT_BODY_CAP`] characters of page text when the provider supplies
/// it, and is empty otherwise (callers fall back to the snippet).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub link: String,
    pub snippet: String,
    #[serde(default)]
    pub fetched_body: String,
}

/// Whether a cache miss may touch the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IoMode {
    /// Serve hits from the store, fetch misses live and record them.
    Record,
    /// Serve hits from the store, fail on misses.
    Replay,
}

/// Connection and store settings for [`ServiceClient`].
#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub mode: IoMode,
    /// Directory of hash-named response files.
    pub store: PathBuf,
    pub llm_url: String,
    pub llm_key: String,
    pub search_url: String,
    pub search_key: String,
    /// Base backoff delay; doubles after each failed attempt.
    pub backoff: Duration,
    /// Per-request network timeout.
    pub timeout: Duration,
}

impl ClientConfig {
    /// Replay-only configuration over an existing store; never touches the
    /// network.
    pub fn replay(store: impl Into<PathBuf>) -> Self {
        ClientConfig {
            mode: IoMode::Replay,
            store: store.into(),
            llm_url: String::new(),
            llm_key: String::new(),
            search_url: String::new(),
            search_key: String::new(),
            backoff: Duration::from_millis(100),
            timeout: Duration::from_secs(60),
        }
    }

    /// Record-mode configuration reading endpoints and credentials from the
    /// environment: `VERACITY_LLM_URL`, `VERACITY_LLM_KEY`,
    /// `VERACITY_SEARCH_URL`, `VERACITY_SEARCH_KEY`.
    pub fn record_from_env(store: impl Into<PathBuf>) -> Self {
        let var = |name: &str| std::env::var(name).unwrap_or_default();
        ClientConfig {
            mode: IoMode::Record,
            store: store.into(),
            llm_url: var("VERACITY_LLM_URL"),
            llm_key: var("VERACITY_LLM_KEY"),
            search_url: var("VERACITY_SEARCH_URL"),
            search_key: var("VERACITY_SEARCH_KEY"),
            backoff: Duration::from_millis(100),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Errors from the service layer.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("prompt must be non-empty")]
    EmptyPrompt,
    #[error("search query must be non-empty")]
    EmptyQuery,
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
    #[error("replay store has no entry for this {kind} request (key {key}); re-run in record mode to capture it")]
    ReplayMiss { kind: &'static str, key: String },
    #[error("no {0} endpoint configured; set the corresponding environment variable or run in replay mode")]
    NotConfigured(&'static str),
    #[error("transport failure after {attempts} attempts: {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: reqwest::Error,
    },
    #[error("provider rejected the request with status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("cache store error: {0}")]
    Cache(#[from] std::io::Error),
    #[error("cache entry {key} is corrupt: {message}")]
    CorruptEntry { key: String, message: String },
}

/// Canonical cache-key payload for a generation call. Field order is the
/// serialization order, so the key is stable across runs.
#[derive(Serialize)]
struct GenerateKey<'a> {
    kind: &'static str,
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    seed: Option<u64>,
}

/// Canonical cache-key payload for a search call.
#[derive(Serialize)]
struct SearchKey<'a> {
    kind: &'static str,
    query: &'a str,
    k: usize,
}

/// Stored form of a generation response.
#[derive(Serialize, Deserialize)]
struct GenerateEntry {
    kind: String,
    request: GenerationRequest,
    text: String,
}

/// Stored form of a search response: the provider hits as fetched, before
/// deduplication, truncation, and the top-k cut (those are applied on every
/// read so fixtures exercise the same path as live responses).
#[derive(Serialize, Deserialize)]
struct SearchEntry {
    kind: String,
    query: String,
    k: usize,
    results: Vec<SearchResult>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Cache key for a generation request: hash of its canonical JSON form.
pub fn generate_key(req: &GenerationRequest) -> String {
    let payload = GenerateKey {
        kind: "generate",
        model: &req.model_name,
        prompt: &req.prompt,
        temperature: req.temperature,
        max_tokens: req.max_tokens,
        seed: req.seed,
    };
    sha256_hex(&serde_json::to_vec(&payload).expect("key serialization cannot fail"))
}

/// Cache key for a search request.
pub fn search_key(query: &str, k: usize) -> String {
    let payload = SearchKey { kind: "search", query, k };
    sha256_hex(&serde_json::to_vec(&payload).expect("key serialization cannot fail"))
}

/// Writes a generation response into `store` under the request's cache
/// key, exactly as record mode would. Useful for seeding replay stores by
/// hand (test fixtures, pre-canned responses).
pub fn record_generation(
    store: &Path,
    req: &GenerationRequest,
    text: &str,
) -> std::io::Result<()> {
    fs::create_dir_all(store)?;
    let entry = GenerateEntry {
        kind: String::from("generate"),
        request: req.clone(),
        text: String::from(text),
    };
    let path = store.join(format!("{}.json", generate_key(req)));
    fs::write(path, serde_json::to_vec_pretty(&entry).expect("entry serializes"))
}

/// Writes a search response into `store` under the query's cache key; the
/// stored hits are post-processed (dedup, cap, top-k) on read like any
/// recorded response.
pub fn record_search(
    store: &Path,
    query: &str,
    k: usize,
    results: &[SearchResult],
) -> std::io::Result<()> {
    fs::create_dir_all(store)?;
    let entry = SearchEntry {
        kind: String::from("search"),
        query: String::from(query),
        k,
        results: results.to_vec(),
    };
    let path = store.join(format!("{}.json", search_key(query, k)));
    fs::write(path, serde_json::to_vec_pretty(&entry).expect("entry serializes"))
}

/// Generation + search client with caching and record/replay.
pub struct ServiceClient {
    config: ClientConfig,
    http: reqwest::blocking::Client,
}

impl ServiceClient {
    pub fn new(config: ClientConfig) -> Result<Self, IoError> {
        fs::create_dir_all(&config.store)?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| IoError::Transport { attempts: 0, source: e })?;
        Ok(ServiceClient { config, http })
    }

    pub fn mode(&self) -> IoMode {
        self.config.mode
    }

    pub fn store_dir(&self) -> &Path {
        &self.config.store
    }

    /// Returns the completion text for `req`, from cache when present.
    pub fn generate(&self, req: &GenerationRequest) -> Result<String, IoError> {
        if req.prompt.is_empty() {
            return Err(IoError::EmptyPrompt);
        }
        if !(req.temperature >= 0.0) {
            return Err(IoError::InvalidRequest("temperature must be ≥ 0"));
        }
        if req.max_tokens == 0 {
            return Err(IoError::InvalidRequest("max_tokens must be positive"));
        }
        let key = generate_key(req);
        if let Some(bytes) = self.load(&key)? {
            let entry: GenerateEntry =
                serde_json::from_slice(&bytes).map_err(|e| IoError::CorruptEntry {
                    key: key.clone(),
                    message: e.to_string(),
                })?;
            return Ok(entry.text);
        }
        if self.config.mode == IoMode::Replay {
            return Err(IoError::ReplayMiss { kind: "generate", key });
        }
        let text = self.generate_live(req)?;
        let entry = GenerateEntry {
            kind: String::from("generate"),
            request: req.clone(),
            text: text.clone(),
        };
        self.store(&key, &serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
        Ok(text)
    }

    /// Returns at most `k` results for `query`, deduplicated by link, with
    /// bodies capped at [`CONTEXT_BODY_CAP`] characters.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, IoError> {
        if query.is_empty() {
            return Err(IoError::EmptyQuery);
        }
        if k == 0 {
            return Err(IoError::InvalidRequest("k must be positive"));
        }
        let key = search_key(query, k);
        let raw: Vec<SearchResult> = if let Some(bytes) = self.load(&key)? {
            let entry: SearchEntry =
                serde_json::from_slice(&bytes).map_err(|e| IoError::CorruptEntry {
                    key: key.clone(),
                    message: e.to_string(),
                })?;
            entry.results
        } else if self.config.mode == IoMode::Replay {
            return Err(IoError::ReplayMiss { kind: "search", key });
        } else {
            let results = self.search_live(query, k)?;
            let entry = SearchEntry {
                kind: String::from("search"),
                query: String::from(query),
                k,
                results: results.clone(),
            };
            self.store(&key, &serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
            results
        };

        let mut out: Vec<SearchResult> = Vec::new();
        for mut hit in raw {
            if out.iter().any(|r| r.link == hit.link) {
                continue;
            }
            hit.fetched_body = truncate_chars(&hit.fetched_body, CONTEXT_BODY_CAP);
            out.push(hit);
            if out.len() == k {
                break;
            }
        }
        Ok(out)
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.config.store.join(format!("{key}.json"))
    }

    fn load(&self, key: &str) -> Result<Option<Vec<u8>>, IoError> {
        match fs::read(self.entry_path(key)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(IoError::Cache(e)),
        }
    }

    /// Writes an entry atomically (temp file + rename) so concurrent
    /// writers of the same key cannot tear each other's files; the temp
    /// name is unique per process and per write.
    fn store(&self, key: &str, bytes: &[u8]) -> Result<(), IoError> {
        static WRITE_SEQ: core::sync::atomic::AtomicU64 = core::sync::atomic::AtomicU64::new(0);
        let seq = WRITE_SEQ.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
        let tmp = self
            .config
            .store
            .join(format!("{key}.tmp.{}.{seq}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.entry_path(key))?;
        Ok(())
    }

    fn generate_live(&self, req: &GenerationRequest) -> Result<String, IoError> {
        if self.config.llm_url.is_empty() {
            return Err(IoError::NotConfigured("generation"));
        }
        let mut body = serde_json::json!({
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = serde_json::json!(seed);
        }
        let value = self.post_json(&self.config.llm_url, &self.config.llm_key, true, &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| {
                IoError::BadResponse(String::from(
                    "expected choices[0].message.content in completion response",
                ))
            })
    }

    fn search_live(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, IoError> {
        if self.config.search_url.is_empty() {
            return Err(IoError::NotConfigured("search"));
        }
        let body = serde_json::json!({ "q": query, "num": k });
        let value =
            self.post_json(&self.config.search_url, &self.config.search_key, false, &body)?;
        let organic = value["organic"].as_array().ok_or_else(|| {
            IoError::BadResponse(String::from("expected organic array in search response"))
        })?;
        let mut results = Vec::with_capacity(organic.len());
        for hit in organic {
            results.push(SearchResult {
                title: hit["title"].as_str().unwrap_or_default().to_string(),
                link: hit["link"].as_str().unwrap_or_default().to_string(),
                snippet: hit["snippet"].as_str().unwrap_or_default().to_string(),
                fetched_body: hit["body"].as_str().unwrap_or_default().to_string(),
            });
        }
        Ok(results)
    }

    /// POSTs `body`, retrying transport failures and 5xx responses with
    /// exponential backoff. `bearer` selects the auth header style:
    /// `Authorization: Bearer` for generation, `X-API-KEY` for search.
    fn post_json(
        &self,
        url: &str,
        credential: &str,
        bearer: bool,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, IoError> {
        let mut delay = self.config.backoff;
        let mut last_transport: Option<reqwest::Error> = None;
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            let mut request = self.http.post(url).json(body);
            if !credential.is_empty() {
                request = if bearer {
                    request.bearer_auth(credential)
                } else {
                    request.header("X-API-KEY", credential)
                };
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.json::<serde_json::Value>().map_err(|e| {
                            IoError::BadResponse(format!("response is not JSON: {e}"))
                        });
                    }
                    let body_text = response.text().unwrap_or_default();
                    if !status.is_server_error() {
                        // Client errors will not improve on retry.
                        return Err(IoError::Provider {
                            status: status.as_u16(),
                            body: body_text,
                        });
                    }
                    if attempt + 1 == ATTEMPTS {
                        return Err(IoError::Provider {
                            status: status.as_u16(),
                            body: body_text,
                        });
                    }
                }
                Err(e) => last_transport = Some(e),
            }
        }
        Err(IoError::Transport {
            attempts: ATTEMPTS,
            source: last_transport.expect("loop exits early unless transport failed"),
        })
    }
}
