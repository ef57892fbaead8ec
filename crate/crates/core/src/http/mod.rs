//! Blocking JSON-over-HTTPS client with a shared token-bucket rate limiter,
//! retry with exponential backoff, and an optional on-disk idempotency cache.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOKEN_ENV: &str = "SWAPBENCH_API_TOKEN";
pub const CACHE_DIR_ENV: &str = "SWAPBENCH_CACHE_DIR";

#[derive(Debug, Clone, thiserror::Error)]
pub enum HttpError {
    #[error("HTTP {status} from {url}: {body}")]
    Status {
        status: u16,
        url: String,
        body: String,
    },
    #[error("rate limited by {url} after {attempts} attempts")]
    RateLimited { url: String, attempts: u32 },
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("response from {url} is not valid JSON: {message}")]
    Decode { url: String, message: String },
    #[error("cache: {0}")]
    Cache(String),
}

impl HttpError {
    /// Failures a later attempt may not repeat.
    pub fn is_retriable(&self) -> bool {
        match self {
            HttpError::Status { status, .. } => is_retriable_status(*status),
            HttpError::RateLimited { .. } | HttpError::Transport { .. } => true,
            HttpError::Decode { .. } | HttpError::Cache(_) => false,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            HttpError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

fn is_retriable_status(status: u16) -> bool {
    status == 429 || status == 403 || (500..600).contains(&status)
}

/// Token bucket: up to `burst` requests at once, refilled at `per_second`.
#[derive(Debug)]
pub struct RateLimiter {
    state: Mutex<Bucket>,
    per_second: f64,
    burst: f64,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Instant,
}

impl RateLimiter {
    pub fn new(per_second: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        Self {
            state: Mutex::new(Bucket {
                tokens: burst,
                last: Instant::now(),
            }),
            per_second,
            burst,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(f64::INFINITY, 1)
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut b = self.state.lock().expect("limiter lock");
                let now = Instant::now();
                let elapsed = now.duration_since(b.last).as_secs_f64();
                b.tokens = (b.tokens + elapsed * self.per_second).min(self.burst);
                b.last = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                (1.0 - b.tokens) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait.min(60.0)));
        }
    }
}

#[derive(Clone, Debug)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            ..Self::default()
        }
    }

    fn delay(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32.checked_shl(attempt).unwrap_or(u32::MAX));
        retry_after.unwrap_or(exp).min(self.max_delay)
    }
}

/// Responses keyed by a hash of the request, one file per entry.
#[derive(Clone, Debug)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$SWAPBENCH_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV).map(|d| Self::new(PathBuf::from(d)))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(namespace: &str, request: &Value) -> String {
        let mut h = Sha256::new();
        h.update(namespace.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(request).expect("request serializes"));
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Value> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, key: &str, value: &Value) -> Result<(), HttpError> {
        let bytes = serde_json::to_vec(value).expect("value serializes");
        crate::artifact::write_atomic(&self.path(key), &bytes)
            .map_err(|e| HttpError::Cache(e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub token: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub user_agent: String,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            user_agent: format!("swapbench/{}", crate::artifact::TOOL_VERSION),
        }
    }
}

/// Cheap to clone; clones share the connection pool and the rate limiter.
#[derive(Clone)]
pub struct HttpClient {
    inner: reqwest::blocking::Client,
    limiter: Arc<RateLimiter>,
    config: ClientConfig,
    cache: Option<DiskCache>,
}

pub struct Response {
    pub status: u16,
    pub body: String,
    pub headers: Vec<(String, String)>,
}

impl Response {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

impl HttpClient {
    pub fn new(config: ClientConfig, limiter: Arc<RateLimiter>) -> Result<Self, HttpError> {
        let inner = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(config.user_agent.clone())
            .build()
            .map_err(|e| HttpError::Transport {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self {
            inner,
            limiter,
            config,
            cache: None,
        })
    }

    pub fn with_cache(mut self, cache: Option<DiskCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn cache(&self) -> Option<&DiskCache> {
        self.cache.as_ref()
    }

    pub fn token(&self) -> Option<&str> {
        self.config.token.as_deref()
    }

    fn send_once(
        &self,
        method: reqwest::Method,
        url: &str,
        headers: &[(&str, &str)],
        body: Option<&Value>,
    ) -> Result<Response, HttpError> {
        self.limiter.acquire();
        let mut req = self.inner.request(method, url);
        let keyed = headers.iter().any(|(k, _)| k.eq_ignore_ascii_case("x-api-key"));
        if let (Some(token), false) = (&self.config.token, keyed) {
            req = req.bearer_auth(token);
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().map_err(|e| HttpError::Transport {
            url: url.to_owned(),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_owned(), v.to_str().ok()?.to_owned())))
            .collect();
        let body = resp.text().map_err(|e| HttpError::Transport {
            url: url.to_owned(),
            message: e.to_string(),
        })?;
        Ok(Response {
            status,
            body,
            headers,
        })
    }

    /// Sends with retries. Non-2xx responses that are not retriable come back
    /// as [`HttpError::Status`]; exhausting retries on 429/403 yields
    /// [`HttpError::RateLimited`].
    pub fn send(
        &self,
        method: reqwest::Method,
        url: &str,
        headers: &[(&str, &str)],
        body: Option<&Value>,
    ) -> Result<Response, HttpError> {
        let policy = &self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = self.send_once(method.clone(), url, headers, body);
            let (err, retry_after) = match result {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r),
                Ok(r) => {
                    let retry_after = r
                        .header("retry-after")
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(Duration::from_secs);
                    let err = if matches!(r.status, 429 | 403) && attempt >= policy.max_attempts {
                        HttpError::RateLimited {
                            url: url.to_owned(),
                            attempts: attempt,
                        }
                    } else {
                        HttpError::Status {
                            status: r.status,
                            url: url.to_owned(),
                            body: r.body.chars().take(500).collect(),
                        }
                    };
                    (err, retry_after)
                }
                Err(e) => (e, None),
            };
            if !err.is_retriable() || attempt >= policy.max_attempts {
                return Err(err);
            }
            let delay = policy.delay(attempt - 1, retry_after);
            tracing::warn!(%url, attempt, delay_ms = delay.as_millis() as u64, error = %err, "retrying");
            std::thread::sleep(delay);
        }
    }

    pub fn get_text(&self, url: &str, headers: &[(&str, &str)]) -> Result<Response, HttpError> {
        self.send(reqwest::Method::GET, url, headers, None)
    }

    pub fn get_json(&self, url: &str, headers: &[(&str, &str)]) -> Result<Value, HttpError> {
        let r = self.get_text(url, headers)?;
        decode(url, &r.body)
    }

    /// POST with the idempotency cache consulted first: a request already
    /// answered is never sent again.
    pub fn post_json_cached(
        &self,
        namespace: &str,
        url: &str,
        headers: &[(&str, &str)],
        body: &Value,
    ) -> Result<Value, HttpError> {
        let key = DiskCache::key(namespace, body);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let r = self.send(reqwest::Method::POST, url, headers, Some(body))?;
        let value = decode(url, &r.body)?;
        if let Some(c) = &self.cache {
            c.put(&key, &value)?;
        }
        Ok(value)
    }
}

fn decode(url: &str, body: &str) -> Result<Value, HttpError> {
    serde_json::from_str(body).map_err(|e| HttpError::Decode {
        url: url.to_owned(),
        message: e.to_string(),
    })
}

#[cfg(test)]
pub(crate) mod testing {
    //! A scripted single-threaded HTTP server on a loopback port.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    pub struct Recorded {
        pub method: String,
        pub path: String,
        pub body: String,
    }

    pub struct FakeServer {
        pub base: String,
        pub requests: Arc<Mutex<Vec<Recorded>>>,
    }

    /// Serves each connection with `handler(method, path, body) -> (status,
    /// body)` until the process exits.
    pub fn serve<F>(handler: F) -> FakeServer
    where
        F: Fn(&str, &str, &str) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let mut parts = request_line.split_whitespace();
                let method = parts.next().unwrap_or("").to_owned();
                let path = parts.next().unwrap_or("").to_owned();
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            content_length = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; content_length];
                let _ = reader.read_exact(&mut body);
                let body = String::from_utf8_lossy(&body).into_owned();
                let (status, reply) = handler(&method, &path, &body);
                log.lock().unwrap().push(Recorded { method, path, body });
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        FakeServer { base, requests }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::serve;
    use super::*;
    use serde_json::json;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn client(retry: RetryPolicy) -> HttpClient {
        let config = ClientConfig {
            token: None,
            retry,
            ..ClientConfig::default()
        };
        HttpClient::new(config, Arc::new(RateLimiter::unlimited())).unwrap()
    }

    fn fast_retry(n: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts: n,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(5),
        }
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let hits = Arc::new(AtomicUsize::new(0));
        let h = hits.clone();
        let server = serve(move |_, _, _| {
            if h.fetch_add(1, Ordering::SeqCst) < 2 {
                (503, "{}".into())
            } else {
                (200, r#"{"ok":true}"#.into())
            }
        });
        let v = client(fast_retry(5))
            .get_json(&format!("{}/x", server.base), &[])
            .unwrap();
        assert_eq!(v, json!({"ok": true}));
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let server = serve(|_, _, _| (404, "{}".into()));
        let err = client(fast_retry(5))
            .get_json(&format!("{}/x", server.base), &[])
            .unwrap_err();
        assert_eq!(err.status(), Some(404));
        assert!(!err.is_retriable());
        assert_eq!(server.requests.lock().unwrap().len(), 1);
    }

    #[test]
    fn persistent_rate_limit_is_reported() {
        let server = serve(|_, _, _| (429, "{}".into()));
        let err = client(fast_retry(3))
            .get_json(&format!("{}/x", server.base), &[])
            .unwrap_err();
        assert!(matches!(err, HttpError::RateLimited { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn cache_prevents_repeat_requests() {
        let server = serve(|_, _, body| (200, body.to_owned()));
        let dir = tempfile::tempdir().unwrap();
        let c = client(RetryPolicy::none()).with_cache(Some(DiskCache::new(dir.path())));
        let url = format!("{}/v1/echo", server.base);
        let a = c.post_json_cached("m", &url, &[], &json!({"q": 1})).unwrap();
        let b = c.post_json_cached("m", &url, &[], &json!({"q": 1})).unwrap();
        let other = c.post_json_cached("m2", &url, &[], &json!({"q": 1})).unwrap();
        assert_eq!(a, json!({"q": 1}));
        assert_eq!(a, b);
        assert_eq!(other, a);
        let recorded = server.requests.lock().unwrap();
        assert_eq!(recorded.len(), 2);
        assert!(recorded.iter().all(|r| r.path == "/v1/echo"));
    }

    #[test]
    fn limiter_spaces_requests() {
        let limiter = RateLimiter::new(50.0, 1);
        let start = Instant::now();
        for _ in 0..6 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(90));
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_secs(1),
        };
        assert_eq!(p.delay(0, None), Duration::from_millis(100));
        assert_eq!(p.delay(2, None), Duration::from_millis(400));
        assert_eq!(p.delay(9, None), Duration::from_secs(1));
        assert_eq!(p.delay(0, Some(Duration::from_secs(30))), Duration::from_secs(1));
    }
}
