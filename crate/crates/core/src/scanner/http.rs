use std::io::Read;
use std::time::Duration;

use super::config::HttpConfig;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpError {
    #[error("http status {status}")]
    Status { status: u16 },
    #[error("response exceeds {cap} bytes")]
    TooLarge { cap: u64 },
    #[error("transport error: {0}")]
    Transport(String),
}

impl HttpError {
    /// 5xx, 408, 429 and transport failures are retried; other statuses are final.
    pub fn is_retryable(&self) -> bool {
        match self {
            HttpError::Status { status } => *status >= 500 || *status == 408 || *status == 429,
            HttpError::TooLarge { .. } => false,
            HttpError::Transport(_) => true,
        }
    }
}

/// Blocking HTTP client with bounded retries and exponential backoff.
#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    retries: u32,
    backoff_base: Duration,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("retries", &self.retries)
            .field("backoff_base", &self.backoff_base)
            .finish()
    }
}

impl Default for HttpClient {
    fn default() -> Self {
        HttpClient::new(&HttpConfig::default())
    }
}

impl HttpClient {
    pub fn new(cfg: &HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .user_agent(cfg.user_agent.as_str())
            .accept_encoding("identity")
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient {
            agent,
            retries: cfg.retries,
            backoff_base: Duration::from_millis(cfg.backoff_base_ms),
        }
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    /// Delay before retry `attempt` (0-based): base, 2·base, 4·base, ...
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << attempt.min(16))
    }

    /// GET with retries. Returns the last error and the number of attempts made.
    pub fn get_bytes(&self, url: &str, cap: u64) -> Result<Vec<u8>, (HttpError, u32)> {
        let mut attempt = 0;
        loop {
            match self.get_once(url, cap, |r, cap| read_capped(r, cap)) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    log::debug!("GET {url} failed ({e}); retry {} of {}", attempt + 1, self.retries);
                    std::thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err((e, attempt + 1)),
            }
        }
    }

    /// GET streaming the body into `sink`, with retries. `sink` is called again
    /// from scratch on each attempt and must reset its own state.
    pub fn get_streaming<T>(
        &self,
        url: &str,
        cap: u64,
        mut sink: impl FnMut(&mut dyn Read, u64) -> Result<T, HttpError>,
    ) -> Result<T, (HttpError, u32)> {
        let mut attempt = 0;
        loop {
            match self.get_once(url, cap, &mut sink) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    std::thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err((e, attempt + 1)),
            }
        }
    }

    fn get_once<T>(
        &self,
        url: &str,
        cap: u64,
        mut f: impl FnMut(&mut dyn Read, u64) -> Result<T, HttpError>,
    ) -> Result<T, HttpError> {
        let resp = self.agent.get(url).call().map_err(|e| HttpError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(HttpError::Status { status });
        }
        let declared = resp
            .headers()
            .get("content-length")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok());
        if declared.is_some_and(|n| n > cap) {
            return Err(HttpError::TooLarge { cap });
        }
        let mut reader = resp.into_body().into_with_config().limit(cap.saturating_add(1)).reader();
        f(&mut reader, cap)
    }
}

/// Reads at most `cap` bytes; one byte more is an error.
pub(crate) fn read_capped(r: &mut dyn Read, cap: u64) -> Result<Vec<u8>, HttpError> {
    let mut buf = Vec::new();
    r.take(cap.saturating_add(1))
        .read_to_end(&mut buf)
        .map_err(|e| map_read_error(e, cap))?;
    if buf.len() as u64 > cap {
        return Err(HttpError::TooLarge { cap });
    }
    Ok(buf)
}

pub(crate) fn map_read_error(e: std::io::Error, cap: u64) -> HttpError {
    match e.get_ref().and_then(|inner| inner.downcast_ref::<ureq::Error>()) {
        Some(ureq::Error::BodyExceedsLimit(_)) => HttpError::TooLarge { cap },
        _ => HttpError::Transport(e.to_string()),
    }
}
