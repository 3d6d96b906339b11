//! Tool-registry listing client: cursor-paginated `GET /tools`, ranked by
//! download count.

use std::collections::HashSet;
use std::time::Duration;

use serde::Deserialize;

use super::{IngestError, ToolRecord};

#[derive(Debug, Deserialize)]
struct RawTool {
    #[serde(alias = "id")]
    name: String,
    #[serde(default)]
    downloads: u64,
    #[serde(default)]
    versions: Vec<String>,
}

/// Client for a registry speaking the v2 listing protocol: pages of JSON
/// tool arrays, with the next cursor carried in a `next-page` response
/// header (absent on the last page).
pub struct TrsClient {
    base_url: String,
    page_size: usize,
    retries: usize,
    backoff: Duration,
}

impl TrsClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            page_size: 100,
            retries: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    pub fn with_retries(mut self, retries: usize, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    /// Fetch the top `n` tools by download count (ties broken by name
    /// ascending), assigning 1-based ranks. Pagination cursors are tracked;
    /// a repeated cursor aborts the walk.
    pub fn fetch_top_tools(&self, n: usize) -> Result<Vec<ToolRecord>, IngestError> {
        if n == 0 {
            return Err(IngestError::BadFetchCount);
        }
        let client = reqwest::blocking::Client::new();
        let mut all: Vec<RawTool> = Vec::new();
        let mut cursor: Option<String> = None;
        let mut seen_cursors: HashSet<String> = HashSet::new();

        loop {
            let mut url = format!("{}/tools?limit={}", self.base_url, self.page_size);
            if let Some(c) = &cursor {
                if !seen_cursors.insert(c.clone()) {
                    return Err(IngestError::CursorLoop(c.clone()));
                }
                url.push_str(&format!("&cursor={c}"));
            }
            let response = self.get_with_retry(&client, &url)?;
            let next = response
                .headers()
                .get("next-page")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
                .filter(|s| !s.is_empty());
            let status = response.status();
            let body = response.text().unwrap_or_default();
            if !status.is_success() {
                return Err(IngestError::RegistryHttp { status: status.as_u16(), body });
            }
            let page: Vec<RawTool> = serde_json::from_str(&body)
                .map_err(|e| IngestError::MalformedLine { line: 0, message: e.to_string() })?;
            let empty_page = page.is_empty();
            all.extend(page);
            match next {
                Some(c) if !empty_page => cursor = Some(c),
                _ => break,
            }
        }

        all.sort_by(|a, b| b.downloads.cmp(&a.downloads).then_with(|| a.name.cmp(&b.name)));
        Ok(all
            .into_iter()
            .take(n)
            .enumerate()
            .map(|(i, raw)| ToolRecord {
                name: raw.name,
                rank: (i + 1) as u32,
                downloads: raw.downloads,
                versions: raw.versions,
                help_docs: Vec::new(),
            })
            .collect())
    }

    fn get_with_retry(
        &self,
        client: &reqwest::blocking::Client,
        url: &str,
    ) -> Result<reqwest::blocking::Response, IngestError> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match client.get(url).send() {
                Ok(resp) => return Ok(resp),
                Err(e) => {
                    last = e.to_string();
                    if attempt < self.retries {
                        std::thread::sleep(self.backoff * 2u32.pow(attempt as u32));
                    }
                }
            }
        }
        Err(IngestError::RegistryUnreachable { attempts: self.retries + 1, last })
    }
}
