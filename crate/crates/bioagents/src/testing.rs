//! In-process fixture HTTP servers for offline tests and examples.
//!
//! [`FixtureHttpServer`] is a minimal single-purpose HTTP/1.1 responder:
//! enough for the chat-completion echo server, the tool-registry listing
//! server, and the embeddings endpoint the tests and examples stand up. It
//! records every request it receives.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

/// One parsed request as seen by a fixture server.
#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub method: String,
    /// Path including any query string, e.g. `/tools?cursor=p2`.
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl RecordedRequest {
    pub fn path(&self) -> &str {
        self.target.split('?').next().unwrap_or(&self.target)
    }

    pub fn query_param(&self, key: &str) -> Option<String> {
        let query = self.target.split_once('?')?.1;
        query.split('&').find_map(|pair| {
            let (k, v) = pair.split_once('=')?;
            (k == key).then(|| v.to_string())
        })
    }

    pub fn body_str(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

/// Response for a fixture handler to return.
#[derive(Debug, Clone)]
pub struct FixtureResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl FixtureResponse {
    pub fn json(value: &serde_json::Value) -> Self {
        Self {
            status: 200,
            headers: vec![("content-type".into(), "application/json".into())],
            body: serde_json::to_vec(value).expect("serializable"),
        }
    }

    pub fn json_text(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            headers: vec![("content-type".into(), "application/json".into())],
            body: body.into().into_bytes(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self { status, headers: Vec::new(), body: Vec::new() }
    }

    pub fn with_header(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((key.into(), value.into()));
        self
    }
}

type Handler = dyn Fn(&RecordedRequest) -> FixtureResponse + Send + Sync;

/// Minimal threaded HTTP server bound to an ephemeral localhost port.
pub struct FixtureHttpServer {
    addr: SocketAddr,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<()>>,
}

impl FixtureHttpServer {
    pub fn spawn<F>(handler: F) -> Self
    where
        F: Fn(&RecordedRequest) -> FixtureResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind fixture server");
        let addr = listener.local_addr().expect("local addr");
        let requests: Arc<Mutex<Vec<RecordedRequest>>> = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);

        let join = {
            let requests = Arc::clone(&requests);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let requests = Arc::clone(&requests);
                    let handler = Arc::clone(&handler);
                    // One thread per connection keeps concurrent tests honest.
                    std::thread::spawn(move || {
                        let _ = serve_connection(stream, &requests, &handler);
                    });
                }
            })
        };

        Self { addr, requests, stop, join: Some(join) }
    }

    /// Base URL of the server, e.g. `http://127.0.0.1:41234`.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for FixtureHttpServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Nudge the accept loop so it observes the stop flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

fn serve_connection(
    stream: TcpStream,
    requests: &Mutex<Vec<RecordedRequest>>,
    handler: &Handler,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let target = parts.next().unwrap_or_default().to_string();
    if method.is_empty() {
        return Ok(());
    }

    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((key, value)) = line.split_once(':') {
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if key == "content-length" {
                content_length = value.parse().unwrap_or(0);
            }
            headers.push((key, value));
        }
    }

    let mut body = vec![0u8; content_length];
    if content_length > 0 {
        reader.read_exact(&mut body)?;
    }

    let request = RecordedRequest { method, target, headers, body };
    let response = handler(&request);
    requests.lock().unwrap().push(request);

    let mut stream = reader.into_inner();
    let reason = match response.status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        500 => "Internal Server Error",
        _ => "Status",
    };
    write!(stream, "HTTP/1.1 {} {}\r\n", response.status, reason)?;
    write!(stream, "content-length: {}\r\n", response.body.len())?;
    write!(stream, "connection: close\r\n")?;
    for (key, value) in &response.headers {
        write!(stream, "{key}: {value}\r\n")?;
    }
    stream.write_all(b"\r\n")?;
    stream.write_all(&response.body)?;
    stream.flush()
}

/// Chat-completions server whose reply content is the raw request body, so
/// tests can assert exactly what went over the wire.
pub fn spawn_chat_echo_server() -> FixtureHttpServer {
    FixtureHttpServer::spawn(|req| {
        let reply = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": req.body_str()}}]
        });
        FixtureResponse::json(&reply)
    })
}

/// Chat-completions server that always replies with the given content.
pub fn spawn_chat_server(content: &str) -> FixtureHttpServer {
    let content = content.to_string();
    FixtureHttpServer::spawn(move |_req| {
        let reply = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        });
        FixtureResponse::json(&reply)
    })
}

/// One tool entry served by the registry fixture.
#[derive(Debug, Clone)]
pub struct FixtureTool {
    pub name: String,
    pub downloads: u64,
    pub versions: Vec<String>,
}

impl FixtureTool {
    pub fn new(name: &str, downloads: u64, versions: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            downloads,
            versions: versions.iter().map(|v| v.to_string()).collect(),
        }
    }
}

/// Tool-registry listing server: `GET /tools?cursor=...` returns a JSON array
/// page plus a `next-page` header carrying the next cursor, empty on the last
/// page. `loop_cursor = true` makes every page point back at itself, for the
/// cursor-loop abort test.
pub fn spawn_registry_server(
    tools: Vec<FixtureTool>,
    page_size: usize,
    loop_cursor: bool,
) -> FixtureHttpServer {
    FixtureHttpServer::spawn(move |req| {
        let start: usize = req
            .query_param("cursor")
            .and_then(|c| c.parse().ok())
            .unwrap_or(0);
        let page: Vec<serde_json::Value> = tools
            .iter()
            .skip(start)
            .take(page_size)
            .map(|t| {
                serde_json::json!({
                    "name": t.name,
                    "downloads": t.downloads,
                    "versions": t.versions,
                })
            })
            .collect();
        let next = if loop_cursor {
            start.to_string()
        } else if start + page_size < tools.len() {
            (start + page_size).to_string()
        } else {
            String::new()
        };
        let mut resp = FixtureResponse::json(&serde_json::Value::Array(page));
        if !next.is_empty() {
            resp = resp.with_header("next-page", next);
        }
        resp
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_server_round_trip() {
        let server = FixtureHttpServer::spawn(|req| {
            assert_eq!(req.method, "POST");
            FixtureResponse::json_text(format!("{{\"got\":{}}}", req.body.len()))
        });
        let client = reqwest::blocking::Client::new();
        let resp = client
            .post(format!("{}/anything", server.base_url()))
            .body("hello")
            .send()
            .unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        assert_eq!(resp.text().unwrap(), "{\"got\":5}");
        assert_eq!(server.requests().len(), 1);
        assert_eq!(server.requests()[0].body_str(), "hello");
    }

    #[test]
    fn query_params_parse() {
        let req = RecordedRequest {
            method: "GET".into(),
            target: "/tools?cursor=12&limit=5".into(),
            headers: vec![],
            body: vec![],
        };
        assert_eq!(req.path(), "/tools");
        assert_eq!(req.query_param("cursor").as_deref(), Some("12"));
        assert_eq!(req.query_param("missing"), None);
    }
}
