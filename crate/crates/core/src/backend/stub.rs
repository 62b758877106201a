//! Canned-response HTTP server for exercising [`super::http::HttpBackend`]
//! without a model server.
//!
//! Responses are read from `<dir>/inpaint.json` and `<dir>/segment.json`.
//! Faults can be queued per endpoint to simulate flaky servers; each queued
//! fault is consumed by one request. Written against `std::net` because
//! truncated bodies need control over the raw byte stream.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::http::{INPAINT_PATH, SEGMENT_PATH};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Advertise the full Content-Length, send half the body, then hang up.
    Truncate,
    /// Send the first half of the body as a complete response.
    ShortBody,
    /// Respond with this status and an empty body.
    Status(u16),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub path: String,
    pub body: Vec<u8>,
}

#[derive(Default)]
struct State {
    faults: HashMap<String, VecDeque<Fault>>,
    requests: Vec<RecordedRequest>,
}

pub struct StubServer {
    addr: SocketAddr,
    state: Arc<Mutex<State>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(responses_dir: impl Into<PathBuf>) -> Result<Self> {
        let dir: PathBuf = responses_dir.into();
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(State::default()));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let state = Arc::clone(&state);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let state = Arc::clone(&state);
                    let dir = dir.clone();
                    std::thread::spawn(move || {
                        if let Err(e) = serve(conn, &dir, &state) {
                            log::debug!("stub server connection: {e}");
                        }
                    });
                }
            })
        };
        Ok(Self {
            addr,
            state,
            stop,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn push_fault(&self, path: &str, fault: Fault) {
        self.state
            .lock()
            .unwrap()
            .faults
            .entry(path.to_string())
            .or_default()
            .push_back(fault);
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.lock().unwrap().requests.clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it notices the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn response_file(dir: &Path, path: &str) -> Option<PathBuf> {
    match path {
        INPAINT_PATH => Some(dir.join("inpaint.json")),
        SEGMENT_PATH => Some(dir.join("segment.json")),
        _ => None,
    }
}

fn serve(conn: TcpStream, dir: &Path, state: &Mutex<State>) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();

    let mut content_length = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; content_length];
    reader.read_exact(&mut body)?;

    let fault = {
        let mut st = state.lock().unwrap();
        st.requests.push(RecordedRequest {
            path: path.clone(),
            body,
        });
        st.faults.get_mut(&path).and_then(VecDeque::pop_front)
    };

    let mut out = conn;
    if let Some(Fault::Status(code)) = fault {
        return write_response(&mut out, code, b"", None);
    }
    let file = match (method.as_str(), response_file(dir, &path)) {
        ("POST", Some(f)) => f,
        _ => return write_response(&mut out, 404, b"", None),
    };
    let payload = match std::fs::read(&file) {
        Ok(p) => p,
        Err(_) => return write_response(&mut out, 500, b"", None),
    };
    match fault {
        Some(Fault::Truncate) => write_response(
            &mut out,
            200,
            &payload[..payload.len() / 2],
            Some(payload.len()),
        ),
        Some(Fault::ShortBody) => {
            write_response(&mut out, 200, &payload[..payload.len() / 2], None)
        }
        _ => write_response(&mut out, 200, &payload, None),
    }
}

fn write_response(
    out: &mut TcpStream,
    status: u16,
    body: &[u8],
    advertised_len: Option<usize>,
) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        advertised_len.unwrap_or(body.len())
    );
    out.write_all(head.as_bytes())?;
    out.write_all(body)?;
    out.flush()?;
    out.shutdown(std::net::Shutdown::Both)
}
