#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn wedding() -> PathBuf {
    fixtures().join("wedding")
}

/// One request as seen by the stub: request target plus lowercased headers.
#[derive(Debug, Clone)]
pub struct Seen {
    pub target: String,
    pub headers: Vec<String>,
}

/// A tiny search engine on localhost. Single terms count 400 hits, any
/// conjunction 40. `/suggest` returns Bing-shaped suggestions for whatever
/// was asked, and `/fail` answers 500.
pub struct Stub {
    pub base: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl Stub {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let mut headers = Vec::new();
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    headers.push(line.trim_end().to_ascii_lowercase());
                }
                let target = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
                log.lock().unwrap().push(Seen {
                    target: target.clone(),
                    headers,
                });
                let (status, body) = respond(&target);
                let reply = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        Stub { base, seen }
    }

    pub fn search(&self) -> String {
        format!("{}/search", self.base)
    }

    pub fn suggest(&self) -> String {
        format!("{}/suggest", self.base)
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn respond(target: &str) -> (&'static str, String) {
    if target.starts_with("/fail") {
        return ("500 Internal Server Error", "{}".into());
    }
    if target.starts_with("/suggest") {
        let body = r#"{"suggestionGroups":[{"searchSuggestions":[
            {"query":"alpha beta"},{"query":"alpha gamma"},{"query":"alpha"},{"query":"Alpha Beta"},{"query":"alpha delta"}]}]}"#;
        return ("200 OK", body.into());
    }
    let count = if target.contains("+AND+") || target.contains("%20AND%20") { 40 } else { 400 };
    ("200 OK", format!(r#"{{"webPages":{{"totalEstimatedMatches":{count}}}}}"#))
}
