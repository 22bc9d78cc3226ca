//! Shared test helpers: local HTTP servers standing in for the remote
//! services, and generated fixtures.

#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::thread;

use tiny_http::{Header, Response, Server};
use tripletforge::dataset::Record;

#[derive(Debug, Clone)]
pub struct Seen {
    pub method: String,
    pub url: String,
    pub body: String,
}

pub type Handler = dyn Fn(&Seen) -> (u16, String) + Send + Sync;

/// Serves `handler` on an ephemeral port until dropped.
pub struct TestServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
    server: Arc<Server>,
    worker: Option<thread::JoinHandle<()>>,
}

impl TestServer {
    pub fn start(handler: impl Fn(&Seen) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind test server"));
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let worker = {
            let (server, seen) = (server.clone(), seen.clone());
            thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    let mut body = String::new();
                    let _ = req.as_reader().read_to_string(&mut body);
                    let s = Seen {
                        method: req.method().to_string(),
                        url: req.url().to_string(),
                        body,
                    };
                    seen.lock().unwrap().push(s.clone());
                    let handler = handler.clone();
                    // one thread per request so concurrent clients are not serialized
                    thread::spawn(move || {
                        let (status, body) = handler(&s);
                        let ct = Header::from_bytes("Content-Type", "application/json").unwrap();
                        let _ = req.respond(Response::from_string(body).with_status_code(status).with_header(ct));
                    });
                }
            })
        };
        Self {
            url,
            seen,
            server,
            worker: Some(worker),
        }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// Decoded value of one query parameter.
pub fn query_param(url: &str, key: &str) -> Option<String> {
    let q = url.split_once('?')?.1;
    form_urlencoded::parse(q.as_bytes())
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.into_owned())
}

const RELATIONS: [&str; 7] = [
    "inhibits",
    "activates",
    "is associated with",
    "binds",
    "predicts",
    "regulates",
    "induces",
];

/// The 11,200-record split fixture; mirrors `split_record` in tests/oracles/golden.py.
pub fn split_fixture() -> Vec<Record> {
    (0..11200usize)
        .map(|i| {
            let mut obj = format!("target {}", (i * 7919) % 11200);
            if i.is_multiple_of(97) {
                obj.push_str(", with comma");
            }
            if i.is_multiple_of(211) {
                obj.push_str(" \"quoted\"");
            }
            if i.is_multiple_of(503) {
                obj.push_str("\nsecond line");
            }
            if i.is_multiple_of(13) {
                obj = format!("naïve β-catenin {obj}");
            }
            Record::new(format!("entity {i}"), RELATIONS[i % 7], obj)
        })
        .collect()
}
