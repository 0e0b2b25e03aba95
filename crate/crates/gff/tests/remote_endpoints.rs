//! Wire-level checks of the remote generator and reranker clients against a
//! local mock HTTP server: request shape, bearer tokens, retry policy,
//! batching, and the in-flight request cap.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use gff::keygen::remote::GENERATOR_TOKEN_ENV;
use gff::keygen::{GeneratorEndpoint, RemoteGenerator};
use gff::rerank::remote::RERANKER_TOKEN_ENV;
use gff::rerank::{RemoteReranker, Reranker};
use gff::GffError;

type Handler = Box<dyn Fn(&serde_json::Value) -> (u16, String) + Send + Sync>;

struct RecordedRequest {
    body: serde_json::Value,
    authorization: Option<String>,
}

/// Minimal HTTP/1.1 server: one request per connection, every response sent
/// with Connection: close. Each connection is handled on its own thread so
/// concurrent in-flight requests are observable.
struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    peak_concurrency: Arc<AtomicUsize>,
}

impl MockServer {
    fn start(handler: Handler) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests: Arc<Mutex<Vec<RecordedRequest>>> = Arc::default();
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handler = Arc::new(handler);
        {
            let requests = Arc::clone(&requests);
            let active = Arc::clone(&active);
            let peak = Arc::clone(&peak);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { break };
                    let requests = Arc::clone(&requests);
                    let active = Arc::clone(&active);
                    let peak = Arc::clone(&peak);
                    let handler = Arc::clone(&handler);
                    thread::spawn(move || {
                        let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        handle_connection(stream, &requests, &handler);
                        active.fetch_sub(1, Ordering::SeqCst);
                    });
                }
            });
        }
        MockServer { url, requests, peak_concurrency: peak }
    }

    /// Serves the queued (status, body) responses in order; anything beyond
    /// the script fails the request loudly.
    fn scripted(responses: &[(u16, &str)]) -> MockServer {
        let queue: Mutex<VecDeque<(u16, String)>> =
            Mutex::new(responses.iter().map(|&(c, b)| (c, b.to_string())).collect());
        MockServer::start(Box::new(move |_| {
            queue
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or((500, r#"{"error":"unexpected extra request"}"#.to_string()))
        }))
    }

    fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    fn request(&self, index: usize) -> serde_json::Value {
        self.requests.lock().unwrap()[index].body.clone()
    }

    fn authorization(&self, index: usize) -> Option<String> {
        self.requests.lock().unwrap()[index].authorization.clone()
    }
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn handle_connection(
    mut stream: TcpStream,
    requests: &Mutex<Vec<RecordedRequest>>,
    handler: &Handler,
) {
    let mut buf = Vec::new();
    let mut tmp = [0u8; 4096];
    let header_end = loop {
        if let Some(pos) = find_subsequence(&buf, b"\r\n\r\n") {
            break pos + 4;
        }
        match stream.read(&mut tmp) {
            Ok(0) | Err(_) => return,
            Ok(n) => buf.extend_from_slice(&tmp[..n]),
        }
    };

    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut content_length = 0usize;
    let mut authorization = None;
    for line in head.lines().skip(1) {
        if let Some((name, v)) = line.split_once(':') {
            match name.to_ascii_lowercase().as_str() {
                "content-length" => content_length = v.trim().parse().unwrap_or(0),
                "authorization" => authorization = Some(v.trim().to_string()),
                _ => {}
            }
        }
    }
    while buf.len() < header_end + content_length {
        match stream.read(&mut tmp) {
            Ok(0) | Err(_) => break,
            Ok(n) => buf.extend_from_slice(&tmp[..n]),
        }
    }

    let body: serde_json::Value =
        serde_json::from_slice(&buf[header_end..header_end + content_length])
            .unwrap_or(serde_json::Value::Null);
    requests.lock().unwrap().push(RecordedRequest { body: body.clone(), authorization });

    let (code, response_body) = handler(&body);
    let reason = match code {
        200 => "OK",
        400 => "Bad Request",
        500 => "Internal Server Error",
        _ => "Status",
    };
    let response = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
        response_body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

// ------------------------------------------------------------------ generator

#[test]
fn generator_posts_the_documented_fields() {
    let server = MockServer::scripted(&[(200, r#"{"text":"alpha, beta"}"#)]);
    let client = RemoteGenerator::new(&server.url).with_max_tokens(64).with_temperature(0.2);

    let text = client.generate("PROMPT", 42).unwrap();
    assert_eq!(text, "alpha, beta");
    assert_eq!(server.request_count(), 1);
    let body = server.request(0);
    assert_eq!(body["prompt"], "PROMPT");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["temperature"].as_f64(), Some(0.2));
    assert_eq!(body["seed"], 42);
}

#[test]
fn generator_sends_the_bearer_token_from_the_environment() {
    let server = MockServer::scripted(&[(200, r#"{"text":"ok"}"#)]);
    std::env::set_var(GENERATOR_TOKEN_ENV, "sesame-generate");
    let client = RemoteGenerator::new(&server.url);
    std::env::remove_var(GENERATOR_TOKEN_ENV);

    client.generate("p", 1).unwrap();
    assert_eq!(server.authorization(0).as_deref(), Some("Bearer sesame-generate"));
}

#[test]
fn generator_retries_server_errors_then_succeeds() {
    let server = MockServer::scripted(&[
        (500, r#"{"error":"overloaded"}"#),
        (200, r#"{"text":"recovered"}"#),
    ]);
    let client = RemoteGenerator::new(&server.url).with_transport_retries(2);

    assert_eq!(client.generate("p", 7).unwrap(), "recovered");
    assert_eq!(server.request_count(), 2, "one retry expected after a 5xx");
}

#[test]
fn generator_does_not_retry_client_errors() {
    let server = MockServer::scripted(&[(400, r#"{"error":"bad prompt"}"#)]);
    let client = RemoteGenerator::new(&server.url).with_transport_retries(3);

    let err = client.generate("p", 7).unwrap_err();
    assert!(err.to_string().contains("HTTP 400"), "unexpected error: {err}");
    assert_eq!(server.request_count(), 1, "4xx responses must not be retried");
}

#[test]
fn generator_gives_up_after_the_retry_budget() {
    let server = MockServer::scripted(&[
        (500, "{}"),
        (500, "{}"),
        (500, "{}"),
        (500, "{}"),
    ]);
    let client = RemoteGenerator::new(&server.url).with_transport_retries(2);

    let err = client.generate("p", 7).unwrap_err();
    assert!(err.to_string().contains("HTTP 500"), "unexpected error: {err}");
    assert_eq!(server.request_count(), 3, "initial attempt plus two retries");
}

#[test]
fn generator_rejects_a_malformed_response_without_retrying() {
    let server = MockServer::scripted(&[(200, r#"{"wrong_field": 1}"#)]);
    let client = RemoteGenerator::new(&server.url).with_transport_retries(3);

    let err = client.generate("p", 7).unwrap_err();
    assert!(err.to_string().contains("malformed"), "unexpected error: {err}");
    assert_eq!(server.request_count(), 1);
}

// ------------------------------------------------------------------- reranker

/// Scores "item-<n>" as n, so alignment survives any batching.
fn index_scoring_handler() -> Handler {
    Box::new(|body| {
        let scores: Vec<f64> = body["inputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| {
                let text = v.as_str().unwrap();
                text.rsplit('-').next().unwrap().parse::<f64>().unwrap()
            })
            .collect();
        (200, format!(r#"{{"scores":{}}}"#, serde_json::to_string(&scores).unwrap()))
    })
}

#[test]
fn reranker_splits_large_inputs_into_batches() {
    let server = MockServer::start(index_scoring_handler());
    let client = RemoteReranker::new(&server.url).with_batch_size(512);

    let inputs: Vec<String> = (0..2048).map(|i| format!("item-{i}")).collect();
    let scores = client.score_batch(&inputs).unwrap();

    assert_eq!(scores.len(), 2048);
    for (i, score) in scores.iter().enumerate() {
        assert!(
            (score - i as f64).abs() < 1e-12,
            "score {score} at position {i} lost alignment"
        );
    }
    assert_eq!(server.request_count(), 4, "2048 inputs at batch size 512");
    for r in 0..4 {
        let batch = server.request(r)["inputs"].as_array().unwrap().len();
        assert_eq!(batch, 512, "request {r} carried {batch} inputs");
    }
}

#[test]
fn reranker_sends_nothing_for_empty_input() {
    let server = MockServer::scripted(&[]);
    let client = RemoteReranker::new(&server.url);

    let scores = client.score_batch(&[]).unwrap();
    assert!(scores.is_empty());
    assert_eq!(server.request_count(), 0, "an empty batch must not hit the endpoint");
}

#[test]
fn reranker_rejects_a_score_count_mismatch() {
    let server = MockServer::scripted(&[(200, r#"{"scores":[1.0]}"#)]);
    let client = RemoteReranker::new(&server.url);

    let inputs: Vec<String> = (0..3).map(|i| format!("item-{i}")).collect();
    let err = client.score_batch(&inputs).unwrap_err();
    assert!(
        matches!(err, GffError::ScoreCountMismatch { expected: 3, got: 1 }),
        "unexpected error: {err}"
    );
    assert_eq!(server.request_count(), 1, "a mismatch is final, not retryable");
}

#[test]
fn reranker_sends_the_bearer_token_from_the_environment() {
    let server = MockServer::scripted(&[(200, r#"{"scores":[0.5]}"#)]);
    std::env::set_var(RERANKER_TOKEN_ENV, "sesame-rerank");
    let client = RemoteReranker::new(&server.url);
    std::env::remove_var(RERANKER_TOKEN_ENV);

    assert_eq!(client.score("anything").unwrap(), 0.5);
    assert_eq!(server.authorization(0).as_deref(), Some("Bearer sesame-rerank"));
}

#[test]
fn reranker_retries_server_errors_then_succeeds() {
    let server = MockServer::scripted(&[
        (500, r#"{"error":"overloaded"}"#),
        (200, r#"{"scores":[2.5]}"#),
    ]);
    let client = RemoteReranker::new(&server.url).with_transport_retries(2);

    assert_eq!(client.score("x").unwrap(), 2.5);
    assert_eq!(server.request_count(), 2);
}

#[test]
fn reranker_caps_concurrent_requests() {
    let server = MockServer::start(Box::new(|body| {
        thread::sleep(Duration::from_millis(25));
        let n = body["inputs"].as_array().map_or(0, |a| a.len());
        (200, format!(r#"{{"scores":{}}}"#, serde_json::to_string(&vec![1.0; n]).unwrap()))
    }));
    let client = Arc::new(RemoteReranker::new(&server.url).with_max_in_flight(2));

    let mut workers = Vec::new();
    for i in 0..6 {
        let client = Arc::clone(&client);
        workers.push(thread::spawn(move || client.score(&format!("input-{i}")).unwrap()));
    }
    for worker in workers {
        worker.join().unwrap();
    }

    assert_eq!(server.request_count(), 6);
    let peak = server.peak_concurrency.load(Ordering::SeqCst);
    assert!(peak <= 2, "saw {peak} concurrent requests with a cap of 2");
}
