use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use synthner::backend::{BackendError, CompletionBackend, CompletionRequest, RemoteBackend, RemoteConfig, RetryPolicy};
use synthner::SamplingParams;

struct Captured {
    headers: Vec<String>,
    body: String,
}

/// Serve one canned `(status, body)` per connection, recording each request.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Captured>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut headers = Vec::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                headers,
                body: String::from_utf8(buf).unwrap(),
            });
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen, handle)
}

fn backend(url: String) -> RemoteBackend {
    RemoteBackend::new(
        "neox",
        RemoteConfig {
            url,
            model: Some("gpt-neox-20b".into()),
            api_key: "secret".into(),
            timeout: Duration::from_secs(10),
            retry: RetryPolicy {
                max_attempts: 3,
                initial_backoff: Duration::from_millis(5),
                max_backoff: Duration::from_millis(20),
            },
        },
    )
    .unwrap()
}

fn request() -> CompletionRequest<'static> {
    CompletionRequest {
        prompt: "<s>Kein Befund.</s>\n<s>",
        params: SamplingParams::new(0.8, 0.9, 768, 0).unwrap(),
        sample_index: 0,
    }
}

#[test]
fn sends_wire_request_and_reads_first_choice() {
    let (url, seen, server) = serve(vec![(200, r#"{"choices":[{"text":"Text.</s>","index":0}]}"#)]);
    let text = backend(url).complete(&request()).unwrap();
    server.join().unwrap();
    assert_eq!(text, "Text.</s>");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(
        body,
        serde_json::json!({
            "model": "gpt-neox-20b",
            "prompt": "<s>Kein Befund.</s>\n<s>",
            "max_tokens": 768,
            "temperature": 0.8,
            "top_p": 0.9,
            "n": 1
        })
    );
    assert!(seen[0].headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer secret")));
    assert!(seen[0].headers[0].starts_with("POST /v1/completions"));
}

#[test]
fn retries_transient_status_then_succeeds() {
    let (url, seen, server) = serve(vec![(503, "busy"), (429, "slow down"), (200, r#"{"choices":[{"text":"ok"}]}"#)]);
    assert_eq!(backend(url).complete(&request()).unwrap(), "ok");
    server.join().unwrap();
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, seen, server) = serve(vec![(500, "x"), (502, "x"), (504, "x")]);
    let err = backend(url).complete(&request()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Transport { attempts: 3, .. }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn well_formed_completion_is_never_retried() {
    // A second reply is queued; it must stay unused.
    let (url, seen, _server) = serve(vec![(200, r#"{"choices":[{"text":"a"}]}"#), (200, r#"{"choices":[{"text":"b"}]}"#)]);
    assert_eq!(backend(url).complete(&request()).unwrap(), "a");
    std::thread::sleep(Duration::from_millis(50));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn auth_rejection_and_malformed_bodies_are_not_retried() {
    let (url, seen, server) = serve(vec![(401, "no")]);
    let err = backend(url).complete(&request()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Auth(_)));
    assert!(err.is_fatal());
    assert_eq!(seen.lock().unwrap().len(), 1);

    let (url, seen, server) = serve(vec![(200, "<html>oops</html>")]);
    let err = backend(url).complete(&request()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Malformed(_)));
    assert_eq!(seen.lock().unwrap().len(), 1);

    let (url, seen, server) = serve(vec![(400, "prompt too long")]);
    let err = backend(url).complete(&request()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Rejected { status: 400, .. }));
    assert!(!err.is_fatal());
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_failure() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = backend(format!("http://127.0.0.1:{port}/v1/completions"))
        .complete(&request())
        .unwrap_err();
    assert!(matches!(err, BackendError::Transport { attempts: 3, .. }), "{err:?}");
}
