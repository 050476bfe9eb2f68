//! Wire contracts of the embedding provider and the NLP sidecar, exercised
//! against a tiny in-process HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use mpve_core::embed::{BaseMode, EmbedKind, EmbeddingRequest, ProviderConfig, ProviderMode, RemoteEmbedder};
use mpve_core::sidecar::SidecarClient;
use mpve_core::{extract_units, Embedder, Error};
use serde_json::{json, Value};

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<(String, Value)>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Value)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let path = line.split_whitespace().nth(1)?.to_string();
    let mut len = 0usize;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).ok()?;
    Some((path, serde_json::from_slice(&body).unwrap_or(Value::Null)))
}

fn serve(handler: Arc<Handler>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let Some((path, body)) = read_request(&mut stream) else { continue };
            h.fetch_add(1, Ordering::SeqCst);
            b.lock().unwrap().push((path.clone(), body.clone()));
            let (status, text) = handler(&path, &body);
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    Stub { url, hits, bodies }
}

/// Deterministic toy embedding: letter histogram folded into `dim` slots.
fn toy_vector(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0.0f32; dim];
    for (i, b) in text.bytes().enumerate() {
        v[(b as usize + i) % dim] += 1.0;
    }
    v
}

fn embed_stub(dim: usize) -> Stub {
    serve(Arc::new(move |path, body| {
        if path != "/embed" {
            return (404, "{}".into());
        }
        let texts: Vec<&str> = body["texts"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
        let vectors: Vec<Vec<f32>> = texts.iter().map(|t| toy_vector(t, dim)).collect();
        (200, json!({ "dim": dim, "vectors": vectors }).to_string())
    }))
}

#[test]
fn embed_is_deterministic_and_batched_by_kind() {
    let stub = embed_stub(8);
    let e = RemoteEmbedder::new(stub.url.clone(), 8, 5_000, 2);
    let reqs = vec![
        EmbeddingRequest::sentence("A dog chases a ball").unwrap(),
        EmbeddingRequest::word("dog").unwrap(),
        EmbeddingRequest::word("ball").unwrap(),
        EmbeddingRequest::sentence("The sun rises").unwrap(),
    ];
    let first = e.embed_batch(&reqs).unwrap();
    let second = e.embed_batch(&reqs).unwrap();
    assert_eq!(first, second);
    assert_eq!(first[1].as_slice(), toy_vector("dog", 8).as_slice());

    // sentence, word run, sentence: three calls per batch
    assert_eq!(stub.hits.load(Ordering::SeqCst), 6);
    let bodies = stub.bodies.lock().unwrap();
    assert_eq!(bodies[0].1["kind"], "sentence");
    assert_eq!(bodies[1].1, json!({"kind": "word", "texts": ["dog", "ball"]}));
    assert!(e.fingerprint().contains("dim=8"));
}

#[test]
fn embed_protocol_errors() {
    let stub = embed_stub(8);
    let wrong_dim = RemoteEmbedder::new(stub.url.clone(), 16, 5_000, 1);
    assert!(matches!(
        wrong_dim.embed(&EmbeddingRequest::word("dog").unwrap()),
        Err(Error::DimensionMismatch { expected: 16, actual: 8 })
    ));

    let short = serve(Arc::new(|_, _| (200, json!({"dim": 2, "vectors": []}).to_string())));
    let e = RemoteEmbedder::new(short.url.clone(), 2, 5_000, 1);
    assert!(matches!(e.embed(&EmbeddingRequest::word("x").unwrap()), Err(Error::ProviderProtocol(_))));

    let failing = serve(Arc::new(|_, _| (500, "{\"error\":\"boom\"}".into())));
    let e = RemoteEmbedder::new(failing.url.clone(), 2, 5_000, 1);
    match e.embed(&EmbeddingRequest::word("x").unwrap()) {
        Err(Error::ProviderProtocol(m)) => assert!(m.contains("500"), "{m}"),
        other => panic!("{other:?}"),
    }

    let garbage = serve(Arc::new(|_, _| (200, "not json".into())));
    let e = RemoteEmbedder::new(garbage.url.clone(), 2, 5_000, 1);
    assert!(matches!(e.embed(&EmbeddingRequest::word("x").unwrap()), Err(Error::ProviderProtocol(_))));

    let nan = serve(Arc::new(|_, _| (200, "{\"dim\": 2, \"vectors\": [[1.0, 1e999]]}".into())));
    let e = RemoteEmbedder::new(nan.url.clone(), 2, 5_000, 1);
    assert!(e.embed(&EmbeddingRequest::word("x").unwrap()).is_err());
}

#[test]
fn unreachable_provider() {
    // Bind then drop to get a port nobody listens on.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let e = RemoteEmbedder::new(format!("http://127.0.0.1:{port}"), 4, 2_000, 1);
    assert!(matches!(
        e.embed(&EmbeddingRequest::word("dog").unwrap()),
        Err(Error::ProviderUnreachable(_))
    ));
    let s = SidecarClient::new(format!("http://127.0.0.1:{port}"), 2_000);
    assert!(matches!(s.parse(&["A dog"]), Err(Error::ProviderUnreachable(_))));
}

#[test]
fn cached_remote_serves_repeats_locally() {
    let stub = embed_stub(8);
    let dir = tempfile::tempdir().unwrap();
    let cfg = ProviderConfig {
        mode: ProviderMode::Cached(BaseMode::Remote),
        endpoint: Some(stub.url.clone()),
        dim: 8,
        cache_path: Some(dir.path().join("embed.cache")),
        ..ProviderConfig::default()
    };
    let reqs = [EmbeddingRequest::word("dog").unwrap(), EmbeddingRequest::word("cat").unwrap()];
    let first = {
        let e = cfg.build().unwrap();
        e.embed_batch(&reqs).unwrap()
    };
    let calls = stub.hits.load(Ordering::SeqCst);
    assert!(calls >= 1);
    // A fresh process-level handle reads the persisted cache.
    let again = cfg.build().unwrap().embed_batch(&reqs).unwrap();
    assert_eq!(first, again);
    assert_eq!(stub.hits.load(Ordering::SeqCst), calls);
}

#[test]
fn sidecar_parse_golden_block() {
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/sidecar_parse_dog.conllu"))
        .unwrap();
    let block = golden.clone();
    let stub = serve(Arc::new(move |path, body| {
        assert_eq!(path, "/parse");
        let n = body["texts"].as_array().unwrap().len();
        (200, json!({ "conllu": vec![block.clone(); n] }).to_string())
    }));
    let client = SidecarClient::new(stub.url.clone(), 5_000);
    let parsed = client.parse(&["A dog chases a ball"]).unwrap();
    assert_eq!(parsed.len(), 1);
    let sentence = &parsed[0][0];
    assert_eq!(sentence, &mpve_core::parse_conllu_str(&golden).unwrap()[0]);

    let root = sentence.root().unwrap();
    assert_eq!(sentence.tokens[root].text, "chases");
    let units = extract_units(sentence);
    assert_eq!(units.len(), 1);
    assert_eq!(units[0].actor.map(|i| sentence.tokens[i].text.as_str()), Some("dog"));
    assert_eq!(units[0].recipient.map(|i| sentence.tokens[i].text.as_str()), Some("ball"));

    assert!(matches!(client.parse(&["  "]), Err(Error::EmptyText)));
    assert!(client.parse(&[]).unwrap().is_empty());
}

#[test]
fn sidecar_parse_count_mismatch_is_protocol_error() {
    let stub = serve(Arc::new(|_, _| (200, json!({"conllu": []}).to_string())));
    let client = SidecarClient::new(stub.url.clone(), 5_000);
    assert!(matches!(client.parse(&["A dog runs"]), Err(Error::ProviderProtocol(_))));
}

#[test]
fn sidecar_detect_contract() {
    let stub = serve(Arc::new(|path, body| {
        assert_eq!(path, "/detect");
        let caption = body["captions"][0].clone();
        let dets = json!([
            {"frame_index": 3, "caption": caption, "box": [1.0, 2.0, 30.0, 40.0], "confidence": 0.9},
            {"frame_index": 4, "caption": caption, "box": [1.0, 2.0, 31.0, 41.0], "confidence": 0.4}
        ]);
        (200, dets.to_string())
    }));
    let client = SidecarClient::new(stub.url.clone(), 5_000);
    let dets = client.detect("videos/a.mp4", &["dog run".to_string()], 0).unwrap();
    assert_eq!(dets.len(), 2);
    assert_eq!(dets[0].bbox, [1.0, 2.0, 30.0, 40.0]);
    assert_eq!(dets[1].caption, "dog run");

    let sent = &stub.bodies.lock().unwrap()[0].1;
    assert_eq!(sent, &json!({"video_ref": "videos/a.mp4", "captions": ["dog run"], "stride": 1}));
    assert!(client.detect("videos/a.mp4", &[], 1).is_err());
}

#[test]
fn concurrent_requests_are_bounded() {
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (f, p) = (in_flight.clone(), peak.clone());
    // The stub serves one connection at a time, so use a handler thread per
    // request to let concurrency show.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let (f, p) = (f.clone(), p.clone());
            thread::spawn(move || {
                let Some((_, body)) = read_request(&mut stream) else { return };
                let now = f.fetch_add(1, Ordering::SeqCst) + 1;
                p.fetch_max(now, Ordering::SeqCst);
                thread::sleep(std::time::Duration::from_millis(30));
                f.fetch_sub(1, Ordering::SeqCst);
                let n = body["texts"].as_array().map(|a| a.len()).unwrap_or(0);
                let text = json!({"dim": 2, "vectors": vec![[1.0, 0.0]; n]}).to_string();
                let resp = format!(
                    "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            });
        }
    });
    let e = Arc::new(RemoteEmbedder::new(url, 2, 5_000, 2));
    let workers: Vec<_> = (0..8)
        .map(|i| {
            let e = e.clone();
            thread::spawn(move || e.embed(&EmbeddingRequest::new(EmbedKind::Word, format!("w{i}")).unwrap()).unwrap())
        })
        .collect();
    for w in workers {
        w.join().unwrap();
    }
    assert!(peak.load(Ordering::SeqCst) <= 2, "peak {}", peak.load(Ordering::SeqCst));
}
