use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use brittle_core::lime::LimeConfig;
use brittle_core::models::{ArchitectureSpec, BlackBoxModel, ConstantModel, Network};
use brittle_core::scoring::brittle_score;
use brittle_core::{Error, Matrix, Result, SeededRng};
use brittle_service::{serve, RemoteModel, DEFAULT_MAX_BATCH};

fn mlp(d: usize, c: usize, seed: u64) -> Network {
    let spec = ArchitectureSpec::Mlp {
        input_dim: d,
        hidden: vec![16],
        num_classes: c,
    };
    Network::new(format!("mlp-{seed}"), spec, &mut SeededRng::new(seed)).unwrap()
}

fn random_batch(rows: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_vec(rows, d, (0..rows * d).map(|_| rng.uniform()).collect()).unwrap()
}

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

/// One HTTP/1.1 exchange over a fresh connection; returns (status, body).
fn raw_request(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status = response[9..12].parse().unwrap();
    let body = response.split("\r\n\r\n").nth(1).unwrap_or("").to_string();
    (status, body)
}

#[test]
fn metadata_echoes_the_model() {
    let server = serve(mlp(5, 3, 1), "127.0.0.1:0").unwrap();
    let addr = server.local_addr().to_string();
    let (status, body) = raw_request(&addr, "GET", "/v1/metadata", "");
    assert_eq!(status, 200);
    let meta: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(meta["input_dim"], 5);
    assert_eq!(meta["num_classes"], 3);
    assert_eq!(meta["model_id"], "mlp-1");
    let remote =
        RemoteModel::connect(&server.url(), Duration::from_secs(5), DEFAULT_MAX_BATCH).unwrap();
    assert_eq!((remote.input_dim(), remote.num_classes()), (5, 3));
}

#[test]
fn invalid_requests_get_error_statuses() {
    let server = serve(mlp(4, 2, 2), "127.0.0.1:0").unwrap();
    let addr = server.local_addr().to_string();
    for body in ["{not json", r#"{"rows": []}"#, r#"{"inputs": [["a"]]}"#] {
        let (status, text) = raw_request(&addr, "POST", "/v1/predict", body);
        assert_eq!(status, 400, "{body}");
        assert!(text.contains("\"error\""));
    }
    let (status, text) = raw_request(
        &addr,
        "POST",
        "/v1/predict",
        r#"{"inputs": [[0.1, 0.2, 0.3, 0.4], [0.5]]}"#,
    );
    assert_eq!(status, 422);
    assert!(text.contains("row 1"), "{text}");
}

struct Failing;

impl BlackBoxModel for Failing {
    fn input_dim(&self) -> usize {
        2
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn predict(&self, _batch: &Matrix) -> Result<Matrix> {
        Err(Error::InvalidArgument("broken model".into()))
    }
}

#[test]
fn model_failures_are_internal_errors() {
    let server = serve(Failing, "127.0.0.1:0").unwrap();
    let (status, text) = raw_request(
        &server.local_addr().to_string(),
        "POST",
        "/v1/predict",
        r#"{"inputs": [[0.1, 0.2]]}"#,
    );
    assert_eq!(status, 500);
    assert!(text.contains("broken model"));
}

#[test]
fn remote_predictions_match_in_process_bitwise() {
    let model = mlp(6, 4, 3);
    let server = serve(model.clone(), "127.0.0.1:0").unwrap();
    let remote =
        RemoteModel::connect(&server.url(), Duration::from_secs(5), DEFAULT_MAX_BATCH).unwrap();
    let three = random_batch(3, 6, 4);
    assert_eq!(
        bits(&remote.predict(&three).unwrap()),
        bits(&model.predict(&three).unwrap())
    );

    let hundred = random_batch(100, 6, 5);
    let single = RemoteModel::connect(&server.url(), Duration::from_secs(5), 1).unwrap();
    let a = single.predict(&hundred).unwrap();
    let b = remote.predict(&hundred).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(bits(&a), bits(&model.predict(&hundred).unwrap()));
    assert!(matches!(
        remote.predict(&random_batch(2, 5, 1)),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn loopback_scoring_is_transparent() {
    let model = mlp(10, 3, 6);
    let server = serve(model.clone(), "127.0.0.1:0").unwrap();
    let remote =
        RemoteModel::connect(&server.url(), Duration::from_secs(10), DEFAULT_MAX_BATCH).unwrap();
    let samples = random_batch(8, 10, 7);
    let config = LimeConfig {
        k: 150,
        ..LimeConfig::default().with_seed(11)
    };
    let local = brittle_score(&model, &samples, "u", &config).unwrap();
    let through = brittle_score(&remote, &samples, "u", &config).unwrap();
    assert_eq!(
        local.brittle_score.to_bits(),
        through.brittle_score.to_bits()
    );
    assert_eq!(local.per_sample_l1, through.per_sample_l1);
    assert_eq!(local.model_id, through.model_id);
}

/// Serves fixed metadata and answers every predict call with `reply(rows)`.
fn fake_endpoint(reply: fn(usize) -> String) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let payload = if request_line.starts_with("GET") {
                r#"{"model_id":"fake","input_dim":2,"num_classes":2}"#.to_string()
            } else {
                let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
                reply(v["inputs"].as_array().unwrap().len())
            };
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    format!("http://{addr}")
}

fn rows_json(rows: &[&str]) -> String {
    format!(r#"{{"model_id":"fake","outputs":[{}]}}"#, rows.join(","))
}

#[test]
fn non_normalized_rows_are_rejected_by_index() {
    let url = fake_endpoint(|n| {
        let mut rows = vec!["[0.5,0.5]"; n];
        if n > 2 {
            rows[2] = "[0.5,0.6]";
        }
        rows_json(&rows)
    });
    let remote = RemoteModel::connect(&url, Duration::from_secs(5), 64).unwrap();
    let err = remote.predict(&random_batch(4, 2, 1)).unwrap_err();
    assert!(
        matches!(&err, Error::Protocol(m) if m.contains("row 2")),
        "{err}"
    );
}

#[test]
fn miscounted_responses_are_rejected() {
    let url = fake_endpoint(|n| rows_json(&vec!["[0.5,0.5]"; n + 1]));
    let remote = RemoteModel::connect(&url, Duration::from_secs(5), 64).unwrap();
    assert!(matches!(
        remote.predict(&random_batch(3, 2, 1)),
        Err(Error::Protocol(_))
    ));
}

#[test]
fn unreachable_endpoints_are_transport_errors() {
    let server = serve(
        ConstantModel::new(2, vec![1.0, 0.0]).unwrap(),
        "127.0.0.1:0",
    )
    .unwrap();
    let url = server.url();
    drop(server);
    assert!(matches!(
        RemoteModel::connect(&url, Duration::from_secs(2), 8),
        Err(Error::Transport(_))
    ));
}

#[test]
fn bind_failures_are_reported() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap();
    assert!(serve(ConstantModel::new(2, vec![1.0, 0.0]).unwrap(), addr).is_err());
}
