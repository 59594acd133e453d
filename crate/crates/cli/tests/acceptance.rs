//! Service-side acceptance: HTTP contract codes and CLI/service agreement
//! on a golden image set (criterion 10).

mod common;

use common::*;
use leafdx::forest::save_model;
use leafdx::pipeline::{extract_from_dir, train_plant, TrainConfig};
use leafdx_cli::serve;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use tokio::io::{AsyncReadExt, AsyncWriteExt};

async fn start_server(models_dir: &Path) -> SocketAddr {
    let registry = serve::load_registry(models_dir).expect("load registry");
    let app = serve::app(registry);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    addr
}

/// Minimal HTTP/1.1 client: one request, connection closed by the server.
async fn http(
    addr: SocketAddr,
    method: &str,
    path: &str,
    headers: &[(&str, &str)],
    body: &[u8],
) -> (u16, Vec<u8>) {
    let stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let (mut rd, mut wr) = stream.into_split();

    let mut req = format!("{method} {path} HTTP/1.1\r\nHost: test\r\nConnection: close\r\n");
    req.push_str(&format!("Content-Length: {}\r\n", body.len()));
    for (k, v) in headers {
        req.push_str(&format!("{k}: {v}\r\n"));
    }
    req.push_str("\r\n");
    let mut wire = req.into_bytes();
    wire.extend_from_slice(body);
    // The server may answer (and reset) before an oversize body finishes
    // uploading, so write failures are expected in that contract test.
    let writer = tokio::spawn(async move {
        let _ = wr.write_all(&wire).await;
        let _ = wr.shutdown().await;
    });

    let mut response = Vec::new();
    let _ = rd.read_to_end(&mut response).await;
    writer.await.unwrap();

    let head_end = response
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .expect("complete response head");
    let head = String::from_utf8_lossy(&response[..head_end]).into_owned();
    let status: u16 = head
        .lines()
        .next()
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|s| s.parse().ok())
        .expect("status line");
    (status, response[head_end + 4..].to_vec())
}

fn json(body: &[u8]) -> serde_json::Value {
    serde_json::from_slice(body).unwrap_or_else(|e| {
        panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(body))
    })
}

/// Synthetic dataset + two trained models on disk.
fn fixture(work: &Path) -> (PathBuf, PathBuf) {
    let data = work.join("data");
    write_small_dataset(&data);
    let cache = extract_from_dir(&data).unwrap();
    let models = work.join("models");
    std::fs::create_dir_all(&models).unwrap();
    let cfg = TrainConfig {
        forest: leafdx::forest::ForestParams { n_trees: 20, ..Default::default() },
        ..Default::default()
    };
    for plant in ["Apple", "Tomato"] {
        let run = train_plant(&cache, plant, 0.25, 42, &cfg).unwrap();
        save_model(&run.model, &models.join(format!("{}.json", plant.to_lowercase()))).unwrap();
    }
    (data, models)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_endpoint_reports_models() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, models) = fixture(tmp.path());
    let addr = start_server(&models).await;

    let (status, body) = http(addr, "GET", "/health", &[], b"").await;
    assert_eq!(status, 200);
    let doc = json(&body);
    assert_eq!(doc["status"], "ok");
    assert_eq!(doc["models"], serde_json::json!(["Apple", "Tomato"]));

    // HEAD gets 200 with an empty body.
    let (status, body) = http(addr, "HEAD", "/health", &[], b"").await;
    assert_eq!(status, 200);
    assert!(body.is_empty(), "HEAD body must be empty");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn predict_contract_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, models) = fixture(tmp.path());
    let addr = start_server(&models).await;
    let png = std::fs::read(data.join("Apple___scab/leaf_0001.png")).unwrap();

    // 200 on a valid request.
    let (status, body) =
        http(addr, "POST", "/predict?plant=Apple", &[("Content-Type", "image/png")], &png).await;
    assert_eq!(status, 200, "{}", String::from_utf8_lossy(&body));
    let doc = json(&body);
    assert_eq!(doc["plant"], "Apple");
    assert!(doc["feature_vector"]["area"].as_f64().unwrap() > 0.0);
    let votes: u64 = doc["votes"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(votes, 20, "votes must sum to n_trees");

    // 404 unknown plant.
    let (status, body) =
        http(addr, "POST", "/predict?plant=Banana", &[("Content-Type", "image/png")], &png).await;
    assert_eq!(status, 404);
    assert_eq!(json(&body)["error"], "unknown_plant");

    // 404 missing plant parameter.
    let (status, _) =
        http(addr, "POST", "/predict", &[("Content-Type", "image/png")], &png).await;
    assert_eq!(status, 404);

    // 415 wrong content type.
    let (status, body) =
        http(addr, "POST", "/predict?plant=Apple", &[("Content-Type", "text/plain")], &png).await;
    assert_eq!(status, 415);
    assert_eq!(json(&body)["error"], "unsupported_content_type");

    // 413 oversize body (20 MiB).
    let big = vec![0u8; 20 * 1024 * 1024];
    let (status, body) =
        http(addr, "POST", "/predict?plant=Apple", &[("Content-Type", "image/png")], &big).await;
    assert_eq!(status, 413);
    assert_eq!(json(&body)["error"], "payload_too_large");

    // 400 undecodable image.
    let (status, body) = http(
        addr,
        "POST",
        "/predict?plant=Apple",
        &[("Content-Type", "image/png")],
        b"not a png at all",
    )
    .await;
    assert_eq!(status, 400);
    assert_eq!(json(&body)["error"], "decode_error");

    // 400 empty foreground (an all-black image decodes but has no leaf).
    let black = leafdx::synth::png_bytes(&leafdx::imaging::RasterImage::filled(32, 32, [0, 0, 0]));
    let (status, body) =
        http(addr, "POST", "/predict?plant=Apple", &[("Content-Type", "image/png")], &black).await;
    assert_eq!(status, 400);
    assert_eq!(json(&body)["error"], "empty_foreground");

    println!("service contract codes 200/400/404/413/415 all exercised");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_identical_requests_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, models) = fixture(tmp.path());
    let addr = start_server(&models).await;
    let png = std::fs::read(data.join("Tomato___blight/leaf_0002.png")).unwrap();

    let mut tasks = Vec::new();
    for _ in 0..8 {
        let png = png.clone();
        tasks.push(tokio::spawn(async move {
            http(addr, "POST", "/predict?plant=Tomato", &[("Content-Type", "image/png")], &png)
                .await
        }));
    }
    let mut bodies = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, 200);
        bodies.push(body);
    }
    for b in &bodies[1..] {
        assert_eq!(b, &bodies[0], "concurrent responses must be identical");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn criterion_10_cli_service_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, models) = fixture(tmp.path());
    let addr = start_server(&models).await;

    // 20 golden images across both plants and all classes.
    let mut goldens: Vec<(String, PathBuf)> = Vec::new();
    for (plant, class) in [
        ("Apple", "healthy"),
        ("Apple", "scab"),
        ("Apple", "rot"),
        ("Tomato", "healthy"),
        ("Tomato", "blight"),
    ] {
        for i in 0..4 {
            goldens.push((
                plant.to_string(),
                data.join(format!("{plant}___{class}/leaf_{i:04}.png")),
            ));
        }
    }
    assert_eq!(goldens.len(), 20);

    for (plant, image) in &goldens {
        let model = models.join(format!("{}.json", plant.to_lowercase()));
        let out = run(&[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--image",
            image.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "cli predict failed: {}", stderr(&out));
        let cli: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();

        let png = std::fs::read(image).unwrap();
        let (status, body) = http(
            addr,
            "POST",
            &format!("/predict?plant={plant}"),
            &[("Content-Type", "image/png")],
            &png,
        )
        .await;
        assert_eq!(status, 200);
        let svc = json(&body);

        assert_eq!(cli["label"], svc["label"], "label mismatch on {}", image.display());
        let cli_conf = cli["confidence"].as_f64().unwrap();
        let svc_conf = svc["confidence"].as_f64().unwrap();
        assert_eq!(
            cli_conf.to_bits(),
            svc_conf.to_bits(),
            "confidence mismatch on {}",
            image.display()
        );
        assert_eq!(cli["votes"], svc["votes"]);
    }

    println!("criterion 10: PASS — CLI and service agree on 20 golden images; error codes covered");
}
