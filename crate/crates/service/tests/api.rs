use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use salmanip_core::image::io;
use salmanip_core::synthetic::scene;
use salmanip_core::{run_manipulation, ManipulationConfig, Mask, Mode, RgbImage};
use salmanip_service::{router, ServiceConfig};
use serde_json::Value;
use tower::ServiceExt;

const BOUNDARY: &str = "salmanip-test-boundary";

enum Part<'a> {
    File(&'a str, &'a [u8]),
    Text(&'a str, &'a str),
}

fn multipart(parts: &[Part]) -> Vec<u8> {
    let mut body = Vec::new();
    for part in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match part {
            Part::File(name, bytes) => {
                body.extend_from_slice(
                    format!(
                        "Content-Disposition: form-data; name=\"{name}\"; filename=\"{name}.png\"\r\nContent-Type: image/png\r\n\r\n"
                    )
                    .as_bytes(),
                );
                body.extend_from_slice(bytes);
            }
            Part::Text(name, value) => {
                body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}").as_bytes());
            }
        }
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn post(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::post(uri)
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

struct Inputs {
    image: RgbImage,
    image_png: Vec<u8>,
    mask: Mask,
    mask_png: Vec<u8>,
}

fn inputs(seed: u64, size: usize) -> Inputs {
    let sc = scene(seed, size);
    Inputs {
        image_png: io::encode_rgb_png(&sc.image).unwrap(),
        mask_png: io::encode_mask_png(&sc.region).unwrap(),
        image: sc.image,
        mask: sc.region,
    }
}

async fn submit(app: &Router, inp: &Inputs, fields: &[(&str, &str)]) -> (StatusCode, Value) {
    let mut parts = vec![Part::File("image", &inp.image_png), Part::File("mask", &inp.mask_png)];
    parts.extend(fields.iter().map(|(k, v)| Part::Text(k, v)));
    let (status, body) = send(app, post("/api/jobs", multipart(&parts))).await;
    (status, json(&body))
}

async fn wait_terminal(app: &Router, id: &str) -> Value {
    let started = Instant::now();
    loop {
        let (status, body) = get(app, &format!("/api/jobs/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        let v = json(&body);
        if !matches!(v["status"].as_str(), Some("queued" | "running")) {
            return v;
        }
        assert!(started.elapsed() < Duration::from_secs(300), "job {id} did not finish");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn job_lifecycle() {
    let app = router(ServiceConfig::default());
    let inp = inputs(1, 48);
    let (status, body) = submit(&app, &inp, &[("mode", "enhance"), ("delta_s", "0.6")]).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = body["job_id"].as_str().unwrap().to_string();

    let done = wait_terminal(&app, &id).await;
    let status = done["status"].as_str().unwrap();
    assert!(["converged", "threshold_stall", "iteration_cap"].contains(&status), "{done}");
    assert_eq!(done["mode"], "enhance");
    assert!(done["final_psi"].is_number());
    let trace = done["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    let iters: Vec<u64> = trace.iter().map(|t| t["iter"].as_u64().unwrap()).collect();
    assert!(iters.windows(2).all(|w| w[0] < w[1]), "{iters:?}");
    for key in ["psi", "tau_plus", "tau_minus"] {
        assert!(trace[0][key].is_number());
    }

    let (st, png) = get(&app, &format!("/api/jobs/{id}/artifact?kind=result")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(io::decode_rgb_png(&png).unwrap().dimensions(), (48, 48));
    for kind in ["saliency_in", "saliency_out"] {
        let (st, png) = get(&app, &format!("/api/jobs/{id}/artifact?kind={kind}")).await;
        assert_eq!(st, StatusCode::OK);
        let (w, h, _) = io::decode_gray_png(&png).unwrap();
        assert_eq!((w, h), (48, 48));
    }
    let (st, body) = get(&app, &format!("/api/jobs/{id}/artifact?kind=thumbnail")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(json(&body)["error"].as_str().unwrap().contains("unknown artifact kind"));
}

#[tokio::test]
async fn rejects_malformed_submissions() {
    let app = router(ServiceConfig::default());
    let inp = inputs(0, 32);

    let (status, body) = submit(&app, &inp, &[("delta_s", "2")]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "delta_s out of range");

    let small = io::encode_mask_png(&Mask::from_fn(16, 16, |x, _| x < 8)).unwrap();
    let parts = [Part::File("image", &inp.image_png), Part::File("mask", &small)];
    let (status, body) = send(&app, post("/api/jobs", multipart(&parts))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "mask size mismatch");

    let parts = [Part::File("image", b"not a png"), Part::File("mask", &inp.mask_png)];
    let (status, body) = send(&app, post("/api/jobs", multipart(&parts))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(json(&body)["error"].as_str().unwrap().starts_with("invalid image"));

    let (status, _) = submit(&app, &inp, &[("mode", "sharpen")]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_job_is_404() {
    let app = router(ServiceConfig::default());
    assert_eq!(get(&app, "/api/jobs/nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/jobs/nope/artifact?kind=result").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unfinished_artifact_is_409_and_queue_respects_limit() {
    let app = router(ServiceConfig { max_concurrent_jobs: 1, ..ServiceConfig::default() });
    let inp = inputs(2, 64);
    let mut ids = Vec::new();
    for seed in ["0", "1", "2"] {
        let (status, body) = submit(&app, &inp, &[("seed", seed)]).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        ids.push(body["job_id"].as_str().unwrap().to_string());
    }
    let (st, _) = get(&app, &format!("/api/jobs/{}/artifact?kind=result", ids[2])).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let started = Instant::now();
    loop {
        let mut statuses = Vec::new();
        for id in &ids {
            statuses.push(json(&get(&app, &format!("/api/jobs/{id}")).await.1)["status"].as_str().unwrap().to_string());
        }
        assert!(statuses.iter().filter(|s| *s == "running").count() <= 1, "{statuses:?}");
        // FIFO: a later job never starts before an earlier one.
        let rank = |s: &str| match s {
            "queued" => 0,
            "running" => 1,
            _ => 2,
        };
        assert!(statuses.windows(2).all(|w| rank(&w[0]) >= rank(&w[1])), "{statuses:?}");
        if statuses.iter().all(|s| rank(s) == 2) {
            break;
        }
        assert!(started.elapsed() < Duration::from_secs(300));
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_jobs_match_serial_runs() {
    let app = router(ServiceConfig::default());
    let jobs = [(inputs(4, 48), "0"), (inputs(5, 48), "3")];
    let mut ids = Vec::new();
    for (inp, seed) in &jobs {
        ids.push(submit(&app, inp, &[("seed", seed), ("mode", "declutter")]).await.1["job_id"].as_str().unwrap().to_string());
    }
    for ((inp, seed), id) in jobs.iter().zip(&ids) {
        wait_terminal(&app, id).await;
        let (_, served) = get(&app, &format!("/api/jobs/{id}/artifact?kind=result")).await;
        let cfg = ManipulationConfig { seed: seed.parse().unwrap(), ..ManipulationConfig::default() };
        let (serial, _) = run_manipulation(&inp.image, &inp.mask, Mode::Declutter, &cfg).unwrap();
        assert_eq!(served, io::encode_rgb_png(&serial).unwrap());
    }
}

#[tokio::test]
async fn saliency_preview() {
    let app = router(ServiceConfig::default());

    let flat = io::encode_rgb_png(&RgbImage::from_fn(40, 30, |_, _| [90, 120, 150])).unwrap();
    let (st, png) = send(&app, post("/api/saliency", multipart(&[Part::File("image", &flat)]))).await;
    assert_eq!(st, StatusCode::OK);
    let (w, h, data) = io::decode_gray_png(&png).unwrap();
    assert_eq!((w, h), (40, 30));
    assert!(data.iter().all(|&v| v == 0));

    let inside = |x: usize, y: usize| (16..24).contains(&x) && (12..20).contains(&y);
    let square =
        RgbImage::from_fn(40, 32, |x, y| if inside(x, y) { [220, 30, 30] } else { [40, 110, 40] });
    let raw = Request::post("/api/saliency")
        .header("content-type", "image/png")
        .body(Body::from(io::encode_rgb_png(&square).unwrap()))
        .unwrap();
    let (st, png) = send(&app, raw).await;
    assert_eq!(st, StatusCode::OK);
    let (w, _, data) = io::decode_gray_png(&png).unwrap();
    let mean = |pred: &dyn Fn(usize, usize) -> bool| {
        let v: Vec<f64> =
            data.iter().enumerate().filter(|(i, _)| pred(i % w, i / w)).map(|(_, &v)| v as f64).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let far = |x: usize, y: usize| !(12..28).contains(&x) || !(8..24).contains(&y);
    assert!(mean(&inside) > 4.0 * mean(&far), "{} vs {}", mean(&inside), mean(&far));

    let wide = io::encode_rgb_png(&RgbImage::from_fn(800, 60, |x, y| [(x % 256) as u8, (y * 4) as u8, 77])).unwrap();
    let (st, png) = send(&app, post("/api/saliency", multipart(&[Part::File("image", &wide)]))).await;
    assert_eq!(st, StatusCode::OK);
    let (w, h, _) = io::decode_gray_png(&png).unwrap();
    assert_eq!((w, h), (400, 30));

    let (st, _) = send(&app, post("/api/saliency", multipart(&[Part::File("image", b"garbage")]))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn static_files_and_persistence() {
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<h1>salmanip</h1>").unwrap();
    let store = tempfile::tempdir().unwrap();
    let app = router(ServiceConfig {
        static_dir: Some(web.path().to_path_buf()),
        persist_dir: Some(store.path().to_path_buf()),
        ..ServiceConfig::default()
    });
    let (st, body) = get(&app, "/").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body, b"<h1>salmanip</h1>");

    let inp = inputs(6, 40);
    let id = submit(&app, &inp, &[]).await.1["job_id"].as_str().unwrap().to_string();
    wait_terminal(&app, &id).await;
    for f in ["result.png", "saliency_in.png", "saliency_out.png", "report.json"] {
        assert!(store.path().join(&id).join(f).is_file(), "{f}");
    }
}
