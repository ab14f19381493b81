#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use tower::ServiceExt;

use forge_core::diffusion::{write_model, DenoiserNet, Model, NoiseSchedule, TrainingInfo};
use forge_core::raster::encode_rgb8;
use forge_core::synth::{
    derive_sketch, generate_procedural_statue, rasterize_depth_normal, sketch_to_photo, view_pose, SketchParams,
    StatueConfig,
};
use forge_core::CameraIntrinsics;

pub fn forge(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .env_remove("FORGE_PROJECTS_DIR")
        .output()
        .expect("forge runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Photo of the frontal sketch of statue `seed` rendered at `r`, upsampled by `scale`.
pub fn photo_png(seed: u64, r: usize, scale: usize) -> Vec<u8> {
    let k = CameraIntrinsics::square(r);
    let (mesh, params) = generate_procedural_statue(seed, &StatueConfig::default());
    let pose = view_pose(&k, params.height, 0.0, 0.0, 0.75).unwrap();
    let (d, n) = rasterize_depth_normal(&mesh, &k, &pose, 1.0, 6.0).unwrap();
    let sketch = derive_sketch(&d, &n, &SketchParams::default()).unwrap();
    encode_rgb8(&sketch_to_photo(&sketch, scale).unwrap()).unwrap()
}

/// Untrained model with a short schedule, written to `dir/model.bin`.
pub fn tiny_model_file(dir: &Path, r: usize) -> PathBuf {
    let m = Model::new(
        DenoiserNet::init(3),
        NoiseSchedule::linear(8, 1e-4, 0.2).unwrap(),
        r,
        1.0,
        6.0,
        Some(CameraIntrinsics::square(r)),
        TrainingInfo::default(),
    )
    .unwrap();
    let path = dir.join("model.bin");
    std::fs::write(&path, write_model(&m).unwrap()).unwrap();
    path
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>, String) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, bytes, ctype)
}

pub async fn call_json(
    app: &Router,
    method: Method,
    uri: &str,
    body: serde_json::Value,
) -> (StatusCode, serde_json::Value) {
    let (s, b, _) = call(app, method, uri, serde_json::to_vec(&body).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(serde_json::Value::Null))
}

/// Polls a job until it finishes.
pub async fn wait_job(app: &Router, job: u64) -> serde_json::Value {
    let mut last_progress = 0.0;
    loop {
        let (s, v) = call_json(app, Method::GET, &format!("/api/jobs/{job}"), serde_json::Value::Null).await;
        assert_eq!(s, StatusCode::OK);
        let p = v["progress"].as_f64().unwrap();
        assert!(p >= last_progress, "progress went back from {last_progress} to {p}");
        last_progress = p;
        match v["state"].as_str().unwrap() {
            "done" | "failed" => return v,
            _ => tokio::time::sleep(std::time::Duration::from_millis(10)).await,
        }
    }
}

/// Drives create → photo → extract → inpaint → generate → reconstruct over
/// the API and returns the project id.
pub async fn api_happy_path(app: &Router, photo: Vec<u8>, seed: u64, n: usize, guidance: f32) -> String {
    api_happy_path_with_tag(app, photo, seed, n, guidance, 1).await
}

pub async fn api_happy_path_with_tag(
    app: &Router,
    photo: Vec<u8>,
    seed: u64,
    n: usize,
    guidance: f32,
    tag: usize,
) -> String {
    let (s, v) = call_json(app, Method::POST, "/api/projects", serde_json::json!({"name": "p"})).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["id"].as_str().unwrap().to_string();
    let (s, _, _) = call(app, Method::POST, &format!("/api/projects/{id}/photo"), photo).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call_json(app, Method::POST, &format!("/api/projects/{id}/extract"), serde_json::json!({})).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call_json(app, Method::POST, &format!("/api/projects/{id}/inpaint"), serde_json::json!({})).await;
    assert_eq!(s, StatusCode::OK);
    let body = serde_json::json!({"tag_id": tag, "n_samples": n, "guidance_scale": guidance, "seed": seed});
    let (s, v) = call_json(app, Method::POST, &format!("/api/projects/{id}/generate"), body).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let done = wait_job(app, v["job_id"].as_u64().unwrap()).await;
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(done["progress"], 1.0);
    let run = done["result"]["run"].as_u64().unwrap();
    for k in 0..n {
        let uri = format!("/api/projects/{id}/runs/{run}/variants/{k}/reconstruct");
        let (s, v) = call_json(app, Method::POST, &uri, serde_json::json!({})).await;
        assert_eq!(s, StatusCode::OK, "{v}");
    }
    id
}
