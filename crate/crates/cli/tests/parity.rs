use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use tower::ServiceExt;

use scriptoria::config::Settings;
use scriptoria::synth::{generate, GenConfig, WriterProfile};
use scriptoria_cli::server::{router, AppState};
use scriptoria_cli::store::Store;

#[tokio::test]
async fn http_and_cli_write_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig {
        lines: 5,
        words_per_line: 4,
        canvas_width: 900,
        canvas_height: 600,
        ..GenConfig::default()
    };
    let (img, _) = generate(&WriterProfile::example(), 21, &cfg).unwrap();
    let png = img.to_gray().to_png_bytes().unwrap();
    let path = dir.path().join("page.png");
    std::fs::write(&path, &png).unwrap();

    let cli_dir = dir.path().join("cli");
    let out = Command::new(env!("CARGO_BIN_EXE_scriptoria"))
        .arg("analyze")
        .arg(&path)
        .arg("--out")
        .arg(&cli_dir)
        .env_remove("SCRIPTORIA_CONFIG")
        .output()
        .unwrap();
    assert!(out.status.success());

    let store_root = dir.path().join("store");
    let app = router(Arc::new(
        AppState::new(Store::open(&store_root).unwrap(), Settings::default()).unwrap(),
    ));
    let resp = app
        .clone()
        .oneshot(Request::post("/documents").body(Body::from(png)).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let id = serde_json::from_slice::<serde_json::Value>(&body).unwrap()["id"]
        .as_str()
        .unwrap()
        .to_string();
    let resp = app
        .oneshot(
            Request::get(format!("/documents/{id}/features?mode=raw"))
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);

    let http_dir = store_root.join(&id);
    for f in ["document.json", "layout.json", "session.json", "binary.png", "source.png", "features-raw.json"] {
        let a = std::fs::read(cli_dir.join(f)).unwrap();
        let b = std::fs::read(http_dir.join(f)).unwrap();
        assert!(a == b, "{f} differs between CLI and HTTP");
    }
}
