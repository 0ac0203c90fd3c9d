use std::net::SocketAddr;

use fieldnet_server::{ServeError, Server, ServerConfig};
use reqwest::StatusCode;
use serde_json::Value;
use tokio::sync::oneshot;

struct Running {
    base: String,
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<Result<(), ServeError>>,
}

impl Running {
    async fn start(config: ServerConfig) -> Self {
        let server = Server::bind("127.0.0.1:0".parse().unwrap(), &config).await.unwrap();
        let addr = server.local_addr().unwrap();
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(server.run(async {
            let _ = rx.await;
        }));
        Self {
            base: format!("http://{addr}"),
            addr,
            stop: Some(tx),
            task,
        }
    }

    async fn shutdown(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.await.unwrap().unwrap();
    }
}

async fn call(method: reqwest::Method, url: String, body: Option<&str>) -> (StatusCode, String, String) {
    let mut req = reqwest::Client::new().request(method, url);
    if let Some(b) = body {
        req = req.body(b.to_string());
    }
    let resp = req.send().await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    (status, ctype, resp.text().await.unwrap())
}

fn records(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const SOIL_NODE: &str = r#"{"node_id":"s1","kind":"soil","position":[55.86,-4.25],"groups":["soil","riverside"]}"#;

fn packet(node: &str, seq: u64, t: u64) -> String {
    format!(
        r#"{{"node_id":"{node}","seq":{seq},"t":{t},"kind":"soil","readings":[{{"channel":"air_temp.1","value":{v},"unit":"degC"}}],"battery_mv":3900}}"#,
        v = 10.0 + seq as f64
    )
}

#[tokio::test]
async fn registry_and_ingest_over_ndjson() {
    let srv = Running::start(ServerConfig::default()).await;
    let b = &srv.base;
    use reqwest::Method as M;

    let (st, ctype, body) = call(M::POST, format!("{b}/nodes"), Some(SOIL_NODE)).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    assert_eq!(ctype, "application/x-ndjson");
    assert_eq!(records(&body)[0]["node_id"], "s1");

    let (st, _, body) = call(M::POST, format!("{b}/nodes"), Some(SOIL_NODE)).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert!(records(&body)[0]["error"].as_str().unwrap().contains("s1"));

    for g in ["soil", "riverside"] {
        let (_, _, body) = call(M::GET, format!("{b}/nodes?group={g}"), None).await;
        assert_eq!(records(&body).len(), 1, "{g}");
    }

    let batch = [packet("s1", 0, 0), packet("s1", 1, 305), packet("ghost", 0, 10)].join("\n");
    let (st, _, body) = call(M::POST, format!("{b}/ingest"), Some(&batch)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body.lines().count(), 3);
    // Duplicates are acknowledged again without changing the store.
    let (_, _, again) = call(M::POST, format!("{b}/ingest"), Some(&batch)).await;
    assert_eq!(again, body);

    let (_, _, stats) = call(M::GET, format!("{b}/stats"), None).await;
    let stats = &records(&stats)[0];
    assert_eq!(stats["packets"], 2);
    assert_eq!(stats["quarantined"], 1);
    assert_eq!(stats["soil_nodes"], 1);

    let (_, _, body) = call(
        M::GET,
        format!("{b}/series?node=s1&channel=air_temp.1&from=0&to=400"),
        None,
    )
    .await;
    let pts = records(&body);
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[0]["t"], 0);
    assert_eq!(pts[1]["value"], 11.0);

    let (st, _, _) = call(M::GET, format!("{b}/series?node=s1&channel=nope"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _, _) = call(
        M::GET,
        format!("{b}/series?node=s1&channel=air_temp.1&from=9&to=1"),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _, body) = call(
        M::GET,
        format!("{b}/series?node=s1&channel=air_temp.1&from=1000&to=2000"),
        None,
    )
    .await;
    assert_eq!((st, body.as_str()), (StatusCode::OK, ""));

    let (st, ctype, body) = call(M::GET, format!("{b}/export/semantic?node=s1&seq=1"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(ctype.starts_with("text/plain"));
    assert!(body.lines().count() >= 4);
    assert!(body.contains("\"degC\""));

    let (_, _, body) = call(M::PATCH, format!("{b}/nodes/s1"), Some(r#"{"notes":"moved"}"#)).await;
    assert_eq!(records(&body)[0]["notes"], "moved");
    let (_, _, body) = call(M::GET, format!("{b}/nodes/s1"), None).await;
    assert_eq!(records(&body)[0]["history"].as_array().unwrap().len(), 2);

    let (_, _, body) = call(M::GET, format!("{b}/nodes/s1/health"), None).await;
    let h = &records(&body)[0];
    assert_eq!(h["last_heard"], 305);
    assert_eq!(h["battery_mv"], 3900);

    let (st, _, _) = call(M::GET, format!("{b}/nodes/zz/health"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _, body) = call(M::POST, format!("{b}/ingest"), Some("{not json}")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(body.contains("line 1"));

    srv.shutdown().await;
}

#[tokio::test]
async fn group_rate_fans_out_and_validates() {
    let srv = Running::start(ServerConfig::default()).await;
    let b = &srv.base;
    use reqwest::Method as M;
    call(M::POST, format!("{b}/nodes"), Some(SOIL_NODE)).await;
    let other = r#"{"node_id":"l1","kind":"livestock","position":[55.86,-4.25],"groups":["livestock"]}"#;
    call(M::POST, format!("{b}/nodes"), Some(other)).await;

    let (st, _, body) = call(M::POST, format!("{b}/groups/soil/rate"), Some(r#"{"period_s":600}"#)).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    assert_eq!(records(&body)[0]["fanout"].as_array().unwrap().len(), 1);
    let (_, _, body) = call(M::GET, format!("{b}/groups/soil/commands"), None).await;
    assert_eq!(records(&body)[0]["state"], "issued");
    let (_, _, body) = call(M::GET, format!("{b}/nodes/l1/commands"), None).await;
    assert_eq!(body, "");

    let (st, _, _) = call(M::POST, format!("{b}/groups/soil/rate"), Some(r#"{"period_s":14}"#)).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _, _) = call(M::POST, format!("{b}/groups/nobody/rate"), Some(r#"{"period_s":600}"#)).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, _, body) = call(
        M::POST,
        format!("{b}/nodes/l1/commands"),
        Some(r#"{"command":"power_cycle"}"#),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{body}");

    let (_, _, body) = call(M::GET, format!("{b}/health/silent"), None).await;
    // Neither node has ever reported.
    assert_eq!(records(&body).len(), 2);

    let (st, _, _) = call(M::GET, format!("{b}/sim/status"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    srv.shutdown().await;
}

#[tokio::test]
async fn store_is_created_and_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("fresh");
    let config = ServerConfig {
        store: Some(store.clone()),
        ..Default::default()
    };
    let srv = Running::start(config.clone()).await;
    assert!(store.is_dir());
    call(reqwest::Method::POST, format!("{}/nodes", srv.base), Some(SOIL_NODE)).await;
    let batch = [packet("s1", 0, 0), packet("s1", 1, 305)].join("\n");
    call(reqwest::Method::POST, format!("{}/ingest", srv.base), Some(&batch)).await;
    srv.shutdown().await;

    let srv = Running::start(config).await;
    let (_, _, body) = call(reqwest::Method::GET, format!("{}/stats", srv.base), None).await;
    assert_eq!(records(&body)[0]["packets"], 2);
    srv.shutdown().await;
}

#[tokio::test]
async fn second_server_on_a_busy_port_fails_cleanly() {
    let srv = Running::start(ServerConfig::default()).await;
    let err = Server::bind(srv.addr, &ServerConfig::default())
        .await
        .err()
        .expect("bind must fail");
    assert!(matches!(err, ServeError::Bind { .. }), "{err}");
    assert!(err.to_string().contains(&srv.addr.to_string()));
    // The first server is unaffected.
    let (st, _, _) = call(reqwest::Method::GET, format!("{}/stats", srv.base), None).await;
    assert_eq!(st, StatusCode::OK);
    srv.shutdown().await;
}

#[tokio::test]
async fn serves_static_assets_next_to_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>console</h1>").unwrap();
    let srv = Running::start(ServerConfig {
        assets: Some(dir.path().to_path_buf()),
        ..Default::default()
    })
    .await;
    let (st, _, body) = call(reqwest::Method::GET, format!("{}/index.html", srv.base), None).await;
    assert_eq!((st, body.as_str()), (StatusCode::OK, "<h1>console</h1>"));
    let (st, _, _) = call(reqwest::Method::GET, format!("{}/stats", srv.base), None).await;
    assert_eq!(st, StatusCode::OK);
    srv.shutdown().await;
}
