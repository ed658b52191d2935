mod common;

use std::io::Write;
use std::net::TcpStream;
use std::time::Duration;

use touchsig_core::error::IngestError;
use touchsig_core::ingest::{
    assemble_lines, encode_session, load_all, replay, serve, Counter, Hello, IngestStats, ServerConfig, ServerHandle,
};
use touchsig_core::model::{HandMode, LabeledTrace, TraceMeta};
use touchsig_core::synth::{gen_dataset, ClassSet, GenSpec};

const WAIT: Duration = Duration::from_secs(10);

fn start(dir: &std::path::Path, raw: bool) -> ServerHandle {
    serve(&ServerConfig {
        bind: "127.0.0.1:0".into(),
        out: dir.join("data.ndjson"),
        raw_log_dir: raw.then(|| dir.join("raw")),
    })
    .unwrap()
}

fn traces_for(user: &str, seed: u64) -> (Hello, Vec<LabeledTrace>) {
    let meta = TraceMeta {
        user_id: user.into(),
        device: "phone".into(),
        browser: "test".into(),
        hand_mode: HandMode::TwoHand,
        collected_at: Some("2024-05-01".into()),
    };
    let traces: Vec<LabeledTrace> = gen_dataset(&GenSpec::new(ClassSet::Actions, 1, 4.0, seed))
        .unwrap()
        .into_iter()
        .map(|t| LabeledTrace::new(t.sequences().clone(), t.interval_ms(), t.label(), meta.clone()).unwrap())
        .collect();
    (Hello::from_meta(format!("session-{user}"), &meta), traces)
}

#[test]
fn simultaneous_clients_stay_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), false);
    let addr = server.local_addr();
    let (ha, ta) = traces_for("alice", 1);
    let (hb, tb) = traces_for("bob", 2);
    let (la, lb) = (encode_session(&ha, &ta), encode_session(&hb, &tb));
    std::thread::scope(|s| {
        s.spawn(|| replay(addr, &la).unwrap());
        s.spawn(|| replay(addr, &lb).unwrap());
    });
    assert!(common::wait_for(server.stats(), Counter::TracesPersisted, 16, WAIT));
    server.shutdown().unwrap();
    let stored = load_all(dir.path().join("data.ndjson")).unwrap();
    let of = |user: &str| -> Vec<LabeledTrace> {
        stored.iter().filter(|t| t.meta().user_id == user).cloned().collect()
    };
    assert_eq!(of("alice"), ta);
    assert_eq!(of("bob"), tb);
}

#[test]
fn disconnect_mid_segment_discards_it() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), false);
    let (h, t) = traces_for("carol", 3);
    let mut lines = encode_session(&h, &t[..2]);
    // cut the second segment off before its end marker
    lines.pop();
    let offline = IngestStats::new();
    assert_eq!(assemble_lines(lines.iter().map(String::as_str), &offline).len(), 1);
    replay(server.local_addr(), &lines).unwrap();
    assert!(common::wait_for(server.stats(), Counter::DisconnectMidSegment, 1, WAIT));
    let stats = server.shutdown().unwrap();
    assert_eq!(stats.get(Counter::TracesPersisted), 1);
    assert_eq!(offline.get(Counter::DisconnectMidSegment), 1);
    assert_eq!(load_all(dir.path().join("data.ndjson")).unwrap(), t[..1]);
}

#[test]
fn shutdown_discards_open_segment() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), false);
    let (h, t) = traces_for("dave", 4);
    let mut lines = encode_session(&h, &t[..1]);
    lines.pop();
    let mut conn = TcpStream::connect(server.local_addr()).unwrap();
    for l in &lines {
        writeln!(conn, "{l}").unwrap();
    }
    conn.flush().unwrap();
    assert!(common::wait_for(server.stats(), Counter::Lines, lines.len() as u64, WAIT));
    let stats = server.shutdown().unwrap();
    assert_eq!(stats.get(Counter::ShutdownDiscarded), 1);
    assert_eq!(stats.get(Counter::TracesPersisted), 0);
    drop(conn);
}

#[test]
fn bad_records_are_counted_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), false);
    let (h, t) = traces_for("erin", 5);
    let mut lines = vec![r#"{"t":1,"ch":"MX","v":0.5}"#.to_string()];
    lines.extend(encode_session(&h, &t[..2]));
    lines.insert(3, "not json".into());
    lines.insert(4, r#"{"t":5,"ch":"humidity","v":1}"#.into());
    lines.insert(5, r#"{"t":5,"ch":"MX","v":null}"#.into());
    replay(server.local_addr(), &lines).unwrap();
    assert!(common::wait_for(server.stats(), Counter::TracesPersisted, 2, WAIT));
    let stats = server.shutdown().unwrap();
    // the reading before the hello cannot belong to a session
    assert_eq!(stats.get(Counter::MissingHello), 1);
    assert_eq!(stats.get(Counter::Malformed), 1);
    assert_eq!(stats.get(Counter::UnknownChannel), 1);
    assert_eq!(stats.get(Counter::NonFinite), 1);
    assert_eq!(load_all(dir.path().join("data.ndjson")).unwrap(), t[..2]);
}

#[test]
fn raw_log_mirrors_session_lines() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), true);
    let (mut h, t) = traces_for("frank", 6);
    h.session = "../frank/1".into();
    let lines = encode_session(&h, &t[..1]);
    replay(server.local_addr(), &lines).unwrap();
    assert!(common::wait_for(server.stats(), Counter::TracesPersisted, 1, WAIT));
    server.shutdown().unwrap();
    let logged = std::fs::read_to_string(dir.path().join("raw").join("session.._frank_1.ndjson")).unwrap();
    assert_eq!(logged.lines().collect::<Vec<_>>(), lines);
}

#[test]
fn unwritable_dataset_path_is_storage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let err = serve(&ServerConfig {
        bind: "127.0.0.1:0".into(),
        out: file.join("data.ndjson"),
        raw_log_dir: None,
    })
    .err()
    .unwrap();
    assert!(matches!(err, IngestError::StorageFailure(_)), "{err}");
}

#[test]
fn appends_to_existing_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (h, t) = traces_for("gina", 7);
    for _ in 0..2 {
        let server = start(dir.path(), false);
        replay(server.local_addr(), &encode_session(&h, &t[..1])).unwrap();
        assert!(common::wait_for(server.stats(), Counter::TracesPersisted, 1, WAIT));
        server.shutdown().unwrap();
    }
    assert_eq!(load_all(dir.path().join("data.ndjson")).unwrap().len(), 2);
}
