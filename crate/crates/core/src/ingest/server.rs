use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::session::LineAssembler;
use super::stats::{Counter, IngestStats};
use super::store::DatasetStore;
use crate::error::IngestError;
use crate::model::LabeledTrace;

const POLL: Duration = Duration::from_millis(100);
const ACCEPT_POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    /// Address to listen on; port 0 picks a free port.
    pub bind: String,
    /// Dataset file traces are appended to.
    pub out: PathBuf,
    /// Directory receiving every session's raw lines as `<session>.ndjson`.
    pub raw_log_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:7070".into(),
            out: PathBuf::from("dataset.ndjson"),
            raw_log_dir: None,
        }
    }
}

/// A running server. Dropping the handle without calling
/// [`ServerHandle::shutdown`] leaves the threads running until exit.
pub struct ServerHandle {
    addr: SocketAddr,
    stats: Arc<IngestStats>,
    stop: Arc<AtomicBool>,
    acceptor: JoinHandle<()>,
    sink: JoinHandle<Result<(), IngestError>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    /// Stops accepting, lets every connection drain its pending input,
    /// discards open segments and flushes the dataset file.
    ///
    /// Returns the final counters, or the first storage error the sink hit.
    pub fn shutdown(self) -> Result<Arc<IngestStats>, IngestError> {
        self.stop.store(true, Ordering::SeqCst);
        if self.acceptor.join().is_err() {
            warn!("acceptor thread panicked");
        }
        match self.sink.join() {
            Ok(r) => r?,
            Err(_) => warn!("sink thread panicked"),
        }
        Ok(self.stats)
    }
}

/// Binds the listener, opens the dataset store and starts serving.
pub fn serve(config: &ServerConfig) -> Result<ServerHandle, IngestError> {
    let listener = TcpListener::bind(&config.bind).map_err(IngestError::BindFailure)?;
    listener.set_nonblocking(true).map_err(IngestError::BindFailure)?;
    let addr = listener.local_addr().map_err(IngestError::BindFailure)?;
    let store = DatasetStore::open(&config.out)?;
    if let Some(dir) = &config.raw_log_dir {
        std::fs::create_dir_all(dir).map_err(IngestError::StorageFailure)?;
    }
    let stats = Arc::new(IngestStats::new());
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();

    let sink = {
        let stats = Arc::clone(&stats);
        thread::Builder::new()
            .name("ingest-sink".into())
            .spawn(move || run_sink(store, rx, &stats))
            .map_err(IngestError::StorageFailure)?
    };
    let acceptor = {
        let stats = Arc::clone(&stats);
        let stop = Arc::clone(&stop);
        let raw_dir = config.raw_log_dir.clone();
        thread::Builder::new()
            .name("ingest-accept".into())
            .spawn(move || run_acceptor(listener, tx, stats, stop, raw_dir))
            .map_err(IngestError::StorageFailure)?
    };
    info!("listening on {addr}");
    Ok(ServerHandle {
        addr,
        stats,
        stop,
        acceptor,
        sink,
    })
}

fn run_sink(
    mut store: DatasetStore,
    rx: Receiver<LabeledTrace>,
    stats: &IngestStats,
) -> Result<(), IngestError> {
    let mut first_err = None;
    for trace in rx {
        match store.persist(&trace) {
            Ok(_) => stats.incr(Counter::TracesPersisted),
            Err(e) => {
                warn!("persist failed: {e}");
                stats.incr(Counter::StorageFailure);
                first_err.get_or_insert(e);
            }
        }
    }
    if let Err(e) = store.sync() {
        first_err.get_or_insert(e);
    }
    first_err.map_or(Ok(()), Err)
}

fn run_acceptor(
    listener: TcpListener,
    tx: Sender<LabeledTrace>,
    stats: Arc<IngestStats>,
    stop: Arc<AtomicBool>,
    raw_dir: Option<PathBuf>,
) {
    let mut workers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                stats.incr(Counter::Connections);
                let tx = tx.clone();
                let stats = Arc::clone(&stats);
                let stop = Arc::clone(&stop);
                let raw_dir = raw_dir.clone();
                let spawned = thread::Builder::new()
                    .name(format!("ingest-{peer}"))
                    .spawn(move || {
                        if let Err(e) = handle_connection(stream, &tx, &stats, &stop, raw_dir.as_deref()) {
                            warn!("connection {peer}: {e}");
                        }
                    });
                match spawned {
                    Ok(h) => workers.push(h),
                    Err(e) => warn!("could not spawn handler for {peer}: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
            }
        }
        workers.retain(|h| !h.is_finished());
    }
    for h in workers {
        let _ = h.join();
    }
}

fn sanitize(session: &str) -> String {
    let s: String = session
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("session{s}")
    } else {
        s
    }
}

fn handle_connection(
    stream: TcpStream,
    tx: &Sender<LabeledTrace>,
    stats: &IngestStats,
    stop: &AtomicBool,
    raw_dir: Option<&Path>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    let mut reader = BufReader::new(stream);
    let mut asm = LineAssembler::new();
    let mut raw: Option<BufWriter<File>> = None;
    let mut buf = Vec::new();
    let mut stopped = false;
    loop {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) if buf.last() != Some(&b'\n') => continue,
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if stop.load(Ordering::SeqCst) {
                    stopped = true;
                    break;
                }
                continue;
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => {
                warn!("read failed: {e}");
                break;
            }
        }
        process_line(&buf, &mut asm, &mut raw, raw_dir, tx, stats);
        buf.clear();
    }
    if !buf.is_empty() && !stopped {
        process_line(&buf, &mut asm, &mut raw, raw_dir, tx, stats);
    }
    if asm.finish() {
        let c = if stopped { Counter::ShutdownDiscarded } else { Counter::DisconnectMidSegment };
        stats.incr(c);
    }
    if let Some(mut w) = raw {
        w.flush()?;
    }
    Ok(())
}

fn process_line(
    bytes: &[u8],
    asm: &mut LineAssembler,
    raw: &mut Option<BufWriter<File>>,
    raw_dir: Option<&Path>,
    tx: &Sender<LabeledTrace>,
    stats: &IngestStats,
) {
    let Ok(line) = std::str::from_utf8(bytes) else {
        stats.incr(Counter::Lines);
        stats.incr(Counter::Malformed);
        return;
    };
    let had_session = asm.session().is_some();
    let trace = asm.feed(line, stats);
    if let (Some(dir), Some(s)) = (raw_dir, asm.session()) {
        if !had_session {
            let path = dir.join(format!("{}.ndjson", sanitize(s.session_id())));
            match File::create(&path) {
                Ok(f) => *raw = Some(BufWriter::new(f)),
                Err(e) => {
                    warn!("raw log {}: {e}", path.display());
                    stats.incr(Counter::StorageFailure);
                }
            }
        }
        if let Some(w) = raw.as_mut() {
            let body = line.trim_end_matches(['\r', '\n']);
            if writeln!(w, "{body}").is_err() {
                stats.incr(Counter::StorageFailure);
                *raw = None;
            }
        }
    }
    if let Some(t) = trace {
        if tx.send(t).is_err() {
            stats.incr(Counter::StorageFailure);
        }
    }
}
