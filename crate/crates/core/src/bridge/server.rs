//! TCP and stdio transports.

use std::collections::HashMap;
use std::io::{self, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{bounded, RecvTimeoutError};

use crate::sim::DataSource;

use super::protocol::{ServerMessage, SessionConfig};
use super::session::Session;
use super::wire::{read_frame, write_frame, WireError};

const POLL: Duration = Duration::from_millis(20);

/// Runs one session to completion over a byte stream. Framing errors end
/// the session after a best-effort error reply; everything else is answered
/// in-band.
pub fn serve_session<R: Read, W: Write>(reader: &mut R, writer: &mut W, session: &mut Session) -> Result<(), WireError> {
    loop {
        let payload = match read_frame(reader) {
            Ok(Some(p)) => p,
            Ok(None) => return Ok(()),
            Err(e @ (WireError::Oversized(_) | WireError::Truncated { .. })) => {
                let msg = ServerMessage::error("ProtocolError", e.to_string());
                let _ = write_frame(writer, &serde_json::to_vec(&msg).expect("serializable"));
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let reply = session.handle_payload(&payload);
        write_frame(writer, &session.encode_reply(&reply))?;
        if reply.close {
            return Ok(());
        }
    }
}

/// One session over stdin/stdout.
pub fn serve_stdio(source: DataSource, defaults: SessionConfig, seed_index: u64) -> Result<(), WireError> {
    let mut session = Session::new(&Arc::new(source), defaults, seed_index);
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_session(&mut stdin.lock(), &mut stdout.lock(), &mut session)
}

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub workers: usize,
    pub defaults: SessionConfig,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            workers: 4,
            defaults: SessionConfig::default(),
        }
    }
}

/// Running server. Dropping the handle leaves it running; call
/// [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    live: Arc<Mutex<HashMap<u64, TcpStream>>>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    /// Stops accepting, closes open sessions and joins all threads.
    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for s in self.live.lock().expect("registry lock").values() {
            let _ = s.shutdown(Shutdown::Both);
        }
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the server stops.
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

/// Binds and starts the acceptor plus a bounded pool of session workers.
pub fn spawn_server<A: ToSocketAddrs>(bind: A, source: DataSource, opts: ServerOptions) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let live: Arc<Mutex<HashMap<u64, TcpStream>>> = Arc::default();
    let source = Arc::new(source);
    let workers = opts.workers.max(1);
    let (tx, rx) = bounded::<(u64, TcpStream)>(workers);
    let mut threads = Vec::with_capacity(workers + 1);

    for w in 0..workers {
        let rx = rx.clone();
        let stop = stop.clone();
        let live = live.clone();
        let source = source.clone();
        let defaults = opts.defaults.clone();
        threads.push(
            thread::Builder::new()
                .name(format!("mmlab-session-{w}"))
                .spawn(move || loop {
                    let (index, stream) = match rx.recv_timeout(POLL) {
                        Ok(job) => job,
                        Err(RecvTimeoutError::Timeout) if !stop.load(Ordering::SeqCst) => continue,
                        Err(_) => return,
                    };
                    if let Ok(clone) = stream.try_clone() {
                        live.lock().expect("registry lock").insert(index, clone);
                    }
                    if stop.load(Ordering::SeqCst) {
                        let _ = stream.shutdown(Shutdown::Both);
                    }
                    let mut session = Session::new(&source, defaults.clone(), index);
                    let result = stream
                        .try_clone()
                        .map_err(WireError::from)
                        .and_then(|r| serve_session(&mut BufReader::new(r), &mut &stream, &mut session));
                    if let Err(e) = result {
                        log::info!("session {index} ended: {e}");
                    }
                    live.lock().expect("registry lock").remove(&index);
                })?,
        );
    }

    let acceptor_stop = stop.clone();
    threads.push(thread::Builder::new().name("mmlab-accept".into()).spawn(move || {
        let next = AtomicU64::new(0);
        while !acceptor_stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let _ = stream.set_nonblocking(false);
                    let _ = stream.set_nodelay(true);
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    log::info!("session {index} from {peer}");
                    let mut job = (index, stream);
                    // Wait for a free worker, but keep honouring shutdown.
                    loop {
                        match tx.send_timeout(job, POLL) {
                            Ok(()) => break,
                            Err(crossbeam_channel::SendTimeoutError::Timeout(j)) => {
                                if acceptor_stop.load(Ordering::SeqCst) {
                                    return;
                                }
                                job = j;
                            }
                            Err(crossbeam_channel::SendTimeoutError::Disconnected(_)) => return,
                        }
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    })?);

    Ok(ServerHandle {
        addr,
        stop,
        live,
        threads,
    })
}
