//! Stream-socket backing: one TCP connection per peer, many in-flight
//! requests multiplexed by request id.

use crate::frame::Frame;
use crate::rpc::Handler;
use crate::{Transport, TransportError};
use parking_lot::Mutex;
use std::collections::HashMap;
use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(2);
const READ_POLL: Duration = Duration::from_millis(200);

struct Conn {
    writer: Mutex<TcpStream>,
    pending: Mutex<HashMap<u64, mpsc::SyncSender<Frame>>>,
    dead: Arc<AtomicBool>,
}

impl Conn {
    fn open(addr: &str) -> Result<Arc<Conn>, TransportError> {
        let sockaddr: SocketAddr = addr
            .parse()
            .map_err(|e| TransportError::ConnectionFailed(format!("bad address {addr}: {e}")))?;
        let stream = TcpStream::connect_timeout(&sockaddr, CONNECT_TIMEOUT)
            .map_err(|e| TransportError::ConnectionFailed(format!("{addr}: {e}")))?;
        stream.set_nodelay(true).ok();
        let reader = stream
            .try_clone()
            .map_err(|e| TransportError::ConnectionFailed(e.to_string()))?;
        let conn = Arc::new(Conn {
            writer: Mutex::new(stream),
            pending: Mutex::new(HashMap::new()),
            dead: Arc::new(AtomicBool::new(false)),
        });
        let weak = Arc::downgrade(&conn);
        std::thread::Builder::new()
            .name(format!("tcp-reader-{addr}"))
            .spawn(move || {
                let mut reader = reader;
                loop {
                    match Frame::read_from(&mut reader) {
                        Ok(Some(frame)) => {
                            let Some(conn) = weak.upgrade() else { break };
                            let tx = conn.pending.lock().remove(&frame.request_id);
                            if let Some(tx) = tx {
                                tx.try_send(frame).ok();
                            }
                        }
                        Ok(None) | Err(_) => {
                            let Some(conn) = weak.upgrade() else { break };
                            conn.dead.store(true, Ordering::SeqCst);
                            // Dropping the senders wakes every waiter with
                            // a disconnect.
                            conn.pending.lock().clear();
                            break;
                        }
                    }
                }
            })
            .expect("spawn reader thread");
        Ok(conn)
    }
}

/// Client-side transport over real sockets. Endpoints are `host:port`
/// strings; connections are pooled and re-established on failure.
#[derive(Default)]
pub struct TcpTransport {
    conns: Mutex<HashMap<String, Arc<Conn>>>,
    next_id: AtomicU64,
}

impl TcpTransport {
    pub fn new() -> Self {
        TcpTransport { conns: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }
    }

    fn conn(&self, endpoint: &str) -> Result<Arc<Conn>, TransportError> {
        let mut conns = self.conns.lock();
        if let Some(c) = conns.get(endpoint) {
            if !c.dead.load(Ordering::SeqCst) {
                return Ok(c.clone());
            }
            conns.remove(endpoint);
        }
        let c = Conn::open(endpoint)?;
        conns.insert(endpoint.to_string(), c.clone());
        Ok(c)
    }
}

impl Transport for TcpTransport {
    fn call(
        &self,
        endpoint: &str,
        mut frame: Frame,
        timeout: Duration,
    ) -> Result<Frame, TransportError> {
        if frame.oversize() {
            return Err(TransportError::Oversize);
        }
        let conn = self.conn(endpoint)?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        frame.request_id = id;
        let (tx, rx) = mpsc::sync_channel(1);
        conn.pending.lock().insert(id, tx);

        let write_result = {
            let mut w = conn.writer.lock();
            w.write_all(&frame.encode()).and_then(|_| w.flush())
        };
        if let Err(e) = write_result {
            conn.dead.store(true, Ordering::SeqCst);
            conn.pending.lock().remove(&id);
            return Err(TransportError::ConnectionFailed(e.to_string()));
        }

        match rx.recv_timeout(timeout) {
            Ok(resp) => Ok(resp),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                conn.pending.lock().remove(&id);
                Err(TransportError::Timeout)
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(TransportError::ConnectionFailed("connection closed".into()))
            }
        }
    }
}

/// Accepting side: frames are dispatched to the handler on a fresh thread
/// per request so slow requests never block the connection.
pub struct TcpServer {
    local_addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<std::thread::JoinHandle<()>>,
}

impl TcpServer {
    pub fn bind(addr: &str, handler: Arc<dyn Handler>) -> std::io::Result<TcpServer> {
        let listener = TcpListener::bind(addr)?;
        let local_addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let shutdown_accept = shutdown.clone();
        let accept_thread = std::thread::Builder::new()
            .name(format!("tcp-accept-{local_addr}"))
            .spawn(move || {
                while !shutdown_accept.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let handler = handler.clone();
                            let shutdown = shutdown_accept.clone();
                            std::thread::spawn(move || serve_conn(stream, handler, shutdown));
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(20));
                        }
                        Err(_) => break,
                    }
                }
            })?;
        Ok(TcpServer { local_addr, shutdown, accept_thread: Some(accept_thread) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }
}

impl Drop for TcpServer {
    fn drop(&mut self) {
        self.shutdown();
        if let Some(t) = self.accept_thread.take() {
            t.join().ok();
        }
    }
}

fn serve_conn(stream: TcpStream, handler: Arc<dyn Handler>, shutdown: Arc<AtomicBool>) {
    stream.set_nodelay(true).ok();
    stream.set_read_timeout(Some(READ_POLL)).ok();
    let writer = match stream.try_clone() {
        Ok(w) => Arc::new(Mutex::new(w)),
        Err(_) => return,
    };
    let mut reader = stream;
    while !shutdown.load(Ordering::SeqCst) {
        match Frame::read_from(&mut reader) {
            Ok(Some(frame)) => {
                let handler = handler.clone();
                let writer = writer.clone();
                std::thread::spawn(move || {
                    let resp = handler.handle(frame);
                    let mut w = writer.lock();
                    let _ = w.write_all(&resp.encode()).and_then(|_| w.flush());
                });
            }
            Ok(None) => break,
            Err(crate::frame::FrameError::Io(msg))
                if msg.contains("timed out") || msg.contains("WouldBlock") =>
            {
                continue;
            }
            Err(_) => break,
        }
    }
}
