// SPDX-License-Identifier: Apache-2.0

//! Thread-per-connection TCP acceptor shared by the mirror, bridge and
//! gateway servers.

use std::collections::HashMap;
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

const ACCEPT_POLL: Duration = Duration::from_millis(5);

type Registry = Arc<Mutex<HashMap<u64, TcpStream>>>;

/// A listening socket whose connections are each served on their own thread.
/// Dropping it (or calling [`Acceptor::shutdown`]) stops accepting and closes
/// every open connection.
pub struct Acceptor {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    conns: Registry,
    handle: Option<JoinHandle<()>>,
}

impl Acceptor {
    pub fn bind<A, F>(addr: A, name: &str, handler: F) -> io::Result<Self>
    where
        A: ToSocketAddrs,
        F: Fn(TcpStream, u64) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let conns: Registry = Arc::default();
        let handler = Arc::new(handler);
        let next_id = Arc::new(AtomicU64::new(1));
        let thread_name = format!("{name}-accept");
        let handle = {
            let stop = stop.clone();
            let conns = conns.clone();
            let name = name.to_string();
            thread::Builder::new().name(thread_name).spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    match listener.accept() {
                        Ok((stream, peer)) => {
                            let _ = stream.set_nonblocking(false);
                            let _ = stream.set_nodelay(true);
                            let id = next_id.fetch_add(1, Ordering::Relaxed);
                            if let Ok(clone) = stream.try_clone() {
                                conns.lock().unwrap().insert(id, clone);
                            }
                            log::debug!("{name}: connection {id} from {peer}");
                            let handler = handler.clone();
                            let conns = conns.clone();
                            let spawned = thread::Builder::new().name(format!("{name}-{id}")).spawn(move || {
                                handler(stream, id);
                                conns.lock().unwrap().remove(&id);
                            });
                            if let Err(e) = spawned {
                                log::error!("{name}: cannot spawn handler: {e}");
                            }
                        }
                        Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                        Err(e) => {
                            log::warn!("{name}: accept failed: {e}");
                            thread::sleep(ACCEPT_POLL);
                        }
                    }
                }
            })?
        };
        Ok(Self { local_addr, stop, conns, handle: Some(handle) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn connection_count(&self) -> usize {
        self.conns.lock().unwrap().len()
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        for (_, s) in self.conns.lock().unwrap().drain() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for Acceptor {
    fn drop(&mut self) {
        self.shutdown();
    }
}
