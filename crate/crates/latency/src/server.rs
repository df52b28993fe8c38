use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::wire::read_raw_frame;
use crate::LatencyError;

/// Running echo server plus its observable counters.
pub struct EchoServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    dropped: Arc<AtomicU64>,
    join: Option<thread::JoinHandle<()>>,
}

impl EchoServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Frames discarded because of a bad magic.
    pub fn dropped_frames(&self) -> u64 {
        self.dropped.load(Ordering::SeqCst)
    }

    pub fn stop(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Poke the listener so the accept loop observes the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for EchoServerHandle {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, dropped: Arc<AtomicU64>) {
    // Generous idle timeout so dead peers release the thread.
    let _ = stream.set_read_timeout(Some(Duration::from_secs(30)));
    let _ = stream.set_nodelay(true);
    loop {
        match read_raw_frame(&mut stream) {
            Ok(frame) => {
                if frame.magic_ok {
                    if stream.write_all(&frame.bytes).is_err() {
                        return;
                    }
                } else {
                    dropped.fetch_add(1, Ordering::SeqCst);
                }
            }
            Err(_) => return,
        }
    }
}

/// Binds an echo server and serves on a background thread until the
/// handle is stopped or dropped. Every valid probe frame is echoed back
/// byte-identically; frames with a corrupt magic are counted and ignored.
pub fn run_echo_server(bind: impl ToSocketAddrs) -> Result<EchoServerHandle, LatencyError> {
    let listener = TcpListener::bind(bind)?;
    let addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let dropped = Arc::new(AtomicU64::new(0));

    let shutdown_bg = Arc::clone(&shutdown);
    let dropped_bg = Arc::clone(&dropped);
    let join = thread::spawn(move || {
        for incoming in listener.incoming() {
            if shutdown_bg.load(Ordering::SeqCst) {
                return;
            }
            match incoming {
                Ok(stream) => {
                    let dropped = Arc::clone(&dropped_bg);
                    thread::spawn(move || handle_connection(stream, dropped));
                }
                Err(_) => return,
            }
        }
    });

    Ok(EchoServerHandle {
        addr,
        shutdown,
        dropped,
        join: Some(join),
    })
}
