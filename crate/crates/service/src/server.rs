//! TCP transport. Each connection carries newline-delimited JSON both ways;
//! a connection that opens with an HTTP `GET` instead receives the current
//! snapshot as a one-shot response.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::session::SessionHandle;

pub const DEFAULT_PORT: u16 = 8700;

/// Accepts connections on `listener` until the process exits.
pub fn serve(
    listener: TcpListener,
    session: SessionHandle,
) -> io::Result<(SocketAddr, JoinHandle<()>)> {
    let addr = listener.local_addr()?;
    let counter = Arc::new(AtomicU64::new(1));
    let join = std::thread::Builder::new()
        .name("orion-accept".into())
        .spawn(move || {
            for stream in listener.incoming() {
                let stream = match stream {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        continue;
                    }
                };
                let session = session.clone();
                let id = format!("conn-{}", counter.fetch_add(1, Ordering::Relaxed));
                std::thread::spawn(move || {
                    if let Err(e) = handle_connection(stream, &session, id.clone()) {
                        log::debug!("{id} closed: {e}");
                    }
                });
            }
        })?;
    Ok((addr, join))
}

/// How long a new connection may stay silent before it is treated as a
/// streaming client; HTTP clients send their request line immediately.
const SNIFF_WINDOW: Duration = Duration::from_millis(250);

fn opens_with_get(stream: &TcpStream) -> io::Result<bool> {
    stream.set_read_timeout(Some(SNIFF_WINDOW))?;
    let deadline = Instant::now() + SNIFF_WINDOW;
    let mut buf = [0u8; 4];
    let verdict = loop {
        match stream.peek(&mut buf) {
            Ok(0) => break false,
            Ok(n) if n >= 4 || !b"GET ".starts_with(&buf[..n]) => break &buf[..n] == b"GET ",
            Ok(_) if Instant::now() >= deadline => break false,
            Ok(_) => std::thread::sleep(Duration::from_millis(5)),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                break false
            }
            Err(e) => return Err(e),
        }
    };
    stream.set_read_timeout(None)?;
    Ok(verdict)
}

fn handle_connection(stream: TcpStream, session: &SessionHandle, id: String) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    if opens_with_get(&stream)? {
        let mut first = String::new();
        reader.read_line(&mut first)?;
        return http_snapshot(&first, reader, stream, session);
    }
    let crate::session::Connection { sender, rx } = session.connect(id);
    let mut out = stream.try_clone()?;
    // The writer notices a closed peer on its next write; the hub then drops
    // the subscription, so the thread is left to finish on its own.
    std::thread::spawn(move || {
        for line in rx.iter() {
            if out
                .write_all(line.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .is_err()
            {
                break;
            }
        }
    });
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !sender.send(trimmed) {
            break;
        }
        line.clear();
    }
    let _ = stream.shutdown(Shutdown::Both);
    Ok(())
}

fn http_snapshot(
    request: &str,
    mut reader: BufReader<TcpStream>,
    mut stream: TcpStream,
    session: &SessionHandle,
) -> io::Result<()> {
    // Drain the headers; the request has no body.
    let mut header = String::new();
    while reader.read_line(&mut header)? > 0 && !header.trim().is_empty() {
        header.clear();
    }
    let path = request.split_whitespace().nth(1).unwrap_or("/");
    let (status, body): (&str, Arc<str>) = match (path, session.hub.latest_snapshot()) {
        ("/" | "/snapshot", Some(s)) => ("200 OK", s),
        ("/" | "/snapshot", None) => (
            "503 Service Unavailable",
            r#"{"error":"no snapshot yet"}"#.into(),
        ),
        _ => ("404 Not Found", r#"{"error":"unknown path"}"#.into()),
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nAccess-Control-Allow-Origin: *\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
