use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use super::{BankEndpoint, ChannelError, Connection};
use crate::codec::{decode_wire_with, encode_wire, WireMessage};
use crate::tpm::DigestAlg;

/// Largest frame either side accepts.
pub const MAX_FRAME: usize = 1 << 20;

/// An ordered, reliable duplex stream of encoded wire messages.
pub trait Link: Send {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), ChannelError>;
    fn recv_frame(&mut self) -> Result<Vec<u8>, ChannelError>;
}

/// Calls the server-side handler directly; replies queue until received.
pub struct InProcessLink {
    conn: Connection,
    alg: DigestAlg,
    inbox: VecDeque<Vec<u8>>,
}

impl InProcessLink {
    pub fn connect(endpoint: &BankEndpoint) -> Self {
        let mut conn = endpoint.connect();
        let inbox = conn.greeting().iter().map(encode_wire).collect();
        InProcessLink {
            conn,
            alg: endpoint.bank().config().alg,
            inbox,
        }
    }
}

impl Link for InProcessLink {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), ChannelError> {
        let replies = serve_frame(&mut self.conn, self.alg, frame);
        self.inbox.extend(replies.iter().map(encode_wire));
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<Vec<u8>, ChannelError> {
        self.inbox.pop_front().ok_or(ChannelError::Closed)
    }
}

fn serve_frame(conn: &mut Connection, alg: DigestAlg, frame: &[u8]) -> Vec<WireMessage> {
    match decode_wire_with(frame, alg) {
        Ok(msg) => conn.handle(msg),
        Err(_) => conn.handle_malformed(),
    }
}

/// 4-byte big-endian length, then the frame.
pub fn write_frame(w: &mut impl Write, frame: &[u8]) -> io::Result<()> {
    let len = u32::try_from(frame.len())
        .ok()
        .filter(|&n| n as usize <= MAX_FRAME)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    let mut buf = Vec::with_capacity(4 + frame.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(frame);
    w.write_all(&buf)?;
    w.flush()
}

/// `Ok(None)` on a clean end of stream before a length prefix.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "frame too large",
        ));
    }
    let mut frame = vec![0u8; len];
    r.read_exact(&mut frame)?;
    Ok(Some(frame))
}

pub struct TcpLink {
    stream: TcpStream,
}

impl TcpLink {
    pub fn connect(addr: SocketAddr) -> Result<Self, ChannelError> {
        let stream =
            TcpStream::connect(addr).map_err(|e| ChannelError::Unreachable(e.to_string()))?;
        stream.set_nodelay(true).ok();
        Ok(TcpLink { stream })
    }
}

impl Link for TcpLink {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), ChannelError> {
        write_frame(&mut self.stream, frame).map_err(|_| ChannelError::Closed)
    }

    fn recv_frame(&mut self) -> Result<Vec<u8>, ChannelError> {
        match read_frame(&mut self.stream) {
            Ok(Some(frame)) => Ok(frame),
            Ok(None) | Err(_) => Err(ChannelError::Closed),
        }
    }
}

/// Serve one client until it disconnects.
pub fn serve_connection(endpoint: &BankEndpoint, mut stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true).ok();
    let alg = endpoint.bank().config().alg;
    let mut conn = endpoint.connect();
    for msg in conn.greeting() {
        write_frame(&mut stream, &encode_wire(&msg))?;
    }
    while let Some(frame) = read_frame(&mut stream)? {
        for msg in serve_frame(&mut conn, alg, &frame) {
            write_frame(&mut stream, &encode_wire(&msg))?;
        }
    }
    Ok(())
}

/// Accept loop, one thread per connection. Runs until the listener fails.
pub fn serve(listener: TcpListener, endpoint: Arc<BankEndpoint>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let endpoint = Arc::clone(&endpoint);
        thread::spawn(move || {
            if let Err(e) = serve_connection(&endpoint, stream) {
                log::debug!("connection ended: {e}");
            }
        });
    }
    Ok(())
}

/// A bank listening on a background thread.
pub struct BankServer {
    addr: SocketAddr,
}

impl BankServer {
    pub fn spawn(endpoint: Arc<BankEndpoint>, addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        thread::spawn(move || serve(listener, endpoint));
        Ok(BankServer { addr })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}
