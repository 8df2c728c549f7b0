//! Authenticated transport between the app and the bank, with a transcript
//! of every message for byte accounting.
//!
//! Server authentication is modeled by a shared token: the server opens each
//! session with the SHA-256 fingerprint of its token and the client refuses
//! to send anything to a server whose fingerprint does not match.

mod endpoint;
mod transcript;
mod transport;

use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error;

pub use endpoint::{token_fingerprint, BankEndpoint, Connection};
pub use transcript::{
    report_bytes, ByteRow, ByteTable, Direction, Transcript, TranscriptEntry, BYTE_ROWS,
};
pub use transport::{
    read_frame, serve, serve_connection, write_frame, BankServer, InProcessLink, Link, TcpLink,
    MAX_FRAME,
};

use crate::codec::{decode_wire_with, encode_wire, CodecError, Evidence, WireMessage};
use crate::identity::ChallengeNonce;
use crate::tpm::DigestAlg;

/// Token the bundled bank and clients use unless told otherwise.
pub const DEFAULT_SERVER_TOKEN: &[u8] = b"attest-sim bank server token";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("server failed authentication")]
    ServerAuthFailed,
    #[error("server unreachable: {0}")]
    Unreachable(String),
    #[error("session closed")]
    Closed,
    #[error("undecodable message: {0}")]
    Codec(#[from] CodecError),
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
}

#[derive(Clone)]
pub enum Transport {
    InProcess(Arc<BankEndpoint>),
    LocalTcp(SocketAddr),
}

#[derive(Clone)]
pub struct ChannelConfig {
    pub transport: Transport,
    /// The token the client expects the server to hold.
    pub server_auth_token: Vec<u8>,
    pub alg: DigestAlg,
}

impl ChannelConfig {
    pub fn new(transport: Transport, server_auth_token: impl Into<Vec<u8>>) -> Self {
        ChannelConfig {
            transport,
            server_auth_token: server_auth_token.into(),
            alg: DigestAlg::Sha1,
        }
    }
}

pub fn open_session(cfg: &ChannelConfig) -> Result<Session, ChannelError> {
    let link: Box<dyn Link> = match &cfg.transport {
        Transport::InProcess(endpoint) => Box::new(InProcessLink::connect(endpoint)),
        Transport::LocalTcp(addr) => Box::new(TcpLink::connect(*addr)?),
    };
    Session::open(link, &cfg.server_auth_token, cfg.alg)
}

/// Client side of an authenticated session.
pub struct Session {
    link: Box<dyn Link>,
    alg: DigestAlg,
    transcript: Transcript,
    challenge: Option<ChallengeNonce>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("challenge", &self.challenge)
            .field("messages", &self.transcript.entries().len())
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Authenticate the server over `link`. Nothing is sent before the
    /// server's fingerprint has been checked.
    pub fn open(
        link: Box<dyn Link>,
        expected_token: &[u8],
        alg: DigestAlg,
    ) -> Result<Self, ChannelError> {
        let mut session = Session {
            link,
            alg,
            transcript: Transcript::new(),
            challenge: None,
        };
        match session.recv()? {
            WireMessage::ServerHello(fp) if fp == token_fingerprint(expected_token) => {}
            WireMessage::ServerHello(_) => return Err(ChannelError::ServerAuthFailed),
            _ => return Err(ChannelError::Protocol("expected ServerHello")),
        }
        match session.recv()? {
            WireMessage::Challenge(_) => Ok(session),
            _ => Err(ChannelError::Protocol("expected Challenge")),
        }
    }

    pub fn send(&mut self, msg: &WireMessage) -> Result<(), ChannelError> {
        self.link.send_frame(&encode_wire(msg))?;
        self.transcript.record(Direction::Sent, msg);
        Ok(())
    }

    pub fn recv(&mut self) -> Result<WireMessage, ChannelError> {
        let frame = self.link.recv_frame()?;
        let msg = decode_wire_with(&frame, self.alg)?;
        self.transcript.record(Direction::Received, &msg);
        if let WireMessage::Challenge(nonce) = msg {
            self.challenge = Some(nonce);
        }
        Ok(msg)
    }

    /// The most recent challenge from the server.
    pub fn challenge(&self) -> Option<ChallengeNonce> {
        self.challenge
    }

    /// Send a request and its evidence, return the decision, and take the
    /// challenge that follows it.
    pub fn request(
        &mut self,
        msg: &WireMessage,
        evidence: Option<&Evidence>,
    ) -> Result<WireMessage, ChannelError> {
        self.send(msg)?;
        if let Some(e) = evidence {
            self.send(&WireMessage::Evidence(e.clone()))?;
        }
        let decision = self.recv()?;
        if !matches!(decision, WireMessage::Grant(_) | WireMessage::Deny(_)) {
            return Err(ChannelError::Protocol("expected Grant or Deny"));
        }
        match self.recv()? {
            WireMessage::Challenge(_) => Ok(decision),
            _ => Err(ChannelError::Protocol("expected Challenge")),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
