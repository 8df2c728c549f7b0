use std::sync::Arc;

use sha2::{Digest as _, Sha256};

use crate::bank::{BankService, Decision, SessionId};
use crate::codec::{DenyReason, Evidence, WireMessage};

/// SHA-256 of the server token, the value presented in `ServerHello`.
pub fn token_fingerprint(token: &[u8]) -> [u8; 32] {
    Sha256::digest(token).into()
}

/// The bank side of the channel. Holds the server's authentication token and
/// hands out one [`Connection`] per client session.
pub struct BankEndpoint {
    bank: Arc<BankService>,
    auth_token: Vec<u8>,
}

impl BankEndpoint {
    pub fn new(bank: Arc<BankService>, auth_token: impl Into<Vec<u8>>) -> Self {
        BankEndpoint {
            bank,
            auth_token: auth_token.into(),
        }
    }

    pub fn bank(&self) -> &Arc<BankService> {
        &self.bank
    }

    pub fn connect(&self) -> Connection {
        Connection {
            bank: Arc::clone(&self.bank),
            fingerprint: token_fingerprint(&self.auth_token),
            session: self.bank.open_session(),
            pending: None,
        }
    }
}

/// Server-side protocol state of one session, independent of transport.
///
/// The server opens with `ServerHello` and a `Challenge`. Requests needing
/// attestation are held until the following `Evidence` frame. Every decision
/// is followed by a fresh `Challenge`.
pub struct Connection {
    bank: Arc<BankService>,
    fingerprint: [u8; 32],
    session: SessionId,
    pending: Option<WireMessage>,
}

impl Connection {
    pub fn session(&self) -> SessionId {
        self.session
    }

    pub fn greeting(&mut self) -> Vec<WireMessage> {
        vec![WireMessage::ServerHello(self.fingerprint), self.challenge()]
    }

    pub fn handle(&mut self, msg: WireMessage) -> Vec<WireMessage> {
        let decision = match msg {
            WireMessage::RegistrationRequest(_)
            | WireMessage::LoginRequest1(_)
            | WireMessage::LoginRequest2(..) => match self.pending.replace(msg) {
                None => return Vec::new(),
                Some(_) => {
                    self.pending = None;
                    Decision::Deny(DenyReason::MissingEvidence)
                }
            },
            WireMessage::Evidence(evidence) => match self.pending.take() {
                Some(request) => self.decide(request, evidence),
                None => Decision::Deny(DenyReason::Malformed),
            },
            WireMessage::CredentialLogin(creds) => self.bank.verify_credential_login(&creds),
            _ => Decision::Deny(DenyReason::Malformed),
        };
        vec![decision.to_wire(), self.challenge()]
    }

    /// Reply to a frame that did not decode.
    pub fn handle_malformed(&mut self) -> Vec<WireMessage> {
        self.pending = None;
        vec![WireMessage::Deny(DenyReason::Malformed), self.challenge()]
    }

    fn challenge(&mut self) -> WireMessage {
        WireMessage::Challenge(self.bank.issue_challenge(self.session))
    }

    fn decide(&mut self, request: WireMessage, evidence: Evidence) -> Decision {
        match &request {
            WireMessage::RegistrationRequest(req) => {
                let Some(aik) = evidence.aik_public else {
                    return Decision::Deny(DenyReason::MissingEvidence);
                };
                match self
                    .bank
                    .register_user(self.session, req, &evidence.quote, &aik)
                {
                    Ok(cert) => Decision::Grant(cert.0),
                    Err(e) => Decision::Deny(e.deny_reason()),
                }
            }
            _ => self
                .bank
                .verify_login(self.session, &request, &evidence.quote),
        }
    }
}
