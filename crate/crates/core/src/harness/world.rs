use std::collections::BTreeMap;
use std::sync::Arc;

use sha2::{Digest as _, Sha256};

use crate::bank::{BankConfig, BankService};
use crate::channel::{
    open_session, BankEndpoint, ChannelConfig, Session, Transcript, Transport, DEFAULT_SERVER_TOKEN,
};
use crate::codec::{Evidence, WireMessage};
use crate::identity::{ActivationKey, Credentials, Pin, UserId};
use crate::lma::Lma;
use crate::tpm::{DeviceClient, TpmConfig, TpmDevice};

/// The genuine app build every honest scenario runs.
pub const GENUINE_IMAGE: &[u8] = b"mobile-bank-app release 4.2.0 (build 1187)";

/// The genuine image with one byte flipped.
pub fn tampered_image() -> Vec<u8> {
    let mut image = GENUINE_IMAGE.to_vec();
    image[GENUINE_IMAGE.len() / 2] ^= 0x01;
    image
}

/// Independent 64-bit seed for one component, derived from the run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_be_bytes(out[..8].try_into().unwrap())
}

/// Six-digit PINs.
pub(crate) const PIN_SPACE: u32 = 1_000_000;

pub(crate) fn pin_from_code(code: u32) -> Pin {
    Pin::new(&format!("{:06}", code % PIN_SPACE)).expect("six digits")
}

pub(crate) struct Customer {
    pub device: Arc<TpmDevice>,
    pub lma: Lma<DeviceClient>,
    pub creds: Credentials,
    pub key: ActivationKey,
    pub pin: Pin,
    pub pin_code: u32,
    pub session: Session,
    /// Last login request and evidence sent, for replay.
    pub captured: Option<(WireMessage, Evidence)>,
}

/// One bank and any number of customers, each with their own TPM, all
/// derived from a single seed.
pub(crate) struct World {
    pub seed: u64,
    pub bank: Arc<BankService>,
    pub channel: ChannelConfig,
    pub customers: BTreeMap<String, Customer>,
}

impl World {
    pub fn new(seed: u64) -> Self {
        let bank = Arc::new(
            BankService::new(BankConfig::seeded(derive_seed(seed, "bank")))
                .expect("in-memory bank"),
        );
        let endpoint = Arc::new(BankEndpoint::new(Arc::clone(&bank), DEFAULT_SERVER_TOKEN));
        World {
            seed,
            bank,
            channel: ChannelConfig::new(Transport::InProcess(endpoint), DEFAULT_SERVER_TOKEN),
            customers: BTreeMap::new(),
        }
    }

    /// New account, activation key, phone and open session for `user`.
    pub fn provision(&mut self, user: &str) -> Result<(), String> {
        let user_id = UserId::from_name(user).ok_or("user name longer than 12 bytes")?;
        let secret = derive_seed(self.seed, &format!("secret:{user}")).to_be_bytes();
        let creds = Credentials::from_secret(user_id, &secret);
        self.bank.provision_account(&creds);
        let key = self
            .bank
            .issue_activation_key(&user_id)
            .map_err(|e| e.to_string())?;
        let pin_seed = derive_seed(self.seed, &format!("pin:{user}"));
        let pin_code = (pin_seed % PIN_SPACE as u64) as u32;
        let pin = pin_from_code(pin_code);
        let device = Arc::new(TpmDevice::new(TpmConfig::seeded(derive_seed(
            self.seed,
            &format!("tpm:{user}"),
        ))));
        let session = open_session(&self.channel).map_err(|e| e.to_string())?;
        let customer = Customer {
            lma: Lma::new(device.client()),
            device,
            creds,
            key,
            pin,
            pin_code,
            session,
            captured: None,
        };
        self.customers.insert(user.to_string(), customer);
        Ok(())
    }

    pub fn customer(&mut self, user: &str) -> Result<&mut Customer, String> {
        self.customers
            .get_mut(user)
            .ok_or_else(|| format!("user {user} not provisioned"))
    }

    pub fn into_transcripts(self) -> Vec<Transcript> {
        self.customers
            .into_values()
            .map(|c| c.session.into_transcript())
            .collect()
    }
}
