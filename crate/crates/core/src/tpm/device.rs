use std::collections::BTreeSet;
use std::sync::{Arc, Mutex, MutexGuard};

use super::{
    AttestationQuote, Digest, DigestAlg, KeyHandle, KeyKind, Locality, PcrIndex, PcrPolicy,
    SealedBlob, Tpm, TpmConfig, TpmError,
};
use crate::codec::{
    decode_command, decode_response, encode_command, encode_response, CommandParams, ResponseBody,
    TpmCommand,
};

/// A TPM reachable through binary commands, in the manner of a platform's TPM
/// base services: one marshaled command in, one marshaled response out.
///
/// Commands from any number of threads are executed strictly one at a time.
pub struct TpmDevice {
    tpm: Mutex<Tpm>,
    alg: DigestAlg,
}

impl TpmDevice {
    pub fn new(config: TpmConfig) -> Self {
        let alg = config.alg;
        TpmDevice {
            tpm: Mutex::new(Tpm::new(config)),
            alg,
        }
    }

    pub fn alg(&self) -> DigestAlg {
        self.alg
    }

    /// Execute one marshaled command. Undecodable input yields a
    /// `BadCommand` response rather than an error.
    pub fn execute(&self, command: &[u8]) -> Vec<u8> {
        let result = match decode_command(command) {
            Ok(cmd) => dispatch(&mut self.lock(), cmd),
            Err(_) => Err(TpmError::BadCommand),
        };
        encode_response(&result)
    }

    /// Direct access to the state, for inspection by harnesses and tests.
    pub fn with_tpm<R>(&self, f: impl FnOnce(&mut Tpm) -> R) -> R {
        f(&mut self.lock())
    }

    pub fn client(self: &Arc<Self>) -> DeviceClient {
        DeviceClient {
            device: Arc::clone(self),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Tpm> {
        self.tpm.lock().unwrap_or_else(|p| p.into_inner())
    }
}

fn dispatch(tpm: &mut Tpm, cmd: TpmCommand) -> Result<ResponseBody, TpmError> {
    let locality = cmd.locality;
    Ok(match cmd.params {
        CommandParams::Startup => {
            tpm.reset();
            ResponseBody::Empty
        }
        CommandParams::GetRandom { count } => ResponseBody::Bytes(tpm.get_random(count as usize)),
        CommandParams::Hash { alg, data } => ResponseBody::Digest(tpm.hash(&data, alg)),
        CommandParams::PcrRead { index } => {
            ResponseBody::Digest(tpm.pcr_read(PcrIndex::new(index)?))
        }
        CommandParams::PcrExtend { index, data } => {
            ResponseBody::Digest(tpm.pcr_extend(PcrIndex::new(index)?, &data, locality)?)
        }
        CommandParams::PcrReset { index } => {
            tpm.pcr_reset(PcrIndex::new(index)?, locality)?;
            ResponseBody::Empty
        }
        CommandParams::CreateKey { kind } => ResponseBody::Key(tpm.create_key(kind)),
        CommandParams::LoadKey { id } => ResponseBody::Key(tpm.load_key(id)?),
        CommandParams::Seal { sk, policy, data } => {
            ResponseBody::Blob(tpm.seal(&data, &policy, sk)?)
        }
        CommandParams::Unseal { sk, blob } => ResponseBody::Bytes(tpm.unseal(&blob, sk)?),
        CommandParams::Quote {
            aik,
            selection,
            nonce,
        } => ResponseBody::Quote(tpm.quote(&selection, &nonce, aik)?),
        CommandParams::ResetLockout { token } => {
            tpm.reset_lockout(&token)?;
            ResponseBody::Empty
        }
    })
}

/// [`TpmApi`](super::TpmApi) over the binary command interface of a [`TpmDevice`].
#[derive(Clone)]
pub struct DeviceClient {
    device: Arc<TpmDevice>,
}

impl DeviceClient {
    pub fn device(&self) -> &Arc<TpmDevice> {
        &self.device
    }

    /// Marshal, execute and unmarshal one command.
    pub fn call(
        &mut self,
        locality: Locality,
        params: CommandParams,
    ) -> Result<ResponseBody, TpmError> {
        let code = params.code();
        let request = encode_command(&TpmCommand::new(locality, params));
        let response = self.device.execute(&request);
        decode_response(code, &response).map_err(|_| TpmError::BadResponse)?
    }

    pub fn startup_clear(&mut self) -> Result<(), TpmError> {
        self.call(Locality::Boot, CommandParams::Startup)
            .map(|_| ())
    }

    fn digest(&mut self, locality: Locality, params: CommandParams) -> Result<Digest, TpmError> {
        match self.call(locality, params)? {
            ResponseBody::Digest(d) => Ok(d),
            _ => Err(TpmError::BadResponse),
        }
    }

    fn bytes(&mut self, params: CommandParams) -> Result<Vec<u8>, TpmError> {
        match self.call(Locality::Boot, params)? {
            ResponseBody::Bytes(b) => Ok(b),
            _ => Err(TpmError::BadResponse),
        }
    }

    fn key(&mut self, params: CommandParams) -> Result<KeyHandle, TpmError> {
        match self.call(Locality::Boot, params)? {
            ResponseBody::Key(k) => Ok(k),
            _ => Err(TpmError::BadResponse),
        }
    }
}

impl super::TpmApi for DeviceClient {
    fn alg(&self) -> DigestAlg {
        self.device.alg()
    }

    fn get_random(&mut self, n: usize) -> Result<Vec<u8>, TpmError> {
        let count = u16::try_from(n).map_err(|_| TpmError::BadCommand)?;
        self.bytes(CommandParams::GetRandom { count })
    }

    fn hash(&mut self, data: &[u8], alg: DigestAlg) -> Result<Digest, TpmError> {
        self.digest(
            Locality::Boot,
            CommandParams::Hash {
                alg,
                data: data.to_vec(),
            },
        )
    }

    fn pcr_read(&mut self, index: u8) -> Result<Digest, TpmError> {
        self.digest(Locality::Boot, CommandParams::PcrRead { index })
    }

    fn pcr_extend(
        &mut self,
        index: u8,
        data: &[u8],
        locality: Locality,
    ) -> Result<Digest, TpmError> {
        self.digest(
            locality,
            CommandParams::PcrExtend {
                index,
                data: data.to_vec(),
            },
        )
    }

    fn pcr_reset(&mut self, index: u8, locality: Locality) -> Result<(), TpmError> {
        self.call(locality, CommandParams::PcrReset { index })
            .map(|_| ())
    }

    fn create_key(&mut self, kind: KeyKind) -> Result<KeyHandle, TpmError> {
        self.key(CommandParams::CreateKey { kind })
    }

    fn load_key(&mut self, handle: &KeyHandle) -> Result<KeyHandle, TpmError> {
        self.key(CommandParams::LoadKey { id: handle.id })
    }

    fn seal(
        &mut self,
        data: &[u8],
        policy: &PcrPolicy,
        sk: &KeyHandle,
    ) -> Result<SealedBlob, TpmError> {
        let params = CommandParams::Seal {
            sk: sk.id,
            policy: policy.clone(),
            data: data.to_vec(),
        };
        match self.call(Locality::Boot, params)? {
            ResponseBody::Blob(b) => Ok(b),
            _ => Err(TpmError::BadResponse),
        }
    }

    fn unseal(&mut self, blob: &SealedBlob, sk: &KeyHandle) -> Result<Vec<u8>, TpmError> {
        self.bytes(CommandParams::Unseal {
            sk: sk.id,
            blob: blob.clone(),
        })
    }

    fn quote(
        &mut self,
        selection: &BTreeSet<PcrIndex>,
        qualifying_nonce: &[u8],
        aik: &KeyHandle,
    ) -> Result<AttestationQuote, TpmError> {
        let params = CommandParams::Quote {
            aik: aik.id,
            selection: selection.clone(),
            nonce: qualifying_nonce.to_vec(),
        };
        match self.call(Locality::Boot, params)? {
            ResponseBody::Quote(q) => Ok(q),
            _ => Err(TpmError::BadResponse),
        }
    }

    fn reset_lockout(&mut self, token: &[u8]) -> Result<(), TpmError> {
        self.call(
            Locality::Boot,
            CommandParams::ResetLockout {
                token: token.to_vec(),
            },
        )
        .map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tpm::TpmApi;

    #[test]
    fn garbage_command_gets_bad_command_response() {
        let dev = TpmDevice::new(TpmConfig::seeded(1));
        let resp = dev.execute(&[1, 2, 3]);
        assert_eq!(
            decode_response(crate::codec::CommandCode::PcrRead, &resp),
            Ok(Err(TpmError::BadCommand))
        );
    }

    #[test]
    fn client_errors_cross_the_interface() {
        let dev = Arc::new(TpmDevice::new(TpmConfig::seeded(1)));
        let mut c = dev.client();
        assert_eq!(c.pcr_read(24), Err(TpmError::BadIndex));
        assert_eq!(c.pcr_reset(3, Locality::Os), Err(TpmError::StaticPcr));
        assert_eq!(
            c.pcr_extend(20, b"x", Locality::Boot),
            Err(TpmError::LocalityDenied)
        );
    }

    #[test]
    fn startup_clears_state() {
        let dev = Arc::new(TpmDevice::new(TpmConfig::seeded(1)));
        let mut c = dev.client();
        c.pcr_extend(20, b"x", Locality::Os).unwrap();
        c.startup_clear().unwrap();
        assert!(c.pcr_read(20).unwrap().is_zero());
    }
}
