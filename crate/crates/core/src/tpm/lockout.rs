/// Dictionary-attack counter guarding unseal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LockoutState {
    failed_count: u32,
    max_tries: u32,
}

impl LockoutState {
    pub const DEFAULT_MAX_TRIES: u32 = 5;

    pub fn new(max_tries: u32) -> Self {
        assert!(max_tries > 0, "max_tries must be positive");
        LockoutState {
            failed_count: 0,
            max_tries,
        }
    }

    pub fn failed_count(&self) -> u32 {
        self.failed_count
    }

    pub fn max_tries(&self) -> u32 {
        self.max_tries
    }

    pub fn is_locked(&self) -> bool {
        self.failed_count >= self.max_tries
    }

    /// Records a policy failure; returns whether the TPM is now locked.
    pub(crate) fn record_failure(&mut self) -> bool {
        self.failed_count = self.failed_count.saturating_add(1);
        self.is_locked()
    }

    pub(crate) fn clear(&mut self) {
        self.failed_count = 0;
    }
}

impl Default for LockoutState {
    fn default() -> Self {
        Self::new(Self::DEFAULT_MAX_TRIES)
    }
}
