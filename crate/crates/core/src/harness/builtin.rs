use super::scenario::{Expect, Image, Outcome, PinEntry, Scenario, Step};
use crate::codec::DenyReason;
use crate::lma::{FlowCounters, LmaError, LoginSteps};
use crate::tpm::{LockoutState, TpmError};

const DEFAULT_MAX_TRIES: u32 = LockoutState::DEFAULT_MAX_TRIES;

pub const BUILTIN_SCENARIOS: [&str; 9] = [
    "honest-register",
    "honest-login-1",
    "honest-login-2",
    "credential-baseline",
    "wrong-pin-bruteforce",
    "tampered-image",
    "replayed-quote",
    "revoked-version",
    "foreign-tpm-blob",
];

pub const REGISTRATION_COUNTERS: FlowCounters = FlowCounters::new(2, 1, 0, 1, 3);

pub const fn login_counters(steps: LoginSteps) -> FlowCounters {
    let unseals = match steps {
        LoginSteps::One => 1,
        LoginSteps::Two => 2,
    };
    FlowCounters::new(0, 1, unseals, 1, 3)
}

const ALICE: &str = "alice";

fn user() -> String {
    ALICE.to_string()
}

fn provision() -> Step {
    Step::Provision { user: user() }
}

fn measure(image: Image) -> Step {
    Step::Measure {
        user: user(),
        image,
    }
}

fn end() -> Step {
    Step::EndSession { user: user() }
}

fn registered() -> Vec<Step> {
    vec![
        provision(),
        measure(Image::Genuine),
        Step::Register {
            user: user(),
            expect: Expect::grant()
                .with_counters(REGISTRATION_COUNTERS)
                .with_bytes(84),
        },
        end(),
    ]
}

fn login(steps: LoginSteps, pin: PinEntry, expect: Expect) -> Step {
    Step::Login {
        user: user(),
        steps,
        pin,
        expect,
    }
}

fn honest_login(steps: LoginSteps) -> Step {
    let bytes = match steps {
        LoginSteps::One => 40,
        LoginSteps::Two => 84,
    };
    login(
        steps,
        PinEntry::Correct,
        Expect::grant()
            .with_counters(login_counters(steps))
            .with_bytes(bytes),
    )
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let script = match name {
        "honest-register" => registered(),
        "honest-login-1" | "honest-login-2" => {
            let steps = if name.ends_with('1') {
                LoginSteps::One
            } else {
                LoginSteps::Two
            };
            let mut s = registered();
            s.extend([measure(Image::Genuine), honest_login(steps), end()]);
            s
        }
        "credential-baseline" => vec![
            provision(),
            Step::CredentialLogin {
                user: user(),
                expect: Expect::grant().with_bytes(44),
            },
        ],
        "wrong-pin-bruteforce" => {
            let mut s = registered();
            for attempt in 1..=DEFAULT_MAX_TRIES {
                let err = if attempt < DEFAULT_MAX_TRIES {
                    LmaError::WrongPin
                } else {
                    LmaError::Lockout
                };
                s.push(measure(Image::Genuine));
                s.push(login(
                    LoginSteps::One,
                    PinEntry::Wrong(attempt),
                    Expect::local(err),
                ));
            }
            // the right PIN does not help until the owner resets the lockout
            s.push(measure(Image::Genuine));
            s.push(login(
                LoginSteps::One,
                PinEntry::Correct,
                Expect::local(LmaError::Lockout),
            ));
            s.push(Step::ResetLockout { user: user() });
            s.extend([
                measure(Image::Genuine),
                honest_login(LoginSteps::Two),
                end(),
            ]);
            s
        }
        "tampered-image" => {
            let mut s = registered();
            // an honest app cannot even unseal on a modified image
            s.push(measure(Image::Tampered));
            s.push(login(
                LoginSteps::One,
                PinEntry::Correct,
                Expect::local(LmaError::WrongPin),
            ));
            s.push(measure(Image::Tampered));
            s.push(Step::RogueLogin {
                user: user(),
                expect: Expect::deny(DenyReason::UnknownComposite),
            });
            s
        }
        "replayed-quote" => {
            let mut s = registered();
            s.extend([
                measure(Image::Genuine),
                honest_login(LoginSteps::One),
                end(),
            ]);
            s.push(Step::ReplayLogin {
                user: user(),
                expect: Expect::deny(DenyReason::StaleNonce),
            });
            s
        }
        "revoked-version" => {
            let mut s = registered();
            s.extend([
                measure(Image::Genuine),
                honest_login(LoginSteps::One),
                end(),
            ]);
            s.push(Step::RevokeGenuine {
                expect: Expect::outcome(Outcome::Revoked(1)),
            });
            s.push(measure(Image::Genuine));
            s.push(login(
                LoginSteps::One,
                PinEntry::Correct,
                Expect::deny(DenyReason::Revoked),
            ));
            s.push(end());
            s
        }
        "foreign-tpm-blob" => {
            let mut s = registered();
            s.push(Step::Provision {
                user: "mallory".into(),
            });
            s.push(Step::TransplantStore {
                from: user(),
                to: "mallory".into(),
            });
            s.push(Step::Measure {
                user: "mallory".into(),
                image: Image::Genuine,
            });
            s.push(Step::Login {
                user: "mallory".into(),
                steps: LoginSteps::Two,
                pin: PinEntry::Correct,
                expect: Expect::local(LmaError::Tpm(TpmError::ForeignTpm)),
            });
            s
        }
        _ => return None,
    };
    Some(Scenario {
        name: name.to_string(),
        script,
    })
}
