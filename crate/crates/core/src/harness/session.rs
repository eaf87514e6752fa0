use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::BitString;
use crate::protocol::{Alice, Bob, Direction, Flavor, Message, RejectReason, Role, Setup, Status};

use super::HarnessError;

/// Eve's next oracle call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    Alice(Option<Message>),
    Bob(Message),
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Running,
    Accept(BitString),
    Reject(RejectReason),
    /// The party had already terminated and ignored the call.
    Ignored,
}

/// One oracle call, serialized as `{call, in, out, verdict}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub call: String,
    #[serde(skip)]
    pub role: Role,
    #[serde(skip)]
    pub index: u32,
    #[serde(rename = "in")]
    pub input: Option<Message>,
    #[serde(rename = "out")]
    pub output: Option<Message>,
    pub verdict: Verdict,
}

/// What the strategy may see before each call.
#[derive(Debug, Clone, Copy)]
pub struct EveView<'a> {
    pub setup: &'a Setup,
    pub log: &'a [CallRecord],
    pub alice_calls: u32,
    pub bob_calls: u32,
    pub alice_terminal: bool,
    pub bob_terminal: bool,
    /// Present only after Alice accepted, and only with post-application access.
    pub r_a: Option<&'a BitString>,
    pub r_b: Option<&'a BitString>,
}

impl EveView<'_> {
    pub fn last(&self) -> Option<&CallRecord> {
        self.log.last()
    }

    /// The message `role` sent in `phase`, if any.
    pub fn sent_by(&self, role: Role, phase: u32) -> Option<&Message> {
        self.log
            .iter()
            .filter(|r| r.role == role)
            .filter_map(|r| r.output.as_ref())
            .find(|m| m.phase == phase)
    }
}

pub trait EveStrategy: Send {
    fn name(&self) -> &'static str;
    fn next_call(&mut self, view: &EveView<'_>, tape: &mut ChaCha8Rng) -> Call;
}

/// Visibility of the final keys at each strategy invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateRecord {
    pub alice_terminal: bool,
    pub r_a_visible: bool,
    pub bob_terminal: bool,
    pub r_b_visible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    AliceBudget,
    BobBudget,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// Both accepted with different keys.
    pub robustness_broken: bool,
    /// Bob accepted although the call order was not synchronous.
    pub desync_accept: bool,
    /// Alice accepted after receiving a seed `W` that Bob did not send in that phase.
    pub alice_accepted_modified: bool,
    /// Bob accepted after receiving any message Alice did not send in that phase.
    pub bob_accepted_modified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionOutcome {
    pub r_a: Option<BitString>,
    pub r_b: Option<BitString>,
    pub alice: Status,
    pub bob: Status,
    pub transcript: Vec<CallRecord>,
    pub gate_log: Vec<GateRecord>,
    pub synchronous: bool,
    pub flags: Flags,
    pub aborted: Option<AbortReason>,
}

impl SessionOutcome {
    /// The transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        self.transcript
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

/// The synchronous call order `Alice_1, Bob_1, Alice_2, ...`.
pub fn synchronous_order(flavor: Flavor, phases: u32) -> Vec<(Role, u32)> {
    match flavor {
        Flavor::TwoRound => vec![(Role::Alice, 1), (Role::Bob, 1), (Role::Alice, 2)],
        Flavor::MultiPhase => (1..=phases + 1)
            .flat_map(|i| [(Role::Alice, i), (Role::Bob, i)])
            .collect(),
    }
}

/// A transcript is synchronous iff its call order is a prefix of the synchronous order.
pub fn is_synchronous(transcript: &[CallRecord], flavor: Flavor, phases: u32) -> bool {
    let order = synchronous_order(flavor, phases);
    transcript.len() <= order.len()
        && transcript
            .iter()
            .zip(&order)
            .all(|(r, &(role, index))| r.role == role && r.index == index)
}

fn accepted(transcript: &[CallRecord], role: Role) -> Option<&BitString> {
    transcript.iter().filter(|r| r.role == role).find_map(|r| match &r.verdict {
        Verdict::Accept(k) => Some(k),
        _ => None,
    })
}

fn sent(transcript: &[CallRecord], role: Role, phase: u32) -> Option<&Message> {
    transcript
        .iter()
        .filter(|r| r.role == role)
        .filter_map(|r| r.output.as_ref())
        .find(|m| m.phase == phase)
}

/// Recomputes every violation flag from the transcript alone.
pub fn flags_from_transcript(transcript: &[CallRecord], synchronous: bool) -> Flags {
    let r_a = accepted(transcript, Role::Alice);
    let r_b = accepted(transcript, Role::Bob);
    let received = |role: Role| {
        transcript
            .iter()
            .filter(move |r| r.role == role && r.verdict != Verdict::Ignored)
            .filter_map(|r| r.input.as_ref())
    };
    let alice_modified = received(Role::Alice).any(|m| {
        m.direction == Direction::BobToAlice
            && m.payload.w().is_some()
            && sent(transcript, Role::Bob, m.phase).and_then(|s| s.payload.w()) != m.payload.w()
    });
    let bob_modified = received(Role::Bob).any(|m| sent(transcript, Role::Alice, m.phase) != Some(m));
    Flags {
        robustness_broken: matches!((r_a, r_b), (Some(a), Some(b)) if a != b),
        desync_accept: r_b.is_some() && !synchronous,
        alice_accepted_modified: r_a.is_some() && alice_modified,
        bob_accepted_modified: r_b.is_some() && bob_modified,
    }
}

fn verdict(status: &Status, ignored: bool) -> Verdict {
    match (ignored, status) {
        (true, _) => Verdict::Ignored,
        (false, Status::Running) => Verdict::Running,
        (false, Status::Accept(k)) => Verdict::Accept(*k),
        (false, Status::Reject(r)) => Verdict::Reject(*r),
    }
}

/// Drives both parties under `strategy` until it halts, both budgets are
/// spent, or it oversteps a budget (which aborts the session).
pub fn run_session(
    setup: &Arc<Setup>,
    x: &BitString,
    strategy: &mut dyn EveStrategy,
    post_application: bool,
    tape_seed: u64,
) -> Result<SessionOutcome, HarnessError> {
    let mut master = ChaCha8Rng::seed_from_u64(tape_seed);
    let mut alice = Alice::new(Arc::clone(setup), *x, master.gen())?;
    let mut bob = Bob::new(Arc::clone(setup), *x, master.gen())?;
    let mut eve_tape = ChaCha8Rng::seed_from_u64(master.gen());
    let (alice_budget, bob_budget) = setup.call_budget();
    let mut transcript: Vec<CallRecord> = Vec::new();
    let mut gate_log = Vec::new();
    let mut aborted = None;
    let (mut alice_calls, mut bob_calls) = (0u32, 0u32);

    loop {
        let r_a = alice.status().key().filter(|_| post_application);
        let r_b = bob.status().key().filter(|_| post_application);
        let view = EveView {
            setup,
            log: &transcript,
            alice_calls,
            bob_calls,
            alice_terminal: alice.status().is_terminal(),
            bob_terminal: bob.status().is_terminal(),
            r_a,
            r_b,
        };
        gate_log.push(GateRecord {
            alice_terminal: view.alice_terminal,
            r_a_visible: r_a.is_some(),
            bob_terminal: view.bob_terminal,
            r_b_visible: r_b.is_some(),
        });
        let record = match strategy.next_call(&view, &mut eve_tape) {
            Call::Halt => break,
            Call::Alice(input) => {
                if alice_calls == alice_budget {
                    aborted = Some(AbortReason::AliceBudget);
                    break;
                }
                alice_calls += 1;
                let ignored = alice.status().is_terminal();
                let output = alice.step(input.as_ref());
                CallRecord {
                    call: format!("Alice_{alice_calls}"),
                    role: Role::Alice,
                    index: alice_calls,
                    input,
                    output,
                    verdict: verdict(alice.status(), ignored),
                }
            }
            Call::Bob(input) => {
                if bob_calls == bob_budget {
                    aborted = Some(AbortReason::BobBudget);
                    break;
                }
                bob_calls += 1;
                let ignored = bob.status().is_terminal();
                let output = bob.step(&input);
                CallRecord {
                    call: format!("Bob_{bob_calls}"),
                    role: Role::Bob,
                    index: bob_calls,
                    input: Some(input),
                    output,
                    verdict: verdict(bob.status(), ignored),
                }
            }
        };
        transcript.push(record);
    }

    let synchronous = is_synchronous(&transcript, setup.flavor(), setup.phases());
    let flags = flags_from_transcript(&transcript, synchronous);
    Ok(SessionOutcome {
        r_a: alice.status().key().copied(),
        r_b: bob.status().key().copied(),
        alice: alice.status().clone(),
        bob: bob.status().clone(),
        transcript,
        gate_log,
        synchronous,
        flags,
        aborted,
    })
}
