//! Map, shuffle and reduce over real payloads.
//!
//! Every node maps the messages it stores, a [`ShufflePlan`] is executed on
//! a shared broadcast channel, and each assigned node decodes its missing
//! inputs by GF(2) elimination before reducing its function to the common
//! friends of the two input users.

mod payload;

use std::fmt::Write as _;

use thiserror::Error;

use crate::bits::BitSet;
use crate::coding::CodedPlan;
use crate::coverage::Assignment;
use crate::instance::{demo_instance, Instance, Pair};
use crate::shuffle::{IntermediatePlan, UncodedPlan};

pub use payload::{demo_payloads, padded_width, synthetic_payloads, xor_into, MessagePayload, PayloadError};

pub const TRANSCRIPT_HEADER: &str = "flexshuffle-transcript schema=1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingInput {
    pub node: usize,
    pub function: usize,
    pub message: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("expected {expected} payloads, got {got}")]
    PayloadCount { expected: usize, got: usize },
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("assignment does not map function {function} to a node")]
    Unassigned { function: usize },
    #[error("transmission {index} is invalid: {reason}")]
    InvalidTransmission { index: usize, reason: String },
    #[error("decode failure: {}", format_missing(.failures))]
    DecodeFailure { failures: Vec<MissingInput> },
    #[error("function {function}: output {got:?} differs from oracle {expected:?}")]
    OracleMismatch {
        function: usize,
        expected: Vec<String>,
        got: Vec<String>,
    },
}

fn format_missing(failures: &[MissingInput]) -> String {
    failures
        .iter()
        .map(|f| format!("node {} cannot recover message {} for function {}", f.node, f.message, f.function))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionKind {
    Raw,
    Coded,
    /// Input `slot` (0 = smaller message index) of `function`.
    Intermediate { function: usize, slot: usize },
}

/// A transmission before payload bytes are attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedTransmission {
    pub sender: usize,
    pub kind: TransmissionKind,
    /// Messages XORed together; empty for intermediate values.
    pub support: Vec<usize>,
}

impl PlannedTransmission {
    pub fn raw(sender: usize, message: usize) -> Self {
        Self {
            sender,
            kind: TransmissionKind::Raw,
            support: vec![message],
        }
    }

    pub fn coded(sender: usize, mut support: Vec<usize>) -> Self {
        support.sort_unstable();
        support.dedup();
        let kind = if support.len() == 1 {
            TransmissionKind::Raw
        } else {
            TransmissionKind::Coded
        };
        Self { sender, kind, support }
    }

    pub fn intermediate(sender: usize, function: usize, slot: usize) -> Self {
        Self {
            sender,
            kind: TransmissionKind::Intermediate { function, slot },
            support: Vec::new(),
        }
    }
}

/// Ordered broadcast schedule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShufflePlan {
    pub transmissions: Vec<PlannedTransmission>,
}

impl ShufflePlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.transmissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmissions.is_empty()
    }

    pub fn from_uncoded(plan: &UncodedPlan) -> Self {
        Self {
            transmissions: plan
                .broadcast
                .iter()
                .zip(&plan.senders)
                .map(|(&j, &i)| PlannedTransmission::raw(i, j))
                .collect(),
        }
    }

    pub fn from_intermediate(plan: &IntermediatePlan) -> Self {
        Self {
            transmissions: plan
                .transfers
                .iter()
                .map(|t| PlannedTransmission::intermediate(t.sender, t.function, t.slot))
                .collect(),
        }
    }

    pub fn from_coded(plan: &CodedPlan) -> Self {
        Self {
            transmissions: plan
                .transmissions
                .iter()
                .map(|t| PlannedTransmission::coded(t.sender, t.support.clone()))
                .collect(),
        }
    }

    /// Node 3 broadcasts `b_A` and `b_C + b_D`.
    pub fn demo() -> Self {
        Self {
            transmissions: vec![PlannedTransmission::raw(3, 0), PlannedTransmission::coded(3, vec![2, 3])],
        }
    }
}

/// Assignment used by the demo: functions AB, BC, DE go to nodes 2, 1, 0.
pub fn demo_assignment() -> Assignment {
    Assignment::total(&[2, 1, 0], 4).expect("demo assignment is injective")
}

/// A transmission as it appeared on the channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub sender: usize,
    pub kind: TransmissionKind,
    /// Messages combined; for an intermediate value, its source message.
    pub support: Vec<usize>,
    pub bytes: Vec<u8>,
}

/// One input recovered from the channel by one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeStep {
    pub node: usize,
    pub function: usize,
    pub message: usize,
    /// Transmissions XORed together.
    pub via: Vec<usize>,
    /// Locally stored messages cancelled out.
    pub local: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionOutput {
    pub function: usize,
    pub node: usize,
    pub friends: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub width: usize,
    pub transmissions: Vec<Transmission>,
    pub decodes: Vec<DecodeStep>,
    pub outputs: Vec<FunctionOutput>,
}

fn join(xs: &[usize]) -> String {
    if xs.is_empty() {
        "-".to_string()
    } else {
        xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

impl Transcript {
    pub fn total_bytes(&self) -> usize {
        self.transmissions.iter().map(|t| t.bytes.len()).sum()
    }

    /// Line-oriented log. Decode lines appear only when `verbose` is set.
    pub fn to_log(&self, verbose: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{TRANSCRIPT_HEADER} width={} transmissions={} bytes={}",
            self.width,
            self.transmissions.len(),
            self.total_bytes()
        );
        for (t, tx) in self.transmissions.iter().enumerate() {
            let kind = match tx.kind {
                TransmissionKind::Raw => "raw".to_string(),
                TransmissionKind::Coded => "coded".to_string(),
                TransmissionKind::Intermediate { function, slot } => {
                    format!("intermediate function={function} slot={slot}")
                }
            };
            let _ = writeln!(
                s,
                "tx {t} sender={} kind={kind} support={} bytes={}",
                tx.sender,
                join(&tx.support),
                hex::encode(&tx.bytes)
            );
        }
        if verbose {
            for d in &self.decodes {
                let _ = writeln!(
                    s,
                    "decode node={} function={} message={} via={} local={}",
                    d.node,
                    d.function,
                    d.message,
                    join(&d.via),
                    join(&d.local)
                );
            }
        }
        for o in &self.outputs {
            let _ = writeln!(
                s,
                "reduce function={} node={} output={{{}}}",
                o.function,
                o.node,
                o.friends.join(",")
            );
        }
        s
    }
}

/// An intermediate value held by a node: the projection of one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateValue {
    pub function: usize,
    pub slot: usize,
    pub message: usize,
    pub friends: Vec<String>,
}

fn check_payloads(instance: &Instance, payloads: &[MessagePayload]) -> Result<(), ExecError> {
    if payloads.len() != instance.m() {
        return Err(ExecError::PayloadCount {
            expected: instance.m(),
            got: payloads.len(),
        });
    }
    Ok(())
}

/// Per-node intermediate values for every function input the node stores.
pub fn map_phase(instance: &Instance, payloads: &[MessagePayload]) -> Result<Vec<Vec<IntermediateValue>>, ExecError> {
    check_payloads(instance, payloads)?;
    Ok((0..instance.n())
        .map(|i| {
            let s = instance.placement.side_info(i);
            instance
                .workload
                .pairs()
                .iter()
                .enumerate()
                .flat_map(|(k, pair)| {
                    pair.inputs()
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, j)| s.contains(j))
                        .map(move |(slot, j)| IntermediateValue {
                            function: k,
                            slot,
                            message: j,
                            friends: payloads[j].friends.clone(),
                        })
                })
                .collect()
        })
        .collect())
}

fn intersect(a: &[String], b: &[String]) -> Vec<String> {
    a.iter().filter(|x| b.binary_search(x).is_ok()).cloned().collect()
}

/// Common friends of the two input users, computed directly.
pub fn oracle(payloads: &[MessagePayload], pair: Pair) -> Vec<String> {
    intersect(&payloads[pair.lo].friends, &payloads[pair.hi].friends)
}

/// Received equation after local cancellation, in reduced echelon form.
struct Row {
    pivot: usize,
    unknown: BitSet,
    bytes: Vec<u8>,
    via: BitSet,
    local: BitSet,
}

/// What one node can solve from the coded and raw transmissions.
struct NodeDecoder {
    rows: Vec<Row>,
}

impl NodeDecoder {
    fn new(m: usize, side_info: &BitSet, channel: &[Transmission], encoded: &[Vec<u8>]) -> Self {
        let mut rows: Vec<Row> = Vec::new();
        for (t, tx) in channel.iter().enumerate() {
            if matches!(tx.kind, TransmissionKind::Intermediate { .. }) {
                continue;
            }
            let mut unknown = BitSet::new(m);
            let mut local = BitSet::new(m);
            let mut bytes = tx.bytes.clone();
            for &j in &tx.support {
                if side_info.contains(j) {
                    local.insert(j);
                    xor_into(&mut bytes, &encoded[j]);
                } else {
                    unknown.insert(j);
                }
            }
            let mut via = BitSet::new(channel.len());
            via.insert(t);
            for r in &rows {
                if unknown.contains(r.pivot) {
                    unknown.xor_with(&r.unknown);
                    xor_into(&mut bytes, &r.bytes);
                    via.xor_with(&r.via);
                    local.xor_with(&r.local);
                }
            }
            let Some(pivot) = unknown.first() else { continue };
            for r in rows.iter_mut() {
                if r.unknown.contains(pivot) {
                    r.unknown.xor_with(&unknown);
                    xor_into(&mut r.bytes, &bytes);
                    r.via.xor_with(&via);
                    r.local.xor_with(&local);
                }
            }
            rows.push(Row {
                pivot,
                unknown,
                bytes,
                via,
                local,
            });
        }
        Self { rows }
    }

    /// Payload bytes of `message` with the transmissions and local messages used.
    fn solve(&self, message: usize) -> Option<(Vec<u8>, Vec<usize>, Vec<usize>)> {
        let r = self.rows.iter().find(|r| r.pivot == message)?;
        (r.unknown.count() == 1).then(|| (r.bytes.clone(), r.via.iter().collect(), r.local.iter().collect()))
    }
}

fn validate(
    instance: &Instance,
    payloads: &[MessagePayload],
    encoded: &[Vec<u8>],
    plan: &ShufflePlan,
) -> Result<Vec<Transmission>, ExecError> {
    let width = encoded.first().map_or(2, Vec::len);
    let invalid = |index: usize, reason: String| ExecError::InvalidTransmission { index, reason };
    plan.transmissions
        .iter()
        .enumerate()
        .map(|(t, pt)| {
            if pt.sender >= instance.n() {
                return Err(invalid(t, format!("sender {} out of range", pt.sender)));
            }
            let side = instance.placement.side_info(pt.sender);
            match pt.kind {
                TransmissionKind::Intermediate { function, slot } => {
                    if function >= instance.k() || slot > 1 {
                        return Err(invalid(t, format!("no input slot {slot} of function {function}")));
                    }
                    if !pt.support.is_empty() {
                        return Err(invalid(t, "intermediate values carry no message support".into()));
                    }
                    let j = instance.workload.pair(function).inputs()[slot];
                    if !side.contains(j) {
                        return Err(invalid(t, format!("sender {} does not store message {j}", pt.sender)));
                    }
                    Ok(Transmission {
                        sender: pt.sender,
                        kind: pt.kind,
                        support: vec![j],
                        bytes: payloads[j].encode(width)?,
                    })
                }
                TransmissionKind::Raw | TransmissionKind::Coded => {
                    let ok_len = match pt.kind {
                        TransmissionKind::Raw => pt.support.len() == 1,
                        _ => pt.support.len() >= 2,
                    };
                    if !ok_len || pt.support.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(invalid(t, format!("bad support {:?}", pt.support)));
                    }
                    let mut bytes = vec![0u8; width];
                    for &j in &pt.support {
                        if j >= instance.m() || !side.contains(j) {
                            return Err(invalid(t, format!("sender {} does not store message {j}", pt.sender)));
                        }
                        xor_into(&mut bytes, &encoded[j]);
                    }
                    Ok(Transmission {
                        sender: pt.sender,
                        kind: pt.kind,
                        support: pt.support.clone(),
                        bytes,
                    })
                }
            }
        })
        .collect()
}

/// Executes `plan` and reduces every function at its assigned node.
pub fn run_plan(
    instance: &Instance,
    payloads: &[MessagePayload],
    plan: &ShufflePlan,
    assignment: &Assignment,
) -> Result<Transcript, ExecError> {
    check_payloads(instance, payloads)?;
    let width = padded_width(payloads);
    let encoded = payloads
        .iter()
        .map(|p| p.encode(width))
        .collect::<Result<Vec<_>, _>>()?;
    let channel = validate(instance, payloads, &encoded, plan)?;
    let mut decoders: Vec<Option<NodeDecoder>> = (0..instance.n()).map(|_| None).collect();
    let mut decodes = Vec::new();
    let mut failures = Vec::new();
    let mut outputs = Vec::new();
    for (k, pair) in instance.workload.pairs().iter().enumerate() {
        let node = match assignment.as_slice().get(k).copied().flatten() {
            Some(i) if i < instance.n() => i,
            _ => return Err(ExecError::Unassigned { function: k }),
        };
        let side = instance.placement.side_info(node);
        let mut inputs: Vec<Option<MessagePayload>> = Vec::with_capacity(2);
        for (slot, j) in pair.inputs().into_iter().enumerate() {
            if side.contains(j) {
                inputs.push(Some(payloads[j].clone()));
                continue;
            }
            let direct = channel
                .iter()
                .position(|tx| tx.kind == TransmissionKind::Intermediate { function: k, slot });
            let solved = match direct {
                Some(t) => Some((channel[t].bytes.clone(), vec![t], Vec::new())),
                None => decoders[node]
                    .get_or_insert_with(|| NodeDecoder::new(instance.m(), side, &channel, &encoded))
                    .solve(j),
            };
            match solved {
                Some((bytes, via, local)) => {
                    inputs.push(Some(MessagePayload::decode(&bytes)?));
                    decodes.push(DecodeStep {
                        node,
                        function: k,
                        message: j,
                        via,
                        local,
                    });
                }
                None => {
                    inputs.push(None);
                    failures.push(MissingInput {
                        node,
                        function: k,
                        message: j,
                    });
                }
            }
        }
        if let [Some(a), Some(b)] = &inputs[..] {
            outputs.push(FunctionOutput {
                function: k,
                node,
                friends: intersect(&a.friends, &b.friends),
            });
        }
    }
    if !failures.is_empty() {
        return Err(ExecError::DecodeFailure { failures });
    }
    Ok(Transcript {
        width,
        transmissions: channel,
        decodes,
        outputs,
    })
}

/// Checks every output against [`oracle`].
pub fn check_outputs(instance: &Instance, payloads: &[MessagePayload], transcript: &Transcript) -> Result<(), ExecError> {
    for (k, pair) in instance.workload.pairs().iter().enumerate() {
        let expected = oracle(payloads, *pair);
        let got = transcript
            .outputs
            .iter()
            .find(|o| o.function == k)
            .map(|o| o.friends.clone())
            .unwrap_or_default();
        if got != expected {
            return Err(ExecError::OracleMismatch {
                function: k,
                expected,
                got,
            });
        }
    }
    Ok(())
}

/// Runs `plan` on the common-friends instance and checks the outputs.
pub fn run_demo_with(plan: &ShufflePlan) -> Result<Transcript, ExecError> {
    let instance = demo_instance();
    let payloads = demo_payloads();
    let transcript = run_plan(&instance, &payloads, plan, &demo_assignment())?;
    check_outputs(&instance, &payloads, &transcript)?;
    Ok(transcript)
}

pub fn run_demo() -> Result<Transcript, ExecError> {
    run_demo_with(&ShufflePlan::demo())
}
