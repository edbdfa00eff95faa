//! Operational semantics: computation reduction, asynchronous configuration
//! reduction, sessions of named configurations, schedulers, a liveness
//! monitor, and type tracking along reductions.
//!
//! # Computations
//!
//! A closed computation decomposes uniquely as `R[r]` with `R` a reduction
//! context (`□`, `let x = R in u`, `letrec f(…) = t in R`) and `r` a redex.
//! Type ascriptions are transparent: `(t : T)` reduces as `t` does and the
//! ascription is dropped from the reduct. A call `f(v…)` is expanded using
//! the innermost enclosing `letrec` defining `f`.
//!
//! # Configurations
//!
//! Queues hold, per participant, a list of messages. Producing a message
//! (`CProd`) pushes it on the front of the send queue and delivering it
//! (`CSend`) pops it off the back; receiving (`CRecv`) pushes on the front of
//! the receive queue and consuming (`CCons`) pops off the back. Each list is
//! therefore first-in first-out.
//!
//! A τ step of the computation is a `CInt` step; [`ConfigStep::rule`] records
//! the computation rule that fired (`LetR`, `IfF`, …), so traces pin down
//! exactly which reduction happened.
//!
//! # Sessions and scheduling
//!
//! A session is a list of named configurations. It steps either by a τ step
//! of one participant or by a communication `p → q : m`, which pairs `p`'s
//! `CSend` with `q`'s `CRecv`.
//!
//! The round-robin scheduler visits participants cyclically. On its turn a
//! participant runs up to [`TAU_BUDGET`] τ steps, then one communication it
//! takes part in fires (its own oldest outgoing message if any, else an
//! incoming one). Every continuously enabled action is thus taken within one
//! round. The random scheduler picks uniformly among all enabled steps using
//! a seeded generator, so runs are reproducible.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::lang::{result, Computation, Configuration, FunDef, Message, Queue, Value};
use crate::relations::{reduct_type, Direction};
use crate::session::{GroundType, Label, Participant, SessionType};
use crate::syntax::Program;

/// τ steps granted to a participant per round-robin turn.
pub const TAU_BUDGET: usize = 32;

/// Default step bound for [`run_session`].
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// A local action `α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalAction {
    /// An internal step.
    Tau,
    /// `p!m`.
    SendTo(Participant, Message),
    /// `p?m`.
    RecvFrom(Participant, Message),
}

impl fmt::Display for LocalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalAction::Tau => write!(f, "τ"),
            LocalAction::SendTo(p, m) => write!(f, "{p}!{m}"),
            LocalAction::RecvFrom(p, m) => write!(f, "{p}?{m}"),
        }
    }
}

/// A reduction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    /// `let x = return v in u → u[x ↦ v]`.
    LetR,
    /// `if true`.
    IfT,
    /// `if false`.
    IfF,
    /// Integer addition.
    Add,
    /// Integer subtraction.
    Sub,
    /// `n1 < n2` is true.
    LeT,
    /// `n1 < n2` is false.
    LeF,
    /// `send`.
    Send,
    /// `recv`.
    Recv,
    /// Expansion of a recursive call.
    Apply,
    /// Production into the send queue.
    CProd,
    /// Consumption from the receive queue.
    CCons,
    /// Delivery from the send queue.
    CSend,
    /// Arrival into the receive queue.
    CRecv,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One computation step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompStep {
    /// The action.
    pub action: LocalAction,
    /// The rule at the redex.
    pub rule: Rule,
    /// The reduct.
    pub next: Computation,
}

/// Chooses the payloads offered to a receive: given the sender, the arm's
/// label and its payload type, the values to try.
pub type Payloads<'a> = dyn Fn(&Participant, &Label, GroundType) -> Vec<Value> + 'a;

/// All one-step reducts of a closed computation. A receive offers one step
/// per arm per payload supplied by `payloads`; an empty result means `t` is
/// a value or stuck.
pub fn step_computation(t: &Computation, payloads: &Payloads<'_>) -> Vec<CompStep> {
    let mut defs = Vec::new();
    steps(t, payloads, &mut defs)
}

fn steps<'t>(t: &'t Computation, payloads: &Payloads<'_>, defs: &mut Vec<&'t FunDef>) -> Vec<CompStep> {
    use Computation::*;
    let tau = |rule, next| vec![CompStep { action: LocalAction::Tau, rule, next }];
    match t {
        Return(_) => vec![],
        Let(x, a, u) => {
            if let Return(v) = peel(a) {
                return tau(Rule::LetR, u.subst(x, v));
            }
            steps(a, payloads, defs)
                .into_iter()
                .map(|s| CompStep { next: Let(x.clone(), Box::new(s.next), u.clone()), ..s })
                .collect()
        }
        LetRec(def, cont) => {
            defs.push(def);
            let out = steps(cont, payloads, defs)
                .into_iter()
                .map(|s| CompStep { next: LetRec(def.clone(), Box::new(s.next)), ..s })
                .collect();
            defs.pop();
            out
        }
        Ascribe(inner, _) => steps(inner, payloads, defs),
        Add(Value::Int(a), Value::Int(b)) => tau(Rule::Add, Return(Value::Int(a.wrapping_add(*b)))),
        Sub(Value::Int(a), Value::Int(b)) => tau(Rule::Sub, Return(Value::Int(a.wrapping_sub(*b)))),
        Less(Value::Int(a), Value::Int(b)) => {
            if a < b {
                tau(Rule::LeT, Return(Value::Bool(true)))
            } else {
                tau(Rule::LeF, Return(Value::Bool(false)))
            }
        }
        If(Value::Bool(true), a, _) => tau(Rule::IfT, (**a).clone()),
        If(Value::Bool(false), _, b) => tau(Rule::IfF, (**b).clone()),
        Send { label, value, to, cont } if value.is_constant() => vec![CompStep {
            action: LocalAction::SendTo(to.clone(), Message::new(label.clone(), value.clone())),
            rule: Rule::Send,
            next: (**cont).clone(),
        }],
        Recv { from, arms } => {
            let mut out = Vec::new();
            for (l, arm) in arms {
                for v in payloads(from, l, arm.ground) {
                    if v.ground() != Some(arm.ground) {
                        continue;
                    }
                    out.push(CompStep {
                        action: LocalAction::RecvFrom(from.clone(), Message::new(l.clone(), v.clone())),
                        rule: Rule::Recv,
                        next: arm.body.subst(&arm.binder, &v),
                    });
                }
            }
            out
        }
        Apply(f, args) if args.iter().all(Value::is_constant) => {
            let Some(def) = defs.iter().rev().find(|d| &d.name == f) else {
                return vec![];
            };
            if def.params.len() != args.len() {
                return vec![];
            }
            let mut body = def.params.iter().zip(args).fold(def.body.clone(), |b, ((x, _), v)| b.subst(x, v));
            if let Some((x, grade)) = &def.grade {
                body = body.subst_type_var(x, &SessionType::rec(x.clone(), grade.clone()));
            }
            tau(Rule::Apply, body)
        }
        _ => vec![],
    }
}

fn peel(t: &Computation) -> &Computation {
    match t {
        Computation::Ascribe(inner, _) => peel(inner),
        other => other,
    }
}

/// The participant the computation is waiting on, if its redex is a receive.
pub fn pending_recv(t: &Computation) -> Option<&Participant> {
    match t {
        Computation::Let(_, a, _) => match peel(a) {
            Computation::Return(_) => None,
            _ => pending_recv(a),
        },
        Computation::LetRec(_, cont) => pending_recv(cont),
        Computation::Ascribe(inner, _) => pending_recv(inner),
        Computation::Recv { from, .. } => Some(from),
        _ => None,
    }
}

/// The labels and payload types a computation's pending receive accepts.
pub fn pending_arms(t: &Computation) -> Option<(&Participant, Vec<(Label, GroundType)>)> {
    match t {
        Computation::Let(_, a, _) => match peel(a) {
            Computation::Return(_) => None,
            _ => pending_arms(a),
        },
        Computation::LetRec(_, cont) => pending_arms(cont),
        Computation::Ascribe(inner, _) => pending_arms(inner),
        Computation::Recv { from, arms } => Some((from, arms.iter().map(|(l, a)| (l.clone(), a.ground)).collect())),
        _ => None,
    }
}

/// The result of a terminated computation, seeing through ascriptions and
/// enclosing recursive definitions.
pub fn returned_value(t: &Computation) -> Option<&Value> {
    match t {
        Computation::Return(v) => Some(v),
        Computation::LetRec(_, cont) | Computation::Ascribe(cont, _) => returned_value(cont),
        _ => None,
    }
}

/// One configuration step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigStep {
    /// The action (τ for `CInt`, `CProd`, `CCons`).
    pub action: LocalAction,
    /// `CProd`, `CCons`, `CSend`, `CRecv`, or the computation rule of a `CInt` step.
    pub rule: Rule,
    /// The reduct.
    pub next: Configuration,
}

/// All one-step reducts of a configuration. `CRecv` is offered only for the
/// `incoming` message, when given.
pub fn step_configuration(c: &Configuration, incoming: Option<(&Participant, &Message)>) -> Vec<ConfigStep> {
    let mut out = tau_steps(c);
    for p in c.sigma.participants() {
        let mut sigma = c.sigma.clone();
        let m = sigma.pop_back(p).expect("nonempty");
        out.push(ConfigStep {
            action: LocalAction::SendTo(p.clone(), m),
            rule: Rule::CSend,
            next: Configuration { rho: c.rho.clone(), comp: c.comp.clone(), sigma },
        });
    }
    if let Some((p, m)) = incoming {
        let mut rho = c.rho.clone();
        rho.push_front(p.clone(), m.clone());
        out.push(ConfigStep {
            action: LocalAction::RecvFrom(p.clone(), m.clone()),
            rule: Rule::CRecv,
            next: Configuration { rho, comp: c.comp.clone(), sigma: c.sigma.clone() },
        });
    }
    out
}

/// The τ steps of a configuration (`CInt`, `CProd`, `CCons`).
pub fn tau_steps(c: &Configuration) -> Vec<ConfigStep> {
    let offer = |p: &Participant, l: &Label, b: GroundType| -> Vec<Value> {
        match c.rho.back(p) {
            Some(m) if &m.label == l && m.ground() == b => vec![m.payload.clone()],
            _ => vec![],
        }
    };
    step_computation(&c.comp, &offer)
        .into_iter()
        .map(|s| match s.action {
            LocalAction::Tau => ConfigStep {
                action: LocalAction::Tau,
                rule: s.rule,
                next: Configuration { rho: c.rho.clone(), comp: s.next, sigma: c.sigma.clone() },
            },
            LocalAction::SendTo(p, m) => {
                let mut sigma = c.sigma.clone();
                sigma.push_front(p, m);
                ConfigStep { action: LocalAction::Tau, rule: Rule::CProd, next: Configuration { rho: c.rho.clone(), comp: s.next, sigma } }
            }
            LocalAction::RecvFrom(p, _) => {
                let mut rho = c.rho.clone();
                rho.pop_back(&p);
                ConfigStep { action: LocalAction::Tau, rule: Rule::CCons, next: Configuration { rho, comp: s.next, sigma: c.sigma.clone() } }
            }
        })
        .collect()
}

/// An entry of a configuration trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTraceEntry {
    /// The action.
    pub action: LocalAction,
    /// The rule.
    pub rule: Rule,
}

/// Runs a configuration in isolation: at each step, deliver the next of
/// `inputs` if any remain (`CRecv`), else take a τ step, else deliver the
/// back message of the first nonempty send list (`CSend`). Stops when no
/// step applies or after `max_steps`.
pub fn drive_configuration(c: &Configuration, inputs: &[(Participant, Message)], max_steps: usize) -> (Vec<LocalTraceEntry>, Configuration) {
    let mut cur = c.clone();
    let mut trace = Vec::new();
    let mut inputs = inputs.iter();
    let mut next_input = inputs.next();
    for _ in 0..max_steps {
        let step = if let Some((p, m)) = next_input {
            next_input = inputs.next();
            step_configuration(&cur, Some((p, m))).into_iter().find(|s| s.rule == Rule::CRecv)
        } else {
            let steps = step_configuration(&cur, None);
            let tau = steps.iter().position(|s| s.action == LocalAction::Tau);
            match tau {
                Some(i) => steps.into_iter().nth(i),
                None => steps.into_iter().find(|s| s.rule == Rule::CSend),
            }
        };
        let Some(step) = step else { break };
        trace.push(LocalTraceEntry { action: step.action, rule: step.rule });
        cur = step.next;
    }
    (trace, cur)
}

/// A global action `β`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GlobalAction {
    /// A τ step of one participant, with the rule that fired.
    TauAt(Participant, Rule),
    /// `p → q : m`.
    Comm(Participant, Participant, Message),
}

impl GlobalAction {
    /// The trace-file JSON form of the action.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            GlobalAction::TauAt(p, r) => json!({"kind": "tau", "role": p.to_string(), "rule": r.to_string()}),
            GlobalAction::Comm(p, q, m) => json!({
                "kind": "comm",
                "from": p.to_string(),
                "to": q.to_string(),
                "label": m.label.to_string(),
                "payload": m.payload.to_json(),
            }),
        }
    }
}

impl fmt::Display for GlobalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlobalAction::TauAt(p, r) => write!(f, "τ@{p} ({r})"),
            GlobalAction::Comm(p, q, m) => write!(f, "{p} → {q} : {m}"),
        }
    }
}

/// A session: named configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    /// The participants, in declaration order.
    pub roles: Vec<(Participant, Configuration)>,
}

/// A problem building a session.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    /// Two configurations share a name.
    #[error("participant {0} is declared twice")]
    Duplicate(Participant),
    /// A configuration talks to itself.
    #[error("participant {0} communicates with itself")]
    SelfCommunication(Participant),
    /// A computation is not closed.
    #[error("the implementation of {0} is not closed")]
    NotClosed(Participant),
}

impl Session {
    /// Builds a session, checking names are distinct and computations closed.
    pub fn new(roles: Vec<(Participant, Configuration)>) -> Result<Self, SessionError> {
        for (i, (p, c)) in roles.iter().enumerate() {
            if roles[..i].iter().any(|(q, _)| q == p) {
                return Err(SessionError::Duplicate(p.clone()));
            }
            if !c.comp.is_closed() {
                return Err(SessionError::NotClosed(p.clone()));
            }
        }
        Ok(Session { roles })
    }

    /// The session of a parsed file: every participant starts as `⟨∅, t, ∅⟩`.
    pub fn from_program(prog: &Program) -> Result<Self, SessionError> {
        Session::new(prog.participants.iter().map(|d| (d.name.clone(), Configuration::new(d.body.clone()))).collect())
    }

    /// The configuration of `p`.
    pub fn get(&self, p: &Participant) -> Option<&Configuration> {
        self.roles.iter().find(|(q, _)| q == p).map(|(_, c)| c)
    }

    fn index(&self, p: &Participant) -> Option<usize> {
        self.roles.iter().position(|(q, _)| q == p)
    }

    /// The results of all participants, if every one has terminated with
    /// empty queues.
    pub fn results(&self) -> Option<BTreeMap<Participant, Value>> {
        self.roles.iter().map(|(p, c)| completed_result(c).map(|v| (p.clone(), v))).collect()
    }

    /// Total number of queued messages.
    pub fn queued(&self) -> usize {
        self.roles.iter().map(|(_, c)| c.rho.len() + c.sigma.len()).sum()
    }
}

fn completed_result(c: &Configuration) -> Option<Value> {
    if !c.rho.is_empty() || !c.sigma.is_empty() {
        return None;
    }
    result(c).or_else(|| returned_value(&c.comp).cloned())
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, c)) in self.roles.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{p} ◁ {c}")?;
        }
        Ok(())
    }
}

/// All one-step reducts of a session.
pub fn step_session(m: &Session) -> Vec<(GlobalAction, Session)> {
    let mut out = Vec::new();
    for (i, (p, c)) in m.roles.iter().enumerate() {
        for s in tau_steps(c) {
            let mut next = m.clone();
            next.roles[i].1 = s.next;
            out.push((GlobalAction::TauAt(p.clone(), s.rule), next));
        }
    }
    for i in 0..m.roles.len() {
        out.extend(comms_from(m, i));
    }
    out
}

fn comms_from(m: &Session, i: usize) -> Vec<(GlobalAction, Session)> {
    let (p, c) = &m.roles[i];
    let mut out = Vec::new();
    for q in c.sigma.participants() {
        let Some(k) = m.index(q) else { continue };
        if k == i {
            continue;
        }
        let mut next = m.clone();
        let msg = next.roles[i].1.sigma.pop_back(q).expect("nonempty");
        next.roles[k].1.rho.push_front(p.clone(), msg.clone());
        out.push((GlobalAction::Comm(p.clone(), q.clone(), msg), next));
    }
    out
}

/// A scheduling policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    /// Cyclic, with a τ budget per turn.
    RoundRobin,
    /// Uniform among enabled steps, seeded.
    Random(u64),
}

/// One entry of a session trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    /// 0-based step index.
    pub step: usize,
    /// The action.
    pub action: GlobalAction,
}

impl TraceEntry {
    /// The trace-file JSON object.
    pub fn to_json(&self) -> serde_json::Value {
        json!({"step": self.step, "action": self.action.to_json()})
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Every participant returned, all queues are empty.
    Completed(BTreeMap<Participant, Value>),
    /// The step bound was reached.
    Running(Session),
    /// No step is enabled but some participant has not completed.
    Stuck(Session),
}

impl Verdict {
    /// `completed`, `running`, or `stuck`.
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Completed(_) => "completed",
            Verdict::Running(_) => "running",
            Verdict::Stuck(_) => "stuck",
        }
    }
}

/// A waiting period observed by the liveness monitor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Wait {
    /// The waiting participant (receiver of a blocked receive, or producer
    /// of a buffered message).
    pub role: String,
    /// The peer being waited on / sent to.
    pub peer: String,
    /// `recv` or `send`.
    pub kind: &'static str,
    /// Step index at which the wait began.
    pub since: usize,
    /// Step index at which it was discharged, if it was.
    pub discharged: Option<usize>,
}

impl Wait {
    /// Steps waited (up to `now` if still pending).
    pub fn length(&self, now: usize) -> usize {
        self.discharged.unwrap_or(now) - self.since
    }
}

/// Liveness report of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LivenessReport {
    /// Every wait observed.
    pub waits: Vec<Wait>,
    /// Largest total number of queued messages seen.
    pub max_queue_depth: usize,
    /// `#roles × TAU_BUDGET × max(queue depth, 1) × 8`.
    pub bound: usize,
    /// Longest discharged blocked receive.
    pub max_recv_wait: usize,
    /// Whether every blocked receive was discharged within the bound.
    pub within_bound: bool,
}

/// The outcome of [`run_session`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Every step taken.
    pub trace: Vec<TraceEntry>,
    /// How the run ended.
    pub verdict: Verdict,
    /// Liveness monitor.
    pub liveness: LivenessReport,
    /// The final session.
    pub last: Session,
}

struct Monitor {
    waits: Vec<Wait>,
    open_recv: BTreeMap<Participant, usize>,
    open_send: Vec<(Participant, Participant, usize)>,
    max_depth: usize,
}

impl Monitor {
    fn new() -> Self {
        Monitor { waits: Vec::new(), open_recv: BTreeMap::new(), open_send: Vec::new(), max_depth: 0 }
    }

    /// Records the state after step `now` (or the initial state for 0).
    fn observe(&mut self, m: &Session, now: usize, action: Option<&GlobalAction>) {
        self.max_depth = self.max_depth.max(m.queued());
        if let Some(GlobalAction::Comm(p, q, _)) = action {
            // The oldest message p buffered for q is delivered.
            if let Some(pos) = self.open_send.iter().position(|(a, b, _)| a == p && b == q) {
                let (_, _, w) = self.open_send.remove(pos);
                self.waits[w].discharged = Some(now);
            }
        }
        if let Some(GlobalAction::TauAt(p, Rule::CProd)) = action {
            let i = m.index(p).expect("role");
            // The newest message of p is at the front of some list; find the
            // list that grew by comparing with the open waits.
            let c = &m.roles[i].1;
            for q in c.sigma.participants() {
                let open = self.open_send.iter().filter(|(a, b, _)| a == p && b == q).count();
                if c.sigma.list(q).len() > open {
                    self.waits.push(Wait { role: p.to_string(), peer: q.to_string(), kind: "send", since: now, discharged: None });
                    self.open_send.push((p.clone(), q.clone(), self.waits.len() - 1));
                }
            }
        }
        for (p, c) in &m.roles {
            let blocked = match pending_recv(&c.comp) {
                Some(from) => c.rho.back(from).is_none(),
                None => false,
            };
            match (blocked, self.open_recv.get(p).copied()) {
                (true, None) => {
                    let from = pending_recv(&c.comp).expect("blocked").to_string();
                    self.waits.push(Wait { role: p.to_string(), peer: from, kind: "recv", since: now, discharged: None });
                    self.open_recv.insert(p.clone(), self.waits.len() - 1);
                }
                (false, Some(w)) => {
                    self.waits[w].discharged = Some(now);
                    self.open_recv.remove(p);
                }
                _ => {}
            }
        }
    }

    fn report(self, roles: usize, now: usize) -> LivenessReport {
        let bound = roles * TAU_BUDGET * self.max_depth.max(1) * 8;
        let recv_waits = self.waits.iter().filter(|w| w.kind == "recv");
        let max_recv_wait = recv_waits.clone().filter(|w| w.discharged.is_some()).map(|w| w.length(now)).max().unwrap_or(0);
        let within_bound = recv_waits.clone().all(|w| w.discharged.is_some() && w.length(now) <= bound);
        LivenessReport { waits: self.waits, max_queue_depth: self.max_depth, bound, max_recv_wait, within_bound }
    }
}

/// Runs a session under a scheduler for at most `max_steps` steps.
pub fn run_session(m: &Session, scheduler: Scheduler, max_steps: usize) -> RunOutcome {
    let mut cur = m.clone();
    let mut trace = Vec::new();
    let mut monitor = Monitor::new();
    monitor.observe(&cur, 0, None);
    let mut rng = match scheduler {
        Scheduler::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Scheduler::RoundRobin => None,
    };
    let n = cur.roles.len();
    let mut turn = 0usize;
    let mut budget_used = 0usize;
    let mut idle_turns = 0usize;
    let verdict = loop {
        if let Some(results) = cur.results() {
            break Verdict::Completed(results);
        }
        if trace.len() >= max_steps {
            break Verdict::Running(cur.clone());
        }
        let chosen = match &mut rng {
            Some(rng) => {
                let mut all = step_session(&cur);
                if all.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..all.len());
                    Some(all.swap_remove(i))
                }
            }
            None => {
                if n == 0 {
                    None
                } else {
                    // Round robin: τ steps of the current participant within
                    // its budget, then one communication involving it.
                    let i = turn % n;
                    let mut pick = None;
                    if budget_used < TAU_BUDGET {
                        if let Some(s) = tau_steps(&cur.roles[i].1).into_iter().next() {
                            let mut next = cur.clone();
                            next.roles[i].1 = s.next;
                            pick = Some((GlobalAction::TauAt(cur.roles[i].0.clone(), s.rule), next));
                            budget_used += 1;
                        }
                    }
                    if pick.is_none() {
                        let p = cur.roles[i].0.clone();
                        let mut comms = comms_from(&cur, i);
                        if comms.is_empty() {
                            comms = (0..n)
                                .filter(|&j| j != i)
                                .flat_map(|j| comms_from(&cur, j))
                                .filter(|(a, _)| matches!(a, GlobalAction::Comm(_, q, _) if *q == p))
                                .collect();
                        }
                        pick = comms.into_iter().next();
                        turn += 1;
                        budget_used = 0;
                        if pick.is_none() {
                            idle_turns += 1;
                            if idle_turns > n {
                                // A full round without any step: nothing is enabled.
                                None
                            } else {
                                continue;
                            }
                        } else {
                            pick
                        }
                    } else {
                        pick
                    }
                }
            }
        };
        let Some((action, next)) = chosen else {
            break Verdict::Stuck(cur.clone());
        };
        idle_turns = 0;
        cur = next;
        let step = trace.len();
        monitor.observe(&cur, step + 1, Some(&action));
        trace.push(TraceEntry { step, action });
    };
    let liveness = monitor.report(cur.roles.len(), trace.len());
    RunOutcome { trace, verdict, liveness, last: cur }
}

/// A type-tracking failure: the action is not permitted by the type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{ty} permits no {action} within fuel {fuel}")]
pub struct TrackError {
    /// The type, printed.
    pub ty: String,
    /// The action, printed.
    pub action: String,
    /// The fuel used.
    pub fuel: usize,
}

/// The type after an action: unchanged for τ, the canonical send reduct for
/// `p!m`, the canonical receive reduct for `p?m`.
pub fn track_type(t: &SessionType, a: &LocalAction, fuel: usize) -> Result<SessionType, TrackError> {
    let found = match a {
        LocalAction::Tau => return Ok(t.clone()),
        LocalAction::SendTo(p, m) => reduct_type(Direction::Send, t, p, &m.label, m.ground(), fuel),
        LocalAction::RecvFrom(p, m) => reduct_type(Direction::Recv, t, p, &m.label, m.ground(), fuel),
    };
    found.ok_or_else(|| TrackError { ty: t.to_string(), action: a.to_string(), fuel })
}

/// Convenience: the queue contents of a configuration as `(participant, message)` pairs, front first.
pub fn queue_items(q: &Queue) -> Vec<(Participant, Message)> {
    q.participants().flat_map(|p| q.list(p).into_iter().map(move |m| (p.clone(), m))).collect()
}
