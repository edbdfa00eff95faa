//! Computation trees: a queue-free model of asynchronous message passing.
//!
//! A tree is `return x`, `send p m; t`, or `recv p {m ↦ t_m}` over a set of
//! messages `M`. Trees may be infinite, so subtrees are suspended and forced
//! on demand (each suspension is computed at most once). A receive node maps
//! each label to its payload type and a function from payloads to subtrees;
//! `None` marks a message outside the node's set `M`.
//!
//! Trees reduce by visible actions only. Besides the base rules, a send to
//! `p` may overtake sends to other participants (`SendSend`), and a receive
//! may overtake any send (`RecvSend`) or a receive from another participant
//! (`RecvRecv`). For `RecvRecv` the retained message set `M'` is always the
//! largest one, i.e. exactly the messages whose subtree can itself perform
//! the receive.
//!
//! Coinductive notions (typing, equality, bisimilarity) are checked up to an
//! observation depth, with integer payloads sampled from a probe list and
//! booleans and unit enumerated exhaustively.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use indexmap::IndexMap;

use crate::lang::{result, Configuration, Message, Value};
use crate::relations::{recvs, reduct_type, Direction};
use crate::runtime::{returned_value, tau_steps, LocalAction};
use crate::session::{unfold, Canon, GroundType, Label, Participant, SessionType};

/// Default observation depth.
pub const DEFAULT_DEPTH: usize = 6;

/// Default integer probes.
pub const DEFAULT_INT_PROBES: [i64; 4] = [-1, 0, 1, 2];

/// Observation window for coinductive comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeConfig {
    /// Number of visible steps observed.
    pub depth: usize,
    /// Integer payloads tried at integer receives.
    pub int_probes: Vec<i64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { depth: DEFAULT_DEPTH, int_probes: DEFAULT_INT_PROBES.to_vec() }
    }
}

impl ProbeConfig {
    /// Default probes at the given depth.
    pub fn with_depth(depth: usize) -> Self {
        ProbeConfig { depth, ..Default::default() }
    }

    /// The payloads tried for a ground type.
    pub fn payloads(&self, b: GroundType) -> Vec<Value> {
        match b {
            GroundType::Unit => vec![Value::Unit],
            GroundType::Bool => vec![Value::Bool(true), Value::Bool(false)],
            GroundType::Int => self.int_probes.iter().map(|n| Value::Int(*n)).collect(),
        }
    }
}

type Thunk = Box<dyn FnOnce() -> Tree + Send>;

struct LazyInner {
    cell: OnceLock<Tree>,
    init: Mutex<Option<Thunk>>,
}

/// A suspended tree, computed at most once.
#[derive(Clone)]
pub struct Lazy(Arc<LazyInner>);

impl Lazy {
    /// Suspends `f`.
    pub fn new(f: impl FnOnce() -> Tree + Send + 'static) -> Self {
        Lazy(Arc::new(LazyInner { cell: OnceLock::new(), init: Mutex::new(Some(Box::new(f))) }))
    }

    /// An already computed tree.
    pub fn ready(t: Tree) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(t);
        Lazy(Arc::new(LazyInner { cell, init: Mutex::new(None) }))
    }

    /// Computes (once) and returns the tree.
    pub fn force(&self) -> &Tree {
        self.0.cell.get_or_init(|| {
            let f = self.0.init.lock().expect("lazy tree lock").take().expect("suspension forced re-entrantly");
            f()
        })
    }
}

impl fmt::Debug for Lazy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.cell.get() {
            Some(t) => write!(f, "{t:?}"),
            None => write!(f, "…"),
        }
    }
}

/// An arm of a receive node: payload to subtree, `None` outside `M`.
pub type ArmFn = Arc<dyn Fn(&Value) -> Option<Tree> + Send + Sync>;

/// A receive node.
pub struct RecvNode {
    arms: IndexMap<Label, (GroundType, ArmFn)>,
    memo: Mutex<HashMap<(Label, Value), Option<Tree>>>,
}

impl RecvNode {
    /// Builds a node from label-indexed arms.
    pub fn new(arms: IndexMap<Label, (GroundType, ArmFn)>) -> Self {
        RecvNode { arms, memo: Mutex::new(HashMap::new()) }
    }

    /// The labels and payload types.
    pub fn signature(&self) -> Vec<(Label, GroundType)> {
        self.arms.iter().map(|(l, (b, _))| (l.clone(), *b)).collect()
    }

    /// The subtree for message `ℓ(v)`, if `ℓ(v) ∈ M`.
    pub fn arm(&self, l: &Label, v: &Value) -> Option<Tree> {
        let (b, f) = self.arms.get(l)?;
        if v.ground() != Some(*b) {
            return None;
        }
        let key = (l.clone(), v.clone());
        if let Some(hit) = self.memo.lock().expect("arm memo").get(&key) {
            return hit.clone();
        }
        let t = f(v);
        self.memo.lock().expect("arm memo").insert(key, t.clone());
        t
    }
}

/// A computation tree over constant results.
#[derive(Clone)]
pub enum Tree {
    /// `return x`.
    Ret(Value),
    /// `send p m; t`.
    Send(Participant, Message, Lazy),
    /// `recv p {m ↦ t_m}`.
    Recv(Participant, Arc<RecvNode>),
    /// A point where no tree could be built (an ill-typed input to
    /// normalization or interpretation). Never produced from well-typed
    /// inputs; every check treats it as a failure.
    Fault(Arc<str>),
}

impl Tree {
    /// `send p m; t` with `t` computed on demand.
    pub fn send(p: Participant, m: Message, t: impl FnOnce() -> Tree + Send + 'static) -> Tree {
        Tree::Send(p, m, Lazy::new(t))
    }

    /// A receive node over whole payload types.
    pub fn recv(p: Participant, arms: impl IntoIterator<Item = (Label, GroundType, ArmFn)>) -> Tree {
        Tree::Recv(p, Arc::new(RecvNode::new(arms.into_iter().map(|(l, b, f)| (l, (b, f))).collect())))
    }

    /// A fault leaf.
    pub fn fault(msg: impl Into<String>) -> Tree {
        Tree::Fault(Arc::from(msg.into()))
    }

    /// `Result(t)`.
    pub fn result(&self) -> Option<&Value> {
        match self {
            Tree::Ret(v) => Some(v),
            _ => None,
        }
    }

    /// Renders the tree to `probes.depth` visible steps, trying `probes`
    /// payloads at receives.
    pub fn render(&self, probes: &ProbeConfig) -> String {
        let mut s = String::new();
        render(self, probes, probes.depth, &mut s);
        s
    }
}

fn render(t: &Tree, probes: &ProbeConfig, depth: usize, out: &mut String) {
    if depth == 0 && !matches!(t, Tree::Ret(_)) {
        out.push('…');
        return;
    }
    match t {
        Tree::Ret(v) => out.push_str(&format!("ret {v}")),
        Tree::Fault(m) => out.push_str(&format!("fault({m})")),
        Tree::Send(p, m, k) => {
            out.push_str(&format!("send {p} {m}; "));
            render(k.force(), probes, depth - 1, out);
        }
        Tree::Recv(p, node) => {
            out.push_str(&format!("recv {p} ["));
            let mut first = true;
            for (l, b) in node.signature() {
                for v in probes.payloads(b) {
                    if let Some(sub) = node.arm(&l, &v) {
                        if !first {
                            out.push_str(", ");
                        }
                        first = false;
                        out.push_str(&format!("{l}({v}) -> "));
                        render(&sub, probes, depth - 1, out);
                    }
                }
            }
            out.push(']');
        }
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&ProbeConfig::with_depth(4)))
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&ProbeConfig::default()))
    }
}

/// The reducts of `t` by a visible action, with derivation height at most
/// `fuel`. There is at most one (the `RecvRecv` set is chosen maximal).
pub fn tree_step(t: &Tree, a: &LocalAction, fuel: usize) -> Vec<Tree> {
    step(t, a, fuel).into_iter().collect()
}

fn step(t: &Tree, a: &LocalAction, fuel: usize) -> Option<Tree> {
    match (t, a) {
        (_, LocalAction::Tau) | (Tree::Ret(_), _) | (Tree::Fault(_), _) => None,
        (Tree::Send(q, m2, k), LocalAction::SendTo(p, m)) => {
            if q == p {
                (m2 == m).then(|| k.force().clone())
            } else if fuel == 0 {
                None
            } else {
                let u = step(k.force(), a, fuel - 1)?;
                Some(Tree::Send(q.clone(), m2.clone(), Lazy::ready(u)))
            }
        }
        (Tree::Recv(..), LocalAction::SendTo(..)) => None,
        (Tree::Send(q, m2, k), LocalAction::RecvFrom(..)) => {
            if fuel == 0 {
                return None;
            }
            let u = step(k.force(), a, fuel - 1)?;
            Some(Tree::Send(q.clone(), m2.clone(), Lazy::ready(u)))
        }
        (Tree::Recv(q, node), LocalAction::RecvFrom(p, m)) => {
            if q == p {
                return node.arm(&m.label, &m.payload);
            }
            if fuel == 0 {
                return None;
            }
            // RecvRecv with the largest retained set: a message stays in M'
            // exactly when its subtree can itself receive `m` from `p`.
            let node = node.clone();
            let a = a.clone();
            let arms = node
                .signature()
                .into_iter()
                .map(|(l, b)| {
                    let node = node.clone();
                    let a = a.clone();
                    let l2 = l.clone();
                    let f: ArmFn = Arc::new(move |v: &Value| step(&node.arm(&l2, v)?, &a, fuel - 1));
                    (l, b, f)
                })
                .collect::<Vec<_>>();
            Some(Tree::recv(q.clone(), arms))
        }
    }
}

/// The send to `p` a tree can perform, found along its spine of sends to
/// other participants (at most `fuel` deep).
pub fn tree_send_to(t: &Tree, p: &Participant, fuel: usize) -> Option<Message> {
    match t {
        Tree::Send(q, m, _) if q == p => Some(m.clone()),
        Tree::Send(_, _, k) if fuel > 0 => tree_send_to(k.force(), p, fuel - 1),
        _ => None,
    }
}

/// The continuation function of a bind.
pub type BindFn = Arc<dyn Fn(&Value) -> Tree + Send + Sync>;

/// `t >>= f`, lazily.
pub fn tree_bind(t: &Tree, f: BindFn) -> Tree {
    match t {
        Tree::Ret(v) => f(v),
        Tree::Fault(m) => Tree::Fault(m.clone()),
        Tree::Send(p, m, k) => {
            let k = k.clone();
            Tree::send(p.clone(), m.clone(), move || tree_bind(k.force(), f))
        }
        Tree::Recv(p, node) => {
            let arms = node
                .signature()
                .into_iter()
                .map(|(l, b)| {
                    let node = node.clone();
                    let f = f.clone();
                    let l2 = l.clone();
                    let g: ArmFn = Arc::new(move |v: &Value| node.arm(&l2, v).map(|s| tree_bind(&s, f.clone())));
                    (l, b, g)
                })
                .collect::<Vec<_>>();
            Tree::recv(p.clone(), arms)
        }
    }
}

/// The normal form of `t` at the closed type `ty`: the unique tree of the
/// shape dictated by `ty` that is typed-bisimilar to `t`. Sends are located
/// along the send spine within `fuel`; receives are computed per payload on
/// demand. Ill-typed inputs produce [`Tree::Fault`] leaves.
pub fn normalize(ty: &SessionType, t: &Tree, fuel: usize) -> Tree {
    if let Tree::Fault(_) = t {
        return t.clone();
    }
    match unfold(ty) {
        SessionType::End => match t {
            Tree::Ret(v) => Tree::Ret(v.clone()),
            _ => Tree::fault(format!("expected a result at {ty}")),
        },
        SessionType::Internal(p, bs) => {
            let Some(m) = tree_send_to(t, &p, fuel) else {
                return Tree::fault(format!("no send to {p} within fuel {fuel} at {ty}"));
            };
            let Some(br) = bs.get(&m.label).filter(|br| Some(br.payload) == m.payload.ground()) else {
                return Tree::fault(format!("send of {m} to {p} not permitted by {ty}"));
            };
            // The residual is computed on demand: stepping past the send
            // forces its continuation, which for a send loop is another
            // normalization of the same shape.
            let cont = br.cont.clone();
            let (t, a) = (t.clone(), LocalAction::SendTo(p.clone(), m.clone()));
            Tree::send(p.clone(), m.clone(), move || match step(&t, &a, fuel) {
                Some(u) => normalize(&cont, &u, fuel),
                None => Tree::fault(format!("send of {m} to {p} not reachable within fuel {fuel}")),
            })
        }
        SessionType::External(p, bs) => {
            let arms = bs
                .iter()
                .map(|(l, br)| {
                    let t = t.clone();
                    let p = p.clone();
                    let l2 = l.clone();
                    let cont = br.cont.clone();
                    let f: ArmFn = Arc::new(move |v: &Value| {
                        let a = LocalAction::RecvFrom(p.clone(), Message::new(l2.clone(), v.clone()));
                        Some(match step(&t, &a, fuel) {
                            Some(u) => normalize(&cont, &u, fuel),
                            None => Tree::fault(format!("cannot receive {l2}({v}) from {p} within fuel {fuel}")),
                        })
                    });
                    (l.clone(), br.payload, f)
                })
                .collect::<Vec<_>>();
            Tree::recv(p, arms)
        }
        SessionType::Var(x) => Tree::fault(format!("open type variable {x}")),
        SessionType::Rec(..) => unreachable!("unfold removes binders"),
    }
}

/// Checks the tree-typing clauses of `t : ty` to `probes.depth` visible
/// steps, using `fuel` as the height bound for reductions.
pub fn tree_typed_bounded(t: &Tree, ty: &SessionType, probes: &ProbeConfig, fuel: usize) -> bool {
    if !ty.is_closed() {
        return false;
    }
    typed(t, ty, probes, probes.depth, fuel)
}

fn typed(t: &Tree, ty: &SessionType, probes: &ProbeConfig, depth: usize, fuel: usize) -> bool {
    if depth == 0 {
        return true;
    }
    match t {
        Tree::Fault(_) => return false,
        // (1) a send must be permitted; continue at the canonical reduct,
        // which is the largest one.
        Tree::Send(p, m, k) => {
            let Some(next) = reduct_type(Direction::Send, ty, p, &m.label, m.ground(), fuel) else {
                return false;
            };
            if !typed(k.force(), &next, probes, depth - 1, fuel) {
                return false;
            }
        }
        // (2) a receive must be one the type may wait on.
        Tree::Recv(p, _) => {
            if !recvs(p, ty) {
                return false;
            }
        }
        Tree::Ret(_) => {}
    }
    match unfold(ty) {
        // Clauses (1) and (2) already rule out sends and receives at `end`.
        SessionType::End => true,
        // (3) a required send must be available.
        SessionType::Internal(p, _) => {
            tree_send_to(t, &p, fuel).is_some_and(|m| step(t, &LocalAction::SendTo(p.clone(), m), fuel).is_some())
        }
        // (4) every required receive must be available, within the height bound.
        SessionType::External(p, bs) => bs.iter().all(|(l, br)| {
            probes.payloads(br.payload).into_iter().all(|v| {
                let a = LocalAction::RecvFrom(p.clone(), Message::new(l.clone(), v));
                match step(t, &a, fuel) {
                    Some(u) => typed(&u, &br.cont, probes, depth - 1, fuel),
                    None => false,
                }
            })
        }),
        _ => false,
    }
}

/// Structural equality to `probes.depth` visible steps.
pub fn tree_equal(t: &Tree, u: &Tree, probes: &ProbeConfig) -> bool {
    equal(t, u, probes, probes.depth)
}

fn equal(t: &Tree, u: &Tree, probes: &ProbeConfig, depth: usize) -> bool {
    match (t, u) {
        (Tree::Ret(a), Tree::Ret(b)) => a == b,
        _ if depth == 0 => !matches!(t, Tree::Fault(_)) && !matches!(u, Tree::Fault(_)) && same_root(t, u),
        (Tree::Send(p, m, k), Tree::Send(q, n, j)) => p == q && m == n && equal(k.force(), j.force(), probes, depth - 1),
        (Tree::Recv(p, a), Tree::Recv(q, b)) => {
            if p != q || a.signature() != b.signature() {
                return false;
            }
            a.signature().into_iter().all(|(l, g)| {
                probes.payloads(g).into_iter().all(|v| match (a.arm(&l, &v), b.arm(&l, &v)) {
                    (None, None) => true,
                    (Some(x), Some(y)) => equal(&x, &y, probes, depth - 1),
                    _ => false,
                })
            })
        }
        _ => false,
    }
}

fn same_root(t: &Tree, u: &Tree) -> bool {
    matches!((t, u), (Tree::Send(..), Tree::Send(..)) | (Tree::Recv(..), Tree::Recv(..)))
}

/// A state of one side of a bisimulation check.
#[derive(Clone, Debug)]
pub enum BisimSide {
    /// A configuration, observed up to τ steps.
    Config(Configuration),
    /// A computation tree.
    Tree(Tree),
}

/// Maximum τ steps followed when stabilising a configuration.
const TAU_LIMIT: usize = 4096;

impl BisimSide {
    /// Follows τ steps to a stable configuration. Configuration τ steps are
    /// deterministic and commute with every visible step, so a state and its
    /// τ successors are interchangeable for weak observation; they are
    /// therefore only taken on demand (a sending loop never stabilizes).
    fn stabilize(c: &Configuration) -> Configuration {
        let mut c = c.clone();
        for _ in 0..TAU_LIMIT {
            match tau_steps(&c).into_iter().next() {
                Some(s) => c = s.next,
                None => break,
            }
        }
        c
    }

    fn result(&self) -> Option<Value> {
        match self {
            BisimSide::Config(c) => {
                let c = BisimSide::stabilize(c);
                if c.rho.is_empty() && c.sigma.is_empty() {
                    result(&c).or_else(|| returned_value(&c.comp).cloned())
                } else {
                    None
                }
            }
            BisimSide::Tree(t) => t.result().cloned(),
        }
    }

    fn is_fault(&self) -> bool {
        matches!(self, BisimSide::Tree(Tree::Fault(_)))
    }

    /// The (at most one) message this state sends to `p` next.
    fn send_to(&self, p: &Participant, fuel: usize) -> Option<(Message, BisimSide)> {
        match self {
            BisimSide::Config(c) => {
                // Run τ steps until a message for `p` is at the back of its
                // queue; earlier τ steps only produce other messages.
                let mut c = c.clone();
                for _ in 0..TAU_LIMIT {
                    if let Some(m) = c.sigma.pop_back(p) {
                        return Some((m, BisimSide::Config(c)));
                    }
                    c = tau_steps(&c).into_iter().next()?.next;
                }
                None
            }
            BisimSide::Tree(t) => {
                let m = tree_send_to(t, p, fuel)?;
                let u = step(t, &LocalAction::SendTo(p.clone(), m.clone()), fuel)?;
                Some((m, BisimSide::Tree(u)))
            }
        }
    }

    fn recv(&self, p: &Participant, m: &Message, fuel: usize) -> Option<BisimSide> {
        match self {
            BisimSide::Config(c) => {
                let mut rho = c.rho.clone();
                rho.push_front(p.clone(), m.clone());
                Some(BisimSide::Config(Configuration { rho, comp: c.comp.clone(), sigma: c.sigma.clone() }))
            }
            BisimSide::Tree(t) => step(t, &LocalAction::RecvFrom(p.clone(), m.clone()), fuel).map(BisimSide::Tree),
        }
    }

    fn key(&self) -> Option<String> {
        match self {
            BisimSide::Config(c) => Some(c.to_string()),
            BisimSide::Tree(_) => None,
        }
    }
}

/// Checks typed bisimilarity of two states at `ty` to `probes.depth`
/// visible steps. Configurations are observed up to τ steps; sends are
/// compared only towards participants `ty` obliges to be sent to; receives
/// only for messages `ty` requires to be accepted (continuing at the
/// canonical receive reduct); results only where `ty` has ended. A pair of
/// configurations revisited at the same type counts as related.
pub fn bisim_bounded(s1: BisimSide, s2: BisimSide, ty: &SessionType, probes: &ProbeConfig, fuel: usize) -> bool {
    let mut st = BisimState { probes, fuel, visited: HashSet::new(), reducts: HashMap::new() };
    st.bisim(s1, s2, ty, probes.depth)
}

type ReductKey = (Canon, Direction, Participant, Label, GroundType);

struct BisimState<'a> {
    probes: &'a ProbeConfig,
    fuel: usize,
    visited: HashSet<(String, String, Canon)>,
    /// Reducts of the types met so far; the same type recurs often, and
    /// reduct searches dominate the cost on deeply unrolled types.
    reducts: HashMap<ReductKey, Option<SessionType>>,
}

impl BisimState<'_> {
    fn reduct(&mut self, canon: &Canon, dir: Direction, ty: &SessionType, p: &Participant, l: &Label, g: GroundType) -> Option<SessionType> {
        let key = (canon.clone(), dir, p.clone(), l.clone(), g);
        if let Some(hit) = self.reducts.get(&key) {
            return hit.clone();
        }
        let r = reduct_type(dir, ty, p, l, g, self.fuel);
        self.reducts.insert(key, r.clone());
        r
    }

    fn bisim(&mut self, a: BisimSide, b: BisimSide, ty: &SessionType, depth: usize) -> bool {
        if a.is_fault() || b.is_fault() {
            return false;
        }
        let u = unfold(ty);
        // (2) results, once the type has ended. Like a `Ret` leaf in tree
        // equality, a result is observed without spending depth.
        if matches!(u, SessionType::End) && a.result() != b.result() {
            return false;
        }
        if depth == 0 {
            return true;
        }
        let canon = ty.canonical();
        if let (Some(ka), Some(kb)) = (a.key(), b.key()) {
            if !self.visited.insert((ka, kb, canon.clone())) {
                return true;
            }
        }
        let fuel = self.fuel;
        // (3) sends to participants the type obliges us to send to.
        for p in ty.participants() {
            if !crate::relations::sends(&p, ty) {
                continue;
            }
            match (a.send_to(&p, fuel), b.send_to(&p, fuel)) {
                (None, None) => {}
                (Some((m, a2)), Some((n, b2))) => {
                    if m != n {
                        return false;
                    }
                    let Some(next) = self.reduct(&canon, Direction::Send, ty, &p, &m.label, m.ground()) else {
                        return false;
                    };
                    if !self.bisim(a2, b2, &next, depth - 1) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        // (4) receives the type requires to be accepted.
        for (p, l, g) in external_triples(ty) {
            let Some(next) = self.reduct(&canon, Direction::Recv, ty, &p, &l, g) else {
                continue;
            };
            for v in self.probes.payloads(g) {
                let m = Message::new(l.clone(), v);
                match (a.recv(&p, &m, fuel), b.recv(&p, &m, fuel)) {
                    (None, None) => {}
                    (Some(a2), Some(b2)) => {
                        if !self.bisim(a2, b2, &next, depth - 1) {
                            return false;
                        }
                    }
                    _ => return false,
                }
            }
        }
        true
    }
}

/// Every `(participant, label, payload type)` of an external choice in `t`.
fn external_triples(t: &SessionType) -> BTreeSet<(Participant, Label, GroundType)> {
    fn go(t: &SessionType, out: &mut BTreeSet<(Participant, Label, GroundType)>) {
        match t {
            SessionType::End | SessionType::Var(_) => {}
            SessionType::Rec(_, b) => go(b, out),
            SessionType::Internal(_, bs) => bs.values().for_each(|br| go(&br.cont, out)),
            SessionType::External(p, bs) => {
                for (l, br) in bs {
                    out.insert((p.clone(), l.clone(), br.payload));
                    go(&br.cont, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(t, &mut out);
    out
}
