//! Terms of the message-passing language: values, computations,
//! messages, queues, and configurations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::session::{substitute_one, GroundType, Label, Participant, SessionType};

/// A value: a variable or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    /// A variable.
    Var(String),
    /// The unit constant `()`.
    Unit,
    /// A 64-bit signed integer.
    Int(i64),
    /// A boolean.
    Bool(bool),
}

impl Value {
    /// The ground type of a constant; `None` for variables.
    pub fn ground(&self) -> Option<GroundType> {
        match self {
            Value::Var(_) => None,
            Value::Unit => Some(GroundType::Unit),
            Value::Int(_) => Some(GroundType::Int),
            Value::Bool(_) => Some(GroundType::Bool),
        }
    }

    /// Whether the value is a constant.
    pub fn is_constant(&self) -> bool {
        !matches!(self, Value::Var(_))
    }

    /// JSON scalar for the constant (`null` for unit).
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Var(x) => serde_json::Value::String(x.clone()),
            Value::Unit => serde_json::Value::Null,
            Value::Int(n) => serde_json::Value::from(*n),
            Value::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    fn subst(&self, x: &str, v: &Value) -> Value {
        match self {
            Value::Var(y) if y == x => v.clone(),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Var(x) => write!(f, "{x}"),
            Value::Unit => write!(f, "()"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// One arm `ℓ(x : b) -> body` of a receive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    /// Variable bound to the payload.
    pub binder: String,
    /// Expected payload type.
    pub ground: GroundType,
    /// Continuation.
    pub body: Computation,
}

/// A recursive function definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunDef {
    /// Function name.
    pub name: String,
    /// Parameters with their declared types.
    pub params: Vec<(String, GroundType)>,
    /// Declared result type.
    pub result: GroundType,
    /// Optional grade annotation `grade X. T`: the body has grade `T` when
    /// recursive calls have grade `X`.
    pub grade: Option<(String, SessionType)>,
    /// Function body.
    pub body: Computation,
}

/// A computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Computation {
    /// `return v`.
    Return(Value),
    /// `let x = t in u`.
    Let(String, Box<Computation>, Box<Computation>),
    /// `v + w`.
    Add(Value, Value),
    /// `v - w`.
    Sub(Value, Value),
    /// `v < w`.
    Less(Value, Value),
    /// `if v then t else u`.
    If(Value, Box<Computation>, Box<Computation>),
    /// `send ℓ(v) to p; t`.
    Send {
        /// Message label.
        label: Label,
        /// Payload.
        value: Value,
        /// Receiver.
        to: Participant,
        /// Continuation.
        cont: Box<Computation>,
    },
    /// `recv from p { ℓ(x : b) -> t, … }`.
    Recv {
        /// Sender.
        from: Participant,
        /// Nonempty label-keyed arms.
        arms: IndexMap<Label, Arm>,
    },
    /// `letrec f(x : b, …) : b' [grade X. T] = t in u`.
    LetRec(Arc<FunDef>, Box<Computation>),
    /// `f(v, …)`.
    Apply(String, Vec<Value>),
    /// `(t : T)`: `t` used at the supertype `T` of its grade.
    Ascribe(Box<Computation>, SessionType),
}

impl Computation {
    /// `return v`.
    pub fn ret(v: Value) -> Self {
        Computation::Return(v)
    }

    /// `send label(value) to to; cont`.
    pub fn send(label: impl Into<Label>, value: Value, to: impl Into<Participant>, cont: Computation) -> Self {
        Computation::Send { label: label.into(), value, to: to.into(), cont: Box::new(cont) }
    }

    /// `let x = t in u`.
    pub fn let_(x: impl Into<String>, t: Computation, u: Computation) -> Self {
        Computation::Let(x.into(), Box::new(t), Box::new(u))
    }

    /// `if v then t else u`.
    pub fn if_(v: Value, t: Computation, u: Computation) -> Self {
        Computation::If(v, Box::new(t), Box::new(u))
    }

    /// Substitutes the constant `v` for the free variable `x`.
    pub fn subst(&self, x: &str, v: &Value) -> Computation {
        use Computation::*;
        match self {
            Return(w) => Return(w.subst(x, v)),
            Let(y, t, u) => {
                let t = t.subst(x, v);
                let u = if y == x { (**u).clone() } else { u.subst(x, v) };
                Let(y.clone(), Box::new(t), Box::new(u))
            }
            Add(a, b) => Add(a.subst(x, v), b.subst(x, v)),
            Sub(a, b) => Sub(a.subst(x, v), b.subst(x, v)),
            Less(a, b) => Less(a.subst(x, v), b.subst(x, v)),
            If(c, t, u) => If(c.subst(x, v), Box::new(t.subst(x, v)), Box::new(u.subst(x, v))),
            Send { label, value, to, cont } => Send {
                label: label.clone(),
                value: value.subst(x, v),
                to: to.clone(),
                cont: Box::new(cont.subst(x, v)),
            },
            Recv { from, arms } => Recv {
                from: from.clone(),
                arms: arms
                    .iter()
                    .map(|(l, a)| {
                        let body = if a.binder == x { a.body.clone() } else { a.body.subst(x, v) };
                        (l.clone(), Arm { binder: a.binder.clone(), ground: a.ground, body })
                    })
                    .collect(),
            },
            LetRec(def, cont) => {
                let body = if def.params.iter().any(|(p, _)| p == x) { def.body.clone() } else { def.body.subst(x, v) };
                let def = Arc::new(FunDef { body, ..(**def).clone() });
                LetRec(def, Box::new(cont.subst(x, v)))
            }
            Apply(f, args) => Apply(f.clone(), args.iter().map(|a| a.subst(x, v)).collect()),
            Ascribe(t, ty) => Ascribe(Box::new(t.subst(x, v)), ty.clone()),
        }
    }

    /// Substitutes the session type `v` for the recursion variable `x` in
    /// the type annotations (ascriptions and grades) of `self`. The free
    /// variables of `v` must not be bound by grades inside `self`.
    ///
    /// Unfolding a recursive call moves the function body out of the scope
    /// of its recursion variable; instantiating the variable with the
    /// function's recursive grade keeps the annotations closed.
    pub fn subst_type_var(&self, x: &str, v: &SessionType) -> Computation {
        use Computation::*;
        let go = |t: &Computation| Box::new(t.subst_type_var(x, v));
        match self {
            Return(_) | Add(..) | Sub(..) | Less(..) | Apply(..) => self.clone(),
            Let(y, t, u) => Let(y.clone(), go(t), go(u)),
            If(c, t, u) => If(c.clone(), go(t), go(u)),
            Send { label, value, to, cont } => Send { label: label.clone(), value: value.clone(), to: to.clone(), cont: go(cont) },
            Recv { from, arms } => Recv {
                from: from.clone(),
                arms: arms
                    .iter()
                    .map(|(l, a)| (l.clone(), Arm { binder: a.binder.clone(), ground: a.ground, body: a.body.subst_type_var(x, v) }))
                    .collect(),
            },
            LetRec(def, cont) => {
                let def = match &def.grade {
                    // The inner binder shadows `x` in its grade and body.
                    Some((y, _)) if y == x => def.clone(),
                    grade => Arc::new(FunDef {
                        grade: grade.as_ref().map(|(y, g)| (y.clone(), substitute_one(g, x, v))),
                        body: def.body.subst_type_var(x, v),
                        ..(**def).clone()
                    }),
                };
                LetRec(def, go(cont))
            }
            Ascribe(t, ty) => Ascribe(go(t), substitute_one(ty, x, v)),
        }
    }

    /// Substitutes several constants simultaneously (they are closed, so
    /// sequential substitution is equivalent).
    pub fn subst_all(&self, bindings: &[(String, Value)]) -> Computation {
        let mut out = self.clone();
        for (x, v) in bindings {
            out = out.subst(x, v);
        }
        out
    }

    /// Free variables (not function names).
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        use Computation::*;
        let val = |v: &Value, bound: &Vec<String>, out: &mut BTreeSet<String>| {
            if let Value::Var(x) = v {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
        };
        match self {
            Return(v) => val(v, bound, out),
            Let(x, t, u) => {
                t.collect_free_vars(bound, out);
                bound.push(x.clone());
                u.collect_free_vars(bound, out);
                bound.pop();
            }
            Add(a, b) | Sub(a, b) | Less(a, b) => {
                val(a, bound, out);
                val(b, bound, out);
            }
            If(c, t, u) => {
                val(c, bound, out);
                t.collect_free_vars(bound, out);
                u.collect_free_vars(bound, out);
            }
            Send { value, cont, .. } => {
                val(value, bound, out);
                cont.collect_free_vars(bound, out);
            }
            Recv { arms, .. } => {
                for a in arms.values() {
                    bound.push(a.binder.clone());
                    a.body.collect_free_vars(bound, out);
                    bound.pop();
                }
            }
            LetRec(def, cont) => {
                let n = bound.len();
                bound.extend(def.params.iter().map(|(p, _)| p.clone()));
                def.body.collect_free_vars(bound, out);
                bound.truncate(n);
                cont.collect_free_vars(bound, out);
            }
            Apply(_, args) => {
                for a in args {
                    val(a, bound, out);
                }
            }
            Ascribe(t, _) => t.collect_free_vars(bound, out),
        }
    }

    /// Free function names.
    pub fn free_funs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free_funs(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_funs(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        use Computation::*;
        match self {
            Return(_) | Add(..) | Sub(..) | Less(..) => {}
            Let(_, t, u) | If(_, t, u) => {
                t.collect_free_funs(bound, out);
                u.collect_free_funs(bound, out);
            }
            Send { cont, .. } => cont.collect_free_funs(bound, out),
            Recv { arms, .. } => arms.values().for_each(|a| a.body.collect_free_funs(bound, out)),
            LetRec(def, cont) => {
                bound.push(def.name.clone());
                def.body.collect_free_funs(bound, out);
                cont.collect_free_funs(bound, out);
                bound.pop();
            }
            Apply(f, _) => {
                if !bound.contains(f) {
                    out.insert(f.clone());
                }
            }
            Ascribe(t, _) => t.collect_free_funs(bound, out),
        }
    }

    /// Whether the computation has no free variables or function names.
    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty() && self.free_funs().is_empty()
    }

    /// Number of constructors, for size bounds in generators.
    pub fn size(&self) -> usize {
        use Computation::*;
        match self {
            Return(_) | Add(..) | Sub(..) | Less(..) | Apply(..) => 1,
            Let(_, t, u) | If(_, t, u) => 1 + t.size() + u.size(),
            Send { cont, .. } => 1 + cont.size(),
            Recv { arms, .. } => 1 + arms.values().map(|a| a.body.size()).sum::<usize>(),
            LetRec(def, cont) => 1 + def.body.size() + cont.size(),
            Ascribe(t, _) => 1 + t.size(),
        }
    }
}

/// A violation of the guarded-recursion requirement.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("recursive call to {function} is not under a send or receive: {call}")]
pub struct GuardError {
    /// The function called unguardedly.
    pub function: String,
    /// The offending call, printed.
    pub call: String,
}

/// Checks that every recursive call occurs under a send or receive within
/// the body of its own definition.
pub fn guarded_recursion_check(t: &Computation) -> Result<(), GuardError> {
    // `pending` holds the functions whose body we are in and which have
    // not yet been guarded on the current path.
    fn go(t: &Computation, pending: &mut Vec<String>) -> Result<(), GuardError> {
        use Computation::*;
        match t {
            Return(_) | Add(..) | Sub(..) | Less(..) => Ok(()),
            Apply(f, _) => {
                if pending.contains(f) {
                    Err(GuardError { function: f.clone(), call: t.to_string() })
                } else {
                    Ok(())
                }
            }
            Let(_, a, b) | If(_, a, b) => {
                go(a, pending)?;
                go(b, pending)
            }
            Ascribe(a, _) => go(a, pending),
            Send { cont, .. } => go(cont, &mut Vec::new()),
            Recv { arms, .. } => {
                for a in arms.values() {
                    go(&a.body, &mut Vec::new())?;
                }
                Ok(())
            }
            LetRec(def, cont) => {
                // An inner definition of the same name shadows the outer one.
                let mut inner: Vec<String> = pending.iter().filter(|g| **g != def.name).cloned().collect();
                inner.push(def.name.clone());
                go(&def.body, &mut inner)?;
                let mut outer: Vec<String> = pending.iter().filter(|g| **g != def.name).cloned().collect();
                go(cont, &mut outer)
            }
        }
    }
    go(t, &mut Vec::new())
}

/// A message `ℓ(v)` with a constant payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    /// Label.
    pub label: Label,
    /// Constant payload.
    pub payload: Value,
}

impl Message {
    /// Builds a message; the payload must be a constant.
    pub fn new(label: impl Into<Label>, payload: Value) -> Self {
        debug_assert!(payload.is_constant(), "message payloads are constants");
        Message { label: label.into(), payload }
    }

    /// The payload's ground type.
    pub fn ground(&self) -> GroundType {
        self.payload.ground().expect("message payloads are constants")
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.label, self.payload)
    }
}

/// A queue: for each participant, an ordered list of messages. Index 0 is
/// the front. Participants with empty lists are not stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Queue(BTreeMap<Participant, VecDeque<Message>>);

impl Queue {
    /// The empty queue.
    pub fn new() -> Self {
        Queue::default()
    }

    /// Whether every list is empty.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of messages.
    pub fn len(&self) -> usize {
        self.0.values().map(|v| v.len()).sum()
    }

    /// `p : m :: σ`: adds `m` to the front of `p`'s list.
    pub fn push_front(&mut self, p: Participant, m: Message) {
        self.0.entry(p).or_default().push_front(m);
    }

    /// `σ :: p : m`: adds `m` to the back of `p`'s list.
    pub fn push_back(&mut self, p: Participant, m: Message) {
        self.0.entry(p).or_default().push_back(m);
    }

    /// Removes and returns the back message of `p`'s list.
    pub fn pop_back(&mut self, p: &Participant) -> Option<Message> {
        let list = self.0.get_mut(p)?;
        let m = list.pop_back();
        if list.is_empty() {
            self.0.remove(p);
        }
        m
    }

    /// Removes and returns the front message of `p`'s list.
    pub fn pop_front(&mut self, p: &Participant) -> Option<Message> {
        let list = self.0.get_mut(p)?;
        let m = list.pop_front();
        if list.is_empty() {
            self.0.remove(p);
        }
        m
    }

    /// The back message of `p`'s list.
    pub fn back(&self, p: &Participant) -> Option<&Message> {
        self.0.get(p).and_then(|l| l.back())
    }

    /// The front message of `p`'s list.
    pub fn front(&self, p: &Participant) -> Option<&Message> {
        self.0.get(p).and_then(|l| l.front())
    }

    /// The list for `p`, front first.
    pub fn list(&self, p: &Participant) -> Vec<Message> {
        self.0.get(p).map(|l| l.iter().cloned().collect()).unwrap_or_default()
    }

    /// Participants with a nonempty list.
    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.0.keys()
    }

    /// Builds a queue from `(participant, message)` pairs listed front to back.
    pub fn from_front<I: IntoIterator<Item = (Participant, Message)>>(items: I) -> Self {
        let mut q = Queue::new();
        for (p, m) in items {
            q.push_back(p, m);
        }
        q
    }
}

impl fmt::Display for Queue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let mut first = true;
        for (p, list) in &self.0 {
            for m in list {
                if !first {
                    write!(f, " :: ")?;
                }
                first = false;
                write!(f, "({p}, {m})")?;
            }
        }
        Ok(())
    }
}

/// A configuration `⟨ρ, t, σ⟩`: receive queue, computation, send queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    /// Messages received but not yet consumed.
    pub rho: Queue,
    /// The running computation.
    pub comp: Computation,
    /// Messages produced but not yet delivered.
    pub sigma: Queue,
}

impl Configuration {
    /// `⟨∅, t, ∅⟩`.
    pub fn new(comp: Computation) -> Self {
        Configuration { rho: Queue::new(), comp, sigma: Queue::new() }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, {}, {}⟩", self.rho, self.comp, self.sigma)
    }
}

/// The result of a completed configuration: defined when both queues are
/// empty and the computation is `return v` under recursive definitions only.
pub fn result(c: &Configuration) -> Option<Value> {
    if !c.rho.is_empty() || !c.sigma.is_empty() {
        return None;
    }
    let mut t = &c.comp;
    loop {
        match t {
            Computation::Return(v) => return Some(v.clone()),
            Computation::LetRec(_, cont) => t = cont,
            _ => return None,
        }
    }
}
