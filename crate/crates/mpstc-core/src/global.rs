//! Global types, full merging, and projection onto participants.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::session::{fresh_name, substitute_one, Branch, Branches, GroundType, Label, Participant, SessionType};

/// One branch of a communication: payload type and continuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GBranch {
    /// Payload ground type.
    pub payload: GroundType,
    /// Continuation protocol.
    pub cont: GlobalType,
}

/// A global protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlobalType {
    /// No further communication.
    End,
    /// `from` sends one of the labelled messages to `to`.
    Comm {
        /// Sender.
        from: Participant,
        /// Receiver.
        to: Participant,
        /// Nonempty label-keyed branches.
        branches: IndexMap<Label, GBranch>,
    },
    /// Recursion variable.
    Var(String),
    /// Recursive protocol.
    Rec(String, Box<GlobalType>),
}

impl GlobalType {
    /// Builds a communication from `(label, payload, continuation)` triples.
    pub fn comm<L: Into<Label>>(
        from: impl Into<Participant>,
        to: impl Into<Participant>,
        branches: impl IntoIterator<Item = (L, GroundType, GlobalType)>,
    ) -> Self {
        GlobalType::Comm {
            from: from.into(),
            to: to.into(),
            branches: branches.into_iter().map(|(l, b, g)| (l.into(), GBranch { payload: b, cont: g })).collect(),
        }
    }

    /// Builds `rec x. body`.
    pub fn rec(x: impl Into<String>, body: GlobalType) -> Self {
        GlobalType::Rec(x.into(), Box::new(body))
    }

    /// Builds a variable.
    pub fn var(x: impl Into<String>) -> Self {
        GlobalType::Var(x.into())
    }

    /// Free recursion variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            GlobalType::End => {}
            GlobalType::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            GlobalType::Rec(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            GlobalType::Comm { branches, .. } => {
                for b in branches.values() {
                    b.cont.collect_free(bound, out);
                }
            }
        }
    }

    /// Whether the type has no free variables.
    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// All participants occurring as sender or receiver.
    pub fn participants(&self) -> BTreeSet<Participant> {
        let mut out = BTreeSet::new();
        self.collect_participants(&mut out);
        out
    }

    fn collect_participants(&self, out: &mut BTreeSet<Participant>) {
        match self {
            GlobalType::End | GlobalType::Var(_) => {}
            GlobalType::Rec(_, body) => body.collect_participants(out),
            GlobalType::Comm { from, to, branches } => {
                out.insert(from.clone());
                out.insert(to.clone());
                for b in branches.values() {
                    b.cont.collect_participants(out);
                }
            }
        }
    }

    /// Capture-avoiding substitution of `v` for the free variable `x`.
    pub fn substitute(&self, x: &str, v: &GlobalType) -> GlobalType {
        match self {
            GlobalType::End => GlobalType::End,
            GlobalType::Var(y) => {
                if y == x {
                    v.clone()
                } else {
                    self.clone()
                }
            }
            GlobalType::Comm { from, to, branches } => GlobalType::Comm {
                from: from.clone(),
                to: to.clone(),
                branches: branches
                    .iter()
                    .map(|(l, b)| (l.clone(), GBranch { payload: b.payload, cont: b.cont.substitute(x, v) }))
                    .collect(),
            },
            GlobalType::Rec(y, body) => {
                if y == x {
                    return self.clone();
                }
                let fv = v.free_vars();
                if fv.contains(y) {
                    let mut avoid = fv;
                    avoid.extend(body.free_vars());
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(y, &avoid);
                    let renamed = body.substitute(y, &GlobalType::Var(fresh.clone()));
                    GlobalType::Rec(fresh, Box::new(renamed.substitute(x, v)))
                } else {
                    GlobalType::Rec(y.clone(), Box::new(body.substitute(x, v)))
                }
            }
        }
    }

    /// Single-step unfolding.
    pub fn unfold(&self) -> GlobalType {
        match self {
            GlobalType::Rec(x, body) => body.unfold().substitute(x, self),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for GlobalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlobalType::End => write!(f, "end"),
            GlobalType::Var(x) => write!(f, "{x}"),
            GlobalType::Rec(x, body) => write!(f, "rec {x}. {body}"),
            GlobalType::Comm { from, to, branches } => {
                write!(f, "{from}->{to}{{")?;
                for (i, (l, b)) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l}({}). {}", b.payload, b.cont)?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// A violated well-formedness condition of a global type.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("ill-formed global type at `{subterm}`: {detail}")]
pub struct GlobalWfError {
    /// Offending subterm, printed.
    pub subterm: String,
    /// What is wrong with it.
    pub detail: String,
}

/// Checks that `g` is closed over `theta`, that every communication has
/// distinct endpoints and at least one branch, and that every recursion
/// variable occurs under a communication.
pub fn global_well_formed(g: &GlobalType, theta: &BTreeSet<String>) -> Result<(), GlobalWfError> {
    fn go(g: &GlobalType, bound: &mut Vec<(String, bool)>, theta: &BTreeSet<String>) -> Result<(), GlobalWfError> {
        let err = |detail: String| GlobalWfError { subterm: g.to_string(), detail };
        match g {
            GlobalType::End => Ok(()),
            GlobalType::Var(x) => match bound.iter().rev().find(|(y, _)| y == x) {
                Some((_, true)) => Ok(()),
                Some((_, false)) => Err(err(format!("variable {x} is not under a communication"))),
                None if theta.contains(x) => Ok(()),
                None => Err(err(format!("free variable {x}"))),
            },
            GlobalType::Rec(x, body) => {
                bound.push((x.clone(), false));
                let r = go(body, bound, theta);
                bound.pop();
                r
            }
            GlobalType::Comm { from, to, branches } => {
                if from == to {
                    return Err(err(format!("participant {from} communicates with itself")));
                }
                if branches.is_empty() {
                    return Err(err("communication with no branches".into()));
                }
                let saved: Vec<bool> = bound.iter().map(|(_, g)| *g).collect();
                for b in bound.iter_mut() {
                    b.1 = true;
                }
                let mut r = Ok(());
                for br in branches.values() {
                    r = go(&br.cont, bound, theta);
                    if r.is_err() {
                        break;
                    }
                }
                for (b, s) in bound.iter_mut().zip(saved) {
                    b.1 = s;
                }
                r
            }
        }
    }
    go(g, &mut Vec::new(), theta)
}

/// Why merging or projection is undefined.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{}{reason}", if path.is_empty() { String::new() } else { format!("at {}: ", path.join(".")) })]
pub struct MergeError {
    /// Labels leading to the mismatch (outermost first).
    pub path: Vec<String>,
    /// Description of the mismatch.
    pub reason: String,
}

impl MergeError {
    fn new(reason: impl Into<String>) -> Self {
        MergeError { path: Vec::new(), reason: reason.into() }
    }

    fn under(mut self, step: impl Into<String>) -> Self {
        self.path.insert(0, step.into());
        self
    }
}

/// Full merge `t ⊓ u`.
pub fn merge(t: &SessionType, u: &SessionType) -> Result<SessionType, MergeError> {
    match (t, u) {
        (SessionType::End, SessionType::End) => Ok(SessionType::End),
        (SessionType::Var(x), SessionType::Var(y)) if x == y => Ok(t.clone()),
        (SessionType::Internal(p, bs), SessionType::Internal(q, cs)) => {
            if p != q {
                return Err(MergeError::new(format!("internal choices on different participants {p} and {q}")));
            }
            let l1: BTreeSet<&Label> = bs.keys().collect();
            let l2: BTreeSet<&Label> = cs.keys().collect();
            if l1 != l2 {
                return Err(MergeError::new(format!(
                    "internal choices to {p} offer different labels {{{}}} and {{{}}}",
                    join(&l1),
                    join(&l2)
                )));
            }
            let mut out: Branches = IndexMap::new();
            for (l, b) in bs {
                let c = &cs[l];
                if b.payload != c.payload {
                    return Err(MergeError::new(format!("label {l} carries {} and {}", b.payload, c.payload)));
                }
                let m = merge(&b.cont, &c.cont).map_err(|e| e.under(l.to_string()))?;
                out.insert(l.clone(), Branch::new(b.payload, m));
            }
            Ok(SessionType::Internal(p.clone(), out))
        }
        (SessionType::External(p, bs), SessionType::External(q, cs)) => {
            if p != q {
                return Err(MergeError::new(format!("external choices on different participants {p} and {q}")));
            }
            let mut out: Branches = IndexMap::new();
            for (l, b) in bs {
                match cs.get(l) {
                    Some(c) => {
                        if b.payload != c.payload {
                            return Err(MergeError::new(format!("label {l} carries {} and {}", b.payload, c.payload)));
                        }
                        let m = merge(&b.cont, &c.cont).map_err(|e| e.under(l.to_string()))?;
                        out.insert(l.clone(), Branch::new(b.payload, m));
                    }
                    None => {
                        out.insert(l.clone(), b.clone());
                    }
                }
            }
            for (l, c) in cs {
                if !bs.contains_key(l) {
                    out.insert(l.clone(), c.clone());
                }
            }
            Ok(SessionType::External(p.clone(), out))
        }
        (SessionType::Rec(x, b1), SessionType::Rec(y, b2)) => {
            if x == y {
                return Ok(SessionType::rec(x.clone(), merge(b1, b2).map_err(|e| e.under(format!("rec {x}")))?));
            }
            // Rename the second binder to the first, avoiding capture.
            if b2.has_free(x) {
                let mut avoid = b1.free_vars();
                avoid.extend(b2.free_vars());
                avoid.insert(x.clone());
                avoid.insert(y.clone());
                let z = fresh_name(x, &avoid);
                let b1 = substitute_one(b1, x, &SessionType::var(z.clone()));
                let b2 = substitute_one(b2, y, &SessionType::var(z.clone()));
                return Ok(SessionType::rec(z.clone(), merge(&b1, &b2).map_err(|e| e.under(format!("rec {z}")))?));
            }
            let b2 = substitute_one(b2, y, &SessionType::var(x.clone()));
            Ok(SessionType::rec(x.clone(), merge(b1, &b2).map_err(|e| e.under(format!("rec {x}")))?))
        }
        _ => Err(MergeError::new(format!("cannot merge {t} with {u}"))),
    }
}

fn join(ls: &BTreeSet<&Label>) -> String {
    ls.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
}

/// Projection `g ↾ r`.
pub fn project(g: &GlobalType, r: &Participant) -> Result<SessionType, MergeError> {
    match g {
        GlobalType::End => Ok(SessionType::End),
        GlobalType::Var(x) => Ok(SessionType::var(x.clone())),
        GlobalType::Rec(x, body) => {
            let inner = project(body, r).map_err(|e| e.under(format!("rec {x}")))?;
            Ok(match inner {
                SessionType::Var(ref y) if y == x => SessionType::End,
                SessionType::Var(_) => inner,
                other => SessionType::rec(x.clone(), other),
            })
        }
        GlobalType::Comm { from, to, branches } => {
            let mut projected: Vec<(Label, GroundType, SessionType)> = Vec::new();
            for (l, b) in branches {
                let step = format!("{from}->{to}:{l}");
                let t = project(&b.cont, r).map_err(|e| e.under(step))?;
                projected.push((l.clone(), b.payload, t));
            }
            if r == from {
                Ok(SessionType::Internal(to.clone(), to_branches(projected)))
            } else if r == to {
                Ok(SessionType::External(from.clone(), to_branches(projected)))
            } else {
                let mut iter = projected.into_iter();
                let (l0, _, mut acc) = iter.next().ok_or_else(|| MergeError::new("communication with no branches"))?;
                let mut seen = vec![l0.to_string()];
                for (l, _, t) in iter {
                    acc = merge(&acc, &t).map_err(|e| {
                        MergeError {
                            path: e.path,
                            reason: format!(
                                "projections onto {r} of branches {{{}}} and {l} of {from}->{to} do not merge: {}",
                                seen.join(", "),
                                e.reason
                            ),
                        }
                    })?;
                    seen.push(l.to_string());
                }
                Ok(acc)
            }
        }
    }
}

fn to_branches(v: Vec<(Label, GroundType, SessionType)>) -> Branches {
    v.into_iter().map(|(l, b, t)| (l, Branch::new(b, t))).collect()
}
