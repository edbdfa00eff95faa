//! Local session types.
//!
//! A [`SessionType`] is the protocol followed by a single participant:
//!
//! - `end` — no further interaction;
//! - `+p{ l(b). T, ... }` — internal choice: send one of the listed messages to `p`;
//! - `&p{ l(b). T, ... }` — external choice: accept any of the listed messages from `p`;
//! - `X` — a type variable;
//! - `rec X. T` — a guarded recursive type.
//!
//! Branches are kept in a label-keyed [`IndexMap`], so equality never depends
//! on branch order, while printing preserves the order in which branches were
//! written. Equality of session types is alpha-equivalence on `rec` binders;
//! [`SessionType::canonical`] produces a de Bruijn form with sorted branches
//! suitable as a hash key.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named endpoint of a multiparty protocol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Participant(pub String);

impl Participant {
    /// Creates a participant from any string-like name.
    pub fn new(name: impl Into<String>) -> Self {
        Participant(name.into())
    }

    /// The participant's name.
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Participant {
    fn from(s: &str) -> Self {
        Participant::new(s)
    }
}

impl From<String> for Participant {
    fn from(s: String) -> Self {
        Participant(s)
    }
}

/// A message label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub String);

impl Label {
    /// Creates a label from any string-like name.
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }

    /// The label's name.
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

/// Payload types of messages and result types of computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundType {
    /// The one-element type, inhabited by `()`.
    Unit,
    /// Booleans.
    Bool,
    /// Signed 64-bit integers.
    Int,
}

impl GroundType {
    /// Keyword used in the textual syntax.
    pub fn keyword(self) -> &'static str {
        match self {
            GroundType::Unit => "unit",
            GroundType::Bool => "bool",
            GroundType::Int => "int",
        }
    }
}

impl fmt::Display for GroundType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// One branch of a choice: the payload type and the continuation.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Payload type carried by the message.
    pub payload: GroundType,
    /// Protocol followed after the message.
    pub cont: SessionType,
}

impl Branch {
    /// Creates a branch.
    pub fn new(payload: GroundType, cont: SessionType) -> Self {
        Branch { payload, cont }
    }
}

/// Label-keyed branches of a choice.
pub type Branches = IndexMap<Label, Branch>;

/// A local session type.
#[derive(Debug, Clone)]
pub enum SessionType {
    /// End of the protocol.
    End,
    /// Internal choice `+p{...}`: send one of the messages to `p`.
    Internal(Participant, Branches),
    /// External choice `&p{...}`: accept any of the messages from `p`.
    External(Participant, Branches),
    /// Type variable.
    Var(String),
    /// Recursive type `rec X. T`.
    Rec(String, Box<SessionType>),
}

/// Polarity of a choice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Internal choice (sending).
    Internal,
    /// External choice (receiving).
    External,
}

impl Polarity {
    /// The dual polarity.
    pub fn dual(self) -> Self {
        match self {
            Polarity::Internal => Polarity::External,
            Polarity::External => Polarity::Internal,
        }
    }

    /// Sigil used in the textual syntax.
    pub fn sigil(self) -> char {
        match self {
            Polarity::Internal => '+',
            Polarity::External => '&',
        }
    }
}

/// Canonical, alpha-normalised representation of a session type.
///
/// Bound variables are replaced by de Bruijn indices and branches are sorted
/// by label, so two session types are alpha-equivalent exactly when their
/// canonical forms are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Canon {
    /// `end`.
    End,
    /// A choice with sorted branches.
    Choice(Polarity, Participant, Vec<(Label, GroundType, Canon)>),
    /// A bound variable, as a de Bruijn index.
    Bound(usize),
    /// A free variable, by name.
    Free(String),
    /// A recursive binder.
    Rec(Box<Canon>),
}

impl SessionType {
    /// Builds an internal choice from `(label, payload, continuation)` triples.
    pub fn internal<P, L>(p: P, branches: impl IntoIterator<Item = (L, GroundType, SessionType)>) -> Self
    where
        P: Into<Participant>,
        L: Into<Label>,
    {
        SessionType::Internal(p.into(), collect_branches(branches))
    }

    /// Builds an external choice from `(label, payload, continuation)` triples.
    pub fn external<P, L>(p: P, branches: impl IntoIterator<Item = (L, GroundType, SessionType)>) -> Self
    where
        P: Into<Participant>,
        L: Into<Label>,
    {
        SessionType::External(p.into(), collect_branches(branches))
    }

    /// Builds a choice of the given polarity.
    pub fn choice(polarity: Polarity, p: Participant, branches: Branches) -> Self {
        match polarity {
            Polarity::Internal => SessionType::Internal(p, branches),
            Polarity::External => SessionType::External(p, branches),
        }
    }

    /// Builds `rec x. body`.
    pub fn rec(x: impl Into<String>, body: SessionType) -> Self {
        SessionType::Rec(x.into(), Box::new(body))
    }

    /// Builds the variable `x`.
    pub fn var(x: impl Into<String>) -> Self {
        SessionType::Var(x.into())
    }

    /// Views a choice node as `(polarity, participant, branches)`.
    pub fn as_choice(&self) -> Option<(Polarity, &Participant, &Branches)> {
        match self {
            SessionType::Internal(p, bs) => Some((Polarity::Internal, p, bs)),
            SessionType::External(p, bs) => Some((Polarity::External, p, bs)),
            _ => None,
        }
    }

    /// Whether the type is `end`.
    pub fn is_end(&self) -> bool {
        matches!(self, SessionType::End)
    }

    /// Free type variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            SessionType::End => {}
            SessionType::Internal(_, bs) | SessionType::External(_, bs) => {
                for b in bs.values() {
                    b.cont.collect_free(bound, out);
                }
            }
            SessionType::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            SessionType::Rec(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Whether `x` occurs free.
    pub fn has_free(&self, x: &str) -> bool {
        match self {
            SessionType::End => false,
            SessionType::Internal(_, bs) | SessionType::External(_, bs) => {
                bs.values().any(|b| b.cont.has_free(x))
            }
            SessionType::Var(y) => x == y,
            SessionType::Rec(y, body) => y != x && body.has_free(x),
        }
    }

    /// Whether the type has no free variables.
    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Whether the type contains a `rec` binder.
    pub fn has_rec(&self) -> bool {
        match self {
            SessionType::End | SessionType::Var(_) => false,
            SessionType::Internal(_, bs) | SessionType::External(_, bs) => {
                bs.values().any(|b| b.cont.has_rec())
            }
            SessionType::Rec(..) => true,
        }
    }

    /// Number of constructors (`end`, choices, variables and binders).
    pub fn size(&self) -> usize {
        match self {
            SessionType::End | SessionType::Var(_) => 1,
            SessionType::Internal(_, bs) | SessionType::External(_, bs) => {
                1 + bs.values().map(|b| b.cont.size()).sum::<usize>()
            }
            SessionType::Rec(_, body) => 1 + body.size(),
        }
    }

    /// Participants mentioned anywhere in the type.
    pub fn participants(&self) -> BTreeSet<Participant> {
        let mut out = BTreeSet::new();
        self.collect_participants(&mut out);
        out
    }

    fn collect_participants(&self, out: &mut BTreeSet<Participant>) {
        match self {
            SessionType::End | SessionType::Var(_) => {}
            SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
                out.insert(p.clone());
                for b in bs.values() {
                    b.cont.collect_participants(out);
                }
            }
            SessionType::Rec(_, body) => body.collect_participants(out),
        }
    }

    /// Canonical form: de Bruijn indices for bound variables, sorted branches.
    pub fn canonical(&self) -> Canon {
        self.canon_with(&mut Vec::new())
    }

    fn canon_with(&self, env: &mut Vec<String>) -> Canon {
        match self {
            SessionType::End => Canon::End,
            SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
                let pol = if matches!(self, SessionType::Internal(..)) {
                    Polarity::Internal
                } else {
                    Polarity::External
                };
                let mut items: Vec<(Label, GroundType, Canon)> = bs
                    .iter()
                    .map(|(l, b)| (l.clone(), b.payload, b.cont.canon_with(env)))
                    .collect();
                items.sort_by(|a, b| a.0.cmp(&b.0));
                Canon::Choice(pol, p.clone(), items)
            }
            SessionType::Var(x) => match env.iter().rev().position(|y| y == x) {
                Some(i) => Canon::Bound(i),
                None => Canon::Free(x.clone()),
            },
            SessionType::Rec(x, body) => {
                env.push(x.clone());
                let c = body.canon_with(env);
                env.pop();
                Canon::Rec(Box::new(c))
            }
        }
    }

    /// Alpha-equivalence (branch order is irrelevant).
    pub fn alpha_eq(&self, other: &SessionType) -> bool {
        self.canonical() == other.canonical()
    }
}

fn collect_branches<L: Into<Label>>(
    branches: impl IntoIterator<Item = (L, GroundType, SessionType)>,
) -> Branches {
    branches
        .into_iter()
        .map(|(l, b, t)| (l.into(), Branch::new(b, t)))
        .collect()
}

impl PartialEq for SessionType {
    fn eq(&self, other: &Self) -> bool {
        self.alpha_eq(other)
    }
}

impl Eq for SessionType {}

impl std::hash::Hash for SessionType {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical().hash(state);
    }
}

impl fmt::Display for SessionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionType::End => f.write_str("end"),
            SessionType::Var(x) => f.write_str(x),
            SessionType::Rec(x, body) => write!(f, "rec {x}. {body}"),
            SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
                let sigil = if matches!(self, SessionType::Internal(..)) { '+' } else { '&' };
                write!(f, "{sigil}{p}{{")?;
                for (i, (l, b)) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{l}({}). {}", b.payload, b.cont)?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Returns `base` decorated with primes until it avoids every name in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

/// Capture-avoiding simultaneous substitution of free variables.
///
/// When a binder would capture a free variable of a substituted type, it is
/// renamed deterministically by appending primes (`X`, `X'`, `X''`, ...).
pub fn substitute(t: &SessionType, bindings: &BTreeMap<String, SessionType>) -> SessionType {
    if bindings.is_empty() {
        return t.clone();
    }
    match t {
        SessionType::End => SessionType::End,
        SessionType::Var(x) => bindings.get(x).cloned().unwrap_or_else(|| t.clone()),
        SessionType::Internal(p, bs) => SessionType::Internal(p.clone(), subst_branches(bs, bindings)),
        SessionType::External(p, bs) => SessionType::External(p.clone(), subst_branches(bs, bindings)),
        SessionType::Rec(x, body) => {
            // Drop bindings shadowed by this binder, and those irrelevant to the body.
            let inner: BTreeMap<String, SessionType> = bindings
                .iter()
                .filter(|(k, _)| *k != x && body.has_free(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if inner.is_empty() {
                return t.clone();
            }
            let captured = inner.values().any(|v| v.has_free(x));
            if captured {
                let mut avoid: BTreeSet<String> = body.free_vars();
                for v in inner.values() {
                    avoid.extend(v.free_vars());
                }
                avoid.extend(inner.keys().cloned());
                avoid.insert(x.clone());
                let fresh = fresh_name(x, &avoid);
                let mut renamed = inner.clone();
                renamed.insert(x.clone(), SessionType::Var(fresh.clone()));
                SessionType::Rec(fresh, Box::new(substitute(body, &renamed)))
            } else {
                SessionType::Rec(x.clone(), Box::new(substitute(body, &inner)))
            }
        }
    }
}

fn subst_branches(bs: &Branches, bindings: &BTreeMap<String, SessionType>) -> Branches {
    bs.iter()
        .map(|(l, b)| (l.clone(), Branch::new(b.payload, substitute(&b.cont, bindings))))
        .collect()
}

/// Substitutes a single variable.
pub fn substitute_one(t: &SessionType, x: &str, v: &SessionType) -> SessionType {
    let mut m = BTreeMap::new();
    m.insert(x.to_string(), v.clone());
    substitute(t, &m)
}

/// One-step unfolding of the outermost binder: `T[X ↦ rec X. T]`.
///
/// This is the premise of the recursion rules of the reduct relations.
pub fn unfold_once(t: &SessionType) -> SessionType {
    match t {
        SessionType::Rec(x, body) => substitute_one(body, x, t),
        _ => t.clone(),
    }
}

/// Unfolding: `unfold(rec X. T) = unfold(T)[X ↦ rec X. T]`, identity otherwise.
///
/// On well-formed types the result is `end`, a choice, or a variable.
pub fn unfold(t: &SessionType) -> SessionType {
    match t {
        SessionType::Rec(x, body) => substitute_one(&unfold(body), x, t),
        _ => t.clone(),
    }
}

/// Sequential composition `T · T'`: replaces every `end` of `T` by `T'`.
pub fn multiply(t: &SessionType, u: &SessionType) -> SessionType {
    match t {
        SessionType::End => u.clone(),
        SessionType::Var(_) => t.clone(),
        SessionType::Internal(p, bs) => SessionType::Internal(p.clone(), mult_branches(bs, u)),
        SessionType::External(p, bs) => SessionType::External(p.clone(), mult_branches(bs, u)),
        SessionType::Rec(x, body) => {
            if u.has_free(x) {
                let mut avoid = body.free_vars();
                avoid.extend(u.free_vars());
                avoid.insert(x.clone());
                let fresh = fresh_name(x, &avoid);
                let renamed = substitute_one(body, x, &SessionType::Var(fresh.clone()));
                SessionType::Rec(fresh, Box::new(multiply(&renamed, u)))
            } else {
                SessionType::Rec(x.clone(), Box::new(multiply(body, u)))
            }
        }
    }
}

fn mult_branches(bs: &Branches, u: &SessionType) -> Branches {
    bs.iter()
        .map(|(l, b)| (l.clone(), Branch::new(b.payload, multiply(&b.cont, u))))
        .collect()
}

/// Which well-formedness rule a session type violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WfRule {
    /// A variable is free but not declared in the ambient variable set.
    FreeVariable,
    /// A recursive variable occurs outside any choice under its binder.
    UnguardedRecursion,
    /// A choice has no branches.
    EmptyChoice,
}

/// A well-formedness diagnostic.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("ill-formed session type ({rule:?}) at `{subterm}`: {detail}")]
pub struct WfError {
    /// The violated rule.
    pub rule: WfRule,
    /// The offending subterm, printed.
    pub subterm: String,
    /// Human-readable explanation.
    pub detail: String,
}

/// Checks that free variables are within `theta`, recursion is guarded and
/// all choices are nonempty. Label distinctness is enforced by the map.
pub fn well_formed(t: &SessionType, theta: &BTreeSet<String>) -> Result<(), WfError> {
    let mut bound = Vec::new();
    wf(t, theta, &mut bound)
}

fn wf(t: &SessionType, theta: &BTreeSet<String>, bound: &mut Vec<String>) -> Result<(), WfError> {
    match t {
        SessionType::End => Ok(()),
        SessionType::Var(x) => {
            if bound.contains(x) || theta.contains(x) {
                Ok(())
            } else {
                Err(WfError {
                    rule: WfRule::FreeVariable,
                    subterm: x.clone(),
                    detail: format!("variable `{x}` is not bound"),
                })
            }
        }
        SessionType::Internal(_, bs) | SessionType::External(_, bs) => {
            if bs.is_empty() {
                return Err(WfError {
                    rule: WfRule::EmptyChoice,
                    subterm: t.to_string(),
                    detail: "choices need at least one branch".into(),
                });
            }
            for b in bs.values() {
                wf(&b.cont, theta, bound)?;
            }
            Ok(())
        }
        SessionType::Rec(x, body) => {
            if occurs_unguarded(body, x) {
                return Err(WfError {
                    rule: WfRule::UnguardedRecursion,
                    subterm: t.to_string(),
                    detail: format!("`{x}` must occur under an internal or external choice"),
                });
            }
            bound.push(x.clone());
            let r = wf(body, theta, bound);
            bound.pop();
            r
        }
    }
}

/// Whether `x` occurs free in `t` without an enclosing choice.
fn occurs_unguarded(t: &SessionType, x: &str) -> bool {
    match t {
        SessionType::Var(y) => x == y,
        SessionType::Rec(y, body) => y != x && occurs_unguarded(body, x),
        _ => false,
    }
}
