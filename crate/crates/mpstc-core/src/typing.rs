//! Algorithmic graded typing: values, computations, configurations, and
//! whole sessions.
//!
//! A computation is typed by a ground result type and a *grade*, the session
//! type describing its communication behaviour. Inference is syntax
//! directed; the declarative subsumption rule is used in two places only:
//!
//! * the branches of a conditional are joined: equal grades are kept, else
//!   the larger of two comparable grades is taken, else two internal choices
//!   on the same participant are combined into one offering both label sets
//!   (and two external choices on the same participant and labels are joined
//!   continuation by continuation);
//! * an explicit ascription `(t : T)` checks that the grade of `t` is a
//!   subtype of `T` and then uses `T`.
//!
//! Inference also returns an *elaborated* term where every use of
//! subsumption is explicit (an ascription) and every recursive definition
//! carries its grade annotation. The denotational semantics interprets that
//! elaborated term.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::global::{global_well_formed, project, MergeError};
use crate::lang::{guarded_recursion_check, Arm, Computation, Configuration, FunDef, GuardError, Message, Queue, Value};
use crate::relations::{send_reduct, ReductDerivation};
use crate::session::{fresh_name, multiply, substitute_one, well_formed, Branch, Branches, GroundType, Participant, Polarity, SessionType, WfError};
use crate::subtyping::{subtype_with, SubtypeOptions, SubtypeVerdict};
use crate::syntax::{Program, TypeRef};

/// The type of a recursive function: argument types, latent grade, result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunSig {
    /// Argument types.
    pub params: Vec<GroundType>,
    /// Grade of a call.
    pub grade: SessionType,
    /// Result type.
    pub result: GroundType,
}

/// Typing contexts `Θ; Ψ; Γ` together with the subtyping bounds.
#[derive(Debug, Clone, Default)]
pub struct TypingContexts {
    /// Session type variables in scope.
    pub theta: BTreeSet<String>,
    /// Recursive functions in scope.
    pub psi: BTreeMap<String, FunSig>,
    /// Value variables in scope.
    pub gamma: BTreeMap<String, GroundType>,
    /// Bounds used for every subtyping query.
    pub opts: SubtypeOptions,
}

impl TypingContexts {
    /// Empty contexts with the given reduct fuel.
    pub fn with_fuel(fuel: usize) -> Self {
        TypingContexts { opts: SubtypeOptions::with_fuel(fuel), ..Default::default() }
    }

    /// Adds a value variable.
    pub fn bind(mut self, x: impl Into<String>, b: GroundType) -> Self {
        self.gamma.insert(x.into(), b);
        self
    }
}

/// A typing failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    /// A variable is not in scope.
    #[error("unbound variable {name}")]
    UnboundVariable {
        /// The variable.
        name: String,
    },
    /// A function is not in scope.
    #[error("unbound function {name}")]
    UnboundFunction {
        /// The function.
        name: String,
    },
    /// Wrong number of arguments.
    #[error("{function} expects {expected} arguments, got {found}")]
    Arity {
        /// The function.
        function: String,
        /// Declared arity.
        expected: usize,
        /// Supplied arity.
        found: usize,
    },
    /// A ground type mismatch.
    #[error("expected {expected}, found {found} in `{term}`")]
    GroundMismatch {
        /// Expected type.
        expected: GroundType,
        /// Actual type.
        found: GroundType,
        /// The offending term, printed.
        term: String,
    },
    /// The branches of a conditional have incompatible grades.
    #[error("cannot join branch grades {left} and {right} in `{term}`; add an ascription `(t : T)`")]
    IfJoin {
        /// Grade of the then-branch.
        left: String,
        /// Grade of the else-branch.
        right: String,
        /// The conditional, printed.
        term: String,
    },
    /// A required subtyping does not hold.
    #[error("grade {sub} is not a subtype of {sup}{}", if *.unknown { " (cannot prove; raise --fuel)" } else { "" })]
    NotSubtype {
        /// The inferred grade.
        sub: String,
        /// The required grade.
        sup: String,
        /// Whether the checker gave up rather than disproving.
        unknown: bool,
        /// Explanation of the verdict.
        explanation: String,
    },
    /// An annotation is not a well-formed session type.
    #[error("ill-formed grade: {0}")]
    IllFormed(WfError),
    /// Recursion is not guarded.
    #[error("{0}")]
    Guard(GuardError),
    /// A configuration has no typing derivation.
    #[error("no typing derivation for configuration {config} at {ty}: {reason}")]
    NoConfigDerivation {
        /// The configuration, printed.
        config: String,
        /// The target type.
        ty: String,
        /// Why the search failed.
        reason: String,
    },
}

/// The result of inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inferred {
    /// Result type.
    pub ground: GroundType,
    /// Grade.
    pub grade: SessionType,
    /// Elaborated term with explicit subsumption and grade annotations.
    pub term: Computation,
}

/// Types a value.
pub fn type_value(gamma: &BTreeMap<String, GroundType>, v: &Value) -> Result<GroundType, TypeError> {
    match v {
        Value::Var(x) => gamma.get(x).copied().ok_or_else(|| TypeError::UnboundVariable { name: x.clone() }),
        other => Ok(other.ground().expect("constants have a ground type")),
    }
}

fn expect_ground(expected: GroundType, found: GroundType, term: &dyn std::fmt::Display) -> Result<(), TypeError> {
    if expected == found {
        Ok(())
    } else {
        Err(TypeError::GroundMismatch { expected, found, term: term.to_string() })
    }
}

fn require_subtype(ctx: &TypingContexts, sub: &SessionType, sup: &SessionType) -> Result<(), TypeError> {
    let v = subtype_with(sub, sup, &ctx.theta, ctx.opts);
    match v {
        SubtypeVerdict::Proven { .. } => Ok(()),
        other => Err(TypeError::NotSubtype {
            sub: sub.to_string(),
            sup: sup.to_string(),
            unknown: matches!(other, SubtypeVerdict::Unknown { .. }),
            explanation: other.explain(),
        }),
    }
}

/// Infers the result type and grade of `t`, checking guardedness first.
pub fn infer_computation(ctx: &TypingContexts, t: &Computation) -> Result<Inferred, TypeError> {
    guarded_recursion_check(t).map_err(TypeError::Guard)?;
    infer(ctx, t)
}

/// Checks `t` at result type `b` and grade `ty`; returns the elaborated term.
pub fn check_computation(ctx: &TypingContexts, t: &Computation, b: GroundType, ty: &SessionType) -> Result<Inferred, TypeError> {
    well_formed(ty, &ctx.theta).map_err(TypeError::IllFormed)?;
    let inf = infer_computation(ctx, t)?;
    expect_ground(b, inf.ground, t)?;
    require_subtype(ctx, &inf.grade, ty)?;
    let term = if inf.grade.alpha_eq(ty) { inf.term } else { Computation::Ascribe(Box::new(inf.term), ty.clone()) };
    Ok(Inferred { ground: b, grade: ty.clone(), term })
}

fn infer(ctx: &TypingContexts, t: &Computation) -> Result<Inferred, TypeError> {
    use Computation::*;
    let plain = |ground, grade| Ok(Inferred { ground, grade, term: t.clone() });
    match t {
        Return(v) => plain(type_value(&ctx.gamma, v)?, SessionType::End),
        Add(a, b) | Sub(a, b) | Less(a, b) => {
            expect_ground(GroundType::Int, type_value(&ctx.gamma, a)?, t)?;
            expect_ground(GroundType::Int, type_value(&ctx.gamma, b)?, t)?;
            let g = if matches!(t, Less(..)) { GroundType::Bool } else { GroundType::Int };
            plain(g, SessionType::End)
        }
        Let(x, a, b) => {
            let ia = infer(ctx, a)?;
            let mut inner = ctx.clone();
            inner.gamma.insert(x.clone(), ia.ground);
            let ib = infer(&inner, b)?;
            Ok(Inferred {
                ground: ib.ground,
                grade: multiply(&ia.grade, &ib.grade),
                term: Let(x.clone(), Box::new(ia.term), Box::new(ib.term)),
            })
        }
        If(v, a, b) => {
            expect_ground(GroundType::Bool, type_value(&ctx.gamma, v)?, t)?;
            let ia = infer(ctx, a)?;
            let ib = infer(ctx, b)?;
            expect_ground(ia.ground, ib.ground, t)?;
            let joined = join(ctx, &ia.grade, &ib.grade).ok_or_else(|| TypeError::IfJoin {
                left: ia.grade.to_string(),
                right: ib.grade.to_string(),
                term: t.to_string(),
            })?;
            let coerce = |i: Inferred| if i.grade.alpha_eq(&joined) { i.term } else { Ascribe(Box::new(i.term), joined.clone()) };
            Ok(Inferred { ground: ia.ground, grade: joined.clone(), term: If(v.clone(), Box::new(coerce(ia)), Box::new(coerce(ib))) })
        }
        Send { label, value, to, cont } => {
            let b = type_value(&ctx.gamma, value)?;
            let ic = infer(ctx, cont)?;
            Ok(Inferred {
                ground: ic.ground,
                grade: SessionType::internal(to.clone(), [(label.clone(), b, ic.grade)]),
                term: Send { label: label.clone(), value: value.clone(), to: to.clone(), cont: Box::new(ic.term) },
            })
        }
        Recv { from, arms } => {
            let mut ground = None;
            let mut grades: Branches = IndexMap::new();
            let mut out_arms = IndexMap::new();
            for (l, arm) in arms {
                let inner = ctx.clone().bind(arm.binder.clone(), arm.ground);
                let ia = infer(&inner, &arm.body)?;
                match ground {
                    None => ground = Some(ia.ground),
                    Some(g) => expect_ground(g, ia.ground, &arm.body)?,
                }
                grades.insert(l.clone(), Branch::new(arm.ground, ia.grade));
                out_arms.insert(l.clone(), Arm { binder: arm.binder.clone(), ground: arm.ground, body: ia.term });
            }
            let ground = ground.ok_or_else(|| TypeError::IllFormed(empty_choice(t)))?;
            Ok(Inferred {
                ground,
                grade: SessionType::External(from.clone(), grades),
                term: Recv { from: from.clone(), arms: out_arms },
            })
        }
        LetRec(def, cont) => {
            let (x, fun_grade, body_term) = infer_letrec(ctx, def)?;
            let sig = FunSig { params: def.params.iter().map(|(_, b)| *b).collect(), grade: fun_grade.clone(), result: def.result };
            let mut inner = ctx.clone();
            inner.psi.insert(def.name.clone(), sig);
            let ic = infer(&inner, cont)?;
            let SessionType::Rec(_, body_grade) = &fun_grade else { unreachable!("letrec grades are recursive") };
            let def = FunDef { grade: Some((x, (**body_grade).clone())), body: body_term, ..(**def).clone() };
            Ok(Inferred { ground: ic.ground, grade: ic.grade, term: LetRec(Arc::new(def), Box::new(ic.term)) })
        }
        Apply(f, args) => {
            let sig = ctx.psi.get(f).ok_or_else(|| TypeError::UnboundFunction { name: f.clone() })?;
            if sig.params.len() != args.len() {
                return Err(TypeError::Arity { function: f.clone(), expected: sig.params.len(), found: args.len() });
            }
            for (p, a) in sig.params.iter().zip(args) {
                expect_ground(*p, type_value(&ctx.gamma, a)?, t)?;
            }
            plain(sig.result, sig.grade.clone())
        }
        Ascribe(inner, ty) => {
            well_formed(ty, &ctx.theta).map_err(TypeError::IllFormed)?;
            let ii = infer(ctx, inner)?;
            require_subtype(ctx, &ii.grade, ty)?;
            Ok(Inferred { ground: ii.ground, grade: ty.clone(), term: Ascribe(Box::new(ii.term), ty.clone()) })
        }
    }
}

fn empty_choice(t: &Computation) -> WfError {
    WfError { rule: crate::session::WfRule::EmptyChoice, subterm: t.to_string(), detail: "receive with no arms".into() }
}

/// Infers the grade `rec X. T` of a recursive definition; returns the
/// variable, the grade, and the elaborated body (ascribed to `T` if needed).
fn infer_letrec(ctx: &TypingContexts, def: &FunDef) -> Result<(String, SessionType, Computation), TypeError> {
    // Pick the recursion variable, renaming the annotation (and the
    // annotations of the body, which may mention it) away from Θ.
    let mut avoid = ctx.theta.clone();
    let mut body = std::borrow::Cow::Borrowed(&def.body);
    let annotation = def.grade.as_ref().map(|(x, t)| {
        if avoid.contains(x) {
            let mut av = avoid.clone();
            av.extend(t.free_vars());
            let y = fresh_name(x, &av);
            let t2 = substitute_one(t, x, &SessionType::var(y.clone()));
            body = std::borrow::Cow::Owned(def.body.subst_type_var(x, &SessionType::var(y.clone())));
            (y, t2)
        } else {
            (x.clone(), t.clone())
        }
    });
    let x = match &annotation {
        Some((x, _)) => x.clone(),
        None => {
            avoid.extend(ctx.psi.values().flat_map(|s| s.grade.free_vars()));
            if avoid.contains("X") { fresh_name("X", &avoid) } else { "X".to_string() }
        }
    };
    let mut inner = ctx.clone();
    inner.theta.insert(x.clone());
    for (p, b) in &def.params {
        inner.gamma.insert(p.clone(), *b);
    }
    inner.psi.insert(
        def.name.clone(),
        FunSig { params: def.params.iter().map(|(_, b)| *b).collect(), grade: SessionType::var(x.clone()), result: def.result },
    );
    let ib = infer(&inner, &body)?;
    expect_ground(def.result, ib.ground, &body)?;
    let (body_grade, body_term) = match annotation {
        Some((_, ann)) => {
            well_formed(&ann, &inner.theta).map_err(TypeError::IllFormed)?;
            require_subtype(&inner, &ib.grade, &ann)?;
            let term = if ib.grade.alpha_eq(&ann) { ib.term } else { Computation::Ascribe(Box::new(ib.term), ann.clone()) };
            (ann, term)
        }
        None => (ib.grade, ib.term),
    };
    let grade = SessionType::rec(x.clone(), body_grade);
    well_formed(&grade, &ctx.theta).map_err(TypeError::IllFormed)?;
    Ok((x, grade, body_term))
}

/// Joins the grades of two conditional branches (see the module docs).
pub fn join(ctx: &TypingContexts, a: &SessionType, b: &SessionType) -> Option<SessionType> {
    if a.alpha_eq(b) {
        return Some(a.clone());
    }
    if subtype_with(a, b, &ctx.theta, ctx.opts).is_proven() {
        return Some(b.clone());
    }
    if subtype_with(b, a, &ctx.theta, ctx.opts).is_proven() {
        return Some(a.clone());
    }
    if let (SessionType::External(p, bs), SessionType::External(q, cs)) = (a, b) {
        // Receives on the same labels: join the continuations pointwise.
        if p != q || bs.len() != cs.len() {
            return None;
        }
        let mut out: Branches = IndexMap::new();
        for (l, br) in bs {
            let cr = cs.get(l)?;
            if cr.payload != br.payload {
                return None;
            }
            out.insert(l.clone(), Branch::new(br.payload, join(ctx, &br.cont, &cr.cont)?));
        }
        let joined = SessionType::External(p.clone(), out);
        let ok = subtype_with(a, &joined, &ctx.theta, ctx.opts).is_proven() && subtype_with(b, &joined, &ctx.theta, ctx.opts).is_proven();
        return ok.then_some(joined);
    }
    let (SessionType::Internal(p, bs), SessionType::Internal(q, cs)) = (a, b) else {
        return None;
    };
    if p != q {
        return None;
    }
    let mut out: Branches = IndexMap::new();
    for (l, br) in bs {
        match cs.get(l) {
            Some(cr) => {
                if cr.payload != br.payload {
                    return None;
                }
                out.insert(l.clone(), Branch::new(br.payload, join(ctx, &br.cont, &cr.cont)?));
            }
            None => {
                out.insert(l.clone(), br.clone());
            }
        }
    }
    for (l, cr) in cs {
        if !bs.contains_key(l) {
            out.insert(l.clone(), cr.clone());
        }
    }
    let joined = SessionType::Internal(p.clone(), out);
    let ok = subtype_with(a, &joined, &ctx.theta, ctx.opts).is_proven() && subtype_with(b, &joined, &ctx.theta, ctx.opts).is_proven();
    ok.then_some(joined)
}

/// A derivation of configuration typing.
#[derive(Debug, Clone)]
pub enum ConfigDerivation {
    /// `⟨∅, t, ∅⟩ : T` from computation typing; `term` is elaborated at `ty`.
    Base {
        /// The type.
        ty: SessionType,
        /// The elaborated computation.
        term: Computation,
    },
    /// The back message of `σ_p` is sent by the derivation of the reduct.
    Send {
        /// The type `U` of this configuration.
        ty: SessionType,
        /// The recipient.
        to: Participant,
        /// The message.
        msg: Message,
        /// Derivation of `U ⇀! T`.
        reduct: Box<ReductDerivation>,
        /// Typing of the configuration without the message, at `T`.
        inner: Box<ConfigDerivation>,
    },
    /// The front message of `ρ_p` has been received.
    Recv {
        /// The type `U` of this configuration.
        ty: SessionType,
        /// The sender.
        from: Participant,
        /// The message.
        msg: Message,
        /// Typing of the configuration without the message, at `T` with `T ⇀? U`.
        inner: Box<ConfigDerivation>,
    },
}

impl ConfigDerivation {
    /// The type this derivation assigns.
    pub fn ty(&self) -> &SessionType {
        match self {
            ConfigDerivation::Base { ty, .. } | ConfigDerivation::Send { ty, .. } | ConfigDerivation::Recv { ty, .. } => ty,
        }
    }

    /// Number of rule applications.
    pub fn size(&self) -> usize {
        match self {
            ConfigDerivation::Base { .. } => 1,
            ConfigDerivation::Send { inner, .. } | ConfigDerivation::Recv { inner, .. } => 1 + inner.size(),
        }
    }
}

/// Searches a derivation of `c : b ▷ ty`.
///
/// Send-queue messages are peeled from the back using the canonical send
/// reduct of the current type; receive-queue messages are peeled from the
/// front, with the single-branch external choice `&p{ℓ(b).U}` as the type
/// before reception. Different participants' queues may be peeled in any
/// order; all orders are tried depth-first, with failures memoised.
pub fn type_configuration(c: &Configuration, b: GroundType, ty: &SessionType, fuel: usize) -> Result<ConfigDerivation, TypeError> {
    let ctx = TypingContexts::with_fuel(fuel);
    if !c.comp.is_closed() {
        return Err(TypeError::NoConfigDerivation {
            config: c.to_string(),
            ty: ty.to_string(),
            reason: "the computation is not closed".into(),
        });
    }
    let mut search = ConfigSearch { ctx, b, failed: HashSet::new(), last_error: None };
    match search.go(&c.rho, &c.comp, &c.sigma, ty) {
        Some(d) => Ok(d),
        None => Err(search.last_error.unwrap_or_else(|| TypeError::NoConfigDerivation {
            config: c.to_string(),
            ty: ty.to_string(),
            reason: "no derivation found".into(),
        })),
    }
}

struct ConfigSearch {
    ctx: TypingContexts,
    b: GroundType,
    failed: HashSet<(String, String, crate::session::Canon)>,
    last_error: Option<TypeError>,
}

impl ConfigSearch {
    fn go(&mut self, rho: &Queue, t: &Computation, sigma: &Queue, ty: &SessionType) -> Option<ConfigDerivation> {
        if rho.is_empty() && sigma.is_empty() {
            return match check_computation(&self.ctx, t, self.b, ty) {
                Ok(inf) => Some(ConfigDerivation::Base { ty: ty.clone(), term: inf.term }),
                Err(e) => {
                    self.last_error = Some(e);
                    None
                }
            };
        }
        let key = (rho.to_string(), sigma.to_string(), ty.canonical());
        if self.failed.contains(&key) {
            return None;
        }
        // CSend: peel the back of some σ_p.
        let senders: Vec<Participant> = sigma.participants().cloned().collect();
        for p in senders {
            let mut rest = sigma.clone();
            let msg = rest.pop_back(&p).expect("nonempty");
            let search = send_reduct(ty, &p, &msg.label, msg.ground(), self.ctx.opts.fuel);
            let Some(d) = search.found else {
                self.last_error = Some(TypeError::NoConfigDerivation {
                    config: format!("⟨{rho}, {t}, {sigma}⟩"),
                    ty: ty.to_string(),
                    reason: format!("{ty} permits no send of {msg} to {p}"),
                });
                continue;
            };
            if let Some(inner) = self.go(rho, t, &rest, &d.reduct) {
                return Some(ConfigDerivation::Send { ty: ty.clone(), to: p, msg, reduct: Box::new(d), inner: Box::new(inner) });
            }
        }
        // CRecv: peel the front of some ρ_p.
        let receivers: Vec<Participant> = rho.participants().cloned().collect();
        for p in receivers {
            let mut rest = rho.clone();
            let msg = rest.pop_front(&p).expect("nonempty");
            let before = SessionType::external(p.clone(), [(msg.label.clone(), msg.ground(), ty.clone())]);
            if let Some(inner) = self.go(&rest, t, sigma, &before) {
                return Some(ConfigDerivation::Recv { ty: ty.clone(), from: p, msg, inner: Box::new(inner) });
            }
        }
        self.failed.insert(key);
        None
    }
}

/// Outcome of checking one participant of a session.
#[derive(Debug, Clone, Serialize)]
pub struct RoleReport {
    /// The participant.
    pub role: String,
    /// The type it is checked against (the projection, when declared so).
    pub ty: Option<String>,
    /// The inferred grade of its implementation, when inference succeeded.
    pub inferred: Option<String>,
    /// The result type of its implementation, when inference succeeded.
    pub result: Option<GroundType>,
    /// `None` when the participant checks.
    pub error: Option<String>,
}

impl RoleReport {
    /// Whether the participant checks.
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Outcome of checking a session file.
#[derive(Debug, Clone, Serialize)]
pub struct SessionReport {
    /// Problems with the session as a whole (global type shape, roles).
    pub errors: Vec<String>,
    /// One report per declared participant, in declaration order.
    pub roles: Vec<RoleReport>,
}

impl SessionReport {
    /// Whether the whole session is well-typed.
    pub fn ok(&self) -> bool {
        self.errors.is_empty() && self.roles.iter().all(RoleReport::ok)
    }
}

/// Resolves a participant's declared type, projecting if needed.
pub fn resolve_type(prog: &Program, ty: &TypeRef) -> Result<SessionType, String> {
    match ty {
        TypeRef::Local(t) => Ok(t.clone()),
        TypeRef::Projection { global, role } => {
            let g = prog.globals.get(global).ok_or_else(|| format!("unknown global type {global}"))?;
            project(g, role).map_err(|e: MergeError| format!("projection of {global} onto {role} is undefined: {e}"))
        }
    }
}

/// Checks a session file: every global type is well-formed, closed, and
/// mentions only declared participants; every projection used is defined;
/// every participant's configuration `⟨∅, t, ∅⟩` checks against its type.
pub fn session_well_typed(prog: &Program, fuel: usize) -> SessionReport {
    let mut errors = Vec::new();
    let declared: BTreeSet<Participant> = prog.participants.iter().map(|p| p.name.clone()).collect();
    for (name, g) in &prog.globals {
        if let Err(e) = global_well_formed(g, &BTreeSet::new()) {
            errors.push(format!("global {name}: {e}"));
        }
        for r in g.participants() {
            if !declared.contains(&r) {
                errors.push(format!("global {name} mentions undeclared participant {r}"));
            }
        }
    }
    // A session is typed by a global type: every participant must be typed
    // by a projection of one and the same global type.
    let globals_used: BTreeSet<&str> = prog
        .participants
        .iter()
        .filter_map(|d| match &d.ty {
            TypeRef::Projection { global, .. } => Some(global.as_str()),
            TypeRef::Local(_) => None,
        })
        .collect();
    let local: Vec<String> = prog
        .participants
        .iter()
        .filter(|d| matches!(d.ty, TypeRef::Local(_)))
        .map(|d| d.name.to_string())
        .collect();
    if !local.is_empty() {
        errors.push(format!("participants {} are not typed by projections of a global type", local.join(", ")));
    }
    if globals_used.len() > 1 {
        errors.push(format!("participants are typed by different global types: {}", globals_used.into_iter().collect::<Vec<_>>().join(", ")));
    }
    let ctx = TypingContexts::with_fuel(fuel);
    let roles = prog
        .participants
        .iter()
        .map(|decl| {
            let mut report = RoleReport { role: decl.name.to_string(), ty: None, inferred: None, result: None, error: None };
            let ty = match resolve_type(prog, &decl.ty) {
                Ok(t) => t,
                Err(e) => {
                    report.error = Some(e);
                    return report;
                }
            };
            report.ty = Some(ty.to_string());
            if !decl.body.is_closed() {
                report.error = Some(format!("implementation of {} is not closed", decl.name));
                return report;
            }
            match infer_computation(&ctx, &decl.body) {
                Ok(inf) => {
                    report.inferred = Some(inf.grade.to_string());
                    report.result = Some(inf.ground);
                    if let Err(e) = well_formed(&ty, &BTreeSet::new()) {
                        report.error = Some(e.to_string());
                    } else if let Err(e) = require_subtype(&ctx, &inf.grade, &ty) {
                        report.error = Some(e.to_string());
                    }
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            report
        })
        .collect();
    SessionReport { errors, roles }
}

/// The polarity-aware shape used by generators and reports: whether the
/// grade starts with a send, a receive, or neither.
pub fn leading_polarity(t: &SessionType) -> Option<Polarity> {
    crate::session::unfold(t).as_choice().map(|(p, _, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_computation, parse_session_type};

    #[test]
    fn send_then_return() {
        let t = parse_computation("send stop(false) to q; return true").unwrap();
        let inf = infer_computation(&TypingContexts::default(), &t).unwrap();
        assert_eq!(inf.ground, GroundType::Bool);
        assert_eq!(inf.grade.to_string(), "+q{stop(bool). end}");
    }

    #[test]
    fn return_does_not_check_at_a_send() {
        let t = parse_computation("return 0").unwrap();
        let ty = parse_session_type("+p{l(int). end}").unwrap();
        let e = check_computation(&TypingContexts::default(), &t, GroundType::Int, &ty).unwrap_err();
        assert!(matches!(e, TypeError::NotSubtype { unknown: false, .. }), "{e}");
    }

    #[test]
    fn unbound_variable() {
        assert!(matches!(
            type_value(&BTreeMap::new(), &Value::Var("x".into())),
            Err(TypeError::UnboundVariable { .. })
        ));
    }

    #[test]
    fn unguarded_recursion_is_rejected() {
        let t = parse_computation("letrec f() : int = f() in f()").unwrap();
        assert!(matches!(infer_computation(&TypingContexts::default(), &t), Err(TypeError::Guard(_))));
    }
}
