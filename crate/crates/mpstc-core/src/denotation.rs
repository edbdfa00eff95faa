//! Denotational semantics: computations and configurations as normal-form
//! computation trees.
//!
//! Interpretation follows the elaborated term produced by type inference,
//! so coercions to supertypes happen exactly where the checker used
//! subtyping: an ascription `(t : T)` denotes the normal form at `T[θ]` of
//! the denotation of `t`. `let` is the monadic bind, `send`/`recv` build the
//! corresponding nodes, and a recursive definition denotes a lazily
//! self-referential family of trees (productive because recursion is
//! guarded).
//!
//! A configuration is interpreted along a typing derivation: messages still
//! to be delivered are re-attached with [`inject_send`], and messages
//! already received are fed to the tree of the computation.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::lang::{Computation, Configuration, FunDef, Message, Value};
use crate::relations::{ReductDerivation, ReductRule};
use crate::runtime::LocalAction;
use crate::session::{substitute, GroundType, SessionType};
use crate::subtyping::DEFAULT_FUEL;
use crate::trees::{bisim_bounded, normalize, tree_bind, tree_equal, tree_step, ArmFn, BindFn, BisimSide, ProbeConfig, Tree};
use crate::typing::{check_computation, infer_computation, type_configuration, ConfigDerivation, TypeError, TypingContexts};

/// Fuel used by normalisation when searching send spines and reductions.
pub const NORMALIZE_FUEL: usize = 64;

type FunValue = Arc<dyn Fn(&[Value]) -> Tree + Send + Sync>;

/// A recursive function's denotation, filled in after its environment is
/// built (the environment refers to the function itself).
#[derive(Clone, Default)]
struct FunCell(Arc<OnceLock<FunValue>>);

impl FunCell {
    fn call(&self, args: &[Value]) -> Tree {
        match self.0.get() {
            Some(f) => f(args),
            None => Tree::fault("recursive function used before its definition"),
        }
    }
}

/// Environments `γ`, `φ`, `θ`.
#[derive(Clone, Default)]
pub struct Environments {
    gamma: BTreeMap<String, Value>,
    phi: BTreeMap<String, FunCell>,
    theta: BTreeMap<String, SessionType>,
}

impl Environments {
    /// Empty environments.
    pub fn new() -> Self {
        Environments::default()
    }

    /// Binds a variable to a constant.
    pub fn bind(mut self, x: impl Into<String>, v: Value) -> Self {
        self.gamma.insert(x.into(), v);
        self
    }

    fn value(&self, v: &Value) -> Value {
        match v {
            Value::Var(x) => self.gamma.get(x).cloned().unwrap_or_else(|| v.clone()),
            c => c.clone(),
        }
    }
}

/// Interprets an elaborated computation (as returned by inference or
/// checking) in the given environments.
pub fn denote_elaborated(env: &Environments, t: &Computation) -> Tree {
    use Computation::*;
    let int = |v: &Value| match env.value(v) {
        Value::Int(n) => Some(n),
        _ => None,
    };
    match t {
        Return(v) => Tree::Ret(env.value(v)),
        Add(a, b) => match (int(a), int(b)) {
            (Some(a), Some(b)) => Tree::Ret(Value::Int(a.wrapping_add(b))),
            _ => Tree::fault(format!("ill-typed `{t}`")),
        },
        Sub(a, b) => match (int(a), int(b)) {
            (Some(a), Some(b)) => Tree::Ret(Value::Int(a.wrapping_sub(b))),
            _ => Tree::fault(format!("ill-typed `{t}`")),
        },
        Less(a, b) => match (int(a), int(b)) {
            (Some(a), Some(b)) => Tree::Ret(Value::Bool(a < b)),
            _ => Tree::fault(format!("ill-typed `{t}`")),
        },
        Let(x, a, b) => {
            let first = denote_elaborated(env, a);
            let env = env.clone();
            let x = x.clone();
            let b = b.clone();
            let k: BindFn = Arc::new(move |v: &Value| denote_elaborated(&env.clone().bind(x.clone(), v.clone()), &b));
            tree_bind(&first, k)
        }
        If(v, a, b) => match env.value(v) {
            Value::Bool(true) => denote_elaborated(env, a),
            Value::Bool(false) => denote_elaborated(env, b),
            _ => Tree::fault(format!("ill-typed `{t}`")),
        },
        Send { label, value, to, cont } => {
            let env = env.clone();
            let cont = cont.clone();
            Tree::send(to.clone(), Message::new(label.clone(), env.value(value)), move || denote_elaborated(&env, &cont))
        }
        Recv { from, arms } => {
            let arms = arms
                .iter()
                .map(|(l, arm)| {
                    let env = env.clone();
                    let arm2 = arm.clone();
                    let f: ArmFn =
                        Arc::new(move |v: &Value| Some(denote_elaborated(&env.clone().bind(arm2.binder.clone(), v.clone()), &arm2.body)));
                    (l.clone(), arm.ground, f)
                })
                .collect::<Vec<_>>();
            Tree::recv(from.clone(), arms)
        }
        LetRec(def, cont) => {
            let cell = FunCell::default();
            let mut inner = env.clone();
            inner.phi.insert(def.name.clone(), cell.clone());
            let f = fun_value(&inner, def.clone());
            let _ = cell.0.set(f);
            denote_elaborated(&inner, cont)
        }
        Apply(f, args) => match env.phi.get(f) {
            Some(cell) => cell.call(&args.iter().map(|a| env.value(a)).collect::<Vec<_>>()),
            None => Tree::fault(format!("unbound function {f}")),
        },
        Ascribe(inner, ty) => {
            let closed = substitute(ty, &env.theta);
            normalize(&closed, &denote_elaborated(env, inner), NORMALIZE_FUEL)
        }
    }
}

/// The denotation of a recursive function: arguments to the tree of its
/// body, with the recursion variable bound to the closed recursive grade.
fn fun_value(env: &Environments, def: Arc<FunDef>) -> FunValue {
    let mut body_env = env.clone();
    if let Some((x, body_grade)) = &def.grade {
        let whole = substitute(&SessionType::rec(x.clone(), body_grade.clone()), &env.theta);
        body_env.theta.insert(x.clone(), whole);
    }
    Arc::new(move |args: &[Value]| {
        let mut e = body_env.clone();
        for ((x, _), v) in def.params.iter().zip(args) {
            e.gamma.insert(x.clone(), v.clone());
        }
        denote_elaborated(&e, &def.body)
    })
}

/// The denotation of a closed computation: inferred (or, when `at` is given,
/// checked at that type), then interpreted. Returns the tree, which is a
/// normal form at the returned grade.
pub fn denote_computation(t: &Computation, at: Option<&SessionType>, fuel: usize) -> Result<(Tree, GroundType, SessionType), TypeError> {
    let ctx = TypingContexts::with_fuel(fuel);
    let inf = match at {
        Some(ty) => {
            let b = infer_computation(&ctx, t)?.ground;
            check_computation(&ctx, t, b, ty)?
        }
        None => infer_computation(&ctx, t)?,
    };
    Ok((denote_elaborated(&Environments::new(), &inf.term), inf.ground, inf.grade))
}

/// Given a derivation of `U ⇀! T` and the normal form `inner` at `T`,
/// builds the unique normal form `u` at `U` with `u ⇝ p!m inner`.
pub fn inject_send(d: &ReductDerivation, p: &crate::session::Participant, m: &Message, inner: Tree) -> Tree {
    match d.rule {
        ReductRule::Base => {
            let p = p.clone();
            Tree::send(p, m.clone(), move || inner)
        }
        ReductRule::Rec => inject_send(&d.premises[0], p, m, inner),
        ReductRule::Oplus => {
            // `inner` sends on one retained branch; re-attach below it.
            let Tree::Send(q, m2, k) = &inner else {
                return Tree::fault(format!("expected a send at {}", d.reduct));
            };
            let Some(i) = d.chosen.iter().position(|l| l == &m2.label) else {
                return Tree::fault(format!("send of {m2} outside the reduct {}", d.reduct));
            };
            let premise = d.premises[i].clone();
            let (p, m, k) = (p.clone(), m.clone(), k.clone());
            Tree::send(q.clone(), m2.clone(), move || inject_send(&premise, &p, &m, k.force().clone()))
        }
        ReductRule::Amp => {
            let Tree::Recv(q, node) = &inner else {
                return Tree::fault(format!("expected a receive at {}", d.reduct));
            };
            let arms = node
                .signature()
                .into_iter()
                .filter_map(|(l, b)| {
                    let i = d.chosen.iter().position(|c| c == &l)?;
                    let premise = d.premises[i].clone();
                    let (p, m, node, l2) = (p.clone(), m.clone(), node.clone(), l.clone());
                    let f: ArmFn = Arc::new(move |v: &Value| node.arm(&l2, v).map(|s| inject_send(&premise, &p, &m, s)));
                    Some((l, b, f))
                })
                .collect::<Vec<_>>();
            Tree::recv(q.clone(), arms)
        }
    }
}

/// Interprets a configuration typing derivation.
pub fn denote_derivation(d: &ConfigDerivation) -> Tree {
    match d {
        ConfigDerivation::Base { term, .. } => denote_elaborated(&Environments::new(), term),
        ConfigDerivation::Send { to, msg, reduct, inner, .. } => inject_send(reduct, to, msg, denote_derivation(inner)),
        ConfigDerivation::Recv { ty, from, msg, inner } => {
            let t = denote_derivation(inner);
            match tree_step(&t, &LocalAction::RecvFrom(from.clone(), msg.clone()), NORMALIZE_FUEL).into_iter().next() {
                Some(u) => normalize(ty, &u, NORMALIZE_FUEL),
                None => Tree::fault(format!("denotation cannot receive {msg} from {from}")),
            }
        }
    }
}

/// The denotation of a closed configuration at `ty`: a typing derivation
/// is searched and interpreted.
pub fn denote_configuration(c: &Configuration, ty: &SessionType, fuel: usize) -> Result<Tree, TypeError> {
    let b = infer_computation(&TypingContexts::with_fuel(fuel), &c.comp)?.ground;
    let d = type_configuration(c, b, ty, fuel)?;
    Ok(denote_derivation(&d))
}

/// The outcome of an adequacy check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Adequacy {
    /// Whether the denotations are equal (to the probe depth).
    pub equal_denotations: bool,
    /// Whether the configurations are typed-bisimilar (to the probe depth).
    pub bisimilar: bool,
    /// Whether the two verdicts agree.
    pub consistent: bool,
}

/// Compares denotational equality with typed bisimilarity for two
/// configurations typed at `ty`.
pub fn adequacy_check(c1: &Configuration, c2: &Configuration, ty: &SessionType, probes: &ProbeConfig, fuel: usize) -> Result<Adequacy, TypeError> {
    let t1 = denote_configuration(c1, ty, fuel)?;
    let t2 = denote_configuration(c2, ty, fuel)?;
    let equal_denotations = tree_equal(&t1, &t2, probes);
    let bisimilar = bisim_bounded(BisimSide::Config(c1.clone()), BisimSide::Config(c2.clone()), ty, probes, fuel.max(DEFAULT_FUEL));
    Ok(Adequacy { equal_denotations, bisimilar, consistent: equal_denotations == bisimilar })
}
