//! Type-directed synthesis of well-typed computations and configurations.
//!
//! A computation is synthesised from a closed session type: internal choices
//! send on one branch, external choices receive on every branch, `rec`
//! becomes a recursive function with a grade annotation, and recursion
//! variables become recursive calls. Optional noise adds τ-steps (lets,
//! arithmetic, conditionals) that do not change the protocol.
//!
//! Configurations add queued messages on top: an outgoing message is
//! justified by a send reduct of the target type, an incoming one by an
//! external choice around it.

use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexMap;
use mpstc_core::{
    send_reduct, Arm, Branch, Computation, Configuration, FunDef, GroundType, Label, Message, Participant, SessionType, Value,
    DEFAULT_FUEL,
};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{random_type, TypeShape};

const GROUNDS: [GroundType; 3] = [GroundType::Int, GroundType::Bool, GroundType::Unit];

/// A random ground type.
pub fn random_ground(rng: &mut impl Rng) -> GroundType {
    GROUNDS[rng.gen_range(0..GROUNDS.len())]
}

/// A random constant of type `b`.
pub fn random_value(rng: &mut impl Rng, b: GroundType) -> Value {
    match b {
        GroundType::Int => Value::Int(rng.gen_range(-2..=3)),
        GroundType::Bool => Value::Bool(rng.gen_bool(0.5)),
        GroundType::Unit => Value::Unit,
    }
}

/// How much τ-noise to add.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// None: the computation follows the type exactly.
    Off,
    /// Lets, arithmetic, and conditionals whose other branch is arbitrary.
    On(f64),
}

struct Synth<'r, R: Rng, N: Rng> {
    choices: &'r mut R,
    noise_rng: &'r mut N,
    noise: Noise,
    result: GroundType,
    /// Variables in scope; noise variables are flagged so the protocol
    /// choices never depend on them.
    vars: Vec<(String, GroundType, bool)>,
    funs: Vec<(String, String, String)>,
    counter: usize,
}

impl<R: Rng + rand::SeedableRng, N: Rng> Synth<'_, R, N> {
    fn fresh(&mut self, base: &str) -> String {
        self.counter += 1;
        format!("{base}{}", self.counter)
    }

    /// A value of type `b`: a variable in scope or a constant.
    fn value(&mut self, b: GroundType) -> Value {
        let candidates: Vec<&String> = self.vars.iter().filter(|(_, g, noise)| *g == b && !noise).map(|(x, _, _)| x).collect();
        if !candidates.is_empty() && self.choices.gen_bool(0.5) {
            return Value::Var(candidates[self.choices.gen_range(0..candidates.len())].clone());
        }
        random_value(self.choices, b)
    }

    fn noisy(&mut self) -> bool {
        match self.noise {
            Noise::Off => false,
            Noise::On(p) => self.noise_rng.gen_bool(p),
        }
    }

    fn noise_value(&mut self, b: GroundType) -> Value {
        let candidates: Vec<&String> = self.vars.iter().filter(|(_, g, _)| *g == b).map(|(x, _, _)| x).collect();
        if !candidates.is_empty() && self.noise_rng.gen_bool(0.5) {
            return Value::Var(candidates[self.noise_rng.gen_range(0..candidates.len())].clone());
        }
        random_value(self.noise_rng, b)
    }

    fn comp(&mut self, ty: &SessionType) -> Computation {
        if self.noisy() {
            return self.noise_around(ty);
        }
        match ty {
            SessionType::End => {
                let v = self.value(self.result);
                Computation::ret(v)
            }
            SessionType::Var(x) => {
                let (f, n) = self.funs.iter().rev().find(|(y, _, _)| y == x).map(|(_, f, n)| (f.clone(), n.clone())).expect("bound variable");
                // Recursive calls pass an incremented counter.
                let m = self.fresh("m");
                Computation::let_(m.clone(), Computation::Add(Value::Var(n), Value::Int(1)), Computation::Apply(f, vec![Value::Var(m)]))
            }
            SessionType::Rec(x, body) => {
                let f = self.fresh("f");
                let n = self.fresh("n");
                self.funs.push((x.clone(), f.clone(), n.clone()));
                self.vars.push((n.clone(), GroundType::Int, false));
                let fbody = self.comp(body);
                self.vars.pop();
                self.funs.pop();
                let def = FunDef {
                    name: f.clone(),
                    params: vec![(n, GroundType::Int)],
                    result: self.result,
                    grade: Some((x.clone(), (**body).clone())),
                    body: fbody,
                };
                let start = Value::Int(self.choices.gen_range(0..3));
                Computation::LetRec(Arc::new(def), Box::new(Computation::Apply(f, vec![start])))
            }
            SessionType::Internal(p, bs) => {
                let i = self.choices.gen_range(0..bs.len());
                let (l, br) = bs.get_index(i).expect("nonempty choice");
                let v = self.value(br.payload);
                let cont = self.comp(&br.cont);
                Computation::send(l.clone(), v, p.clone(), cont)
            }
            SessionType::External(p, bs) => {
                let mut arms = IndexMap::new();
                for (l, br) in bs {
                    let x = self.fresh("x");
                    self.vars.push((x.clone(), br.payload, false));
                    let body = self.comp(&br.cont);
                    self.vars.pop();
                    arms.insert(l.clone(), Arm { binder: x, ground: br.payload, body });
                }
                Computation::Recv { from: p.clone(), arms }
            }
        }
    }

    /// A computation at `ty` wrapped in protocol-neutral τ-steps.
    fn noise_around(&mut self, ty: &SessionType) -> Computation {
        match self.noise_rng.gen_range(0..4) {
            0 => {
                let y = self.fresh("y");
                let b = random_ground(self.noise_rng);
                let v = self.noise_value(b);
                self.vars.push((y.clone(), b, true));
                let rest = self.comp(ty);
                self.vars.pop();
                Computation::let_(y, Computation::ret(v), rest)
            }
            1 => {
                let y = self.fresh("y");
                let (a, c) = (self.noise_value(GroundType::Int), self.noise_value(GroundType::Int));
                let (e, b) = if self.noise_rng.gen_bool(0.5) {
                    (Computation::Add(a, c), GroundType::Int)
                } else if self.noise_rng.gen_bool(0.5) {
                    (Computation::Sub(a, c), GroundType::Int)
                } else {
                    (Computation::Less(a, c), GroundType::Bool)
                };
                self.vars.push((y.clone(), b, true));
                let rest = self.comp(ty);
                self.vars.pop();
                Computation::let_(y, e, rest)
            }
            _ => {
                // `if true then t else u` (or its mirror): `t` is the
                // computation proper, `u` an unrelated inhabitant of `ty`.
                // Both are ascribed so the branches have equal grades.
                let taken = self.comp(ty);
                let saved = self.noise;
                self.noise = Noise::Off;
                let other = std::mem::replace(self.choices, R::from_rng(&mut *self.noise_rng).expect("rng"));
                let untaken = self.comp(ty);
                *self.choices = other;
                self.noise = saved;
                let asc = |t: Computation| Computation::Ascribe(Box::new(t), ty.clone());
                if self.noise_rng.gen_bool(0.5) {
                    Computation::if_(Value::Bool(true), asc(taken), asc(untaken))
                } else {
                    Computation::if_(Value::Bool(false), asc(untaken), asc(taken))
                }
            }
        }
    }
}

/// Synthesises a closed computation of result type `b` whose grade is a
/// subtype of the closed type `ty`. Protocol choices are drawn from
/// `choices`, noise from `noise_rng`, so the same `choices` stream with
/// and without noise gives behaviourally equal computations.
pub fn synthesize<R: Rng + rand::SeedableRng, N: Rng>(
    choices: &mut R,
    noise_rng: &mut N,
    noise: Noise,
    ty: &SessionType,
    b: GroundType,
) -> Computation {
    let mut s = Synth { choices, noise_rng, noise, result: b, vars: Vec::new(), funs: Vec::new(), counter: 0 };
    s.comp(ty)
}

/// The `(participant, label, payload)` triples of the choices of `ty` with
/// the given polarity.
pub fn triples(ty: &SessionType, internal: bool) -> Vec<(Participant, Label, GroundType)> {
    fn go(ty: &SessionType, internal: bool, out: &mut BTreeSet<(Participant, Label, GroundType)>) {
        match ty {
            SessionType::End | SessionType::Var(_) => {}
            SessionType::Rec(_, b) => go(b, internal, out),
            SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
                if matches!(ty, SessionType::Internal(..)) == internal {
                    for (l, br) in bs {
                        out.insert((p.clone(), l.clone(), br.payload));
                    }
                }
                for br in bs.values() {
                    go(&br.cont, internal, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(ty, internal, &mut out);
    out.into_iter().collect()
}

/// One queued-message layer of a generated configuration.
#[derive(Debug, Clone)]
pub enum Layer {
    /// A message already sent to `p`, awaiting delivery.
    Outgoing(Participant, Message),
    /// A message received from `p`, awaiting consumption.
    Incoming(Participant, Message),
}

/// A plan for a configuration at `ty`: queue layers (outermost first) and
/// the type the computation must inhabit.
#[derive(Debug, Clone)]
pub struct Plan {
    /// The type of the configuration.
    pub ty: SessionType,
    /// The layers, outermost first.
    pub layers: Vec<Layer>,
    /// The type of the computation under the layers.
    pub inner: SessionType,
}

/// Chooses up to `max_layers` queue layers for a configuration at `ty`.
pub fn random_plan(rng: &mut impl Rng, ty: &SessionType, max_layers: usize) -> Plan {
    let mut cur = ty.clone();
    let mut layers = Vec::new();
    for _ in 0..rng.gen_range(0..=max_layers) {
        if rng.gen_bool(0.5) {
            let mut cands = triples(&cur, true);
            cands.shuffle(rng);
            let found = cands.into_iter().find_map(|(p, l, b)| {
                let r = send_reduct(&cur, &p, &l, b, DEFAULT_FUEL);
                r.found.map(|d| (p, l, b, d.reduct))
            });
            if let Some((p, l, b, next)) = found {
                layers.push(Layer::Outgoing(p, Message::new(l, random_value(rng, b))));
                cur = next;
                continue;
            }
        }
        let p = Participant::new(["p", "q", "r"][rng.gen_range(0..3)]);
        let l = Label::new(["a", "b", "c"][rng.gen_range(0..2)]);
        let b = GROUNDS[rng.gen_range(0..2)];
        layers.push(Layer::Incoming(p.clone(), Message::new(l.clone(), random_value(rng, b))));
        cur = SessionType::External(p, [(l, Branch::new(b, cur))].into_iter().collect());
    }
    Plan { ty: ty.clone(), layers, inner: cur }
}

/// Fills in a plan with a computation.
pub fn realize(plan: &Plan, comp: Computation) -> Configuration {
    let mut c = Configuration::new(comp);
    // Innermost layers are the latest outgoing / earliest incoming ones.
    for layer in plan.layers.iter().rev() {
        match layer {
            Layer::Outgoing(p, m) => c.sigma.push_back(p.clone(), m.clone()),
            Layer::Incoming(p, m) => c.rho.push_front(p.clone(), m.clone()),
        }
    }
    c
}

/// A generated well-typed configuration with its result and session type.
#[derive(Debug, Clone)]
pub struct Generated {
    pub config: Configuration,
    pub result: GroundType,
    pub ty: SessionType,
}

/// A random well-typed configuration with up to `max_layers` queued
/// messages.
pub fn random_configuration<R: Rng + rand::SeedableRng>(rng: &mut R, shape: TypeShape, max_layers: usize, noise: Noise) -> Generated {
    let ty = random_type(rng, shape);
    let b = random_ground(rng);
    let plan = random_plan(rng, &ty, max_layers);
    let mut noise_rng = R::from_rng(&mut *rng).expect("rng");
    let comp = synthesize(rng, &mut noise_rng, noise, &plan.inner, b);
    Generated { config: realize(&plan, comp), result: b, ty }
}
