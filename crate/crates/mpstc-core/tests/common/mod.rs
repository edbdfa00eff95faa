//! Random generators shared by the property suites and the acceptance target.
//!
//! All generators are driven by a seeded `ChaCha8Rng`, so every case is
//! reproducible from its seed.

#![allow(dead_code)]

pub mod adequacy;
pub mod laws;
pub mod programs;
pub mod reduction;

use indexmap::IndexMap;
use mpstc_core::{Branch, Branches, GroundType, Label, Participant, Polarity, SessionType};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape bounds for generated session types.
#[derive(Debug, Clone, Copy)]
pub struct TypeShape {
    /// Maximum number of choice constructors.
    pub max_choices: usize,
    /// Participants are drawn from the first `participants` of p, q, r.
    pub participants: usize,
    /// Labels are drawn from the first `labels` of a, b, c.
    pub labels: usize,
    /// Payloads are drawn from the first `grounds` of int, bool, unit.
    pub grounds: usize,
    /// Whether `rec` binders may be generated.
    pub recursion: bool,
}

impl TypeShape {
    pub const MU_FREE: TypeShape = TypeShape { max_choices: 6, participants: 3, labels: 2, grounds: 2, recursion: false };
    pub const RECURSIVE: TypeShape = TypeShape { max_choices: 6, participants: 3, labels: 2, grounds: 2, recursion: true };
}

const PARTS: [&str; 3] = ["p", "q", "r"];
const LABELS: [&str; 3] = ["a", "b", "c"];
const GROUNDS: [GroundType; 3] = [GroundType::Int, GroundType::Bool, GroundType::Unit];

pub fn count_choices(t: &SessionType) -> usize {
    match t {
        SessionType::End | SessionType::Var(_) => 0,
        SessionType::Rec(_, b) => count_choices(b),
        SessionType::Internal(_, bs) | SessionType::External(_, bs) => {
            1 + bs.values().map(|b| count_choices(&b.cont)).sum::<usize>()
        }
    }
}

/// A random closed, well-formed session type within `shape`.
pub fn random_type(rng: &mut impl Rng, shape: TypeShape) -> SessionType {
    let mut budget = rng.gen_range(0..=shape.max_choices);
    let mut vars = Vec::new();
    gen(rng, shape, &mut budget, &mut vars, false, 0)
}

/// `guarded` records whether a choice separates us from the nearest binder,
/// so variables may only appear where they are guarded.
fn gen(rng: &mut impl Rng, shape: TypeShape, budget: &mut usize, vars: &mut Vec<String>, guarded: bool, depth: usize) -> SessionType {
    if *budget == 0 {
        if guarded && !vars.is_empty() && rng.gen_bool(0.6) {
            return SessionType::var(vars.choose(rng).unwrap().clone());
        }
        return SessionType::End;
    }
    if shape.recursion && depth < 4 && rng.gen_bool(0.2) {
        let x = format!("X{}", vars.len());
        vars.push(x.clone());
        let body = gen(rng, shape, budget, vars, false, depth + 1);
        vars.pop();
        // Keep the binder only when it is used (variables are only
        // generated under a choice, so every use is guarded).
        return if body.has_free(&x) {
            SessionType::rec(x, body)
        } else {
            body
        };
    }
    *budget -= 1;
    let pol = if rng.gen_bool(0.5) { Polarity::Internal } else { Polarity::External };
    let p = Participant::new(PARTS[rng.gen_range(0..shape.participants)]);
    let n = rng.gen_range(1..=shape.labels);
    let mut labels: Vec<&str> = LABELS[..shape.labels].to_vec();
    labels.shuffle(rng);
    let mut bs: Branches = IndexMap::new();
    for l in labels.into_iter().take(n) {
        let b = GROUNDS[rng.gen_range(0..shape.grounds)];
        let cont = gen(rng, shape, budget, vars, true, depth + 1);
        bs.insert(Label::new(l), Branch::new(b, cont));
    }
    SessionType::choice(pol, p, bs)
}

/// A pair of types that is a subtype pair with reasonable probability:
/// either unrelated, or the second derived from the first by mutations that
/// often (but not always) preserve subtyping.
pub fn random_pair(rng: &mut impl Rng, shape: TypeShape) -> (SessionType, SessionType) {
    let t = random_type(rng, shape);
    match rng.gen_range(0..4) {
        0 => (t, random_type(rng, shape)),
        1 => {
            let u = mutate(rng, &t, shape);
            (t, u)
        }
        2 => {
            let u = mutate(rng, &t, shape);
            (u, t)
        }
        _ => {
            let u = mutate(rng, &t, shape);
            let v = mutate(rng, &u, shape);
            (t, v)
        }
    }
}

/// Applies one random local mutation somewhere in `t`.
pub fn mutate(rng: &mut impl Rng, t: &SessionType, shape: TypeShape) -> SessionType {
    let n = count_choices(t).max(1);
    let target = rng.gen_range(0..n);
    let mut counter = 0;
    mutate_at(rng, t, shape, target, &mut counter)
}

fn mutate_at(rng: &mut impl Rng, t: &SessionType, shape: TypeShape, target: usize, counter: &mut usize) -> SessionType {
    match t {
        SessionType::End | SessionType::Var(_) => t.clone(),
        SessionType::Rec(x, b) => SessionType::rec(x.clone(), mutate_at(rng, b, shape, target, counter)),
        SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
            let pol = t.as_choice().unwrap().0;
            let here = *counter == target;
            *counter += 1;
            if here {
                return local_mutation(rng, pol, p, bs, shape);
            }
            let bs = bs
                .iter()
                .map(|(l, b)| (l.clone(), Branch::new(b.payload, mutate_at(rng, &b.cont, shape, target, counter))))
                .collect();
            SessionType::choice(pol, p.clone(), bs)
        }
    }
}

fn local_mutation(rng: &mut impl Rng, pol: Polarity, p: &Participant, bs: &Branches, shape: TypeShape) -> SessionType {
    let this = SessionType::choice(pol, p.clone(), bs.clone());
    match rng.gen_range(0..5) {
        // Drop a branch.
        0 if bs.len() > 1 => {
            let mut bs = bs.clone();
            let i = rng.gen_range(0..bs.len());
            bs.shift_remove_index(i);
            SessionType::choice(pol, p.clone(), bs)
        }
        // Add a branch.
        1 => {
            let mut bs = bs.clone();
            for l in &LABELS[..shape.labels] {
                if !bs.contains_key(&Label::new(*l)) {
                    bs.insert(Label::new(*l), Branch::new(GROUNDS[0], SessionType::End));
                    break;
                }
            }
            SessionType::choice(pol, p.clone(), bs)
        }
        // Swap with a single-branch child of the same polarity and a different peer.
        2 => {
            if bs.len() == 1 {
                let (l, br) = bs.get_index(0).unwrap();
                if let Some((cpol, cq, cbs)) = br.cont.as_choice() {
                    if cpol == pol && cq != p && cbs.len() == 1 {
                        let (cl, cbr) = cbs.get_index(0).unwrap();
                        let inner = SessionType::choice(pol, p.clone(), [(l.clone(), Branch::new(br.payload, cbr.cont.clone()))].into_iter().collect());
                        return SessionType::choice(cpol, cq.clone(), [(cl.clone(), Branch::new(cbr.payload, inner))].into_iter().collect());
                    }
                }
            }
            this
        }
        // Push a send to p below all branches of a choice on another peer.
        3 => {
            let q = Participant::new(PARTS[rng.gen_range(0..shape.participants)]);
            if &q == p {
                return this;
            }
            let l = Label::new(LABELS[0]);
            let b = GROUNDS[0];
            let wrapped = bs
                .iter()
                .map(|(lb, br)| {
                    let c = SessionType::choice(Polarity::Internal, q.clone(), [(l.clone(), Branch::new(b, br.cont.clone()))].into_iter().collect());
                    (lb.clone(), Branch::new(br.payload, c))
                })
                .collect();
            if rng.gen_bool(0.5) {
                SessionType::choice(pol, p.clone(), wrapped)
            } else {
                SessionType::choice(Polarity::Internal, q, [(l, Branch::new(b, this))].into_iter().collect())
            }
        }
        // Flip the polarity.
        _ => SessionType::choice(pol.dual(), p.clone(), bs.clone()),
    }
}
