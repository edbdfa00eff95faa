//! Law checkers for the reduct relations and the session-type monoid.
//!
//! The reduct laws are existential ("there is some U′"), while the library
//! only surfaces canonical reducts. The checkers therefore use an
//! independent, exhaustive enumerator of *all* reducts derivable within a
//! height bound, written directly from the inference rules.

use std::collections::{BTreeMap, BTreeSet};

use mpstc_core::{
    multiply, reduct, recvs, sends, unfold, unfold_once, Branch, Branches, Canon, Polarity, Direction, GroundType, Label, Participant, SessionType,
};

use super::programs::triples;

/// A set of session types up to alpha-equivalence.
pub type TypeSet = BTreeMap<Canon, SessionType>;

fn singleton(t: SessionType) -> TypeSet {
    let mut s = TypeSet::new();
    s.insert(t.canonical(), t);
    s
}

/// Every `t′` with `t ⇀ t′` (in direction `dir`) by a derivation of height
/// at most `fuel`, where `rec` and the structural rules each count one.
pub fn all_reducts(dir: Direction, t: &SessionType, p: &Participant, l: &Label, b: GroundType, fuel: usize) -> TypeSet {
    let mut memo = BTreeMap::new();
    enumerate(dir, t, p, l, b, fuel, &mut memo)
}

fn enumerate(
    dir: Direction,
    t: &SessionType,
    p: &Participant,
    l: &Label,
    b: GroundType,
    fuel: usize,
    memo: &mut BTreeMap<(Canon, usize), TypeSet>,
) -> TypeSet {
    let key = (t.canonical(), fuel);
    if let Some(s) = memo.get(&key) {
        return s.clone();
    }
    let mut out = TypeSet::new();
    let own = |t| choice_of(t, dir.base_polarity());
    let other = |t| choice_of(t, dir.base_polarity().dual());
    match t {
        SessionType::End | SessionType::Var(_) => {}
        SessionType::Rec(..) => {
            if fuel > 0 {
                out = enumerate(dir, &unfold_once(t), p, l, b, fuel - 1, memo);
            }
        }
        _ => {
            if let Some((q, bs)) = own(t) {
                // Base rule: the message itself.
                if q == p {
                    if let Some(br) = bs.get(l) {
                        if br.payload == b {
                            out.extend(singleton(br.cont.clone()));
                        }
                    }
                }
                // Same-polarity choice on another participant: any nonempty
                // subset of the branches, each reduced.
                if q != p && fuel > 0 {
                    let per: Vec<(Label, GroundType, TypeSet)> =
                        bs.iter().map(|(l2, br)| (l2.clone(), br.payload, enumerate(dir, &br.cont, p, l, b, fuel - 1, memo))).collect();
                    let n = per.len();
                    for mask in 1u32..(1 << n) {
                        let chosen: Vec<&(Label, GroundType, TypeSet)> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &per[i]).collect();
                        for combo in product(&chosen) {
                            let branches = combo.into_iter().map(|(l2, g, c)| (l2, Branch::new(g, c))).collect();
                            let u = SessionType::choice(t.as_choice().unwrap().0, q.clone(), branches);
                            out.insert(u.canonical(), u);
                        }
                    }
                }
            } else if let Some((q, bs)) = other(t) {
                // Opposite-polarity choice: every branch must reduce.
                if fuel > 0 {
                    let per: Vec<(Label, GroundType, TypeSet)> =
                        bs.iter().map(|(l2, br)| (l2.clone(), br.payload, enumerate(dir, &br.cont, p, l, b, fuel - 1, memo))).collect();
                    let all: Vec<&(Label, GroundType, TypeSet)> = per.iter().collect();
                    for combo in product(&all) {
                        let branches = combo.into_iter().map(|(l2, g, c)| (l2, Branch::new(g, c))).collect();
                        let u = SessionType::choice(t.as_choice().unwrap().0, q.clone(), branches);
                        out.insert(u.canonical(), u);
                    }
                }
            }
        }
    }
    memo.insert(key, out.clone());
    out
}

/// The participant and branches of `t` if it is a choice of polarity `pol`.
fn choice_of(t: &SessionType, pol: Polarity) -> Option<(&Participant, &Branches)> {
    t.as_choice().filter(|(k, _, _)| *k == pol).map(|(_, q, bs)| (q, bs))
}

/// Cartesian product of the per-branch reduct sets.
fn product(per: &[&(Label, GroundType, TypeSet)]) -> Vec<Vec<(Label, GroundType, SessionType)>> {
    let mut acc: Vec<Vec<(Label, GroundType, SessionType)>> = vec![Vec::new()];
    for (l, g, set) in per {
        let mut next = Vec::new();
        for prefix in &acc {
            for t in set.values() {
                let mut v = prefix.clone();
                v.push((l.clone(), *g, t.clone()));
                next.push(v);
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    acc
}

fn leading_recs(t: &SessionType) -> usize {
    match t {
        SessionType::Rec(_, b) => 1 + leading_recs(b),
        _ => 0,
    }
}

fn participants(t: &SessionType) -> Vec<Participant> {
    let mut ps: BTreeSet<Participant> = t.participants();
    for p in ["p", "q", "r"] {
        ps.insert(Participant::new(p));
    }
    ps.into_iter().collect()
}

type Triple = (Participant, Label, GroundType);

fn all_triples(t: &SessionType) -> Vec<(Direction, Triple)> {
    let mut out: Vec<(Direction, Triple)> = triples(t, true).into_iter().map(|x| (Direction::Send, x)).collect();
    out.extend(triples(t, false).into_iter().map(|x| (Direction::Recv, x)));
    // One triple the type never mentions, to exercise the negative case.
    out.push((Direction::Send, (Participant::new("p"), Label::new("z"), GroundType::Unit)));
    out
}

/// Outcome of a law check: how many nonvacuous instances were checked.
pub type LawResult = Result<usize, String>;

/// Unfold-invariance: `Sends`/`Recvs` and both reduct relations are the same
/// for `t` and `unfold(t)`, both for the canonical search (with one extra
/// unit of fuel per leading `rec`) and for the full relation.
pub fn unfold_invariance(t: &SessionType, fuel: usize) -> LawResult {
    let u = unfold(t);
    let k = leading_recs(t);
    let mut n = 0;
    for p in participants(t) {
        if sends(&p, t) != sends(&p, &u) {
            return Err(format!("sends({p}) differs on {t} and its unfolding {u}"));
        }
        if recvs(&p, t) != recvs(&p, &u) {
            return Err(format!("recvs({p}) differs on {t} and its unfolding {u}"));
        }
        n += 1;
    }
    for (dir, (p, l, b)) in all_triples(t) {
        let a = reduct(dir, t, &p, &l, b, fuel + k);
        let c = reduct(dir, &u, &p, &l, b, fuel);
        let same = match (a.reduct(), c.reduct()) {
            (Some(x), Some(y)) => x.alpha_eq(y),
            (None, None) => a.fuel_exhausted == c.fuel_exhausted,
            _ => false,
        };
        if !same {
            return Err(format!("canonical {dir:?} reduct for {p}:{l}({b}) differs on {t} and {u}: {:?} vs {:?}", a.reduct(), c.reduct()));
        }
        let sa = all_reducts(dir, t, &p, &l, b, ENUM + k);
        let sc = all_reducts(dir, &u, &p, &l, b, ENUM);
        if sa.keys().ne(sc.keys()) {
            return Err(format!("{dir:?} reducts for {p}:{l}({b}) differ on {t} ({}) and {u} ({})", sa.len(), sc.len()));
        }
        if let Some(x) = reduct(dir, t, &p, &l, b, ENUM + k).reduct() {
            // The canonical reduct is a reduct.
            if !sa.contains_key(&x.canonical()) {
                return Err(format!("canonical reduct {x} of {t} is not derivable"));
            }
        }
        n += 1;
    }
    Ok(n)
}

/// Height bound for the exhaustive enumerations in the unfolding check.
const ENUM: usize = 6;

/// Bounds for the swapping checks: the premise derivations have height at
/// most `FIRST`; the conclusion may use up to `SECOND`.
const FIRST: usize = 5;
const SECOND: usize = 10;
/// At most this many premise instances are checked per pair of triples.
const PER_PAIR: usize = 4;

/// Swapping: reductions on distinct participants in the same direction
/// commute, and a send reduction commutes with any receive reduction.
/// Returns the number of nonvacuous instances checked.
pub fn swapping(t: &SessionType) -> LawResult {
    let ts = all_triples(t);
    let mut n = 0;
    for (d1, a) in &ts {
        for (d2, c) in &ts {
            if d1 == d2 {
                // Same direction, distinct participants: t ⇀a u1 ⇀c u12
                // implies t ⇀c u′ ⇀a u12 for some u′.
                if a.0 == c.0 {
                    continue;
                }
                let firsts = all_reducts(*d1, t, &a.0, &a.1, a.2, FIRST);
                let mut checked = 0;
                'outer: for u1 in firsts.values() {
                    for u12 in all_reducts(*d2, u1, &c.0, &c.1, c.2, FIRST).into_values() {
                        let ok = all_reducts(*d2, t, &c.0, &c.1, c.2, SECOND)
                            .values()
                            .any(|u2| all_reducts(*d1, u2, &a.0, &a.1, a.2, SECOND).contains_key(&u12.canonical()));
                        if !ok {
                            return Err(format!("{t}: {d1:?} {a:?} then {d2:?} {c:?} reaches {u12}, not reachable in the opposite order"));
                        }
                        checked += 1;
                        if checked >= PER_PAIR {
                            break 'outer;
                        }
                    }
                }
                n += (checked > 0) as usize;
            } else if *d1 == Direction::Send {
                // t ⇀!a u and t ⇀?c t′ imply t′ ⇀!a u′ and u ⇀?c u′.
                let sends_ = all_reducts(Direction::Send, t, &a.0, &a.1, a.2, FIRST);
                let recvs_ = all_reducts(Direction::Recv, t, &c.0, &c.1, c.2, FIRST);
                let mut checked = 0;
                'outer2: for u in sends_.values() {
                    let from_u = all_reducts(Direction::Recv, u, &c.0, &c.1, c.2, SECOND);
                    for t2 in recvs_.values() {
                        let from_t2 = all_reducts(Direction::Send, t2, &a.0, &a.1, a.2, SECOND);
                        if !from_t2.keys().any(|k| from_u.contains_key(k)) {
                            return Err(format!("{t}: send {a:?} gives {u}, receive {c:?} gives {t2}, and they have no common reduct"));
                        }
                        checked += 1;
                        if checked >= PER_PAIR {
                            break 'outer2;
                        }
                    }
                }
                n += (checked > 0) as usize;
            }
        }
    }
    Ok(n)
}

/// Multiplication compatibility: `Sends`, `Recvs`, and both reduct relations
/// are preserved by multiplying on the right, with the reduct multiplied
/// too; the canonical search agrees.
pub fn multiplication(t: &SessionType, t2: &SessionType, fuel: usize) -> LawResult {
    let tt = multiply(t, t2);
    let mut n = 0;
    for p in participants(t) {
        if sends(&p, t) && !sends(&p, &tt) {
            return Err(format!("sends({p}) holds for {t} but not for {tt}"));
        }
        if recvs(&p, t) && !recvs(&p, &tt) {
            return Err(format!("recvs({p}) holds for {t} but not for {tt}"));
        }
    }
    for (dir, (p, l, b)) in all_triples(t) {
        let rs = all_reducts(dir, t, &p, &l, b, FIRST);
        if rs.is_empty() {
            continue;
        }
        let products = all_reducts(dir, &tt, &p, &l, b, FIRST);
        for u in rs.values() {
            let ut = multiply(u, t2);
            if !products.contains_key(&ut.canonical()) {
                return Err(format!("{t} ⇀ {u} ({dir:?} {p}:{l}({b})) but {tt} does not reduce to {ut}"));
            }
        }
        if reduct(dir, t, &p, &l, b, fuel).found.is_some() && reduct(dir, &tt, &p, &l, b, fuel).found.is_none() {
            return Err(format!("canonical {dir:?} reduct for {p}:{l}({b}) exists for {t} but not for {tt}"));
        }
        n += 1;
    }
    Ok(n)
}

/// The monoid laws for `(·, end)`, up to alpha-equivalence.
pub fn monoid(t: &SessionType, u: &SessionType, v: &SessionType) -> Result<(), String> {
    let end = SessionType::End;
    let l = multiply(&end, t);
    if !l.alpha_eq(t) {
        return Err(format!("end · {t} = {l}"));
    }
    let r = multiply(t, &end);
    if !r.alpha_eq(t) {
        return Err(format!("{t} · end = {r}"));
    }
    let a = multiply(&multiply(t, u), v);
    let b = multiply(t, &multiply(u, v));
    if !a.alpha_eq(&b) {
        return Err(format!("({t} · {u}) · {v} = {a} but {t} · ({u} · {v}) = {b}"));
    }
    Ok(())
}
