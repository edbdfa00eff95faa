//! Send/receive reducts and the `Sends`/`Recvs` predicates.
//!
//! `U ⇀! U'` on `(p, ℓ, b)` states that an implementation of `U` may send
//! `ℓ(v : b)` to `p` now and continue as `U'`; `T ⇀? T'` states that an
//! implementation of `T` must accept such a message from `p`. Both relations
//! look through choices on *other* participants, which is what makes the
//! subtyping relation asynchronous.
//!
//! The subset rules (an internal choice on `q ≠ p` for sends, an external
//! choice on `q ≠ p` for receives) may keep any nonempty subset `J` of the
//! branches. Searches here always keep the largest feasible `J`; every other
//! reduct is a width-supertype/subtype of that canonical one, so it is the
//! only candidate the subtyping checker needs.
//!
//! Derivation height is bounded by a fuel parameter. The recursion rule and
//! each structural rule consume one unit; when fuel runs out the search
//! reports it, so callers can distinguish "no reduct" from "not found yet".

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::Serialize;

use crate::session::{unfold, unfold_once, Branch, Branches, Canon, GroundType, Label, Participant, Polarity, SessionType};

/// Which relation a search explores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The send relation `⇀!`.
    Send,
    /// The receive relation `⇀?`.
    Recv,
}

impl Direction {
    /// Polarity of the choice consumed by the base rule.
    pub fn base_polarity(self) -> Polarity {
        match self {
            Direction::Send => Polarity::Internal,
            Direction::Recv => Polarity::External,
        }
    }
}

/// The last rule of a reduct derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductRule {
    /// Consume the matching branch of a choice on the target participant.
    Base,
    /// Look through an internal choice (keeping a subset of branches for
    /// sends, all branches for receives).
    Oplus,
    /// Look through an external choice (all branches for sends, a subset
    /// for receives).
    Amp,
    /// Unfold a recursive binder once.
    Rec,
}

/// A derivation of `source ⇀ reduct`.
#[derive(Debug, Clone, Serialize)]
pub struct ReductDerivation {
    /// Last rule applied.
    pub rule: ReductRule,
    /// Relation derived.
    pub direction: Direction,
    /// Left-hand side of the judgement.
    #[serde(serialize_with = "crate::serde_display")]
    pub source: SessionType,
    /// Right-hand side of the judgement.
    #[serde(serialize_with = "crate::serde_display")]
    pub reduct: SessionType,
    /// For choice rules, the retained branch labels (the index set `J`),
    /// aligned with `premises`. For the base rule, the consumed label.
    pub chosen: Vec<Label>,
    /// Sub-derivations.
    pub premises: Vec<ReductDerivation>,
    /// Derivation height (base rules have height 0).
    pub height: usize,
}

/// Outcome of a canonical reduct search.
#[derive(Debug, Clone)]
pub struct ReductSearch {
    /// The canonical reduct and its derivation, if one was found.
    pub found: Option<ReductDerivation>,
    /// Whether some branch of the search ran out of fuel. When set, a larger
    /// fuel might find a reduct (if none was found) or a reduct keeping more
    /// branches (if one was).
    pub fuel_exhausted: bool,
}

impl ReductSearch {
    /// The reduct type, if found.
    pub fn reduct(&self) -> Option<&SessionType> {
        self.found.as_ref().map(|d| &d.reduct)
    }
}

/// `Sends_p(t)`: an implementation must send to `p` before waiting for any
/// message. Structural; recursion peels binders without substituting.
pub fn sends(p: &Participant, t: &SessionType) -> bool {
    match t {
        SessionType::Internal(q, bs) => q == p || bs.values().all(|b| sends(p, &b.cont)),
        SessionType::Rec(_, body) => sends(p, body),
        _ => false,
    }
}

/// `Recvs_p(t)`: an implementation may wait for a message from `p` without
/// sending anything first. Exact dual of [`sends`].
pub fn recvs(p: &Participant, t: &SessionType) -> bool {
    match t {
        SessionType::External(q, bs) => q == p || bs.values().all(|b| recvs(p, &b.cont)),
        SessionType::Rec(_, body) => recvs(p, body),
        _ => false,
    }
}

/// Searches for the canonical send reduct `t ⇀! t'` on `(p, l, b)`.
pub fn send_reduct(t: &SessionType, p: &Participant, l: &Label, b: GroundType, fuel: usize) -> ReductSearch {
    reduct(Direction::Send, t, p, l, b, fuel)
}

/// Searches for the canonical receive reduct `t ⇀? t'` on `(p, l, b)`.
pub fn recv_reduct(t: &SessionType, p: &Participant, l: &Label, b: GroundType, fuel: usize) -> ReductSearch {
    reduct(Direction::Recv, t, p, l, b, fuel)
}

/// All canonical send reducts found within `fuel` (zero or one element, as
/// the canonical choice makes derivations unique).
pub fn send_reducts(
    t: &SessionType,
    p: &Participant,
    l: &Label,
    b: GroundType,
    fuel: usize,
) -> Vec<(SessionType, ReductDerivation)> {
    send_reduct(t, p, l, b, fuel)
        .found
        .map(|d| vec![(d.reduct.clone(), d)])
        .unwrap_or_default()
}

/// All canonical receive reducts found within `fuel`; see [`send_reducts`].
pub fn recv_reducts(
    t: &SessionType,
    p: &Participant,
    l: &Label,
    b: GroundType,
    fuel: usize,
) -> Vec<(SessionType, ReductDerivation)> {
    recv_reduct(t, p, l, b, fuel)
        .found
        .map(|d| vec![(d.reduct.clone(), d)])
        .unwrap_or_default()
}

/// Canonical reduct search in either direction.
pub fn reduct(dir: Direction, t: &SessionType, p: &Participant, l: &Label, b: GroundType, fuel: usize) -> ReductSearch {
    let mut s = Searcher { dir, p, l, b, record: true, memo: HashMap::new() };
    s.search(t, fuel)
}

/// The canonical reduct alone. Same search as [`reduct`], but derivations
/// are not recorded, which saves a copy of every visited subterm on large
/// (deeply unrolled) types.
pub fn reduct_type(dir: Direction, t: &SessionType, p: &Participant, l: &Label, b: GroundType, fuel: usize) -> Option<SessionType> {
    let mut s = Searcher { dir, p, l, b, record: false, memo: HashMap::new() };
    s.search(t, fuel).found.map(|d| d.reduct)
}

struct Searcher<'a> {
    dir: Direction,
    p: &'a Participant,
    l: &'a Label,
    b: GroundType,
    /// Whether to keep sources and premises in the derivations.
    record: bool,
    memo: HashMap<(Canon, usize), ReductSearch>,
}

impl Searcher<'_> {
    fn source(&self, t: &SessionType) -> SessionType {
        if self.record {
            t.clone()
        } else {
            SessionType::End
        }
    }

    fn search(&mut self, t: &SessionType, fuel: usize) -> ReductSearch {
        // Only recursive nodes can make the search expensive; memoise them.
        if matches!(t, SessionType::Rec(..)) {
            let key = (t.canonical(), fuel);
            if let Some(hit) = self.memo.get(&key) {
                return hit.clone();
            }
            let r = self.search_uncached(t, fuel);
            self.memo.insert(key, r.clone());
            return r;
        }
        self.search_uncached(t, fuel)
    }

    fn search_uncached(&mut self, t: &SessionType, fuel: usize) -> ReductSearch {
        let none = |exhausted| ReductSearch { found: None, fuel_exhausted: exhausted };
        match t {
            SessionType::End | SessionType::Var(_) => none(false),
            SessionType::Rec(..) => {
                if fuel == 0 {
                    return none(true);
                }
                let inner = self.search(&unfold_once(t), fuel - 1);
                ReductSearch {
                    fuel_exhausted: inner.fuel_exhausted,
                    found: inner.found.map(|d| ReductDerivation {
                        rule: ReductRule::Rec,
                        direction: self.dir,
                        source: self.source(t),
                        reduct: d.reduct.clone(),
                        chosen: Vec::new(),
                        height: d.height + 1,
                        premises: if self.record { vec![d] } else { Vec::new() },
                    }),
                }
            }
            SessionType::Internal(q, bs) | SessionType::External(q, bs) => {
                let pol = if matches!(t, SessionType::Internal(..)) { Polarity::Internal } else { Polarity::External };
                if pol == self.dir.base_polarity() {
                    if q == self.p {
                        // Base rule only: the subset rule requires q ≠ p.
                        return match bs.get(self.l) {
                            Some(br) if br.payload == self.b => ReductSearch {
                                found: Some(ReductDerivation {
                                    rule: ReductRule::Base,
                                    direction: self.dir,
                                    source: self.source(t),
                                    reduct: br.cont.clone(),
                                    chosen: vec![self.l.clone()],
                                    premises: Vec::new(),
                                    height: 0,
                                }),
                                fuel_exhausted: false,
                            },
                            _ => none(false),
                        };
                    }
                    self.subset_rule(t, pol, q, bs, fuel)
                } else {
                    self.all_rule(t, pol, q, bs, fuel)
                }
            }
        }
    }

    /// Subset rule: keep the maximal nonempty set of branches that reduce.
    fn subset_rule(&mut self, t: &SessionType, pol: Polarity, q: &Participant, bs: &Branches, fuel: usize) -> ReductSearch {
        if fuel == 0 {
            return ReductSearch { found: None, fuel_exhausted: true };
        }
        let mut exhausted = false;
        let mut kept: Branches = IndexMap::new();
        let mut chosen = Vec::new();
        let mut premises = Vec::new();
        for (lab, br) in bs {
            let r = self.search(&br.cont, fuel - 1);
            exhausted |= r.fuel_exhausted;
            if let Some(d) = r.found {
                kept.insert(lab.clone(), Branch::new(br.payload, d.reduct.clone()));
                chosen.push(lab.clone());
                premises.push(d);
            }
        }
        if kept.is_empty() {
            return ReductSearch { found: None, fuel_exhausted: exhausted };
        }
        let height = 1 + premises.iter().map(|d| d.height).max().unwrap_or(0);
        if !self.record {
            premises.clear();
        }
        ReductSearch {
            found: Some(ReductDerivation {
                rule: rule_for(pol),
                direction: self.dir,
                source: self.source(t),
                reduct: SessionType::choice(pol, q.clone(), kept),
                chosen,
                premises,
                height,
            }),
            fuel_exhausted: exhausted,
        }
    }

    /// All-branches rule: every branch must reduce.
    fn all_rule(&mut self, t: &SessionType, pol: Polarity, q: &Participant, bs: &Branches, fuel: usize) -> ReductSearch {
        if fuel == 0 {
            return ReductSearch { found: None, fuel_exhausted: true };
        }
        let mut exhausted = false;
        let mut kept: Branches = IndexMap::new();
        let mut chosen = Vec::new();
        let mut premises = Vec::new();
        for (lab, br) in bs {
            let r = self.search(&br.cont, fuel - 1);
            exhausted |= r.fuel_exhausted;
            match r.found {
                Some(d) => {
                    kept.insert(lab.clone(), Branch::new(br.payload, d.reduct.clone()));
                    chosen.push(lab.clone());
                    premises.push(d);
                }
                None => return ReductSearch { found: None, fuel_exhausted: exhausted },
            }
        }
        let height = 1 + premises.iter().map(|d| d.height).max().unwrap_or(0);
        if !self.record {
            premises.clear();
        }
        ReductSearch {
            found: Some(ReductDerivation {
                rule: rule_for(pol),
                direction: self.dir,
                source: self.source(t),
                reduct: SessionType::choice(pol, q.clone(), kept),
                chosen,
                premises,
                height,
            }),
            fuel_exhausted: exhausted,
        }
    }
}

fn rule_for(pol: Polarity) -> ReductRule {
    match pol {
        Polarity::Internal => ReductRule::Oplus,
        Polarity::External => ReductRule::Amp,
    }
}

/// Extracts the receive prefix of `t` for `p`: the external choice on `p`
/// that an implementation may wait on, with the choices on other
/// participants that precede it pushed into its continuations.
///
/// Returns `Some` exactly when `recvs(p, t)` holds (and labels reached along
/// different paths agree on their payload types).
pub fn recv_prefix(t: &SessionType, p: &Participant) -> Option<Branches> {
    if !recvs(p, t) {
        return None;
    }
    prefix(Polarity::External, t, p)
}

/// Extracts the send prefix of `t` for `p`; dual of [`recv_prefix`].
pub fn send_prefix(t: &SessionType, p: &Participant) -> Option<Branches> {
    if !sends(p, t) {
        return None;
    }
    prefix(Polarity::Internal, t, p)
}

fn prefix(pol: Polarity, t: &SessionType, p: &Participant) -> Option<Branches> {
    let t = unfold(t);
    let (tpol, q, bs) = t.as_choice()?;
    if tpol != pol {
        return None;
    }
    if q == p {
        return Some(bs.clone());
    }
    // Inductive case: every branch of the choice on q has a p-prefix; the
    // result branches on p first, and on the q-branches that offer each label.
    let mut per_branch: Vec<(Label, GroundType, Branches)> = Vec::new();
    for (lq, br) in bs {
        per_branch.push((lq.clone(), br.payload, prefix(pol, &br.cont, p)?));
    }
    let mut out: Branches = IndexMap::new();
    let mut payloads: IndexMap<Label, GroundType> = IndexMap::new();
    for (_, _, inner) in &per_branch {
        for (l, br) in inner {
            match payloads.get(l) {
                Some(b) if *b != br.payload => return None,
                Some(_) => {}
                None => {
                    payloads.insert(l.clone(), br.payload);
                }
            }
        }
    }
    for (l, b) in payloads {
        let mut q_branches: Branches = IndexMap::new();
        for (lq, bq, inner) in &per_branch {
            if let Some(br) = inner.get(&l) {
                q_branches.insert(lq.clone(), Branch::new(*bq, br.cont.clone()));
            }
        }
        out.insert(l, Branch::new(b, SessionType::choice(pol, q.clone(), q_branches)));
    }
    Some(out)
}
