//! Brute-force subtyping oracle for recursion-free session types, via
//! single-input/single-output (SISO) decompositions.
//!
//! An SO decomposition keeps one branch of every internal choice; an SI
//! decomposition keeps one branch of every external choice. A SISO type has
//! exactly one branch everywhere and is a finite sequence of actions.
//! Refinement `≲` on SISO types allows a receive from `p` to be anticipated
//! past receives from other participants (prefix `A⁽ᵖ⁾`), and a send to `p`
//! to be anticipated past arbitrary receives and sends to other
//! participants (prefix `B⁽ᵖ⁾`), provided the set of participants/directions
//! involved is unchanged.
//!
//! `T` is then a subtype of `U` iff every SO decomposition of `T` and SI
//! decomposition of `U` admit an SI decomposition `T″` of the former and SO
//! decomposition `U″` of the latter with `T″ ≲ U″`.
//!
//! All sets are finite because the inputs contain no recursion; the oracle is
//! exponential and meant for small types only.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::session::{Branch, Canon, GroundType, Label, Participant, Polarity, SessionType};

/// Input rejected by the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SisoError {
    /// The type contains `rec` or a type variable.
    #[error("the SISO oracle requires recursion-free closed types, got {0}")]
    Recursive(String),
    /// A type given to [`actset`] has a choice with more than one branch.
    #[error("expected a single-input single-output type, got {0}")]
    NotSiso(String),
}

/// One action of a SISO type: a send to (`!`) or receive from (`?`) a participant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Act {
    /// The peer participant.
    pub peer: Participant,
    /// Direction of the action.
    pub polarity: Polarity,
}

impl std::fmt::Display for Act {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = match self.polarity {
            Polarity::Internal => '!',
            Polarity::External => '?',
        };
        write!(f, "{}{}", self.peer, mark)
    }
}

fn require_mu_free(t: &SessionType) -> Result<(), SisoError> {
    if t.has_rec() || !t.is_closed() || contains_var(t) {
        return Err(SisoError::Recursive(t.to_string()));
    }
    Ok(())
}

fn contains_var(t: &SessionType) -> bool {
    match t {
        SessionType::End => false,
        SessionType::Var(_) => true,
        SessionType::Rec(_, b) => contains_var(b),
        SessionType::Internal(_, bs) | SessionType::External(_, bs) => bs.values().any(|b| contains_var(&b.cont)),
    }
}

/// The SO decompositions of `t`: one branch of each internal choice.
pub fn soset(t: &SessionType) -> Result<Vec<SessionType>, SisoError> {
    require_mu_free(t)?;
    Ok(decompose(t, Polarity::Internal))
}

/// The SI decompositions of `t`: one branch of each external choice.
pub fn siset(t: &SessionType) -> Result<Vec<SessionType>, SisoError> {
    require_mu_free(t)?;
    Ok(decompose(t, Polarity::External))
}

/// Decomposes by splitting choices of polarity `split` and keeping the
/// others whole. Results are deduplicated, in first-seen order.
fn decompose(t: &SessionType, split: Polarity) -> Vec<SessionType> {
    let out = match t {
        SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
            let pol = if matches!(t, SessionType::Internal(..)) { Polarity::Internal } else { Polarity::External };
            if pol == split {
                let mut out = Vec::new();
                for (l, br) in bs {
                    for c in decompose(&br.cont, split) {
                        out.push(SessionType::choice(pol, p.clone(), [(l.clone(), Branch::new(br.payload, c))].into_iter().collect()));
                    }
                }
                out
            } else {
                // Cartesian product over branches.
                let mut acc: Vec<Vec<(Label, GroundType, SessionType)>> = vec![Vec::new()];
                for (l, br) in bs {
                    let subs = decompose(&br.cont, split);
                    let mut next = Vec::with_capacity(acc.len() * subs.len());
                    for prefix in &acc {
                        for s in &subs {
                            let mut v = prefix.clone();
                            v.push((l.clone(), br.payload, s.clone()));
                            next.push(v);
                        }
                    }
                    acc = next;
                }
                acc.into_iter()
                    .map(|v| SessionType::choice(pol, p.clone(), v.into_iter().map(|(l, b, c)| (l, Branch::new(b, c))).collect()))
                    .collect()
            }
        }
        other => vec![other.clone()],
    };
    dedup(out)
}

fn dedup(v: Vec<SessionType>) -> Vec<SessionType> {
    let mut seen = BTreeSet::new();
    v.into_iter().filter(|t| seen.insert(t.to_string())).collect()
}

/// Participants and directions occurring in a SISO type.
pub fn actset(t: &SessionType) -> Result<BTreeSet<Act>, SisoError> {
    let mut out = BTreeSet::new();
    let mut cur = t;
    loop {
        match cur {
            SessionType::End => return Ok(out),
            SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
                if bs.len() != 1 {
                    return Err(SisoError::NotSiso(t.to_string()));
                }
                let polarity = if matches!(cur, SessionType::Internal(..)) { Polarity::Internal } else { Polarity::External };
                out.insert(Act { peer: p.clone(), polarity });
                cur = &bs[0].cont;
            }
            _ => return Err(SisoError::Recursive(t.to_string())),
        }
    }
}

/// A SISO type as a flat action sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Step {
    polarity: Polarity,
    peer: Participant,
    label: Label,
    payload: GroundType,
}

fn flatten(t: &SessionType) -> Result<Vec<Step>, SisoError> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            SessionType::End => return Ok(out),
            SessionType::Internal(p, bs) | SessionType::External(p, bs) => {
                if bs.len() != 1 {
                    return Err(SisoError::NotSiso(t.to_string()));
                }
                let polarity = if matches!(cur, SessionType::Internal(..)) { Polarity::Internal } else { Polarity::External };
                let (l, br) = bs.get_index(0).expect("nonempty");
                out.push(Step { polarity, peer: p.clone(), label: l.clone(), payload: br.payload });
                cur = &br.cont;
            }
            _ => return Err(SisoError::Recursive(t.to_string())),
        }
    }
}

fn acts(steps: &[Step]) -> BTreeSet<Act> {
    steps.iter().map(|s| Act { peer: s.peer.clone(), polarity: s.polarity }).collect()
}

/// Refinement `t ≲ u` on SISO types.
pub fn refines(t: &SessionType, u: &SessionType) -> Result<bool, SisoError> {
    let t = flatten(t)?;
    let u = flatten(u)?;
    Ok(refine_steps(&t, &u))
}

fn refine_steps(t: &[Step], u: &[Step]) -> bool {
    let Some((head, t_rest)) = t.split_first() else {
        return u.is_empty();
    };
    // Locate the action of `u` that matches `head`, skipping a prefix that
    // `head` may overtake: receives from other participants (A-prefix) for a
    // receive; receives from anyone and sends to others (B-prefix) for a send.
    let mut idx = None;
    for (i, s) in u.iter().enumerate() {
        let matches_head = s.polarity == head.polarity && s.peer == head.peer;
        if matches_head {
            idx = Some(i);
            break;
        }
        let skippable = match head.polarity {
            Polarity::External => s.polarity == Polarity::External,
            Polarity::Internal => true,
        };
        if !skippable {
            return false;
        }
    }
    let Some(i) = idx else { return false };
    let target = &u[i];
    if target.label != head.label || target.payload != head.payload {
        return false;
    }
    let mut u_rest: Vec<Step> = u[..i].to_vec();
    u_rest.extend_from_slice(&u[i + 1..]);
    if i > 0 && acts(t_rest) != acts(&u_rest) {
        return false;
    }
    refine_steps(t_rest, &u_rest)
}

/// Decides subtyping of recursion-free closed types through SISO
/// decompositions.
pub fn siso_subtype_oracle(t: &SessionType, u: &SessionType) -> Result<bool, SisoError> {
    require_mu_free(t)?;
    require_mu_free(u)?;
    let mut memo: HashMap<(Canon, Canon), bool> = HashMap::new();
    for t1 in decompose(t, Polarity::Internal) {
        let t_si: Vec<(Canon, Vec<Step>)> = decompose(&t1, Polarity::External)
            .iter()
            .map(|t2| flatten(t2).map(|steps| (t2.canonical(), steps)))
            .collect::<Result<_, _>>()?;
        for u1 in decompose(u, Polarity::External) {
            let u_so = decompose(&u1, Polarity::Internal);
            let mut ok = false;
            'search: for (t2_key, t2) in &t_si {
                for u2 in &u_so {
                    let key = (t2_key.clone(), u2.canonical());
                    let r = match memo.get(&key) {
                        Some(r) => *r,
                        None => {
                            let r = refine_steps(t2, &flatten(u2)?);
                            memo.insert(key, r);
                            r
                        }
                    };
                    if r {
                        ok = true;
                        break 'search;
                    }
                }
            }
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
