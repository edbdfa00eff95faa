//! Fuel-bounded coinductive checker for asynchronous subtyping `T <:_Θ U`.
//!
//! The relation is the largest one satisfying five clauses, each looking at
//! the outermost constructor of an unfolding:
//!
//! 1. `unfold(T) = +p{ℓᵢ(bᵢ).Tᵢ}` ⇒ each `U ⇀!(p,ℓᵢ,bᵢ) Uᵢ` with `Tᵢ <: Uᵢ`;
//! 2. `unfold(T) = &p{…}` ⇒ `Recvs_p(U)`;
//! 3. `unfold(U) = +p{…}` ⇒ `Sends_p(T)`;
//! 4. `unfold(U) = &p{ℓᵢ(bᵢ).Uᵢ}` ⇒ each `T ⇀?(p,ℓᵢ,bᵢ) Tᵢ` with `Tᵢ <: Uᵢ`;
//! 5. for `X ∈ Θ`, `unfold(T) = X` iff `unfold(U) = X`.
//!
//! Existential reduct choices are resolved with the canonical (maximal)
//! reducts of [`crate::relations`], which turns every clause into a
//! conjunction of obligations. The checker explores obligations depth-first
//! and treats a revisited pair as satisfied (greatest fixpoint). Because
//! all obligations are conjunctive, a single global visited set is sound.
//!
//! Reduct searches are fuel bounded, so the verdict is three-valued: a
//! failure is only reported as [`SubtypeVerdict::Disproven`] when no search
//! on the path to it ran out of fuel.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::relations::{recv_reduct, recvs, send_reduct, sends, ReductSearch};
use crate::session::{unfold, Canon, Polarity, SessionType};

/// Default fuel for reduct searches.
pub const DEFAULT_FUEL: usize = 16;
/// Default bound on the number of explored type pairs.
pub const DEFAULT_MAX_PAIRS: usize = 512;

/// Resource bounds for [`subtype_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtypeOptions {
    /// Maximum derivation height of each reduct search.
    pub fuel: usize,
    /// Maximum number of distinct pairs explored before giving up.
    pub max_pairs: usize,
}

impl Default for SubtypeOptions {
    fn default() -> Self {
        SubtypeOptions { fuel: DEFAULT_FUEL, max_pairs: DEFAULT_MAX_PAIRS }
    }
}

impl SubtypeOptions {
    /// Default options with the given reduct fuel.
    pub fn with_fuel(fuel: usize) -> Self {
        SubtypeOptions { fuel, ..Self::default() }
    }
}

/// A pair of session types, printed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairText {
    /// Candidate subtype.
    pub sub: String,
    /// Candidate supertype.
    pub sup: String,
}

impl PairText {
    fn of(t: &SessionType, u: &SessionType) -> Self {
        PairText { sub: t.to_string(), sup: u.to_string() }
    }
}

impl fmt::Display for PairText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <: {}", self.sub, self.sup)
    }
}

/// One obligation on the path from the root pair to a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathStep {
    /// The clause that generated the obligation (1 or 4).
    pub clause: u8,
    /// The message the reduct was taken on, e.g. `q!cont(int)`.
    pub action: String,
    /// The resulting pair.
    pub pair: PairText,
}

impl fmt::Display for PathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause ({}) on {}: {}", self.clause, self.action, self.pair)
    }
}

/// A failed obligation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    /// Obligations leading from the root to the failing pair.
    pub path: Vec<PathStep>,
    /// The failing pair.
    pub pair: PairText,
    /// The clause that fails (1–5).
    pub clause: u8,
    /// Human-readable reason.
    pub reason: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.path {
            writeln!(f, "  {step}")?;
        }
        write!(f, "  clause ({}) fails for {}: {}", self.clause, self.pair, self.reason)
    }
}

/// Result of a subtyping query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum SubtypeVerdict {
    /// A pre-simulation containing the root pair was found; `witness` lists
    /// its pairs in discovery order.
    Proven {
        /// The pairs of the closed pre-simulation.
        witness: Vec<PairText>,
    },
    /// Some obligation fails and no search on its path ran out of fuel.
    Disproven {
        /// The failing obligation.
        failure: Failure,
    },
    /// No failure could be certified within the resource bounds.
    Unknown {
        /// Obligations that could not be settled.
        frontier: Vec<Failure>,
    },
}

impl SubtypeVerdict {
    /// Whether the verdict is [`SubtypeVerdict::Proven`].
    pub fn is_proven(&self) -> bool {
        matches!(self, SubtypeVerdict::Proven { .. })
    }

    /// Whether the verdict is [`SubtypeVerdict::Disproven`].
    pub fn is_disproven(&self) -> bool {
        matches!(self, SubtypeVerdict::Disproven { .. })
    }

    /// Short lowercase name of the verdict.
    pub fn name(&self) -> &'static str {
        match self {
            SubtypeVerdict::Proven { .. } => "proven",
            SubtypeVerdict::Disproven { .. } => "disproven",
            SubtypeVerdict::Unknown { .. } => "unknown",
        }
    }

    /// Multi-line explanation: the witness pairs, or the failing clause.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        match self {
            SubtypeVerdict::Proven { witness } => {
                out.push_str("proven; pre-simulation:\n");
                for p in witness {
                    out.push_str(&format!("  {p}\n"));
                }
            }
            SubtypeVerdict::Disproven { failure } => {
                out.push_str("disproven:\n");
                out.push_str(&failure.to_string());
                out.push('\n');
            }
            SubtypeVerdict::Unknown { frontier } => {
                out.push_str("unknown (resource bound reached; raise --fuel):\n");
                for f in frontier {
                    out.push_str(&f.to_string());
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Checks `t <:_Θ u` with default resource bounds.
pub fn subtype(t: &SessionType, u: &SessionType, theta: &BTreeSet<String>, fuel: usize) -> SubtypeVerdict {
    subtype_with(t, u, theta, SubtypeOptions::with_fuel(fuel))
}

/// Checks `t <: u` for closed types with default bounds.
pub fn is_subtype(t: &SessionType, u: &SessionType) -> bool {
    subtype(t, u, &BTreeSet::new(), DEFAULT_FUEL).is_proven()
}

/// Checks `t <:_Θ u` with explicit bounds.
pub fn subtype_with(t: &SessionType, u: &SessionType, theta: &BTreeSet<String>, opts: SubtypeOptions) -> SubtypeVerdict {
    let mut c = Checker {
        theta,
        opts,
        visited: HashSet::new(),
        witness: Vec::new(),
        unknown: Vec::new(),
        disproven: None,
        pair_limit_hit: false,
    };
    c.check(t, u, &mut Vec::new(), false);
    if let Some(failure) = c.disproven {
        return SubtypeVerdict::Disproven { failure };
    }
    if !c.unknown.is_empty() || c.pair_limit_hit {
        if c.pair_limit_hit {
            c.unknown.push(Failure {
                path: Vec::new(),
                pair: PairText::of(t, u),
                clause: 0,
                reason: format!("explored more than {} pairs", opts.max_pairs),
            });
        }
        return SubtypeVerdict::Unknown { frontier: c.unknown };
    }
    SubtypeVerdict::Proven { witness: c.witness }
}

struct Checker<'a> {
    theta: &'a BTreeSet<String>,
    opts: SubtypeOptions,
    visited: HashSet<(Canon, Canon)>,
    witness: Vec<PairText>,
    unknown: Vec<Failure>,
    disproven: Option<Failure>,
    pair_limit_hit: bool,
}

impl Checker<'_> {
    fn done(&self) -> bool {
        self.disproven.is_some() || self.pair_limit_hit
    }

    fn fail(&mut self, path: &[PathStep], t: &SessionType, u: &SessionType, clause: u8, reason: String, tainted: bool) {
        let failure = Failure { path: path.to_vec(), pair: PairText::of(t, u), clause, reason };
        if tainted {
            self.unknown.push(failure);
        } else if self.disproven.is_none() {
            self.disproven = Some(failure);
        }
    }

    /// Explores the obligation `t <: u`. `tainted` records whether a reduct
    /// search on the path here ran out of fuel.
    fn check(&mut self, t: &SessionType, u: &SessionType, path: &mut Vec<PathStep>, tainted: bool) {
        if self.done() {
            return;
        }
        let key = (t.canonical(), u.canonical());
        if self.visited.contains(&key) {
            return;
        }
        if self.visited.len() >= self.opts.max_pairs {
            self.pair_limit_hit = true;
            return;
        }
        self.visited.insert(key);
        self.witness.push(PairText::of(t, u));

        let ut = unfold(t);
        let uu = unfold(u);

        // Clause 5.
        for x in self.theta {
            let tx = matches!(&ut, SessionType::Var(y) if y == x);
            let ux = matches!(&uu, SessionType::Var(y) if y == x);
            if tx != ux {
                let reason = format!("only one side unfolds to the variable {x}");
                self.fail(path, t, u, 5, reason, tainted);
                return;
            }
        }

        // Clauses 2 and 3 are plain predicate checks.
        if let Some((Polarity::External, p, _)) = ut.as_choice() {
            if !recvs(p, u) {
                self.fail(path, t, u, 2, format!("Recvs_{p} fails on the supertype"), tainted);
                return;
            }
        }
        if let Some((Polarity::Internal, p, _)) = uu.as_choice() {
            if !sends(p, t) {
                self.fail(path, t, u, 3, format!("Sends_{p} fails on the subtype"), tainted);
                return;
            }
        }

        // Clause 1: every send offered by the subtype must be simulated.
        if let Some((Polarity::Internal, p, bs)) = ut.as_choice() {
            for (l, br) in bs {
                let s = send_reduct(u, p, l, br.payload, self.opts.fuel);
                let action = format!("{p}!{l}({})", br.payload);
                self.descend(1, action, s, &br.cont, None, t, u, path, tainted);
                if self.done() {
                    return;
                }
            }
        }

        // Clause 4: every receive demanded by the supertype must be honoured.
        if let Some((Polarity::External, p, bs)) = uu.as_choice() {
            for (l, br) in bs {
                let s = recv_reduct(t, p, l, br.payload, self.opts.fuel);
                let action = format!("{p}?{l}({})", br.payload);
                self.descend(4, action, s, &br.cont, Some(()), t, u, path, tainted);
                if self.done() {
                    return;
                }
            }
        }
    }

    /// Follows a clause (1) or (4) obligation. For clause 1 the reduct
    /// belongs to the supertype (`reduct_on_sub` is `None`); for clause 4 it
    /// belongs to the subtype.
    #[allow(clippy::too_many_arguments)]
    fn descend(
        &mut self,
        clause: u8,
        action: String,
        search: ReductSearch,
        other: &SessionType,
        reduct_on_sub: Option<()>,
        t: &SessionType,
        u: &SessionType,
        path: &mut Vec<PathStep>,
        tainted: bool,
    ) {
        let tainted_here = tainted || search.fuel_exhausted;
        match search.found {
            None => {
                let side = if reduct_on_sub.is_some() { "subtype" } else { "supertype" };
                let reason = if search.fuel_exhausted {
                    format!("no reduct of the {side} on {action} within fuel {}", self.opts.fuel)
                } else {
                    format!("the {side} has no reduct on {action}")
                };
                self.fail(path, t, u, clause, reason, tainted_here);
            }
            Some(d) => {
                let (nt, nu) = if reduct_on_sub.is_some() { (d.reduct, other.clone()) } else { (other.clone(), d.reduct) };
                path.push(PathStep { clause, action, pair: PairText::of(&nt, &nu) });
                self.check(&nt, &nu, path, tainted_here);
                path.pop();
            }
        }
    }
}
