//! Pairs of configurations at a shared type, for comparing denotational
//! equality with typed bisimilarity.

use mpstc_core::{Configuration, Message, SessionType, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::programs::{random_ground, random_plan, realize, synthesize, Layer, Noise};
use super::{random_type, TypeShape};

/// How the two sides of a pair relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// The same protocol choices, one side with τ-noise: equivalent by
    /// construction.
    NoiseOnly,
    /// Two independently synthesised computations over the same queues.
    Independent,
    /// The same computation with one queued payload changed.
    PayloadChanged,
}

/// A generated pair of configurations typed at `ty`.
#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub c1: Configuration,
    pub c2: Configuration,
    pub ty: SessionType,
    pub kind: PairKind,
}

/// Types small enough that depth-4 comparisons stay cheap.
pub const PAIR_SHAPE: TypeShape = TypeShape { max_choices: 4, participants: 3, labels: 2, grounds: 2, recursion: true };

fn other_value(v: &Value) -> Value {
    match v {
        Value::Bool(b) => Value::Bool(!b),
        Value::Int(n) => Value::Int(n + 1),
        other => other.clone(),
    }
}

/// Generates the `i`-th pair; kinds rotate with `i`.
pub fn random_adequacy_pair(rng: &mut ChaCha8Rng, i: usize) -> GeneratedPair {
    let ty = random_type(rng, PAIR_SHAPE);
    let b = random_ground(rng);
    let mut plan = random_plan(rng, &ty, 2);
    let seed: u64 = rng.gen();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let inner = plan.inner.clone();
    let mut synth = |seed: u64, noise: Noise| synthesize(&mut ChaCha8Rng::seed_from_u64(seed), &mut noise_rng, noise, &inner, b);
    let mut kind = [PairKind::NoiseOnly, PairKind::Independent, PairKind::PayloadChanged][i % 3];
    let comp1 = synth(seed, Noise::Off);
    let comp2 = match kind {
        PairKind::NoiseOnly => synth(seed, Noise::On(0.3)),
        PairKind::Independent => synth(seed.wrapping_add(1), Noise::Off),
        PairKind::PayloadChanged => comp1.clone(),
    };
    let c1 = realize(&plan, comp1);
    if kind == PairKind::PayloadChanged {
        let idx = rng.gen_range(0..plan.layers.len().max(1));
        match plan.layers.get_mut(idx) {
            Some(Layer::Outgoing(_, m)) | Some(Layer::Incoming(_, m)) => *m = Message::new(m.label.clone(), other_value(&m.payload)),
            None => kind = PairKind::Independent,
        }
    }
    let c2 = if kind == PairKind::Independent && i % 3 == 2 {
        realize(&plan, synth(seed.wrapping_add(1), Noise::Off))
    } else {
        realize(&plan, comp2)
    };
    GeneratedPair { c1, c2, ty, kind }
}
