//! The subject-reduction check for one generated configuration.

use mpstc_core::{
    infer_computation, recv_reduct, send_reduct, step_configuration, type_configuration, Configuration, LocalAction, Message, ProbeConfig,
    SessionType, TypingContexts, DEFAULT_FUEL,
};

use super::programs::{triples, Generated};

/// Checks the subject-reduction clause for every one-step reduct of a
/// well-typed configuration; returns the number of reducts checked.
pub fn check_one(g: &Generated) -> Result<usize, String> {
    let Generated { config: c, result: b, ty } = g;
    type_configuration(c, *b, ty, DEFAULT_FUEL).map_err(|e| format!("generated configuration does not type: {c} at {ty}: {e}"))?;
    let retypes = |d: &Configuration, at: &SessionType, what: &str| -> Result<(), String> {
        let b2 = infer_computation(&TypingContexts::with_fuel(DEFAULT_FUEL), &d.comp).map_err(|e| e.to_string())?.ground;
        if b2 != *b {
            return Err(format!("{what}: result type changed from {b} to {b2}"));
        }
        type_configuration(d, *b, at, DEFAULT_FUEL).map(|_| ()).map_err(|e| format!("{what}: {c} ⟶ {d} does not type at {at}: {e}"))
    };
    let mut checked = 0;
    for s in step_configuration(c, None) {
        match &s.action {
            LocalAction::Tau => retypes(&s.next, ty, &format!("τ ({})", s.rule))?,
            LocalAction::SendTo(p, m) => {
                let u = send_reduct(ty, p, &m.label, m.ground(), DEFAULT_FUEL)
                    .found
                    .ok_or_else(|| format!("{c} sends {p}!{m} but {ty} has no such send reduct"))?
                    .reduct;
                retypes(&s.next, &u, &format!("{p}!{m}"))?;
            }
            LocalAction::RecvFrom(..) => unreachable!("no incoming message offered"),
        }
        checked += 1;
    }
    let probes = ProbeConfig::default();
    for (p, l, gb) in triples(ty, false) {
        let Some(d) = recv_reduct(ty, &p, &l, gb, DEFAULT_FUEL).found else { continue };
        for v in probes.payloads(gb) {
            let m = Message::new(l.clone(), v);
            for s in step_configuration(c, Some((&p, &m))) {
                if let LocalAction::RecvFrom(..) = s.action {
                    retypes(&s.next, &d.reduct, &format!("{p}?{m}"))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}
