//! Example session files shipped with the crate, and the programs and types
//! they are built from.

use crate::global::GlobalType;
use crate::lang::{Computation, Configuration};
use crate::session::{GroundType, SessionType};
use crate::syntax::{parse_computation, parse_session_file, parse_session_type, Program};

/// `outcome.mps`: `r` relays `p`'s outcome to `q`.
pub const OUTCOME: &str = include_str!("../examples/outcome.mps");
/// `outcome_eager.mps`: `r` tells `q` to stop before hearing from `p`.
pub const OUTCOME_EAGER: &str = include_str!("../examples/outcome_eager.mps");
/// `state.mps`: global state, client sends `put` before receiving.
pub const STATE: &str = include_str!("../examples/state.mps");
/// `state_sync.mps`: global state, client waits before sending `put`.
pub const STATE_SYNC: &str = include_str!("../examples/state_sync.mps");
/// `counter.mps`: a looping client over the global-state server.
pub const COUNTER: &str = include_str!("../examples/counter.mps");
/// `deadlock.mps`: two participants each waiting for the other.
pub const DEADLOCK: &str = include_str!("../examples/deadlock.mps");
/// `lazy_client.mps`: a client that never sends `done`.
pub const LAZY_CLIENT: &str = include_str!("../examples/lazy_client.mps");

/// The well-typed example sessions, by file name.
pub const WELL_TYPED: [(&str, &str); 5] = [
    ("outcome.mps", OUTCOME),
    ("outcome_eager.mps", OUTCOME_EAGER),
    ("state.mps", STATE),
    ("state_sync.mps", STATE_SYNC),
    ("counter.mps", COUNTER),
];

/// Parses one of the bundled session files.
pub fn program(src: &str) -> Program {
    parse_session_file(src).expect("bundled example parses")
}

fn ty(src: &str) -> SessionType {
    parse_session_type(src).expect("bundled type parses")
}

fn comp(src: &str) -> Computation {
    parse_computation(src).expect("bundled computation parses")
}

/// `T'`: tell `q` to continue or stop.
pub fn outcome_t_prime() -> SessionType {
    ty("+q{cont(int). end, stop(bool). end}")
}

/// `T`: receive `p`'s outcome, then tell `q`.
pub fn outcome_t() -> SessionType {
    ty("&p{success(int). +q{cont(int). end, stop(bool). end}, error(bool). +q{cont(int). end, stop(bool). end}}")
}

/// `U`: tell `q` first, then receive `p`'s outcome.
pub fn outcome_u() -> SessionType {
    ty("+q{cont(int). &p{success(int). end, error(bool). end}, stop(bool). &p{success(int). end, error(bool). end}}")
}

/// The relay computation `t` run by `r` in `outcome.mps`.
pub fn outcome_t_comp() -> Computation {
    comp(
        "recv from p { success(x: int) -> let y = 0 < x in if y then send cont(x) to q; return false \
         else send stop(true) to q; return true, error(x: bool) -> send stop(false) to q; return true }",
    )
}

/// The eager computation `u` (with `y : bool` free).
pub fn outcome_u_comp() -> Computation {
    comp(
        "if y then send cont(0) to q; recv from p { success(x: int) -> return false, error(x: bool) -> return false } \
         else send stop(false) to q; recv from p { success(x: int) -> return true, error(x: bool) -> return true }",
    )
}

/// `let y = return false in u`, the closed variant of `u`.
pub fn outcome_u_closed() -> Computation {
    Computation::let_("y", Computation::ret(crate::lang::Value::Bool(false)), outcome_u_comp())
}

/// The two orders of sending to different participants, which are
/// subtypes of each other.
pub fn reorder_pair() -> (SessionType, SessionType) {
    (ty("+q{m(bool). +p{l(int). end}}"), ty("+p{l(int). +q{m(bool). end}}"))
}

/// `T_k`: accept at most `k` `l2` messages from `q`, then an `l1`.
pub fn bounded_loop(k: usize) -> SessionType {
    (0..k).fold(ty("&q{l1(int). end}"), |t, _| {
        SessionType::external("q", [("l1", GroundType::Int, SessionType::End), ("l2", GroundType::Bool, t)])
    })
}

/// `T_∞`: accept `l2` messages from `q` until an `l1` arrives.
pub fn unbounded_loop() -> SessionType {
    ty("rec X. &q{l1(int). end, l2(bool). X}")
}

/// The loop of [`unbounded_loop`] with a receive from `p` after it exits.
pub fn loop_then_recv() -> SessionType {
    ty("rec X. &q{l1(int). &p{l(unit). end}, l2(bool). X}")
}

/// A receive from `p` followed by the loop of [`unbounded_loop`]; neither
/// this nor [`loop_then_recv`] is a subtype of the other.
pub fn recv_then_loop() -> SessionType {
    ty("&p{l(unit). rec X. &q{l1(int). end, l2(bool). X}}")
}

/// The global type of `outcome.mps`.
pub fn outcome_global() -> GlobalType {
    program(OUTCOME).globals["G"].clone()
}

/// The global type of the global-state example.
pub fn state_global() -> GlobalType {
    program(STATE).globals["G"].clone()
}

/// `rec X. T_s`, the server's type.
pub fn state_server_type() -> SessionType {
    ty("rec X. &c{get(unit). +c{st(int). X}, put(int). X, done(unit). end}")
}

/// `rec X. T_c`, the client's type.
pub fn state_client_type() -> SessionType {
    ty("rec X. +s{get(unit). &s{st(int). X}, put(int). X, done(unit). end}")
}

/// `S`: get the state, then put.
pub fn state_s() -> SessionType {
    ty("+s{get(unit). &s{st(int). +s{put(int). end}}}")
}

/// The server `t_s`.
pub fn state_server() -> Computation {
    program(STATE).participant("s").expect("server").body.clone()
}

/// `t_{c,1}`: receive the state, then put.
pub fn state_client_sync() -> Computation {
    comp("send get(()) to s; recv from s { st(x: int) -> send put(0) to s; return x }")
}

/// `t_{c,2}`: put before receiving the state.
pub fn state_client_eager() -> Computation {
    comp("send get(()) to s; send put(0) to s; recv from s { st(x: int) -> return x }")
}

/// `C_{c,i}` for a client computation: run it, then send `done`.
pub fn with_done(t: Computation) -> Computation {
    comp(&format!("let x = {t} in send done(()) to s; return x"))
}

/// Configurations paired with a type they inhabit: the relay and eager
/// relay, the global-state server, and both global-state clients.
pub fn fixture_configurations() -> Vec<(&'static str, Configuration, SessionType)> {
    vec![
        ("relay at T", Configuration::new(outcome_t_comp()), outcome_t()),
        ("eager relay at T", Configuration::new(outcome_u_closed()), outcome_t()),
        ("eager relay at U", Configuration::new(outcome_u_closed()), outcome_u()),
        ("state server", Configuration::new(state_server()), state_server_type()),
        ("synchronous client", Configuration::new(with_done(state_client_sync())), state_client_type()),
        ("eager client", Configuration::new(with_done(state_client_eager())), state_client_type()),
    ]
}

/// Pairs of configurations at a shared type, with whether they are
/// expected to be equivalent there.
pub fn adequacy_fixture_pairs() -> Vec<(&'static str, Configuration, Configuration, SessionType, bool)> {
    let relay = Configuration::new(outcome_t_comp());
    let eager = Configuration::new(outcome_u_closed());
    vec![
        ("relays at T", relay.clone(), eager.clone(), outcome_t(), false),
        ("relays after an error", relay, eager, ty("&p{error(bool). +q{cont(int). end, stop(bool). end}}"), true),
        (
            "clients at S",
            Configuration::new(state_client_sync()),
            Configuration::new(state_client_eager()),
            state_s(),
            true,
        ),
    ]
}
