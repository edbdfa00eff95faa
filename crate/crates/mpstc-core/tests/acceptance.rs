//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with timings
//! against each criterion's budget. Exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::adequacy::{random_adequacy_pair, PairKind};
use common::laws::{monoid, multiplication, swapping, unfold_invariance};
use common::programs::{random_configuration, Noise};
use common::reduction::check_one;
use common::{count_choices, random_pair, random_type, rng, TypeShape};
use mpstc_core::fixtures::*;
use mpstc_core::*;

type Check = Result<String, String>;
/// (number, name, overall budget, check)
type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(what: &str, started: Instant, budget: Duration) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took <= budget, || format!("{what} took {took:.2?}, over the {budget:?} budget"))?;
    Ok(took)
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn proven(t: &SessionType, u: &SessionType) -> bool {
    subtype(t, u, &BTreeSet::new(), DEFAULT_FUEL).is_proven()
}

fn subtyping_instances() -> Check {
    let (u, t) = (outcome_u(), outcome_t());
    ensure(proven(&u, &t), || "U <: T is not proven".into())?;
    ensure(!proven(&t, &u), || "T <: U is proven".into())?;
    let (a, b) = (loop_then_recv(), recv_then_loop());
    ensure(!proven(&a, &b) && !proven(&b, &a), || format!("{a} and {b} are related"))?;
    for k in 0..=3 {
        ensure(proven(&unbounded_loop(), &bounded_loop(k)), || format!("T_inf <: T_{k} is not proven"))?;
    }
    let (a, b) = reorder_pair();
    ensure(proven(&a, &b) && proven(&b, &a), || "the reordered sends are not mutual subtypes".into())?;
    Ok("9 verdicts as expected".into())
}

fn siso_oracle() -> Check {
    let mut r = rng(7);
    let (mut n, mut positives, mut unknown) = (0, 0, 0);
    while n < 1000 {
        let (t, u) = random_pair(&mut r, TypeShape::MU_FREE);
        if count_choices(&t) > 6 || count_choices(&u) > 6 {
            continue;
        }
        n += 1;
        let v = subtype(&t, &u, &BTreeSet::new(), DEFAULT_FUEL);
        let o = siso_subtype_oracle(&t, &u).map_err(|e| e.to_string())?;
        ensure(v.is_proven() == o, || format!("disagreement on {t} <: {u}: checker {}, oracle {o}", v.name()))?;
        positives += o as usize;
        unknown += matches!(v, SubtypeVerdict::Unknown { .. }) as usize;
    }
    Ok(format!("{n} pairs, 0 disagreements ({positives} subtype pairs, {unknown} unknown)"))
}

fn relation_laws() -> Check {
    let mut report = Vec::new();
    let budget = secs(30);

    let started = Instant::now();
    let mut r = rng(21);
    let mut cases = 0;
    while cases < 500 {
        let t = random_type(&mut r, TypeShape::RECURSIVE);
        if !matches!(t, SessionType::Rec(..)) {
            continue;
        }
        unfold_invariance(&t, DEFAULT_FUEL)?;
        cases += 1;
    }
    report.push(format!("unfolding {cases} in {:.2?}", within("unfold invariance", started, budget)?));

    let started = Instant::now();
    let mut r = rng(22);
    let (mut cases, mut i) = (0, 0);
    while cases < 500 {
        i += 1;
        let t = random_type(&mut r, if i % 2 == 0 { TypeShape::RECURSIVE } else { TypeShape::MU_FREE });
        cases += (swapping(&t)? > 0) as usize;
    }
    report.push(format!("swapping {cases} in {:.2?}", within("swapping", started, budget)?));

    let started = Instant::now();
    let mut r = rng(23);
    let (mut cases, mut i) = (0, 0);
    while cases < 500 {
        i += 1;
        let shape = if i % 2 == 0 { TypeShape::RECURSIVE } else { TypeShape::MU_FREE };
        let (t, t2) = (random_type(&mut r, shape), random_type(&mut r, shape));
        cases += (multiplication(&t, &t2, DEFAULT_FUEL)? > 0) as usize;
    }
    report.push(format!("multiplication {cases} in {:.2?}", within("multiplication", started, budget)?));
    Ok(report.join(", "))
}

fn monoid_laws() -> Check {
    let mut r = rng(24);
    for i in 0..500 {
        let shape = if i % 2 == 0 { TypeShape::RECURSIVE } else { TypeShape::MU_FREE };
        let (t, u, v) = (random_type(&mut r, shape), random_type(&mut r, shape), random_type(&mut r, shape));
        monoid(&t, &u, &v)?;
    }
    Ok("500 triples".into())
}

fn typing_fixtures() -> Check {
    let ctx = TypingContexts::default();
    let checks = |c: &TypingContexts, t: &Computation, b: GroundType, ty: &SessionType| check_computation(c, t, b, ty).is_ok();
    ensure(checks(&ctx, &outcome_t_comp(), GroundType::Bool, &outcome_t()), || "relay does not check at T".into())?;
    ensure(!checks(&ctx, &outcome_t_comp(), GroundType::Bool, &outcome_u()), || "relay checks at U".into())?;
    let with_y = ctx.clone().bind("y", GroundType::Bool);
    ensure(checks(&with_y, &outcome_u_comp(), GroundType::Bool, &outcome_u()), || "eager relay does not check at U".into())?;
    ensure(checks(&with_y, &outcome_u_comp(), GroundType::Bool, &outcome_t()), || "eager relay does not check at T".into())?;
    ensure(checks(&ctx, &state_server(), GroundType::Unit, &state_server_type()), || "server does not check".into())?;
    for (name, t) in [("synchronous", state_client_sync()), ("eager", state_client_eager())] {
        ensure(checks(&ctx, &with_done(t), GroundType::Int, &state_client_type()), || format!("{name} client does not check"))?;
    }
    ensure(!checks(&ctx, &state_server(), GroundType::Unit, &state_client_type()), || "server checks at the client type".into())?;
    Ok("8 judgements as expected".into())
}

fn subject_reduction() -> Check {
    let mut r = rng(11);
    let (mut reducts, mut queued) = (0, 0);
    for i in 0..250 {
        let noise = if i % 2 == 0 { Noise::Off } else { Noise::On(0.2) };
        let g = random_configuration(&mut r, TypeShape::RECURSIVE, 3, noise);
        queued += (!g.config.rho.is_empty() || !g.config.sigma.is_empty()) as usize;
        reducts += check_one(&g).map_err(|e| format!("configuration {i}: {e}"))?;
    }
    Ok(format!("250 configurations ({queued} with queued messages), {reducts} reducts re-typed"))
}

fn projections() -> Check {
    let expect = |g: &GlobalType, r: &str, want: SessionType| -> Result<(), String> {
        let got = project(g, &Participant::new(r)).map_err(|e| format!("projection onto {r}: {e}"))?;
        ensure(got.alpha_eq(&want), || format!("projection onto {r}: got {got}, expected {want}"))
    };
    let ty = |s: &str| parse_session_type(s).unwrap();
    let g = outcome_global();
    expect(&g, "p", ty("+r{success(int). end, error(bool). end}"))?;
    expect(&g, "q", ty("&r{cont(int). end, stop(bool). end}"))?;
    expect(&g, "r", ty("&p{success(int). +q{cont(int). end, stop(bool). end}, error(bool). +q{stop(bool). end}}"))?;
    let g = state_global();
    expect(&g, "s", state_server_type())?;
    expect(&g, "c", state_client_type())?;
    Ok("5 projections".into())
}

fn golden_trace() -> Check {
    let c = Configuration::new(outcome_t_comp());
    let (trace, _) = drive_configuration(&c, &[("p".into(), Message::new("error", Value::Bool(true)))], 100);
    let got: Vec<String> = trace.iter().map(|e| e.action.to_string()).collect();
    let want = ["p?error(true)", "τ", "τ", "q!stop(false)"];
    ensure(got == want, || format!("trace {got:?}"))?;
    Ok(got.join(", "))
}

fn deadlock_and_liveness() -> Check {
    let mut report = Vec::new();
    for (name, src) in WELL_TYPED {
        let m = Session::from_program(&program(src)).map_err(|e| e.to_string())?;
        let out = run_session(&m, Scheduler::RoundRobin, 10_000);
        ensure(matches!(out.verdict, Verdict::Completed(_)), || format!("{name}: {}", out.verdict.name()))?;
        let empty = out.last.roles.iter().all(|(_, c)| c.rho.is_empty() && c.sigma.is_empty());
        ensure(empty, || format!("{name}: queues not empty at the end"))?;
        ensure(out.liveness.within_bound, || format!("{name}: a blocked receive exceeded the bound {}", out.liveness.bound))?;
        report.push(format!("{name} {} steps", out.trace.len()));
    }
    let m = Session::from_program(&program(DEADLOCK)).map_err(|e| e.to_string())?;
    let out = run_session(&m, Scheduler::RoundRobin, 10_000);
    ensure(matches!(out.verdict, Verdict::Stuck(_)), || format!("deadlock.mps: {}", out.verdict.name()))?;
    report.push("deadlock.mps stuck".into());
    Ok(report.join(", "))
}

fn denotation_fixture() -> Check {
    let s = state_s();
    let probes = ProbeConfig::with_depth(6);
    let (t1, _, _) = denote_computation(&state_client_sync(), Some(&s), DEFAULT_FUEL).map_err(|e| e.to_string())?;
    let (t2, _, _) = denote_computation(&state_client_eager(), Some(&s), DEFAULT_FUEL).map_err(|e| e.to_string())?;
    ensure(tree_equal(&t1, &t2, &probes), || "the client denotations differ".into())?;
    // Send get; Recv st(n); Send put(0); Ret n, built directly.
    let arm: ArmFn = std::sync::Arc::new(|n: &Value| {
        let n = n.clone();
        Some(Tree::send("s".into(), Message::new("put", Value::Int(0)), move || Tree::Ret(n)))
    });
    let expected = Tree::send("s".into(), Message::new("get", Value::Unit), move || Tree::recv("s".into(), [(Label::new("st"), GroundType::Int, arm)]));
    ensure(tree_equal(&t1, &expected, &probes), || format!("denotation is {}", t1.render(&probes)))?;
    Ok(t1.render(&ProbeConfig { depth: 6, int_probes: vec![0] }))
}

fn adequacy() -> Check {
    let probes = ProbeConfig::default();
    for (name, c1, c2, ty, equivalent) in adequacy_fixture_pairs() {
        let a = adequacy_check(&c1, &c2, &ty, &probes, DEFAULT_FUEL).map_err(|e| format!("{name}: {e}"))?;
        ensure(a.consistent && a.equal_denotations == equivalent, || format!("{name}: {a:?}"))?;
    }
    let started = Instant::now();
    let mut r = rng(31);
    let probes = ProbeConfig::with_depth(4);
    let (mut equal, mut different) = (0, 0);
    for i in 0..150 {
        let pair = random_adequacy_pair(&mut r, i);
        let a = adequacy_check(&pair.c1, &pair.c2, &pair.ty, &probes, DEFAULT_FUEL).map_err(|e| format!("pair {i}: {e}"))?;
        ensure(a.consistent, || format!("pair {i} at {}: {a:?}", pair.ty))?;
        ensure(pair.kind != PairKind::NoiseOnly || a.equal_denotations, || format!("noise changed pair {i}"))?;
        if a.equal_denotations {
            equal += 1;
        } else {
            different += 1;
        }
    }
    let took = within("generated pairs", started, secs(120))?;
    Ok(format!("3 fixture pairs; 150 generated pairs ({equal} equivalent, {different} distinguished) in {took:.2?}"))
}

fn model_correctness() -> Check {
    let probes = ProbeConfig::with_depth(5);
    let cases = fixture_configurations();
    for (name, c, ty) in &cases {
        let d = denote_configuration(c, ty, DEFAULT_FUEL).map_err(|e| format!("{name}: {e}"))?;
        ensure(bisim_bounded(BisimSide::Config(c.clone()), BisimSide::Tree(d), ty, &probes, DEFAULT_FUEL), || format!("{name} is not bisimilar to its denotation"))?;
    }
    Ok(format!("{} configurations", cases.len()))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "subtyping instances", secs(1), subtyping_instances),
        (2, "SISO oracle agreement", secs(60), siso_oracle),
        (3, "reduct relation laws", secs(90), relation_laws),
        (4, "monoid laws", secs(10), monoid_laws),
        (5, "typing fixtures", secs(1), typing_fixtures),
        (6, "subject reduction", secs(60), subject_reduction),
        (7, "projections", secs(1), projections),
        (8, "golden trace", secs(1), golden_trace),
        (9, "deadlock freedom and liveness", secs(60), deadlock_and_liveness),
        (10, "denotation fixture", secs(10), denotation_fixture),
        (11, "adequacy", secs(180), adequacy),
        (12, "model correctness", secs(60), model_correctness),
    ];
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = started.elapsed();
        let result = result.and_then(|d| if took <= budget { Ok(d) } else { Err(format!("took {took:.2?}, over the {budget:?} budget ({d})")) });
        match result {
            Ok(detail) => println!("PASS {n:>2} {name} [{took:.2?}]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name} [{took:.2?}]: {why}");
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
