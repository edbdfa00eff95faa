use std::collections::BTreeSet;

use mpstc_core::fixtures::*;
use mpstc_core::*;

fn verdict(t: &SessionType, u: &SessionType) -> SubtypeVerdict {
    subtype(t, u, &BTreeSet::new(), DEFAULT_FUEL)
}

#[test]
fn sending_first_refines_receiving_first() {
    assert!(verdict(&outcome_u(), &outcome_t()).is_proven());
    assert!(!verdict(&outcome_t(), &outcome_u()).is_proven());
}

#[test]
fn loop_and_receive_are_unrelated_in_both_orders() {
    let (u, u2) = (loop_then_recv(), recv_then_loop());
    let a = verdict(&u, &u2);
    let b = verdict(&u2, &u);
    assert!(!a.is_proven(), "{}", a.explain());
    assert!(!b.is_proven(), "{}", b.explain());
}

#[test]
fn unbounded_loop_refines_bounded_loops() {
    for k in 0..=3 {
        let v = verdict(&unbounded_loop(), &bounded_loop(k));
        assert!(v.is_proven(), "k = {k}: {}", v.explain());
        assert!(!verdict(&bounded_loop(k), &unbounded_loop()).is_proven(), "k = {k}");
    }
}

#[test]
fn sends_to_distinct_participants_reorder() {
    let (a, b) = reorder_pair();
    assert!(verdict(&a, &b).is_proven());
    assert!(verdict(&b, &a).is_proven());
}

#[test]
fn bounded_loop_shape() {
    assert_eq!(bounded_loop(0).to_string(), "&q{l1(int). end}");
    assert_eq!(bounded_loop(2).to_string(), "&q{l1(int). end, l2(bool). &q{l1(int). end, l2(bool). &q{l1(int). end}}}");
}
