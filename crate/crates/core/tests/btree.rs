mod support;

use costar_core::btree::{BehaviorTree, NodeSpec, OpBinding, ScriptedLeaves, TickStatus};
use proptest::prelude::*;
use support::*;

fn example(name: &str) {
    let (_, result) = node_examples().into_iter().find(|(n, _)| *n == name).unwrap();
    result.unwrap();
}

#[test]
fn sequence_example() {
    example("sequence");
}

#[test]
fn selector_example() {
    example("selector");
}

#[test]
fn repeat_example() {
    example("repeat");
}

#[test]
fn reset_example() {
    example("reset");
}

#[test]
fn reference_agrees_on_a_retry_loop() {
    // The polishing shape: a reset retried by a repeat.
    let leaf = || NodeSpec::leaf(OpBinding::new("t", "op"));
    let spec = NodeSpec::repeat(2, NodeSpec::selector(vec![NodeSpec::reset(2, NodeSpec::sequence(vec![leaf(), leaf()])), leaf()]));
    let scripts = [("root.0.0.0.0.0".to_string(), vec![TickStatus::Failure, TickStatus::Failure, TickStatus::Success])].into();
    let mut tree = BehaviorTree::new(&spec).unwrap();
    let mut ex = ScriptedLeaves::new().script("root.0.0.0.0.0", vec![TickStatus::Failure, TickStatus::Failure, TickStatus::Success]);
    let mut reference = ReferenceBt::new(&scripts);
    for _ in 0..8 {
        assert_eq!(tree.tick(&mut ex), reference.tick(&spec));
    }
    assert_eq!(tree.drain_events(), reference.events);
    assert_eq!(ex.log, reference.log);
}

#[test]
fn generated_trees_respect_the_depth_bound() {
    for seed in 0..200 {
        let (spec, _) = random_tree(&mut rng(seed), 5, 4);
        assert!(spec.depth() <= 5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn engine_matches_reference_interpreter(seed in any::<u64>()) {
        let r = check_bt(seed, 25);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}
