//! Randomized invariants, each over its own batch of generated cases.

mod common;

use common::props::{self, CASES};

#[test]
fn dish_ids_are_conserved() {
    props::dish_ids_are_conserved(CASES).unwrap();
}

#[test]
fn every_state_is_valid() {
    props::every_state_is_valid(CASES).unwrap();
}

#[test]
fn stacks_stay_stable_when_grasps_slip() {
    props::stacks_stay_stable_when_grasps_slip(CASES).unwrap();
}

#[test]
fn policies_finish_within_one_trip_per_dish() {
    props::policies_finish_within_one_trip_per_dish(CASES).unwrap();
}

#[test]
fn multi_object_grasp_is_symmetric() {
    props::multi_object_grasp_is_symmetric(CASES).unwrap();
}

#[test]
fn allowed_pulls_end_in_a_multi_object_grasp() {
    props::allowed_pulls_end_in_a_multi_object_grasp(CASES).unwrap();
}

#[test]
fn stack_policy_never_leaves_four_high_piles() {
    props::stack_policy_never_leaves_four_high_piles(CASES).unwrap();
}

#[test]
fn generation_is_byte_identical() {
    props::generation_is_byte_identical(CASES).unwrap();
}

#[test]
fn four_nested_cups_cannot_be_grasped() {
    props::four_nested_cups_cannot_be_grasped(CASES).unwrap();
}
