//! Randomized invariants of the scene generator, the feasibility rules and
//! the policies. Each check runs its own proptest runner so it can be driven
//! from a regular test or from a plain binary.

use std::collections::BTreeSet;

use busboy_core::action::{Action, ActionModel};
use busboy_core::config::Config;
use busboy_core::geometry::Point2;
use busboy_core::policy::{run_policy, PolicyConfig, PolicyKind};
use busboy_core::rng::{derive_seed, SimRng};
use busboy_core::scene_io::scene_to_json;
use busboy_core::tableware::{
    validate, Dish, DishId, DishKind, SceneState, Stack, TierConfig, Violation,
};
use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};

pub const CASES: u32 = 1000;

type Check = fn(u32) -> Result<(), String>;

/// Every property, by name.
pub const SUITES: [(&str, Check); 9] = [
    ("dish ids are conserved", dish_ids_are_conserved),
    ("every state is valid", every_state_is_valid),
    (
        "stacks stay stable when grasps slip",
        stacks_stay_stable_when_grasps_slip,
    ),
    (
        "policies finish within one trip per dish",
        policies_finish_within_one_trip_per_dish,
    ),
    (
        "multi-object grasp is symmetric",
        multi_object_grasp_is_symmetric,
    ),
    (
        "allowed pulls end in a multi-object grasp",
        allowed_pulls_end_in_a_multi_object_grasp,
    ),
    (
        "stack policy never leaves four-high piles",
        stack_policy_never_leaves_four_high_piles,
    ),
    ("generation is byte identical", generation_is_byte_identical),
    (
        "four nested cups cannot be grasped",
        four_nested_cups_cannot_be_grasped,
    ),
];

fn check<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
{
    let config = ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    TestRunner::new(config)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn model() -> ActionModel {
    Config::default().model()
}

fn arb_tier() -> impl Strategy<Value = TierConfig> {
    (0usize..=4, 0usize..=4, 0usize..=4, 0usize..=4, 1usize..=3)
        .prop_map(|(c, b, u, i, s)| TierConfig::custom(c, b, u, i, s))
}

fn arb_scene() -> impl Strategy<Value = SceneState> {
    (arb_tier(), any::<u64>()).prop_filter_map("placement exhausted", |(tier, seed)| {
        Config::default().generator().generate(&tier, seed).ok()
    })
}

fn arb_policy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}

/// Steps a policy by hand so every intermediate state can be inspected.
fn states_along(
    initial: &SceneState,
    kind: PolicyKind,
    seed: u64,
    p_fail: f64,
) -> Result<Vec<(Action, SceneState)>, TestCaseError> {
    let m = model();
    let policy = PolicyConfig::new(kind).build();
    let mut rng = SimRng::new(derive_seed(seed, &[1]));
    let mut slips = SimRng::new(derive_seed(seed, &[2]));
    let mut state = initial.clone();
    let mut out = Vec::new();
    let fail = |e: String| TestCaseError::fail(e);
    while let Some(action) = policy
        .next_action(&state, &m, &mut rng)
        .map_err(|e| fail(e.to_string()))?
    {
        if out.len() > 50 * initial.dish_count + 10 {
            return Err(fail("policy stalled".into()));
        }
        let applied = if slips.chance(p_fail) {
            m.apply_failed(&state, &action)
        } else {
            m.apply(&state, &action)
        }
        .map_err(|e| fail(e.to_string()))?;
        state = applied.state;
        out.push((action, state.clone()));
    }
    Ok(out)
}

fn all_ids(state: &SceneState) -> Vec<DishId> {
    let mut ids: Vec<DishId> = state
        .stacks
        .iter()
        .flat_map(Stack::ids)
        .chain(state.bin.iter().copied())
        .collect();
    ids.sort();
    ids
}

fn round_dishes(stack: &Stack) -> usize {
    stack
        .dishes
        .iter()
        .filter(|d| d.kind != DishKind::Utensil)
        .count()
}

pub fn dish_ids_are_conserved(cases: u32) -> Result<(), String> {
    let input = (arb_scene(), arb_policy(), any::<u64>(), 0.0..0.5f64);
    check(cases, input, |(scene, kind, seed, p_fail)| {
        let expected: Vec<DishId> = (0..scene.dish_count as u32).map(DishId).collect();
        prop_assert_eq!(all_ids(&scene), expected.clone());
        for (_, s) in states_along(&scene, kind, seed, p_fail)? {
            prop_assert_eq!(all_ids(&s), expected.clone());
            let unique: BTreeSet<DishId> = s.bin.iter().copied().collect();
            prop_assert_eq!(unique.len(), s.bin.len());
        }
        Ok(())
    })
}

pub fn every_state_is_valid(cases: u32) -> Result<(), String> {
    check(
        cases,
        (arb_scene(), arb_policy(), any::<u64>()),
        |(scene, kind, seed)| {
            let specs = model().specs;
            prop_assert!(validate(&scene, &specs).is_empty());
            for (action, s) in states_along(&scene, kind, seed, 0.0)? {
                let v = validate(&s, &specs);
                prop_assert!(v.is_empty(), "after {}: {:?}", action.name(), v);
            }
            Ok(())
        },
    )
}

/// A slipped pull-grasp leaves its pair touching, so only contact between
/// stacks is exempt here.
pub fn stacks_stay_stable_when_grasps_slip(cases: u32) -> Result<(), String> {
    let input = (arb_scene(), arb_policy(), any::<u64>(), 0.0..0.5f64);
    check(cases, input, |(scene, kind, seed, p_fail)| {
        let specs = model().specs;
        for (action, s) in states_along(&scene, kind, seed, p_fail)? {
            prop_assert!(s.stacks.iter().all(|st| st.is_stable(&specs)));
            let v: Vec<Violation> = validate(&s, &specs)
                .into_iter()
                .filter(|v| !matches!(v, Violation::Overlap { .. }))
                .collect();
            prop_assert!(v.is_empty(), "after {}: {:?}", action.name(), v);
        }
        Ok(())
    })
}

pub fn policies_finish_within_one_trip_per_dish(cases: u32) -> Result<(), String> {
    check(
        cases,
        (arb_scene(), arb_policy(), any::<u64>()),
        |(scene, kind, seed)| {
            let trace = run_policy(&scene, &PolicyConfig::new(kind), &model(), seed, 0.0)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(trace.final_state.is_clear());
            prop_assert!(trace.counts.trips as usize <= scene.dish_count);
            prop_assert_eq!(trace.counts.objects as usize, scene.dish_count);
            Ok(())
        },
    )
}

pub fn multi_object_grasp_is_symmetric(cases: u32) -> Result<(), String> {
    check(cases, arb_scene(), |scene| {
        let m = model();
        let ids = scene.stack_ids();
        for &a in &ids {
            for &b in &ids {
                prop_assert_eq!(
                    m.mog_allowable(&scene, a, b).is_some(),
                    m.mog_allowable(&scene, b, a).is_some(),
                    "{} / {}",
                    a,
                    b
                );
            }
        }
        Ok(())
    })
}

pub fn allowed_pulls_end_in_a_multi_object_grasp(cases: u32) -> Result<(), String> {
    check(cases, arb_scene(), |scene| {
        let m = model();
        let ids = scene.stack_ids();
        for &mover in &ids {
            for &anchor in &ids {
                if mover == anchor || !m.pull_allowable(&scene, mover, anchor) {
                    continue;
                }
                let after = m
                    .plan_pull(&scene, mover, anchor)
                    .and_then(|pull| m.after_pull(&scene, &pull))
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                // the pulled pair touches until it is grasped
                let v: Vec<Violation> = validate(&after, &m.specs)
                    .into_iter()
                    .filter(|v| {
                        !matches!(v, Violation::Overlap { a, b }
                            if [*a, *b].contains(&mover) && [*a, *b].contains(&anchor))
                    })
                    .collect();
                prop_assert!(v.is_empty(), "{:?}", v);
                prop_assert!(
                    m.mog_allowable(&after, mover, anchor).is_some(),
                    "pull {} -> {} leaves no multi-object grasp",
                    mover,
                    anchor
                );
            }
        }
        Ok(())
    })
}

pub fn stack_policy_never_leaves_four_high_piles(cases: u32) -> Result<(), String> {
    check(
        cases,
        (arb_scene(), any::<u64>(), 0.0..0.6f64),
        |(scene, seed, p_fail)| {
            for (_, s) in states_along(&scene, PolicyKind::Stack, seed, p_fail)? {
                for st in &s.stacks {
                    let n = round_dishes(st);
                    prop_assert!(n < 4, "pile {} holds {} cups/bowls", st.id(), n);
                }
            }
            Ok(())
        },
    )
}

pub fn generation_is_byte_identical(cases: u32) -> Result<(), String> {
    check(
        cases,
        (arb_tier(), any::<u64>(), arb_policy()),
        |(tier, seed, kind)| {
            let g = Config::default().generator();
            match (g.generate(&tier, seed), g.generate(&tier, seed)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(scene_to_json(&a), scene_to_json(&b));
                    let run = |s: &SceneState| {
                        run_policy(s, &PolicyConfig::new(kind), &model(), seed, 0.1)
                            .map(|t| t.to_jsonl())
                    };
                    prop_assert_eq!(run(&a), run(&b));
                }
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                _ => prop_assert!(false, "one run failed and the other did not"),
            }
            Ok(())
        },
    )
}

pub fn four_nested_cups_cannot_be_grasped(cases: u32) -> Result<(), String> {
    let input = (
        1usize..=8,
        prop::sample::select(vec![DishKind::Cup, DishKind::Bowl]),
        10.0..68.0f64,
        10.0..51.0f64,
    );
    check(cases, input, |(nested, kind, x, y)| {
        let m = model();
        let rise_per_dish = m.specs.get(kind).nest_offset;
        let dishes: Vec<Dish> = (0..nested as u32)
            .map(|i| Dish {
                id: DishId(i),
                kind,
                theta: 0.0,
            })
            .collect();
        let stack = Stack {
            base: Point2::new(x, y),
            dishes,
        };
        let too_tall = (nested as f64 - 1.0) * rise_per_dish > m.gripper.jaw_height;
        prop_assert_eq!(too_tall, nested >= 4);
        prop_assert_eq!(m.graspable(&stack), !too_tall);
        Ok(())
    })
}
