//! Exhaustive search over action sequences on small scenes.

use std::collections::HashMap;

use busboy_core::action::{merge, Action, ActionModel};
use busboy_core::config::Config;
use busboy_core::policy::{PolicyConfig, PolicyKind};
use busboy_core::rng::{derive_seed, SimRng};
use busboy_core::tableware::{DishTable, SceneGenerator, SceneState, Stack, TierConfig, Workspace};

const MAX_DISHES: usize = 5;
const SEEDS: u64 = 30;

/// Table contents with only the stacks in `mask` left.
fn restrict(initial: &SceneState, mask: u32) -> SceneState {
    let mut s = initial.clone();
    s.stacks = initial
        .stacks
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, st)| st.clone())
        .collect();
    s
}

/// Every subset of stacks one action can clear from `state`, as masks over
/// the initial stack order. A stack-grasp may pile any ordered sequence of
/// stacks onto one base.
fn clearable_sets(
    model: &ActionModel,
    state: &SceneState,
    index: &HashMap<u32, usize>,
) -> Vec<u32> {
    let bit = |st: &Stack| 1u32 << index[&st.id().0];
    let mut out = Vec::new();
    for a in &state.stacks {
        out.push(bit(a));
        for b in &state.stacks {
            if a.id() == b.id() {
                continue;
            }
            if model.mog_allowable(state, a.id(), b.id()).is_some()
                || model.pull_allowable(state, a.id(), b.id())
            {
                out.push(bit(a) | bit(b));
            }
        }
        pile_onto(model, state, a, bit(a), &bit, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn pile_onto(
    model: &ActionModel,
    state: &SceneState,
    base: &Stack,
    used: u32,
    bit: &dyn Fn(&Stack) -> u32,
    out: &mut Vec<u32>,
) {
    for lifted in &state.stacks {
        if used & bit(lifted) != 0 || !model.stack_between(lifted, base) {
            continue;
        }
        let merged = merge(base, lifted);
        let next = used | bit(lifted);
        out.push(next);
        pile_onto(model, state, &merged, next, bit, out);
    }
}

/// Fewest trips that clear `initial`, by exhaustive search over action
/// sequences (memoized on the set of stacks left).
pub fn fewest_trips(model: &ActionModel, initial: &SceneState) -> u32 {
    let index: HashMap<u32, usize> = initial
        .stacks
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id().0, i))
        .collect();
    let full = (1u32 << initial.stacks.len()) - 1;
    let mut memo: HashMap<u32, u32> = HashMap::from([(0, 0)]);
    fn solve(
        mask: u32,
        model: &ActionModel,
        initial: &SceneState,
        index: &HashMap<u32, usize>,
        memo: &mut HashMap<u32, u32>,
    ) -> u32 {
        if let Some(&v) = memo.get(&mask) {
            return v;
        }
        let state = restrict(initial, mask);
        let best = clearable_sets(model, &state, index)
            .into_iter()
            .map(|cleared| 1 + solve(mask & !cleared, model, initial, index, memo))
            .min()
            .expect("a single grasp is always possible");
        memo.insert(mask, best);
        best
    }
    solve(full, model, initial, &index, &mut memo)
}

/// Re-derives feasibility of an emitted action from the allowability rules
/// alone.
pub fn feasible(model: &ActionModel, state: &SceneState, action: &Action) -> bool {
    match action {
        Action::Grasp(g) => match g.targets.as_slice() {
            [one] => state.stack(*one).is_some(),
            [a, b] => model.mog_allowable(state, *a, *b).is_some(),
            _ => false,
        },
        Action::PullGrasp { pull, .. } => model.pull_allowable(state, pull.mover, pull.anchor),
        Action::StackGrasp { stacks, .. } => {
            let mut s = state.clone();
            for st in stacks {
                if !model.stack_allowable(&s, st.lifted, st.base) {
                    return false;
                }
                s = model.after_stacking(&s, std::slice::from_ref(st)).unwrap();
            }
            true
        }
    }
}

/// Runs a policy failure-free, checking each action before applying it.
pub fn checked_trips(
    model: &ActionModel,
    initial: &SceneState,
    kind: PolicyKind,
    seed: u64,
) -> Result<u32, String> {
    let policy = PolicyConfig::new(kind).build();
    let mut rng = SimRng::new(derive_seed(seed, &[1]));
    let mut state = initial.clone();
    while let Some(action) = policy
        .next_action(&state, model, &mut rng)
        .map_err(|e| format!("{kind} on scene {}: {e}", initial.seed))?
    {
        if !feasible(model, &state, &action) {
            return Err(format!(
                "{kind} emitted an infeasible {} on scene {}: {action:?}",
                action.name(),
                initial.seed
            ));
        }
        state = model
            .apply(&state, &action)
            .map_err(|e| format!("{kind} on scene {}: {e}", initial.seed))?
            .state;
    }
    Ok(state.trips_taken)
}

pub fn small_scenes(generator: &SceneGenerator) -> Vec<SceneState> {
    let mut out = Vec::new();
    for cups in 0..=MAX_DISHES {
        for bowls in 0..=MAX_DISHES - cups {
            for utensils in 0..=MAX_DISHES - cups - bowls {
                if cups + bowls + utensils == 0 {
                    continue;
                }
                for (crossings, height) in [(0, 1), (2, 2), (4, 3)] {
                    let tier = TierConfig::custom(cups, bowls, utensils, crossings, height);
                    for seed in 0..SEEDS {
                        if let Ok(s) = generator.generate(&tier, seed) {
                            out.push(s);
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleSummary {
    pub scenes: usize,
    /// Scenes where the optimum beats one trip per stack.
    pub consolidated: usize,
    /// Policy runs that matched the optimum.
    pub optimal_runs: usize,
}

/// Checks every small scene the generator produces: emitted actions are
/// feasible and Stack/Pull trips lie between the optimum and Random's.
pub fn check_scenes(generator: &SceneGenerator) -> Result<OracleSummary, String> {
    let model = Config::default().model();
    let scenes = small_scenes(generator);
    if scenes.len() < 1000 {
        return Err(format!("only {} scenes generated", scenes.len()));
    }
    let mut summary = OracleSummary {
        scenes: scenes.len(),
        ..OracleSummary::default()
    };
    for scene in &scenes {
        let best = fewest_trips(&model, scene);
        let random = checked_trips(&model, scene, PolicyKind::Random, scene.seed)?;
        if random as usize != scene.stacks.len() {
            return Err(format!(
                "random took {random} trips for {} stacks",
                scene.stacks.len()
            ));
        }
        for kind in [PolicyKind::Stack, PolicyKind::Pull] {
            let trips = checked_trips(&model, scene, kind, scene.seed)?;
            if !(best <= trips && trips <= random) {
                return Err(format!(
                    "{kind}: {trips} trips, optimum {best}, random {random}, scene {scene:?}"
                ));
            }
            summary.optimal_runs += (trips == best) as usize;
        }
        summary.consolidated += (best < random) as usize;
    }
    if summary.consolidated == 0 {
        return Err("no scene allowed any consolidation".into());
    }
    Ok(summary)
}

/// A table small enough that most pairs are within reach of each other.
pub fn cramped_generator() -> SceneGenerator {
    SceneGenerator::new(
        Workspace {
            width: 32.0,
            height: 26.0,
        },
        DishTable::default(),
    )
}
