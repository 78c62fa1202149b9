//! Decluttering policies and the simulation loop that runs them.
//!
//! * [`RandomPolicy`]: one stack per trip, chosen by sampling a dish.
//! * [`PullPolicy`]: multi-object grasps first, then pull-grasps, then
//!   single grasps.
//! * [`StackPolicy`]: utensils onto bowls first, then any allowed stacking,
//!   then single grasps.
//!
//! Policies are stateless; the state is re-read after every action.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{merge, Action, ActionError, ActionModel, StackAction, TraceEvent};
use crate::rng::{derive_seed, SimRng};
use crate::tableware::{DishId, DishKind, SceneState, Stack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Random,
    Stack,
    Pull,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Random, PolicyKind::Stack, PolicyKind::Pull];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Stack => "stack",
            PolicyKind::Pull => "pull",
        }
    }

    pub fn ordinal(self) -> u64 {
        match self {
            PolicyKind::Random => 0,
            PolicyKind::Stack => 1,
            PolicyKind::Pull => 2,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(PolicyKind::Random),
            "stack" => Ok(PolicyKind::Stack),
            "pull" => Ok(PolicyKind::Pull),
            _ => Err(format!(
                "unknown policy `{s}` (expected random, pull or stack)"
            )),
        }
    }
}

/// How the stack policy clears utensils while bowls remain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtensilStacking {
    /// One utensil onto one bowl per trip.
    #[default]
    OnePerBowl,
    /// Every remaining utensil onto a single bowl, then one trip.
    AllOnOneBowl,
}

/// Order in which candidate pairs are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    /// Smallest separation first; ties go to the lower stack ids.
    NearestFirst,
    /// The pair whose removal leaves the cheapest remainder, counted in
    /// trips under the same action priorities; ties fall back to nearest
    /// first. Scenes with more than [`PLANNING_LIMIT`] stacks use nearest
    /// first.
    #[default]
    FewestTrips,
}

/// Largest number of stacks the fewest-trips lookahead plans over.
pub const PLANNING_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub utensil_stacking: UtensilStacking,
    pub pair_selection: PairSelection,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self::new(PolicyKind::Random)
    }
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            utensil_stacking: UtensilStacking::default(),
            pair_selection: PairSelection::default(),
        }
    }

    pub fn build(&self) -> Box<dyn Policy + Send + Sync> {
        match self.kind {
            PolicyKind::Random => Box::new(RandomPolicy),
            PolicyKind::Pull => Box::new(PullPolicy {
                pair_selection: self.pair_selection,
            }),
            PolicyKind::Stack => Box::new(StackPolicy {
                utensil_stacking: self.utensil_stacking,
                pair_selection: self.pair_selection,
            }),
        }
    }
}

/// A decision procedure over scene states. Returns `None` exactly when the
/// table is clear.
pub trait Policy {
    fn next_action(
        &self,
        state: &SceneState,
        model: &ActionModel,
        rng: &mut SimRng,
    ) -> Result<Option<Action>, ActionError>;
}

fn lowest_id_grasp(
    state: &SceneState,
    model: &ActionModel,
    rng: &mut SimRng,
) -> Result<Option<Action>, ActionError> {
    match state.stacks.iter().map(Stack::id).min() {
        Some(id) => Ok(Some(Action::Grasp(model.grasp_points(state, id, rng)?))),
        None => Ok(None),
    }
}

/// Candidate ordered by `(distance, tiebreak, first id, second id)`.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    tiebreak: f64,
    first: DishId,
    second: DishId,
}

fn nearest_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.dist
        .total_cmp(&b.dist)
        .then(a.tiebreak.total_cmp(&b.tiebreak))
        .then(a.first.cmp(&b.first))
        .then(a.second.cmp(&b.second))
}

fn best(cands: impl Iterator<Item = Candidate>) -> Option<Candidate> {
    cands.min_by(nearest_order)
}

/// A candidate action in the lookahead, as the set of stack indices it
/// clears from the table. `tier` says which kind of action it is.
#[derive(Debug, Clone, Copy)]
struct Move {
    clears: u32,
    tier: u8,
    cand: Candidate,
}

const SINGLE: u8 = u8::MAX;

/// Exhaustive trip count over subsets of the current stacks. `tiers` lists
/// the paired moves available on a subset from the highest priority tier
/// that has any; when it has none, each stack is carried on its own.
struct Lookahead<F> {
    ids: Vec<DishId>,
    tiers: F,
    memo: Vec<u8>,
}

const UNSOLVED: u8 = u8::MAX;

impl<F: Fn(u32) -> Vec<Move>> Lookahead<F> {
    fn new(ids: Vec<DishId>, tiers: F) -> Self {
        let memo = vec![UNSOLVED; 1 << ids.len()];
        Self { ids, tiers, memo }
    }

    fn trips(&mut self, mask: u32) -> u8 {
        if mask == 0 {
            return 0;
        }
        if self.memo[mask as usize] != UNSOLVED {
            return self.memo[mask as usize];
        }
        let v = self
            .moves(mask)
            .iter()
            .map(|m| 1 + self.trips(mask & !m.clears))
            .min()
            .expect("a non-empty table always has a move");
        self.memo[mask as usize] = v;
        v
    }

    fn moves(&self, mask: u32) -> Vec<Move> {
        let moves = (self.tiers)(mask);
        if !moves.is_empty() {
            return moves;
        }
        (0..self.ids.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| Move {
                clears: 1 << i,
                tier: SINGLE,
                cand: Candidate {
                    dist: 0.0,
                    tiebreak: 0.0,
                    first: self.ids[i],
                    second: self.ids[i],
                },
            })
            .collect()
    }

    /// Move on the whole table with the fewest total trips.
    fn choose(&mut self) -> Move {
        let mask = full_mask(self.ids.len());
        let scored: Vec<(u8, Move)> = self
            .moves(mask)
            .into_iter()
            .map(|m| (1 + self.trips(mask & !m.clears), m))
            .collect();
        scored
            .into_iter()
            .min_by(|(ta, a), (tb, b)| ta.cmp(tb).then(nearest_order(&a.cand, &b.cand)))
            .expect("a non-empty table always has a move")
            .1
    }
}

fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn bit(i: usize) -> u32 {
    1 << i
}

fn plans_ahead(sel: PairSelection, state: &SceneState) -> bool {
    sel == PairSelection::FewestTrips && state.stacks.len() <= PLANNING_LIMIT
}

/// Stack-agnostic baseline: samples a dish uniformly and carries the stack
/// holding it.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn next_action(
        &self,
        state: &SceneState,
        model: &ActionModel,
        rng: &mut SimRng,
    ) -> Result<Option<Action>, ActionError> {
        let n = state.dishes_on_table();
        if n == 0 {
            return Ok(None);
        }
        let mut k = rng.index(n);
        let stack = state
            .stacks
            .iter()
            .find(|s| {
                if k < s.len() {
                    true
                } else {
                    k -= s.len();
                    false
                }
            })
            .expect("index within dish count");
        Ok(Some(Action::Grasp(model.grasp_points(
            state,
            stack.id(),
            rng,
        )?)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PullPolicy {
    pub pair_selection: PairSelection,
}

const MOG: u8 = 0;
const PULL: u8 = 1;

impl PullPolicy {
    fn mog_moves(state: &SceneState, model: &ActionModel) -> Vec<Move> {
        let stacks = &state.stacks;
        let mut out = Vec::new();
        for (i, a) in stacks.iter().enumerate() {
            for (j, b) in stacks.iter().enumerate().skip(i + 1) {
                if model.mog_allowable(state, a.id(), b.id()).is_some() {
                    out.push(Move {
                        clears: bit(i) | bit(j),
                        tier: MOG,
                        cand: Candidate {
                            dist: model.locus_gap(a, b),
                            tiebreak: 0.0,
                            first: a.id().min(b.id()),
                            second: a.id().max(b.id()),
                        },
                    });
                }
            }
        }
        out
    }

    /// Every pull that is possible once its blockers are gone, with the
    /// blockers as a mask.
    fn pull_moves(state: &SceneState, model: &ActionModel) -> Vec<(Move, u32)> {
        let stacks = &state.stacks;
        let mut out = Vec::new();
        for (i, m) in stacks.iter().enumerate() {
            for (j, a) in stacks.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Some(blockers) = model.pull_blockers(state, m.id(), a.id()) else {
                    continue;
                };
                let blocked = blockers
                    .iter()
                    .map(|&id| bit(state.stack_index(id).expect("blocker on the table")))
                    .fold(0, |acc, b| acc | b);
                let mv = Move {
                    clears: bit(i) | bit(j),
                    tier: PULL,
                    cand: Candidate {
                        dist: model.locus_gap(m, a),
                        tiebreak: m.footprint(&model.specs).circumradius(),
                        first: m.id(),
                        second: a.id(),
                    },
                };
                out.push((mv, blocked));
            }
        }
        out
    }

    fn planned(&self, state: &SceneState, model: &ActionModel) -> Move {
        let mogs = Self::mog_moves(state, model);
        let pulls = Self::pull_moves(state, model);
        let ids = state.stacks.iter().map(Stack::id).collect();
        let tiers = |mask: u32| {
            let m: Vec<Move> = mogs
                .iter()
                .filter(|m| m.clears & mask == m.clears)
                .copied()
                .collect();
            if !m.is_empty() {
                return m;
            }
            pulls
                .iter()
                .filter(|(m, blocked)| m.clears & mask == m.clears && blocked & mask == 0)
                .map(|(m, _)| *m)
                .collect()
        };
        Lookahead::new(ids, tiers).choose()
    }

    fn pull_grasp(
        state: &SceneState,
        model: &ActionModel,
        mover: DishId,
        anchor: DishId,
    ) -> Result<Action, ActionError> {
        let pull = model.plan_pull(state, mover, anchor)?;
        let staged = model.after_pull(state, &pull)?;
        let grasp = model
            .mog_allowable(&staged, mover, anchor)
            .expect("pull_allowable implies a post-pull multi-object grasp");
        Ok(Action::PullGrasp { pull, grasp })
    }
}

impl Policy for PullPolicy {
    fn next_action(
        &self,
        state: &SceneState,
        model: &ActionModel,
        rng: &mut SimRng,
    ) -> Result<Option<Action>, ActionError> {
        if state.is_clear() {
            return Ok(None);
        }
        if plans_ahead(self.pair_selection, state) {
            let mv = self.planned(state, model);
            let c = mv.cand;
            return match mv.tier {
                MOG => Ok(model
                    .mog_allowable(state, c.first, c.second)
                    .map(Action::Grasp)),
                PULL => Self::pull_grasp(state, model, c.first, c.second).map(Some),
                _ => Ok(Some(Action::Grasp(
                    model.grasp_points(state, c.first, rng)?,
                ))),
            };
        }

        if let Some(c) = best(Self::mog_moves(state, model).into_iter().map(|m| m.cand)) {
            return Ok(model
                .mog_allowable(state, c.first, c.second)
                .map(Action::Grasp));
        }
        let pulls = Self::pull_moves(state, model)
            .into_iter()
            .filter(|(_, blocked)| *blocked == 0)
            .map(|(m, _)| m.cand);
        if let Some(c) = best(pulls) {
            return Self::pull_grasp(state, model, c.first, c.second).map(Some);
        }
        lowest_id_grasp(state, model, rng)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StackPolicy {
    pub utensil_stacking: UtensilStacking,
    pub pair_selection: PairSelection,
}

impl StackPolicy {
    fn stack_grasp(
        &self,
        state: &SceneState,
        model: &ActionModel,
        placements: Vec<StackAction>,
        base: DishId,
        rng: &mut SimRng,
    ) -> Result<Action, ActionError> {
        let merged = model.after_stacking(state, &placements)?;
        let grasp = model.grasp_points(&merged, base, rng)?;
        Ok(Action::StackGrasp {
            stacks: placements,
            grasp,
        })
    }

    fn utensil_pairs(state: &SceneState, model: &ActionModel) -> Vec<Move> {
        let stacks = &state.stacks;
        let mut out = Vec::new();
        for (i, u) in stacks.iter().enumerate() {
            if u.bottom().kind != DishKind::Utensil {
                continue;
            }
            for (j, b) in stacks.iter().enumerate() {
                if b.top().kind == DishKind::Bowl && model.stack_between(u, b) {
                    out.push(Move {
                        clears: bit(i) | bit(j),
                        tier: UTENSIL,
                        cand: Candidate {
                            dist: u.base.distance(b.base),
                            tiebreak: 0.0,
                            first: u.id(),
                            second: b.id(),
                        },
                    });
                }
            }
        }
        out
    }

    fn stack_pairs(state: &SceneState, model: &ActionModel) -> Vec<Move> {
        let stacks = &state.stacks;
        let mut out = Vec::new();
        for (i, l) in stacks.iter().enumerate() {
            for (j, b) in stacks.iter().enumerate() {
                if model.stack_between(l, b) {
                    out.push(Move {
                        clears: bit(i) | bit(j),
                        tier: STACK,
                        cand: Candidate {
                            dist: l.base.distance(b.base),
                            tiebreak: 0.0,
                            first: l.id(),
                            second: b.id(),
                        },
                    });
                }
            }
        }
        out
    }

    /// Utensil stacks placed onto `base` after `first`, in the order they are
    /// stacked when every utensil goes onto one bowl.
    fn extra_utensils(
        &self,
        state: &SceneState,
        model: &ActionModel,
        first: DishId,
        base: DishId,
        mask: u32,
    ) -> Vec<usize> {
        if self.utensil_stacking != UtensilStacking::AllOnOneBowl {
            return vec![];
        }
        let bi = state.stack_index(base).expect("candidate");
        let fi = state.stack_index(first).expect("candidate");
        let base_pos = state.stacks[bi].base;
        let mut rest: Vec<usize> = (0..state.stacks.len())
            .filter(|&k| k != fi && mask & bit(k) != 0)
            .filter(|&k| state.stacks[k].bottom().kind == DishKind::Utensil)
            .collect();
        rest.sort_by(|&a, &b| {
            let (sa, sb) = (&state.stacks[a], &state.stacks[b]);
            sa.base
                .distance(base_pos)
                .total_cmp(&sb.base.distance(base_pos))
                .then(sa.id().cmp(&sb.id()))
        });
        let mut pile = merge(&state.stacks[bi], &state.stacks[fi]);
        let mut out = Vec::new();
        for k in rest {
            if model.stack_between(&state.stacks[k], &pile) {
                pile = merge(&pile, &state.stacks[k]);
                out.push(k);
            }
        }
        out
    }

    fn utensil_stack_grasp(
        &self,
        state: &SceneState,
        model: &ActionModel,
        first: DishId,
        base: DishId,
        rng: &mut SimRng,
    ) -> Result<Action, ActionError> {
        let mut placements = vec![model.plan_stack(state, first, base, rng)?];
        let mut staged = model.after_stacking(state, &placements)?;
        let mask = full_mask(state.stacks.len());
        for k in self.extra_utensils(state, model, first, base, mask) {
            let p = model.plan_stack(&staged, state.stacks[k].id(), base, rng)?;
            staged = model.after_stacking(&staged, std::slice::from_ref(&p))?;
            placements.push(p);
        }
        self.stack_grasp(state, model, placements, base, rng)
    }

    fn planned(&self, state: &SceneState, model: &ActionModel) -> Move {
        let utensil = Self::utensil_pairs(state, model);
        let pairs = Self::stack_pairs(state, model);
        let ids = state.stacks.iter().map(Stack::id).collect();
        let tiers = |mask: u32| {
            let u: Vec<Move> = utensil
                .iter()
                .filter(|m| m.clears & mask == m.clears)
                .map(|m| {
                    let extra = self
                        .extra_utensils(state, model, m.cand.first, m.cand.second, mask)
                        .into_iter()
                        .fold(0, |acc, k| acc | bit(k));
                    Move {
                        clears: m.clears | extra,
                        ..*m
                    }
                })
                .collect();
            if !u.is_empty() {
                return u;
            }
            pairs
                .iter()
                .filter(|m| m.clears & mask == m.clears)
                .copied()
                .collect()
        };
        Lookahead::new(ids, tiers).choose()
    }
}

const UTENSIL: u8 = 0;
const STACK: u8 = 1;

impl Policy for StackPolicy {
    fn next_action(
        &self,
        state: &SceneState,
        model: &ActionModel,
        rng: &mut SimRng,
    ) -> Result<Option<Action>, ActionError> {
        if state.is_clear() {
            return Ok(None);
        }
        // Each stack-grasp carries the merged pile away at once, so no pile
        // is ever built from more than two existing stacks.
        let (tier, c) = if plans_ahead(self.pair_selection, state) {
            let mv = self.planned(state, model);
            (mv.tier, mv.cand)
        } else if let Some(c) = best(
            Self::utensil_pairs(state, model)
                .into_iter()
                .map(|m| m.cand),
        ) {
            (UTENSIL, c)
        } else if let Some(c) = best(Self::stack_pairs(state, model).into_iter().map(|m| m.cand)) {
            (STACK, c)
        } else {
            return lowest_id_grasp(state, model, rng);
        };
        match tier {
            UTENSIL => self
                .utensil_stack_grasp(state, model, c.first, c.second, rng)
                .map(Some),
            STACK => {
                let placement = model.plan_stack(state, c.first, c.second, rng)?;
                self.stack_grasp(state, model, vec![placement], c.second, rng)
                    .map(Some)
            }
            _ => Ok(Some(Action::Grasp(
                model.grasp_points(state, c.first, rng)?,
            ))),
        }
    }
}

/// Action counts of a finished trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionCounts {
    pub grasps: u32,
    pub pulls: u32,
    pub stacks: u32,
    pub trips: u32,
    pub failures: u32,
    pub objects: u32,
}

/// Ordered record of one policy run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub final_state: SceneState,
    pub counts: ActionCounts,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("action {step} ({action}) rejected: {source}")]
    Infeasible {
        step: usize,
        action: String,
        #[source]
        source: ActionError,
    },
    #[error("policy failed to clear the table within {0} actions")]
    Stalled(usize),
    #[error("failure probability {0} outside [0, 1)")]
    BadFailureRate(f64),
}

/// Runs one trial: queries the policy, applies its actions and records the
/// trace until the table is clear. With `p_fail > 0` each action's final
/// grasp independently slips with that probability.
pub fn run_policy(
    initial: &SceneState,
    policy: &PolicyConfig,
    model: &ActionModel,
    seed: u64,
    p_fail: f64,
) -> Result<Trace, SimError> {
    if !(0.0..1.0).contains(&p_fail) {
        return Err(SimError::BadFailureRate(p_fail));
    }
    let decider = policy.build();
    let mut policy_rng = SimRng::new(derive_seed(seed, &[1]));
    let mut failure_rng = SimRng::new(derive_seed(seed, &[2]));
    let limit = 50 * initial.dish_count.max(1) + 10;

    let mut state = initial.clone();
    let mut events = Vec::new();
    let mut counts = ActionCounts::default();
    let reject = |step: usize, action: &Action, source| SimError::Infeasible {
        step,
        action: action.name().to_string(),
        source,
    };
    loop {
        let step = events.len();
        let action = decider
            .next_action(&state, model, &mut policy_rng)
            .map_err(|source| SimError::Infeasible {
                step,
                action: "plan".into(),
                source,
            })?;
        let Some(action) = action else { break };
        if step >= limit {
            return Err(SimError::Stalled(limit));
        }
        let failed = failure_rng.chance(p_fail);
        let applied = if failed {
            model.apply_failed(&state, &action)
        } else {
            model.apply(&state, &action)
        }
        .map_err(|e| reject(step, &action, e))?;

        counts.grasps += 1;
        counts.pulls += action.pull_count();
        counts.stacks += action.stack_count();
        counts.trips += applied.trip as u32;
        counts.failures += failed as u32;
        counts.objects += applied.moved_to_bin.len() as u32;
        events.push(TraceEvent::new(step, &action, &applied, failed));
        state = applied.state;
    }
    Ok(Trace {
        events,
        final_state: state,
        counts,
    })
}
