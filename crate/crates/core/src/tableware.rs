//! Dishes, stacks, scene state, and the tiered random scene generator.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_half_turn, overlaps, Footprint, Point2};
use crate::rng::SimRng;

/// Resamples allowed per dish before generation gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DishKind {
    Cup,
    Bowl,
    Utensil,
}

impl DishKind {
    pub const ALL: [DishKind; 3] = [DishKind::Cup, DishKind::Bowl, DishKind::Utensil];

    pub fn as_str(self) -> &'static str {
        match self {
            DishKind::Cup => "cup",
            DishKind::Bowl => "bowl",
            DishKind::Utensil => "utensil",
        }
    }
}

impl fmt::Display for DishKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DishKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cup" => Ok(DishKind::Cup),
            "bowl" => Ok(DishKind::Bowl),
            "utensil" => Ok(DishKind::Utensil),
            other => Err(format!("unknown dish kind `{other}`")),
        }
    }
}

/// Top-down outline of a dish: circular for cups and bowls, a flat bar for
/// utensils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DishShape {
    Round { radius: f64 },
    Flat { length: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DishSpec {
    #[serde(flatten)]
    pub shape: DishShape,
    /// Height of the lip (or grasp point) above the table.
    pub grasp_height: f64,
    /// Vertical rise added by each dish nested on top of another.
    pub nest_offset: f64,
}

impl DishSpec {
    /// Radius compared by the stacking rule. Utensils report zero so they
    /// may rest on anything while nothing round may rest on them.
    pub fn stacking_radius(&self) -> f64 {
        match self.shape {
            DishShape::Round { radius } => radius,
            DishShape::Flat { .. } => 0.0,
        }
    }

    pub fn circumradius(&self) -> f64 {
        match self.shape {
            DishShape::Round { radius } => radius,
            DishShape::Flat { length, width } => (0.5 * length).hypot(0.5 * width),
        }
    }

    pub fn footprint(&self, center: Point2, theta: f64) -> Footprint {
        match self.shape {
            DishShape::Round { radius } => Footprint::disc(center, radius),
            DishShape::Flat { length, width } => Footprint::rect(center, length, width, theta),
        }
    }

    fn is_valid(&self, kind: DishKind) -> bool {
        let shape_ok = match (kind, self.shape) {
            (DishKind::Utensil, DishShape::Flat { length, width }) => {
                width > 0.0 && length >= width
            }
            (DishKind::Cup | DishKind::Bowl, DishShape::Round { radius }) => radius > 0.0,
            _ => false,
        };
        let nest_ok = match kind {
            DishKind::Utensil => self.nest_offset >= 0.0,
            _ => self.nest_offset > 0.0,
        };
        shape_ok && nest_ok && self.grasp_height > 0.0
    }
}

/// Dimensions of every dish kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DishTable {
    pub cup: DishSpec,
    pub bowl: DishSpec,
    pub utensil: DishSpec,
}

impl Default for DishTable {
    fn default() -> Self {
        Self {
            cup: DishSpec {
                shape: DishShape::Round { radius: 4.5 },
                grasp_height: 9.0,
                nest_offset: 2.0,
            },
            bowl: DishSpec {
                shape: DishShape::Round { radius: 8.5 },
                grasp_height: 5.0,
                nest_offset: 2.0,
            },
            utensil: DishSpec {
                shape: DishShape::Flat {
                    length: 17.0,
                    width: 1.8,
                },
                grasp_height: 2.0,
                nest_offset: 0.5,
            },
        }
    }
}

impl DishTable {
    pub fn get(&self, kind: DishKind) -> &DishSpec {
        match kind {
            DishKind::Cup => &self.cup,
            DishKind::Bowl => &self.bowl,
            DishKind::Utensil => &self.utensil,
        }
    }

    pub fn is_valid(&self) -> bool {
        DishKind::ALL.iter().all(|&k| self.get(k).is_valid(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DishId(pub u32);

impl fmt::Display for DishId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One tableware item. Its position is the base of the stack holding it;
/// `theta` is only meaningful for utensils.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dish {
    pub id: DishId,
    pub kind: DishKind,
    pub theta: f64,
}

/// A pile of dishes sharing a base position, listed bottom to top. A stack is
/// identified by the id of its bottom dish, which survives merges.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub base: Point2,
    pub dishes: Vec<Dish>,
}

impl Stack {
    pub fn single(dish: Dish, base: Point2) -> Self {
        Self {
            base,
            dishes: vec![dish],
        }
    }

    pub fn id(&self) -> DishId {
        self.bottom().id
    }

    pub fn bottom(&self) -> &Dish {
        &self.dishes[0]
    }

    pub fn top(&self) -> &Dish {
        self.dishes.last().expect("stacks are non-empty")
    }

    pub fn len(&self) -> usize {
        self.dishes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dishes.is_empty()
    }

    /// The bottom dish's outline; everything above it nests inside.
    pub fn footprint(&self, specs: &DishTable) -> Footprint {
        let b = self.bottom();
        specs.get(b.kind).footprint(self.base, b.theta)
    }

    pub fn ids(&self) -> impl Iterator<Item = DishId> + '_ {
        self.dishes.iter().map(|d| d.id)
    }

    /// True when radii never increase from bottom to top.
    pub fn is_stable(&self, specs: &DishTable) -> bool {
        self.dishes.windows(2).all(|w| {
            specs.get(w[1].kind).stacking_radius() <= specs.get(w[0].kind).stacking_radius()
        })
    }
}

/// Height of the top dish's lip: the bottom dish's grasp height plus the
/// nesting rise of every dish above it.
pub fn stack_top_lip_height(stack: &Stack, specs: &DishTable) -> f64 {
    let base = specs.get(stack.bottom().kind).grasp_height;
    base + stack.dishes[1..]
        .iter()
        .map(|d| specs.get(d.kind).nest_offset)
        .sum::<f64>()
}

/// Lip-to-lip rise between the top and bottom dish of a stack.
pub fn stack_rise(stack: &Stack, specs: &DishTable) -> f64 {
    stack_top_lip_height(stack, specs) - specs.get(stack.bottom().kind).grasp_height
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub width: f64,
    pub height: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            width: 78.0,
            height: 61.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "t0_cups")]
    T0Cups,
    #[serde(rename = "t0_bowls")]
    T0Bowls,
    #[serde(rename = "t0_utensils")]
    T0Utensils,
    #[serde(rename = "t1")]
    T1,
    #[serde(rename = "t2")]
    T2,
    #[serde(rename = "custom")]
    Custom,
}

impl Tier {
    pub const STANDARD: [Tier; 5] = [
        Tier::T0Cups,
        Tier::T0Bowls,
        Tier::T0Utensils,
        Tier::T1,
        Tier::T2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::T0Cups => "t0_cups",
            Tier::T0Bowls => "t0_bowls",
            Tier::T0Utensils => "t0_utensils",
            Tier::T1 => "t1",
            Tier::T2 => "t2",
            Tier::Custom => "custom",
        }
    }

    /// Position in the standard tier list; stable label for seed derivation.
    pub fn ordinal(self) -> u64 {
        match self {
            Tier::T0Cups => 0,
            Tier::T0Bowls => 1,
            Tier::T0Utensils => 2,
            Tier::T1 => 3,
            Tier::T2 => 4,
            Tier::Custom => 5,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "t0_cups" | "t0cups" => Ok(Tier::T0Cups),
            "t0_bowls" | "t0bowls" => Ok(Tier::T0Bowls),
            "t0_utensils" | "t0utensils" => Ok(Tier::T0Utensils),
            "t1" => Ok(Tier::T1),
            "t2" => Ok(Tier::T2),
            "custom" => Ok(Tier::Custom),
            _ => Err(format!(
                "unknown tier `{s}` (expected t0_cups, t0_bowls, t0_utensils, t1, t2)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierConfig {
    pub tier: Tier,
    pub cups: usize,
    pub bowls: usize,
    pub utensils: usize,
    pub max_intersections: usize,
    pub max_initial_stack: usize,
}

impl TierConfig {
    pub fn standard(tier: Tier) -> Self {
        let (cups, bowls, utensils, max_intersections, max_initial_stack) = match tier {
            Tier::T0Cups => (6, 0, 0, 0, 1),
            Tier::T0Bowls => (0, 6, 0, 0, 1),
            Tier::T0Utensils => (0, 0, 6, 0, 1),
            Tier::T1 => (4, 4, 4, 0, 1),
            Tier::T2 => (4, 4, 4, 4, 3),
            Tier::Custom => (0, 0, 0, 0, 1),
        };
        Self {
            tier,
            cups,
            bowls,
            utensils,
            max_intersections,
            max_initial_stack,
        }
    }

    pub fn custom(
        cups: usize,
        bowls: usize,
        utensils: usize,
        max_intersections: usize,
        max_initial_stack: usize,
    ) -> Self {
        Self {
            tier: Tier::Custom,
            cups,
            bowls,
            utensils,
            max_intersections,
            max_initial_stack,
        }
    }

    pub fn total(&self) -> usize {
        self.cups + self.bowls + self.utensils
    }

    pub fn check(&self) -> Result<(), SceneError> {
        if self.max_initial_stack == 0 {
            return Err(SceneError::InvalidConfig(
                "max_initial_stack must be at least 1".into(),
            ));
        }
        if self.tier != Tier::Custom && *self != TierConfig::standard(self.tier) {
            return Err(SceneError::InvalidConfig(format!(
                "tier {} has non-standard counts or limits",
                self.tier
            )));
        }
        Ok(())
    }
}

/// Workspace contents at one instant: stacks on the table plus everything
/// already deposited in the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub workspace: Workspace,
    pub tier: Tier,
    pub seed: u64,
    pub stacks: Vec<Stack>,
    pub bin: Vec<DishId>,
    pub trips_taken: u32,
    /// Dish ids are exactly `0..dish_count`.
    pub dish_count: usize,
}

impl SceneState {
    pub fn stack(&self, id: DishId) -> Option<&Stack> {
        self.stacks.iter().find(|s| s.id() == id)
    }

    pub fn stack_index(&self, id: DishId) -> Option<usize> {
        self.stacks.iter().position(|s| s.id() == id)
    }

    pub fn is_clear(&self) -> bool {
        self.stacks.is_empty()
    }

    pub fn dishes_on_table(&self) -> usize {
        self.stacks.iter().map(Stack::len).sum()
    }

    pub fn stack_ids(&self) -> Vec<DishId> {
        self.stacks.iter().map(Stack::id).collect()
    }

    /// Footprints of all on-table stacks except those listed.
    pub fn obstacles_except(&self, skip: &[DishId], specs: &DishTable) -> Vec<Footprint> {
        self.stacks
            .iter()
            .filter(|s| !skip.contains(&s.id()))
            .map(|s| s.footprint(specs))
            .collect()
    }
}

/// A broken scene invariant, as reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyStack { index: usize },
    UnknownDish(DishId),
    DuplicateDish(DishId),
    MissingDish(DishId),
    NonFinitePose { stack: DishId },
    BadUtensilAngle { dish: DishId },
    OutOfWorkspace { stack: DishId },
    Overlap { a: DishId, b: DishId },
    StackStability { stack: DishId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyStack { index } => write!(f, "empty stack at index {index}"),
            Violation::UnknownDish(id) => write!(f, "unknown dish id {id}"),
            Violation::DuplicateDish(id) => write!(f, "dish {id} appears more than once"),
            Violation::MissingDish(id) => {
                write!(f, "dish {id} is neither on the table nor in the bin")
            }
            Violation::NonFinitePose { stack } => {
                write!(f, "non-finite position for stack {stack}")
            }
            Violation::BadUtensilAngle { dish } => {
                write!(f, "utensil {dish} orientation outside [0, pi)")
            }
            Violation::OutOfWorkspace { stack } => write!(f, "out of workspace: stack {stack}"),
            Violation::Overlap { a, b } => write!(f, "stacks {a} and {b} overlap"),
            Violation::StackStability { stack } => {
                write!(f, "stack stability violated: stack {stack}")
            }
        }
    }
}

/// Checks every scene and stack invariant; an empty result means the state
/// is well formed.
pub fn validate(state: &SceneState, specs: &DishTable) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut note = |id: DishId, out: &mut Vec<Violation>| {
        if id.0 as usize >= state.dish_count {
            out.push(Violation::UnknownDish(id));
        } else if !seen.insert(id) {
            out.push(Violation::DuplicateDish(id));
        }
    };
    for (index, stack) in state.stacks.iter().enumerate() {
        if stack.is_empty() {
            out.push(Violation::EmptyStack { index });
            continue;
        }
        for d in &stack.dishes {
            note(d.id, &mut out);
            if d.kind == DishKind::Utensil && !(0.0..PI).contains(&d.theta) {
                out.push(Violation::BadUtensilAngle { dish: d.id });
            }
        }
        if !stack.base.is_finite() {
            out.push(Violation::NonFinitePose { stack: stack.id() });
            continue;
        }
        if !stack.is_stable(specs) {
            out.push(Violation::StackStability { stack: stack.id() });
        }
        let fp = stack.footprint(specs);
        if !fp.inside_workspace(state.workspace.width, state.workspace.height) {
            out.push(Violation::OutOfWorkspace { stack: stack.id() });
        }
    }
    for &id in &state.bin {
        note(id, &mut out);
    }
    for i in 0..state.dish_count {
        let id = DishId(i as u32);
        if !seen.contains(&id) {
            out.push(Violation::MissingDish(id));
        }
    }
    let live: Vec<_> = state
        .stacks
        .iter()
        .filter(|s| !s.is_empty() && s.base.is_finite())
        .map(|s| (s.id(), s.footprint(specs)))
        .collect();
    for (i, (ia, fa)) in live.iter().enumerate() {
        for (ib, fb) in &live[i + 1..] {
            if overlaps(fa, fb) {
                out.push(Violation::Overlap { a: *ia, b: *ib });
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("could not place dish {id} ({kind}) after {attempts} attempts; workspace too crowded")]
    PlacementExhausted {
        id: DishId,
        kind: DishKind,
        attempts: usize,
    },
    #[error("invalid tier configuration: {0}")]
    InvalidConfig(String),
}

/// Rounds to the 6-decimal grid used by scene files, so generated scenes
/// survive a save/load cycle bit for bit.
pub fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Samples tiered scenes inside a fixed workspace.
#[derive(Debug, Clone, Copy, Default)]
pub struct SceneGenerator {
    pub workspace: Workspace,
    pub specs: DishTable,
}

impl SceneGenerator {
    pub fn new(workspace: Workspace, specs: DishTable) -> Self {
        Self { workspace, specs }
    }

    /// Places dishes one at a time at uniform positions (inset by each
    /// footprint's circumradius). A dish landing on exactly one existing
    /// stack is nested on top when the radius ordering, the intersection
    /// budget and the stack-height cap all allow it; any other collision
    /// triggers a resample.
    pub fn generate(&self, cfg: &TierConfig, seed: u64) -> Result<SceneState, SceneError> {
        cfg.check()?;
        if !self.specs.is_valid() {
            return Err(SceneError::InvalidConfig("invalid dish dimensions".into()));
        }
        let mut rng = SimRng::new(seed);
        let mut kinds: Vec<DishKind> = std::iter::repeat_n(DishKind::Cup, cfg.cups)
            .chain(std::iter::repeat_n(DishKind::Bowl, cfg.bowls))
            .chain(std::iter::repeat_n(DishKind::Utensil, cfg.utensils))
            .collect();
        rng.shuffle(&mut kinds);
        kinds.sort_by(|a, b| {
            self.specs
                .get(*b)
                .circumradius()
                .total_cmp(&self.specs.get(*a).circumradius())
        });

        let mut stacks: Vec<Stack> = Vec::with_capacity(kinds.len());
        let mut intersections = 0usize;
        for (i, &kind) in kinds.iter().enumerate() {
            let id = DishId(i as u32);
            let spec = self.specs.get(kind);
            let inset = spec.circumradius();
            let (w, h) = (self.workspace.width, self.workspace.height);
            if 2.0 * inset > w || 2.0 * inset > h {
                return Err(SceneError::InvalidConfig(format!(
                    "{kind} does not fit the workspace"
                )));
            }
            let mut placed = false;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let center = Point2::new(
                    quantize(rng.uniform(inset, w - inset)),
                    quantize(rng.uniform(inset, h - inset)),
                );
                let theta = if kind == DishKind::Utensil {
                    normalize_half_turn(quantize(rng.uniform(0.0, PI)))
                } else {
                    0.0
                };
                let fp = spec.footprint(center, theta);
                let hits: Vec<usize> = stacks
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| overlaps(&fp, &s.footprint(&self.specs)))
                    .map(|(j, _)| j)
                    .collect();
                match hits.as_slice() {
                    [] => {
                        stacks.push(Stack::single(Dish { id, kind, theta }, center));
                        placed = true;
                    }
                    [j] => {
                        let target = &mut stacks[*j];
                        let top = *target.top();
                        let fits =
                            spec.stacking_radius() <= self.specs.get(top.kind).stacking_radius();
                        if fits
                            && intersections < cfg.max_intersections
                            && target.len() < cfg.max_initial_stack
                        {
                            // Nested utensils line up with the one below.
                            let theta =
                                if kind == DishKind::Utensil && top.kind == DishKind::Utensil {
                                    top.theta
                                } else {
                                    theta
                                };
                            target.dishes.push(Dish { id, kind, theta });
                            intersections += 1;
                            placed = true;
                        }
                    }
                    _ => {}
                }
                if placed {
                    break;
                }
            }
            if !placed {
                return Err(SceneError::PlacementExhausted {
                    id,
                    kind,
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                });
            }
        }
        Ok(SceneState {
            workspace: self.workspace,
            tier: cfg.tier,
            seed,
            stacks,
            bin: Vec::new(),
            trips_taken: 0,
            dish_count: kinds.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator() -> SceneGenerator {
        SceneGenerator::default()
    }

    fn count_kind(s: &SceneState, kind: DishKind) -> usize {
        s.stacks
            .iter()
            .flat_map(|st| st.dishes.iter())
            .filter(|d| d.kind == kind)
            .count()
    }

    fn cup(id: u32) -> Dish {
        Dish {
            id: DishId(id),
            kind: DishKind::Cup,
            theta: 0.0,
        }
    }

    fn bowl(id: u32) -> Dish {
        Dish {
            id: DishId(id),
            kind: DishKind::Bowl,
            theta: 0.0,
        }
    }

    fn scene(stacks: Vec<Stack>) -> SceneState {
        let dish_count = stacks.iter().map(Stack::len).sum();
        SceneState {
            workspace: Workspace::default(),
            tier: Tier::Custom,
            seed: 0,
            stacks,
            bin: vec![],
            trips_taken: 0,
            dish_count,
        }
    }

    #[test]
    fn t0_bowls_are_singulated_singletons() {
        let s = generator()
            .generate(&TierConfig::standard(Tier::T0Bowls), 1)
            .unwrap();
        assert_eq!(s.stacks.len(), 6);
        assert!(s
            .stacks
            .iter()
            .all(|st| st.len() == 1 && st.bottom().kind == DishKind::Bowl));
        assert!(validate(&s, &DishTable::default()).is_empty());
    }

    #[test]
    fn t1_has_four_of_each_and_no_stacks() {
        let s = generator()
            .generate(&TierConfig::standard(Tier::T1), 7)
            .unwrap();
        assert_eq!(s.stacks.len(), 12);
        for k in DishKind::ALL {
            assert_eq!(count_kind(&s, k), 4);
        }
    }

    #[test]
    fn t2_stacks_respect_limits() {
        let specs = DishTable::default();
        let s = generator()
            .generate(&TierConfig::standard(Tier::T2), 3)
            .unwrap();
        assert_eq!(s.dishes_on_table(), 12);
        assert!(s
            .stacks
            .iter()
            .all(|st| st.len() <= 3 && st.is_stable(&specs)));
        assert!(validate(&s, &specs).is_empty());
    }

    #[test]
    fn t2_corpus_limits_hold() {
        let specs = DishTable::default();
        let cfg = TierConfig::standard(Tier::T2);
        for seed in 0..1000 {
            let s = generator().generate(&cfg, seed).unwrap();
            let intersections = 12 - s.stacks.len();
            assert!(intersections <= 4, "seed {seed}: {intersections}");
            assert!(s.stacks.iter().all(|st| st.len() <= 3));
            assert!(validate(&s, &specs).is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn crowded_workspace_is_reported() {
        let g = SceneGenerator::new(
            Workspace {
                width: 20.0,
                height: 20.0,
            },
            DishTable::default(),
        );
        let err = g
            .generate(&TierConfig::custom(0, 5, 0, 0, 1), 1)
            .unwrap_err();
        assert!(matches!(err, SceneError::PlacementExhausted { .. }));
    }

    #[test]
    fn non_standard_tier_counts_rejected() {
        let mut cfg = TierConfig::standard(Tier::T1);
        cfg.cups = 5;
        assert!(matches!(cfg.check(), Err(SceneError::InvalidConfig(_))));
    }

    #[test]
    fn bowl_on_cup_is_unstable() {
        let specs = DishTable::default();
        let s = scene(vec![Stack {
            base: Point2::new(30.0, 30.0),
            dishes: vec![cup(0), bowl(1)],
        }]);
        assert_eq!(
            validate(&s, &specs),
            vec![Violation::StackStability { stack: DishId(0) }]
        );
        assert!(validate(&s, &specs)[0]
            .to_string()
            .starts_with("stack stability violated"));
    }

    #[test]
    fn outside_dish_is_reported() {
        let s = scene(vec![Stack::single(cup(0), Point2::new(100.0, 10.0))]);
        let v = validate(&s, &DishTable::default());
        assert_eq!(v, vec![Violation::OutOfWorkspace { stack: DishId(0) }]);
        assert!(v[0].to_string().starts_with("out of workspace"));
    }

    #[test]
    fn conservation_violations_are_reported() {
        let mut s = scene(vec![Stack::single(cup(0), Point2::new(20.0, 20.0))]);
        s.dish_count = 2;
        s.bin = vec![DishId(0)];
        let v = validate(&s, &DishTable::default());
        assert!(v.contains(&Violation::DuplicateDish(DishId(0))));
        assert!(v.contains(&Violation::MissingDish(DishId(1))));
    }

    #[test]
    fn lip_heights() {
        let specs = DishTable::default();
        let single_bowl = Stack::single(bowl(0), Point2::default());
        assert_eq!(stack_top_lip_height(&single_bowl, &specs), 5.0);

        let cups = |n: u32| Stack {
            base: Point2::default(),
            dishes: (0..n).map(cup).collect(),
        };
        // summation oracle: grasp height plus (n-1) nesting rises
        for n in 1..=6u32 {
            let expected = 9.0 + (n - 1) as f64 * 2.0;
            assert_eq!(stack_top_lip_height(&cups(n), &specs), expected);
        }
        assert_eq!(stack_top_lip_height(&cups(3), &specs), 13.0);
        assert_eq!(stack_top_lip_height(&cups(4), &specs), 15.0);
        assert!(stack_rise(&cups(4), &specs) > 4.5);
        assert!(stack_rise(&cups(3), &specs) <= 4.5);
    }

    #[test]
    fn default_nest_offsets_sit_in_the_admissible_band() {
        // With jaw height 4.5 the 4th nested dish must exceed the jaws while
        // the 3rd must not: 3δ > 4.5 and 2δ <= 4.5.
        let specs = DishTable::default();
        for k in [DishKind::Cup, DishKind::Bowl] {
            let d = specs.get(k).nest_offset;
            assert!(d > 1.5 && d <= 2.25, "{k}: {d}");
        }
    }

    #[test]
    fn dish_table_parses_from_toml() {
        let text = r#"
            [cup]
            radius = 4.5
            grasp_height = 9.0
            nest_offset = 2.0
            [bowl]
            radius = 8.5
            grasp_height = 5.0
            nest_offset = 2.0
            [utensil]
            length = 17.0
            width = 1.8
            grasp_height = 2.0
            nest_offset = 0.5
        "#;
        let t: DishTable = toml::from_str(text).unwrap();
        assert_eq!(t, DishTable::default());
    }

    #[test]
    fn tier_names_round_trip() {
        for t in Tier::STANDARD {
            assert_eq!(t.as_str().parse::<Tier>().unwrap(), t);
        }
        assert!("t9".parse::<Tier>().is_err());
    }
}
