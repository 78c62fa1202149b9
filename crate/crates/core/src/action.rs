//! Grasp, pull-grasp and stack-grasp actions: their parameters, the rules
//! deciding when each is allowed, grasp-point construction, and the state
//! transition that executes them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    corridor_clear, nearest_points, normalize_half_turn, overlaps, rim_point, separation, Curve,
    Footprint, Point2,
};
use crate::rng::SimRng;
use crate::tableware::{
    stack_rise, stack_top_lip_height, DishId, DishKind, DishShape, DishTable, SceneState, Stack,
};

/// Tolerance on the pull end point: the mover must finish within this gap of
/// the anchor.
pub const PULL_CONTACT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperSpec {
    /// Maximum inside opening of the jaws.
    pub max_opening: f64,
    /// Height of the jaws; bounds the lip-to-lip rise of a graspable stack.
    pub jaw_height: f64,
    pub closed_width: f64,
    /// Largest lip-height difference allowed in a multi-object grasp.
    pub height_similarity_threshold: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self {
            max_opening: 8.5,
            jaw_height: 4.5,
            closed_width: 2.0,
            height_similarity_threshold: 1.0,
        }
    }
}

impl GripperSpec {
    pub fn is_valid(&self) -> bool {
        self.max_opening > 0.0
            && self.jaw_height > 0.0
            && self.closed_width > 0.0
            && self.height_similarity_threshold > 0.0
            && self.closed_width < self.max_opening
    }
}

/// Top-down grasp: gripper center, approach height and jaw orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspAction {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    /// One stack, or two for a multi-object grasp.
    pub targets: Vec<DishId>,
}

impl GraspAction {
    pub fn point(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Drag `mover` from `start` to `end`, where it comes to rest against `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullAction {
    pub start: [f64; 3],
    pub theta_start: f64,
    pub end: [f64; 3],
    pub theta_end: f64,
    pub mover: DishId,
    pub anchor: DishId,
}

impl PullAction {
    pub fn end_point(&self) -> Point2 {
        Point2::new(self.end[0], self.end[1])
    }
}

/// Lift `lifted` with `inner_grasp` and set it down on `base` at `place`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackAction {
    pub inner_grasp: GraspAction,
    pub place: [f64; 3],
    pub theta_place: f64,
    pub lifted: DishId,
    pub base: DishId,
}

/// One policy step. Every variant ends with a grasp that carries its target
/// stacks to the bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Grasp(GraspAction),
    PullGrasp {
        pull: PullAction,
        grasp: GraspAction,
    },
    /// One or more stack placements onto the same base, then a grasp of the
    /// merged stack.
    StackGrasp {
        stacks: Vec<StackAction>,
        grasp: GraspAction,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Grasp(_) => "grasp",
            Action::PullGrasp { .. } => "pull_grasp",
            Action::StackGrasp { .. } => "stack_grasp",
        }
    }

    /// Every stack the action touches.
    pub fn targets(&self) -> Vec<DishId> {
        match self {
            Action::Grasp(g) => g.targets.clone(),
            Action::PullGrasp { pull, .. } => vec![pull.mover, pull.anchor],
            Action::StackGrasp { stacks, grasp } => stacks
                .iter()
                .map(|s| s.lifted)
                .chain(grasp.targets.iter().copied())
                .collect(),
        }
    }

    pub fn final_grasp(&self) -> &GraspAction {
        match self {
            Action::Grasp(g) => g,
            Action::PullGrasp { grasp, .. } | Action::StackGrasp { grasp, .. } => grasp,
        }
    }

    pub fn pull_count(&self) -> u32 {
        matches!(self, Action::PullGrasp { .. }) as u32
    }

    pub fn stack_count(&self) -> u32 {
        match self {
            Action::StackGrasp { stacks, .. } => stacks.len() as u32,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("stack {0} is not on the table")]
    UnknownStack(DishId),
    #[error("infeasible action: {predicate} failed ({detail})")]
    Infeasible {
        predicate: &'static str,
        detail: String,
    },
}

fn infeasible(predicate: &'static str, detail: impl Into<String>) -> ActionError {
    ActionError::Infeasible {
        predicate,
        detail: detail.into(),
    }
}

/// Result of executing an action.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub state: SceneState,
    pub moved_to_bin: Vec<DishId>,
    pub trip: bool,
}

/// Dish dimensions, gripper geometry and the corridor margin: everything the
/// feasibility rules and the transition function depend on.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionModel {
    pub specs: DishTable,
    pub gripper: GripperSpec,
    /// Clearance kept beyond the mover's circumradius when checking the
    /// pull corridor.
    pub corridor_margin: f64,
}

impl ActionModel {
    pub fn new(specs: DishTable, gripper: GripperSpec, corridor_margin: f64) -> Self {
        Self {
            specs,
            gripper,
            corridor_margin,
        }
    }

    fn get<'a>(&self, state: &'a SceneState, id: DishId) -> Result<&'a Stack, ActionError> {
        state.stack(id).ok_or(ActionError::UnknownStack(id))
    }

    pub fn lip_height(&self, stack: &Stack) -> f64 {
        stack_top_lip_height(stack, &self.specs)
    }

    /// A stack can be carried when its lip-to-lip rise fits between the jaws.
    pub fn graspable(&self, stack: &Stack) -> bool {
        stack_rise(stack, &self.specs) <= self.gripper.jaw_height + 1e-9
    }

    /// Where the jaws can close on a stack: the bottom dish's rim, or the
    /// bottom utensil's long axis.
    pub fn grasp_locus(&self, stack: &Stack) -> Curve {
        let bottom = stack.bottom();
        match self.specs.get(bottom.kind).shape {
            DishShape::Round { radius } => Curve::Circle {
                center: stack.base,
                radius,
            },
            DishShape::Flat { length, .. } => {
                let h = Point2::from_angle(bottom.theta) * (0.5 * length);
                Curve::Segment(stack.base - h, stack.base + h)
            }
        }
    }

    /// Gap between two stacks' grasp loci; the distance the jaws must span.
    pub fn locus_gap(&self, a: &Stack, b: &Stack) -> f64 {
        let (p, q) = nearest_points(&self.grasp_locus(a), &self.grasp_locus(b));
        p.distance(q)
    }

    /// Single-stack grasp. Round stacks are taken at a uniformly sampled
    /// point on the bottom dish's rim with the jaws radial; utensils are
    /// caged at their center with the jaws across the axis.
    pub fn grasp_points(
        &self,
        state: &SceneState,
        id: DishId,
        rng: &mut SimRng,
    ) -> Result<GraspAction, ActionError> {
        let stack = self.get(state, id)?;
        Ok(self.grasp_stack(stack, rng))
    }

    fn grasp_stack(&self, stack: &Stack, rng: &mut SimRng) -> GraspAction {
        let bottom = stack.bottom();
        let spec = self.specs.get(bottom.kind);
        let (p, theta) = match spec.shape {
            DishShape::Round { radius } => {
                let angle = rng.uniform(0.0, std::f64::consts::TAU);
                rim_point(stack.base, radius, angle)
            }
            DishShape::Flat { .. } => (
                stack.base,
                normalize_half_turn(bottom.theta + std::f64::consts::FRAC_PI_2),
            ),
        };
        GraspAction {
            x: p.x,
            y: p.y,
            z: spec.grasp_height,
            theta,
            targets: vec![stack.id()],
        }
    }

    fn heights_similar(&self, a: &Stack, b: &Stack) -> bool {
        (self.lip_height(a) - self.lip_height(b)).abs()
            <= self.gripper.height_similarity_threshold + 1e-9
    }

    fn mog_between(&self, a: &Stack, b: &Stack) -> Option<GraspAction> {
        if a.id() == b.id()
            || !self.graspable(a)
            || !self.graspable(b)
            || !self.heights_similar(a, b)
        {
            return None;
        }
        let (p, q) = nearest_points(&self.grasp_locus(a), &self.grasp_locus(b));
        if p.distance(q) >= self.gripper.max_opening {
            return None;
        }
        let mid = p.midpoint(q);
        let dir = (q - p).normalized().or((b.base - a.base).normalized());
        Some(GraspAction {
            x: mid.x,
            y: mid.y,
            z: self.lip_height(a).max(self.lip_height(b)),
            theta: dir.map_or(0.0, Point2::undirected_angle),
            targets: vec![a.id(), b.id()],
        })
    }

    /// Multi-object grasp of two stacks: allowed when their lip heights are
    /// within the similarity threshold and their nearest grasp points are
    /// closer than the gripper opening. Returns the grasp when allowed.
    pub fn mog_allowable(&self, state: &SceneState, a: DishId, b: DishId) -> Option<GraspAction> {
        let sa = state.stack(a)?;
        let sb = state.stack(b)?;
        self.mog_between(sa, sb)
    }

    /// Center the mover reaches when dragged straight toward the anchor until
    /// the footprints touch.
    pub fn pull_contact(&self, mover: &Stack, anchor: &Stack) -> Point2 {
        let fm = mover.footprint(&self.specs);
        let fa = anchor.footprint(&self.specs);
        let d = mover.base.distance(anchor.base);
        let Some(u) = (anchor.base - mover.base).normalized() else {
            return mover.base;
        };
        if let (Footprint::Disc { radius: r1, .. }, Footprint::Disc { radius: r2, .. }) = (fm, fa) {
            return mover.base + u * (d - r1 - r2).max(0.0);
        }
        // The set of offsets at which two convex shapes meet is an interval
        // that contains `d`, so bisect for its lower end.
        let gap_at = |t: f64| separation(&fm.moved_to(mover.base + u * t), &fa);
        if gap_at(0.0) <= 0.0 {
            return mover.base;
        }
        let (mut lo, mut hi) = (0.0, d);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if gap_at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        mover.base + u * lo
    }

    fn pull_between(&self, state: &SceneState, mover: &Stack, anchor: &Stack) -> Option<Point2> {
        let (end, blockers) = self.pull_path(state, mover, anchor)?;
        blockers.is_empty().then_some(end)
    }

    /// Contact point of a pull together with the other stacks that obstruct
    /// it. `None` when the pull is ruled out whatever else is on the table.
    fn pull_path(
        &self,
        state: &SceneState,
        mover: &Stack,
        anchor: &Stack,
    ) -> Option<(Point2, Vec<DishId>)> {
        if mover.id() == anchor.id()
            || !self.graspable(mover)
            || !self.graspable(anchor)
            || !self.heights_similar(mover, anchor)
        {
            return None;
        }
        let end = self.pull_contact(mover, anchor);
        let fp = mover.footprint(&self.specs);
        let landed = fp.moved_to(end);
        if !landed.inside_workspace(state.workspace.width, state.workspace.height) {
            return None;
        }
        let moved = Stack {
            base: end,
            dishes: mover.dishes.clone(),
        };
        self.mog_between(&moved, anchor)?;
        let half_width = fp.circumradius() + self.corridor_margin;
        let blockers = state
            .stacks
            .iter()
            .filter(|o| o.id() != mover.id() && o.id() != anchor.id())
            .filter(|o| {
                let of = o.footprint(&self.specs);
                overlaps(&of, &landed)
                    || !corridor_clear(mover.base, end, half_width, std::slice::from_ref(&of))
            })
            .map(Stack::id)
            .collect();
        Some((end, blockers))
    }

    /// Stacks that currently obstruct pulling `mover` onto `anchor`, or
    /// `None` when that pull is impossible even on an otherwise empty table.
    pub fn pull_blockers(
        &self,
        state: &SceneState,
        mover: DishId,
        anchor: DishId,
    ) -> Option<Vec<DishId>> {
        let m = state.stack(mover)?;
        let a = state.stack(anchor)?;
        self.pull_path(state, m, a).map(|(_, b)| b)
    }

    /// A pull of `mover` onto `anchor` is allowed when the pair would be
    /// multi-object graspable afterwards and nothing else lies in the
    /// mover's path.
    pub fn pull_allowable(&self, state: &SceneState, mover: DishId, anchor: DishId) -> bool {
        match (state.stack(mover), state.stack(anchor)) {
            (Some(m), Some(a)) => self.pull_between(state, m, a).is_some(),
            _ => false,
        }
    }

    /// Internal pull from the mover's center to the contact point. The jaws
    /// point along the motion; utensils keep their orientation.
    pub fn plan_pull(
        &self,
        state: &SceneState,
        mover: DishId,
        anchor: DishId,
    ) -> Result<PullAction, ActionError> {
        let m = self.get(state, mover)?;
        let a = self.get(state, anchor)?;
        let end = self
            .pull_between(state, m, a)
            .ok_or_else(|| infeasible("pull_allowable", format!("pull {mover} -> {anchor}")))?;
        let theta = (a.base - m.base).undirected_angle();
        let z = 0.5 * self.specs.get(m.bottom().kind).grasp_height;
        Ok(PullAction {
            start: [m.base.x, m.base.y, z],
            theta_start: theta,
            end: [end.x, end.y, z],
            theta_end: theta,
            mover,
            anchor,
        })
    }

    /// Stacking rule on stacks directly, without a scene.
    pub fn stack_between(&self, lifted: &Stack, base: &Stack) -> bool {
        if lifted.id() == base.id() || !self.graspable(lifted) {
            return false;
        }
        let r_lifted = self.specs.get(lifted.bottom().kind).stacking_radius();
        let r_base = self.specs.get(base.top().kind).stacking_radius();
        if r_lifted > r_base {
            return false;
        }
        self.graspable(&merge(base, lifted))
    }

    /// Stacking `lifted` onto `base` is allowed when the lifted bottom is no
    /// wider than the base top and the merged pile is still graspable.
    pub fn stack_allowable(&self, state: &SceneState, lifted: DishId, base: DishId) -> bool {
        match (state.stack(lifted), state.stack(base)) {
            (Some(l), Some(b)) => self.stack_between(l, b),
            _ => false,
        }
    }

    pub fn plan_stack(
        &self,
        state: &SceneState,
        lifted: DishId,
        base: DishId,
        rng: &mut SimRng,
    ) -> Result<StackAction, ActionError> {
        let l = self.get(state, lifted)?;
        let b = self.get(state, base)?;
        if !self.stack_between(l, b) {
            return Err(infeasible(
                "stack_allowable",
                format!("stack {lifted} onto {base}"),
            ));
        }
        let inner_grasp = self.grasp_stack(l, rng);
        let theta_place = inner_grasp.theta;
        Ok(StackAction {
            inner_grasp,
            place: [b.base.x, b.base.y, self.lip_height(b)],
            theta_place,
            lifted,
            base,
        })
    }

    /// State after the stack placements of a stack-grasp, before the grasp.
    pub fn after_stacking(
        &self,
        state: &SceneState,
        stacks: &[StackAction],
    ) -> Result<SceneState, ActionError> {
        let mut s = state.clone();
        for st in stacks {
            let l = self.get(&s, st.lifted)?;
            let b = self.get(&s, st.base)?;
            if !self.stack_between(l, b) {
                return Err(infeasible(
                    "stack_allowable",
                    format!("stack {} onto {}", st.lifted, st.base),
                ));
            }
            let merged = merge(b, l);
            let bi = s.stack_index(st.base).expect("checked");
            s.stacks[bi] = merged;
            s.stacks.retain(|x| x.id() != st.lifted);
        }
        Ok(s)
    }

    /// State after the pull of a pull-grasp, before the grasp.
    pub fn after_pull(
        &self,
        state: &SceneState,
        pull: &PullAction,
    ) -> Result<SceneState, ActionError> {
        let m = self.get(state, pull.mover)?;
        let a = self.get(state, pull.anchor)?;
        let end = self.pull_between(state, m, a).ok_or_else(|| {
            infeasible(
                "pull_allowable",
                format!("pull {} -> {}", pull.mover, pull.anchor),
            )
        })?;
        if end.distance(pull.end_point()) > PULL_CONTACT_TOL {
            return Err(infeasible(
                "plan_pull",
                format!(
                    "end point {:?} is not the contact point {:?}",
                    pull.end, end
                ),
            ));
        }
        let mut s = state.clone();
        let mi = s.stack_index(pull.mover).expect("checked");
        s.stacks[mi].base = end;
        Ok(s)
    }

    fn check_grasp(&self, state: &SceneState, g: &GraspAction) -> Result<(), ActionError> {
        match g.targets.as_slice() {
            [one] => self.get(state, *one).map(|_| ()),
            [a, b] => {
                self.get(state, *a)?;
                self.get(state, *b)?;
                self.mog_allowable(state, *a, *b)
                    .map(|_| ())
                    .ok_or_else(|| infeasible("mog_allowable", format!("grasp {a} + {b}")))
            }
            other => Err(infeasible(
                "grasp_targets",
                format!("a grasp takes 1 or 2 stacks, got {}", other.len()),
            )),
        }
    }

    /// Runs the consolidation phase of an action and checks the final grasp;
    /// returns the state the grasp acts on.
    fn prepare(&self, state: &SceneState, action: &Action) -> Result<SceneState, ActionError> {
        let staged = match action {
            Action::Grasp(g) => {
                self.check_grasp(state, g)?;
                state.clone()
            }
            Action::PullGrasp { pull, grasp } => {
                if pull.mover == pull.anchor {
                    return Err(infeasible("pull_allowable", "mover equals anchor"));
                }
                let s = self.after_pull(state, pull)?;
                let mut want = [pull.mover, pull.anchor];
                let mut got = grasp.targets.clone();
                want.sort();
                got.sort();
                if got != want {
                    return Err(infeasible(
                        "grasp_targets",
                        "pull-grasp must grasp mover and anchor",
                    ));
                }
                self.check_grasp(&s, grasp)?;
                s
            }
            Action::StackGrasp { stacks, grasp } => {
                let Some(first) = stacks.first() else {
                    return Err(infeasible("stack_allowable", "no stack placements"));
                };
                if stacks.iter().any(|s| s.base != first.base) {
                    return Err(infeasible(
                        "stack_allowable",
                        "placements onto different bases",
                    ));
                }
                if grasp.targets != [first.base] {
                    return Err(infeasible(
                        "grasp_targets",
                        "stack-grasp must grasp the merged stack",
                    ));
                }
                let s = self.after_stacking(state, stacks)?;
                self.check_grasp(&s, grasp)?;
                s
            }
        };
        Ok(staged)
    }

    /// Executes an action: consolidation, then a grasp that carries every
    /// target stack to the bin in one trip.
    pub fn apply(&self, state: &SceneState, action: &Action) -> Result<Applied, ActionError> {
        let mut s = self.prepare(state, action)?;
        let targets = &action.final_grasp().targets;
        let mut moved = Vec::new();
        for st in s.stacks.iter().filter(|st| targets.contains(&st.id())) {
            moved.extend(st.ids());
        }
        s.stacks.retain(|st| !targets.contains(&st.id()));
        s.bin.extend(moved.iter().copied());
        s.trips_taken += 1;
        Ok(Applied {
            state: s,
            moved_to_bin: moved,
            trip: true,
        })
    }

    /// Executes an action whose final grasp slips: the consolidation still
    /// happens and the arm still travels to the bin, but nothing is
    /// deposited and the targets stay where the consolidation left them.
    pub fn apply_failed(
        &self,
        state: &SceneState,
        action: &Action,
    ) -> Result<Applied, ActionError> {
        let mut s = self.prepare(state, action)?;
        s.trips_taken += 1;
        Ok(Applied {
            state: s,
            moved_to_bin: Vec::new(),
            trip: true,
        })
    }
}

/// `top` placed on `base`, taking the base position.
pub fn merge(base: &Stack, top: &Stack) -> Stack {
    let mut dishes = base.dishes.clone();
    let base_top = *base.top();
    dishes.extend(top.dishes.iter().map(|d| {
        let mut d = *d;
        if d.kind == DishKind::Utensil && base_top.kind == DishKind::Utensil {
            d.theta = base_top.theta;
        }
        d
    }));
    Stack {
        base: base.base,
        dishes,
    }
}

/// One line of the JSONL action trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: usize,
    pub action: String,
    pub targets: Vec<DishId>,
    pub moved_to_bin: Vec<DishId>,
    pub trip: bool,
    pub params: serde_json::Value,
}

impl TraceEvent {
    pub fn new(t: usize, action: &Action, applied: &Applied, failed: bool) -> Self {
        let mut params = serde_json::to_value(action).expect("actions serialize");
        if let Some(map) = params.as_object_mut() {
            map.remove("type");
            map.insert("failed".into(), serde_json::Value::Bool(failed));
        }
        TraceEvent {
            t,
            action: action.name().to_string(),
            targets: action.targets(),
            moved_to_bin: applied.moved_to_bin.clone(),
            trip: applied.trip,
            params,
        }
    }

    pub fn failed(&self) -> bool {
        self.params
            .get("failed")
            .and_then(serde_json::Value::as_bool)
            .unwrap_or(false)
    }
}
