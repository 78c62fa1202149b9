//! Scene files.
//!
//! Output is written by hand so the field order and float formatting never
//! change: `workspace`, `seed`, `tier`, `stacks`, each stack as `base` then
//! `dishes`, each dish as `id`, `kind` and, for utensils only, `theta`. All
//! floats carry exactly six decimals.

use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::Point2;
use crate::tableware::{
    validate, Dish, DishId, DishKind, DishTable, SceneState, Stack, Tier, Violation, Workspace,
};

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("malformed scene file: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("scene violates invariants: {}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn num(out: &mut String, v: f64) {
    // `-0.000000` would differ from a freshly generated zero
    let v = if v == 0.0 { 0.0 } else { v };
    write!(out, "{v:.6}").expect("writing to a String");
}

/// Serializes the table part of a scene. Bin contents and trip counts are
/// not part of the file.
pub fn scene_to_json(state: &SceneState) -> String {
    let mut s = String::new();
    s.push_str("{\"workspace\":[");
    num(&mut s, state.workspace.width);
    s.push(',');
    num(&mut s, state.workspace.height);
    write!(
        s,
        "],\"seed\":{},\"tier\":\"{}\",\"stacks\":[",
        state.seed,
        state.tier.as_str()
    )
    .expect("writing to a String");
    for (i, stack) in state.stacks.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str("\n  {\"base\":[");
        num(&mut s, stack.base.x);
        s.push(',');
        num(&mut s, stack.base.y);
        s.push_str("],\"dishes\":[");
        for (j, d) in stack.dishes.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{{\"id\":{},\"kind\":\"{}\"", d.id.0, d.kind.as_str())
                .expect("writing to a String");
            if d.kind == DishKind::Utensil {
                s.push_str(",\"theta\":");
                num(&mut s, d.theta);
            }
            s.push('}');
        }
        s.push_str("]}");
    }
    s.push_str("\n]}\n");
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    workspace: [f64; 2],
    seed: u64,
    tier: Tier,
    stacks: Vec<StackFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StackFile {
    base: [f64; 2],
    dishes: Vec<DishFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DishFile {
    id: u32,
    kind: DishKind,
    theta: Option<f64>,
}

/// Parses a scene file and checks it against the scene invariants under
/// `specs`. Dish ids must be `0..n` for `n` dishes.
pub fn scene_from_json(text: &str, specs: &DishTable) -> Result<SceneState, SceneIoError> {
    let file: SceneFile = serde_json::from_str(text)?;
    let stacks: Vec<Stack> = file
        .stacks
        .into_iter()
        .map(|s| Stack {
            base: Point2::new(s.base[0], s.base[1]),
            dishes: s
                .dishes
                .into_iter()
                .map(|d| Dish {
                    id: DishId(d.id),
                    kind: d.kind,
                    theta: d.theta.unwrap_or(0.0),
                })
                .collect(),
        })
        .collect();
    let dish_count = stacks.iter().map(Stack::len).sum();
    let state = SceneState {
        workspace: Workspace {
            width: file.workspace[0],
            height: file.workspace[1],
        },
        tier: file.tier,
        seed: file.seed,
        stacks,
        bin: vec![],
        trips_taken: 0,
        dish_count,
    };
    let violations = validate(&state, specs);
    if violations.is_empty() {
        Ok(state)
    } else {
        Err(SceneIoError::Invalid(violations))
    }
}

/// File name used for the `k`-th scene generated from `seed`.
pub fn scene_file_name(tier: Tier, seed: u64, k: usize) -> String {
    format!("scene_{}_{}_{}.json", tier.as_str(), seed, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableware::{SceneGenerator, TierConfig};

    #[test]
    fn layout_is_fixed() {
        let state = SceneState {
            workspace: Workspace::default(),
            tier: Tier::Custom,
            seed: 9,
            stacks: vec![
                Stack {
                    base: Point2::new(20.0, 30.5),
                    dishes: vec![
                        Dish {
                            id: DishId(0),
                            kind: DishKind::Bowl,
                            theta: 0.0,
                        },
                        Dish {
                            id: DishId(1),
                            kind: DishKind::Utensil,
                            theta: 0.25,
                        },
                    ],
                },
                Stack::single(
                    Dish {
                        id: DishId(2),
                        kind: DishKind::Cup,
                        theta: 0.0,
                    },
                    Point2::new(60.0, 10.0),
                ),
            ],
            bin: vec![],
            trips_taken: 0,
            dish_count: 3,
        };
        let text = scene_to_json(&state);
        assert_eq!(
            text,
            "{\"workspace\":[78.000000,61.000000],\"seed\":9,\"tier\":\"custom\",\"stacks\":[\n  \
             {\"base\":[20.000000,30.500000],\"dishes\":[{\"id\":0,\"kind\":\"bowl\"},{\"id\":1,\"kind\":\"utensil\",\"theta\":0.250000}]},\n  \
             {\"base\":[60.000000,10.000000],\"dishes\":[{\"id\":2,\"kind\":\"cup\"}]}\n]}\n"
        );
        let back = scene_from_json(&text, &DishTable::default()).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn generated_scenes_round_trip_exactly() {
        let g = SceneGenerator::default();
        for tier in Tier::STANDARD {
            for seed in 0..50 {
                let s = g.generate(&TierConfig::standard(tier), seed).unwrap();
                let text = scene_to_json(&s);
                let back = scene_from_json(&text, &g.specs).unwrap();
                assert_eq!(back, s);
                assert_eq!(scene_to_json(&back), text);
            }
        }
    }

    #[test]
    fn malformed_input_is_a_schema_error() {
        let specs = DishTable::default();
        assert!(matches!(
            scene_from_json("{", &specs),
            Err(SceneIoError::Schema(_))
        ));
        let unknown = r#"{"workspace":[78,61],"seed":1,"tier":"t1","stacks":[],"extra":1}"#;
        assert!(matches!(
            scene_from_json(unknown, &specs),
            Err(SceneIoError::Schema(_))
        ));
        let bad_kind = r#"{"workspace":[78,61],"seed":1,"tier":"t1","stacks":[{"base":[10,10],"dishes":[{"id":0,"kind":"plate"}]}]}"#;
        assert!(matches!(
            scene_from_json(bad_kind, &specs),
            Err(SceneIoError::Schema(_))
        ));
    }

    #[test]
    fn invariant_breaches_are_reported() {
        let specs = DishTable::default();
        let outside = r#"{"workspace":[78,61],"seed":1,"tier":"custom","stacks":[{"base":[100,10],"dishes":[{"id":0,"kind":"cup"}]}]}"#;
        let err = scene_from_json(outside, &specs).unwrap_err();
        assert!(err.to_string().contains("out of workspace"), "{err}");
        let unstable = r#"{"workspace":[78,61],"seed":1,"tier":"custom","stacks":[{"base":[30,30],"dishes":[{"id":0,"kind":"cup"},{"id":1,"kind":"bowl"}]}]}"#;
        let err = scene_from_json(unstable, &specs).unwrap_err();
        assert!(
            err.to_string().contains("stack stability violated"),
            "{err}"
        );
    }

    #[test]
    fn file_names() {
        assert_eq!(scene_file_name(Tier::T1, 42, 2), "scene_t1_42_2.json");
    }
}
