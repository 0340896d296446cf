//! Seeded synthetic data: random matcher instances for oracle
//! comparison, scene fixtures with planted ground truth, and labeled
//! training corpora sampled from the built-in models.

use crate::bayes::{builtin_role_model, builtin_team_model, sample_star};
use crate::eag::{predicates, Eag, EntityRef, EntityType, Object, Quantity, Triple, Value};
use crate::geometry::{BoundingBox, Point2};
use crate::query::{Modifier, QueryGraph, QueryTriple, Term, TemplateId};
use crate::scene::{
    Direction, FieldAnnotation, FieldPart, PersonAnnotation, Role, SceneAnnotation,
    SoccerAnnotation, Status,
};
use rand::seq::SliceRandom;
use rand::Rng;

const COLORS: [&str; 3] = ["red", "blue", "yellow"];
const ROLES: [&str; 3] = ["player", "referee", "goalkeeper"];
const PARTS: [&str; 3] = ["L", "M", "R"];

/// Draws a random (query, graph) pair sized for the brute-force
/// oracle: at most 4 query triples and 12 graph triples, with labels
/// drawn from shared pools so queries hit nonempty match sets often.
pub fn random_match_instance(rng: &mut impl Rng) -> (QueryGraph, Eag) {
    let n_persons = rng.gen_range(1..=3usize);
    let mut entities: Vec<EntityRef> = (0..n_persons)
        .map(|i| EntityRef::person(format!("p{i}")))
        .collect();
    let with_field = rng.gen_bool(0.6);
    let with_soccer = rng.gen_bool(0.5);
    if with_field {
        entities.push(EntityRef::new("field", EntityType::Field));
    }
    if with_soccer {
        entities.push(EntityRef::new("soccer", EntityType::Soccer));
    }

    let mut triples = Vec::new();
    for i in 0..n_persons {
        let p = EntityRef::person(format!("p{i}"));
        triples.push(Triple::new(
            p.clone(),
            predicates::ROLE,
            Object::Value(Value::label(*ROLES.choose(rng).unwrap())),
        ));
        triples.push(Triple::new(
            p.clone(),
            predicates::UNIFORM,
            Object::Value(Value::label(*COLORS.choose(rng).unwrap())),
        ));
        if rng.gen_bool(0.5) {
            triples.push(Triple::new(
                p,
                predicates::STATUS,
                Object::Value(Value::label(if rng.gen_bool(0.5) { "E" } else { "M" })),
            ));
        }
    }
    if with_field {
        triples.push(Triple::new(
            EntityRef::new("field", EntityType::Field),
            predicates::PART,
            Object::Value(Value::label(*PARTS.choose(rng).unwrap())),
        ));
    }
    // A few symmetric distance edges among persons and the ball.
    let mut nodes: Vec<EntityRef> = (0..n_persons)
        .map(|i| EntityRef::person(format!("p{i}")))
        .collect();
    if with_soccer {
        nodes.push(EntityRef::new("soccer", EntityType::Soccer));
    }
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if triples.len() + 2 > 12 || rng.gen_bool(0.4) {
                continue;
            }
            let d = Quantity::pixels(rng.gen_range(1..100) as f64).unwrap();
            triples.push(Triple::new(
                nodes[i].clone(),
                predicates::DISTANCE,
                Object::weighted(nodes[j].clone(), d),
            ));
            triples.push(Triple::new(
                nodes[j].clone(),
                predicates::DISTANCE,
                Object::weighted(nodes[i].clone(), d),
            ));
        }
    }
    let g = Eag::new("synthetic", entities, triples).expect("generated graph is valid");

    // Query: a connected pattern over fresh variables, constants drawn
    // from the same pools.
    let var_names = ["a", "b", "c"];
    let n_triples = rng.gen_range(1..=4usize);
    let mut q_triples = Vec::new();
    let mut used_vars = 1usize;
    for i in 0..n_triples {
        // Subject among the variables introduced so far keeps the
        // pattern connected.
        let s = rng.gen_range(0..used_vars.min(var_names.len()));
        let subject = Term::entity_var(var_names[s], EntityType::Person);
        let choice = rng.gen_range(0..6);
        let (predicate, object) = match choice {
            0 => (
                predicates::ROLE,
                Term::label(*ROLES.choose(rng).unwrap()),
            ),
            1 => (
                predicates::UNIFORM,
                Term::label(*COLORS.choose(rng).unwrap()),
            ),
            2 => (predicates::UNIFORM, Term::value_var("v")),
            3 if used_vars < var_names.len() && i + 1 < n_triples => {
                // Introduce the next entity variable via a distance
                // edge.
                used_vars += 1;
                (
                    predicates::DISTANCE,
                    Term::entity_var(var_names[used_vars - 1], EntityType::Person),
                )
            }
            4 => (
                predicates::DISTANCE,
                Term::wildcard(
                    if rng.gen_bool(0.5) {
                        EntityType::Person
                    } else {
                        EntityType::Soccer
                    },
                    rng.gen_range(1..3),
                ),
            ),
            _ => (
                predicates::STATUS,
                Term::label(if rng.gen_bool(0.5) { "E" } else { "M" }),
            ),
        };
        q_triples.push(QueryTriple::new(subject, predicate, object));
    }
    let focus_var = var_names[rng.gen_range(0..used_vars)];
    let has_value_var = q_triples
        .iter()
        .any(|t| matches!(t.object, Term::ValueVar { .. }));
    let focus_entity = Term::EntityVar {
        name: focus_var.into(),
        etype: None,
    };
    let (focus, modifier) = match rng.gen_range(0..4) {
        0 if has_value_var => (Term::value_var("v"), None),
        1 => (focus_entity, Some(Modifier::Exists)),
        2 => (
            Term::FuncApp {
                func: "num".into(),
                arg: Box::new(focus_entity),
            },
            None,
        ),
        _ => (focus_entity, None),
    };
    let q = QueryGraph::new(focus, modifier, q_triples).expect("generated query is valid");
    (q, g)
}

// ---------------------------------------------------------------------------
// Deterministic fixtures.

/// A hand-built scene whose template answers are planted at
/// construction: the built-in models recover the annotated roles, so
/// the full pipeline reproduces `references` exactly.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub scene: SceneAnnotation,
    /// Acceptable answer strings per applicable template; templates
    /// whose preconditions the scene violates (team inference without
    /// two teams or a ball) are absent.
    pub references: Vec<(TemplateId, Vec<String>)>,
}

fn annotated(
    id: &str,
    uniform: &str,
    direction: Direction,
    status: Status,
    center: (f64, f64),
    role: Role,
    defending: Option<bool>,
) -> PersonAnnotation {
    let (x, y) = center;
    PersonAnnotation {
        id: id.into(),
        uniform: uniform.into(),
        bbox: BoundingBox::new(x - 1.0, y - 2.0, x + 1.0, y + 2.0)
            .expect("fixture bounding boxes are well formed"),
        direction,
        status,
        role: Some(role),
        defending,
    }
}

fn ball_at(center: (f64, f64)) -> Option<SoccerAnnotation> {
    let (x, y) = center;
    Some(SoccerAnnotation {
        bbox: BoundingBox::new(x - 0.5, y - 0.5, x + 0.5, y + 0.5)
            .expect("fixture bounding boxes are well formed"),
    })
}

fn refs(pairs: &[(TemplateId, &[&str])]) -> Vec<(TemplateId, Vec<String>)> {
    pairs
        .iter()
        .map(|(id, rs)| (*id, rs.iter().map(|s| s.to_string()).collect()))
        .collect()
}

/// The bundled scenes, one per situation the engine must handle:
/// a registered showcase with two full teams; a ballless scene; a
/// refereeless scene; an exact nearest-player tie; a single person; a
/// right-side registration; a ten-player crowd; feature-tied teams;
/// and a minimal three-player scene. Every annotated role is recovered
/// by the built-in model, so the planted answers survive the
/// inference step.
pub fn fixtures() -> Vec<Fixture> {
    use Direction::{B, F, N};
    use Status::{E, M};
    use TemplateId::{Q1, Q2, Q3, Q4, Q5, Q6, Q7};
    let mut out = Vec::new();

    // Identity keypoints: image coordinates equal field coordinates,
    // so planted positions read as meters.
    let left_identity = [
        Point2::image(0.0, 13.84),
        Point2::image(0.0, 54.16),
        Point2::image(16.5, 13.84),
        Point2::image(16.5, 54.16),
    ];
    let right_identity = [
        Point2::image(105.0, 13.84),
        Point2::image(105.0, 54.16),
        Point2::image(88.5, 13.84),
        Point2::image(88.5, 54.16),
    ];

    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "showcase".into(),
            persons: vec![
                annotated("g1", "green", B, E, (2.0, 34.0), Role::Goalkeeper, None),
                annotated("p1", "red", B, M, (10.0, 20.0), Role::Player, Some(true)),
                annotated("p2", "red", B, M, (12.0, 44.0), Role::Player, Some(true)),
                annotated("p3", "red", N, M, (20.0, 34.0), Role::Player, Some(true)),
                annotated("p4", "blue", F, M, (24.0, 30.0), Role::Player, Some(false)),
                annotated("p5", "blue", N, M, (30.0, 24.0), Role::Player, Some(false)),
                annotated("p6", "blue", F, M, (32.0, 44.0), Role::Player, Some(false)),
                annotated("r1", "black", N, M, (40.0, 34.0), Role::Referee, None),
            ],
            soccer: ball_at((23.0, 29.0)),
            field: FieldAnnotation {
                part: FieldPart::L,
                keypoints: Some(left_identity),
            },
            scene_type: Some("corner".into()),
        },
        references: refs(&[
            (Q1, &["p4"]),
            (Q2, &["black"]),
            (Q3, &["yes"]),
            (Q4, &["red"]),
            (Q5, &["red"]),
            (Q6, &["L"]),
            (Q7, &["6", "six"]),
        ]),
    });

    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "no-ball".into(),
            persons: vec![
                annotated("p1", "red", F, M, (100.0, 100.0), Role::Player, None),
                annotated("p2", "red", N, M, (200.0, 120.0), Role::Player, None),
                annotated("p3", "blue", N, M, (300.0, 140.0), Role::Player, None),
                annotated("p4", "blue", F, M, (400.0, 160.0), Role::Player, None),
                annotated("r1", "black", N, M, (250.0, 200.0), Role::Referee, None),
            ],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["none"]),
            (Q2, &["black"]),
            (Q3, &["yes"]),
            (Q4, &["none"]),
            (Q6, &["M"]),
            (Q7, &["4", "four"]),
        ]),
    });

    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "no-referee".into(),
            persons: vec![
                annotated("g1", "green", B, E, (500.0, 200.0), Role::Goalkeeper, None),
                annotated("p1", "red", F, M, (400.0, 190.0), Role::Player, Some(false)),
                annotated("p2", "red", N, M, (380.0, 260.0), Role::Player, Some(false)),
                annotated("p3", "blue", N, M, (300.0, 220.0), Role::Player, Some(true)),
                annotated("p4", "blue", F, M, (280.0, 160.0), Role::Player, Some(true)),
            ],
            soccer: ball_at((405.0, 195.0)),
            field: FieldAnnotation {
                part: FieldPart::R,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["p1"]),
            (Q2, &["none"]),
            (Q3, &["no"]),
            (Q4, &["red"]),
            (Q5, &["blue"]),
            (Q6, &["R"]),
            (Q7, &["4", "four"]),
        ]),
    });

    // Both players exactly four pixels from the ball: the nearest
    // player resolves by entity id.
    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "tie".into(),
            persons: vec![
                annotated("pa", "red", N, M, (8.0, 2.0), Role::Player, None),
                annotated("pb", "red", N, M, (0.0, 2.0), Role::Player, None),
            ],
            soccer: ball_at((4.0, 2.0)),
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["pa"]),
            (Q2, &["none"]),
            (Q3, &["no"]),
            (Q4, &["none"]),
            (Q6, &["M"]),
            (Q7, &["2", "two"]),
        ]),
    });

    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "solo".into(),
            persons: vec![annotated(
                "r1",
                "black",
                N,
                M,
                (120.0, 90.0),
                Role::Referee,
                None,
            )],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["none"]),
            (Q2, &["black"]),
            (Q3, &["yes"]),
            (Q4, &["none"]),
            (Q6, &["M"]),
            (Q7, &["0"]),
        ]),
    });

    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "right-side".into(),
            persons: vec![
                annotated("g1", "green", B, E, (103.0, 34.0), Role::Goalkeeper, None),
                annotated("p1", "red", F, M, (95.0, 30.0), Role::Player, Some(true)),
                annotated("p2", "red", N, M, (93.0, 40.0), Role::Player, Some(true)),
                annotated("p3", "blue", N, M, (85.0, 34.0), Role::Player, Some(false)),
                annotated("p4", "blue", F, M, (80.0, 20.0), Role::Player, Some(false)),
                annotated("r1", "black", N, M, (75.0, 34.0), Role::Referee, None),
            ],
            soccer: ball_at((84.5, 33.5)),
            field: FieldAnnotation {
                part: FieldPart::R,
                keypoints: Some(right_identity),
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["p3"]),
            (Q2, &["black"]),
            (Q3, &["yes"]),
            (Q4, &["red"]),
            (Q5, &["red"]),
            (Q6, &["R"]),
            (Q7, &["4", "four"]),
        ]),
    });

    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "crowd".into(),
            persons: vec![
                annotated("g1", "green", B, E, (10.0, 150.0), Role::Goalkeeper, None),
                annotated("p1", "red", B, M, (60.0, 100.0), Role::Player, Some(true)),
                annotated("p2", "red", B, M, (70.0, 200.0), Role::Player, Some(true)),
                annotated("p3", "red", N, M, (90.0, 150.0), Role::Player, Some(true)),
                annotated("p4", "red", N, M, (120.0, 80.0), Role::Player, Some(true)),
                annotated("p5", "red", F, M, (140.0, 220.0), Role::Player, Some(true)),
                annotated("p6", "blue", F, M, (200.0, 100.0), Role::Player, Some(false)),
                annotated("p7", "blue", F, M, (220.0, 160.0), Role::Player, Some(false)),
                annotated("p8", "blue", N, M, (260.0, 120.0), Role::Player, Some(false)),
                annotated("p9", "blue", N, M, (280.0, 180.0), Role::Player, Some(false)),
                annotated("p10", "blue", F, M, (300.0, 140.0), Role::Player, Some(false)),
                annotated("r1", "black", N, M, (180.0, 60.0), Role::Referee, None),
            ],
            soccer: ball_at((201.0, 101.0)),
            field: FieldAnnotation {
                part: FieldPart::L,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["p6"]),
            (Q2, &["black"]),
            (Q3, &["yes"]),
            (Q4, &["red"]),
            (Q5, &["red"]),
            (Q6, &["L"]),
            (Q7, &["10", "ten"]),
        ]),
    });

    // Every team feature tied or split: one expanded player per team,
    // no back-facing players, and the ball exactly between the two
    // nearest players, so possession falls to the smaller id.
    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "stalemate".into(),
            persons: vec![
                annotated("a1", "red", N, E, (100.0, 100.0), Role::Player, Some(false)),
                annotated("a2", "red", N, M, (120.0, 140.0), Role::Player, Some(false)),
                annotated("b1", "blue", N, E, (108.0, 100.0), Role::Player, Some(true)),
                annotated("b2", "blue", N, M, (130.0, 60.0), Role::Player, Some(true)),
            ],
            soccer: ball_at((104.0, 100.0)),
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["a1"]),
            (Q2, &["none"]),
            (Q3, &["no"]),
            (Q4, &["none"]),
            (Q5, &["blue"]),
            (Q6, &["M"]),
            (Q7, &["4", "four"]),
        ]),
    });

    // Exactly three players, one shared color, nothing else: the
    // smallest scene where the player count is interesting.
    out.push(Fixture {
        scene: SceneAnnotation {
            scene_id: "trio".into(),
            persons: vec![
                annotated("p1", "yellow", N, M, (100.0, 100.0), Role::Player, None),
                annotated("p2", "yellow", F, M, (200.0, 120.0), Role::Player, None),
                annotated("p3", "yellow", N, M, (300.0, 140.0), Role::Player, None),
            ],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        },
        references: refs(&[
            (Q1, &["none"]),
            (Q2, &["none"]),
            (Q3, &["no"]),
            (Q4, &["none"]),
            (Q6, &["M"]),
            (Q7, &["3", "three"]),
        ]),
    });

    out
}

// ---------------------------------------------------------------------------
// Sampled training corpora.

/// Scenes for role learning: each carries exactly one labeled person
/// whose class and features are drawn from the built-in role model.
/// The shared-uniform feature is realized physically: a drawn "M"
/// adds an unlabeled companion wearing the same color. Feature
/// extraction on these scenes reproduces the drawn observations
/// exactly, so learned tables converge to the built-in ones.
pub fn sample_role_scenes(n: usize, rng: &mut impl Rng) -> Vec<SceneAnnotation> {
    let net = builtin_role_model();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (role, obs) = sample_star(&net, rng).expect("built-in model samples");
        let shared = obs.get("u_color") == Some("M");
        let uniform = if shared { "teal" } else { "crimson" };
        let direction: Direction = obs
            .get("direction")
            .expect("sampled direction")
            .parse()
            .expect("direction domain");
        let status: Status = obs
            .get("status")
            .expect("sampled status")
            .parse()
            .expect("status domain");
        let part: FieldPart = obs
            .get("field")
            .expect("sampled field")
            .parse()
            .expect("field domain");
        let mut persons = vec![PersonAnnotation {
            id: "p0".into(),
            uniform: uniform.into(),
            bbox: BoundingBox::new(99.0, 98.0, 101.0, 102.0).expect("fixed box"),
            direction,
            status,
            role: Some(role.parse().expect("role domain")),
            defending: None,
        }];
        if shared {
            persons.push(PersonAnnotation {
                id: "q0".into(),
                uniform: uniform.into(),
                bbox: BoundingBox::new(199.0, 148.0, 201.0, 152.0).expect("fixed box"),
                direction: Direction::N,
                status: Status::M,
                role: None,
                defending: None,
            });
        }
        out.push(SceneAnnotation {
            scene_id: format!("role-train-{i:04}"),
            persons,
            soccer: None,
            field: FieldAnnotation {
                part,
                keypoints: None,
            },
            scene_type: None,
        });
    }
    out
}

/// Scenes for team-status learning: two labeled two-player teams with
/// complementary classes drawn from the built-in team model. All
/// three features compare one team against the other, so at most one
/// team can hold each: the first team's draws are realized exactly
/// and the second team's positive draws are suppressed wherever the
/// first team already holds the trait.
pub fn sample_team_scenes(n: usize, rng: &mut impl Rng) -> Vec<SceneAnnotation> {
    let net = builtin_team_model();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (class_red, obs_red) = sample_star(&net, rng).expect("built-in model samples");
        let red_defending = class_red == "defending";
        let (_, obs_blue) = sample_star(&net, rng).expect("built-in model samples");
        let red_possession = obs_red.get("t_possession") == Some("true");
        let red_status = obs_red.get("p_status") == Some("true");
        let red_direction = obs_red.get("p_direction") == Some("true");
        let blue_status = !red_status && obs_blue.get("p_status") == Some("true");
        let blue_direction = !red_direction && obs_blue.get("p_direction") == Some("true");

        let realize = |ids: [&str; 2],
                       uniform: &str,
                       xs: [f64; 2],
                       expanded: bool,
                       backing: bool,
                       defending: bool| {
            ids.into_iter()
                .zip(xs)
                .map(|(id, x)| PersonAnnotation {
                    id: id.into(),
                    uniform: uniform.into(),
                    bbox: BoundingBox::new(x - 1.0, 98.0, x + 1.0, 102.0)
                        .expect("fixed box"),
                    direction: if backing { Direction::B } else { Direction::N },
                    status: if expanded { Status::E } else { Status::M },
                    role: Some(Role::Player),
                    defending: Some(defending),
                })
                .collect::<Vec<_>>()
        };
        let mut persons = realize(
            ["a1", "a2"],
            "red",
            [100.0, 140.0],
            red_status,
            red_direction,
            red_defending,
        );
        persons.extend(realize(
            ["b1", "b2"],
            "blue",
            [300.0, 340.0],
            blue_status,
            blue_direction,
            !red_defending,
        ));
        let ball_x = if red_possession { 104.0 } else { 296.0 };
        out.push(SceneAnnotation {
            scene_id: format!("team-train-{i:04}"),
            persons,
            soccer: ball_at((ball_x, 100.0)),
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{self, complete_roles, extract_team_features};
    use crate::eag::build_eag;
    use crate::eag::Registration;
    use crate::evalkit::normalize_answer;
    use crate::matcher::answer_template;
    use crate::query::template;
    use crate::scene::SceneAnnotation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn fixture_ids_are_distinct_and_scenes_round_trip() {
        let fixtures = fixtures();
        let ids: BTreeSet<&str> = fixtures.iter().map(|f| f.scene.scene_id.as_str()).collect();
        assert_eq!(ids.len(), fixtures.len());
        for f in &fixtures {
            let again = SceneAnnotation::from_json(&f.scene.to_json()).unwrap();
            assert_eq!(again, f.scene);
            assert!(!f.references.is_empty());
        }
    }

    #[test]
    fn builtin_model_recovers_every_annotated_role() {
        for f in fixtures() {
            let g = build_eag(&f.scene, Registration::Auto).unwrap();
            let (_, inferred) = complete_roles(&g, &bayes::builtin_role_model()).unwrap();
            for p in &f.scene.persons {
                let Some(gold) = p.role else { continue };
                assert_eq!(
                    inferred[&p.id].value,
                    gold.to_string(),
                    "scene {} person {}",
                    f.scene.scene_id,
                    p.id
                );
            }
        }
    }

    #[test]
    fn pipeline_reproduces_every_planted_answer() {
        for f in fixtures() {
            let g = build_eag(&f.scene, Registration::Auto).unwrap();
            let (completed, _) = complete_roles(&g, &bayes::builtin_role_model()).unwrap();
            for (id, references) in &f.references {
                let answer = answer_template(&template(*id), &completed, None)
                    .unwrap_or_else(|e| {
                        panic!("scene {} template {id}: {e}", f.scene.scene_id)
                    });
                let rendered = normalize_answer(&answer.render());
                assert!(
                    references.iter().any(|r| normalize_answer(r) == rendered),
                    "scene {} template {id}: got {rendered:?}, wanted one of {references:?}",
                    f.scene.scene_id
                );
            }
        }
    }

    #[test]
    fn role_corpus_realizes_drawn_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scenes = sample_role_scenes(60, &mut rng);
        assert_eq!(scenes.len(), 60);
        let mut saw_shared = false;
        let mut saw_unique = false;
        for s in &scenes {
            let labeled = &s.persons[0];
            assert!(labeled.role.is_some());
            let g = build_eag(s, Registration::Auto).unwrap();
            let obs = bayes::extract_role_features(&g, &labeled.id).unwrap();
            assert_eq!(obs.get("direction").unwrap(), labeled.direction.to_string());
            assert_eq!(obs.get("status").unwrap(), labeled.status.to_string());
            assert_eq!(obs.get("field").unwrap(), s.field.part.to_string());
            let shared = s.persons.len() == 2;
            assert_eq!(obs.get("u_color").unwrap(), if shared { "M" } else { "U" });
            if shared {
                assert!(s.persons[1].role.is_none());
                saw_shared = true;
            } else {
                saw_unique = true;
            }
        }
        assert!(saw_shared && saw_unique);
    }

    #[test]
    fn team_corpus_realizes_complementary_classes_and_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scenes = sample_team_scenes(40, &mut rng);
        for s in &scenes {
            let g = build_eag(s, Registration::Auto).unwrap();
            let roles: std::collections::BTreeMap<String, String> = s
                .persons
                .iter()
                .map(|p| (p.id.clone(), p.role.unwrap().to_string()))
                .collect();
            let red_def = s.persons[0].defending.unwrap();
            assert!(s
                .persons
                .iter()
                .filter(|p| p.uniform == "blue")
                .all(|p| p.defending == Some(!red_def)));
            // Each feature compares the team against its opponent.
            let count = |color: &str, f: &dyn Fn(&&PersonAnnotation) -> bool| {
                s.persons
                    .iter()
                    .filter(|p| p.uniform == color && f(&p))
                    .count()
            };
            for (color, other) in [("red", "blue"), ("blue", "red")] {
                let obs = extract_team_features(&g, color, &roles).unwrap();
                let e = |p: &&PersonAnnotation| p.status == Status::E;
                let b = |p: &&PersonAnnotation| p.direction == Direction::B;
                assert_eq!(
                    obs.get("p_status").unwrap(),
                    (count(color, &e) > count(other, &e)).to_string()
                );
                assert_eq!(
                    obs.get("p_direction").unwrap(),
                    (count(color, &b) > count(other, &b)).to_string()
                );
            }
            let red_poss = extract_team_features(&g, "red", &roles).unwrap();
            let blue_poss = extract_team_features(&g, "blue", &roles).unwrap();
            assert_ne!(
                red_poss.get("t_possession").unwrap(),
                blue_poss.get("t_possession").unwrap()
            );
        }
    }

    #[test]
    fn corpora_are_seed_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(sample_role_scenes(10, &mut a), sample_role_scenes(10, &mut b));
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(sample_team_scenes(10, &mut a), sample_team_scenes(10, &mut b));
    }
}
