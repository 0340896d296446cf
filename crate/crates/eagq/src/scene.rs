//! Scene annotations: the input schema, its JSON form, and validation.
//!
//! A scene lists the visible persons (uniform color, bounding box,
//! facing direction, body-extent code), an optional ball box, and the
//! visible field part with optional registration keypoints. Gold
//! labels (person role, team-defending flag, scene type) may ride
//! along for training and evaluation; they never feed graph
//! construction, which treats those attributes as hidden.
//!
//! Parsing is two-layered: serde reads a raw document (structural JSON
//! errors surface as parse errors with a location), then validation
//! promotes it to typed annotations (domain errors name the offending
//! field and value).

use crate::geometry::{
    BoundingBox, GeometryError, Homography, Point2, solve_homography, FIELD_LENGTH_M,
    FIELD_WIDTH_M, PENALTY_AREA_DEPTH_M, PENALTY_AREA_WIDTH_M,
};
use std::str::FromStr;
use thiserror::Error;

/// Entity ids reserved for the implicit graph nodes.
pub const RESERVED_IDS: [&str; 3] = ["field", "soccer", "scene"];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Facing direction of a person relative to the camera: front, back,
/// or not identifiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    F,
    B,
    N,
}

/// Body-extent code of a person: extended, moderate, shrunk, or not
/// identifiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    E,
    M,
    S,
    N,
}

/// Visible part of the pitch: left penalty area, midfield, or right
/// penalty area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldPart {
    L,
    M,
    R,
}

/// Gold person role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Goalkeeper,
    Referee,
    Player,
}

macro_rules! letter_enum_display {
    ($ty:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                match self {
                    $(Self::$v => write!(f, $s)),+
                }
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok(Self::$v),)+
                    other => Err(format!(
                        "out-of-domain value \"{}\" (expected one of {})",
                        other,
                        [$($s),+].join(", ")
                    )),
                }
            }
        }
    };
}

letter_enum_display!(Direction { F => "F", B => "B", N => "N" });
letter_enum_display!(Status { E => "E", M => "M", S => "S", N => "N" });
letter_enum_display!(FieldPart { L => "L", M => "M", R => "R" });
letter_enum_display!(Role {
    Goalkeeper => "goalkeeper",
    Referee => "referee",
    Player => "player",
});

impl Direction {
    pub const DOMAIN: [&'static str; 3] = ["F", "B", "N"];
}

impl Status {
    pub const DOMAIN: [&'static str; 4] = ["E", "M", "S", "N"];
}

impl FieldPart {
    pub const DOMAIN: [&'static str; 3] = ["L", "M", "R"];

    /// Field-frame positions of the four penalty-area corners for this
    /// part, ordered goal-line top, goal-line bottom, front-edge top,
    /// front-edge bottom (top = smaller pitch y). Midfield has no
    /// standard landmarks, so no targets.
    pub fn penalty_area_targets(&self) -> Option<[Point2; 4]> {
        let y0 = (FIELD_WIDTH_M - PENALTY_AREA_WIDTH_M) / 2.0;
        let y1 = y0 + PENALTY_AREA_WIDTH_M;
        match self {
            FieldPart::L => Some([
                Point2::field(0.0, y0),
                Point2::field(0.0, y1),
                Point2::field(PENALTY_AREA_DEPTH_M, y0),
                Point2::field(PENALTY_AREA_DEPTH_M, y1),
            ]),
            FieldPart::R => Some([
                Point2::field(FIELD_LENGTH_M, y0),
                Point2::field(FIELD_LENGTH_M, y1),
                Point2::field(FIELD_LENGTH_M - PENALTY_AREA_DEPTH_M, y0),
                Point2::field(FIELD_LENGTH_M - PENALTY_AREA_DEPTH_M, y1),
            ]),
            FieldPart::M => None,
        }
    }
}

impl Role {
    pub const DOMAIN: [&'static str; 3] = ["goalkeeper", "referee", "player"];
}

/// One annotated person.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonAnnotation {
    pub id: String,
    pub uniform: String,
    pub bbox: BoundingBox,
    pub direction: Direction,
    pub status: Status,
    /// Gold role, present only in labeled data.
    pub role: Option<Role>,
    /// Gold team-status flag, present only in labeled data: true when
    /// this person's team is defending.
    pub defending: Option<bool>,
}

/// The annotated ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SoccerAnnotation {
    pub bbox: BoundingBox,
}

/// The visible field part, with optional image positions of the four
/// penalty-area corners (see `FieldPart::penalty_area_targets` for the
/// required order).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAnnotation {
    pub part: FieldPart,
    pub keypoints: Option<[Point2; 4]>,
}

/// A full scene annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub persons: Vec<PersonAnnotation>,
    pub soccer: Option<SoccerAnnotation>,
    pub field: FieldAnnotation,
    /// Gold scene type, present only in labeled data.
    pub scene_type: Option<String>,
}

// Wire representation. Enums stay strings here so that domain errors
// come from validation, with field names, rather than from serde.
mod doc {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SceneDoc {
        pub scene_id: String,
        #[serde(default)]
        pub persons: Vec<PersonDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub soccer: Option<SoccerDoc>,
        pub field: FieldDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub scene_type: Option<String>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct PersonDoc {
        pub id: String,
        pub uniform: String,
        pub bbox: [f64; 4],
        pub direction: String,
        pub status: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub role: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub defending: Option<bool>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SoccerDoc {
        pub bbox: [f64; 4],
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct FieldDoc {
        pub part: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub keypoints: Option<Vec<[f64; 2]>>,
    }
}

fn bbox_from_array(field: &str, a: [f64; 4]) -> Result<BoundingBox, SceneError> {
    BoundingBox::new(a[0], a[1], a[2], a[3]).map_err(|e| invalid(field, e.to_string()))
}

fn parse_enum<T: FromStr<Err = String>>(field: &str, s: &str) -> Result<T, SceneError> {
    s.parse().map_err(|e: String| invalid(field, e))
}

impl SceneAnnotation {
    /// Parses and validates a scene from its JSON form.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let doc: doc::SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: doc::SceneDoc) -> Result<Self, SceneError> {
        let mut persons = Vec::with_capacity(doc.persons.len());
        for (i, p) in doc.persons.into_iter().enumerate() {
            let at = |f: &str| format!("persons[{i}].{f}");
            persons.push(PersonAnnotation {
                bbox: bbox_from_array(&at("bbox"), p.bbox)?,
                direction: parse_enum(&at("direction"), &p.direction)?,
                status: parse_enum(&at("status"), &p.status)?,
                role: p
                    .role
                    .map(|r| parse_enum(&at("role"), &r))
                    .transpose()?,
                defending: p.defending,
                id: p.id,
                uniform: p.uniform,
            });
        }
        let soccer = doc
            .soccer
            .map(|s| {
                Ok::<_, SceneError>(SoccerAnnotation {
                    bbox: bbox_from_array("soccer.bbox", s.bbox)?,
                })
            })
            .transpose()?;
        let keypoints = doc
            .field
            .keypoints
            .map(|pts| {
                if pts.len() != 4 {
                    return Err(invalid(
                        "field.keypoints",
                        format!("expected exactly 4 points, got {}", pts.len()),
                    ));
                }
                let mut out = [Point2::image(0.0, 0.0); 4];
                for (i, [x, y]) in pts.into_iter().enumerate() {
                    out[i] = Point2::new(x, y, crate::geometry::Frame::Image)
                        .map_err(|e| invalid(format!("field.keypoints[{i}]"), e.to_string()))?;
                }
                Ok(out)
            })
            .transpose()?;
        let scene = SceneAnnotation {
            scene_id: doc.scene_id,
            persons,
            soccer,
            field: FieldAnnotation {
                part: parse_enum("field.part", &doc.field.part)?,
                keypoints,
            },
            scene_type: doc.scene_type,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Renders the canonical JSON form (two-space indent, trailing
    /// newline). Parsing the result reproduces the annotation.
    pub fn to_json(&self) -> String {
        let doc = doc::SceneDoc {
            scene_id: self.scene_id.clone(),
            persons: self
                .persons
                .iter()
                .map(|p| doc::PersonDoc {
                    id: p.id.clone(),
                    uniform: p.uniform.clone(),
                    bbox: [p.bbox.x0, p.bbox.y0, p.bbox.x1, p.bbox.y1],
                    direction: p.direction.to_string(),
                    status: p.status.to_string(),
                    role: p.role.map(|r| r.to_string()),
                    defending: p.defending,
                })
                .collect(),
            soccer: self.soccer.as_ref().map(|s| doc::SoccerDoc {
                bbox: [s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1],
            }),
            field: doc::FieldDoc {
                part: self.field.part.to_string(),
                keypoints: self
                    .field
                    .keypoints
                    .map(|pts| pts.iter().map(|p| [p.x, p.y]).collect()),
            },
            scene_type: self.scene_type.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("scene docs always serialize");
        s.push('\n');
        s
    }

    /// Checks the cross-field rules: nonempty ids, id uniqueness,
    /// reserved ids, keypoint geometry.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.scene_id.is_empty() {
            return Err(invalid("scene_id", "must be nonempty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, p) in self.persons.iter().enumerate() {
            let at = |f: &str| format!("persons[{i}].{f}");
            if p.id.is_empty() {
                return Err(invalid(at("id"), "must be nonempty"));
            }
            if RESERVED_IDS.contains(&p.id.as_str()) {
                return Err(invalid(
                    at("id"),
                    format!("\"{}\" is reserved for an implicit graph node", p.id),
                ));
            }
            if !seen.insert(p.id.clone()) {
                return Err(invalid(at("id"), format!("duplicate person id \"{}\"", p.id)));
            }
            if p.uniform.is_empty() {
                return Err(invalid(at("uniform"), "must be nonempty"));
            }
        }
        if let Some(ref t) = self.scene_type {
            if t.is_empty() {
                return Err(invalid("scene_type", "must be nonempty when present"));
            }
        }
        if let Some(pts) = self.field.keypoints {
            validate_keypoints(&pts)?;
        }
        Ok(())
    }

    /// The homography registering this scene's image onto the standard
    /// pitch, when the annotation supports one: keypoints present and
    /// the visible part has standard landmarks. `None` means distances
    /// stay in the pixel frame.
    pub fn registration(&self) -> Result<Option<Homography>, SceneError> {
        let (Some(kps), Some(targets)) = (
            self.field.keypoints,
            self.field.part.penalty_area_targets(),
        ) else {
            return Ok(None);
        };
        let corr = [
            (kps[0], targets[0]),
            (kps[1], targets[1]),
            (kps[2], targets[2]),
            (kps[3], targets[3]),
        ];
        Ok(Some(solve_homography(&corr)?))
    }
}

fn validate_keypoints(pts: &[Point2; 4]) -> Result<(), SceneError> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if pts[i] == pts[j] {
                return Err(invalid(
                    "field.keypoints",
                    format!("points {i} and {j} are identical"),
                ));
            }
        }
    }
    // Any three keypoints collinear (relative sine below 1e-9) makes
    // the registration solve singular; reject early with a named field.
    for i in 0..4 {
        for j in (i + 1)..4 {
            for k in (j + 1)..4 {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let abx = b.x - a.x;
                let aby = b.y - a.y;
                let acx = c.x - a.x;
                let acy = c.y - a.y;
                let cross = abx * acy - aby * acx;
                let scale = (abx * abx + aby * aby).sqrt() * (acx * acx + acy * acy).sqrt();
                if cross.abs() <= 1e-9 * scale {
                    return Err(invalid(
                        "field.keypoints",
                        format!("points {i}, {j}, {k} are collinear"),
                    ));
                }
            }
        }
    }
    Ok(())
}

// Proptest strategies for valid scenes, shared across module tests.
#[cfg(test)]
pub(crate) mod strategies {
    use super::*;
    use proptest::prelude::*;

    prop_compose! {
        pub(crate) fn arb_person(i: usize)(
            uniform in "[a-z]{3,8}",
            x0 in 0.0..500.0f64,
            y0 in 0.0..500.0f64,
            w in 1.0..80.0f64,
            h in 1.0..120.0f64,
            dir in prop::sample::select(vec![Direction::F, Direction::B, Direction::N]),
            status in prop::sample::select(vec![Status::E, Status::M, Status::S, Status::N]),
            role in prop::option::of(prop::sample::select(vec![
                Role::Goalkeeper, Role::Referee, Role::Player
            ])),
            defending in prop::option::of(any::<bool>()),
        ) -> PersonAnnotation {
            PersonAnnotation {
                id: format!("p{i}"),
                uniform,
                bbox: BoundingBox::new(x0, y0, x0 + w, y0 + h).unwrap(),
                direction: dir,
                status,
                role,
                defending,
            }
        }
    }

    pub(crate) fn arb_scene() -> impl Strategy<Value = SceneAnnotation> {
        let persons = (0usize..6).prop_flat_map(|n| {
            (0..n).map(arb_person).collect::<Vec<_>>()
        });
        let soccer = prop::option::of((0.0..500.0f64, 0.0..500.0f64).prop_map(|(x, y)| {
            SoccerAnnotation {
                bbox: BoundingBox::new(x, y, x + 4.0, y + 4.0).unwrap(),
            }
        }));
        let field = (
            prop::sample::select(vec![FieldPart::L, FieldPart::M, FieldPart::R]),
            prop::option::of((10.0..50.0f64, 10.0..50.0f64)),
        )
            .prop_map(|(part, kp)| FieldAnnotation {
                part,
                // A jittered rectangle: never collinear, never repeated.
                keypoints: kp.map(|(dx, dy)| {
                    [
                        Point2::image(100.0, 100.0),
                        Point2::image(100.0 + dx, 400.0),
                        Point2::image(500.0, 100.0 + dy),
                        Point2::image(500.0 + dx, 400.0 + dy),
                    ]
                }),
            });
        (
            "[a-z0-9]{1,10}",
            persons,
            soccer,
            field,
            prop::option::of("[a-z]{3,9}"),
        )
            .prop_map(|(scene_id, persons, soccer, field, scene_type)| SceneAnnotation {
                scene_id,
                persons,
                soccer,
                field,
                scene_type,
            })
    }
}
