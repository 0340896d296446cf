//! Entity-attribute graphs: typed entities joined by triples.
//!
//! A triple relates a subject entity to an object through a named
//! predicate. The object is another entity (relation edges, which may
//! carry a numeric weight, as distance edges do), a value (attribute
//! edges), or a blank standing for a hidden attribute awaiting
//! inference.
//!
//! Graphs are immutable after construction: `complete` returns a new
//! graph with blanks filled. Triples are kept sorted and deduplicated,
//! entity tables sorted by id, so equal graphs render identically and
//! every traversal is deterministic.

use crate::geometry::{pairwise_distance, register_point, Frame, GeometryError};
use crate::scene::SceneAnnotation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use thiserror::Error;

/// Predicate names produced by graph construction.
pub mod predicates {
    /// Person uniform color (label).
    pub const UNIFORM: &str = "uniform";
    /// Bounding box of a person or the ball, as "x0,y0,x1,y1" (label).
    pub const LOCATION: &str = "location";
    /// Person facing direction code (label).
    pub const DIRECTION: &str = "direction";
    /// Person body-extent code (label).
    pub const STATUS: &str = "status";
    /// Person role; hidden, built as a blank.
    pub const ROLE: &str = "role";
    /// Visible field part code (label).
    pub const PART: &str = "part";
    /// Scene type; hidden, built as a blank.
    pub const TYPE: &str = "type";
    /// Pairwise distance edge between persons and the ball.
    pub const DISTANCE: &str = "distance";
}

#[derive(Debug, Error)]
pub enum EagError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid graph: {0}")]
    Validation(String),
    #[error("entity \"{0}\" is declared twice with different types")]
    DuplicateEntity(String),
    #[error("triple references undeclared entity \"{0}\"")]
    UnknownEntity(String),
    #[error("attribute ({id}, {predicate}) is already filled")]
    AlreadyComplete { id: String, predicate: String },
    #[error("no blank attribute ({id}, {predicate}) to fill")]
    NoSuchBlank { id: String, predicate: String },
    #[error("non-finite number in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Kind of an entity node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Person,
    Field,
    Soccer,
    Scene,
}

impl std::fmt::Display for EntityType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntityType::Person => write!(f, "person"),
            EntityType::Field => write!(f, "field"),
            EntityType::Soccer => write!(f, "soccer"),
            EntityType::Scene => write!(f, "scene"),
        }
    }
}

impl FromStr for EntityType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "person" => Ok(EntityType::Person),
            "field" => Ok(EntityType::Field),
            "soccer" => Ok(EntityType::Soccer),
            "scene" => Ok(EntityType::Scene),
            other => Err(format!(
                "out-of-domain entity type \"{other}\" (expected one of person, field, soccer, scene)"
            )),
        }
    }
}

/// A reference to an entity node: its id and type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityRef {
    pub id: String,
    pub etype: EntityType,
}

impl EntityRef {
    pub fn new(id: impl Into<String>, etype: EntityType) -> Self {
        EntityRef {
            id: id.into(),
            etype,
        }
    }

    pub fn person(id: impl Into<String>) -> Self {
        EntityRef::new(id, EntityType::Person)
    }
}

/// Measurement unit of a numeric value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unit {
    Pixels,
    Meters,
}

impl Unit {
    pub fn for_frame(frame: Frame) -> Unit {
        match frame {
            Frame::Image => Unit::Pixels,
            Frame::Field => Unit::Meters,
        }
    }
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Unit::Pixels => write!(f, "px"),
            Unit::Meters => write!(f, "m"),
        }
    }
}

impl FromStr for Unit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "px" => Ok(Unit::Pixels),
            "m" => Ok(Unit::Meters),
            other => Err(format!("out-of-domain unit \"{other}\" (expected px or m)")),
        }
    }
}

/// A finite number with a unit. Finiteness is a construction
/// invariant, which makes the manual total order and hash sound.
#[derive(Debug, Clone, Copy)]
pub struct Quantity {
    value: f64,
    unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Result<Self, EagError> {
        if !value.is_finite() {
            return Err(EagError::NonFinite(format!("{unit} quantity")));
        }
        Ok(Quantity { value, unit })
    }

    pub fn pixels(value: f64) -> Result<Self, EagError> {
        Quantity::new(value, Unit::Pixels)
    }

    pub fn meters(value: f64) -> Result<Self, EagError> {
        Quantity::new(value, Unit::Meters)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }
}

impl PartialEq for Quantity {
    fn eq(&self, other: &Self) -> bool {
        self.unit == other.unit && self.value.to_bits() == other.value.to_bits()
    }
}
impl Eq for Quantity {}

impl PartialOrd for Quantity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Quantity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.unit
            .cmp(&other.unit)
            .then_with(|| self.value.total_cmp(&other.value))
    }
}
impl std::hash::Hash for Quantity {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.unit.hash(state);
        self.value.to_bits().hash(state);
    }
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.value, self.unit)
    }
}

/// An attribute value: a label or a number with a unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Label(String),
    Number(Quantity),
}

impl Value {
    pub fn label(s: impl Into<String>) -> Value {
        Value::Label(s.into())
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Label(s) => write!(f, "{s}"),
            Value::Number(q) => write!(f, "{q}"),
        }
    }
}

/// The object side of a triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    /// A relation edge to another entity, optionally weighted (the
    /// weight is edge data, not part of the node's identity).
    Entity {
        target: EntityRef,
        weight: Option<Quantity>,
    },
    /// An attribute edge to a value node.
    Value(Value),
    /// A hidden attribute awaiting inference.
    Blank,
}

impl Object {
    pub fn entity(target: EntityRef) -> Object {
        Object::Entity {
            target,
            weight: None,
        }
    }

    pub fn weighted(target: EntityRef, weight: Quantity) -> Object {
        Object::Entity {
            target,
            weight: Some(weight),
        }
    }

    /// The node this object denotes, with edge data stripped. Two
    /// triples pointing at one entity with different weights still
    /// share an object node.
    pub fn node(&self) -> ObjectNode {
        match self {
            Object::Entity { target, .. } => ObjectNode::Entity(target.id.clone()),
            Object::Value(v) => ObjectNode::Value(v.clone()),
            Object::Blank => ObjectNode::Blank,
        }
    }
}

/// Node identity of a triple's object, used for filters and indexes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectNode {
    Entity(String),
    Value(Value),
    Blank,
}

/// One (subject, predicate, object) edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityRef,
    pub predicate: String,
    pub object: Object,
}

impl Triple {
    pub fn new(subject: EntityRef, predicate: impl Into<String>, object: Object) -> Self {
        Triple {
            subject,
            predicate: predicate.into(),
            object,
        }
    }
}

/// An entity-attribute graph.
#[derive(Debug, Clone)]
pub struct Eag {
    scene_id: String,
    entities: BTreeMap<String, EntityType>,
    triples: Vec<Triple>,
    by_subject: HashMap<String, Vec<usize>>,
    by_predicate: HashMap<String, Vec<usize>>,
    by_predicate_object: HashMap<(String, ObjectNode), Vec<usize>>,
}

impl PartialEq for Eag {
    fn eq(&self, other: &Self) -> bool {
        self.scene_id == other.scene_id
            && self.entities == other.entities
            && self.triples == other.triples
    }
}
impl Eq for Eag {}

impl Eag {
    /// Builds a graph from parts, validating that entity ids are
    /// unique, every triple endpoint is declared with a matching type,
    /// and predicates are nonempty. Triples are sorted and
    /// deduplicated.
    pub fn new(
        scene_id: impl Into<String>,
        entities: impl IntoIterator<Item = EntityRef>,
        mut triples: Vec<Triple>,
    ) -> Result<Self, EagError> {
        let scene_id = scene_id.into();
        if scene_id.is_empty() {
            return Err(EagError::Validation("scene_id must be nonempty".into()));
        }
        let mut table = BTreeMap::new();
        for e in entities {
            if e.id.is_empty() {
                return Err(EagError::Validation("entity id must be nonempty".into()));
            }
            match table.insert(e.id.clone(), e.etype) {
                Some(prev) if prev != e.etype => {
                    return Err(EagError::DuplicateEntity(e.id));
                }
                _ => {}
            }
        }
        let check = |r: &EntityRef| -> Result<(), EagError> {
            match table.get(&r.id) {
                Some(t) if *t == r.etype => Ok(()),
                Some(t) => Err(EagError::Validation(format!(
                    "triple references \"{}\" as {} but it is declared {}",
                    r.id, r.etype, t
                ))),
                None => Err(EagError::UnknownEntity(r.id.clone())),
            }
        };
        for t in &triples {
            if t.predicate.is_empty() {
                return Err(EagError::Validation("predicate must be nonempty".into()));
            }
            check(&t.subject)?;
            if let Object::Entity { target, .. } = &t.object {
                check(target)?;
            }
        }
        triples.sort();
        triples.dedup();
        let mut g = Eag {
            scene_id,
            entities: table,
            triples,
            by_subject: HashMap::new(),
            by_predicate: HashMap::new(),
            by_predicate_object: HashMap::new(),
        };
        g.rebuild_indexes();
        Ok(g)
    }

    fn rebuild_indexes(&mut self) {
        self.by_subject.clear();
        self.by_predicate.clear();
        self.by_predicate_object.clear();
        for (i, t) in self.triples.iter().enumerate() {
            self.by_subject
                .entry(t.subject.id.clone())
                .or_default()
                .push(i);
            self.by_predicate
                .entry(t.predicate.clone())
                .or_default()
                .push(i);
            self.by_predicate_object
                .entry((t.predicate.clone(), t.object.node()))
                .or_default()
                .push(i);
        }
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    /// Entities in id order.
    pub fn entities(&self) -> impl Iterator<Item = EntityRef> + '_ {
        self.entities
            .iter()
            .map(|(id, t)| EntityRef::new(id.clone(), *t))
    }

    pub fn entity_type(&self, id: &str) -> Option<EntityType> {
        self.entities.get(id).copied()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Entities of one type, in id order.
    pub fn entities_of_type(&self, etype: EntityType) -> Vec<EntityRef> {
        self.entities()
            .filter(|e| e.etype == etype)
            .collect()
    }

    /// All triples in canonical order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Triples matching the given filters, in canonical order. `None`
    /// matches anything; the object filter matches on node identity,
    /// ignoring edge weights.
    pub fn triples_matching(
        &self,
        subject: Option<&str>,
        predicate: Option<&str>,
        object: Option<&ObjectNode>,
    ) -> Vec<&Triple> {
        // Start from the most selective available index; indexes hold
        // ascending positions, so results stay in canonical order.
        let candidates: Vec<usize> = match (subject, predicate, object) {
            (_, Some(p), Some(o)) => self
                .by_predicate_object
                .get(&(p.to_string(), o.clone()))
                .cloned()
                .unwrap_or_default(),
            (Some(s), _, _) => self.by_subject.get(s).cloned().unwrap_or_default(),
            (None, Some(p), None) => self.by_predicate.get(p).cloned().unwrap_or_default(),
            (None, None, Some(_)) | (None, None, None) => (0..self.triples.len()).collect(),
        };
        candidates
            .into_iter()
            .map(|i| &self.triples[i])
            .filter(|t| {
                subject.is_none_or(|s| t.subject.id == s)
                    && predicate.is_none_or(|p| t.predicate == p)
                    && object.is_none_or(|o| t.object.node() == *o)
            })
            .collect()
    }

    /// True when no triple has a blank object.
    pub fn is_complete(&self) -> bool {
        self.triples.iter().all(|t| t.object != Object::Blank)
    }

    /// Returns a new graph with the given blank attributes filled.
    /// Every key must name an existing blank: filling an already
    /// filled attribute or a missing one is an error, so inference
    /// passes cannot silently overwrite or invent attributes.
    pub fn complete(
        &self,
        fills: &BTreeMap<(EntityRef, String), Value>,
    ) -> Result<Eag, EagError> {
        let mut triples = self.triples.clone();
        for ((eref, pred), value) in fills {
            match self.entities.get(&eref.id) {
                Some(t) if *t == eref.etype => {}
                _ => return Err(EagError::UnknownEntity(eref.id.clone())),
            }
            let mut filled = false;
            let mut saw_nonblank = false;
            for t in triples.iter_mut() {
                if t.subject == *eref && t.predicate == *pred {
                    if t.object == Object::Blank {
                        t.object = Object::Value(value.clone());
                        filled = true;
                    } else {
                        saw_nonblank = true;
                    }
                }
            }
            if !filled {
                return Err(if saw_nonblank {
                    EagError::AlreadyComplete {
                        id: eref.id.clone(),
                        predicate: pred.clone(),
                    }
                } else {
                    EagError::NoSuchBlank {
                        id: eref.id.clone(),
                        predicate: pred.clone(),
                    }
                });
            }
        }
        Eag::new(
            self.scene_id.clone(),
            self.entities(),
            triples,
        )
    }

    /// The value of an attribute triple, when present and filled.
    pub fn value_of(&self, subject: &str, predicate: &str) -> Option<&Value> {
        self.by_subject.get(subject).and_then(|idxs| {
            idxs.iter().find_map(|&i| {
                let t = &self.triples[i];
                if t.predicate == predicate {
                    if let Object::Value(v) = &t.object {
                        return Some(v);
                    }
                }
                None
            })
        })
    }

    /// The weight of the distance edge from `a` to `b`, when present.
    pub fn distance_between(&self, a: &str, b: &str) -> Option<Quantity> {
        self.by_subject.get(a).and_then(|idxs| {
            idxs.iter().find_map(|&i| {
                let t = &self.triples[i];
                if t.predicate == predicates::DISTANCE {
                    if let Object::Entity { target, weight } = &t.object {
                        if target.id == b {
                            return *weight;
                        }
                    }
                }
                None
            })
        })
    }
}

/// Whether graph construction registers positions onto the standard
/// pitch when the scene supports it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Registration {
    /// Register when keypoints and standard landmarks exist; fall back
    /// to the pixel frame otherwise.
    #[default]
    Auto,
    /// Always measure in the pixel frame.
    ImageFrame,
}

/// Builds the graph for a scene.
///
/// Every person contributes its observable attributes (uniform,
/// location, direction, status) plus a blank role; the field
/// contributes its part; the ball its location; the scene node a blank
/// type. Every ordered pair drawn from persons and the ball gets a
/// distance edge, weighted in meters when the scene registers onto the
/// standard pitch and in pixels otherwise: n persons with the ball
/// present yield n(n-1) + 2n distance edges.
pub fn build_eag(scene: &SceneAnnotation, registration: Registration) -> Result<Eag, EagError> {
    let homography = match registration {
        Registration::Auto => scene.registration().map_err(|e| match e {
            crate::scene::SceneError::Geometry(g) => EagError::Geometry(g),
            other => EagError::Validation(other.to_string()),
        })?,
        Registration::ImageFrame => None,
    };
    let unit = match &homography {
        Some(_) => Unit::Meters,
        None => Unit::Pixels,
    };

    let mut entities = vec![
        EntityRef::new("field", EntityType::Field),
        EntityRef::new("scene", EntityType::Scene),
    ];
    let mut triples = vec![
        Triple::new(
            EntityRef::new("field", EntityType::Field),
            predicates::PART,
            Object::Value(Value::label(scene.field.part.to_string())),
        ),
        Triple::new(
            EntityRef::new("scene", EntityType::Scene),
            predicates::TYPE,
            Object::Blank,
        ),
    ];

    let bbox_label = |b: &crate::geometry::BoundingBox| {
        Value::label(format!("{},{},{},{}", b.x0, b.y0, b.x1, b.y1))
    };
    let position = |b: &crate::geometry::BoundingBox| -> Result<_, EagError> {
        let c = b.center();
        Ok(match &homography {
            Some(h) => register_point(h, c)?,
            None => c,
        })
    };

    // Distance endpoints: all persons plus the ball when present.
    let mut points = Vec::new();

    for p in &scene.persons {
        let eref = EntityRef::person(&p.id);
        entities.push(eref.clone());
        triples.extend([
            Triple::new(
                eref.clone(),
                predicates::UNIFORM,
                Object::Value(Value::label(&p.uniform)),
            ),
            Triple::new(eref.clone(), predicates::LOCATION, Object::Value(bbox_label(&p.bbox))),
            Triple::new(
                eref.clone(),
                predicates::DIRECTION,
                Object::Value(Value::label(p.direction.to_string())),
            ),
            Triple::new(
                eref.clone(),
                predicates::STATUS,
                Object::Value(Value::label(p.status.to_string())),
            ),
            Triple::new(eref.clone(), predicates::ROLE, Object::Blank),
        ]);
        points.push((eref, position(&p.bbox)?));
    }

    if let Some(ball) = &scene.soccer {
        let eref = EntityRef::new("soccer", EntityType::Soccer);
        entities.push(eref.clone());
        triples.push(Triple::new(
            eref.clone(),
            predicates::LOCATION,
            Object::Value(bbox_label(&ball.bbox)),
        ));
        points.push((eref, position(&ball.bbox)?));
    }

    for (a, pa) in &points {
        for (b, pb) in &points {
            if a == b {
                continue;
            }
            let d = pairwise_distance(*pa, *pb)?;
            triples.push(Triple::new(
                a.clone(),
                predicates::DISTANCE,
                Object::weighted(b.clone(), Quantity::new(d, unit)?),
            ));
        }
    }

    Eag::new(scene.scene_id.clone(), entities, triples)
}

// Wire representation.
mod doc {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct EagDoc {
        pub scene_id: String,
        pub entities: Vec<EntityDoc>,
        pub triples: Vec<TripleDoc>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct EntityDoc {
        pub id: String,
        #[serde(rename = "type")]
        pub etype: String,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct TripleDoc {
        pub s: String,
        pub p: String,
        pub o: ObjectDoc,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ObjectDoc {
        pub kind: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub weight: Option<QuantityDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub number: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub unit: Option<String>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct QuantityDoc {
        pub value: f64,
        pub unit: String,
    }
}

fn value_to_doc(v: &Value) -> doc::ObjectDoc {
    let mut d = doc::ObjectDoc {
        kind: "value".into(),
        id: None,
        weight: None,
        label: None,
        number: None,
        unit: None,
    };
    match v {
        Value::Label(s) => d.label = Some(s.clone()),
        Value::Number(q) => {
            d.number = Some(q.value());
            d.unit = Some(q.unit().to_string());
        }
    }
    d
}

fn value_from_doc(d: &doc::ObjectDoc) -> Result<Value, EagError> {
    match (&d.label, d.number) {
        (Some(s), None) => Ok(Value::Label(s.clone())),
        (None, Some(n)) => {
            let unit: Unit = d
                .unit
                .as_deref()
                .ok_or_else(|| EagError::Validation("numeric value missing unit".into()))?
                .parse()
                .map_err(EagError::Validation)?;
            Ok(Value::Number(Quantity::new(n, unit)?))
        }
        _ => Err(EagError::Validation(
            "value object needs exactly one of label or number".into(),
        )),
    }
}

impl Eag {
    /// Renders the canonical JSON form (two-space indent, trailing
    /// newline). Parsing the result reproduces the graph.
    pub fn to_json(&self) -> String {
        let entities = self
            .entities
            .iter()
            .map(|(id, t)| doc::EntityDoc {
                id: id.clone(),
                etype: t.to_string(),
            })
            .collect();
        let triples = self
            .triples
            .iter()
            .map(|t| doc::TripleDoc {
                s: t.subject.id.clone(),
                p: t.predicate.clone(),
                o: match &t.object {
                    Object::Entity { target, weight } => doc::ObjectDoc {
                        kind: "entity".into(),
                        id: Some(target.id.clone()),
                        weight: weight.map(|q| doc::QuantityDoc {
                            value: q.value(),
                            unit: q.unit().to_string(),
                        }),
                        label: None,
                        number: None,
                        unit: None,
                    },
                    Object::Value(v) => value_to_doc(v),
                    Object::Blank => doc::ObjectDoc {
                        kind: "blank".into(),
                        id: None,
                        weight: None,
                        label: None,
                        number: None,
                        unit: None,
                    },
                },
            })
            .collect();
        let doc = doc::EagDoc {
            scene_id: self.scene_id.clone(),
            entities,
            triples,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("graph docs always serialize");
        s.push('\n');
        s
    }

    /// Parses and validates a graph from its JSON form.
    pub fn from_json(text: &str) -> Result<Self, EagError> {
        let doc: doc::EagDoc = serde_json::from_str(text).map_err(|e| EagError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut entities = Vec::with_capacity(doc.entities.len());
        let mut types: BTreeMap<String, EntityType> = BTreeMap::new();
        for e in &doc.entities {
            let etype: EntityType = e.etype.parse().map_err(EagError::Validation)?;
            types.insert(e.id.clone(), etype);
            entities.push(EntityRef::new(e.id.clone(), etype));
        }
        let resolve = |id: &str| -> Result<EntityRef, EagError> {
            types
                .get(id)
                .map(|t| EntityRef::new(id, *t))
                .ok_or_else(|| EagError::UnknownEntity(id.to_string()))
        };
        let mut triples = Vec::with_capacity(doc.triples.len());
        for t in &doc.triples {
            let object = match t.o.kind.as_str() {
                "entity" => {
                    let id = t.o.id.as_deref().ok_or_else(|| {
                        EagError::Validation("entity object missing id".into())
                    })?;
                    let weight = t
                        .o
                        .weight
                        .as_ref()
                        .map(|q| -> Result<Quantity, EagError> {
                            Quantity::new(q.value, q.unit.parse().map_err(EagError::Validation)?)
                        })
                        .transpose()?;
                    Object::Entity {
                        target: resolve(id)?,
                        weight,
                    }
                }
                "value" => Object::Value(value_from_doc(&t.o)?),
                "blank" => Object::Blank,
                other => {
                    return Err(EagError::Validation(format!(
                        "out-of-domain object kind \"{other}\" (expected entity, value, or blank)"
                    )))
                }
            };
            triples.push(Triple::new(resolve(&t.s)?, t.p.clone(), object));
        }
        Eag::new(doc.scene_id, entities, triples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::scene::{
        Direction, FieldAnnotation, FieldPart, PersonAnnotation, SoccerAnnotation, Status,
    };
    use proptest::prelude::*;

    fn person(id: &str, uniform: &str, bbox: [f64; 4]) -> PersonAnnotation {
        PersonAnnotation {
            id: id.into(),
            uniform: uniform.into(),
            bbox: BoundingBox::new(bbox[0], bbox[1], bbox[2], bbox[3]).unwrap(),
            direction: Direction::F,
            status: Status::E,
            role: None,
            defending: None,
        }
    }

    fn scene_of(
        persons: Vec<PersonAnnotation>,
        soccer: Option<[f64; 4]>,
        part: FieldPart,
    ) -> SceneAnnotation {
        SceneAnnotation {
            scene_id: "s1".into(),
            persons,
            soccer: soccer.map(|b| SoccerAnnotation {
                bbox: BoundingBox::new(b[0], b[1], b[2], b[3]).unwrap(),
            }),
            field: FieldAnnotation {
                part,
                keypoints: None,
            },
            scene_type: None,
        }
    }

    #[test]
    fn build_minimal_scene_has_expected_shape() {
        // One person centered at (3,4), ball centered at the origin.
        let scene = scene_of(
            vec![person("p1", "red", [0.0, 0.0, 6.0, 8.0])],
            Some([0.0, 0.0, 0.0, 0.0]),
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();

        assert_eq!(g.entity_count(), 4);
        assert_eq!(g.entity_type("p1"), Some(EntityType::Person));
        assert_eq!(g.entity_type("soccer"), Some(EntityType::Soccer));
        assert_eq!(g.entity_type("field"), Some(EntityType::Field));
        assert_eq!(g.entity_type("scene"), Some(EntityType::Scene));

        assert_eq!(
            g.value_of("p1", predicates::UNIFORM),
            Some(&Value::label("red"))
        );
        assert_eq!(
            g.value_of("p1", predicates::LOCATION),
            Some(&Value::label("0,0,6,8"))
        );
        assert_eq!(
            g.value_of("p1", predicates::DIRECTION),
            Some(&Value::label("F"))
        );
        assert_eq!(
            g.value_of("p1", predicates::STATUS),
            Some(&Value::label("E"))
        );
        assert_eq!(
            g.value_of("field", predicates::PART),
            Some(&Value::label("M"))
        );

        // Hidden attributes are blanks.
        assert_eq!(
            g.triples_matching(Some("p1"), Some(predicates::ROLE), None)[0].object,
            Object::Blank
        );
        assert_eq!(
            g.triples_matching(Some("scene"), Some(predicates::TYPE), None)[0].object,
            Object::Blank
        );
        assert!(!g.is_complete());

        // 3-4-5 distances in pixels, both directions.
        let d = g.distance_between("p1", "soccer").unwrap();
        assert_eq!(d.value(), 5.0);
        assert_eq!(d.unit(), Unit::Pixels);
        assert_eq!(g.distance_between("soccer", "p1").unwrap().value(), 5.0);

        // 5 person triples + field part + scene type + soccer location
        // + 2 distance edges.
        assert_eq!(g.triples().len(), 10);
    }

    #[test]
    fn build_without_ball_has_no_ball_edges() {
        let scene = scene_of(
            vec![
                person("p1", "red", [0.0, 0.0, 2.0, 2.0]),
                person("p2", "red", [10.0, 0.0, 12.0, 2.0]),
            ],
            None,
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();
        assert_eq!(g.entity_type("soccer"), None);
        let distances = g.triples_matching(None, Some(predicates::DISTANCE), None);
        assert_eq!(distances.len(), 2);
        assert_eq!(g.distance_between("p1", "p2").unwrap().value(), 10.0);
        assert_eq!(g.distance_between("p2", "p1").unwrap().value(), 10.0);
    }

    /// Oracle: recompute every expected distance edge from the scene
    /// with independent arithmetic and require exact agreement.
    #[test]
    fn distance_edges_match_pairwise_enumeration() {
        let scene = scene_of(
            vec![
                person("a", "red", [0.0, 0.0, 2.0, 2.0]),
                person("b", "blue", [7.0, 1.0, 9.0, 5.0]),
                person("c", "red", [20.0, 8.0, 26.0, 14.0]),
                person("d", "blue", [3.0, 30.0, 5.0, 34.0]),
            ],
            Some([40.0, 40.0, 44.0, 44.0]),
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();

        let mut centers: Vec<(String, f64, f64)> = scene
            .persons
            .iter()
            .map(|p| {
                (
                    p.id.clone(),
                    (p.bbox.x0 + p.bbox.x1) / 2.0,
                    (p.bbox.y0 + p.bbox.y1) / 2.0,
                )
            })
            .collect();
        centers.push(("soccer".into(), 42.0, 42.0));

        let mut expected = 0;
        for (ia, xa, ya) in &centers {
            for (ib, xb, yb) in &centers {
                if ia == ib {
                    continue;
                }
                expected += 1;
                let d = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt();
                let got = g.distance_between(ia, ib).unwrap();
                assert_eq!(got.value(), d, "distance {ia} -> {ib}");
                assert_eq!(got.unit(), Unit::Pixels);
            }
        }
        // n(n-1) person pairs plus 2n ball pairs: 4*3 + 2*4.
        assert_eq!(expected, 20);
        assert_eq!(
            g.triples_matching(None, Some(predicates::DISTANCE), None).len(),
            20
        );
    }

    fn registered_scene() -> SceneAnnotation {
        // Keypoints at half the left-part landmark coordinates solve to
        // the doubling map diag(2,2,1).
        let mut scene = scene_of(
            vec![
                person("p1", "red", [0.0, 0.0, 2.0, 2.0]),
                person("p2", "blue", [3.0, 4.0, 5.0, 6.0]),
            ],
            None,
            FieldPart::L,
        );
        scene.field.keypoints = Some([
            crate::geometry::Point2::image(0.0, 6.92),
            crate::geometry::Point2::image(0.0, 27.08),
            crate::geometry::Point2::image(8.25, 6.92),
            crate::geometry::Point2::image(8.25, 27.08),
        ]);
        scene
    }

    #[test]
    fn registration_yields_meter_distances() {
        let g = build_eag(&registered_scene(), Registration::Auto).unwrap();
        let d = g.distance_between("p1", "p2").unwrap();
        assert_eq!(d.unit(), Unit::Meters);
        // Pixel centers (1,1) and (4,5) double to (2,2) and (8,10).
        assert!((d.value() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn forced_image_frame_keeps_pixel_distances() {
        let g = build_eag(&registered_scene(), Registration::ImageFrame).unwrap();
        let d = g.distance_between("p1", "p2").unwrap();
        assert_eq!(d.unit(), Unit::Pixels);
        assert_eq!(d.value(), 5.0);
    }

    #[test]
    fn complete_fills_blanks_and_preserves_original() {
        let scene = scene_of(
            vec![person("p1", "red", [0.0, 0.0, 2.0, 2.0])],
            None,
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();
        let mut fills = BTreeMap::new();
        fills.insert(
            (EntityRef::person("p1"), predicates::ROLE.to_string()),
            Value::label("player"),
        );
        let g2 = g.complete(&fills).unwrap();

        assert_eq!(g.value_of("p1", predicates::ROLE), None);
        assert_eq!(
            g2.value_of("p1", predicates::ROLE),
            Some(&Value::label("player"))
        );
        // The scene-type blank is still open.
        assert!(!g2.is_complete());

        let mut fills2 = BTreeMap::new();
        fills2.insert(
            (
                EntityRef::new("scene", EntityType::Scene),
                predicates::TYPE.to_string(),
            ),
            Value::label("midfield-play"),
        );
        let g3 = g2.complete(&fills2).unwrap();
        assert!(g3.is_complete());
    }

    #[test]
    fn complete_rejects_filled_and_missing_attributes() {
        let scene = scene_of(
            vec![person("p1", "red", [0.0, 0.0, 2.0, 2.0])],
            None,
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();

        let mut fills = BTreeMap::new();
        fills.insert(
            (EntityRef::person("p1"), predicates::UNIFORM.to_string()),
            Value::label("blue"),
        );
        assert!(matches!(
            g.complete(&fills),
            Err(EagError::AlreadyComplete { .. })
        ));

        let mut fills = BTreeMap::new();
        fills.insert(
            (EntityRef::person("p1"), "age".to_string()),
            Value::label("old"),
        );
        assert!(matches!(g.complete(&fills), Err(EagError::NoSuchBlank { .. })));

        let mut fills = BTreeMap::new();
        fills.insert(
            (EntityRef::person("ghost"), predicates::ROLE.to_string()),
            Value::label("player"),
        );
        assert!(matches!(g.complete(&fills), Err(EagError::UnknownEntity(_))));
    }

    #[test]
    fn empty_graph_is_complete() {
        let g = Eag::new("g0", [], vec![]).unwrap();
        assert!(g.is_complete());
        assert_eq!(g.triples().len(), 0);
    }

    #[test]
    fn triples_matching_filters_compose() {
        let scene = scene_of(
            vec![
                person("p1", "red", [0.0, 0.0, 2.0, 2.0]),
                person("p2", "blue", [4.0, 0.0, 6.0, 2.0]),
            ],
            Some([10.0, 10.0, 12.0, 12.0]),
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();

        assert_eq!(g.triples_matching(None, None, None).len(), g.triples().len());
        assert_eq!(
            g.triples_matching(Some("p1"), Some(predicates::UNIFORM), None).len(),
            1
        );
        // Object filter works on node identity: the weighted distance
        // edges to the ball are found by the bare entity node.
        let to_ball = g.triples_matching(
            None,
            Some(predicates::DISTANCE),
            Some(&ObjectNode::Entity("soccer".into())),
        );
        assert_eq!(to_ball.len(), 2);
        // Filter by value node.
        let reds = g.triples_matching(
            None,
            Some(predicates::UNIFORM),
            Some(&ObjectNode::Value(Value::label("red"))),
        );
        assert_eq!(reds.len(), 1);
        assert_eq!(reds[0].subject.id, "p1");
    }

    #[test]
    fn duplicate_and_undeclared_entities_rejected() {
        let e = Eag::new(
            "g",
            [
                EntityRef::person("x"),
                EntityRef::new("x", EntityType::Field),
            ],
            vec![],
        );
        assert!(matches!(e, Err(EagError::DuplicateEntity(_))));

        let e = Eag::new(
            "g",
            [EntityRef::person("a")],
            vec![Triple::new(
                EntityRef::person("a"),
                "knows",
                Object::entity(EntityRef::person("b")),
            )],
        );
        assert!(matches!(e, Err(EagError::UnknownEntity(_))));
    }

    #[test]
    fn build_is_deterministic() {
        let scene = scene_of(
            vec![
                person("p2", "blue", [4.0, 0.0, 6.0, 2.0]),
                person("p1", "red", [0.0, 0.0, 2.0, 2.0]),
            ],
            Some([10.0, 10.0, 12.0, 12.0]),
            FieldPart::L,
        );
        let a = build_eag(&scene, Registration::Auto).unwrap();
        let b = build_eag(&scene, Registration::Auto).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn json_round_trip_minimal() {
        let scene = scene_of(
            vec![person("p1", "red", [0.0, 0.0, 6.0, 8.0])],
            Some([0.0, 0.0, 0.0, 0.0]),
            FieldPart::M,
        );
        let g = build_eag(&scene, Registration::Auto).unwrap();
        let parsed = Eag::from_json(&g.to_json()).unwrap();
        assert_eq!(g, parsed);
    }

    #[test]
    fn from_json_rejects_bad_documents() {
        assert!(matches!(
            Eag::from_json("{"),
            Err(EagError::Parse { .. })
        ));
        // Triple referencing an undeclared entity.
        let text = r#"{"scene_id":"s","entities":[{"id":"a","type":"person"}],
            "triples":[{"s":"b","p":"uniform","o":{"kind":"blank"}}]}"#;
        assert!(matches!(Eag::from_json(text), Err(EagError::UnknownEntity(_))));
        // Value object carrying both label and number.
        let text = r#"{"scene_id":"s","entities":[{"id":"a","type":"person"}],
            "triples":[{"s":"a","p":"x","o":{"kind":"value","label":"l","number":1.0,"unit":"px"}}]}"#;
        assert!(matches!(Eag::from_json(text), Err(EagError::Validation(_))));
        // Unknown unit.
        let text = r#"{"scene_id":"s","entities":[{"id":"a","type":"person"}],
            "triples":[{"s":"a","p":"x","o":{"kind":"value","number":1.0,"unit":"yd"}}]}"#;
        assert!(matches!(Eag::from_json(text), Err(EagError::Validation(_))));
    }

    #[test]
    fn quantity_rejects_non_finite() {
        assert!(Quantity::pixels(f64::NAN).is_err());
        assert!(Quantity::meters(f64::INFINITY).is_err());
    }

    proptest! {
        /// Graphs built from arbitrary valid scenes serialize and parse
        /// back to themselves.
        #[test]
        fn json_round_trip(scene in crate::scene::strategies::arb_scene()) {
            let g = build_eag(&scene, Registration::Auto).unwrap();
            let parsed = Eag::from_json(&g.to_json()).unwrap();
            prop_assert_eq!(g, parsed);
        }

        /// Distance edges are symmetric in value.
        #[test]
        fn distances_symmetric(scene in crate::scene::strategies::arb_scene()) {
            let g = build_eag(&scene, Registration::Auto).unwrap();
            for t in g.triples_matching(None, Some(predicates::DISTANCE), None) {
                if let Object::Entity { target, weight } = &t.object {
                    let back = g.distance_between(&target.id, &t.subject.id).unwrap();
                    prop_assert_eq!(weight.unwrap().value(), back.value());
                }
            }
        }

        /// The index-backed filter agrees with a plain linear scan for
        /// every filter shape.
        #[test]
        fn triples_matching_agrees_with_linear_scan(
            scene in crate::scene::strategies::arb_scene(),
            pick_subject in proptest::option::of(0usize..8),
            pick_predicate in proptest::option::of(0usize..8),
            use_object in proptest::bool::ANY,
        ) {
            let g = build_eag(&scene, Registration::Auto).unwrap();
            let all = g.triples();
            prop_assume!(!all.is_empty());

            let subject = pick_subject.map(|i| all[i % all.len()].subject.id.clone());
            let predicate = pick_predicate.map(|i| all[i % all.len()].predicate.clone());
            let object = if use_object {
                Some(all[(pick_subject.unwrap_or(0) + pick_predicate.unwrap_or(0)) % all.len()].object.node())
            } else {
                None
            };

            let got = g.triples_matching(subject.as_deref(), predicate.as_deref(), object.as_ref());
            let want: Vec<&Triple> = all
                .iter()
                .filter(|t| {
                    subject.as_deref().is_none_or(|s| t.subject.id == s)
                        && predicate.as_deref().is_none_or(|p| t.predicate == p)
                        && object.as_ref().is_none_or(|o| t.object.node() == *o)
                })
                .collect();
            prop_assert_eq!(got, want);
        }
    }
}
