//! Valuation search: matches query graphs against entity-attribute
//! graphs under subgraph-isomorphism semantics, then assembles typed
//! answers, applying the min()/num() aggregates and the template
//! post-processing hooks.
//!
//! A valuation maps query triples to data triples bijectively,
//! preserving predicates, entity types, and constant values, and maps
//! distinct query nodes (variables, wildcards, and constants alike) to
//! distinct graph nodes. Blank data objects match nothing: incomplete
//! graphs must run inference before querying.

use crate::bayes::{self, BayesError, BayesNet};
use crate::eag::{predicates, Eag, EntityRef, EntityType, Object, ObjectNode, Quantity, Triple, Value};
use crate::query::{AnswerKind, QueryGraph, Term, TemplatePlan};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error(
        "instance too large for the brute-force oracle: {query} query triples (max {max_q}), {graph} graph triples (max {max_g})",
        max_q = BRUTE_FORCE_MAX_QUERY,
        max_g = BRUTE_FORCE_MAX_GRAPH
    )]
    OracleTooLarge { query: usize, graph: usize },
    #[error("matched distance edge ({subject}, distance, {object}) carries no weight")]
    MissingWeight { subject: String, object: String },
    #[error("distance weights mix pixel and meter units")]
    MixedUnits,
    #[error("answer parse error: {0}")]
    Parse(String),
    #[error("internal invariant failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Inference(#[from] BayesError),
}

/// What a query node is bound to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Binding {
    Entity(EntityRef),
    Value(Value),
}

/// One match: bindings for every variable and wildcard node (keyed by
/// the term's canonical node key) plus the matched data triples,
/// aligned index-for-index with the query's triples.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Valuation {
    bindings: BTreeMap<String, Binding>,
    matched: Vec<Triple>,
}

impl Valuation {
    pub fn bindings(&self) -> &BTreeMap<String, Binding> {
        &self.bindings
    }

    pub fn get(&self, node_key: &str) -> Option<&Binding> {
        self.bindings.get(node_key)
    }

    pub fn matched(&self) -> &[Triple] {
        &self.matched
    }
}

fn subject_node(t: &Triple) -> ObjectNode {
    ObjectNode::Entity(t.subject.id.clone())
}

/// The constant nodes a query mentions. Variables may not bind these:
/// the valuation maps query nodes to graph nodes injectively, and
/// constants already map to themselves.
fn const_nodes(q: &QueryGraph) -> HashSet<ObjectNode> {
    let mut out = HashSet::new();
    for t in q.triples() {
        for term in [&t.subject, &t.object] {
            if let Term::Const(v) = term {
                out.insert(ObjectNode::Value(v.clone()));
            }
        }
    }
    out
}

/// Whether an entity-like term accepts an entity of the given type.
fn type_ok(term: &Term, etype: EntityType) -> bool {
    match term {
        Term::EntityVar { etype: t, .. } => t.map_or(true, |t| t == etype),
        Term::Wildcard { etype: t, .. } => *t == etype,
        _ => false,
    }
}

/// Finds every valuation of `q` against `g`: backtracking over the
/// query triples in ascending initial-candidate-count order, with
/// forward checking through the graph's indexes. Output is duplicate
/// free and sorted by bindings, so repeated runs are identical.
pub fn find_valuations(q: &QueryGraph, g: &Eag) -> Vec<Valuation> {
    let consts = const_nodes(q);
    let qts = q.triples();

    // Static search order: most constrained triple first.
    let mut order: Vec<usize> = (0..qts.len()).collect();
    let initial_count = |qi: &usize| -> usize {
        let t = &qts[*qi];
        let obj = match &t.object {
            Term::Const(v) => Some(ObjectNode::Value(v.clone())),
            _ => None,
        };
        g.triples_matching(None, Some(&t.predicate), obj.as_ref()).len()
    };
    order.sort_by_key(|qi| (initial_count(qi), *qi));

    struct State<'g> {
        bound: HashMap<String, ObjectNode>,
        used_nodes: HashSet<ObjectNode>,
        used_triples: HashSet<&'g Triple>,
        matched: Vec<Option<&'g Triple>>,
    }

    /// Binds `key` to `node`, returning whether the key was newly
    /// bound (for undo) or None on conflict.
    fn bind(state: &mut State<'_>, consts: &HashSet<ObjectNode>, key: String, node: ObjectNode) -> Option<bool> {
        match state.bound.get(&key) {
            Some(existing) => (*existing == node).then_some(false),
            None => {
                if state.used_nodes.contains(&node) || consts.contains(&node) {
                    return None;
                }
                state.used_nodes.insert(node.clone());
                state.bound.insert(key, node);
                Some(true)
            }
        }
    }

    fn unbind(state: &mut State<'_>, key: &str) {
        if let Some(node) = state.bound.remove(key) {
            state.used_nodes.remove(&node);
        }
    }

    fn search<'g>(
        q: &QueryGraph,
        g: &'g Eag,
        order: &[usize],
        consts: &HashSet<ObjectNode>,
        pos: usize,
        state: &mut State<'g>,
        out: &mut Vec<Valuation>,
    ) {
        if pos == order.len() {
            out.push(emit(g, state));
            return;
        }
        let qi = order[pos];
        let t = &q.triples()[qi];

        let subject_key = t.subject.node_key();
        let bound_subject = state.bound.get(&subject_key).and_then(|n| match n {
            ObjectNode::Entity(id) => Some(id.clone()),
            _ => None,
        });
        let object_node = match &t.object {
            Term::Const(v) => Some(ObjectNode::Value(v.clone())),
            other => state.bound.get(&other.node_key()).cloned(),
        };

        let candidates =
            g.triples_matching(bound_subject.as_deref(), Some(&t.predicate), object_node.as_ref());
        for cand in candidates {
            if state.used_triples.contains(cand) {
                continue;
            }
            if !type_ok(&t.subject, cand.subject.etype) {
                continue;
            }
            let Some(subject_fresh) = bind(
                state,
                consts,
                subject_key.clone(),
                subject_node(cand),
            ) else {
                continue;
            };

            let object_ok = match (&t.object, &cand.object) {
                (Term::Const(want), Object::Value(have)) => Some((want == have).then_some(false)),
                (Term::Const(_), _) => Some(None),
                (Term::ValueVar { .. }, Object::Value(v)) => Some(bind(
                    state,
                    consts,
                    t.object.node_key(),
                    ObjectNode::Value(v.clone()),
                )),
                (Term::ValueVar { .. }, _) => Some(None),
                (term, Object::Entity { target, .. }) if type_ok(term, target.etype) => {
                    Some(bind(
                        state,
                        consts,
                        term.node_key(),
                        ObjectNode::Entity(target.id.clone()),
                    ))
                }
                _ => Some(None),
            };
            match object_ok {
                Some(Some(object_fresh)) => {
                    state.used_triples.insert(cand);
                    state.matched[qi] = Some(cand);
                    search(q, g, order, consts, pos + 1, state, out);
                    state.matched[qi] = None;
                    state.used_triples.remove(cand);
                    if object_fresh {
                        unbind(state, &t.object.node_key());
                    }
                }
                _ => {}
            }
            if subject_fresh {
                unbind(state, &subject_key);
            }
        }
    }

    fn emit(g: &Eag, state: &State<'_>) -> Valuation {
        let bindings = state
            .bound
            .iter()
            .map(|(key, node)| {
                let binding = match node {
                    ObjectNode::Entity(id) => Binding::Entity(EntityRef::new(
                        id.clone(),
                        g.entity_type(id).expect("bound entities exist"),
                    )),
                    ObjectNode::Value(v) => Binding::Value(v.clone()),
                    ObjectNode::Blank => unreachable!("blanks are never bound"),
                };
                (key.clone(), binding)
            })
            .collect();
        let matched = state
            .matched
            .iter()
            .map(|t| (*t.expect("all query triples assigned")).clone())
            .collect();
        Valuation { bindings, matched }
    }

    let mut state = State {
        bound: HashMap::new(),
        used_nodes: HashSet::new(),
        used_triples: HashSet::new(),
        matched: vec![None; qts.len()],
    };
    let mut out = Vec::new();
    search(q, g, &order, &consts, 0, &mut state, &mut out);
    out.sort();
    out.dedup();
    out
}

pub const BRUTE_FORCE_MAX_QUERY: usize = 6;
pub const BRUTE_FORCE_MAX_GRAPH: usize = 20;

/// Exhaustive-enumeration oracle: tries every injective assignment of
/// data triples to query triples and keeps those satisfying the
/// valuation conditions. Guarded by size; output ordering matches
/// `find_valuations`.
pub fn brute_force_valuations(q: &QueryGraph, g: &Eag) -> Result<Vec<Valuation>, MatchError> {
    if q.triples().len() > BRUTE_FORCE_MAX_QUERY || g.triples().len() > BRUTE_FORCE_MAX_GRAPH {
        return Err(MatchError::OracleTooLarge {
            query: q.triples().len(),
            graph: g.triples().len(),
        });
    }
    let data: Vec<&Triple> = g.triples().iter().collect();
    let consts = const_nodes(q);

    // Node bindings as a flat association list, checked pair by pair.
    type Assoc = Vec<(String, ObjectNode)>;

    fn admit(term: &Term, node: ObjectNode, assoc: &mut Assoc, consts: &HashSet<ObjectNode>) -> bool {
        let key = term.node_key();
        if let Some((_, existing)) = assoc.iter().find(|(k, _)| *k == key) {
            return *existing == node;
        }
        if consts.contains(&node) || assoc.iter().any(|(_, n)| *n == node) {
            return false;
        }
        assoc.push((key, node));
        true
    }

    fn compatible(qt: &crate::query::QueryTriple, dt: &Triple, assoc: &mut Assoc, consts: &HashSet<ObjectNode>) -> bool {
        if qt.predicate != dt.predicate {
            return false;
        }
        if !type_ok(&qt.subject, dt.subject.etype) {
            return false;
        }
        if !admit(&qt.subject, ObjectNode::Entity(dt.subject.id.clone()), assoc, consts) {
            return false;
        }
        match (&qt.object, &dt.object) {
            (Term::Const(want), Object::Value(have)) => want == have,
            (Term::ValueVar { .. }, Object::Value(v)) => {
                admit(&qt.object, ObjectNode::Value(v.clone()), assoc, consts)
            }
            (term @ (Term::EntityVar { .. } | Term::Wildcard { .. }), Object::Entity { target, .. }) => {
                type_ok(term, target.etype)
                    && admit(term, ObjectNode::Entity(target.id.clone()), assoc, consts)
            }
            _ => false,
        }
    }

    fn enumerate(
        q: &QueryGraph,
        g: &Eag,
        data: &[&Triple],
        consts: &HashSet<ObjectNode>,
        qi: usize,
        taken: &mut Vec<usize>,
        assoc: &Assoc,
        out: &mut Vec<Valuation>,
    ) {
        if qi == q.triples().len() {
            let bindings = assoc
                .iter()
                .map(|(key, node)| {
                    let b = match node {
                        ObjectNode::Entity(id) => Binding::Entity(EntityRef::new(
                            id.clone(),
                            g.entity_type(id).expect("bound entities exist"),
                        )),
                        ObjectNode::Value(v) => Binding::Value(v.clone()),
                        ObjectNode::Blank => unreachable!(),
                    };
                    (key.clone(), b)
                })
                .collect();
            let matched = taken.iter().map(|di| data[*di].clone()).collect();
            out.push(Valuation { bindings, matched });
            return;
        }
        for di in 0..data.len() {
            if taken.contains(&di) {
                continue;
            }
            let mut extended = assoc.clone();
            if compatible(&q.triples()[qi], data[di], &mut extended, consts) {
                taken.push(di);
                enumerate(q, g, data, consts, qi + 1, taken, &extended, out);
                taken.pop();
            }
        }
    }

    let mut out = Vec::new();
    enumerate(q, g, &data, &consts, 0, &mut Vec::new(), &Vec::new(), &mut out);
    out.sort();
    out.dedup();
    Ok(out)
}

/// Rechecks one valuation against the definition, condition by
/// condition, independent of how it was produced. Returns the first
/// violated condition.
pub fn verify_valuation(q: &QueryGraph, g: &Eag, v: &Valuation) -> Result<(), String> {
    let qts = q.triples();
    if v.matched().len() != qts.len() {
        return Err(format!(
            "valuation covers {} triples, query has {}",
            v.matched().len(),
            qts.len()
        ));
    }
    let mut seen: HashSet<&Triple> = HashSet::new();
    for dt in v.matched() {
        if !g.triples().contains(dt) {
            return Err(format!("matched triple {dt:?} is not in the graph"));
        }
        if !seen.insert(dt) {
            return Err(format!("data triple {dt:?} is matched twice"));
        }
    }

    // Rebuild the node map from the matched pairs.
    let mut nodes: BTreeMap<String, ObjectNode> = BTreeMap::new();
    let mut record = |key: String, node: ObjectNode| -> Result<(), String> {
        match nodes.get(&key) {
            Some(existing) if *existing != node => Err(format!(
                "query node {key} maps to both {existing:?} and {node:?}"
            )),
            _ => {
                nodes.insert(key, node);
                Ok(())
            }
        }
    };
    for (qt, dt) in qts.iter().zip(v.matched()) {
        if qt.predicate != dt.predicate {
            return Err(format!(
                "predicate {} matched against {}",
                qt.predicate, dt.predicate
            ));
        }
        if !type_ok(&qt.subject, dt.subject.etype) {
            return Err(format!(
                "subject {} bound to entity of type {}",
                qt.subject.node_key(),
                dt.subject.etype
            ));
        }
        record(qt.subject.node_key(), ObjectNode::Entity(dt.subject.id.clone()))?;
        match (&qt.object, &dt.object) {
            (Term::Const(want), Object::Value(have)) => {
                if want != have {
                    return Err(format!("constant {want:?} matched value {have:?}"));
                }
            }
            (Term::ValueVar { .. }, Object::Value(val)) => {
                record(qt.object.node_key(), ObjectNode::Value(val.clone()))?;
            }
            (term @ (Term::EntityVar { .. } | Term::Wildcard { .. }), Object::Entity { target, .. }) => {
                if !type_ok(term, target.etype) {
                    return Err(format!(
                        "object {} bound to entity of type {}",
                        term.node_key(),
                        target.etype
                    ));
                }
                record(term.node_key(), ObjectNode::Entity(target.id.clone()))?;
            }
            (term, obj) => {
                return Err(format!("term {term:?} cannot match object {obj:?}"));
            }
        }
    }

    // Injectivity over all query nodes, constants included.
    let consts = const_nodes(q);
    let mut images: HashSet<&ObjectNode> = HashSet::new();
    for (key, node) in &nodes {
        if consts.contains(node) {
            return Err(format!("variable {key} binds constant node {node:?}"));
        }
        if !images.insert(node) {
            return Err(format!("two query nodes bind {node:?}"));
        }
    }

    // The recorded bindings must be exactly the rebuilt map.
    if v.bindings().len() != nodes.len() {
        return Err(format!(
            "valuation records {} bindings, expected {}",
            v.bindings().len(),
            nodes.len()
        ));
    }
    for (key, binding) in v.bindings() {
        let expect = nodes
            .get(key)
            .ok_or_else(|| format!("binding for unknown node {key}"))?;
        let actual = match binding {
            Binding::Entity(e) => {
                if g.entity_type(&e.id) != Some(e.etype) {
                    return Err(format!("binding for {key} mis-states the entity type"));
                }
                ObjectNode::Entity(e.id.clone())
            }
            Binding::Value(v) => ObjectNode::Value(v.clone()),
        };
        if actual != *expect {
            return Err(format!("binding for {key} disagrees with the matched triples"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Answers.

/// A typed query answer. `None` is the distinguished no-answer result
/// (a min() over an empty match set); empty sets stay sets.
#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Entities(Vec<String>),
    Values(Vec<Value>),
    Count(u64),
    Bool(bool),
    Label(String),
    None,
}

mod doc {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
    pub enum AnswerDoc {
        Entities { payload: Vec<String> },
        Values { payload: Vec<ValueDoc> },
        Count { payload: u64 },
        Boolean { payload: bool },
        Label { payload: String },
        None,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ValueDoc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub number: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub unit: Option<String>,
    }
}

impl Answer {
    fn to_doc(&self) -> doc::AnswerDoc {
        match self {
            Answer::Entities(ids) => doc::AnswerDoc::Entities {
                payload: ids.clone(),
            },
            Answer::Values(vals) => doc::AnswerDoc::Values {
                payload: vals
                    .iter()
                    .map(|v| match v {
                        Value::Label(s) => doc::ValueDoc {
                            label: Some(s.clone()),
                            number: None,
                            unit: None,
                        },
                        Value::Number(q) => doc::ValueDoc {
                            label: None,
                            number: Some(q.value()),
                            unit: Some(q.unit().to_string()),
                        },
                    })
                    .collect(),
            },
            Answer::Count(n) => doc::AnswerDoc::Count { payload: *n },
            Answer::Bool(b) => doc::AnswerDoc::Boolean { payload: *b },
            Answer::Label(s) => doc::AnswerDoc::Label { payload: s.clone() },
            Answer::None => doc::AnswerDoc::None,
        }
    }

    fn from_doc(doc: doc::AnswerDoc) -> Result<Self, MatchError> {
        let answer = match doc {
            doc::AnswerDoc::Entities { payload } => Answer::Entities(payload),
            doc::AnswerDoc::Values { payload } => {
                let mut vals = Vec::with_capacity(payload.len());
                for v in payload {
                    let val = match (v.label, v.number, v.unit) {
                        (Some(s), None, None) => Value::Label(s),
                        (None, Some(n), Some(u)) => {
                            let unit = u
                                .parse()
                                .map_err(|e: String| MatchError::Parse(e))?;
                            Value::Number(
                                Quantity::new(n, unit)
                                    .map_err(|e| MatchError::Parse(e.to_string()))?,
                            )
                        }
                        _ => {
                            return Err(MatchError::Parse(
                                "value needs either a label or a number with a unit".into(),
                            ))
                        }
                    };
                    vals.push(val);
                }
                Answer::Values(vals)
            }
            doc::AnswerDoc::Count { payload } => Answer::Count(payload),
            doc::AnswerDoc::Boolean { payload } => Answer::Bool(payload),
            doc::AnswerDoc::Label { payload } => Answer::Label(payload),
            doc::AnswerDoc::None => Answer::None,
        };
        Ok(answer)
    }

    /// One-line tagged JSON: `{"kind": ..., "payload": ...}`, the
    /// no-answer case being `{"kind":"none"}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("answers always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, MatchError> {
        let doc: doc::AnswerDoc =
            serde_json::from_str(text).map_err(|e| MatchError::Parse(e.to_string()))?;
        Answer::from_doc(doc)
    }

    /// The plain-text rendering evaluation compares against: sets join
    /// with ", " (empty sets read "none"), Booleans read yes/no.
    pub fn render(&self) -> String {
        match self {
            Answer::Entities(ids) if ids.is_empty() => "none".into(),
            Answer::Entities(ids) => ids.join(", "),
            Answer::Values(vals) if vals.is_empty() => "none".into(),
            Answer::Values(vals) => vals
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", "),
            Answer::Count(n) => n.to_string(),
            Answer::Bool(true) => "yes".into(),
            Answer::Bool(false) => "no".into(),
            Answer::Label(s) => s.clone(),
            Answer::None => "none".into(),
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = doc::AnswerDoc::deserialize(deserializer)?;
        Answer::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

/// Answers a query: runs the valuation search, then applies the focus
/// aggregation declared by the query's answer kind.
pub fn answer_query(q: &QueryGraph, g: &Eag) -> Result<Answer, MatchError> {
    let vals = find_valuations(q, g);
    let key = q.focus_key();

    let entity_of = |v: &Valuation| -> Result<String, MatchError> {
        match v.get(&key) {
            Some(Binding::Entity(e)) => Ok(e.id.clone()),
            other => Err(MatchError::Internal(format!(
                "focus {key} bound to {other:?}, expected an entity"
            ))),
        }
    };

    if let Term::FuncApp { func, arg } = q.focus() {
        match func.as_str() {
            "num" => {
                let mut ids = BTreeSet::new();
                for v in &vals {
                    ids.insert(entity_of(v)?);
                }
                return Ok(Answer::Count(ids.len() as u64));
            }
            "min" => {
                if vals.is_empty() {
                    return Ok(Answer::None);
                }
                let anchor = q
                    .triples()
                    .iter()
                    .position(|t| {
                        t.predicate == predicates::DISTANCE
                            && t.subject.node_key() == arg.node_key()
                    })
                    .ok_or_else(|| {
                        MatchError::Internal("min focus without a distance anchor".into())
                    })?;
                let mut best: Option<(Quantity, String)> = None;
                for v in &vals {
                    let dt = &v.matched()[anchor];
                    let w = match &dt.object {
                        Object::Entity {
                            weight: Some(w), ..
                        } => *w,
                        Object::Entity { target, .. } => {
                            return Err(MatchError::MissingWeight {
                                subject: dt.subject.id.clone(),
                                object: target.id.clone(),
                            })
                        }
                        other => {
                            return Err(MatchError::Internal(format!(
                                "distance edge with non-entity object {other:?}"
                            )))
                        }
                    };
                    let id = entity_of(v)?;
                    match &best {
                        None => best = Some((w, id)),
                        Some((bw, bid)) => {
                            if w.unit() != bw.unit() {
                                return Err(MatchError::MixedUnits);
                            }
                            if w.value() < bw.value()
                                || (w.value() == bw.value() && id < *bid)
                            {
                                best = Some((w, id));
                            }
                        }
                    }
                }
                let (_, id) = best.expect("nonempty valuations");
                return Ok(Answer::Entities(vec![id]));
            }
            other => {
                return Err(MatchError::Internal(format!("unknown function {other}")))
            }
        }
    }

    match q.answer_kind() {
        AnswerKind::Boolean => Ok(Answer::Bool(!vals.is_empty())),
        AnswerKind::EntitySet => {
            let mut ids = BTreeSet::new();
            for v in &vals {
                ids.insert(entity_of(v)?);
            }
            Ok(Answer::Entities(ids.into_iter().collect()))
        }
        AnswerKind::ValueSet => {
            let mut out = BTreeSet::new();
            for v in &vals {
                match v.get(&key) {
                    Some(Binding::Value(val)) => {
                        out.insert(val.clone());
                    }
                    other => {
                        return Err(MatchError::Internal(format!(
                            "focus {key} bound to {other:?}, expected a value"
                        )))
                    }
                }
            }
            Ok(Answer::Values(out.into_iter().collect()))
        }
        AnswerKind::Label => {
            let mut labels = BTreeSet::new();
            for v in &vals {
                match v.get(&key) {
                    Some(Binding::Value(Value::Label(s))) => {
                        labels.insert(s.clone());
                    }
                    other => {
                        return Err(MatchError::Internal(format!(
                            "focus {key} bound to {other:?}, expected a label"
                        )))
                    }
                }
            }
            // A label answer is a single label; several distinct
            // bindings resolve to the smallest.
            Ok(match labels.into_iter().next() {
                Some(s) => Answer::Label(s),
                None => Answer::None,
            })
        }
        AnswerKind::Count => Err(MatchError::Internal(
            "count kind without a num() focus".into(),
        )),
    }
}

/// Answers a template plan: plain matching, matching plus the
/// goalkeeper team hook, or direct team-status inference (no matching
/// at all). `team_model` overrides the built-in team classifier.
pub fn answer_template(
    plan: &TemplatePlan,
    g: &Eag,
    team_model: Option<&BayesNet>,
) -> Result<Answer, MatchError> {
    match plan {
        TemplatePlan::Match(q) => answer_query(q, g),
        TemplatePlan::GoalkeeperTeam(q) => {
            let found = answer_query(q, g)?;
            let ids = match found {
                Answer::Entities(ids) => ids,
                other => {
                    return Err(MatchError::Internal(format!(
                        "goalkeeper query answered {other:?}"
                    )))
                }
            };
            // Sorted ids: several goalkeepers resolve to the smallest.
            let Some(gk) = ids.first() else {
                return Ok(Answer::None);
            };
            let roles = bayes::roles_from_eag(g)?;
            let team = bayes::goalkeeper_team(g, gk, &roles)?;
            Ok(Answer::Label(team))
        }
        TemplatePlan::TeamStatusInference => {
            let builtin;
            let net = match team_model {
                Some(n) => n,
                None => {
                    builtin = bayes::builtin_team_model();
                    &builtin
                }
            };
            let roles = bayes::roles_from_eag(g)?;
            let statuses = bayes::infer_team_status(g, &roles, net)?;
            // The defending team: strictly larger defending posterior;
            // an exact tie resolves to the smaller color (first in the
            // sorted map).
            let mut best: Option<(f64, &str)> = None;
            for (color, inference) in &statuses {
                let p = inference.posterior.prob("defending").ok_or_else(|| {
                    MatchError::Internal("team posterior lacks a defending entry".into())
                })?;
                if best.is_none_or(|(bp, _)| p > bp) {
                    best = Some((p, color));
                }
            }
            let (_, color) = best.ok_or_else(|| {
                MatchError::Internal("team inference returned no teams".into())
            })?;
            Ok(Answer::Label(color.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eag::{build_eag, Registration};
    use crate::geometry::BoundingBox;
    use crate::query::{parse_query, template, Modifier, QueryTriple, TemplateId};
    use crate::scene::{
        Direction, FieldAnnotation, FieldPart, PersonAnnotation, SceneAnnotation,
        SoccerAnnotation, Status,
    };
    use crate::synth::random_match_instance;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn person(
        id: &str,
        uniform: &str,
        role: &str,
        dir: Direction,
        status: Status,
        x: f64,
        y: f64,
    ) -> PersonAnnotation {
        PersonAnnotation {
            id: id.into(),
            uniform: uniform.into(),
            bbox: BoundingBox::new(x - 1.0, y - 2.0, x + 1.0, y + 2.0).unwrap(),
            direction: dir,
            status,
            role: Some(role.parse().unwrap()),
            defending: None,
        }
    }

    /// Builds a completed graph: roles come from the annotations, the
    /// scene type blank is filled with a placeholder.
    fn completed(scene: &SceneAnnotation) -> Eag {
        let g = build_eag(scene, Registration::Auto).unwrap();
        let mut fills = BTreeMap::new();
        for p in &scene.persons {
            fills.insert(
                (EntityRef::person(p.id.clone()), predicates::ROLE.to_string()),
                Value::label(p.role.unwrap().to_string()),
            );
        }
        fills.insert(
            (
                EntityRef::new("scene", EntityType::Scene),
                predicates::TYPE.to_string(),
            ),
            Value::label("corner"),
        );
        let g = g.complete(&fills).unwrap();
        assert!(g.is_complete());
        g
    }

    /// The standard five-person fixture: three players (two red, one
    /// blue), a goalkeeper, a referee, and the ball.
    fn fixture() -> Eag {
        let scene = SceneAnnotation {
            scene_id: "fixture".into(),
            persons: vec![
                person("gk", "green", "goalkeeper", Direction::B, Status::E, 5.0, 30.0),
                person("p1", "red", "player", Direction::N, Status::M, 20.0, 30.0),
                person("p2", "red", "player", Direction::N, Status::M, 40.0, 40.0),
                person("p3", "blue", "player", Direction::F, Status::M, 60.0, 30.0),
                person("ref", "black", "referee", Direction::N, Status::M, 50.0, 10.0),
            ],
            soccer: Some(SoccerAnnotation {
                bbox: BoundingBox::new(58.0, 44.0, 62.0, 48.0).unwrap(),
            }),
            field: FieldAnnotation {
                part: FieldPart::L,
                keypoints: None,
            },
            scene_type: None,
        };
        completed(&scene)
    }

    #[test]
    fn two_matching_persons_give_two_valuations() {
        let g = fixture();
        let q = parse_query("ask ?p { (?p:person, uniform, \"red\") }").unwrap();
        let vals = find_valuations(&q, &g);
        assert_eq!(vals.len(), 2);
        let ids: Vec<&str> = vals
            .iter()
            .map(|v| match v.get("?p").unwrap() {
                Binding::Entity(e) => e.id.as_str(),
                _ => panic!("entity binding"),
            })
            .collect();
        assert_eq!(ids, ["p1", "p2"]);
        for v in &vals {
            verify_valuation(&q, &g, v).unwrap();
        }
    }

    #[test]
    fn node_injectivity_blocks_same_node_reuse() {
        // Two distinct wildcards joined by a distance edge cannot both
        // bind the same person.
        let one = SceneAnnotation {
            scene_id: "one".into(),
            persons: vec![person("a", "red", "player", Direction::N, Status::M, 0.0, 0.0)],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&one);
        let q = parse_query(
            "ask ?x { (?x:person, distance, _:person@1) (?x, uniform, \"red\") }",
        )
        .unwrap();
        assert!(find_valuations(&q, &g).is_empty());

        // With two persons there are matches, and the wildcard never
        // equals ?x.
        let two = SceneAnnotation {
            scene_id: "two".into(),
            persons: vec![
                person("a", "red", "player", Direction::N, Status::M, 0.0, 0.0),
                person("b", "red", "player", Direction::N, Status::M, 9.0, 0.0),
            ],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&two);
        let vals = find_valuations(&q, &g);
        assert_eq!(vals.len(), 2);
        for v in &vals {
            verify_valuation(&q, &g, v).unwrap();
            let x = v.get("?x").unwrap();
            let w = v.get("_:person@1").unwrap();
            assert_ne!(x, w);
        }
    }

    #[test]
    fn brute_force_basics_and_guard() {
        let g = Eag::new("empty", [EntityRef::person("a")], Vec::new()).unwrap();
        let q = parse_query("ask ?p { (?p:person, role, \"player\") }").unwrap();
        assert!(brute_force_valuations(&q, &g).unwrap().is_empty());

        let g = Eag::new(
            "single",
            [EntityRef::person("a")],
            vec![Triple::new(
                EntityRef::person("a"),
                predicates::ROLE,
                Object::Value(Value::label("player")),
            )],
        )
        .unwrap();
        let vals = brute_force_valuations(&q, &g).unwrap();
        assert_eq!(vals.len(), 1);
        verify_valuation(&q, &g, &vals[0]).unwrap();

        let big = fixture();
        assert!(big.triples().len() > BRUTE_FORCE_MAX_GRAPH);
        assert!(matches!(
            brute_force_valuations(&q, &big),
            Err(MatchError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn blank_objects_never_match() {
        // An incomplete graph: the role attribute is still hidden, so
        // role queries find nothing, even with a value variable.
        let scene = SceneAnnotation {
            scene_id: "blankly".into(),
            persons: vec![PersonAnnotation {
                id: "a".into(),
                uniform: "red".into(),
                bbox: BoundingBox::new(0.0, 0.0, 2.0, 4.0).unwrap(),
                direction: Direction::N,
                status: Status::M,
                role: None,
                defending: None,
            }],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = build_eag(&scene, Registration::Auto).unwrap();
        assert!(!g.is_complete());
        let by_const = parse_query("ask ?p { (?p:person, role, \"player\") }").unwrap();
        assert!(find_valuations(&by_const, &g).is_empty());
        let by_var = parse_query("ask ?r* { (?p:person, role, ?r*) }").unwrap();
        assert!(find_valuations(&by_var, &g).is_empty());
        assert!(brute_force_valuations(&by_var, &g).unwrap().is_empty());
    }

    #[test]
    fn q7_counts_three_players() {
        let g = fixture();
        let plan = template(TemplateId::Q7);
        let ans = answer_template(&plan, &g, None).unwrap();
        assert_eq!(ans, Answer::Count(3));
        assert_eq!(ans.to_json(), r#"{"kind":"count","payload":3}"#);
    }

    #[test]
    fn q1_picks_the_analytically_nearest_player() {
        // Ball at (0, 0); players at (3, 4) and (6, 8): distances 5
        // and 10.
        let scene = SceneAnnotation {
            scene_id: "near".into(),
            persons: vec![
                person("far", "red", "player", Direction::N, Status::M, 6.0, 8.0),
                person("near", "red", "player", Direction::N, Status::M, 3.0, 4.0),
            ],
            soccer: Some(SoccerAnnotation {
                bbox: BoundingBox::new(-1.0, -1.0, 1.0, 1.0).unwrap(),
            }),
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&scene);
        let plan = template(TemplateId::Q1);
        let ans = answer_template(&plan, &g, None).unwrap();
        assert_eq!(ans, Answer::Entities(vec!["near".into()]));
    }

    #[test]
    fn q1_breaks_exact_ties_by_entity_id() {
        // Both players exactly 4 pixels from the ball.
        let scene = SceneAnnotation {
            scene_id: "tie".into(),
            persons: vec![
                person("pb", "red", "player", Direction::N, Status::M, 0.0, 2.0),
                person("pa", "red", "player", Direction::N, Status::M, 8.0, 2.0),
            ],
            soccer: Some(SoccerAnnotation {
                bbox: BoundingBox::new(3.0, 1.0, 5.0, 3.0).unwrap(),
            }),
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&scene);
        let d1 = g.distance_between("pa", "soccer").unwrap();
        let d2 = g.distance_between("pb", "soccer").unwrap();
        assert_eq!(d1, d2, "the tie must be exact");
        let ans = answer_template(&template(TemplateId::Q1), &g, None).unwrap();
        assert_eq!(ans, Answer::Entities(vec!["pa".into()]));
    }

    #[test]
    fn q1_with_no_ball_is_no_answer() {
        let scene = SceneAnnotation {
            scene_id: "noball".into(),
            persons: vec![person("a", "red", "player", Direction::N, Status::M, 0.0, 0.0)],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&scene);
        let ans = answer_template(&template(TemplateId::Q1), &g, None).unwrap();
        assert_eq!(ans, Answer::None);
        assert_eq!(ans.to_json(), r#"{"kind":"none"}"#);
        assert_eq!(ans.render(), "none");
    }

    #[test]
    fn q2_q3_and_q6_answer_from_the_fixture() {
        let g = fixture();
        let q2 = answer_template(&template(TemplateId::Q2), &g, None).unwrap();
        assert_eq!(q2, Answer::Values(vec![Value::label("black")]));
        assert_eq!(q2.render(), "black");

        let q3 = answer_template(&template(TemplateId::Q3), &g, None).unwrap();
        assert_eq!(q3, Answer::Bool(true));
        assert_eq!(q3.render(), "yes");

        let q6 = answer_template(&template(TemplateId::Q6), &g, None).unwrap();
        assert_eq!(q6, Answer::Label("L".into()));
    }

    #[test]
    fn q3_is_false_without_referees() {
        let scene = SceneAnnotation {
            scene_id: "noref".into(),
            persons: vec![person("a", "red", "player", Direction::N, Status::M, 0.0, 0.0)],
            soccer: None,
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&scene);
        let ans = answer_template(&template(TemplateId::Q3), &g, None).unwrap();
        assert_eq!(ans, Answer::Bool(false));
        assert_eq!(ans.render(), "no");
    }

    #[test]
    fn q4_assigns_goalkeeper_to_red() {
        // Goalkeeper at x = 5 is far closer to the red pair (20, 40)
        // than to blue (60).
        let g = fixture();
        let ans = answer_template(&template(TemplateId::Q4), &g, None).unwrap();
        assert_eq!(ans, Answer::Label("red".into()));
    }

    #[test]
    fn q5_names_the_defending_team() {
        // Red: both expanded, both backing, ball in blue's half.
        let scene = SceneAnnotation {
            scene_id: "teams".into(),
            persons: vec![
                person("r1", "red", "player", Direction::B, Status::E, 10.0, 10.0),
                person("r2", "red", "player", Direction::B, Status::E, 10.0, 30.0),
                person("b1", "blue", "player", Direction::F, Status::M, 90.0, 10.0),
                person("b2", "blue", "player", Direction::F, Status::M, 90.0, 30.0),
            ],
            soccer: Some(SoccerAnnotation {
                bbox: BoundingBox::new(88.0, 18.0, 92.0, 22.0).unwrap(),
            }),
            field: FieldAnnotation {
                part: FieldPart::M,
                keypoints: None,
            },
            scene_type: None,
        };
        let g = completed(&scene);
        let ans = answer_template(&template(TemplateId::Q5), &g, None).unwrap();
        assert_eq!(ans, Answer::Label("red".into()));
    }

    #[test]
    fn num_count_never_drops_when_a_player_arrives() {
        let g = fixture();
        let plan = template(TemplateId::Q7);
        let before = match answer_template(&plan, &g, None).unwrap() {
            Answer::Count(n) => n,
            other => panic!("unexpected {other:?}"),
        };
        // Add a fresh player entity with a role triple.
        let mut entities: Vec<EntityRef> = g.entities().collect();
        entities.push(EntityRef::person("zz"));
        let mut triples = g.triples().to_vec();
        triples.push(Triple::new(
            EntityRef::person("zz"),
            predicates::ROLE,
            Object::Value(Value::label("player")),
        ));
        let bigger = Eag::new(g.scene_id(), entities, triples).unwrap();
        let after = match answer_template(&plan, &bigger, None).unwrap() {
            Answer::Count(n) => n,
            other => panic!("unexpected {other:?}"),
        };
        assert!(after >= before);
        assert_eq!(after, before + 1);
    }

    /// Rebuilds a graph with every distance weight scaled.
    fn scale_distances(g: &Eag, factor: f64) -> Eag {
        let triples = g
            .triples()
            .iter()
            .map(|t| {
                let object = match &t.object {
                    Object::Entity {
                        target,
                        weight: Some(w),
                    } => Object::weighted(
                        target.clone(),
                        Quantity::new(w.value() * factor, w.unit()).unwrap(),
                    ),
                    other => other.clone(),
                };
                Triple::new(t.subject.clone(), t.predicate.clone(), object)
            })
            .collect();
        Eag::new(g.scene_id(), g.entities(), triples).unwrap()
    }

    #[test]
    fn min_winner_is_invariant_under_distance_scaling() {
        let g = fixture();
        let plan = template(TemplateId::Q1);
        let base = answer_template(&plan, &g, None).unwrap();
        for factor in [0.25, 3.7, 1000.0] {
            let scaled = scale_distances(&g, factor);
            assert_eq!(answer_template(&plan, &scaled, None).unwrap(), base);
        }
    }

    #[test]
    fn find_valuations_is_deterministic() {
        let g = fixture();
        let q = parse_query(
            "ask ?p { (?p:person, uniform, ?u*) (?p, distance, _:person@1) }",
        )
        .unwrap();
        let a = find_valuations(&q, &g);
        let b = find_valuations(&q, &g);
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for v in &a {
            verify_valuation(&q, &g, v).unwrap();
        }
    }

    #[test]
    fn answer_json_round_trips() {
        let answers = [
            Answer::Entities(vec!["a".into(), "b".into()]),
            Answer::Entities(Vec::new()),
            Answer::Values(vec![
                Value::label("red"),
                Value::Number(Quantity::meters(2.5).unwrap()),
            ]),
            Answer::Count(0),
            Answer::Bool(false),
            Answer::Label("L".into()),
            Answer::None,
        ];
        for a in &answers {
            let parsed = Answer::from_json(&a.to_json()).unwrap();
            assert_eq!(&parsed, a);
        }
        assert!(Answer::from_json("{\"kind\":\"nope\"}").is_err());
    }

    #[test]
    fn exists_modifier_matches_spec_example_fixture() {
        // Mirror of the two-red query, existence flavor.
        let g = fixture();
        let q = QueryGraph::new(
            Term::EntityVar {
                name: "p".into(),
                etype: None,
            },
            Some(Modifier::Exists),
            vec![QueryTriple::new(
                Term::entity_var("p", EntityType::Person),
                predicates::UNIFORM,
                Term::label("purple"),
            )],
        )
        .unwrap();
        assert_eq!(answer_query(&q, &g).unwrap(), Answer::Bool(false));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// The optimized search agrees with the brute-force oracle,
        /// and every valuation passes the independent checker.
        #[test]
        fn search_agrees_with_brute_force(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (q, g) = random_match_instance(&mut rng);
            let fast = find_valuations(&q, &g);
            let slow = brute_force_valuations(&q, &g).unwrap();
            prop_assert_eq!(&fast, &slow);
            for v in &fast {
                if let Err(reason) = verify_valuation(&q, &g, v) {
                    prop_assert!(false, "unsound valuation: {}", reason);
                }
            }
        }

        /// Answers are deterministic across repeated evaluation.
        #[test]
        fn answers_are_deterministic(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (q, g) = random_match_instance(&mut rng);
            let a = answer_query(&q, &g).unwrap();
            let b = answer_query(&q, &g).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
