//! Query answering over annotated soccer scenes.
//!
//! The pipeline turns a scene annotation (persons, ball, field part,
//! optional registration keypoints) into an entity-attribute graph,
//! fills hidden attributes (person role, team status) with naive-Bayes
//! classifiers, and answers structured queries by enumerating
//! subgraph-isomorphic valuations of a query graph.
//!
//! Modules, in dependency order:
//!
//! * [`geometry`]: points, bounding boxes, four-point homographies.
//! * [`scene`]: the annotation schema, its JSON form, validation.
//! * [`eag`]: the graph representation and its construction from scenes.
//! * [`bayes`]: naive-Bayes networks, learning, role and team inference.
//! * [`query`]: the query DSL, its parser and printer, stock templates.
//! * [`matcher`]: valuation search and typed answers.
//! * [`evalkit`]: F-measure, inference reports, answer accuracy.
//! * [`synth`]: seeded fixture generation for tests and demos.
//! * [`cli`]: the command-line front end.

pub mod bayes;
pub mod cli;
pub mod eag;
pub mod evalkit;
pub mod geometry;
pub mod matcher;
pub mod query;
pub mod scene;
pub mod synth;
