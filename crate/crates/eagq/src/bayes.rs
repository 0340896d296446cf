//! Bayesian networks over categorical variables: CPT learning with
//! Laplace smoothing, joint probability, posteriors, and the two
//! inference tasks that fill hidden graph attributes (person role,
//! team status).
//!
//! The general posterior works on any DAG; classifiers used here are
//! Naive Bayes stars (the class is the sole parent of every feature),
//! for which a direct product shortcut exists and is cross-checked
//! against the general path in tests.

use crate::eag::{predicates, Eag, EagError, EntityRef, EntityType, Value};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("empty training dataset")]
    InsufficientData,
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("assignment is missing variable \"{0}\"")]
    MissingVariable(String),
    #[error("all class numerators are zero for this observation")]
    DegenerateEvidence,
    #[error("network configuration error: {0}")]
    Configuration(String),
    #[error("scene is missing attribute {attribute} on \"{entity}\"")]
    IncompleteScene { entity: String, attribute: String },
    #[error("expected exactly two player uniform colors, found {found}")]
    TeamPartition { found: usize },
    #[error("graph has no soccer entity")]
    MissingSoccer,
    #[error("operation requires a Naive Bayes star: {0}")]
    UnsupportedStructure(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("report parse error at line {line}: {message}")]
    ReportParse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] EagError),
}

fn config(msg: impl Into<String>) -> BayesError {
    BayesError::Configuration(msg.into())
}

fn validation(msg: impl Into<String>) -> BayesError {
    BayesError::Validation(msg.into())
}

/// A categorical random variable: a name and an ordered value domain.
/// Domain order is semantic: posteriors list entries in it and argmax
/// ties resolve to the earliest value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Variable {
            name: name.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        }
    }

    fn index_of(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }
}

/// A conditional probability table: one distribution over the
/// variable's domain per assignment of its parents (in parent order).
/// Parentless variables have a single row keyed by the empty list.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    rows: BTreeMap<Vec<String>, Vec<f64>>,
}

impl Cpt {
    pub fn new(rows: BTreeMap<Vec<String>, Vec<f64>>) -> Self {
        Cpt { rows }
    }

    pub fn single_row(dist: Vec<f64>) -> Self {
        let mut rows = BTreeMap::new();
        rows.insert(Vec::new(), dist);
        Cpt { rows }
    }

    pub fn row(&self, key: &[String]) -> Option<&[f64]> {
        self.rows.get(key).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[String], &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }
}

/// A partial assignment of variables to domain values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Observation(BTreeMap<String, String>);

impl Observation {
    pub fn new() -> Self {
        Observation::default()
    }

    pub fn with(mut self, variable: impl Into<String>, value: impl Into<String>) -> Self {
        self.0.insert(variable.into(), value.into());
        self
    }

    pub fn set(&mut self, variable: impl Into<String>, value: impl Into<String>) {
        self.0.insert(variable.into(), value.into());
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.0.get(variable).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A posterior distribution over the class domain, entries in
/// class-domain order.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    entries: Vec<(String, f64)>,
}

impl Posterior {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn prob(&self, value: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(v, _)| v == value)
            .map(|(_, p)| *p)
    }

    /// The most probable value; exact ties resolve to the earliest
    /// entry in class-domain order.
    pub fn argmax(&self) -> (&str, f64) {
        let mut best = 0;
        for i in 1..self.entries.len() {
            if self.entries[i].1 > self.entries[best].1 {
                best = i;
            }
        }
        (&self.entries[best].0, self.entries[best].1)
    }
}

/// An inferred value together with its posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub value: String,
    pub posterior: Posterior,
}

/// A Bayesian network: variables, a parent structure, and one CPT per
/// variable. Immutable after construction; all invariants (acyclic
/// structure, complete and normalized CPT rows) are checked up front.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    parents: BTreeMap<String, Vec<String>>,
    cpts: BTreeMap<String, Cpt>,
    class_var: Option<String>,
    alpha: Option<f64>,
}

impl BayesNet {
    pub fn new(
        variables: Vec<Variable>,
        parents: BTreeMap<String, Vec<String>>,
        cpts: BTreeMap<String, Cpt>,
        class_var: Option<String>,
    ) -> Result<Self, BayesError> {
        if variables.is_empty() {
            return Err(config("network needs at least one variable"));
        }
        let mut names = BTreeSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(config("variable name must be nonempty"));
            }
            if !names.insert(v.name.clone()) {
                return Err(config(format!("duplicate variable \"{}\"", v.name)));
            }
            if v.domain.is_empty() {
                return Err(config(format!("variable \"{}\" has an empty domain", v.name)));
            }
            let mut seen = BTreeSet::new();
            for d in &v.domain {
                if d.is_empty() || !seen.insert(d) {
                    return Err(config(format!(
                        "variable \"{}\" has an empty or duplicate domain value",
                        v.name
                    )));
                }
            }
        }
        let var_of = |name: &str| variables.iter().find(|v| v.name == name);
        for (child, ps) in &parents {
            if var_of(child).is_none() {
                return Err(config(format!("parent list for unknown variable \"{child}\"")));
            }
            for p in ps {
                if var_of(p).is_none() {
                    return Err(config(format!("unknown parent \"{p}\" of \"{child}\"")));
                }
                if p == child {
                    return Err(config(format!("variable \"{child}\" is its own parent")));
                }
            }
        }
        if let Some(c) = &class_var {
            if var_of(c).is_none() {
                return Err(config(format!("class variable \"{c}\" is not declared")));
            }
        }

        let net = BayesNet {
            variables,
            parents,
            cpts,
            class_var,
            alpha: None,
        };
        net.check_acyclic()?;
        net.check_cpts()?;
        Ok(net)
    }

    /// Builds a Naive Bayes star: `class` is parentless with the given
    /// prior; each feature's CPT has one row per class value, rows
    /// listed in class-domain order.
    pub fn star(
        class: Variable,
        prior: Vec<f64>,
        features: Vec<(Variable, Vec<Vec<f64>>)>,
    ) -> Result<Self, BayesError> {
        let mut variables = vec![class.clone()];
        let mut parents = BTreeMap::new();
        let mut cpts = BTreeMap::new();
        parents.insert(class.name.clone(), Vec::new());
        cpts.insert(class.name.clone(), Cpt::single_row(prior));
        for (feature, rows) in features {
            if rows.len() != class.domain.len() {
                return Err(config(format!(
                    "feature \"{}\" needs one row per class value",
                    feature.name
                )));
            }
            let mut table = BTreeMap::new();
            for (y, dist) in class.domain.iter().zip(rows) {
                table.insert(vec![y.clone()], dist);
            }
            parents.insert(feature.name.clone(), vec![class.name.clone()]);
            cpts.insert(feature.name.clone(), Cpt::new(table));
            variables.push(feature);
        }
        let name = class.name.clone();
        BayesNet::new(variables, parents, cpts, Some(name))
    }

    fn check_acyclic(&self) -> Result<(), BayesError> {
        // Depth-first walk over the parent relation; a back edge on the
        // current path is a cycle.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> =
            self.variables.iter().map(|v| (v.name.as_str(), Mark::New)).collect();
        fn visit<'a>(
            node: &'a str,
            parents: &'a BTreeMap<String, Vec<String>>,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Result<(), BayesError> {
            match marks[node] {
                Mark::Done => return Ok(()),
                Mark::Active => {
                    return Err(config(format!("parent structure has a cycle through \"{node}\"")))
                }
                Mark::New => {}
            }
            marks.insert(node, Mark::Active);
            if let Some(ps) = parents.get(node) {
                for p in ps {
                    visit(p, parents, marks)?;
                }
            }
            marks.insert(node, Mark::Done);
            Ok(())
        }
        for v in &self.variables {
            visit(&v.name, &self.parents, &mut marks)?;
        }
        Ok(())
    }

    fn check_cpts(&self) -> Result<(), BayesError> {
        for v in &self.variables {
            let cpt = self
                .cpts
                .get(&v.name)
                .ok_or_else(|| config(format!("missing CPT for \"{}\"", v.name)))?;
            let parent_vars: Vec<&Variable> = self
                .parents_of(&v.name)
                .iter()
                .map(|p| self.variable(p).expect("parents validated"))
                .collect();
            let expected_rows: usize = parent_vars.iter().map(|p| p.domain.len()).product();
            let mut count = 0usize;
            for (key, dist) in cpt.rows() {
                if key.len() != parent_vars.len() {
                    return Err(config(format!(
                        "CPT row for \"{}\" keys {} parents, expected {}",
                        v.name,
                        key.len(),
                        parent_vars.len()
                    )));
                }
                for (val, pv) in key.iter().zip(&parent_vars) {
                    if pv.index_of(val).is_none() {
                        return Err(config(format!(
                            "CPT row for \"{}\" keyed by out-of-domain {}=\"{val}\"",
                            v.name, pv.name
                        )));
                    }
                }
                if dist.len() != v.domain.len() {
                    return Err(config(format!(
                        "CPT row for \"{}\" has {} entries, domain has {}",
                        v.name,
                        dist.len(),
                        v.domain.len()
                    )));
                }
                let mut sum = 0.0;
                for p in dist {
                    if !p.is_finite() || *p < 0.0 {
                        return Err(config(format!(
                            "CPT row for \"{}\" has a negative or non-finite probability",
                            v.name
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(config(format!(
                        "CPT row for \"{}\" sums to {sum}, expected 1",
                        v.name
                    )));
                }
                count += 1;
            }
            if count != expected_rows {
                return Err(config(format!(
                    "CPT for \"{}\" has {count} rows, expected {expected_rows}",
                    v.name
                )));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn parents_of(&self, name: &str) -> &[String] {
        self.parents.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cpt(&self, name: &str) -> Option<&Cpt> {
        self.cpts.get(name)
    }

    pub fn class_variable(&self) -> Option<&Variable> {
        self.class_var.as_deref().and_then(|c| self.variable(c))
    }

    /// Smoothing constant recorded by learning, if any.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// True when the class is parentless and the sole parent of every
    /// other variable.
    pub fn is_star(&self) -> bool {
        let Some(class) = self.class_var.as_deref() else {
            return false;
        };
        self.variables.iter().all(|v| {
            if v.name == class {
                self.parents_of(&v.name).is_empty()
            } else {
                self.parents_of(&v.name) == [class.to_string()]
            }
        })
    }

    /// A copy with the class prior replaced by the uniform
    /// distribution. Requires a parentless class.
    pub fn with_uniform_class_prior(&self) -> Result<Self, BayesError> {
        let class = self
            .class_variable()
            .ok_or_else(|| config("no class variable designated"))?
            .clone();
        if !self.parents_of(&class.name).is_empty() {
            return Err(config("class variable has parents; no single prior row"));
        }
        let k = class.domain.len();
        let mut out = self.clone();
        out.cpts
            .insert(class.name, Cpt::single_row(vec![1.0 / k as f64; k]));
        Ok(out)
    }

    fn theta(&self, variable: &str, assignment: &Observation) -> Result<f64, BayesError> {
        let v = self
            .variable(variable)
            .ok_or_else(|| config(format!("unknown variable \"{variable}\"")))?;
        let value = assignment
            .get(variable)
            .ok_or_else(|| BayesError::MissingVariable(variable.to_string()))?;
        let idx = v.index_of(value).ok_or_else(|| {
            validation(format!("out-of-domain value \"{value}\" for variable \"{variable}\""))
        })?;
        let mut key = Vec::new();
        for p in self.parents_of(variable) {
            let pv = assignment
                .get(p)
                .ok_or_else(|| BayesError::MissingVariable(p.clone()))?;
            key.push(pv.to_string());
        }
        let row = self
            .cpt(variable)
            .and_then(|c| c.row(&key))
            .ok_or_else(|| config(format!("missing CPT row for \"{variable}\" given {key:?}")))?;
        Ok(row[idx])
    }

    /// The joint probability of a full assignment: the product over
    /// all variables of theta(value | parent values), accumulated in
    /// log space.
    pub fn joint_probability(&self, assignment: &Observation) -> Result<f64, BayesError> {
        for (name, _) in assignment.iter() {
            if self.variable(name).is_none() {
                return Err(validation(format!("assignment names unknown variable \"{name}\"")));
            }
        }
        let mut log_p = 0.0f64;
        for v in &self.variables {
            log_p += self.theta(&v.name, assignment)?.ln();
        }
        Ok(log_p.exp())
    }

    fn log_numerators(&self, observation: &Observation) -> Result<(Vec<String>, Vec<f64>), BayesError> {
        let class = self
            .class_variable()
            .ok_or_else(|| config("no class variable designated"))?
            .clone();
        if observation.get(&class.name).is_some() {
            return Err(validation(format!(
                "observation must not assign the class variable \"{}\"",
                class.name
            )));
        }
        for v in &self.variables {
            if v.name == class.name {
                continue;
            }
            match observation.get(&v.name) {
                None => return Err(BayesError::MissingVariable(v.name.clone())),
                Some(val) if v.index_of(val).is_none() => {
                    return Err(validation(format!(
                        "out-of-domain value \"{val}\" for variable \"{}\"",
                        v.name
                    )))
                }
                Some(_) => {}
            }
        }
        for (name, _) in observation.iter() {
            if self.variable(name).is_none() {
                return Err(validation(format!("observation names unknown variable \"{name}\"")));
            }
        }
        let mut logs = Vec::with_capacity(class.domain.len());
        for y in &class.domain {
            let mut full = observation.clone();
            full.set(class.name.clone(), y.clone());
            let mut log_p = 0.0f64;
            for v in &self.variables {
                log_p += self.theta(&v.name, &full)?.ln();
            }
            logs.push(log_p);
        }
        Ok((class.domain, logs))
    }

    /// The posterior over the class given an observation of every
    /// other variable: per class value, the joint probability with the
    /// class set to that value, normalized across the class domain.
    /// Works on any DAG structure.
    pub fn posterior(&self, observation: &Observation) -> Result<Posterior, BayesError> {
        let (domain, logs) = self.log_numerators(observation)?;
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Err(BayesError::DegenerateEvidence);
        }
        let exps: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        let entries = domain
            .into_iter()
            .zip(exps)
            .map(|(y, e)| (y, e / total))
            .collect();
        Ok(Posterior { entries })
    }

    /// The Naive Bayes shortcut: prior times the product of feature
    /// conditionals, normalized directly without logs. Only valid on
    /// star structures; agrees with `posterior` to high precision.
    pub fn star_posterior(&self, observation: &Observation) -> Result<Posterior, BayesError> {
        if !self.is_star() {
            return Err(BayesError::UnsupportedStructure(
                "star_posterior called on a non-star network".into(),
            ));
        }
        let class = self.class_variable().expect("star implies class").clone();
        if observation.get(&class.name).is_some() {
            return Err(validation(format!(
                "observation must not assign the class variable \"{}\"",
                class.name
            )));
        }
        let prior = self
            .cpt(&class.name)
            .and_then(|c| c.row(&[]))
            .expect("validated prior row");
        let mut nums = Vec::with_capacity(class.domain.len());
        for (i, y) in class.domain.iter().enumerate() {
            let mut p = prior[i];
            for v in &self.variables {
                if v.name == class.name {
                    continue;
                }
                let value = observation
                    .get(&v.name)
                    .ok_or_else(|| BayesError::MissingVariable(v.name.clone()))?;
                let idx = v.index_of(value).ok_or_else(|| {
                    validation(format!(
                        "out-of-domain value \"{value}\" for variable \"{}\"",
                        v.name
                    ))
                })?;
                let row = self
                    .cpt(&v.name)
                    .and_then(|c| c.row(std::slice::from_ref(y)))
                    .expect("validated feature row");
                p *= row[idx];
            }
            nums.push(p);
        }
        let total: f64 = nums.iter().sum();
        if total == 0.0 {
            return Err(BayesError::DegenerateEvidence);
        }
        let entries = class
            .domain
            .iter()
            .cloned()
            .zip(nums.iter().map(|n| n / total))
            .collect();
        Ok(Posterior { entries })
    }
}

/// Learns a Naive Bayes star from labeled observations with Laplace
/// smoothing:
///
/// ```text
/// theta_y     = (count(y) + alpha) / (N + alpha * |class domain|)
/// theta_{x|y} = (count(x, y) + alpha) / (count(y) + alpha * |feature domain|)
/// ```
///
/// With `alpha = 0` and a class value never observed, the conditional
/// rows for that class are 0/0; they are defined as uniform, which
/// keeps rows normalized and cannot affect posteriors (the class prior
/// is exactly zero). Counting is order-independent, so record
/// permutations produce bit-identical tables.
pub fn learn_naive_bayes(
    dataset: &[(String, Observation)],
    class_var: &Variable,
    features: &[Variable],
    alpha: f64,
) -> Result<BayesNet, BayesError> {
    if dataset.is_empty() {
        return Err(BayesError::InsufficientData);
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(config("alpha must be a finite nonnegative number"));
    }

    let mut class_counts: BTreeMap<&str, u64> = BTreeMap::new();
    // (feature, class value, feature value) -> count
    let mut cond_counts: BTreeMap<(&str, &str, &str), u64> = BTreeMap::new();

    for (y, obs) in dataset {
        if class_var.index_of(y).is_none() {
            return Err(validation(format!(
                "out-of-domain class value \"{y}\" for variable \"{}\"",
                class_var.name
            )));
        }
        if obs.len() != features.len() {
            return Err(validation(format!(
                "observation has {} values, expected the {} features",
                obs.len(),
                features.len()
            )));
        }
        *class_counts.entry(y.as_str()).or_default() += 1;
        for f in features {
            let value = obs
                .get(&f.name)
                .ok_or_else(|| BayesError::MissingVariable(f.name.clone()))?;
            if f.index_of(value).is_none() {
                return Err(validation(format!(
                    "out-of-domain value \"{value}\" for variable \"{}\"",
                    f.name
                )));
            }
            *cond_counts.entry((f.name.as_str(), y.as_str(), value)).or_default() += 1;
        }
    }

    let n = dataset.len() as f64;
    let k = class_var.domain.len() as f64;
    let prior: Vec<f64> = class_var
        .domain
        .iter()
        .map(|y| {
            let c = *class_counts.get(y.as_str()).unwrap_or(&0) as f64;
            (c + alpha) / (n + alpha * k)
        })
        .collect();

    let mut feature_tables = Vec::with_capacity(features.len());
    for f in features {
        let d = f.domain.len() as f64;
        let mut rows = Vec::with_capacity(class_var.domain.len());
        for y in &class_var.domain {
            let ny = *class_counts.get(y.as_str()).unwrap_or(&0) as f64;
            let denom = ny + alpha * d;
            let dist: Vec<f64> = if denom == 0.0 {
                vec![1.0 / d; f.domain.len()]
            } else {
                f.domain
                    .iter()
                    .map(|v| {
                        let c = *cond_counts
                            .get(&(f.name.as_str(), y.as_str(), v.as_str()))
                            .unwrap_or(&0) as f64;
                        (c + alpha) / denom
                    })
                    .collect()
            };
            rows.push(dist);
        }
        feature_tables.push((f.clone(), rows));
    }

    let mut net = BayesNet::star(class_var.clone(), prior, feature_tables)?;
    net.alpha = Some(alpha);
    Ok(net)
}

/// Draws a (class value, feature observation) pair from a star
/// network: the class from its prior, each feature from its
/// conditional row. Used by fixture generation and sampling tests.
pub fn sample_star(net: &BayesNet, rng: &mut impl Rng) -> Result<(String, Observation), BayesError> {
    if !net.is_star() {
        return Err(BayesError::UnsupportedStructure(
            "sampling requires a Naive Bayes star".into(),
        ));
    }
    let class = net.class_variable().expect("star implies class").clone();
    let draw = |domain: &[String], dist: &[f64], rng: &mut dyn rand::RngCore| -> String {
        let u: f64 = rand::Rng::gen(rng);
        let mut acc = 0.0;
        for (v, p) in domain.iter().zip(dist) {
            acc += p;
            if u < acc {
                return v.clone();
            }
        }
        domain.last().expect("nonempty domain").clone()
    };
    let prior = net.cpt(&class.name).and_then(|c| c.row(&[])).expect("prior row");
    let y = draw(&class.domain, prior, rng);
    let mut obs = Observation::new();
    for v in net.variables() {
        if v.name == class.name {
            continue;
        }
        let row = net
            .cpt(&v.name)
            .and_then(|c| c.row(std::slice::from_ref(&y)))
            .expect("feature row");
        obs.set(v.name.clone(), draw(&v.domain, row, rng));
    }
    Ok((y, obs))
}

// ---------------------------------------------------------------------------
// Model file form.

mod doc {
    use serde::{Deserialize, Serialize};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct NetDoc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub class: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub alpha: Option<f64>,
        pub variables: Vec<VariableDoc>,
        pub parents: BTreeMap<String, Vec<String>>,
        pub cpts: BTreeMap<String, Vec<RowDoc>>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct VariableDoc {
        pub name: String,
        pub domain: Vec<String>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RowDoc {
        pub given: Vec<String>,
        pub p: Vec<f64>,
    }
}

impl BayesNet {
    /// Renders the canonical JSON model form (two-space indent,
    /// trailing newline). Parsing the result reproduces the network.
    pub fn to_json(&self) -> String {
        let doc = doc::NetDoc {
            class: self.class_var.clone(),
            alpha: self.alpha,
            variables: self
                .variables
                .iter()
                .map(|v| doc::VariableDoc {
                    name: v.name.clone(),
                    domain: v.domain.clone(),
                })
                .collect(),
            parents: self.parents.clone(),
            cpts: self
                .cpts
                .iter()
                .map(|(name, cpt)| {
                    (
                        name.clone(),
                        cpt.rows()
                            .map(|(k, d)| doc::RowDoc {
                                given: k.to_vec(),
                                p: d.to_vec(),
                            })
                            .collect(),
                    )
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model docs always serialize");
        s.push('\n');
        s
    }

    /// Parses and validates a network from its JSON model form.
    pub fn from_json(text: &str) -> Result<Self, BayesError> {
        let doc: doc::NetDoc = serde_json::from_str(text).map_err(|e| BayesError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let variables = doc
            .variables
            .into_iter()
            .map(|v| Variable::new(v.name, v.domain))
            .collect();
        let cpts = doc
            .cpts
            .into_iter()
            .map(|(name, rows)| {
                let table = rows.into_iter().map(|r| (r.given, r.p)).collect();
                (name, Cpt::new(table))
            })
            .collect();
        let mut net = BayesNet::new(variables, doc.parents, cpts, doc.class)?;
        net.alpha = doc.alpha;
        Ok(net)
    }
}

// ---------------------------------------------------------------------------
// CPT report: the aligned percent table.

/// Renders a star network's tables as an aligned text table: one
/// column per class value (headed `p(class="value")`), a `prior` row,
/// then one row per (feature, value) in network order, entries in
/// percent with two decimals.
///
/// Rendering then parsing is the identity for networks whose
/// probabilities are exact two-decimal percents (each feature column
/// and the prior summing to 100.00).
pub fn export_cpt_report(net: &BayesNet) -> Result<String, BayesError> {
    if !net.is_star() {
        return Err(BayesError::UnsupportedStructure(
            "CPT reports cover Naive Bayes stars only".into(),
        ));
    }
    let class = net.class_variable().expect("star implies class");
    let clean = |s: &str| !s.is_empty() && !s.contains(char::is_whitespace) && !s.contains(['"', '=']);
    if !clean(&class.name) || !class.domain.iter().all(|v| clean(v)) {
        return Err(validation(
            "report labels cannot contain whitespace, quotes, or '='",
        ));
    }

    let headers: Vec<String> = class
        .domain
        .iter()
        .map(|y| format!("p({}=\"{y}\")", class.name))
        .collect();

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let prior = net.cpt(&class.name).and_then(|c| c.row(&[])).expect("prior row");
    rows.push(("prior".into(), prior.to_vec()));
    for v in net.variables() {
        if v.name == class.name {
            continue;
        }
        if v.name == "prior" || !clean(&v.name) || !v.domain.iter().all(|d| clean(d)) {
            return Err(validation(
                "report labels cannot contain whitespace, quotes, or '=' (and \"prior\" is reserved)",
            ));
        }
        let cpt = net.cpt(&v.name).expect("validated CPT");
        for (i, value) in v.domain.iter().enumerate() {
            let cells = class
                .domain
                .iter()
                .map(|y| cpt.row(std::slice::from_ref(y)).expect("feature row")[i])
                .collect();
            rows.push((format!("{}=\"{value}\"", v.name), cells));
        }
    }

    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(&" ".repeat(label_width));
    for h in &headers {
        out.push_str("  ");
        out.push_str(h);
    }
    out.push('\n');
    for (label, cells) in &rows {
        out.push_str(&format!("{label:<label_width$}"));
        for (cell, h) in cells.iter().zip(&headers) {
            out.push_str(&format!("  {:>width$.2}", cell * 100.0, width = h.len()));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a CPT report back into a star network.
///
/// The header names the class variable and its domain; a `prior` row
/// is optional (absent means uniform). Each (feature, class) column
/// must sum to 100 within two-decimal rounding slack: exact sums are
/// kept bit-for-bit, sums within 0.5 are renormalized, anything
/// further off is rejected.
pub fn parse_cpt_report(text: &str) -> Result<BayesNet, BayesError> {
    let err = |line: usize, message: String| BayesError::ReportParse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty report".into()))?;
    let mut class_name: Option<String> = None;
    let mut class_domain = Vec::new();
    for cell in header.split_whitespace() {
        let inner = cell
            .strip_prefix("p(")
            .and_then(|c| c.strip_suffix(')'))
            .ok_or_else(|| err(header_no, format!("bad header cell \"{cell}\"")))?;
        let (name, value) = inner
            .split_once('=')
            .ok_or_else(|| err(header_no, format!("bad header cell \"{cell}\"")))?;
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .ok_or_else(|| err(header_no, format!("unquoted value in \"{cell}\"")))?;
        match &class_name {
            None => class_name = Some(name.to_string()),
            Some(n) if n != name => {
                return Err(err(header_no, format!("mixed class names {n} and {name}")))
            }
            Some(_) => {}
        }
        class_domain.push(value.to_string());
    }
    let class_name = class_name.ok_or_else(|| err(header_no, "no class columns".into()))?;
    let k = class_domain.len();

    let mut prior: Option<Vec<f64>> = None;
    // Feature name -> (domain values, per-value percent cells), in
    // appearance order.
    let mut features: Vec<(String, Vec<String>, Vec<Vec<f64>>)> = Vec::new();
    for (no, line) in lines {
        let mut parts = line.split_whitespace();
        let label = parts.next().expect("nonblank line");
        let cells: Vec<f64> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err(no, format!("bad number \"{t}\"")))
            })
            .collect::<Result<_, _>>()?;
        if cells.len() != k {
            return Err(err(no, format!("row has {} cells, expected {k}", cells.len())));
        }
        if label == "prior" {
            if prior.replace(cells).is_some() {
                return Err(err(no, "duplicate prior row".into()));
            }
            continue;
        }
        let (name, value) = label
            .split_once('=')
            .ok_or_else(|| err(no, format!("bad row label \"{label}\"")))?;
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .ok_or_else(|| err(no, format!("unquoted value in \"{label}\"")))?;
        match features.last_mut() {
            Some((n, values, rows)) if n == name => {
                values.push(value.to_string());
                rows.push(cells);
            }
            _ => {
                if features.iter().any(|(n, ..)| n == name) {
                    return Err(err(no, format!("rows for \"{name}\" are not contiguous")));
                }
                features.push((name.to_string(), vec![value.to_string()], vec![cells]));
            }
        }
    }

    // Percent -> probability, with per-column normalization slack.
    let normalize = |mut col: Vec<f64>| -> Result<Vec<f64>, String> {
        for c in &mut col {
            if !c.is_finite() || *c < 0.0 {
                return Err("negative or non-finite cell".into());
            }
            *c /= 100.0;
        }
        let sum: f64 = col.iter().sum();
        if (sum - 1.0).abs() <= 1e-9 {
            Ok(col)
        } else if (sum - 1.0).abs() <= 0.005 {
            Ok(col.into_iter().map(|c| c / sum).collect())
        } else {
            Err(format!("column sums to {:.4}, expected 100.00", sum * 100.0))
        }
    };

    let prior = match prior {
        Some(p) => normalize(p).map_err(|m| err(0, format!("prior row: {m}")))?,
        None => vec![1.0 / k as f64; k],
    };
    let class = Variable::new(class_name, class_domain.clone());
    let mut feature_tables = Vec::with_capacity(features.len());
    for (name, values, rows) in features {
        // rows is per-value across classes; CPT rows are per-class
        // across values, so normalize and transpose column by column.
        let mut per_class: Vec<Vec<f64>> = vec![Vec::with_capacity(values.len()); k];
        for ci in 0..k {
            let col: Vec<f64> = rows.iter().map(|r| r[ci]).collect();
            let col = normalize(col)
                .map_err(|m| err(0, format!("{name} column for {}: {m}", class_domain[ci])))?;
            per_class[ci] = col;
        }
        feature_tables.push((Variable::new(name, values), per_class));
    }
    BayesNet::star(class, prior, feature_tables)
}

// ---------------------------------------------------------------------------
// Built-in models.

/// Conditional probabilities (percent) of the built-in person-role
/// classifier. Classes: goalkeeper, referee, player.
const ROLE_CPT_TABLE: &str = r#"
               p(role="goalkeeper")  p(role="referee")  p(role="player")
direction="F"                  3.79              18.24             14.71
direction="B"                 82.53               4.40              8.06
direction="N"                 13.68              77.36             77.23
status="E"                    47.59               0.47              4.46
status="M"                    16.21              69.99             78.82
status="S"                    34.02              27.36             14.30
status="N"                     2.18               2.18              2.42
u_color="M"                    4.02              20.89             99.36
u_color="U"                   95.98              79.11              0.64
field="L"                     51.38              16.76             15.01
field="M"                      4.71              70.85             72.86
field="R"                     43.91              12.39             12.13
"#;

/// The class variable of the role task.
pub fn role_class_variable() -> Variable {
    Variable::new(predicates::ROLE, ["goalkeeper", "referee", "player"])
}

/// The feature variables of the role task, in report order.
pub fn role_feature_variables() -> Vec<Variable> {
    vec![
        Variable::new("direction", ["F", "B", "N"]),
        Variable::new("status", ["E", "M", "S", "N"]),
        Variable::new("u_color", ["M", "U"]),
        Variable::new("field", ["L", "M", "R"]),
    ]
}

/// The class variable of the team-status task.
pub fn team_class_variable() -> Variable {
    Variable::new("team_status", ["defending", "attacking"])
}

/// The feature variables of the team-status task.
pub fn team_feature_variables() -> Vec<Variable> {
    vec![
        Variable::new("p_status", ["true", "false"]),
        Variable::new("p_direction", ["true", "false"]),
        Variable::new("t_possession", ["true", "false"]),
    ]
}

/// The built-in person-role classifier: the conditional table above
/// with a uniform class prior.
pub fn builtin_role_model() -> BayesNet {
    parse_cpt_report(ROLE_CPT_TABLE).expect("built-in role table is well-formed")
}

/// The built-in team-status classifier. A defending team usually has
/// more expanded players and more players backing the goal, and rarely
/// the player nearest the ball; the attacking team mirrors it.
pub fn builtin_team_model() -> BayesNet {
    let [p_status, p_direction, t_possession]: [Variable; 3] = team_feature_variables()
        .try_into()
        .expect("three team features");
    BayesNet::star(
        team_class_variable(),
        vec![0.5, 0.5],
        vec![
            (p_status, vec![vec![0.75, 0.25], vec![0.25, 0.75]]),
            (p_direction, vec![vec![0.80, 0.20], vec![0.20, 0.80]]),
            (t_possession, vec![vec![0.20, 0.80], vec![0.80, 0.20]]),
        ],
    )
    .expect("built-in team model is well-formed")
}

// ---------------------------------------------------------------------------
// Feature extraction and inference over graphs.

fn label_of<'g>(g: &'g Eag, subject: &str, predicate: &str) -> Result<&'g str, BayesError> {
    match g.value_of(subject, predicate) {
        Some(Value::Label(s)) => Ok(s),
        Some(Value::Number(_)) => Err(validation(format!(
            "attribute ({subject}, {predicate}) is numeric, expected a label"
        ))),
        None => Err(BayesError::IncompleteScene {
            entity: subject.to_string(),
            attribute: predicate.to_string(),
        }),
    }
}

fn the_field_entity(g: &Eag) -> Result<String, BayesError> {
    let fields = g.entities_of_type(EntityType::Field);
    match fields.as_slice() {
        [one] => Ok(one.id.clone()),
        other => Err(validation(format!(
            "expected exactly one field entity, found {}",
            other.len()
        ))),
    }
}

/// Extracts the role features of one person: its direction and status
/// codes, the field part, and `u_color` ("U" when no other person
/// shares its uniform color, "M" otherwise).
pub fn extract_role_features(g: &Eag, person_id: &str) -> Result<Observation, BayesError> {
    if g.entity_type(person_id) != Some(EntityType::Person) {
        return Err(validation(format!("\"{person_id}\" is not a person entity")));
    }
    let direction = label_of(g, person_id, predicates::DIRECTION)?;
    let status = label_of(g, person_id, predicates::STATUS)?;
    let uniform = label_of(g, person_id, predicates::UNIFORM)?;
    let shared = g.entities_of_type(EntityType::Person).iter().any(|p| {
        p.id != person_id
            && matches!(
                g.value_of(&p.id, predicates::UNIFORM),
                Some(Value::Label(u)) if u == uniform
            )
    });
    let field_id = the_field_entity(g)?;
    let part = label_of(g, &field_id, predicates::PART)?;
    Ok(Observation::new()
        .with("direction", direction)
        .with("status", status)
        .with("u_color", if shared { "M" } else { "U" })
        .with("field", part))
}

/// Infers the role of every person in the graph: argmax posterior over
/// the extracted features, keyed by person id.
pub fn infer_roles(g: &Eag, net: &BayesNet) -> Result<BTreeMap<String, Inference>, BayesError> {
    let class = net
        .class_variable()
        .ok_or_else(|| config("no class variable designated"))?;
    if class.domain != role_class_variable().domain {
        return Err(config(format!(
            "role model class domain is {:?}, expected goalkeeper, referee, player",
            class.domain
        )));
    }
    let persons = g.entities_of_type(EntityType::Person);
    if persons.is_empty() {
        return Err(validation("graph has no person entities"));
    }
    let mut out = BTreeMap::new();
    for p in persons {
        let obs = extract_role_features(g, &p.id)?;
        let posterior = net.posterior(&obs)?;
        let (value, _) = posterior.argmax();
        let value = value.to_string();
        out.insert(p.id, Inference { value, posterior });
    }
    Ok(out)
}

/// Fills every person's role blank with its inferred value, returning
/// the completed graph alongside the per-person inferences.
pub fn complete_roles(
    g: &Eag,
    net: &BayesNet,
) -> Result<(Eag, BTreeMap<String, Inference>), BayesError> {
    let inferred = infer_roles(g, net)?;
    let fills = inferred
        .iter()
        .map(|(id, inf)| {
            (
                (EntityRef::person(id.clone()), predicates::ROLE.to_string()),
                Value::label(&inf.value),
            )
        })
        .collect();
    let completed = g.complete(&fills)?;
    Ok((completed, inferred))
}

/// Reads filled role attributes off a graph, keyed by person id.
pub fn roles_from_eag(g: &Eag) -> Result<BTreeMap<String, String>, BayesError> {
    let mut out = BTreeMap::new();
    for p in g.entities_of_type(EntityType::Person) {
        let role = label_of(g, &p.id, predicates::ROLE)?;
        out.insert(p.id, role.to_string());
    }
    Ok(out)
}

/// One team: a player uniform color and the players wearing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Team {
    pub uniform: String,
    pub players: Vec<String>,
}

/// Splits the graph's players (per the roles map) into exactly two
/// teams by uniform color, ordered by color. Every person entity must
/// appear in the roles map.
pub fn team_partition(g: &Eag, roles: &BTreeMap<String, String>) -> Result<[Team; 2], BayesError> {
    let mut by_color: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in g.entities_of_type(EntityType::Person) {
        let role = roles
            .get(&p.id)
            .ok_or_else(|| validation(format!("roles map has no entry for \"{}\"", p.id)))?;
        if role != "player" {
            continue;
        }
        let uniform = label_of(g, &p.id, predicates::UNIFORM)?;
        by_color.entry(uniform.to_string()).or_default().push(p.id);
    }
    if by_color.len() != 2 {
        return Err(BayesError::TeamPartition {
            found: by_color.len(),
        });
    }
    let mut teams = by_color.into_iter().map(|(uniform, mut players)| {
        players.sort();
        Team { uniform, players }
    });
    Ok([teams.next().unwrap(), teams.next().unwrap()])
}

/// The player nearest the ball, by distance-edge weight; exact ties
/// resolve to the smaller player id.
fn nearest_player_to_ball(g: &Eag, teams: &[Team; 2]) -> Result<String, BayesError> {
    if g.entity_type("soccer") != Some(EntityType::Soccer) {
        return Err(BayesError::MissingSoccer);
    }
    let mut best: Option<(f64, &str)> = None;
    for team in teams {
        for p in &team.players {
            let d = g.distance_between(p, "soccer").ok_or_else(|| {
                validation(format!("missing distance edge from \"{p}\" to the ball"))
            })?;
            let candidate = (d.value(), p.as_str());
            let better = match &best {
                None => true,
                Some((bd, bp)) => candidate.0 < *bd || (candidate.0 == *bd && candidate.1 < *bp),
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    Ok(best.expect("both teams nonempty by construction").1.to_string())
}

/// Extracts the team-status features of one team, compared against the
/// other: `p_status` iff it fields strictly more status-E players,
/// `p_direction` iff strictly more direction-B players, and
/// `t_possession` iff the player nearest the ball is one of its own.
pub fn extract_team_features(
    g: &Eag,
    team_uniform: &str,
    roles: &BTreeMap<String, String>,
) -> Result<Observation, BayesError> {
    let teams = team_partition(g, roles)?;
    let (this, other) = if teams[0].uniform == team_uniform {
        (&teams[0], &teams[1])
    } else if teams[1].uniform == team_uniform {
        (&teams[1], &teams[0])
    } else {
        return Err(validation(format!(
            "\"{team_uniform}\" is not one of the player uniform colors ({}, {})",
            teams[0].uniform, teams[1].uniform
        )));
    };

    let count_label = |team: &Team, predicate: &str, label: &str| -> Result<usize, BayesError> {
        let mut n = 0;
        for p in &team.players {
            if label_of(g, p, predicate)? == label {
                n += 1;
            }
        }
        Ok(n)
    };
    let p_status = count_label(this, predicates::STATUS, "E")?
        > count_label(other, predicates::STATUS, "E")?;
    let p_direction = count_label(this, predicates::DIRECTION, "B")?
        > count_label(other, predicates::DIRECTION, "B")?;
    let nearest = nearest_player_to_ball(g, &teams)?;
    let t_possession = this.players.iter().any(|p| *p == nearest);

    let b = |v: bool| if v { "true" } else { "false" };
    Ok(Observation::new()
        .with("p_status", b(p_status))
        .with("p_direction", b(p_direction))
        .with("t_possession", b(t_possession)))
}

/// Infers defending/attacking for both teams: per-team argmax
/// posterior over the extracted features, keyed by uniform color.
pub fn infer_team_status(
    g: &Eag,
    roles: &BTreeMap<String, String>,
    net: &BayesNet,
) -> Result<BTreeMap<String, Inference>, BayesError> {
    let class = net
        .class_variable()
        .ok_or_else(|| config("no class variable designated"))?;
    if class.domain != team_class_variable().domain {
        return Err(config(format!(
            "team model class domain is {:?}, expected defending, attacking",
            class.domain
        )));
    }
    let teams = team_partition(g, roles)?;
    let mut out = BTreeMap::new();
    for team in &teams {
        let obs = extract_team_features(g, &team.uniform, roles)?;
        let posterior = net.posterior(&obs)?;
        let (value, _) = posterior.argmax();
        let value = value.to_string();
        out.insert(team.uniform.clone(), Inference { value, posterior });
    }
    Ok(out)
}

/// Assigns a goalkeeper to the team whose players' centroid is
/// nearest, computed purely from the graph's distance edges via the
/// parallel-axis identity:
///
/// ```text
/// ||gk - centroid(T)||^2 = mean_i d(gk, p_i)^2
///                        - (1 / (2 n^2)) * sum_{i,j} d(p_i, p_j)^2
/// ```
///
/// Ties resolve to the lexicographically smaller uniform color.
pub fn goalkeeper_team(
    g: &Eag,
    goalkeeper_id: &str,
    roles: &BTreeMap<String, String>,
) -> Result<String, BayesError> {
    if g.entity_type(goalkeeper_id) != Some(EntityType::Person) {
        return Err(validation(format!("\"{goalkeeper_id}\" is not a person entity")));
    }
    let teams = team_partition(g, roles)?;
    let mut best: Option<(f64, &str)> = None;
    for team in &teams {
        let n = team.players.len() as f64;
        let mut to_gk = 0.0;
        for p in &team.players {
            let d = g.distance_between(goalkeeper_id, p).ok_or_else(|| {
                validation(format!(
                    "missing distance edge from \"{goalkeeper_id}\" to \"{p}\""
                ))
            })?;
            to_gk += d.value() * d.value();
        }
        let mut spread = 0.0;
        for a in &team.players {
            for b in &team.players {
                if a == b {
                    continue;
                }
                let d = g.distance_between(a, b).ok_or_else(|| {
                    validation(format!("missing distance edge from \"{a}\" to \"{b}\""))
                })?;
                spread += d.value() * d.value();
            }
        }
        let dist2 = to_gk / n - spread / (2.0 * n * n);
        // Strict comparison: on an exact tie the first team (smaller
        // color) stands.
        if best.is_none_or(|(b, _)| dist2 < b) {
            best = Some((dist2, &team.uniform));
        }
    }
    Ok(best.expect("two teams").1.to_string())
}
