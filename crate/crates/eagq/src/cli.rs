//! Command-line front end: builds graphs from scene annotations,
//! learns and applies the classifiers, answers queries, evaluates
//! predictions, and generates synthetic test corpora.
//!
//! Results go to stdout (or `--out`); diagnostics go to stderr as one
//! JSON object per error. Each error family maps to a fixed exit
//! code: 2 usage, 3 I/O, 4 scene, 5 graph, 6 inference, 7 query,
//! 8 matching, 9 evaluation. Identical inputs and seeds produce
//! byte-identical outputs.

use crate::bayes::{
    self, builtin_role_model, export_cpt_report, learn_naive_bayes, role_class_variable,
    role_feature_variables, team_class_variable, team_feature_variables, BayesError, BayesNet,
    Observation,
};
use crate::eag::{build_eag, predicates, Eag, EagError, ObjectNode, Registration};
use crate::evalkit::{
    answer_accuracy, inference_report, join_labels, join_records, parse_jsonl, render_jsonl,
    EvalError, GoldRecord, LabelRecord, PredictionRecord,
};
use crate::matcher::{answer_query, answer_template, MatchError};
use crate::query::{parse_query, template, QueryError, TemplateId};
use crate::scene::{SceneAnnotation, SceneError};
use crate::synth;
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "eagq",
    version,
    about = "Answers structured queries over annotated soccer scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Builds an entity-attribute graph from a scene annotation.
    BuildEag {
        /// Scene annotation JSON file.
        #[arg(long)]
        scene: PathBuf,
        /// Coordinate handling: auto registers onto the standard
        /// pitch when keypoints allow, image keeps pixels.
        #[arg(long, value_enum, default_value_t = RegistrationArg::Auto)]
        registration: RegistrationArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learns a classifier from labeled scenes.
    Learn {
        /// Labeled scene JSON file, or a directory of them.
        #[arg(long)]
        scene: PathBuf,
        /// What to learn: person roles or team status.
        #[arg(long, value_enum)]
        target: TargetArg,
        /// Additive smoothing strength.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Class prior: learned from data or forced uniform.
        #[arg(long, value_enum, default_value_t = PriorArg::Learned)]
        prior: PriorArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fills hidden attributes of a graph using a model, printing one
    /// posterior line per inferred entity.
    Infer {
        /// Input graph JSON file.
        #[arg(long)]
        eag: PathBuf,
        /// Model JSON file; the built-in role tables when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Where to write the completed graph.
        #[arg(long)]
        out: PathBuf,
    },
    /// Answers a query template or query file against a graph.
    Query {
        /// Completed graph JSON file.
        #[arg(long)]
        eag: PathBuf,
        /// Built-in template id (Q1..Q7).
        #[arg(long, conflicts_with = "query")]
        template: Option<String>,
        /// Query file in the textual query language.
        #[arg(long)]
        query: Option<PathBuf>,
        /// Team-status model for Q5; the built-in model when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores predictions against gold references.
    Eval {
        /// Predictions, one JSON record per line.
        #[arg(long)]
        pred: PathBuf,
        /// Gold references, one JSON record per line.
        #[arg(long)]
        gold: PathBuf,
        /// Record shape: query answers or attribute labels.
        #[arg(long, value_enum, default_value_t = EvalKind::Answers)]
        kind: EvalKind,
        /// Row-label prefix for label reports.
        #[arg(long, default_value = "value")]
        attribute: String,
        /// Output form: aligned table or JSON.
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints a model's conditional probability tables.
    ReportCpt {
        /// Model JSON file; the built-in role tables when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output form: percent table or JSON.
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes synthetic scenes and gold files for testing.
    GenFixtures {
        /// Directory to populate.
        #[arg(long)]
        out: PathBuf,
        /// Corpus: the bundled showcase scenes, or sampled training
        /// scenes for one of the learning targets.
        #[arg(long, value_enum, default_value_t = FixtureKind::Showcase)]
        kind: FixtureKind,
        /// Scene count for sampled corpora.
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegistrationArg {
    Auto,
    Image,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Role,
    Team,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Learned,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    Answers,
    Labels,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Showcase,
    RoleTrain,
    TeamTrain,
}

/// One failure, tagged with the family that sets the exit code.
#[derive(Debug)]
enum Failure {
    Io { path: PathBuf, message: String },
    Scene(SceneError),
    Eag(EagError),
    Bayes(BayesError),
    Query(QueryError),
    Match(MatchError),
    Eval(EvalError),
}

impl Failure {
    fn family(&self) -> &'static str {
        match self {
            Failure::Io { .. } => "io",
            Failure::Scene(_) => "scene",
            Failure::Eag(_) => "eag",
            Failure::Bayes(_) => "inference",
            Failure::Query(_) => "query",
            Failure::Match(_) => "match",
            Failure::Eval(_) => "eval",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            Failure::Io { .. } => 3,
            Failure::Scene(_) => 4,
            Failure::Eag(_) => 5,
            Failure::Bayes(_) => 6,
            Failure::Query(_) => 7,
            Failure::Match(_) => 8,
            Failure::Eval(_) => 9,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io { path, message } => format!("{}: {message}", path.display()),
            Failure::Scene(e) => e.to_string(),
            Failure::Eag(e) => e.to_string(),
            Failure::Bayes(e) => e.to_string(),
            Failure::Query(e) => e.to_string(),
            Failure::Match(e) => e.to_string(),
            Failure::Eval(e) => e.to_string(),
        }
    }
}

macro_rules! failure_from {
    ($variant:ident, $error:ty) => {
        impl From<$error> for Failure {
            fn from(e: $error) -> Self {
                Failure::$variant(e)
            }
        }
    };
}
failure_from!(Scene, SceneError);
failure_from!(Eag, EagError);
failure_from!(Bayes, BayesError);
failure_from!(Query, QueryError);
failure_from!(Match, MatchError);
failure_from!(Eval, EvalError);

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(io_failure(path))
}

/// Writes to `--out` when given, otherwise prints to stdout. `text`
/// carries its own trailing newline.
fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(io_failure(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(io_failure(path))
}

/// Loads one scene file, or every `.json` file of a directory in
/// name order.
fn load_scenes(path: &Path) -> Result<Vec<SceneAnnotation>, Failure> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path).map_err(io_failure(path))? {
            let p = entry.map_err(io_failure(path))?.path();
            if p.extension().is_some_and(|e| e == "json") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut scenes = Vec::with_capacity(files.len());
    for f in &files {
        scenes.push(SceneAnnotation::from_json(&read(f)?)?);
    }
    Ok(scenes)
}

fn load_model(path: Option<&Path>) -> Result<BayesNet, Failure> {
    match path {
        Some(p) => Ok(BayesNet::from_json(&read(p)?)?),
        None => Ok(builtin_role_model()),
    }
}

/// Gold roles read off a scene's labeled persons.
fn gold_roles(scene: &SceneAnnotation) -> BTreeMap<String, String> {
    scene
        .persons
        .iter()
        .filter_map(|p| p.role.map(|r| (p.id.clone(), r.to_string())))
        .collect()
}

fn learn(
    scenes: &[SceneAnnotation],
    target: TargetArg,
    alpha: f64,
    prior: PriorArg,
) -> Result<BayesNet, Failure> {
    let mut dataset: Vec<(String, Observation)> = Vec::new();
    match target {
        TargetArg::Role => {
            for scene in scenes {
                let g = build_eag(scene, Registration::Auto)?;
                for p in &scene.persons {
                    let Some(role) = p.role else { continue };
                    let obs = bayes::extract_role_features(&g, &p.id)?;
                    dataset.push((role.to_string(), obs));
                }
            }
        }
        TargetArg::Team => {
            for scene in scenes {
                let g = build_eag(scene, Registration::Auto)?;
                let roles = gold_roles(scene);
                // Every uniform color worn by a labeled player, with
                // that team's gold status.
                let mut team_class: BTreeMap<&str, bool> = BTreeMap::new();
                for p in &scene.persons {
                    if roles.get(&p.id).map(String::as_str) == Some("player") {
                        if let Some(defending) = p.defending {
                            team_class.insert(&p.uniform, defending);
                        }
                    }
                }
                for (uniform, defending) in team_class {
                    let obs = bayes::extract_team_features(&g, uniform, &roles)?;
                    let class = if defending { "defending" } else { "attacking" };
                    dataset.push((class.to_string(), obs));
                }
            }
        }
    }
    let (class_var, features) = match target {
        TargetArg::Role => (role_class_variable(), role_feature_variables()),
        TargetArg::Team => (team_class_variable(), team_feature_variables()),
    };
    let net = learn_naive_bayes(&dataset, &class_var, &features, alpha)?;
    Ok(match prior {
        PriorArg::Learned => net,
        PriorArg::Uniform => net.with_uniform_class_prior()?,
    })
}

/// One JSON line per inferred entity, in id order.
fn posterior_lines(inferences: &BTreeMap<String, bayes::Inference>) -> String {
    let mut out = String::new();
    for (id, inf) in inferences {
        let posterior: BTreeMap<&str, f64> = inf
            .posterior
            .entries()
            .iter()
            .map(|(v, p)| (v.as_str(), *p))
            .collect();
        let line = serde_json::json!({
            "id": id,
            "value": inf.value,
            "posterior": posterior,
        });
        let _ = writeln!(out, "{line}");
    }
    out
}

fn infer(eag: &Path, model: Option<&Path>, out: &Path) -> Result<String, Failure> {
    let g = Eag::from_json(&read(eag)?)?;
    let net = load_model(model)?;
    let class = net
        .class_variable()
        .ok_or_else(|| BayesError::Configuration("model has no class variable".into()))
        .map_err(Failure::from)?
        .clone();
    match class.name.as_str() {
        "role" => {
            let blanks = g
                .triples_matching(None, Some(predicates::ROLE), Some(&ObjectNode::Blank))
                .len();
            if blanks == 0 {
                eprintln!("warning: no hidden role attributes; graph written unchanged");
                write_file(out, &g.to_json())?;
                return Ok(String::new());
            }
            let (completed, inferences) = bayes::complete_roles(&g, &net)?;
            write_file(out, &completed.to_json())?;
            Ok(posterior_lines(&inferences))
        }
        "team_status" => {
            // Team status is per team, not a graph attribute: the
            // graph passes through and the posteriors are the output.
            let roles = bayes::roles_from_eag(&g)?;
            let inferences = bayes::infer_team_status(&g, &roles, &net)?;
            write_file(out, &g.to_json())?;
            Ok(posterior_lines(&inferences))
        }
        other => Err(Failure::Bayes(BayesError::Configuration(format!(
            "cannot infer with a model classifying \"{other}\""
        )))),
    }
}

fn answer(
    eag: &Path,
    template_id: Option<&str>,
    query_file: Option<&Path>,
    model: Option<&Path>,
) -> Result<String, Failure> {
    let g = Eag::from_json(&read(eag)?)?;
    let answer = match (template_id, query_file) {
        (Some(id), None) => {
            let id: TemplateId = id.parse()?;
            let team_model = match model {
                Some(p) => Some(BayesNet::from_json(&read(p)?)?),
                None => None,
            };
            if model.is_some() && id != TemplateId::Q5 {
                eprintln!("warning: --model only affects Q5; ignored");
            }
            answer_template(&template(id), &g, team_model.as_ref())?
        }
        (None, Some(path)) => {
            if model.is_some() {
                eprintln!("warning: --model only affects Q5; ignored");
            }
            let q = parse_query(&read(path)?)?;
            answer_query(&q, &g)?
        }
        _ => {
            return Err(Failure::Query(QueryError::Validation(
                "exactly one of --template and --query is required".into(),
            )))
        }
    };
    Ok(format!("{}\n", answer.to_json()))
}

fn eval(
    pred: &Path,
    gold: &Path,
    kind: EvalKind,
    attribute: &str,
    format: FormatArg,
) -> Result<String, Failure> {
    match kind {
        EvalKind::Answers => {
            let predictions: Vec<PredictionRecord> = parse_jsonl(&read(pred)?)?;
            let references: Vec<GoldRecord> = parse_jsonl(&read(gold)?)?;
            let records = join_records(&predictions, &references)?;
            let report = answer_accuracy(&records)?;
            Ok(match format {
                FormatArg::Table => report.render_table(),
                FormatArg::Machine => report.to_json(),
            })
        }
        EvalKind::Labels => {
            let predictions: Vec<LabelRecord> = parse_jsonl(&read(pred)?)?;
            let references: Vec<LabelRecord> = parse_jsonl(&read(gold)?)?;
            let (gold_labels, pred_labels) = join_labels(&references, &predictions)?;
            let report = inference_report(&gold_labels, &pred_labels)?;
            Ok(match format {
                FormatArg::Table => report.render_table(attribute),
                FormatArg::Machine => report.to_json(),
            })
        }
    }
}

/// Gold label files for a scene batch: roles keyed `scene/person`,
/// team statuses keyed `scene/color`.
fn gold_label_records(scenes: &[SceneAnnotation]) -> (Vec<LabelRecord>, Vec<LabelRecord>) {
    let mut roles = Vec::new();
    let mut teams = Vec::new();
    for scene in scenes {
        let mut team_class: BTreeMap<String, bool> = BTreeMap::new();
        for p in &scene.persons {
            if let Some(role) = p.role {
                roles.push(LabelRecord {
                    id: format!("{}/{}", scene.scene_id, p.id),
                    label: role.to_string(),
                });
                if role == crate::scene::Role::Player {
                    if let Some(defending) = p.defending {
                        team_class.insert(p.uniform.clone(), defending);
                    }
                }
            }
        }
        for (uniform, defending) in team_class {
            teams.push(LabelRecord {
                id: format!("{}/{}", scene.scene_id, uniform),
                label: if defending { "defending" } else { "attacking" }.into(),
            });
        }
    }
    (roles, teams)
}

fn gen_fixtures(
    out: &Path,
    kind: FixtureKind,
    count: usize,
    seed: u64,
) -> Result<String, Failure> {
    let scenes_dir = out.join("scenes");
    std::fs::create_dir_all(&scenes_dir).map_err(io_failure(&scenes_dir))?;
    let mut written: Vec<PathBuf> = Vec::new();

    let scenes: Vec<SceneAnnotation> = match kind {
        FixtureKind::Showcase => {
            let fixtures = synth::fixtures();
            let mut answers = Vec::new();
            for f in &fixtures {
                for (id, references) in &f.references {
                    answers.push(GoldRecord {
                        scene_id: f.scene.scene_id.clone(),
                        query_id: id.to_string(),
                        references: references.clone(),
                    });
                }
            }
            let answers_path = out.join("answers.jsonl");
            write_file(&answers_path, &render_jsonl(&answers))?;
            written.push(answers_path);
            fixtures.into_iter().map(|f| f.scene).collect()
        }
        FixtureKind::RoleTrain => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            synth::sample_role_scenes(count, &mut rng)
        }
        FixtureKind::TeamTrain => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            synth::sample_team_scenes(count, &mut rng)
        }
    };

    for scene in &scenes {
        let path = scenes_dir.join(format!("{}.json", scene.scene_id));
        write_file(&path, &scene.to_json())?;
        written.push(path);
    }
    let (roles, teams) = gold_label_records(&scenes);
    if !roles.is_empty() {
        let path = out.join("roles.jsonl");
        write_file(&path, &render_jsonl(&roles))?;
        written.push(path);
    }
    if !teams.is_empty() {
        let path = out.join("teams.jsonl");
        write_file(&path, &render_jsonl(&teams))?;
        written.push(path);
    }

    written.sort();
    let mut summary = String::new();
    for p in &written {
        let _ = writeln!(summary, "{}", p.display());
    }
    Ok(summary)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BuildEag {
            scene,
            registration,
            out,
        } => {
            let annotation = SceneAnnotation::from_json(&read(&scene)?)?;
            let policy = match registration {
                RegistrationArg::Auto => Registration::Auto,
                RegistrationArg::Image => Registration::ImageFrame,
            };
            let g = build_eag(&annotation, policy)?;
            emit(out.as_deref(), &g.to_json())
        }
        Command::Learn {
            scene,
            target,
            alpha,
            prior,
            out,
        } => {
            let scenes = load_scenes(&scene)?;
            let net = learn(&scenes, target, alpha, prior)?;
            emit(out.as_deref(), &net.to_json())
        }
        Command::Infer { eag, model, out } => {
            let lines = infer(&eag, model.as_deref(), &out)?;
            print!("{lines}");
            Ok(())
        }
        Command::Query {
            eag,
            template,
            query,
            model,
            out,
        } => {
            let text = answer(&eag, template.as_deref(), query.as_deref(), model.as_deref())?;
            emit(out.as_deref(), &text)
        }
        Command::Eval {
            pred,
            gold,
            kind,
            attribute,
            format,
            out,
        } => {
            let text = eval(&pred, &gold, kind, &attribute, format)?;
            emit(out.as_deref(), &text)
        }
        Command::ReportCpt { model, format, out } => {
            let net = load_model(model.as_deref())?;
            let text = match format {
                FormatArg::Table => export_cpt_report(&net)?,
                FormatArg::Machine => net.to_json(),
            };
            emit(out.as_deref(), &text)
        }
        Command::GenFixtures {
            out,
            kind,
            count,
            seed,
        } => {
            let summary = gen_fixtures(&out, kind, count, seed)?;
            print!("{summary}");
            Ok(())
        }
    }
}

/// Parses and runs a full command line, returning the process exit
/// code. Usage errors print clap's diagnostics and return 2; runtime
/// failures print one JSON object to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version land on stdout with success; real
            // usage errors land on stderr with code 2.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(failure) => {
            let diagnostic = serde_json::json!({
                "error": {
                    "family": failure.family(),
                    "message": failure.message(),
                }
            });
            eprintln!("{diagnostic}");
            failure.exit_code()
        }
    }
}
