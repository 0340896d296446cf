//! Learns role tables from a labeled corpus and compares them with
//! the tables that generated it.
//!
//! The corpus is sampled from the built-in role model and realized as
//! scene annotations, so feature extraction reproduces the drawn
//! observations exactly and the learned tables converge to the
//! originals as the corpus grows.

use eagq::bayes::{
    builtin_role_model, export_cpt_report, extract_role_features, learn_naive_bayes,
    role_class_variable, role_feature_variables, Observation,
};
use eagq::eag::{build_eag, Registration};
use eagq::synth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let scenes = synth::sample_role_scenes(4000, &mut rng);

    // One training row per labeled person: gold class plus extracted
    // features.
    let mut dataset: Vec<(String, Observation)> = Vec::new();
    for scene in &scenes {
        let g = build_eag(scene, Registration::Auto).expect("scene is well formed");
        for person in &scene.persons {
            let Some(role) = person.role else { continue };
            let obs = extract_role_features(&g, &person.id).expect("features extract");
            dataset.push((role.to_string(), obs));
        }
    }
    println!("training rows: {}", dataset.len());

    let learned = learn_naive_bayes(
        &dataset,
        &role_class_variable(),
        &role_feature_variables(),
        1.0,
    )
    .expect("learning succeeds");

    println!("\nlearned tables (percent):");
    println!("{}", export_cpt_report(&learned).expect("report renders"));

    // Largest per-cell gap against the generating tables.
    let truth = builtin_role_model();
    let mut worst: f64 = 0.0;
    for v in truth.variables() {
        let want = truth.cpt(&v.name).expect("truth table");
        let got = learned.cpt(&v.name).expect("learned table");
        for (key, row) in want.rows() {
            for (a, b) in row.iter().zip(got.row(key).expect("same rows")) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    println!("largest cell gap vs the generating tables: {worst:.4}");
}
