//! Fills the hidden role attribute of every person in a graph.
//!
//! Roles are never annotated directly; a naive-Bayes classifier infers
//! them from facing direction, body extent, uniform-color sharing, and
//! field part. The built-in tables ship with the crate.

use eagq::bayes::{builtin_role_model, complete_roles};
use eagq::eag::{build_eag, Registration};
use eagq::synth;

fn main() {
    let scene = synth::fixtures()
        .into_iter()
        .find(|f| f.scene.scene_id == "showcase")
        .expect("bundled scene exists")
        .scene;
    let incomplete = build_eag(&scene, Registration::Auto).expect("scene is well formed");

    let net = builtin_role_model();
    let (complete, inferences) = complete_roles(&incomplete, &net).expect("roles infer");

    println!("person  inferred role  posterior");
    for (id, inference) in &inferences {
        let (_, confidence) = inference.posterior.argmax();
        println!("{id:<7} {:<14} {confidence:.4}", inference.value);
    }
    println!();

    // The completed graph now answers role lookups directly.
    let goalkeepers = complete.triples_matching(
        None,
        Some(eagq::eag::predicates::ROLE),
        Some(&eagq::eag::ObjectNode::Value(eagq::eag::Value::label(
            "goalkeeper",
        ))),
    );
    println!("goalkeepers in the completed graph:");
    for t in goalkeepers {
        println!("  {}", t.subject.id);
    }
}
