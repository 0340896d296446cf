//! Infers which team is defending and which is attacking.
//!
//! Team status is a team-level hidden attribute: the features compare
//! the two teams (more expanded players, more players backing toward
//! goal, possession of the nearest-to-ball player), so exactly one
//! team can hold each trait.

use eagq::bayes::{
    builtin_role_model, builtin_team_model, complete_roles, extract_team_features,
    infer_team_status, roles_from_eag,
};
use eagq::eag::{build_eag, Registration};
use eagq::synth;

fn main() {
    let scene = synth::fixtures()
        .into_iter()
        .find(|f| f.scene.scene_id == "showcase")
        .expect("bundled scene exists")
        .scene;
    let incomplete = build_eag(&scene, Registration::Auto).expect("scene is well formed");
    let (g, _) = complete_roles(&incomplete, &builtin_role_model()).expect("roles infer");
    let roles = roles_from_eag(&g).expect("completed graph lists every role");

    for uniform in ["red", "blue"] {
        let obs = extract_team_features(&g, uniform, &roles).expect("two-team scene");
        println!("features of the {uniform} team: {obs:?}");
    }
    println!();

    let net = builtin_team_model();
    let inferences = infer_team_status(&g, &roles, &net).expect("status infers");
    println!("team   status     p(defending)");
    for (uniform, inference) in &inferences {
        let p = inference
            .posterior
            .prob("defending")
            .expect("defending is in the class domain");
        println!("{uniform:<6} {:<10} {p:.4}", inference.value);
    }
}
