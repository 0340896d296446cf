//! Answers all seven stock question templates against one scene.
//!
//! Q1 names the player nearest the ball, Q2 the referee uniform
//! colors, Q3 whether a referee is present, Q4 the goalkeeper's team,
//! Q5 the defending team, Q6 the visible field part, Q7 the player
//! count.

use eagq::bayes::{builtin_role_model, complete_roles};
use eagq::eag::{build_eag, Registration};
use eagq::matcher::answer_template;
use eagq::query::{template, TemplateId};
use eagq::synth;

fn main() {
    let scene = synth::fixtures()
        .into_iter()
        .find(|f| f.scene.scene_id == "showcase")
        .expect("bundled scene exists")
        .scene;
    let incomplete = build_eag(&scene, Registration::Auto).expect("scene is well formed");
    let (g, _) = complete_roles(&incomplete, &builtin_role_model()).expect("roles infer");

    let questions = [
        (TemplateId::Q1, "which player is nearest the ball?"),
        (TemplateId::Q2, "what colors do the referees wear?"),
        (TemplateId::Q3, "is there a referee?"),
        (TemplateId::Q4, "which team has the goalkeeper?"),
        (TemplateId::Q5, "which team is defending?"),
        (TemplateId::Q6, "which part of the field is shown?"),
        (TemplateId::Q7, "how many players are there?"),
    ];
    for (id, question) in questions {
        // `None` falls back to the built-in team-status tables for Q5.
        let answer = answer_template(&template(id), &g, None).expect("template answers");
        println!("{id}  {question:<42} -> {}", answer.render());
        println!("    as JSON: {}", answer.to_json());
    }
}
