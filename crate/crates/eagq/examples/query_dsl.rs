//! Writes a query in the textual language, inspects its valuations,
//! and computes the answer.
//!
//! A query is a connected set of triple patterns plus a focus. The
//! matcher enumerates all structure-preserving embeddings into the
//! graph; the focus (optionally under min()/num() or an exists/label
//! modifier) turns them into one typed answer.

use eagq::bayes::{builtin_role_model, complete_roles};
use eagq::eag::{build_eag, Registration};
use eagq::matcher::{answer_query, find_valuations, Binding};
use eagq::query::{parse_query, print_query};
use eagq::synth;

fn main() {
    let scene = synth::fixtures()
        .into_iter()
        .find(|f| f.scene.scene_id == "showcase")
        .expect("bundled scene exists")
        .scene;
    let incomplete = build_eag(&scene, Registration::Auto).expect("scene is well formed");
    let (g, _) = complete_roles(&incomplete, &builtin_role_model()).expect("roles infer");

    // Players of the red team: two patterns sharing the variable ?p.
    let text = r#"
        # who plays for the red team?
        ask ?p {
          (?p:person, role, "player")
          (?p:person, uniform, "red")
        }
    "#;
    let q = parse_query(text).expect("query parses");
    println!("canonical form:\n{}", print_query(&q));

    let valuations = find_valuations(&q, &g);
    println!("{} valuations:", valuations.len());
    for v in &valuations {
        let bound: Vec<String> = v
            .bindings()
            .iter()
            .map(|(name, b)| match b {
                Binding::Entity(e) => format!("{name} = {}", e.id),
                Binding::Value(value) => format!("{name} = \"{value}\""),
            })
            .collect();
        println!("  {}", bound.join(", "));
    }
    println!();

    let answer = answer_query(&q, &g).expect("query answers");
    println!("answer: {}", answer.render());
    println!();

    // Aggregates go in focus position: num() counts distinct bindings,
    // min() picks the entity with the smallest distance weight.
    let nearest = parse_query(
        r#"
        ask min(?p) {
          (?p:person, role, "player")
          (?p:person, distance, ?ball:soccer)
        }
    "#,
    )
    .expect("query parses");
    let answer = answer_query(&nearest, &g).expect("query answers");
    println!("player nearest the ball: {}", answer.render());
}
