//! Turns a scene annotation into an entity-attribute graph.
//!
//! The showcase scene carries four penalty-area keypoints, so the
//! registration step solves a homography onto the standard pitch and
//! every pairwise distance comes out in meters.

use eagq::eag::{build_eag, Object, Registration, Triple};
use eagq::synth;

fn render(t: &Triple) -> String {
    let object = match &t.object {
        Object::Entity { target, weight } => match weight {
            Some(w) => format!("{} [{w}]", target.id),
            None => target.id.clone(),
        },
        Object::Value(v) => format!("\"{v}\""),
        Object::Blank => "?".into(),
    };
    format!("({}, {}, {object})", t.subject.id, t.predicate)
}

fn main() {
    let scene = synth::fixtures()
        .into_iter()
        .find(|f| f.scene.scene_id == "showcase")
        .expect("bundled scene exists")
        .scene;

    let g = build_eag(&scene, Registration::Auto).expect("scene is well formed");

    println!("scene:    {}", g.scene_id());
    println!("entities: {}", g.entities().count());
    println!("triples:  {}", g.triples().len());
    println!();

    println!("attributes of p1:");
    for t in g.triples_matching(Some("p1"), None, None) {
        println!("  {}", render(t));
    }
    println!();

    println!("hidden attributes awaiting inference:");
    for t in g.triples() {
        if matches!(t.object, Object::Blank) {
            println!("  {}", render(t));
        }
    }
    println!();

    // Registration turned pixel boxes into pitch coordinates, so this
    // distance is metric.
    let d = g
        .distance_between("p4", "soccer")
        .expect("both entities exist and carry positions");
    println!("distance from p4 to the ball: {d}");
}
