//! Scores inferred labels and query answers.
//!
//! Label quality is reported per value as precision, recall, and their
//! harmonic mean. Answer quality is exact match after normalization
//! (case, whitespace, trailing punctuation, small number words), so
//! "Three" and "3" count as the same answer.

use eagq::evalkit::{answer_accuracy, inference_report, normalize_answer, AnswerRecord};
use eagq::matcher::Answer;

fn main() {
    // A hand-tallied confusion: four players, two goalkeepers, one
    // referee, with two mistakes.
    let gold = [
        "player", "player", "player", "player", "goalkeeper", "goalkeeper", "referee",
    ];
    let predicted = [
        "player", "player", "player", "referee", "goalkeeper", "player", "referee",
    ];
    let report = inference_report(&gold, &predicted).expect("same length");
    println!("{}", report.render_table("role"));
    println!();

    for raw in ["  Three ", "Red.", "SIX", "the left side"] {
        println!("normalize_answer({raw:?}) = {:?}", normalize_answer(raw));
    }
    println!();

    let records = vec![
        AnswerRecord::new(
            "demo-1",
            "Q7",
            Answer::Count(3),
            vec!["three".into()],
        )
        .expect("references are nonempty"),
        AnswerRecord::new(
            "demo-1",
            "Q3",
            Answer::Bool(true),
            vec!["yes".into()],
        )
        .expect("references are nonempty"),
        AnswerRecord::new(
            "demo-2",
            "Q7",
            Answer::Count(4),
            vec!["five".into()],
        )
        .expect("references are nonempty"),
    ];
    let accuracy = answer_accuracy(&records).expect("records are nonempty");
    println!("{}", accuracy.render_table());
}
