//! Solves the image-to-pitch homography from four penalty-area
//! keypoints and registers points into meters.
//!
//! Four point correspondences pin a projective map exactly. Scenes
//! whose field annotation carries keypoints get metric distances;
//! scenes without them keep pixel distances, and both units flow
//! through distance edges and min() untouched.

use eagq::geometry::{register_point, solve_homography, Point2};
use eagq::scene::FieldPart;

fn main() {
    // Where the left penalty-area corners appear in a hypothetical
    // image (pixels), paired with their standard pitch positions.
    let image = [
        Point2::image(220.0, 90.0),
        Point2::image(180.0, 560.0),
        Point2::image(460.0, 120.0),
        Point2::image(430.0, 520.0),
    ];
    let pitch = FieldPart::L
        .penalty_area_targets()
        .expect("penalty areas have standard landmarks");

    let correspondences = [
        (image[0], pitch[0]),
        (image[1], pitch[1]),
        (image[2], pitch[2]),
        (image[3], pitch[3]),
    ];
    let h = solve_homography(&correspondences).expect("corners are in general position");

    println!("image point        -> pitch point (meters)");
    for p in image {
        let q = register_point(&h, p).expect("maps");
        println!("({:>6.1}, {:>6.1}) -> ({:>6.2}, {:>6.2})", p.x, p.y, q.x, q.y);
    }
    println!();

    // Any other image point registers through the same map.
    let ball = Point2::image(300.0, 300.0);
    let q = register_point(&h, ball).expect("maps");
    println!(
        "a ball at ({:.0}, {:.0})px stands at ({:.2}, {:.2})m on the pitch",
        ball.x, ball.y, q.x, q.y
    );
}
