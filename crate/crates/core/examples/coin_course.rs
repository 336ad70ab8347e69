//! The four built-in routes: length, coin layout, and nearest-point queries.

use micromobility_sim::course::{generate_course, ROUTE_IDS};

fn main() {
    for route in ROUTE_IDS {
        let (course, coins) = generate_course(route, 10.0, 2.0).unwrap();
        let end = course.point_at(course.total_length());
        println!(
            "route {route}: {:.3} m, {} segments, {} coins, ends at ({:.2}, {:.2})",
            course.total_length(),
            course.segment_count(),
            coins.total(),
            end[0],
            end[1]
        );
        let c = &coins.coins[4];
        println!(
            "  coin 5 at arc {:.1} -> ({:.2}, {:.2})",
            c.arc, c.position[0], c.position[1]
        );
        let probe = [c.position[0] + 1.5, c.position[1] - 1.0];
        let p = course.project(probe);
        println!(
            "  probe {probe:.2?}: arc {:.2}, {:.3} m off centerline, in corridor: {}",
            p.arc,
            p.distance,
            course.in_corridor(probe)
        );
    }
}
