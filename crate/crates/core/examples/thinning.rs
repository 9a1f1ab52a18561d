//! Thin the free space of a small scenario and print the grid, the skeleton
//! and the resulting graph as text.
//!
//! Usage: cargo run --example thinning

use crowdnav::geometry::rasterize;
use crowdnav::topology::{prune_spurs, skeleton_to_graph, thin};
use crowdnav::{RectObstacle, Vec2};

fn main() {
    let obstacles = [
        RectObstacle::from_center(Vec2::new(2.0, 2.5), 1.2, 1.0).unwrap(),
        RectObstacle::from_center(Vec2::new(4.2, 1.4), 0.8, 0.8).unwrap(),
    ];
    let grid = rasterize(6.0, 4.0, 0.1, &obstacles, 0.3).expect("grid");
    let skeleton = thin(&grid);
    // Top row first, so the picture is upright.
    for y in (0..grid.height).rev() {
        let row: String = (0..grid.width)
            .map(|x| if skeleton.get(x, y) { '@' } else if grid.is_blocked(x, y) { '#' } else { '.' })
            .collect();
        println!("{row}");
    }
    let graph = prune_spurs(&skeleton_to_graph(&skeleton, &grid), 0.9);
    println!(
        "\n{} skeleton pixels, {} nodes, {} edges, cycle rank {}\n",
        skeleton.count(),
        graph.nodes.len(),
        graph.edges.len(),
        graph.cycle_rank()
    );
    print!("{}", graph.to_text());
}
