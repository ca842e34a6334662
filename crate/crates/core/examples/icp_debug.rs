use groundloop::descriptor::{best_shift, build_descriptor, symmetry_test, DescriptorParams, SgfPoints};
use groundloop::geom::{Point2, Se2};
use groundloop::icp::{icp_2d, icp_init_from_shift, IcpConfig};

fn l_cloud() -> Vec<Point2<f64>> {
    let mut pts = Vec::new();
    let mut y = 0.0;
    while y < 1.2 {
        let mut x = 0.0;
        while x < 0.3 {
            pts.push(Point2::new(x, y));
            x += 0.05;
        }
        y += 0.05;
    }
    let mut x = 0.3;
    while x < 1.0 {
        let mut y = 0.0;
        while y < 0.3 {
            pts.push(Point2::new(x, y));
            y += 0.05;
        }
        x += 0.05;
    }
    pts
}

fn grid_fill(test: impl Fn(f64, f64) -> bool, half: f64, step: f64) -> Vec<Point2<f64>> {
    let mut pts = Vec::new();
    let mut x = -half;
    while x <= half {
        let mut y = -half;
        while y <= half {
            if test(x, y) {
                pts.push(Point2::new(x, y));
            }
            y += step;
        }
        x += step;
    }
    pts
}

fn sgf(points: Vec<Point2<f64>>) -> SgfPoints<f64> {
    let n = points.len() as f64;
    let c = points.iter().fold(Point2::zero(), |a, &p| a + p);
    let centroid = Point2::new(c.x / n, c.y / n);
    SgfPoints { points, centroid, anchor_pose: 0 }
}

fn main() {
    // icp check
    let pts = l_cloud();
    let truth = Se2::new(0.3, -0.2, std::f64::consts::PI);
    let target: Vec<Point2<f64>> = pts.iter().map(|&p| truth.apply(p)).collect();
    let r = icp_2d(&pts, &target, icp_init_from_shift(45, 90), &IcpConfig::default()).unwrap();
    println!(
        "icp: t=({:.8},{:.8}) yaw={:.8} iters={} rms={:.2e}",
        r.transform.t.x, r.transform.t.y, r.transform.yaw, r.iterations, r.rms
    );

    // template separation study
    let step = 0.05;
    let mut shapes: Vec<(String, Vec<Point2<f64>>)> = Vec::new();
    for scale in [0.7f64, 1.0, 1.5] {
        // solid arrow/wedge
        shapes.push((
            format!("arrow{scale}"),
            grid_fill(
                |x, y| {
                    let xs = x / scale;
                    let ys = y / scale;
                    xs >= -0.45 && xs <= 0.45 && ys.abs() <= 0.05 + 0.35 * (xs + 0.45) / 0.9
                },
                2.0,
                step,
            ),
        ));
        // hollow C-frame
        shapes.push((
            format!("cframe{scale}"),
            grid_fill(
                |x, y| {
                    let xs = x / scale;
                    let ys = y / scale;
                    let in_outer = xs.abs() <= 0.8 && ys.abs() <= 0.55;
                    let in_inner = xs.abs() <= 0.55 && ys.abs() <= 0.3;
                    let in_gap = xs > 0.55 && ys.abs() <= 0.18;
                    in_outer && !in_inner && !in_gap
                },
                2.0,
                step,
            ),
        ));
        // solid disk
        shapes.push((
            format!("disk{scale}"),
            grid_fill(|x, y| (x * x + y * y).sqrt() <= 0.45 * scale, 2.0, step),
        ));
        // diamond
        shapes.push((
            format!("diamond{scale}"),
            grid_fill(
                |x, y| (x / (0.55 * scale)).abs() + (y / (0.3 * scale)).abs() <= 1.0,
                2.0,
                step,
            ),
        ));
        // stripe
        shapes.push((
            format!("stripe{scale}"),
            grid_fill(|x, y| (x / scale).abs() <= 1.0 && (y / scale).abs() <= 0.16, 2.0, step),
        ));
        // L corner
        shapes.push((
            format!("corner{scale}"),
            grid_fill(
                |x, y| {
                    let xs = x / scale;
                    let ys = y / scale;
                    (xs >= -0.5 && xs <= -0.2 && ys >= -0.5 && ys <= 0.6)
                        || (xs > -0.2 && xs <= 0.6 && ys >= -0.5 && ys <= -0.2)
                },
                2.0,
                step,
            ),
        ));
    }

    let params = DescriptorParams::default();
    let descs: Vec<(String, groundloop::DescriptorF64, usize)> = shapes
        .iter()
        .map(|(n, p)| {
            let s = sgf(p.clone());
            let d = build_descriptor(&s, params);
            (n.clone(), d, p.len())
        })
        .collect();

    println!("\nsymmetry flags (tol 0.1):");
    for (n, d, count) in &descs {
        println!("  {n}: sym={} n={}", symmetry_test(d, 0.1), count);
    }

    println!("\npairwise best-shift distances (< 0.7 would merge):");
    for i in 0..descs.len() {
        for j in i + 1..descs.len() {
            let (_, dist) = best_shift(&descs[i].1, &descs[j].1).unwrap();
            let mark = if dist < 0.7 { " <-- MERGE" } else { "" };
            println!("  {} vs {}: {:.3}{}", descs[i].0, descs[j].0, dist, mark);
        }
    }
}
