use groundloop::eval::{ate, count_sequence_metrics, AteOptions};
use groundloop::pipeline::{run_scenario, PipelineConfig};
use groundloop::sim::{make_scenario, noisy_odometry, ScenarioKind};

fn main() {
    let kind = match std::env::args().nth(1).as_deref() {
        Some("reverse_slope") => ScenarioKind::ReverseSlope,
        Some("large_loop") => ScenarioKind::LargeLoop,
        _ => ScenarioKind::Delivery,
    };
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let compensation = std::env::args().nth(3).as_deref() != Some("nocomp");

    let t0 = std::time::Instant::now();
    let scenario = make_scenario(kind, seed);
    println!(
        "scenario {}: {} frames, {} markings ({}s)",
        scenario.name,
        scenario.frame_count(),
        scenario.markings.len(),
        t0.elapsed().as_secs_f32()
    );
    for m in &scenario.annotations.markings {
        println!(
            "  marking {} {} sym={} visits={:?}",
            m.id,
            m.name,
            m.symmetric,
            m.visits
                .iter()
                .map(|v| (v.first_frame, v.last_frame, (v.heading * 57.3) as i32))
                .collect::<Vec<_>>()
        );
    }
    let odometry = noisy_odometry(&scenario, seed);
    let mut config = PipelineConfig::default();
    config.compensation = compensation;

    let t1 = std::time::Instant::now();
    let out = run_scenario(&scenario, &odometry, &config).unwrap();
    println!(
        "pipeline: {} instances, {} groups, {} candidates, {} constraints ({:.1}s)",
        out.instances.len(),
        out.groups,
        out.candidates.len(),
        out.constraints.len(),
        t1.elapsed().as_secs_f32()
    );
    for w in &out.warnings {
        println!("  warn: {w}");
    }
    for c in &out.candidates {
        println!(
            "  pair q{}(f{}) -> m{}(f{}) group {} shift {} rms {:.4} conv={} closed={}",
            c.query_instance, c.query_frame, c.member_instance, c.member_frame,
            c.group, c.shift, c.icp_rms, c.icp_converged, c.closed
        );
    }
    let counters = count_sequence_metrics(
        &out.detections,
        &out.candidates,
        &scenario.annotations,
        &scenario.trajectory,
    );
    println!("counters: {counters:?}");
    let opts = AteOptions::default();
    let a_odo = ate(&out.odometry, &scenario.trajectory, &opts).unwrap();
    let a_opt = ate(&out.optimized, &scenario.trajectory, &opts).unwrap();
    println!(
        "ATE odometry rmse {:.3} m | optimized rmse {:.3} m | ratio {:.3}",
        a_odo.rmse,
        a_opt.rmse,
        a_opt.rmse / a_odo.rmse
    );
    println!(
        "graph: cost {:.3e} iters {} converged {}",
        out.graph.final_cost, out.graph.iterations, out.graph.converged
    );
    println!("total {:.1}s", t0.elapsed().as_secs_f32());
}
