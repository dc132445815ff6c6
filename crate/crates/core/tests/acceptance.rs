//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and fails the process if any criterion fails.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachplan::baseregion::{BaseRegion, GraspOptions, WitnessStrategy};
use reachplan::collision::shapes_collide;
use reachplan::grid::BaseGridSpec;
use reachplan::kinematics::{DhJoint, JointConfig, KinematicChain};
use reachplan::pipeline::{
    build_scene_db, plan_scene, plan_svg, region_svg, scene_regions, simulate_scene, IntersectionAnalysis,
};
use reachplan::pose::{Pose6, PoseMetric};
use reachplan::reachdb::{build, SamplingSpec, VoxelSpec};
use reachplan::regiongeo::{enumerate_intersections, inscribed_circle, ErrorModel, UncertaintyModel};
use reachplan::robustsim::{SimOptions, TimeModel};
use reachplan::sequencer::{
    min_cover, order_stops_exact, order_stops_sa, path_length, plan, CoverInstance, PlanOptions, SaSchedule, SequencerError,
};
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn criterion_1() -> Outcome {
    let chain = KinematicChain::planar(&[1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let targets: Vec<[f64; 2]> = (0..100)
        .map(|_| {
            let r = rng.random_range(0.2..1.9);
            let a = rng.random_range(-PI..PI);
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let steps = [PI / 8.0, PI / 16.0, PI / 32.0];
    // dist[level][target][branch]
    let mut dist = Vec::new();
    for &dt in &steps {
        let spec = VoxelSpec::new([2.0 * dt, 2.0 * dt, 1.0, TAU, TAU, TAU]).unwrap();
        let db = build(&chain, &SamplingSpec::uniform(dt, 2), &spec).unwrap();
        let mut level = Vec::new();
        for (t, p) in targets.iter().enumerate() {
            let recs = db.query_interval(&Pose6::new(p[0], p[1], 0.0, 0.0, 0.0, 0.0));
            let mut per_branch = Vec::new();
            for b in two_link_branches(1.0, 1.0, p[0], p[1]) {
                let branch = JointConfig(b.to_vec());
                let d = recs
                    .iter()
                    .map(|r| r.config.wrapped_distance(&branch))
                    .fold(f64::INFINITY, f64::min);
                ensure!(d <= dt + 1e-12, "target {t} step {dt:.4}: nearest record {d:.4} from branch {b:?}");
                per_branch.push(d);
            }
            level.push(per_branch);
        }
        dist.push(level);
    }
    for l in 1..steps.len() {
        for t in 0..targets.len() {
            for b in 0..2 {
                ensure!(
                    dist[l][t][b] <= dist[l - 1][t][b] + 1e-12,
                    "target {t} branch {b}: distance grew from {} to {}",
                    dist[l - 1][t][b],
                    dist[l][t][b]
                );
            }
        }
    }
    let worst: Vec<String> = dist
        .iter()
        .map(|l| format!("{:.4}", l.iter().flatten().fold(0.0f64, |a, b| a.max(*b))))
        .collect();
    Ok(format!("100 targets x 2 branches, worst distance per level {}", worst.join(" > ")))
}

fn spatial_arm() -> KinematicChain {
    let j = |a: f64, alpha: f64, d: f64| DhJoint {
        a,
        alpha,
        d,
        theta_offset: 0.0,
        limit_lo: -PI,
        limit_hi: PI,
    };
    KinematicChain::new(vec![j(0.0, PI / 2.0, 0.3), j(0.4, 0.0, 0.0), j(0.3, 0.0, 0.0)], Pose6::identity()).unwrap()
}

fn criterion_2() -> Outcome {
    let chain = spatial_arm();
    let metric = PoseMetric::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let targets: Vec<Pose6> = (0..300)
        .map(|_| reachplan::kinematics::forward_kinematics(&chain, &random_config(&mut rng, 3)).unwrap())
        .collect();
    let base = [0.04, 0.04, 0.04, 0.2, 0.2, 0.2];
    let sampling = SamplingSpec::uniform(TAU / 90.0, 3);
    let mut maxdev = Vec::new();
    let mut returned = 0usize;
    for scale in [1.0, 0.5] {
        let spec = VoxelSpec::new(base.map(|v| v * scale)).unwrap();
        let db = build(&chain, &sampling, &spec).unwrap();
        let bound = db.interval_bound(&metric);
        let mut worst = 0.0f64;
        for (t, target) in targets.iter().enumerate() {
            for r in db.query_interval(target) {
                let d = metric.distance(&r.pose, target);
                ensure!(d <= bound, "target {t}: record at distance {d} exceeds bound {bound}");
                worst = worst.max(d);
                returned += 1;
            }
        }
        maxdev.push(worst);
    }
    let ratio = maxdev[0] / maxdev[1];
    ensure!(
        (2.0 / 2.5..=2.0 * 2.5).contains(&ratio),
        "max deviation {:.5} -> {:.5}, ratio {ratio:.3} outside [0.8, 5]",
        maxdev[0],
        maxdev[1]
    );
    Ok(format!(
        "{returned} records within bound; max deviation {:.5} -> {:.5} (ratio {ratio:.3})",
        maxdev[0], maxdev[1]
    ))
}

fn criterion_3() -> Outcome {
    let scene = load_scene("walled.json");
    let (db, _) = build_scene_db(&scene, &desk_db_params()).unwrap();
    let region = |strategy| {
        let opts = GraspOptions {
            strategy,
            ..GraspOptions::default()
        };
        scene_regions(&scene, &db, &[], &opts).unwrap().remove(0)
    };
    let multi = region(WitnessStrategy::MultiWitness);
    let single = region(WitnessStrategy::SingleWitness);
    let (m, s) = (multi.mask.count(), single.mask.count());
    ensure!(single.mask.is_subset_of(&multi.mask), "single-witness region is not inside the multi-witness region");
    ensure!(m > s, "regions are equal ({m} cells)");
    ensure!(m as f64 >= 1.1 * s as f64, "multi {m} vs single {s}: less than 10% more");
    Ok(format!("multi {m} cells vs single {s} cells (+{:.1}%)", 100.0 * (m as f64 / s as f64 - 1.0)))
}

fn fig9_regions() -> Vec<BaseRegion> {
    let grid = BaseGridSpec::new([-1.2, -2.0], 0.02, 220, 200, 0.0).unwrap();
    let centers = [[0.0, 0.0], [1.0, 0.8], [1.0, -0.8], [2.0, 0.0]];
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| BaseRegion {
            tray: (i + 1).to_string(),
            grid,
            mask: disk_mask(&grid, &[(*c, 0.95)]),
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let regions = fig9_regions();
    let recs = enumerate_intersections(&regions, regions.len()).unwrap();
    let by_order = |k: usize| -> Vec<String> { recs.iter().filter(|r| r.order() == k).map(|r| r.label()).collect() };
    let (pairs, triples, quads) = (by_order(2), by_order(3), by_order(4));
    ensure!(pairs == ["1,2", "1,3", "2,3", "2,4", "3,4"], "second order: {pairs:?}");
    ensure!(triples == ["1,2,3", "2,3,4"], "third order: {triples:?}");
    ensure!(quads.is_empty(), "fourth order: {quads:?}");
    Ok(format!("{} second-order {:?}, {} third-order {:?}", pairs.len(), pairs, triples.len(), triples))
}

fn criterion_5() -> Outcome {
    let grid = BaseGridSpec::new([-1.0, -1.0], 0.02, 300, 100, 0.0).unwrap();
    let xs = [0.0, 1.2, 2.0, 2.8, 4.0];
    let regions: Vec<BaseRegion> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| BaseRegion {
            tray: (i + 1).to_string(),
            grid,
            mask: disk_mask(&grid, &[([x, 0.0], 0.82)]),
        })
        .collect();
    let u = UncertaintyModel::new(0.10, ErrorModel::BoundaryWorstCase, 0).unwrap();
    let analysis = IntersectionAnalysis::new(&regions, &u, None).unwrap();
    let third: Vec<(String, f64, bool)> = analysis
        .records
        .iter()
        .zip(&analysis.kept)
        .filter(|(r, _)| r.order() == 3)
        .map(|(r, k)| (r.label(), r.inscribed_radius(), *k))
        .collect();
    ensure!(
        third.len() == 1 && third[0].0 == "2,3,4" && !third[0].2,
        "expected one discarded third-order intersection {{2,3,4}}, got {third:?}"
    );
    let start = [-1.0, 0.0];
    let goal = [5.0, 0.0];
    let result = plan(&regions, &u, start, goal, &PlanOptions::default()).unwrap();
    let mut chosen: Vec<Vec<String>> = result.stops.iter().map(|s| s.trays.clone()).collect();
    chosen.sort();
    ensure!(chosen == [vec!["1", "2"], vec!["3", "4"], vec!["5"]], "cover {chosen:?}");
    let kept = analysis.surviving();
    for s in &result.stops {
        let rec = kept.iter().find(|r| r.trays == s.trays).unwrap();
        ensure!(rec.robust_center() == Some(s.center), "stop {:?} is not at its inscribed center", s.trays);
    }
    let centers: Vec<[f64; 2]> = result.stops.iter().map(|s| s.center).collect();
    let best = brute_path_length(start, goal, &centers);
    ensure!(
        (result.total_length - best).abs() < 1e-9 && (result.recomputed_length() - best).abs() < 1e-9,
        "path {} vs shortest {best}",
        result.total_length
    );
    let order: Vec<String> = result.stops.iter().map(|s| s.trays.join(",")).collect();
    Ok(format!(
        "{{2,3,4}} radius {:.3} < 0.10 discarded; stops {} length {:.4}",
        third[0].1,
        order.join(" -> "),
        result.total_length
    ))
}

fn criterion_6() -> Outcome {
    let scene = load_scene("demo3.json");
    let (db, _) = build_scene_db(&scene, &desk_db_params()).unwrap();
    let regions = scene_regions(&scene, &db, &[], &GraspOptions::default()).unwrap();
    let u = UncertaintyModel::new(0.10, ErrorModel::BoundaryWorstCase, 11).unwrap();
    let analysis = IntersectionAnalysis::new(&regions, &u, None).unwrap();
    let pair = analysis
        .records
        .iter()
        .zip(&analysis.kept)
        .find(|(r, _)| r.label() == "1,2")
        .ok_or("regions 1 and 2 do not intersect")?;
    ensure!(*pair.1, "intersection 1,2 radius {} fails the filter", pair.0.inscribed_radius());
    let planned = plan_scene(&scene, &regions, &u, &PlanOptions::default()).unwrap();
    let report = simulate_scene(
        &scene,
        &regions,
        &planned,
        &u,
        &SimOptions {
            trials: 10_000,
            quantization_slack: true,
            time: TimeModel::default(),
        },
    )
    .unwrap();
    let naive = report.naive.as_ref().unwrap();
    ensure!(report.planned.stops == 2, "planned {} stops", report.planned.stops);
    ensure!(naive.stops == 3, "naive {} stops", naive.stops);
    ensure!(report.planned.time < naive.time, "planned {} s vs naive {} s", report.planned.time, naive.time);
    let overhead = |n: usize| n as f64 * TimeModel::default().stop_overhead;
    ensure!(
        (overhead(report.planned.stops) / overhead(naive.stops) - 2.0 / 3.0).abs() < 1e-12,
        "overhead ratio"
    );
    ensure!(report.planned.success_rate == 1.0, "success rate {}", report.planned.success_rate);
    Ok(format!(
        "radius(1,2) {:.3}; planned 2 stops {:.1} s vs naive 3 stops {:.1} s (ratio {:.3}); success {:.4} over {} trials",
        pair.0.inscribed_radius(),
        report.planned.time,
        naive.time,
        report.time_ratio().unwrap(),
        report.planned.success_rate,
        report.trials
    ))
}

fn battery_cover() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut infeasible = 0;
    for case in 0..200 {
        let trays = rng.random_range(1..=6);
        let n = rng.random_range(1..=14);
        let subsets: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let mut s: Vec<usize> = (0..trays).filter(|_| rng.random_bool(0.35)).collect();
                if s.is_empty() {
                    s.push(rng.random_range(0..trays));
                }
                s
            })
            .collect();
        let inst = CoverInstance::from_subsets(trays, &subsets).unwrap();
        match (min_cover(&inst), exhaustive_cover(&inst)) {
            (Ok(sel), Some(best)) => {
                let key = key_of(&inst, &sel).ok_or(format!("case {case}: solver answer does not cover"))?;
                ensure!(key == best, "case {case}: solver {key:?} vs exhaustive {best:?}");
            }
            (Err(SequencerError::Infeasible { .. }), None) => infeasible += 1,
            (a, b) => return Err(format!("case {case}: solver {a:?} vs exhaustive {b:?}")),
        }
    }
    Ok(format!("min_cover 200/200 ({infeasible} infeasible)"))
}

fn battery_inscribed() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut checked = 0;
    for case in 0..100 {
        let w = rng.random_range(1..=40);
        let h = rng.random_range(1..=40);
        let density = rng.random_range(0.3..0.95);
        let grid = BaseGridSpec::new([0.0, 0.0], 0.1, w, h, 0.0).unwrap();
        let mask = reachplan::grid::Mask::from_fn(w, h, |_, _| rng.random_bool(density));
        match (inscribed_circle(&mask, &grid), brute_inscribed(&mask)) {
            (Ok(c), Some((cell, d2))) => {
                ensure!(c.cell == cell && c.squared_cells == d2, "case {case}: {:?}/{} vs {cell:?}/{d2}", c.cell, c.squared_cells);
                checked += 1;
            }
            (Err(_), None) => {}
            (a, b) => return Err(format!("case {case}: {a:?} vs {b:?}")),
        }
    }
    Ok(format!("inscribed_circle 100/100 ({checked} non-empty)"))
}

fn battery_sa() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut worst = 0.0f64;
    let mut runs = 0;
    for m in 2..=8 {
        for _ in 0..3 {
            let pt = |rng: &mut ChaCha8Rng| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let start = pt(&mut rng);
            let goal = pt(&mut rng);
            let stops: Vec<[f64; 2]> = (0..m).map(|_| pt(&mut rng)).collect();
            let exact = path_length(start, goal, &stops, &order_stops_exact(start, goal, &stops).unwrap());
            for seed in 0..20 {
                let order = order_stops_sa(start, goal, &stops, &SaSchedule { seed, ..SaSchedule::default() });
                let len = path_length(start, goal, &stops, &order);
                let gap = len / exact - 1.0;
                ensure!(gap <= 0.02, "m={m} seed={seed}: {len} vs exact {exact}");
                worst = worst.max(gap);
                runs += 1;
            }
        }
    }
    Ok(format!("SA {runs} runs, worst gap {:.3}%", worst * 100.0))
}

fn battery_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(1..=7);
        let chain = random_chain(&mut rng, n);
        let q = random_config(&mut rng, n);
        let j = chain.jacobian(&q).unwrap();
        for (i, col) in fd_jacobian(&chain, &q, 1e-6).iter().enumerate() {
            for r in 0..6 {
                let e = (j[(r, i)] - col[r]).abs();
                ensure!(e <= 1e-5, "case {case}: entry ({r},{i}) analytic {} vs fd {}", j[(r, i)], col[r]);
                worst = worst.max(e);
            }
        }
    }
    Ok(format!("Jacobian 200/200, worst entry error {worst:.2e}"))
}

fn battery_collision() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let h = 0.004;
    let band = 3.0 * h;
    let (mut hits, mut misses, mut skipped) = (0, 0, 0);
    while hits + misses < 200 {
        let a = random_shape(&mut rng, 0.25);
        let b = random_shape(&mut rng, 0.25);
        let sep = sampled_separation(&a, &b, h);
        if sep.abs() <= band {
            skipped += 1;
            continue;
        }
        let oracle = sep < 0.0;
        ensure!(
            shapes_collide(&a, &b) == oracle && shapes_collide(&b, &a) == oracle,
            "pair {a:?} / {b:?}: oracle {oracle} (separation {sep:.4})"
        );
        if oracle {
            hits += 1;
        } else {
            misses += 1;
        }
    }
    Ok(format!("collision 200/200 ({hits} overlapping, {misses} separated, {skipped} ambiguous skipped)"))
}

fn criterion_7() -> Outcome {
    let parts = [battery_cover()?, battery_inscribed()?, battery_sa()?, battery_jacobian()?, battery_collision()?];
    Ok(parts.join("; "))
}

/// Every text and binary artifact of one pipeline run on the 4-tray demo.
fn pipeline_artifacts(threads: usize) -> Vec<(String, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let scene = load_scene("demo4.json");
        let (db, _) = build_scene_db(&scene, &desk_db_params()).unwrap();
        let regions = scene_regions(&scene, &db, &[], &GraspOptions::default()).unwrap();
        let u = scene.uncertainty;
        let analysis = IntersectionAnalysis::new(&regions, &u, None).unwrap();
        let planned = plan_scene(&scene, &regions, &u, &PlanOptions::default()).unwrap();
        let report = simulate_scene(&scene, &regions, &planned, &u, &SimOptions::default()).unwrap();
        let mut out = vec![("db".to_string(), db.to_bytes())];
        for r in &regions {
            out.push((format!("region_{}.txt", r.tray), r.to_text().into_bytes()));
            out.push((format!("region_{}.svg", r.tray), region_svg(&scene, r).into_bytes()));
        }
        out.push(("intersections.txt".into(), analysis.records_text().into_bytes()));
        out.push(("filter.txt".into(), analysis.report().into_bytes()));
        out.push(("plan.txt".into(), planned.to_text().into_bytes()));
        out.push(("plan.svg".into(), plan_svg(&scene, &regions, &planned).into_bytes()));
        out.push(("simulate.txt".into(), report.to_text().into_bytes()));
        out
    })
}

fn criterion_8() -> Outcome {
    let a = pipeline_artifacts(1);
    let b = pipeline_artifacts(4);
    ensure!(a.len() == b.len(), "artifact counts differ");
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        ensure!(na == nb && da == db, "{na} differs between runs");
    }
    let bytes: usize = a.iter().map(|(_, d)| d.len()).sum();
    Ok(format!("{} artifacts ({bytes} bytes) identical across 1- and 4-thread runs", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("1 convergence of interval queries", criterion_1, Duration::from_secs(30)),
        ("2 interval deviation bound", criterion_2, Duration::from_secs(30)),
        ("3 multi- vs single-witness regions", criterion_3, Duration::from_secs(120)),
        ("4 four-region intersection structure", criterion_4, Duration::from_secs(60)),
        ("5 five-region selection and ordering", criterion_5, Duration::from_secs(60)),
        ("6 three-tray plan vs naive", criterion_6, Duration::from_secs(120)),
        ("7 oracle batteries", criterion_7, Duration::from_secs(300)),
        ("8 pipeline determinism", criterion_8, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t0.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > limit => Err(format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs())),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{:.1} s]: {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} [{:.1} s]: {detail}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
