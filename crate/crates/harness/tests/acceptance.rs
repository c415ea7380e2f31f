//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use oracles::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use servobench::{run_session, Outcome, SessionConfig};
use servobench_core::composer::{pca_analyze, threshold_candidates};
use servobench_core::geometry::{
    evaluate_constraint, line_from_points, ConstraintKind, GeometricConstraint, ImagePoint, LineToLineForm,
};
use servobench_core::metrics::{self as m, MetricReport};
use servobench_core::{broyden_update, servo_step, ControllerConfig, JacobianEstimate, ProbabilityMap, ServoState};
use servobench_sim::provider::remote::{decode_request, decode_response, encode_response};
use servobench_sim::{
    random_scene, CorruptProvider, CorruptionProfile, OracleProvider, ProviderError, RemoteProvider, SegProvider, SimWorld,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn criterion(name: &str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let t0 = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
    });
    let secs = t0.elapsed().as_secs_f64();
    let (pass, detail) = match (result, budget) {
        (Ok(d), Some(b)) if t0.elapsed() > b => (false, format!("{d}; over budget {:.0} s", b.as_secs_f64())),
        (Ok(d), _) => (true, d),
        (Err(d), _) => (false, d),
    };
    println!("{} {name}: {detail} [{secs:.2} s]", if pass { "PASS" } else { "FAIL" });
    pass
}

fn coord(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-500.0..500.0)
}

fn distinct(rng: &mut ChaCha8Rng) -> ((f64, f64), (f64, f64)) {
    loop {
        let p = (coord(rng), coord(rng));
        let q = (coord(rng), coord(rng));
        if (p.0 - q.0).hypot(p.1 - q.1) > 1e-3 {
            return (p, q);
        }
    }
}

fn pt((u, v): (f64, f64)) -> ImagePoint {
    ImagePoint::new(u, v)
}

fn geometry() -> Check {
    const N: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let tol = |x: f64| 1e-9 * (1.0 + x.abs());

    for i in 0..N {
        let (p, q) = distinct(&mut rng);
        let l = line_from_points(&pt(p), &pt(q)).map_err(|e| e.to_string())?;
        ensure(pt(p).dot(&l).abs() < 1e-9 && pt(q).dot(&l).abs() < 1e-9, || format!("line misses a defining point, case {i}"))?;
        ensure((l.a.hypot(l.b) - 1.0).abs() < 1e-12, || format!("line not unit-normalized, case {i}"))?;
    }

    for i in 0..N {
        let ((x1, y1), (x2, y2)) = distinct(&mut rng);
        let (px, py) = (coord(&mut rng), coord(&mut rng));
        let l = line_from_points(&pt((x1, y1)), &pt((x2, y2))).unwrap();
        let e = evaluate_constraint(&GeometricConstraint::point_to_line(pt((px, py)), l)).unwrap()[0];
        let d = oracles::point_line_distance(px, py, x1, y1, x2, y2);
        ensure((e.abs() - d).abs() < tol(d), || format!("p2l {e} vs distance {d}, case {i}"))?;
    }

    for i in 0..N {
        let (p, q) = distinct(&mut rng);
        let l1 = line_from_points(&pt(p), &pt(q)).unwrap();
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let off = (coord(&mut rng), coord(&mut rng));
        // Same direction through another point: parallel.
        let parallel = line_from_points(&pt(off), &pt((off.0 + dx, off.1 + dy))).unwrap();
        let e = evaluate_constraint(&GeometricConstraint::parallel_lines(l1, parallel)).unwrap();
        ensure(e[0].abs() < 1e-9, || format!("parallel lines leave residual {}, case {i}", e[0]))?;
        let (r, s) = distinct(&mut rng);
        let l2 = line_from_points(&pt(r), &pt(s)).unwrap();
        let e = evaluate_constraint(&GeometricConstraint::parallel_lines(l1, l2)).unwrap()[0];
        let sin = oracles::abs_sin_between((dx, dy), (s.0 - r.0, s.1 - r.1));
        ensure((e.abs() - sin).abs() < 1e-9, || format!("par {e} vs sine {sin}, case {i}"))?;
        ensure((e.abs() < 1e-9) == (sin < 1e-9), || format!("par zero iff parallel violated, case {i}"))?;
    }

    for i in 0..N {
        let (a, b) = distinct(&mut rng);
        let (c, d) = distinct(&mut rng);
        let t = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let sh = |p: (f64, f64)| (p.0 + t.0, p.1 + t.1);
        let l = line_from_points(&pt(c), &pt(d)).unwrap();
        let lt = line_from_points(&pt(sh(c)), &pt(sh(d))).unwrap();
        let e = |c: GeometricConstraint| evaluate_constraint(&c).unwrap();
        let p2p = (e(GeometricConstraint::point_to_point(pt(a), pt(b))), e(GeometricConstraint::point_to_point(pt(sh(a)), pt(sh(b)))));
        let p2l = (e(GeometricConstraint::point_to_line(pt(a), l)), e(GeometricConstraint::point_to_line(pt(sh(a)), lt)));
        ensure(p2p.0.iter().zip(&p2p.1).all(|(x, y)| (x - y).abs() < tol(*x)), || format!("p2p moved under common translation, case {i}"))?;
        ensure((p2l.0[0] - p2l.1[0]).abs() < tol(p2l.0[0]), || format!("p2l moved under common translation, case {i}"))?;
        // Moving only the point pair shifts each point term by n·t.
        let shift = l.a * t.0 + l.b * t.1;
        let sum = (e(GeometricConstraint::line_to_line(pt(a), pt(b), l)), e(GeometricConstraint::line_to_line(pt(sh(a)), pt(sh(b)), l)));
        ensure((sum.1[0] - sum.0[0] - 2.0 * shift).abs() < tol(sum.0[0]), || format!("l2l sum shift wrong, case {i}"))?;
        let stk = |f1, f2| e(GeometricConstraint::line_to_line(f1, f2, l).with_l2l_form(LineToLineForm::Stacked));
        let (s0, s1) = (stk(pt(a), pt(b)), stk(pt(sh(a)), pt(sh(b))));
        ensure(s0.iter().zip(&s1).all(|(x, y)| (y - x - shift).abs() < tol(*x)), || format!("l2l stacked shift wrong, case {i}"))?;
    }
    Ok(format!("4 × {N} cases within 1e-9"))
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0))
}

fn broyden() -> Check {
    const N: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..N {
        let (mm, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let j = JacobianEstimate::new(random_matrix(&mut rng, mm, n));
        let dq = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let obs = DVector::from_fn(mm, |_, _| rng.random_range(-5.0..5.0));
        let full = ControllerConfig { lambda: 1.0, epsilon: 0.0, ..Default::default() };
        let secant = broyden_update(&j, &obs, &dq, &full).map_err(|e| e.to_string())?;
        let resid = (secant.matrix() * &dq - &obs).amax();
        ensure(resid < 1e-9, || format!("secant residual {resid:e}, trial {i}"))?;

        let lambda = rng.random_range(0.0..=1.0);
        let epsilon = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) };
        let cfg = ControllerConfig { lambda, epsilon, ..Default::default() };
        let got = broyden_update(&j, &obs, &dq, &cfg).map_err(|e| e.to_string())?;
        let d2 = dq.dot(&dq);
        let w = lambda * d2 / (d2 + epsilon);
        let want = j.matrix() * (1.0 - w) + secant.matrix() * w;
        let gap = (got.matrix() - want).amax();
        ensure(gap < 1e-9, || format!("convex combination off by {gap:e}, trial {i}"))?;

        let sv = (got.matrix() - j.matrix()).svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        if s.len() > 1 {
            ensure(s[1] <= 1e-9 * s[0].max(1.0), || format!("update has rank > 1 (σ2 = {:e}), trial {i}", s[1]))?;
        }
    }
    Ok(format!("{N} trials: secant, convex combination and rank one within 1e-9"))
}

fn linear_plant() -> Check {
    const TRIALS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = ControllerConfig { convergence_tau: 1e-3, rate: 0.0, ..Default::default() };
    let mut ok = 0;
    for _ in 0..TRIALS {
        let a = loop {
            let a = DMatrix::from_fn(4, 4, |i, k| if i == k { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3));
            let sv = a.clone().svd(false, false).singular_values;
            if sv.max() / sv.min() < 10.0 {
                break a;
            }
        };
        let q_star = DVector::from_fn(4, |_, _| rng.random_range(-0.5..0.5));
        let j0 = &a + DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.1..0.1));
        let mut st = ServoState::new(DVector::zeros(4), JacobianEstimate::new(j0));
        for _ in 0..100 {
            let e = &a * (&st.q - &q_star);
            if e.norm() < 1e-3 {
                ok += 1;
                break;
            }
            match servo_step(st, &e, &cfg) {
                Ok(next) => st = next,
                Err(_) => break,
            }
        }
    }
    let rate = ok as f64 / TRIALS as f64;
    ensure(rate >= 0.95, || format!("{ok}/{TRIALS} reached ‖e‖ < 1e-3"))?;
    Ok(format!("{ok}/{TRIALS} reached ‖e‖ < 1e-3 within 100 steps"))
}

fn pca() -> Check {
    let mut worst: f64 = 0.0;
    for k in 0..12 {
        let theta = (k as f64 * 15.0).to_radians();
        let mask = oracles::bar_mask(352, 352, 176.0, 176.0, 120.0, 20.0, theta);
        let map = ProbabilityMap::new(352, 352, mask).unwrap();
        let d = pca_analyze(&threshold_candidates(&map)).map_err(|e| e.to_string())?;
        let err = oracles::axis_angle_deg(d.major_axis, (theta.cos(), theta.sin()));
        ensure(err < 2.0, || format!("bar at {}° off by {err:.3}°", k * 15))?;
        worst = worst.max(err);
    }
    Ok(format!("12 angles, worst error {worst:.4}°"))
}

fn closed_loop_rate(provider: impl Fn(u64) -> Box<dyn SegProvider>) -> (usize, usize) {
    let mut cfg = SessionConfig::default();
    cfg.max_steps = 200;
    cfg.controller.rate = 0.0;
    let (mut converged, mut grasped) = (0, 0);
    for seed in 0..100 {
        let g = random_scene(seed);
        let mut world = SimWorld::new(g.scene).unwrap();
        let p = provider(seed);
        let r = run_session(&mut world, &g.prompt, &[ConstraintKind::PointToPoint], p.as_ref(), &cfg, 1, &mut ());
        if r.outcome == Outcome::Converged && r.final_e_norm.is_some_and(|e| e < 3.0) {
            converged += 1;
        }
        grasped += r.grasped as usize;
    }
    (converged, grasped)
}

fn closed_loop() -> Check {
    let (oracle, og) = closed_loop_rate(|_| Box::new(OracleProvider));
    let (corrupt, cg) = closed_loop_rate(|seed| Box::new(CorruptProvider::new(CorruptionProfile { seed, ..CorruptionProfile::standard() })));
    let summary = format!("oracle {oracle}/100 converged ({og} grasped), corrupted {corrupt}/100 ({cg} grasped)");
    ensure(oracle >= 90, || summary.clone())?;
    ensure((oracle as i64 - corrupt as i64) < 20, || summary.clone())?;
    Ok(summary)
}

fn grid(m: &ProbabilityMap) -> Grid {
    Grid { w: m.width(), h: m.height(), v: m.scores().iter().map(|&s| s as f64).collect() }
}

fn random_pair(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (ProbabilityMap, ProbabilityMap) {
    let (cx, cy) = (rng.random_range(2.0..w as f64 - 2.0), rng.random_range(2.0..h as f64 - 2.0));
    let (rx, ry) = (rng.random_range(1.5..6.0), rng.random_range(1.5..6.0));
    let gt = ProbabilityMap::from_fn(w, h, |x, y| {
        let d = ((x as f64 - cx) / rx).powi(2) + ((y as f64 - cy) / ry).powi(2);
        if d <= 1.0 { 1.0 } else { 0.0 }
    })
    .unwrap();
    let noise: f64 = rng.random_range(0.05..0.6);
    let values: Vec<f64> = gt.scores().iter().map(|&g| g as f64 * (1.0 - noise) + rng.random_range(0.0..1.0) * noise).collect();
    (ProbabilityMap::from_clamped(w, h, values).unwrap(), gt)
}

fn metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (pred, gt) = random_pair(&mut rng, 16, 16);
        let (p, g) = (grid(&pred), grid(&gt));
        let t = m::hybrid_loss_terms(&pred, &gt).unwrap();
        let (bce, ssim, iou) = oracles::hybrid(&p, &g);
        let checks = [
            ("mae", m::mae(&pred, &gt).unwrap(), oracles::mae(&p, &g)),
            ("max_f", m::max_f(&pred, &gt).unwrap().value, oracles::max_f(&p, &g)),
            ("s_measure", m::s_measure(&pred, &gt).unwrap(), oracles::s_measure(&p, &g)),
            ("weighted_f", m::weighted_f(&pred, &gt).unwrap().value, oracles::weighted_f(&p, &g)),
            ("bce", t.bce, bce),
            ("ssim", t.ssim, ssim),
            ("iou", t.iou, iou),
        ];
        for (name, got, want) in checks {
            let d = (got - want).abs();
            ensure(d < 1e-9, || format!("pair {i} {name}: {got} vs {want}"))?;
            worst = worst.max(d);
        }
    }

    let gt = ProbabilityMap::from_fn(20, 14, |x, y| if (4..13).contains(&x) && (3..10).contains(&y) { 1.0 } else { 0.0 }).unwrap();
    let same = MetricReport::evaluate(&gt, &gt).unwrap();
    ensure(same.mae == 0.0 && same.max_f == 1.0 && same.s_measure == 1.0, || format!("pred = gt gave {same:?}"))?;
    let inverted = ProbabilityMap::from_fn(20, 14, |x, y| 1.0 - gt.get(x, y)).unwrap();
    let inv = MetricReport::evaluate(&inverted, &gt).unwrap();
    ensure(inv.mae == 1.0, || format!("inverted binary MAE {}", inv.mae))?;
    Ok(format!("50 pairs, 7 scores each, worst gap {worst:.1e}; golden cases exact"))
}

fn random_map(rng: &mut ChaCha8Rng) -> ProbabilityMap {
    let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
    ProbabilityMap::from_fn(w, h, |_, _| match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        2 => f32::from_bits(rng.random_range(1..0x0080_0000)),
        _ => rng.random_range(0.0..=1.0f32),
    })
    .unwrap()
}

fn bits(m: &ProbabilityMap) -> Vec<u32> {
    m.scores().iter().map(|s| s.to_bits()).collect()
}

/// Answers each request with the next queued response line.
fn scripted_server(replies: Vec<String>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let mut replies = replies.into_iter();
        let Ok((stream, _)) = listener.accept() else { return };
        let mut writer = stream.try_clone().unwrap();
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        while reader.read_line(&mut line).map(|n| n > 0).unwrap_or(false) {
            let (id, _, _) = decode_request(&line).unwrap();
            let Some(r) = replies.next() else { return };
            let r = r.replace("{id}", &id.to_string());
            if writer.write_all(format!("{r}\n").as_bytes()).is_err() {
                return;
            }
            line.clear();
        }
    });
    addr
}

fn protocol() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for i in 0..100 {
        let map = random_map(&mut rng);
        let back = ProbabilityMap::read_pfm(&map.to_pfm_bytes()[..]).map_err(|e| e.to_string())?;
        ensure(back.same_dims(&map) && bits(&back) == bits(&map), || format!("PFM round trip differs, map {i}"))?;
        let line = encode_response(i, &map);
        let back = decode_response(&line, i, map.width(), map.height()).map_err(|e| e.to_string())?;
        ensure(bits(&back) == bits(&map), || format!("wire round trip differs, map {i}"))?;
    }

    // End to end through a live connection at frame size.
    let world = SimWorld::new(random_scene(1).scene).unwrap();
    let frame = world.render_frame();
    let maps: Vec<ProbabilityMap> = (0..5)
        .map(|_| ProbabilityMap::from_fn(352, 352, |_, _| rng.random_range(0.0..=1.0f32)).unwrap())
        .collect();
    let replies = maps.iter().map(|m| encode_response(0, m).replacen("\"id\":0", "\"id\":{id}", 1)).collect();
    let remote = RemoteProvider::new(scripted_server(replies));
    for (i, want) in maps.iter().enumerate() {
        let got = remote.provide(&frame, "apple").map_err(|e| e.to_string())?;
        ensure(bits(&got) == bits(want), || format!("live wire map {i} differs"))?;
    }

    let good = encode_response(7, &ProbabilityMap::filled(2, 2, 0.5));
    let malformed = [
        "not json".to_string(),
        good.replace("\"id\":7", "\"id\":8"),
        encode_response(7, &ProbabilityMap::filled(2, 1, 0.5)).replace("\"height\":1", "\"height\":2"),
        good.replace("\"probmap_b64\":\"", "\"probmap_b64\":\"!!"),
        format!(r#"{{"id":7,"width":2,"height":2,"probmap_b64":"{}"}}"#, "AADAPwAAwD8AAMA/AADAPw=="),
        r#"{"id":7,"width":2}"#.to_string(),
    ];
    for line in &malformed {
        let first = decode_response(line, 7, 2, 2);
        let second = decode_response(line, 7, 2, 2);
        ensure(matches!(first, Err(ProviderError::ProtocolError(_))), || format!("{line} gave {first:?}"))?;
        ensure(format!("{first:?}") == format!("{second:?}"), || format!("{line} is not deterministic"))?;
    }
    Ok(format!("100 maps bit-exact through PFM and wire, 5 live exchanges, {} malformed lines rejected", malformed.len()))
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("servobench-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut cfg = SessionConfig::default();
    cfg.controller.rate = 0.0;
    for seed in [3, 17, 42] {
        let mut files = Vec::new();
        for run in 0..2 {
            let g = random_scene(seed);
            let mut world = SimWorld::new(g.scene).unwrap();
            let r = run_session(&mut world, &g.prompt, &[ConstraintKind::PointToPoint], &OracleProvider, &cfg, 1, &mut ());
            let path = dir.join(format!("trace-{seed}-{run}.jsonl"));
            std::fs::write(&path, r.trace.to_jsonl()).map_err(|e| e.to_string())?;
            files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        ensure(!files[0].is_empty() && files[0] == files[1], || format!("seed {seed} traces differ"))?;
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok("3 seeds, byte-identical trace files".into())
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        criterion("geometry suite", Some(secs(5)), geometry),
        criterion("broyden suite", Some(secs(5)), broyden),
        criterion("linear-plant convergence", Some(secs(30)), linear_plant),
        criterion("pca orientation recovery", Some(secs(10)), pca),
        criterion("closed-loop simulation", Some(secs(300)), closed_loop),
        criterion("metric oracle equivalence", None, metrics),
        criterion("protocol bit-exactness", None, protocol),
        criterion("determinism", None, determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if passed == results.len() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
