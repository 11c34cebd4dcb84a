//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p s3bell-cli --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use s3bell::curve::AngleGrid;
use s3bell::ga::{
    composite_angle, composite_axis, composite_axis_numerator, dist_su2, geodesic_sweep, Bivector,
    Quaternion, UnitVector3, Vec3,
};
use s3bell::inequality::{
    bound_report, chsh, sawtooth_analytic, singlet_analytic, SettingsQuad, TSIRELSON,
};
use s3bell::pearle::{
    bridge_correlation, detection_fraction, sawtooth, simulate, simulate_curve, BridgeConfig,
    BridgeMode, MeasurementContext,
};
use s3bell::rng::{label_hash, splitmix64, unit_vector, Substreams};
use s3bell::singlet::{correlation, outcome_tally, WindingRule};
use s3bell::stats::{chi_square_homogeneity, proportion_stderr};
use s3bell::Sign;
use s3bell_cli::{execute, Experiment, ExperimentConfig, Format, Overrides};

const SEED: u64 = 20_240_917;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ensemble() -> BridgeConfig {
    BridgeConfig::default()
}

fn flat() -> BridgeConfig {
    BridgeConfig {
        mode: BridgeMode::Flat,
        ..BridgeConfig::default()
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_1() -> Outcome {
    let a = UnitVector3::X;
    let mut worst_limit: f64 = 0.0;
    for deg in 0..=180 {
        let eta = (deg as f64).to_radians();
        let e = correlation(a, UnitVector3::planar(eta), 10_000, SEED, true)
            .map_err(|e| e.to_string())?;
        worst_limit = worst_limit.max((e.e_hat + eta.cos()).abs());
    }
    let grid = AngleGrid::default_grid();
    let start = Instant::now();
    let curve = single_thread(|| simulate_curve(100_000, &grid, SEED, &ensemble()))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let worst_z = curve.max_z_score();
    check(
        worst_limit <= 2.0 * f64::EPSILON && worst_z <= 4.0 && elapsed < Duration::from_secs(10),
        format!(
            "limit estimator max|E + cos| = {worst_limit:.1e} on 1° grid; ensemble max z = {worst_z:.2} over {} points; 37 x 1e5 on one core in {:.2} s",
            curve.points.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let quad = SettingsQuad::canonical();
    let exact = chsh(&quad, singlet_analytic).map_err(|e| e.to_string())?;
    let mc = chsh(&quad, |a, b| {
        bridge_correlation(1_000_000, SEED, &MeasurementContext::new(a, b), &ensemble())
            .map(|(e, _)| e)
    })
    .map_err(|e| e.to_string())?;
    let d_exact = (exact.s.abs() - TSIRELSON).abs();
    let d_mc = (mc.s.abs() - TSIRELSON).abs();
    check(
        d_exact < 1e-9 && d_mc <= 4.0 * mc.stderr,
        format!(
            "analytic S = {:.12} (|dev| {d_exact:.1e}); Monte Carlo S = {:.5} +/- {:.5}",
            exact.s, mc.s, mc.stderr
        ),
    )
}

fn criterion_3() -> Outcome {
    let n = 100_000;
    let mut worst_z: f64 = 0.0;
    for &deg in AngleGrid::default_grid().degrees() {
        let eta = deg.to_radians();
        let run = simulate(n, SEED, &MeasurementContext::planar(eta), &ensemble())
            .map_err(|e| e.to_string())?;
        if run.counts.coincidences() != run.states {
            return Err(format!(
                "{deg}°: {} detected pairs for {} admitted states",
                run.counts.coincidences(),
                run.states
            ));
        }
        let t = run.table(eta).map_err(|e| e.to_string())?;
        let g = detection_fraction(&t).map_err(|e| e.to_string())?;
        for (value, se) in [g.from_pm, g.from_pp].into_iter().flatten() {
            // Branches with a tiny denominator carry no information.
            if se > 0.0 {
                worst_z = worst_z.max((value - 1.0).abs() / se);
            } else if value != 1.0 && value != 0.0 {
                return Err(format!("{deg}°: exact branch gives g = {value}"));
            }
        }
    }
    check(
        worst_z <= 4.0,
        format!("admitted = detected at all 37 angles; ratio estimators max z = {worst_z:.2}"),
    )
}

fn criterion_4() -> Outcome {
    let n = 100_000u64;
    let mut worst_z: f64 = 0.0;
    for &deg in AngleGrid::default_grid().degrees() {
        let eta = deg.to_radians();
        let t = simulate(n, SEED ^ 4, &MeasurementContext::planar(eta), &ensemble())
            .and_then(|r| r.table(eta))
            .map_err(|e| e.to_string())?;
        if [t.p_00, t.p_p0, t.p_m0, t.p_0p, t.p_0m] != [0.0; 5] {
            return Err(format!("{deg}°: non-zero zero-event probability"));
        }
        let anti = 0.5 * (eta / 2.0).cos().powi(2);
        let same = 0.5 * (eta / 2.0).sin().powi(2);
        let targets = [
            (t.p_single_plus_1, 0.5),
            (t.p_single_minus_1, 0.5),
            (t.p_single_plus_2, 0.5),
            (t.p_single_minus_2, 0.5),
            (t.p_pm, anti),
            (t.p_mp, anti),
            (t.p_pp, same),
            (t.p_mm, same),
        ];
        for (p, want) in targets {
            let se = proportion_stderr(want, n);
            if se == 0.0 {
                if p != want {
                    return Err(format!("{deg}°: {p} where exactly {want} is expected"));
                }
            } else {
                worst_z = worst_z.max((p - want).abs() / se);
            }
        }
    }
    check(
        worst_z <= 4.0,
        format!("zero-event probabilities exactly 0; singles and joints max z = {worst_z:.2}"),
    )
}

fn criterion_5() -> Outcome {
    let curve = simulate_curve(100_000, &AngleGrid::default_grid(), SEED, &flat())
        .map_err(|e| e.to_string())?;
    let shape = curve
        .points
        .iter()
        .all(|p| p.e_analytic == sawtooth(p.eta_deg.to_radians()));
    let z = curve.max_z_score();
    let quad = SettingsQuad::canonical();
    let mc = chsh(&quad, |a, b| {
        bridge_correlation(1_000_000, SEED, &MeasurementContext::new(a, b), &flat()).map(|(e, _)| e)
    })
    .map_err(|e| e.to_string())?;
    let exact = chsh(&quad, sawtooth_analytic).map_err(|e| e.to_string())?;
    check(
        shape && z <= 4.0 && mc.s.abs() <= 2.0 + 4.0 * mc.stderr,
        format!(
            "saw-tooth max z = {z:.2}; S = {:.5} +/- {:.5} (analytic {:.6})",
            mc.s, mc.stderr, exact.s
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let r = bound_report();
    let elapsed = start.elapsed();
    check(
        r.expr_single_max == 2
            && r.expr_single_min == -2
            && r.expr_four_max == 4
            && r.expr_four_min == -4
            && elapsed < Duration::from_millis(100),
        format!(
            "single-dataset extrema {}/{}, four-average extrema {}/{} in {} us",
            r.expr_single_max,
            r.expr_single_min,
            r.expr_four_max,
            r.expr_four_min,
            elapsed.as_micros()
        ),
    )
}

fn draw_quaternion(streams: &Substreams, i: u64) -> Quaternion {
    let mut rng = streams.run(i);
    let r = unit_vector(&mut rng);
    let psi = 4.0 * PI * (splitmix64(streams.run_key(i)) >> 11) as f64 / (1u64 << 53) as f64;
    Quaternion::from_axis_angle(r, psi).unwrap()
}

fn criterion_7() -> Outcome {
    let streams = Substreams::new(SEED, label_hash("acceptance/algebra"));
    let (mut closure, mut factor, mut period): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut exact_sign = true;
    let mut exact_antipode = true;
    for i in 0..10_000 {
        let p = draw_quaternion(&streams, 2 * i);
        let q = draw_quaternion(&streams, 2 * i + 1);
        closure = closure.max(((p * q).norm() - 1.0).abs());

        let mut rng = streams.child(1).run(i);
        let (a, s1, s2, b) = (
            unit_vector(&mut rng),
            unit_vector(&mut rng),
            unit_vector(&mut rng),
            unit_vector(&mut rng),
        );
        let direct = Quaternion::from_vectors(a, s1) * Quaternion::from_vectors(s2, b);
        let eta = composite_angle(a, s1, s2, b).map_err(|e| e.to_string())?;
        let axis = composite_axis(a, s1, s2, b, eta).map_err(|e| e.to_string())?;
        let composed =
            Quaternion::from_axis_angle(UnitVector3::normalize(axis).unwrap(), 2.0 * eta).unwrap();
        factor = factor.max(composed.max_abs_diff(direct));

        exact_sign &= p.spinorial_sign(1).unwrap() == -p && p.spinorial_sign(2).unwrap() == p;
        let r = unit_vector(&mut rng);
        let psi = (i as f64 / 10_000.0) * 2.0 * PI;
        let turned = Quaternion::from_axis_angle(r, psi + 2.0 * PI).unwrap();
        period = period.max(turned.max_abs_diff(-Quaternion::from_axis_angle(r, psi).unwrap()));

        let j = Bivector::spin(unit_vector(&mut rng), Sign::from_bool(i % 2 == 0));
        exact_antipode &= p.rotate_bivector(&j) == (-p).rotate_bivector(&j);
    }

    let a = UnitVector3::normalize(Vec3::new(0.3, -0.5, 0.8)).unwrap();
    let b = UnitVector3::normalize(Vec3::new(-0.6, 0.2, 0.4)).unwrap();
    let (t1, t2) = (Vec3::new(0.2, 0.9, -0.1), Vec3::new(0.7, -0.3, 0.5));
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 1..=9 {
        let eps = 10f64.powi(-k);
        let s1 = UnitVector3::normalize(a.vec() + t1.scale(eps)).unwrap();
        let s2 = UnitVector3::normalize(b.vec() + t2.scale(eps)).unwrap();
        xs.push(eps.ln());
        ys.push(composite_axis_numerator(a, s1, s2, b).norm().ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();

    check(
        closure < 1e-10 && factor < 1e-10 && exact_sign && period < 1e-12 && exact_antipode && (slope - 1.0).abs() <= 0.1,
        format!(
            "closure {closure:.1e}, factorization {factor:.1e}, spinorial sign exact: {exact_sign}, 2π period {period:.1e}, antipode exact: {exact_antipode}, axis-limit slope {slope:.4}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let pts = geodesic_sweep(UnitVector3::Z, 180);
    let worst = pts
        .iter()
        .map(|p| (p.d_so3 - p.d_su2.min(PI - p.d_su2)).abs())
        .fold(0.0, f64::max);
    let monotone = pts.windows(2).all(|w| w[1].d_su2 > w[0].d_su2);
    let ends_at_pi = (pts[180].d_su2 - PI).abs() < 1e-12;
    let peak = pts
        .iter()
        .max_by(|x, y| x.d_so3.total_cmp(&y.d_so3))
        .unwrap()
        .half_angle;
    let rise_fall = pts[..=90].windows(2).all(|w| w[1].d_so3 > w[0].d_so3)
        && pts[90..].windows(2).all(|w| w[1].d_so3 < w[0].d_so3);
    let antipode = dist_su2(Quaternion::IDENTITY, -Quaternion::IDENTITY);
    check(
        worst <= 1e-12 && monotone && ends_at_pi && (peak - PI / 2.0).abs() < 1e-12 && rise_fall,
        format!(
            "max |d_so3 - min(d_su2, π - d_su2)| = {worst:.1e}; d_su2 monotone to {:.6}; d_so3 peaks at half-angle {peak:.6}; d_su2(1, -1) = {antipode:.6}",
            pts[180].d_su2
        ),
    )
}

fn criterion_9() -> Outcome {
    let n = 100_000u64;
    let bound = 4.0 / (n as f64).sqrt();
    let a = UnitVector3::X;
    let settings = [0.0f64, 30.0, 45.0, 90.0, 135.0, 180.0];
    let mut worst_mean: f64 = 0.0;
    let mut min_p = f64::INFINITY;

    for rule in [
        WindingRule::Zero,
        WindingRule::RandomParity,
        WindingRule::AngleThreshold,
    ] {
        let mut rows = Vec::new();
        for (k, deg) in settings.iter().enumerate() {
            let b = UnitVector3::planar(deg.to_radians());
            let t =
                outcome_tally(a, b, n, SEED + k as u64, true, rule).map_err(|e| e.to_string())?;
            worst_mean = worst_mean.max(t.mean_a().abs()).max(t.mean_b().abs());
            rows.push(t.alice_counts());
        }
        min_p = min_p.min(
            chi_square_homogeneity(&rows)
                .ok_or("degenerate table")?
                .p_value,
        );
    }

    let mut rows = Vec::new();
    for deg in settings {
        let eta = deg.to_radians();
        let c = simulate(n, SEED, &MeasurementContext::planar(eta), &ensemble())
            .map_err(|e| e.to_string())?
            .counts;
        let alice = [c.cells[0][0] + c.cells[0][1], c.cells[1][0] + c.cells[1][1]];
        let bob = [c.cells[0][0] + c.cells[1][0], c.cells[0][1] + c.cells[1][1]];
        for counts in [alice, bob] {
            worst_mean = worst_mean.max((counts[0] as f64 - counts[1] as f64).abs() / n as f64);
        }
        rows.push(alice);
    }
    min_p = min_p.min(
        chi_square_homogeneity(&rows)
            .ok_or("degenerate table")?
            .p_value,
    );

    check(
        worst_mean <= bound && min_p > 0.01,
        format!("max |mean| = {worst_mean:.5} (bound {bound:.5}); smallest no-signalling p = {min_p:.3}"),
    )
}

fn criterion_10() -> Outcome {
    let cases: [(Experiment, Format, &str); 5] = [
        (Experiment::Curve, Format::Csv, "0:180:5"),
        (Experiment::Chsh, Format::Json, "0:180:5"),
        (Experiment::Probabilities, Format::Csv, "0:180:30"),
        (Experiment::FlatVsS3, Format::Json, "0:180:30"),
        (Experiment::Curve, Format::Json, "0:180:45"),
    ];
    let mut bytes = 0;
    for (experiment, format, grid) in cases {
        let run = |workers| {
            let o = Overrides {
                seed: Some(SEED),
                n: Some(50_000),
                grid: Some(grid.into()),
                format: Some(format),
                workers: Some(workers),
                ..Overrides::default()
            };
            execute(&ExperimentConfig::from_overrides(experiment, o).unwrap())
                .map(|a| a.text)
                .map_err(|e| e.to_string())
        };
        let one = run(1)?;
        for w in [4, 8] {
            if run(w)? != one {
                return Err(format!(
                    "{experiment} ({format}) differs between 1 and {w} workers"
                ));
            }
        }
        bytes += one.len();
    }
    check(
        true,
        format!("5 artifacts ({bytes} bytes) byte-identical across 1, 4 and 8 workers"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("singlet curve", criterion_1),
        ("Tsirelson saturation", criterion_2),
        ("detection fraction", criterion_3),
        ("probability block", criterion_4),
        ("flat baseline", criterion_5),
        ("bound arithmetic", criterion_6),
        ("algebra suite", criterion_7),
        ("geodesic shape", criterion_8),
        ("marginals and no-signalling", criterion_9),
        ("reproducibility", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} {:>2} {name} [{:.2} s]: {detail}",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
