use s3bell::curve::{CorrelationCurve, CurvePoint};
use s3bell::ga::{geodesic_sweep, GeodesicPoint, UnitVector3};
use s3bell::inequality::{
    bound_report, chsh, enumerate_four_average_bound, enumerate_single_average_bound, planar_scan,
    sawtooth_analytic, singlet_analytic, BoundReport, ChshResult, PlanarScan,
};
use s3bell::pearle::{
    bridge_correlation, correlation_from_probabilities, detection_fraction, sawtooth, simulate,
    simulate_curve, BridgeConfig, DetectionFraction, MeasurementContext, ProbabilityTable,
};
use s3bell::singlet;
use s3bell::{CorrelationEstimate, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::config::{Estimator, Experiment, ExperimentConfig, Format, Model, ResolvedConfig};
use crate::table::{Cell, Table};
use crate::CliError;

/// A rendered output file plus human-readable summary lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub text: String,
    pub summary: Vec<String>,
}

/// JSON layout of every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config: ResolvedConfig,
    pub result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub quad_deg: [f64; 4],
    pub evaluator: String,
    pub chsh: ChshResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedChsh {
    pub evaluator: String,
    pub chsh: ChshResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedScan {
    pub evaluator: String,
    pub step_deg: u32,
    pub scan: PlanarScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub bounds: BoundReport,
    pub single_assignments: u32,
    pub four_assignments: u32,
    pub quad_deg: [f64; 4],
    pub chsh: Vec<NamedChsh>,
    pub scans: Vec<NamedScan>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub table: ProbabilityTable,
    pub detection: DetectionFraction,
    pub e_hat: f64,
    pub states: u64,
    pub candidates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub s3: CorrelationCurve,
    pub flat: CorrelationCurve,
    pub quad_deg: [f64; 4],
    pub s3_chsh: ChshResult,
    pub flat_chsh: ChshResult,
    pub summary: Vec<String>,
}

/// Scan step used by the `bounds` report.
pub const BOUNDS_SCAN_STEP: u32 = 5;

fn numeric(e: impl Into<CoreError>) -> CliError {
    CliError::Numeric(e.into().to_string())
}

pub fn run(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    match config.experiment {
        Experiment::Curve => curve(config),
        Experiment::Chsh => chsh_experiment(config),
        Experiment::Geodesic => geodesic(config),
        Experiment::Bounds => bounds(config),
        Experiment::Probabilities => probabilities(config),
        Experiment::FlatVsS3 => compare_models(config),
    }
}

fn bridge(config: &ExperimentConfig, model: Model) -> Result<BridgeConfig, CliError> {
    BridgeConfig::new(model.bridge_mode(), config.kappa).map_err(|e| CliError::Usage(e.to_string()))
}

fn uses_limit(config: &ExperimentConfig, model: Model) -> bool {
    model == Model::S3 && config.estimator == Estimator::Limit
}

fn model_curve(config: &ExperimentConfig, model: Model) -> Result<CorrelationCurve, CliError> {
    let curve = if uses_limit(config, model) {
        let points = config
            .grid
            .degrees()
            .iter()
            .map(|&deg| {
                let b = UnitVector3::planar(deg.to_radians());
                let e = singlet::correlation(UnitVector3::X, b, config.n, config.seed, true)
                    .map_err(numeric)?;
                Ok(CurvePoint {
                    eta_deg: deg,
                    e_hat: e.e_hat,
                    e_analytic: e.e_analytic,
                    stderr: e.stderr,
                    g: 1.0,
                    n: e.n,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        CorrelationCurve { points }
    } else {
        simulate_curve(config.n, &config.grid, config.seed, &bridge(config, model)?)
            .map_err(numeric)?
    };
    curve.validate().map_err(numeric)?;
    Ok(curve)
}

fn model_chsh(config: &ExperimentConfig, model: Model) -> Result<(String, ChshResult), CliError> {
    let quad = config.quad();
    if uses_limit(config, model) {
        let r = chsh(&quad, |a, b| {
            singlet::correlation(a, b, config.n, config.seed, true)
        })
        .map_err(numeric)?;
        return Ok(("s3-limit".into(), r));
    }
    let cfg = bridge(config, model)?;
    let r = chsh(&quad, |a, b| {
        bridge_correlation(config.n, config.seed, &MeasurementContext::new(a, b), &cfg)
            .map(|(e, _)| e)
    })
    .map_err(numeric)?;
    Ok((model.to_string(), r))
}

fn with_meta(config: &ExperimentConfig, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut m = config.resolved().pairs();
    m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    m
}

/// Emit CSV or JSON. The CSV form is always built so that every number can
/// be checked for finiteness once.
fn emit<T: Serialize>(
    config: &ExperimentConfig,
    table: Table,
    result: &T,
    summary: Vec<String>,
) -> Result<Artifact, CliError> {
    let csv = table.render();
    if table
        .rows
        .iter()
        .flatten()
        .any(|c| matches!(c.as_str(), "nan" | "inf" | "-inf"))
    {
        return Err(CliError::Numeric("non-finite value in output".into()));
    }
    let text = match config.format {
        Format::Csv => csv,
        Format::Json => {
            let env = Envelope {
                config: config.resolved(),
                result,
            };
            let mut s =
                serde_json::to_string_pretty(&env).map_err(|e| CliError::Numeric(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    Ok(Artifact { text, summary })
}

fn curve_table(meta: Vec<(String, String)>, curve: &CorrelationCurve) -> Table {
    let mut t = Table::new(
        meta,
        &["eta_deg", "e_hat", "e_analytic", "stderr", "g", "n"],
    );
    for p in &curve.points {
        t.push(vec![
            Cell::Num(p.eta_deg),
            Cell::Num(p.e_hat),
            Cell::Num(p.e_analytic),
            Cell::Num(p.stderr),
            Cell::Num(p.g),
            Cell::Int(p.n),
        ]);
    }
    t
}

fn curve(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let curve = model_curve(config, config.model)?;
    let z = curve.max_z_score();
    let summary = vec![format!(
        "{}: {} points, max |e_hat - e_analytic| / stderr = {}",
        config.model,
        curve.points.len(),
        s3bell::curve::fmt_sig9(z)
    )];
    emit(
        config,
        curve_table(with_meta(config, &[]), &curve),
        &curve,
        summary,
    )
}

fn estimate_cells(term: &str, s1: f64, s2: f64, e: &CorrelationEstimate) -> Vec<Cell> {
    vec![
        Cell::Text(term.into()),
        Cell::Num(s1),
        Cell::Num(s2),
        Cell::Num(e.e_hat),
        Cell::Num(e.e_analytic),
        Cell::Num(e.stderr),
        Cell::Int(e.n),
    ]
}

const CHSH_HEADER: [&str; 7] = [
    "term",
    "setting_1_deg",
    "setting_2_deg",
    "e_hat",
    "e_analytic",
    "stderr",
    "n",
];

fn chsh_summary(label: &str, r: &ChshResult) -> String {
    format!(
        "{label}: S = {} +/- {} (analytic {}), regime {}",
        s3bell::curve::fmt_sig9(r.s),
        s3bell::curve::fmt_sig9(r.stderr),
        s3bell::curve::fmt_sig9(r.s_analytic),
        r.regime.describe()
    )
}

fn chsh_experiment(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let (evaluator, r) = model_chsh(config, config.model)?;
    let [a, ap, b, bp] = config.quad_deg;
    let regime = serde_json::to_value(r.regime)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let mut t = Table::new(
        with_meta(
            config,
            &[("evaluator", evaluator.clone()), ("regime", regime)],
        ),
        &CHSH_HEADER,
    );
    t.push(estimate_cells("ab", a, b, &r.e_ab));
    t.push(estimate_cells("ab'", a, bp, &r.e_abp));
    t.push(estimate_cells("a'b", ap, b, &r.e_apb));
    t.push(estimate_cells("a'b'", ap, bp, &r.e_apbp));
    let n = r.e_ab.n + r.e_abp.n + r.e_apb.n + r.e_apbp.n;
    t.push(vec![
        Cell::Text("S".into()),
        Cell::Text(String::new()),
        Cell::Text(String::new()),
        Cell::Num(r.s),
        Cell::Num(r.s_analytic),
        Cell::Num(r.stderr),
        Cell::Int(n),
    ]);
    let summary = vec![chsh_summary(&evaluator, &r)];
    let report = ChshReport {
        quad_deg: config.quad_deg,
        evaluator,
        chsh: r,
    };
    emit(config, t, &report, summary)
}

fn geodesic(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pts: Vec<GeodesicPoint> = geodesic_sweep(UnitVector3::Z, config.steps);
    let mut t = Table::new(
        with_meta(config, &[]),
        &["half_angle", "rotation_angle", "d_su2", "d_so3"],
    );
    for p in &pts {
        t.push(vec![
            Cell::Num(p.half_angle),
            Cell::Num(p.rotation_angle),
            Cell::Num(p.d_su2),
            Cell::Num(p.d_so3),
        ]);
    }
    let peak = pts
        .iter()
        .max_by(|x, y| x.d_so3.total_cmp(&y.d_so3))
        .map(|p| p.half_angle)
        .unwrap_or(0.0);
    let summary = vec![format!(
        "d_so3 peaks at half-angle {}",
        s3bell::curve::fmt_sig9(peak)
    )];
    emit(config, t, &pts, summary)
}

fn bounds(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let report = bound_report();
    let quad = config.quad();
    let chsh_rows = vec![
        NamedChsh {
            evaluator: "singlet".into(),
            chsh: chsh(&quad, singlet_analytic).map_err(numeric)?,
        },
        NamedChsh {
            evaluator: "sawtooth".into(),
            chsh: chsh(&quad, sawtooth_analytic).map_err(numeric)?,
        },
    ];
    let scans = vec![
        NamedScan {
            evaluator: "singlet".into(),
            step_deg: BOUNDS_SCAN_STEP,
            scan: planar_scan(BOUNDS_SCAN_STEP, |eta| -eta.cos()).map_err(numeric)?,
        },
        NamedScan {
            evaluator: "sawtooth".into(),
            step_deg: BOUNDS_SCAN_STEP,
            scan: planar_scan(BOUNDS_SCAN_STEP, sawtooth).map_err(numeric)?,
        },
    ];
    let result = BoundsResult {
        bounds: report,
        single_assignments: enumerate_single_average_bound().assignments,
        four_assignments: enumerate_four_average_bound().assignments,
        quad_deg: config.quad_deg,
        chsh: chsh_rows,
        scans,
    };
    let mut t = Table::new(with_meta(config, &[]), &["quantity", "value"]);
    let int = |k: i32| Cell::Num(k as f64);
    t.push(vec![
        Cell::Text("expr_single_max".into()),
        int(report.expr_single_max),
    ]);
    t.push(vec![
        Cell::Text("expr_single_min".into()),
        int(report.expr_single_min),
    ]);
    t.push(vec![
        Cell::Text("expr_four_max".into()),
        int(report.expr_four_max),
    ]);
    t.push(vec![
        Cell::Text("expr_four_min".into()),
        int(report.expr_four_min),
    ]);
    for c in &result.chsh {
        t.push(vec![
            Cell::Text(format!("chsh_{}", c.evaluator)),
            Cell::Num(c.chsh.s),
        ]);
    }
    for s in &result.scans {
        t.push(vec![
            Cell::Text(format!("scan_max_abs_s_{}", s.evaluator)),
            Cell::Num(s.scan.max_abs_s),
        ]);
    }
    let summary = vec![format!(
        "single-dataset expression bounded by {}, four separate averages by {}",
        report.expr_single_max, report.expr_four_max
    )];
    emit(config, t, &result, summary)
}

const PROBABILITY_HEADER: [&str; 20] = [
    "eta_deg",
    "n",
    "candidates",
    "p_pp",
    "p_mm",
    "p_pm",
    "p_mp",
    "p_single_plus_1",
    "p_single_minus_1",
    "p_single_plus_2",
    "p_single_minus_2",
    "p_00",
    "p_p0",
    "p_m0",
    "p_0p",
    "p_0m",
    "g",
    "g_ratio",
    "g_ratio_stderr",
    "e_hat",
];

fn probabilities(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let cfg = bridge(config, config.model)?;
    let mut rows = Vec::new();
    for &deg in config.grid.degrees() {
        let eta = deg.to_radians();
        let run = simulate(
            config.n,
            config.seed,
            &MeasurementContext::planar(eta),
            &cfg,
        )
        .map_err(numeric)?;
        let table = run.table(eta).map_err(numeric)?;
        let detection = detection_fraction(&table).map_err(numeric)?;
        let e_hat = correlation_from_probabilities(&table).map_err(numeric)?;
        rows.push(ProbabilityRow {
            table,
            detection,
            e_hat,
            states: run.states,
            candidates: run.candidates,
        });
    }
    let mut t = Table::new(with_meta(config, &[]), &PROBABILITY_HEADER);
    for (deg, r) in config.grid.degrees().iter().zip(&rows) {
        let p = &r.table;
        let mut cells = vec![Cell::Num(*deg), Cell::Int(p.n), Cell::Int(r.candidates)];
        cells.extend(
            [
                p.p_pp,
                p.p_mm,
                p.p_pm,
                p.p_mp,
                p.p_single_plus_1,
                p.p_single_minus_1,
                p.p_single_plus_2,
                p.p_single_minus_2,
                p.p_00,
                p.p_p0,
                p.p_m0,
                p.p_0p,
                p.p_0m,
                p.g,
                r.detection.g,
                r.detection.stderr,
                r.e_hat,
            ]
            .map(Cell::Num),
        );
        t.push(cells);
    }
    let min_g = rows.iter().map(|r| r.table.g).fold(f64::INFINITY, f64::min);
    let summary = vec![format!(
        "{}: smallest coincidence fraction g = {}",
        config.model,
        s3bell::curve::fmt_sig9(min_g)
    )];
    emit(config, t, &rows, summary)
}

/// Both curves on one grid, and `S` for each model at the configured quad.
pub fn compare_models(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let s3 = model_curve(config, Model::S3)?;
    let flat = model_curve(config, Model::Flat)?;
    let (s3_label, s3_chsh) = model_chsh(config, Model::S3)?;
    let (flat_label, flat_chsh) = model_chsh(config, Model::Flat)?;
    let summary = vec![
        chsh_summary(&s3_label, &s3_chsh),
        chsh_summary(&flat_label, &flat_chsh),
    ];
    let f = s3bell::curve::fmt_sig9;
    let meta = with_meta(
        config,
        &[
            ("s3_S", f(s3_chsh.s)),
            ("s3_S_stderr", f(s3_chsh.stderr)),
            ("s3_regime", s3_chsh.regime.describe().to_string()),
            ("flat_S", f(flat_chsh.s)),
            ("flat_S_stderr", f(flat_chsh.stderr)),
            ("flat_regime", flat_chsh.regime.describe().to_string()),
        ],
    );
    let mut t = Table::new(
        meta,
        &[
            "eta_deg",
            "s3_e_hat",
            "s3_e_analytic",
            "s3_stderr",
            "flat_e_hat",
            "flat_e_analytic",
            "flat_stderr",
        ],
    );
    for (p, q) in s3.points.iter().zip(&flat.points) {
        t.push(vec![
            Cell::Num(p.eta_deg),
            Cell::Num(p.e_hat),
            Cell::Num(p.e_analytic),
            Cell::Num(p.stderr),
            Cell::Num(q.e_hat),
            Cell::Num(q.e_analytic),
            Cell::Num(q.stderr),
        ]);
    }
    let result = Comparison {
        s3,
        flat,
        quad_deg: config.quad_deg,
        s3_chsh,
        flat_chsh,
        summary: summary.clone(),
    };
    emit(config, t, &result, summary)
}
