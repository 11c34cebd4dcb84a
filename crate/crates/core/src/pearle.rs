//! State-space bridge between Pearle's SO(3) ball and the S³ model.
//!
//! An initial state is a pair `(e_o, s_o)`. The angle `η_zs` between ẑ and
//! `s_o` fixes a threshold `f(η_zs) = cos(πr/2)`, where `r` is Pearle's
//! radial coordinate. Three ensembles are built from the same candidate
//! stream:
//!
//! * **S³ ensemble.** Only states with `|cos η_{n e_o}| ≥ f(η_zs)` for both
//!   realized settings exist. They are selected before measurement, and every
//!   one of them is detected: `g(η) = 1` as an equality of counts.
//! * **Pearle rejection** (contrast baseline, non-normative). Every candidate
//!   is emitted and a station fails to register when its `|cos|` is below
//!   threshold, so `g(η) < 1`.
//! * **Flat.** `f ≡ 0`: no threshold at all. The sign model in ℝ³ gives the
//!   saw-tooth `-1 + 2η/π`.
//!
//! Outcomes are `A = λ sign(a·e_o)` and `B = -λ sign(b·e_o)`.
//!
//! Candidates draw `e_o` uniform on S², `η_zs` uniform on `[0, κπ)`, the
//! azimuth of `s_o` uniform, and a fair coin `λ`. With this density the
//! S³ ensemble reproduces `-cos η` (checked against Monte Carlo and
//! quadrature oracles in the test suite).

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{AngleGrid, CorrelationCurve, CurvePoint};
use crate::ga::UnitVector3;
use crate::rng::{self, label_hash, splitmix64, Substreams};
use crate::sign::Sign;
use crate::stats::{binary_mean_stderr, proportion_stderr, CorrelationEstimate};

/// Denominators below this are treated as zero.
pub const TINY_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PearleError {
    #[error("winding index κ must be a positive integer")]
    InvalidKappa,
    #[error("angle {eta} outside the domain [0, {max}]")]
    OutOfDomain { eta: f64, max: f64 },
    #[error("ensemble must contain at least one state")]
    EmptyEnsemble,
    #[error("no admissible state after {cap} candidates (state index {index})")]
    SamplingCap { cap: u64, index: u64 },
    #[error("both branches of the detection-fraction ratio are ill-conditioned at η = {eta}")]
    UndefinedRatio { eta: f64 },
    #[error("no coincidences to form a correlation from")]
    ZeroDenominator,
    #[error("unknown model `{0}` (expected s3, pearle-reject, or flat)")]
    UnknownMode(String),
}

/// `f(η) = -1 + 2 / √(1 + 3η/(κπ))` on `[0, κπ]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PearleMapping {
    kappa: u32,
}

impl PearleMapping {
    pub fn new(kappa: u32) -> Result<Self, PearleError> {
        if kappa == 0 {
            return Err(PearleError::InvalidKappa);
        }
        Ok(PearleMapping { kappa })
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Upper end of the domain, `κπ`.
    pub fn domain_max(&self) -> f64 {
        self.kappa as f64 * PI
    }

    fn fraction(&self, eta: f64) -> Result<f64, PearleError> {
        let max = self.domain_max();
        if !eta.is_finite() || !(0.0..=max).contains(&eta) {
            return Err(PearleError::OutOfDomain { eta, max });
        }
        Ok(eta / max)
    }

    pub fn f(&self, eta: f64) -> Result<f64, PearleError> {
        let t = self.fraction(eta)?;
        Ok(-1.0 + 2.0 / (1.0 + 3.0 * t).sqrt())
    }

    /// `-1 + 2 / √(4 - 3η/(κπ))`, which equals `f(κπ - η)`.
    pub fn f_complement(&self, eta: f64) -> Result<f64, PearleError> {
        let t = self.fraction(eta)?;
        Ok(-1.0 + 2.0 / (4.0 - 3.0 * t).sqrt())
    }

    /// Pearle's radial coordinate `r ∈ [0, 1]` with `cos(πr/2) = f(η)`.
    pub fn radial_coordinate(&self, eta: f64) -> Result<f64, PearleError> {
        Ok(2.0 / PI * self.f(eta)?.clamp(-1.0, 1.0).acos())
    }
}

impl Default for PearleMapping {
    fn default() -> Self {
        PearleMapping { kappa: 1 }
    }
}

pub fn pearle_f(eta: f64, kappa: u32) -> Result<f64, PearleError> {
    PearleMapping::new(kappa)?.f(eta)
}

pub fn pearle_f_complement(eta: f64, kappa: u32) -> Result<f64, PearleError> {
    PearleMapping::new(kappa)?.f_complement(eta)
}

/// Saw-tooth correlation of the flat sign model, `-1 + 2η/π`.
pub fn sawtooth(eta: f64) -> f64 {
    -1.0 + 2.0 * eta / PI
}

/// Which ensemble a simulation realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeMode {
    #[serde(rename = "s3")]
    S3Ensemble,
    PearleReject,
    Flat,
}

impl BridgeMode {
    pub fn name(self) -> &'static str {
        match self {
            BridgeMode::S3Ensemble => "s3",
            BridgeMode::PearleReject => "pearle-reject",
            BridgeMode::Flat => "flat",
        }
    }

    /// Reference correlation at setting angle `eta`.
    pub fn analytic(self, eta: f64) -> f64 {
        match self {
            BridgeMode::S3Ensemble | BridgeMode::PearleReject => -eta.cos(),
            BridgeMode::Flat => sawtooth(eta),
        }
    }
}

impl FromStr for BridgeMode {
    type Err = PearleError;
    fn from_str(s: &str) -> Result<Self, PearleError> {
        match s {
            "s3" => Ok(BridgeMode::S3Ensemble),
            "pearle-reject" => Ok(BridgeMode::PearleReject),
            "flat" => Ok(BridgeMode::Flat),
            other => Err(PearleError::UnknownMode(other.to_string())),
        }
    }
}

/// The pair of settings a run is measured with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementContext {
    pub a: UnitVector3,
    pub b: UnitVector3,
}

impl MeasurementContext {
    pub fn new(a: UnitVector3, b: UnitVector3) -> Self {
        MeasurementContext { a, b }
    }

    /// `a = x̂`, `b` at angle `eta` from it in the xy-plane.
    pub fn planar(eta: f64) -> Self {
        MeasurementContext {
            a: UnitVector3::X,
            b: UnitVector3::planar(eta),
        }
    }

    pub fn angle(&self) -> f64 {
        self.a.angle_to(self.b)
    }

    fn stream_tag(&self) -> u64 {
        let (a, b) = (self.a.vec(), self.b.vec());
        [a.x, a.y, a.z, b.x, b.y, b.z]
            .iter()
            .fold(0u64, |h, x| splitmix64(h ^ x.to_bits()))
    }
}

/// Initial state `(e_o, s_o)` with its coin `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub e_o: UnitVector3,
    pub s_o: UnitVector3,
    /// Rotation angle of `s_o` from ẑ, in `[0, κπ)`. For `κ = 1` this is the
    /// angle between ẑ and `s_o`.
    pub eta_z_so: f64,
    pub lambda: Sign,
}

impl InitialState {
    /// Draw one candidate state.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, mapping: &PearleMapping) -> Self {
        let e_o = rng::unit_vector(rng);
        let eta_z_so = rng.random::<f64>() * mapping.domain_max();
        let phi = rng.random::<f64>() * 2.0 * PI;
        let lambda = rng::fair_sign(rng);
        InitialState {
            e_o,
            s_o: UnitVector3::spherical(eta_z_so, phi),
            eta_z_so,
            lambda,
        }
    }

    /// `f(η_zs)`, or 0 in flat mode.
    pub fn threshold(&self, mapping: &PearleMapping, mode: BridgeMode) -> f64 {
        match mode {
            BridgeMode::Flat => 0.0,
            _ => mapping
                .f(self.eta_z_so.min(mapping.domain_max()))
                .unwrap_or(0.0),
        }
    }

    /// `|cos η_{n e_o}| ≥ threshold`.
    pub fn admits(&self, n: UnitVector3, threshold: f64) -> bool {
        n.dot(self.e_o).abs() >= threshold
    }

    pub fn alice_outcome(&self, a: UnitVector3) -> Sign {
        self.lambda * Sign::of(a.dot(self.e_o))
    }

    pub fn bob_outcome(&self, b: UnitVector3) -> Sign {
        -(self.lambda * Sign::of(b.dot(self.e_o)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub mode: BridgeMode,
    pub mapping: PearleMapping,
    /// Candidates allowed per admitted state before giving up.
    pub max_candidates: u64,
}

impl BridgeConfig {
    pub fn new(mode: BridgeMode, kappa: u32) -> Result<Self, PearleError> {
        Ok(BridgeConfig {
            mode,
            mapping: PearleMapping::new(kappa)?,
            ..Self::default()
        })
    }
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            mode: BridgeMode::S3Ensemble,
            mapping: PearleMapping::default(),
            max_candidates: 1_000_000,
        }
    }
}

/// An ensemble of states plus the number of candidates drawn to build it.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub states: Vec<InitialState>,
    pub candidates: u64,
}

fn streams_for(seed: u64, ctx: &MeasurementContext, cfg: &BridgeConfig) -> Substreams {
    Substreams::new(seed, label_hash("pearle/ensemble"))
        .child(label_hash(cfg.mode.name()))
        .child(ctx.stream_tag())
}

/// State `index` of the ensemble and the candidates it took.
fn state_at(
    streams: &Substreams,
    index: u64,
    ctx: &MeasurementContext,
    cfg: &BridgeConfig,
) -> Result<(InitialState, u64), PearleError> {
    let mut rng = streams.run(index);
    match cfg.mode {
        BridgeMode::PearleReject | BridgeMode::Flat => {
            Ok((InitialState::draw(&mut rng, &cfg.mapping), 1))
        }
        BridgeMode::S3Ensemble => {
            for drawn in 1..=cfg.max_candidates {
                let s = InitialState::draw(&mut rng, &cfg.mapping);
                let f = s.threshold(&cfg.mapping, cfg.mode);
                if s.admits(ctx.a, f) && s.admits(ctx.b, f) {
                    return Ok((s, drawn));
                }
            }
            Err(PearleError::SamplingCap {
                cap: cfg.max_candidates,
                index,
            })
        }
    }
}

/// Draw `n` states for the realized settings in `ctx`.
///
/// In S³ mode only admissible states enter the ensemble; in the other modes
/// every candidate does.
pub fn ensemble_sample(
    n: u64,
    seed: u64,
    ctx: &MeasurementContext,
    cfg: &BridgeConfig,
) -> Result<Ensemble, PearleError> {
    if n == 0 {
        return Err(PearleError::EmptyEnsemble);
    }
    let streams = streams_for(seed, ctx, cfg);
    rng::try_chunked_fold(
        n,
        Ensemble {
            states: Vec::with_capacity(n as usize),
            candidates: 0,
        },
        |r| {
            let mut part = Ensemble {
                states: Vec::with_capacity(r.end as usize - r.start as usize),
                candidates: 0,
            };
            for i in r {
                let (s, drawn) = state_at(&streams, i, ctx, cfg)?;
                part.states.push(s);
                part.candidates += drawn;
            }
            Ok(part)
        },
        |mut acc, mut part| {
            acc.states.append(&mut part.states);
            acc.candidates += part.candidates;
            acc
        },
    )
}

/// Outcomes registered at the two stations; `None` is a non-detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub a: Option<Sign>,
    pub b: Option<Sign>,
}

/// Measure one state. Only the rejection mode ever fails to register.
pub fn detect(
    state: &InitialState,
    ctx: &MeasurementContext,
    cfg: &BridgeConfig,
) -> DetectionRecord {
    let (a, b) = (state.alice_outcome(ctx.a), state.bob_outcome(ctx.b));
    match cfg.mode {
        BridgeMode::S3Ensemble | BridgeMode::Flat => DetectionRecord {
            a: Some(a),
            b: Some(b),
        },
        BridgeMode::PearleReject => {
            let f = state.threshold(&cfg.mapping, cfg.mode);
            DetectionRecord {
                a: state.admits(ctx.a, f).then_some(a),
                b: state.admits(ctx.b, f).then_some(b),
            }
        }
    }
}

/// Counts over the nine `(A, B)` cells, each in `{+, -, 0}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbabilityCounts {
    /// `cells[i][j]` with index 0 = `+`, 1 = `-`, 2 = no detection.
    pub cells: [[u64; 3]; 3],
}

fn cell(o: Option<Sign>) -> usize {
    match o {
        Some(Sign::Plus) => 0,
        Some(Sign::Minus) => 1,
        None => 2,
    }
}

impl ProbabilityCounts {
    pub fn record(&mut self, r: DetectionRecord) {
        self.cells[cell(r.a)][cell(r.b)] += 1;
    }

    pub fn merge(mut self, o: ProbabilityCounts) -> Self {
        for i in 0..3 {
            for j in 0..3 {
                self.cells[i][j] += o.cells[i][j];
            }
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    /// Pairs where both stations registered an outcome.
    pub fn coincidences(&self) -> u64 {
        self.cells[0][0] + self.cells[0][1] + self.cells[1][0] + self.cells[1][1]
    }
}

/// Empirical joint and single probabilities at one setting angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub eta: f64,
    pub n: u64,
    pub p_pp: f64,
    pub p_mm: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_single_plus_1: f64,
    pub p_single_minus_1: f64,
    pub p_single_plus_2: f64,
    pub p_single_minus_2: f64,
    pub p_00: f64,
    pub p_p0: f64,
    pub p_m0: f64,
    pub p_0p: f64,
    pub p_0m: f64,
    /// Fraction of pairs with both particles detected.
    pub g: f64,
}

impl ProbabilityTable {
    pub fn from_counts(eta: f64, counts: &ProbabilityCounts) -> Result<Self, PearleError> {
        let n = counts.total();
        if n == 0 {
            return Err(PearleError::EmptyEnsemble);
        }
        let c = &counts.cells;
        let p = |k: u64| k as f64 / n as f64;
        Ok(ProbabilityTable {
            eta,
            n,
            p_pp: p(c[0][0]),
            p_mm: p(c[1][1]),
            p_pm: p(c[0][1]),
            p_mp: p(c[1][0]),
            p_single_plus_1: p(c[0][0] + c[0][1] + c[0][2]),
            p_single_minus_1: p(c[1][0] + c[1][1] + c[1][2]),
            p_single_plus_2: p(c[0][0] + c[1][0] + c[2][0]),
            p_single_minus_2: p(c[0][1] + c[1][1] + c[2][1]),
            p_00: p(c[2][2]),
            p_p0: p(c[0][2]),
            p_m0: p(c[1][2]),
            p_0p: p(c[2][0]),
            p_0m: p(c[2][1]),
            g: p(counts.coincidences()),
        })
    }

    /// Sum of all nine cell probabilities.
    pub fn total_probability(&self) -> f64 {
        self.p_pp
            + self.p_mm
            + self.p_pm
            + self.p_mp
            + self.p_00
            + self.p_p0
            + self.p_m0
            + self.p_0p
            + self.p_0m
    }
}

/// Table from a stream of detection records.
pub fn probabilities<I>(eta: f64, records: I) -> Result<ProbabilityTable, PearleError>
where
    I: IntoIterator<Item = DetectionRecord>,
{
    let mut counts = ProbabilityCounts::default();
    for r in records {
        counts.record(r);
    }
    ProbabilityTable::from_counts(eta, &counts)
}

/// `P₀₀(η) = 1 + g(η) - 2g(0)`.
pub fn pearle_p00(g_eta: f64, g_zero: f64) -> f64 {
    1.0 + g_eta - 2.0 * g_zero
}

/// Ratio estimates of the detection fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionFraction {
    /// The well-conditioned estimate.
    pub g: f64,
    pub stderr: f64,
    /// `P₁₂^{+-} / (½cos²(η/2))` and its standard error.
    pub from_pm: Option<(f64, f64)>,
    /// `P₁₂^{++} / (½sin²(η/2))` and its standard error.
    pub from_pp: Option<(f64, f64)>,
}

/// `g(η) = P₁₂^{+-}/(½cos²(η/2)) = P₁₂^{++}/(½sin²(η/2))`.
///
/// A branch whose denominator is below 1e-12 is skipped. The reported `g`
/// comes from the branch with the larger denominator.
pub fn detection_fraction(table: &ProbabilityTable) -> Result<DetectionFraction, PearleError> {
    let half = table.eta / 2.0;
    let branch = |p: f64, denom: f64| {
        (denom >= TINY_DENOMINATOR).then(|| (p / denom, proportion_stderr(p, table.n) / denom))
    };
    let d_pm = 0.5 * half.cos().powi(2);
    let d_pp = 0.5 * half.sin().powi(2);
    let from_pm = branch(table.p_pm, d_pm);
    let from_pp = branch(table.p_pp, d_pp);
    let best = if d_pm >= d_pp {
        from_pm.or(from_pp)
    } else {
        from_pp.or(from_pm)
    };
    let (g, stderr) = best.ok_or(PearleError::UndefinedRatio { eta: table.eta })?;
    Ok(DetectionFraction {
        g,
        stderr,
        from_pm,
        from_pp,
    })
}

/// `(P⁺⁺ + P⁻⁻ - P⁺⁻ - P⁻⁺) / (P⁺⁺ + P⁻⁻ + P⁺⁻ + P⁻⁺)`.
pub fn correlation_from_probabilities(table: &ProbabilityTable) -> Result<f64, PearleError> {
    let total = table.p_pp + table.p_mm + table.p_pm + table.p_mp;
    if total <= 0.0 {
        return Err(PearleError::ZeroDenominator);
    }
    Ok((table.p_pp + table.p_mm - table.p_pm - table.p_mp) / total)
}

/// Counts from one simulated setting pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeRun {
    pub counts: ProbabilityCounts,
    /// States in the ensemble (emitted pairs in rejection mode).
    pub states: u64,
    /// Candidates drawn to build the ensemble.
    pub candidates: u64,
}

impl BridgeRun {
    pub fn table(&self, eta: f64) -> Result<ProbabilityTable, PearleError> {
        ProbabilityTable::from_counts(eta, &self.counts)
    }
}

/// Simulate `n` states at `ctx` and tally the outcomes without storing them.
pub fn simulate(
    n: u64,
    seed: u64,
    ctx: &MeasurementContext,
    cfg: &BridgeConfig,
) -> Result<BridgeRun, PearleError> {
    if n == 0 {
        return Err(PearleError::EmptyEnsemble);
    }
    let streams = streams_for(seed, ctx, cfg);
    let (counts, candidates) = rng::try_chunked_fold(
        n,
        (ProbabilityCounts::default(), 0u64),
        |r| {
            let mut counts = ProbabilityCounts::default();
            let mut candidates = 0;
            for i in r {
                let (s, drawn) = state_at(&streams, i, ctx, cfg)?;
                counts.record(detect(&s, ctx, cfg));
                candidates += drawn;
            }
            Ok((counts, candidates))
        },
        |(c1, k1), (c2, k2)| (c1.merge(c2), k1 + k2),
    )?;
    Ok(BridgeRun {
        counts,
        states: n,
        candidates,
    })
}

/// Correlation of the coincident outcomes at `ctx`, with the full run.
pub fn bridge_correlation(
    n: u64,
    seed: u64,
    ctx: &MeasurementContext,
    cfg: &BridgeConfig,
) -> Result<(CorrelationEstimate, BridgeRun), PearleError> {
    let run = simulate(n, seed, ctx, cfg)?;
    let eta = ctx.angle();
    let table = run.table(eta)?;
    let e_hat = correlation_from_probabilities(&table)?;
    let estimate = CorrelationEstimate {
        e_hat,
        stderr: binary_mean_stderr(e_hat, run.counts.coincidences()),
        n: run.counts.coincidences(),
        e_analytic: cfg.mode.analytic(eta),
    };
    Ok((estimate, run))
}

/// Correlation curve over `grid` (degrees), with `a = x̂` and `b` in the
/// xy-plane.
pub fn simulate_curve(
    n_per_angle: u64,
    grid: &AngleGrid,
    seed: u64,
    cfg: &BridgeConfig,
) -> Result<CorrelationCurve, PearleError> {
    let points = grid
        .degrees()
        .iter()
        .map(|&deg| {
            let ctx = MeasurementContext::planar(deg.to_radians());
            let (est, run) = bridge_correlation(n_per_angle, seed, &ctx, cfg)?;
            Ok(CurvePoint {
                eta_deg: deg,
                e_hat: est.e_hat,
                e_analytic: est.e_analytic,
                stderr: est.stderr,
                g: run.counts.coincidences() as f64 / run.states as f64,
                n: run.states,
            })
        })
        .collect::<Result<Vec<_>, PearleError>>()?;
    Ok(CorrelationCurve { points })
}

/// Flat-space (`f ≡ 0`) sign-model curve.
pub fn flat_mode_curve(
    n_per_angle: u64,
    grid: &AngleGrid,
    seed: u64,
) -> Result<CorrelationCurve, PearleError> {
    let cfg = BridgeConfig {
        mode: BridgeMode::Flat,
        ..BridgeConfig::default()
    };
    simulate_curve(n_per_angle, grid, seed, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_endpoints_and_third() {
        assert_eq!(pearle_f(0.0, 1).unwrap(), 1.0);
        assert_eq!(pearle_f(PI, 1).unwrap(), 0.0);
        assert!((pearle_f(PI / 3.0, 1).unwrap() - (-1.0 + 2.0 / 2f64.sqrt())).abs() < 1e-15);
        assert!((pearle_f(PI / 3.0, 1).unwrap() - 0.41421356).abs() < 1e-8);
        assert_eq!(pearle_f(3.0 * PI, 3).unwrap(), 0.0);
    }

    #[test]
    fn complement_endpoints_and_midpoint() {
        assert_eq!(pearle_f_complement(0.0, 1).unwrap(), 0.0);
        assert_eq!(pearle_f_complement(PI, 1).unwrap(), 1.0);
        let mid = -1.0 + 2.0 / 2.5f64.sqrt();
        assert!((pearle_f_complement(PI / 2.0, 1).unwrap() - mid).abs() < 1e-15);
        assert!((pearle_f(PI / 2.0, 1).unwrap() - mid).abs() < 1e-15);
    }

    #[test]
    fn domain_and_kappa_errors() {
        assert!(matches!(
            pearle_f(-0.1, 1),
            Err(PearleError::OutOfDomain { .. })
        ));
        assert!(matches!(
            pearle_f(PI + 0.1, 1),
            Err(PearleError::OutOfDomain { .. })
        ));
        assert!(pearle_f(PI + 0.1, 2).is_ok());
        assert_eq!(pearle_f(1.0, 0), Err(PearleError::InvalidKappa));
    }

    #[test]
    fn radial_coordinate_endpoints() {
        let m = PearleMapping::default();
        assert_eq!(m.radial_coordinate(0.0).unwrap(), 0.0);
        assert!((m.radial_coordinate(PI).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_threshold_admits_only_aligned_states() {
        let m = PearleMapping::default();
        let s = InitialState {
            e_o: UnitVector3::X,
            s_o: UnitVector3::Z,
            eta_z_so: 0.0,
            lambda: Sign::Plus,
        };
        let f = s.threshold(&m, BridgeMode::S3Ensemble);
        assert_eq!(f, 1.0);
        assert!(s.admits(UnitVector3::X, f));
        assert!(s.admits(-UnitVector3::X, f));
        assert!(!s.admits(UnitVector3::planar(1e-6), f));
        assert!(s.admits(UnitVector3::planar(1e-6), s.threshold(&m, BridgeMode::Flat)));
    }

    #[test]
    fn sampling_cap_is_reported() {
        let cfg = BridgeConfig {
            max_candidates: 1,
            ..BridgeConfig::default()
        };
        let ctx = MeasurementContext::planar(PI / 2.0);
        assert!(matches!(
            ensemble_sample(1000, 1, &ctx, &cfg),
            Err(PearleError::SamplingCap { cap: 1, .. })
        ));
    }

    #[test]
    fn admitted_states_are_always_detected() {
        let cfg = BridgeConfig::default();
        let ctx = MeasurementContext::planar(1.0);
        let ens = ensemble_sample(2000, 7, &ctx, &cfg).unwrap();
        assert_eq!(ens.states.len(), 2000);
        assert!(ens.candidates >= 2000);
        for s in &ens.states {
            let r = detect(s, &ctx, &cfg);
            assert!(r.a.is_some() && r.b.is_some());
            let f = s.threshold(&cfg.mapping, cfg.mode);
            assert!(s.admits(ctx.a, f) && s.admits(ctx.b, f));
        }
    }

    #[test]
    fn tables_from_hand_built_records() {
        let rec = |a, b| DetectionRecord { a, b };
        let p = Some(Sign::Plus);
        let m = Some(Sign::Minus);
        let t = probabilities(0.0, [rec(p, m), rec(m, p)]).unwrap();
        assert_eq!((t.p_pm, t.p_mp, t.p_pp, t.p_mm), (0.5, 0.5, 0.0, 0.0));
        assert_eq!(correlation_from_probabilities(&t).unwrap(), -1.0);
        assert_eq!(detection_fraction(&t).unwrap().g, 1.0);
        assert!(detection_fraction(&t).unwrap().from_pp.is_none());

        let t = probabilities(PI / 2.0, [rec(p, p), rec(p, m), rec(m, p), rec(m, m)]).unwrap();
        assert_eq!(correlation_from_probabilities(&t).unwrap(), 0.0);
        let g = detection_fraction(&t).unwrap();
        assert!((g.g - 1.0).abs() < 1e-15);

        let t = probabilities(1.0, [rec(None, None), rec(None, p)]).unwrap();
        assert_eq!(
            correlation_from_probabilities(&t),
            Err(PearleError::ZeroDenominator)
        );
        assert_eq!(t.g, 0.0);
        assert!(matches!(
            probabilities(1.0, []),
            Err(PearleError::EmptyEnsemble)
        ));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            BridgeMode::S3Ensemble,
            BridgeMode::PearleReject,
            BridgeMode::Flat,
        ] {
            assert_eq!(m.name().parse::<BridgeMode>().unwrap(), m);
        }
        assert!("euclid".parse::<BridgeMode>().is_err());
    }
}
