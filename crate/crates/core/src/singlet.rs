//! Measurement functions, limit-of-product joint value, and correlation
//! estimator of the S³ singlet model.
//!
//! Alice's result is the limiting scalar point of `+λ q(η_as₁, r₁)` as
//! `s₁ → a`; Bob's is that of `-λ q(η_s₂b, r₂)` as `s₂ → b`. Each outcome is
//! a function of one setting and the hidden variable only. The joint value is
//! the limiting scalar point of the product quaternion, which is `-a·b` when
//! the source conserves spin (`s₁ = s₂`) and `-1` otherwise.
//!
//! Outcomes are evaluated at the limit itself. The pre-limit quaternion is
//! available at any caller-chosen angle for inspection.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ga::{Quaternion, UnitVector3};
use crate::rng::{self, label_hash, splitmix64, Substreams};
use crate::sign::Sign;
use crate::stats::{binary_mean_stderr, CorrelationEstimate, MeanAccumulator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingletError {
    #[error("ensemble must contain at least one run")]
    EmptyEnsemble,
    #[error("detector-spin angle {eta} must be finite and non-negative")]
    InvalidAngle { eta: f64 },
    #[error(
        "setting is parallel to the spin axis, so the rotation axis is undefined at η = {eta}"
    )]
    UndefinedAxis { eta: f64 },
    #[error("unknown winding rule `{0}` (expected zero, random-parity, or angle-threshold)")]
    UnknownWindingRule(String),
}

/// Hidden variable of one run: the coin `λ` and the two spin axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariable {
    pub lambda: Sign,
    pub s1: UnitVector3,
    pub s2: UnitVector3,
    /// The source conserves zero spin, so `s1 == s2`.
    pub conservation: bool,
}

impl HiddenVariable {
    pub fn conserved(lambda: Sign, s: UnitVector3) -> Self {
        HiddenVariable {
            lambda,
            s1: s,
            s2: s,
            conservation: true,
        }
    }

    pub fn independent(lambda: Sign, s1: UnitVector3, s2: UnitVector3) -> Self {
        HiddenVariable {
            lambda,
            s1,
            s2,
            conservation: false,
        }
    }

    /// Fair-coin `λ` and `s₁` uniform on S²; `s₂` aliases `s₁` under
    /// conservation and is drawn independently otherwise.
    pub fn draw<R: rand::Rng + ?Sized>(rng: &mut R, conservation: bool) -> Self {
        let lambda = rng::fair_sign(rng);
        let s1 = rng::unit_vector(rng);
        if conservation {
            Self::conserved(lambda, s1)
        } else {
            Self::independent(lambda, s1, rng::unit_vector(rng))
        }
    }
}

/// A measurement: the quaternion at the requested angle and the limiting
/// ±1 outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub quaternion: Quaternion,
    pub outcome: Sign,
}

fn check_eta(eta: f64) -> Result<(), SingletError> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(SingletError::InvalidAngle { eta });
    }
    Ok(())
}

fn station_quaternion(
    axis_numerator: crate::ga::Vec3,
    eta: f64,
    sign: Sign,
) -> Result<Quaternion, SingletError> {
    if eta == 0.0 {
        return Ok(Quaternion::IDENTITY.signed(sign));
    }
    if axis_numerator.norm() < 1e-12 {
        return Err(SingletError::UndefinedAxis { eta });
    }
    let r =
        UnitVector3::normalize(axis_numerator).map_err(|_| SingletError::UndefinedAxis { eta })?;
    Ok(Quaternion::from_half_angle(r, eta).signed(sign))
}

/// Alice: `+λ[cos η + (I·r₁) sin η]` with `r₁ = a×s₁ / ‖a×s₁‖`, and the
/// limiting outcome `A = +λ (-1)^κ_a`.
pub fn measure_alice(
    a: UnitVector3,
    hv: &HiddenVariable,
    eta: f64,
    winding: u32,
) -> Result<Measurement, SingletError> {
    check_eta(eta)?;
    let quaternion = station_quaternion(a.cross(hv.s1), eta, hv.lambda)?;
    Ok(Measurement {
        quaternion,
        outcome: hv.lambda.wind(winding),
    })
}

/// Bob: `-λ[cos η + (I·r₂) sin η]` with `r₂ = s₂×b / ‖s₂×b‖`, and the
/// limiting outcome `B = -λ (-1)^κ_b`.
pub fn measure_bob(
    b: UnitVector3,
    hv: &HiddenVariable,
    eta: f64,
    winding: u32,
) -> Result<Measurement, SingletError> {
    check_eta(eta)?;
    let quaternion = station_quaternion(hv.s2.cross(b), eta, -hv.lambda)?;
    Ok(Measurement {
        quaternion,
        outcome: (-hv.lambda).wind(winding),
    })
}

/// Limiting scalar value of the joint result: `-a·b` under conservation,
/// `-1` otherwise.
pub fn joint_limit_value(a: UnitVector3, b: UnitVector3, hv: &HiddenVariable) -> f64 {
    if hv.conservation {
        -a.dot(b)
    } else {
        -1.0
    }
}

/// The joint quaternion `-q(η_as₁, r₁) q(η_s₂b, r₂)` at the detection limit,
/// evaluated through the quaternion product.
///
/// With `s₁ = s₂ = s` the product `(a s)(s b)` equals `a b` for every `s`,
/// so the limit is `-(a·b + I a×b)`. Otherwise `s₁ → a` and `s₂ → b`
/// independently and both factors tend to the identity.
pub fn joint_limit_quaternion(a: UnitVector3, b: UnitVector3, hv: &HiddenVariable) -> Quaternion {
    if hv.conservation {
        -(Quaternion::from_vectors(a, hv.s1) * Quaternion::from_vectors(hv.s2, b))
    } else {
        -Quaternion::IDENTITY
    }
}

/// How the winding counts `κ_a`, `κ_b` of the sign-product diagnostic are
/// assigned per run. Every rule reads one setting and the hidden variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindingRule {
    /// `κ = 0` always.
    Zero,
    /// Parity is a fair coin keyed on the run and the local setting, so equal
    /// settings see equal parity.
    RandomParity,
    /// `κ = 1` once the full rotation `2η` between setting and spin axis
    /// exceeds π, i.e. when the two are more than a right angle apart.
    AngleThreshold,
}

impl FromStr for WindingRule {
    type Err = SingletError;
    fn from_str(s: &str) -> Result<Self, SingletError> {
        match s {
            "zero" => Ok(WindingRule::Zero),
            "random-parity" => Ok(WindingRule::RandomParity),
            "angle-threshold" => Ok(WindingRule::AngleThreshold),
            other => Err(SingletError::UnknownWindingRule(other.to_string())),
        }
    }
}

fn setting_key(n: UnitVector3) -> u64 {
    let v = n.vec();
    splitmix64(v.x.to_bits())
        ^ splitmix64(v.y.to_bits()).rotate_left(21)
        ^ splitmix64(v.z.to_bits()).rotate_left(42)
}

/// Winding count for one station.
pub fn winding(rule: WindingRule, setting: UnitVector3, spin: UnitVector3, run_key: u64) -> u32 {
    match rule {
        WindingRule::Zero => 0,
        WindingRule::RandomParity => (splitmix64(run_key ^ setting_key(setting)) & 1) as u32,
        WindingRule::AngleThreshold => u32::from(2.0 * setting.angle_to(spin) > PI),
    }
}

/// One simulated trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub a: UnitVector3,
    pub b: UnitVector3,
    pub hv: HiddenVariable,
    pub outcome_a: Sign,
    pub outcome_b: Sign,
    pub joint_limit: f64,
    pub kappa_a: u32,
    pub kappa_b: u32,
}

const CORRELATION_TAG: &str = "singlet/correlation";
const RUNS_TAG: &str = "singlet/runs";

fn run_once(
    a: UnitVector3,
    b: UnitVector3,
    streams: &Substreams,
    index: u64,
    conservation: bool,
    rule: WindingRule,
) -> RunRecord {
    let mut rng = streams.run(index);
    let hv = HiddenVariable::draw(&mut rng, conservation);
    let key = streams.run_key(index);
    let kappa_a = winding(rule, a, hv.s1, key);
    let kappa_b = winding(rule, b, hv.s2, key);
    // At the limit η = 0 neither station can fail.
    let alice = measure_alice(a, &hv, 0.0, kappa_a).expect("η = 0 is always valid");
    let bob = measure_bob(b, &hv, 0.0, kappa_b).expect("η = 0 is always valid");
    RunRecord {
        a,
        b,
        hv,
        outcome_a: alice.outcome,
        outcome_b: bob.outcome,
        joint_limit: joint_limit_value(a, b, &hv),
        kappa_a,
        kappa_b,
    }
}

/// `n` run records in index order.
pub fn simulate_runs(
    a: UnitVector3,
    b: UnitVector3,
    n: u64,
    seed: u64,
    conservation: bool,
    rule: WindingRule,
) -> Result<Vec<RunRecord>, SingletError> {
    if n == 0 {
        return Err(SingletError::EmptyEnsemble);
    }
    let streams = Substreams::new(seed, label_hash(RUNS_TAG));
    Ok(rng::chunked_fold(
        n,
        Vec::with_capacity(n as usize),
        |r| {
            r.map(|i| run_once(a, b, &streams, i, conservation, rule))
                .collect::<Vec<_>>()
        },
        |mut acc, mut part| {
            acc.append(&mut part);
            acc
        },
    ))
}

/// Ensemble average of the joint limit value.
///
/// Under conservation every run contributes `-a·b`, so the estimate is
/// `-cos η_ab` with zero spread; without it every run contributes `-1`.
pub fn correlation(
    a: UnitVector3,
    b: UnitVector3,
    n: u64,
    seed: u64,
    conservation: bool,
) -> Result<CorrelationEstimate, SingletError> {
    if n == 0 {
        return Err(SingletError::EmptyEnsemble);
    }
    let streams = Substreams::new(seed, label_hash(CORRELATION_TAG));
    let acc = rng::chunked_fold(
        n,
        MeanAccumulator::default(),
        |r| {
            let mut acc = MeanAccumulator::default();
            for i in r {
                let hv = HiddenVariable::draw(&mut streams.run(i), conservation);
                acc.push(joint_limit_value(a, b, &hv));
            }
            acc
        },
        MeanAccumulator::merge,
    );
    Ok(CorrelationEstimate {
        e_hat: acc.mean(),
        stderr: acc.stderr(),
        n,
        e_analytic: -a.dot(b),
    })
}

/// Counts of the four outcome pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeTally {
    pub plus_plus: u64,
    pub plus_minus: u64,
    pub minus_plus: u64,
    pub minus_minus: u64,
}

impl OutcomeTally {
    pub fn record(&mut self, a: Sign, b: Sign) {
        match (a, b) {
            (Sign::Plus, Sign::Plus) => self.plus_plus += 1,
            (Sign::Plus, Sign::Minus) => self.plus_minus += 1,
            (Sign::Minus, Sign::Plus) => self.minus_plus += 1,
            (Sign::Minus, Sign::Minus) => self.minus_minus += 1,
        }
    }

    pub fn merge(self, o: OutcomeTally) -> OutcomeTally {
        OutcomeTally {
            plus_plus: self.plus_plus + o.plus_plus,
            plus_minus: self.plus_minus + o.plus_minus,
            minus_plus: self.minus_plus + o.minus_plus,
            minus_minus: self.minus_minus + o.minus_minus,
        }
    }

    pub fn total(&self) -> u64 {
        self.plus_plus + self.plus_minus + self.minus_plus + self.minus_minus
    }

    pub fn mean_a(&self) -> f64 {
        (self.plus_plus + self.plus_minus) as f64 / self.total() as f64 * 2.0 - 1.0
    }

    pub fn mean_b(&self) -> f64 {
        (self.plus_plus + self.minus_plus) as f64 / self.total() as f64 * 2.0 - 1.0
    }

    pub fn mean_product(&self) -> f64 {
        let agree = (self.plus_plus + self.minus_minus) as i128;
        let disagree = (self.plus_minus + self.minus_plus) as i128;
        (agree - disagree) as f64 / self.total() as f64
    }

    /// Counts of `A = +1` and `A = -1`.
    pub fn alice_counts(&self) -> [u64; 2] {
        [
            self.plus_plus + self.plus_minus,
            self.minus_plus + self.minus_minus,
        ]
    }

    /// Counts of `B = +1` and `B = -1`.
    pub fn bob_counts(&self) -> [u64; 2] {
        [
            self.plus_plus + self.minus_plus,
            self.plus_minus + self.minus_minus,
        ]
    }

    /// Frequencies in the order `++, +-, -+, --`.
    pub fn frequencies(&self) -> [f64; 4] {
        let t = self.total() as f64;
        [
            self.plus_plus as f64 / t,
            self.plus_minus as f64 / t,
            self.minus_plus as f64 / t,
            self.minus_minus as f64 / t,
        ]
    }
}

/// Tally of individual outcomes over `n` runs.
pub fn outcome_tally(
    a: UnitVector3,
    b: UnitVector3,
    n: u64,
    seed: u64,
    conservation: bool,
    rule: WindingRule,
) -> Result<OutcomeTally, SingletError> {
    if n == 0 {
        return Err(SingletError::EmptyEnsemble);
    }
    let streams = Substreams::new(seed, label_hash(RUNS_TAG));
    Ok(rng::chunked_fold(
        n,
        OutcomeTally::default(),
        |r| {
            let mut t = OutcomeTally::default();
            for i in r {
                let rec = run_once(a, b, &streams, i, conservation, rule);
                t.record(rec.outcome_a, rec.outcome_b);
            }
            t
        },
        OutcomeTally::merge,
    ))
}

/// Result of the sign-product diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignProductReport {
    pub rule: WindingRule,
    pub estimate: CorrelationEstimate,
    pub tally: OutcomeTally,
}

/// Average of `A·B` under a winding rule, with the spin conserved.
///
/// Exploratory: no per-run winding assignment is part of the model. The
/// model's expectation is the limit-product estimator [`correlation`].
pub fn sign_product_diagnostic(
    a: UnitVector3,
    b: UnitVector3,
    n: u64,
    seed: u64,
    rule: WindingRule,
) -> Result<SignProductReport, SingletError> {
    let tally = outcome_tally(a, b, n, seed, true, rule)?;
    let e_hat = tally.mean_product();
    Ok(SignProductReport {
        rule,
        estimate: CorrelationEstimate {
            e_hat,
            stderr: binary_mean_stderr(e_hat, n),
            n,
            e_analytic: -a.dot(b),
        },
        tally,
    })
}

/// Write run records as CSV: `a_theta,b_theta,lambda,A,B,joint_limit`.
/// Setting angles are azimuths in radians.
pub fn write_runs_csv<W: Write>(mut w: W, records: &[RunRecord]) -> io::Result<()> {
    writeln!(w, "a_theta,b_theta,lambda,A,B,joint_limit")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            crate::curve::fmt_sig9(r.a.azimuth()),
            crate::curve::fmt_sig9(r.b.azimuth()),
            r.hv.lambda,
            r.outcome_a,
            r.outcome_b,
            crate::curve::fmt_sig9(r.joint_limit),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::{Bivector, Vec3};

    fn unit(x: f64, y: f64, z: f64) -> UnitVector3 {
        UnitVector3::normalize(Vec3::new(x, y, z)).unwrap()
    }

    #[test]
    fn alice_at_the_limit() {
        let s = unit(0.1, 0.2, 0.9);
        let plus = HiddenVariable::conserved(Sign::Plus, s);
        let m = measure_alice(UnitVector3::X, &plus, 0.0, 0).unwrap();
        assert_eq!(m.quaternion, Quaternion::IDENTITY);
        assert_eq!(m.outcome, Sign::Plus);

        let minus = HiddenVariable::conserved(Sign::Minus, s);
        let m = measure_alice(UnitVector3::X, &minus, 0.0, 0).unwrap();
        assert_eq!(m.quaternion, -Quaternion::IDENTITY);
        assert_eq!(m.outcome, Sign::Minus);
    }

    #[test]
    fn bob_at_the_limit() {
        let s = unit(0.1, 0.2, 0.9);
        let m = measure_bob(
            UnitVector3::X,
            &HiddenVariable::conserved(Sign::Plus, s),
            0.0,
            0,
        )
        .unwrap();
        assert_eq!(m.quaternion, -Quaternion::IDENTITY);
        assert_eq!(m.outcome, Sign::Minus);
        let m = measure_bob(
            UnitVector3::X,
            &HiddenVariable::conserved(Sign::Minus, s),
            0.0,
            0,
        )
        .unwrap();
        assert_eq!(m.quaternion, Quaternion::IDENTITY);
        assert_eq!(m.outcome, Sign::Plus);
    }

    #[test]
    fn pre_limit_quaternions_match_bivector_products() {
        let (a, b, s) = (
            unit(1.0, 0.3, 0.0),
            unit(-0.2, 1.0, 0.4),
            unit(0.5, -0.5, 1.0),
        );
        for lambda in [Sign::Plus, Sign::Minus] {
            let hv = HiddenVariable::conserved(lambda, s);
            let alice = measure_alice(a, &hv, a.angle_to(s), 0).unwrap().quaternion;
            // -D(a) L(s₁, λ)
            let expected = -Bivector::detector(a).product(&Bivector::spin(s, lambda));
            assert!(alice.max_abs_diff(expected) < 1e-14);

            let bob = measure_bob(b, &hv, s.angle_to(b), 0).unwrap().quaternion;
            // +L(s₂, λ) D(b)
            let expected = Bivector::spin(s, lambda).product(&Bivector::detector(b));
            assert!(bob.max_abs_diff(expected) < 1e-14);
        }
    }

    #[test]
    fn parallel_axis_is_an_error_away_from_the_limit() {
        let hv = HiddenVariable::conserved(Sign::Plus, UnitVector3::X);
        assert!(matches!(
            measure_alice(UnitVector3::X, &hv, 0.1, 0),
            Err(SingletError::UndefinedAxis { .. })
        ));
        assert!(matches!(
            measure_bob(UnitVector3::X, &hv, 0.1, 0),
            Err(SingletError::UndefinedAxis { .. })
        ));
        assert!(matches!(
            measure_alice(UnitVector3::X, &hv, -0.1, 0),
            Err(SingletError::InvalidAngle { .. })
        ));
    }

    #[test]
    fn joint_value_cases() {
        let s = unit(0.3, 0.4, 0.5);
        let a = UnitVector3::X;
        let hv = HiddenVariable::conserved(Sign::Plus, s);
        assert_eq!(joint_limit_value(a, a, &hv), -1.0);
        assert_eq!(joint_limit_value(a, UnitVector3::Y, &hv), 0.0);
        let free = HiddenVariable::independent(Sign::Minus, s, unit(0.0, 1.0, 1.0));
        assert_eq!(joint_limit_value(a, UnitVector3::Y, &free), -1.0);
    }

    #[test]
    fn joint_quaternion_scalar_is_the_joint_value() {
        let (a, b) = (unit(1.0, 0.2, -0.1), unit(0.3, 1.0, 0.2));
        let hv = HiddenVariable::conserved(Sign::Plus, unit(0.7, -0.1, 0.2));
        let q = joint_limit_quaternion(a, b, &hv);
        assert!((q.w() - joint_limit_value(a, b, &hv)).abs() < 1e-15);
        let free = HiddenVariable::independent(Sign::Plus, a, b);
        assert_eq!(joint_limit_quaternion(a, b, &free).w(), -1.0);
    }

    #[test]
    fn correlation_special_angles() {
        let a = UnitVector3::X;
        let e = correlation(a, a, 10_000, 1, true).unwrap();
        assert_eq!(e.e_hat, -1.0);
        let e = correlation(a, -a, 10_000, 1, true).unwrap();
        assert_eq!(e.e_hat, 1.0);
        let b = UnitVector3::planar(PI / 3.0);
        let e = correlation(a, b, 100_000, 2, true).unwrap();
        assert!((e.e_hat + 0.5).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
        let e = correlation(a, b, 1000, 2, false).unwrap();
        assert_eq!(e.e_hat, -1.0);
        assert_eq!(
            correlation(a, b, 0, 2, true),
            Err(SingletError::EmptyEnsemble)
        );
    }

    #[test]
    fn zero_winding_gives_perfect_anticorrelation() {
        let r = sign_product_diagnostic(
            UnitVector3::X,
            UnitVector3::planar(1.0),
            5000,
            3,
            WindingRule::Zero,
        )
        .unwrap();
        assert_eq!(r.estimate.e_hat, -1.0);
        assert_eq!(r.tally.plus_plus + r.tally.minus_minus, 0);
    }

    #[test]
    fn nontrivial_windings_populate_all_outcome_pairs() {
        for rule in [WindingRule::RandomParity, WindingRule::AngleThreshold] {
            let r =
                sign_product_diagnostic(UnitVector3::X, UnitVector3::planar(1.0), 20_000, 4, rule)
                    .unwrap();
            assert!(
                r.tally.frequencies().iter().all(|&f| f > 0.0),
                "{rule:?}: {:?}",
                r.tally
            );
            let same =
                sign_product_diagnostic(UnitVector3::X, UnitVector3::X, 20_000, 4, rule).unwrap();
            assert_eq!(same.tally.plus_plus + same.tally.minus_minus, 0, "{rule:?}");
            assert_eq!(same.estimate.e_hat, -1.0);
        }
    }

    #[test]
    fn winding_rule_parsing() {
        assert_eq!(
            "angle-threshold".parse::<WindingRule>().unwrap(),
            WindingRule::AngleThreshold
        );
        assert!(matches!(
            "spiral".parse::<WindingRule>(),
            Err(SingletError::UnknownWindingRule(_))
        ));
    }

    #[test]
    fn runs_csv_shape() {
        let runs = simulate_runs(
            UnitVector3::X,
            UnitVector3::Y,
            3,
            5,
            true,
            WindingRule::Zero,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &runs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "a_theta,b_theta,lambda,A,B,joint_limit");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1.57079633,"));
    }
}
