//! CHSH-type expressions over binary data.
//!
//! Two ways of combining four ±1 settings are kept apart:
//!
//! * one dataset of simultaneous quadruples, where each row contributes
//!   `A(a)[B(b) + B(b′)] + A(a′)[B(b) - B(b′)]` and is bounded by 2;
//! * four separate experiments, one per setting pair, whose averages are
//!   summed afterwards and are bounded only by 4.
//!
//! The extrema are found by enumeration, not assumed.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ga::UnitVector3;
use crate::pearle::sawtooth;
use crate::sign::Sign;
use crate::stats::CorrelationEstimate;

/// Slack allowed when classifying `|S|` against 2 and 2√2.
pub const REGIME_TOLERANCE: f64 = 1e-9;

pub const TSIRELSON: f64 = 2.0 * SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InequalityError {
    #[error("row {index}: entry {value} is not ±1")]
    MalformedRow { index: usize, value: i64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("scan step must divide 360 degrees")]
    InvalidStep,
}

/// Four measurement directions, `a`, `a′` for Alice and `b`, `b′` for Bob.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsQuad {
    pub a: UnitVector3,
    pub a_prime: UnitVector3,
    pub b: UnitVector3,
    pub b_prime: UnitVector3,
}

impl SettingsQuad {
    /// Settings in the xy-plane, angles in radians.
    pub fn planar(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        SettingsQuad {
            a: UnitVector3::planar(a),
            a_prime: UnitVector3::planar(a_prime),
            b: UnitVector3::planar(b),
            b_prime: UnitVector3::planar(b_prime),
        }
    }

    /// `a = 90°, a′ = 0°, b = 45°, b′ = 135°`.
    ///
    /// Every pair except `(a, b′)` is 45° apart, and that pair is 45° apart
    /// too, so three terms of `S` carry the same sign and the fourth enters
    /// subtracted at 135°. `|S| = 2√2` for `-cos`.
    pub fn canonical() -> Self {
        SettingsQuad::planar(FRAC_PI_2, 0.0, FRAC_PI_4, 3.0 * FRAC_PI_4)
    }
}

/// One deterministic ±1 value per setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryAssignment {
    pub a: Sign,
    pub a_prime: Sign,
    pub b: Sign,
    pub b_prime: Sign,
}

impl BinaryAssignment {
    /// Assignment number `bits` in `0..16`; bit set means `-1`.
    pub fn from_bits(bits: u8) -> Self {
        let s = |k: u8| Sign::from_bool(bits & (1 << k) == 0);
        BinaryAssignment {
            a: s(0),
            a_prime: s(1),
            b: s(2),
            b_prime: s(3),
        }
    }

    pub fn from_ints(row: [i64; 4], index: usize) -> Result<Self, InequalityError> {
        let s = |value: i64| {
            Sign::from_int(value).ok_or(InequalityError::MalformedRow { index, value })
        };
        Ok(BinaryAssignment {
            a: s(row[0])?,
            a_prime: s(row[1])?,
            b: s(row[2])?,
            b_prime: s(row[3])?,
        })
    }

    /// `A(a)[B(b) + B(b′)] + A(a′)[B(b) - B(b′)]`.
    pub fn single_expression(&self) -> i32 {
        let (a, ap, b, bp) = (
            self.a.value(),
            self.a_prime.value(),
            self.b.value(),
            self.b_prime.value(),
        );
        a * (b + bp) + ap * (b - bp)
    }
}

/// One run's `(A, B)` pair in each of the four experiments, in the order
/// `(a,b), (a,b′), (a′,b), (a′,b′)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAssignment {
    pub runs: [(Sign, Sign); 4],
}

impl ContextAssignment {
    /// Combination number `bits` in `0..256`.
    pub fn from_bits(bits: u16) -> Self {
        let s = |k: u16| Sign::from_bool(bits & (1 << k) == 0);
        ContextAssignment {
            runs: [0, 1, 2, 3].map(|c| (s(2 * c), s(2 * c + 1))),
        }
    }

    /// `E₁ + E₂ + E₃ - E₄` with each `E` a single-run product.
    pub fn four_expression(&self) -> i32 {
        let e: Vec<i32> = self.runs.iter().map(|&(x, y)| (x * y).value()).collect();
        e[0] + e[1] + e[2] - e[3]
    }
}

/// Extrema of both expressions with one witness each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub expr_single_max: i32,
    pub expr_single_min: i32,
    pub expr_four_max: i32,
    pub expr_four_min: i32,
    pub single_max_witness: BinaryAssignment,
    pub single_min_witness: BinaryAssignment,
    pub four_max_witness: ContextAssignment,
    pub four_min_witness: ContextAssignment,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleBound {
    pub max: i32,
    pub min: i32,
    pub max_witness: BinaryAssignment,
    pub min_witness: BinaryAssignment,
    pub assignments: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourBound {
    pub max: i32,
    pub min: i32,
    pub max_witness: ContextAssignment,
    pub min_witness: ContextAssignment,
    pub assignments: u32,
}

fn extrema<T: Copy>(
    items: impl Iterator<Item = T>,
    value: impl Fn(&T) -> i32,
) -> (i32, T, i32, T, u32) {
    let mut count = 0;
    let mut best: Option<(i32, T, i32, T)> = None;
    for item in items {
        count += 1;
        let v = value(&item);
        best = Some(match best {
            None => (v, item, v, item),
            Some((hi, hw, lo, lw)) => {
                let (hi, hw) = if v > hi { (v, item) } else { (hi, hw) };
                let (lo, lw) = if v < lo { (v, item) } else { (lo, lw) };
                (hi, hw, lo, lw)
            }
        });
    }
    let (hi, hw, lo, lw) = best.expect("non-empty enumeration");
    (hi, hw, lo, lw, count)
}

/// All 16 assignments of the single-dataset expression.
pub fn enumerate_single_average_bound() -> SingleBound {
    let (max, max_witness, min, min_witness, assignments) = extrema(
        (0u8..16).map(BinaryAssignment::from_bits),
        BinaryAssignment::single_expression,
    );
    SingleBound {
        max,
        min,
        max_witness,
        min_witness,
        assignments,
    }
}

/// All 2⁸ combinations of independent runs in four contexts.
pub fn enumerate_four_average_bound() -> FourBound {
    let (max, max_witness, min, min_witness, assignments) = extrema(
        (0u16..256).map(ContextAssignment::from_bits),
        ContextAssignment::four_expression,
    );
    FourBound {
        max,
        min,
        max_witness,
        min_witness,
        assignments,
    }
}

pub fn bound_report() -> BoundReport {
    let single = enumerate_single_average_bound();
    let four = enumerate_four_average_bound();
    BoundReport {
        expr_single_max: single.max,
        expr_single_min: single.min,
        expr_four_max: four.max,
        expr_four_min: four.min,
        single_max_witness: single.max_witness,
        single_min_witness: single.min_witness,
        four_max_witness: four.max_witness,
        four_min_witness: four.min_witness,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BooleReport {
    pub rows: u64,
    pub mean: f64,
    /// Rows whose expression falls outside `[-2, 2]`.
    pub violations: u64,
    pub min: i32,
    pub max: i32,
}

/// Evaluate the single-dataset expression row by row.
pub fn boole_check<I>(rows: I) -> Result<BooleReport, InequalityError>
where
    I: IntoIterator<Item = [i64; 4]>,
{
    let mut n = 0u64;
    let mut sum = 0i64;
    let mut violations = 0;
    let (mut min, mut max) = (i32::MAX, i32::MIN);
    for (index, row) in rows.into_iter().enumerate() {
        let v = BinaryAssignment::from_ints(row, index)?.single_expression();
        if v.abs() > 2 {
            violations += 1;
        }
        min = min.min(v);
        max = max.max(v);
        sum += v as i64;
        n += 1;
    }
    if n == 0 {
        return Err(InequalityError::EmptyDataset);
    }
    Ok(BooleReport {
        rows: n,
        mean: sum as f64 / n as f64,
        violations,
        min,
        max,
    })
}

/// `⟨AB⟩₁ + ⟨AB⟩₂ + ⟨AB⟩₃ - ⟨AB⟩₄` over four separate run lists.
pub fn four_context_average(contexts: [&[(Sign, Sign)]; 4]) -> Result<f64, InequalityError> {
    let mut e = [0.0; 4];
    for (k, runs) in contexts.iter().enumerate() {
        if runs.is_empty() {
            return Err(InequalityError::EmptyDataset);
        }
        let sum: i64 = runs.iter().map(|&(x, y)| (x * y).value() as i64).sum();
        e[k] = sum as f64 / runs.len() as f64;
    }
    Ok(e[0] + e[1] + e[2] - e[3])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundRegime {
    /// `|S| ≤ 2`
    Classical,
    /// `2 < |S| ≤ 2√2`
    Quantum,
    /// `|S| > 2√2`
    BeyondTsirelson,
}

impl BoundRegime {
    pub fn of(s: f64) -> Self {
        Self::of_estimate(s, 0.0)
    }

    /// Regime of an estimate, allowing four standard errors on each edge.
    pub fn of_estimate(s: f64, stderr: f64) -> Self {
        let m = s.abs();
        let slack = REGIME_TOLERANCE + 4.0 * stderr;
        if m <= 2.0 + slack {
            BoundRegime::Classical
        } else if m <= TSIRELSON + slack {
            BoundRegime::Quantum
        } else {
            BoundRegime::BeyondTsirelson
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            BoundRegime::Classical => "|S| <= 2",
            BoundRegime::Quantum => "2 < |S| <= 2*sqrt(2)",
            BoundRegime::BeyondTsirelson => "|S| > 2*sqrt(2)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub e_ab: CorrelationEstimate,
    pub e_abp: CorrelationEstimate,
    pub e_apb: CorrelationEstimate,
    pub e_apbp: CorrelationEstimate,
    pub s: f64,
    /// Standard error of `s`, from independent per-pair estimates.
    pub stderr: f64,
    /// `S` from the reference values of the four estimates.
    pub s_analytic: f64,
    pub regime: BoundRegime,
}

/// `S = E(a,b) + E(a,b′) + E(a′,b) - E(a′,b′)`.
pub fn chsh<E, F>(quad: &SettingsQuad, mut eval: F) -> Result<ChshResult, E>
where
    F: FnMut(UnitVector3, UnitVector3) -> Result<CorrelationEstimate, E>,
{
    let e_ab = eval(quad.a, quad.b)?;
    let e_abp = eval(quad.a, quad.b_prime)?;
    let e_apb = eval(quad.a_prime, quad.b)?;
    let e_apbp = eval(quad.a_prime, quad.b_prime)?;
    let s = e_ab.e_hat + e_abp.e_hat + e_apb.e_hat - e_apbp.e_hat;
    let s_analytic = e_ab.e_analytic + e_abp.e_analytic + e_apb.e_analytic - e_apbp.e_analytic;
    let stderr = [e_ab, e_abp, e_apb, e_apbp]
        .iter()
        .map(|e| e.stderr * e.stderr)
        .sum::<f64>()
        .sqrt();
    Ok(ChshResult {
        e_ab,
        e_abp,
        e_apb,
        e_apbp,
        s,
        stderr,
        s_analytic,
        regime: BoundRegime::of_estimate(s, stderr),
    })
}

fn exact(value: f64) -> CorrelationEstimate {
    CorrelationEstimate {
        e_hat: value,
        stderr: 0.0,
        n: 0,
        e_analytic: value,
    }
}

/// `-a·b`.
pub fn singlet_analytic(
    a: UnitVector3,
    b: UnitVector3,
) -> Result<CorrelationEstimate, InequalityError> {
    Ok(exact(-a.dot(b)))
}

/// `-1 + 2η/π` with `η` the angle between `a` and `b`.
pub fn sawtooth_analytic(
    a: UnitVector3,
    b: UnitVector3,
) -> Result<CorrelationEstimate, InequalityError> {
    Ok(exact(sawtooth(a.angle_to(b))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarScan {
    /// Settings `[a, a′, b, b′]` in degrees at the largest `|S|`.
    pub argmax_deg: [u32; 4],
    pub max_abs_s: f64,
    pub quads: u64,
}

/// Largest `|S|` over all planar quads on a grid of `step_deg` degrees,
/// for a correlation that depends only on the angle between settings.
///
/// `a` is held at 0° since a common rotation leaves every angle unchanged.
pub fn planar_scan<F>(step_deg: u32, correlation: F) -> Result<PlanarScan, InequalityError>
where
    F: Fn(f64) -> f64,
{
    if step_deg == 0 || 360 % step_deg != 0 {
        return Err(InequalityError::InvalidStep);
    }
    let m = (360 / step_deg) as usize;
    let table: Vec<f64> = (0..m)
        .map(|k| {
            let d = (k as u32 * step_deg) as f64;
            correlation(d.min(360.0 - d).to_radians())
        })
        .collect();
    let e = |x: usize, y: usize| table[(y + m - x) % m];
    let mut best = PlanarScan {
        argmax_deg: [0; 4],
        max_abs_s: f64::NEG_INFINITY,
        quads: 0,
    };
    for ap in 0..m {
        for b in 0..m {
            for bp in 0..m {
                let s = (e(0, b) + e(0, bp) + e(ap, b) - e(ap, bp)).abs();
                if s > best.max_abs_s {
                    best.max_abs_s = s;
                    best.argmax_deg = [
                        0,
                        ap as u32 * step_deg,
                        b as u32 * step_deg,
                        bp as u32 * step_deg,
                    ];
                }
            }
        }
    }
    best.quads = (m * m * m) as u64;
    Ok(best)
}
