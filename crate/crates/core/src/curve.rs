//! Angle grids, correlation curves, and their CSV form.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("invalid grid `{spec}`: {reason}")]
    InvalidGrid { spec: String, reason: String },
    #[error("curve point {index} is invalid: {reason}")]
    InvalidPoint { index: usize, reason: String },
    #[error("CSV parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Format like C's `%.9g`: nine significant digits, trailing zeros
/// trimmed, scientific notation outside `[1e-5, 1e9)`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-5..9).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Setting-angle grid in degrees, strictly increasing within `[0, 180]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    degrees: Vec<f64>,
}

impl AngleGrid {
    /// `start, start + step, ...` up to and including `stop`.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self, CurveError> {
        let spec = format!("{start}:{stop}:{step}");
        let bad = |reason: &str| CurveError::InvalidGrid {
            spec: spec.clone(),
            reason: reason.into(),
        };
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(bad("non-finite value"));
        }
        if step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        if start > stop {
            return Err(bad("start exceeds stop"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::list((0..count).map(|k| start + k as f64 * step).collect())
    }

    /// An explicit list of angles.
    pub fn list(degrees: Vec<f64>) -> Result<Self, CurveError> {
        let bad = |reason: String| CurveError::InvalidGrid {
            spec: format!("{degrees:?}"),
            reason,
        };
        if degrees.is_empty() {
            return Err(bad("grid is empty".into()));
        }
        for &d in &degrees {
            if !d.is_finite() || !(0.0..=180.0).contains(&d) {
                return Err(bad(format!("angle {d} outside [0, 180]")));
            }
        }
        if degrees.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("angles must be strictly increasing".into()));
        }
        Ok(AngleGrid { degrees })
    }

    /// 0° to 180° in 5° steps.
    pub fn default_grid() -> Self {
        Self::range(0.0, 180.0, 5.0).expect("default grid is valid")
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self::default_grid()
    }
}

impl FromStr for AngleGrid {
    type Err = CurveError;

    /// `start:stop:step` or a comma-separated list, in degrees.
    fn from_str(s: &str) -> Result<Self, CurveError> {
        let bad = |reason: &str| CurveError::InvalidGrid {
            spec: s.to_string(),
            reason: reason.into(),
        };
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("not a number"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected start:stop:step"));
            }
            Self::range(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?)
        } else {
            Self::list(s.split(',').map(parse).collect::<Result<_, _>>()?)
        }
    }
}

/// One grid angle of a correlation curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eta_deg: f64,
    pub e_hat: f64,
    pub e_analytic: f64,
    pub stderr: f64,
    /// Detection fraction.
    pub g: f64,
    pub n: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub points: Vec<CurvePoint>,
}

pub const CURVE_HEADER: &str = "eta_deg,e_hat,e_analytic,stderr,g,n";

impl CorrelationCurve {
    /// Grid strictly increasing, every field finite.
    pub fn validate(&self) -> Result<(), CurveError> {
        for (index, p) in self.points.iter().enumerate() {
            let finite = [p.eta_deg, p.e_hat, p.e_analytic, p.stderr, p.g]
                .iter()
                .all(|x| x.is_finite());
            if !finite {
                return Err(CurveError::InvalidPoint {
                    index,
                    reason: "non-finite field".into(),
                });
            }
            if index > 0 && p.eta_deg <= self.points[index - 1].eta_deg {
                return Err(CurveError::InvalidPoint {
                    index,
                    reason: "grid not strictly increasing".into(),
                });
            }
        }
        Ok(())
    }

    /// Largest `|e_hat - e_analytic| / stderr` over the grid; zero-stderr
    /// points count only if they disagree.
    pub fn max_z_score(&self) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let d = (p.e_hat - p.e_analytic).abs();
                if d == 0.0 {
                    0.0
                } else if p.stderr == 0.0 {
                    f64::INFINITY
                } else {
                    d / p.stderr
                }
            })
            .fold(0.0, f64::max)
    }

    /// CSV rows only (header included), no metadata.
    pub fn csv_body(&self) -> String {
        let mut out = String::new();
        out.push_str(CURVE_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_sig9(p.eta_deg),
                fmt_sig9(p.e_hat),
                fmt_sig9(p.e_analytic),
                fmt_sig9(p.stderr),
                fmt_sig9(p.g),
                p.n
            );
        }
        out
    }

    /// CSV with `# key=value` metadata lines ahead of the header.
    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[(String, String)]) -> io::Result<()> {
        for (k, v) in metadata {
            writeln!(w, "# {k}={v}")?;
        }
        w.write_all(self.csv_body().as_bytes())
    }

    /// Inverse of [`write_csv`](Self::write_csv).
    pub fn parse_csv(text: &str) -> Result<(Vec<(String, String)>, CorrelationCurve), CurveError> {
        let mut metadata = Vec::new();
        let mut points = Vec::new();
        let mut seen_header = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| CurveError::Parse {
                line: line_no,
                reason,
            };
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim_start().split_once('=') {
                    metadata.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !seen_header {
                if line != CURVE_HEADER {
                    return Err(err(format!("expected header `{CURVE_HEADER}`")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            points.push(CurvePoint {
                eta_deg: num(fields[0])?,
                e_hat: num(fields[1])?,
                e_analytic: num(fields[2])?,
                stderr: num(fields[3])?,
                g: num(fields[4])?,
                n: fields[5]
                    .parse()
                    .map_err(|e| err(format!("`{}`: {e}", fields[5])))?,
            });
        }
        if !seen_header {
            return Err(CurveError::Parse {
                line: 0,
                reason: "missing header".into(),
            });
        }
        let curve = CorrelationCurve { points };
        curve.validate()?;
        Ok((metadata, curve))
    }
}
