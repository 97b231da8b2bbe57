//! RIS panels, phase codebooks and the equivalent radiation pattern `F_RIS`.
//!
//! The panel lies along the east axis of the RIS frame with its normal
//! pointing at 90 deg, so the front half-space is `theta ∈ (0, 180)`. The
//! angle from the normal is `alpha = 90 - theta`, giving `sin(alpha) =
//! cos(theta)`. Element columns sit at `x_c = (c - (cols-1)/2)·d` wavelengths.
//!
//! For incidence `theta_in` and departure `theta_out` the bistatic gain is
//!
//! ```text
//! F_RIS = | sum_{r,c} g(alpha_in)·g(alpha_out)·exp(j(phi_rc + 2π·x_c·(sin alpha_in + sin alpha_out))) |²
//! ```
//!
//! with element pattern `g(alpha) = cos^q(alpha)` and unit reflection
//! amplitude. The expression is symmetric in the two angles.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Db, Frame, PlanarAngle};

const MAX_PHASE_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisPanel {
    pub rows: usize,
    pub cols: usize,
    pub element_spacing_wavelengths: f64,
    pub phase_bits: u32,
    pub center_freq_hz: f64,
    /// Exponent `q` of the `cos^q` element pattern.
    pub element_pattern_exponent: f64,
    /// Global reflection loss subtracted from every gain.
    pub loss_db: f64,
}

impl RisPanel {
    /// The measured panel: 32 x 32 elements at half-wavelength pitch,
    /// 1-bit phase control, 6.9 GHz.
    pub fn reference() -> Self {
        RisPanel {
            rows: 32,
            cols: 32,
            element_spacing_wavelengths: 0.5,
            phase_bits: 1,
            center_freq_hz: 6.9e9,
            element_pattern_exponent: 1.0,
            loss_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::validation("panel.rows/cols", "must be at least 1"));
        }
        if !(self.element_spacing_wavelengths > 0.0) {
            return Err(Error::validation("panel.spacing", "must be positive"));
        }
        if self.phase_bits == 0 || self.phase_bits > MAX_PHASE_BITS {
            return Err(Error::validation(
                "panel.phase_bits",
                format!("must lie in 1..={MAX_PHASE_BITS}"),
            ));
        }
        if !(self.center_freq_hz > 0.0) {
            return Err(Error::validation("panel.center_freq", "must be positive"));
        }
        if !(self.element_pattern_exponent >= 0.0) {
            return Err(Error::validation("panel.element_exponent", "must be >= 0"));
        }
        if !self.loss_db.is_finite() {
            return Err(Error::validation("panel.loss", "must be finite"));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Column positions along the panel axis, in wavelengths.
    pub fn column_positions(&self) -> Vec<f64> {
        let mid = (self.cols as f64 - 1.0) / 2.0;
        (0..self.cols)
            .map(|c| (c as f64 - mid) * self.element_spacing_wavelengths)
            .collect()
    }

    /// Ideal-aperture gain `20·log10(rows·cols)`, the maximum of `F_RIS`
    /// for a lossless panel with unit element gain.
    pub fn aperture_bound_db(&self) -> f64 {
        20.0 * (self.num_elements() as f64).log10()
    }
}

/// Checks an angle lies in the panel's front half-space and returns `sin(alpha)`.
fn front_sine(angle: PlanarAngle) -> Result<f64> {
    let a = angle.expect_frame(Frame::Ris)?;
    let deg = a.degrees();
    if !(deg > 0.0 && deg < 180.0) {
        return Err(Error::domain(format!(
            "RIS angle {deg} deg is not in the front half-space (0, 180)"
        )));
    }
    Ok(a.radians().cos())
}

fn element_amplitude(angle: PlanarAngle, q: f64) -> f64 {
    // cos(alpha) = sin(theta) > 0 in the front half-space
    if q == 0.0 {
        1.0
    } else {
        angle.radians().sin().powf(q)
    }
}

/// Per-element phase matrix of a panel, row-major.
///
/// A quantized codebook remembers its bit depth; a continuous profile does
/// not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    rows: usize,
    cols: usize,
    phases: Vec<f64>,
    bits: Option<u32>,
}

impl Codebook {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Codebook {
            rows,
            cols,
            phases: vec![0.0; rows * cols],
            bits: None,
        }
    }

    /// Continuous phase profile, radians, row-major.
    pub fn from_phases(rows: usize, cols: usize, phases: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || phases.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} phases for a {rows}x{cols} panel",
                phases.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("phases must be finite"));
        }
        Ok(Codebook {
            rows,
            cols,
            phases,
            bits: None,
        })
    }

    /// Quantized codebook from integer states `k`, phase `2πk/2^bits`.
    pub fn from_states(rows: usize, cols: usize, bits: u32, states: &[u32]) -> Result<Self> {
        if bits == 0 || bits > MAX_PHASE_BITS {
            return Err(Error::validation(
                "bits",
                format!("must lie in 1..={MAX_PHASE_BITS}"),
            ));
        }
        let levels = 1u32 << bits;
        if let Some(bad) = states.iter().find(|&&s| s >= levels) {
            return Err(Error::domain(format!(
                "phase state {bad} out of range for {bits}-bit codebook"
            )));
        }
        let step = 2.0 * PI / levels as f64;
        let mut cb = Self::from_phases(
            rows,
            cols,
            states.iter().map(|&s| s as f64 * step).collect(),
        )?;
        cb.bits = Some(bits);
        Ok(cb)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phase(&self, row: usize, col: usize) -> f64 {
        self.phases[row * self.cols + col]
    }

    /// Integer phase states of a quantized codebook.
    pub fn states(&self) -> Option<Vec<u32>> {
        let bits = self.bits?;
        let step = 2.0 * PI / (1u32 << bits) as f64;
        Some(
            self.phases
                .iter()
                .map(|p| (p / step).round() as u32)
                .collect(),
        )
    }

    /// Plain-text matrix: a `#` header then one line per row of
    /// space-separated states (or radians for a continuous profile).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# riscas codebook rows={} cols={} bits={}",
            self.rows,
            self.cols,
            self.bits.unwrap_or(0)
        );
        let states = self.states();
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| match &states {
                    Some(s) => s[r * self.cols + c].to_string(),
                    None => format!("{:.17e}", self.phase(r, c)),
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, file: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            file: file.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty codebook file".into()))?;
        let mut rows = None;
        let mut cols = None;
        let mut bits = None;
        let body = header
            .trim()
            .strip_prefix("# riscas codebook")
            .ok_or_else(|| parse_err(hline + 1, "missing `# riscas codebook` header".into()))?;
        for kv in body.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(hline + 1, format!("malformed header field `{kv}`")))?;
            let n: usize = v
                .parse()
                .map_err(|_| parse_err(hline + 1, format!("`{k}` is not an integer")))?;
            match k {
                "rows" => rows = Some(n),
                "cols" => cols = Some(n),
                "bits" => bits = Some(n as u32),
                _ => return Err(parse_err(hline + 1, format!("unknown header field `{k}`"))),
            }
        }
        let (rows, cols, bits) = match (rows, cols, bits) {
            (Some(r), Some(c), Some(b)) => (r, c, b),
            _ => {
                return Err(parse_err(
                    hline + 1,
                    "header needs rows, cols and bits".into(),
                ))
            }
        };
        let mut values = Vec::with_capacity(rows * cols);
        let mut nrows = 0;
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != cols {
                return Err(parse_err(
                    i + 1,
                    format!("expected {cols} entries, found {}", fields.len()),
                ));
            }
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("`{f}` is not a number")))?;
                values.push(v);
            }
            nrows += 1;
        }
        if nrows != rows {
            return Err(parse_err(
                text.lines().count(),
                format!("expected {rows} rows, found {nrows}"),
            ));
        }
        if bits == 0 {
            Self::from_phases(rows, cols, values)
        } else {
            let states: Vec<u32> = values
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as u32)
                    } else {
                        Err(Error::domain(format!(
                            "phase state `{v}` is not a natural number"
                        )))
                    }
                })
                .collect::<Result<_>>()?;
            Self::from_states(rows, cols, bits, &states)
        }
    }

    fn check_panel(&self, panel: &RisPanel) -> Result<()> {
        if self.rows != panel.rows || self.cols != panel.cols {
            return Err(Error::Dimension(format!(
                "{}x{} codebook for a {}x{} panel",
                self.rows, self.cols, panel.rows, panel.cols
            )));
        }
        Ok(())
    }
}

/// Maps each phase to the nearest of `2^bits` uniform states, ties to the
/// lower state.
pub fn quantize_phases(continuous: &Codebook, bits: u32) -> Result<Codebook> {
    if bits == 0 || bits > MAX_PHASE_BITS {
        return Err(Error::validation(
            "bits",
            format!("must lie in 1..={MAX_PHASE_BITS}"),
        ));
    }
    let levels = 1u32 << bits;
    let step = 2.0 * PI / levels as f64;
    let states: Vec<u32> = continuous
        .phases
        .iter()
        .map(|&p| {
            let x = p.rem_euclid(2.0 * PI) / step;
            ((x - 0.5).ceil() as i64).rem_euclid(levels as i64) as u32
        })
        .collect();
    Codebook::from_states(continuous.rows, continuous.cols, bits, &states)
}

/// Unquantized linear phase gradient that steers `theta_in` to `theta_out`.
pub fn anomalous_phase_profile(
    panel: &RisPanel,
    theta_in: PlanarAngle,
    theta_out_target: PlanarAngle,
) -> Result<Codebook> {
    panel.validate()?;
    let s = front_sine(theta_in)? + front_sine(theta_out_target)?;
    let xs = panel.column_positions();
    let row: Vec<f64> = xs.iter().map(|x| -2.0 * PI * x * s).collect();
    let phases = (0..panel.rows).flat_map(|_| row.iter().copied()).collect();
    Codebook::from_phases(panel.rows, panel.cols, phases)
}

/// Anomalous-reflection codebook quantized to the panel's phase resolution.
///
/// With 1-bit control the column phasors are real, so the pattern has a
/// mirror lobe of the same array-factor magnitude; only the element pattern
/// decides which of the two is the global maximum.
pub fn generate_anomalous_codebook(
    panel: &RisPanel,
    theta_in: PlanarAngle,
    theta_out_target: PlanarAngle,
) -> Result<Codebook> {
    let profile = anomalous_phase_profile(panel, theta_in, theta_out_target)?;
    quantize_phases(&profile, panel.phase_bits)
}

/// Precomputed per-column phasor sums of a codebook on a panel.
///
/// Point evaluations and [`pattern_table`] both go through this type so their
/// results agree bit for bit.
#[derive(Debug, Clone)]
pub struct PanelResponse {
    positions: Vec<f64>,
    column_sums: Vec<Complex64>,
    exponent: f64,
    loss_db: f64,
}

impl PanelResponse {
    pub fn new(panel: &RisPanel, codebook: &Codebook) -> Result<Self> {
        panel.validate()?;
        codebook.check_panel(panel)?;
        let column_sums = (0..panel.cols)
            .map(|c| {
                (0..panel.rows)
                    .map(|r| Complex64::from_polar(1.0, codebook.phase(r, c)))
                    .sum()
            })
            .collect();
        Ok(PanelResponse {
            positions: panel.column_positions(),
            column_sums,
            exponent: panel.element_pattern_exponent,
            loss_db: panel.loss_db,
        })
    }

    pub fn gain(&self, theta_in: PlanarAngle, theta_out: PlanarAngle) -> Result<Db> {
        let s = front_sine(theta_in)? + front_sine(theta_out)?;
        let g = element_amplitude(theta_in, self.exponent)
            * element_amplitude(theta_out, self.exponent);
        let af: Complex64 = self
            .positions
            .iter()
            .zip(&self.column_sums)
            .map(|(x, cs)| cs * Complex64::from_polar(1.0, 2.0 * PI * x * s))
            .sum();
        let amp = af.norm() * g;
        if amp > 0.0 {
            Ok(Db::new(20.0 * amp.log10() - self.loss_db))
        } else {
            Ok(Db::NO_POWER)
        }
    }
}

/// Equivalent RIS radiation pattern `F_RIS(theta_out, theta_in)` in dB.
pub fn f_ris_gain(
    panel: &RisPanel,
    codebook: &Codebook,
    theta_in: PlanarAngle,
    theta_out: PlanarAngle,
) -> Result<Db> {
    PanelResponse::new(panel, codebook)?.gain(theta_in, theta_out)
}

/// `F_RIS` sampled over departure angles for a fixed incidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationPatternTable {
    pub theta_in: PlanarAngle,
    pub gains: Vec<(PlanarAngle, Db)>,
}

impl RadiationPatternTable {
    pub fn get(&self, theta_out: PlanarAngle) -> Option<Db> {
        self.gains
            .iter()
            .find(|(a, _)| *a == theta_out)
            .map(|(_, g)| *g)
    }

    /// Grid point of the maximum gain; the first one wins on ties.
    pub fn peak(&self) -> (PlanarAngle, Db) {
        let mut best = self.gains[0];
        for &(a, g) in &self.gains[1..] {
            if g > best.1 {
                best = (a, g);
            }
        }
        best
    }
}

pub fn pattern_table(
    panel: &RisPanel,
    codebook: &Codebook,
    theta_in: PlanarAngle,
    theta_out_grid: &[PlanarAngle],
) -> Result<RadiationPatternTable> {
    if theta_out_grid.is_empty() {
        return Err(Error::domain("pattern grid is empty"));
    }
    let resp = PanelResponse::new(panel, codebook)?;
    let gains = theta_out_grid
        .iter()
        .map(|&a| Ok((a, resp.gain(theta_in, a)?)))
        .collect::<Result<_>>()?;
    Ok(RadiationPatternTable { theta_in, gains })
}

/// Uniform departure grid over the open front half-space, `step` degrees
/// apart, starting at `step`.
pub fn front_grid(step_deg: f64) -> Vec<PlanarAngle> {
    let n = (180.0 / step_deg).round() as usize;
    (1..n)
        .map(|i| PlanarAngle::ris(i as f64 * step_deg))
        .collect()
}
