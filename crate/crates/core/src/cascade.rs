//! Cascading the Tx-RIS and RIS-Rx hops.
//!
//! Two routes produce the cascaded impulse response:
//!
//! * [`cascade_direct`] pairs every Tx-RIS path with every RIS-Rx path, adds
//!   their delays and multiplies their amplitudes with the RIS gain for the
//!   pair of RIS-side angles.
//! * [`cascade_convolution`] renders each hop onto an (angle, delay) grid and,
//!   for every pair of RIS-side angle cells, convolves the two delay profiles
//!   and weights the result by the RIS gain.
//!
//! With on-grid delays both routes give the same binned response; that
//! identity is what the form-equivalence tests check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antenna::{AntennaPattern, ArrayElementOffset};
use crate::error::{Error, Result};
use crate::path::{Side, SubChannel};
use crate::ris::{Codebook, PanelResponse, RisPanel};
use crate::synth::steering_phase;
use crate::units::{delay_to_bin, power_to_db_or_floor, Db, DelayGrid, Frame, PlanarAngle};

/// Powers at or below this linear ratio (-300 dB) read as empty bins.
pub const NUMERICAL_ZERO_POWER: f64 = 1e-30;

const ANGLE_MATCH_DEG: f64 = 1e-9;

/// Source of `F_RIS(theta_out, theta_in)` in dB.
pub trait RisGain {
    fn ris_gain(&self, theta_out: PlanarAngle, theta_in: PlanarAngle) -> Result<Db>;
}

impl<F> RisGain for F
where
    F: Fn(PlanarAngle, PlanarAngle) -> Result<Db>,
{
    fn ris_gain(&self, theta_out: PlanarAngle, theta_in: PlanarAngle) -> Result<Db> {
        self(theta_out, theta_in)
    }
}

/// The same gain for every angle pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantGain(pub Db);

impl RisGain for ConstantGain {
    fn ris_gain(&self, _: PlanarAngle, _: PlanarAngle) -> Result<Db> {
        Ok(self.0)
    }
}

/// Array-factor gain of a configured panel.
#[derive(Debug, Clone)]
pub struct PanelGain(PanelResponse);

impl PanelGain {
    pub fn new(panel: &RisPanel, codebook: &Codebook) -> Result<Self> {
        Ok(PanelGain(PanelResponse::new(panel, codebook)?))
    }
}

impl RisGain for PanelGain {
    fn ris_gain(&self, theta_out: PlanarAngle, theta_in: PlanarAngle) -> Result<Db> {
        self.0.gain(theta_in, theta_out)
    }
}

/// Gain samples on a (theta_out, theta_in) grid.
///
/// Off-grid lookups fail unless bilinear interpolation (in dB) is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisGainTable {
    out_axis: Vec<f64>,
    in_axis: Vec<f64>,
    /// Row-major, one row per `theta_out`.
    gains: Vec<Db>,
    interpolate: bool,
}

fn sorted_axis(axis: &[PlanarAngle], name: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(axis.len());
    for a in axis {
        out.push(a.expect_frame(Frame::Ris)?.degrees());
    }
    if out.is_empty() || out.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Dimension(format!(
            "{name} axis must be non-empty and strictly increasing"
        )));
    }
    Ok(out)
}

fn locate(axis: &[f64], deg: f64) -> Option<usize> {
    axis.iter()
        .position(|&a| (a - deg).abs() <= ANGLE_MATCH_DEG)
}

impl RisGainTable {
    pub fn new(out_axis: &[PlanarAngle], in_axis: &[PlanarAngle], gains: Vec<Db>) -> Result<Self> {
        let out_axis = sorted_axis(out_axis, "theta_out")?;
        let in_axis = sorted_axis(in_axis, "theta_in")?;
        if gains.len() != out_axis.len() * in_axis.len() {
            return Err(Error::Dimension(format!(
                "{} gains for a {}x{} table",
                gains.len(),
                out_axis.len(),
                in_axis.len()
            )));
        }
        Ok(RisGainTable {
            out_axis,
            in_axis,
            gains,
            interpolate: false,
        })
    }

    /// Samples `source` on the given axes.
    pub fn sample(
        source: &dyn RisGain,
        out_axis: &[PlanarAngle],
        in_axis: &[PlanarAngle],
    ) -> Result<Self> {
        let mut gains = Vec::with_capacity(out_axis.len() * in_axis.len());
        for &o in out_axis {
            for &i in in_axis {
                gains.push(source.ris_gain(o, i)?);
            }
        }
        Self::new(out_axis, in_axis, gains)
    }

    pub fn with_interpolation(mut self, enabled: bool) -> Self {
        self.interpolate = enabled;
        self
    }

    fn at(&self, o: usize, i: usize) -> Db {
        self.gains[o * self.in_axis.len() + i]
    }

    fn bracket(axis: &[f64], deg: f64) -> Option<(usize, usize, f64)> {
        if deg < axis[0] || deg > axis[axis.len() - 1] {
            return None;
        }
        if axis.len() == 1 {
            return Some((0, 0, 0.0));
        }
        let hi = axis.iter().position(|&a| a >= deg)?.max(1);
        let lo = hi - 1;
        Some((lo, hi, (deg - axis[lo]) / (axis[hi] - axis[lo])))
    }
}

impl RisGain for RisGainTable {
    fn ris_gain(&self, theta_out: PlanarAngle, theta_in: PlanarAngle) -> Result<Db> {
        let o = theta_out.expect_frame(Frame::Ris)?.degrees();
        let i = theta_in.expect_frame(Frame::Ris)?.degrees();
        let missing = || Error::MissingGain {
            theta_out: o,
            theta_in: i,
        };
        if let (Some(oi), Some(ii)) = (locate(&self.out_axis, o), locate(&self.in_axis, i)) {
            return Ok(self.at(oi, ii));
        }
        if !self.interpolate {
            return Err(missing());
        }
        let (o0, o1, to) = Self::bracket(&self.out_axis, o).ok_or_else(missing)?;
        let (i0, i1, ti) = Self::bracket(&self.in_axis, i).ok_or_else(missing)?;
        let corners = [
            self.at(o0, i0),
            self.at(o0, i1),
            self.at(o1, i0),
            self.at(o1, i1),
        ];
        if corners.iter().any(|g| g.is_no_power()) {
            return Err(missing());
        }
        let v = (1.0 - to) * ((1.0 - ti) * corners[0].value() + ti * corners[1].value())
            + to * ((1.0 - ti) * corners[2].value() + ti * corners[3].value());
        Ok(Db::new(v))
    }
}

/// Antenna patterns and array offsets of the two terminals.
#[derive(Debug, Clone, Copy)]
pub struct Terminals {
    pub tx_pattern: AntennaPattern,
    pub rx_pattern: AntennaPattern,
    pub tx_offset: ArrayElementOffset,
    pub rx_offset: ArrayElementOffset,
}

impl Default for Terminals {
    fn default() -> Self {
        Terminals {
            tx_pattern: AntennaPattern::isotropic(),
            rx_pattern: AntennaPattern::isotropic(),
            tx_offset: ArrayElementOffset::REFERENCE,
            rx_offset: ArrayElementOffset::REFERENCE,
        }
    }
}

/// One cascaded path `(n1, n2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePath {
    pub idx_tx_ris: usize,
    pub idx_ris_rx: usize,
    /// `<n1 label>-<n2 label>`, e.g. `1-A`.
    pub label: String,
    pub power_db: Db,
    pub delay_ns: f64,
    pub aoa_rx: PlanarAngle,
    pub phase_rad: f64,
}

impl CascadePath {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.power_db.to_amplitude(), self.phase_rad)
    }
}

fn expect_side(sub: &SubChannel, side: Side) -> Result<()> {
    if sub.side() == side {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "expected a {side:?} sub-channel, got {:?}",
            sub.side()
        )))
    }
}

/// Path-by-path cascade: `|sub1|·|sub2|` paths, `n1`-major.
///
/// Power per pair is `P_n1 + P_n2 + F_RIS(theta_out_n2, theta_in_n1) +
/// F_s(theta_Tx_n1) + F_u(theta_Rx_n2)` in dB, delay is `tau_n1 + tau_n2`
/// and phase adds both path phases and both steering phases.
pub fn cascade_direct(
    sub1: &SubChannel,
    sub2: &SubChannel,
    f_ris: &dyn RisGain,
    terminals: &Terminals,
) -> Result<Vec<CascadePath>> {
    expect_side(sub1, Side::TxRis)?;
    expect_side(sub2, Side::RisRx)?;
    let mut out = Vec::with_capacity(sub1.len() * sub2.len());
    for (n1, p1) in sub1.paths().iter().enumerate() {
        let fs = terminals.tx_pattern.gain(p1.aod);
        let steer_tx = steering_phase(terminals.tx_offset, p1.aod);
        for (n2, p2) in sub2.paths().iter().enumerate() {
            let f = f_ris.ris_gain(p2.aod, p1.aoa)?;
            let fu = terminals.rx_pattern.gain(p2.aoa);
            let steer_rx = steering_phase(terminals.rx_offset, p2.aoa);
            out.push(CascadePath {
                idx_tx_ris: n1,
                idx_ris_rx: n2,
                label: format!("{}-{}", sub1.labels()[n1], sub2.labels()[n2]),
                power_db: p1.power_db + p2.power_db + f + fs + fu,
                delay_ns: p1.delay_ns + p2.delay_ns,
                aoa_rx: p2.aoa,
                phase_rad: p1.phase_rad + p2.phase_rad + steer_tx + steer_rx,
            });
        }
    }
    Ok(out)
}

/// `P_n1 + P_n2 + F_RIS`, all in dB.
pub fn power_cascade_db(p1: Db, p2: Db, f_ris: Db) -> Db {
    p1 + p2 + f_ris
}

/// Model-minus-measurement power difference.
pub fn delta_p(p_conv: Db, p_measured: Db) -> Db {
    p_conv - p_measured
}

/// Complex impulse response on a delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCir {
    grid: DelayGrid,
    taps: Vec<Complex64>,
}

impl DelayCir {
    pub fn new(grid: DelayGrid, taps: Vec<Complex64>) -> Result<Self> {
        if taps.len() != grid.num_bins() {
            return Err(Error::Dimension(format!(
                "{} taps on a {}-bin grid",
                taps.len(),
                grid.num_bins()
            )));
        }
        Ok(DelayCir { grid, taps })
    }

    pub fn zeros(grid: DelayGrid) -> Self {
        DelayCir {
            taps: vec![Complex64::new(0.0, 0.0); grid.num_bins()],
            grid,
        }
    }

    /// Coherent sum of `(delay, amplitude)` pairs at their nearest bins.
    pub fn from_paths(
        grid: DelayGrid,
        paths: impl IntoIterator<Item = (f64, Complex64)>,
    ) -> Result<Self> {
        let mut cir = Self::zeros(grid);
        for (delay, amp) in paths {
            let b = delay_to_bin(delay, &grid)?;
            cir.taps[b] += amp;
        }
        Ok(cir)
    }

    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    /// Highest non-zero bin, if any.
    pub fn last_occupied(&self) -> Option<usize> {
        self.taps.iter().rposition(|t| t.norm_sqr() > 0.0)
    }
}

/// Binned response of a set of cascade paths.
pub fn bin_cascade_paths(paths: &[CascadePath], grid: DelayGrid) -> Result<DelayCir> {
    DelayCir::from_paths(grid, paths.iter().map(|p| (p.delay_ns, p.amplitude())))
}

/// Power per delay bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdp {
    pub grid: DelayGrid,
    pub power_db: Vec<Db>,
}

/// `|h(tau)|²` per bin in dB; empty bins map to [`Db::NO_POWER`].
pub fn cir_to_pdp(cir: &DelayCir) -> Pdp {
    Pdp {
        grid: cir.grid,
        power_db: cir
            .taps
            .iter()
            .map(|t| {
                let p = t.norm_sqr();
                if p <= NUMERICAL_ZERO_POWER {
                    Db::NO_POWER
                } else {
                    power_to_db_or_floor(p)
                }
            })
            .collect(),
    }
}

/// Linear convolution of two tap sequences, length `a + b - 1`.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x.norm_sqr() == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// A hop's impulse response on an (RIS-side angle, delay) grid.
///
/// Each cell holds the coherent sum of the paths snapped to it, with the
/// terminal antenna gain and steering phase folded into the amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedCir {
    side: Side,
    angles: Vec<PlanarAngle>,
    grid: DelayGrid,
    /// Angle-major: row `i` holds the delay taps of `angles[i]`.
    values: Vec<Complex64>,
}

impl GriddedCir {
    fn render(
        sub: &SubChannel,
        grid: DelayGrid,
        angles: Vec<PlanarAngle>,
        cell_of: impl Fn(PlanarAngle) -> usize,
        pattern: &AntennaPattern,
        offset: ArrayElementOffset,
    ) -> Result<Self> {
        let n = grid.num_bins();
        let mut values = vec![Complex64::new(0.0, 0.0); angles.len() * n];
        for (i, p) in sub.paths().iter().enumerate() {
            let term = sub.terminal_angle(i);
            let amp = (p.power_db + pattern.gain(term)).to_amplitude();
            let phase = p.phase_rad + steering_phase(offset, term);
            let row = cell_of(sub.ris_angle(i));
            let b = delay_to_bin(p.delay_ns, &grid)?;
            values[row * n + b] += Complex64::from_polar(amp, phase);
        }
        Ok(GriddedCir {
            side: sub.side(),
            angles,
            grid,
            values,
        })
    }

    /// Angle axis made of the exact RIS-side path angles, so the angular
    /// integral reduces to a sum over paths.
    pub fn from_subchannel(
        sub: &SubChannel,
        grid: DelayGrid,
        pattern: &AntennaPattern,
        offset: ArrayElementOffset,
    ) -> Result<Self> {
        let mut angles: Vec<PlanarAngle> = (0..sub.len()).map(|i| sub.ris_angle(i)).collect();
        angles.sort_by(|a, b| a.degrees().total_cmp(&b.degrees()));
        angles.dedup();
        let lookup = angles.clone();
        let cell_of = move |a: PlanarAngle| {
            lookup
                .binary_search_by(|x| x.degrees().total_cmp(&a.degrees()))
                .expect("angle is on its own axis")
        };
        Self::render(sub, grid, angles, cell_of, pattern, offset)
    }

    /// Uniform angle axis `step, 2·step, ... < 180` with nearest-cell
    /// snapping; pairs with a gridded gain table.
    pub fn from_subchannel_uniform(
        sub: &SubChannel,
        grid: DelayGrid,
        step_deg: f64,
        pattern: &AntennaPattern,
        offset: ArrayElementOffset,
    ) -> Result<Self> {
        if !(step_deg > 0.0 && step_deg < 90.0) {
            return Err(Error::validation("step_deg", "must lie in (0, 90)"));
        }
        let angles = crate::ris::front_grid(step_deg);
        let last = angles.len() - 1;
        let cell_of = move |a: PlanarAngle| {
            let k = (a.degrees() / step_deg).round() as isize - 1;
            k.clamp(0, last as isize) as usize
        };
        Self::render(sub, grid, angles, cell_of, pattern, offset)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn angles(&self) -> &[PlanarAngle] {
        &self.angles
    }

    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.grid.num_bins();
        &self.values[i * n..(i + 1) * n]
    }
}

/// Angular-convolution cascade.
///
/// For each `(theta_out, theta_in)` cell pair the two delay profiles are
/// convolved and scaled by the linear amplitude of `F_RIS`; the output has
/// `len1 + len2 - 1` bins. Accumulation runs in a fixed order.
pub fn cascade_convolution(
    sub1_grid: &GriddedCir,
    sub2_grid: &GriddedCir,
    f_ris: &dyn RisGain,
) -> Result<DelayCir> {
    if sub1_grid.side != Side::TxRis || sub2_grid.side != Side::RisRx {
        return Err(Error::Dimension(
            "cascade_convolution takes (Tx-RIS grid, RIS-Rx grid)".into(),
        ));
    }
    if sub1_grid.grid.bin_width_ns() != sub2_grid.grid.bin_width_ns() {
        return Err(Error::Dimension(format!(
            "delay bin widths differ: {} ns vs {} ns",
            sub1_grid.grid.bin_width_ns(),
            sub2_grid.grid.bin_width_ns()
        )));
    }
    let n1 = sub1_grid.grid.num_bins();
    let n2 = sub2_grid.grid.num_bins();
    let out_grid = sub1_grid.grid.with_num_bins(n1 + n2 - 1)?;
    let mut out = DelayCir::zeros(out_grid);

    let sparse = |row: &[Complex64]| -> Vec<(usize, Complex64)> {
        row.iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(i, v)| (i, *v))
            .collect()
    };
    let rows1: Vec<_> = (0..sub1_grid.angles.len())
        .map(|i| sparse(sub1_grid.row(i)))
        .collect();
    let rows2: Vec<_> = (0..sub2_grid.angles.len())
        .map(|i| sparse(sub2_grid.row(i)))
        .collect();

    for (o, taps2) in rows2.iter().enumerate() {
        if taps2.is_empty() {
            continue;
        }
        let theta_out = sub2_grid.angles[o];
        for (i, taps1) in rows1.iter().enumerate() {
            if taps1.is_empty() {
                continue;
            }
            let w = f_ris
                .ris_gain(theta_out, sub1_grid.angles[i])?
                .to_amplitude();
            if w == 0.0 {
                continue;
            }
            for &(b2, h2) in taps2 {
                for &(b1, h1) in taps1 {
                    out.taps[b1 + b2] += h2 * h1 * w;
                }
            }
        }
    }
    Ok(out)
}
