//! Decibel quantities, framed azimuth angles and the sounder delay grid.
//!
//! Angles follow the measurement layout conventions: azimuths are referenced
//! to east = 0 deg. Angles observed at the Tx and at the RIS count
//! counterclockwise; angles observed at the Rx turntable count clockwise.
//! Every [`PlanarAngle`] carries its [`Frame`] and comparisons across frames
//! must go through [`PlanarAngle::to_frame`].

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A power ratio or gain in decibels.
///
/// `-inf` is the "no power" sentinel produced for empty delay bins. It is
/// never a meaningful operand of dB arithmetic; check [`Db::is_no_power`]
/// before summing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Db(f64);

impl Db {
    pub const ZERO: Db = Db(0.0);
    pub const NO_POWER: Db = Db(f64::NEG_INFINITY);

    /// Panics on NaN or `+inf`.
    pub fn new(value: f64) -> Self {
        assert!(
            !value.is_nan() && value != f64::INFINITY,
            "invalid dB value {value}"
        );
        Db(value)
    }

    pub fn try_new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            Err(Error::domain(format!("invalid dB value {value}")))
        } else {
            Ok(Db(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_no_power(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Linear power ratio, `10^(dB/10)`.
    #[inline]
    pub fn to_linear(self) -> f64 {
        10f64.powf(self.0 / 10.0)
    }

    /// Linear amplitude ratio, `10^(dB/20)`.
    #[inline]
    pub fn to_amplitude(self) -> f64 {
        10f64.powf(self.0 / 20.0)
    }
}

impl fmt::Display for Db {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*} dB", p, self.0),
            None => write!(f, "{} dB", self.0),
        }
    }
}

impl Add for Db {
    type Output = Db;
    fn add(self, rhs: Db) -> Db {
        Db(self.0 + rhs.0)
    }
}

impl Sub for Db {
    type Output = Db;
    fn sub(self, rhs: Db) -> Db {
        Db(self.0 - rhs.0)
    }
}

impl Neg for Db {
    type Output = Db;
    fn neg(self) -> Db {
        Db(-self.0)
    }
}

/// `10·log10(x)` for a positive power ratio.
pub fn db_from_linear(x: f64) -> Result<Db> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "dB conversion needs a positive finite ratio, got {x}"
        )));
    }
    Ok(Db(10.0 * x.log10()))
}

pub fn linear_from_db(db: Db) -> f64 {
    db.to_linear()
}

/// Power ratio to dB where zero power maps to [`Db::NO_POWER`].
pub(crate) fn power_to_db_or_floor(power: f64) -> Db {
    if power > 0.0 {
        Db(10.0 * power.log10())
    } else {
        Db::NO_POWER
    }
}

/// Observation point and sign convention of an azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    /// Departure at the transmitter, counterclockwise from east.
    Tx,
    /// Incidence or departure at the RIS, counterclockwise from east.
    Ris,
    /// Arrival at the receiver turntable, clockwise from east.
    Rx,
}

impl Frame {
    #[inline]
    pub fn is_clockwise(self) -> bool {
        matches!(self, Frame::Rx)
    }
}

/// An azimuth in `[0, 360)` degrees tagged with its frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarAngle {
    degrees: f64,
    frame: Frame,
}

pub(crate) fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

impl PlanarAngle {
    pub fn new(degrees: f64, frame: Frame) -> Self {
        assert!(degrees.is_finite(), "angle must be finite, got {degrees}");
        PlanarAngle {
            degrees: wrap_degrees(degrees),
            frame,
        }
    }

    pub fn tx(degrees: f64) -> Self {
        Self::new(degrees, Frame::Tx)
    }

    pub fn ris(degrees: f64) -> Self {
        Self::new(degrees, Frame::Ris)
    }

    pub fn rx(degrees: f64) -> Self {
        Self::new(degrees, Frame::Rx)
    }

    #[inline]
    pub fn degrees(self) -> f64 {
        self.degrees
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.degrees.to_radians()
    }

    #[inline]
    pub fn frame(self) -> Frame {
        self.frame
    }

    /// The same physical direction as a counterclockwise-from-east azimuth.
    pub fn ccw_degrees(self) -> f64 {
        if self.frame.is_clockwise() {
            wrap_degrees(360.0 - self.degrees)
        } else {
            self.degrees
        }
    }

    /// Re-express this direction in another frame's sign convention.
    pub fn to_frame(self, frame: Frame) -> PlanarAngle {
        let ccw = self.ccw_degrees();
        let deg = if frame.is_clockwise() {
            360.0 - ccw
        } else {
            ccw
        };
        PlanarAngle::new(deg, frame)
    }

    pub fn expect_frame(self, frame: Frame) -> Result<Self> {
        if self.frame == frame {
            Ok(self)
        } else {
            Err(Error::FrameMismatch {
                expected: frame,
                found: self.frame,
            })
        }
    }

    /// Smallest absolute angular difference in `[0, 180]` degrees.
    ///
    /// Both angles must be in the same frame.
    pub fn separation(self, other: PlanarAngle) -> Result<f64> {
        other.expect_frame(self.frame)?;
        let d = (self.degrees - other.degrees).abs();
        Ok(if d > 180.0 { 360.0 - d } else { d })
    }
}

impl fmt::Display for PlanarAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} deg ({:?})", self.degrees, self.frame)
    }
}

/// Uniform delay axis of a correlation sounder.
///
/// The bin width is the chip duration, i.e. the reciprocal of the measurement
/// bandwidth: 2.5 ns at 400 MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    bin_width_ns: f64,
    num_bins: usize,
}

impl DelayGrid {
    pub fn new(bin_width_ns: f64, num_bins: usize) -> Result<Self> {
        if !(bin_width_ns > 0.0) || !bin_width_ns.is_finite() {
            return Err(Error::validation("bin_width_ns", "must be positive"));
        }
        if num_bins == 0 {
            return Err(Error::validation("num_bins", "must be at least 1"));
        }
        Ok(DelayGrid {
            bin_width_ns,
            num_bins,
        })
    }

    pub fn from_bandwidth_hz(bandwidth_hz: f64, num_bins: usize) -> Result<Self> {
        if !(bandwidth_hz > 0.0) {
            return Err(Error::validation("bandwidth_hz", "must be positive"));
        }
        Self::new(1e9 / bandwidth_hz, num_bins)
    }

    #[inline]
    pub fn bin_width_ns(&self) -> f64 {
        self.bin_width_ns
    }

    #[inline]
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    /// Delay of the centre of bin `bin`.
    #[inline]
    pub fn bin_center(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_ns
    }

    pub fn span_ns(&self) -> f64 {
        self.num_bins as f64 * self.bin_width_ns
    }

    pub fn with_num_bins(&self, num_bins: usize) -> Result<Self> {
        Self::new(self.bin_width_ns, num_bins)
    }
}

/// Nearest delay bin; exact half-bin ties go to the larger delay.
pub fn delay_to_bin(delay_ns: f64, grid: &DelayGrid) -> Result<usize> {
    if !(delay_ns >= 0.0) || !delay_ns.is_finite() {
        return Err(Error::domain(format!(
            "delay must be a finite non-negative value, got {delay_ns} ns"
        )));
    }
    let bin = (delay_ns / grid.bin_width_ns + 0.5).floor() as usize;
    if bin >= grid.num_bins {
        return Err(Error::OutOfRange {
            bin,
            num_bins: grid.num_bins,
        });
    }
    Ok(bin)
}

/// Propagation delay of a straight path of `meters`, in ns.
#[inline]
pub fn distance_to_delay_ns(meters: f64) -> f64 {
    meters / SPEED_OF_LIGHT * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sounder_grid() -> DelayGrid {
        DelayGrid::from_bandwidth_hz(400e6, 511).unwrap()
    }

    #[test]
    fn db_examples() {
        assert_eq!(db_from_linear(1.0).unwrap(), Db::ZERO);
        assert_abs_diff_eq!(
            db_from_linear(100.0).unwrap().value(),
            20.0,
            epsilon = 1e-12
        );
        // 10*log10(0.5), 30-digit mpmath reference
        assert_abs_diff_eq!(
            db_from_linear(0.5).unwrap().value(),
            -3.010_299_956_639_812,
            epsilon = 1e-12
        );
        assert!(db_from_linear(0.0).is_err());
        assert!(db_from_linear(-1.0).is_err());
        assert!(db_from_linear(f64::NAN).is_err());
    }

    #[test]
    fn sounder_bandwidth_gives_exact_bin_width() {
        assert_eq!(sounder_grid().bin_width_ns(), 2.5);
    }

    #[test]
    fn delay_binning_examples() {
        let g = sounder_grid();
        assert_eq!(delay_to_bin(17.5, &g).unwrap(), 7);
        assert_eq!(delay_to_bin(0.0, &g).unwrap(), 0);
        let d = distance_to_delay_ns(5.0);
        assert_abs_diff_eq!(d, 16.678_204_759_907_6, epsilon = 1e-9);
        assert_eq!(delay_to_bin(d, &g).unwrap(), 7);
        assert_eq!(g.bin_center(7), 17.5);
    }

    #[test]
    fn delay_binning_ties_round_up() {
        let g = sounder_grid();
        assert_eq!(delay_to_bin(1.25, &g).unwrap(), 1);
        assert_eq!(delay_to_bin(3.75, &g).unwrap(), 2);
    }

    #[test]
    fn delay_binning_errors() {
        let g = DelayGrid::new(2.5, 4).unwrap();
        assert!(matches!(
            delay_to_bin(10.0, &g),
            Err(Error::OutOfRange {
                bin: 4,
                num_bins: 4
            })
        ));
        assert!(delay_to_bin(-0.1, &g).is_err());
    }

    #[test]
    fn frames_convert_and_refuse_mixed_comparison() {
        let a = PlanarAngle::ris(270.0);
        let b = a.to_frame(Frame::Rx);
        assert_eq!(b.degrees(), 90.0);
        assert_eq!(b.to_frame(Frame::Ris), a);
        assert!(matches!(a.separation(b), Err(Error::FrameMismatch { .. })));
        assert_eq!(
            PlanarAngle::rx(350.0)
                .separation(PlanarAngle::rx(10.0))
                .unwrap(),
            20.0
        );
    }

    #[test]
    fn tiny_negative_angle_wraps_below_360() {
        let a = PlanarAngle::ris(-1e-20);
        assert!(a.degrees() < 360.0);
    }

    proptest! {
        #[test]
        fn angle_wrap(x in -1e6f64..1e6, k in -50i32..50) {
            let a = PlanarAngle::ris(x);
            prop_assert!(a.degrees() >= 0.0 && a.degrees() < 360.0);
            let b = PlanarAngle::ris(x + 360.0 * k as f64);
            prop_assert!(a.separation(b).unwrap() < 1e-6);
        }

        #[test]
        fn db_round_trip(y in -200f64..200.0) {
            let back = db_from_linear(linear_from_db(Db::new(y))).unwrap();
            prop_assert!((back.value() - y).abs() < 1e-12);
        }

        #[test]
        fn bin_center_idempotent(b in 0usize..511) {
            let g = sounder_grid();
            prop_assert_eq!(delay_to_bin(g.bin_center(b), &g).unwrap(), b);
        }
    }
}
