//! Terminal antenna patterns (`F_s`, `F_u`) and array element offsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Db, PlanarAngle};

/// Default sidelobe floor of the horn model, dB below peak.
pub const DEFAULT_SIDELOBE_FLOOR_DB: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaKind {
    Horn,
    Omni,
    Isotropic,
}

/// Azimuth gain pattern of a terminal antenna.
///
/// Horns use a Gaussian mainlobe: the attenuation at an offset `d` from
/// boresight is `12·(d/HPBW)²` dB, so the gain is exactly 3 dB down at
/// `±HPBW/2`, and is clamped at the sidelobe floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    kind: AntennaKind,
    peak_gain: Db,
    hpbw_deg: f64,
    pointing: PlanarAngle,
    sidelobe_floor_db: f64,
    sign: f64,
}

impl AntennaPattern {
    pub fn horn(peak_gain_dbi: f64, hpbw_deg: f64, pointing: PlanarAngle) -> Result<Self> {
        if !(hpbw_deg > 0.0 && hpbw_deg <= 360.0) {
            return Err(Error::validation("hpbw_deg", "must lie in (0, 360]"));
        }
        Ok(AntennaPattern {
            kind: AntennaKind::Horn,
            peak_gain: Db::try_new(peak_gain_dbi)?,
            hpbw_deg,
            pointing,
            sidelobe_floor_db: DEFAULT_SIDELOBE_FLOOR_DB,
            sign: 1.0,
        })
    }

    pub fn omni(gain_dbi: f64) -> Result<Self> {
        Ok(AntennaPattern {
            kind: AntennaKind::Omni,
            peak_gain: Db::try_new(gain_dbi)?,
            hpbw_deg: 360.0,
            pointing: PlanarAngle::ris(0.0),
            sidelobe_floor_db: 0.0,
            sign: 1.0,
        })
    }

    pub fn isotropic() -> Self {
        AntennaPattern {
            kind: AntennaKind::Isotropic,
            peak_gain: Db::ZERO,
            hpbw_deg: 360.0,
            pointing: PlanarAngle::ris(0.0),
            sidelobe_floor_db: 0.0,
            sign: 1.0,
        }
    }

    /// Sidelobe floor in dB below peak (positive number).
    pub fn with_sidelobe_floor(mut self, floor_db_below_peak: f64) -> Result<Self> {
        if !(floor_db_below_peak >= 0.0) {
            return Err(Error::validation(
                "sidelobe_floor_db",
                "must be a non-negative attenuation",
            ));
        }
        self.sidelobe_floor_db = floor_db_below_peak;
        Ok(self)
    }

    /// Same antenna rotated to a new boresight.
    pub fn pointed_at(mut self, pointing: PlanarAngle) -> Self {
        self.pointing = pointing;
        self
    }

    /// The pattern with every gain sign-flipped; undoes [`crate::synth::apply_antenna`].
    pub fn negated(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    pub fn kind(&self) -> AntennaKind {
        self.kind
    }

    pub fn peak_gain(&self) -> Db {
        Db::new(self.sign * self.peak_gain.value())
    }

    pub fn hpbw_deg(&self) -> f64 {
        self.hpbw_deg
    }

    pub fn pointing(&self) -> PlanarAngle {
        self.pointing
    }

    /// Gain in dBi towards `angle`. The angle is converted into the
    /// pointing's frame before comparison.
    pub fn gain(&self, angle: PlanarAngle) -> Db {
        let g = match self.kind {
            AntennaKind::Isotropic | AntennaKind::Omni => self.peak_gain.value(),
            AntennaKind::Horn => {
                let off = self
                    .pointing
                    .separation(angle.to_frame(self.pointing.frame()))
                    .expect("converted to matching frame");
                let atten = 12.0 * (off / self.hpbw_deg).powi(2);
                self.peak_gain.value() - atten.min(self.sidelobe_floor_db)
            }
        };
        Db::new(self.sign * g)
    }
}

/// Free-function form of [`AntennaPattern::gain`].
pub fn antenna_gain(pattern: &AntennaPattern, angle: PlanarAngle) -> Db {
    pattern.gain(angle)
}

/// Distance of an array element from the reference element, in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArrayElementOffset(f64);

impl ArrayElementOffset {
    pub const REFERENCE: ArrayElementOffset = ArrayElementOffset(0.0);

    pub fn new(offset_wavelengths: f64) -> Result<Self> {
        if !(offset_wavelengths >= 0.0) || !offset_wavelengths.is_finite() {
            return Err(Error::validation(
                "offset_wavelengths",
                "must be finite and non-negative",
            ));
        }
        Ok(ArrayElementOffset(offset_wavelengths))
    }

    /// Offset of element `index` in a uniform linear array.
    pub fn uniform_linear(index: usize, spacing_wavelengths: f64) -> Result<Self> {
        Self::new(index as f64 * spacing_wavelengths)
    }

    pub fn wavelengths(self) -> f64 {
        self.0
    }
}
