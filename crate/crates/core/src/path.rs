//! Propagation paths and the sparse sub-channel containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{delay_to_bin, Db, DelayGrid, Frame, PlanarAngle};

/// One propagation path with antenna gains already stripped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    /// Received-to-transmitted power ratio.
    pub power_db: Db,
    pub delay_ns: f64,
    pub aod: PlanarAngle,
    pub aoa: PlanarAngle,
    /// Carrier phase of the complex amplitude.
    pub phase_rad: f64,
}

impl PathComponent {
    pub fn new(power_db: Db, delay_ns: f64, aod: PlanarAngle, aoa: PlanarAngle) -> Self {
        PathComponent {
            power_db,
            delay_ns,
            aod,
            aoa,
            phase_rad: 0.0,
        }
    }

    pub fn with_phase(mut self, phase_rad: f64) -> Self {
        self.phase_rad = phase_rad;
        self
    }
}

/// Which hop of the RIS link a sub-channel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    TxRis,
    RisRx,
}

impl Side {
    /// Frames of (departure, arrival) angles on this hop.
    pub fn frames(self) -> (Frame, Frame) {
        match self {
            Side::TxRis => (Frame::Tx, Frame::Ris),
            Side::RisRx => (Frame::Ris, Frame::Rx),
        }
    }

    fn default_label(self, index: usize) -> String {
        match self {
            Side::TxRis => (index + 1).to_string(),
            Side::RisRx => {
                let mut n = index;
                let mut s = Vec::new();
                loop {
                    s.push(b'A' + (n % 26) as u8);
                    if n < 26 {
                        break;
                    }
                    n = n / 26 - 1;
                }
                s.reverse();
                String::from_utf8(s).expect("ascii")
            }
        }
    }
}

/// Sparse realization of a sub-channel impulse response `h(theta, tau)`.
///
/// Tx-RIS paths carry the RIS incidence angle (`theta_in`) as their arrival;
/// RIS-Rx paths carry the RIS departure angle (`theta_out`) as their
/// departure. Construction rejects paths whose angles are in the wrong frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubChannel {
    side: Side,
    paths: Vec<PathComponent>,
    labels: Vec<String>,
}

impl SubChannel {
    /// Paths are labeled `1, 2, ...` on the Tx-RIS hop and `A, B, ...` on
    /// the RIS-Rx hop.
    pub fn new(side: Side, paths: Vec<PathComponent>) -> Result<Self> {
        let labels = (0..paths.len()).map(|i| side.default_label(i)).collect();
        Self::with_labels(side, paths, labels)
    }

    pub fn with_labels(side: Side, paths: Vec<PathComponent>, labels: Vec<String>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::domain("a sub-channel needs at least one path"));
        }
        if labels.len() != paths.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} paths",
                labels.len(),
                paths.len()
            )));
        }
        let (dep, arr) = side.frames();
        for p in &paths {
            p.aod.expect_frame(dep)?;
            p.aoa.expect_frame(arr)?;
            if !(p.delay_ns >= 0.0) || !p.delay_ns.is_finite() {
                return Err(Error::domain(format!(
                    "path delay must be non-negative, got {} ns",
                    p.delay_ns
                )));
            }
        }
        Ok(SubChannel {
            side,
            paths,
            labels,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// RIS-side angle of path `i`: `theta_in` on Tx-RIS, `theta_out` on RIS-Rx.
    pub fn ris_angle(&self, i: usize) -> PlanarAngle {
        match self.side {
            Side::TxRis => self.paths[i].aoa,
            Side::RisRx => self.paths[i].aod,
        }
    }

    /// Terminal-side angle of path `i`: `theta_Tx` or `theta_Rx`.
    pub fn terminal_angle(&self, i: usize) -> PlanarAngle {
        match self.side {
            Side::TxRis => self.paths[i].aod,
            Side::RisRx => self.paths[i].aoa,
        }
    }

    /// Moves every delay onto the nearest grid point, as a sounder would
    /// report it.
    pub fn snapped_to_grid(&self, grid: &DelayGrid) -> Result<SubChannel> {
        let mut out = self.clone();
        for p in &mut out.paths {
            p.delay_ns = grid.bin_center(delay_to_bin(p.delay_ns, grid)?);
        }
        Ok(out)
    }

    /// Adds `gain` to every path power.
    pub fn scaled(&self, gain: Db) -> SubChannel {
        let mut out = self.clone();
        for p in &mut out.paths {
            p.power_db = p.power_db + gain;
        }
        out
    }

    pub(crate) fn paths_mut(&mut self) -> &mut [PathComponent] {
        &mut self.paths
    }
}
