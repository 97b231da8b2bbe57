//! PN-correlation channel sounding and rotating-horn scans.
//!
//! The sounder is simulated at complex baseband with one sample per chip: a
//! periodic m-sequence passes through the discrete channel, white noise is
//! added, and the received period is circularly correlated with the
//! reference and normalized by the sequence length. With ±1 chips the
//! estimate of bin `k` is `h[k] - (1/N)·Σ_{j≠k} h[j]`.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::antenna::AntennaPattern;
use crate::cascade::{cir_to_pdp, DelayCir, Pdp};
use crate::error::{Error, Result};
use crate::path::PathComponent;
use crate::units::{Db, DelayGrid, Frame, PlanarAngle};

/// Feedback polynomials `x^n + ... + 1` of the m-sequence generator, listed
/// by their non-constant exponents. All are primitive over GF(2).
pub const PRIMITIVE_POLYNOMIALS: [(u32, &[u32]); 15] = [
    (2, &[2, 1]),
    (3, &[3, 2]),
    (4, &[4, 3]),
    (5, &[5, 3]),
    (6, &[6, 5]),
    (7, &[7, 6]),
    (8, &[8, 6, 5, 4]),
    (9, &[9, 5]),
    (10, &[10, 7]),
    (11, &[11, 9]),
    (12, &[12, 11, 10, 4]),
    (13, &[13, 12, 11, 8]),
    (14, &[14, 13, 12, 2]),
    (15, &[15, 14]),
    (16, &[16, 15, 13, 4]),
];

/// Maximal-length ±1 sequence of length `2^order - 1` (bit 0 maps to +1).
pub fn generate_mseq(order: u32) -> Result<Vec<i8>> {
    let taps = PRIMITIVE_POLYNOMIALS
        .iter()
        .find(|(o, _)| *o == order)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::domain(format!("m-sequence order {order} is not in 2..=16")))?;
    let mask: u32 = taps.iter().map(|t| 1u32 << (t - 1)).fold(0, |a, b| a | b);
    let len = (1usize << order) - 1;
    let mut state: u32 = 1;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let bit = state & 1;
        state >>= 1;
        if bit == 1 {
            state ^= mask;
        }
        out.push(if bit == 0 { 1 } else { -1 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundingConfig {
    pub pn_order: u32,
    pub chip_rate_hz: f64,
    pub carrier_hz: f64,
    pub tx_power_dbm: f64,
    /// Per-sample complex noise power relative to a unit channel tap;
    /// `-inf` disables noise.
    pub noise_floor_db: f64,
    /// Fold taps beyond the sequence period instead of failing.
    pub allow_aliasing: bool,
}

impl Default for SoundingConfig {
    fn default() -> Self {
        SoundingConfig {
            pn_order: 9,
            chip_rate_hz: 400e6,
            carrier_hz: 6.9e9,
            tx_power_dbm: 0.0,
            noise_floor_db: f64::NEG_INFINITY,
            allow_aliasing: false,
        }
    }
}

impl SoundingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.pn_order) {
            return Err(Error::validation("sounding.pn_order", "must lie in 2..=16"));
        }
        if !(self.chip_rate_hz > 0.0) {
            return Err(Error::validation("sounding.chip_rate", "must be positive"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::validation("sounding.carrier", "must be positive"));
        }
        if self.noise_floor_db.is_nan() || self.noise_floor_db == f64::INFINITY {
            return Err(Error::validation(
                "sounding.noise_floor",
                "must be finite or -inf",
            ));
        }
        Ok(())
    }

    pub fn pn_length(&self) -> usize {
        (1usize << self.pn_order) - 1
    }

    /// One bin per chip over one sequence period.
    pub fn grid(&self) -> Result<DelayGrid> {
        DelayGrid::from_bandwidth_hz(self.chip_rate_hz, self.pn_length())
    }

    pub fn unambiguous_range_ns(&self) -> f64 {
        self.pn_length() as f64 * 1e9 / self.chip_rate_hz
    }
}

/// Sounds `cir` and returns the correlator's per-bin estimate over one
/// sequence period. Noise draws depend only on `seed`.
pub fn sound_channel(cir: &DelayCir, cfg: &SoundingConfig, seed: u64) -> Result<DelayCir> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let w = grid.bin_width_ns();
    if (cir.grid().bin_width_ns() - w).abs() > 1e-12 * w {
        return Err(Error::Dimension(format!(
            "channel bin width {} ns differs from chip duration {} ns",
            cir.grid().bin_width_ns(),
            w
        )));
    }
    let n = cfg.pn_length();
    if let Some(last) = cir.last_occupied() {
        if last >= n && !cfg.allow_aliasing {
            return Err(Error::Aliasing {
                span_ns: (last + 1) as f64 * w,
                unambiguous_ns: cfg.unambiguous_range_ns(),
            });
        }
    }
    let seq = generate_mseq(cfg.pn_order)?;

    // one steady-state period of the received signal
    let mut rx = vec![Complex64::new(0.0, 0.0); n];
    for (k, &h) in cir.taps().iter().enumerate() {
        if h.norm_sqr() == 0.0 {
            continue;
        }
        let shift = k % n;
        for (i, r) in rx.iter_mut().enumerate() {
            *r += h * f64::from(seq[(i + n - shift) % n]);
        }
    }
    if cfg.noise_floor_db.is_finite() {
        let sigma = (10f64.powf(cfg.noise_floor_db / 10.0) / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in rx.iter_mut() {
            *r += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }

    let norm = 1.0 / n as f64;
    let est = (0..n)
        .map(|k| {
            let acc: Complex64 = rx
                .iter()
                .enumerate()
                .map(|(i, r)| r * f64::from(seq[(i + n - k) % n]))
                .sum();
            acc * norm
        })
        .collect();
    DelayCir::new(grid, est)
}

/// Power-angular-delay profile: one PDP row per scan pointing.
#[derive(Debug, Clone, PartialEq)]
pub struct Padp {
    pointings: Vec<PlanarAngle>,
    grid: DelayGrid,
    /// Row-major, one row per pointing.
    power: Vec<Db>,
    /// The first and last pointings are neighbours (full-circle scan).
    wraps: bool,
}

impl Padp {
    pub fn new(
        pointings: Vec<PlanarAngle>,
        grid: DelayGrid,
        power: Vec<Db>,
        wraps: bool,
    ) -> Result<Self> {
        if pointings.is_empty() || power.len() != pointings.len() * grid.num_bins() {
            return Err(Error::Dimension(format!(
                "{} cells for {} pointings x {} bins",
                power.len(),
                pointings.len(),
                grid.num_bins()
            )));
        }
        if let Some(f) = pointings.iter().find(|p| p.frame() != pointings[0].frame()) {
            return Err(Error::FrameMismatch {
                expected: pointings[0].frame(),
                found: f.frame(),
            });
        }
        Ok(Padp {
            pointings,
            grid,
            power,
            wraps,
        })
    }

    /// Single-row profile, e.g. from a fixed omni measurement.
    pub fn from_pdp(pdp: &Pdp, pointing: PlanarAngle) -> Self {
        Padp {
            pointings: vec![pointing],
            grid: pdp.grid,
            power: pdp.power_db.clone(),
            wraps: false,
        }
    }

    pub fn pointings(&self) -> &[PlanarAngle] {
        &self.pointings
    }

    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    pub fn wraps(&self) -> bool {
        self.wraps
    }

    pub fn cell(&self, step: usize, bin: usize) -> Db {
        self.power[step * self.grid.num_bins() + bin]
    }

    pub fn row(&self, step: usize) -> &[Db] {
        let n = self.grid.num_bins();
        &self.power[step * n..(step + 1) * n]
    }

    /// CSV with header `pointing_deg,delay_ns,power_db`; 2 decimals for
    /// angles and powers, 1 for delays. Empty cells print as `-inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["pointing_deg", "delay_ns", "power_db"])?;
        for (s, p) in self.pointings.iter().enumerate() {
            for b in 0..self.grid.num_bins() {
                wr.write_record([
                    format!("{:.2}", p.degrees()),
                    format!("{:.1}", self.grid.bin_center(b)),
                    format!("{:.2}", self.cell(s, b).value()),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Padp::write_csv`]. The file does not record
    /// the angle frame, so the caller supplies it.
    pub fn read_csv<R: Read>(r: R, frame: Frame, file: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let expect = ["pointing_deg", "delay_ns", "power_db"];
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(Error::Schema {
                file: file.into(),
                message: format!(
                    "expected header {}, found {}",
                    expect.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut cells: Vec<(f64, f64, f64)> = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|_| Error::Parse {
                    file: file.into(),
                    line: i + 2,
                    message: format!("`{}` is not a number in column {}", &rec[j], expect[j]),
                })
            };
            cells.push((num(0)?, num(1)?, num(2)?));
        }
        if cells.is_empty() {
            return Err(Error::Schema {
                file: file.into(),
                message: "no rows".into(),
            });
        }
        let mut pointings: Vec<f64> = Vec::new();
        let mut delays: Vec<f64> = Vec::new();
        for &(p, d, _) in &cells {
            if pointings.last() != Some(&p) && !pointings.contains(&p) {
                pointings.push(p);
            }
            if !delays.contains(&d) {
                delays.push(d);
            }
        }
        if cells.len() != pointings.len() * delays.len() {
            return Err(Error::Schema {
                file: file.into(),
                message: "rows do not form a complete pointing x delay grid".into(),
            });
        }
        let width = if delays.len() > 1 {
            delays[1] - delays[0]
        } else {
            1.0
        };
        let grid = DelayGrid::new(width, delays.len())?;
        for (b, d) in delays.iter().enumerate() {
            if (grid.bin_center(b) - d).abs() > 0.05 {
                return Err(Error::Schema {
                    file: file.into(),
                    message: format!("delay {d} ns is off the {width} ns grid"),
                });
            }
        }
        let step = if pointings.len() > 1 {
            pointings[1] - pointings[0]
        } else {
            0.0
        };
        let wraps = pointings.len() > 1 && ((step * pointings.len() as f64) - 360.0).abs() < 1e-6;
        let power = cells
            .iter()
            .map(|c| Db::try_new(c.2))
            .collect::<Result<_>>()?;
        Padp::new(
            pointings
                .iter()
                .map(|&p| PlanarAngle::new(p, frame))
                .collect(),
            grid,
            power,
            wraps,
        )
    }
}

/// Which end of the paths the rotating horn sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanEnd {
    /// Rotate at the receiving end (turntable at the Rx).
    Arrival,
    /// Rotate at the departing end (horn at the RIS).
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPlan {
    pub start_deg: f64,
    pub step_deg: f64,
    pub span_deg: f64,
}

impl ScanPlan {
    /// Full turn in `step_deg` increments.
    pub fn full_circle(step_deg: f64) -> Self {
        ScanPlan {
            start_deg: 0.0,
            step_deg,
            span_deg: 360.0,
        }
    }

    fn pointing_count(&self) -> Result<(usize, bool)> {
        if !(self.step_deg > 0.0) || !(self.span_deg >= 0.0) || self.span_deg > 360.0 {
            return Err(Error::validation(
                "scan",
                "step must be positive and span in [0, 360]",
            ));
        }
        let ratio = self.span_deg / self.step_deg;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::validation(
                "scan.step",
                format!(
                    "{} deg does not divide the {} deg span",
                    self.step_deg, self.span_deg
                ),
            ));
        }
        let k = ratio.round() as usize;
        Ok(if self.span_deg == 360.0 {
            (k, true)
        } else {
            (k + 1, false)
        })
    }
}

/// Rotating-horn scan of a set of paths.
///
/// Each pointing re-weights the paths by the horn gain towards the scanned
/// angle, strips the horn's peak gain, sounds the resulting channel and
/// records its PDP. Pointing `i` uses noise seed `seed + i`.
pub fn rotational_scan(
    paths: &[PathComponent],
    end: ScanEnd,
    horn: &AntennaPattern,
    plan: &ScanPlan,
    cfg: &SoundingConfig,
    seed: u64,
) -> Result<Padp> {
    let (count, wraps) = plan.pointing_count()?;
    let frame = match (end, paths.first()) {
        (ScanEnd::Arrival, Some(p)) => p.aoa.frame(),
        (ScanEnd::Departure, Some(p)) => p.aod.frame(),
        (ScanEnd::Arrival, None) => Frame::Rx,
        (ScanEnd::Departure, None) => Frame::Ris,
    };
    let grid = cfg.grid()?;
    let peak = horn.peak_gain();
    let mut pointings = Vec::with_capacity(count);
    let mut power = Vec::with_capacity(count * grid.num_bins());
    for i in 0..count {
        let pointing = PlanarAngle::new(plan.start_deg + i as f64 * plan.step_deg, frame);
        let h = horn.pointed_at(pointing);
        let cir = DelayCir::from_paths(
            grid,
            paths.iter().map(|p| {
                let angle = match end {
                    ScanEnd::Arrival => p.aoa,
                    ScanEnd::Departure => p.aod,
                };
                let g = p.power_db + h.gain(angle) - peak;
                (
                    p.delay_ns,
                    Complex64::from_polar(g.to_amplitude(), p.phase_rad),
                )
            }),
        )?;
        let est = sound_channel(&cir, cfg, seed.wrapping_add(i as u64))?;
        pointings.push(pointing);
        power.extend(cir_to_pdp(&est).power_db);
    }
    Padp::new(pointings, grid, power, wraps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Keep peaks no more than this many dB below the global maximum.
    pub threshold_db: f64,
    pub min_separation_bins: usize,
    pub min_separation_steps: usize,
    /// Refine angle and delay by a parabola through the neighbouring cells.
    pub parabolic: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            threshold_db: 20.0,
            min_separation_bins: 1,
            min_separation_steps: 1,
            parabolic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPath {
    pub angle: PlanarAngle,
    pub delay_ns: f64,
    pub power_db: Db,
    pub step: usize,
    pub bin: usize,
}

impl ExtractedPath {
    /// Path component with the scanned angle at `end` and `other` at the
    /// opposite end.
    pub fn to_component(&self, end: ScanEnd, other: PlanarAngle) -> PathComponent {
        match end {
            ScanEnd::Arrival => PathComponent::new(self.power_db, self.delay_ns, other, self.angle),
            ScanEnd::Departure => {
                PathComponent::new(self.power_db, self.delay_ns, self.angle, other)
            }
        }
    }
}

fn parabolic_offset(l: f64, c: f64, r: f64) -> f64 {
    let den = l - 2.0 * c + r;
    if !l.is_finite() || !r.is_finite() || den >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / den).clamp(-0.5, 0.5)
}

/// Strongest-first 2-D peak picking over a PADP.
///
/// A cell qualifies when it is within `threshold_db` of the global maximum,
/// no neighbour (8-neighbourhood, angles wrapping on full-circle scans) is
/// stronger, and it is strictly stronger than at least one angular
/// neighbour, which rules out the flat sidelobe floor of a horn. Accepted
/// peaks suppress candidates within the separation box.
pub fn extract_paths(padp: &Padp, opts: &ExtractOptions) -> Result<Vec<ExtractedPath>> {
    if !(opts.threshold_db >= 0.0) {
        return Err(Error::domain("threshold must be a non-negative dB margin"));
    }
    let rows = padp.pointings.len();
    let bins = padp.grid.num_bins();
    let global = padp
        .power
        .iter()
        .filter(|p| !p.is_no_power())
        .map(|p| p.value())
        .fold(f64::NEG_INFINITY, f64::max);
    if !global.is_finite() {
        return Ok(Vec::new());
    }
    let floor = global - opts.threshold_db;

    let angular_neighbours = |s: usize| -> Vec<usize> {
        let mut v = Vec::with_capacity(2);
        if rows > 1 {
            if s > 0 {
                v.push(s - 1);
            } else if padp.wraps {
                v.push(rows - 1);
            }
            if s + 1 < rows {
                v.push(s + 1);
            } else if padp.wraps {
                v.push(0);
            }
        }
        v.sort_unstable();
        v.dedup();
        v.retain(|&n| n != s);
        v
    };

    let mut candidates = Vec::new();
    for s in 0..rows {
        let around = angular_neighbours(s);
        for b in 0..bins {
            let c = padp.cell(s, b).value();
            if !(c >= floor) {
                continue;
            }
            let mut rows_here = around.clone();
            rows_here.push(s);
            let mut is_peak = true;
            for &ns in &rows_here {
                for nb in b.saturating_sub(1)..=(b + 1).min(bins - 1) {
                    if (ns, nb) != (s, b) && padp.cell(ns, nb).value() > c {
                        is_peak = false;
                    }
                }
            }
            if is_peak
                && !around.is_empty()
                && around.iter().all(|&ns| padp.cell(ns, b).value() >= c)
            {
                is_peak = false;
            }
            if is_peak {
                candidates.push((s, b, c));
            }
        }
    }
    candidates.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));

    let step_distance = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        if padp.wraps {
            d.min(rows - d)
        } else {
            d
        }
    };
    let mut accepted: Vec<(usize, usize, f64)> = Vec::new();
    for cand in candidates {
        let clash = accepted.iter().any(|&(s, b, _)| {
            cand.1.abs_diff(b) <= opts.min_separation_bins
                && step_distance(cand.0, s) <= opts.min_separation_steps
        });
        if !clash {
            accepted.push(cand);
        }
    }

    let step_deg = if rows > 1 {
        let d = padp.pointings[1].degrees() - padp.pointings[0].degrees();
        if d < 0.0 {
            d + 360.0
        } else {
            d
        }
    } else {
        0.0
    };
    Ok(accepted
        .into_iter()
        .map(|(s, b, c)| {
            let mut angle = padp.pointings[s];
            let mut delay = padp.grid.bin_center(b);
            if opts.parabolic {
                let around = angular_neighbours(s);
                if around.len() == 2 {
                    let (l, r) = if s == 0 {
                        (rows - 1, 1)
                    } else {
                        (s - 1, (s + 1) % rows)
                    };
                    let off = parabolic_offset(padp.cell(l, b).value(), c, padp.cell(r, b).value());
                    angle = PlanarAngle::new(angle.degrees() + off * step_deg, angle.frame());
                }
                if b > 0 && b + 1 < bins {
                    let off = parabolic_offset(
                        padp.cell(s, b - 1).value(),
                        c,
                        padp.cell(s, b + 1).value(),
                    );
                    delay += off * padp.grid.bin_width_ns();
                }
            }
            ExtractedPath {
                angle,
                delay_ns: delay,
                power_db: Db::new(c),
                step: s,
                bin: b,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn circular_autocorrelation(seq: &[i8]) -> Vec<i64> {
        let n = seq.len();
        (0..n)
            .map(|lag| {
                (0..n)
                    .map(|i| i64::from(seq[i]) * i64::from(seq[(i + lag) % n]))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn mseq_lengths_and_periods() {
        for (order, _) in PRIMITIVE_POLYNOMIALS {
            let s = generate_mseq(order).unwrap();
            assert_eq!(s.len(), (1 << order) - 1);
            // balanced: one more -1 (bit 1) than +1
            let ones = s.iter().filter(|&&c| c == -1).count();
            assert_eq!(ones, 1 << (order - 1), "order {order}");
        }
        assert!(generate_mseq(1).is_err());
        assert!(generate_mseq(17).is_err());
    }

    #[test]
    fn mseq_two_valued_autocorrelation() {
        for order in [3, 9] {
            let s = generate_mseq(order).unwrap();
            let n = s.len() as i64;
            let ac = circular_autocorrelation(&s);
            assert_eq!(ac[0], n);
            assert!(ac[1..].iter().all(|&v| v == -1), "order {order}");
        }
        // all orders up to 12 by brute force
        for order in 2..=12 {
            let s = generate_mseq(order).unwrap();
            assert!(circular_autocorrelation(&s)[1..].iter().all(|&v| v == -1));
        }
    }

    fn cfg() -> SoundingConfig {
        SoundingConfig::default()
    }

    fn impulse(bin: usize, amp: Complex64, nbins: usize) -> DelayCir {
        let grid = DelayGrid::new(2.5, nbins).unwrap();
        let mut taps = vec![Complex64::new(0.0, 0.0); nbins];
        taps[bin] = amp;
        DelayCir::new(grid, taps).unwrap()
    }

    #[test]
    fn single_path_recovered() {
        let amp = Complex64::from_polar(10f64.powf(-78.46 / 20.0), 0.7);
        let est = sound_channel(&impulse(20, amp, 511), &cfg(), 0).unwrap();
        let pdp = cir_to_pdp(&est);
        let (best, _) = pdp
            .power_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.value().total_cmp(&b.1.value()))
            .unwrap();
        assert_eq!(best, 20);
        assert!((pdp.power_db[20].value() + 78.46).abs() <= 0.01);
        // other bins sit at the -20·log10(511) correlation floor
        assert_abs_diff_eq!(
            pdp.power_db[21].value() - pdp.power_db[20].value(),
            -54.168_418_002_694_25,
            epsilon = 1e-6
        );
    }

    #[test]
    fn zero_channel_is_empty() {
        let est = sound_channel(&impulse(0, Complex64::new(0.0, 0.0), 511), &cfg(), 0).unwrap();
        assert!(cir_to_pdp(&est).power_db.iter().all(|p| p.is_no_power()));
    }

    #[test]
    fn two_paths_recovered() {
        let grid = DelayGrid::new(2.5, 511).unwrap();
        let a = Complex64::from_polar(1.0, 0.3);
        let b = Complex64::from_polar(1.0, 2.1);
        let cir = DelayCir::from_paths(grid, [(25.0, a), (30.0, b)]).unwrap();
        let pdp = cir_to_pdp(&sound_channel(&cir, &cfg(), 0).unwrap());
        assert!(pdp.power_db[10].value().abs() < 0.5);
        assert!(pdp.power_db[12].value().abs() < 0.5);
    }

    #[test]
    fn aliasing_guard() {
        let amp = Complex64::new(1.0, 0.0);
        let near = impulse(30, amp, 600);
        let far = impulse(30 + 511, amp, 600);
        assert!(matches!(
            sound_channel(&far, &cfg(), 0),
            Err(Error::Aliasing { .. })
        ));
        let folding = SoundingConfig {
            allow_aliasing: true,
            ..cfg()
        };
        let a = sound_channel(&near, &folding, 0).unwrap();
        let b = sound_channel(&far, &folding, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_estimates_are_seed_deterministic() {
        let noisy = SoundingConfig {
            noise_floor_db: -30.0,
            ..cfg()
        };
        let c = impulse(5, Complex64::new(1.0, 0.0), 511);
        let a = sound_channel(&c, &noisy, 42).unwrap();
        let b = sound_channel(&c, &noisy, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sound_channel(&c, &noisy, 43).unwrap());
        // correlation gain: residual noise ~ -30 - 27 dB
        let pdp = cir_to_pdp(&a);
        assert!(pdp.power_db[100].value() < -45.0);
    }

    #[test]
    fn bin_width_mismatch() {
        let grid = DelayGrid::new(5.0, 10).unwrap();
        let c = DelayCir::zeros(grid);
        assert!(matches!(
            sound_channel(&c, &cfg(), 0),
            Err(Error::Dimension(_))
        ));
    }

    fn rx_path(power: f64, delay: f64, aoa: f64) -> PathComponent {
        PathComponent::new(
            Db::new(power),
            delay,
            PlanarAngle::ris(90.0),
            PlanarAngle::rx(aoa),
        )
    }

    fn horn() -> AntennaPattern {
        AntennaPattern::horn(20.0, 15.0, PlanarAngle::rx(0.0)).unwrap()
    }

    #[test]
    fn single_path_scan() {
        let paths = [rx_path(-80.0, 50.0, 90.0)];
        let padp = rotational_scan(
            &paths,
            ScanEnd::Arrival,
            &horn(),
            &ScanPlan::full_circle(5.0),
            &cfg(),
            0,
        )
        .unwrap();
        assert_eq!(padp.pointings().len(), 72);
        assert!(padp.wraps());
        let row_max = |s: usize| padp.row(s)[20].value();
        let best = (0..72)
            .max_by(|&a, &b| row_max(a).total_cmp(&row_max(b)))
            .unwrap();
        assert_eq!(padp.pointings()[best].degrees(), 90.0);
        assert_abs_diff_eq!(row_max(best), -80.0, epsilon = 1e-6);

        // half-power points sit at 90 ± 7.5 deg
        let plan = ScanPlan {
            start_deg: 82.5,
            step_deg: 7.5,
            span_deg: 15.0,
        };
        let p2 = rotational_scan(&paths, ScanEnd::Arrival, &horn(), &plan, &cfg(), 0).unwrap();
        assert_abs_diff_eq!(p2.row(0)[20].value(), -83.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p2.row(2)[20].value(), -83.0, epsilon = 1e-6);

        let found = extract_paths(&padp, &ExtractOptions::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].bin, 20);
        assert_eq!(found[0].angle.degrees(), 90.0);
    }

    #[test]
    fn isotropic_scan_rows_identical() {
        let paths = [rx_path(-80.0, 50.0, 90.0), rx_path(-85.0, 60.0, 200.0)];
        let padp = rotational_scan(
            &paths,
            ScanEnd::Arrival,
            &AntennaPattern::isotropic(),
            &ScanPlan::full_circle(30.0),
            &cfg(),
            0,
        )
        .unwrap();
        for s in 1..padp.pointings().len() {
            assert_eq!(padp.row(s), padp.row(0));
        }
    }

    #[test]
    fn scan_rejects_uneven_step() {
        let plan = ScanPlan {
            start_deg: 0.0,
            step_deg: 7.0,
            span_deg: 180.0,
        };
        assert!(rotational_scan(
            &[rx_path(-80.0, 50.0, 90.0)],
            ScanEnd::Arrival,
            &horn(),
            &plan,
            &cfg(),
            0
        )
        .is_err());
        let plan = ScanPlan {
            start_deg: 0.0,
            step_deg: 5.0,
            span_deg: 180.0,
        };
        let p = rotational_scan(
            &[rx_path(-80.0, 50.0, 90.0)],
            ScanEnd::Arrival,
            &horn(),
            &plan,
            &cfg(),
            0,
        )
        .unwrap();
        assert_eq!(p.pointings().len(), 37);
        assert!(!p.wraps());
    }

    #[test]
    fn adjacent_bins_same_angle_keep_stronger() {
        let paths = [rx_path(-80.0, 50.0, 90.0), rx_path(-83.0, 52.5, 90.0)];
        let padp = rotational_scan(
            &paths,
            ScanEnd::Arrival,
            &horn(),
            &ScanPlan::full_circle(5.0),
            &cfg(),
            0,
        )
        .unwrap();
        let opts = ExtractOptions {
            min_separation_bins: 2,
            min_separation_steps: 2,
            ..ExtractOptions::default()
        };
        let found = extract_paths(&padp, &opts).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].bin, 20);
    }

    #[test]
    fn threshold_excluding_everything_gives_empty_set() {
        let grid = DelayGrid::new(2.5, 4).unwrap();
        let padp = Padp::new(
            vec![PlanarAngle::rx(0.0)],
            grid,
            vec![Db::NO_POWER; 4],
            false,
        )
        .unwrap();
        assert!(extract_paths(&padp, &ExtractOptions::default())
            .unwrap()
            .is_empty());
        assert!(extract_paths(
            &padp,
            &ExtractOptions {
                threshold_db: -1.0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn parabolic_refinement_moves_off_grid() {
        let paths = [rx_path(-80.0, 50.0, 92.0)];
        let padp = rotational_scan(
            &paths,
            ScanEnd::Arrival,
            &horn(),
            &ScanPlan::full_circle(5.0),
            &cfg(),
            0,
        )
        .unwrap();
        let plain = extract_paths(&padp, &ExtractOptions::default()).unwrap();
        assert_eq!(plain[0].angle.degrees(), 90.0);
        let fine = extract_paths(
            &padp,
            &ExtractOptions {
                parabolic: true,
                ..Default::default()
            },
        )
        .unwrap();
        // the Gaussian mainlobe is a parabola in dB, so the vertex is exact
        assert_abs_diff_eq!(fine[0].angle.degrees(), 92.0, epsilon = 1e-6);
    }

    #[test]
    fn padp_csv_round_trip() {
        let paths = [rx_path(-80.0, 50.0, 90.0)];
        let plan = ScanPlan {
            start_deg: 80.0,
            step_deg: 5.0,
            span_deg: 20.0,
        };
        let padp = rotational_scan(&paths, ScanEnd::Arrival, &horn(), &plan, &cfg(), 0).unwrap();
        let mut buf = Vec::new();
        padp.write_csv(&mut buf).unwrap();
        let back = Padp::read_csv(buf.as_slice(), Frame::Rx, "padp.csv").unwrap();
        let mut buf2 = Vec::new();
        back.write_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back.pointings().len(), 5);
        assert!(Padp::read_csv("a,b,c\n1,2,3\n".as_bytes(), Frame::Rx, "x").is_err());
    }
}
