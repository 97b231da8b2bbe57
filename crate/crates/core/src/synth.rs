//! Sub-channel synthesis: deterministic scenario geometry and seeded
//! cluster-based (GBSM) generation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::antenna::{AntennaPattern, ArrayElementOffset};
use crate::error::{Error, Result};
use crate::path::{PathComponent, Side, SubChannel};
use crate::units::{distance_to_delay_ns, Db, Frame, PlanarAngle, SPEED_OF_LIGHT};

pub const DEFAULT_REFLECTION_LOSS_DB: f64 = 6.0;
pub const DEFAULT_CARRIER_HZ: f64 = 6.9e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Point at `distance` from `origin` along a counterclockwise azimuth.
    pub fn polar(origin: Point2, azimuth_deg: f64, distance: f64) -> Self {
        let a = azimuth_deg.to_radians();
        Point2::new(origin.x + distance * a.cos(), origin.y + distance * a.sin())
    }

    pub fn distance(self, other: Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Counterclockwise azimuth from east of the direction towards `other`.
    pub fn azimuth_to(self, other: Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub label: String,
    pub position: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub label: String,
    pub position: Point2,
    /// Hop whose single-bounce path this scatterer produces.
    pub side: Side,
}

/// Planar layout of a measurement. Every antenna and the RIS share one
/// height, so all geometry is 2-D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub ris: Point2,
    /// One entry per transmitter placement; each yields its own Tx-RIS paths.
    pub tx: Vec<Site>,
    pub rx: Site,
    pub scatterers: Vec<Scatterer>,
    pub height_m: f64,
    pub carrier_hz: f64,
}

const MIN_SEPARATION_M: f64 = 1e-9;

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.tx.is_empty() {
            return Err(Error::validation(
                "geometry.tx",
                "at least one transmitter is required",
            ));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::validation("geometry.carrier", "must be positive"));
        }
        let check = |a: Point2, b: Point2, what: String| {
            if a.distance(b) > MIN_SEPARATION_M {
                Ok(())
            } else {
                Err(Error::domain(format!(
                    "degenerate geometry: {what} coincide"
                )))
            }
        };
        check(
            self.ris,
            self.rx.position,
            format!("RIS and {}", self.rx.label),
        )?;
        for t in &self.tx {
            check(self.ris, t.position, format!("RIS and {}", t.label))?;
        }
        for s in &self.scatterers {
            check(self.ris, s.position, format!("RIS and {}", s.label))?;
            match s.side {
                Side::TxRis => {
                    for t in &self.tx {
                        check(
                            t.position,
                            s.position,
                            format!("{} and {}", t.label, s.label),
                        )?;
                    }
                }
                Side::RisRx => check(
                    self.rx.position,
                    s.position,
                    format!("{} and {}", self.rx.label, s.label),
                )?,
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Free-space received/transmitted power ratio over `length` meters,
    /// antenna gains excluded.
    pub fn free_space_db(&self, length: f64) -> Db {
        Db::new(-20.0 * (4.0 * PI * length / self.wavelength_m()).log10())
    }
}

/// LOS plus single-bounce paths of one hop, derived from the layout.
///
/// Departure and arrival azimuths point from each end towards the other end
/// of the first or last leg, in the frames of the hop.
pub fn geometric_paths(
    geom: &ScenarioGeometry,
    side: Side,
    reflection_loss_db: f64,
) -> Result<SubChannel> {
    geom.validate()?;
    let bounce = |from: Point2, via: Point2, to: Point2| {
        let len = from.distance(via) + via.distance(to);
        (len, geom.free_space_db(len) - Db::new(reflection_loss_db))
    };
    let mut paths = Vec::new();
    match side {
        Side::TxRis => {
            for t in &geom.tx {
                let tp = t.position;
                let d = tp.distance(geom.ris);
                paths.push(PathComponent::new(
                    geom.free_space_db(d),
                    distance_to_delay_ns(d),
                    PlanarAngle::tx(tp.azimuth_to(geom.ris)),
                    PlanarAngle::ris(geom.ris.azimuth_to(tp)),
                ));
                for s in geom.scatterers.iter().filter(|s| s.side == Side::TxRis) {
                    let (len, p) = bounce(tp, s.position, geom.ris);
                    paths.push(PathComponent::new(
                        p,
                        distance_to_delay_ns(len),
                        PlanarAngle::tx(tp.azimuth_to(s.position)),
                        PlanarAngle::ris(geom.ris.azimuth_to(s.position)),
                    ));
                }
            }
        }
        Side::RisRx => {
            let rp = geom.rx.position;
            let d = geom.ris.distance(rp);
            let at_rx =
                |target: Point2| PlanarAngle::ris(rp.azimuth_to(target)).to_frame(Frame::Rx);
            paths.push(PathComponent::new(
                geom.free_space_db(d),
                distance_to_delay_ns(d),
                PlanarAngle::ris(geom.ris.azimuth_to(rp)),
                at_rx(geom.ris),
            ));
            for s in geom.scatterers.iter().filter(|s| s.side == Side::RisRx) {
                let (len, p) = bounce(geom.ris, s.position, rp);
                paths.push(PathComponent::new(
                    p,
                    distance_to_delay_ns(len),
                    PlanarAngle::ris(geom.ris.azimuth_to(s.position)),
                    at_rx(s.position),
                ));
            }
        }
    }
    SubChannel::new(side, paths)
}

/// Cluster model parameters of one hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbsmParams {
    pub num_clusters: usize,
    pub paths_per_cluster: usize,
    /// Mean of the exponential cluster excess-delay law.
    pub delay_scale_ns: f64,
    /// Laplacian scale of intra-cluster azimuth offsets.
    pub angle_spread_deg: f64,
    /// Cluster power falls by this many dB per `delay_scale_ns` of delay.
    pub power_decay_db: f64,
    pub seed: u64,
}

impl GbsmParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::validation("gbsm.clusters", "must be at least 1"));
        }
        if self.paths_per_cluster == 0 {
            return Err(Error::validation(
                "gbsm.paths_per_cluster",
                "must be at least 1",
            ));
        }
        if !(self.delay_scale_ns > 0.0) {
            return Err(Error::validation("gbsm.delay_scale", "must be positive"));
        }
        if !(self.angle_spread_deg > 0.0) {
            return Err(Error::validation("gbsm.angle_spread", "must be positive"));
        }
        if !self.power_decay_db.is_finite() {
            return Err(Error::validation("gbsm.power_decay", "must be finite"));
        }
        Ok(())
    }
}

fn laplace(rng: &mut impl Rng, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Draws an open-interval RIS-front azimuth around `center`.
fn ris_front_angle(rng: &mut impl Rng, center: f64, spread: f64) -> f64 {
    loop {
        let a = center + laplace(rng, spread);
        if a > 0.0 && a < 180.0 {
            return a;
        }
    }
}

/// Seeded stochastic sub-channel.
///
/// Cluster excess delays are exponential with mean `delay_scale_ns`; cluster
/// power decays linearly in dB with delay; each cluster's power is split
/// evenly over its paths, whose azimuths scatter around uniform cluster
/// centres with Laplacian offsets. RIS-side azimuths stay inside the panel's
/// front half-space. Phases are uniform. The result depends only on
/// `(params, side)`.
pub fn gbsm_generate(params: &GbsmParams, side: Side) -> Result<SubChannel> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(match side {
        Side::TxRis => 1,
        Side::RisRx => 2,
    });
    let delay_law = Exp::new(1.0 / params.delay_scale_ns).expect("positive rate");
    let split_db = 10.0 * (params.paths_per_cluster as f64).log10();
    let (dep_frame, arr_frame) = side.frames();

    let mut paths = Vec::with_capacity(params.num_clusters * params.paths_per_cluster);
    for _ in 0..params.num_clusters {
        let delay = delay_law.sample(&mut rng);
        let cluster_db = -params.power_decay_db * delay / params.delay_scale_ns;
        let ris_center = loop {
            let c = rng.random_range(0.0..180.0);
            if c > 0.0 {
                break c;
            }
        };
        let terminal_center = rng.random_range(0.0..360.0);
        for _ in 0..params.paths_per_cluster {
            let ris = ris_front_angle(&mut rng, ris_center, params.angle_spread_deg);
            let terminal = terminal_center + laplace(&mut rng, params.angle_spread_deg);
            let phase = rng.random_range(0.0..2.0 * PI);
            let (aod, aoa) = match side {
                Side::TxRis => (terminal, ris),
                Side::RisRx => (ris, terminal),
            };
            paths.push(
                PathComponent::new(
                    Db::new(cluster_db - split_db),
                    delay,
                    PlanarAngle::new(aod, dep_frame),
                    PlanarAngle::new(aoa, arr_frame),
                )
                .with_phase(phase),
            );
        }
    }
    SubChannel::new(side, paths)
}

/// Phase of the array steering term, `2π·|d|/λ·cos(theta)`.
pub fn steering_phase(offset: ArrayElementOffset, angle: PlanarAngle) -> f64 {
    // cos is even, so clockwise and counterclockwise frames agree
    2.0 * PI * offset.wavelengths() * angle.radians().cos()
}

/// End of a hop at which an antenna pattern is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntennaEnd {
    /// The Tx or Rx device, seen at `theta_Tx` or `theta_Rx`.
    Terminal,
    /// A probe antenna standing in for the RIS, seen at `theta_in` or `theta_out`.
    Ris,
}

/// Adds the antenna gain towards each path's angle at the chosen end.
pub fn apply_antenna(sub: &SubChannel, pattern: &AntennaPattern, end: AntennaEnd) -> SubChannel {
    let mut out = sub.clone();
    for (i, p) in out.paths_mut().iter_mut().enumerate() {
        let angle = match end {
            AntennaEnd::Terminal => sub.terminal_angle(i),
            AntennaEnd::Ris => sub.ris_angle(i),
        };
        p.power_db = p.power_db + pattern.gain(angle);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{delay_to_bin, DelayGrid};
    use approx::assert_abs_diff_eq;

    fn factory_geometry(scatterers: Vec<Scatterer>) -> ScenarioGeometry {
        let ris = Point2::new(0.0, 0.0);
        ScenarioGeometry {
            ris,
            tx: vec![
                Site {
                    label: "Tx1".into(),
                    position: Point2::polar(ris, 80.0, 5.0),
                },
                Site {
                    label: "Tx2".into(),
                    position: Point2::polar(ris, 60.0, 3.0),
                },
            ],
            rx: Site {
                label: "Rx".into(),
                position: Point2::polar(ris, 90.0, 10.0),
            },
            scatterers,
            height_m: 1.5,
            carrier_hz: DEFAULT_CARRIER_HZ,
        }
    }

    #[test]
    fn tx_ris_los_matches_layout() {
        let grid = DelayGrid::from_bandwidth_hz(400e6, 511).unwrap();
        let sub = geometric_paths(&factory_geometry(vec![]), Side::TxRis, 6.0).unwrap();
        assert_eq!(sub.len(), 2);
        let p1 = sub.paths()[0];
        assert_abs_diff_eq!(p1.aoa.degrees(), 80.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p1.aod.degrees(), 260.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p1.delay_ns, 16.678_204_759_907_6, epsilon = 1e-9);
        assert_eq!(
            grid.bin_center(delay_to_bin(p1.delay_ns, &grid).unwrap()),
            17.5
        );
        let p2 = sub.paths()[1];
        assert_abs_diff_eq!(p2.aoa.degrees(), 60.0, epsilon = 1e-9);
        assert_eq!(
            grid.bin_center(delay_to_bin(p2.delay_ns, &grid).unwrap()),
            10.0
        );
    }

    #[test]
    fn ris_rx_los_and_scatterer() {
        let grid = DelayGrid::from_bandwidth_hz(400e6, 511).unwrap();
        let s = Scatterer {
            label: "S1".into(),
            position: Point2::polar(Point2::new(0.0, 0.0), 125.0, 4.0),
            side: Side::RisRx,
        };
        let sub = geometric_paths(&factory_geometry(vec![s]), Side::RisRx, 6.0).unwrap();
        assert_eq!(sub.len(), 2);
        let a = sub.paths()[0];
        assert_abs_diff_eq!(a.delay_ns, 33.356_409_519_815_2, epsilon = 1e-9);
        assert_eq!(
            grid.bin_center(delay_to_bin(a.delay_ns, &grid).unwrap()),
            32.5
        );
        assert_abs_diff_eq!(a.aod.degrees(), 90.0, epsilon = 1e-9);
        // Rx looks back south: 270 deg ccw is 90 deg in the clockwise frame.
        assert_eq!(a.aoa.frame(), Frame::Rx);
        assert_abs_diff_eq!(a.aoa.degrees(), 90.0, epsilon = 1e-9);
        let b = sub.paths()[1];
        assert_abs_diff_eq!(b.aod.degrees(), 125.0, epsilon = 1e-9);
        let los_db = factory_geometry(vec![]).free_space_db(b.delay_ns * 1e-9 * SPEED_OF_LIGHT);
        assert_abs_diff_eq!(b.power_db.value(), los_db.value() - 6.0, epsilon = 1e-9);
        assert!(b.delay_ns > a.delay_ns);
    }

    #[test]
    fn los_delay_equals_distance() {
        let g = factory_geometry(vec![]);
        let sub = geometric_paths(&g, Side::TxRis, 0.0).unwrap();
        for (p, t) in sub.paths().iter().zip(&g.tx) {
            let d = p.delay_ns * 1e-9 * SPEED_OF_LIGHT;
            assert!((d - t.position.distance(g.ris)).abs() / d < 1e-9);
        }
    }

    #[test]
    fn coincident_points_are_rejected() {
        let mut g = factory_geometry(vec![]);
        g.rx.position = g.ris;
        assert!(matches!(
            geometric_paths(&g, Side::RisRx, 6.0),
            Err(Error::Domain(_))
        ));
    }

    fn params(n: usize, m: usize, seed: u64) -> GbsmParams {
        GbsmParams {
            num_clusters: n,
            paths_per_cluster: m,
            delay_scale_ns: 40.0,
            angle_spread_deg: 5.0,
            power_decay_db: 3.0,
            seed,
        }
    }

    #[test]
    fn gbsm_degenerate_counts() {
        let sub = gbsm_generate(&params(1, 1, 9), Side::TxRis).unwrap();
        assert_eq!(sub.len(), 1);
        let p = sub.paths()[0];
        assert!(p.delay_ns >= 0.0);
        let cluster_db = -3.0 * p.delay_ns / 40.0;
        assert_abs_diff_eq!(p.power_db.value(), cluster_db, epsilon = 1e-12);
    }

    #[test]
    fn gbsm_is_seed_deterministic() {
        let a = gbsm_generate(&params(3, 20, 77), Side::RisRx).unwrap();
        let b = gbsm_generate(&params(3, 20, 77), Side::RisRx).unwrap();
        assert_eq!(a, b);
        let c = gbsm_generate(&params(3, 20, 78), Side::RisRx).unwrap();
        assert_ne!(a, c);
        let d = gbsm_generate(&params(3, 20, 77), Side::TxRis).unwrap();
        assert_ne!(a.paths()[0].delay_ns, d.paths()[0].delay_ns);
    }

    #[test]
    fn gbsm_frames_and_front_half_space() {
        for seed in 0..50 {
            let sub = gbsm_generate(&params(5, 10, seed), Side::TxRis).unwrap();
            for i in 0..sub.len() {
                let a = sub.ris_angle(i);
                assert_eq!(a.frame(), Frame::Ris);
                assert!(a.degrees() > 0.0 && a.degrees() < 180.0);
            }
            let sub = gbsm_generate(&params(5, 10, seed), Side::RisRx).unwrap();
            assert!(sub.paths().iter().all(|p| p.aoa.frame() == Frame::Rx));
        }
    }

    #[test]
    fn gbsm_mean_excess_delay_matches_scale() {
        // Monte-Carlo check of the exponential delay law over 10^4 seeds.
        let mut sum = 0.0;
        let mut n = 0usize;
        for seed in 0..10_000 {
            let sub = gbsm_generate(&params(5, 20, seed), Side::TxRis).unwrap();
            for p in sub.paths() {
                sum += p.delay_ns;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 40.0).abs() / 40.0 < 0.05, "mean {mean}");
    }

    #[test]
    fn steering_examples() {
        let half = ArrayElementOffset::new(0.5).unwrap();
        for deg in [0.0, 45.0, 200.0] {
            assert_eq!(
                steering_phase(ArrayElementOffset::REFERENCE, PlanarAngle::rx(deg)),
                0.0
            );
        }
        assert_abs_diff_eq!(
            steering_phase(half, PlanarAngle::rx(90.0)),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            steering_phase(half, PlanarAngle::rx(0.0)),
            PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn antenna_application() {
        let s = Scatterer {
            label: "S1".into(),
            position: Point2::polar(Point2::new(0.0, 0.0), 125.0, 4.0),
            side: Side::RisRx,
        };
        let sub = geometric_paths(&factory_geometry(vec![s]), Side::RisRx, 6.0).unwrap();
        assert_eq!(
            apply_antenna(&sub, &AntennaPattern::isotropic(), AntennaEnd::Terminal),
            sub
        );
        let omni = apply_antenna(&sub, &AntennaPattern::omni(3.0).unwrap(), AntennaEnd::Ris);
        for (a, b) in omni.paths().iter().zip(sub.paths()) {
            assert_abs_diff_eq!(
                a.power_db.value(),
                b.power_db.value() + 3.0,
                epsilon = 1e-12
            );
        }
        let horn = AntennaPattern::horn(20.0, 15.0, PlanarAngle::ris(90.0)).unwrap();
        let los = SubChannel::new(
            Side::RisRx,
            vec![
                PathComponent::new(Db::ZERO, 0.0, PlanarAngle::ris(90.0), PlanarAngle::rx(90.0)),
                PathComponent::new(Db::ZERO, 0.0, PlanarAngle::ris(97.5), PlanarAngle::rx(90.0)),
            ],
        )
        .unwrap();
        let with = apply_antenna(&los, &horn, AntennaEnd::Ris);
        assert_abs_diff_eq!(with.paths()[0].power_db.value(), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(with.paths()[1].power_db.value(), 17.0, epsilon = 1e-9);
        let back = apply_antenna(&with, &horn.negated(), AntennaEnd::Ris);
        for (a, b) in back.paths().iter().zip(los.paths()) {
            assert_abs_diff_eq!(a.power_db.value(), b.power_db.value(), epsilon = 1e-12);
        }
    }
}
