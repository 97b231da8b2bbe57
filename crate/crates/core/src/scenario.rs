//! Scenario files.
//!
//! A scenario is a TOML document in which every physical quantity is a
//! string carrying its unit, for example `distance = "5 m"` or
//! `chip_rate = "400 MHz"`. Accepted units:
//!
//! | quantity  | units                      | stored as |
//! |-----------|----------------------------|-----------|
//! | length    | `m`, `cm`, `mm`            | metres    |
//! | angle     | `deg`, `rad`               | degrees   |
//! | time      | `ns`, `us`                 | ns        |
//! | frequency | `Hz`, `kHz`, `MHz`, `GHz`  | Hz        |
//! | level     | `dB`, `dBi`, `dBm`         | dB        |
//! | spacing   | `lambda`                   | wavelengths |
//!
//! Unknown keys are rejected. Positions are given either as
//! `{ azimuth, distance }` relative to the RIS (azimuth counterclockwise
//! from east) or as absolute `{ x, y }`. See `data/factory.scenario`
//! for a complete example.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::antenna::AntennaPattern;
use crate::error::{Error, Result};
use crate::path::Side;
use crate::ris::{generate_anomalous_codebook, Codebook, RisPanel};
use crate::sounding::{ExtractOptions, ScanPlan, SoundingConfig};
use crate::synth::{
    GbsmParams, Point2, Scatterer, ScenarioGeometry, Site, DEFAULT_REFLECTION_LOSS_DB,
};
use crate::units::{Frame, PlanarAngle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Length,
    Angle,
    Time,
    Frequency,
    Level,
    Spacing,
}

fn quantity(text: &str, unit: Unit, field: &str) -> Result<f64> {
    let text = text.trim();
    // longest leading slice that parses as a number
    let split = text
        .char_indices()
        .map(|(i, c)| i + c.len_utf8())
        .rev()
        .find(|&i| text[..i].parse::<f64>().is_ok())
        .unwrap_or(0);
    let (num, suffix) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::validation(field, format!("`{text}` does not start with a number")))?;
    if value.is_nan() {
        return Err(Error::validation(field, "NaN is not a quantity"));
    }
    let suffix = suffix.trim();
    let factor = match (unit, suffix) {
        (Unit::Length, "m") => 1.0,
        (Unit::Length, "cm") => 1e-2,
        (Unit::Length, "mm") => 1e-3,
        (Unit::Angle, "deg") => 1.0,
        (Unit::Angle, "rad") => 180.0 / std::f64::consts::PI,
        (Unit::Time, "ns") => 1.0,
        (Unit::Time, "us") => 1e3,
        (Unit::Frequency, "Hz") => 1.0,
        (Unit::Frequency, "kHz") => 1e3,
        (Unit::Frequency, "MHz") => 1e6,
        (Unit::Frequency, "GHz") => 1e9,
        (Unit::Level, "dB" | "dBi" | "dBm") => 1.0,
        (Unit::Spacing, "lambda") => 1.0,
        _ => {
            let expected = match unit {
                Unit::Length => "m, cm or mm",
                Unit::Angle => "deg or rad",
                Unit::Time => "ns or us",
                Unit::Frequency => "Hz, kHz, MHz or GHz",
                Unit::Level => "dB, dBi or dBm",
                Unit::Spacing => "lambda",
            };
            let found = if suffix.is_empty() {
                "no unit".to_owned()
            } else {
                format!("unit `{suffix}`")
            };
            return Err(Error::validation(
                field,
                format!("{found} in `{text}`; expected {expected}"),
            ));
        }
    };
    Ok(value * factor)
}

fn positive(v: f64, field: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(
            field,
            format!("must be positive, got {v}"),
        ))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: Option<u64>,
    geometry: RawGeometry,
    #[serde(default)]
    antennas: RawAntennas,
    #[serde(default)]
    panel: RawPanel,
    #[serde(default)]
    codebook: RawCodebook,
    #[serde(default)]
    sounding: RawSounding,
    gbsm: Option<RawGbsm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    height: Option<String>,
    carrier: Option<String>,
    reflection_loss: Option<String>,
    ris: Option<RawPosition>,
    tx: Vec<RawPosition>,
    rx: RawPosition,
    #[serde(default)]
    scatterer: Vec<RawScatterer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPosition {
    label: Option<String>,
    azimuth: Option<String>,
    distance: Option<String>,
    x: Option<String>,
    y: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScatterer {
    label: Option<String>,
    side: String,
    azimuth: Option<String>,
    distance: Option<String>,
    x: Option<String>,
    y: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAntennas {
    tx: Option<RawAntenna>,
    rx: Option<RawAntenna>,
    scan: Option<RawAntenna>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAntenna {
    kind: String,
    gain: Option<String>,
    hpbw: Option<String>,
    pointing: Option<String>,
    sidelobe_floor: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPanel {
    rows: Option<usize>,
    cols: Option<usize>,
    spacing: Option<String>,
    phase_bits: Option<u32>,
    element_exponent: Option<f64>,
    loss: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCodebook {
    mode: Option<String>,
    theta_in: Option<String>,
    theta_out: Option<String>,
    path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSounding {
    pn_order: Option<u32>,
    chip_rate: Option<String>,
    tx_power: Option<String>,
    noise_floor: Option<String>,
    allow_aliasing: Option<bool>,
    scan_start: Option<String>,
    scan_step: Option<String>,
    scan_span: Option<String>,
    threshold: Option<String>,
    min_separation_bins: Option<usize>,
    min_separation_steps: Option<usize>,
    parabolic: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGbsm {
    clusters: usize,
    paths_per_cluster: usize,
    delay_scale: String,
    angle_spread: String,
    power_decay: String,
}

/// How the RIS phase configuration is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum CodebookSource {
    Zeros,
    Anomalous {
        theta_in: PlanarAngle,
        theta_out: PlanarAngle,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Antennas {
    pub tx: AntennaPattern,
    pub rx: AntennaPattern,
    /// Rotating horn used by scans.
    pub scan: AntennaPattern,
}

/// Fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub seed: u64,
    pub geometry: ScenarioGeometry,
    pub reflection_loss_db: f64,
    pub antennas: Antennas,
    pub panel: RisPanel,
    pub codebook: CodebookSource,
    pub sounding: SoundingConfig,
    pub scan: ScanPlan,
    pub extract: ExtractOptions,
    pub gbsm: Option<GbsmParams>,
}

impl ScenarioFile {
    /// Resolves the codebook against the panel.
    pub fn build_codebook(&self) -> Result<Codebook> {
        match &self.codebook {
            CodebookSource::Zeros => Ok(Codebook::zeros(self.panel.rows, self.panel.cols)),
            CodebookSource::Anomalous {
                theta_in,
                theta_out,
            } => generate_anomalous_codebook(&self.panel, *theta_in, *theta_out),
            CodebookSource::File(p) => {
                let text = std::fs::read_to_string(p)?;
                Codebook::from_text(&text, &p.display().to_string())
            }
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, &path.display().to_string(), base)
}

/// Parses scenario text; relative file references resolve against `base`.
pub fn parse_scenario(text: &str, file: &str, base: &Path) -> Result<ScenarioFile> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            file: file.into(),
            line,
            message: e.message().to_owned(),
        }
    })?;
    resolve(raw, base)
}

fn position(p: &RawPosition, origin: Point2, field: &str) -> Result<Point2> {
    place(&p.azimuth, &p.distance, &p.x, &p.y, origin, field)
}

fn place(
    azimuth: &Option<String>,
    distance: &Option<String>,
    x: &Option<String>,
    y: &Option<String>,
    origin: Point2,
    field: &str,
) -> Result<Point2> {
    match (azimuth, distance, x, y) {
        (Some(a), Some(d), None, None) => {
            let a = quantity(a, Unit::Angle, &format!("{field}.azimuth"))?;
            let df = format!("{field}.distance");
            let d = quantity(d, Unit::Length, &df)?;
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::validation(
                    df,
                    format!("must be non-negative, got {d}"),
                ));
            }
            Ok(Point2::polar(origin, a, d))
        }
        (None, None, Some(x), Some(y)) => Ok(Point2::new(
            quantity(x, Unit::Length, &format!("{field}.x"))?,
            quantity(y, Unit::Length, &format!("{field}.y"))?,
        )),
        _ => Err(Error::validation(
            field,
            "give either azimuth and distance, or x and y",
        )),
    }
}

fn antenna(raw: &Option<RawAntenna>, frame: Frame, field: &str) -> Result<AntennaPattern> {
    let Some(a) = raw else {
        return Ok(AntennaPattern::isotropic());
    };
    let level = |v: &Option<String>, name: &str| -> Result<Option<f64>> {
        v.as_deref()
            .map(|s| quantity(s, Unit::Level, &format!("{field}.{name}")))
            .transpose()
    };
    let gain = level(&a.gain, "gain")?;
    let floor = level(&a.sidelobe_floor, "sidelobe_floor")?;
    let angle = |v: &Option<String>, name: &str| -> Result<Option<f64>> {
        v.as_deref()
            .map(|s| quantity(s, Unit::Angle, &format!("{field}.{name}")))
            .transpose()
    };
    match a.kind.as_str() {
        "isotropic" => Ok(AntennaPattern::isotropic()),
        "omni" => AntennaPattern::omni(gain.unwrap_or(0.0)),
        "horn" => {
            let hpbw = angle(&a.hpbw, "hpbw")?
                .ok_or_else(|| Error::validation(format!("{field}.hpbw"), "required for a horn"))?;
            let pointing = PlanarAngle::new(angle(&a.pointing, "pointing")?.unwrap_or(0.0), frame);
            let mut h =
                AntennaPattern::horn(gain.unwrap_or(0.0), hpbw, pointing).map_err(|_| {
                    Error::validation(format!("{field}.hpbw"), "must lie in (0, 360] deg")
                })?;
            if let Some(f) = floor {
                h = h.with_sidelobe_floor(f)?;
            }
            Ok(h)
        }
        other => Err(Error::validation(
            format!("{field}.kind"),
            format!("`{other}` is not one of horn, omni, isotropic"),
        )),
    }
}

fn resolve(raw: RawScenario, base: &Path) -> Result<ScenarioFile> {
    let g = &raw.geometry;
    let origin = Point2::new(0.0, 0.0);
    let ris = match &g.ris {
        Some(p) => position(p, origin, "geometry.ris")?,
        None => origin,
    };
    let height = match &g.height {
        Some(h) => positive(
            quantity(h, Unit::Length, "geometry.height")?,
            "geometry.height",
        )?,
        None => 1.5,
    };
    let carrier = match &g.carrier {
        Some(c) => positive(
            quantity(c, Unit::Frequency, "geometry.carrier")?,
            "geometry.carrier",
        )?,
        None => crate::synth::DEFAULT_CARRIER_HZ,
    };
    let reflection_loss_db = match &g.reflection_loss {
        Some(l) => quantity(l, Unit::Level, "geometry.reflection_loss")?,
        None => DEFAULT_REFLECTION_LOSS_DB,
    };
    let tx =
        g.tx.iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(Site {
                    label: t.label.clone().unwrap_or_else(|| format!("Tx{}", i + 1)),
                    position: position(t, ris, &format!("geometry.tx[{i}]"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
    let rx = Site {
        label: g.rx.label.clone().unwrap_or_else(|| "Rx".into()),
        position: position(&g.rx, ris, "geometry.rx")?,
    };
    let scatterers = g
        .scatterer
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let field = format!("geometry.scatterer[{i}]");
            let side = match s.side.as_str() {
                "tx-ris" => Side::TxRis,
                "ris-rx" => Side::RisRx,
                other => {
                    return Err(Error::validation(
                        format!("{field}.side"),
                        format!("`{other}` is not tx-ris or ris-rx"),
                    ))
                }
            };
            Ok(Scatterer {
                label: s.label.clone().unwrap_or_else(|| format!("S{}", i + 1)),
                position: place(&s.azimuth, &s.distance, &s.x, &s.y, ris, &field)?,
                side,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let geometry = ScenarioGeometry {
        ris,
        tx,
        rx,
        scatterers,
        height_m: height,
        carrier_hz: carrier,
    };
    geometry.validate()?;

    let antennas = Antennas {
        tx: antenna(&raw.antennas.tx, Frame::Tx, "antennas.tx")?,
        rx: antenna(&raw.antennas.rx, Frame::Rx, "antennas.rx")?,
        scan: match &raw.antennas.scan {
            Some(_) => antenna(&raw.antennas.scan, Frame::Rx, "antennas.scan")?,
            None => AntennaPattern::horn(20.0, 15.0, PlanarAngle::rx(0.0))?,
        },
    };

    let p = &raw.panel;
    let defaults = RisPanel::reference();
    let panel = RisPanel {
        rows: p.rows.unwrap_or(defaults.rows),
        cols: p.cols.unwrap_or(defaults.cols),
        element_spacing_wavelengths: match &p.spacing {
            Some(s) => quantity(s, Unit::Spacing, "panel.spacing")?,
            None => defaults.element_spacing_wavelengths,
        },
        phase_bits: p.phase_bits.unwrap_or(defaults.phase_bits),
        center_freq_hz: carrier,
        element_pattern_exponent: p
            .element_exponent
            .unwrap_or(defaults.element_pattern_exponent),
        loss_db: match &p.loss {
            Some(l) => quantity(l, Unit::Level, "panel.loss")?,
            None => defaults.loss_db,
        },
    };
    panel.validate()?;

    let c = &raw.codebook;
    let ris_angle = |v: &Option<String>, name: &str| -> Result<PlanarAngle> {
        let field = format!("codebook.{name}");
        let v = v
            .as_deref()
            .ok_or_else(|| Error::validation(&field, "required for anomalous mode"))?;
        let deg = quantity(v, Unit::Angle, &field)?;
        if !(deg > 0.0 && deg < 180.0) {
            return Err(Error::validation(
                field,
                "must lie in front of the panel, (0, 180) deg",
            ));
        }
        Ok(PlanarAngle::ris(deg))
    };
    let codebook = match c.mode.as_deref().unwrap_or("zeros") {
        "zeros" => CodebookSource::Zeros,
        "anomalous" => CodebookSource::Anomalous {
            theta_in: ris_angle(&c.theta_in, "theta_in")?,
            theta_out: ris_angle(&c.theta_out, "theta_out")?,
        },
        "file" => {
            let p = c
                .path
                .as_deref()
                .ok_or_else(|| Error::validation("codebook.path", "required for file mode"))?;
            CodebookSource::File(base.join(p))
        }
        other => {
            return Err(Error::validation(
                "codebook.mode",
                format!("`{other}` is not one of zeros, anomalous, file"),
            ))
        }
    };

    let s = &raw.sounding;
    let d = SoundingConfig::default();
    let sounding = SoundingConfig {
        pn_order: s.pn_order.unwrap_or(d.pn_order),
        chip_rate_hz: match &s.chip_rate {
            Some(v) => positive(
                quantity(v, Unit::Frequency, "sounding.chip_rate")?,
                "sounding.chip_rate",
            )?,
            None => d.chip_rate_hz,
        },
        carrier_hz: carrier,
        tx_power_dbm: match &s.tx_power {
            Some(v) => quantity(v, Unit::Level, "sounding.tx_power")?,
            None => d.tx_power_dbm,
        },
        noise_floor_db: match &s.noise_floor {
            Some(v) => quantity(v, Unit::Level, "sounding.noise_floor")?,
            None => d.noise_floor_db,
        },
        allow_aliasing: s.allow_aliasing.unwrap_or(d.allow_aliasing),
    };
    sounding.validate()?;
    let angle_or = |v: &Option<String>, name: &str, default: f64| -> Result<f64> {
        match v {
            Some(v) => quantity(v, Unit::Angle, &format!("sounding.{name}")),
            None => Ok(default),
        }
    };
    let scan = ScanPlan {
        start_deg: angle_or(&s.scan_start, "scan_start", 0.0)?,
        step_deg: positive(
            angle_or(&s.scan_step, "scan_step", 5.0)?,
            "sounding.scan_step",
        )?,
        span_deg: angle_or(&s.scan_span, "scan_span", 360.0)?,
    };
    let ed = ExtractOptions::default();
    let extract = ExtractOptions {
        threshold_db: match &s.threshold {
            Some(v) => quantity(v, Unit::Level, "sounding.threshold")?,
            None => ed.threshold_db,
        },
        min_separation_bins: s.min_separation_bins.unwrap_or(ed.min_separation_bins),
        min_separation_steps: s.min_separation_steps.unwrap_or(ed.min_separation_steps),
        parabolic: s.parabolic.unwrap_or(ed.parabolic),
    };

    let seed = raw.seed.unwrap_or(0);
    let gbsm = raw
        .gbsm
        .map(|g| -> Result<GbsmParams> {
            let params = GbsmParams {
                num_clusters: g.clusters,
                paths_per_cluster: g.paths_per_cluster,
                delay_scale_ns: quantity(&g.delay_scale, Unit::Time, "gbsm.delay_scale")?,
                angle_spread_deg: quantity(&g.angle_spread, Unit::Angle, "gbsm.angle_spread")?,
                power_decay_db: quantity(&g.power_decay, Unit::Level, "gbsm.power_decay")?,
                seed,
            };
            params.validate()?;
            Ok(params)
        })
        .transpose()?;

    Ok(ScenarioFile {
        seed,
        geometry,
        reflection_loss_db,
        antennas,
        panel,
        codebook,
        sounding,
        scan,
        extract,
        gbsm,
    })
}
