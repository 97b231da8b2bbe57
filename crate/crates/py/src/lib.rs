//! Python bindings for the `ris_cascade` crate.

use std::fs::File;
use std::path::Path;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ris_cascade::cascade::{cascade_direct, cir_to_pdp, ConstantGain, DelayCir, Terminals};
use ris_cascade::ris::{
    front_grid, generate_anomalous_codebook, pattern_table, Codebook, PanelResponse, RisPanel,
};
use ris_cascade::sounding::{generate_mseq, sound_channel, SoundingConfig};
use ris_cascade::tables::{load_measured_tables, read_table2, read_table3};
use ris_cascade::units::{Db, PlanarAngle};
use ris_cascade::validation::{build_validation_table, ValidationOptions};

create_exception!(ris_cascade_py, RisCascadeError, PyException);

fn err(e: ris_cascade::Error) -> PyErr {
    RisCascadeError::new_err(e.to_string())
}

fn open(path: &str) -> PyResult<File> {
    File::open(path).map_err(|e| RisCascadeError::new_err(format!("{path}: {e}")))
}

/// One row of the model-versus-measurement comparison.
#[pyclass(frozen, get_all)]
struct ValidationRow {
    label: String,
    p_n1_db: f64,
    p_n2_db: f64,
    f_ris_db: f64,
    p_conv_db: f64,
    p_measured_db: f64,
    p_no_ris_db: Option<f64>,
    delta_p_db: f64,
}

#[pymethods]
impl ValidationRow {
    fn __repr__(&self) -> String {
        format!(
            "ValidationRow(label={:?}, p_conv_db={:.2}, delta_p_db={:.2})",
            self.label, self.p_conv_db, self.delta_p_db
        )
    }
}

/// Rebuild the comparison table from a directory of measured tables.
#[pyfunction]
#[pyo3(signature = (tables_dir, table_iv_as_printed = true))]
fn validate(tables_dir: &str, table_iv_as_printed: bool) -> PyResult<Vec<ValidationRow>> {
    let tables = load_measured_tables(Path::new(tables_dir)).map_err(err)?;
    let report = build_validation_table(
        &tables,
        &ValidationOptions {
            table_iv_as_printed,
        },
    )
    .map_err(err)?;
    Ok(report
        .records
        .into_iter()
        .map(|r| ValidationRow {
            label: r.label,
            p_n1_db: r.p_n1.value(),
            p_n2_db: r.p_n2.value(),
            f_ris_db: r.f_ris.value(),
            p_conv_db: r.p_conv.value(),
            p_measured_db: r.p_measured.value(),
            p_no_ris_db: r.p_no_ris.map(Db::value),
            delta_p_db: r.delta_p.value(),
        })
        .collect())
}

/// Cascade two path tables with a constant RIS gain.
///
/// Returns `(label, power_db, delay_ns, aoa_rx_deg)` tuples.
#[pyfunction]
fn cascade(
    tx_ris_csv: &str,
    ris_rx_csv: &str,
    f_ris_db: f64,
) -> PyResult<Vec<(String, f64, f64, f64)>> {
    let t2 = read_table2(open(tx_ris_csv)?, tx_ris_csv).map_err(err)?;
    let t3 = read_table3(open(ris_rx_csv)?, ris_rx_csv).map_err(err)?;
    let gain = ConstantGain(Db::try_new(f_ris_db).map_err(err)?);
    let paths = cascade_direct(&t2, &t3, &gain, &Terminals::default()).map_err(err)?;
    Ok(paths
        .into_iter()
        .map(|p| (p.label, p.power_db.value(), p.delay_ns, p.aoa_rx.degrees()))
        .collect())
}

/// Maximal-length sequence of the given order as +1/-1 chips.
#[pyfunction]
fn mseq(order: u32) -> PyResult<Vec<i8>> {
    generate_mseq(order).map_err(err)
}

/// Sound a set of `(delay_ns, power_db)` paths and return the PDP in dB.
#[pyfunction]
#[pyo3(signature = (paths, pn_order = 9, chip_rate_hz = 400e6, noise_floor_db = f64::NEG_INFINITY, seed = 0))]
fn sound(
    paths: Vec<(f64, f64)>,
    pn_order: u32,
    chip_rate_hz: f64,
    noise_floor_db: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let cfg = SoundingConfig {
        pn_order,
        chip_rate_hz,
        noise_floor_db,
        ..SoundingConfig::default()
    };
    let grid = cfg.grid().map_err(err)?;
    let taps = paths
        .iter()
        .map(|&(d, p)| Ok((d, Complex64::new(Db::try_new(p)?.to_amplitude(), 0.0))))
        .collect::<ris_cascade::Result<Vec<_>>>()
        .map_err(err)?;
    let cir = DelayCir::from_paths(grid, taps).map_err(err)?;
    let out = sound_channel(&cir, &cfg, seed).map_err(err)?;
    Ok(cir_to_pdp(&out)
        .power_db
        .into_iter()
        .map(Db::value)
        .collect())
}

/// A reflecting panel together with its configured codebook.
#[pyclass]
struct Panel {
    panel: RisPanel,
    codebook: Codebook,
    response: PanelResponse,
}

impl Panel {
    fn build(panel: RisPanel, codebook: Codebook) -> PyResult<Self> {
        let response = PanelResponse::new(&panel, &codebook).map_err(err)?;
        Ok(Panel {
            panel,
            codebook,
            response,
        })
    }
}

#[pymethods]
impl Panel {
    /// 32x32 half-wavelength panel with an all-zero codebook.
    #[new]
    #[pyo3(signature = (rows = 32, cols = 32, spacing_wavelengths = 0.5, phase_bits = 1))]
    fn new(rows: usize, cols: usize, spacing_wavelengths: f64, phase_bits: u32) -> PyResult<Self> {
        let panel = RisPanel {
            rows,
            cols,
            element_spacing_wavelengths: spacing_wavelengths,
            phase_bits,
            ..RisPanel::reference()
        };
        panel.validate().map_err(err)?;
        Panel::build(panel, Codebook::zeros(rows, cols))
    }

    /// Load an anomalous-reflection codebook steering `theta_in` to `theta_out`.
    fn steer(&mut self, theta_in: f64, theta_out: f64) -> PyResult<()> {
        let cb = generate_anomalous_codebook(
            &self.panel,
            PlanarAngle::ris(theta_in),
            PlanarAngle::ris(theta_out),
        )
        .map_err(err)?;
        *self = Panel::build(self.panel.clone(), cb)?;
        Ok(())
    }

    /// Phases of the current codebook in radians, row-major.
    fn phases(&self) -> Vec<f64> {
        self.codebook.phases().to_vec()
    }

    fn gain(&self, theta_in: f64, theta_out: f64) -> PyResult<f64> {
        self.response
            .gain(PlanarAngle::ris(theta_in), PlanarAngle::ris(theta_out))
            .map(Db::value)
            .map_err(err)
    }

    /// `(theta_out_deg, gain_db)` over the front half-plane.
    #[pyo3(signature = (theta_in, step_deg = 0.5))]
    fn pattern(&self, theta_in: f64, step_deg: f64) -> PyResult<Vec<(f64, f64)>> {
        let t = pattern_table(
            &self.panel,
            &self.codebook,
            PlanarAngle::ris(theta_in),
            &front_grid(step_deg),
        )
        .map_err(err)?;
        Ok(t.gains
            .iter()
            .map(|(a, g)| (a.degrees(), g.value()))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Panel({}x{}, {} bit)",
            self.panel.rows, self.panel.cols, self.panel.phase_bits
        )
    }
}

#[pymodule]
fn ris_cascade_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RisCascadeError", m.py().get_type::<RisCascadeError>())?;
    m.add_class::<ValidationRow>()?;
    m.add_class::<Panel>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(cascade, m)?)?;
    m.add_function(wrap_pyfunction!(mseq, m)?)?;
    m.add_function(wrap_pyfunction!(sound, m)?)?;
    Ok(())
}
