use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use ris_cascade::cascade::{
    bin_cascade_paths, cascade_convolution, cascade_direct, cir_to_pdp, ConstantGain, DelayCir,
    GriddedCir, PanelGain, RisGain, Terminals,
};
use ris_cascade::path::{Side, SubChannel};
use ris_cascade::ris::{front_grid, generate_anomalous_codebook, pattern_table, Codebook};
use ris_cascade::scenario::{load_scenario, ScenarioFile};
use ris_cascade::sounding::{
    extract_paths, rotational_scan, sound_channel, ExtractOptions, Padp, ScanEnd,
};
use ris_cascade::synth::{gbsm_generate, geometric_paths};
use ris_cascade::tables::{
    load_measured_tables, read_table2, read_table3, write_atomic, write_pdp, write_table2,
    write_table3,
};
use ris_cascade::units::{delay_to_bin, Db, DelayGrid, Frame, PlanarAngle};
use ris_cascade::validation::{build_validation_table, ValidationOptions};
use ris_cascade::{Error, Result};

/// RIS cascaded-channel toolkit.
#[derive(Parser)]
#[command(name = "riscas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    TxRis,
    RisRx,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::TxRis => Side::TxRis,
            SideArg::RisRx => Side::RisRx,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Geometric,
    Gbsm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Direct,
    Convolution,
}

#[derive(Clone, Copy, ValueEnum)]
enum EndArg {
    Arrival,
    Departure,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Tx,
    Ris,
    Rx,
}

#[derive(Subcommand)]
enum Command {
    /// Write an anomalous-reflection codebook for the scenario panel.
    Codebook {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        theta_in: Option<f64>,
        #[arg(long)]
        theta_out: Option<f64>,
        /// Phase resolution; 0 keeps continuous phases.
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep F_RIS over departure angles for one incidence angle.
    Pattern {
        #[arg(long)]
        scenario: PathBuf,
        /// Codebook file; defaults to the scenario codebook.
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        theta_in: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize one sub-channel as a table2/table3 CSV.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long, value_enum, default_value = "geometric")]
        model: Model,
        #[arg(long)]
        seed: Option<u64>,
        /// Move delays onto the sounder's delay grid.
        #[arg(long)]
        snap: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cascade two sub-channels.
    Cascade {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Tx-RIS paths (table2 CSV); synthesized from the scenario if absent.
        #[arg(long)]
        tx_ris: Option<PathBuf>,
        /// RIS-Rx paths (table3 CSV); synthesized from the scenario if absent.
        #[arg(long)]
        ris_rx: Option<PathBuf>,
        /// Constant F_RIS; otherwise the scenario panel and codebook are used.
        #[arg(long, allow_hyphen_values = true)]
        f_ris_db: Option<f64>,
        #[arg(long, value_enum, default_value = "direct")]
        form: Form,
        #[arg(long, default_value_t = 2.5)]
        bin_ns: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// PN-correlation sounding of one sub-channel; writes its PDP.
    Sound {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "ris-rx")]
        side: SideArg,
        /// Path table matching `--side`; synthesized if absent.
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotating-horn scan of one sub-channel; writes its PADP.
    Scan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "ris-rx")]
        side: SideArg,
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "arrival")]
        end: EndArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Peak-pick paths from a PADP CSV.
    Extract {
        #[arg(long)]
        padp: PathBuf,
        /// Frame of the PADP pointing angles.
        #[arg(long, value_enum, default_value = "rx")]
        frame: FrameArg,
        #[arg(long, default_value_t = 20.0)]
        threshold_db: f64,
        #[arg(long, default_value_t = 1)]
        min_sep_bins: usize,
        #[arg(long, default_value_t = 1)]
        min_sep_steps: usize,
        #[arg(long)]
        parabolic: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild model-versus-measurement power differences from tables.
    Validate {
        /// Directory holding table2.csv, table3.csv, fris.csv, measured.csv.
        #[arg(long)]
        tables: PathBuf,
        #[arg(long, default_value_t = 7.0)]
        tolerance_db: f64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        table_iv_as_printed: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(out: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if out.as_os_str() == "-" {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        fill(&mut lock)?;
        lock.flush()?;
        Ok(())
    } else {
        write_atomic(out, fill)
    }
}

fn read_paths(path: &Path, side: Side) -> Result<SubChannel> {
    let f = std::fs::File::open(path)?;
    let name = path.display().to_string();
    match side {
        Side::TxRis => read_table2(f, &name),
        Side::RisRx => read_table3(f, &name),
    }
}

fn synthesize(
    sc: &ScenarioFile,
    side: Side,
    model: Model,
    seed: Option<u64>,
) -> Result<SubChannel> {
    match model {
        Model::Geometric => geometric_paths(&sc.geometry, side, sc.reflection_loss_db),
        Model::Gbsm => {
            let mut params = sc
                .gbsm
                .clone()
                .ok_or_else(|| Error::validation("gbsm", "the scenario has no [gbsm] section"))?;
            if let Some(s) = seed {
                params.seed = s;
            }
            gbsm_generate(&params, side)
        }
    }
}

fn sub_channel(
    sc: Option<&ScenarioFile>,
    file: Option<&PathBuf>,
    side: Side,
) -> Result<SubChannel> {
    match (file, sc) {
        (Some(f), _) => read_paths(f, side),
        (None, Some(sc)) => synthesize(sc, side, Model::Geometric, None),
        (None, None) => Err(Error::validation(
            match side {
                Side::TxRis => "--tx-ris",
                Side::RisRx => "--ris-rx",
            },
            "give a path table or a --scenario to synthesize from",
        )),
    }
}

fn write_paths(sub: &SubChannel, out: &Path) -> Result<()> {
    match sub.side() {
        Side::TxRis => emit(out, |w| write_table2(sub, w)),
        Side::RisRx => emit(out, |w| write_table3(sub, w)),
    }
}

fn grid_for(sub: &SubChannel, bin_ns: f64) -> Result<DelayGrid> {
    let probe = DelayGrid::new(bin_ns, usize::MAX / 2)?;
    let mut last = 0;
    for p in sub.paths() {
        last = last.max(delay_to_bin(p.delay_ns, &probe)?);
    }
    DelayGrid::new(bin_ns, last + 1)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Codebook {
            scenario,
            theta_in,
            theta_out,
            bits,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let mut panel = sc.panel.clone();
            if let Some(b) = bits {
                panel.phase_bits = b;
            }
            let cb = match (theta_in, theta_out) {
                (Some(i), Some(o)) => {
                    generate_anomalous_codebook(&panel, PlanarAngle::ris(i), PlanarAngle::ris(o))?
                }
                (None, None) if bits.is_none() => sc.build_codebook()?,
                _ => {
                    return Err(Error::validation(
                        "--theta-in/--theta-out",
                        "give both angles when overriding the scenario codebook",
                    ))
                }
            };
            emit(&out, |w| Ok(w.write_all(cb.to_text().as_bytes())?))
        }
        Command::Pattern {
            scenario,
            codebook,
            theta_in,
            step,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let cb = match codebook {
                Some(p) => {
                    Codebook::from_text(&std::fs::read_to_string(&p)?, &p.display().to_string())?
                }
                None => sc.build_codebook()?,
            };
            if !(step > 0.0 && step < 90.0) {
                return Err(Error::validation("--step", "must lie in (0, 90) deg"));
            }
            let table = pattern_table(
                &sc.panel,
                &cb,
                PlanarAngle::ris(theta_in),
                &front_grid(step),
            )?;
            let (peak_at, peak) = table.peak();
            eprintln!(
                "peak {:.2} dB at {:.2} deg",
                peak.value(),
                peak_at.degrees()
            );
            emit(&out, |w| {
                writeln!(w, "theta_out_deg,f_ris_db")?;
                for (a, g) in &table.gains {
                    writeln!(w, "{:.2},{:.2}", a.degrees(), g.value())?;
                }
                Ok(())
            })
        }
        Command::Synth {
            scenario,
            side,
            model,
            seed,
            snap,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let mut sub = synthesize(&sc, side.into(), model, seed)?;
            if snap {
                let grid = sc.sounding.grid()?.with_num_bins(usize::MAX / 2)?;
                sub = sub.snapped_to_grid(&grid)?;
            }
            write_paths(&sub, &out)
        }
        Command::Cascade {
            scenario,
            tx_ris,
            ris_rx,
            f_ris_db,
            form,
            bin_ns,
            out,
        } => {
            let sc = scenario.as_deref().map(load_scenario).transpose()?;
            let sub1 = sub_channel(sc.as_ref(), tx_ris.as_ref(), Side::TxRis)?;
            let sub2 = sub_channel(sc.as_ref(), ris_rx.as_ref(), Side::RisRx)?;
            let gain: Box<dyn RisGain> = match (f_ris_db, &sc) {
                (Some(g), _) => Box::new(ConstantGain(Db::try_new(g)?)),
                (None, Some(sc)) => Box::new(PanelGain::new(&sc.panel, &sc.build_codebook()?)?),
                (None, None) => {
                    return Err(Error::validation(
                        "--f-ris-db",
                        "give a constant gain or a --scenario with a panel",
                    ))
                }
            };
            let terminals = match &sc {
                Some(sc) => Terminals {
                    tx_pattern: sc.antennas.tx,
                    rx_pattern: sc.antennas.rx,
                    ..Terminals::default()
                },
                None => Terminals::default(),
            };
            match form {
                Form::Direct => {
                    let paths = cascade_direct(&sub1, &sub2, gain.as_ref(), &terminals)?;
                    emit(&out, |w| {
                        writeln!(w, "label,power_db,delay_ns,aoa_rx_deg")?;
                        for p in &paths {
                            writeln!(
                                w,
                                "{},{:.2},{:.1},{:.2}",
                                p.label,
                                p.power_db.value(),
                                p.delay_ns,
                                p.aoa_rx.degrees()
                            )?;
                        }
                        Ok(())
                    })
                }
                Form::Convolution => {
                    // the convolution form works on gridded sub-channels
                    let (grid1, grid2) = (grid_for(&sub1, bin_ns)?, grid_for(&sub2, bin_ns)?);
                    let (sub1, sub2) =
                        (sub1.snapped_to_grid(&grid1)?, sub2.snapped_to_grid(&grid2)?);
                    let g1 = GriddedCir::from_subchannel(
                        &sub1,
                        grid1,
                        &terminals.tx_pattern,
                        terminals.tx_offset,
                    )?;
                    let g2 = GriddedCir::from_subchannel(
                        &sub2,
                        grid2,
                        &terminals.rx_pattern,
                        terminals.rx_offset,
                    )?;
                    let cir = cascade_convolution(&g1, &g2, gain.as_ref())?;
                    let pdp = cir_to_pdp(&cir);
                    // cross-check against the path-by-path form
                    let direct = bin_cascade_paths(
                        &cascade_direct(&sub1, &sub2, gain.as_ref(), &terminals)?,
                        *cir.grid(),
                    )?;
                    for (a, b) in cir.taps().iter().zip(direct.taps()) {
                        let scale = a.norm().max(b.norm());
                        if (a - b).norm() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                            return Err(Error::Invariant(
                                "convolution and direct cascades disagree".into(),
                            ));
                        }
                    }
                    emit(&out, |w| write_pdp(&pdp, w))
                }
            }
        }
        Command::Sound {
            scenario,
            side,
            paths,
            seed,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let side = Side::from(side);
            let sub = match &paths {
                Some(p) => read_paths(p, side)?,
                None => synthesize(&sc, side, Model::Geometric, None)?,
            };
            let period = sc.sounding.grid()?;
            let span = grid_for(&sub, period.bin_width_ns())?;
            let grid = period.with_num_bins(span.num_bins().max(period.num_bins()))?;
            let cir = DelayCir::from_paths(
                grid,
                sub.paths().iter().map(|p| {
                    (
                        p.delay_ns,
                        Complex64::from_polar(p.power_db.to_amplitude(), p.phase_rad),
                    )
                }),
            )?;
            let est = sound_channel(&cir, &sc.sounding, seed.unwrap_or(sc.seed))?;
            emit(&out, |w| write_pdp(&cir_to_pdp(&est), w))
        }
        Command::Scan {
            scenario,
            side,
            paths,
            end,
            seed,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let side = Side::from(side);
            let sub = match &paths {
                Some(p) => read_paths(p, side)?,
                None => synthesize(&sc, side, Model::Geometric, None)?,
            };
            let end = match end {
                EndArg::Arrival => ScanEnd::Arrival,
                EndArg::Departure => ScanEnd::Departure,
            };
            let padp = rotational_scan(
                sub.paths(),
                end,
                &sc.antennas.scan,
                &sc.scan,
                &sc.sounding,
                seed.unwrap_or(sc.seed),
            )?;
            emit(&out, |w| padp.write_csv(w))
        }
        Command::Extract {
            padp,
            frame,
            threshold_db,
            min_sep_bins,
            min_sep_steps,
            parabolic,
            out,
        } => {
            let frame = match frame {
                FrameArg::Tx => Frame::Tx,
                FrameArg::Ris => Frame::Ris,
                FrameArg::Rx => Frame::Rx,
            };
            let table = Padp::read_csv(
                std::fs::File::open(&padp)?,
                frame,
                &padp.display().to_string(),
            )?;
            let found = extract_paths(
                &table,
                &ExtractOptions {
                    threshold_db,
                    min_separation_bins: min_sep_bins,
                    min_separation_steps: min_sep_steps,
                    parabolic,
                },
            )?;
            eprintln!("{} paths extracted", found.len());
            emit(&out, |w| {
                writeln!(w, "angle_deg,delay_ns,power_db")?;
                for p in &found {
                    writeln!(
                        w,
                        "{:.2},{:.1},{:.2}",
                        p.angle.degrees(),
                        p.delay_ns,
                        p.power_db.value()
                    )?;
                }
                Ok(())
            })
        }
        Command::Validate {
            tables,
            tolerance_db,
            table_iv_as_printed,
            out,
        } => {
            let t = load_measured_tables(&tables)?;
            let report = build_validation_table(
                &t,
                &ValidationOptions {
                    table_iv_as_printed,
                },
            )?;
            emit(&out, |w| report.write_csv(w))?;
            eprint!("{}", report.summary());
            report.check_tolerance(tolerance_db)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
