use num_complex::Complex64;
use proptest::prelude::*;

use ris_cascade::antenna::AntennaPattern;
use ris_cascade::cascade::{
    cascade_direct, cir_to_pdp, power_cascade_db, ConstantGain, DelayCir, Terminals,
};
use ris_cascade::path::{PathComponent, Side};
use ris_cascade::ris::{
    anomalous_phase_profile, f_ris_gain, front_grid, pattern_table, quantize_phases, Codebook,
    RisPanel,
};
use ris_cascade::sounding::{
    extract_paths, rotational_scan, sound_channel, ExtractOptions, Padp, ScanEnd, ScanPlan,
    SoundingConfig,
};
use ris_cascade::synth::{
    gbsm_generate, geometric_paths, GbsmParams, Point2, Scatterer, ScenarioGeometry, Site,
};
use ris_cascade::units::{
    db_from_linear, delay_to_bin, linear_from_db, Db, DelayGrid, PlanarAngle,
};

fn gbsm_params() -> impl Strategy<Value = GbsmParams> {
    (
        1usize..=5,
        1usize..=10,
        5.0f64..60.0,
        1.0f64..15.0,
        0.0f64..20.0,
        any::<u64>(),
    )
        .prop_map(
            |(
                num_clusters,
                paths_per_cluster,
                delay_scale_ns,
                angle_spread_deg,
                power_decay_db,
                seed,
            )| GbsmParams {
                num_clusters,
                paths_per_cluster,
                delay_scale_ns,
                angle_spread_deg,
                power_decay_db,
                seed,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn db_linear_consistency(p1 in -200.0f64..100.0, p2 in -200.0f64..100.0, f in -100.0f64..100.0) {
        let direct = power_cascade_db(Db::new(p1), Db::new(p2), Db::new(f));
        let lin = linear_from_db(Db::new(p1)) * linear_from_db(Db::new(p2)) * linear_from_db(Db::new(f));
        prop_assert!((direct.value() - db_from_linear(lin).unwrap().value()).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascade_cardinality_additivity_and_scaling(a in gbsm_params(), b in gbsm_params(), g in -30.0f64..30.0, base in -20.0f64..60.0) {
        let sub1 = gbsm_generate(&a, Side::TxRis).unwrap();
        let sub2 = gbsm_generate(&b, Side::RisRx).unwrap();
        let t = Terminals::default();
        let p = cascade_direct(&sub1, &sub2, &ConstantGain(Db::new(base)), &t).unwrap();
        let q = cascade_direct(&sub1, &sub2, &ConstantGain(Db::new(base + g)), &t).unwrap();
        prop_assert_eq!(p.len(), sub1.len() * sub2.len());
        for (x, y) in p.iter().zip(&q) {
            let parents = sub1.paths()[x.idx_tx_ris].delay_ns + sub2.paths()[x.idx_ris_rx].delay_ns;
            prop_assert_eq!(x.delay_ns, parents);
            prop_assert!((y.power_db.value() - x.power_db.value() - g).abs() <= 1e-9);
        }
        let argmax = |v: &[ris_cascade::cascade::CascadePath]| {
            (0..v.len()).max_by(|&i, &j| v[i].power_db.value().total_cmp(&v[j].power_db.value())).unwrap()
        };
        prop_assert_eq!(argmax(&p), argmax(&q));
    }
}

fn codebook_for(panel: &RisPanel, theta_in: f64, target: f64, bits: u32) -> Codebook {
    let profile =
        anomalous_phase_profile(panel, PlanarAngle::ris(theta_in), PlanarAngle::ris(target))
            .unwrap();
    quantize_phases(&profile, bits).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    /// Gain towards the steered direction never drops when a phase bit is added.
    #[test]
    fn quantization_refinement(theta_in in 15.0f64..165.0, target in 15.0f64..165.0) {
        let panel = RisPanel::reference();
        let mut previous = f64::NEG_INFINITY;
        for bits in 1..=4 {
            let cb = codebook_for(&panel, theta_in, target, bits);
            let g = f_ris_gain(&panel, &cb, PlanarAngle::ris(theta_in), PlanarAngle::ris(target)).unwrap().value();
            prop_assert!(g >= previous - 1e-9, "bits {bits}: {g} < {previous}");
            previous = g;
        }
    }

    #[test]
    fn gains_are_deterministic(theta_in in 1.0f64..179.0, out in 1.0f64..179.0, target in 15.0f64..165.0) {
        let panel = RisPanel::reference();
        let cb = codebook_for(&panel, theta_in, target, 1);
        let a = f_ris_gain(&panel, &cb, PlanarAngle::ris(theta_in), PlanarAngle::ris(out)).unwrap();
        let b = f_ris_gain(&panel, &cb.clone(), PlanarAngle::ris(theta_in), PlanarAngle::ris(out)).unwrap();
        prop_assert_eq!(a.value().to_bits(), b.value().to_bits());
    }
}

/// Normalized Dirichlet kernel of `n` columns at spacing `d` wavelengths.
fn dirichlet(n: usize, d: f64, s: f64) -> f64 {
    let x = std::f64::consts::PI * d * s;
    if x.abs() < 1e-15 {
        return 1.0;
    }
    ((n as f64 * x).sin() / (n as f64 * x.sin())).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// A 5 deg sweep of the specular beam loses at most the mainlobe roll-off
    /// at the grid point nearest the specular direction plus its element loss.
    #[test]
    fn coarse_sweep_stays_within_mainlobe_bound(theta_in in 30.0f64..150.0) {
        let panel = RisPanel::reference();
        let cb = Codebook::zeros(panel.rows, panel.cols);
        let fine = pattern_table(&panel, &cb, PlanarAngle::ris(theta_in), &front_grid(0.5)).unwrap();
        let coarse = pattern_table(&panel, &cb, PlanarAngle::ris(theta_in), &front_grid(5.0)).unwrap();
        let specular = 180.0 - theta_in;
        let nearest = (specular / 5.0).round() * 5.0;
        let s = theta_in.to_radians().cos() + nearest.to_radians().cos();
        let bound = -20.0 * dirichlet(panel.cols, panel.element_spacing_wavelengths, s).log10()
            - 20.0 * nearest.to_radians().sin().log10();
        let gap = fine.peak().1.value() - coarse.peak().1.value();
        prop_assert!(gap >= -1e-12);
        prop_assert!(gap <= bound + 1e-9, "gap {gap} > bound {bound}");
    }
}

fn small_sounder() -> SoundingConfig {
    SoundingConfig {
        pn_order: 7,
        ..SoundingConfig::default()
    }
}

fn rx_paths() -> impl Strategy<Value = Vec<PathComponent>> {
    prop::collection::vec(
        (-100.0f64..-60.0, 0usize..100, 0.0f64..360.0, 0.0f64..6.3),
        1..5,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(p, bin, aoa, ph)| {
                PathComponent::new(
                    Db::new(p),
                    bin as f64 * 2.5,
                    PlanarAngle::ris(90.0),
                    PlanarAngle::rx(aoa),
                )
                .with_phase(ph)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scan_linearity(paths in rx_paths(), g in -20.0f64..20.0) {
        let horn = AntennaPattern::horn(20.0, 15.0, PlanarAngle::rx(0.0)).unwrap();
        let plan = ScanPlan { start_deg: 0.0, step_deg: 10.0, span_deg: 360.0 };
        let cfg = small_sounder();
        let scaled: Vec<_> = paths.iter().map(|p| PathComponent { power_db: p.power_db + Db::new(g), ..*p }).collect();
        let a = rotational_scan(&paths, ScanEnd::Arrival, &horn, &plan, &cfg, 1).unwrap();
        let b = rotational_scan(&scaled, ScanEnd::Arrival, &horn, &plan, &cfg, 1).unwrap();
        let top = (0..a.pointings().len())
            .flat_map(|s| a.row(s).to_vec())
            .map(|c| c.value())
            .fold(f64::NEG_INFINITY, f64::max);
        for s in 0..a.pointings().len() {
            for (x, y) in a.row(s).iter().zip(b.row(s)) {
                // cells at the numerical floor carry no signal
                if x.value() > top - 150.0 {
                    prop_assert!((y.value() - x.value() - g).abs() <= 1e-6);
                }
            }
        }
        let opts = ExtractOptions { threshold_db: 18.0, ..ExtractOptions::default() };
        let ea = extract_paths(&a, &opts).unwrap();
        let eb = extract_paths(&b, &opts).unwrap();
        prop_assert_eq!(
            ea.iter().map(|p| (p.step, p.bin)).collect::<Vec<_>>(),
            eb.iter().map(|p| (p.step, p.bin)).collect::<Vec<_>>()
        );
    }

    /// Layout -> channel -> sounder -> peak picking recovers every path that
    /// clears the correlation floor by 15 dB.
    #[test]
    fn noise_free_sounding_round_trip(
        rx_az in 30.0f64..150.0,
        rx_dist in 3.0f64..15.0,
        scat in prop::collection::vec((5.0f64..175.0, 1.0f64..12.0), 0..4),
    ) {
        let ris = Point2::new(0.0, 0.0);
        let geom = ScenarioGeometry {
            ris,
            tx: vec![Site { label: "Tx".into(), position: Point2::polar(ris, 80.0, 5.0) }],
            rx: Site { label: "Rx".into(), position: Point2::polar(ris, rx_az, rx_dist) },
            scatterers: scat
                .iter()
                .enumerate()
                .map(|(i, &(az, d))| Scatterer { label: format!("S{i}"), position: Point2::polar(ris, az, d), side: Side::RisRx })
                .collect(),
            height_m: 1.5,
            carrier_hz: 6.9e9,
        };
        prop_assume!(geom.validate().is_ok());
        let sub = geometric_paths(&geom, Side::RisRx, 6.0).unwrap();
        let cfg = SoundingConfig::default();
        let grid = cfg.grid().unwrap();
        let bins: Vec<usize> = sub.paths().iter().map(|p| delay_to_bin(p.delay_ns, &grid).unwrap()).collect();
        let mut sorted = bins.clone();
        sorted.sort_unstable();
        prop_assume!(sorted.windows(2).all(|w| w[1] >= w[0] + 2));

        let cir = DelayCir::from_paths(
            grid,
            sub.paths().iter().map(|p| (p.delay_ns, Complex64::from_polar(p.power_db.to_amplitude(), p.phase_rad))),
        ).unwrap();
        let pdp = cir_to_pdp(&sound_channel(&cir, &cfg, 0).unwrap());
        let strongest = sub.paths().iter().map(|p| p.power_db.value()).fold(f64::NEG_INFINITY, f64::max);
        let floor = strongest - 20.0 * (cfg.pn_length() as f64).log10();
        let padp = Padp::from_pdp(&pdp, PlanarAngle::rx(0.0));
        let found = extract_paths(&padp, &ExtractOptions { threshold_db: strongest - floor - 15.0, ..ExtractOptions::default() }).unwrap();
        for (p, &bin) in sub.paths().iter().zip(&bins) {
            if p.power_db.value() >= floor + 15.0 {
                let hit = found.iter().find(|e| e.bin == bin);
                prop_assert!(hit.is_some(), "path at bin {bin} not extracted");
                prop_assert!((hit.unwrap().power_db.value() - p.power_db.value()).abs() <= 0.5);
            }
        }
    }

    #[test]
    fn aliasing_is_periodic(bin in 0usize..127, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let cfg = SoundingConfig { allow_aliasing: true, ..small_sounder() };
        let grid = DelayGrid::new(2.5, 2 * cfg.pn_length()).unwrap();
        let mut near = vec![Complex64::new(0.0, 0.0); grid.num_bins()];
        let mut far = near.clone();
        near[bin] = Complex64::new(re, im);
        far[bin + cfg.pn_length()] = Complex64::new(re, im);
        let a = sound_channel(&DelayCir::new(grid, near).unwrap(), &cfg, 0).unwrap();
        let b = sound_channel(&DelayCir::new(grid, far).unwrap(), &cfg, 0).unwrap();
        prop_assert_eq!(a, b);
    }
}
