use num_complex::Complex64;
use proptest::prelude::*;

use tissue_modem::channel::ChannelModel;
use tissue_modem::metrics::{compute_ber, compute_mse_trace, constellation_csv, mse_trace_of, MSE_WINDOW};
use tissue_modem::pipeline::simulate;
use tissue_modem::receiver::{EqualizerConfig, Mode, SymbolDecisionRecord};
use tissue_modem::signal_model::{ConstellationKind, PacketConfig};

proptest! {
    #[test]
    fn upper_bound_only_without_errors(tx in prop::collection::vec(0u8..2, 1..2000), flips in prop::collection::vec(any::<prop::sample::Index>(), 0..5)) {
        let mut rx = tx.clone();
        for f in &flips {
            let i = f.index(rx.len());
            rx[i] ^= 1;
        }
        let errors = tx.iter().zip(&rx).filter(|(a, b)| a != b).count();
        let r = compute_ber(&tx, &rx).unwrap();
        prop_assert_eq!(r.bit_errors, errors);
        prop_assert_eq!(r.ber_upper_bound.is_some(), errors == 0);
        prop_assert_eq!(r.render().starts_with("< "), errors == 0);
    }

    #[test]
    fn window_value_ignores_order_inside_window(
        errs in prop::collection::vec(0.0f64..1.0, MSE_WINDOW..3 * MSE_WINDOW),
        seed in any::<u64>(),
    ) {
        let trace = mse_trace_of(&errs, MSE_WINDOW);
        let k = errs.len() - 1;
        let mut shuffled = errs.clone();
        let window = &mut shuffled[k + 1 - MSE_WINDOW..];
        // Deterministic permutation of the final window.
        let mut s = seed | 1;
        for i in (1..window.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            window.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let t2 = mse_trace_of(&shuffled, MSE_WINDOW);
        prop_assert!((trace[k] - t2[k]).abs() < 1e-9);
    }

    #[test]
    fn trace_is_a_function_of_errors_only(errs in prop::collection::vec(0.0f64..1.0, 1..400), theta in -3.0f64..3.0) {
        let recs: Vec<SymbolDecisionRecord> = errs
            .iter()
            .enumerate()
            .map(|(k, &e)| SymbolDecisionRecord {
                k,
                y: Complex64::new(theta, 0.0),
                d: Complex64::new(1.0, 0.0),
                e: Complex64::from_polar(e.sqrt(), theta),
                theta,
                phase_error: 0.0,
                mode: Mode::Training,
            })
            .collect();
        let a: Vec<f64> = compute_mse_trace(&recs).into_iter().map(|t| t.1).collect();
        let b = mse_trace_of(&errs, MSE_WINDOW);
        prop_assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-9, "{} vs {}", u, v);
        }
    }
}

#[test]
fn ideal_qpsk_constellation_clusters_tightly() {
    let cfg = PacketConfig::new(5e6, 2.5e6, ConstellationKind::Qpsk);
    let (_, rx) = simulate(&cfg, &ChannelModel::ideal(), &EqualizerConfig::default()).unwrap();
    let c = cfg.constellation();
    let csv = constellation_csv(&rx.eq.records);
    let mut n = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let y = Complex64::new(f[0].parse().unwrap(), f[1].parse().unwrap());
        assert!((y - c.slice(y)).norm() < 0.05, "{line}");
        assert_eq!(f[3], "decision_directed");
        n += 1;
    }
    assert_eq!(n, cfg.n_payload);
}
