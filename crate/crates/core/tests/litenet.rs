use ::litenet::litenet::{
    conv_forward, model_stats, module_forward, prune_model, train_with_history, ConvModule, FusedNet, TrainConfig,
};
use ::litenet::market_data::{make_windows, planted_signal_matrix, FeatureSpec};
use ::litenet::matrix::Matrix;
use ::litenet::mutual_info::{run_selection, SelectionParams};
use proptest::prelude::*;

fn arb_module(max_f: usize) -> impl Strategy<Value = ConvModule> {
    (1..=max_f).prop_flat_map(|f| {
        (
            prop::collection::vec(-1.0f64..1.0, f * f),
            prop::collection::vec(any::<bool>(), f * f),
            -0.5f64..0.5,
            -2.0f64..2.0,
            -1.0f64..1.0,
        )
            .prop_map(move |(kernel, mask, b, hw, hb)| {
                let mut m = ConvModule::new(f, kernel, b, hw, hb).unwrap();
                for (w, keep) in m.kernel.iter_mut().zip(&mask) {
                    if !keep {
                        *w = 0.0;
                    }
                }
                m.mask = mask;
                m
            })
    })
}

proptest! {
    #[test]
    fn sparse_forward_matches_dense(m in arb_module(3), x in prop::collection::vec(-3.0f64..3.0, 30)) {
        let input = Matrix::new(5, 6, x.clone()).unwrap();
        let net = FusedNet::new(vec![m.clone()], vec![1.0], 5, 6).unwrap();
        prop_assert_eq!(net.forward(&x).to_bits(), module_forward(&input, &m).unwrap().to_bits());
        let map = conv_forward(&input, &m).unwrap();
        prop_assert!(map.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn doubling_alpha_doubles_prediction(
        a in arb_module(2),
        b in arb_module(3),
        alpha in prop::collection::vec(-2.0f64..2.0, 2),
        x in prop::collection::vec(-3.0f64..3.0, 16),
    ) {
        let net = FusedNet::new(vec![a, b], alpha.clone(), 4, 4).unwrap();
        let doubled = net.with_alpha(alpha.iter().map(|v| 2.0 * v).collect()).unwrap();
        prop_assert_eq!(doubled.forward(&x), 2.0 * net.forward(&x));
    }

    #[test]
    fn pruning_is_idempotent_and_never_adds_work(
        a in arb_module(3),
        b in arb_module(3),
        eps1 in 0.0f64..0.6,
        eps2 in 0.0f64..0.6,
    ) {
        let net = FusedNet::new(vec![a, b], vec![0.5, 0.5], 4, 5).unwrap();
        let (p1, _) = prune_model(&net, eps1).unwrap();
        let (again, r) = prune_model(&p1, eps1).unwrap();
        prop_assert_eq!(&again, &p1);
        prop_assert_eq!(r.newly_masked, 0);
        let (p2, _) = prune_model(&p1, eps2).unwrap();
        let (s0, s1, s2) = (model_stats(&net), model_stats(&p1), model_stats(&p2));
        prop_assert!(s1.unmasked_params <= s0.unmasked_params && s2.unmasked_params <= s1.unmasked_params);
        prop_assert!(s1.macs <= s0.macs && s2.macs <= s1.macs);
        for (before, after) in p1.modules().iter().zip(p2.modules()) {
            for (k1, k2) in before.mask.iter().zip(&after.mask) {
                prop_assert!(*k1 || !*k2, "a mask was lifted");
            }
        }
    }
}

#[test]
fn training_is_bitwise_deterministic_and_masks_are_permanent() {
    let fm = planted_signal_matrix(800, 6, 1, 0.6, 4).unwrap();
    let sel = run_selection(&fm, &SelectionParams { seed: 4, ..Default::default() }, 0).unwrap();
    let spec = FeatureSpec { horizon: 1, vol_window: 20, window: 6, n_noise: 0, noise_seed: 0 };
    let ws = make_windows(fm, 6).unwrap();
    let cfg = TrainConfig { epochs: 12, epsilon: 0.08, prune_epochs: vec![2, 6], ..Default::default() };
    let (a, ha) = train_with_history(&ws, &spec, &cfg, &sel, None).unwrap();
    let (b, hb) = train_with_history(&ws, &spec, &cfg, &sel, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.prunes.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 6]);
    let masked_after: Vec<usize> = ha.epochs.iter().map(|e| e.stats.masked_weights).collect();
    assert!(masked_after.windows(2).all(|w| w[1] >= w[0]));
    assert!(masked_after[11] > 0);
    for m in a.net.modules() {
        assert!(m.kernel.iter().zip(&m.mask).all(|(w, keep)| *keep || *w == 0.0));
    }
    for rec in &ha.epochs[6..] {
        assert_eq!(rec.mask, ha.epochs[6].mask);
    }
}

#[test]
fn dynamic_reselection_follows_a_moving_signal() {
    use ::litenet::litenet::ReselectConfig;
    // Signal in column 0 for the first half, column 3 for the second.
    let early = planted_signal_matrix(600, 6, 0, 0.7, 1).unwrap();
    let late = planted_signal_matrix(600, 6, 3, 0.7, 2).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..600).map(|r| early.values().row(r).to_vec()).collect();
    rows.extend((0..600).map(|r| late.values().row(r).to_vec()));
    let mut target = early.target().to_vec();
    target.extend_from_slice(late.target());
    let fm =
        ::litenet::FeatureMatrix::new(Matrix::from_rows(&rows).unwrap(), early.names().to_vec(), target, 0).unwrap();

    let params = SelectionParams { seed: 3, ..Default::default() };
    let initial = run_selection(&fm.slice_rows(0, 600), &params, 0).unwrap();
    assert_eq!(initial.selected, vec![0]);
    let spec = FeatureSpec { horizon: 1, vol_window: 20, window: 6, n_noise: 0, noise_seed: 0 };
    let ws = make_windows(fm, 6).unwrap();
    let cfg = TrainConfig { epochs: 3, ..Default::default() };
    let rs = ReselectConfig { params, recent_rows: 500 };
    let (model, history) = train_with_history(&ws, &spec, &cfg, &initial, Some(&rs)).unwrap();
    assert_eq!(history.selections.len(), 3);
    assert_eq!(model.selection.cycle, 2);
    assert_eq!(model.selection.selected, vec![3]);
    assert_eq!(model.inputs[0], 3);
    assert_eq!(history.epochs[0].inputs[0], 0);
}
