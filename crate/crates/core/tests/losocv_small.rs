use windfuse_core::eval::{losocv_model, LosocvConfig, ScoreScale};
use windfuse_core::exec::Sequential;
use windfuse_core::gp::{ModelSpec, NoiseGrouping, Variant};
use windfuse_core::sim::{simulate, BoxLayout, Layout, SimulationConfig};

fn small(seed: u64) -> SimulationConfig {
    let mut cfg = SimulationConfig::table8(0.5, seed);
    cfg.layout = Layout::Box(BoxLayout {
        n_met: 6,
        n_pws1: 6,
        n_pws2: 2,
        ..BoxLayout::default()
    });
    cfg.junk_group = vec!["UNK01".into(), "UNK02".into()];
    cfg.n_times = 24;
    cfg
}

#[test]
fn fold_scores_are_deterministic_and_finite() {
    let data = simulate(&small(4)).unwrap().to_gp_data();
    let cv = LosocvConfig {
        scale: ScoreScale::Model,
        extreme_percentiles: vec![],
        ..LosocvConfig::default()
    };
    for variant in [Variant::Igp, Variant::Ar1] {
        let spec = ModelSpec::new(variant, NoiseGrouping::PerClass);
        let a = losocv_model(&data, spec, &cv, &Sequential).unwrap();
        let b = losocv_model(&data, spec, &cv, &Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.complete, "{:?}", a.failures);
        assert_eq!(a.n_folds, 6);
        assert_eq!(a.per_station.len(), 6);
        assert!(a.rmse.is_finite() && a.rmse > 0.0);
        assert!(a.crps_sqrt.is_finite() && a.crps_sqrt > 0.0);
        let h = a.full_fit.unwrap();
        assert!(h.nugget_sd(windfuse_core::StationClass::U) > h.nugget_sd(windfuse_core::StationClass::Met));
    }
}

#[test]
fn too_few_held_out_stations() {
    let mut cfg = small(1);
    cfg.layout = Layout::Box(BoxLayout {
        n_met: 2,
        n_pws1: 4,
        n_pws2: 0,
        ..BoxLayout::default()
    });
    cfg.junk_group.clear();
    let data = simulate(&cfg).unwrap().to_gp_data();
    let spec = ModelSpec::new(Variant::Igp, NoiseGrouping::Pooled);
    assert!(losocv_model(&data, spec, &LosocvConfig::default(), &Sequential).is_err());
}
