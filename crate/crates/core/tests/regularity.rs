use ema_core::lagrange::{advance_ensemble, bkm_monitor, gradient_bound_check, EnsembleConfig, EnsembleTermination};
use ema_core::threshold::{classify_profile, default_grid, DEFAULT_GRID_SIZE};
use ema_core::{IntegratorConfig, ProfilePreset, RadialProfile};

#[test]
fn bkm_integral_grows_without_bound_towards_collapse() {
    let p = RadialProfile::from_preset(&ProfilePreset::new("collapse"), 2, 1.0, 2.0).unwrap();
    let tc = classify_profile(&p, &default_grid(&p, DEFAULT_GRID_SIZE)).unwrap().t_blowup.unwrap();
    // Snapshots every tc/100 up to 0.99 tc; index 50 sits exactly at tc/2.
    let ens = EnsembleConfig {
        t_end: 0.99 * tc,
        output_times: (1..99).map(|i| tc * i as f64 / 100.0).collect(),
        ..EnsembleConfig::default()
    };
    let run = advance_ensemble(&p, &ens, &IntegratorConfig::default()).unwrap();
    assert_eq!(run.termination, EnsembleTermination::Completed);
    assert_eq!(run.snapshots.len(), 100);
    assert_eq!(run.snapshots[50].t, tc * 50.0 / 100.0);
    let half = bkm_monitor(&run.snapshots[..=50]);
    let late = bkm_monitor(&run.snapshots);
    assert!(late >= 10.0 * half, "{late} vs {half}");
    // The partial integrals increase monotonically.
    let partial: Vec<f64> = (1..run.snapshots.len()).map(|k| bkm_monitor(&run.snapshots[..=k])).collect();
    assert!(partial.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn gradient_bound_holds_on_subcritical_evolution() {
    for (preset, n) in [("bump", 2), ("bump", 3), ("quadratic", 2)] {
        let p = RadialProfile::from_preset(&ProfilePreset::new(preset), n, 1.0, 2.0).unwrap();
        let ens = EnsembleConfig { t_end: 6.0, ..EnsembleConfig::default() }.with_uniform_outputs(11);
        let run = advance_ensemble(&p, &ens, &IntegratorConfig::default()).unwrap();
        assert_eq!(run.termination, EnsembleTermination::Completed);
        for s in &run.snapshots {
            let g = gradient_bound_check(s);
            assert!(g.holds, "{preset} n={n} t={}: margin {}", s.t, g.margin);
        }
    }
}
