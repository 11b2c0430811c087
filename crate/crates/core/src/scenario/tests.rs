use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use super::*;
use crate::exec::Execution;
use crate::series::ObservableName;
use crate::thermal::{thermal_average, MoleculeSpec};

fn n2(t: f64) -> Runner {
    let m = MoleculeSpec::new("N2", 1.9896).with_spin_weights(2.0, 1.0);
    Runner::new(&EnsembleSpec::new(m, t)).unwrap()
}

fn quick(p1: f64, p2: f64, pol: f64, delay: DelayMode) -> DoublePulseProtocol {
    DoublePulseProtocol { points_per_revival: 256, ..DoublePulseProtocol::new(p1, p2, pol, delay) }
}

#[test]
fn parabolic_refinement_recovers_vertex() {
    let (t0, dt, star) = (1.0, 0.01, 1.2345);
    let curve: Vec<f64> = (0..50).map(|k| 0.7 - (t0 + dt * k as f64 - star).powi(2)).collect();
    let p = refine_extremum(&curve, t0, dt, Extremum::Max).unwrap();
    assert!((p.time - star).abs() < 1e-12);
    assert!((p.value - 0.7).abs() < 1e-12);
    let flipped: Vec<f64> = curve.iter().map(|v| -v).collect();
    assert!((refine_extremum(&flipped, t0, dt, Extremum::Min).unwrap().time - star).abs() < 1e-12);
}

#[test]
fn edge_extremum_is_an_error() {
    let rising: Vec<f64> = (0..20).map(|k| k as f64).collect();
    let err = refine_extremum(&rising, 0.4 * TAU, 0.01, Extremum::Max).unwrap_err();
    assert!(matches!(err, ScenarioError::FlatWindow { .. }));
    assert!(err.is_numerical());
    assert!(refine_extremum(&rising, 0.0, 0.01, Extremum::Min).is_err());
}

#[test]
fn alignment_peak_just_before_half_revival() {
    let r = n2(100.0);
    let p = r.find_alignment_peak(3.0, Engine::Spectral).unwrap();
    let frac = p.time / TAU;
    assert!(frac > 0.40 && frac < 0.50, "{frac}");
    assert!(p.value > 1.0 / 3.0);
    assert!(r.find_alignment_peak(0.0, Engine::Spectral).is_err());
}

#[test]
fn peak_time_converges_under_refinement() {
    let mut r = n2(50.0);
    let times: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&res| {
            r.peak_resolution = res;
            r.find_alignment_peak(3.0, Engine::Spectral).unwrap().time
        })
        .collect();
    let (d1, d2) = ((times[1] - times[0]).abs(), (times[2] - times[1]).abs());
    assert!(d2 < d1 / 10.0 || d2 < 1e-9, "{times:?}");
}

#[test]
fn single_pulse_leaves_azimuth_isotropic() {
    let r = n2(30.0).with_folding(false);
    let res = r.run_protocol(&quick(4.0, 0.0, FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    assert!(res.jy.abs() < 1e-12);
    assert!(res.jx.unwrap().abs() < 1e-12 && res.jz.unwrap().abs() < 1e-12);
    assert!(res.get(ObservableName::Cos2phi).unwrap().values.iter().all(|v| (v - 0.5).abs() < 1e-12));
    assert!((res.cos2phi_mean - 0.5).abs() < 1e-12);
}

#[test]
fn parallel_second_pulse_gives_no_rotation() {
    let res = n2(30.0).run_protocol(&quick(3.0, 6.0, 0.0, DelayMode::AutoPeak)).unwrap();
    assert!(res.jy.abs() < 1e-12);
}

#[test]
fn rotation_sense_follows_polarization_sign() {
    let r = n2(30.0);
    let plus = r.run_protocol(&quick(3.0, 6.0, FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    let minus = r.run_protocol(&quick(3.0, 6.0, -FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    assert!(plus.jy > 0.1);
    assert!((plus.jy + minus.jy).abs() < 1e-12 * plus.jy);
}

#[test]
fn series_layout() {
    let res = n2(30.0).with_folding(false).run_protocol(&quick(3.0, 6.0, FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    let names: Vec<_> = res.series.iter().map(|s| s.name).collect();
    assert_eq!(names, ObservableName::ALL.iter().copied().collect::<Vec<_>>());
    let c2p = res.get(ObservableName::Cos2phi).unwrap();
    assert_eq!(c2p.times[0], 0.0);
    let k2 = c2p.times.iter().position(|&t| t >= res.pulse2_time).unwrap();
    assert_eq!(c2p.len() - k2, 256);
    assert!(c2p.values[..k2].iter().all(|v| (v - 0.5).abs() < 1e-12));
    let jy = res.get(ObservableName::Jy).unwrap();
    assert!(jy.values[..k2].iter().all(|v| v.abs() < 1e-12));
    assert!(jy.values[k2..].iter().all(|&v| v == res.jy));
    assert_eq!(res.get(ObservableName::Cos2theta).unwrap().meta.params["p2"], 6.0);
    let folded = n2(30.0).run_protocol(&quick(3.0, 6.0, FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    assert!(folded.jx.is_none() && folded.get(ObservableName::Jz).is_none());
}

#[test]
fn folding_matches_full_ensemble() {
    let proto = quick(3.0, 6.0, 0.6, DelayMode::AutoPeak);
    let full = n2(40.0).with_folding(false).run_protocol(&proto).unwrap();
    let folded = n2(40.0).run_protocol(&proto).unwrap();
    for name in [ObservableName::Cos2theta, ObservableName::Cos2phi, ObservableName::Jy] {
        assert!(full.get(name).unwrap().max_abs_deviation(folded.get(name).unwrap()) < 1e-12, "{name}");
    }
    assert!(full.jx.unwrap().abs() < 1e-12);
    assert!(full.jz.unwrap().abs() < 1e-12);
}

#[test]
fn scheduling_does_not_change_results() {
    let proto = quick(3.0, 6.0, FRAC_PI_4, DelayMode::AutoPeak);
    let seq = n2(40.0).with_execution(Execution::Sequential).run_protocol(&proto).unwrap();
    let par = n2(40.0).with_execution(Execution::Parallel).run_protocol(&proto).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn ensemble_run_is_weighted_sum_of_members() {
    let r = n2(8.0).with_folding(false);
    let proto = quick(2.0, 3.0, 0.5, DelayMode::Explicit { delay: 2.5 });
    let whole = r.run_protocol(&proto).unwrap();
    let members = r.ensemble().members.clone();
    let singles: Vec<ObservableSeries> = members
        .iter()
        .map(|m| {
            let pure = Runner::from_ensemble(Ensemble::pure(m.l, m.m), "N2", 8.0);
            pure.run_protocol(&proto).unwrap().get(ObservableName::Cos2phi).unwrap().clone()
        })
        .collect();
    let weights: Vec<f64> = members.iter().map(|m| m.weight).collect();
    let avg = thermal_average(&singles, &weights).unwrap();
    assert!(avg.max_abs_deviation(whole.get(ObservableName::Cos2phi).unwrap()) < 1e-12);
}

#[test]
fn revival_mean_is_exact_average() {
    let res = n2(60.0).run_protocol(&DoublePulseProtocol::new(4.0, 4.0, FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    let (_, post) = res.after_pulse2(ObservableName::Cos2phi).unwrap();
    let sampled = post.iter().sum::<f64>() / post.len() as f64;
    assert!(res.cos2phi_mean > 0.5);
    assert!((sampled - res.cos2phi_mean).abs() < 1e-10);
}

#[test]
fn spectral_observables_recur_after_one_revival() {
    let b = SpectralBackend::new(30, KickMethod::Chebyshev);
    let mut s = b.init(3, 1).unwrap();
    b.kick(&mut s, &b.kick_operator(0.0), 3.0).unwrap();
    b.kick(&mut s, &b.kick_operator(0.7), 2.0).unwrap();
    let times = [0.3, 1.7, 2.9];
    let shifted: Vec<f64> = times.iter().map(|t| t + TAU).collect();
    let a = b.sample_cos2theta(&s, &times).unwrap();
    let c = b.sample_cos2theta(&s, &shifted).unwrap();
    assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-12));
    let g = b.sample_grid(&s, 64, 0..130).unwrap();
    assert!((0..66).all(|k| (g[k][1] - g[k + 64][1]).abs() < 1e-12));
}

#[test]
fn undersized_basis_is_reported() {
    let r = n2(30.0).with_l_max(Some(8));
    let err = r.run_protocol(&quick(10.0, 10.0, FRAC_PI_4, DelayMode::AutoQuarter)).unwrap_err();
    assert!(matches!(err, ScenarioError::Spectral(SpectralError::Truncation { .. })), "{err}");
    assert!(err.is_numerical());
    let ok = n2(30.0).run_protocol(&quick(10.0, 10.0, FRAC_PI_4, DelayMode::AutoQuarter)).unwrap();
    assert!(ok.l_max.unwrap() >= basis_cutoff(n2(30.0).ensemble().l_max(), 20.0));
}

#[test]
fn protocol_validation() {
    let r = n2(30.0);
    for bad in [
        quick(-1.0, 1.0, 0.0, DelayMode::AutoPeak),
        quick(1.0, f64::NAN, 0.0, DelayMode::AutoPeak),
        quick(1.0, 1.0, 2.0, DelayMode::AutoPeak),
        quick(1.0, 1.0, 0.0, DelayMode::Explicit { delay: 0.0 }),
        DoublePulseProtocol { points_per_revival: 4, ..quick(1.0, 1.0, 0.0, DelayMode::AutoQuarter) },
    ] {
        let err = r.run_protocol(&bad).unwrap_err();
        assert!(matches!(err, ScenarioError::InvalidProtocol(_)) && !err.is_numerical());
    }
}

#[test]
fn delay_mode_serde() {
    let modes =
        [DelayMode::Explicit { delay: 2.5 }, DelayMode::AutoPeak, DelayMode::AutoTrough, DelayMode::AutoQuarter];
    for m in modes {
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<DelayMode>(&json).unwrap(), m);
    }
    assert_eq!(serde_json::to_string(&DelayMode::AutoPeak).unwrap(), r#"{"mode":"auto_peak"}"#);
}

#[test]
fn scans_agree_with_protocol_runs() {
    let r = n2(30.0);
    let angles = [-FRAC_PI_2, -0.4, 0.0, 0.4, FRAC_PI_4, FRAC_PI_2];
    let pol = r.scan_polarization(3.0, 6.0, DelayMode::AutoPeak, &angles, Engine::Spectral).unwrap();
    let direct = r.run_protocol(&quick(3.0, 6.0, FRAC_PI_4, DelayMode::AutoPeak)).unwrap();
    assert!((pol.jy[4] - direct.jy).abs() < 1e-12);
    assert!((pol.jy[1] + pol.jy[3]).abs() < 1e-12);
    assert!(pol.jy[0].abs() < 1e-12 && pol.jy[2].abs() < 1e-12 && pol.jy[5].abs() < 1e-12);
    assert_eq!(pol.pulse2_time, direct.pulse2_time);

    let delays = [1.0, direct.pulse2_time, 0.5];
    let ds = r.scan_delay(3.0, 6.0, FRAC_PI_4, &delays, Engine::Spectral).unwrap();
    assert!((ds.jy[1] - direct.jy).abs() < 1e-12);
    let at_half = r.run_protocol(&quick(3.0, 6.0, FRAC_PI_4, DelayMode::Explicit { delay: 0.5 })).unwrap();
    assert!((ds.jy[2] - at_half.jy).abs() < 1e-12);

    let st = r.scan_strengths(&[3.0], &[0.0, 1.0, 6.0], FRAC_PI_4, DelayMode::AutoPeak, Engine::Spectral).unwrap();
    assert_eq!(st.jy[0][0], 0.0);
    assert!((st.jy[0][2] - direct.jy).abs() < 1e-12);
    assert!(st.peaks[0].is_some());
    let ft = r.scan_fixed_total(9.0, &[-3.0], FRAC_PI_4, DelayMode::AutoPeak, Engine::Spectral).unwrap();
    assert!((ft[0] - direct.jy).abs() < 1e-12);
    assert!(r.scan_fixed_total(9.0, &[10.0], FRAC_PI_4, DelayMode::AutoPeak, Engine::Spectral).is_err());
}

#[test]
fn rotation_is_linear_in_second_kick() {
    // exp(-iPK) J_y exp(iPK) = J_y + P [K, J_y]/i and [K, [K, J_y]] = 0.
    let st =
        n2(30.0).scan_strengths(&[3.0], &[1.0, 2.5, 7.0], FRAC_PI_4, DelayMode::AutoPeak, Engine::Spectral).unwrap();
    let unit = st.jy[0][0];
    assert!((st.jy[0][1] - 2.5 * unit).abs() < 1e-10);
    assert!((st.jy[0][2] - 7.0 * unit).abs() < 1e-10);
}

#[test]
fn isotropic_density_before_pulses() {
    let r = n2(30.0);
    let grid = r.revival_averaged_distribution(&quick(0.0, 0.0, 0.0, DelayMode::AutoQuarter), 48, 64).unwrap();
    assert!((grid.raw_integral - 1.0).abs() < 1e-12);
    assert!((grid.integral() - 1.0).abs() < 1e-12);
    let uniform = 1.0 / (4.0 * PI);
    assert!(grid.values.iter().all(|v| (v - uniform).abs() < 1e-10));
}

#[test]
fn density_confined_to_polarization_plane() {
    let proto = quick(4.0, 4.0, FRAC_PI_4, DelayMode::AutoPeak);
    let folded = n2(40.0).revival_averaged_distribution(&proto, 96, 72).unwrap();
    let full = n2(40.0).with_folding(false).revival_averaged_distribution(&proto, 96, 72).unwrap();
    assert!(folded.values.iter().zip(&full.values).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!((folded.raw_integral - 1.0).abs() < 1e-6);
    assert!((folded.integral() - 1.0).abs() < 1e-12);

    let marginal = folded.phi_marginal();
    let n = marginal.len();
    let argmax_in = |lo: usize, hi: usize| (lo..hi).max_by(|&a, &b| marginal[a].total_cmp(&marginal[b])).unwrap();
    assert_eq!(argmax_in(0, n / 4).min(argmax_in(3 * n / 4, n) % n), 0);
    assert_eq!(argmax_in(n / 4, 3 * n / 4), n / 2);

    let mean = n2(40.0).run_protocol(&proto).unwrap().cos2phi_mean;
    let from_density = folded.weighted(|_, p| p.cos().powi(2));
    assert!(from_density > 0.5);
    assert!((from_density - mean).abs() < 1e-6, "{from_density} vs {mean}");
}

#[test]
fn fdtd_protocol_tracks_spectral() {
    let grid = GridConfig { n_theta: 128, n_phi: 32, m_max: 12, delta_tau: 1e-3 };
    let r = Runner::from_ensemble(Ensemble::pure(1, 0), "test", 0.0).with_grid(grid).with_l_max(Some(30));
    let proto = DoublePulseProtocol {
        points_per_revival: 64,
        ..DoublePulseProtocol::new(2.0, 2.0, FRAC_PI_4, DelayMode::Explicit { delay: 1.0 })
    };
    let s = r.run_protocol(&proto).unwrap();
    let f = r.run_protocol(&proto.with_engine(Engine::Fdtd)).unwrap();
    for name in [ObservableName::Cos2theta, ObservableName::Cos2phi] {
        let d = s.get(name).unwrap().max_abs_deviation(f.get(name).unwrap());
        assert!(d < 5e-3, "{name}: {d}");
    }
    assert!((s.jy - f.jy).abs() < 1e-3);
    assert_eq!(f.get(ObservableName::Cos2phi).unwrap().meta.engine, Engine::Fdtd);
}
