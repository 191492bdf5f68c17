use risbeam::linalg::{c, to_db};
use risbeam::maxsnr::{algorithm1, AoSettings};
use risbeam::minsnr::{algorithm2, CcpSettings};
use risbeam::model::{generate_channels, ChannelSet, Geometry, PhaseVector, Precoder, RcsModel, SystemConfig};
use risbeam::quadratics::{all_sinr, gamma_matrix, sensing_snr};

fn legitimate(sys: &SystemConfig, rcs: &RcsModel, seed: u64) -> (ChannelSet, PhaseVector, Precoder) {
    let ch = generate_channels(sys, &Geometry::default(), seed).unwrap();
    let out = algorithm1(&ch, rcs, sys, &AoSettings::default(), seed + 1, None).unwrap();
    (ch, out.theta, out.precoder)
}

#[test]
fn without_ues_the_attack_reaches_the_static_floor() {
    let sys = SystemConfig::uniform(6, 0, 8, 2.0, 2.0, 1.0, 10.0);
    let rcs = RcsModel::new(1e-5, 1e-5, c(0.0, 0.0)).unwrap();
    for seed in [3, 17] {
        let (ch, theta, f) = legitimate(&sys, &rcs, seed);
        let hst = ch.h_st_outer();
        let floor: f64 = f
            .matrix()
            .column_iter()
            .map(|col| rcs.delta_s_sq * (&hst * col).norm_squared())
            .sum::<f64>()
            / sys.sigma_t_sq;
        let out = algorithm2(&ch, &rcs, &f, &theta, &sys, &CcpSettings::default(), None).unwrap();
        let rho = sensing_snr(&gamma_matrix(&ch, &rcs, &out.theta).unwrap(), &f, sys.sigma_t_sq).unwrap();
        let gap = to_db(rho) - to_db(floor);
        assert!(gap >= -1e-9, "seed {seed}: below the floor by {gap} dB");
        assert!(gap <= 0.5, "seed {seed}: {gap} dB above the floor");
    }
}

#[test]
fn without_reflection_terms_the_slacks_vanish() {
    let sys = SystemConfig::uniform(6, 2, 8, 2.0, 1.0, 1.0, 10.0);
    let rcs = RcsModel::new(1e-5, 1e-5, c(9e-6, 0.0)).unwrap();
    let (ch, theta, f) = legitimate(&sys, &rcs, 5);
    let degenerate = RcsModel::new(0.0, 1e-5, c(0.0, 0.0)).unwrap();
    let settings = CcpSettings::default();
    let out = algorithm2(&ch, &degenerate, &f, &theta, &sys, &settings, None).unwrap();
    let last = out.trace.records.last().unwrap();
    assert!(last.xi_norm <= settings.nu && last.v_norm <= settings.nu, "{} {}", last.xi_norm, last.v_norm);
    let sinr = all_sinr(&ch, &out.theta, &f, &sys.sigma_ue_sq).unwrap();
    assert!(sinr.iter().zip(&sys.gamma).all(|(s, g)| *s >= g * (1.0 - 1e-4)), "{sinr:?}");
}

#[test]
fn attack_preserves_sinr_and_lowers_rho() {
    let sys = SystemConfig::uniform(8, 2, 8, 2.0, 2.0, 1.0, 10.0);
    let rcs = RcsModel::new(1e-5, 1e-5, c(9e-6, 0.0)).unwrap();
    let (ch, theta, f) = legitimate(&sys, &rcs, 9);
    let before = sensing_snr(&gamma_matrix(&ch, &rcs, &theta).unwrap(), &f, sys.sigma_t_sq).unwrap();
    let out = algorithm2(&ch, &rcs, &f, &theta, &sys, &CcpSettings::default(), None).unwrap();
    assert!(out.theta.as_vector().iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    let after = sensing_snr(&gamma_matrix(&ch, &rcs, &out.theta).unwrap(), &f, sys.sigma_t_sq).unwrap();
    assert!(to_db(before) - to_db(after) >= 10.0, "{} -> {}", to_db(before), to_db(after));
    let sinr = all_sinr(&ch, &out.theta, &f, &sys.sigma_ue_sq).unwrap();
    assert!(sinr.iter().zip(&sys.gamma).all(|(s, g)| *s >= g * (1.0 - 1e-4)), "{sinr:?}");
}
