//! Monte-Carlo execution.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Pipeline, ResolvedPoint};
use super::results::{RealizationInfo, ResultRow, ResultsTable};
use crate::maxsnr::{algorithm1, AoOutcome};
use crate::minsnr::algorithm2;
use crate::model::{apply_failure_mask, generate_channels, generate_channels_at, ChannelSet, RcsModel};
use crate::linalg::to_db;
use crate::quadratics::{all_sinr, gamma_matrix, sensing_snr};
use crate::{Error, Result};

/// Seed of realization `index`: the first word of ChaCha8 stream `index`
/// keyed by `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

const SINR_TOL: f64 = 1e-6;

/// Runs every realization of every sweep point on the global pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let points = cfg.points()?;
    let rcs = cfg.rcs.resolve()?;
    let ues = fixed_ues(cfg);
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.realizations).map(move |i| (p, i)))
        .collect();
    let outputs: Vec<(Vec<ResultRow>, RealizationInfo)> = jobs
        .par_iter()
        .map(|&(p, i)| run_realization(cfg, &points[p], &rcs, ues.as_deref(), i))
        .collect();
    let mut table = ResultsTable::new(cfg.system.K);
    for (rows, info) in outputs {
        table.rows.extend(rows);
        table.realizations.push(info);
    }
    Ok(table)
}

/// As [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ResultsTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn fixed_ues(cfg: &ExperimentConfig) -> Option<Vec<[f64; 2]>> {
    cfg.fix_ue_positions.then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        cfg.geometry.draw_ue_positions(cfg.system.K, &mut rng)
    })
}

fn channels(cfg: &ExperimentConfig, point: &ResolvedPoint, ues: Option<&[[f64; 2]]>, seed: u64) -> Result<ChannelSet> {
    match ues {
        Some(u) => generate_channels_at(&point.system, &cfg.geometry, u, seed),
        None => generate_channels(&point.system, &cfg.geometry, seed),
    }
}

fn attack_name(cfg: &ExperimentConfig) -> (String, String) {
    (format!("{}/maximize", cfg.name), format!("{}/attack", cfg.name))
}

/// Experiment ids of the rows produced by `cfg`.
pub fn experiment_ids(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.pipeline() {
        Pipeline::Maximize => vec![cfg.name.clone()],
        Pipeline::Attack => {
            let (a, b) = attack_name(cfg);
            vec![a, b]
        }
    }
}

fn run_realization(
    cfg: &ExperimentConfig,
    point: &ResolvedPoint,
    rcs: &RcsModel,
    ues: Option<&[[f64; 2]]>,
    index: usize,
) -> (Vec<ResultRow>, RealizationInfo) {
    let seed = child_seed(cfg.master_seed, index as u64);
    let mut info = RealizationInfo {
        sweep: point.sweep,
        realization: index,
        seed,
        error: None,
        note: None,
        pre_attack_rho_db: None,
        post_attack_rho_db: None,
        ao: None,
        ccp: None,
    };
    let ids = experiment_ids(cfg);
    let result = pipeline(cfg, point, rcs, ues, index, seed, &mut info);
    if !cfg.record_timing {
        info.clear_timing();
    }
    match result {
        Ok(rows) => (rows, info),
        Err(e) => {
            info.error = Some(e.to_string());
            let rows = ids
                .into_iter()
                .map(|experiment| ResultRow {
                    experiment,
                    sweep: point.sweep,
                    realization: index,
                    iteration: 0,
                    rho_db: None,
                    sinr: Vec::new(),
                    feasible: Some(false),
                    slack_xi: None,
                    slack_v: None,
                    rank_ratio: None,
                    time_ms: None,
                })
                .collect();
            (rows, info)
        }
    }
}

fn pipeline(
    cfg: &ExperimentConfig,
    point: &ResolvedPoint,
    rcs: &RcsModel,
    ues: Option<&[[f64; 2]]>,
    index: usize,
    seed: u64,
    info: &mut RealizationInfo,
) -> Result<Vec<ResultRow>> {
    let sys = &point.system;
    let ch = channels(cfg, point, ues, seed)?;
    let timing = |ms: f64| cfg.record_timing.then_some(ms);
    let attack = cfg.pipeline() == Pipeline::Attack;
    // in attack runs the legitimate design is fault-free; the failure hits
    // the malicious configuration
    let ao_mask = if attack { None } else { point.mask.as_ref() };
    let AoOutcome { theta, precoder, trace } = algorithm1(&ch, rcs, sys, &cfg.ao, child_seed(seed, 1), ao_mask)?;
    let ids = experiment_ids(cfg);
    let mut rows = Vec::new();
    for r in &trace.records {
        let feasible = r.power <= sys.P * (1.0 + 1e-9)
            && r.sinr.iter().zip(&sys.gamma).all(|(s, g)| *s >= g * (1.0 - SINR_TOL));
        rows.push(ResultRow {
            experiment: ids[0].clone(),
            sweep: point.sweep,
            realization: index,
            iteration: r.iteration,
            rho_db: Some(r.rho_deployed_db),
            sinr: r.sinr_deployed.clone(),
            feasible: Some(feasible),
            slack_xi: None,
            slack_v: None,
            rank_ratio: r.rank_ratios.iter().copied().reduce(f64::max),
            time_ms: timing(r.wall_ms),
        });
    }
    info.pre_attack_rho_db = trace.records.last().map(|r| r.rho_deployed_db);
    info.ao = Some(trace);
    if !attack {
        return Ok(rows);
    }
    let mask = point.mask.as_ref();
    let out = algorithm2(&ch, rcs, &precoder, &theta, sys, &cfg.ccp, mask)?;
    let sinr0 = all_sinr(&ch, &theta, &precoder, &sys.sigma_ue_sq)?;
    let ccp = out.trace;
    rows.push(ResultRow {
        experiment: ids[1].clone(),
        sweep: point.sweep,
        realization: index,
        iteration: 0,
        rho_db: Some(ccp.initial_rho_db),
        sinr: sinr0,
        feasible: Some(true),
        slack_xi: None,
        slack_v: None,
        rank_ratio: None,
        time_ms: None,
    });
    for r in &ccp.records {
        rows.push(ResultRow {
            experiment: ids[1].clone(),
            sweep: point.sweep,
            realization: index,
            iteration: r.iteration,
            rho_db: Some(r.rho_deployed_db),
            sinr: r.sinr_deployed.clone(),
            feasible: Some(r.audit_ok),
            slack_xi: Some(r.xi_norm),
            slack_v: Some(r.v_norm),
            rank_ratio: None,
            time_ms: timing(r.wall_ms),
        });
    }
    let deployed = match mask {
        Some(m) => apply_failure_mask(&out.theta, m)?,
        None => out.theta.clone(),
    };
    let rho = sensing_snr(&gamma_matrix(&ch, rcs, &deployed)?, &precoder, sys.sigma_t_sq)?;
    info.post_attack_rho_db = Some(to_db(rho));
    if let Some(msg) = &ccp.aborted {
        info.note = Some(format!("attack stopped early: {msg}"));
    }
    info.ccp = Some(ccp);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..50).map(|i| child_seed(7, i)).collect();
        let b: Vec<u64> = (0..50).map(|i| child_seed(7, i)).collect();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 50);
        assert_ne!(child_seed(8, 0), a[0]);
    }
}
