//! `episodes`: N-way K-shot evaluation with per-episode derived seeds.
//!
//! Episode `i` runs with seed `base + i`, so parallel and serial execution
//! produce identical reports: workers fill the accuracy vector by episode
//! index and the reduction is shared.

use std::fs;

use actpred_core::{episode_report_from_accuracies, run_episode, run_episodes};
use rayon::prelude::*;

use crate::config::{resolve_episodes, EpisodesArgs};
use crate::error::{read_err, runtime, validation, write_err, CmdError};
use crate::format;

pub fn run(args: &EpisodesArgs) -> Result<(), CmdError> {
    let cfg = resolve_episodes(args)?;
    if cfg.threads < 1 {
        return Err(validation("threads must be >= 1"));
    }

    let model = format::read_checkpoint(&cfg.checkpoint).map_err(read_err)?;
    let store = format::read_store_binary(&cfg.data).map_err(read_err)?;
    if store.dim() != model.dim() {
        return Err(validation(format!(
            "dimension mismatch: checkpoint dim {} vs store dim {}",
            model.dim(),
            store.dim()
        )));
    }

    let report = if cfg.threads == 1 {
        run_episodes(&store, &model, cfg.n_way, cfg.k_shot, cfg.episodes, cfg.seed)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(runtime)?;
        let accuracies: Result<Vec<f64>, actpred_core::Error> = pool.install(|| {
            (0..cfg.episodes)
                .into_par_iter()
                .map(|i| {
                    run_episode(
                        &store,
                        &model,
                        cfg.n_way,
                        cfg.k_shot,
                        cfg.seed.wrapping_add(i as u64),
                    )
                })
                .collect()
        });
        episode_report_from_accuracies(cfg.n_way, cfg.k_shot, accuracies?)
    };

    println!(
        "{}-way {}-shot over {} episodes: {:.4} \u{00b1} {:.4}",
        report.n_way, report.k_shot, report.n_episodes, report.mean_accuracy, report.ci95
    );

    fs::create_dir_all(&cfg.out_dir).map_err(runtime)?;
    let txt = cfg.out_dir.join("episodes.txt");
    let csv = cfg.out_dir.join("episodes.csv");
    format::write_key_values(
        &txt,
        &[
            ("n_way".into(), report.n_way.to_string()),
            ("k_shot".into(), report.k_shot.to_string()),
            ("n_episodes".into(), report.n_episodes.to_string()),
            (
                "mean_accuracy".into(),
                format::float_repr(report.mean_accuracy),
            ),
            ("ci95".into(), format::float_repr(report.ci95)),
        ],
    )
    .map_err(write_err)?;
    format::write_metric_records(
        &csv,
        &[
            (
                "mean_accuracy".into(),
                "episodes".into(),
                report.mean_accuracy,
            ),
            ("ci95".into(), "episodes".into(), report.ci95),
        ],
    )
    .map_err(write_err)?;
    println!("wrote {}", txt.display());
    println!("wrote {}", csv.display());
    Ok(())
}
