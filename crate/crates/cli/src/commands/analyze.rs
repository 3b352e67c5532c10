//! `analyze`: channel impacts, diagonal-dominance statistics, the
//! log-scale heatmap export, and optional top-k order similarity against a
//! reference matrix. Linear checkpoints only — the diagnostics are
//! matrix-specific.

use std::fs;

use actpred_core::analysis::mean_std;
use actpred_core::{channel_impact, diagonal_dominance, log_heatmap, order_similarity};

use crate::config::{resolve_analyze, AnalyzeArgs};
use crate::error::{read_err, runtime, validation, write_err, CmdError};
use crate::format;

pub fn run(args: &AnalyzeArgs) -> Result<(), CmdError> {
    let cfg = resolve_analyze(args)?;

    let model = format::read_checkpoint(&cfg.checkpoint).map_err(read_err)?;
    let weight = model.weight_matrix().ok_or_else(|| {
        validation(
            "two-layer checkpoint: impact and dominance analyses are matrix-specific; \
             provide a linear checkpoint",
        )
    })?;
    if cfg.os_k.is_some() && cfg.reference.is_none() {
        return Err(validation(
            "--os-k requests order similarity but no --reference checkpoint was given",
        ));
    }

    fs::create_dir_all(&cfg.out_dir).map_err(runtime)?;

    let impact = channel_impact(weight);
    let impact_path = cfg.out_dir.join("impact.txt");
    format::write_values(&impact_path, impact.values()).map_err(write_err)?;
    println!("wrote {}", impact_path.display());

    let (raw_mean, raw_std) = mean_std(impact.values());
    let (sum_mean, sum_std) = mean_std(&impact.normalized_by_sum());
    let (euc_mean, euc_std) = mean_std(&impact.normalized_by_euclidean());
    let stats_path = cfg.out_dir.join("impact_stats.txt");
    format::write_key_values(
        &stats_path,
        &[
            ("raw.mean".into(), format::float_repr(raw_mean)),
            ("raw.std".into(), format::float_repr(raw_std)),
            ("sum_normalized.mean".into(), format::float_repr(sum_mean)),
            ("sum_normalized.std".into(), format::float_repr(sum_std)),
            (
                "euclidean_normalized.mean".into(),
                format::float_repr(euc_mean),
            ),
            (
                "euclidean_normalized.std".into(),
                format::float_repr(euc_std),
            ),
        ],
    )
    .map_err(write_err)?;
    println!("wrote {}", stats_path.display());

    let diag = diagonal_dominance(weight)?;
    let diag_path = cfg.out_dir.join("diagonal.txt");
    format::write_key_values(
        &diag_path,
        &[
            ("mean_diag_abs".into(), format::float_repr(diag.mean_diag_abs)),
            (
                "mean_offdiag_abs".into(),
                format::float_repr(diag.mean_offdiag_abs),
            ),
            ("diag_min".into(), format::float_repr(diag.diag_min)),
            ("diag_max".into(), format::float_repr(diag.diag_max)),
        ],
    )
    .map_err(write_err)?;
    println!("wrote {}", diag_path.display());
    println!(
        "diagonal: mean |diag| {:.4}, mean |offdiag| {:.4}, min {:.4}, max {:.4}",
        diag.mean_diag_abs, diag.mean_offdiag_abs, diag.diag_min, diag.diag_max
    );

    let submatrix = cfg.submatrix.min(model.dim());
    let grid = log_heatmap(weight, submatrix)?;
    let heatmap_path = cfg.out_dir.join("heatmap.csv");
    format::write_grid_csv(&heatmap_path, &grid).map_err(write_err)?;
    println!("wrote {} ({submatrix}x{submatrix})", heatmap_path.display());

    if let Some(reference) = &cfg.reference {
        let ref_model = format::read_checkpoint(reference).map_err(read_err)?;
        let ref_weight = ref_model.weight_matrix().ok_or_else(|| {
            validation("reference checkpoint must be linear for order similarity")
        })?;
        if ref_model.dim() != model.dim() {
            return Err(validation(format!(
                "dimension mismatch: checkpoint dim {} vs reference dim {}",
                model.dim(),
                ref_model.dim()
            )));
        }
        let ref_impact = channel_impact(ref_weight);
        let ks: Vec<usize> = match &cfg.os_k {
            Some(ks) => ks.clone(),
            None => (1..=model.dim()).collect(),
        };
        let mut records = Vec::with_capacity(ks.len());
        for &k in &ks {
            let os = order_similarity(&impact, &ref_impact, k)?;
            records.push(("os".to_string(), k.to_string(), os));
        }
        let os_path = cfg.out_dir.join("os.csv");
        format::write_metric_records(&os_path, &records).map_err(write_err)?;
        println!("wrote {}", os_path.display());
    }

    Ok(())
}
