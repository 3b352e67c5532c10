//! `gen`: synthesize an activation dataset and split it into large-scale,
//! few-shot reference and few-shot test stores.

use std::fs;

use actpred_core::{gen_synthetic, split_store, ActivationStore, CategoryId, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{resolve_gen, GenArgs};
use crate::error::{runtime, validation, write_err, CmdError};
use crate::format;

/// The split RNG stream is derived from the dataset seed with this offset
/// so generation and splitting stay independent.
pub const SPLIT_SEED_OFFSET: u64 = 1;

pub fn run(args: &GenArgs) -> Result<(), CmdError> {
    let cfg = resolve_gen(args)?;

    if cfg.categories_large < 2 {
        return Err(validation("categories_large must be >= 2"));
    }
    if cfg.categories_few < 1 {
        return Err(validation("categories_few must be >= 1"));
    }
    let spec = SyntheticSpec {
        n_categories: cfg.categories_large + cfg.categories_few,
        samples_per_category: cfg.samples_per_category,
        dim: cfg.dim,
        center_scale: cfg.center_scale,
        noise_sigma: cfg.noise_sigma,
        normalize: cfg.normalize,
        seed: cfg.seed,
    };
    // All validation happens before any file is touched.
    spec.validate()?;
    if cfg.samples_per_category <= cfg.shots {
        return Err(validation(format!(
            "samples_per_category ({}) must exceed shots ({})",
            cfg.samples_per_category, cfg.shots
        )));
    }

    let (store, centers) = gen_synthetic(&spec)?;
    let few_categories: Vec<CategoryId> =
        (cfg.categories_large as CategoryId..spec.n_categories as CategoryId).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(SPLIT_SEED_OFFSET));
    let split = split_store(&store, &few_categories, cfg.shots, &mut split_rng)?;

    fs::create_dir_all(&cfg.out_dir).map_err(runtime)?;
    let centers_store = ActivationStore::from_samples(
        cfg.dim,
        centers.into_iter().collect(),
    )?;

    let files = [
        ("large.actv", &split.large),
        ("few_train.actv", &split.few_train),
        ("few_test.actv", &split.few_test),
        ("centers.actv", &centers_store),
    ];
    for (name, st) in files {
        let path = cfg.out_dir.join(name);
        format::write_store(&path, st).map_err(write_err)?;
        println!("wrote {} ({} samples, dim {})", path.display(), st.len(), st.dim());
    }
    println!("seed = {}", cfg.seed);
    Ok(())
}
