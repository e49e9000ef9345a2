//! Robust tensor PCA on a synthetic 30×50×70 tensor: two-level vs the
//! one-level ADMM, residual and relative error at a few checkpoints.
//!
//! `cargo run --release --example tensor_pca -- [num_seeds] [trace.csv]`

use std::fs::File;

use twolevel::tensor_pca::{
    default_rank_estimate, gen_pca_data, run_pca, write_pca_trace_csv, PcaConfig, PcaDataConfig,
    PcaMode,
};

fn geo_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

fn main() -> twolevel::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let trace_path = args.next();
    let data_cfg = PcaDataConfig::default();
    let checkpoints = [100, 250, 500, 1000, 2000];

    for mode in [PcaMode::TwoLevel, PcaMode::OneLevel] {
        let mut res = vec![Vec::new(); checkpoints.len()];
        let mut err = vec![Vec::new(); checkpoints.len()];
        for seed in 0..seeds {
            let data = gen_pca_data(&data_cfg, seed)?;
            let cfg = PcaConfig {
                rank: default_rank_estimate(data_cfg.rank_cp),
                seed: 1000 + seed,
                mode,
                ..PcaConfig::default()
            };
            let run = run_pca(&data.observed, &cfg, Some(&data.truth))?;
            for (c, &k) in checkpoints.iter().enumerate() {
                let rec = &run.trace[k.min(run.trace.len()) - 1];
                res[c].push(rec.residual);
                err[c].push(rec.rel_error.unwrap_or(f64::NAN));
            }
            if seed == 0 {
                if let Some(path) = &trace_path {
                    let name = format!("{path}.{mode:?}.csv").to_lowercase();
                    write_pca_trace_csv(File::create(&name)?, &format!("{mode:?}"), &run.trace)?;
                }
            }
        }
        println!("{mode:?}");
        for (c, k) in checkpoints.iter().enumerate() {
            println!(
                "  k = {k:>4}  r_geo = {:.3e}  err_geo = {:.4e}",
                geo_mean(&res[c]),
                geo_mean(&err[c])
            );
        }
    }
    Ok(())
}
