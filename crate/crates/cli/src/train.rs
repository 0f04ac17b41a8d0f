use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use dmpscale::dmp::{self, Demonstration};

use crate::config::{DmpSettings, Settings};

/// Learn a DMP from a demonstration CSV.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Demonstration CSV with columns t,q1..qn.
    #[arg(long)]
    pub demo: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of basis functions [default: 50].
    #[arg(long)]
    pub n_basis: Option<usize>,
    /// Spring gain [default: 25].
    #[arg(long)]
    pub alpha_y: Option<f64>,
    /// Damping gain [default: 6.25].
    #[arg(long)]
    pub beta_y: Option<f64>,
    /// Phase decay rate [default: 4.6].
    #[arg(long)]
    pub alpha_x: Option<f64>,
}

impl TrainArgs {
    fn settings(&self, base: &DmpSettings) -> DmpSettings {
        DmpSettings {
            n_basis: self.n_basis.unwrap_or(base.n_basis),
            alpha_y: self.alpha_y.unwrap_or(base.alpha_y),
            beta_y: self.beta_y.unwrap_or(base.beta_y),
            alpha_x: self.alpha_x.unwrap_or(base.alpha_x),
        }
    }
}

pub fn run(args: &TrainArgs, settings: &Settings) -> anyhow::Result<()> {
    let demo = Demonstration::load_csv(&args.demo)?;
    let hyper = args.settings(&settings.dmp).hyperparams()?;
    let model = dmp::learn_weights(&demo, &hyper)?;
    let rmse = dmp::reconstruction_rmse(&model, &demo)?;
    model
        .save(&args.out)
        .with_context(|| format!("writing model {}", args.out.display()))?;
    for (i, e) in rmse.iter().enumerate() {
        let col = demo.column(i);
        let range = col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - col.iter().copied().fold(f64::INFINITY, f64::min);
        if range > 0.0 {
            println!("q{}: rmse {e:.6e} ({:.3}% of range)", i + 1, 100.0 * e / range);
        } else {
            println!("q{}: rmse {e:.6e}", i + 1);
        }
    }
    Ok(())
}
