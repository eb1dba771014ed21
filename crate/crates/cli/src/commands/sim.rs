use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use entlab::commutator::{
    partition_decompose, ratio_scan, sample_dominated_pair, SpectralProfile, HARD_CONSTANT,
    SOFT_CONSTANT,
};

use super::{instance_seed, max_of};
use crate::report::{Check, Ctx, Outcome};
use crate::{CliError, List};

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    /// Hilbert-space dimensions.
    #[arg(long, default_value = "2,4,8,16,32")]
    pub dims: List<usize>,
    /// Values of `p = Tr A`.
    #[arg(long, default_value = "0.5,0.1,0.01,0.001")]
    pub p: List<f64>,
    /// Samples per (dim, p) cell.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Spectrum of `B`: uniform, geometric, two-scale or mixed.
    #[arg(long, default_value = "mixed")]
    pub profile: String,
}

pub fn scan(args: &ScanArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let profile = SpectralProfile::parse(&args.profile)?;
    let report = ratio_scan(&args.dims.0, &args.p.0, args.samples, ctx.seed, profile)?;
    for (name, w) in &report.witnesses {
        ctx.json(&format!("sim-scan.witness/{name}.json"), w)?;
    }
    ctx.csv("cells", &report.cells)?;
    let checks = vec![
        Check::at_most(
            "max ||[A, log B]||_1 / h(p)",
            report.global_max,
            HARD_CONSTANT,
        ),
        Check::at_most(
            "max ratio against the finite-dimensional constant",
            report.global_max,
            SOFT_CONSTANT,
        )
        .soft(),
    ];
    Ok(Outcome {
        checks,
        result: serde_json::to_value(&report)?,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long, default_value = "2,4,8")]
    pub dims: List<usize>,
    #[arg(long, default_value = "0.5,0.1,0.01,0.001")]
    pub p: List<f64>,
    /// Instances, spread round-robin over the (dim, p) cells.
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value = "mixed")]
    pub profile: String,
}

#[derive(Debug, Clone, Serialize)]
struct DecomposeRow {
    instance: usize,
    dim: usize,
    p: f64,
    w: f64,
    v: f64,
    v_prime: f64,
    w_pp: f64,
    bound_w_pp: f64,
    bound_v: f64,
    bound_v_prime: f64,
    bound_total: f64,
    identity_residual: f64,
    duality_residual: f64,
    blocks: usize,
    all_hold: bool,
}

pub fn decompose(args: &DecomposeArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let profile = SpectralProfile::parse(&args.profile)?;
    let cells: Vec<(usize, f64)> = args
        .dims
        .0
        .iter()
        .flat_map(|&d| args.p.0.iter().map(move |&p| (d, p)))
        .collect();
    if cells.is_empty() {
        return Err(CliError::Usage("need at least one dim and one p".into()));
    }
    let seed = ctx.seed;
    let rows: Vec<DecomposeRow> = (0..args.instances)
        .into_par_iter()
        .map(|i| {
            let (dim, p) = cells[i % cells.len()];
            let pair = sample_dominated_pair(dim, p, instance_seed(seed, i as u64), profile)?;
            let d = partition_decompose(&pair)?;
            Ok(DecomposeRow {
                instance: i,
                dim,
                p,
                w: d.w,
                v: d.v,
                v_prime: d.v_prime,
                w_pp: d.w_pp,
                bound_w_pp: d.bounds.w_pp,
                bound_v: d.bounds.v,
                bound_v_prime: d.bounds.v_prime,
                bound_total: d.bounds.total,
                identity_residual: d.identity_residual,
                duality_residual: d.duality_residual,
                blocks: d.blocks.len(),
                all_hold: d.all_hold,
            })
        })
        .collect::<Result<_, CliError>>()?;
    ctx.csv("instances", &rows)?;

    let ratio = |f: &dyn Fn(&DecomposeRow) -> f64| max_of(rows.iter().map(f));
    let failing = rows.iter().filter(|r| !r.all_hold).count();
    let checks = vec![
        Check::at_most(
            "identity residual |W - (V - V' + W'')|",
            ratio(&|r| r.identity_residual),
            1e-8,
        ),
        Check::at_most(
            "duality residual |W - trace norm|",
            ratio(&|r| r.duality_residual),
            1e-8,
        ),
        Check::at_most(
            "max |W''| / 6 sqrt(p) f(p)",
            ratio(&|r| r.w_pp.abs() / r.bound_w_pp),
            1.0,
        ),
        Check::at_most(
            "max V / 4 p log(1/p)",
            ratio(&|r| r.v.abs() / r.bound_v),
            1.0,
        ),
        Check::at_most(
            "max V' / p log(1/p)",
            ratio(&|r| r.v_prime.abs() / r.bound_v_prime),
            1.0,
        ),
        Check::at_most(
            "max W / total bound",
            ratio(&|r| r.w.abs() / r.bound_total),
            1.0,
        ),
        Check::at_most("instances failing a part bound", failing as f64, 0.0),
    ];
    Ok(Outcome {
        checks,
        result: json!({ "instances": rows.len(), "cells": cells.len(), "failing": failing }),
    })
}
