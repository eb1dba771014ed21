use std::sync::Arc;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use entlab::dynamics::{
    lr_all_pairs, lr_check, time_grid, Evolution, LRSetting, LocalOp, ReproducingForm,
};
use entlab::hamiltonian::{assemble, tfim};
use entlab::lattice::LatticeSpec;

use super::single_site_op;
use crate::report::{Check, Ctx, Outcome};
use crate::CliError;

#[derive(Debug, Clone, Args, Serialize)]
pub struct LrArgs {
    /// Side length of the periodic TFIM lattice.
    #[arg(long = "L", default_value_t = 10)]
    pub l: usize,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    #[arg(long, default_value_t = 2.0)]
    pub g: f64,
    /// Site of `A`.
    #[arg(long, default_value_t = 0)]
    pub x: usize,
    /// Site of `B`.
    #[arg(long, default_value_t = 5)]
    pub y: usize,
    #[arg(long, default_value = "z")]
    pub op_a: String,
    #[arg(long, default_value = "z")]
    pub op_b: String,
    /// Decay rate of the exponential bound.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 2.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    /// Also check the bound with decay `e^{-mu r} (1+r)^{-a}` for this `a`.
    #[arg(long)]
    pub reproducing_exponent: Option<f64>,
    /// Scan every ordered pair of sites at distance at least `min-distance`.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub all_pairs: bool,
    #[arg(long, default_value_t = 2)]
    pub min_distance: usize,
    /// Diagonalize at points where every bound is vacuous too.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub evaluate_vacuous: bool,
}

#[derive(Serialize)]
struct PairRow {
    x: usize,
    y: usize,
    distance: usize,
    max_ratio: f64,
    violations: usize,
    vacuous_points: usize,
}

pub fn lr(args: &LrArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let spec = LatticeSpec::new(args.nu, args.l)?;
    let pot = tfim(&spec, args.j, args.g)?;
    let evo = Arc::new(Evolution::new(&assemble(&pot)?));
    let a = single_site_op(&args.op_a)?;
    let b = single_site_op(&args.op_b)?;
    let grid = time_grid(0.0, args.t_max, args.points);

    if args.all_pairs {
        let scan = lr_all_pairs(evo, &pot, &spec, &a, &b, args.min_distance, args.mu, &grid)?;
        ctx.csv(
            "pairs",
            scan.reports.iter().map(|r| PairRow {
                x: r.x[0],
                y: r.y[0],
                distance: r.distance,
                max_ratio: r.max_ratio,
                violations: r.violations.len(),
                vacuous_points: r.vacuous_points,
            }),
        )?;
        let checks = vec![
            Check::at_most(
                "bound violations over all pairs",
                scan.violations.len() as f64,
                0.0,
            ),
            Check::at_most("max ||[tau_t(A), B]|| / bound", scan.max_ratio, 1.0),
        ];
        return Ok(Outcome {
            checks,
            result: json!({
                "pairs": scan.pairs,
                "evaluated_points": scan.evaluated_points,
                "max_ratio": scan.max_ratio,
                "violations": scan.violations,
                "used_translations": scan.used_translations,
                "velocity": scan.reports.first().map(|r| r.s),
            }),
        });
    }

    let mut setting = LRSetting::new(
        evo,
        &pot,
        &spec,
        LocalOp::new(vec![args.x], a),
        LocalOp::new(vec![args.y], b),
        args.mu,
    )?;
    if let Some(exponent) = args.reproducing_exponent {
        setting = setting.with_reproducing(ReproducingForm::from_potential(
            &pot, &spec, args.mu, exponent,
        )?);
    }
    let report = lr_check(&setting, &grid, args.evaluate_vacuous)?;
    ctx.csv("rows", &report.rows)?;
    let checks = vec![
        Check::at_most("bound violations", report.violations.len() as f64, 0.0),
        Check::at_most("max ||[tau_t(A), B]|| / bound", report.max_ratio, 1.0),
    ];
    Ok(Outcome {
        checks,
        result: serde_json::to_value(&report)?,
    })
}
