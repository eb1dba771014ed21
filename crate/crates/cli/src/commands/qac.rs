use clap::Args;
use serde::Serialize;
use serde_json::json;

use entlab::dynamics::time_grid;
use entlab::lattice::Region;
use entlab::qac::{
    build_filter, round_trip_fidelity, tangency_residual, transport, truncated_generators, QAPath,
    TransportOptions, DEFAULT_SHARPNESS,
};

use super::max_of;
use crate::report::{Check, Ctx, Outcome};
use crate::CliError;

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    /// Gap scale `Delta`.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Bump sharpness `b`.
    #[arg(long, default_value_t = DEFAULT_SHARPNESS)]
    pub sharpness: f64,
    /// Frequency grid half-width in units of `Delta`.
    #[arg(long, default_value_t = 10.0)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub omega_points: usize,
}

#[derive(Serialize)]
struct WeightRow {
    omega: f64,
    w: f64,
}

#[derive(Serialize)]
struct TimeRow {
    t: f64,
    f: f64,
}

pub fn filter(args: &FilterArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let f = build_filter(args.delta, args.sharpness)?;
    let samples = f.weight_samples(args.omega_max * args.delta, args.omega_points);
    ctx.csv(
        "weight",
        samples.iter().map(|&(omega, w)| WeightRow { omega, w }),
    )?;
    ctx.csv(
        "time",
        f.t.iter().zip(&f.f).map(|(&t, &f)| TimeRow { t, f }),
    )?;

    let tail = max_of(
        samples
            .iter()
            .filter(|(w, _)| w.abs() >= args.delta)
            .map(|&(w, wv)| (wv + 1.0 / w).abs()),
    );
    let odd = max_of(samples.iter().map(|&(w, wv)| (wv + f.w(-w)).abs()));
    let decay = f.decay_exponent.unwrap_or(f64::NAN);
    let checks = vec![
        Check::at_most("|W(w) + 1/w| for |w| >= Delta", tail, 1e-8),
        Check::at_most("|W(w) + W(-w)|", odd, 1e-10),
        Check::at_most("time-decay exponent of F", decay, -6.0),
    ];
    Ok(Outcome {
        checks,
        result: json!({
            "delta": f.delta,
            "sharpness": f.sharpness,
            "grid": f.grid,
            "decay_exponent": f.decay_exponent,
            "w_at_zero": f.w(0.0),
            "f_at_zero": f.f_at(0.0),
        }),
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PathArgs {
    /// Only `tfim` (field sweep on a periodic chain).
    #[arg(long, default_value = "tfim")]
    pub model: String,
    #[arg(long = "L", default_value_t = 8)]
    pub l: usize,
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    #[arg(long, default_value_t = 2.0)]
    pub g0: f64,
    #[arg(long, default_value_t = 1.5)]
    pub g1: f64,
    /// `half` or a region literal.
    #[arg(long, default_value = "half")]
    pub cut: String,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Filter scale; defaults to the gap floor.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Gap floor as a fraction of the smallest gap on the step grid.
    #[arg(long, default_value_t = 1.0)]
    pub floor_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SHARPNESS)]
    pub sharpness: f64,
    /// Repeat at twice the steps and report the fidelity change.
    #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub step_check: bool,
    /// Transport back and report the return fidelity.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub round_trip: bool,
    /// Points on `[0, 1]` for the tangency check; 0 skips it.
    #[arg(long, default_value_t = 11)]
    pub tangency_points: usize,
}

#[derive(Serialize)]
struct PathRow {
    s: f64,
    gap: f64,
    fidelity: f64,
    #[serde(rename = "S_B1")]
    entropy: f64,
    #[serde(rename = "dS_ds")]
    rate: f64,
    #[serde(rename = "C_A")]
    bound: f64,
}

fn tfim_path(
    model: &str,
    l: usize,
    j: f64,
    g0: f64,
    g1: f64,
    steps: usize,
    fraction: f64,
) -> Result<QAPath, CliError> {
    if model != "tfim" {
        return Err(CliError::Usage(format!(
            "unknown path model `{model}` (only tfim)"
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::Usage(format!(
            "floor fraction {fraction} must lie in (0, 1]"
        )));
    }
    // The floor is a fraction of the smallest gap on the step grid, so the
    // grid itself always validates.
    Ok(QAPath::tfim(l, j, g0, g1, steps)?.with_auto_floor(fraction))
}

pub fn path(args: &PathArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let path = tfim_path(
        &args.model,
        args.l,
        args.j,
        args.g0,
        args.g1,
        args.steps,
        args.floor_fraction,
    )?;
    let region = match args.cut.as_str() {
        "half" => Region::new(0..args.l / 2),
        lit => Region::parse(lit, &path.spec)?,
    };
    let delta = args.delta.unwrap_or(path.gap_floor);
    let filter = build_filter(delta, args.sharpness)?;
    let opts = TransportOptions {
        steps: args.steps,
        step_check: args.step_check,
        constants: true,
    };
    let res = transport(&path, &filter, &region, opts)?;
    ctx.csv(
        "rows",
        res.rows.iter().map(|r| PathRow {
            s: r.s,
            gap: r.gap,
            fidelity: r.fidelity,
            entropy: r.entropy,
            rate: r.rate,
            bound: r.bound,
        }),
    )?;

    let tangency = time_grid(0.0, 1.0, args.tangency_points)
        .into_iter()
        .map(|s| tangency_residual(&path, s, &filter, 1e-4))
        .collect::<Result<Vec<_>, _>>()?;
    let round_trip = if args.round_trip {
        Some(round_trip_fidelity(&path, &filter, &region, args.steps)?)
    } else {
        None
    };

    let min_fidelity = res
        .rows
        .iter()
        .map(|r| r.fidelity)
        .fold(f64::INFINITY, f64::min);
    let rate_ratio = max_of(res.rows.iter().map(|r| r.rate.abs() / r.bound));
    let mut checks = vec![
        Check::at_least("final fidelity", res.final_fidelity, 0.999),
        Check::at_least("smallest fidelity along the path", min_fidelity, 0.999),
        Check::at_most("unitarity defect", res.max_unitarity_defect, 1e-8),
        Check::at_most("max |dS/ds| / C(s) A", rate_ratio, 1.0),
        Check::at_most("|Delta S|", res.delta_s.abs(), res.bound),
        Check::at_most(
            "|Delta S - exact|",
            (res.delta_s - res.delta_s_exact).abs(),
            1e-3,
        )
        .soft(),
    ];
    if let Some(sc) = res.step_check {
        checks.push(Check::at_most("fidelity change at doubled steps", sc, 1e-6).soft());
    }
    if !tangency.is_empty() {
        checks.push(Check::at_most(
            "tangency residual / tolerance",
            max_of(tangency.iter().map(|t| t.residual / t.tolerance)),
            1.0,
        ));
    }
    if let Some(f) = round_trip {
        checks.push(Check::at_least("round-trip fidelity", f, 0.999));
    }
    Ok(Outcome {
        checks,
        result: json!({
            "delta": delta,
            "gap_floor": path.gap_floor,
            "region": region.to_vec(),
            "area": res.area,
            "constant": res.constant,
            "bound": res.bound,
            "delta_s": res.delta_s,
            "delta_s_exact": res.delta_s_exact,
            "final_fidelity": res.final_fidelity,
            "max_unitarity_defect": res.max_unitarity_defect,
            "rate_violations": res.rate_violations,
            "step_check": res.step_check,
            "tangency": tangency,
            "round_trip_fidelity": round_trip,
        }),
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TruncateArgs {
    #[arg(long, default_value = "tfim")]
    pub model: String,
    #[arg(long = "L", default_value_t = 10)]
    pub l: usize,
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    #[arg(long, default_value_t = 4.0)]
    pub g0: f64,
    #[arg(long, default_value_t = 3.5)]
    pub g1: f64,
    /// Path parameter at which the generator is truncated.
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, default_value_t = 0)]
    pub center: usize,
    /// Largest radius; defaults to `L/2`.
    #[arg(long)]
    pub r_max: Option<usize>,
    /// Filter scale; defaults to the smallest gap on the path.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SHARPNESS)]
    pub sharpness: f64,
    /// Intervals of the grid searched for the smallest gap.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Required log-log slope of `||k_r||` over `r in [2, r_max]`.
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub slope_bound: f64,
}

#[derive(Serialize)]
struct TruncRow {
    r: usize,
    norm: f64,
    region_size: usize,
}

pub fn truncate(args: &TruncateArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let path = tfim_path(
        &args.model,
        args.l,
        args.j,
        args.g0,
        args.g1,
        args.steps,
        1.0,
    )?;
    let delta = args.delta.unwrap_or(path.gap_floor);
    let filter = build_filter(delta, args.sharpness)?;
    let r_max = args.r_max.unwrap_or(path.spec.max_distance());
    let rep = truncated_generators(&path, args.s, &filter, args.center, r_max)?;
    ctx.csv(
        "norms",
        rep.norms
            .iter()
            .zip(&rep.region_sizes)
            .enumerate()
            .map(|(r, (&norm, &region_size))| TruncRow {
                r,
                norm,
                region_size,
            }),
    )?;
    let checks = vec![
        Check::at_most(
            "log-log slope of ||k_r||",
            rep.slope.unwrap_or(f64::NAN),
            args.slope_bound,
        ),
        Check::at_most(
            "telescoping residual",
            rep.telescoping_residual.unwrap_or(f64::NAN),
            1e-8,
        ),
    ];
    Ok(Outcome {
        checks,
        result: json!({ "delta": delta, "r_max": r_max, "report": rep }),
    })
}
