use clap::Args;
use serde::Serialize;
use serde_json::json;

use entlab::hamiltonian::{
    anticommutation_defect, assemble, fermionic_matrix, hubbard, jordan_wigner, number_operator,
    preset_potential, spectral_gap_auto, ModeOrdering, PresetParams, DEFAULT_GAP_FLOOR,
};
use entlab::lattice::{
    boundary_and_area, boundary_profile, metric_axiom_check, random_region, LatticeSpec, Region,
};
use entlab::operator::{commutator, max_abs_diff, operator_norm};
use entlab::random::seeded;

use super::max_of;
use crate::report::{Check, Ctx, Outcome};
use crate::CliError;

fn lattice(nu: usize, l: usize, open: bool) -> Result<LatticeSpec, CliError> {
    let spec = LatticeSpec::new(nu, l)?;
    Ok(if open { spec.open() } else { spec })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InfoArgs {
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    #[arg(long = "L", default_value_t = 10)]
    pub l: usize,
    /// Region literal: slabs `0..4` or `0..2 x 1..3`, or sites `0;3` / `0,1;2,2`.
    #[arg(long, default_value = "0..4")]
    pub region: String,
    /// Largest radius of the boundary profile.
    #[arg(long, default_value_t = 3)]
    pub r_max: usize,
    /// Random site triples for the metric axioms.
    #[arg(long, default_value_t = 10_000)]
    pub triples: usize,
    /// Random regions for the profile bound.
    #[arg(long, default_value_t = 1000)]
    pub regions: usize,
    /// Open instead of periodic boundaries.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub open: bool,
}

pub fn info(args: &InfoArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let spec = lattice(args.nu, args.l, args.open)?;
    let region = Region::parse(&args.region, &spec)?;
    let boundary = boundary_and_area(&region, &spec)?;
    let profile = boundary_profile(&region, &spec, args.r_max)?;
    ctx.csv("profile", &profile)?;

    let mut rng = seeded(ctx.seed);
    let metric = metric_axiom_check(&spec, args.triples, &mut rng);
    let mut profile_failures = 0usize;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..args.regions {
        let r = random_region(&spec, &mut rng);
        for row in boundary_profile(&r, &spec, args.r_max)? {
            let ratio = row.m as f64 / row.bound;
            worst_ratio = max_of([worst_ratio, ratio]);
            if ratio > 1.0 {
                profile_failures += 1;
            }
        }
    }
    let own_ratio = max_of(profile.iter().map(|r| r.m as f64 / r.bound));

    let checks = vec![
        Check::at_most(
            "metric axiom violations",
            metric.violations.len() as f64,
            0.0,
        ),
        Check::at_most("region M(r) / 2A(2r+1)^nu", own_ratio, 1.0),
        Check::at_most("random regions M(r) / 2A(2r+1)^nu", worst_ratio, 1.0),
        Check::at_most(
            "random region profile violations",
            profile_failures as f64,
            0.0,
        ),
    ];
    Ok(Outcome {
        checks,
        result: json!({
            "n_sites": spec.n_sites(),
            "periodic": !args.open,
            "max_distance": spec.max_distance(),
            "region": region.to_vec(),
            "area": boundary.area,
            "boundary_in": boundary.boundary_in.to_vec(),
            "boundary_out": boundary.boundary_out.to_vec(),
            "profile": profile,
            "metric_triples": metric.triples,
            "metric_violations": metric.violations,
            "random_regions": args.regions,
        }),
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JwArgs {
    /// Largest mode count for the anticommutation identities.
    #[arg(long, default_value_t = 6)]
    pub modes: usize,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    /// Side length of the Hubbard lattice (two modes per site).
    #[arg(long = "L", default_value_t = 3)]
    pub l: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 4.0)]
    pub u: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub open: bool,
}

#[derive(Serialize)]
struct JwRow {
    check: String,
    value: f64,
}

pub fn jw(args: &JwArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    if args.modes == 0 || args.modes > 12 {
        return Err(CliError::Usage("--modes must lie in 1..=12".into()));
    }
    let mut rows = Vec::new();
    let mut car: f64 = 0.0;
    for n in 1..=args.modes {
        let d = anticommutation_defect(n);
        car = max_of([car, d]);
        rows.push(JwRow {
            check: format!("anticommutation n={n}"),
            value: d,
        });
    }

    let spec = lattice(args.nu, args.l, args.open)?;
    let mut mapping: f64 = 0.0;
    let mut number: f64 = 0.0;
    for (label, ordering) in [
        ("row-major", ModeOrdering::RowMajor),
        ("snake", ModeOrdering::Snake),
    ] {
        let f = hubbard(&spec, args.t, args.u, args.mu, ordering);
        let spin = assemble(&jordan_wigner(&f)?)?;
        let direct = fermionic_matrix(&f);
        let diff = max_abs_diff(spin.matrix(), &direct);
        let comm = operator_norm(&commutator(spin.matrix(), &number_operator(f.n_modes)));
        mapping = max_of([mapping, diff]);
        number = max_of([number, comm]);
        rows.push(JwRow {
            check: format!("spin form vs fermionic ({label})"),
            value: diff,
        });
        rows.push(JwRow {
            check: format!("||[H, N]|| ({label})"),
            value: comm,
        });
    }
    ctx.csv("checks", &rows)?;

    let checks = vec![
        Check::at_most("anticommutation defect", car, 1e-12),
        Check::at_most("spin form vs fermionic matrix", mapping, 1e-12),
        Check::at_most("Hubbard ||[H, N]||", number, 1e-10),
    ];
    Ok(Outcome {
        checks,
        result: json!({ "rows": rows, "hubbard_modes": 2 * spec.n_sites() }),
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    /// tfim, heisenberg or hubbard_jw.
    #[arg(long, default_value = "tfim")]
    pub model: String,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    #[arg(long = "L", default_value_t = 8)]
    pub l: usize,
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    #[arg(long, default_value_t = 2.0)]
    pub g: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 4.0)]
    pub u: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub open: bool,
    /// Levels written to the CSV.
    #[arg(long, default_value_t = 20)]
    pub levels: usize,
}

#[derive(Serialize)]
struct LevelRow {
    index: usize,
    energy: f64,
}

pub fn spectrum(args: &SpectrumArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let spec = lattice(args.nu, args.l, args.open)?;
    let params = PresetParams {
        j: args.j,
        g: args.g,
        t: args.t,
        u: args.u,
        mu: args.mu,
    };
    let h = assemble(&preset_potential(&args.model, &params, &spec)?)?;
    let data = spectral_gap_auto(&h, DEFAULT_GAP_FLOOR)?;
    ctx.csv(
        "levels",
        data.eigenvalues
            .iter()
            .take(args.levels)
            .enumerate()
            .map(|(index, &energy)| LevelRow { index, energy }),
    )?;
    Ok(Outcome {
        checks: vec![],
        result: json!({
            "dim": h.dim(),
            "ground_energy": data.eigenvalues[0],
            "degeneracy": data.degeneracy,
            "gap": data.gap,
            "delta_e": data.delta_e,
            "gapped": data.gapped,
            "levels": data.eigenvalues.iter().take(args.levels).collect::<Vec<_>>(),
        }),
    })
}
