//! Command-line front end: configuration parsing, sweep orchestration and
//! table emission for the sphere-plane low-temperature expansion.

mod config;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use casimir_lowt::lowtemp::{self, FitTarget};
use casimir_lowt::oracle;
use casimir_lowt::{BoundarySpec, Error, Geometry};

use config::{Effective, GridArgs};
use output::{Metadata, Table};

#[derive(Parser)]
#[command(
    name = "casimir-lowt",
    version,
    about = "Low-temperature Casimir free energy and force for a sphere in front of a plane"
)]
struct Cli {
    /// Flat key=value configuration file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    /// Working precision in significant decimal digits (>= 30). Also read
    /// from CASIMIR_LOWT_PRECISION when the flag is absent.
    #[arg(long, global = true)]
    precision: Option<u32>,

    /// Coefficient arithmetic: floating point or exact rationals.
    #[arg(long, global = true, value_parser = ["float", "exact"])]
    mode: Option<String>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub(crate) struct CaseArgs {
    /// Physics case: DD, DN, ND, NN (scalar), EM, dielectric, plasma.
    #[arg(long)]
    case: Option<String>,

    /// Permittivity of the dielectric ball.
    #[arg(long)]
    eps: Option<String>,

    /// Permeability of the dielectric ball.
    #[arg(long)]
    mu: Option<String>,

    /// Plasma frequency times sphere radius.
    #[arg(long = "omega-p")]
    omega_p: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// N1/N3 tables over rho and the truncation.
    NCoeffs {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Small-separation force coefficients c2, c3 per truncation (R = 1).
    CTable {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Fit the large-separation power expansion of N3 (or N1).
    Asymptotics {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated model powers, e.g. 3,6,9,11,12.
        #[arg(long)]
        powers: Option<String>,
        /// Fit target: n1, n3, te, tm.
        #[arg(long, value_parser = ["n1", "n3", "te", "tm"])]
        target: Option<String>,
    },
    /// Convergence of N1/N3 against the truncation at fixed rho.
    Sweep {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Finite-frequency consistency check of N1/N3.
    OracleCheck {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Largest xi L of the descending ladder.
        #[arg(long = "xi-max")]
        xi_max: Option<f64>,
        /// Number of half-decade windows.
        #[arg(long)]
        windows: Option<usize>,
        /// Points per window.
        #[arg(long)]
        points: Option<usize>,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        match e {
            Error::SingularBlock { .. }
            | Error::SpectralRadius { .. }
            | Error::RankDeficientFit(_)
            | Error::UnreliableExtraction(_)
            | Error::InsufficientOrder { .. }
            | Error::UnbalancedElement(..) => 3,
            _ => 2,
        }
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let eff = Effective::build(&cli)?;
    casimir_lowt::precision::set_digits(eff.precision)
        .map_err(|d| anyhow::anyhow!("precision already fixed to {d} digits"))?;

    let meta = Metadata {
        command: eff.command_name.clone(),
        precision: eff.precision,
        mode: eff.mode_name.clone(),
        config_hash: eff.config_hash.clone(),
        extra: Vec::new(),
    };

    let code = match &cli.command {
        Command::NCoeffs { case, grid } => n_coeffs(&eff, case, grid, meta)?,
        Command::CTable { case, grid } => c_table(&eff, case, grid, meta)?,
        Command::Asymptotics { case, grid, powers, target } => {
            asymptotics(&eff, case, grid, powers.as_deref(), target.as_deref(), meta)?
        }
        Command::Sweep { case, grid } => sweep(&eff, case, grid, meta)?,
        Command::OracleCheck { case, grid, xi_max, windows, points } => {
            oracle_check(&eff, case, grid, *xi_max, *windows, *points, meta)?
        }
    };
    Ok(code)
}

fn spec_of(eff: &Effective, case: &CaseArgs) -> anyhow::Result<(String, BoundarySpec)> {
    let name = eff.case_name(case)?;
    let spec = eff.boundary_spec(&name, case)?;
    Ok((name, spec))
}

fn truncations(eff: &Effective, grid: &GridArgs, spec: &BoundarySpec) -> anyhow::Result<Vec<i64>> {
    let lm = eff.get_i64(grid.lm, "lm")?;
    let lm_max = eff.get_i64(grid.lm_max, "lm-max")?;
    match (lm, lm_max) {
        (Some(l), None) => Ok(vec![l]),
        (None, Some(top)) => {
            anyhow::ensure!(top >= spec.l_min(), "lm-max below the lowest orbital index");
            Ok((spec.l_min()..=top).collect())
        }
        (Some(l), Some(top)) => {
            anyhow::ensure!(l <= top, "lm exceeds lm-max");
            Ok((l..=top).collect())
        }
        (None, None) => anyhow::bail!("one of --lm or --lm-max is required"),
    }
}

fn n_coeffs(
    eff: &Effective,
    case: &CaseArgs,
    grid: &GridArgs,
    mut meta: Metadata,
) -> anyhow::Result<ExitCode> {
    let (name, spec) = spec_of(eff, case)?;
    let rhos = eff.rho_values(grid)?;
    let lms = truncations(eff, grid, &spec)?;
    meta.extra.push(("case".into(), name));

    let em = spec.is_em();
    let mut table = Table::new(if em {
        vec!["rho", "lm", "n1", "n3", "n3_te", "n3_tm"]
    } else {
        vec!["rho", "lm", "n1", "n3"]
    });
    for rho in &rhos {
        let geometry = Geometry::from_rho(rho.clone())?;
        for &lm in &lms {
            let res = lowtemp::n_coefficients(&geometry, &spec, lm, eff.mode)?;
            let mut row = vec![
                eff.fmt(rho),
                lm.to_string(),
                eff.fmt(&res.n1),
                eff.fmt(&res.n3),
            ];
            if em {
                row.push(eff.fmt(res.n3_te.as_ref().unwrap()));
                row.push(eff.fmt(res.n3_tm.as_ref().unwrap()));
            }
            table.push(row);
        }
    }
    output::emit(eff, &meta, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn c_table(
    eff: &Effective,
    case: &CaseArgs,
    grid: &GridArgs,
    mut meta: Metadata,
) -> anyhow::Result<ExitCode> {
    let (name, spec) = spec_of(eff, case)?;
    let lms = truncations(eff, grid, &spec)?;
    meta.extra.push(("case".into(), name));

    let mut table = Table::new(vec!["lm", "c2", "c3"]);
    for &lm in &lms {
        let fit = lowtemp::c_coefficients(&spec, lm)?;
        table.push(vec![lm.to_string(), eff.fmt(&fit.c2), eff.fmt(&fit.c3)]);
    }
    output::emit(eff, &meta, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_powers(s: &str) -> anyhow::Result<Vec<i64>> {
    s.split(',')
        .map(|p| p.trim().parse::<i64>().map_err(Into::into))
        .collect()
}

fn asymptotics(
    eff: &Effective,
    case: &CaseArgs,
    grid: &GridArgs,
    powers: Option<&str>,
    target: Option<&str>,
    mut meta: Metadata,
) -> anyhow::Result<ExitCode> {
    let (name, spec) = spec_of(eff, case)?;
    let lm = eff
        .get_i64(grid.lm, "lm")?
        .or(eff.get_i64(grid.lm_max, "lm-max")?)
        .unwrap_or(4);
    let rhos = if grid.rho.is_none() && grid.rho_grid.is_none() {
        config::geometric_grid(0.01, 0.1, 8)
    } else {
        eff.rho_values(grid)?
    };
    let powers_str = powers.map(str::to_string).or_else(|| eff.lookup("powers"));
    let powers = match powers_str {
        Some(p) => parse_powers(&p)?,
        None => {
            if spec.is_em() || name == "ND" || name == "NN" {
                vec![3, 6, 9, 11, 12]
            } else {
                vec![1, 2, 3, 4, 5]
            }
        }
    };
    let target_str = target.map(str::to_string).or_else(|| eff.lookup("target"));
    let targets: Vec<FitTarget> = match target_str.as_deref() {
        Some("n1") => vec![FitTarget::N1],
        Some("n3") => vec![FitTarget::N3],
        Some("te") => vec![FitTarget::N3Te],
        Some("tm") => vec![FitTarget::N3Tm],
        Some(other) => anyhow::bail!("unknown fit target {other}"),
        None if spec.is_em() => vec![FitTarget::N3Te, FitTarget::N3Tm],
        None => vec![FitTarget::N3],
    };
    meta.extra.push(("case".into(), name));
    meta.extra.push(("lm".into(), lm.to_string()));

    let mut table = Table::new(vec!["target", "power", "coefficient"]);
    for t in targets {
        let fit = lowtemp::asymptotic_check(&spec, lm, &rhos, &powers, t)?;
        let label = match t {
            FitTarget::N1 => "n1",
            FitTarget::N3 => "n3",
            FitTarget::N3Te => "n3_te",
            FitTarget::N3Tm => "n3_tm",
        };
        for (p, c) in fit.powers.iter().zip(&fit.coefficients) {
            table.push(vec![label.to_string(), p.to_string(), eff.fmt(c)]);
        }
    }
    output::emit(eff, &meta, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(
    eff: &Effective,
    case: &CaseArgs,
    grid: &GridArgs,
    mut meta: Metadata,
) -> anyhow::Result<ExitCode> {
    let (name, spec) = spec_of(eff, case)?;
    let rhos = eff.rho_values(grid)?;
    anyhow::ensure!(rhos.len() == 1, "sweep takes exactly one rho");
    let lm_max = eff
        .get_i64(grid.lm_max, "lm-max")?
        .ok_or_else(|| anyhow::anyhow!("--lm-max is required"))?;
    meta.extra.push(("case".into(), name));

    let report = lowtemp::convergence_sweep(&spec, &rhos[0], lm_max)?;
    let em = spec.is_em();
    let mut table = Table::new(if em {
        vec!["lm", "n1", "n3", "n3_te", "n3_tm"]
    } else {
        vec!["lm", "n1", "n3"]
    });
    for row in &report.rows {
        let mut cells = vec![row.l_max.to_string(), eff.fmt(&row.n1), eff.fmt(&row.n3)];
        if em {
            cells.push(eff.fmt(row.n3_te.as_ref().unwrap()));
            cells.push(eff.fmt(row.n3_tm.as_ref().unwrap()));
        }
        table.push(cells);
    }
    meta.extra.push(("n1_converged".into(), report.n1_converged.to_string()));
    meta.extra.push(("n3_converged".into(), report.n3_converged.to_string()));
    if let Some(te) = report.te_converged {
        meta.extra.push(("te_converged".into(), te.to_string()));
    }
    if let Some(tm) = report.tm_converged {
        meta.extra.push(("tm_converged".into(), tm.to_string()));
    }
    output::emit(eff, &meta, &table)?;
    if report.converged() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: non-convergent truncation behavior flagged");
        Ok(ExitCode::from(4))
    }
}

#[allow(clippy::too_many_arguments)]
fn oracle_check(
    eff: &Effective,
    case: &CaseArgs,
    grid: &GridArgs,
    xi_max: Option<f64>,
    windows: Option<usize>,
    points: Option<usize>,
    mut meta: Metadata,
) -> anyhow::Result<ExitCode> {
    let (name, spec) = spec_of(eff, case)?;
    let rhos = eff.rho_values(grid)?;
    anyhow::ensure!(rhos.len() == 1, "oracle-check takes exactly one rho");
    let lm = eff
        .get_i64(grid.lm, "lm")?
        .ok_or_else(|| anyhow::anyhow!("--lm is required"))?;
    let xi_max = xi_max
        .or_else(|| eff.lookup("xi-max").and_then(|s| s.parse().ok()))
        .unwrap_or(1e-2);
    let windows = windows.unwrap_or(4);
    let points = points.unwrap_or(10);
    meta.extra.push(("case".into(), name));

    let geometry = Geometry::from_rho(rhos[0].clone())?;
    let xi_grid = oracle::default_xi_grid(xi_max, points, windows);
    let report = oracle::low_t_consistency_check(&geometry, &spec, lm, &xi_grid, windows)?;

    let mut table = Table::new(vec!["field", "value"]);
    let f64s = |v: f64| format!("{v:.6e}");
    table.push(vec!["a1".into(), eff.fmt(&report.a1)]);
    table.push(vec!["a3".into(), eff.fmt(&report.a3)]);
    table.push(vec!["n1".into(), eff.fmt(&report.n1)]);
    table.push(vec!["n3".into(), eff.fmt(&report.n3)]);
    table.push(vec!["err_a1".into(), f64s(report.err_a1())]);
    table.push(vec!["err_a3".into(), f64s(report.err_a3())]);
    table.push(vec!["residual_slope".into(), f64s(report.residual_slope)]);
    table.push(vec!["drift_a1".into(), f64s(report.drift_a1)]);
    table.push(vec!["drift_a3".into(), f64s(report.drift_a3)]);
    for (i, (s, r)) in report
        .window_scales
        .iter()
        .zip(&report.window_rms)
        .enumerate()
    {
        table.push(vec![format!("window{i}_scale"), f64s(*s)]);
        table.push(vec![format!("window{i}_rms"), f64s(*r)]);
    }
    output::emit(eff, &meta, &table)?;
    Ok(ExitCode::SUCCESS)
}
