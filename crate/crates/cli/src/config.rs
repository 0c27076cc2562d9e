//! Effective run configuration: config file, environment and flags merged
//! (flags win), with a canonical hash for reproducible output headers.

use std::collections::BTreeMap;

use clap::Args;
use sha2::{Digest, Sha256};

use casimir_lowt::scalar::{parse_scalar, Mode, Scalar};
use casimir_lowt::{BoundarySpec, PlaneBoundary, SphereBoundary};

use crate::{CaseArgs, Cli, Command};

pub const ENV_PRECISION: &str = "CASIMIR_LOWT_PRECISION";

#[derive(Args, Clone, Default)]
pub(crate) struct GridArgs {
    /// Comma-separated list of rho = R/L values.
    #[arg(long)]
    pub rho: Option<String>,

    /// Linear rho grid start:stop:count.
    #[arg(long = "rho-grid")]
    pub rho_grid: Option<String>,

    /// Single orbital truncation.
    #[arg(long)]
    pub lm: Option<i64>,

    /// Sweep truncations up to this value.
    #[arg(long = "lm-max", alias = "lmax")]
    pub lm_max: Option<i64>,
}

pub(crate) struct Effective {
    pub precision: u32,
    pub mode: Mode,
    pub mode_name: String,
    pub command_name: String,
    pub config_hash: String,
    pub format: OutputFormat,
    pub out: Option<std::path::PathBuf>,
    file_values: BTreeMap<String, String>,
    /// Significant digits used when rendering values.
    print_digits: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum OutputFormat {
    Csv,
    Json,
}

fn parse_config_file(path: &std::path::Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            anyhow::bail!("config line {} is not key=value: {line:?}", idx + 1);
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl Effective {
    pub fn build(cli: &Cli) -> anyhow::Result<Self> {
        let file_values = match &cli.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };

        let precision = match cli.precision {
            Some(p) => p,
            None => match std::env::var(ENV_PRECISION) {
                Ok(v) => v
                    .parse()
                    .map_err(|_| anyhow::anyhow!("bad {ENV_PRECISION} value {v:?}"))?,
                Err(_) => match file_values.get("precision") {
                    Some(v) => v
                        .parse()
                        .map_err(|_| anyhow::anyhow!("bad precision in config: {v:?}"))?,
                    None => casimir_lowt::precision::DEFAULT_DIGITS,
                },
            },
        };
        anyhow::ensure!(precision >= 30, "precision must be at least 30 digits");

        let mode_name = cli
            .mode
            .clone()
            .or_else(|| file_values.get("mode").cloned())
            .unwrap_or_else(|| "float".to_string());
        let mode = match mode_name.as_str() {
            "float" => Mode::Floating,
            "exact" => Mode::Exact,
            other => anyhow::bail!("unknown mode {other:?} (float or exact)"),
        };

        let format = match cli
            .format
            .clone()
            .or_else(|| file_values.get("format").cloned())
            .unwrap_or_else(|| "csv".to_string())
            .as_str()
        {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => anyhow::bail!("unknown format {other:?} (csv or json)"),
        };
        let out = cli
            .out
            .clone()
            .or_else(|| file_values.get("out").map(Into::into));

        let command_name = match &cli.command {
            Command::NCoeffs { .. } => "n-coeffs",
            Command::CTable { .. } => "c-table",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Sweep { .. } => "sweep",
            Command::OracleCheck { .. } => "oracle-check",
        }
        .to_string();

        // Canonical hash of the effective configuration.
        let mut canonical = String::new();
        canonical.push_str(&format!("command={command_name}\n"));
        canonical.push_str(&format!("precision={precision}\n"));
        canonical.push_str(&format!("mode={mode_name}\n"));
        for (k, v) in &file_values {
            canonical.push_str(&format!("file.{k}={v}\n"));
        }
        let args: Vec<String> = std::env::args().skip(1).collect();
        canonical.push_str(&format!("args={}\n", args.join(" ")));
        let hash = Sha256::digest(canonical.as_bytes());
        let config_hash = format!("sha256:{:.16}", hex_string(&hash));

        let print_digits = (precision as usize).min(40);
        Ok(Effective {
            precision,
            mode,
            mode_name,
            command_name,
            config_hash,
            format,
            out,
            file_values,
            print_digits,
        })
    }

    pub fn lookup(&self, key: &str) -> Option<String> {
        self.file_values.get(key).cloned()
    }

    pub fn get_i64(&self, flag: Option<i64>, key: &str) -> anyhow::Result<Option<i64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file_values.get(key) {
            Some(v) => Ok(Some(v.parse().map_err(|_| {
                anyhow::anyhow!("bad integer for {key} in config: {v:?}")
            })?)),
            None => Ok(None),
        }
    }

    pub fn case_name(&self, case: &CaseArgs) -> anyhow::Result<String> {
        case.case
            .clone()
            .or_else(|| self.lookup("case"))
            .ok_or_else(|| anyhow::anyhow!("--case is required"))
    }

    fn material(&self, flag: &Option<String>, key: &str) -> anyhow::Result<Option<Scalar>> {
        let raw = flag.clone().or_else(|| self.lookup(key));
        match raw {
            Some(s) => Ok(Some(
                parse_scalar(&s, self.mode)
                    .ok_or_else(|| anyhow::anyhow!("cannot parse {key} value {s:?}"))?,
            )),
            None => Ok(None),
        }
    }

    pub fn boundary_spec(&self, name: &str, case: &CaseArgs) -> anyhow::Result<BoundarySpec> {
        let scalar_case = |sphere, plane| {
            BoundarySpec::scalar(sphere, plane).map_err(anyhow::Error::from)
        };
        match name {
            "DD" => scalar_case(SphereBoundary::Dirichlet, PlaneBoundary::Dirichlet),
            "DN" => scalar_case(SphereBoundary::Dirichlet, PlaneBoundary::Neumann),
            "ND" => scalar_case(SphereBoundary::Neumann, PlaneBoundary::Dirichlet),
            "NN" => scalar_case(SphereBoundary::Neumann, PlaneBoundary::Neumann),
            "EM" => Ok(BoundarySpec::em_conductor()),
            "dielectric" => {
                let eps = self
                    .material(&case.eps, "eps")?
                    .unwrap_or_else(|| Scalar::one(self.mode));
                let mu = self
                    .material(&case.mu, "mu")?
                    .unwrap_or_else(|| Scalar::one(self.mode));
                Ok(BoundarySpec::dielectric(eps, mu)?)
            }
            "plasma" => {
                let w = self
                    .material(&case.omega_p, "omega-p")?
                    .ok_or_else(|| anyhow::anyhow!("plasma needs --omega-p"))?;
                Ok(BoundarySpec::plasma(w)?)
            }
            other => anyhow::bail!(
                "unknown case {other:?} (DD, DN, ND, NN, EM, dielectric, plasma)"
            ),
        }
    }

    pub fn rho_values(&self, grid: &GridArgs) -> anyhow::Result<Vec<Scalar>> {
        let rho = grid.rho.clone().or_else(|| self.lookup("rho"));
        let rho_grid = grid.rho_grid.clone().or_else(|| self.lookup("rho-grid"));
        let values = match (rho, rho_grid) {
            (Some(list), _) => list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    parse_scalar(s.trim(), self.mode)
                        .ok_or_else(|| anyhow::anyhow!("cannot parse rho value {s:?}"))
                })
                .collect::<anyhow::Result<Vec<_>>>()?,
            (None, Some(spec)) => {
                let parts: Vec<&str> = spec.split(':').collect();
                anyhow::ensure!(parts.len() == 3, "rho grid must be start:stop:count");
                let start: f64 = parts[0].parse()?;
                let stop: f64 = parts[1].parse()?;
                let count: usize = parts[2].parse()?;
                anyhow::ensure!(count >= 1, "rho grid needs at least one point");
                (0..count)
                    .map(|i| {
                        let v = if count == 1 {
                            start
                        } else {
                            start + (stop - start) * i as f64 / (count - 1) as f64
                        };
                        parse_scalar(&format!("{v:.12}"), self.mode)
                            .ok_or_else(|| anyhow::anyhow!("bad grid point"))
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?
            }
            (None, None) => anyhow::bail!("one of --rho or --rho-grid is required"),
        };
        anyhow::ensure!(!values.is_empty(), "rho grid is empty");
        for v in &values {
            let f = v.to_f64();
            anyhow::ensure!(f > 0.0 && f < 1.0, "rho values must lie in (0, 1), got {f}");
        }
        Ok(values)
    }

    pub fn fmt(&self, v: &Scalar) -> String {
        v.rendered().to_decimal_string(self.print_digits)
    }
}

/// Geometric grid helper for default asymptotic fits.
pub(crate) fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<Scalar> {
    let bits = casimir_lowt::precision::working_bits();
    (0..n)
        .map(|i| {
            let v = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
            Scalar::Float(rug::Float::with_val(bits, v))
        })
        .collect()
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
