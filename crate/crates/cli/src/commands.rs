//! Subcommand definitions and their table schemas.

use clap::{Args, Subcommand, ValueEnum};
use ewens_pitman::exact::{
    factorial_moment_kstar, factorial_moment_mstar, law_kn, law_multiplicities, mgf_kn_series, mgf_mln_series,
};
use ewens_pitman::mdp::{
    clt_diagnostic, critical_alpha, entropy_form, legendre, limit_ratio_diagnostic, mdp_scan,
    posterior_mdp_compare, rate, rate_m_displayed, validate_schedule, Method, ScaleSchedule,
};
use ewens_pitman::numeric::log_sum_exp;
use ewens_pitman::posterior::{posterior_moment, verify_representation, PosteriorContext, VerifyOptions};
use ewens_pitman::sampler::{gem_partition, par_replicates, sample_path, ModelParams};
use ewens_pitman::Statistic;
use serde::Serialize;
use serde_json::Value;

use crate::parse::{parse_count, parse_f64_list, parse_grid_file, parse_n_grid, parse_schedule, ParseError};
use crate::table::{Cell, Table};
use crate::{CliError, Output};

pub enum Failure {
    Error(CliError),
    /// The table is still written, then the process exits with code 3.
    Flagged(Output, String),
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Error(e.into())
    }
}

type CmdResult = Result<Output, Failure>;

fn count(s: &str) -> Result<u64, ParseError> {
    parse_count(s)
}

fn reps_count(s: &str) -> Result<usize, ParseError> {
    let v = parse_count(s)?;
    usize::try_from(v).map_err(|_| ParseError::Integer(s.to_string()))
}

fn statistic(l: Option<u64>) -> Result<Statistic, CliError> {
    match l {
        None => Ok(Statistic::K),
        Some(0) => Err(CliError::Validation("--l must be positive".into())),
        Some(l) => Ok(Statistic::M(l)),
    }
}

fn statistic_name(s: Statistic) -> String {
    s.to_string()
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate partitions and record K_n and M_{l,n}.
    #[command(after_help = "CSV columns: rep, n, k, m_1, ..., m_L (L = --l, default 3)")]
    Sample(SampleArgs),
    /// Exact law of K_n (DP) or of the multiplicity histogram (n <= 14).
    #[command(name = "exact-law", after_help = "CSV columns: k, prob, log_prob (--what k)\n             k, m_1, ..., m_n, prob (--what multiplicities)")]
    ExactLaw(ExactLawArgs),
    /// Factorial moments of K*_m / M*_{l,m} under PD(alpha, theta+n) and posterior raw moments.
    #[command(after_help = "CSV columns: r, factorial_moment, posterior_moment")]
    Moments(MomentsArgs),
    /// E[(1-y)^{-X}] for X = K_n or M_{l,n} by series (theta = 0) or exact law.
    #[command(after_help = "CSV columns: n, y, log_mgf, mgf, method")]
    Mgf(MgfArgs),
    /// Closed form vs exact oracle vs Monte Carlo for posterior raw moments.
    #[command(name = "posterior-verify", after_help = "CSV columns: r, closed_form, oracle, mc_mean, mc_stderr, oracle_flag, mc_flag\nExit code 3 if any row is flagged.")]
    PosteriorVerify(PosteriorVerifyArgs),
    /// Scaled log-MGF grid for K_n or M_{l,n}.
    #[command(name = "mdp-scan", after_help = "CSV columns: n, lambda, beta_n, scaled_logmgf, method, stderr\nWith --check-trend, exit code 3 unless |value - limit| strictly decreases along n for every lambda > 0.")]
    MdpScan(MdpScanArgs),
    /// Monte Carlo scaled log-MGF of the posterior count next to the prior one.
    #[command(name = "posterior-mdp", after_help = "CSV columns: m, lambda, posterior, posterior_stderr, prior, prior_stderr, separated\nExit code 3 if the two differ by more than 4 combined standard errors at the largest m.")]
    PosteriorMdp(PosteriorMdpArgs),
    /// Rate functions, Legendre transforms, entropy form and critical alpha.
    #[command(after_help = "Prints the bare value without --out.\nCSV columns: quantity, value")]
    Rate(RateArgs),
    /// Almost-sure limit ratios (alpha > 0) or the alpha = 0 normal approximation.
    #[command(after_help = "CSV columns: quantity, l, mean, stderr, reference (--what ratio)\n             quantity, empirical, stderr, exact (--what clt)\nExit code 3 if an exact anchor is more than 4 standard errors away.")]
    Limits(LimitsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::ExactLaw(_) => "exact-law",
            Command::Moments(_) => "moments",
            Command::Mgf(_) => "mgf",
            Command::PosteriorVerify(_) => "posterior-verify",
            Command::MdpScan(_) => "mdp-scan",
            Command::PosteriorMdp(_) => "posterior-mdp",
            Command::Rate(_) => "rate",
            Command::Limits(_) => "limits",
        }
    }

    pub fn parameters(&self) -> Value {
        let v = match self {
            Command::Sample(a) => serde_json::to_value(a),
            Command::ExactLaw(a) => serde_json::to_value(a),
            Command::Moments(a) => serde_json::to_value(a),
            Command::Mgf(a) => serde_json::to_value(a),
            Command::PosteriorVerify(a) => serde_json::to_value(a),
            Command::MdpScan(a) => serde_json::to_value(a),
            Command::PosteriorMdp(a) => serde_json::to_value(a),
            Command::Rate(a) => serde_json::to_value(a),
            Command::Limits(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Sample(a) => Some(a.seed),
            Command::PosteriorVerify(a) => Some(a.seed),
            Command::MdpScan(a) => a.seed,
            Command::PosteriorMdp(a) => Some(a.seed),
            Command::Limits(a) => Some(a.seed),
            _ => None,
        }
    }

    pub fn execute(&self) -> CmdResult {
        match self {
            Command::Sample(a) => sample(a),
            Command::ExactLaw(a) => exact_law(a),
            Command::Moments(a) => moments(a),
            Command::Mgf(a) => mgf(a),
            Command::PosteriorVerify(a) => posterior_verify(a),
            Command::MdpScan(a) => mdp_scan_cmd(a),
            Command::PosteriorMdp(a) => posterior_mdp(a),
            Command::Rate(a) => rate_cmd(a),
            Command::Limits(a) => limits(a),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Model {
    /// Discount parameter alpha in [0, 1).
    #[arg(long)]
    pub alpha: f64,
    /// Concentration parameter theta > -alpha.
    #[arg(long)]
    pub theta: f64,
}

impl Model {
    fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(self.alpha, self.theta)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Crp,
    Gem,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    /// Sample size (final checkpoint).
    #[arg(long, required_unless_present = "n_grid", value_parser = count)]
    pub n: Option<u64>,
    /// Checkpoints recorded along one sequential path, e.g. 10,100,1000.
    #[arg(long)]
    pub n_grid: Option<String>,
    /// Largest block size l whose multiplicity is recorded.
    #[arg(long, default_value_t = 3)]
    pub l: u64,
    #[arg(long, default_value_t = 1, value_parser = reps_count)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "crp")]
    pub sampler: SamplerKind,
}

fn sample(a: &SampleArgs) -> CmdResult {
    let params = a.model.params()?;
    let checkpoints = match (&a.n_grid, a.n) {
        (Some(g), _) => parse_n_grid(g)?,
        (None, Some(n)) if n > 0 => vec![n],
        _ => return Err(CliError::Validation("--n must be positive".into()).into()),
    };
    if a.l == 0 {
        return Err(CliError::Validation("--l must be positive".into()).into());
    }
    let mut columns = vec!["rep".to_string(), "n".into(), "k".into()];
    columns.extend((1..=a.l).map(|l| format!("m_{l}")));
    let mut table = Table::new(columns);
    let runs = match a.sampler {
        SamplerKind::Crp => par_replicates(a.seed, a.reps, |rng| sample_path(&params, &checkpoints, a.l, rng)),
        SamplerKind::Gem => {
            if checkpoints.len() != 1 {
                return Err(CliError::Validation("the gem sampler records a single n".into()).into());
            }
            let n = checkpoints[0];
            par_replicates(a.seed, a.reps, |rng| {
                gem_partition(&params, n, 100_000_000, rng).map(|s| {
                    vec![ewens_pitman::sampler::PathRecord {
                        n,
                        k: s.k(),
                        m: (1..=a.l).map(|l| s.multiplicity(l)).collect(),
                    }]
                })
            })
        }
    };
    for (rep, run) in runs.into_iter().enumerate() {
        for rec in run? {
            let mut row: Vec<Cell> = vec![(rep as u64).into(), rec.n.into(), rec.k.into()];
            row.extend(rec.m.iter().map(|&v| Cell::from(v)));
            table.push(row);
        }
    }
    Ok(Output::Table(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    K,
    Multiplicities,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactLawArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    #[arg(long, value_parser = count)]
    pub n: u64,
    #[arg(long, value_enum, default_value = "k")]
    pub what: LawKind,
}

fn exact_law(a: &ExactLawArgs) -> CmdResult {
    let params = a.model.params()?;
    match a.what {
        LawKind::K => {
            let law = law_kn(&params, a.n)?;
            let mut table = Table::new(["k", "prob", "log_prob"]);
            for (k, p) in law.pmf() {
                table.push(vec![k.into(), p.into(), law.log_prob(k).into()]);
            }
            Ok(Output::Table(table))
        }
        LawKind::Multiplicities => {
            let law = law_multiplicities(&params, a.n)?;
            let mut columns = vec!["k".to_string()];
            columns.extend((1..=a.n).map(|l| format!("m_{l}")));
            columns.push("prob".into());
            let mut table = Table::new(columns);
            for (m, p) in law.atoms() {
                let k: u64 = m.iter().map(|&c| c as u64).sum();
                let mut row = vec![Cell::from(k)];
                row.extend(m.iter().map(|&c| Cell::from(c)));
                row.push((*p).into());
                table.push(row);
            }
            Ok(Output::Table(table))
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    /// Size of the observed sample.
    #[arg(long, value_parser = count)]
    pub n: u64,
    /// Distinct types in the observed sample.
    #[arg(long)]
    pub j: u64,
    /// Size of the additional sample.
    #[arg(long, value_parser = count)]
    pub m: u64,
    /// Highest moment order.
    #[arg(long)]
    pub r: u32,
    /// Block size; omit for the number of new types.
    #[arg(long)]
    pub l: Option<u64>,
}

fn moments(a: &MomentsArgs) -> CmdResult {
    let ctx = PosteriorContext::new(a.model.params()?, a.n, a.j)?;
    let stat = statistic(a.l)?;
    let shifted = ctx.shifted_params();
    let mut table = Table::new(["r", "factorial_moment", "posterior_moment"]);
    for r in 1..=a.r {
        let fm = match stat {
            Statistic::K => factorial_moment_kstar(&shifted, a.m, r)?,
            Statistic::M(l) => factorial_moment_mstar(&shifted, a.m, l, r)?,
        };
        let pm = posterior_moment(&ctx, a.m, stat, r)?;
        table.push(vec![r.into(), fm.into(), pm.into()]);
    }
    Ok(Output::Table(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MgfMethod {
    Series,
    Dp,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MgfArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, value_parser = count)]
    pub n: u64,
    /// Comma-separated values in (0, 1).
    #[arg(long)]
    pub y: String,
    /// Block size; omit for the number of blocks.
    #[arg(long)]
    pub l: Option<u64>,
    #[arg(long, value_enum, default_value = "series")]
    pub method: MgfMethod,
}

fn mgf(a: &MgfArgs) -> CmdResult {
    let params = ModelParams::new(a.alpha, a.theta)?;
    params.require_positive_alpha()?;
    let stat = statistic(a.l)?;
    let ys = parse_f64_list(&a.y)?;
    let mut table = Table::new(["n", "y", "log_mgf", "mgf", "method"]);
    for y in ys {
        if !(y > 0.0 && y < 1.0) {
            return Err(CliError::Validation(format!("y must lie in (0, 1), got {y}")).into());
        }
        let v = match a.method {
            MgfMethod::Series => {
                if a.theta != 0.0 {
                    return Err(CliError::Validation("series method requires theta = 0".into()).into());
                }
                match stat {
                    Statistic::K => mgf_kn_series(a.alpha, a.n, y)?,
                    Statistic::M(l) => mgf_mln_series(a.alpha, a.n, l, y)?,
                }
            }
            MgfMethod::Dp => {
                let t = -(-y).ln_1p();
                match stat {
                    Statistic::K => law_kn(&params, a.n)?.log_mgf(t),
                    Statistic::M(l) => {
                        let terms: Vec<f64> = law_multiplicities(&params, a.n)?
                            .marginal_m(l)
                            .iter()
                            .enumerate()
                            .map(|(v, p)| p.ln() + t * v as f64)
                            .collect();
                        log_sum_exp(&terms)
                    }
                }
            }
        };
        let method = match a.method {
            MgfMethod::Series => "series",
            MgfMethod::Dp => "dp",
        };
        table.push(vec![a.n.into(), y.into(), v.into(), v.exp().into(), method.into()]);
    }
    Ok(Output::Table(table))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PosteriorVerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    #[arg(long, value_parser = count)]
    pub n: u64,
    #[arg(long)]
    pub j: u64,
    #[arg(long, value_parser = count)]
    pub m: u64,
    #[arg(long, default_value_t = 4)]
    pub r: u32,
    #[arg(long)]
    pub l: Option<u64>,
    #[arg(long, default_value_t = 10_000, value_parser = reps_count)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
}

fn posterior_verify(a: &PosteriorVerifyArgs) -> CmdResult {
    let ctx = PosteriorContext::new(a.model.params()?, a.n, a.j)?;
    let stat = statistic(a.l)?;
    let report = verify_representation(&ctx, a.m, stat, a.r, a.reps, a.seed, VerifyOptions::default())?;
    let mut table = Table::new(["r", "closed_form", "oracle", "mc_mean", "mc_stderr", "oracle_flag", "mc_flag"]);
    for row in &report.rows {
        table.push(vec![
            row.r.into(),
            row.closed_form.into(),
            row.oracle.into(),
            row.mc_mean.into(),
            row.mc_stderr.into(),
            row.oracle_flag.into(),
            row.mc_flag.into(),
        ]);
    }
    let out = Output::Table(table);
    if report.flagged() {
        Err(Failure::Flagged(out, format!("posterior moments of {} disagree", statistic_name(stat))))
    } else {
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMethod {
    Series,
    Dp,
    Mc,
}

const DEFAULT_N_GRID: &str = "1000,10000,100000,1000000";
const DEFAULT_LAMBDA: &str = "0.5,1,2";

#[derive(Debug, Clone, Args, Serialize)]
pub struct MdpScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    /// Scale beta_n = c n^p (ln n)^q given as c,p,q.
    #[arg(long)]
    pub schedule: String,
    #[arg(long, default_value = DEFAULT_N_GRID)]
    pub n_grid: String,
    /// Comma-separated tilts.
    #[arg(long, default_value = DEFAULT_LAMBDA, allow_hyphen_values = true)]
    pub lambda: String,
    /// JSON file with `n_grid` and/or `lambda` arrays; overrides the flags.
    #[arg(long)]
    pub grid_file: Option<String>,
    #[arg(long, value_enum, default_value = "series")]
    pub method: ScanMethod,
    #[arg(long, default_value_t = 10_000, value_parser = reps_count)]
    pub reps: usize,
    /// Required with --method mc.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub l: Option<u64>,
    #[arg(long)]
    pub check_trend: bool,
}

fn resolve_grids(n_flag: &str, lambda_flag: &str, grid_file: &Option<String>) -> Result<(Vec<u64>, Vec<f64>), CliError> {
    let mut n_grid = parse_n_grid(n_flag)?;
    let mut lambdas = parse_f64_list(lambda_flag)?;
    if let Some(path) = grid_file {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let g = parse_grid_file(&text)?;
        if let Some(n) = g.n_grid {
            n_grid = n;
        }
        if let Some(l) = g.lambda {
            lambdas = l;
        }
    }
    Ok((n_grid, lambdas))
}

fn checked_schedule(text: &str, alpha: f64) -> Result<ScaleSchedule, CliError> {
    let schedule = parse_schedule(text)?;
    let verdict = validate_schedule(&schedule, alpha);
    if verdict.valid {
        Ok(schedule)
    } else {
        Err(CliError::Validation(format!("schedule rejected: {}", verdict.reason)))
    }
}

fn mdp_scan_cmd(a: &MdpScanArgs) -> CmdResult {
    let params = a.model.params()?;
    let schedule = checked_schedule(&a.schedule, a.model.alpha)?;
    let (n_grid, lambdas) = resolve_grids(&a.n_grid, &a.lambda, &a.grid_file)?;
    let stat = statistic(a.l)?;
    let method = match a.method {
        ScanMethod::Series => Method::Series,
        ScanMethod::Dp => Method::Dp,
        ScanMethod::Mc => {
            let seed = a
                .seed
                .ok_or_else(|| CliError::Validation("--seed is required with --method mc".into()))?;
            Method::MonteCarlo { reps: a.reps, seed }
        }
    };
    let scan = mdp_scan(&params, &schedule, &n_grid, &lambdas, stat, method)?;
    let mut table = Table::new(["n", "lambda", "beta_n", "scaled_logmgf", "method", "stderr"]);
    for e in &scan.entries {
        table.push(vec![
            e.n.into(),
            e.lambda.into(),
            e.beta_n.into(),
            e.scaled_logmgf.into(),
            e.method.into(),
            e.stderr.into(),
        ]);
    }
    let out = Output::Table(table);
    if a.check_trend {
        let failing: Vec<String> = scan
            .trend()?
            .iter()
            .filter(|t| !t.strictly_decreasing)
            .map(|t| t.lambda.to_string())
            .collect();
        if !failing.is_empty() {
            return Err(Failure::Flagged(
                out,
                format!("deviation from the limit does not decrease for lambda in {{{}}}", failing.join(", ")),
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PosteriorMdpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    #[arg(long, value_parser = count)]
    pub n: u64,
    #[arg(long)]
    pub j: u64,
    #[arg(long)]
    pub schedule: String,
    /// Sizes m of the additional sample.
    #[arg(long, default_value = "1000,10000,100000")]
    pub m_grid: String,
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
    pub lambda: String,
    #[arg(long, default_value_t = 10_000, value_parser = reps_count)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub l: Option<u64>,
}

fn posterior_mdp(a: &PosteriorMdpArgs) -> CmdResult {
    let ctx = PosteriorContext::new(a.model.params()?, a.n, a.j)?;
    let schedule = checked_schedule(&a.schedule, a.model.alpha)?;
    let m_grid = parse_n_grid(&a.m_grid)?;
    let lambdas = parse_f64_list(&a.lambda)?;
    let stat = statistic(a.l)?;
    let report = posterior_mdp_compare(&ctx, &schedule, &m_grid, &lambdas, stat, a.reps, a.seed)?;
    let mut table = Table::new(["m", "lambda", "posterior", "posterior_stderr", "prior", "prior_stderr", "separated"]);
    for r in &report.rows {
        table.push(vec![
            r.m.into(),
            r.lambda.into(),
            r.posterior.into(),
            r.posterior_stderr.into(),
            r.prior.into(),
            r.prior_stderr.into(),
            r.separated.into(),
        ]);
    }
    let out = Output::Table(table);
    if report.flagged() {
        Err(Failure::Flagged(out, "posterior and prior estimates separate".into()))
    } else {
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Mode {
    #[value(name = "K", alias = "k")]
    K,
    #[value(name = "M", alias = "m")]
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateWhat {
    /// Closed-form rate function.
    Rate,
    /// Numerical Legendre transform of the limiting log-MGF.
    Legendre,
    /// H_alpha and exp((H_alpha + ln x)/(1 - alpha)).
    Entropy,
    /// The alpha minimizing I_alpha(x); needs only --x.
    Critical,
    /// Alternative closed form for the multiplicity rate, for comparison.
    Displayed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, value_enum, default_value = "K")]
    pub mode: Mode,
    /// Block size for --mode M.
    #[arg(long)]
    pub l: Option<u64>,
    #[arg(long, value_enum, default_value = "rate")]
    pub what: RateWhat,
}

fn rate_cmd(a: &RateArgs) -> CmdResult {
    let scalar = |quantity: &str, value: f64| {
        let mut table = Table::new(["quantity", "value"]);
        table.push(vec![quantity.into(), value.into()]);
        Output::Scalar { table, value }
    };
    if a.what == RateWhat::Critical {
        return Ok(scalar("critical_alpha", critical_alpha(a.x)?));
    }
    let alpha = a
        .alpha
        .ok_or_else(|| CliError::Validation("--alpha is required".into()))?;
    let stat = match (a.mode, a.l) {
        (Mode::K, None) => Statistic::K,
        (Mode::K, Some(_)) => return Err(CliError::Validation("--l applies to --mode M only".into()).into()),
        (Mode::M, l) => statistic(Some(l.unwrap_or(1)))?,
    };
    match a.what {
        RateWhat::Rate => Ok(scalar("rate", rate(alpha, stat, a.x)?)),
        RateWhat::Legendre => Ok(scalar("legendre", legendre(alpha, stat, a.x, 1e-12)?)),
        RateWhat::Displayed => match stat {
            Statistic::M(l) => Ok(scalar("rate_displayed", rate_m_displayed(alpha, l, a.x)?)),
            Statistic::K => Err(CliError::Validation("--what displayed needs --mode M".into()).into()),
        },
        RateWhat::Entropy => {
            let (h, v) = entropy_form(alpha, a.x)?;
            let mut table = Table::new(["quantity", "value"]);
            table.push(vec!["entropy".into(), h.into()]);
            table.push(vec!["rate".into(), v.into()]);
            Ok(Output::Scalar { table, value: v })
        }
        RateWhat::Critical => unreachable!("handled above"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitsWhat {
    Ratio,
    Clt,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LimitsArgs {
    /// Required for --what ratio; --what clt fixes alpha = 0.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, value_parser = count)]
    pub n: u64,
    /// Largest block size for the ratio diagnostic.
    #[arg(long, default_value_t = 2)]
    pub l: u64,
    #[arg(long, default_value_t = 100, value_parser = reps_count)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "ratio")]
    pub what: LimitsWhat,
}

fn limits(a: &LimitsArgs) -> CmdResult {
    match a.what {
        LimitsWhat::Ratio => {
            let alpha = a
                .alpha
                .ok_or_else(|| CliError::Validation("--alpha is required for --what ratio".into()))?;
            let params = ModelParams::new(alpha, a.theta)?;
            let rep = limit_ratio_diagnostic(&params, a.n, a.l, a.reps, a.seed)?;
            let mut table = Table::new(["quantity", "l", "mean", "stderr", "reference"]);
            table.push(vec![
                "k_over_n_alpha".into(),
                Cell::Empty,
                rep.kn_scaled_mean.into(),
                rep.kn_scaled_stderr.into(),
                rep.kn_scaled_exact.into(),
            ]);
            for r in &rep.ratios {
                table.push(vec!["m_over_k".into(), r.l.into(), r.mean.into(), r.stderr.into(), r.target.into()]);
            }
            let out = Output::Table(table);
            if rep.anchor_flag {
                Err(Failure::Flagged(out, "K_n/n^alpha mean is off the exact anchor".into()))
            } else {
                Ok(out)
            }
        }
        LimitsWhat::Clt => {
            if a.alpha.is_some_and(|x| x != 0.0) {
                return Err(CliError::Validation("--what clt is defined at alpha = 0".into()).into());
            }
            let rep = clt_diagnostic(a.theta, a.n, a.reps, a.seed)?;
            let mut table = Table::new(["quantity", "empirical", "stderr", "exact"]);
            table.push(vec!["mean".into(), rep.mean.into(), rep.mean_stderr.into(), rep.exact_mean.into()]);
            table.push(vec!["variance".into(), rep.var.into(), rep.var_stderr.into(), rep.exact_var.into()]);
            table.push(vec!["standardized_mean".into(), rep.standardized_mean.into(), Cell::Empty, Cell::Empty]);
            table.push(vec!["standardized_variance".into(), rep.standardized_var.into(), Cell::Empty, Cell::Empty]);
            table.push(vec!["skewness".into(), rep.skewness.into(), Cell::Empty, rep.exact_skewness.into()]);
            let out = Output::Table(table);
            if rep.flagged() {
                Err(Failure::Flagged(out, "empirical moments are off the exact values".into()))
            } else {
                Ok(out)
            }
        }
    }
}
