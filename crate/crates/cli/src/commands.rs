use std::path::Path;
use std::time::Instant;

use oneshot_core::coding::{best_permutation_search, theorem4_bound, CodingBound, MessageEnsemble, SearchMode};
use oneshot_core::dequantizer::{dequantize_report, DequantizeMode, DequantizeReport};
use oneshot_core::entropy::{self, BoundDirection, Cut, EntropyCertificate};
use oneshot_core::json::{ChannelJson, DistributionJson, EnsembleJson, OperatorJson, StateJson};
use oneshot_core::types::hsw_rate_curve;
use oneshot_core::verify::{run_all, CheckOutcome, VerifyConfig};
use oneshot_core::{Error, Operator};
use serde::{Deserialize, Serialize};

use crate::report::{emit, g12, parse_input, CliError, Report};

/// Slack allowed on every reported margin.
pub const MARGIN_TOL: f64 = 1e-8;

#[derive(Clone, Copy)]
pub enum LhsChoice {
    Exhaustive,
    MonteCarlo { samples: usize, seed: u64 },
}

pub fn parse_subsystems(items: &[String]) -> Result<Vec<usize>, CliError> {
    items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Core(Error::Format(format!("bad subsystem index {s:?}")))))
        .collect()
}

#[derive(Serialize)]
struct DequantizeParams {
    mode: &'static str,
    samples: Option<usize>,
    seed: Option<u64>,
    eps: f64,
    eps_prime: f64,
}

#[derive(Serialize)]
struct DequantizeResult {
    /// `exact` for enumeration, `estimate` for Monte Carlo.
    lhs_kind: &'static str,
    /// The right-hand side is built from certified entropy lower bounds.
    rhs_direction: BoundDirection,
    margin_tolerance: f64,
    holds: bool,
    #[serde(flatten)]
    report: DequantizeReport,
}

pub fn dequantize(
    channel: &Path,
    state: &Path,
    mode: LhsChoice,
    eps: f64,
    eps_prime: f64,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    let (ch, ch_in) = parse_input::<ChannelJson>(channel)?;
    let (st, st_in) = parse_input::<StateJson>(state)?;
    let tbar = ch.to_channel()?;
    let rho = st.to_state()?;
    let (core_mode, params) = match mode {
        LhsChoice::Exhaustive => (
            DequantizeMode::Exhaustive,
            DequantizeParams { mode: "exhaustive", samples: None, seed: None, eps, eps_prime },
        ),
        LhsChoice::MonteCarlo { samples, seed } => (
            DequantizeMode::MonteCarlo { seed, samples },
            DequantizeParams { mode: "mc", samples: Some(samples), seed: Some(seed), eps, eps_prime },
        ),
    };
    let report = dequantize_report(&tbar, &rho, core_mode, eps, eps_prime)?;
    let holds = report.margin >= -MARGIN_TOL;
    let result = DequantizeResult {
        lhs_kind: if matches!(mode, LhsChoice::Exhaustive) { "exact" } else { "estimate" },
        rhs_direction: BoundDirection::Upper,
        margin_tolerance: MARGIN_TOL,
        holds,
        report,
    };
    emit(out, &Report::new("dequantize", vec![ch_in, st_in], params, result).to_json()?)?;
    Ok(true)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StateInput {
    Density(OperatorJson),
    Pure(StateJson),
}

#[derive(Serialize)]
struct EntropyParams {
    kind: &'static str,
    a: Vec<usize>,
    b: Vec<usize>,
    eps: f64,
}

pub fn entropy(
    state: &Path,
    hmax: bool,
    a: Vec<usize>,
    b: Vec<usize>,
    eps: f64,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    let (input, st_in) = parse_input::<StateInput>(state)?;
    let rho: Operator = match input {
        StateInput::Density(op) => op.to_operator()?,
        StateInput::Pure(st) => st.to_state()?.density(),
    };
    let cut = Cut::new(a.clone(), b.clone());
    let cert: EntropyCertificate = if hmax {
        entropy::hmax_smooth(&rho, &cut, eps)?
    } else {
        entropy::hmin_smooth_structured(&rho, &cut, eps)?
    };
    let params = EntropyParams { kind: if hmax { "hmax" } else { "hmin" }, a, b, eps };
    emit(out, &Report::new("entropy", vec![st_in], params, cert).to_json()?)?;
    Ok(true)
}

#[derive(Serialize)]
struct CodeParams {
    messages: usize,
    dist: String,
    search: SearchMode,
    eps: f64,
}

#[derive(Serialize)]
struct CodeResult {
    p_e: f64,
    mean_p_e: f64,
    examined: usize,
    permutation: Vec<usize>,
    cycle_notation: String,
    decoder_env_dim: Option<usize>,
    decoder_overlap: Option<f64>,
    /// `bound - 2 p_e`.
    margin: f64,
    margin_tolerance: f64,
    bound_direction: BoundDirection,
    bound: CodingBound,
}

pub fn code_sim(
    channel: &Path,
    messages: usize,
    dist: &str,
    search: SearchMode,
    eps: f64,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    let (ch, ch_in) = parse_input::<ChannelJson>(channel)?;
    let mut inputs = vec![ch_in];
    let ens = if dist == "uniform" {
        MessageEnsemble::uniform(messages)?
    } else {
        let (d, d_in) = parse_input::<DistributionJson>(Path::new(dist))?;
        inputs.push(d_in);
        let ens = d.to_messages()?;
        if ens.len() != messages {
            return Err(CliError::Core(Error::Dimension(format!(
                "--messages {messages} but the distribution has {} weights",
                ens.len()
            ))));
        }
        ens
    };
    let t = ch.to_channel()?;
    let found = best_permutation_search(&t, &ens, search)?;
    let bound = theorem4_bound(&t, &ens, eps)?;
    let direction = match bound.hmax_channel.bound_direction {
        BoundDirection::Exact | BoundDirection::Upper => BoundDirection::Upper,
        BoundDirection::Lower => BoundDirection::Lower,
    };
    let decoder = found.code.decoder.as_ref();
    let result = CodeResult {
        p_e: found.p_e,
        mean_p_e: found.mean_p_e,
        examined: found.examined,
        permutation: found.code.permutation.images().to_vec(),
        cycle_notation: found.code.permutation.cycle_notation(),
        decoder_env_dim: decoder.map(|d| d.env_dim),
        decoder_overlap: decoder.map(|d| d.overlap),
        margin: bound.value - 2.0 * found.p_e,
        margin_tolerance: MARGIN_TOL,
        bound_direction: direction,
        bound,
    };
    let params = CodeParams { messages, dist: dist.to_string(), search, eps };
    emit(out, &Report::new("code-sim", inputs, params, result).to_json()?)?;
    Ok(true)
}

pub const CSV_HEADER: &str = "n,log_type_class,hmax_term,projector_mass_term,rate_bits_per_use,holevo_reference";

pub fn hsw_rate(ensemble: &Path, n_max: usize, eps: f64, p_e: f64, out: Option<&Path>) -> Result<bool, CliError> {
    if n_max == 0 {
        return Err(CliError::Core(Error::Dimension("--n-max must be at least 1".into())));
    }
    let (ens, _) = parse_input::<EnsembleJson>(ensemble)?;
    let curve = hsw_rate_curve(&ens.to_ensemble()?, n_max, eps, p_e)?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for p in &curve {
        let row = [p.log_type_class, p.hmax_term, p.projector_mass_term, p.rate_bits_per_use, p.holevo_reference];
        let cells: Vec<String> = row.iter().map(|&v| g12(v)).collect();
        csv.push_str(&format!("{},{}\n", p.n, cells.join(",")));
    }
    emit(out, &csv)?;
    Ok(true)
}

#[derive(Serialize)]
struct VerifyParams {
    scale: &'static str,
    seed: u64,
}

#[derive(Serialize)]
struct VerifyResult {
    passed: bool,
    checks: Vec<CheckOutcome>,
}

pub fn verify_all(quick: bool, seed: u64, out: Option<&Path>) -> Result<bool, CliError> {
    let cfg = if quick { VerifyConfig::quick(seed) } else { VerifyConfig::full(seed) };
    let start = Instant::now();
    let checks = run_all(&cfg);
    let passed = checks.iter().all(|c| c.passed);
    let mut lines = String::new();
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        lines.push_str(&format!(
            "criterion {}: {verdict} {} (instances {}, worst {}, tolerance {})",
            c.id,
            c.name,
            c.instances,
            g12(c.worst),
            g12(c.tolerance)
        ));
        if !c.detail.is_empty() {
            lines.push_str(&format!(" {}", c.detail));
        }
        lines.push('\n');
    }
    eprintln!("verify-all finished in {:.1} s", start.elapsed().as_secs_f64());
    let params = VerifyParams { scale: if quick { "quick" } else { "full" }, seed };
    let report = Report::new("verify-all", Vec::new(), params, VerifyResult { passed, checks }).to_json()?;
    match out {
        Some(_) => {
            emit(None, &lines)?;
            emit(out, &report)?;
        }
        None => emit(None, &format!("{lines}{report}"))?,
    }
    Ok(passed)
}
