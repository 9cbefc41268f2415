//! Subcommand bodies. Each returns an [`Artifact`] holding every rendering
//! of its result; `main` picks one and decides the exit status.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_8, PI};
use std::fmt;

use serde::Serialize;

use nosig_core::audit::{bohm_hiley_scenario, marginal_audit, shimony_scenario, AuditReport};
use nosig_core::bohm::{
    decompose, decompose_2d, quantum_potential, quantum_potential_2particle, write_field_2d_csv,
    write_field_csv, EdgeRule, SignConvention,
};
use nosig_core::epr::{
    chsh, chsh_exact, empirical_correlation, observed_distribution, qkd_sift_and_test,
    sample_trials, write_trials_csv, ChshAngles, DetectorSettings, EavesdropPolicy,
    DEFAULT_ALARM_THRESHOLD,
};
use nosig_core::evolution::{generator_locality_defect, verify_factorization};
use nosig_core::hamiltonian::{local_sum, PhysicalConstants};
use nosig_core::state::PointerGrid;
use nosig_core::tensor::{embed, Operator, SpaceSignature};

use crate::assemble::{
    line_grid, line_wave, operator, plane_grids, plane_wave_function, spin_grid, spin_state,
    Coupling,
};
use crate::config::{Config, HamiltonianSpec, StateSpec};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Command-line values that take precedence over the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub angles: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub time: Option<f64>,
    pub exact: bool,
    pub eavesdropper: Option<EavesdropPolicy>,
    pub sign: Option<SignConvention>,
}

pub struct Artifact {
    pub json: String,
    pub csv: String,
    /// Short human-readable form, used when no format was requested.
    pub text: Option<String>,
    /// Set when a verification subcommand's physics check failed.
    pub violation: Option<String>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialize result: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv_buffer(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("writers emit ASCII"))
}

/// Absent values become an empty field.
fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.12e}"))
}

fn seed(config: &Config, ov: &Overrides) -> u64 {
    ov.seed.unwrap_or(config.sampling.seed)
}

fn trials(config: &Config, ov: &Overrides) -> Result<usize> {
    let n = ov.n.unwrap_or(config.sampling.n);
    if n == 0 {
        return Err(CliError::Config("sampling.n must be at least 1".into()));
    }
    Ok(n)
}

fn eavesdropper(config: &Config, ov: &Overrides) -> Option<EavesdropPolicy> {
    ov.eavesdropper.or(config.scenario.eavesdropper)
}

fn angles<'a>(config: &'a Config, ov: &'a Overrides) -> Option<&'a [f64]> {
    ov.angles.as_deref().or(config.scenario.angles.as_deref())
}

fn chsh_angles(config: &Config, ov: &Overrides) -> Result<ChshAngles> {
    match angles(config, ov) {
        None => Ok(ChshAngles::standard()),
        Some(&[a, a_prime, b, b_prime]) => Ok(ChshAngles::new(a, a_prime, b, b_prime)),
        Some(v) => Err(CliError::Config(format!(
            "CHSH needs four angles a,a',b,b', got {}",
            v.len()
        ))),
    }
}

fn time(config: &Config, ov: &Overrides) -> Result<f64> {
    let t = ov.time.or(config.scenario.time).unwrap_or(1.0);
    if !t.is_finite() {
        return Err(CliError::Config(format!("time must be finite, got {t}")));
    }
    Ok(t)
}

#[derive(Serialize)]
struct CorrelationRow {
    theta_ab: f64,
    exact: f64,
    minus_cos: f64,
    sampled: Option<f64>,
    std_error: Option<f64>,
}

#[derive(Serialize)]
struct CorrelationTable {
    eavesdropper: Option<EavesdropPolicy>,
    n_per_angle: Option<usize>,
    seed: Option<u64>,
    max_exact_deviation: f64,
    rows: Vec<CorrelationRow>,
}

pub const CORRELATION_CSV_HEADER: &str = "theta_ab,exact,minus_cos,sampled,std_error";

/// Sweep `θ_AB` and tabulate `E` against `−cos θ_AB`.
pub fn epr_correlate(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let thetas: Vec<f64> = match angles(config, ov) {
        Some([]) => return Err(CliError::Config("empty angle list".into())),
        Some(v) => v.to_vec(),
        None => {
            let points = config.scenario.sweep_points.unwrap_or(73);
            if points < 2 {
                return Err(CliError::Config("sweep_points must be at least 2".into()));
            }
            (0..points)
                .map(|k| 2.0 * PI * k as f64 / (points - 1) as f64)
                .collect()
        }
    };
    let schedule = thetas
        .iter()
        .map(|&t| DetectorSettings::new(t, 0.0))
        .collect::<nosig_core::Result<Vec<_>>>()?;
    let eve = eavesdropper(config, ov);
    let sampled: Option<Vec<f64>> = if ov.exact {
        None
    } else {
        let n = trials(config, ov)?;
        let records = sample_trials(&schedule, n, seed(config, ov), eve.as_ref())?;
        Some(records.chunks(n).map(empirical_correlation).collect())
    };
    let n = if ov.exact {
        None
    } else {
        Some(trials(config, ov)?)
    };
    let rows: Vec<CorrelationRow> = schedule
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let e = sampled.as_ref().map(|v| v[k]);
            CorrelationRow {
                theta_ab: s.relative(),
                exact: observed_distribution(s, eve.as_ref()).correlation(),
                minus_cos: -s.relative().cos(),
                sampled: e,
                std_error: e
                    .zip(n)
                    .map(|(e, n)| ((1.0 - e * e).max(0.0) / n as f64).sqrt()),
            }
        })
        .collect();
    let max_exact_deviation = rows
        .iter()
        .map(|r| (r.exact - r.minus_cos).abs())
        .fold(0.0, f64::max);
    let violation =
        (eve.is_none() && max_exact_deviation > config.tolerances.correlation).then(|| {
            format!(
                "exact correlation deviates from -cos by {max_exact_deviation:e} (tolerance {:e})",
                config.tolerances.correlation
            )
        });
    let mut csv = format!("{CORRELATION_CSV_HEADER}\n");
    for r in &rows {
        csv += &format!(
            "{:.9},{},{},{},{}\n",
            r.theta_ab,
            num(Some(r.exact)),
            num(Some(r.minus_cos)),
            num(r.sampled),
            num(r.std_error)
        );
    }
    let table = CorrelationTable {
        eavesdropper: eve,
        n_per_angle: n,
        seed: n.map(|_| seed(config, ov)),
        max_exact_deviation,
        rows,
    };
    Ok(Artifact {
        json: to_json(&table)?,
        csv,
        text: None,
        violation,
    })
}

#[derive(Serialize)]
struct ChshResult {
    angles: ChshAngles,
    eavesdropper: Option<EavesdropPolicy>,
    exact: f64,
    sampled: Option<f64>,
    n_per_pair: Option<usize>,
    seed: Option<u64>,
}

pub const CHSH_CSV_HEADER: &str = "a,a_prime,b,b_prime,exact,sampled";

pub fn chsh_command(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let angles = chsh_angles(config, ov)?;
    for a in [angles.a, angles.a_prime, angles.b, angles.b_prime] {
        if !a.is_finite() {
            return Err(CliError::Config(format!("angle {a} is not finite")));
        }
    }
    let eve = eavesdropper(config, ov);
    let exact = chsh_exact(&angles, eve.as_ref());
    let (sampled, n) = if ov.exact {
        (None, None)
    } else {
        let n = trials(config, ov)?;
        let records = sample_trials(&angles.pairs(), n, seed(config, ov), eve.as_ref())?;
        (Some(chsh(&records, &angles)?), Some(n))
    };
    let mut text = format!("S = {exact:.9}\n");
    if let (Some(s), Some(n)) = (sampled, n) {
        text += &format!("S (sampled, n = {n} per pair) = {s:.6}\n");
    }
    let csv = format!(
        "{CHSH_CSV_HEADER}\n{:.9},{:.9},{:.9},{:.9},{},{}\n",
        angles.a,
        angles.a_prime,
        angles.b,
        angles.b_prime,
        num(Some(exact)),
        num(sampled)
    );
    let result = ChshResult {
        angles,
        eavesdropper: eve,
        exact,
        sampled,
        n_per_pair: n,
        seed: n.map(|_| seed(config, ov)),
    };
    Ok(Artifact {
        json: to_json(&result)?,
        csv,
        text: Some(text),
        violation: None,
    })
}

#[derive(Serialize)]
struct QkdSummary {
    key_settings: DetectorSettings,
    test_angles: ChshAngles,
    eavesdropper: Option<EavesdropPolicy>,
    n_per_setting: usize,
    seed: u64,
    alarm_threshold: f64,
    s_estimate: f64,
    alarm: bool,
    key_length: usize,
    key_error_rate: f64,
    keys_match: bool,
}

pub fn qkd(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let [ka, kb] = config.scenario.key_settings.unwrap_or([0.0, 0.0]);
    let key = DetectorSettings::new(ka, kb)?;
    let test = chsh_angles(config, ov)?;
    let eve = eavesdropper(config, ov);
    let n = trials(config, ov)?;
    let seed = seed(config, ov);
    let threshold = config
        .scenario
        .alarm_threshold
        .unwrap_or(DEFAULT_ALARM_THRESHOLD);
    let mut schedule = vec![key];
    schedule.extend(test.pairs());
    let records = sample_trials(&schedule, n, seed, eve.as_ref())?;
    let out = qkd_sift_and_test(&records, &key, &test, threshold)?;
    let summary = QkdSummary {
        key_settings: key,
        test_angles: test,
        eavesdropper: eve,
        n_per_setting: n,
        seed,
        alarm_threshold: threshold,
        s_estimate: out.s_estimate,
        alarm: out.alarm,
        key_length: out.key_a.len(),
        key_error_rate: out.key_error_rate(),
        keys_match: out.keys_match(),
    };
    Ok(Artifact {
        json: to_json(&summary)?,
        csv: csv_buffer(|b| write_trials_csv(&records, b))?,
        text: None,
        violation: None,
    })
}

pub const AUDIT_CSV_HEADER: &str = "setting,expectation,trace_distance_to_first";

fn audit_artifact(report: AuditReport, verify: bool) -> Result<Artifact> {
    let mut csv = format!("{AUDIT_CSV_HEADER}\n");
    for (k, setting) in report.settings.iter().enumerate() {
        let dist = nosig_core::tensor::trace_distance(
            &report.remote_marginals[0],
            &report.remote_marginals[k],
        )?;
        csv += &format!(
            "\"{}\",{},{}\n",
            setting.replace('"', "\"\""),
            num(report.expectations.get(k).copied()),
            num(Some(dist))
        );
    }
    let violation = (verify && !report.is_invariant()).then(|| {
        format!(
            "{} audit varies: expectation delta {:e}, trace distance {:e} (tolerance {:e})",
            report.scenario,
            report.max_expectation_delta,
            report.max_trace_distance,
            report.tolerance
        )
    });
    Ok(Artifact {
        json: to_json(&report)?,
        csv,
        text: None,
        violation,
    })
}

pub fn bohm_hiley(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let s = &config.scenario;
    let (alpha, alpha_prime, beta) = match ov.angles.as_deref() {
        Some(&[a, ap, b]) => (a, ap, b),
        Some(v) => {
            return Err(CliError::Config(format!(
                "bohm-hiley takes three angles alpha,alpha',beta, got {}",
                v.len()
            )))
        }
        None => (
            s.alpha.unwrap_or(0.0),
            s.alpha_prime.unwrap_or(FRAC_PI_3),
            s.beta.unwrap_or(0.0),
        ),
    };
    let grid = spin_grid(config)?;
    let report = bohm_hiley_scenario(alpha, alpha_prime, beta, &grid)?
        .with_tolerance(config.tolerances.audit);
    audit_artifact(report, true)
}

/// Default document for `nosignal shimony` when no `--config` is given.
pub const SHIMONY_DEFAULT: &str = include_str!("../configs/shimony.json");

pub fn shimony(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let Some(HamiltonianSpec::LocalSum { h_a, h_db }) = &config.hamiltonian else {
        return Err(CliError::Config(
            "shimony needs a `local_sum` hamiltonian".into(),
        ));
    };
    if h_db.is_empty() {
        return Err(CliError::Config(
            "h_db must list at least one remote Hamiltonian".into(),
        ));
    }
    let h_a = operator(h_a)?;
    let remote: Vec<Operator> = h_db.iter().map(operator).collect::<Result<_>>()?;
    let g = match &config.scenario.observable {
        Some(spec) => operator(spec)?,
        None => {
            return Err(CliError::Config(
                "shimony needs `scenario.observable` on A".into(),
            ))
        }
    };
    let mut remote_sig: Option<SpaceSignature> = None;
    for op in &remote {
        for sub in op.signature().subsystems() {
            let single = SpaceSignature::single(sub.label.as_str(), sub.dim)?;
            remote_sig = Some(match remote_sig {
                None => single,
                Some(s) if s.contains(&sub.label) => s,
                Some(s) => s.concat(&single)?,
            });
        }
    }
    let full = remote_sig.expect("nonempty").concat(h_a.signature())?;
    let state = config
        .state
        .as_ref()
        .ok_or_else(|| CliError::Config("shimony needs a `state`".into()))?;
    let psi0 = spin_state(state, &spin_grid(config)?, Some(&full))?;
    let report = shimony_scenario(&h_a, &remote, &psi0, &g, time(config, ov)?)?
        .with_tolerance(config.tolerances.audit);
    audit_artifact(report, true)
}

struct Lambda(f64);

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lambda = {}", self.0)
    }
}

fn default_symmetrized() -> HamiltonianSpec {
    crate::config::Config::parse(
        r#"{"hamiltonian": {"type": "symmetrized", "lambda": 1.0,
            "o_a": {"pauli": "z", "on": "A"}, "o_b": {"pauli": "z", "on": "B"}}}"#,
        "built-in",
    )
    .expect("valid literal")
    .hamiltonian
    .expect("present")
}

/// Remote marginal across a λ scan of a pointer coupling.
pub fn audit(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let spec = config
        .hamiltonian
        .clone()
        .unwrap_or_else(default_symmetrized);
    let grid = spin_grid(config)?;
    let state_spec = config
        .state
        .clone()
        .unwrap_or(StateSpec::AuditProbe { chi: FRAC_PI_8 });
    let (coupling, psi0) = match state_spec {
        StateSpec::Random { .. } => {
            let c = Coupling::new(&spec, grid, None)?;
            let psi = spin_state(&state_spec, &grid, Some(c.signature()))?;
            (c, psi)
        }
        _ => {
            let psi = spin_state(&state_spec, &grid, None)?;
            (Coupling::new(&spec, grid, Some(psi.signature()))?, psi)
        }
    };
    let lambdas: Vec<Lambda> = ov
        .lambda
        .clone()
        .or_else(|| config.scenario.lambdas.clone())
        .unwrap_or_else(|| vec![0.0, coupling.lambda()])
        .into_iter()
        .map(Lambda)
        .collect();
    if lambdas.is_empty() {
        return Err(CliError::Config("empty lambda list".into()));
    }
    let remote = config.scenario.remote.clone().unwrap_or_else(|| "A".into());
    let probe = config
        .scenario
        .observable
        .as_ref()
        .map(operator)
        .transpose()?;
    if let Some(p) = &probe {
        // validates that the probe lives on the remote subsystem
        let remote_only =
            SpaceSignature::single(remote.as_str(), psi0.signature().dim_of(&remote)?)?;
        embed(p, &remote_only, &remote)?;
    }
    let report = marginal_audit(
        |l: &Lambda| coupling.build(l.0),
        &psi0,
        &remote,
        &lambdas,
        time(config, ov)?,
        probe.as_ref(),
    )?
    .with_tolerance(config.tolerances.audit);
    audit_artifact(report, false)
}

#[derive(Serialize)]
struct FactorizeReport {
    hamiltonian: &'static str,
    partition_a: Vec<String>,
    partition_b: Vec<String>,
    time: f64,
    frobenius_norm: f64,
    locality_defect: f64,
    relative_defect: f64,
    factorization_residual: Option<f64>,
    tolerance: f64,
}

pub const FACTORIZE_CSV_HEADER: &str =
    "hamiltonian,time,frobenius_norm,locality_defect,relative_defect,factorization_residual";

/// Locality defect of a generator, plus the product-exponential residual
/// for local sums.
pub fn factorize(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let spec = config
        .hamiltonian
        .as_ref()
        .ok_or_else(|| CliError::Config("factorize needs a `hamiltonian`".into()))?;
    let t = time(config, ov)?;
    let (h, default_a, residual) = match spec {
        HamiltonianSpec::LocalSum { h_a, h_db } => {
            let h_a = operator(h_a)?;
            let first = h_db
                .first()
                .ok_or_else(|| CliError::Config("h_db must list at least one operator".into()))?;
            let mut worst: f64 = 0.0;
            for spec in h_db {
                worst = worst.max(verify_factorization(&h_a, &operator(spec)?, t)?);
            }
            let h_b = operator(first)?;
            let full = h_a.signature().concat(h_b.signature())?;
            let labels = h_a
                .signature()
                .labels()
                .iter()
                .map(|l| l.to_string())
                .collect();
            (local_sum(&h_a, &h_b, &full)?, labels, Some(worst))
        }
        HamiltonianSpec::VonNeumann { .. } | HamiltonianSpec::Symmetrized { .. } => {
            let c = Coupling::new(spec, spin_grid(config)?, None)?;
            let lambda = ov
                .lambda
                .as_ref()
                .and_then(|v| v.first().copied())
                .unwrap_or(c.lambda());
            (c.build(lambda)?, c.first_labels(), None)
        }
        HamiltonianSpec::Bohm1d { .. } => {
            return Err(CliError::Config(
                "bohm_1d acts on one coordinate and has no bipartition".into(),
            ))
        }
    };
    let (part_a, part_b) = match &config.scenario.partition {
        Some(p) => (p.a.clone(), p.b.clone()),
        None => {
            let rest = h
                .signature()
                .labels()
                .iter()
                .filter(|l| !default_a.iter().any(|a| a == *l))
                .map(|l| l.to_string())
                .collect();
            (default_a, rest)
        }
    };
    let side_a: Vec<&str> = part_a.iter().map(String::as_str).collect();
    let side_b: Vec<&str> = part_b.iter().map(String::as_str).collect();
    let dec = generator_locality_defect(&h, &side_a, &side_b)?;
    let norm = h.frobenius_norm();
    let tol = config.tolerances.factorization;
    let report = FactorizeReport {
        hamiltonian: spec.kind(),
        partition_a: part_a,
        partition_b: part_b,
        time: t,
        frobenius_norm: norm,
        locality_defect: dec.defect,
        relative_defect: if norm > 0.0 { dec.defect / norm } else { 0.0 },
        factorization_residual: residual,
        tolerance: tol,
    };
    let violation = residual
        .filter(|r| *r > tol)
        .map(|r| format!("factorization residual {r:e} exceeds tolerance {tol:e}"));
    let csv = format!(
        "{FACTORIZE_CSV_HEADER}\n{},{},{},{},{},{}\n",
        report.hamiltonian,
        num(Some(t)),
        num(Some(norm)),
        num(Some(report.locality_defect)),
        num(Some(report.relative_defect)),
        num(residual)
    );
    Ok(Artifact {
        json: to_json(&report)?,
        csv,
        text: None,
        violation,
    })
}

#[derive(Serialize)]
struct LineFieldReport {
    sign: SignConvention,
    edge: EdgeRule,
    constants: PhysicalConstants,
    grid: PointerGrid,
    masked_points: usize,
    x: Vec<f64>,
    r: Vec<f64>,
    s: Vec<Option<f64>>,
    q: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct PlaneFieldReport {
    sign: SignConvention,
    edge: EdgeRule,
    constants: PhysicalConstants,
    grid_x1: PointerGrid,
    grid_x2: PointerGrid,
    masked_points: usize,
    additivity_defect: f64,
    q_total_min: Option<f64>,
    q_total_max: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Quantum potential of a 1D wavefunction, or the two-particle comparison
/// for a 2D one.
pub fn qpotential(config: &Config, ov: &Overrides) -> Result<Artifact> {
    let s = &config.scenario;
    let consts = match s.constants {
        Some(c) => PhysicalConstants::new(c.hbar, c.mass)?,
        None => PhysicalConstants::default(),
    };
    let sign = ov.sign.or(s.sign).unwrap_or_default();
    let edge = s.edge.unwrap_or_default();
    let state = config.state.clone().unwrap_or(StateSpec::Gaussian {
        center: 0.0,
        width: 1.0,
        momentum: 0.0,
    });
    if let StateSpec::GaussianPair { .. } = state {
        let (g1, g2) = plane_grids(config);
        let psi = plane_wave_function(&state, &g1, &g2)?;
        let pot = quantum_potential_2particle(&psi, &g1, &g2, &consts, sign, edge)?;
        let field = decompose_2d(&psi, &g1, &g2, &consts)?;
        let live: Vec<f64> = pot.total.unmasked().map(|(_, q)| q).collect();
        let report = PlaneFieldReport {
            sign,
            edge,
            constants: consts,
            grid_x1: g1,
            grid_x2: g2,
            masked_points: pot.total.masked.iter().filter(|&&m| m).count(),
            additivity_defect: pot.additivity_defect,
            q_total_min: live.iter().copied().reduce(f64::min),
            q_total_max: live.iter().copied().reduce(f64::max),
        };
        return Ok(Artifact {
            json: to_json(&report)?,
            csv: csv_buffer(|b| write_field_2d_csv(&field, &pot, b))?,
            text: None,
            violation: None,
        });
    }
    let grid = line_grid(config, PointerGrid::centered(256, 0.05)?)?;
    let psi = line_wave(&state, &grid, config.hamiltonian.as_ref(), &consts)?;
    let field = decompose(&psi, &grid, &consts)?;
    let q = quantum_potential(&field, &consts, sign, edge)?;
    let report = LineFieldReport {
        sign,
        edge,
        constants: consts,
        grid,
        masked_points: q.masked.iter().filter(|&&m| m).count(),
        x: grid.coords(),
        r: field.amplitude().to_vec(),
        s: field
            .action()
            .expect("1D field")
            .iter()
            .copied()
            .map(finite)
            .collect(),
        q: q.values.iter().copied().map(finite).collect(),
    };
    Ok(Artifact {
        json: to_json(&report)?,
        csv: csv_buffer(|b| write_field_csv(&field, &q, b))?,
        text: None,
        violation: None,
    })
}
