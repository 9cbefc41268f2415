//! Singlet detector statistics: Born-rule joint tables, seeded trial
//! sampling, CHSH estimates, intercept-resend eavesdropping and
//! sift-and-test key distribution.
//!
//! Outcomes are encoded as `+1` (spin up along the detector axis) and `−1`.
//! The eavesdropper intercepts the particle travelling to detector B.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::state::{spin_observable, spin_pair, SPIN_A, SPIN_B};
use crate::tensor::{kron, Ket, SpaceSignature};

/// Quadrature points used to average over a uniformly random Eve basis.
pub const EVE_QUADRATURE_POINTS: usize = 512;
/// Minimum records per CHSH setting pair accepted by [`qkd_sift_and_test`].
pub const MIN_TEST_ROUNDS: usize = 100;
/// Angles closer than this are treated as the same setting.
const ANGLE_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSettings {
    pub theta_a: f64,
    pub theta_b: f64,
}

impl DetectorSettings {
    pub fn new(theta_a: f64, theta_b: f64) -> Result<Self> {
        if !(theta_a.is_finite() && theta_b.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "detector angles must be finite, got ({theta_a}, {theta_b})"
            )));
        }
        Ok(Self { theta_a, theta_b })
    }

    /// `θ_AB = θ_A − θ_B`.
    pub fn relative(&self) -> f64 {
        self.theta_a - self.theta_b
    }

    fn matches(&self, other: &DetectorSettings) -> bool {
        (self.theta_a - other.theta_a).abs() < ANGLE_MATCH_TOL
            && (self.theta_b - other.theta_b).abs() < ANGLE_MATCH_TOL
    }
}

fn outcome_index(o: i8) -> usize {
    if o > 0 {
        0
    } else {
        1
    }
}

const OUTCOMES: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Probability table over `{±1} × {±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointDistribution {
    /// `probs[i][j]` with index 0 ↔ `+1`, 1 ↔ `−1`.
    probs: [[f64; 2]; 2],
}

impl JointDistribution {
    fn from_fn(f: impl Fn(i8, i8) -> f64) -> Self {
        let mut probs = [[0.0; 2]; 2];
        for (a, b) in OUTCOMES {
            probs[outcome_index(a)][outcome_index(b)] = f(a, b);
        }
        Self { probs }
    }

    pub fn prob(&self, a: i8, b: i8) -> f64 {
        self.probs[outcome_index(a)][outcome_index(b)]
    }

    /// `E = Σ a·b·P(a, b)`.
    pub fn correlation(&self) -> f64 {
        OUTCOMES
            .iter()
            .map(|&(a, b)| f64::from(a * b) * self.prob(a, b))
            .sum()
    }

    pub fn marginal_a(&self, a: i8) -> f64 {
        self.prob(a, 1) + self.prob(a, -1)
    }

    pub fn marginal_b(&self, b: i8) -> f64 {
        self.prob(1, b) + self.prob(-1, b)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }

    /// Nonnegative entries summing to one within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.probs.iter().flatten().all(|&p| p >= -tol) && (self.total() - 1.0).abs() <= tol
    }

    /// Outcome pair at cumulative probability `u ∈ [0, 1)`.
    fn invert(&self, u: f64) -> (i8, i8) {
        let mut acc = 0.0;
        for (a, b) in OUTCOMES {
            acc += self.prob(a, b);
            if u < acc {
                return (a, b);
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        OUTCOMES
            .iter()
            .rev()
            .copied()
            .find(|&(a, b)| self.prob(a, b) > 0.0)
            .unwrap_or((-1, -1))
    }
}

/// Singlet Born probabilities `P(a, b) = ¼(1 − a·b·cos θ_AB)`.
pub fn joint_distribution(settings: &DetectorSettings) -> JointDistribution {
    let c = settings.relative().cos();
    JointDistribution::from_fn(|a, b| 0.25 * (1.0 - f64::from(a * b) * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisRule {
    /// Eve always measures along this angle.
    Fixed(f64),
    /// Eve's angle is uniform on `[0, 2π)`.
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EavesdropPolicy {
    /// Measure B's particle along Eve's axis and forward the eigenstate found.
    InterceptResend(BasisRule),
}

pub fn eavesdrop_policy(basis_rule: BasisRule) -> EavesdropPolicy {
    EavesdropPolicy::InterceptResend(basis_rule)
}

/// Sequential Born factors for a single Eve angle:
/// `P′(a, b) = Σ_e P_singlet(a, e; θ_A, θ_E) · P(b | e; θ_E, θ_B)`.
fn intercept_at(settings: &DetectorSettings, theta_e: f64) -> [[f64; 2]; 2] {
    let to_eve = joint_distribution(&DetectorSettings {
        theta_a: settings.theta_a,
        theta_b: theta_e,
    });
    let resend = (settings.theta_b - theta_e).cos();
    let mut p = [[0.0; 2]; 2];
    for (a, b) in OUTCOMES {
        p[outcome_index(a)][outcome_index(b)] = [1i8, -1]
            .iter()
            .map(|&e| to_eve.prob(a, e) * 0.5 * (1.0 + f64::from(b * e) * resend))
            .sum();
    }
    p
}

impl EavesdropPolicy {
    /// Joint table seen by A and B once Eve has acted.
    pub fn transform(&self, settings: &DetectorSettings) -> JointDistribution {
        let EavesdropPolicy::InterceptResend(rule) = self;
        let probs = match *rule {
            BasisRule::Fixed(theta_e) => intercept_at(settings, theta_e),
            BasisRule::UniformRandom => {
                let n = EVE_QUADRATURE_POINTS;
                let mut acc = [[0.0; 2]; 2];
                for k in 0..n {
                    let theta_e = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    let p = intercept_at(settings, theta_e);
                    for i in 0..2 {
                        for j in 0..2 {
                            acc[i][j] += p[i][j] / n as f64;
                        }
                    }
                }
                acc
            }
        };
        JointDistribution { probs }
    }
}

/// Distribution for `settings` with an optional eavesdropper in the line.
pub fn observed_distribution(
    settings: &DetectorSettings,
    eavesdropper: Option<&EavesdropPolicy>,
) -> JointDistribution {
    match eavesdropper {
        Some(policy) => policy.transform(settings),
        None => joint_distribution(settings),
    }
}

/// `⟨σ_θA ⊗ σ_θB⟩` evaluated on the two-spin singlet through operator algebra.
pub fn state_level_correlation(settings: &DetectorSettings) -> Result<f64> {
    let sig = SpaceSignature::new([(SPIN_A, 2), (SPIN_B, 2)])?;
    let singlet = Ket::from_slice(&spin_pair(0.0, 0.0), sig)?;
    let obs = kron(&[
        &spin_observable(settings.theta_a, SPIN_A),
        &spin_observable(settings.theta_b, SPIN_B),
    ])?;
    Ok(obs.expectation(&singlet)?.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub settings: DetectorSettings,
    pub outcome_a: i8,
    pub outcome_b: i8,
    pub eavesdropped: bool,
    pub seed_index: u64,
}

/// Uniform draw in `[0, 1)` for trial `index`; the stream depends only on
/// `(seed, index)`.
pub fn trial_uniform(seed: u64, index: u64) -> f64 {
    draw(&ChaCha8Rng::seed_from_u64(seed), index)
}

fn draw(base: &ChaCha8Rng, index: u64) -> f64 {
    let mut rng = base.clone();
    rng.set_stream(index);
    rng.random::<f64>()
}

/// `n_per_setting` trials for each schedule entry, in schedule order.
///
/// Trial `k` of schedule entry `s` has index `s·n_per_setting + k` and is
/// drawn from its own counter stream, so the output does not depend on
/// thread scheduling.
pub fn sample_trials(
    schedule: &[DetectorSettings],
    n_per_setting: usize,
    seed: u64,
    eavesdropper: Option<&EavesdropPolicy>,
) -> Result<Vec<TrialRecord>> {
    if n_per_setting == 0 {
        return Err(LabError::InvalidArgument(
            "n_per_setting must be at least 1".into(),
        ));
    }
    let tables: Vec<JointDistribution> = schedule
        .iter()
        .map(|s| observed_distribution(s, eavesdropper))
        .collect();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let total = (schedule.len() * n_per_setting) as u64;
    Ok((0..total)
        .into_par_iter()
        .map(|index| {
            let s = index as usize / n_per_setting;
            let (outcome_a, outcome_b) = tables[s].invert(draw(&base, index));
            TrialRecord {
                settings: schedule[s],
                outcome_a,
                outcome_b,
                eavesdropped: eavesdropper.is_some(),
                seed_index: index,
            }
        })
        .collect())
}

/// Mean of `a·b` over the records; `NaN` when empty.
pub fn empirical_correlation<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> f64 {
    let (sum, n) = records.into_iter().fold((0i64, 0usize), |(s, n), r| {
        (s + i64::from(r.outcome_a * r.outcome_b), n + 1)
    });
    sum as f64 / n as f64
}

pub fn records_at<'a>(
    records: &'a [TrialRecord],
    settings: &'a DetectorSettings,
) -> impl Iterator<Item = &'a TrialRecord> + 'a {
    records.iter().filter(move |r| r.settings.matches(settings))
}

/// Detector angle quadruple `(a, a′, b, b′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl ChshAngles {
    pub fn new(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        Self {
            a,
            a_prime,
            b,
            b_prime,
        }
    }

    /// `(0, π/2, π/4, 3π/4)`, maximal for the singlet.
    pub fn standard() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        Self::new(0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4)
    }

    /// `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub fn pairs(&self) -> [DetectorSettings; 4] {
        let s = |theta_a, theta_b| DetectorSettings { theta_a, theta_b };
        [
            s(self.a, self.b),
            s(self.a, self.b_prime),
            s(self.a_prime, self.b),
            s(self.a_prime, self.b_prime),
        ]
    }
}

/// `|E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|` from correlations in
/// [`ChshAngles::pairs`] order.
pub fn chsh_combination(e: [f64; 4]) -> f64 {
    (e[0] - e[1] + e[2] + e[3]).abs()
}

/// CHSH value from the exact (possibly eavesdropped) distributions.
pub fn chsh_exact(angles: &ChshAngles, eavesdropper: Option<&EavesdropPolicy>) -> f64 {
    let pairs = angles.pairs();
    chsh_combination(pairs.map(|s| observed_distribution(&s, eavesdropper).correlation()))
}

fn grouped_correlations(
    records: &[TrialRecord],
    angles: &ChshAngles,
    min_rounds: usize,
) -> Result<[f64; 4]> {
    let mut e = [0.0; 4];
    for (k, s) in angles.pairs().iter().enumerate() {
        let group: Vec<&TrialRecord> = records_at(records, s).collect();
        if group.is_empty() {
            return Err(LabError::MissingSettingPair {
                theta_a: s.theta_a,
                theta_b: s.theta_b,
            });
        }
        if group.len() < min_rounds {
            return Err(LabError::InsufficientData {
                theta_a: s.theta_a,
                theta_b: s.theta_b,
                found: group.len(),
                required: min_rounds,
            });
        }
        e[k] = empirical_correlation(group);
    }
    Ok(e)
}

/// CHSH value estimated from records covering all four setting pairs.
pub fn chsh(records: &[TrialRecord], angles: &ChshAngles) -> Result<f64> {
    Ok(chsh_combination(grouped_correlations(records, angles, 1)?))
}

/// Default alarm threshold: the local-realist CHSH bound.
pub const DEFAULT_ALARM_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QkdOutcome {
    pub key_a: Vec<bool>,
    pub key_b: Vec<bool>,
    pub s_estimate: f64,
    pub alarm: bool,
}

impl QkdOutcome {
    /// Fraction of sifted positions where the two keys disagree.
    pub fn key_error_rate(&self) -> f64 {
        let errors = self
            .key_a
            .iter()
            .zip(&self.key_b)
            .filter(|(a, b)| a != b)
            .count();
        errors as f64 / self.key_a.len().max(1) as f64
    }

    pub fn keys_match(&self) -> bool {
        self.key_a == self.key_b
    }
}

/// Sift key bits from aligned rounds and estimate CHSH from test rounds.
///
/// A's bit is `outcome_a == +1`; B's bit is flipped because the singlet
/// anticorrelates. The alarm fires when the estimate is at or below
/// `alarm_threshold`.
pub fn qkd_sift_and_test(
    records: &[TrialRecord],
    key_settings: &DetectorSettings,
    test: &ChshAngles,
    alarm_threshold: f64,
) -> Result<QkdOutcome> {
    let s_estimate = chsh_combination(grouped_correlations(records, test, MIN_TEST_ROUNDS)?);
    let (key_a, key_b) = records_at(records, key_settings)
        .map(|r| (r.outcome_a > 0, r.outcome_b <= 0))
        .unzip();
    Ok(QkdOutcome {
        key_a,
        key_b,
        s_estimate,
        alarm: s_estimate <= alarm_threshold,
    })
}

pub const TRIALS_CSV_HEADER: &str = "trial,theta_a,theta_b,outcome_a,outcome_b,eavesdropped";

fn signed(o: i8) -> &'static str {
    if o > 0 {
        "+1"
    } else {
        "-1"
    }
}

/// Write records as CSV with angles in radians to 9 decimal places.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRIALS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.9},{:.9},{},{},{}",
            r.seed_index,
            r.settings.theta_a,
            r.settings.theta_b,
            signed(r.outcome_a),
            signed(r.outcome_b),
            r.eavesdropped
        )?;
    }
    Ok(())
}
