//! Seeded Monte Carlo simulation of one-count experiments, and
//! likelihood-based discrimination between rival jump models.
//!
//! The simulated protocol per trial, following the microwave-cavity
//! scheme the models were designed for:
//!
//! 1. draw a photon number n from the prepared state's distribution,
//!    standing in for an ideal pre-count QND measurement;
//! 2. let the detector fire with probability proportional to the
//!    model's jump strength at n (rejection step);
//! 3. on a click, record the post-count number: n - 1 for the lowering
//!    models, n for the number channel `N`, which preserves photon
//!    number;
//! 4. classify both numbers with the QND readout, either exact or the
//!    experimentally realistic three-way {0, 1, many}.
//!
//! Randomness is fully reproducible: every trial draws from its own
//! ChaCha12 substream selected by (seed, trial index), so reports are
//! byte-identical across runs and platforms given the same config.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::function::factorial::ln_factorial;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fock::{photon_statistics, prepare, FockDistribution, StatePrep, Truncation};
use crate::jump::{predict_pn, JumpModel};
use crate::sweep::format_float;

/// Log-likelihood gap under which a ranking is flagged low-confidence
/// (likelihood ratio below 100), along with very small samples.
const CONFIDENT_LL_GAP: f64 = 4.605170185988092; // ln(100)
const CONFIDENT_MIN_COUNTS: u64 = 30;

/// QND readout granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QndClassifier {
    /// Resolves every photon number; reports include full histograms.
    Exact,
    /// Distinguishes only {0, 1, many}, like the cascade-atom readout
    /// in the real experiments.
    #[default]
    ThreeWay,
}

impl fmt::Display for QndClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QndClassifier::Exact => write!(f, "exact"),
            QndClassifier::ThreeWay => write!(f, "three-way"),
        }
    }
}

impl FromStr for QndClassifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(QndClassifier::Exact),
            "three-way" => Ok(QndClassifier::ThreeWay),
            other => Err(Error::Config {
                line: 0,
                message: format!("unknown classifier '{other}' (use exact or three-way)"),
            }),
        }
    }
}

/// Everything a simulation run depends on. Two equal configs produce
/// byte-identical reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub prep: StatePrep,
    pub truncation: Truncation,
    pub model: JumpModel,
    pub trials: u64,
    pub seed: u64,
    pub classifier: QndClassifier,
    /// Models to rank against the observed counts; empty disables
    /// discrimination.
    pub candidates: Vec<JumpModel>,
}

/// Counts over the three-way bins {0, 1, many}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountBins {
    pub zero: u64,
    pub one: u64,
    pub many: u64,
}

impl CountBins {
    pub fn total(&self) -> u64 {
        self.zero + self.one + self.many
    }

    fn record(&mut self, n: usize) {
        match n {
            0 => self.zero += 1,
            1 => self.one += 1,
            _ => self.many += 1,
        }
    }
}

impl fmt::Display for CountBins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0:{} 1:{} many:{}", self.zero, self.one, self.many)
    }
}

/// One simulated detection attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialRecord {
    pub n_initial: usize,
    pub absorbed: bool,
    /// Photon number after the click; present iff `absorbed`.
    pub n_final: Option<usize>,
}

/// Inverse-CDF draw from the (renormalized) number distribution.
/// `u` is uniform in [0, 1); `cdf` must be nondecreasing with final
/// entry 1.
pub fn sample_initial(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Probability that the rejection step accepts a click at photon
/// number n: the model's jump strength at n normalized by its maximum
/// over the truncated levels, so it always lies in [0, 1].
pub fn acceptance_probability(model: JumpModel, n: usize, dim: usize) -> f64 {
    let top = (dim - 1) as f64;
    let ceiling = match model {
        JumpModel::A => top,
        JumpModel::E | JumpModel::H { .. } => 1.0,
        JumpModel::N => top * top,
        JumpModel::Beta { beta } => top.powf(1.0 - 2.0 * beta),
    };
    (model.strength(n) / ceiling).min(1.0)
}

/// Average of [`acceptance_probability`] under `chi`, i.e. the expected
/// fraction of trials that end in a click.
pub fn expected_acceptance_rate(model: JumpModel, chi: &FockDistribution, dim: usize) -> f64 {
    let total = chi.total();
    (0..chi.len())
        .map(|n| acceptance_probability(model, n, dim) * chi.get(n))
        .sum::<f64>()
        / total
}

/// Runs the rejection step for a single trial at photon number `n`.
pub fn absorption_trial<R: Rng>(
    model: JumpModel,
    n: usize,
    dim: usize,
    rng: &mut R,
) -> TrialRecord {
    let p = acceptance_probability(model, n, dim);
    let absorbed = rng.gen::<f64>() < p;
    let n_final = if absorbed {
        // every lowering model subtracts exactly one photon; the number
        // channel N preserves it
        Some(if matches!(model, JumpModel::N) { n } else { n - 1 })
    } else {
        None
    };
    TrialRecord {
        n_initial: n,
        absorbed,
        n_final,
    }
}

/// A point estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn binomial_estimate(count: u64, total: u64) -> Estimate {
    let p = count as f64 / total as f64;
    Estimate {
        value: p,
        std_error: (p * (1.0 - p) / total as f64).sqrt(),
    }
}

/// Full outcome of a simulation run. `render` produces the canonical
/// text form, which is byte-identical for identical configs.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub prep: StatePrep,
    pub truncation: Truncation,
    pub model: JumpModel,
    pub trials: u64,
    pub seed: u64,
    pub classifier: QndClassifier,
    pub dim: usize,
    pub tail_mass_bound: f64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub chi0_hat: Estimate,
    pub chi1_hat: Estimate,
    pub p0_hat: Estimate,
    pub p1_hat: Estimate,
    pub counts_pre: CountBins,
    pub counts_post: CountBins,
    /// Per-level histograms, present with the exact classifier.
    pub histogram_pre: Option<Vec<u64>>,
    pub histogram_post: Option<Vec<u64>>,
}

impl EstimateReport {
    /// Column names for [`Self::csv_row`].
    pub const CSV_HEADER: &'static str = "prep,model,trials,seed,classifier,dim,accepted,\
        acceptance_rate,chi0_hat,chi0_se,chi1_hat,chi1_se,p0_hat,p0_se,p1_hat,p1_se";

    /// One CSV row for batch sweeps over configs; floats carry full
    /// precision like the figure files.
    pub fn csv_row(&self) -> String {
        let fields = [
            quote_csv_field(&self.prep.to_string()),
            quote_csv_field(&self.model.to_string()),
            self.trials.to_string(),
            self.seed.to_string(),
            self.classifier.to_string(),
            self.dim.to_string(),
            self.accepted.to_string(),
            format_float(self.acceptance_rate),
            format_float(self.chi0_hat.value),
            format_float(self.chi0_hat.std_error),
            format_float(self.chi1_hat.value),
            format_float(self.chi1_hat.std_error),
            format_float(self.p0_hat.value),
            format_float(self.p0_hat.std_error),
            format_float(self.p1_hat.value),
            format_float(self.p1_hat.std_error),
        ];
        fields.join(",")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# count experiment report\n");
        out.push_str(&format!("prep = {}\n", self.prep));
        out.push_str(&format!("truncation = {}\n", self.truncation));
        out.push_str(&format!("model = {}\n", self.model));
        out.push_str(&format!("trials = {}\n", self.trials));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("classifier = {}\n", self.classifier));
        out.push_str(&format!("dim = {}\n", self.dim));
        out.push_str(&format!(
            "tail_mass_bound = {}\n",
            format_float(self.tail_mass_bound)
        ));
        out.push_str(&format!("accepted = {}\n", self.accepted));
        out.push_str(&format!(
            "acceptance_rate = {}\n",
            format_float(self.acceptance_rate)
        ));
        for (name, est) in [
            ("chi0_hat", self.chi0_hat),
            ("chi1_hat", self.chi1_hat),
            ("p0_hat", self.p0_hat),
            ("p1_hat", self.p1_hat),
        ] {
            out.push_str(&format!(
                "{name} = {} (se {})\n",
                format_float(est.value),
                format_float(est.std_error)
            ));
        }
        out.push_str(&format!("counts_pre = {}\n", self.counts_pre));
        out.push_str(&format!("counts_post = {}\n", self.counts_post));
        if let Some(hist) = &self.histogram_pre {
            out.push_str(&format!("histogram_pre = {}\n", join_counts(hist)));
        }
        if let Some(hist) = &self.histogram_post {
            out.push_str(&format!("histogram_post = {}\n", join_counts(hist)));
        }
        out
    }
}

fn join_counts(counts: &[u64]) -> String {
    counts
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Double-quotes a field when it contains CSV metacharacters, e.g. the
/// comma in `coherent(1.2,0.5)`.
fn quote_csv_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Simulates `config.trials` detection attempts.
///
/// Sampling uses the truncated number distribution renormalized to total
/// mass 1; the truncation itself is reported so downstream comparisons
/// can budget for it. Errs when no trial is accepted: estimating
/// post-count statistics needs at least one click.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EstimateReport> {
    if config.trials == 0 {
        return Err(Error::ZeroTrials);
    }
    config.model.validate()?;
    let rho = prepare(&config.prep, config.truncation)?;
    let dim = rho.dim();
    let chi = rho.number_distribution();

    // CDF for sampling; renormalized so the last entry is exactly 1
    let total = chi.total();
    let mut cdf = Vec::with_capacity(dim);
    let mut acc = 0.0;
    for n in 0..dim {
        acc += chi.get(n).max(0.0) / total;
        cdf.push(acc);
    }
    cdf[dim - 1] = 1.0;

    let exact = config.classifier == QndClassifier::Exact;
    let mut pre = CountBins::default();
    let mut post = CountBins::default();
    let mut hist_pre = vec![0u64; if exact { dim } else { 0 }];
    let mut hist_post = vec![0u64; if exact { dim } else { 0 }];
    let mut accepted = 0u64;

    let master = ChaCha12Rng::seed_from_u64(config.seed);
    for trial in 0..config.trials {
        let mut rng = master.clone();
        rng.set_stream(trial);
        let n = sample_initial(&cdf, rng.gen::<f64>());
        pre.record(n);
        if exact {
            hist_pre[n] += 1;
        }
        let record = absorption_trial(config.model, n, dim, &mut rng);
        if let Some(n_final) = record.n_final {
            accepted += 1;
            post.record(n_final);
            if exact {
                hist_post[n_final] += 1;
            }
        }
    }
    if accepted == 0 {
        return Err(Error::NoAcceptedTrials(config.trials));
    }

    Ok(EstimateReport {
        prep: config.prep,
        truncation: config.truncation,
        model: config.model,
        trials: config.trials,
        seed: config.seed,
        classifier: config.classifier,
        dim,
        tail_mass_bound: rho.tail_mass_bound(),
        accepted,
        acceptance_rate: accepted as f64 / config.trials as f64,
        chi0_hat: binomial_estimate(pre.zero, config.trials),
        chi1_hat: binomial_estimate(pre.one, config.trials),
        p0_hat: binomial_estimate(post.zero, accepted),
        p1_hat: binomial_estimate(post.one, accepted),
        counts_pre: pre,
        counts_post: post,
        histogram_pre: exact.then_some(hist_pre),
        histogram_post: exact.then_some(hist_post),
    })
}

/// A candidate model with its multinomial log-likelihood of the observed
/// post-count bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredModel {
    pub model: JumpModel,
    pub log_likelihood: f64,
    pub delta_from_best: f64,
    /// True when the model assigns zero probability to an observed bin.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationResult {
    pub observed: CountBins,
    pub ranking: Vec<ScoredModel>,
    pub best: JumpModel,
    pub low_confidence: bool,
}

impl DiscriminationResult {
    /// Column names for [`Self::csv_rows`].
    pub const CSV_HEADER: &'static str =
        "rank,model,log_likelihood,delta_from_best,degenerate,low_confidence";

    /// One CSV row per ranked candidate.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (i, scored) in self.ranking.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                quote_csv_field(&scored.model.to_string()),
                format_float(scored.log_likelihood),
                format_float(scored.delta_from_best),
                scored.degenerate,
                self.low_confidence
            ));
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# discrimination report\n");
        out.push_str(&format!("observed = {}\n", self.observed));
        for (i, scored) in self.ranking.iter().enumerate() {
            out.push_str(&format!(
                "rank {}: model {} log_likelihood = {} delta = {}{}\n",
                i + 1,
                scored.model,
                format_float(scored.log_likelihood),
                format_float(scored.delta_from_best),
                if scored.degenerate { " (degenerate)" } else { "" }
            ));
        }
        out.push_str(&format!("best = {}\n", self.best));
        out.push_str(&format!("low_confidence = {}\n", self.low_confidence));
        out
    }
}

/// ln of the multinomial pmf. Zero-probability bins are fatal only when
/// observed; the result is then -inf rather than an error so degenerate
/// candidates still rank (last).
fn ln_multinomial(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut ll = ln_factorial(n);
    for (&k, &p) in counts.iter().zip(probs) {
        if k == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += k as f64 * p.ln() - ln_factorial(k);
    }
    ll
}

/// Ranks candidate models by how well they explain observed post-count
/// bins from a state with number distribution `chi`.
pub fn discriminate_counts(
    observed: &CountBins,
    chi: &FockDistribution,
    candidates: &[JumpModel],
) -> Result<DiscriminationResult> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let counts = [observed.zero, observed.one, observed.many];
    let mut scored: Vec<ScoredModel> = Vec::with_capacity(candidates.len());
    for &model in candidates {
        model.validate()?;
        let p0 = predict_pn(model, chi, 0)?;
        let p1 = predict_pn(model, chi, 1)?;
        let many = (1.0 - p0 - p1).max(0.0);
        let probs = [p0, p1, many];
        let ll = ln_multinomial(&counts, &probs);
        let degenerate = counts
            .iter()
            .zip(&probs)
            .any(|(&k, &p)| k > 0 && p <= 0.0);
        scored.push(ScoredModel {
            model,
            log_likelihood: ll,
            delta_from_best: 0.0,
            degenerate,
        });
    }
    // stable sort: ties keep candidate order
    scored.sort_by(|a, b| b.log_likelihood.partial_cmp(&a.log_likelihood).unwrap());
    let best_ll = scored[0].log_likelihood;
    for s in &mut scored {
        s.delta_from_best = best_ll - s.log_likelihood;
    }
    let gap_confident = scored.len() < 2
        || best_ll - scored[1].log_likelihood >= CONFIDENT_LL_GAP;
    let low_confidence = observed.total() < CONFIDENT_MIN_COUNTS || !gap_confident;
    Ok(DiscriminationResult {
        observed: *observed,
        best: scored[0].model,
        ranking: scored,
        low_confidence,
    })
}

/// Convenience wrapper: rebuilds the state a report was generated from
/// and ranks `candidates` against the report's post-count bins.
pub fn discriminate(
    report: &EstimateReport,
    candidates: &[JumpModel],
) -> Result<DiscriminationResult> {
    let rho = prepare(&report.prep, report.truncation)?;
    let stats = photon_statistics(&rho);
    discriminate_counts(&report.counts_post, &stats.chi, candidates)
}

/// Parses the key = value config format:
///
/// ```text
/// # one-count experiment
/// prep       = thermal(0.7)
/// model      = A
/// trials     = 1000000
/// seed       = 42
/// classifier = three-way        # optional, default three-way
/// truncation = tail(1e-12)      # optional, tail(eps) or dim(n)
/// candidates = A, E, H(2)       # optional, enables discrimination
/// ```
///
/// `#` starts a comment. `prep`, `model`, `trials`, and `seed` are
/// required; the seed in particular is never defaulted, so identical
/// configs mean identical runs.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut prep: Option<StatePrep> = None;
    let mut truncation: Option<Truncation> = None;
    let mut model: Option<JumpModel> = None;
    let mut trials: Option<u64> = None;
    let mut seed: Option<u64> = None;
    let mut classifier: Option<QndClassifier> = None;
    let mut candidates: Option<Vec<JumpModel>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(Error::Config {
            line,
            message: "expected 'key = value'".to_string(),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let at_line = |e: Error| match e {
            Error::Config { message, .. } => Error::Config { line, message },
            other => other,
        };
        let dup = |name: &str| Error::Config {
            line,
            message: format!("duplicate key '{name}'"),
        };
        match key.as_str() {
            "prep" | "state" => {
                if prep.is_some() {
                    return Err(dup(&key));
                }
                prep = Some(value.parse().map_err(at_line)?);
            }
            "truncation" => {
                if truncation.is_some() {
                    return Err(dup(&key));
                }
                truncation = Some(value.parse().map_err(at_line)?);
            }
            "model" => {
                if model.is_some() {
                    return Err(dup(&key));
                }
                model = Some(value.parse().map_err(at_line)?);
            }
            "trials" => {
                if trials.is_some() {
                    return Err(dup(&key));
                }
                let n: u64 = value.parse().map_err(|_| Error::Config {
                    line,
                    message: format!("'{value}' is not a trial count"),
                })?;
                trials = Some(n);
            }
            "seed" => {
                if seed.is_some() {
                    return Err(dup(&key));
                }
                let n: u64 = value.parse().map_err(|_| Error::Config {
                    line,
                    message: format!("'{value}' is not a seed (need an unsigned integer)"),
                })?;
                seed = Some(n);
            }
            "classifier" => {
                if classifier.is_some() {
                    return Err(dup(&key));
                }
                classifier = Some(value.parse().map_err(at_line)?);
            }
            "candidates" => {
                if candidates.is_some() {
                    return Err(dup(&key));
                }
                let list: Vec<JumpModel> = value
                    .split(',')
                    .map(|item| item.parse().map_err(at_line))
                    .collect::<Result<_>>()?;
                candidates = Some(list);
            }
            other => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key '{other}'"),
                });
            }
        }
    }

    let missing = |name: &str| Error::Config {
        line: 0,
        message: format!("missing required key '{name}'"),
    };
    Ok(ExperimentConfig {
        prep: prep.ok_or_else(|| missing("prep"))?,
        truncation: truncation.unwrap_or_default(),
        model: model.ok_or_else(|| missing("model"))?,
        trials: trials.ok_or_else(|| missing("trials"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        classifier: classifier.unwrap_or_default(),
        candidates: candidates.unwrap_or_default(),
    })
}
