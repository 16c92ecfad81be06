//! The worst-case ERM adversary: spherical codes and a game in which every
//! model separates all data seen so far yet keeps margin `epsilon` on the
//! clean set.
//!
//! Round t plays `w_t = [a, sqrt(1 - a^2) v_t]` with `a = epsilon/gamma` and
//! `v_t` the t-th codeword, then adds the adversarial examples of the clean
//! set against `w_t`. A code threshold below `code_threshold` keeps every
//! later model on the correct side of those examples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{random_unit, two_point_dataset};
use crate::error::{Error, Result};
use crate::losses::{adversarial_example, dot, Dataset, LabeledExample, Vector};
use crate::trainers::Model;

/// Tolerance on unit norms of codewords.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance on the margin of each game model on the clean set.
pub const MARGIN_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalCode {
    pub dim: usize,
    pub threshold: f64,
    pub codewords: Vec<Vector>,
}

impl SphericalCode {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeOutcome {
    pub code: SphericalCode,
    pub requested: usize,
    pub attempts: usize,
}

impl CodeOutcome {
    pub fn is_complete(&self) -> bool {
        self.code.len() >= self.requested
    }

    /// The code, or an error when it fell short of the requested size.
    pub fn into_complete(self) -> Result<SphericalCode> {
        if self.is_complete() {
            Ok(self.code)
        } else {
            Err(Error::CodeShortfall {
                achieved: self.code.len(),
                requested: self.requested,
                attempts: self.attempts,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum CodeVerdict {
    Pass,
    BadNorm { index: usize, norm: f64 },
    Violation { i: usize, j: usize, inner: f64 },
}

impl CodeVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, CodeVerdict::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParams {
    pub d: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl GameParams {
    pub fn validate(&self) -> Result<()> {
        let GameParams {
            d,
            gamma,
            alpha,
            epsilon,
        } = *self;
        if d < 3 {
            return Err(Error::invalid(format!("game needs d >= 3, got {d}")));
        }
        if !(0.0 < epsilon && epsilon <= alpha && alpha < gamma && gamma <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < epsilon <= alpha < gamma <= 1, got epsilon={epsilon}, alpha={alpha}, gamma={gamma}"
            )));
        }
        Ok(())
    }
}

/// `theta = eps (gamma^2 - eps alpha) / (alpha (gamma^2 - eps^2))`.
pub fn code_threshold(gamma: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    if !(0.0 < epsilon && epsilon <= alpha && alpha < gamma) {
        return Err(Error::invalid(format!(
            "need 0 < epsilon <= alpha < gamma, got epsilon={epsilon}, alpha={alpha}, gamma={gamma}"
        )));
    }
    let g2 = gamma * gamma;
    Ok(epsilon * (g2 - epsilon * alpha) / (alpha * (g2 - epsilon * epsilon)))
}

/// Greedy rejection sampling: accept a random unit vector iff its inner
/// product with every accepted codeword is below `threshold`.
pub fn generate_spherical_code(
    dim: usize,
    threshold: f64,
    target_size: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<CodeOutcome> {
    if dim < 2 {
        return Err(Error::invalid(format!("code dimension must be >= 2, got {dim}")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0,1), got {threshold}")));
    }
    if target_size < 1 {
        return Err(Error::invalid("target size must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codewords: Vec<Vector> = Vec::with_capacity(target_size);
    let mut attempts = 0;
    while codewords.len() < target_size && attempts < max_attempts {
        attempts += 1;
        let v = random_unit(&mut rng, dim);
        if codewords.iter().all(|c| dot(c, &v) < threshold) {
            codewords.push(Vector::from_raw(v));
        }
    }
    Ok(CodeOutcome {
        code: SphericalCode {
            dim,
            threshold,
            codewords,
        },
        requested: target_size,
        attempts,
    })
}

/// Checks unit norms and pairwise inner products; reports the first failure.
pub fn verify_code(code: &SphericalCode) -> CodeVerdict {
    for (index, v) in code.codewords.iter().enumerate() {
        let norm = v.norm();
        if v.dim() != code.dim || (norm - 1.0).abs() > NORM_TOLERANCE {
            return CodeVerdict::BadNorm { index, norm };
        }
    }
    for (i, u) in code.codewords.iter().enumerate() {
        for (j, v) in code.codewords.iter().enumerate().skip(i + 1) {
            let inner = dot(u, v);
            if !(inner < code.threshold) {
                return CodeVerdict::Violation { i, j, inner };
            }
        }
    }
    CodeVerdict::Pass
}

/// `[a, sqrt(1 - a^2) v]` with `a = epsilon/gamma`.
pub fn admissible_model(params: &GameParams, codeword: &Vector) -> Result<Model> {
    params.validate()?;
    if codeword.dim() != params.d - 1 {
        return Err(Error::DimensionMismatch {
            expected: params.d - 1,
            found: codeword.dim(),
        });
    }
    if (codeword.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid("codeword must be a unit vector"));
    }
    let a = params.epsilon / params.gamma;
    let tail = (1.0 - a * a).sqrt();
    let mut w = Vec::with_capacity(params.d);
    w.push(a);
    w.extend(codeword.iter().map(|c| tail * c));
    Ok(Model::new(Vector::from_raw(w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundCheck {
    pub t: usize,
    pub margin_on_s: f64,
    /// Smallest `y<w_t, x>` over the clean set and all earlier adversarial
    /// examples.
    pub min_score: f64,
    pub separates: bool,
    pub margin_ok: bool,
}

impl RoundCheck {
    pub fn passed(&self) -> bool {
        self.separates && self.margin_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub params: GameParams,
    pub s: Dataset,
    pub s_prime: Vec<LabeledExample>,
    pub models: Vec<Model>,
    pub margins_on_s: Vec<f64>,
    pub rounds: Vec<RoundCheck>,
    pub admissible: bool,
    pub requested_rounds: usize,
    pub code_size: usize,
    pub code_attempts: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub rounds: usize,
    pub requested_rounds: usize,
    pub admissible: bool,
    pub min_margin_on_s: f64,
    pub max_margin_on_s: f64,
    pub code_size: usize,
    pub code_attempts: usize,
    pub threshold: f64,
}

impl GameState {
    /// True when the code fell short and fewer rounds were played.
    pub fn truncated(&self) -> bool {
        self.rounds.len() < self.requested_rounds
    }

    pub fn summary(&self) -> GameSummary {
        let fold = |init: f64, f: fn(f64, f64) -> f64| self.margins_on_s.iter().copied().fold(init, f);
        GameSummary {
            rounds: self.rounds.len(),
            requested_rounds: self.requested_rounds,
            admissible: self.admissible,
            min_margin_on_s: fold(f64::INFINITY, f64::min),
            max_margin_on_s: fold(f64::NEG_INFINITY, f64::max),
            code_size: self.code_size,
            code_attempts: self.code_attempts,
            threshold: self.threshold,
        }
    }
}

/// Plays `rounds` rounds on `{(gamma e1, +1), (-gamma e1, -1)}` and checks
/// every round by direct enumeration.
pub fn run_erm_game(params: &GameParams, rounds: usize, seed: u64) -> Result<GameState> {
    run_erm_game_with(params, rounds, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn run_erm_game_with(params: &GameParams, rounds: usize, seed: u64, max_attempts: usize) -> Result<GameState> {
    params.validate()?;
    let theta = code_threshold(params.gamma, params.alpha, params.epsilon)?;
    let outcome = generate_spherical_code(params.d - 1, theta, rounds, seed, max_attempts)?;
    if let CodeVerdict::Violation { i, j, inner } = verify_code(&outcome.code) {
        return Err(Error::invalid(format!(
            "generated code failed verification at ({i},{j}) with inner product {inner}"
        )));
    }
    let s = two_point_dataset(params.gamma, params.d, &Vector::basis(params.d, 0))?;

    let mut s_prime: Vec<LabeledExample> = Vec::new();
    let mut models = Vec::with_capacity(outcome.code.len());
    let mut margins_on_s = Vec::with_capacity(outcome.code.len());
    let mut checks = Vec::with_capacity(outcome.code.len());
    for (k, v) in outcome.code.codewords.iter().enumerate() {
        let model = admissible_model(params, v)?;
        let w = model.w.as_slice();
        let margin_on_s = s.iter().map(|e| e.signed_score(w)).fold(f64::INFINITY, f64::min) / model.w.norm();
        let min_score = s
            .iter()
            .chain(s_prime.iter())
            .map(|e| e.signed_score(w))
            .fold(f64::INFINITY, f64::min);
        checks.push(RoundCheck {
            t: k + 1,
            margin_on_s,
            min_score,
            separates: min_score > 0.0,
            margin_ok: (margin_on_s - params.epsilon).abs() <= MARGIN_TOLERANCE,
        });
        for e in &s {
            s_prime.push(adversarial_example(&model.w, e, params.alpha)?);
        }
        margins_on_s.push(margin_on_s);
        models.push(model);
    }
    let admissible = !checks.is_empty() && checks.iter().all(RoundCheck::passed);
    Ok(GameState {
        params: *params,
        s,
        s_prime,
        models,
        margins_on_s,
        rounds: checks,
        admissible,
        requested_rounds: rounds,
        code_size: outcome.code.len(),
        code_attempts: outcome.attempts,
        threshold: theta,
    })
}

/// `0.5 exp(c (d-1) eps^2 / (gamma + eps)^2)`: iterations an arbitrary ERM
/// may need before reaching margin above `epsilon`. `c` is a universal
/// constant the caller must supply.
pub fn erm_lower_bound_iters(d: usize, gamma: f64, epsilon: f64, c: f64) -> Result<f64> {
    if d < 2 || !(gamma > 0.0) || !(epsilon >= 0.0) || !(c > 0.0) {
        return Err(Error::invalid("need d >= 2, gamma > 0, epsilon >= 0, c > 0"));
    }
    let r = epsilon / (gamma + epsilon);
    Ok(0.5 * (c * (d - 1) as f64 * r * r).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const PARAMS: GameParams = GameParams {
        d: 50,
        gamma: 0.5,
        alpha: 0.4,
        epsilon: 0.1,
    };

    #[test]
    fn thresholds() {
        assert_relative_eq!(code_threshold(0.5, 0.4, 0.1).unwrap(), 0.21875, max_relative = 1e-15);
        assert_relative_eq!(code_threshold(1.0, 0.3, 0.3).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(code_threshold(0.9, 0.5, 0.1).unwrap(), 0.19, max_relative = 1e-14);
        assert!(code_threshold(0.5, 0.1, 0.2).is_err());
        assert!(code_threshold(0.5, 0.5, 0.1).is_err());
        assert!(code_threshold(0.5, 0.4, 0.0).is_err());
    }

    #[test]
    fn small_code() {
        let out = generate_spherical_code(2, 0.1, 2, 1, 10_000).unwrap();
        assert!(out.is_complete());
        assert_eq!(out.code.len(), 2);
        assert!(dot(&out.code.codewords[0], &out.code.codewords[1]) < 0.1);
        assert!(verify_code(&out.code).passed());
    }

    #[test]
    fn game_sized_code() {
        let a = generate_spherical_code(49, 0.21875, 100, 7, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert!(a.is_complete());
        assert_eq!(verify_code(&a.code), CodeVerdict::Pass);
        let b = generate_spherical_code(49, 0.21875, 100, 7, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shortfall_is_reported() {
        // Pairwise angles above 84 degrees leave room for at most 4 codewords in the plane.
        let out = generate_spherical_code(2, 0.1, 50, 3, 2000).unwrap();
        assert!(!out.is_complete());
        assert_eq!(out.attempts, 2000);
        assert!(verify_code(&out.code).passed());
        assert!(matches!(
            out.into_complete(),
            Err(Error::CodeShortfall {
                requested: 50,
                attempts: 2000,
                ..
            })
        ));
        assert!(generate_spherical_code(1, 0.1, 2, 0, 10).is_err());
        assert!(generate_spherical_code(3, 1.0, 2, 0, 10).is_err());
    }

    #[test]
    fn verify_examples() {
        let basis = SphericalCode {
            dim: 3,
            threshold: 0.5,
            codewords: (0..3).map(|i| Vector::basis(3, i)).collect(),
        };
        assert_eq!(verify_code(&basis), CodeVerdict::Pass);
        let dup = SphericalCode {
            dim: 2,
            threshold: 0.5,
            codewords: vec![Vector::basis(2, 0), Vector::basis(2, 0)],
        };
        assert_eq!(verify_code(&dup), CodeVerdict::Violation { i: 0, j: 1, inner: 1.0 });
        let long = SphericalCode {
            dim: 2,
            threshold: 0.5,
            codewords: vec![Vector::new(vec![1.0, 1.0]).unwrap()],
        };
        assert!(matches!(verify_code(&long), CodeVerdict::BadNorm { index: 0, .. }));
    }

    #[test]
    fn admissible_model_examples() {
        let v = Vector::new(vec![0.6, 0.0, -0.8]).unwrap();
        let p = GameParams { d: 4, ..PARAMS };
        let m = admissible_model(&p, &v).unwrap();
        assert_relative_eq!(m.w[0], 0.2, max_relative = 1e-15);
        let tail = 0.96f64.sqrt();
        for i in 0..3 {
            assert_relative_eq!(m.w[i + 1], tail * v[i], max_relative = 1e-15);
        }
        assert!((m.w.norm() - 1.0).abs() <= 1e-12);

        let s = two_point_dataset(0.5, 4, &Vector::basis(4, 0)).unwrap();
        let margin = crate::metrics::margin(&m.w, &s).unwrap().margin;
        assert!((margin - 0.1).abs() <= 1e-15);

        let p = GameParams {
            d: 4,
            gamma: 1.0,
            alpha: 0.3,
            epsilon: 0.3,
        };
        let m = admissible_model(&p, &Vector::basis(3, 0)).unwrap();
        assert_relative_eq!(m.w[0], 0.3, max_relative = 1e-15);
        assert_relative_eq!(m.w[1], 0.91f64.sqrt(), max_relative = 1e-15);
        assert_eq!(&m.w[2..], &[0.0, 0.0]);

        assert!(admissible_model(&p, &Vector::basis(4, 0)).is_err());
    }

    #[test]
    fn full_game() {
        let g = run_erm_game(&PARAMS, 100, 0).unwrap();
        assert!(g.admissible);
        assert!(!g.truncated());
        assert_eq!(g.rounds.len(), 100);
        assert_eq!(g.s_prime.len(), 200);
        for m in &g.margins_on_s {
            assert!((m - 0.1).abs() <= MARGIN_TOLERANCE);
        }
        // Independent recheck of every sign by enumeration.
        for (t, model) in g.models.iter().enumerate() {
            for e in g.s.iter().chain(&g.s_prime[..2 * t]) {
                assert!(e.signed_score(&model.w) > 0.0);
            }
        }
        let summary = g.summary();
        assert_eq!(summary.rounds, 100);
        assert!((summary.max_margin_on_s - 0.1).abs() <= MARGIN_TOLERANCE);
    }

    #[test]
    fn single_round_is_admissible() {
        let g = run_erm_game(&PARAMS, 1, 5).unwrap();
        assert!(g.admissible);
        assert_eq!(g.rounds.len(), 1);
        assert_relative_eq!(g.rounds[0].min_score, 0.1, max_relative = 1e-15);
    }

    #[test]
    fn game_examples_are_robustly_separable() {
        let g = run_erm_game(&PARAMS, 30, 2).unwrap();
        let w_star = Vector::basis(PARAMS.d, 0);
        for e in &g.s_prime {
            assert!(e.signed_score(&w_star) >= PARAMS.gamma - PARAMS.alpha - 1e-12);
        }
    }

    #[test]
    fn game_prefix_property() {
        let short = run_erm_game(&PARAMS, 20, 9).unwrap();
        let long = run_erm_game(&PARAMS, 60, 9).unwrap();
        assert_eq!(short.rounds[..], long.rounds[..20]);
        assert_eq!(short.models[..], long.models[..20]);
    }

    #[test]
    fn game_preconditions() {
        let bad = GameParams {
            epsilon: 0.45,
            ..PARAMS
        };
        assert!(run_erm_game(&bad, 10, 0).is_err());
        let bad = GameParams { d: 2, ..PARAMS };
        assert!(run_erm_game(&bad, 10, 0).is_err());
        assert!(run_erm_game(&PARAMS, 0, 0).is_err());
    }

    #[test]
    fn truncated_game_is_reported() {
        let g = run_erm_game_with(&PARAMS, 100, 0, 50).unwrap();
        assert!(g.truncated());
        assert!(g.rounds.len() < 100);
        assert_eq!(g.summary().requested_rounds, 100);
    }

    #[test]
    fn threshold_above_bound_breaks_admissibility() {
        // Codewords at inner product 0.9 > theta: the second model misclassifies
        // an adversarial example from the first round.
        let v1 = Vector::basis(49, 0);
        let v2 = Vector::new({
            let mut c = vec![0.0; 49];
            c[0] = 0.9;
            c[1] = 0.19f64.sqrt();
            c
        })
        .unwrap();
        let w1 = admissible_model(&PARAMS, &v1).unwrap();
        let w2 = admissible_model(&PARAMS, &v2).unwrap();
        let s = two_point_dataset(0.5, 50, &Vector::basis(50, 0)).unwrap();
        let adv = adversarial_example(&w1.w, &s.examples()[0], PARAMS.alpha).unwrap();
        assert!(adv.signed_score(&w2.w) <= 0.0);
    }

    #[test]
    fn lower_bound_values() {
        let v = erm_lower_bound_iters(101, 0.5, 0.1, 1.0).unwrap();
        assert_relative_eq!(v, 8.041_620_336_031_47, max_relative = 1e-13);
        assert_eq!(erm_lower_bound_iters(101, 0.5, 0.0, 1.0).unwrap(), 0.5);
        assert!(erm_lower_bound_iters(1, 0.5, 0.1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn doubling_dimension_squares_the_factor(
            d in 2usize..200, gamma in 0.1f64..1.0, eps in 0.0f64..0.5, c in 0.01f64..0.5,
        ) {
            let one = 2.0 * erm_lower_bound_iters(d, gamma, eps, c).unwrap();
            let two = 2.0 * erm_lower_bound_iters(2 * d - 1, gamma, eps, c).unwrap();
            prop_assert!((two - one * one).abs() <= 1e-9 * two);
        }

        #[test]
        fn generated_codes_verify(dim in 2usize..30, theta in 0.05f64..0.9, seed in 0u64..1000) {
            let out = generate_spherical_code(dim, theta, 20, seed, 5000).unwrap();
            prop_assert!(verify_code(&out.code).passed());
        }
    }
}
