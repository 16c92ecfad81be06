//! Numeric building blocks: vectors, labeled examples, datasets, the link
//! functions and the robust losses built on top of them.
//!
//! For a linear model the inner maximization over an ℓ2 ball of radius `alpha`
//! has a closed form: the worst perturbation is `-y * alpha * w / |w|` and the
//! robust loss is `f(-y<w,x> + alpha |w|)`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense, finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidVector);
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be at least 1");
        Vector(vec![0.0; dim])
    }

    /// The `index`-th standard basis vector of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = 1.0;
        v
    }

    /// Wraps coordinates produced by internal arithmetic. Callers guarantee
    /// finiteness or check it right after.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    /// `w / |w|`, or the zero vector when `w = 0`.
    pub fn unit_direction(&self) -> Vector {
        let n = self.norm();
        if n == 0.0 {
            Vector::zeros(self.dim())
        } else {
            Vector(self.0.iter().map(|c| c / n).collect())
        }
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Vector::new(coords)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::NegativeAlpha(alpha));
    }
    Ok(())
}

/// Binary label in {+1, -1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = Error;

    fn try_from(y: f64) -> Result<Self> {
        if y == 1.0 {
            Ok(Label::Positive)
        } else if y == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::InvalidLabel(y))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vector,
    pub y: Label,
}

impl LabeledExample {
    pub fn new(x: Vector, y: Label) -> Self {
        LabeledExample { x, y }
    }

    /// Builds an example from raw coordinates and a numeric ±1 label.
    pub fn from_parts(x: Vec<f64>, y: f64) -> Result<Self> {
        Ok(LabeledExample {
            x: Vector::new(x)?,
            y: Label::try_from(y)?,
        })
    }

    /// `y <w, x>`.
    pub fn signed_score(&self, w: &[f64]) -> f64 {
        self.y.sign() * dot(w, &self.x)
    }
}

/// An immutable, non-empty collection of examples sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    max_norm: f64,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        let first = examples.first().ok_or(Error::EmptyDataset)?;
        let dim = first.x.dim();
        for e in &examples {
            check_dims(dim, e.x.dim())?;
        }
        let max_norm = examples.iter().map(|e| e.x.norm()).fold(0.0, f64::max);
        Ok(Dataset { examples, max_norm })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples[0].x.dim()
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledExample> {
        self.examples.iter()
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledExample;
    type IntoIter = std::slice::Iter<'a, LabeledExample>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

/// Monotone, nonnegative link `f` with `loss(w, x, y) = f(-y<w,x>)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFunction {
    /// `f(u) = ln(1 + e^u)`.
    Logistic,
    /// `f(u) = max(0, u)`.
    Relu,
}

impl LinkFunction {
    pub fn value(self, u: f64) -> f64 {
        link_value(self, u)
    }

    pub fn derivative(self, u: f64) -> f64 {
        link_derivative(self, u)
    }
}

pub fn link_value(kind: LinkFunction, u: f64) -> f64 {
    match kind {
        LinkFunction::Logistic => u.max(0.0) + (-u.abs()).exp().ln_1p(),
        LinkFunction::Relu => u.max(0.0),
    }
}

/// Derivative of the link. The ReLU subderivative at 0 is taken to be 1, so
/// that a zero robust score still triggers a perceptron update.
pub fn link_derivative(kind: LinkFunction, u: f64) -> f64 {
    match kind {
        LinkFunction::Logistic => {
            if u >= 0.0 {
                1.0 / (1.0 + (-u).exp())
            } else {
                let e = u.exp();
                e / (1.0 + e)
            }
        }
        LinkFunction::Relu => {
            if u >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

pub fn pointwise_loss(kind: LinkFunction, w: &Vector, e: &LabeledExample) -> Result<f64> {
    check_dims(e.x.dim(), w.dim())?;
    Ok(link_value(kind, -e.signed_score(w)))
}

/// The argument `-y<w,x> + alpha |w|` of the robust loss.
fn robust_score(w: &[f64], e: &LabeledExample, alpha: f64) -> f64 {
    -e.signed_score(w) + alpha * norm(w)
}

/// Worst-case loss over the ball `|delta| <= alpha`, in closed form.
pub fn robust_pointwise_loss(kind: LinkFunction, w: &Vector, e: &LabeledExample, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_dims(e.x.dim(), w.dim())?;
    Ok(link_value(kind, robust_score(w, e, alpha)))
}

/// The maximizing perturbation `-y * alpha * w/|w|`; zero when `w = 0`, where
/// every feasible perturbation attains the same loss.
pub fn adversarial_perturbation(w: &Vector, e: &LabeledExample, alpha: f64) -> Result<Vector> {
    check_alpha(alpha)?;
    check_dims(e.x.dim(), w.dim())?;
    let scale = -e.y.sign() * alpha;
    Ok(w.unit_direction().scaled(scale))
}

/// The adversarial example `(x + delta*, y)` for model `w`.
pub fn adversarial_example(w: &Vector, e: &LabeledExample, alpha: f64) -> Result<LabeledExample> {
    let delta = adversarial_perturbation(w, e, alpha)?;
    let x = e.x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
    Ok(LabeledExample::new(Vector::from_raw(x), e.y))
}

/// Gradient in `w` of the plain loss `f(-y<w,x>)` at a fixed example. Applied
/// to an adversarial example this is the Danskin subgradient of the robust
/// loss.
pub fn loss_gradient(kind: LinkFunction, w: &Vector, e: &LabeledExample) -> Result<Vector> {
    check_dims(e.x.dim(), w.dim())?;
    let y = e.y.sign();
    let scale = link_derivative(kind, -y * dot(w, &e.x));
    Ok(Vector::from_raw(e.x.iter().map(|x| -y * x * scale).collect()))
}

/// Closed-form subgradient `f'(-y<w,x> + alpha|w|) * (-y x + alpha w/|w|)`,
/// with `w/|w|` read as 0 at the origin.
pub fn robust_subgradient(kind: LinkFunction, w: &Vector, e: &LabeledExample, alpha: f64) -> Result<Vector> {
    check_alpha(alpha)?;
    check_dims(e.x.dim(), w.dim())?;
    let y = e.y.sign();
    let scale = link_derivative(kind, robust_score(w, e, alpha));
    let dir = w.unit_direction();
    let g =
        e.x.iter()
            .zip(dir.iter())
            .map(|(x, u)| scale * (-y * x + alpha * u))
            .collect();
    Ok(Vector::from_raw(g))
}

pub fn empirical_risk(kind: LinkFunction, w: &Vector, s: &Dataset) -> Result<f64> {
    check_dims(s.dim(), w.dim())?;
    let total: f64 = s.iter().map(|e| link_value(kind, -e.signed_score(w))).sum();
    Ok(total / s.len() as f64)
}

pub fn robust_risk(kind: LinkFunction, w: &Vector, s: &Dataset, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_dims(s.dim(), w.dim())?;
    let total: f64 = s.iter().map(|e| link_value(kind, robust_score(w, e, alpha))).sum();
    Ok(total / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LOGISTIC: LinkFunction = LinkFunction::Logistic;
    const RELU: LinkFunction = LinkFunction::Relu;

    // ln(1 + e^u) evaluated at 30 digits.
    const SOFTPLUS_NEG_HALF: f64 = 0.474_076_984_180_106_7;
    const SOFTPLUS_NEG_ONE: f64 = 0.313_261_687_518_222_8;
    const SOFTPLUS_FIVE: f64 = 5.006_715_348_489_118;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn ex(c: &[f64], y: f64) -> LabeledExample {
        LabeledExample::from_parts(c.to_vec(), y).unwrap()
    }

    fn pair() -> Dataset {
        Dataset::new(vec![ex(&[1.0, 0.0], 1.0), ex(&[-1.0, 0.0], -1.0)]).unwrap()
    }

    #[test]
    fn link_values() {
        assert_eq!(link_value(LOGISTIC, 0.0), std::f64::consts::LN_2);
        assert_eq!(link_value(LOGISTIC, 1000.0), 1000.0);
        assert_relative_eq!(link_value(LOGISTIC, -0.5), SOFTPLUS_NEG_HALF, max_relative = 1e-15);
        assert_eq!(link_value(RELU, -3.0), 0.0);
    }

    #[test]
    fn link_derivatives() {
        assert_eq!(link_derivative(LOGISTIC, 0.0), 0.5);
        let d = link_derivative(LOGISTIC, -1000.0);
        assert!(d.is_finite() && d == 0.0);
        assert_eq!(link_derivative(RELU, 0.3), 1.0);
        assert_eq!(link_derivative(RELU, 0.0), 1.0);
        assert_eq!(link_derivative(RELU, -1e-300), 0.0);
    }

    #[test]
    fn softplus_stable_for_large_arguments() {
        for &u in &[-1e6, -700.0, -40.0, 40.0, 700.0, 1e6] {
            let f = link_value(LOGISTIC, u);
            assert!(f.is_finite());
            assert_eq!(f, u.max(0.0) + (-u.abs()).exp().ln_1p());
        }
    }

    #[test]
    fn pointwise_losses() {
        let e = ex(&[1.0, 0.0], 1.0);
        let zero = Vector::zeros(2);
        assert_eq!(pointwise_loss(LOGISTIC, &zero, &e).unwrap(), std::f64::consts::LN_2);
        assert_relative_eq!(
            pointwise_loss(LOGISTIC, &v(&[1.0, 0.0]), &e).unwrap(),
            SOFTPLUS_NEG_ONE,
            max_relative = 1e-15
        );
        assert_eq!(pointwise_loss(RELU, &v(&[1.0, 0.0]), &e).unwrap(), 0.0);
        assert!(matches!(
            pointwise_loss(LOGISTIC, &v(&[1.0, 0.0, 0.0]), &e),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn robust_losses() {
        let e = ex(&[1.0, 0.0], 1.0);
        let zero = Vector::zeros(2);
        assert_eq!(
            robust_pointwise_loss(LOGISTIC, &zero, &e, 0.5).unwrap(),
            std::f64::consts::LN_2
        );
        assert_relative_eq!(
            robust_pointwise_loss(LOGISTIC, &v(&[1.0, 0.0]), &e, 0.5).unwrap(),
            SOFTPLUS_NEG_HALF,
            max_relative = 1e-15
        );
        let origin = ex(&[0.0, 0.0], 1.0);
        assert_relative_eq!(
            robust_pointwise_loss(LOGISTIC, &v(&[3.0, 4.0]), &origin, 1.0).unwrap(),
            SOFTPLUS_FIVE,
            max_relative = 1e-15
        );
        assert!(matches!(
            robust_pointwise_loss(LOGISTIC, &zero, &e, -0.1),
            Err(Error::NegativeAlpha(_))
        ));
    }

    #[test]
    fn robust_loss_brute_force_oracle() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        // Max of the plain loss over sampled perturbations on the radius-alpha
        // sphere (the maximum of a monotone link over the ball sits on it).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases = [
            (v(&[1.0, 0.0]), ex(&[1.0, 0.0], 1.0), 0.5, SOFTPLUS_NEG_HALF),
            (v(&[3.0, 4.0]), ex(&[0.0, 0.0], 1.0), 1.0, SOFTPLUS_FIVE),
        ];
        for (w, e, alpha, expected) in cases {
            let mut best = f64::NEG_INFINITY;
            for _ in 0..100_000 {
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let x = vec![e.x[0] + alpha * theta.cos(), e.x[1] + alpha * theta.sin()];
                let pert = LabeledExample::new(Vector::from_raw(x), e.y);
                best = best.max(pointwise_loss(LOGISTIC, &w, &pert).unwrap());
            }
            let closed = robust_pointwise_loss(LOGISTIC, &w, &e, alpha).unwrap();
            assert!(best <= closed + 1e-12);
            assert!(closed <= best + 1e-4);
            assert_relative_eq!(closed, expected, max_relative = 1e-15);
            let adv = adversarial_example(&w, &e, alpha).unwrap();
            assert_relative_eq!(
                pointwise_loss(LOGISTIC, &w, &adv).unwrap(),
                closed,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn perturbations() {
        let pos = ex(&[0.0, 0.0], 1.0);
        let d = adversarial_perturbation(&v(&[3.0, 4.0]), &pos, 1.0).unwrap();
        assert_relative_eq!(d[0], -0.6, max_relative = 1e-15);
        assert_relative_eq!(d[1], -0.8, max_relative = 1e-15);

        let d = adversarial_perturbation(&Vector::zeros(2), &pos, 0.5).unwrap();
        assert!(d.is_zero());

        let neg = ex(&[5.0, 5.0], -1.0);
        let d = adversarial_perturbation(&v(&[1.0, 0.0]), &neg, 0.25).unwrap();
        assert_eq!(d.as_slice(), &[0.25, 0.0]);
    }

    #[test]
    fn subgradients() {
        let e = ex(&[1.0, 0.0], 1.0);
        let g = robust_subgradient(LOGISTIC, &Vector::zeros(2), &e, 0.5).unwrap();
        assert_eq!(g.as_slice(), &[-0.5, 0.0]);

        let g = robust_subgradient(LOGISTIC, &v(&[1.0, 0.0]), &e, 0.5).unwrap();
        assert_relative_eq!(g[0], -0.188_770_334_399_072_72, max_relative = 1e-14);
        assert_eq!(g[1], 0.0);

        let neg = ex(&[-1.0, 0.0], -1.0);
        let g = robust_subgradient(RELU, &v(&[1.0, 0.0]), &neg, 0.5).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn subgradient_matches_finite_differences_at_worked_point() {
        let e = ex(&[1.0, 0.0], 1.0);
        let w = v(&[1.0, 0.0]);
        let g = robust_subgradient(LOGISTIC, &w, &e, 0.5).unwrap();
        let fd = central_difference(&w, &e, 0.5, 1e-6);
        assert!((g[0] - fd[0]).abs() / fd[0].abs() < 1e-5);
        assert!(fd[1].abs() < 1e-9 && g[1] == 0.0);
    }

    fn central_difference(w: &Vector, e: &LabeledExample, alpha: f64, h: f64) -> Vec<f64> {
        (0..w.dim())
            .map(|i| {
                let mut plus = w.clone().into_inner();
                let mut minus = plus.clone();
                plus[i] += h;
                minus[i] -= h;
                let fp = robust_pointwise_loss(LOGISTIC, &v(&plus), e, alpha).unwrap();
                let fm = robust_pointwise_loss(LOGISTIC, &v(&minus), e, alpha).unwrap();
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn risks() {
        let s = pair();
        let zero = Vector::zeros(2);
        assert_eq!(empirical_risk(LOGISTIC, &zero, &s).unwrap(), std::f64::consts::LN_2);
        assert_eq!(robust_risk(LOGISTIC, &zero, &s, 0.75).unwrap(), std::f64::consts::LN_2);
        let w = v(&[1.0, 0.0]);
        assert_relative_eq!(
            empirical_risk(LOGISTIC, &w, &s).unwrap(),
            SOFTPLUS_NEG_ONE,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            robust_risk(LOGISTIC, &w, &s, 0.5).unwrap(),
            SOFTPLUS_NEG_HALF,
            max_relative = 1e-15
        );
        assert_eq!(empirical_risk(RELU, &v(&[2.0, 1.0]), &s).unwrap(), 0.0);
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
        assert!(matches!(
            Dataset::new(vec![ex(&[1.0], 1.0), ex(&[1.0, 2.0], -1.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LabeledExample::from_parts(vec![1.0], 0.5),
            Err(Error::InvalidLabel(_))
        ));
        assert!(Vector::new(vec![f64::NAN]).is_err());
        let s = Dataset::new(vec![ex(&[3.0, 4.0], 1.0), ex(&[1.0, 0.0], -1.0)]).unwrap();
        assert_eq!(s.max_norm(), 5.0);
    }

    fn finite_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, dim)
    }

    proptest! {
        #[test]
        fn robust_risk_reduces_to_empirical_risk_at_zero_alpha(
            w in finite_vec(3),
            xs in proptest::collection::vec((finite_vec(3), any::<bool>()), 1..6),
        ) {
            let s = Dataset::new(
                xs.into_iter()
                    .map(|(x, pos)| ex(&x, if pos { 1.0 } else { -1.0 }))
                    .collect(),
            ).unwrap();
            let w = v(&w);
            prop_assert_eq!(
                robust_risk(LOGISTIC, &w, &s, 0.0).unwrap(),
                empirical_risk(LOGISTIC, &w, &s).unwrap()
            );
        }

        #[test]
        fn robust_loss_is_convex(
            w1 in finite_vec(3), w2 in finite_vec(3), x in finite_vec(3),
            pos in any::<bool>(), alpha in 0.0f64..1.0,
        ) {
            let e = ex(&x, if pos { 1.0 } else { -1.0 });
            let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 0.5 * (a + b)).collect();
            let lm = robust_pointwise_loss(LOGISTIC, &v(&mid), &e, alpha).unwrap();
            let l1 = robust_pointwise_loss(LOGISTIC, &v(&w1), &e, alpha).unwrap();
            let l2 = robust_pointwise_loss(LOGISTIC, &v(&w2), &e, alpha).unwrap();
            prop_assert!(lm <= 0.5 * l1 + 0.5 * l2 + 1e-12);
        }

        #[test]
        fn robust_loss_monotone_in_alpha(
            w in finite_vec(3), x in finite_vec(3), pos in any::<bool>(),
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let e = ex(&x, if pos { 1.0 } else { -1.0 });
            let w = v(&w);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for kind in [LOGISTIC, RELU] {
                prop_assert!(
                    robust_pointwise_loss(kind, &w, &e, lo).unwrap()
                        <= robust_pointwise_loss(kind, &w, &e, hi).unwrap()
                );
            }
        }

        #[test]
        fn danskin_gradient_matches_closed_form(
            w in finite_vec(4), x in finite_vec(4), pos in any::<bool>(), alpha in 0.0f64..1.0,
        ) {
            let e = ex(&x, if pos { 1.0 } else { -1.0 });
            let w = v(&w);
            let adv = adversarial_example(&w, &e, alpha).unwrap();
            let danskin = loss_gradient(LOGISTIC, &w, &adv).unwrap();
            let closed = robust_subgradient(LOGISTIC, &w, &e, alpha).unwrap();
            for (a, b) in danskin.iter().zip(closed.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
