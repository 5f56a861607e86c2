//! Per-example losses and analytic gradients over a small model zoo.
//!
//! Models: a scalar 1D parameter, a linear single-output model with bias, a
//! softmax classifier, and a one-hidden-layer tanh MLP. Losses: logistic on
//! +/-1 labels, squared error, and cross-entropy from logits (always through
//! log-sum-exp so upstream weight updates never see an overflow).

use crate::error::{Error, Result};
use crate::tensor::{logsumexp, Mat64, SeededRng, Vec64};

/// Flat parameter vector plus a (layer name, rows, cols) shape descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamShape {
    layers: Vec<(String, usize, usize)>,
}

impl ParamShape {
    pub fn new(layers: Vec<(String, usize, usize)>) -> Self {
        ParamShape { layers }
    }

    pub fn flat(n: usize) -> Self {
        ParamShape {
            layers: vec![("theta".to_string(), n, 1)],
        }
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(|(_, r, c)| r * c).sum()
    }

    pub fn layers(&self) -> &[(String, usize, usize)] {
        &self.layers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec64,
    shape: ParamShape,
}

impl ParameterVector {
    pub fn new(values: Vec64, shape: ParamShape) -> Result<Self> {
        if values.len() != shape.total() {
            return Err(Error::dimension(format!(
                "ParameterVector: {} values for shape of {}",
                values.len(),
                shape.total()
            )));
        }
        if !values.all_finite() {
            return Err(Error::numeric("ParameterVector: non-finite values"));
        }
        Ok(ParameterVector { values, shape })
    }

    /// Unstructured vector with a single flat layer.
    pub fn flat(values: impl Into<Vec64>) -> Self {
        let values = values.into();
        let shape = ParamShape::flat(values.len());
        ParameterVector { values, shape }
    }

    pub(crate) fn from_parts(values: Vec64, shape: ParamShape) -> Self {
        debug_assert_eq!(values.len(), shape.total());
        ParameterVector { values, shape }
    }

    pub fn values(&self) -> &Vec64 {
        &self.values
    }

    pub fn shape(&self) -> &ParamShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Single scalar parameter, prediction `theta * x`.
    Scalar1D,
    /// Single-output linear model with bias.
    Linear { dim: usize },
    /// Linear softmax classifier.
    Softmax { dim: usize, classes: usize },
    /// One hidden tanh layer, then a linear softmax head.
    Mlp1 {
        dim: usize,
        hidden: usize,
        classes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Logistic,
    Squared,
    CrossEntropy,
}

/// A per-example loss: model kind, loss kind, l2 coefficient, label smoothing.
///
/// The l2 term is a property of the parameters, not of any single example; it
/// is applied by the optimizer to the aggregated gradient (coefficient `c`
/// adds `c * theta`, i.e. a `(c/2)||theta||^2` penalty) and never enters the
/// per-example losses consumed by the reweighting state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    pub kind: ModelKind,
    pub loss: LossKind,
    l2: f64,
    label_smoothing: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LossModel {
    pub fn new(kind: ModelKind, loss: LossKind) -> Result<Self> {
        let compatible = match loss {
            LossKind::Logistic | LossKind::Squared => {
                matches!(kind, ModelKind::Scalar1D | ModelKind::Linear { .. })
            }
            LossKind::CrossEntropy => {
                matches!(kind, ModelKind::Softmax { .. } | ModelKind::Mlp1 { .. })
            }
        };
        if !compatible {
            return Err(Error::parameter(format!(
                "loss {loss:?} is incompatible with model {kind:?}"
            )));
        }
        match kind {
            ModelKind::Linear { dim: 0 } => {
                return Err(Error::parameter("Linear: dim must be >= 1"))
            }
            ModelKind::Softmax { dim, classes } if dim == 0 || classes < 2 => {
                return Err(Error::parameter("Softmax: need dim >= 1 and classes >= 2"))
            }
            ModelKind::Mlp1 {
                dim,
                hidden,
                classes,
            } if dim == 0 || hidden == 0 || classes < 2 => {
                return Err(Error::parameter(
                    "Mlp1: need dim >= 1, hidden >= 1, classes >= 2",
                ))
            }
            _ => {}
        }
        Ok(LossModel {
            kind,
            loss,
            l2: 0.0,
            label_smoothing: 0.0,
        })
    }

    pub fn with_l2(mut self, coeff: f64) -> Result<Self> {
        if !(coeff >= 0.0 && coeff.is_finite()) {
            return Err(Error::parameter("l2 coefficient must be >= 0"));
        }
        self.l2 = coeff;
        Ok(self)
    }

    pub fn with_label_smoothing(mut self, factor: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&factor) {
            return Err(Error::parameter("label smoothing must lie in [0, 1)"));
        }
        self.label_smoothing = factor;
        Ok(self)
    }

    /// Copy of this model with label smoothing disabled (hard-label losses).
    pub fn without_smoothing(&self) -> Self {
        LossModel {
            label_smoothing: 0.0,
            ..*self
        }
    }

    pub fn l2_coeff(&self) -> f64 {
        self.l2
    }

    pub fn label_smoothing(&self) -> f64 {
        self.label_smoothing
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            ModelKind::Scalar1D => 1,
            ModelKind::Linear { dim } => dim,
            ModelKind::Softmax { dim, .. } => dim,
            ModelKind::Mlp1 { dim, .. } => dim,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Softmax { classes, .. } => Some(classes),
            ModelKind::Mlp1 { classes, .. } => Some(classes),
            _ => None,
        }
    }

    pub fn param_shape(&self) -> ParamShape {
        match self.kind {
            ModelKind::Scalar1D => ParamShape::flat(1),
            ModelKind::Linear { dim } => ParamShape::new(vec![
                ("w".to_string(), dim, 1),
                ("b".to_string(), 1, 1),
            ]),
            ModelKind::Softmax { dim, classes } => ParamShape::new(vec![
                ("w".to_string(), classes, dim),
                ("b".to_string(), classes, 1),
            ]),
            ModelKind::Mlp1 {
                dim,
                hidden,
                classes,
            } => ParamShape::new(vec![
                ("w1".to_string(), hidden, dim),
                ("b1".to_string(), hidden, 1),
                ("w2".to_string(), classes, hidden),
                ("b2".to_string(), classes, 1),
            ]),
        }
    }

    pub fn num_params(&self) -> usize {
        self.param_shape().total()
    }

    pub fn zero_params(&self) -> ParameterVector {
        ParameterVector::from_parts(Vec64::zeros(self.num_params()), self.param_shape())
    }

    /// Weights drawn N(0, 1/fan_in), biases zero.
    pub fn init_params(&self, rng: &mut SeededRng) -> ParameterVector {
        let shape = self.param_shape();
        let mut values = Vec::with_capacity(shape.total());
        for (name, rows, cols) in shape.layers() {
            let is_bias = name.starts_with('b');
            let fan_in = if *cols > 1 { *cols } else { *rows };
            let scale = if is_bias {
                0.0
            } else {
                1.0 / (fan_in as f64).sqrt()
            };
            for _ in 0..rows * cols {
                values.push(if is_bias { 0.0 } else { scale * rng.normal() });
            }
        }
        ParameterVector::from_parts(Vec64::new(values), shape)
    }

    fn validate_example(&self, theta: &[f64], x: &[f64], target: Target) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::dimension(format!(
                "theta has {} entries, model needs {}",
                theta.len(),
                self.num_params()
            )));
        }
        if x.len() != self.input_dim() {
            return Err(Error::dimension(format!(
                "input has {} features, model needs {}",
                x.len(),
                self.input_dim()
            )));
        }
        match (self.loss, target) {
            (LossKind::Logistic, Target::Real(y)) => {
                if y != 1.0 && y != -1.0 {
                    return Err(Error::Data(format!("logistic loss needs labels in {{-1, +1}}, got {y}")));
                }
            }
            (LossKind::Squared, Target::Real(_)) => {}
            (LossKind::CrossEntropy, Target::Class(c)) => {
                let k = self.num_classes().expect("CE model has classes");
                if c >= k {
                    return Err(Error::Data(format!("class {c} out of range for K={k}")));
                }
            }
            (LossKind::CrossEntropy, Target::Soft(t)) => {
                let k = self.num_classes().expect("CE model has classes");
                if t.len() != k {
                    return Err(Error::dimension(format!(
                        "soft target has {} entries, model has K={k}",
                        t.len()
                    )));
                }
            }
            (loss, target) => {
                return Err(Error::Data(format!(
                    "target {target:?} does not match loss {loss:?}"
                )));
            }
        }
        Ok(())
    }

    /// Class logits for a single input; classifier models only.
    pub fn logits(&self, theta: &ParameterVector, x: &[f64]) -> Result<Vec64> {
        if theta.len() != self.num_params() {
            return Err(Error::dimension("theta length differs from model".to_string()));
        }
        if x.len() != self.input_dim() {
            return Err(Error::dimension("input length differs from model".to_string()));
        }
        match self.kind {
            ModelKind::Softmax { dim, classes } => {
                Ok(Vec64::new(softmax_logits(theta.values(), x, dim, classes)))
            }
            ModelKind::Mlp1 {
                dim,
                hidden,
                classes,
            } => {
                let (_, z) = mlp_forward(theta.values(), x, dim, hidden, classes);
                Ok(Vec64::new(z))
            }
            _ => Err(Error::Capability(
                "logits are only defined for classifier models".into(),
            )),
        }
    }

    /// Loss of a single example; validates dimensions and target kind.
    pub fn loss_i(&self, theta: &ParameterVector, x: &[f64], target: Target) -> Result<f64> {
        self.validate_example(theta.values(), x, target)?;
        Ok(self.loss_raw(theta.values(), x, target))
    }

    /// Analytic gradient of `loss_i` with respect to theta.
    pub fn grad_i(&self, theta: &ParameterVector, x: &[f64], target: Target) -> Result<Vec64> {
        self.validate_example(theta.values(), x, target)?;
        let mut g = Vec64::zeros(theta.len());
        self.add_scaled_grad(theta.values(), x, target, 1.0, &mut g);
        Ok(g)
    }

    /// Loss with pre-validated inputs.
    pub(crate) fn loss_raw(&self, theta: &[f64], x: &[f64], target: Target) -> f64 {
        match self.kind {
            ModelKind::Scalar1D => {
                let score = theta[0] * x[0];
                self.scalar_loss(score, target)
            }
            ModelKind::Linear { dim } => {
                let mut score = theta[dim];
                for (w, xi) in theta[..dim].iter().zip(x) {
                    score += w * xi;
                }
                self.scalar_loss(score, target)
            }
            ModelKind::Softmax { dim, classes } => {
                let z = softmax_logits(theta, x, dim, classes);
                self.ce_from_logits(&z, target)
            }
            ModelKind::Mlp1 {
                dim,
                hidden,
                classes,
            } => {
                let (_, z) = mlp_forward(theta, x, dim, hidden, classes);
                self.ce_from_logits(&z, target)
            }
        }
    }

    fn scalar_loss(&self, score: f64, target: Target) -> f64 {
        let y = match target {
            Target::Real(y) => y,
            _ => unreachable!("validated"),
        };
        match self.loss {
            LossKind::Logistic => softplus(-y * score),
            LossKind::Squared => 0.5 * (score - y) * (score - y),
            LossKind::CrossEntropy => unreachable!("validated"),
        }
    }

    /// Cross-entropy from logits through log-sum-exp.
    fn ce_from_logits(&self, z: &[f64], target: Target) -> f64 {
        let k = z.len();
        let lse = logsumexp(z).expect("non-empty logits");
        let f = self.label_smoothing;
        let z_sum: f64 = z.iter().sum();
        let dot_tz = match target {
            Target::Class(c) => (1.0 - f) * z[c] + f / k as f64 * z_sum,
            Target::Soft(t) => {
                let raw = t.iter().zip(z).fold(0.0, |a, (ti, zi)| a + ti * zi);
                (1.0 - f) * raw + f / k as f64 * z_sum
            }
            Target::Real(_) => unreachable!("validated"),
        };
        lse - dot_tz
    }

    /// acc += scale * grad(loss_i); inputs must be pre-validated.
    pub(crate) fn add_scaled_grad(
        &self,
        theta: &[f64],
        x: &[f64],
        target: Target,
        scale: f64,
        acc: &mut [f64],
    ) {
        match self.kind {
            ModelKind::Scalar1D => {
                let score = theta[0] * x[0];
                let d = self.scalar_dloss(score, target);
                acc[0] += scale * d * x[0];
            }
            ModelKind::Linear { dim } => {
                let mut score = theta[dim];
                for (w, xi) in theta[..dim].iter().zip(x) {
                    score += w * xi;
                }
                let d = self.scalar_dloss(score, target);
                for (a, xi) in acc[..dim].iter_mut().zip(x) {
                    *a += scale * d * xi;
                }
                acc[dim] += scale * d;
            }
            ModelKind::Softmax { dim, classes } => {
                let z = softmax_logits(theta, x, dim, classes);
                let dz = self.logit_grad(&z, target);
                for c in 0..classes {
                    let coeff = scale * dz[c];
                    let row = &mut acc[c * dim..(c + 1) * dim];
                    for (a, xi) in row.iter_mut().zip(x) {
                        *a += coeff * xi;
                    }
                    acc[classes * dim + c] += coeff;
                }
            }
            ModelKind::Mlp1 {
                dim,
                hidden,
                classes,
            } => {
                let (h, z) = mlp_forward(theta, x, dim, hidden, classes);
                let dz = self.logit_grad(&z, target);
                let w2_off = hidden * dim + hidden;
                let b2_off = w2_off + classes * hidden;
                // Output layer.
                for c in 0..classes {
                    let coeff = scale * dz[c];
                    let row = &mut acc[w2_off + c * hidden..w2_off + (c + 1) * hidden];
                    for (a, hj) in row.iter_mut().zip(&h) {
                        *a += coeff * hj;
                    }
                    acc[b2_off + c] += coeff;
                }
                // Hidden layer through tanh.
                for j in 0..hidden {
                    let mut dh = 0.0;
                    for c in 0..classes {
                        dh += dz[c] * theta[w2_off + c * hidden + j];
                    }
                    let da = dh * (1.0 - h[j] * h[j]);
                    let coeff = scale * da;
                    let row = &mut acc[j * dim..(j + 1) * dim];
                    for (a, xi) in row.iter_mut().zip(x) {
                        *a += coeff * xi;
                    }
                    acc[hidden * dim + j] += coeff;
                }
            }
        }
    }

    fn scalar_dloss(&self, score: f64, target: Target) -> f64 {
        let y = match target {
            Target::Real(y) => y,
            _ => unreachable!("validated"),
        };
        match self.loss {
            LossKind::Logistic => -y * sigmoid(-y * score),
            LossKind::Squared => score - y,
            LossKind::CrossEntropy => unreachable!("validated"),
        }
    }

    /// d(loss)/d(logits) = softmax(z) - smoothed target.
    fn logit_grad(&self, z: &[f64], target: Target) -> Vec<f64> {
        let k = z.len();
        let lse = logsumexp(z).expect("non-empty logits");
        let f = self.label_smoothing;
        let mut dz: Vec<f64> = z.iter().map(|zi| (zi - lse).exp()).collect();
        for d in dz.iter_mut() {
            *d -= f / k as f64;
        }
        match target {
            Target::Class(c) => dz[c] -= 1.0 - f,
            Target::Soft(t) => {
                for (d, ti) in dz.iter_mut().zip(t) {
                    *d -= (1.0 - f) * ti;
                }
            }
            Target::Real(_) => unreachable!("validated"),
        }
        dz
    }
}

fn softmax_logits(theta: &[f64], x: &[f64], dim: usize, classes: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(classes);
    for c in 0..classes {
        let row = &theta[c * dim..(c + 1) * dim];
        let mut acc = theta[classes * dim + c];
        for (w, xi) in row.iter().zip(x) {
            acc += w * xi;
        }
        z.push(acc);
    }
    z
}

fn mlp_forward(
    theta: &[f64],
    x: &[f64],
    dim: usize,
    hidden: usize,
    classes: usize,
) -> (Vec<f64>, Vec<f64>) {
    let b1_off = hidden * dim;
    let w2_off = b1_off + hidden;
    let b2_off = w2_off + classes * hidden;
    let mut h = Vec::with_capacity(hidden);
    for j in 0..hidden {
        let row = &theta[j * dim..(j + 1) * dim];
        let mut a = theta[b1_off + j];
        for (w, xi) in row.iter().zip(x) {
            a += w * xi;
        }
        h.push(a.tanh());
    }
    let mut z = Vec::with_capacity(classes);
    for c in 0..classes {
        let row = &theta[w2_off + c * hidden..w2_off + (c + 1) * hidden];
        let mut a = theta[b2_off + c];
        for (w, hj) in row.iter().zip(&h) {
            a += w * hj;
        }
        z.push(a);
    }
    (h, z)
}

/// Per-example target.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Real(f64),
    Class(usize),
    Soft(&'a [f64]),
}

/// Borrowed targets for a whole example set.
#[derive(Debug, Clone, Copy)]
pub enum TargetsRef<'a> {
    Reals(&'a [f64]),
    Classes(&'a [usize]),
    Soft(&'a [Vec64]),
}

impl TargetsRef<'_> {
    pub fn len(&self) -> usize {
        match self {
            TargetsRef::Reals(v) => v.len(),
            TargetsRef::Classes(v) => v.len(),
            TargetsRef::Soft(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A borrowed view of (inputs, targets) pairs — the unit every training loop
/// and evaluator consumes.
#[derive(Debug, Clone, Copy)]
pub struct Examples<'a> {
    inputs: &'a Mat64,
    targets: TargetsRef<'a>,
}

impl<'a> Examples<'a> {
    pub fn new(inputs: &'a Mat64, targets: TargetsRef<'a>) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::dimension(format!(
                "{} input rows vs {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        Ok(Examples { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn inputs(&self) -> &'a Mat64 {
        self.inputs
    }

    pub fn input(&self, i: usize) -> &'a [f64] {
        self.inputs.row(i)
    }

    pub fn target(&self, i: usize) -> Target<'a> {
        match self.targets {
            TargetsRef::Reals(v) => Target::Real(v[i]),
            TargetsRef::Classes(v) => Target::Class(v[i]),
            TargetsRef::Soft(v) => Target::Soft(&v[i]),
        }
    }
}

/// Smoothness (and optionally Lipschitz/bound) constants of a loss family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessProfile {
    pub beta: f64,
    pub lipschitz: Option<f64>,
    pub bound: Option<f64>,
}

impl SmoothnessProfile {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::parameter("beta must be positive"));
        }
        Ok(SmoothnessProfile {
            beta,
            lipschitz: None,
            bound: None,
        })
    }

    pub fn with_bounds(beta: f64, lipschitz: f64, bound: f64) -> Result<Self> {
        if !(beta > 0.0 && lipschitz > 0.0 && bound > 0.0) {
            return Err(Error::parameter(
                "smoothness constants must be positive when set",
            ));
        }
        Ok(SmoothnessProfile {
            beta,
            lipschitz: Some(lipschitz),
            bound: Some(bound),
        })
    }
}

/// Analytic smoothness constant of the dataset-averaged loss.
///
/// Supported: the 1D logistic loss on unit-magnitude inputs (bounding the
/// second derivative by 1) and squared losses, where beta is the largest
/// eigenvalue of the empirical second-moment matrix of the (bias-extended)
/// inputs.
pub fn smoothness_of(model: &LossModel, data: &Examples) -> Result<SmoothnessProfile> {
    if data.is_empty() {
        return Err(Error::Data("smoothness_of: empty dataset".into()));
    }
    match (model.kind, model.loss) {
        (ModelKind::Scalar1D, LossKind::Logistic) => {
            for i in 0..data.len() {
                if (data.input(i)[0].abs() - 1.0).abs() > 1e-12 {
                    return Err(Error::Capability(
                        "logistic smoothness is only derived for |x| = 1".into(),
                    ));
                }
            }
            SmoothnessProfile::new(1.0)
        }
        (ModelKind::Scalar1D, LossKind::Squared) => {
            let n = data.len() as f64;
            let beta = (0..data.len())
                .map(|i| data.input(i)[0] * data.input(i)[0])
                .sum::<f64>()
                / n;
            SmoothnessProfile::new(beta)
        }
        (ModelKind::Linear { dim }, LossKind::Squared) => {
            // Gram matrix of inputs extended with the bias feature.
            let d = dim + 1;
            let n = data.len() as f64;
            let mut gram = Mat64::zeros(d, d);
            for i in 0..data.len() {
                let x = data.input(i);
                for r in 0..d {
                    let xr = if r < dim { x[r] } else { 1.0 };
                    for c in 0..d {
                        let xc = if c < dim { x[c] } else { 1.0 };
                        gram.set(r, c, gram.get(r, c) + xr * xc / n);
                    }
                }
            }
            let beta = crate::tensor::singular_values(&gram)?
                .into_iter()
                .fold(0.0f64, f64::max);
            SmoothnessProfile::new(beta)
        }
        _ => Err(Error::Capability(format!(
            "no analytic smoothness for ({:?}, {:?})",
            model.kind, model.loss
        ))),
    }
}

/// Max relative gradient error against central finite differences:
/// `|analytic - numeric| / (|analytic| + h)`, maximized over all examples
/// and coordinates.
pub fn finite_diff_check(
    model: &LossModel,
    theta: &ParameterVector,
    data: &Examples,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::parameter("finite_diff_check: h must be > 0"));
    }
    let mut worst = 0.0f64;
    let mut probe = theta.values().to_vec();
    for i in 0..data.len() {
        let x = data.input(i);
        let target = data.target(i);
        let analytic = model.grad_i(theta, x, target)?;
        for j in 0..probe.len() {
            let orig = probe[j];
            probe[j] = orig + h;
            let plus = model.loss_raw(&probe, x, target);
            probe[j] = orig - h;
            let minus = model.loss_raw(&probe, x, target);
            probe[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic[j] - numeric).abs() / (analytic[j].abs() + h);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// `(1 - factor) * onehot + factor / K` on every coordinate.
pub fn smooth_labels(onehot: &Vec64, factor: f64) -> Result<Vec64> {
    if !(0.0..1.0).contains(&factor) {
        return Err(Error::parameter("smoothing factor must lie in [0, 1)"));
    }
    let k = onehot.len();
    if k == 0 {
        return Err(Error::dimension("smooth_labels: empty target"));
    }
    let ones = onehot.iter().filter(|&&v| v == 1.0).count();
    let zeros = onehot.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || ones + zeros != k {
        return Err(Error::parameter(
            "smooth_labels: input must be exactly one-hot",
        ));
    }
    let base = factor / k as f64;
    Ok(Vec64::new(
        onehot.iter().map(|&v| (1.0 - factor) * v + base).collect(),
    ))
}

/// One-hot vector for class `c` out of `k`.
pub fn onehot(c: usize, k: usize) -> Result<Vec64> {
    if c >= k {
        return Err(Error::parameter(format!("onehot: class {c} out of {k}")));
    }
    let mut v = Vec64::zeros(k);
    v[c] = 1.0;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    fn scalar_logistic() -> LossModel {
        LossModel::new(ModelKind::Scalar1D, LossKind::Logistic).unwrap()
    }

    fn scalar_squared() -> LossModel {
        LossModel::new(ModelKind::Scalar1D, LossKind::Squared).unwrap()
    }

    #[test]
    fn incompatible_pairs_rejected() {
        assert!(LossModel::new(ModelKind::Scalar1D, LossKind::CrossEntropy).is_err());
        assert!(LossModel::new(
            ModelKind::Softmax { dim: 2, classes: 3 },
            LossKind::Squared
        )
        .is_err());
    }

    #[test]
    fn scalar_logistic_values() {
        let m = scalar_logistic();
        let theta = ParameterVector::flat(vec![0.0]);
        let l = m.loss_i(&theta, &[1.0], Target::Real(1.0)).unwrap();
        assert!((l - LN_2).abs() < 1e-15);
        let g = m.grad_i(&theta, &[1.0], Target::Real(1.0)).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_squared_values() {
        let m = scalar_squared();
        let theta = ParameterVector::flat(vec![1.0 / 3.0]);
        let l = m.loss_i(&theta, &[1.0], Target::Real(1.0)).unwrap();
        assert!((l - 2.0 / 9.0).abs() < 1e-15);
        // Zero exactly when the prediction equals the label, and the
        // gradient vanishes there.
        let at_min = ParameterVector::flat(vec![2.0]);
        assert_eq!(m.loss_i(&at_min, &[1.5], Target::Real(3.0)).unwrap(), 0.0);
        assert!(m.loss_i(&at_min, &[1.5], Target::Real(3.1)).unwrap() > 0.0);
        let g = m.grad_i(&at_min, &[1.5], Target::Real(3.0)).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn softmax_uniform_logits_give_ln_k() {
        let m = LossModel::new(ModelKind::Softmax { dim: 3, classes: 4 }, LossKind::CrossEntropy)
            .unwrap();
        let theta = m.zero_params();
        let l = m
            .loss_i(&theta, &[0.3, -1.0, 2.0], Target::Class(2))
            .unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn clean_logistic_mean_matches_closed_form() {
        // With x_i = y_i = 1 the dataset-mean loss is log(1 + exp(-theta)).
        let m = scalar_logistic();
        let inputs = Mat64::from_column(&[1.0; 6]);
        let ys = [1.0; 6];
        let data = Examples::new(&inputs, TargetsRef::Reals(&ys)).unwrap();
        for theta_val in [-1.5, 0.0, 0.7, 3.0] {
            let theta = ParameterVector::flat(vec![theta_val]);
            let mean = (0..data.len())
                .map(|i| m.loss_raw(theta.values(), data.input(i), data.target(i)))
                .sum::<f64>()
                / 6.0;
            assert!((mean - softplus(-theta_val)).abs() < 1e-15);
        }
    }

    #[test]
    fn losses_are_nonnegative() {
        let mut rng = SeededRng::new(3);
        let m = LossModel::new(
            ModelKind::Mlp1 {
                dim: 4,
                hidden: 8,
                classes: 3,
            },
            LossKind::CrossEntropy,
        )
        .unwrap();
        for _ in 0..50 {
            let theta = m.init_params(&mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let c = rng.range(3);
            let l = m.loss_i(&theta, &x, Target::Class(c)).unwrap();
            assert!(l >= 0.0);
        }
    }

    #[test]
    fn finite_diff_quadratic_is_exact() {
        let m = LossModel::new(ModelKind::Linear { dim: 3 }, LossKind::Squared).unwrap();
        let mut rng = SeededRng::new(17);
        let theta = m.init_params(&mut rng);
        let data_vals: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let inputs = Mat64::new(4, 3, data_vals).unwrap();
        let ys: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let data = Examples::new(&inputs, TargetsRef::Reals(&ys)).unwrap();
        let err = finite_diff_check(&m, &theta, &data, 1e-6).unwrap();
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn finite_diff_logistic_at_zero() {
        let m = scalar_logistic();
        let theta = ParameterVector::flat(vec![0.0]);
        let inputs = Mat64::from_column(&[1.0, -1.0, 1.0]);
        let ys = [1.0, -1.0, -1.0];
        let data = Examples::new(&inputs, TargetsRef::Reals(&ys)).unwrap();
        let err = finite_diff_check(&m, &theta, &data, 1e-6).unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn finite_diff_mlp_over_seeds() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(seed);
            let m = LossModel::new(
                ModelKind::Mlp1 {
                    dim: 3,
                    hidden: 5,
                    classes: 4,
                },
                LossKind::CrossEntropy,
            )
            .unwrap()
            .with_label_smoothing(if seed % 2 == 0 { 0.0 } else { 0.1 })
            .unwrap();
            let theta = m.init_params(&mut rng);
            let vals: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
            let inputs = Mat64::new(2, 3, vals).unwrap();
            let cs = [rng.range(4), rng.range(4)];
            let data = Examples::new(&inputs, TargetsRef::Classes(&cs)).unwrap();
            let err = finite_diff_check(&m, &theta, &data, 1e-6).unwrap();
            assert!(err < 1e-5, "seed {seed}: err {err}");
        }
    }

    #[test]
    fn smoothness_cases() {
        let inputs = Mat64::from_column(&[1.0, -1.0, 1.0, -1.0]);
        let ys = [1.0, -1.0, 1.0, -1.0];
        let data = Examples::new(&inputs, TargetsRef::Reals(&ys)).unwrap();

        let p = smoothness_of(&scalar_logistic(), &data).unwrap();
        assert_eq!(p.beta, 1.0);

        let p = smoothness_of(&scalar_squared(), &data).unwrap();
        assert!((p.beta - 1.0).abs() < 1e-12);

        let mlp = LossModel::new(
            ModelKind::Mlp1 {
                dim: 1,
                hidden: 2,
                classes: 2,
            },
            LossKind::CrossEntropy,
        )
        .unwrap();
        let cs = [0usize, 1, 0, 1];
        let cdata = Examples::new(&inputs, TargetsRef::Classes(&cs)).unwrap();
        assert!(matches!(
            smoothness_of(&mlp, &cdata),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn smooth_labels_cases() {
        let oh = onehot(0, 3).unwrap();
        let same = smooth_labels(&oh, 0.0).unwrap();
        assert_eq!(same.as_slice(), oh.as_slice());

        let oh10 = onehot(4, 10).unwrap();
        let s = smooth_labels(&oh10, 0.1).unwrap();
        assert!((s[4] - 0.91).abs() < 1e-15);
        assert!((s[0] - 0.01).abs() < 1e-15);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(smooth_labels(&oh, 1.0).is_err());
        assert!(smooth_labels(&Vec64::new(vec![0.5, 0.5]), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn smooth_labels_sum_and_argmax(c in 0usize..8, factor in 0.0f64..0.8) {
            let oh = onehot(c, 8).unwrap();
            let s = smooth_labels(&oh, factor).unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let argmax = s
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            prop_assert_eq!(argmax, c);
        }

        #[test]
        fn grad_matches_finite_differences(seed in 0u64..200) {
            let mut rng = SeededRng::new(seed);
            let (m, dim) = match seed % 4 {
                0 => (scalar_logistic(), 1),
                1 => (scalar_squared(), 1),
                2 => (
                    LossModel::new(ModelKind::Linear { dim: 3 }, LossKind::Logistic).unwrap(),
                    3,
                ),
                _ => (
                    LossModel::new(ModelKind::Softmax { dim: 3, classes: 3 }, LossKind::CrossEntropy)
                        .unwrap(),
                    3,
                ),
            };
            let theta = m.init_params(&mut rng);
            let vals: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let inputs = Mat64::new(1, dim, vals).unwrap();
            let ys = [if rng.next_f64() < 0.5 { 1.0 } else { -1.0 }];
            let cs = [rng.range(3)];
            let data = match m.loss {
                LossKind::CrossEntropy => Examples::new(&inputs, TargetsRef::Classes(&cs)).unwrap(),
                _ => Examples::new(&inputs, TargetsRef::Reals(&ys)).unwrap(),
            };
            let err = finite_diff_check(&m, &theta, &data, 1e-6).unwrap();
            prop_assert!(err < 1e-5, "err {}", err);
        }
    }
}
