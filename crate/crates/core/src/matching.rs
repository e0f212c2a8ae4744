//! Matching layer: smoothed cosine against per-state descriptors, max-over-states
//! pooling, softmax, fusion with the image-side head, state selection, the
//! negative log-likelihood loss and its exact gradients, and SGD training.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};

/// Smoothing term in the cosine denominator.
pub const COSINE_EPS: f64 = 1e-5;
pub const DEFAULT_DESCRIPTOR_DIM: usize = 64;
/// Clamp applied to predicted probabilities before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(pub DVector<f64>);

impl Descriptor {
    pub fn from_slice(values: &[f64]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `x . y / (|x||y| + eps)`.
pub fn cosine_sim(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    dot / (norm(x) * norm(y) + COSINE_EPS)
}

/// Descriptors of the sampled states of one catalog entry, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDescriptorMatrix {
    pub entry_id: u16,
    pub columns: DMatrix<f64>,
}

impl StateDescriptorMatrix {
    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn states(&self) -> usize {
        self.columns.ncols()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.columns.as_slice()[i * d..(i + 1) * d]
    }
}

/// The precomputed descriptor matrices of every catalog entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBank {
    catalog: Vec<CatalogEntry>,
    matrices: Vec<StateDescriptorMatrix>,
    descriptor_dim: usize,
    column_norms: Vec<Vec<f64>>,
}

impl ScenarioBank {
    pub fn new(catalog: Vec<CatalogEntry>, matrices: Vec<StateDescriptorMatrix>) -> Result<Self> {
        if catalog.is_empty() {
            return Err(Error::Bank("bank has no entries".into()));
        }
        if catalog.len() != matrices.len() {
            return Err(Error::Bank(format!(
                "{} catalog entries but {} matrices",
                catalog.len(),
                matrices.len()
            )));
        }
        let descriptor_dim = matrices[0].dim();
        for (e, m) in catalog.iter().zip(&matrices) {
            if e.entry_id != m.entry_id {
                return Err(Error::Bank(format!(
                    "matrix for entry {} stored at catalog entry {}",
                    m.entry_id, e.entry_id
                )));
            }
            if m.dim() != descriptor_dim || m.states() == 0 {
                return Err(Error::Bank(format!(
                    "entry {} has shape {}x{}, expected {descriptor_dim} rows",
                    m.entry_id,
                    m.dim(),
                    m.states()
                )));
            }
            if m.columns.iter().any(|v| !v.is_finite()) {
                return Err(Error::Bank(format!("entry {} has non-finite values", m.entry_id)));
            }
        }
        let column_norms = matrices
            .iter()
            .map(|m| (0..m.states()).map(|i| norm(m.column(i))).collect())
            .collect();
        Ok(Self {
            catalog,
            matrices,
            descriptor_dim,
            column_norms,
        })
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn matrices(&self) -> &[StateDescriptorMatrix] {
        &self.matrices
    }

    pub fn descriptor_dim(&self) -> usize {
        self.descriptor_dim
    }

    /// Per-entry state similarities and winning state, using cached column norms.
    fn pool(&self, x: &[f64], x_norm: f64, h: usize) -> (Vec<f64>, usize) {
        let m = &self.matrices[h];
        let sims: Vec<f64> = (0..m.states())
            .map(|i| {
                let dot: f64 = x.iter().zip(m.column(i)).map(|(a, b)| a * b).sum();
                dot / (x_norm * self.column_norms[h][i] + COSINE_EPS)
            })
            .collect();
        let best = argmax(&sims);
        (sims, best)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn index_of(&self, entry_id: u16) -> Option<usize> {
        self.catalog.iter().position(|e| e.entry_id == entry_id)
    }

    fn check_dim(&self, x: &Descriptor) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Bank("bank has no entries".into()));
        }
        if x.dim() != self.descriptor_dim {
            return Err(Error::Bank(format!(
                "descriptor has {} components, bank expects {}",
                x.dim(),
                self.descriptor_dim
            )));
        }
        Ok(())
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / total).collect()
}

fn pool_states(x: &[f64], m: &StateDescriptorMatrix) -> (Vec<f64>, usize) {
    let sims: Vec<f64> = (0..m.states()).map(|i| cosine_sim(x, m.column(i))).collect();
    let best = argmax(&sims);
    (sims, best)
}

/// Per-state similarities and their maximum.
pub fn score_entry(x: &Descriptor, m: &StateDescriptorMatrix) -> Result<(Vec<f64>, f64)> {
    if x.dim() != m.dim() {
        return Err(Error::Bank(format!(
            "descriptor has {} components, entry {} expects {}",
            x.dim(),
            m.entry_id,
            m.dim()
        )));
    }
    let (sims, best) = pool_states(x.as_slice(), m);
    let conf = sims[best];
    Ok((sims, conf))
}

/// Max-over-states confidence of every bank entry.
pub fn motion_confidences(x: &Descriptor, bank: &ScenarioBank) -> Result<Vec<f64>> {
    bank.check_dim(x)?;
    let xn = norm(x.as_slice());
    Ok((0..bank.len())
        .map(|h| {
            let (sims, best) = bank.pool(x.as_slice(), xn, h);
            sims[best]
        })
        .collect())
}

pub fn motion_scores(x: &Descriptor, bank: &ScenarioBank) -> Result<Vec<f64>> {
    Ok(softmax(&motion_confidences(x, bank)?))
}

/// Affine encoder from raw features to descriptors plus the image-side
/// classification head over bank entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// D x R
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    /// K x D
    pub classifier_weight: DMatrix<f64>,
    pub classifier_bias: DVector<f64>,
}

impl EncoderParams {
    pub fn zeros(raw_dim: usize, descriptor_dim: usize, entries: usize) -> Self {
        Self {
            weight: DMatrix::zeros(descriptor_dim, raw_dim),
            bias: DVector::zeros(descriptor_dim),
            classifier_weight: DMatrix::zeros(entries, descriptor_dim),
            classifier_bias: DVector::zeros(entries),
        }
    }

    /// Identity block encoder (raw features copied into the leading
    /// components) with a zero classifier head.
    pub fn identity(raw_dim: usize, descriptor_dim: usize, entries: usize) -> Self {
        let mut p = Self::zeros(raw_dim, descriptor_dim, entries);
        for i in 0..raw_dim.min(descriptor_dim) {
            p.weight[(i, i)] = 1.0;
        }
        p
    }

    /// Gaussian weights with standard deviation `10 / fan_in`, zero biases.
    pub fn gaussian(raw_dim: usize, descriptor_dim: usize, entries: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = Normal::new(0.0, 10.0 / raw_dim as f64).expect("finite sigma");
        let head = Normal::new(0.0, 10.0 / descriptor_dim as f64).expect("finite sigma");
        let mut p = Self::zeros(raw_dim, descriptor_dim, entries);
        // fill row-major so the draw order does not depend on storage layout
        for r in 0..descriptor_dim {
            for c in 0..raw_dim {
                p.weight[(r, c)] = enc.sample(&mut rng);
            }
        }
        for r in 0..entries {
            for c in 0..descriptor_dim {
                p.classifier_weight[(r, c)] = head.sample(&mut rng);
            }
        }
        p
    }

    pub fn raw_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn descriptor_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn entries(&self) -> usize {
        self.classifier_weight.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.descriptor_dim();
        if self.bias.len() != d || self.classifier_weight.ncols() != d || self.classifier_bias.len() != self.entries() {
            return Err(Error::Param(format!(
                "inconsistent encoder shapes: weight {}x{}, bias {}, head {}x{}, head bias {}",
                d,
                self.raw_dim(),
                self.bias.len(),
                self.classifier_weight.nrows(),
                self.classifier_weight.ncols(),
                self.classifier_bias.len()
            )));
        }
        let all = self
            .weight
            .iter()
            .chain(self.bias.iter())
            .chain(self.classifier_weight.iter())
            .chain(self.classifier_bias.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("encoder parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len() + self.classifier_weight.len() + self.classifier_bias.len()
    }

    /// All parameters, each matrix row-major, in field order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        push_row_major(&mut out, &self.weight);
        out.extend(self.bias.iter());
        push_row_major(&mut out, &self.classifier_weight);
        out.extend(self.classifier_bias.iter());
        out
    }

    pub fn from_flat(raw_dim: usize, descriptor_dim: usize, entries: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(raw_dim, descriptor_dim, entries);
        if flat.len() != p.param_count() {
            return Err(Error::Param(format!(
                "expected {} parameters, got {}",
                p.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        fill_row_major(&mut p.weight, &mut it);
        p.bias.iter_mut().for_each(|v| *v = it.next().unwrap());
        fill_row_major(&mut p.classifier_weight, &mut it);
        p.classifier_bias.iter_mut().for_each(|v| *v = it.next().unwrap());
        Ok(p)
    }

    fn fill_zero(&mut self) {
        self.weight.fill(0.0);
        self.bias.fill(0.0);
        self.classifier_weight.fill(0.0);
        self.classifier_bias.fill(0.0);
    }

    fn axpy(&mut self, scale: f64, other: &EncoderParams) {
        self.weight += &other.weight * scale;
        self.bias += &other.bias * scale;
        self.classifier_weight += &other.classifier_weight * scale;
        self.classifier_bias += &other.classifier_bias * scale;
    }
}

fn push_row_major(out: &mut Vec<f64>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter());
    }
}

fn fill_row_major(m: &mut DMatrix<f64>, it: &mut impl Iterator<Item = f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            m[(r, c)] = it.next().unwrap();
        }
    }
}

pub fn encode(x_raw: &[f64], params: &EncoderParams) -> Result<Descriptor> {
    if x_raw.len() != params.raw_dim() {
        return Err(Error::Param(format!(
            "raw feature has {} components, encoder expects {}",
            x_raw.len(),
            params.raw_dim()
        )));
    }
    let r = DVector::from_column_slice(x_raw);
    Ok(Descriptor(&params.weight * r + &params.bias))
}

fn head_logits(x: &Descriptor, params: &EncoderParams) -> Result<DVector<f64>> {
    if x.dim() != params.descriptor_dim() || params.classifier_bias.len() != params.entries() {
        return Err(Error::Param(format!(
            "descriptor has {} components, classifier expects {}",
            x.dim(),
            params.descriptor_dim()
        )));
    }
    Ok(&params.classifier_weight * &x.0 + &params.classifier_bias)
}

pub fn image_scores(x: &Descriptor, params: &EncoderParams) -> Result<Vec<f64>> {
    Ok(softmax(head_logits(x, params)?.as_slice()))
}

/// Weight of the image-side scores in the fused output; `1` ignores motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub lambda: f64,
}

impl FusionConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let cfg = Self { lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Param(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

pub fn fuse(img: &[f64], mot: &[f64], cfg: &FusionConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if img.len() != mot.len() {
        return Err(Error::Param(format!(
            "image scores have {} entries, motion scores {}",
            img.len(),
            mot.len()
        )));
    }
    let l = cfg.lambda;
    Ok(img.iter().zip(mot).map(|(a, b)| l * a + (1.0 - l) * b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub entry_id: u16,
    /// 1-based state index.
    pub state: usize,
    pub confidences: Vec<f64>,
    pub per_state_sims: Vec<f64>,
}

impl MatchResult {
    pub fn confidence(&self) -> f64 {
        self.confidences[argmax(&self.confidences)]
    }
}

pub fn predict(x: &Descriptor, bank: &ScenarioBank, params: &EncoderParams, cfg: &FusionConfig) -> Result<MatchResult> {
    bank.check_dim(x)?;
    if params.entries() != bank.len() {
        return Err(Error::Param(format!(
            "classifier has {} outputs for a bank of {}",
            params.entries(),
            bank.len()
        )));
    }
    let mot = motion_scores(x, bank)?;
    let img = image_scores(x, params)?;
    let fused = fuse(&img, &mot, cfg)?;
    let h = argmax(&fused);
    let (sims, best) = bank.pool(x.as_slice(), norm(x.as_slice()), h);
    Ok(MatchResult {
        entry_id: bank.catalog()[h].entry_id,
        state: best + 1,
        confidences: fused,
        per_state_sims: sims,
    })
}

/// One-hot target over the bank for `entry_id`.
pub fn one_hot(bank: &ScenarioBank, entry_id: u16) -> Result<Vec<f64>> {
    let idx = bank
        .index_of(entry_id)
        .ok_or_else(|| Error::Label(format!("entry {entry_id} is not in the bank")))?;
    let mut p = vec![0.0; bank.len()];
    p[idx] = 1.0;
    Ok(p)
}

fn clamp_prob(v: f64) -> f64 {
    v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-(1/n) sum [p log p_hat + (1 - p) log(1 - p_hat)]` over all `n` components.
pub fn nll_loss(p: &[f64], p_hat: &[f64]) -> Result<f64> {
    if p.len() != p_hat.len() || p.is_empty() {
        return Err(Error::Label(format!(
            "target has {} components, prediction {}",
            p.len(),
            p_hat.len()
        )));
    }
    let ones = p.iter().filter(|&&v| v == 1.0).count();
    if ones != 1 || p.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Label("target must be one-hot".into()));
    }
    let n = p.len() as f64;
    let sum: f64 = p
        .iter()
        .zip(p_hat)
        .map(|(&pi, &qi)| {
            let q = clamp_prob(qi);
            pi * q.ln() + (1.0 - pi) * (1.0 - q).ln()
        })
        .sum();
    Ok(-sum / n)
}

/// Gradient of `cosine_sim(x, v)` with respect to `x`, accumulated as `out += scale * grad`.
fn add_cosine_grad(x: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let xn = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let den = xn * vn + COSINE_EPS;
    let radial = if xn > 0.0 { dot * vn / (xn * den * den) } else { 0.0 };
    for ((o, xi), vi) in out.iter_mut().zip(x).zip(v) {
        *o += scale * (vi / den - radial * xi);
    }
}

fn softmax_backward(probs: &[f64], grad: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(grad).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad).map(|(p, g)| p * (g - inner)).collect()
}

/// Loss of one labelled raw feature and its exact gradient with respect to
/// every encoder parameter. The max over states is differentiated at the
/// winning state, ties going to the smallest index.
pub fn loss_gradients(
    x_raw: &[f64],
    label: u16,
    bank: &ScenarioBank,
    params: &EncoderParams,
    cfg: &FusionConfig,
) -> Result<(f64, EncoderParams)> {
    cfg.validate()?;
    if params.entries() != bank.len() {
        return Err(Error::Param(format!(
            "classifier has {} outputs for a bank of {}",
            params.entries(),
            bank.len()
        )));
    }
    let target = one_hot(bank, label)?;
    let x = encode(x_raw, params)?;
    bank.check_dim(&x)?;
    let xs = x.as_slice();

    let img = image_scores(&x, params)?;
    let mut winners = Vec::with_capacity(bank.len());
    let mut conf = Vec::with_capacity(bank.len());
    let xn = norm(xs);
    for h in 0..bank.len() {
        let (sims, best) = bank.pool(xs, xn, h);
        winners.push(best);
        conf.push(sims[best]);
    }
    let mot = softmax(&conf);
    let fused = fuse(&img, &mot, cfg)?;
    let loss = nll_loss(&target, &fused)?;

    let n = bank.len() as f64;
    let g: Vec<f64> = target
        .iter()
        .zip(&fused)
        .map(|(&p, &q)| {
            if q <= PROB_CLAMP || q >= 1.0 - PROB_CLAMP {
                0.0
            } else {
                -(p / q - (1.0 - p) / (1.0 - q)) / n
            }
        })
        .collect();
    let l = cfg.lambda;
    let g_img: Vec<f64> = g.iter().map(|v| v * l).collect();
    let g_mot: Vec<f64> = g.iter().map(|v| v * (1.0 - l)).collect();
    let d_logits = softmax_backward(&img, &g_img);
    let d_conf = softmax_backward(&mot, &g_mot);

    let d_logits = DVector::from_vec(d_logits);
    let mut dx = params.classifier_weight.transpose() * &d_logits;
    for (h, (&best, &dc)) in winners.iter().zip(&d_conf).enumerate() {
        if dc != 0.0 {
            add_cosine_grad(xs, bank.matrices()[h].column(best), dc, dx.as_mut_slice());
        }
    }

    let r = DVector::from_column_slice(x_raw);
    let grad = EncoderParams {
        weight: &dx * r.transpose(),
        bias: dx,
        classifier_weight: &d_logits * x.0.transpose(),
        classifier_bias: d_logits,
    };
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iters: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub batch: usize,
    pub fusion: FusionConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters: 5000,
            lr_start: 1e-1,
            lr_end: 1e-4,
            batch: 128,
            fusion: FusionConfig { lambda: 0.5 },
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Geometric decay from `lr_start` at the first iteration to `lr_end` at the last.
    pub fn learning_rate(&self, iter: usize) -> f64 {
        if self.iters <= 1 {
            return self.lr_start;
        }
        let frac = iter as f64 / (self.iters - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(frac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean batch loss at each iteration, before that iteration's update.
    pub losses: Vec<f64>,
}

pub fn train_encoder(
    dataset: &[(Vec<f64>, u16)],
    bank: &ScenarioBank,
    config: &TrainConfig,
    init: EncoderParams,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if config.batch == 0 {
        return Err(Error::Training("batch size must be positive".into()));
    }
    config.fusion.validate()?;
    init.validate()?;
    for (raw, label) in dataset {
        if bank.index_of(*label).is_none() {
            return Err(Error::Label(format!("label {label} is not a bank entry")));
        }
        if raw.len() != init.raw_dim() {
            return Err(Error::Param(format!(
                "raw feature has {} components, encoder expects {}",
                raw.len(),
                init.raw_dim()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init;
    let mut losses = Vec::with_capacity(config.iters);
    let mut step = EncoderParams::zeros(params.raw_dim(), params.descriptor_dim(), params.entries());
    for iter in 0..config.iters {
        step.fill_zero();
        let mut total = 0.0;
        for _ in 0..config.batch {
            let (raw, label) = &dataset[rng.random_range(0..dataset.len())];
            let (loss, grad) = loss_gradients(raw, *label, bank, &params, &config.fusion)?;
            total += loss;
            step.axpy(1.0, &grad);
        }
        let mean = total / config.batch as f64;
        if !mean.is_finite() {
            return Err(Error::Training(format!("loss diverged at iteration {iter}")));
        }
        losses.push(mean);
        params.axpy(-config.learning_rate(iter) / config.batch as f64, &step);
    }
    Ok(TrainOutcome { params, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_catalog;

    fn random_bank(entries: usize, dim: usize, seed: u64) -> ScenarioBank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let catalog: Vec<CatalogEntry> = build_catalog().into_iter().take(entries).collect();
        let matrices = catalog
            .iter()
            .map(|e| StateDescriptorMatrix {
                entry_id: e.entry_id,
                columns: DMatrix::from_fn(dim, 10, |_, _| normal.sample(&mut rng)),
            })
            .collect();
        ScenarioBank::new(catalog, matrices).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        assert_eq!(cosine_sim(&e1, &e1), 1.0 / (1.0 + 1e-5));
        assert!((cosine_sim(&e1, &e1) - 0.999_990_000_099_999).abs() < 1e-15);
        assert_eq!(cosine_sim(&e1, &e2), 0.0);
        assert_eq!(cosine_sim(&[0.0; 3], &[3.0, 4.0, 0.0]), 0.0);
        assert_eq!(cosine_sim(&[0.0; 3], &[0.0; 3]), 0.0);
    }

    #[test]
    fn score_entry_peaks_at_matching_column() {
        let mut cols = DMatrix::zeros(10, 10);
        for i in 0..10 {
            cols[(i, i)] = 1.0;
        }
        let m = StateDescriptorMatrix {
            entry_id: 1,
            columns: cols,
        };
        let mut x = vec![0.0; 10];
        x[2] = 1.0;
        let (sims, conf) = score_entry(&Descriptor::from_slice(&x), &m).unwrap();
        assert_eq!(argmax(&sims), 2);
        assert_eq!(conf, 1.0 / (1.0 + COSINE_EPS));
        assert!(sims.iter().all(|&s| s <= conf));

        let (_, zero) = score_entry(&Descriptor::from_slice(&[0.0; 10]), &m).unwrap();
        assert_eq!(zero, 0.0);
        assert!(matches!(
            score_entry(&Descriptor::from_slice(&[1.0; 3]), &m),
            Err(Error::Bank(_))
        ));
    }

    #[test]
    fn softmax_properties() {
        let u = softmax(&[0.3; 66]);
        assert!(u.iter().all(|&v| (v - 1.0 / 66.0).abs() < 1e-15));
        let a = softmax(&[0.1, -0.4, 0.9, 0.2]);
        let b = softmax(&[5.1, 4.6, 5.9, 5.2]);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn image_scores_examples() {
        let p = EncoderParams::zeros(4, 8, 66);
        let s = image_scores(&Descriptor::from_slice(&[1.0; 8]), &p).unwrap();
        assert!(s.iter().all(|&v| (v - 1.0 / 66.0).abs() < 1e-15));
        let g = EncoderParams::gaussian(4, 8, 66, 3);
        let x = Descriptor::from_slice(&[0.5, -1.0, 0.25, 2.0, 0.0, 1.0, -0.3, 0.7]);
        let s = image_scores(&x, &g).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let logits = &g.classifier_weight * &x.0 + &g.classifier_bias;
        assert_eq!(argmax(&s), argmax(logits.as_slice()));
        assert!(image_scores(&Descriptor::from_slice(&[1.0; 3]), &g).is_err());
    }

    #[test]
    fn fuse_examples() {
        let img = softmax(&[0.1, 0.7, -0.2]);
        let mot = softmax(&[0.5, 0.0, 0.3]);
        assert_eq!(fuse(&img, &mot, &FusionConfig { lambda: 1.0 }).unwrap(), img);
        assert_eq!(fuse(&img, &mot, &FusionConfig { lambda: 0.0 }).unwrap(), mot);
        let same = fuse(&img, &img, &FusionConfig { lambda: 0.5 }).unwrap();
        for (a, b) in same.iter().zip(&img) {
            assert!((a - b).abs() < 1e-16);
        }
        assert!(FusionConfig::new(1.5).is_err());
        assert!(fuse(&img, &mot, &FusionConfig { lambda: -0.1 }).is_err());
    }

    #[test]
    fn predict_self_retrieves_a_column() {
        let bank = random_bank(66, 16, 7);
        let params = EncoderParams::zeros(16, 16, 66);
        let x = Descriptor::from_slice(bank.matrices()[6].column(3));
        let r = predict(&x, &bank, &params, &FusionConfig { lambda: 0.0 }).unwrap();
        assert_eq!((r.entry_id, r.state), (7, 4));
        assert!((r.confidences.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(
            r.per_state_sims[r.state - 1],
            r.per_state_sims.iter().copied().fold(f64::MIN, f64::max)
        );
    }

    #[test]
    fn predict_on_single_entry_bank() {
        let bank = random_bank(1, 8, 1);
        let params = EncoderParams::zeros(8, 8, 1);
        for k in 0..5 {
            let x = Descriptor::from_slice(&[k as f64 - 2.0, 1.0, 0.0, 0.5, -1.0, 2.0, 0.1, 0.0]);
            let r = predict(&x, &bank, &params, &FusionConfig { lambda: 0.3 }).unwrap();
            assert_eq!(r.entry_id, 1);
        }
    }

    #[test]
    fn predict_uniform_head_falls_back_to_first_entry() {
        let bank = random_bank(66, 8, 2);
        let params = EncoderParams::zeros(8, 8, 66);
        let x = Descriptor::from_slice(bank.matrices()[40].column(0));
        let r = predict(&x, &bank, &params, &FusionConfig { lambda: 1.0 }).unwrap();
        assert_eq!(r.entry_id, 1);
    }

    #[test]
    fn nll_examples() {
        let mut p = vec![0.0; 66];
        p[4] = 1.0;
        assert!(nll_loss(&p, &p).unwrap() < 1e-10);
        let uniform = vec![1.0 / 66.0; 66];
        // -(1/66) [ln(1/66) + 65 ln(65/66)], evaluated independently
        assert!((nll_loss(&p, &uniform).unwrap() - 0.078_515_764_098_904_14).abs() < 1e-12);
        let mut off = p.clone();
        off[4] = 0.9;
        off[5] = 0.1;
        assert!(nll_loss(&p, &off).unwrap() > 0.0);
        assert!(matches!(nll_loss(&uniform, &uniform), Err(Error::Label(_))));
        let mut two = p.clone();
        two[0] = 1.0;
        assert!(nll_loss(&two, &uniform).is_err());
    }

    #[test]
    fn encode_examples() {
        let id = EncoderParams::identity(5, 5, 3);
        let r = [1.0, -2.0, 3.5, 0.0, 4.0];
        assert_eq!(encode(&r, &id).unwrap().as_slice(), &r);
        let mut zero_w = EncoderParams::zeros(5, 4, 3);
        zero_w.bias = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(encode(&r, &zero_w).unwrap().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let mut g = EncoderParams::gaussian(5, 4, 3, 9);
        g.bias = DVector::from_vec(vec![0.5, -0.5, 1.0, 0.0]);
        let a = [0.1, 0.2, 0.3, 0.4, 0.5];
        let b = [1.0, -1.0, 0.5, 0.0, 2.0];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = encode(&ab, &g).unwrap().0;
        let rhs = encode(&a, &g).unwrap().0 + encode(&b, &g).unwrap().0 - &g.bias;
        assert!((lhs - rhs).norm() < 1e-12);
        assert!(encode(&[1.0; 4], &g).is_err());
    }

    #[test]
    fn lambda_one_blocks_the_motion_path() {
        let bank = random_bank(66, 8, 5);
        let mut params = EncoderParams::gaussian(6, 8, 66, 11);
        params.classifier_weight.fill(0.0);
        let raw = [0.3, -0.2, 0.8, 0.1, 0.0, -0.5];
        let (_, g) = loss_gradients(&raw, 9, &bank, &params, &FusionConfig { lambda: 1.0 }).unwrap();
        // with a zero head and lambda = 1 nothing reaches the encoder
        assert!(g.weight.iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
        assert!(g.classifier_weight.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn learning_rate_schedule_endpoints() {
        let cfg = TrainConfig {
            iters: 2000,
            ..TrainConfig::default()
        };
        assert!((cfg.learning_rate(0) - 1e-1).abs() < 1e-15);
        assert!((cfg.learning_rate(1999) - 1e-4).abs() < 1e-15);
        assert!(cfg.learning_rate(1000) < cfg.learning_rate(999));
    }

    #[test]
    fn training_edge_cases() {
        let bank = random_bank(66, 8, 4);
        let init = EncoderParams::gaussian(8, 8, 66, 1);
        let cfg = TrainConfig {
            iters: 0,
            ..TrainConfig::default()
        };
        let data = vec![(vec![0.1; 8], 3u16)];
        let out = train_encoder(&data, &bank, &cfg, init.clone()).unwrap();
        assert_eq!(out.params, init);
        assert!(out.losses.is_empty());
        assert!(matches!(
            train_encoder(&[], &bank, &cfg, init.clone()),
            Err(Error::Training(_))
        ));
        assert!(matches!(
            train_encoder(&[(vec![0.1; 8], 99)], &bank, &cfg, init),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn flat_round_trip() {
        let g = EncoderParams::gaussian(3, 4, 5, 2);
        let back = EncoderParams::from_flat(3, 4, 5, &g.to_flat()).unwrap();
        assert_eq!(back, g);
        assert!(EncoderParams::from_flat(3, 4, 5, &[0.0; 3]).is_err());
    }
}
