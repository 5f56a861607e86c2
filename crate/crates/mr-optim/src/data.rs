//! Datasets with hidden clean labels: synthetic Gaussian blobs, label-noise
//! injection with an exact corruption mask, mixup batches, and CSV I/O.
//!
//! The mask and the clean labels are evaluation metadata. Training code
//! receives a [`Examples`] view built from `train_view`, which only exposes
//! inputs and observed labels; nothing on the training path can read the
//! mask.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::{onehot, Examples, TargetsRef};
use crate::tensor::{Mat64, SeededRng, Vec64};

/// Observed or clean labels.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetData {
    Classes(Vec<usize>),
    Reals(Vec64),
}

impl TargetData {
    pub fn len(&self) -> usize {
        match self {
            TargetData::Classes(v) => v.len(),
            TargetData::Reals(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn as_ref(&self) -> TargetsRef<'_> {
        match self {
            TargetData::Classes(v) => TargetsRef::Classes(v),
            TargetData::Reals(v) => TargetsRef::Reals(v),
        }
    }
}

/// Inputs, observed labels, hidden clean labels, and the corruption mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    inputs: Mat64,
    observed: TargetData,
    clean: TargetData,
    /// Sorted indices where observed differs from clean.
    mask: Vec<usize>,
    /// Number of classes; 0 for regression targets.
    classes: usize,
}

impl NoisyDataset {
    pub fn new(
        inputs: Mat64,
        observed: TargetData,
        clean: TargetData,
        mask: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        let n = inputs.rows();
        if observed.len() != n || clean.len() != n {
            return Err(Error::dimension(format!(
                "{n} inputs vs {} observed / {} clean labels",
                observed.len(),
                clean.len()
            )));
        }
        if mask.iter().any(|&i| i >= n) {
            return Err(Error::dimension("mask index out of range"));
        }
        if let TargetData::Classes(v) = &observed {
            if v.iter().any(|&c| c >= classes) {
                return Err(Error::Data(format!("label outside [0, {classes})")));
            }
        }
        if let TargetData::Classes(v) = &clean {
            if v.iter().any(|&c| c >= classes) {
                return Err(Error::Data(format!("clean label outside [0, {classes})")));
            }
        }
        Ok(NoisyDataset {
            inputs,
            observed,
            clean,
            mask,
            classes,
        })
    }

    /// Clean classification dataset: observed == clean, empty mask.
    pub fn from_clean_classes(inputs: Mat64, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let clean = labels.clone();
        NoisyDataset::new(
            inputs,
            TargetData::Classes(labels),
            TargetData::Classes(clean),
            Vec::new(),
            classes,
        )
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

    /// Number of classes; 0 for regression.
    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn inputs(&self) -> &Mat64 {
        &self.inputs
    }

    pub fn observed(&self) -> &TargetData {
        &self.observed
    }

    /// What the training loop is allowed to see.
    pub fn train_view(&self) -> Examples<'_> {
        Examples::new(&self.inputs, self.observed.as_ref()).expect("lengths agree")
    }

    /// Evaluation-only view against the hidden clean labels.
    pub fn clean_view(&self) -> Examples<'_> {
        Examples::new(&self.inputs, self.clean.as_ref()).expect("lengths agree")
    }

    /// Evaluation-only corruption mask.
    pub fn corruption_mask(&self) -> &[usize] {
        &self.mask
    }

    /// Shuffled split into (rest, holdout) with `round(holdout_fraction * n)`
    /// examples held out.
    pub fn split_holdout(
        &self,
        holdout_fraction: f64,
        rng: &mut SeededRng,
    ) -> Result<(NoisyDataset, NoisyDataset)> {
        if !(0.0 < holdout_fraction && holdout_fraction < 1.0) {
            return Err(Error::parameter("holdout fraction must lie in (0, 1)"));
        }
        let n = self.len();
        let n_holdout = ((holdout_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let holdout_idx = &order[..n_holdout];
        let rest_idx = &order[n_holdout..];
        Ok((self.subset(rest_idx)?, self.subset(holdout_idx)?))
    }

    fn subset(&self, indices: &[usize]) -> Result<NoisyDataset> {
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            data.extend_from_slice(self.inputs.row(i));
        }
        let inputs = Mat64::new(indices.len(), self.dim(), data)?;
        let pick = |t: &TargetData| match t {
            TargetData::Classes(v) => TargetData::Classes(indices.iter().map(|&i| v[i]).collect()),
            TargetData::Reals(v) => {
                TargetData::Reals(Vec64::new(indices.iter().map(|&i| v[i]).collect()))
            }
        };
        let mask = indices
            .iter()
            .enumerate()
            .filter(|(_, &orig)| self.mask.binary_search(&orig).is_ok())
            .map(|(new, _)| new)
            .collect();
        NoisyDataset::new(inputs, pick(&self.observed), pick(&self.clean), mask, self.classes)
    }
}

/// `classes` isotropic Gaussian clusters of `per_class` points in `dim`
/// dimensions, centers pairwise `separation` apart (needs `classes <= 2 dim`).
pub fn gen_blobs(
    per_class: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    rng: &mut SeededRng,
) -> Result<NoisyDataset> {
    if per_class == 0 {
        return Err(Error::Data("gen_blobs: empty dataset (per_class = 0)".into()));
    }
    if classes == 0 || dim == 0 {
        return Err(Error::parameter("gen_blobs: classes and dim must be >= 1"));
    }
    if classes > 2 * dim {
        return Err(Error::parameter(
            "gen_blobs: axis-aligned centers need classes <= 2 * dim",
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::parameter("gen_blobs: separation must be >= 0"));
    }
    let radius = separation / std::f64::consts::SQRT_2;
    let n = per_class * classes;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let axis = c % dim;
        let sign = if c < dim { 1.0 } else { -1.0 };
        for _ in 0..per_class {
            for d in 0..dim {
                let center = if d == axis { sign * radius } else { 0.0 };
                data.push(center + rng.normal());
            }
            labels.push(c);
        }
    }
    NoisyDataset::from_clean_classes(Mat64::new(n, dim, data)?, labels, classes)
}

/// Independent label flips: each example is selected with probability
/// `ratio` and its observed label replaced by a uniform draw over the other
/// `K - 1` classes, so the realized corruption rate matches the nominal one
/// and the mask is exact.
pub fn inject_label_noise(
    ds: &NoisyDataset,
    ratio: f64,
    rng: &mut SeededRng,
) -> Result<NoisyDataset> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::parameter("noise ratio must lie in [0, 1)"));
    }
    if ratio == 0.0 {
        return Ok(ds.clone());
    }
    let labels = match ds.observed() {
        TargetData::Classes(v) => v.clone(),
        TargetData::Reals(_) => {
            return Err(Error::Capability(
                "label noise injection needs class labels".into(),
            ))
        }
    };
    let k = ds.num_classes();
    if k < 2 {
        return Err(Error::parameter("label noise needs at least two classes"));
    }
    let mut observed = labels;
    let mut mask = Vec::new();
    for (i, label) in observed.iter_mut().enumerate() {
        if rng.next_f64() < ratio {
            let mut replacement = rng.range(k - 1);
            if replacement >= *label {
                replacement += 1;
            }
            *label = replacement;
            mask.push(i);
        }
    }
    NoisyDataset::new(
        ds.inputs.clone(),
        TargetData::Classes(observed),
        ds.clean.clone(),
        mask,
        k,
    )
}

/// A mixed batch: convex input combinations with matching soft targets.
#[derive(Debug, Clone)]
pub struct MixupBatch {
    pub inputs: Mat64,
    /// Soft targets, each on the simplex.
    pub targets: Vec<Vec64>,
    pub lambdas: Vec64,
    /// (primary, partner) source indices into the dataset.
    pub pairs: Vec<(usize, usize)>,
}

/// Mixup over a batch: partners come from a shuffled permutation of the
/// batch, each pair's coefficient is an independent Beta(alpha, alpha) draw,
/// and targets are the matching mixture of one-hot observed labels.
pub fn mixup_batch(
    ds: &NoisyDataset,
    indices: &[usize],
    alpha: f64,
    rng: &mut SeededRng,
) -> Result<MixupBatch> {
    mixup_batch_impl(ds, indices, alpha, None, rng)
}

/// Test hook: like [`mixup_batch`] but with every lambda pinned.
pub fn mixup_batch_with_lambda(
    ds: &NoisyDataset,
    indices: &[usize],
    lambda: f64,
    rng: &mut SeededRng,
) -> Result<MixupBatch> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::parameter("lambda must lie in [0, 1]"));
    }
    mixup_batch_impl(ds, indices, 1.0, Some(lambda), rng)
}

fn mixup_batch_impl(
    ds: &NoisyDataset,
    indices: &[usize],
    alpha: f64,
    forced_lambda: Option<f64>,
    rng: &mut SeededRng,
) -> Result<MixupBatch> {
    if indices.is_empty() {
        return Err(Error::Data("mixup_batch: empty batch".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::parameter("mixup alpha must be > 0"));
    }
    let labels = match ds.observed() {
        TargetData::Classes(v) => v,
        TargetData::Reals(_) => {
            return Err(Error::Capability("mixup needs class labels".into()))
        }
    };
    if indices.iter().any(|&i| i >= ds.len()) {
        return Err(Error::dimension("mixup_batch: index out of range"));
    }
    let k = ds.num_classes();
    let dim = ds.dim();
    let mut partners: Vec<usize> = indices.to_vec();
    rng.shuffle(&mut partners);

    let b = indices.len();
    let mut data = Vec::with_capacity(b * dim);
    let mut targets = Vec::with_capacity(b);
    let mut lambdas = Vec::with_capacity(b);
    let mut pairs = Vec::with_capacity(b);
    for (&i, &j) in indices.iter().zip(&partners) {
        let lambda = forced_lambda.unwrap_or_else(|| rng.beta(alpha, alpha));
        let xi = ds.inputs.row(i);
        let xj = ds.inputs.row(j);
        data.extend(xi.iter().zip(xj).map(|(a, c)| lambda * a + (1.0 - lambda) * c));
        let ti = onehot(labels[i], k)?;
        let tj = onehot(labels[j], k)?;
        let mixed: Vec<f64> = ti
            .iter()
            .zip(tj.iter())
            .map(|(a, c)| lambda * a + (1.0 - lambda) * c)
            .collect();
        targets.push(Vec64::new(mixed));
        lambdas.push(lambda);
        pairs.push((i, j));
    }
    Ok(MixupBatch {
        inputs: Mat64::new(b, dim, data)?,
        targets,
        lambdas: Vec64::new(lambdas),
        pairs,
    })
}

/// Declared layout of a dataset CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub features: usize,
    pub label: LabelSchema,
    /// Rebuild clean labels and the mask from the optional
    /// `clean_label`/`corrupted` columns when present.
    pub read_noise_columns: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelSchema {
    Classes { count: usize },
    Reals,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the dataset with 17-significant-digit decimals; appends
/// `clean_label` and `corrupted` columns when the mask is nonempty.
pub fn save_csv(ds: &NoisyDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let with_noise = !ds.corruption_mask().is_empty();
    let mut header: Vec<String> = (0..ds.dim()).map(|d| format!("f{d}")).collect();
    header.push("label".to_string());
    if with_noise {
        header.push("clean_label".to_string());
        header.push("corrupted".to_string());
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = ds.inputs.row(i).iter().map(|&v| fmt17(v)).collect();
        match ds.observed() {
            TargetData::Classes(v) => row.push(v[i].to_string()),
            TargetData::Reals(v) => row.push(fmt17(v[i])),
        }
        if with_noise {
            match &ds.clean {
                TargetData::Classes(v) => row.push(v[i].to_string()),
                TargetData::Reals(v) => row.push(fmt17(v[i])),
            }
            let corrupted = ds.mask.binary_search(&i).is_ok();
            row.push(if corrupted { "1" } else { "0" }.to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what}: {field:?}"),
    })
}

/// Loads a dataset against a declared schema. Without noise columns (or when
/// the schema ignores them) the result has clean == observed and an empty
/// mask. Row numbers in errors are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<NoisyDataset> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".to_string(),
            })
        }
    };
    let cols: Vec<&str> = header.trim().split(',').collect();
    let d = schema.features;
    for (j, name) in cols.iter().take(d).enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column f{j}, found {name:?}"),
            });
        }
    }
    if cols.len() <= d || cols[d] != "label" {
        return Err(Error::Parse {
            line: 1,
            message: "missing label column".to_string(),
        });
    }
    let has_noise_cols = cols.len() >= d + 3 && cols[d + 1] == "clean_label" && cols[d + 2] == "corrupted";
    let use_noise = schema.read_noise_columns && has_noise_cols;

    let mut data = Vec::new();
    let mut observed_c = Vec::new();
    let mut observed_r = Vec::new();
    let mut clean_c = Vec::new();
    let mut clean_r = Vec::new();
    let mut mask = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = d + 1 + if use_noise { 2 } else { 0 };
        if fields.len() < expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        for field in &fields[..d] {
            data.push(parse_field::<f64>(field, line_no, "feature")?);
        }
        match &schema.label {
            LabelSchema::Classes { count } => {
                let label: usize = parse_field(fields[d], line_no, "label")?;
                if label >= *count {
                    return Err(Error::Data(format!(
                        "line {line_no}: label {label} outside [0, {count})"
                    )));
                }
                observed_c.push(label);
                if use_noise {
                    let clean: usize = parse_field(fields[d + 1], line_no, "clean label")?;
                    if clean >= *count {
                        return Err(Error::Data(format!(
                            "line {line_no}: clean label {clean} outside [0, {count})"
                        )));
                    }
                    clean_c.push(clean);
                    let corrupted: u8 = parse_field(fields[d + 2], line_no, "corrupted flag")?;
                    if corrupted == 1 {
                        mask.push(n);
                    }
                }
            }
            LabelSchema::Reals => {
                observed_r.push(parse_field::<f64>(fields[d], line_no, "label")?);
                if use_noise {
                    clean_r.push(parse_field::<f64>(fields[d + 1], line_no, "clean label")?);
                    let corrupted: u8 = parse_field(fields[d + 2], line_no, "corrupted flag")?;
                    if corrupted == 1 {
                        mask.push(n);
                    }
                }
            }
        }
        n += 1;
    }
    let inputs = Mat64::new(n, d, data)?;
    match &schema.label {
        LabelSchema::Classes { count } => {
            let clean = if use_noise { clean_c } else { observed_c.clone() };
            NoisyDataset::new(
                inputs,
                TargetData::Classes(observed_c),
                TargetData::Classes(clean),
                mask,
                *count,
            )
        }
        LabelSchema::Reals => {
            let clean = if use_noise {
                Vec64::new(clean_r)
            } else {
                Vec64::new(observed_r.clone())
            };
            NoisyDataset::new(
                inputs,
                TargetData::Reals(Vec64::new(observed_r)),
                TargetData::Reals(clean),
                mask,
                0,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp_path(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("mr-optim-test-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let mut a = SeededRng::new(5);
        let mut b = SeededRng::new(5);
        let d1 = gen_blobs(10, 3, 2, 6.0, &mut a).unwrap();
        let d2 = gen_blobs(10, 3, 2, 6.0, &mut b).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 30);
        assert_eq!(d1.dim(), 2);
        assert!(d1.corruption_mask().is_empty());
        assert!(gen_blobs(0, 3, 2, 6.0, &mut a).is_err());
        assert!(gen_blobs(4, 5, 2, 6.0, &mut a).is_err());
    }

    #[test]
    fn blob_centers_are_separated() {
        let mut rng = SeededRng::new(6);
        let ds = gen_blobs(200, 2, 2, 10.0, &mut rng).unwrap();
        // Empirical class means should be ~separation apart.
        let mut means = [[0.0; 2]; 2];
        if let TargetData::Classes(labels) = ds.observed() {
            for i in 0..ds.len() {
                let c = labels[i];
                for d in 0..2 {
                    means[c][d] += ds.inputs().get(i, d) / 200.0;
                }
            }
        }
        let dist = ((means[0][0] - means[1][0]).powi(2) + (means[0][1] - means[1][1]).powi(2))
            .sqrt();
        assert!((dist - 10.0).abs() < 0.5, "dist {dist}");
    }

    #[test]
    fn noise_injection_masks_exactly_the_changes() {
        let mut rng = SeededRng::new(7);
        let ds = gen_blobs(50, 4, 3, 8.0, &mut rng).unwrap();
        let noisy = inject_label_noise(&ds, 0.4, &mut rng).unwrap();

        // Inputs untouched, bit for bit.
        assert_eq!(ds.inputs(), noisy.inputs());

        let (obs, clean) = match (noisy.observed(), &noisy.clean) {
            (TargetData::Classes(o), TargetData::Classes(c)) => (o, c),
            _ => panic!("class labels"),
        };
        for i in 0..noisy.len() {
            let masked = noisy.corruption_mask().contains(&i);
            assert_eq!(obs[i] != clean[i], masked, "example {i}");
        }

        // Same seed reproduces the same mask.
        let mut rng_a = SeededRng::new(7);
        let ds_a = gen_blobs(50, 4, 3, 8.0, &mut rng_a).unwrap();
        let noisy_a = inject_label_noise(&ds_a, 0.4, &mut rng_a).unwrap();
        assert_eq!(noisy.corruption_mask(), noisy_a.corruption_mask());
    }

    #[test]
    fn noise_ratio_zero_is_identity() {
        let mut rng = SeededRng::new(8);
        let ds = gen_blobs(20, 2, 2, 4.0, &mut rng).unwrap();
        let same = inject_label_noise(&ds, 0.0, &mut rng).unwrap();
        assert_eq!(ds, same);
    }

    #[test]
    fn noise_mask_size_is_binomial() {
        let mut rng = SeededRng::new(9);
        let ds = gen_blobs(2500, 4, 2, 4.0, &mut rng).unwrap();
        let n = ds.len() as f64;
        let noisy = inject_label_noise(&ds, 0.4, &mut rng).unwrap();
        let size = noisy.corruption_mask().len() as f64;
        let sigma = (0.4 * 0.6 * n).sqrt();
        assert!((size - 0.4 * n).abs() < 4.0 * sigma, "mask size {size}");
    }

    #[test]
    fn binary_noise_flips_to_the_other_class() {
        let mut rng = SeededRng::new(10);
        let ds = gen_blobs(100, 2, 2, 4.0, &mut rng).unwrap();
        let noisy = inject_label_noise(&ds, 0.3, &mut rng).unwrap();
        let (obs, clean) = match (noisy.observed(), &noisy.clean) {
            (TargetData::Classes(o), TargetData::Classes(c)) => (o, c),
            _ => unreachable!(),
        };
        for &i in noisy.corruption_mask() {
            assert_eq!(obs[i], 1 - clean[i]);
        }
    }

    #[test]
    fn mixup_forced_lambdas() {
        let mut rng = SeededRng::new(11);
        let ds = gen_blobs(5, 2, 2, 4.0, &mut rng).unwrap();
        let indices: Vec<usize> = (0..6).collect();

        let identity = mixup_batch_with_lambda(&ds, &indices, 1.0, &mut rng).unwrap();
        for (row, &(i, _)) in identity.pairs.iter().enumerate() {
            assert_eq!(identity.inputs.row(row), ds.inputs().row(i));
            assert_eq!(identity.targets[row].iter().sum::<f64>(), 1.0);
        }

        let half = mixup_batch_with_lambda(&ds, &[0, 5], 0.5, &mut rng).unwrap();
        for (row, &(i, j)) in half.pairs.iter().enumerate() {
            let li = match ds.observed() {
                TargetData::Classes(v) => v[i],
                _ => unreachable!(),
            };
            let lj = match ds.observed() {
                TargetData::Classes(v) => v[j],
                _ => unreachable!(),
            };
            if li != lj {
                assert_eq!(half.targets[row][li], 0.5);
                assert_eq!(half.targets[row][lj], 0.5);
            }
        }
    }

    #[test]
    fn mixup_alpha_one_lambda_is_uniform() {
        // Beta(1, 1) is Uniform(0, 1): Kolmogorov-Smirnov over 1e5 draws.
        let mut rng = SeededRng::new(12);
        let ds = gen_blobs(64, 2, 2, 4.0, &mut rng).unwrap();
        let indices: Vec<usize> = (0..128).collect();
        let mut draws = Vec::with_capacity(100_000);
        while draws.len() < 100_000 {
            let batch = mixup_batch(&ds, &indices, 1.0, &mut rng).unwrap();
            draws.extend(batch.lambdas.iter().copied());
        }
        draws.truncate(100_000);
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let mut ks = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let hi = (i + 1) as f64 / n - x;
            let lo = x - i as f64 / n;
            ks = ks.max(hi.max(lo));
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    proptest! {
        #[test]
        fn mixup_targets_stay_on_the_simplex(seed in 0u64..500) {
            let mut rng = SeededRng::new(seed);
            let ds = gen_blobs(6, 3, 2, 4.0, &mut rng).unwrap();
            let indices: Vec<usize> = (0..ds.len()).collect();
            let alpha = 0.2 + 3.0 * rng.next_f64();
            let batch = mixup_batch(&ds, &indices, alpha, &mut rng).unwrap();
            for t in &batch.targets {
                prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(t.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
            for &l in batch.lambdas.iter() {
                prop_assert!((0.0..=1.0).contains(&l));
            }
        }
    }

    #[test]
    fn split_holdout_partitions_and_remaps_mask() {
        let mut rng = SeededRng::new(13);
        let ds = gen_blobs(30, 2, 2, 4.0, &mut rng).unwrap();
        let noisy = inject_label_noise(&ds, 0.3, &mut rng).unwrap();
        let (train, test) = noisy.split_holdout(0.25, &mut rng).unwrap();
        assert_eq!(train.len() + test.len(), noisy.len());
        assert_eq!(test.len(), 15);
        for part in [&train, &test] {
            let (obs, clean) = match (part.observed(), &part.clean) {
                (TargetData::Classes(o), TargetData::Classes(c)) => (o, c),
                _ => unreachable!(),
            };
            for i in 0..part.len() {
                assert_eq!(obs[i] != clean[i], part.corruption_mask().contains(&i));
            }
        }
    }

    #[test]
    fn csv_three_rows_and_errors() {
        let path = tmp_path("three.csv");
        std::fs::write(&path, "f0,f1,label\n0.5,1.5,0\n-2.0,0.25,1\n3.5,-1.0,0\n").unwrap();
        let schema = CsvSchema {
            features: 2,
            label: LabelSchema::Classes { count: 2 },
            read_noise_columns: false,
        };
        let ds = load_csv(&path, &schema).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert!(ds.corruption_mask().is_empty());

        std::fs::write(&path, "f0,f1,label\n0.5,oops,0\n").unwrap();
        match load_csv(&path, &schema) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "f0,f1,label\n0.5,1.0,7\n").unwrap();
        assert!(matches!(load_csv(&path, &schema), Err(Error::Data(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut rng = SeededRng::new(14);
        let ds = gen_blobs(25, 3, 4, 7.5, &mut rng).unwrap();
        let noisy = inject_label_noise(&ds, 0.35, &mut rng).unwrap();
        let path = tmp_path("roundtrip.csv");
        save_csv(&noisy, &path).unwrap();
        let schema = CsvSchema {
            features: 4,
            label: LabelSchema::Classes { count: 3 },
            read_noise_columns: true,
        };
        let back = load_csv(&path, &schema).unwrap();
        assert_eq!(noisy, back);

        // Ignoring the noise columns yields a clean-looking dataset.
        let schema_plain = CsvSchema {
            read_noise_columns: false,
            ..schema
        };
        let plain = load_csv(&path, &schema_plain).unwrap();
        assert!(plain.corruption_mask().is_empty());
        assert_eq!(plain.observed(), noisy.observed());
        assert_eq!(plain.inputs(), noisy.inputs());
        std::fs::remove_file(&path).ok();
    }
}
