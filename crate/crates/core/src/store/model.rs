//! A fitted regressor bundled with its preprocessing, stored in the model
//! container.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::container::{Container, ModelKind, NamedArray};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::models::cubist::{CmpOp, Condition, LinearModel};
use crate::models::{
    cubist_fit_with, lssvm_fit, plsr_fit, CubistModel, CubistOptions, LssvmModel, MinMaxScaler, PlsrModel, Rule,
    DEFAULT_COMPONENTS, DEFAULT_GAMMA,
};
use crate::neural::{
    saliency, train, Architecture, CnnConfig, EpochLog, MlpConfig, NeuralModel, SaliencyMap, SpectrogramRecipe,
    TrainConfig,
};
use crate::preprocess::{apply_pipeline, PreprocessPipeline};
use crate::spectral::{SpectralDataset, SpectrumKind, WavelengthGrid};

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Plsr(PlsrModel),
    /// Rule tree on PLS scores.
    Cubist { pls: PlsrModel, tree: CubistModel },
    /// LS-SVM on PLS scores.
    Lssvm { pls: PlsrModel, svm: LssvmModel },
    Neural(NeuralModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub pipeline: PreprocessPipeline,
    pub grid: WavelengthGrid,
    /// Kind of spectra the pipeline expects.
    pub input_kind: SpectrumKind,
    pub estimator: Estimator,
}

/// Hyperparameters for every model kind; only those of the chosen kind
/// are used.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub components: usize,
    pub cubist: CubistOptions,
    pub gamma: f64,
    pub mlp: MlpConfig,
    pub cnn: CnnConfig,
    pub train: TrainConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            cubist: CubistOptions::default(),
            gamma: DEFAULT_GAMMA,
            mlp: MlpConfig::default(),
            cnn: CnnConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: Model,
    /// Per-epoch record for neural models.
    pub log: Option<EpochLog>,
    pub best_epoch: Option<usize>,
}

fn matrix_of(d: &SpectralDataset) -> DMatrix<f64> {
    DMatrix::from_row_slice(d.len(), d.grid().n_points(), &d.to_matrix())
}

/// Fit a model of `kind` on `d` after running `pipeline`.
pub fn fit(kind: ModelKind, d: &SpectralDataset, pipeline: &PreprocessPipeline, opts: &FitOptions) -> Result<Fitted> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = d.labels().iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(format!("training labels must be finite, found {bad}")));
    }
    let pre = apply_pipeline(d, pipeline)?;
    let x = matrix_of(&pre);
    let y = d.labels();
    let pls = |x: &DMatrix<f64>| {
        let limit = (x.nrows().saturating_sub(1)).min(x.ncols());
        let k = opts.components.min(limit);
        if k < opts.components {
            log::warn!("reducing PLS components from {} to {k} for {} samples", opts.components, x.nrows());
        }
        plsr_fit(x, y, k)
    };
    let (estimator, log, best_epoch) = match kind {
        ModelKind::Plsr => (Estimator::Plsr(pls(&x)?), None, None),
        ModelKind::Cubist => {
            let pls = pls(&x)?;
            let tree = cubist_fit_with(&pls.transform(&x)?, y, opts.cubist)?;
            (Estimator::Cubist { pls, tree }, None, None)
        }
        ModelKind::Lssvm => {
            let pls = pls(&x)?;
            let svm = lssvm_fit(&pls.transform(&x)?, y, opts.gamma)?;
            (Estimator::Lssvm { pls, svm }, None, None)
        }
        ModelKind::Mlp | ModelKind::Cnn => {
            let arch = match kind {
                ModelKind::Mlp => Architecture::Mlp(opts.mlp.clone()),
                _ => Architecture::Cnn(opts.cnn.clone()),
            };
            let t = train(arch, &x, y, &opts.train)?;
            (Estimator::Neural(t.model), Some(t.log), Some(t.best_epoch))
        }
    };
    let model = Model { pipeline: pipeline.clone(), grid: *d.grid(), input_kind: d.kind(), estimator };
    Ok(Fitted { model, log, best_epoch })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match &self.estimator {
            Estimator::Plsr(_) => ModelKind::Plsr,
            Estimator::Cubist { .. } => ModelKind::Cubist,
            Estimator::Lssvm { .. } => ModelKind::Lssvm,
            Estimator::Neural(n) => match n.arch {
                Architecture::Mlp(_) => ModelKind::Mlp,
                Architecture::Cnn(_) => ModelKind::Cnn,
            },
        }
    }

    /// Check `d` against the training grid and kind, then preprocess it.
    pub fn features(&self, d: &SpectralDataset) -> Result<DMatrix<f64>> {
        if d.is_empty() {
            return Err(Error::EmptyInput);
        }
        if d.grid().n_points() != self.grid.n_points() {
            return Err(Error::WidthMismatch { expected: self.grid.n_points(), found: d.grid().n_points() });
        }
        if *d.grid() != self.grid {
            return Err(Error::GridMismatch(format!("model grid {:?}, data grid {:?}", self.grid, d.grid())));
        }
        if d.kind() != self.input_kind {
            return Err(Error::KindMismatch(format!("model expects {} spectra, got {}", self.input_kind, d.kind())));
        }
        Ok(matrix_of(&apply_pipeline(d, &self.pipeline)?))
    }

    /// Predictions from already preprocessed rows.
    pub fn predict_features(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let v: DVector<f64> = match &self.estimator {
            Estimator::Plsr(m) => m.predict(x)?,
            Estimator::Cubist { pls, tree } => tree.predict(&pls.transform(x)?)?,
            Estimator::Lssvm { pls, svm } => svm.predict(&pls.transform(x)?)?,
            Estimator::Neural(n) => return n.predict(x),
        };
        Ok(v.iter().copied().collect())
    }

    pub fn predict(&self, d: &SpectralDataset) -> Result<Vec<f64>> {
        self.predict_features(&self.features(d)?)
    }

    /// Input-gradient saliency averaged over `d`; neural models only.
    pub fn saliency(&self, d: &SpectralDataset) -> Result<SaliencyMap> {
        match &self.estimator {
            Estimator::Neural(n) => saliency(n, &self.features(d)?, &self.grid),
            _ => Err(Error::UnsupportedModel(self.kind().name().to_uppercase())),
        }
    }

    /// Absolute PLS regression coefficients per wavelength on the raw
    /// preprocessed scale; the linear-model stand-in for saliency.
    pub fn coefficient_magnitudes(&self) -> Option<Vec<(f64, f64)>> {
        let pls = match &self.estimator {
            Estimator::Plsr(p) | Estimator::Cubist { pls: p, .. } | Estimator::Lssvm { pls: p, .. } => p,
            Estimator::Neural(_) => return None,
        };
        Some(self.grid.wavelengths().into_iter().zip(pls.raw_coefficients().iter().map(|c| c.abs())).collect())
    }

    pub fn to_container(&self) -> Result<Container> {
        let mut arrays = vec![
            NamedArray::vector("grid", vec![self.grid.start_nm, self.grid.end_nm, self.grid.step_nm]),
            NamedArray::vector("input.kind", kind_code(self.input_kind).to_vec()),
        ];
        match &self.estimator {
            Estimator::Plsr(p) => push_pls(&mut arrays, p),
            Estimator::Cubist { pls, tree } => {
                push_pls(&mut arrays, pls);
                push_cubist(&mut arrays, tree)?;
            }
            Estimator::Lssvm { pls, svm } => {
                push_pls(&mut arrays, pls);
                push_lssvm(&mut arrays, svm);
            }
            Estimator::Neural(n) => push_neural(&mut arrays, n)?,
        }
        Ok(Container { kind: self.kind(), pipeline_json: self.pipeline.to_json(), arrays })
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let pipeline = PreprocessPipeline::from_json(&c.pipeline_json)?;
        let g = exact(c, "grid", &[3])?;
        let grid = WavelengthGrid::new(g[0], g[1], g[2])?;
        let input_kind = kind_from_code(exact(c, "input.kind", &[2])?)?;
        let estimator = match c.kind {
            ModelKind::Plsr => Estimator::Plsr(read_pls(c)?),
            ModelKind::Cubist => Estimator::Cubist { pls: read_pls(c)?, tree: read_cubist(c)? },
            ModelKind::Lssvm => Estimator::Lssvm { pls: read_pls(c)?, svm: read_lssvm(c)? },
            ModelKind::Mlp | ModelKind::Cnn => Estimator::Neural(read_neural(c)?),
        };
        let model = Model { pipeline, grid, input_kind, estimator };
        if model.kind() != c.kind {
            return Err(Error::KindMismatch(format!("container tag {} but payload is {}", c.kind, model.kind())));
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_container()?.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(&Container::from_bytes(bytes)?)
    }
}

pub fn save_model(m: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &m.to_bytes()?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Model::from_bytes(&bytes)
}

fn kind_code(k: SpectrumKind) -> [f64; 2] {
    match k {
        SpectrumKind::ReflectancePct => [0.0, 0.0],
        SpectrumKind::Absorbance => [1.0, 0.0],
        SpectrumKind::Derivative(d) => [2.0, d as f64],
    }
}

fn kind_from_code(v: &[f64]) -> Result<SpectrumKind> {
    match (v[0], v[1]) {
        (0.0, _) => Ok(SpectrumKind::ReflectancePct),
        (1.0, _) => Ok(SpectrumKind::Absorbance),
        (c, d) if c == 2.0 && (0.0..=255.0).contains(&d) && d.fract() == 0.0 => Ok(SpectrumKind::Derivative(d as u8)),
        _ => Err(Error::Container(format!("bad input kind code {v:?}"))),
    }
}

/// Array `name` with exactly the given dims.
fn exact<'a>(c: &'a Container, name: &str, dims: &[usize]) -> Result<&'a [f64]> {
    let a = c.get(name)?;
    if a.dims != dims {
        return Err(Error::Container(format!("array {name:?} has dims {:?}, expected {dims:?}", a.dims)));
    }
    Ok(&a.data)
}

fn vector<'a>(c: &'a Container, name: &str) -> Result<&'a [f64]> {
    let a = c.get(name)?;
    if a.dims.len() != 1 {
        return Err(Error::Container(format!("array {name:?} must be a vector, has dims {:?}", a.dims)));
    }
    Ok(&a.data)
}

fn matrix(c: &Container, name: &str) -> Result<DMatrix<f64>> {
    let a = c.get(name)?;
    match a.dims[..] {
        [r, k] => Ok(DMatrix::from_row_slice(r, k, &a.data)),
        _ => Err(Error::Container(format!("array {name:?} must be a matrix, has dims {:?}", a.dims))),
    }
}

fn matrix_array(name: &str, m: &DMatrix<f64>) -> NamedArray {
    let data = m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
    NamedArray { name: name.into(), dims: vec![m.nrows(), m.ncols()], data }
}

fn count(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Container(format!("{what} must be a non-negative integer, found {v}")))
    }
}

fn seed_parts(seed: u64) -> [f64; 2] {
    [(seed >> 32) as f64, (seed & 0xffff_ffff) as f64]
}

fn seed_from(hi: f64, lo: f64) -> Result<u64> {
    Ok(((count(hi, "seed")? as u64) << 32) | count(lo, "seed")? as u64)
}

fn push_pls(out: &mut Vec<NamedArray>, p: &PlsrModel) {
    out.push(matrix_array("pls.weights", &p.weights));
    out.push(matrix_array("pls.loadings", &p.loadings));
    out.push(NamedArray::vector("pls.y_loadings", p.y_loadings.iter().copied().collect()));
    out.push(NamedArray::vector("pls.x_mean", p.x_mean.iter().copied().collect()));
    out.push(NamedArray::scalar("pls.y_mean", p.y_mean));
    if let Some(s) = &p.x_scale {
        out.push(NamedArray::vector("pls.x_scale", s.iter().copied().collect()));
    }
}

fn read_pls(c: &Container) -> Result<PlsrModel> {
    let x_scale = if c.has("pls.x_scale") { Some(DVector::from_column_slice(vector(c, "pls.x_scale")?)) } else { None };
    PlsrModel::from_parts(
        matrix(c, "pls.weights")?,
        matrix(c, "pls.loadings")?,
        DVector::from_column_slice(vector(c, "pls.y_loadings")?),
        DVector::from_column_slice(vector(c, "pls.x_mean")?),
        exact(c, "pls.y_mean", &[1])?[0],
        x_scale,
    )
}

fn push_cubist(out: &mut Vec<NamedArray>, t: &CubistModel) -> Result<()> {
    let width = 1 + t.n_features;
    out.push(NamedArray::vector("cubist.meta", vec![t.n_features as f64, t.min_leaf as f64, t.smoothing as u8 as f64]));
    out.push(NamedArray::vector("cubist.rule_sizes", t.rules.iter().map(|r| r.conditions.len() as f64).collect()));
    let conds: Vec<f64> = t
        .rules
        .iter()
        .flat_map(|r| r.conditions.iter())
        .flat_map(|c| [c.feature as f64, if c.op == CmpOp::LessEq { 0.0 } else { 1.0 }, c.threshold])
        .collect();
    out.push(NamedArray::new("cubist.conditions", vec![conds.len() / 3, 3], conds)?);
    let mut models = Vec::with_capacity(t.rules.len() * width);
    for r in &t.rules {
        models.push(r.model.intercept);
        models.extend(&r.model.coefficients);
    }
    out.push(NamedArray::new("cubist.models", vec![t.rules.len(), width], models)?);
    out.push(NamedArray::vector("cubist.coverage", t.rules.iter().map(|r| r.n_covered as f64).collect()));
    Ok(())
}

fn read_cubist(c: &Container) -> Result<CubistModel> {
    let meta = exact(c, "cubist.meta", &[3])?;
    let n_features = count(meta[0], "n_features")?;
    let sizes = vector(c, "cubist.rule_sizes")?;
    let n_rules = sizes.len();
    let coverage = exact(c, "cubist.coverage", &[n_rules])?;
    let models = exact(c, "cubist.models", &[n_rules, 1 + n_features])?;
    let total = sizes.iter().map(|&s| count(s, "rule size")).sum::<Result<usize>>()?;
    let conds = exact(c, "cubist.conditions", &[total, 3])?;
    let mut rules = Vec::with_capacity(n_rules);
    let mut at = 0;
    for (i, &size) in sizes.iter().enumerate() {
        let conditions = conds[at * 3..(at + size as usize) * 3]
            .chunks_exact(3)
            .map(|c| {
                let feature = count(c[0], "feature")?;
                if feature >= n_features {
                    return Err(Error::Container(format!("condition feature {feature} out of range")));
                }
                let op = match c[1] {
                    0.0 => CmpOp::LessEq,
                    1.0 => CmpOp::Greater,
                    v => return Err(Error::Container(format!("bad condition operator {v}"))),
                };
                Ok(Condition { feature, op, threshold: c[2] })
            })
            .collect::<Result<Vec<_>>>()?;
        at += size as usize;
        let row = &models[i * (1 + n_features)..(i + 1) * (1 + n_features)];
        rules.push(Rule {
            conditions,
            model: LinearModel { intercept: row[0], coefficients: row[1..].to_vec() },
            n_covered: count(coverage[i], "coverage")?,
        });
    }
    Ok(CubistModel { rules, n_features, min_leaf: count(meta[1], "min_leaf")?, smoothing: meta[2] != 0.0 })
}

fn push_lssvm(out: &mut Vec<NamedArray>, m: &LssvmModel) {
    out.push(NamedArray::vector("lssvm.alphas", m.alphas.iter().copied().collect()));
    out.push(NamedArray::scalar("lssvm.bias", m.bias));
    out.push(NamedArray::scalar("lssvm.gamma", m.gamma));
    out.push(matrix_array("lssvm.support", &m.support));
    out.push(NamedArray::vector("lssvm.scaler_min", m.scaler.min.clone()));
    out.push(NamedArray::vector("lssvm.scaler_max", m.scaler.max.clone()));
}

fn read_lssvm(c: &Container) -> Result<LssvmModel> {
    LssvmModel::from_parts(
        DVector::from_column_slice(vector(c, "lssvm.alphas")?),
        exact(c, "lssvm.bias", &[1])?[0],
        exact(c, "lssvm.gamma", &[1])?[0],
        matrix(c, "lssvm.support")?,
        MinMaxScaler { min: vector(c, "lssvm.scaler_min")?.to_vec(), max: vector(c, "lssvm.scaler_max")?.to_vec() },
    )
}

fn push_neural(out: &mut Vec<NamedArray>, n: &NeuralModel) -> Result<()> {
    match &n.arch {
        Architecture::Mlp(cfg) => {
            out.push(NamedArray::vector("nn.arch", cfg.hidden.iter().map(|&h| h as f64).collect()));
            out.push(NamedArray::vector("nn.reg", vec![cfg.l1, cfg.l2]));
            out.push(NamedArray::vector("nn.seed", seed_parts(cfg.seed).to_vec()));
        }
        Architecture::Cnn(cfg) => {
            out.push(NamedArray::vector("nn.conv_channels", cfg.conv_channels.iter().map(|&h| h as f64).collect()));
            let [hi, lo] = seed_parts(cfg.seed);
            out.push(NamedArray::vector("nn.cnn", vec![cfg.pool as f64, cfg.dense as f64, hi, lo]));
            out.push(NamedArray::vector(
                "nn.recipe",
                vec![cfg.recipe.version as f64, cfg.recipe.rows as f64, cfg.recipe.cols as f64],
            ));
        }
    }
    out.push(NamedArray::vector("nn.scaling", vec![n.x_scale, n.y_mean, n.y_std, n.n_points as f64]));
    out.push(NamedArray::vector("nn.x_mean", n.x_mean.clone()));
    for (i, p) in n.net.params().iter().enumerate() {
        out.push(NamedArray::new(format!("nn.param.{i}"), p.shape.clone(), p.data.clone())?);
    }
    Ok(())
}

fn read_neural(c: &Container) -> Result<NeuralModel> {
    let scaling = exact(c, "nn.scaling", &[4])?;
    let n_points = count(scaling[3], "n_points")?;
    let (arch, mut net) = match c.kind {
        ModelKind::Mlp => {
            let hidden = vector(c, "nn.arch")?.iter().map(|&h| count(h, "layer width")).collect::<Result<Vec<_>>>()?;
            let reg = exact(c, "nn.reg", &[2])?;
            let s = exact(c, "nn.seed", &[2])?;
            let cfg = MlpConfig { hidden, l1: reg[0], l2: reg[1], seed: seed_from(s[0], s[1])? };
            let net = cfg.build(n_points)?;
            (Architecture::Mlp(cfg), net)
        }
        _ => {
            let conv_channels =
                vector(c, "nn.conv_channels")?.iter().map(|&h| count(h, "channels")).collect::<Result<Vec<_>>>()?;
            let m = exact(c, "nn.cnn", &[4])?;
            let r = exact(c, "nn.recipe", &[3])?;
            let recipe = SpectrogramRecipe {
                version: count(r[0], "recipe version")? as u32,
                rows: count(r[1], "rows")?,
                cols: count(r[2], "cols")?,
            };
            let cfg = CnnConfig {
                conv_channels,
                pool: count(m[0], "pool")?,
                dense: count(m[1], "dense")?,
                recipe,
                seed: seed_from(m[2], m[3])?,
            };
            let net = cfg.build()?;
            (Architecture::Cnn(cfg), net)
        }
    };
    for (i, p) in net.params_mut().into_iter().enumerate() {
        let stored = exact(c, &format!("nn.param.{i}"), &p.shape)?;
        p.data.copy_from_slice(stored);
    }
    let x_mean = vector(c, "nn.x_mean")?.to_vec();
    if matches!(arch, Architecture::Mlp(_)) && x_mean.len() != n_points {
        return Err(Error::LengthMismatch { left: n_points, right: x_mean.len() });
    }
    Ok(NeuralModel { arch, net, n_points, x_mean, x_scale: scaling[0], y_mean: scaling[1], y_std: scaling[2] })
}
