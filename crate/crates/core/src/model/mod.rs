//! The interaction network and its interaction-free baseline.
//!
//! Both share a GRU maneuver encoder whose final state is projected to the
//! encoding size. VBIN adds pairwise (PIU) and neighborhood (NIU)
//! interaction units before the decoder; VLSTM decodes the own encoding
//! alone.

mod batch;
mod checkpoint;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use batch::SocialBatch;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};

use crate::datamodel::{
    ConnectionFeature, LabeledSample, ManeuverSequence, CONNECTION_DIM, MANEUVER_DIM, NEIGHBOR_SLOTS,
    OBSERVATION_FRAMES,
};
use crate::error::{Error, Result};
use crate::numerics::{softmax_rows, Graph, ParamStore, Tensor, Var};

/// Encoding size r.
pub const ENCODING_DIM: usize = 48;
/// Pairwise embedding size d.
pub const PAIR_DIM: usize = 64;
/// Social effect size n.
pub const SOCIAL_DIM: usize = 48;
pub const CLASSES: usize = 3;
pub const NIU_HIDDEN: usize = 400;
pub const DECODER_HIDDEN: usize = 48;
pub const GRU_HIDDEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Vbin,
    Vlstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vbin => "vbin",
            ModelKind::Vlstm => "vlstm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vbin" => Ok(ModelKind::Vbin),
            "vlstm" => Ok(ModelKind::Vlstm),
            other => Err(Error::Config(format!("unknown model `{}` (vbin or vlstm)", other))),
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::Vbin => 1,
            ModelKind::Vlstm => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(ModelKind::Vbin),
            2 => Some(ModelKind::Vlstm),
            _ => None,
        }
    }
}

/// Fixed affine standardization applied to raw features before the network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureScaling {
    pub maneuver_mean: [f64; MANEUVER_DIM],
    pub maneuver_std: [f64; MANEUVER_DIM],
    pub connection_mean: [f64; CONNECTION_DIM],
    pub connection_std: [f64; CONNECTION_DIM],
}

impl Default for FeatureScaling {
    fn default() -> Self {
        FeatureScaling {
            maneuver_mean: [0.0; MANEUVER_DIM],
            maneuver_std: [1.0; MANEUVER_DIM],
            connection_mean: [0.0; CONNECTION_DIM],
            connection_std: [1.0; CONNECTION_DIM],
        }
    }
}

impl FeatureScaling {
    /// Per-column mean and standard deviation over targets, neighbors and
    /// connection features of `samples`.
    pub fn fit(samples: &[LabeledSample]) -> Self {
        Self::fit_iter(samples)
    }

    pub fn fit_iter<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>) -> Self {
        let mut m = Moments::<MANEUVER_DIM>::default();
        let mut c = Moments::<CONNECTION_DIM>::default();
        for s in samples {
            for row in s.target.rows() {
                m.add(row);
            }
            for n in &s.neighbors {
                for row in n.features.rows() {
                    m.add(row);
                }
                c.add(&n.connection);
            }
        }
        let (maneuver_mean, maneuver_std) = m.finish();
        let (connection_mean, connection_std) = c.finish();
        FeatureScaling {
            maneuver_mean,
            maneuver_std,
            connection_mean,
            connection_std,
        }
    }

    fn to_vec(self) -> Vec<f64> {
        [self.maneuver_mean, self.maneuver_std, self.connection_mean, self.connection_std].concat()
    }

    fn from_slice(v: &[f64]) -> Self {
        let part = |k: usize| std::array::from_fn(|i| v[k * 6 + i]);
        FeatureScaling {
            maneuver_mean: part(0),
            maneuver_std: part(1),
            connection_mean: part(2),
            connection_std: part(3),
        }
    }
}

struct Moments<const N: usize> {
    n: f64,
    sum: [f64; N],
    sq: [f64; N],
}

impl<const N: usize> Default for Moments<N> {
    fn default() -> Self {
        Moments { n: 0.0, sum: [0.0; N], sq: [0.0; N] }
    }
}

impl<const N: usize> Moments<N> {
    fn add(&mut self, x: &[f64; N]) {
        self.n += 1.0;
        for i in 0..N {
            self.sum[i] += x[i];
            self.sq[i] += x[i] * x[i];
        }
    }

    fn finish(&self) -> ([f64; N], [f64; N]) {
        if self.n == 0.0 {
            return ([0.0; N], [1.0; N]);
        }
        let mean: [f64; N] = std::array::from_fn(|i| self.sum[i] / self.n);
        let std = std::array::from_fn(|i| {
            let var = (self.sq[i] / self.n - mean[i] * mean[i]).max(0.0);
            if var.sqrt() > 1e-6 {
                var.sqrt()
            } else {
                1.0
            }
        });
        (mean, std)
    }
}

/// Input and output width of one fully connected layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerDims {
    pub name: &'static str,
    pub input: usize,
    pub output: usize,
}

const VBIN_LAYERS: [(&str, usize, usize); 6] = [
    ("piu.fc0", 2 * ENCODING_DIM + MANEUVER_DIM, PAIR_DIM),
    ("niu.fc1", NEIGHBOR_SLOTS * PAIR_DIM, NIU_HIDDEN),
    ("niu.fc2", NIU_HIDDEN, NIU_HIDDEN),
    ("niu.fc3", NIU_HIDDEN, SOCIAL_DIM),
    ("decoder.fc4", SOCIAL_DIM + ENCODING_DIM, DECODER_HIDDEN),
    ("decoder.fc5", DECODER_HIDDEN, CLASSES),
];

const VLSTM_LAYERS: [(&str, usize, usize); 2] = [
    ("head.fc_a", ENCODING_DIM, DECODER_HIDDEN),
    ("head.fc_b", DECODER_HIDDEN, CLASSES),
];

/// Names and shapes of every parameter tensor of a model.
pub fn parameter_layout(kind: ModelKind, hidden: usize) -> Vec<(String, Vec<usize>)> {
    let mut out = vec![
        ("encoder.w_ih".to_string(), vec![MANEUVER_DIM, 3 * hidden]),
        ("encoder.w_hh".to_string(), vec![hidden, 3 * hidden]),
        ("encoder.b_ih".to_string(), vec![3 * hidden]),
        ("encoder.b_hh".to_string(), vec![3 * hidden]),
        ("encoder.proj.w".to_string(), vec![hidden, ENCODING_DIM]),
        ("encoder.proj.b".to_string(), vec![ENCODING_DIM]),
    ];
    let layers: &[(&str, usize, usize)] = match kind {
        ModelKind::Vbin => &VBIN_LAYERS,
        ModelKind::Vlstm => &VLSTM_LAYERS,
    };
    for (name, i, o) in layers {
        out.push((format!("{}.w", name), vec![*i, *o]));
        out.push((format!("{}.b", name), vec![*o]));
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
}

impl Dense {
    fn apply(self, g: &mut Graph, vars: &[Var], x: Var) -> Result<Var> {
        let y = g.matmul(x, vars[self.w])?;
        g.add_row(y, vars[self.b])
    }

    fn apply_relu(self, g: &mut Graph, vars: &[Var], x: Var) -> Result<Var> {
        let y = self.apply(g, vars, x)?;
        Ok(g.relu(y))
    }
}

#[derive(Debug)]
pub struct Model {
    kind: ModelKind,
    hidden: usize,
    seed: u64,
    params: ParamStore,
    scaling: FeatureScaling,
    encoded: AtomicUsize,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Model {
            kind: self.kind,
            hidden: self.hidden,
            seed: self.seed,
            params: self.params.clone(),
            scaling: self.scaling,
            encoded: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.hidden == other.hidden
            && self.seed == other.seed
            && self.params == other.params
            && self.scaling == other.scaling
    }
}

impl Model {
    /// Seeded initialization, every tensor uniform in ±1/√fan_in.
    pub fn new(kind: ModelKind, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("GRU hidden size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in parameter_layout(kind, hidden) {
            let fan_in = match name.as_str() {
                "encoder.w_ih" => MANEUVER_DIM,
                n if n.starts_with("encoder.") && !n.starts_with("encoder.proj") => hidden,
                _ => shape[0],
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
            params.push(name, Tensor::new(&shape, data)?);
        }
        Self::from_parts(kind, hidden, seed, params, FeatureScaling::default())
    }

    pub fn vbin(seed: u64) -> Result<Self> {
        Self::new(ModelKind::Vbin, GRU_HIDDEN, seed)
    }

    pub fn vlstm(seed: u64) -> Result<Self> {
        Self::new(ModelKind::Vlstm, GRU_HIDDEN, seed)
    }

    pub(crate) fn from_parts(
        kind: ModelKind,
        hidden: usize,
        seed: u64,
        params: ParamStore,
        scaling: FeatureScaling,
    ) -> Result<Self> {
        let expected = parameter_layout(kind, hidden);
        let mut problems = Vec::new();
        if params.len() != expected.len() {
            problems.push(format!(
                "expected {} tensors, found {}",
                expected.len(),
                params.len()
            ));
        }
        for (i, (name, shape)) in expected.iter().enumerate() {
            match params.index_of(name) {
                None => problems.push(format!("missing {} {:?}", name, shape)),
                Some(k) if params.get(k).shape() != &shape[..] => problems.push(format!(
                    "{}: expected {:?}, found {:?}",
                    name,
                    shape,
                    params.get(k).shape()
                )),
                Some(k) if k != i => problems.push(format!("{} out of order", name)),
                _ => {}
            }
        }
        if !problems.is_empty() {
            return Err(Error::shape(format!(
                "{} parameters do not match the {} layout: {}",
                kind.name(),
                kind.name(),
                problems.join("; ")
            )));
        }
        let model = Model {
            kind,
            hidden,
            seed,
            params,
            scaling,
            encoded: AtomicUsize::new(0),
        };
        model.check_dimensions()?;
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn scaling(&self) -> &FeatureScaling {
        &self.scaling
    }

    pub fn set_scaling(&mut self, scaling: FeatureScaling) {
        self.scaling = scaling;
    }

    /// Number of maneuver sequences run through the encoder so far.
    pub fn encoded_sequences(&self) -> usize {
        self.encoded.load(Ordering::Relaxed)
    }

    fn dense(&self, name: &str) -> Dense {
        let idx = |suffix: &str| {
            self.params
                .index_of(&format!("{}.{}", name, suffix))
                .expect("layout checked at construction")
        };
        Dense { w: idx("w"), b: idx("b") }
    }

    fn idx(&self, name: &str) -> usize {
        self.params.index_of(name).expect("layout checked at construction")
    }

    /// Widths of the fully connected layers as stored in the parameters.
    pub fn layer_dims(&self) -> Vec<LayerDims> {
        let names: Vec<&'static str> = match self.kind {
            ModelKind::Vbin => VBIN_LAYERS.iter().map(|l| l.0).collect(),
            ModelKind::Vlstm => VLSTM_LAYERS.iter().map(|l| l.0).collect(),
        };
        std::iter::once("encoder.proj")
            .chain(names)
            .map(|name| {
                let w = self.params.get(self.dense(name).w).shape();
                LayerDims {
                    name,
                    input: w[0],
                    output: w[1],
                }
            })
            .collect()
    }

    fn check_dimensions(&self) -> Result<()> {
        let dims = self.layer_dims();
        if dims[0].output != ENCODING_DIM {
            return Err(Error::shape(format!("encoding must be {}, got {}", ENCODING_DIM, dims[0].output)));
        }
        let table: &[(&str, usize, usize)] = match self.kind {
            ModelKind::Vbin => &VBIN_LAYERS,
            ModelKind::Vlstm => &VLSTM_LAYERS,
        };
        for (d, (name, i, o)) in dims[1..].iter().zip(table) {
            if (d.input, d.output) != (*i, *o) {
                return Err(Error::shape(format!(
                    "{} must be {}->{}, got {}->{}",
                    name, i, o, d.input, d.output
                )));
            }
        }
        Ok(())
    }

    /// Registers all parameters on `g`; with `trainable` they receive gradients.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        if trainable {
            self.params.bind(g)
        } else {
            self.params.iter().map(|(_, t)| g.constant(t.clone())).collect()
        }
    }

    fn scaled_step(&self, seqs: &[&ManeuverSequence], step: usize) -> Tensor {
        let sc = &self.scaling;
        let data = seqs
            .iter()
            .flat_map(|s| {
                let row = s.0[step];
                (0..MANEUVER_DIM).map(move |c| (row[c] - sc.maneuver_mean[c]) / sc.maneuver_std[c])
            })
            .collect();
        Tensor::new(&[seqs.len(), MANEUVER_DIM], data).expect("step shape")
    }

    /// Encodes `seqs` into an `S x 48` node.
    pub fn encode_graph(&self, g: &mut Graph, vars: &[Var], seqs: &[&ManeuverSequence]) -> Result<Var> {
        if let Some(i) = seqs.iter().position(|s| !s.all_finite()) {
            return Err(Error::validation(format!("maneuver sequence {} has non-finite features", i)));
        }
        self.encoded.fetch_add(seqs.len(), Ordering::Relaxed);
        let s = seqs.len();
        let (w_ih, w_hh) = (vars[self.idx("encoder.w_ih")], vars[self.idx("encoder.w_hh")]);
        let (b_ih, b_hh) = (vars[self.idx("encoder.b_ih")], vars[self.idx("encoder.b_hh")]);
        let mut h = g.constant(Tensor::zeros(&[s, self.hidden]));
        for step in 0..OBSERVATION_FRAMES {
            let x = g.constant(self.scaled_step(seqs, step));
            let gi = g.matmul(x, w_ih)?;
            let gi = g.add_row(gi, b_ih)?;
            let gh = g.matmul(h, w_hh)?;
            let gh = g.add_row(gh, b_hh)?;
            h = g.gru_gates(gi, gh, h)?;
        }
        self.dense("encoder.proj").apply(g, vars, h)
    }

    /// Class logits (`N x 3`) for every target of `batch`.
    pub fn logits(&self, g: &mut Graph, vars: &[Var], batch: &SocialBatch) -> Result<Var> {
        batch.validate()?;
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        match self.kind {
            ModelKind::Vlstm => {
                let seqs: Vec<&ManeuverSequence> = batch.targets.iter().map(|&t| &batch.sequences[t]).collect();
                let h = self.encode_graph(g, vars, &seqs)?;
                let a = self.dense("head.fc_a").apply_relu(g, vars, h)?;
                self.dense("head.fc_b").apply(g, vars, a)
            }
            ModelKind::Vbin => {
                let seqs: Vec<&ManeuverSequence> = batch.sequences.iter().collect();
                let enc = self.encode_graph(g, vars, &seqs)?;
                let n = batch.len();
                let h_t = g.gather_rows(enc, &batch.targets)?;
                let rep: Vec<usize> = batch
                    .targets
                    .iter()
                    .flat_map(|&t| std::iter::repeat_n(t, NEIGHBOR_SLOTS))
                    .collect();
                let h_i = g.gather_rows(enc, &rep)?;
                let flat: Vec<usize> = batch.neighbors.iter().flatten().copied().collect();
                let h_j = g.gather_rows(enc, &flat)?;
                let c = g.constant(self.scaled_connections(&batch.connections));
                let pair = g.concat(&[h_i, h_j, c], 1)?;
                let p = self.piu_graph(g, vars, pair)?;
                let p = g.reshape(p, &[n, NEIGHBOR_SLOTS * PAIR_DIM])?;
                let s = self.niu_graph(g, vars, p)?;
                self.decode_graph(g, vars, s, h_t)
            }
        }
    }

    fn scaled_connections(&self, rows: &[[ConnectionFeature; NEIGHBOR_SLOTS]]) -> Tensor {
        let sc = &self.scaling;
        let data = rows
            .iter()
            .flatten()
            .flat_map(|c| (0..CONNECTION_DIM).map(move |k| (c[k] - sc.connection_mean[k]) / sc.connection_std[k]))
            .collect();
        Tensor::new(&[rows.len() * NEIGHBOR_SLOTS, CONNECTION_DIM], data).expect("connection shape")
    }

    fn piu_graph(&self, g: &mut Graph, vars: &[Var], pair: Var) -> Result<Var> {
        self.dense("piu.fc0").apply_relu(g, vars, pair)
    }

    fn niu_graph(&self, g: &mut Graph, vars: &[Var], p: Var) -> Result<Var> {
        let a = self.dense("niu.fc1").apply_relu(g, vars, p)?;
        let a = self.dense("niu.fc2").apply_relu(g, vars, a)?;
        self.dense("niu.fc3").apply_relu(g, vars, a)
    }

    fn decode_graph(&self, g: &mut Graph, vars: &[Var], s: Var, h: Var) -> Result<Var> {
        let x = g.concat(&[s, h], 1)?;
        let a = self.dense("decoder.fc4").apply_relu(g, vars, x)?;
        self.dense("decoder.fc5").apply(g, vars, a)
    }

    /// Class probabilities, one row per target.
    pub fn forward_batch(&self, batch: &SocialBatch) -> Result<Vec<[f64; CLASSES]>> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let logits = self.logits(&mut g, &vars, batch)?;
        let probs = softmax_rows(g.value(logits).data(), CLASSES);
        Ok(probs
            .chunks(CLASSES)
            .map(|r| [r[0], r[1], r[2]])
            .collect())
    }

    /// Probabilities for `samples`, evaluated in chunks of `chunk` targets.
    pub fn predict(&self, samples: &[LabeledSample], chunk: usize) -> Result<Vec<[f64; CLASSES]>> {
        let mut out = Vec::with_capacity(samples.len());
        for part in samples.chunks(chunk.max(1)) {
            out.extend(self.forward_batch(&SocialBatch::from_samples(part))?);
        }
        Ok(out)
    }

    fn eval<T>(&self, f: impl FnOnce(&mut Graph, &[Var]) -> Result<Var>, read: impl FnOnce(&[f64]) -> T) -> Result<T> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let out = f(&mut g, &vars)?;
        Ok(read(g.value(out).data()))
    }

    /// Encoding h of one maneuver sequence.
    pub fn encode(&self, seq: &ManeuverSequence) -> Result<[f64; ENCODING_DIM]> {
        self.eval(
            |g, v| self.encode_graph(g, v, &[seq]),
            |d| std::array::from_fn(|i| d[i]),
        )
    }

    /// Pairwise interaction embedding of target `h_i` with neighbor `h_j`.
    /// `c_ij` is taken as already standardized.
    pub fn piu(&self, h_i: &[f64; ENCODING_DIM], h_j: &[f64; ENCODING_DIM], c_ij: &ConnectionFeature) -> Result<[f64; PAIR_DIM]> {
        self.require(ModelKind::Vbin)?;
        let x: Vec<f64> = h_i.iter().chain(h_j).chain(c_ij).copied().collect();
        self.eval(
            |g, v| {
                let x = g.constant(Tensor::matrix(1, x.len(), x)?);
                self.piu_graph(g, v, x)
            },
            |d| std::array::from_fn(|i| d[i]),
        )
    }

    /// Neighborhood interaction over the eight slot-ordered embeddings.
    pub fn niu(&self, pairs: &[[f64; PAIR_DIM]]) -> Result<[f64; SOCIAL_DIM]> {
        self.require(ModelKind::Vbin)?;
        if pairs.len() != NEIGHBOR_SLOTS {
            return Err(Error::shape(format!(
                "neighborhood needs {} pair embeddings, got {}",
                NEIGHBOR_SLOTS,
                pairs.len()
            )));
        }
        let x: Vec<f64> = pairs.iter().flatten().copied().collect();
        self.eval(
            |g, v| {
                let x = g.constant(Tensor::matrix(1, x.len(), x)?);
                self.niu_graph(g, v, x)
            },
            |d| std::array::from_fn(|i| d[i]),
        )
    }

    /// Class probabilities from social effect `s` and own encoding `h`.
    pub fn decode(&self, s: &[f64; SOCIAL_DIM], h: &[f64; ENCODING_DIM]) -> Result<[f64; CLASSES]> {
        self.require(ModelKind::Vbin)?;
        let logits = self.eval(
            |g, v| {
                let s = g.constant(Tensor::matrix(1, SOCIAL_DIM, s.to_vec())?);
                let h = g.constant(Tensor::matrix(1, ENCODING_DIM, h.to_vec())?);
                self.decode_graph(g, v, s, h)
            },
            |d| d.to_vec(),
        )?;
        let p = softmax_rows(&logits, CLASSES);
        Ok([p[0], p[1], p[2]])
    }

    /// Probabilities of the baseline from the target sequence alone.
    pub fn vlstm_forward(&self, seq: &ManeuverSequence) -> Result<[f64; CLASSES]> {
        self.require(ModelKind::Vlstm)?;
        let logits = self.eval(
            |g, v| {
                let h = self.encode_graph(g, v, &[seq])?;
                let a = self.dense("head.fc_a").apply_relu(g, v, h)?;
                self.dense("head.fc_b").apply(g, v, a)
            },
            |d| d.to_vec(),
        )?;
        let p = softmax_rows(&logits, CLASSES);
        Ok([p[0], p[1], p[2]])
    }

    /// Standardized connection feature, as the PIU sees it.
    pub fn scale_connection(&self, c: &ConnectionFeature) -> ConnectionFeature {
        let sc = &self.scaling;
        std::array::from_fn(|k| (c[k] - sc.connection_mean[k]) / sc.connection_std[k])
    }

    fn require(&self, kind: ModelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "operation needs a {} model, this is {}",
                kind.name(),
                self.kind.name()
            )))
        }
    }
}
