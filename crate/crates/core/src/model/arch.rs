use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{norm2, spectral_norm, Matrix};

/// Which parameter space (0-based) drives each of the `L + 1` linear maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharingSchedule {
    num_spaces: usize,
    assignment: Vec<usize>,
}

impl SharingSchedule {
    /// `assignment[l - 1]` is the space of layer `l`; the last entry is the
    /// space of the final transform.
    pub fn new(num_spaces: usize, assignment: Vec<usize>) -> Result<Self> {
        if assignment.len() < 2 {
            return Err(Error::InvalidSpec(
                "schedule needs at least one layer plus the final transform".into(),
            ));
        }
        let mut hit = vec![false; num_spaces];
        for &j in &assignment {
            if j >= num_spaces {
                return Err(Error::InvalidSpec(format!(
                    "space index {j} out of range for J = {num_spaces}"
                )));
            }
            hit[j] = true;
        }
        if let Some(j) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidSpec(format!("space {j} is used by no layer")));
        }
        Ok(SharingSchedule {
            num_spaces,
            assignment,
        })
    }

    /// One space for every layer and the final transform (recurrent net).
    pub fn shared(layers: usize) -> Self {
        SharingSchedule {
            num_spaces: 1,
            assignment: vec![0; layers + 1],
        }
    }

    /// Odd positions use the first space, even positions the second.
    pub fn alternating(layers: usize) -> Self {
        SharingSchedule {
            num_spaces: 2,
            assignment: (1..=layers + 1).map(|l| if l % 2 == 1 { 0 } else { 1 }).collect(),
        }
    }

    /// A separate space for every layer and for the final transform.
    pub fn unshared(layers: usize) -> Self {
        SharingSchedule {
            num_spaces: layers + 1,
            assignment: (0..=layers).collect(),
        }
    }

    pub fn num_spaces(&self) -> usize {
        self.num_spaces
    }

    pub fn layers(&self) -> usize {
        self.assignment.len() - 1
    }

    /// Space of position `l` (1-based, `l = L + 1` is the final transform).
    pub fn space_of(&self, l: usize) -> usize {
        self.assignment[l - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormTag {
    Spectral,
    Euclidean,
}

/// Shape of a weight block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockShape {
    Dense { rows: usize, cols: usize },
    Kernel { len: usize },
}

impl BlockShape {
    pub fn len(&self) -> usize {
        match *self {
            BlockShape::Dense { rows, cols } => rows * cols,
            BlockShape::Kernel { len } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameterization of one parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Dictionary `Φ` (`N x atoms`): interior layers use `A Φ`, the final
    /// transform uses `Φ`.
    Dense { a: Matrix, atoms: usize },
    /// Single-channel circular convolution with a zero-padded kernel:
    /// interior layers use `A T(w)`, the final transform uses `T(w)`.
    Conv { a: Matrix, kernel_len: usize },
}

impl MapKind {
    pub fn measurement(&self) -> &Matrix {
        match self {
            MapKind::Dense { a, .. } | MapKind::Conv { a, .. } => a,
        }
    }

    /// Ambient signal dimension `N`.
    pub fn signal_dim(&self) -> usize {
        self.measurement().cols()
    }

    /// Width of the coefficient vector the maps act on.
    pub fn code_dim(&self) -> usize {
        match self {
            MapKind::Dense { atoms, .. } => *atoms,
            MapKind::Conv { a, .. } => a.cols(),
        }
    }

    pub fn block_shape(&self) -> BlockShape {
        match self {
            MapKind::Dense { a, atoms } => BlockShape::Dense {
                rows: a.cols(),
                cols: *atoms,
            },
            MapKind::Conv { kernel_len, .. } => BlockShape::Kernel { len: *kernel_len },
        }
    }

    pub fn norm_tag(&self) -> NormTag {
        match self {
            MapKind::Dense { .. } => NormTag::Spectral,
            MapKind::Conv { .. } => NormTag::Euclidean,
        }
    }

    /// Lipschitz constant of `w ↦ B(w)` from the block norm to `‖·‖_{2→2}`.
    /// Convolutions use `‖T(w)‖ ≤ ‖w‖₁ ≤ √k ‖w‖₂`.
    pub fn lipschitz(&self, is_final: bool) -> Result<f64> {
        let a_norm = if is_final {
            1.0
        } else {
            spectral_norm(self.measurement())?
        };
        Ok(match self {
            MapKind::Dense { .. } => a_norm,
            MapKind::Conv { kernel_len, .. } => a_norm * (*kernel_len as f64).sqrt(),
        })
    }

    /// Explicit matrix of `B(w)`.
    pub fn materialize(&self, block: &WeightBlock, is_final: bool) -> Result<Matrix> {
        match (self, block) {
            (MapKind::Dense { a, atoms }, WeightBlock::Dense(phi)) => {
                if phi.shape() != (a.cols(), *atoms) {
                    return Err(Error::dims(format!(
                        "dictionary is {:?}, expected {:?}",
                        phi.shape(),
                        (a.cols(), atoms)
                    )));
                }
                Ok(if is_final { phi.clone() } else { a.matmul(phi) })
            }
            (MapKind::Conv { a, kernel_len }, WeightBlock::Kernel(w)) => {
                if w.len() != *kernel_len {
                    return Err(Error::dims(format!(
                        "kernel has length {}, expected {kernel_len}",
                        w.len()
                    )));
                }
                let t = circulant(w, a.cols())?;
                Ok(if is_final { t } else { a.matmul(&t) })
            }
            _ => Err(Error::dims("weight block kind does not match map kind")),
        }
    }

    /// Pulls a gradient with respect to the materialized `B` back to the
    /// weight block.
    pub fn pullback(&self, d_b: &Matrix, is_final: bool) -> WeightBlock {
        match self {
            MapKind::Dense { a, .. } => {
                WeightBlock::Dense(if is_final { d_b.clone() } else { a.t_matmul(d_b) })
            }
            MapKind::Conv { a, kernel_len } => {
                let d_t = if is_final { d_b.clone() } else { a.t_matmul(d_b) };
                let n = d_t.rows();
                let mut dw = vec![0.0; *kernel_len];
                for (t, slot) in dw.iter_mut().enumerate() {
                    for i in 0..n {
                        *slot += d_t[(i, (i + n - t) % n)];
                    }
                }
                WeightBlock::Kernel(dw)
            }
        }
    }
}

/// `N x N` circular-convolution operator of the zero-padded kernel:
/// `T(w)[i][j] = w[(i - j) mod N]` (zero past the kernel length).
pub fn circulant(w: &[f64], n: usize) -> Result<Matrix> {
    if w.len() > n {
        return Err(Error::dims(format!(
            "kernel length {} exceeds signal length {n}",
            w.len()
        )));
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        let t = (i + n - j) % n;
        if t < w.len() {
            w[t]
        } else {
            0.0
        }
    }))
}

/// One block `w^(j)` of the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightBlock {
    Dense(Matrix),
    Kernel(Vec<f64>),
}

impl WeightBlock {
    pub fn zeros(shape: BlockShape) -> Self {
        match shape {
            BlockShape::Dense { rows, cols } => WeightBlock::Dense(Matrix::zeros(rows, cols)),
            BlockShape::Kernel { len } => WeightBlock::Kernel(vec![0.0; len]),
        }
    }

    pub fn shape(&self) -> BlockShape {
        match self {
            WeightBlock::Dense(m) => BlockShape::Dense {
                rows: m.rows(),
                cols: m.cols(),
            },
            WeightBlock::Kernel(w) => BlockShape::Kernel { len: w.len() },
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            WeightBlock::Dense(m) => m.as_slice(),
            WeightBlock::Kernel(w) => w,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            WeightBlock::Dense(m) => m.as_mut_slice(),
            WeightBlock::Kernel(w) => w,
        }
    }

    /// Spectral norm for matrices, Euclidean norm for kernels.
    pub fn norm(&self) -> Result<f64> {
        match self {
            WeightBlock::Dense(m) => spectral_norm(m),
            WeightBlock::Kernel(w) => Ok(norm2(w)),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for x in self.values_mut() {
            *x *= c;
        }
    }
}

/// Fixed (non-trainable) map applied after each soft thresholding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Identity,
    FixedLinear(Matrix),
}

/// Network layout: widths `n_0..n_{L+1}`, sharing schedule, one map kind per
/// parameter space, pooling per layer, and the output clip radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    input_dim: usize,
    widths: Vec<usize>,
    schedule: SharingSchedule,
    spaces: Vec<MapKind>,
    pooling: Vec<Pooling>,
    b_out: f64,
}

impl Architecture {
    pub fn new(
        schedule: SharingSchedule,
        spaces: Vec<MapKind>,
        pooling: Vec<Pooling>,
        b_out: f64,
    ) -> Result<Self> {
        let layers = schedule.layers();
        if spaces.len() != schedule.num_spaces() {
            return Err(Error::InvalidSpec(format!(
                "{} map kinds for J = {}",
                spaces.len(),
                schedule.num_spaces()
            )));
        }
        if pooling.len() != layers {
            return Err(Error::InvalidSpec(format!(
                "{} pooling maps for L = {layers}",
                pooling.len()
            )));
        }
        if !(b_out > 0.0 && b_out.is_finite()) {
            return Err(Error::InvalidSpec(format!("b_out must be positive, got {b_out}")));
        }
        let input_dim = spaces[0].measurement().rows();
        let mut widths = Vec::with_capacity(layers + 2);
        widths.push(spaces[schedule.space_of(1)].code_dim());
        for l in 1..=layers {
            let kind = &spaces[schedule.space_of(l)];
            if kind.measurement().rows() != input_dim {
                return Err(Error::dims(format!(
                    "layer {l}: measurement matrix has {} rows, input has {input_dim}",
                    kind.measurement().rows()
                )));
            }
            if kind.code_dim() != widths[l - 1] {
                return Err(Error::dims(format!(
                    "layer {l}: map acts on width {}, previous layer has width {}",
                    kind.code_dim(),
                    widths[l - 1]
                )));
            }
            let next = match &pooling[l - 1] {
                Pooling::Identity => widths[l - 1],
                Pooling::FixedLinear(p) => {
                    if p.cols() != widths[l - 1] {
                        return Err(Error::dims(format!(
                            "layer {l}: pooling has {} columns, expected {}",
                            p.cols(),
                            widths[l - 1]
                        )));
                    }
                    if spectral_norm(p)? > 1.0 + 1e-10 {
                        return Err(Error::InvalidSpec(format!(
                            "layer {l}: pooling map is not 1-Lipschitz"
                        )));
                    }
                    p.rows()
                }
            };
            widths.push(next);
        }
        let final_kind = &spaces[schedule.space_of(layers + 1)];
        if final_kind.code_dim() != widths[layers] {
            return Err(Error::dims(format!(
                "final transform acts on width {}, last layer has width {}",
                final_kind.code_dim(),
                widths[layers]
            )));
        }
        widths.push(final_kind.signal_dim());
        Ok(Architecture {
            input_dim,
            widths,
            schedule,
            spaces,
            pooling,
            b_out,
        })
    }

    /// Identity pooling everywhere.
    pub fn unpooled(schedule: SharingSchedule, spaces: Vec<MapKind>, b_out: f64) -> Result<Self> {
        let layers = schedule.layers();
        Architecture::new(schedule, spaces, vec![Pooling::Identity; layers], b_out)
    }

    pub fn layers(&self) -> usize {
        self.schedule.layers()
    }

    /// Measurement dimension `n`.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// `n_0..n_{L+1}`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.layers() + 1]
    }

    pub fn schedule(&self) -> &SharingSchedule {
        &self.schedule
    }

    pub fn spaces(&self) -> &[MapKind] {
        &self.spaces
    }

    pub fn pooling(&self) -> &[Pooling] {
        &self.pooling
    }

    pub fn b_out(&self) -> f64 {
        self.b_out
    }

    pub fn with_b_out(mut self, b_out: f64) -> Result<Self> {
        if !(b_out > 0.0 && b_out.is_finite()) {
            return Err(Error::InvalidSpec(format!("b_out must be positive, got {b_out}")));
        }
        self.b_out = b_out;
        Ok(self)
    }

    /// Map kind driving position `l` (1-based).
    pub fn kind_of(&self, l: usize) -> &MapKind {
        &self.spaces[self.schedule.space_of(l)]
    }

    /// Total number of weights `K = k_1 + ... + k_J`.
    pub fn weight_count(&self) -> usize {
        self.spaces.iter().map(|s| s.block_shape().len()).sum()
    }

    /// `n_∞ = max(n_0, ..., n_L)`: the widest vector any threshold acts on.
    pub fn max_hidden_width(&self) -> usize {
        self.widths[..=self.layers()].iter().copied().max().unwrap_or(0)
    }
}
