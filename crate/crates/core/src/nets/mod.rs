//! The three learned components: feature extractor with illumination head,
//! signed-distance + albedo field, and shading network.

pub mod checkpoint;
pub mod eval;
pub mod field;
pub mod shading;
pub mod unet;

use crate::geom::encode::{encoded_dim, DEFAULT_OCTAVES};
use crate::graph::layers::{init_conv, init_dense};
use crate::graph::ParamStore;
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Architecture hyper-parameters. `desk()` is the default small
/// configuration trainable on a workstation; `full()` follows the large
/// 13-layer layout (64 filters doubling to 512, 256-d features, 512-wide
/// field MLP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Encoder stage widths; spatial size halves between stages.
    pub unet_widths: Vec<usize>,
    /// Channels of the pixel-aligned feature map.
    pub feat_dim: usize,
    /// Illumination code length.
    pub illum_dim: usize,
    pub field_width: usize,
    pub field_layers: usize,
    pub shade_width: usize,
    pub shade_layers: usize,
    pub encode_octaves: usize,
}

impl NetConfig {
    pub fn desk() -> Self {
        Self {
            unet_widths: vec![8, 16, 32, 64, 64],
            feat_dim: 32,
            illum_dim: 16,
            field_width: 64,
            field_layers: 8,
            shade_width: 64,
            shade_layers: 3,
            encode_octaves: DEFAULT_OCTAVES,
        }
    }

    pub fn full() -> Self {
        Self {
            unet_widths: vec![64, 128, 256, 512, 512, 512],
            feat_dim: 256,
            illum_dim: 16,
            field_width: 512,
            field_layers: 8,
            shade_width: 256,
            shade_layers: 3,
            encode_octaves: DEFAULT_OCTAVES,
        }
    }

    /// Number of 2x downsamplings in the encoder.
    pub fn depth(&self) -> usize {
        self.unet_widths.len() - 1
    }

    /// Input side length must be divisible by this.
    pub fn side_multiple(&self) -> usize {
        1 << self.depth()
    }

    pub fn encoded_dim(&self) -> usize {
        encoded_dim(self.encode_octaves)
    }

    pub fn field_input_dim(&self) -> usize {
        self.feat_dim + self.encoded_dim()
    }

    /// The layer whose input gets the skip re-injection.
    pub fn field_skip_layer(&self) -> usize {
        self.field_layers / 2
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// All learnable parameters plus the architecture they belong to. The
/// decision-boundary sharpness k is stored as the parameter `k_log`
/// (k = exp(k_log) keeps it positive).
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    pub store: ParamStore<T>,
    pub config: NetConfig,
}

pub const K_LOG: &str = "k_log";

impl<T: Scalar> ModelParams<T> {
    /// Fresh parameters. `near_sigma` sets the initial boundary sharpness
    /// to k = 1/near_sigma.
    pub fn init<R: Rng>(config: NetConfig, near_sigma: T, rng: &mut R) -> Self {
        let mut store = ParamStore::new();

        // encoder convs
        let mut cin = 3;
        for (i, &w) in config.unet_widths.iter().enumerate() {
            init_conv(&mut store, &format!("g.enc{i}"), 3, cin, w, rng);
            cin = w;
        }
        // decoder convs: stage i consumes upsampled stage (i+1) + skip i
        for i in (0..config.unet_widths.len() - 1).rev() {
            let up_c = config.unet_widths[i + 1];
            let skip_c = config.unet_widths[i];
            init_conv(
                &mut store,
                &format!("g.dec{i}"),
                3,
                up_c + skip_c,
                config.unet_widths[i],
                rng,
            );
        }
        init_conv(
            &mut store,
            "g.out",
            3,
            config.unet_widths[0],
            config.feat_dim,
            rng,
        );
        // illumination head: pooled bottleneck -> code
        init_dense(
            &mut store,
            "g.illum",
            *config.unet_widths.last().unwrap(),
            config.illum_dim,
            rng,
        );

        // field MLP with mid-layer skip
        let in_dim = config.field_input_dim();
        let mut prev = in_dim;
        for i in 0..config.field_layers {
            let this_in = if i == config.field_skip_layer() {
                prev + in_dim
            } else {
                prev
            };
            init_dense(&mut store, &format!("f.l{i}"), this_in, config.field_width, rng);
            prev = config.field_width;
        }
        init_dense(&mut store, "f.out", prev, 4, rng);

        // shading MLP
        let mut prev = 3 + config.illum_dim;
        for i in 0..config.shade_layers {
            init_dense(&mut store, &format!("s.l{i}"), prev, config.shade_width, rng);
            prev = config.shade_width;
        }
        init_dense(&mut store, "s.out", prev, 3, rng);

        store.insert(
            K_LOG,
            crate::tensor::TensorData::scalar((T::one() / near_sigma).ln()),
        );

        Self { store, config }
    }

    pub fn k(&self) -> T {
        self.store.get(K_LOG).expect("k_log present").data[0].exp()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            store: self.store.cast(),
            config: self.config.clone(),
        }
    }

    /// Names grouped by component, for gradient-flow instrumentation.
    pub fn group_of(name: &str) -> &'static str {
        if name == K_LOG {
            "k"
        } else if name.starts_with("g.illum") {
            "illum"
        } else if name.starts_with("g.") {
            "feature_extractor"
        } else if name.starts_with("f.") {
            "field"
        } else if name.starts_with("s.") {
            "shading"
        } else {
            "other"
        }
    }
}
