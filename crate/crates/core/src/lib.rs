//! Functional Wiener filtering for scalar time series.
//!
//! The filter works in the Gaussian-kernel feature space: lagged
//! autocorrentropy statistics of the training series form a small symmetric
//! Toeplitz system whose solution weights `L` Gaussian bumps centred on the
//! current input window. A pre-imaging step then maps that function back to a
//! scalar prediction, either by a fixed-point search ([`preimage::fixed_point`])
//! or by local models drawn from the training set
//! ([`preimage::LocalModelIndex`]).
//!
//! Training is `O(N L)` kernel evaluations plus one `L x L` solve and the
//! test-time cost does not grow with the training set, unlike the KLMS and KRLS
//! comparators in [`baselines`].
//!
//! ```
//! use fwf_core::prelude::*;
//!
//! let series = MackeyGlass { n: 600, ..MackeyGlass::default() }.generate().unwrap();
//! let data = embed(&series, 7, 1).unwrap();
//! let model = FwfModel::fit(&data, KernelConfig::new(1.5).unwrap(), 30.0).unwrap();
//! let index = LocalModelIndex::build(&model).unwrap();
//! let y = index.predict(&model, &data.inputs[100], &LocalModelConfig::default()).unwrap();
//! assert!((y - data.targets[100]).abs() < 1e-9);
//! ```

pub mod baselines;
pub mod correntropy;
pub mod error;
pub mod fwf;
pub mod harness;
pub mod linalg;
pub mod modelfile;
pub mod preimage;
pub mod signal;

pub use error::{ErrorClass, FwfError, Result};

pub mod prelude {
    pub use crate::baselines::{KlmsModel, KrlsModel, WienerModel};
    pub use crate::correntropy::{
        autocorrentropy, center_correntropy, cross_correntropy, gaussian, KernelConfig,
    };
    pub use crate::error::{FwfError, Result};
    pub use crate::fwf::{CorrentropyMatrix, FwfModel, RegularizationRecord};
    pub use crate::preimage::{
        fixed_point, FixedPointConfig, LocalModelConfig, LocalModelIndex, ProbeMetric, Strategy,
    };
    pub use crate::signal::{
        add_gaussian_noise, embed, embed_with_targets, kfold_split, LagVector, Lorenz,
        MackeyGlass, SupervisedDataset, TimeSeries,
    };
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
