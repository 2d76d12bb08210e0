//! Shared fixtures for the hot-path benchmarks.

use stepe::{inject_noise, make_blobs, Arch, LabeledDataset, ModelState, NoiseKind, NoiseSpec};

/// Gaussian blobs with 40% symmetric label noise, sized for benchmarking the
/// probe and training passes rather than for accuracy.
pub fn noisy_blobs(n_train: usize, dim: usize, classes: usize) -> LabeledDataset {
    let clean =
        make_blobs(classes, dim, n_train, classes.max(32), 6.0, 7).expect("benchmark dataset");
    inject_noise(
        clean,
        &NoiseSpec {
            kind: NoiseKind::Symmetric,
            rate: 0.4,
            seed: 11,
        },
    )
    .expect("benchmark noise")
}

/// A freshly initialized MLP matched to the dataset's shape.
pub fn mlp_for(ds: &LabeledDataset, hidden: usize) -> ModelState {
    ModelState::init(Arch::Mlp { hidden }, ds.dim(), ds.n_classes(), 5).expect("benchmark model")
}
