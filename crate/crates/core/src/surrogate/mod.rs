//! Amplitude surrogate: invariant and sign-covariant features of localized
//! orbitals, odd-readout perceptron heads for `T1, T2, Λ1, Λ2`, the amplitude
//! loss with analytic gradients, and evaluation through CC post-processing.

mod evaluate;
mod features;
mod model;
mod train;

pub use evaluate::{evaluate, surrogate_energy, EvalOptions, Evaluation, MoleculeMetrics, Predictor, CSV_HEADER};
pub use features::{
    build_features, features_from_mo, gauge_rotation, rotate_spatial_doubles, spatial_fock, spatial_mp2,
    FeatureBlock, FeatureConfig, Features, Normalization, PairFeatures, QuadFeatures, PAIR_FIXED_EVEN,
    PAIR_SIGNED, QUAD_FIXED_EVEN, QUAD_SIGNED,
};
pub use model::{
    spin_doubles, spin_doubles_adjoint, spin_singles, spin_singles_adjoint, Head, Mode, Perceptron,
    SurrogateModel, INIT_OUTPUT_SCALE,
};
pub use train::{
    amplitude_loss, batch_loss, dataset_gradient, dataset_loss, gradient_check, initial_losses, train,
    GradientCheck, LossWeights, TrainOptions, TrainingExample, GRADIENT_FLOOR, UNIT_WEIGHTS,
};
