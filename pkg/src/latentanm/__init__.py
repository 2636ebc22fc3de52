"""latentanm: learn latent causal structure from observational vector data.

A deterministic autoencoder maps observations to latents, a differentiable
DAG layer (soft sort of ordering scores, gated upper-triangular edges) carries
the graph, per-node additive-noise mechanisms abduct exogenous residuals, and
a kernel two-sample objective pushes those residuals toward an independent
prior. The package also ships ground-truth generators, counterfactual
inference, an evaluation suite, and numerical verifiers for the method's
identifiability boundaries.
"""

from .autodiff import Tensor, backward, straight_through
from .config import ExperimentConfig, GeneratorConfig
from .dag import (
    DagParams,
    assemble_adjacency,
    edge_matrix,
    harden_permutation,
    permutation_entropy,
    soft_permutation,
    sparsity_loss,
)
from .mechanisms import MechanismSet, abduct, counterfactual, predict, regenerate
from .metrics import (
    AlignmentResult,
    align,
    evaluate_model,
    independence_test,
    mig,
    mmd_permutation_test,
    mutual_info,
    shd,
    sid,
    theorem1_verdict,
    verify_prop1,
    verify_theorem1,
)
from .model import CausalAutoencoder, ModelConfig
from .synthetic import (
    GroundTruthSCM,
    MixerSpec,
    SampleBatch,
    apply_componentwise_distortion,
    apply_mixer,
    gen_chain2,
    gen_flow,
    gen_pendulum,
    gen_random_anm,
    gen_spurious_encoding,
    generate_dataset,
)
from .training import Adam, FitResult, TrainConfig, fit, schedule
from .wae import Autoencoder, DivergenceError, LossWeights, mmd_loss, reconstruction_loss, total_loss

__version__ = "0.1.0"
