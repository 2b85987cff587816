"""Smoothness-aware compressed distributed gradient methods.

The package simulates a server plus n workers.  Each worker holds a
matrix smoothness factor L_i for its local loss, compresses whitened
gradients with an unbiased quantizer or sparsifier, and the bit cost of
every message is accounted exactly by an explicit wire format.
"""

from .smoothness import (
    SmoothnessFactor,
    HeterogeneityStats,
    build_factor,
    identity_factor,
    glm_smoothness,
    global_factor,
    heterogeneity,
    lowrank_overapprox,
)
from .compressors import (
    QuantizedVector,
    VarianceCertificate,
    StandardQuantizer,
    BlockQuantizer,
    VaryingStepQuantizer,
    RandTauSparsifier,
    IdentityCompressor,
    SmoothnessWrappedCompressor,
    stochastic_round,
    quantize_standard,
    quantize_block,
    quantize_varying,
    sparsify_rand_tau,
    wrap_with_smoothness,
    certify,
    optimal_sampling_probs,
)
from .step_solver import (
    BitBudget,
    StepSolution,
    budget_for_bits,
    solve_block_dcgd,
    solve_block_diana,
    solve_varying_dcgd,
    solve_varying_diana,
)
from .encoding import (
    EncodedMessage,
    elias_omega_encode,
    elias_omega_decode,
    encode_quantized,
    decode_quantized,
    encoded_bit_count,
    entropy_bound,
    bits_proxy,
)
from .problems import (
    Dataset,
    ReferenceSolution,
    LogisticProblem,
    QuadraticProblem,
    parse_libsvm,
    emit_libsvm,
    rescale_columns,
    heterogeneous_split,
    synthetic_logistic,
    synthetic_quadratic,
    reference_solution,
    make_prox,
    bregman,
)
from .methods import (
    MethodConfig,
    ServerState,
    default_stepsizes,
    dcgd_plus_step,
    diana_plus_step,
    sigma_plus,
    sigma_plus_star,
    worker_rng,
    run,
)
from .traces import Trace, average_traces
from .harness import (
    ExperimentConfig,
    parse_config,
    parse_compressor_spec,
    load_dataset,
    build_worker_compressor,
    prepare_combo,
    run_experiment,
    format_summary,
    encode_bench,
)
from .plotting import emit_svg_plot

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
