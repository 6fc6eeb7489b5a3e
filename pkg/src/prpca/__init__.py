"""Low-rank + sparse appearance tracking toolkit.

A nonconvex proximal robust-PCA solver (ADMM with p-shrinkage) embedded
in an affine particle filter with adaptive template maintenance, plus
center-error / overlap evaluation and a small CLI.
"""

from .admm import (
    Decomposition,
    SolverConfig,
    SolverDivergenceError,
    decompose,
    decompose_batch,
    default_lambda,
)
from .appearance import (
    InvalidParticleError,
    TemplateMatrix,
    build_observation,
    extract_patch,
    likelihood,
    log_likelihood,
    reconstruction_error,
    to_gray,
)
from .metrics import (
    BoundingBox,
    SequenceMetrics,
    aos,
    center_error,
    precision_curve,
    success_curve,
    summarize,
)
from .particle_filter import (
    AffineState,
    DegenerateWeightsError,
    ParticleSet,
    TransitionCovariance,
    map_estimate,
    propagate,
    resample,
    reweight,
)
from .proximal import PNormParams, g_value, h_value, p_shrink, p_shrink_matrix
from .template_update import (
    UpdateThresholds,
    decay_weights,
    maybe_replace,
    occlusion_level,
    template_angle,
)
from .tracker import FrameResult, Tracker, TrackerConfig, track_sequence

__version__ = "0.1.0"
