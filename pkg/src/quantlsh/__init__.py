"""Random-projection LSH with plain and randomly offset uniform quantization."""

from .coding import CodingParams, Scheme, code_point, code_uq, code_uq_offset, quantize
from .collision import (
    GapResult,
    collision_prob,
    collision_prob_uq,
    collision_prob_uq_offset,
    curve_sweep,
    gap,
    gap_at,
    gap_sweep,
    max_c,
    monte_carlo_collision,
    normal_cdf,
    normal_pdf,
    optimal_w,
)
from .errors import (
    CExceedsBound,
    DatasetFormatError,
    DegenerateGap,
    DimensionMismatch,
    EmptyDataset,
    IndexOutOfRange,
    InvalidParams,
    LshError,
    TTooLarge,
    ZeroVector,
)
from .evaluation import SweepRow, SweepSpec, brute_force_topT, make_synthetic, recall, run_sweep
from .lsh_index import LshConfig, LshIndex
from .projections import (
    DataVector,
    ProjectedPoint,
    ProjectionEnsemble,
    generate_ensemble,
    normalize,
    project,
    sample_correlated_pair,
)

__version__ = "0.1.0"
