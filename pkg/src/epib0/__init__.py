"""Dual-echo EPI field-inhomogeneity correction by structured low-rank
annihilating-filter estimation, with a synthetic ground-truth harness."""

from .acquisition import (
    AcqParams,
    KTVolume,
    SamplingMask,
    adjoint,
    adjoint_exp,
    build_masks,
    combine_dual_echo,
    exp_series,
    forward,
    forward_exp,
)
from .baselines import (
    IterativeConfig,
    direct_method,
    evaluate,
    ifft_recon,
    iterative_method,
    nrmse,
    rmse,
)
from .errors import (
    DataFormatError,
    FilterTooLargeError,
    NumericalError,
    ParameterError,
)
from .lifting import (
    FilterSpec,
    build_Ts,
    gram,
    gram_full,
    lift_adjoint,
    lift_apply,
    valid_rows,
)
from .maps import BetaMap, beta_to_maps
from .nullspace import (
    NullspaceBasis,
    PixelFilterMatrix,
    beta_from_pixel_filters,
    estimate_filter_smooth,
    extract_pixel_filters,
    irls_denoise,
    weighted_nullspace,
)
from .phantom import (
    Ellipse,
    GammaMap,
    GaussianBump,
    PhantomSpec,
    add_noise,
    distorted_ifft_preview,
    make_phantom,
    simulate,
    simulate_dual_echo,
)
from .recon import CorrectConfig, ReconResult, correct, filter_to_beta, solve_alpha

__version__ = "0.1.0"
