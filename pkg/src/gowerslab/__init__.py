"""Gowers uniformity norms of sets in R^d, their rearrangement inequalities
and near-maximizer experiments, computed on regular grids."""

__version__ = "0.1.0"

from .autocorr import (
    Autocorrelation, MuMeasure, autocorrelation, ball_autocorrelation_closed_form, mu_density, tilde_F, tilde_f_star,
)
from .gowers import (
    BudgetExceeded, ChainReport, GammaEstimate, GowersResult, chain_report, gamma_estimate, gamma_value,
    gowers_norm, normalized_ratio, tol_disc, u2_via_fourier,
)
from .grid import (
    AffineMap, Ball, Box, Difference, Ellipsoid, EmptySet, GridExtentError, GridFunction, GridSpec, ShapeSpec,
    Union, apply_affine, measure, random_set, rasterize, symmetric_difference,
)
from .multilinear import SetTuple, SliceProfile, bll_compare, slice_volume_profile, t_form
from .rearrange import (
    LayerCake, Profile1D, bathtub_oracle, cumulative_F, layer_cake, radial_rearrangement, rearrangement_1d,
    superlevel_set,
)
from .stability import (
    ExceptionalSetReport, StabilityRecord, exceptional_measure, fit_ellipsoid, stability_sweep,
)
