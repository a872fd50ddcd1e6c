"""Numerical ergodic theory on torus diffeomorphisms: Lyapunov spectra,
dominated splittings, Bowen-ball entropy estimates and Pesin's formula."""

__version__ = "0.1.0"

from .systems import (  # noqa: E402
    SmoothSystem,
    apply_map,
    block,
    cat_map,
    check_volume_preserving,
    identity,
    linear_automorphism,
    make_system,
    perturbed_cat,
    rotation,
    sample_lebesgue,
    standard_map,
    torus_distance,
)
from .cocycle import (  # noqa: E402
    LyapunovSpectrum,
    SplittingField,
    chi,
    cocycle_product,
    det_growth_rate,
    finite_time_oseledec_splitting,
    lyapunov_spectrum_qr,
)
from .domination import (  # noqa: E402
    dichotomy_classify,
    domination_ratio,
    eigensplitting,
    gamma_projection_norm,
    minimal_domination_N,
    minimal_norm,
    power_system,
)
from .graphs import (  # noqa: E402
    GraphOverF,
    propagate_along_bowen,
    safe_tau,
    transform_graph,
)
from .entropy import (  # noqa: E402
    bowen_ball_measure,
    distortion_epsilon,
    in_bowen_ball,
    local_entropy_estimate,
    mane_lower_bound,
    pesin_report,
    sigma_partition,
    slice_bowen_measure,
)
