"""Monotonicity-based shape reconstruction for 2D time-harmonic elastic scattering."""

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    ElastomonoError,
    GridMismatchError,
    OverlapError,
    SolverError,
    TransmissionEigenvalueError,
    TruncationError,
    UnderResolvedError,
)
from .farfield import (
    DirectionGrid,
    FarFieldOperator,
    HerglotzDensity,
    ScatteringOperator,
    assemble,
    calibrate_sigma,
    herglotz,
    inner,
    scattering,
    translate,
    unitarity_defect,
)
from .forward import (
    FarFieldPattern,
    Incidence,
    PlaneWave,
    eval_field,
    far_field,
    solve_disk,
    solve_grid,
    stress_trace,
)
from .localized import RegionSamples, localization_curve, localize, restriction_matrix
from .medium import Background, Disk, Inclusion, MaterialField, Rect, Union, disk_field
from .monotonicity import (
    IndicatorMap,
    MonotonicityReport,
    TestBall,
    check_energy_identity,
    check_main_identity,
    check_spectra,
    hermitian_part,
    indicator,
    neg_eig_count,
    reconstruct,
    test_operator,
)

__version__ = "0.1.0"
