"""Estimators for the dfsmc module."""

from .music_estimator import (
    CovarianceEstimate as CovarianceEstimate,
    MusicEstimator as MusicEstimator,
    MusicResult as MusicResult,
    music_spectrum as music_spectrum,
    sample_covariance as sample_covariance,
)
from .sbl_estimator import (
    DfsmcEstimator as DfsmcEstimator,
    SblOffGridEstimator as SblOffGridEstimator,
    SblOnGridEstimator as SblOnGridEstimator,
    run_sbl_off_grid as run_sbl_off_grid,
    run_sbl_on_grid as run_sbl_on_grid,
)
