"""Definition of a direction-of-arrival estimator."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy.typing as npt

from .array_model import ArrayGeometry, CouplingVector, SnapshotMatrix
from .dictionary import DictionaryBlocks, Grid
from .engine import Hyperparams, PosteriorState, Schedule, TraceRecord
from .spectrum import SpectrumResult


@dataclass(frozen=True)
class EstimatorSetup:
    """Shared, read-only inputs every estimator is built from."""

    dictionary: DictionaryBlocks
    hyper: Hyperparams = field(default_factory=Hyperparams)
    schedule: Schedule = field(default_factory=Schedule)

    @property
    def grid(self) -> Grid:
        """The search grid."""
        return self.dictionary.grid

    @property
    def geometry(self) -> ArrayGeometry:
        """The array."""
        return self.dictionary.geometry


@dataclass(frozen=True, eq=False)
class Estimate:
    """Spectrum of one estimator run.

    EM estimators also return their final state and trace, and estimators
    that estimate coupling return the coupling vector normalized to c_0 = 1.
    """

    spectrum: SpectrumResult
    state: PosteriorState | None = None
    trace: list[TraceRecord] = field(default_factory=list)
    coupling: CouplingVector | None = None


class DoaEstimator(ABC):
    @abstractmethod
    def __init__(self, setup: EstimatorSetup) -> None:
        """A direction-of-arrival estimator.

        An estimator turns a snapshot matrix into a spatial spectrum over
        the setup's grid and picks the strongest directions from it.
        Estimators keep no per-call state, so one instance may serve
        several threads.

        Args:
            setup: The dictionary, hyperparameters and schedule to use.

        """

    @abstractmethod
    def estimate(
        self,
        snapshots: SnapshotMatrix,
        num_sources: int,
        *,
        truth: npt.ArrayLike | None = None,
    ) -> Estimate:
        """Estimate source directions from snapshots.

        Args:
            snapshots: N x M snapshot matrix.
            num_sources: Number of directions K to pick.
            truth: Optional true directions in radians, used only for
                diagnostics such as per-iteration error traces.

        Returns:
            The estimate.

        Raises:
            ValueError: If the inputs are inconsistent with the setup.
            SolverError: If the numerics fail.

        """
