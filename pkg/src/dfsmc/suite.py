"""Primary interface for registering and building estimators."""

from .estimator import DoaEstimator, EstimatorSetup
from .estimators import (
    DfsmcEstimator,
    MusicEstimator,
    SblOffGridEstimator,
    SblOnGridEstimator,
)


class EstimatorSuite:
    def __init__(self) -> None:
        """Primary interface for registering and building estimators."""
        self._estimators: dict[str, type[DoaEstimator]] = {}

        self.register_estimator("dfsmc", DfsmcEstimator)
        self.register_estimator("sbl_on_grid", SblOnGridEstimator)
        self.register_estimator("sbl_off_grid", SblOffGridEstimator)
        self.register_estimator("music", MusicEstimator)

    @property
    def names(self) -> tuple[str, ...]:
        """Registered estimator names, in registration order."""
        return tuple(self._estimators)

    def create(self, name: str, setup: EstimatorSetup) -> DoaEstimator:
        """Build a registered estimator.

        Args:
            name: The name the estimator was registered under.
            setup: The dictionary, hyperparameters and schedule to build it from.

        Returns:
            The estimator instance.

        Raises:
            RuntimeError: If no estimator is registered under the name.

        """
        if name not in self._estimators:
            raise RuntimeError(f"No {name} estimator is registered.")

        return self._estimators[name](setup)

    def register_estimator(
        self,
        name: str,
        estimator: type[DoaEstimator],
        override_existing: bool = False,  # noqa: FBT001, FBT002
    ) -> None:
        """Register a new estimator.

        Args:
            name: The name of the estimator, as used by the `methods`
                config entry and the --method flag.
            estimator: The estimator class to register.
            override_existing: Whether to replace another estimator
                already associated with name.

        Raises:
            ValueError: If an estimator is already registered under
                the passed name and override_existing is not set.
        """
        if name in self._estimators and not override_existing:
            raise ValueError(
                "Estimator already exists and `override_existing` not set."
                " Unable to register.",
            )

        self._estimators[name] = estimator
