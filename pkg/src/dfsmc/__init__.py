"""Direction finding with sparse Bayesian learning under mutual coupling."""

from .array_model import (
    ArrayGeometry as ArrayGeometry,
    Scenario as Scenario,
    SourceSet as SourceSet,
    coupling_matrix as coupling_matrix,
    generate_coupling_vector as generate_coupling_vector,
    q_matrix as q_matrix,
    simulate_snapshots as simulate_snapshots,
    steering_vector as steering_vector,
    trial_streams as trial_streams,
)
from .config import (
    ConfigError as ConfigError,
    ExperimentConfig as ExperimentConfig,
    load_config as load_config,
)
from .dictionary import (
    DictionaryBlocks as DictionaryBlocks,
    Grid as Grid,
    build_dictionary as build_dictionary,
    build_grid as build_grid,
    build_grid_degrees as build_grid_degrees,
)
from .engine import (
    Hyperparams as Hyperparams,
    Mode as Mode,
    PosteriorState as PosteriorState,
    Schedule as Schedule,
    SolverError as SolverError,
    run_dfsmc as run_dfsmc,
)
from .estimator import (
    DoaEstimator as DoaEstimator,
    Estimate as Estimate,
    EstimatorSetup as EstimatorSetup,
)
from .estimators import (
    DfsmcEstimator as DfsmcEstimator,
    MusicEstimator as MusicEstimator,
    SblOffGridEstimator as SblOffGridEstimator,
    SblOnGridEstimator as SblOnGridEstimator,
    music_spectrum as music_spectrum,
    run_sbl_off_grid as run_sbl_off_grid,
    run_sbl_on_grid as run_sbl_on_grid,
    sample_covariance as sample_covariance,
)
from .experiment import (
    SweepReport as SweepReport,
    TrialReport as TrialReport,
    run_experiment as run_experiment,
)
from .metrics import error_e1 as error_e1, error_e2 as error_e2
from .spectrum import SpectrumResult as SpectrumResult, pick_peaks as pick_peaks
from .suite import EstimatorSuite as EstimatorSuite
