"""fragsim: simulation and verification lab for stopped fragmentation chains."""

from .engine import (EventLog, StoppedState, TaggedPath, blocks_at,
                     continue_stopped, first_passage_sigma,
                     simulate_stopped, simulate_stopped_batch, stopping_line,
                     tagged_fragment_path)
from .errors import (BudgetExceeded, ConfigError, DomainError, FragsimError,
                     IncompleteHorizon, LatticeWarning, NoRoot, NonFinite,
                     QuadratureFailure)
from .experiments import (ExperimentConfig, ExperimentReport,
                          alpha_invariance_check, martingale_suite,
                          run_experiment, truncation_sweep)
from .functionals import (Characteristic, FunctionalValue, count_T,
                          counted_process, empirical_mean, energy,
                          energy_characteristic, empirical_characteristic,
                          f_const, f_power, lambda_mart, m_mart,
                          precheck_characteristic, psi_const, psi_deficit,
                          psi_excess_power, psi_mass_power,
                          window_characteristic)
from .limits import (LimitConstant, empirical_kernel, empirical_limit,
                     energy_limit, theorem_constant)
from .measures import (BetaBinary, DiracBinary, DislocationModel,
                       DissipativeUniformBinary, MalthusianData, MassSplit,
                       UniformBinary, model_from_config, solve_malthusian)
from .renewal import RenewalSolution, renewal_oracle
from .rng import Stream, mix

__version__ = "0.1.0"
