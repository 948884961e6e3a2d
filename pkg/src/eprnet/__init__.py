"""Entanglement spectra and feedback control of a two-node Gaussian network.

Builds quadrature state-space models of two oscillator nodes linked by
travelling fields (with channel loss and transport delays), synthesizes
the optimal measurement-feedback controller, evaluates the output-field
entanglement spectra, and certifies stability of the delayed closed loop.
"""

from .closedloop import ClosedLoopSystem, DimensionMismatch, assemble, modified_outputs
from .ddestab import (
    DegenerateDelay,
    NoConvergence,
    StabilityReport,
    check_closed_loop,
    rightmost_roots,
    stability_report,
)
from .lqgsynth import (
    DegenerateMeasurement,
    LqgController,
    LqgWeights,
    SynthesisError,
    build_cost,
    load_controller,
    save_controller,
    synthesize,
)
from .quadnet import (
    DelayedStateSpace,
    NetworkParams,
    ParameterError,
    SubsystemPair,
    build_measurement_map,
    build_plant,
    build_uncontrolled_subsystems,
)
from .solvers import (
    CareProblem,
    CareSolution,
    IllConditioned,
    NoStabilizingSolution,
    NotDetectable,
    NotHurwitz,
    NotStabilizable,
    SolverError,
    solve_care,
    solve_lyapunov,
)
from .spectra import (
    FrequencyGrid,
    NonPositive,
    SingularResolvent,
    SpectraResult,
    compute_spectra,
    freq_response,
    freq_response_grid,
    to_db,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "NetworkParams",
    "DelayedStateSpace",
    "SubsystemPair",
    "ParameterError",
    "build_plant",
    "build_uncontrolled_subsystems",
    "build_measurement_map",
    "CareProblem",
    "CareSolution",
    "solve_care",
    "solve_lyapunov",
    "SolverError",
    "NotStabilizable",
    "NotDetectable",
    "NoStabilizingSolution",
    "IllConditioned",
    "NotHurwitz",
    "LqgWeights",
    "LqgController",
    "build_cost",
    "synthesize",
    "save_controller",
    "load_controller",
    "SynthesisError",
    "DegenerateMeasurement",
    "ClosedLoopSystem",
    "DimensionMismatch",
    "assemble",
    "modified_outputs",
    "FrequencyGrid",
    "SpectraResult",
    "freq_response",
    "freq_response_grid",
    "compute_spectra",
    "to_db",
    "write_csv",
    "SingularResolvent",
    "NonPositive",
    "StabilityReport",
    "rightmost_roots",
    "stability_report",
    "check_closed_loop",
    "DegenerateDelay",
    "NoConvergence",
]
