"""Open-system dynamics under time-local generators and the trace-distance
measure of non-Markovianity."""

from .states import (
    DensityMatrix,
    StatePair,
    trace_distance,
    random_pure_state,
    random_mixed_state,
    bloch_from_qubit,
    qubit_from_bloch,
)
from .linalg import hermitian_eigenvalues, hermitian_eigensystem
from .dynamics import (
    GeneratorSpec,
    Propagator,
    ChoiMatrix,
    apply_generator,
    evolve_state,
    propagator_between,
    propagator_grid,
    choi_of,
    is_cp,
    divisibility_report,
)
from .models import (
    JCParams,
    SpinBathParams,
    jc_amplitude,
    jc_rate,
    jc_decay_exponent,
    jc_generator,
    spinbath_f,
    spinbath_trace_distance,
    spinbath_rate,
    spinbath_generator,
    semigroup_generator,
)
from .measure import (
    TrajectoryGrid,
    GrowthInterval,
    MeasureResult,
    MeasureSettings,
    SweepRecord,
    trajectory,
    trajectory_from_values,
    growth_intervals,
    n_from_trajectory,
    n_for_pair,
    n_measure,
    search_pairs,
    sweep,
)

__version__ = "0.1.0"
