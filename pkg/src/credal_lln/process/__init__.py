"""Forward-irrelevant processes: specs, adversarial strategies, sampling and exact oracles."""
from .events import (
    MartingaleWindow,
    MaxBand,
    MeanBand,
    ProductSets,
    SumLowerDev,
    SumUpperDev,
    WindowBand,
)
from .exact import (
    ExactTree,
    check_disintegrability,
    enumerate_tree,
    exact_event_probability,
    lower_upper_event_probability_dp,
    nodewise_brute_force,
)
from .sampling import SimulationResult, TrajectoryBatch, sample, simulate
from .spec import CredalStep, MomentStep, ProcessSpec, StepChoice, binary_credal_spec
from .strategies import (
    ExtremeConst,
    Greedy,
    IidMix,
    NodewiseTable,
    PointMass,
    RandomNodewise,
    SignSwitch,
    Strategy,
    builtin_strategies,
    strategy_from_name,
)
from .verify import VerificationRecord, records_to_csv, records_to_json, verify_bound

__all__ = [name for name in dir() if not name.startswith("_")]
