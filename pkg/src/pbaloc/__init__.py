"""Probabilistic-bisection object localization with noisy classifier oracles.

A per-axis discrete posterior over the object center is bisected at its
median each iteration; one half of the image is covered with square blocks,
classified by a (possibly remote) noisy oracle, and the fused answer
reweights the posterior.  The package also ships the exhaustive
sliding-window baseline it is measured against, the channel-capacity lower
bound on localization error, and a Monte Carlo harness that checks the bound
empirically.
"""

__version__ = "0.1.0"

from .analysis import (
    BoundParams,
    InsufficientDataError,
    MseCurve,
    calibrate_bound,
    capacity,
    fit_decay_rate,
    mse_lower_bound,
    run_mc,
)
from .baseline import WindowGridSpec, sliding_window_localize, speedup, window_grid
from .belief import (
    EPS_MIN,
    Belief,
    BeliefSummary,
    bisection_point,
    median_bin,
    summarize,
    uniform,
    update,
)
from .engine import (
    Block,
    EngineConfig,
    FusedResponse,
    LocalizationResult,
    QueryRegion,
    TraceRow,
    fuse_responses,
    make_query,
    partition_blocks,
    run,
    step,
)
from .geometry import Rect
from .oracles import (
    BlockTruthOracle,
    BscOracle,
    ExternalOracle,
    OracleResponse,
    OracleStats,
    OracleUnavailableError,
    ProtocolError,
)
from .scene import (
    Scene,
    extract_block,
    generate_star_scene,
    load_scene,
    read_pgm,
    resize_to_square,
    save_scene,
    write_pgm,
)

__all__ = [
    "__version__",
    "EPS_MIN",
    "Belief",
    "BeliefSummary",
    "uniform",
    "bisection_point",
    "median_bin",
    "update",
    "summarize",
    "Rect",
    "QueryRegion",
    "Block",
    "FusedResponse",
    "EngineConfig",
    "TraceRow",
    "LocalizationResult",
    "make_query",
    "partition_blocks",
    "fuse_responses",
    "step",
    "run",
    "OracleResponse",
    "OracleStats",
    "BscOracle",
    "BlockTruthOracle",
    "ExternalOracle",
    "OracleUnavailableError",
    "ProtocolError",
    "Scene",
    "generate_star_scene",
    "extract_block",
    "resize_to_square",
    "write_pgm",
    "read_pgm",
    "save_scene",
    "load_scene",
    "WindowGridSpec",
    "window_grid",
    "sliding_window_localize",
    "speedup",
    "capacity",
    "BoundParams",
    "mse_lower_bound",
    "MseCurve",
    "run_mc",
    "calibrate_bound",
    "fit_decay_rate",
    "InsufficientDataError",
]
