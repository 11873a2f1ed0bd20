from kelly_stop.version import VERSION as __version__  # noqa

from kelly_stop.core import (  # noqa: F401
    DerivedParams,
    Grid,
    MarketParams,
    StrategySurface,
    derive_params,
    from_scaled,
    to_scaled,
)
from kelly_stop.utils import KellyStopError  # noqa: F401
from kelly_stop.analytic import (  # noqa: F401
    BrowneTarget,
    CRRA,
    Drawdown,
    FreeKelly,
    StrategyState,
    TerminalStop,
)
from kelly_stop.solver import StopLossProblem, solve_stop_loss  # noqa: F401
from kelly_stop.value_fn import reconstruct_value  # noqa: F401
from kelly_stop.simulate import (  # noqa: F401
    MultiAssetParams,
    SimConfig,
    compare_strategies,
)
