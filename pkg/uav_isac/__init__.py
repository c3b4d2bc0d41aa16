from .errors import (IsacError, InvalidGeometryError, ScenarioFileError, InfeasibleError, GeometryInfeasibleError,
                     RankDeficientGeometryError, BudgetInfeasibleError, ScaInfeasibleError, NumericalFailureError)
from .geometry import Scenario, Aod, aod, wavevector, array_response, upa_layout
from .fisher import FisherInfo, fim, crb
from .allocators import (AllocatorConfig, PowerAllocation, IterationTrace, Ellipsoid, Gaussian, ArbitraryMoments,
                         SCHEMES, allocate)

__version__ = '0.1'
