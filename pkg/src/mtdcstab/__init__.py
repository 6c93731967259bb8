"""Impedance-based stability and sensitivity analysis of multi-terminal
DC converter networks from black-box frequency-sweep data."""

__version__ = "0.1.0"

from . import errors  # noqa: F401
from .freqdata import (  # noqa: F401
    FrequencyGrid,
    MatrixResponse,
    ScalarResponse,
    common_grid,
    load_matrix_response,
    load_scalar_response,
    log_grid,
    resample,
)
from .network import (  # noqa: F401
    CableModel,
    PortMap,
    StationModel,
    SystemManifest,
    assemble_network_admittance,
    assemble_station_admittance,
    invert_network,
    load_manifest,
    station_block,
)
from .gnsc import (  # noqa: F401
    EigenLocusSet,
    ReturnRatio,
    StabilityVerdict,
    assess_stability,
    count_rhp_poles,
    det_response,
    eigenloci,
    return_difference,
    return_ratio,
    winding_number,
)
from .sensitivity import (  # noqa: F401
    EigenDecomposition,
    ImpedanceSensitivity,
    control_level_sensitivity,
    eigendecompose,
    entry_sensitivity,
    impedance_sensitivity,
    normalized_sensitivity,
    participation_matrix,
    participation_response,
    return_ratio_derivative,
)
from .options import AnalysisOptions  # noqa: F401
from .workflow import (  # noqa: F401
    AnalysisReport,
    CriticalLocus,
    find_critical_loci,
    rank_ports,
    rank_stations,
    run_full_analysis,
)
