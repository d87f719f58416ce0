"""Energy, tail-risk and scaling analysis of linear network dynamics ``x(k+1) = A x(k) + w(k)``."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .matrix_core import (  # noqa: E402
    GramianSolution,
    NetworkMatrix,
    PerronResult,
    SpectrumEstimate,
    kronecker_gramian,
    perron_vector,
    psd_order_holds,
    read_matrix_csv,
    resolvent_column_sums,
    robust_spectral_radius,
    solve_gramian,
    spectral_radius,
    top_singular_value,
    write_matrix_csv,
)
from .topologies import TopologySpec, generate, network_sequence  # noqa: E402
from .energy import EnergyReport, energy_report, impulse_energy, symmetric_max_norm  # noqa: E402
from .balancing import (  # noqa: E402
    BalanceConfig,
    balance,
    balancing_bound_report,
    balancing_sweep,
    build_symmetrizer,
    verify_psd_lemma,
)
from .tailrisk import (  # noqa: E402
    ShockDistribution,
    TailRiskReport,
    aggregate_output_sample,
    assess_sequence,
    centrality_report,
    gramian_l1_criterion,
    macro_diagnostic,
    macro_tail_ratio,
    tail_risk_rate,
    tail_risk_report,
)
from .controllers import (  # noqa: E402
    PlatoonGains,
    assemble_K,
    eval_half_line_controller,
    optimize_asymmetric,
    optimize_symmetric,
    platoon_energy,
    symmetric_h2_closed_form,
)
from .scaling import ScalingFit, ScalingStudy, compare, fit_scaling, fit_values, run_study  # noqa: E402
from .economic import (  # noqa: E402
    IOTable,
    assess_network,
    deficit_recursion,
    load_io_csv,
    normalize_returns,
    surrogate_table,
)
