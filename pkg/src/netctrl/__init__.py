"""Optimal feedback-control costs, performance bounds and actuator selection
for linear dynamical networks."""

__version__ = "0.1.0"

from .sysmodel import (  # noqa: E402
    NetworkSystem,
    as_actuator_set,
    build_er_system,
    build_path_system,
    load_system,
    make_system,
    save_system,
    spectral_scale,
    validate_system,
)
from .lqr import (  # noqa: E402
    batch_cost_matrix,
    cost_functionals,
    lqg_cost,
    lqg_steady_state,
    riccati_recursion,
    simulate_closed_loop,
    solve_are,
    solve_lyapunov,
)
from .gramian import gramian_min_eig_bound, inverse_gramian  # noqa: E402
from .bounds import (  # noqa: E402
    actuator_influence,
    empirical_ratio,
    stability_transform,
    stable_ratio_bound,
    symmetric_unstable_bound,
    unstable_lower_bound,
)
from .selection import exhaustive_select, greedy_select, random_subsets  # noqa: E402
