"""Online mirror descent over arbitrary (constraint ball, data ball) pairs.

The package is organized around:

* `geometry`     -- balls, gauge (Minkowski) norms, dual norms, support oracles
* `regularizers` -- the distance-generating-function catalog with certified
                    uniform-convexity scalings
* `prox`         -- Bregman projections and the dual-space update step
* `md_engine`    -- the online mirror descent loop with regret accounting
* `costs`        -- cost-function classes and adversaries
* `game_value`   -- sign-tree payoffs, game-value lower bounds, M-type ratios
* `harness`      -- experiment runner, CSV output, config parsing, CLI backend
"""

from .geometry import (
    INF,
    Ball,
    LpBall,
    SimplexBall,
    GroupBall,
    SchattenBall,
    VertexHullBall,
    Interp1Ball,
    Interp2Ball,
    GeometryPair,
    gauge_norm,
    dual_norm,
    holder_conjugate,
    contains,
    schatten_singular_values,
)
from .regularizers import (
    Regularizer,
    PsiR,
    Entropy,
    GroupSquared,
    VertexHullSquared,
    EuclideanHalfSq,
    psi_eval,
    psi_grad,
    psi_conj_grad,
    sup_over_ball,
    d_p_upper,
    scaled_psi_for_lp_pair,
    lp_regret_bound,
    pick_r,
    scaled_for_pair,
)
from .prox import ProjectionResult, bregman_project, bregman_project_dual, dual_step
from .md_engine import MDState, RegretTrace, init, step_size, md_step, run
from .costs import (
    Linear,
    AbsLoss,
    Hinge,
    subgradient,
    Fixed,
    SignGreedy,
    RandomVertex,
    TreeReplay,
    next_cost,
    class_value_ordering_check,
)
from .game_value import (
    SignTree,
    tree_payoff,
    value_lower_bound,
    mtype_ratio,
    estimate_cp,
    sandwich_report,
)
from . import harness

__version__ = "0.1.0"
