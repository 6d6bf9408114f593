"""Sub-Riemannian harmonic map flow on the Heisenberg nilmanifold.

Simulates the pseudo-harmonic map heat flow from the compact quotient of
the Heisenberg group into Riemannian targets, with the diagnostics needed
to check energy monotonicity, the Reeb-energy bound, semigroup mass
conservation, ball-volume scaling, Picard contraction, and convergence to
pseudo-harmonic maps at desk scale.

Modules: crgeom (model geometry), fields (grids, fields, snapshots), ops
(discrete operators), targets (embedded and chart targets), flow (tension
and integrators), diagnostics (energies, verdicts, probes), plots, cli.
"""

__version__ = "0.1.0"

from .crgeom import DECK, MODELS, NIL3, canonical_rep, frame_at, invariant_wave
from .fields import Grid, MapField, ScalarField, read_snapshot, write_snapshot
from .ops import (
    apply_T,
    apply_X,
    apply_Y,
    horizontal_gradient,
    integrate,
    linear_heat_step,
    sub_laplacian,
)
from .targets import make_target
from .flow import (
    FlowState,
    StopCriteria,
    duhamel_picard,
    run_flow,
    step_explicit,
    step_imex,
    tension,
)
from .diagnostics import (
    cc_ball_volume,
    cc_distance,
    energies,
    geodesic_homotopy_suite,
    heat_kernel_probe,
    map_distance,
    monotonicity_report,
    reeb_bound_report,
    winding_numbers,
)
