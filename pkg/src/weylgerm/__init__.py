"""Weyl-Moyal algebra, metaplectic wave packets and Maslov phases."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .symplectic import (  # noqa: E402,F401
    MetaplecticPath, RealLagrangian, SiegelMatrix, SymplecticBlock, branch_track,
    is_symplectic, maslov_index, moebius_act, quadratic_flow, riccati_rhs, symplectify,
)
from .moyal import (  # noqa: E402,F401
    ExpLinear, PolySymbol, commutator, format_symbol, parse_symbol, poisson, star,
    weyl_order_polynomial,
)
from .dynamics import (  # noqa: E402,F401
    HamiltonianSpec, StepControl, Trajectory, builtin_hamiltonian, integrate_flow,
    riccati_integrate,
)
from .germ import (  # noqa: E402,F401
    GaussianPacket, LagrangianCurve, canonical_superpose, exact_quadratic_propagate,
    packet_to_grid, propagate_packet, reconstruct_wkb,
)
from .oracle import Grid1D, WavefunctionGrid, evolve_schrodinger, fourier_h, l2_error  # noqa: E402,F401
from .qft import (  # noqa: E402,F401
    Diagram, ModePolynomial, enumerate_diagrams, evaluate_diagram, green_function,
    mode_star, tree_series_vs_classical, vacuum_average,
)
