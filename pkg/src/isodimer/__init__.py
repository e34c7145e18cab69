"""Z-invariant Ising/dimer/spanning-forest operators on finite isoradial graphs."""

from . import derived, elliptic, errors, identities, inference, isoradial, operators  # noqa: F401
from .elliptic import complete_integrals, jacobi  # noqa: F401
from .identities import ResidualReport, Workspace, run_battery  # noqa: F401
from .isoradial import (  # noqa: F401
    IsoradialGraph,
    PlanarGraph,
    admissible_u,
    build_square_lattice,
    builder_graph,
    load_graph,
    make_isoradial,
    train_tracks,
)

__version__ = "0.1.0"
