"""Extrinsic geometric flows on codimension-one foliations.

Subpackages by concern:

- :mod:`egf.symfun` -- power sums, elementary symmetric functions, the
  conformal recursion functions F_k / Psi_k, Newton transformations,
  ellipticity quantities.
- :mod:`egf.companion` -- the generalized companion matrix B_{n,1},
  weighted matrices of the short-time-existence hypothesis, and the
  n-truncation of power-sum PDE systems.
- :mod:`egf.parabolic` -- 1-D parabolic solvers on a circle / interval /
  line, closed-form references (heat kernel, theta function, exact
  quasi-linear family), decay-rate fitting.
- :mod:`egf.flows` -- the flow scenarios: umbilical surface flows,
  diagonal tau-heat flow, twisted products, f(tau)-conformal flows,
  prescribed mean curvature, volume bookkeeping.
- :mod:`egf.reeb` -- the Reeb-foliation-on-the-torus case study.
- :mod:`egf.chartgeom` -- extraction of b, A, tau_i from a sampled
  metric in biregular foliated coordinates.
- :mod:`egf.scenarios` / :mod:`egf.cli` -- declarative scenario runner
  with CSV artifacts, sweeps, and the bundled acceptance suite.
"""

from . import chartgeom, companion, flows, parabolic, reeb, symfun
from .errors import (
    ConductivityRangeError,
    DefectiveSpectrumError,
    EgfError,
    EllipticityLossError,
    NonConvergenceError,
    SolverError,
    UnstableConfigurationError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "symfun",
    "companion",
    "parabolic",
    "flows",
    "reeb",
    "chartgeom",
    "EgfError",
    "ValidationError",
    "SolverError",
    "UnstableConfigurationError",
    "ConductivityRangeError",
    "NonConvergenceError",
    "EllipticityLossError",
    "DefectiveSpectrumError",
    "__version__",
]
