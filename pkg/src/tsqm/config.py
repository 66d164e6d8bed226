"""Numeric tolerances and backend selection.

Every invariant check in the package reads its threshold from ``TOL``.
The Monte Carlo kernel runs under numba unless ``TSQM_NO_NUMBA`` is set
to a truthy value (or numba cannot be imported), in which case the
vectorized numpy path is used.
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    unit_norm: float = 1e-12       # normalize() output
    zero_norm: float = 1e-12       # ZeroVector threshold
    operator: float = 1e-10        # hermiticity, idempotence, unitarity, density conditions
    normalized_input: float = 1e-9  # NotNormalized threshold on Born inputs
    probability: float = 1e-9      # imaginary residue, table sums, range checks
    certainty: float = 1e-9        # counterfactual True/False verdicts
    empty_ensemble: float = 1e-12  # ABL normalization / Lueders zero-probability
    orthogonal_product: float = 1e-10  # element-of-reality exclusivity


TOL = Tolerances()


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        # probing TBB first warns on hosts with an outdated TBB
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag("TSQM_NO_NUMBA")


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
