"""Weighted norms, relative errors and the error versus Lambda* diagnostic."""
from dataclasses import dataclass

import numpy as np

from .assemble import stiffness, weighted_mass
from .errors import DegenerateInputError

# relative to sqrt(||A||) ||u||; energies carry rounding of order eps, norms its square root
ZERO_TOL = 1e-6


@dataclass(frozen=True)
class ErrorPair:
    l2_pct: float
    h1_pct: float
    reference: str = "fine"


def _energy(M, u):
    # tiny negative values from rounding are clipped
    return float(np.sqrt(max(u @ (M @ u), 0.0)))


def weighted_norms(grid, kappa, u):
    """``(||u||_{L2_kappa}, |u|_{H1_kappa})`` with exact Q1 integration."""
    domain = grid.domain()
    u = np.asarray(u, dtype=float)
    return _energy(weighted_mass(domain, kappa), u), _energy(stiffness(domain, kappa), u)


class NormEvaluator:
    """Caches the two weighted matrices for repeated error evaluations."""

    def __init__(self, grid, kappa):
        domain = grid.domain()
        self.M = weighted_mass(domain, kappa)
        self.A = stiffness(domain, kappa)
        self._mscale = np.sqrt(abs(self.M).sum(axis=0).max())
        self._ascale = np.sqrt(abs(self.A).sum(axis=0).max())

    def norms(self, u):
        return _energy(self.M, u), _energy(self.A, u)

    def relative_error(self, u_ref, u_approx, reference="fine"):
        u_ref = np.asarray(u_ref, dtype=float)
        l2_ref, h1_ref = self.norms(u_ref)
        # a norm at rounding level (the energy of a constant) counts as zero
        size = np.linalg.norm(u_ref)
        if l2_ref <= ZERO_TOL * self._mscale * size or h1_ref <= ZERO_TOL * self._ascale * size:
            raise DegenerateInputError("reference field has zero weighted norm")
        l2, h1 = self.norms(u_ref - np.asarray(u_approx, dtype=float))
        return ErrorPair(100.0 * l2 / l2_ref, 100.0 * h1 / h1_ref, reference)


def relative_error(grid, kappa, u_ref, u_approx, reference="fine"):
    """Percent errors ``100 |u_ref - u_approx| / |u_ref|`` in both weighted norms."""
    return NormEvaluator(grid, kappa).relative_error(u_ref, u_approx, reference)


def error_lambda_correlation(lambda_stars, errors):
    """Pearson correlation of the errors with ``(1 / Lambda*)^(1/2)``."""
    lam = np.asarray(lambda_stars, dtype=float)
    err = np.asarray(errors, dtype=float)
    if lam.size != err.size:
        raise DegenerateInputError("need one error per Lambda* value")
    if lam.size < 3:
        raise DegenerateInputError(f"correlation needs at least 3 runs, got {lam.size}")
    if not np.all(np.isfinite(lam)) or not np.all(lam > 0):
        raise DegenerateInputError("every Lambda* must be finite and positive")
    x = lam ** -0.5
    if np.ptp(x) == 0 or np.ptp(err) == 0:
        raise DegenerateInputError("correlation undefined for a constant series")
    return float(np.corrcoef(x, err)[0, 1])


def decay_series(eigenvalues):
    """Rows ``(k, lambda_k, 1/lambda_k)`` with k starting at 1; 1/0 gives inf."""
    lam = np.asarray(eigenvalues, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), np.inf)
    return [(k + 1, float(l), float(i)) for k, (l, i) in enumerate(zip(lam, inv))]
