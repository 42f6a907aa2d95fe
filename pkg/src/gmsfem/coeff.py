"""
Piecewise-constant coefficients on the fine grid.

A coefficient is ``kappa(x; mu) = sum_q theta_q(mu_q) * kappa_q(x)`` with one
value per fine cell for every term. Cell arrays are flat, in the fine-cell
ordering of :mod:`gmsfem.grid` (row index = y, x fastest).
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, ParameterError


def identity_theta(mu):
    return mu


@dataclass(frozen=True)
class CoefficientField:
    """Affine parameter-dependent coefficient.

    Parameters
    ----------
    terms : ndarray, shape (Q, n_cells)
        Strictly positive cell values of each term.
    theta : tuple of callables, optional
        Parameter law per term; identity when omitted.
    """

    terms: np.ndarray
    theta: tuple = None

    def __post_init__(self):
        terms = np.atleast_2d(np.asarray(self.terms, dtype=float))
        if not np.all(terms > 0):
            raise ParameterError("coefficient terms must be strictly positive")
        object.__setattr__(self, "terms", terms)
        if self.theta is None:
            object.__setattr__(self, "theta", (identity_theta,) * terms.shape[0])
        elif len(self.theta) != terms.shape[0]:
            raise ParameterError(
                f"{len(self.theta)} parameter laws for {terms.shape[0]} terms")

    @property
    def Q(self):
        return self.terms.shape[0]

    @property
    def n_cells(self):
        return self.terms.shape[1]

    @property
    def n_fine(self):
        return int(round(np.sqrt(self.n_cells)))

    @classmethod
    def single(cls, values):
        return cls(np.asarray(values, dtype=float)[None, :])


def _check_mu(field, mu):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (field.Q,):
        raise ParameterError(f"expected {field.Q} parameters, got {mu.size}")
    if not np.all(mu >= 0) or not np.any(mu > 0):
        raise ParameterError(
            f"parameters must be non-negative and not all zero, got {mu.tolist()}")
    return mu


def evaluate(field, mu):
    """Cellwise ``sum_q theta_q(mu_q) kappa_q``."""
    mu = _check_mu(field, mu)
    out = np.zeros(field.n_cells)
    for q in range(field.Q):
        out += field.theta[q](mu[q]) * field.terms[q]
    if not np.all(out > 0):
        raise ParameterError(f"coefficient is not positive at mu={mu.tolist()}")
    return out


def parameter_average(field, mus):
    """Arithmetic mean of the coefficient over the sample parameters."""
    mus = list(mus)
    if not mus:
        raise ParameterError("parameter averaging needs at least one sample")
    return sum(evaluate(field, mu) for mu in mus) / len(mus)


@dataclass(frozen=True)
class MassWeight:
    variant: str
    values: np.ndarray


IDENTITY = "identity"
POU_WEIGHTED = "pou"


def mass_weight(kappa, variant=IDENTITY, pou=None):
    """Weight of the mass matrices.

    ``identity`` copies ``kappa``; ``pou`` multiplies it by the cellwise sum
    of ``H^2 |grad chi_i|^2`` taken from ``pou`` (a
    :class:`~gmsfem.grid.PartitionOfUnity`).
    """
    kappa = np.asarray(kappa, dtype=float)
    if variant == IDENTITY:
        return MassWeight(IDENTITY, kappa.copy())
    if variant == POU_WEIGHTED:
        if pou is None:
            raise ContractError("the pou-weighted mass needs a partition of unity")
        return MassWeight(POU_WEIGHTED, kappa * pou.weight_sum())
    raise ConfigurationError(f"unknown mass weight variant {variant!r}")


def ring_cells(omega, omega_plus):
    """Global cells of ``omega_plus`` not in ``omega``."""
    if not omega_plus.contains(omega):
        raise ContractError(
            f"region {omega.extents} is not nested in {omega_plus.extents}")
    return np.setdiff1d(omega_plus.cells, omega.cells, assume_unique=True)


def chop(kappa, omega, omega_plus, factor):
    """Divide the coefficient by ``factor`` on the ring ``omega_plus \\ omega``."""
    if not factor > 0:
        raise ParameterError(f"chop factor must be positive, got {factor}")
    out = np.array(kappa, dtype=float, copy=True)
    out[ring_cells(omega, omega_plus)] /= factor
    return out


FIELD_KINDS = ("constant", "channels", "inclusions")


def _strip_layout(rng, n, n_strips, width):
    # strips sit in disjoint slots so they never merge
    slot = n // n_strips
    if slot < width + 1:
        raise ConfigurationError(
            f"{n_strips} strips of width {width} do not fit {n} cells")
    offsets = rng.integers(0, slot - width + 1, size=n_strips)
    return [k * slot + int(o) for k, o in enumerate(offsets)]


def generate_field(kind, n_fine, params=None, seed=0):
    """Synthetic high-contrast cell field on the ``n_fine`` x ``n_fine`` grid.

    Background value is 1 and features carry ``params['contrast']``.

    ``constant``
        all ones.
    ``channels``
        ``n_strips`` straight strips of ``width`` cells spanning the domain;
        ``orientation`` is ``horizontal``, ``vertical`` or ``mixed``
        (alternating). Explicit ``positions`` (first cell of each strip)
        override the seeded layout.
    ``inclusions``
        ``n_inclusions`` axis-aligned rectangles with sides drawn from
        ``[min_size, max_size]`` cells at seeded positions.
    """
    params = dict(params or {})
    n = int(n_fine)
    rng = np.random.default_rng(seed)
    contrast = float(params.pop("contrast", 1e4))
    if not contrast > 0:
        raise ConfigurationError(f"contrast must be positive, got {contrast}")
    field = np.ones((n, n))

    if kind == "constant":
        pass
    elif kind == "channels":
        n_strips = int(params.pop("n_strips", 3))
        width = int(params.pop("width", max(1, n // 40)))
        orientation = params.pop("orientation", "horizontal")
        positions = params.pop("positions", None)
        if orientation not in ("horizontal", "vertical", "mixed"):
            raise ConfigurationError(f"unknown channel orientation {orientation!r}")
        if positions is None:
            positions = _strip_layout(rng, n, n_strips, width)
        elif len(positions) != n_strips:
            raise ConfigurationError("one position per strip is required")
        for k, p in enumerate(positions):
            vertical = orientation == "vertical" or (orientation == "mixed" and k % 2)
            if vertical:
                field[:, p:p + width] = contrast
            else:
                field[p:p + width, :] = contrast
    elif kind == "inclusions":
        count = int(params.pop("n_inclusions", 10))
        lo = int(params.pop("min_size", 1))
        hi = int(params.pop("max_size", max(lo, n // 10)))
        for _ in range(count):
            sx, sy = rng.integers(lo, hi + 1, size=2)
            x, y = rng.integers(0, n - sx + 1), rng.integers(0, n - sy + 1)
            field[y:y + sy, x:x + sx] = contrast
    else:
        raise ConfigurationError(f"unknown field kind {kind!r}; choose from {FIELD_KINDS}")
    if params:
        raise ConfigurationError(f"unused field parameters: {sorted(params)}")
    return field.ravel()


def save_matrix(path, values, n_rows, n_cols, label="cells"):
    values = np.asarray(values, dtype=float).reshape(n_rows, n_cols)
    with open(path, "w") as fh:
        fh.write(f"#{label} {n_rows} {n_cols}\n")
        np.savetxt(fh, values, fmt="%.17g")


def load_matrix(path):
    """Read a file written by :func:`save_matrix`; returns ``(label, flat values)``."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or not header[0].startswith("#"):
            raise ConfigurationError(f"{path}: missing '#<label> rows cols' header")
        label, rows, cols = header[0][1:], int(header[1]), int(header[2])
        values = np.loadtxt(fh, ndmin=2)
    if values.shape != (rows, cols):
        raise ConfigurationError(
            f"{path}: header says {rows}x{cols}, found {values.shape[0]}x{values.shape[1]}")
    return label, values.ravel()


def save_field(path, values, n_fine):
    save_matrix(path, values, n_fine, n_fine, "cells")


def load_field(path):
    label, values = load_matrix(path)
    if label != "cells":
        raise ConfigurationError(f"{path}: expected a cell field, found '{label}'")
    return values
