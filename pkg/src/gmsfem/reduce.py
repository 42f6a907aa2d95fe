"""
Offline and online spectral reduction of local spaces.

Every local space (snapshot, offline or online) exposes ``region``,
``region_plus``, ``basis`` (nodes of omega x columns) and ``basis_plus``
(nodes of omega+ x columns). A reduction solves a generalized symmetric
eigenproblem between two of the four congruence-transformed matrices

    A  = R^T A(omega) R          S  = R^T S(omega) R
    A+ = R+^T A(omega+) R+       S+ = R+^T S(omega+) R+

and keeps a prefix of the eigenvectors sorted by ascending eigenvalue.

Pencils are solved in coordinates orthonormal for ``S+``. When the
right-hand matrix lives on omega only (``S`` or ``A``) it is first
restricted to the directions visible on omega; invisible directions are
appended with eigenvalue +inf. Directions where both matrices vanish (the
constants for the ``A+ / A`` pencil) get eigenvalue 0, and directions
where only the right-hand matrix vanishes get +inf, the finite eigenvectors
being corrected by the Schur complement so that ``L x = lambda R x`` holds
exactly.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .assemble import stiffness, weighted_mass
from .errors import ContractError, NumericError, RangeError
from .linalg import eig_backward_error, pivoted_prune

OFFLINE_PENCILS = {
    "OFF1": ("A", "S"),
    "OFF2": ("A_plus", "A"),
    "OFF3": ("A", "S_plus"),
    "OFF4": ("A_plus", "S_plus"),
    "OFF5": ("A_plus", "S"),
}
ONLINE_PENCILS = {
    "ON1": ("A", "S"),
    "ON2": ("A_plus", "A"),
    "ON3": ("A", "S_plus"),
}
MULTI = "MULTI"

RANGE_TOL = 1e-12      # relative cut for the range of a semidefinite matrix
INDEFINITE_TOL = 1e-8  # relative negative eigenvalue tolerated in a right-hand matrix
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Count:
    m: int


@dataclass(frozen=True)
class Threshold:
    tol: float


@dataclass(frozen=True)
class LocalMatrices:
    A: np.ndarray
    S: np.ndarray
    A_plus: np.ndarray
    S_plus: np.ndarray
    frame: np.ndarray = None
    frame_nodes: np.ndarray = None
    omega_A: np.ndarray = None
    omega_S: np.ndarray = None
    omega_map: np.ndarray = None
    omega_null: np.ndarray = None

    def __getitem__(self, name):
        return getattr(self, name)


def _sym(M):
    return 0.5 * (M + M.T)


def _congruence(R, M):
    return _sym(R.T @ (M @ R))


def reduced_matrices(parent, kappa, weight=None):
    """Stiffness and mass on omega and omega+ in the coordinates of ``parent``."""
    weight = kappa if weight is None else weight
    return LocalMatrices(
        A=_congruence(parent.basis, stiffness(parent.region, kappa)),
        S=_congruence(parent.basis, weighted_mass(parent.region, weight)),
        A_plus=_congruence(parent.basis_plus, stiffness(parent.region_plus, kappa)),
        S_plus=_congruence(parent.basis_plus, weighted_mass(parent.region_plus, weight)),
    )


FRAME_TOL = 1e-12
# relative singular value below which a frame direction counts as invisible on omega;
# matches the coupling prune tolerance
VISIBLE_TOL = 1e-8


def local_frame(parent):
    """Orthonormal nodal frame of ``parent.basis_plus``.

    Returns ``(U, F)`` with ``basis_plus @ F = U`` up to rounding, where
    ``U`` has orthonormal columns. Singular values below ``FRAME_TOL``
    (relative, after scaling columns to unit length) are dropped.
    """
    B = np.asarray(parent.basis_plus, dtype=float)
    norms = np.linalg.norm(B, axis=0)
    norms[norms == 0] = 1.0
    U, sig, Vt = la.svd(B / norms, full_matrices=False)
    keep = sig > FRAME_TOL * sig[0] if sig.size else np.zeros(0, dtype=bool)
    return U[:, keep], (Vt[keep].T / sig[keep]) / norms[:, None]


def frame_matrices(parent, kappa, weight=None):
    """The four local matrices in the orthonormal frame of ``parent``.

    Same pencils as :func:`reduced_matrices`, but well conditioned even for
    nearly dependent parent columns; ``frame`` maps back to parent
    coordinates.
    """
    weight = kappa if weight is None else weight
    U, F = local_frame(parent)
    Uw = U[parent.rows]
    A_om = stiffness(parent.region, kappa)
    S_om = weighted_mass(parent.region, weight)
    # orthonormal nodal frame of the omega restriction: P diag(sig) Q^T = Uw
    P, sig, Qt = la.svd(Uw, full_matrices=False)
    vis = sig > VISIBLE_TOL * sig[0] if sig.size else np.zeros(0, dtype=bool)
    Qt_full = la.null_space(Qt[vis]).T if vis.sum() < U.shape[1] else np.zeros((0, U.shape[1]))
    return LocalMatrices(
        A=_congruence(Uw, A_om),
        S=_congruence(Uw, S_om),
        A_plus=_congruence(U, stiffness(parent.region_plus, kappa)),
        S_plus=_congruence(U, weighted_mass(parent.region_plus, weight)),
        frame=F,
        frame_nodes=U,
        omega_A=_congruence(P[:, vis], A_om),
        omega_S=_congruence(P[:, vis], S_om),
        omega_map=Qt[vis].T / sig[vis],
        omega_null=Qt_full.T,
    )


def _range_split(M, tol=RANGE_TOL):
    d, V = la.eigh(_sym(M))
    scale = max(np.abs(d).max(initial=0.0), 0.0)
    if scale > 0 and d.min() < -INDEFINITE_TOL * scale:
        raise NumericError(
            f"right-hand matrix is indefinite (min eigenvalue {d.min():.3e}, "
            f"max {scale:.3e})", d.min() / scale)
    keep = d > tol * scale if scale > 0 else np.zeros(d.size, dtype=bool)
    return d, V, keep


def _pencil_parts(L, R, tol):
    # returns (common null, finite eigenvalues, finite vectors, R-null only)
    L = _sym(np.asarray(L, dtype=float))
    n = L.shape[0]
    d, V, keep = _range_split(R, tol)
    Wr = V[:, keep] / np.sqrt(d[keep])
    Vn = V[:, ~keep]
    lscale = np.abs(la.eigvalsh(L)).max(initial=0.0)

    if Vn.shape[1]:
        e, En = la.eigh(_sym(Vn.T @ L @ Vn))
        common = e <= tol * lscale if lscale > 0 else np.ones(e.size, dtype=bool)
        Zc, Zi = Vn @ En[:, common], Vn @ En[:, ~common]
    else:
        Zc = Zi = np.zeros((n, 0))

    Lrr = _sym(Wr.T @ L @ Wr)
    if Zi.shape[1]:
        Lri = Wr.T @ L @ Zi
        G = la.solve(_sym(Zi.T @ L @ Zi), Lri.T, assume_a="pos")
        w, Y = la.eigh(_sym(Lrr - Lri @ G))
        X = Wr @ Y - Zi @ (G @ Y)
    else:
        w, Y = la.eigh(Lrr)
        X = Wr @ Y
    return Zc, w, X, Zi


def _sorted(vals, vecs):
    order = np.argsort(vals, kind="stable")
    vecs = vecs[:, order]
    # deterministic signs
    if vecs.size:
        idx = np.argmax(np.abs(vecs), axis=0)
        signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
        signs[signs == 0] = 1.0
        vecs = vecs * signs
    return vals[order], vecs


def solve_pencil(L, R, tol=RANGE_TOL):
    """All eigenpairs of the semidefinite pencil ``L x = lambda R x``.

    Returns ascending eigenvalues (0 for common null directions, +inf where
    only ``R`` vanishes) and the matching columns. Columns outside the null
    space of ``R`` are ``R``-orthonormal.
    """
    n = np.shape(L)[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    Zc, w, X, Zi = _pencil_parts(L, R, tol)
    vals = np.concatenate([np.zeros(Zc.shape[1]), w, np.full(Zi.shape[1], np.inf)])
    return _sorted(np.maximum(vals, 0.0), np.hstack([Zc, X, Zi]))


def solve_reciprocal_pencil(L, R, tol=RANGE_TOL):
    """Same output as :func:`solve_pencil` for ``L`` dominating ``R``.

    Solves ``R x = nu L x`` instead, which is well conditioned when ``R``
    has a wide spread of tiny eigenvalues; ``lambda = 1 / nu`` and
    ``nu <= tol`` maps to +inf.
    """
    n = np.shape(L)[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    Zc, nu, X, Zi = _pencil_parts(R, L, tol)
    numax = np.abs(nu).max(initial=0.0)
    fin = nu > tol * numax
    lam = np.full(nu.size, np.inf)
    lam[fin] = 1.0 / nu[fin]
    X = X.copy()
    X[:, fin] /= np.sqrt(nu[fin])
    vals = np.concatenate([np.zeros(Zc.shape[1] + Zi.shape[1]), lam])
    return _sorted(np.maximum(vals, 0.0), np.hstack([Zc, Zi, X]))


def _whitener(S_plus):
    # diagonal scaling first: parent columns may differ in size by many decades
    d = np.sqrt(np.diag(S_plus))
    d[d == 0] = 1.0
    s, U = la.eigh(_sym(S_plus / np.outer(d, d)))
    keep = s > 1e-14 * s.max()
    return (U[:, keep] / np.sqrt(s[keep])) / d[:, None]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigenpairs of one variant in parent coordinates.

    ``realized`` holds the eigenvectors as omega+ nodal columns when they
    were computed in an orthonormal frame (no cancellation from nearly
    dependent parent columns).
    """

    parent: object
    variant: str
    eigenvalues: np.ndarray
    coords: np.ndarray
    realized: np.ndarray = None


def spectrum(parent, variant, matrices):
    """Solve the pencil of ``variant`` for the local space ``parent``."""
    pencils = {**OFFLINE_PENCILS, **ONLINE_PENCILS}
    if variant not in pencils:
        raise ContractError(f"unknown variant {variant!r}")
    if variant in ONLINE_PENCILS and not isinstance(parent, ReducedSpace):
        raise ContractError(f"online variant {variant} needs an offline parent")
    lname, rname = pencils[variant]
    L, R = matrices[lname], matrices[rname]
    T = _whitener(matrices.S_plus)
    Lw, Rw = _sym(T.T @ L @ T), _sym(T.T @ R @ T)

    if rname == "S_plus":
        vals, Y = solve_pencil(Lw, np.eye(T.shape[1]))
    elif lname == "A_plus":
        # A+ is definite up to the constants, so invert the pencil
        vals, Y = solve_reciprocal_pencil(Lw, Rw)
    elif matrices.omega_map is not None:
        # both sides live on omega: solve in an orthonormal nodal frame of omega,
        # frame directions invisible on omega get +inf
        w, Z = la.eigh(matrices.omega_A, matrices.omega_S)
        v_vals, v_vecs = _sorted(np.maximum(w, 0.0), Z)
        vals = np.concatenate([v_vals, np.full(matrices.omega_null.shape[1], np.inf)])
        Y = np.hstack([matrices.omega_map @ v_vecs, matrices.omega_null])
        return _finish(parent, variant, matrices, L, R, vals, Y)
    else:
        # both sides live on omega: keep directions visible there
        s, U, vis = _range_split(_sym(T.T @ matrices.S @ T))
        Uv, Ui = U[:, vis], U[:, ~vis]
        v_vals, v_vecs = solve_pencil(Uv.T @ Lw @ Uv, Uv.T @ Rw @ Uv)
        vals = np.concatenate([v_vals, np.full(Ui.shape[1], np.inf)])
        Y = np.hstack([Uv @ v_vecs, Ui])

    return _finish(parent, variant, matrices, L, R, vals, T @ Y)


def _finish(parent, variant, matrices, L, R, vals, Y):
    err = eig_backward_error(L, R, vals, Y)
    if err.max(initial=0.0) > RESIDUAL_TOL:
        raise NumericError(f"{variant}: eigen backward error {err.max():.2e}", err.max())
    if matrices.frame is None:
        return Spectrum(parent, variant, vals, Y)
    return Spectrum(parent, variant, vals, matrices.frame @ Y, matrices.frame_nodes @ Y)


@dataclass(frozen=True, eq=False)
class ReducedSpace:
    parent: object
    coords: np.ndarray
    eigenvalues: np.ndarray
    lambda_next: float
    variant: str
    lambda_next_plus: float = None
    components: tuple = field(default=())
    realized: np.ndarray = None

    @property
    def region(self):
        return self.parent.region

    @property
    def region_plus(self):
        return self.parent.region_plus

    @property
    def rows(self):
        return self.parent.rows

    @property
    def dim(self):
        return self.coords.shape[1]

    @cached_property
    def basis_plus(self):
        if self.realized is not None:
            return self.realized
        return self.parent.basis_plus @ self.coords

    @cached_property
    def basis(self):
        return self.basis_plus[self.rows]


def selection_size(eigenvalues, selection):
    n = eigenvalues.size
    if isinstance(selection, Count):
        if not 0 <= selection.m <= n:
            raise RangeError(f"Count({selection.m}) outside [0, {n}]")
        return selection.m
    if isinstance(selection, Threshold):
        return int(np.count_nonzero(eigenvalues < selection.tol))
    raise ContractError(f"unknown selection {selection!r}")


def select(spec, selection):
    """Keep the smallest eigenpairs of ``spec`` according to ``selection``."""
    m = selection_size(spec.eigenvalues, selection)
    nxt = float(spec.eigenvalues[m]) if m < spec.eigenvalues.size else np.inf
    realized = None if spec.realized is None else spec.realized[:, :m]
    return ReducedSpace(spec.parent, spec.coords[:, :m], spec.eigenvalues, nxt, spec.variant,
                        realized=realized)


def offline_space(snapshots, variant, selection, kappa=None, weight=None, matrices=None):
    """Offline space of one neighborhood.

    ``kappa`` (and ``weight``, default ``kappa``) are the parameter-averaged
    cell coefficients; pass ``matrices`` instead to reuse a congruence.
    """
    if variant not in OFFLINE_PENCILS:
        raise ContractError(f"{variant!r} is not an offline variant")
    if matrices is None:
        matrices = frame_matrices(snapshots, kappa, weight)
    return select(spectrum(snapshots, variant, matrices), selection)


def multi_offline_space(snapshots, selections, kappa=None, weight=None,
                        variants=("OFF1", "OFF4"), prune_tol=1e-8, matrices=None):
    """Union of several offline spaces with dependent columns removed.

    ``lambda_next`` and ``lambda_next_plus`` record the first excluded
    eigenvalue of the first and second variant.
    """
    if len(variants) < 2 or len(selections) != len(variants):
        raise ContractError("need at least two variants, each with a selection")
    if matrices is None:
        matrices = frame_matrices(snapshots, kappa, weight)
    parts = tuple(offline_space(snapshots, v, s, matrices=matrices)
                  for v, s in zip(variants, selections))
    return union_space(parts, prune_tol)


def union_space(parts, prune_tol=1e-8):
    parent = parts[0].parent
    C = np.hstack([p.coords for p in parts])
    B = np.hstack([p.basis_plus for p in parts])
    kept = pivoted_prune(B, prune_tol)
    return ReducedSpace(parent, C[:, kept], parts[0].eigenvalues, parts[0].lambda_next,
                        MULTI, parts[1].lambda_next, parts, B[:, kept])


def online_space(offline, variant, selection, kappa, weight=None, matrices=None):
    """Online subspace of ``offline`` for the coefficient ``kappa`` at one parameter."""
    if variant not in ONLINE_PENCILS:
        raise ContractError(f"{variant!r} is not an online variant")
    if not isinstance(offline, ReducedSpace):
        raise ContractError("online spaces are carved from an offline space")
    if matrices is None:
        matrices = frame_matrices(offline, kappa, weight)
    return select(spectrum(offline, variant, matrices), selection)


def lambda_star(spaces, plus=False):
    """Minimum over neighborhoods of the first excluded eigenvalue."""
    vals = [s if np.isscalar(s) else (s.lambda_next_plus if plus else s.lambda_next)
            for s in spaces]
    vals = [np.inf if v is None else v for v in vals]
    return float(min(vals, default=np.inf))


def worst_case_quotient(S, A_plus, coords):
    """``max_u min_{v in V} |u - v|_S^2 / |u|_{A+}^2`` over the parent space.

    ``V`` is the span of ``coords``; the inner minimum is the S-orthogonal
    projection. Infinite when some ``A+``-null direction is not captured.
    """
    S, A_plus = _sym(S), _sym(A_plus)
    n = S.shape[0]
    P = np.zeros((n, n))
    if coords.shape[1]:
        G = coords.T @ S @ coords
        P = coords @ la.solve(_sym(G), coords.T @ S, assume_a="pos")
    I_P = np.eye(n) - P
    E = _sym(I_P.T @ S @ I_P)
    d, V, keep = _range_split(A_plus)
    escale = np.abs(la.eigvalsh(E)).max(initial=0.0)
    Vn = V[:, ~keep]
    if Vn.shape[1] and np.abs(la.eigvalsh(_sym(Vn.T @ E @ Vn))).max() > RANGE_TOL * max(escale, 1e-300):
        return np.inf
    W = V[:, keep] / np.sqrt(d[keep])
    return float(la.eigvalsh(_sym(W.T @ E @ W)).max(initial=0.0))
