"""Linear-algebra helpers shared by the snapshot, reduce and couple modules."""
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericError

SOLVE_RTOL = 1e-10


def check_residual(A, x, b, rtol=SOLVE_RTOL, what="linear solve", backward=False):
    """Largest columnwise relative residual; raises above ``rtol``.

    With ``backward=True`` the residual is measured against
    ``|A|_1 |x| + |b|`` (normwise backward error), the meaningful quantity
    for nearly singular systems.
    """
    b = np.asarray(b, dtype=float)
    r = A @ x - b
    scale = np.linalg.norm(b, axis=0)
    if backward:
        scale = scale + abs(A).sum(axis=0).max() * np.linalg.norm(x, axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    rel = float(np.max(np.linalg.norm(r, axis=0) / scale)) if r.size else 0.0
    if not np.isfinite(rel) or rel > rtol:
        raise NumericError(f"{what}: relative residual {rel:.3e} exceeds {rtol:.0e}", rel)
    return rel


def sparse_solve(A, b, rtol=SOLVE_RTOL, what="linear solve", backward=False):
    """Direct sparse solve of ``A x = b`` (``b`` may hold several columns)."""
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise NumericError(f"{what}: factorization failed ({exc})") from exc
    x = lu.solve(np.asarray(b, dtype=float))
    check_residual(A, x, b, rtol, what, backward)
    return x


def dense_spd_solve(K, b, rtol=SOLVE_RTOL, what="coarse solve"):
    """Cholesky solve; falls back to least squares for a singular but
    consistent system (redundant basis columns). Accuracy is checked as a
    normwise backward error."""
    try:
        c = la.cho_solve(la.cho_factor(K), b)
        if np.all(np.isfinite(c)):
            check_residual(K, c, b, rtol, what, backward=True)
            return c
    except (la.LinAlgError, NumericError):
        pass
    c = la.lstsq(K, b, cond=1e-13)[0]
    check_residual(K, c, b, rtol, what, backward=True)
    return c


def eig_backward_error(L, R, vals, vecs):
    """Normwise backward error of every finite eigenpair of ``L x = lambda R x``.

    ``L`` and ``R`` may be dense or sparse; infinite eigenvalues report 0.
    """
    nl = abs(L).sum(axis=0).max()
    nr = abs(R).sum(axis=0).max()
    out = np.zeros(len(vals))
    for k, lam in enumerate(vals):
        if not np.isfinite(lam):
            continue
        x = vecs[:, k]
        num = np.linalg.norm(L @ x - lam * (R @ x), 1)
        den = (nl + abs(lam) * nr) * np.linalg.norm(x, 1)
        out[k] = num / den if den > 0 else 0.0
    return out


def pivoted_prune(X, tol):
    """Indices (ascending) of a maximal well-independent column subset.

    Columns are scaled to unit norm and ordered by QR with column pivoting;
    a column is dropped once its residual after projection onto the
    retained ones falls below ``tol``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[1] == 0:
        return np.arange(0)
    norms = np.linalg.norm(X, axis=0)
    live = np.flatnonzero(norms > 0)
    if live.size == 0:
        return np.arange(0)
    Xn = X[:, live] / norms[live]
    R, perm = la.qr(Xn, mode="r", pivoting=True)
    d = np.abs(np.diag(R))
    small = np.flatnonzero(d < tol)
    r = small[0] if small.size else d.size
    return np.sort(live[perm[:r]])


def ordered_orthonormalize(X, abs_tol):
    """Gram-Schmidt in column order with re-orthogonalization.

    Returns ``(kept, Q)``: the indices of columns whose residual against the
    earlier kept columns exceeds ``abs_tol`` (scalar or one value per
    column), and an orthonormal basis whose
    first k columns span the first k kept columns.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    tol = np.broadcast_to(np.asarray(abs_tol, dtype=float), (m,))
    Q = np.empty((n, m))
    kept = []
    k = 0
    for j in range(m):
        v = X[:, j].copy()
        for _ in range(2):
            if k:
                v -= Q[:, :k] @ (Q[:, :k].T @ v)
        nrm = np.linalg.norm(v)
        if nrm <= tol[j] or nrm == 0.0:
            continue
        Q[:, k] = v / nrm
        kept.append(j)
        k += 1
    return np.asarray(kept, dtype=int), Q[:, :k]
