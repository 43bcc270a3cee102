"""Pure numpy implementation of the load-coupling hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the compiled core is benchmarked and tested against.  Both
modules expose the same functions with the same signatures.

Array conventions (shared with the compiled core):

``A``
    n x m float64 matrix of received powers per RU, ``A[i, j] = p_i * g_ij``.
``kappa``
    n x m uint8 association matrix.
``dscaled``
    length-m demand divided by ``M * B`` (RU count times RU bandwidth).
``noise``
    thermal noise power in watts.
"""
import numpy as np

STATUS_CONVERGED = 0
STATUS_DIVERGED = 1
STATUS_ITERATION_CAP = 2
STATUS_EXCEEDED = 3

BACKEND = "python"


def _split(A, kappa):
    serve = kappa.astype(bool)
    signal = np.where(serve, A, 0.0).sum(axis=0)
    interf = np.where(serve, 0.0, A)
    return serve, signal, interf


def _apply(serve, signal, interf, dscaled, noise, x):
    gamma = signal / (interf.T @ x + noise)
    y = dscaled / np.log2(1.0 + gamma)
    return serve.astype(np.float64) @ y


def sinr(A, kappa, noise, x):
    _, signal, interf = _split(A, kappa)
    return signal / (interf.T @ x + noise)


def load_map(A, kappa, dscaled, noise, x):
    serve, signal, interf = _split(A, kappa)
    return _apply(serve, signal, interf, dscaled, noise, np.asarray(x, dtype=np.float64))


def fixed_point(A, kappa, dscaled, noise, x0, tol, max_iter, ceiling, stop_above):
    """Iterate ``x <- load_map(x)`` from ``x0``.

    Returns ``(x, iterations, status, residual)``.  When ``stop_above`` is
    positive and the first update is componentwise non-decreasing, the
    trajectory is monotone, so crossing ``stop_above`` proves the fixed
    point lies above it and the iteration stops with ``STATUS_EXCEEDED``.
    """
    serve, signal, interf = _split(A, kappa)
    servef = serve.astype(np.float64)
    x = np.array(x0, dtype=np.float64)
    increasing = False
    residual = np.inf
    for it in range(1, max_iter + 1):
        gamma = signal / (interf.T @ x + noise)
        x_new = servef @ (dscaled / np.log2(1.0 + gamma))
        if it == 1:
            increasing = bool(np.all(x_new >= x))
        residual = float(np.max(np.abs(x_new - x))) if x.size else 0.0
        x = x_new
        top = float(x.max()) if x.size else 0.0
        if not np.isfinite(top) or top > ceiling:
            return x, it, STATUS_DIVERGED, residual
        if residual <= tol:
            return x, it, STATUS_CONVERGED, residual
        if stop_above > 0.0 and increasing and top > stop_above:
            return x, it, STATUS_EXCEEDED, residual
    return x, max_iter, STATUS_ITERATION_CAP, residual


def link_probe(A, kappa, dscaled, noise, x, c, u, tau):
    """Sufficient-condition probe for adding the link from cell ``c`` to UE ``u``.

    Runs ``x_k = f(h_plus(x_{k-1}))`` from ``x_0 = x`` where ``h_plus`` uses
    the enlarged association and ``f`` the current one.  Returns
    ``(k, x_k)`` for the first ``k <= tau`` with
    ``f_plus_c(h_plus(x_k)) <= x_k[c]``, or ``(0, x_tau)`` when none passes.
    """
    kplus = kappa.copy()
    kplus[c, u] = 1
    serve, _, _ = _split(A, kappa)
    servef = serve.astype(np.float64)
    _, signal_p, interf_p = _split(A, kplus)
    row_plus = kplus[c].astype(np.float64)
    xk = np.array(x, dtype=np.float64)
    for k in range(1, tau + 1):
        y = dscaled / np.log2(1.0 + signal_p / (interf_p.T @ xk + noise))
        xk = servef @ y
        y = dscaled / np.log2(1.0 + signal_p / (interf_p.T @ xk + noise))
        if row_plus @ y <= xk[c]:
            return k, xk
    return 0, xk
