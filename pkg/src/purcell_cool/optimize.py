"""Small dense nonlinear least-squares machinery.

Levenberg-Marquardt with central-difference Jacobians is the workhorse; a
Nelder-Mead simplex is kept as a derivative-free fallback for the rare fit
that starts far from the basin. Problems here have at most four parameters,
so O(n^3) linear algebra per iteration is irrelevant.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence

_FD_STEP = 1e-6  # relative central-difference step for Jacobians


def numeric_jacobian(residual, x):
    """Central-difference Jacobian of a residual vector, step 1e-6 per scale."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(residual(x), dtype=float)
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        step = _FD_STEP * max(abs(x[i]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        jac[:, i] = (np.asarray(residual(xp)) - np.asarray(residual(xm))) / (2 * step)
    return jac, r0


def levenberg_marquardt(residual, x0, *, max_iter=200, step_tol=1e-10):
    """Minimize sum(residual(x)**2).

    Returns (x, jac, r) at the optimum. Convergence is declared when the
    relative parameter step drops below step_tol; exhausting max_iter raises
    NoConvergence.
    """
    x = np.asarray(x0, dtype=float).copy()
    lam = 1e-3
    jac, r = numeric_jacobian(residual, x)
    cost = float(r @ r)
    for _ in range(max_iter):
        jtj = jac.T @ jac
        g = jac.T @ r
        # damped normal equations; scale damping by the diagonal so the
        # trust region is parameter-relative
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0
        try:
            delta = np.linalg.solve(jtj + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            delta = -g / (diag * (1 + lam))
        x_new = x + delta
        r_new = np.asarray(residual(x_new), dtype=float)
        cost_new = float(r_new @ r_new)
        if np.isfinite(cost_new) and cost_new <= cost:
            rel = float(np.max(np.abs(delta) / np.maximum(np.abs(x_new), 1.0)))
            x, cost = x_new, cost_new
            jac, r = numeric_jacobian(residual, x)
            lam = max(lam / 10.0, 1e-12)
            if rel < step_tol:
                return x, jac, r
        else:
            lam *= 10.0
            if lam > 1e12:
                # stuck; a vanishing trust region is convergence in disguise
                return x, jac, r
    raise NoConvergence(f"no parameter step below {step_tol} in {max_iter} iterations")


def nelder_mead(fun, x0, *, max_eval=2000, ftol=1e-14, xtol=1e-12):
    """Simplex minimizer used when LM cannot make progress."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        xi = x0.copy()
        xi[i] += 0.05 * max(abs(xi[i]), 1.0)
        simplex.append(xi)
    fvals = [fun(p) for p in simplex]
    neval = n + 1
    while neval < max_eval:
        order = np.argsort(fvals)
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        spread_f = abs(fvals[-1] - fvals[0])
        spread_x = max(np.max(np.abs(p - simplex[0])) for p in simplex[1:])
        if spread_f <= ftol * (1 + abs(fvals[0])) and spread_x <= xtol * (
            1 + np.max(np.abs(simplex[0]))
        ):
            return simplex[0], fvals[0]
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = fun(xr)
        neval += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = fun(xe)
            neval += 1
            simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            xc = centroid + 0.5 * (simplex[-1] - centroid)
            fc = fun(xc)
            neval += 1
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = fun(simplex[i])
                neval += n
    raise NoConvergence(f"simplex did not settle within {max_eval} evaluations")
