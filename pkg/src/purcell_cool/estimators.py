"""Fit models: recovery exponentials, Gaussian decay, noise spectra, SNR.

All fitters share one Levenberg-Marquardt driver with numeric Jacobians and
report parameter standard errors from the Jacobian at the optimum. They are
deliberately independent of the simulator so that measured data files can be
fed straight in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scipy.constants import h as PLANCK

from .errors import InsufficientSpan, NoConvergence
from .optimize import levenberg_marquardt, nelder_mead, numeric_jacobian
from .thermal import BathCoupling, bose_occupation, cooling_factor


@dataclass(frozen=True)
class FitResult:
    parameters: dict
    std_errors: dict
    residual_norm: float
    converged: bool


def _finish(names, x, jac, r):
    rss = float(r @ r)
    n, p = r.size, x.size
    if n > p:
        try:
            cov = rss / (n - p) * np.linalg.pinv(jac.T @ jac)
            std = np.sqrt(np.maximum(np.diag(cov), 0.0))
        except np.linalg.LinAlgError:
            std = np.full(p, math.nan)
    else:
        std = np.zeros(p)
    return FitResult(
        parameters=dict(zip(names, (float(v) for v in x))),
        std_errors=dict(zip(names, (float(s) for s in std))),
        residual_norm=math.sqrt(rss),
        converged=True,
    )


def _least_squares(residual, x0, names, *, max_iter=200, fallback=True):
    try:
        x, jac, r = levenberg_marquardt(residual, x0, max_iter=max_iter)
    except NoConvergence:
        if not fallback:
            raise
        x, _ = nelder_mead(lambda p: float(np.sum(np.asarray(residual(p)) ** 2)), x0)
        jac, r = numeric_jacobian(residual, x)
    return _finish(names, x, jac, r)


def fit_exponential_recovery(data, *, max_iter=200, fallback=True):
    """Fit A (1 - 2 exp(-gamma1 dt)) + c to inversion-recovery areas."""
    pts = sorted((float(a), float(b)) for a, b in data)
    if len(pts) < 4:
        raise ValueError("need at least 4 recovery points")
    dt = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if (dt < 0).any():
        raise ValueError("delays must be nonnegative")

    a0 = (y.max() - y.min()) / 2 or 1.0
    c0 = y[-1] - a0
    # log-linear slope of the residual from the late-time plateau
    z = np.abs(y[-1] - y)[:-1]
    keep = z > 1e-12 * max(1.0, np.abs(y).max())
    if keep.sum() >= 2:
        slope = np.polyfit(dt[:-1][keep], np.log(z[keep]), 1)[0]
        g0 = max(-slope, 1e-3 / max(dt.max(), 1e-12))
    else:
        g0 = 1.0 / max(np.median(dt), 1e-12)

    def residual(p):
        a, g, c = p
        return a * (1 - 2 * np.exp(-g * dt)) + c - y

    res = _least_squares(residual, [a0, g0, c0], ["amplitude", "gamma1", "offset"],
                         max_iter=max_iter, fallback=fallback)
    if res.parameters["amplitude"] < 0:  # sign gauge: keep amplitude positive
        res = FitResult(
            parameters={
                "amplitude": -res.parameters["amplitude"],
                "gamma1": res.parameters["gamma1"],
                "offset": res.parameters["offset"],
            },
            std_errors=res.std_errors,
            residual_norm=res.residual_norm,
            converged=res.converged,
        )
    return res


def fit_gaussian_decay(data, *, max_iter=200, fallback=True):
    """Fit A exp(-(x / t2)^2) where x is the total evolution time 2 tau."""
    pts = sorted((float(a), float(b)) for a, b in data)
    if len(pts) < 4:
        raise ValueError("need at least 4 decay points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    a0 = y[0] if y[0] != 0 else float(np.abs(y).max()) or 1.0
    # 1/e crossing as the T2 seed
    below = np.nonzero(y < a0 / math.e)[0]
    t0 = x[below[0]] if below.size else x[-1]
    t0 = t0 if t0 > 0 else float(x[x > 0].min() if (x > 0).any() else 1.0)

    def residual(p):
        a, t2 = p
        return a * np.exp(-((x / t2) ** 2)) - y

    return _least_squares(residual, [a0, t0], ["amplitude", "t2"],
                          max_iter=max_iter, fallback=fallback)


@dataclass(frozen=True)
class PsdModelParams:
    gain: object  # scalar, or [(hz, gain)] table interpolated linearly
    n_twpa: float
    t_int: float  # K
    alpha: float
    resonator: object  # ResonatorParams
    t_phon: float  # K

    def gain_at(self, omega):
        if np.isscalar(self.gain) or self.gain is None:
            return 1.0 if self.gain is None else float(self.gain)
        table = np.asarray(self.gain, dtype=float)
        return np.interp(omega, table[:, 0], table[:, 1])


def _beta(omega, res):
    det = 2 * math.pi * (np.asarray(omega, dtype=float) - res.omega0)
    return 4 * res.kappa_int * res.kappa_ext / (res.kappa**2 + 4 * det**2)


def psd_model(omega, params, config):
    """Output noise spectral density around the resonator, photon units.

    hot:  S / (G h f) = (1 - beta) n(T_phon) + beta n(T_int) + 1/2 + n_twpa
    cold: the off-resonant term picks up the transmission loss alpha.
    """
    if config not in ("hot", "cold"):
        raise ValueError("config must be 'hot' or 'cold'")
    omega = np.asarray(omega, dtype=float)
    res = params.resonator
    beta = _beta(omega, res)
    n_phon = np.vectorize(lambda f: bose_occupation(params.t_phon, f))(omega)
    n_int = np.vectorize(lambda f: bose_occupation(params.t_int, f))(omega)
    off = n_phon if config == "hot" else params.alpha * n_phon
    bracket = (1 - beta) * off + beta * n_int + 0.5 + params.n_twpa
    return params.gain_at(omega) * PLANCK * omega * bracket


def fit_psd(data, fixed, config, *, max_iter=200, fallback=True):
    """Staged PSD fit.

    hot: fits t_int (n_twpa taken from `fixed` when present, otherwise fit
    jointly); cold: fits (alpha, t_int) with n_twpa fixed. `fixed` must carry
    resonator, t_phon and optionally gain. Data must bracket the resonance.
    """
    pts = sorted((float(a), float(b)) for a, b in data)
    if len(pts) < 8:
        raise ValueError("need at least 8 spectral points")
    omega = np.array([p[0] for p in pts])
    s = np.array([p[1] for p in pts])
    res = fixed["resonator"]
    if omega.min() >= res.omega0 or omega.max() <= res.omega0:
        raise InsufficientSpan("data do not bracket the resonator frequency")
    gain = fixed.get("gain")
    t_phon = fixed["t_phon"]
    scale = float(np.median(np.abs(s))) or 1.0

    def model(n_twpa, t_int, alpha):
        p = PsdModelParams(gain=gain, n_twpa=n_twpa, t_int=t_int, alpha=alpha,
                           resonator=res, t_phon=t_phon)
        return psd_model(omega, p, config)

    if config == "hot":
        if "n_twpa" in fixed:
            names = ["t_int"]

            def residual(p):
                return (model(fixed["n_twpa"], p[0], 1.0) - s) / scale

            x0 = [0.9]
        else:
            names = ["n_twpa", "t_int"]

            def residual(p):
                return (model(p[0], p[1], 1.0) - s) / scale

            x0 = [0.75, 0.9]
    elif config == "cold":
        names = ["alpha", "t_int"]
        n_twpa = fixed["n_twpa"]

        def residual(p):
            return (model(n_twpa, p[1], p[0]) - s) / scale

        x0 = [0.5, 0.8]
    else:
        raise ValueError("config must be 'hot' or 'cold'")
    return _least_squares(residual, x0, names, max_iter=max_iter, fallback=fallback)


def snr_model(t_rep, gamma1, p, sigma):
    """Sensitivity p (1 - exp(-gamma1 t)) / (sigma sqrt(t)) per repetition."""
    t = np.asarray(t_rep, dtype=float)
    if (t <= 0).any():
        raise ValueError("repetition time must be positive")
    out = p * (1 - np.exp(-gamma1 * t)) / (sigma * np.sqrt(t))
    return float(out) if np.isscalar(t_rep) else out


_XSTAR_BRACKET = (1.0, 2.0)


def snr_argmax_x():
    """Root of e^x = 1 + 2x by bisection, to 1e-12."""
    lo, hi = _XSTAR_BRACKET

    def f(x):
        return math.exp(x) - 1.0 - 2.0 * x

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-12:
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def optimal_trep(gamma1):
    """Repetition time maximizing snr_model, x*/gamma1 with e^x* = 1 + 2x*."""
    if gamma1 <= 0:
        raise ValueError("gamma1 must be positive")
    return snr_argmax_x() / gamma1


def eta_vs_phonon(gamma_phon_grid, res, scen_hot, scen_cold, gamma_phot_rate, omega):
    """Cooling factor against the phonon rate; returns rows of
    (gamma_phon, eta, gamma1_hot, gamma1_cold)."""
    rows = []
    for rate in gamma_phon_grid:
        bath = BathCoupling(rate=float(rate), temperature=scen_hot.t_phon)
        cool = cooling_factor(res, scen_hot, scen_cold, bath, gamma_phot_rate, omega)
        rows.append((float(rate), cool.eta, cool.gamma1_hot, cool.gamma1_cold))
    return rows
