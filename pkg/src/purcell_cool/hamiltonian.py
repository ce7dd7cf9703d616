"""Donor spin Hamiltonian: construction, diagonalization, level labeling.

The electron (S = 1/2) couples to the host nucleus (I = 9/2 for Bi in Si)
through an isotropic hyperfine term, and both carry a Zeeman term:

    H / h = B0 (gamma_e Sz x 1 - gamma_n 1 x Iz) + A S.I

with everything in cyclic Hz. The 20 eigenstates group into F = 4 (9 levels)
and F = 5 (11 levels) manifolds, split by A(I + 1/2) at zero field. F_z
commutes with H at every field, so each total-projection m sector evolves
independently in B0; within a two-state sector the hyperfine coupling never
vanishes, so the two branches never cross and the adiabatic (F, m) label of
a level is simply its energy rank inside its own m sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LabelAmbiguity, MissingLevel, NonConvergence

GAMMA_E_SI_BI = 27.997e9  # Hz/T
GAMMA_N_SI_BI = 6.9e6  # Hz/T
HYPERFINE_SI_BI = 1.475e9  # Hz


def angular_momentum_ops(j):
    """Jx, Jy, Jz for spin j in the |j, m> basis with m descending."""
    dim = int(round(2 * j)) + 1
    m = j - np.arange(dim)
    jz = np.diag(m).astype(complex)
    jplus = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        jplus[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    return jx, jy, jz


@dataclass(frozen=True)
class SpinSystemParams:
    """Gyromagnetic ratios (Hz/T), hyperfine constant (Hz), spin quantum numbers."""

    gamma_e: float
    gamma_n: float
    hyperfine_a: float
    s: float = 0.5
    i: float = 4.5

    def __post_init__(self):
        if self.gamma_e <= 0:
            raise ValueError("gamma_e must be positive")
        if self.hyperfine_a <= 0:
            raise ValueError("hyperfine_a must be positive")
        for q in (self.s, self.i):
            if abs(2 * q - round(2 * q)) > 1e-12 or q < 0:
                raise ValueError("spin quantum numbers must be nonnegative half-integers")

    @property
    def dim(self):
        return int(round(2 * self.s + 1)) * int(round(2 * self.i + 1))

    @classmethod
    def si_bi(cls):
        return cls(GAMMA_E_SI_BI, GAMMA_N_SI_BI, HYPERFINE_SI_BI, 0.5, 4.5)


@dataclass(frozen=True)
class HermitianOperator:
    dim: int
    entries: np.ndarray  # Hz

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.shape != (self.dim, self.dim):
            raise ValueError("entries shape does not match dim")
        scale = np.linalg.norm(a)
        if scale > 0 and np.linalg.norm(a - a.conj().T) > 1e-12 * scale:
            raise ValueError("operator is not Hermitian to 1e-12 relative")


def _spin_operators(params):
    """Full-space Sx..Iz, F_z and F^2 in the product basis."""
    sx, sy, sz = angular_momentum_ops(params.s)
    ix, iy, iz = angular_momentum_ops(params.i)
    es = np.eye(sx.shape[0])
    ei = np.eye(ix.shape[0])
    ops = {
        "sx": np.kron(sx, ei),
        "sy": np.kron(sy, ei),
        "sz": np.kron(sz, ei),
        "ix": np.kron(es, ix),
        "iy": np.kron(es, iy),
        "iz": np.kron(es, iz),
    }
    ops["fz"] = ops["sz"] + ops["iz"]
    sdoti = ops["sx"] @ ops["ix"] + ops["sy"] @ ops["iy"] + ops["sz"] @ ops["iz"]
    ops["f2"] = (
        params.s * (params.s + 1) * np.eye(params.dim)
        + params.i * (params.i + 1) * np.eye(params.dim)
        + 2 * sdoti
    )
    ops["sdoti"] = sdoti
    return ops


def build_hamiltonian(params, b0):
    """H in Hz for a static field b0 (tesla) along z."""
    if b0 < 0:
        raise ValueError("b0 must be nonnegative")
    ops = _spin_operators(params)
    h = b0 * (params.gamma_e * ops["sz"] - params.gamma_n * ops["iz"])
    h = h + params.hyperfine_a * ops["sdoti"]
    return HermitianOperator(params.dim, h)


def jacobi_eigh(matrix, tol=1e-13, max_sweeps=100):
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Returns (eigenvalues ascending, eigenvector columns). Convergence is
    declared when the off-diagonal Frobenius norm falls below tol times the
    matrix norm. The dimension here is fixed and small, so robustness beats
    asymptotic speed.
    """
    a = np.array(matrix, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    threshold = tol * scale
    # rotate everything an order below the target so skipped mass can never
    # add back up to the threshold
    rot_cutoff = 0.1 * threshold / n
    for _ in range(max_sweeps):
        strict = np.array(a, copy=True)
        np.fill_diagonal(strict, 0.0)
        if np.linalg.norm(strict) < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= rot_cutoff:
                    continue
                phase = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if tau != 0.0:
                    t = 1.0 / (tau + math.copysign(math.sqrt(tau * tau + 1.0), tau))
                else:
                    t = 1.0
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                sp = s * phase
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - np.conj(sp) * col_q
                a[:, q] = sp * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sp * row_q
                a[q, :] = np.conj(sp) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vcol_p = v[:, p].copy()
                vcol_q = v[:, q].copy()
                v[:, p] = c * vcol_p - np.conj(sp) * vcol_q
                v[:, q] = sp * vcol_p + c * vcol_q
    else:
        raise NonConvergence(f"off-diagonal norm above {tol:g}*|H| after {max_sweeps} sweeps")
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigensystem(op):
    """Full spectral decomposition of a HermitianOperator, ascending energy."""
    w, v = jacobi_eigh(op.entries)
    return [(float(w[k]), v[:, k].copy()) for k in range(op.dim)]


@dataclass(frozen=True)
class LabeledLevel:
    index: int
    energy: float  # Hz, relative to the mean of all eigenvalues
    f: int
    m: int


@dataclass(frozen=True)
class Transition:
    lower: tuple  # (F, m)
    upper: tuple
    frequency: float  # Hz
    sx_element: float
    sy_element: float


def _label(eig, params, b0):
    """Shared labeling core; returns (levels, column-aligned eigenvectors)."""
    if abs(2 * params.s - 1) > 1e-12:
        raise ValueError("level labeling assumes an electron spin of 1/2")
    energies = np.array([e for e, _ in eig])
    vecs = np.column_stack([v for _, v in eig])
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    vecs = vecs[:, order]
    ops = _spin_operators(params)
    fz = ops["fz"]
    f_low = int(round(params.i - params.s))
    f_up = int(round(params.i + params.s))
    scale = max(abs(energies).max(), params.hyperfine_a)

    n = params.dim
    m_vals = np.empty(n, dtype=int)
    f_vals = np.empty(n, dtype=int)
    if b0 == 0:
        # manifolds are degenerate: rotate each cluster to diagonalize F_z,
        # then read both m and F directly from expectation values
        start = 0
        while start < n:
            stop = start + 1
            while stop < n and energies[stop] - energies[start] < 1e-9 * scale:
                stop += 1
            block = vecs[:, start:stop]
            fz_block = block.conj().T @ fz @ block
            _, u = jacobi_eigh(fz_block)
            block = block @ u
            vecs[:, start:stop] = block
            for k in range(start, stop):
                v = vecs[:, k]
                m_exp = float((v.conj() @ fz @ v).real)
                f2_exp = float((v.conj() @ ops["f2"] @ v).real)
                m_vals[k] = round(m_exp)
                f_vals[k] = round((-1 + math.sqrt(1 + 4 * f2_exp)) / 2)
            start = stop
    else:
        sectors = {}
        for k in range(n):
            v = vecs[:, k]
            m_exp = float((v.conj() @ fz @ v).real)
            m = round(m_exp)
            if abs(m_exp - m) > 1e-6:
                raise LabelAmbiguity(f"level {k}: <F_z> = {m_exp:.9f} is not integral")
            m_vals[k] = m
            sectors.setdefault(m, []).append(k)
        for m, members in sectors.items():
            if len(members) == 1:
                f_vals[members[0]] = f_up
            elif len(members) == 2:
                lo, hi = sorted(members, key=lambda k: energies[k])
                if energies[hi] - energies[lo] < 1e-12 * scale:
                    raise LabelAmbiguity(f"degenerate pair in m = {m} sector")
                f_vals[lo] = f_low
                f_vals[hi] = f_up
            else:
                raise LabelAmbiguity(f"m = {m} sector holds {len(members)} levels")

    mean = float(energies.mean())
    levels = [
        LabeledLevel(index=k, energy=float(energies[k] - mean), f=int(f_vals[k]), m=int(m_vals[k]))
        for k in range(n)
    ]
    seen = {(lv.f, lv.m) for lv in levels}
    if len(seen) != n:
        raise LabelAmbiguity("duplicate (F, m) assignment")
    return levels, vecs


def label_levels(eig, params, b0):
    """Assign adiabatic (F, m) labels to an eigensystem at field b0."""
    levels, _ = _label(eig, params, b0)
    return levels


def labeled_eigensystem(params, b0):
    """Diagonalize at b0 and label in one call; returns (levels, eigenvectors).

    The eigenvector columns align with the returned levels (ascending energy,
    rotated to definite F_z at zero field), which is the form transition_table
    expects.
    """
    eig = eigensystem(build_hamiltonian(params, b0))
    return _label(eig, params, b0)


def transition_table(levels, eigenvectors, params, floor=1e-4):
    """All |dF . dm| = 1 transitions with |S_x|, |S_y| matrix elements.

    Transitions whose sx element falls below the floor are dropped.
    """
    ops = _spin_operators(params)
    sx = ops["sx"]
    sy = ops["sy"]
    out = []
    n = len(levels)
    for a in range(n):
        for b in range(a + 1, n):
            la, lb = levels[a], levels[b]
            if abs(la.f - lb.f) != 1 or abs(la.m - lb.m) != 1:
                continue
            va = eigenvectors[:, a]
            vb = eigenvectors[:, b]
            sx_el = abs(complex(va.conj() @ sx @ vb))
            if sx_el < floor:
                continue
            sy_el = abs(complex(va.conj() @ sy @ vb))
            out.append(
                Transition(
                    lower=(la.f, la.m),
                    upper=(lb.f, lb.m),
                    frequency=float(lb.energy - la.energy),
                    sx_element=float(sx_el),
                    sy_element=float(sy_el),
                )
            )
    return out


@dataclass(frozen=True)
class ResonantField:
    lower: tuple
    upper: tuple
    b0: float  # tesla where the branch crosses the probe frequency


@dataclass(frozen=True)
class FieldSpectrum:
    rows: list  # (b0, Transition) in grid order
    resonances: list  # ResonantField


def spectrum_vs_field(params, b0_grid, omega0, floor=1e-4, mapper=map):
    """Transition frequencies on a field grid plus resonance crossings.

    Crossings of each (lower, upper) branch with omega0 are located by linear
    interpolation between adjacent grid points. Fields are independent, so a
    parallel `mapper` (e.g. ThreadPoolExecutor.map) may be supplied; results
    are merged in grid order either way.
    """
    grid = [float(b) for b in b0_grid]
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("b0 grid must be strictly increasing")

    def _one_field(b0):
        levels, vecs = labeled_eigensystem(params, b0)
        return {(t.lower, t.upper): t for t in transition_table(levels, vecs, params, floor)}

    per_field = list(mapper(_one_field, grid))

    rows = []
    for b0, table in zip(grid, per_field):
        for key in sorted(table):
            rows.append((b0, table[key]))

    resonances = []
    for i in range(len(grid) - 1):
        for key, t1 in per_field[i].items():
            t2 = per_field[i + 1].get(key)
            if t2 is None:
                continue
            d1 = t1.frequency - omega0
            d2 = t2.frequency - omega0
            if d1 == 0.0:
                resonances.append(ResonantField(key[0], key[1], grid[i]))
            elif d1 * d2 < 0.0:
                frac = d1 / (d1 - d2)
                resonances.append(
                    ResonantField(key[0], key[1], grid[i] + frac * (grid[i + 1] - grid[i]))
                )
    # trailing grid point can sit exactly on resonance
    for key, t in per_field[-1].items():
        if t.frequency == omega0:
            resonances.append(ResonantField(key[0], key[1], grid[-1]))
    resonances.sort(key=lambda r: r.b0)
    return FieldSpectrum(rows=rows, resonances=resonances)


def resonance_groups(resonances):
    """Group crossings that address the same quasi-degenerate doublet.

    The |f_low, m-1> <-> |f_up, m> and |f_low, m> <-> |f_up, m-1> branches
    share the unordered {m_lower, m_upper} pair and meet the probe at nearly
    the same field; each group is one operating point. Groups are returned
    sorted by mean crossing field.
    """
    groups = {}
    for r in resonances:
        key = frozenset((r.lower[1], r.upper[1]))
        groups.setdefault(key, []).append(r)
    out = sorted(groups.values(), key=lambda g: np.mean([r.b0 for r in g]))
    return out


def hyperfine_splitting(levels, f, m):
    """E(f, m+1) - E(f, m) within one manifold."""
    by_label = {(lv.f, lv.m): lv for lv in levels}
    lo = by_label.get((f, m))
    hi = by_label.get((f, m + 1))
    if lo is None or hi is None:
        raise MissingLevel(f"levels ({f},{m}) and ({f},{m + 1}) are not both present")
    return hi.energy - lo.energy
