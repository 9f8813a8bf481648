"""Time-local master-equation integration and divisibility analysis.

The generator is d rho/dt = -i[H(t), rho] + sum_i gamma_i(t) (A_i rho A_i^dag
- {A_i^dag A_i, rho}/2) with rates that may go negative. Two-parameter
propagators Phi(t2, t1) are built by composing fixed-step RK4 flows; their
complete positivity is decided through the Choi matrix.

Superoperators act on column-stacked density matrices: vec(rho) stacks the
columns, so vec(A rho B) = (B^T kron A) vec(rho).
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .exceptions import InvariantViolation
from .linalg import hermitian_eigenvalues, hermiticity_defect
from .states import DensityMatrix, check_complex_matrix

TRACE_DRIFT_TOL = 1e-8
EVOLVE_POSITIVITY_TOL = 1e-8
PROPAGATOR_TOL = 1e-8
DEFAULT_CP_TOL = 1e-7


@dataclass
class GeneratorSpec:
    """Time-local generator data: H(t) plus (jump operator, rate) channels.

    hamiltonian and jump operators are either constant d x d matrices or
    callables t -> matrix; rates are constants or callables t -> real. Rates
    may be negative. Constant fields let the integrators precompute the
    superoperator structure once per run.
    """

    dim: int
    hamiltonian: object
    channels: List[Tuple[object, object]]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")


def constant_generator(hamiltonian, channels):
    """GeneratorSpec from constant matrices and rates."""
    h = check_complex_matrix(hamiltonian)
    dim = h.shape[0]
    fixed = []
    for op, rate in channels:
        op = check_complex_matrix(op)
        if op.shape[0] != dim:
            raise ValueError("channel operator dimension mismatch")
        fixed.append((op, float(rate)))
    return GeneratorSpec(dim=dim, hamiltonian=h, channels=fixed)


def _check_operator(m, dim, what, t=None):
    m = check_complex_matrix(m)
    if m.shape[0] != dim:
        at = "" if t is None else f" at t={t}"
        raise ValueError(f"{what}{at} has dimension {m.shape[0]}, expected {dim}")
    return m


def _eval_hamiltonian(gen, t):
    h = gen.hamiltonian(t) if callable(gen.hamiltonian) else gen.hamiltonian
    h = _check_operator(h, gen.dim, "hamiltonian", t)
    defect = hermiticity_defect(h)
    if defect > 1e-10:
        raise ValueError(f"hamiltonian(t={t}) not Hermitian: defect {defect:.3e}")
    return h


def _eval_channels(gen, t):
    out = []
    for op_fn, rate_fn in gen.channels:
        op = op_fn(t) if callable(op_fn) else op_fn
        op = _check_operator(op, gen.dim, "jump operator", t)
        rate = float(rate_fn(t)) if callable(rate_fn) else float(rate_fn)
        if not math.isfinite(rate):
            raise ValueError(f"non-finite rate {rate} at t={t}")
        out.append((op, rate))
    return out


def _eval_rates(rate_fn, times):
    """Rates at every time in the array, using a vectorized call when the
    callable supports it."""
    if not callable(rate_fn):
        out = np.full(times.size, float(rate_fn))
    else:
        try:
            out = np.asarray(rate_fn(times), dtype=float)
            if out.shape != times.shape:
                raise TypeError
        except Exception:
            out = np.array([float(rate_fn(t)) for t in times])
    if not np.all(np.isfinite(out)):
        bad = times[~np.isfinite(out)][0]
        raise ValueError(f"non-finite rate at t={bad}")
    return out


class _CompiledGenerator:
    """Superoperator evaluator that hoists time-independent structure.

    When the Hamiltonian and all jump operators are constant matrices, only
    the scalar rates vary with time, so K(t) = K_H + sum_i gamma_i(t) K_i
    with every K piece precomputed.
    """

    def __init__(self, gen):
        self.gen = gen
        d = gen.dim
        self.static = not callable(gen.hamiltonian) and all(
            not callable(op) for op, _ in gen.channels
        )
        if not self.static:
            return
        eye = np.eye(d, dtype=complex)
        h = _check_operator(gen.hamiltonian, d, "hamiltonian")
        if hermiticity_defect(h) > 1e-10:
            raise ValueError("hamiltonian not Hermitian")
        self.k_const = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
        self.k_channels = []
        self.rate_fns = []
        for op, rate_fn in gen.channels:
            op = _check_operator(op, d, "jump operator")
            anti = op.conj().T @ op
            self.k_channels.append(
                np.kron(op.conj(), op)
                - 0.5 * (np.kron(eye, anti) + np.kron(anti.T, eye))
            )
            self.rate_fns.append(rate_fn)

    def matrices(self, times):
        """Stacked K(t) for an array of times, shape (len(times), d^2, d^2)."""
        times = np.asarray(times, dtype=float)
        if not self.static:
            return np.stack([generator_matrix(self.gen, t) for t in times])
        ks = np.broadcast_to(self.k_const, (times.size,) + self.k_const.shape).copy()
        for k_i, rate_fn in zip(self.k_channels, self.rate_fns):
            ks += _eval_rates(rate_fn, times)[:, None, None] * k_i
        return ks


def apply_generator(gen, t, rho):
    """Right-hand side -i[H, rho] + sum_i gamma_i (A rho A^dag - {A^dag A, rho}/2)."""
    rho = check_complex_matrix(rho)
    if rho.shape[0] != gen.dim:
        raise ValueError(f"state dimension {rho.shape[0]} != generator dim {gen.dim}")
    h = _eval_hamiltonian(gen, t)
    out = -1j * (h @ rho - rho @ h)
    for op, rate in _eval_channels(gen, t):
        opd = op.conj().T
        anti = opd @ op
        out += rate * (op @ rho @ opd - 0.5 * (anti @ rho + rho @ anti))
    return out


def generator_matrix(gen, t):
    """The d^2 x d^2 superoperator of apply_generator at time t."""
    d = gen.dim
    eye = np.eye(d, dtype=complex)
    h = _eval_hamiltonian(gen, t)
    k = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in _eval_channels(gen, t):
        anti = op.conj().T @ op
        k += rate * (
            np.kron(op.conj(), op)
            - 0.5 * (np.kron(eye, anti) + np.kron(anti.T, eye))
        )
    return k


def _check_uniform_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid needs at least two points")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValueError("time grid must be strictly increasing")
    h = steps[0]
    if np.max(np.abs(steps - h)) > 1e-12 * max(1.0, abs(t[-1])):
        raise ValueError("time grid must be uniform")
    return t, float(h)


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_linear_step(ka, km, kb, y, h):
    """One classical RK4 step of dy/dt = K(t) y with K sampled at the left
    point, midpoint and right point of the step."""
    k1 = ka @ y
    k2 = km @ (y + 0.5 * h * k1)
    k3 = km @ (y + 0.5 * h * k2)
    k4 = kb @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _stage_matrices(gen, t_grid):
    """K(t) at every grid point and midpoint: index 2k is t_k, 2k+1 the
    midpoint of step k."""
    t, h = _check_uniform_grid(t_grid)
    stage_times = t[0] + 0.5 * h * np.arange(2 * (t.size - 1) + 1)
    return _CompiledGenerator(gen).matrices(stage_times), h


def evolve_state(gen, rho0, t_grid, positivity_tol=EVOLVE_POSITIVITY_TOL):
    """RK4 solution of the master equation sampled on a uniform grid from 0.

    The state is re-symmetrized after every step; trace drift beyond 1e-8 or
    an eigenvalue below -positivity_tol raises InvariantViolation naming the
    first offending grid time.
    """
    t, h = _check_uniform_grid(t_grid)
    if abs(t[0]) > 1e-15:
        raise ValueError(f"time grid must start at 0, got {t[0]}")
    rho0 = rho0.matrix if isinstance(rho0, DensityMatrix) else check_complex_matrix(rho0)
    if rho0.shape[0] != gen.dim:
        raise ValueError(f"state dimension {rho0.shape[0]} != generator dim {gen.dim}")

    ks, h = _stage_matrices(gen, t)
    d = gen.dim
    states = [rho0.copy()]
    v = rho0.reshape(-1, order="F")
    for k in range(t.size - 1):
        v = _rk4_linear_step(ks[2 * k], ks[2 * k + 1], ks[2 * k + 2], v, h)
        rho = v.reshape(d, d, order="F")
        rho = 0.5 * (rho + rho.conj().T)
        v = rho.reshape(-1, order="F")
        states.append(rho)

    out = []
    for tk, m in zip(t, states):
        drift = abs(np.trace(m).real - 1.0)
        if drift > TRACE_DRIFT_TOL:
            raise InvariantViolation(
                f"trace drift {drift:.3e} beyond {TRACE_DRIFT_TOL:.1e} at t={tk}"
            )
        least = hermitian_eigenvalues(m, tol=1e-10)[0]
        if least < -positivity_tol:
            raise InvariantViolation(
                f"state eigenvalue {least:.3e} below -{positivity_tol:.1e} at t={tk} "
                "(step too coarse, or the generator is not CP)"
            )
        # Trace is monitored, never silently renormalized.
        out.append(
            DensityMatrix(m, positivity_tol=positivity_tol, trace_tol=TRACE_DRIFT_TOL)
        )
    return out


@dataclass
class Propagator:
    """Linear map on states for [t_start, t_end], as a d^2 x d^2 superoperator."""

    dim: int
    t_start: float
    t_end: float
    superoperator: np.ndarray

    def __post_init__(self):
        s = check_complex_matrix(self.superoperator)
        d = self.dim
        if s.shape[0] != d * d:
            raise ValueError(f"superoperator shape {s.shape} != ({d * d}, {d * d})")
        # Trace preservation: the adjoint must fix vec(identity).
        w = np.eye(d, dtype=complex).reshape(-1, order="F")
        tp_defect = np.max(np.abs(s.conj().T @ w - w))
        if tp_defect > PROPAGATOR_TOL:
            raise InvariantViolation(
                f"propagator not trace preserving: defect {tp_defect:.3e}"
            )
        # Hermiticity preservation, entrywise: S[(i,j),(k,l)] = conj(S[(j,i),(l,k)]).
        s4 = s.reshape(d, d, d, d, order="F")
        hp_defect = np.max(np.abs(s4 - s4.transpose(1, 0, 3, 2).conj()))
        if hp_defect > PROPAGATOR_TOL:
            raise InvariantViolation(
                f"propagator not Hermiticity preserving: defect {hp_defect:.3e}"
            )
        self.superoperator = s

    def apply(self, rho):
        """Apply the map to a matrix (not necessarily a valid state)."""
        m = rho.matrix if isinstance(rho, DensityMatrix) else check_complex_matrix(rho)
        v = self.superoperator @ m.reshape(-1, order="F")
        return v.reshape(self.dim, self.dim, order="F")

    def apply_state(self, rho, positivity_tol=EVOLVE_POSITIVITY_TOL):
        out = self.apply(rho)
        out = 0.5 * (out + out.conj().T)
        return DensityMatrix(
            out, positivity_tol=positivity_tol, trace_tol=TRACE_DRIFT_TOL
        )


def propagator_between(gen, t1, t2, h):
    """Phi(t2, t1) by RK4 on dS/dt = K(t) S from the identity.

    The degenerate interval t1 == t2 returns the identity map.
    """
    if t2 < t1:
        raise ValueError(f"need t1 <= t2, got {t1} > {t2}")
    d = gen.dim
    s = np.eye(d * d, dtype=complex)
    if t2 > t1:
        if h <= 0:
            raise ValueError(f"step must be positive, got {h}")
        n = max(1, int(math.ceil((t2 - t1) / h - 1e-12)))
        hh = (t2 - t1) / n
        ks, _ = _stage_matrices(gen, t1 + hh * np.arange(n + 1))
        for k in range(n):
            s = _rk4_linear_step(ks[2 * k], ks[2 * k + 1], ks[2 * k + 2], s, hh)
    return Propagator(dim=d, t_start=float(t1), t_end=float(t2), superoperator=s)


def propagator_grid(gen, t_grid):
    """Phi(t_k, 0) for every grid point, one RK4 step per grid interval.

    Returns an array of shape (len(t_grid), d^2, d^2). The grid step is the
    integration step, as in evolve_state.
    """
    t, _ = _check_uniform_grid(t_grid)
    d = gen.dim
    ks, h = _stage_matrices(gen, t)
    phis = np.empty((t.size, d * d, d * d), dtype=complex)
    s = np.eye(d * d, dtype=complex)
    phis[0] = s
    for k in range(t.size - 1):
        s = _rk4_linear_step(ks[2 * k], ks[2 * k + 1], ks[2 * k + 2], s, h)
        phis[k + 1] = s
    return phis


@dataclass
class ChoiMatrix:
    """Choi matrix C = sum_jk E_jk kron Phi(E_jk) of a d-dimensional map."""

    matrix: np.ndarray

    def __post_init__(self):
        m = check_complex_matrix(self.matrix)
        d2 = m.shape[0]
        d = int(round(math.sqrt(d2)))
        if d * d != d2:
            raise ValueError(f"Choi matrix side {d2} is not a perfect square")
        defect = hermiticity_defect(m)
        if defect > 1e-10:
            raise ValueError(f"Choi matrix not Hermitian: defect {defect:.3e}")
        self.matrix = m

    @property
    def dim(self):
        return int(round(math.sqrt(self.matrix.shape[0])))

    def least_eigenvalue(self):
        return float(hermitian_eigenvalues(self.matrix, tol=1e-9)[0])


def choi_of(p):
    """Choi matrix of a propagator, assembled from images of the matrix units."""
    d = p.dim
    s = p.superoperator
    c = np.zeros((d * d, d * d), dtype=complex)
    for j in range(d):
        for k in range(d):
            # vec(E_jk) is the basis vector at column-stacked index j + d*k.
            image = s[:, j + d * k].reshape(d, d, order="F")
            e_jk = np.zeros((d, d), dtype=complex)
            e_jk[j, k] = 1.0
            c += np.kron(e_jk, image)
    c = 0.5 * (c + c.conj().T)
    tr = np.trace(c).real
    if abs(tr - d) > 1e-8:
        raise InvariantViolation(
            f"Choi trace {tr} differs from {d} beyond 1e-8 (map not trace preserving)"
        )
    return ChoiMatrix(c)


def is_cp(p, tol=DEFAULT_CP_TOL):
    """Complete-positivity verdict: (least Choi eigenvalue >= -tol, that eigenvalue)."""
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    least = choi_of(p).least_eigenvalue()
    return least >= -tol, least


@dataclass
class IntervalVerdict:
    t_start: float
    t_end: float
    is_cp: bool
    least_choi_eigenvalue: float


@dataclass
class DivisibilityReport:
    intervals: List[IntervalVerdict]

    @property
    def divisible(self):
        return all(v.is_cp for v in self.intervals)


def divisibility_report(gen, t_grid, tol=DEFAULT_CP_TOL, h=None):
    """CP verdict for Phi(t_{k+1}, t_k) on every consecutive grid interval.

    h is the RK4 substep used to build each interval propagator; it defaults
    to 1/100 of the interval length.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2:
        raise ValueError("divisibility grid needs at least two points")
    if np.any(np.diff(t) <= 0):
        raise ValueError("divisibility grid must be strictly increasing")
    verdicts = []
    for k in range(t.size - 1):
        span = t[k + 1] - t[k]
        step = h if h is not None else span / 100.0
        try:
            p = propagator_between(gen, t[k], t[k + 1], step)
            ok, least = is_cp(p, tol)
        except Exception as exc:
            raise type(exc)(f"interval {k} [{t[k]}, {t[k + 1]}]: {exc}") from exc
        verdicts.append(IntervalVerdict(float(t[k]), float(t[k + 1]), ok, least))
    return DivisibilityReport(verdicts)
