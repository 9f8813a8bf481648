"""Quantum states, the trace-distance metric and seeded random-state sampling.

States are d x d complex density matrices. Validation tolerances:
Hermiticity and unit trace to 1e-12, least eigenvalue >= -1e-10 (slightly
relaxed by integrator callers). All randomness flows through explicit 64-bit
seeds; parallel workers derive independent streams from (seed, worker index).
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import hermitian_eigenvalues, hermiticity_defect

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)


def check_complex_matrix(m):
    """Validate and return a square complex matrix with finite entries."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass
class DensityMatrix:
    """A validated quantum state: Hermitian, unit-trace, positive semidefinite."""

    matrix: np.ndarray
    positivity_tol: float = POSITIVITY_TOL
    trace_tol: float = TRACE_TOL

    def __post_init__(self):
        m = check_complex_matrix(self.matrix)
        defect = hermiticity_defect(m)
        if defect > HERMITICITY_TOL:
            raise ValueError(f"state is not Hermitian: defect {defect:.3e}")
        tr = np.trace(m)
        if abs(tr - 1.0) > self.trace_tol:
            raise ValueError(
                f"state trace {tr} differs from 1 beyond {self.trace_tol:.1e}"
            )
        least = hermitian_eigenvalues(m, tol=1e-10)[0]
        if least < -self.positivity_tol:
            raise ValueError(
                f"state has eigenvalue {least:.3e} below -{self.positivity_tol:.1e}"
            )
        self.matrix = m

    @property
    def dim(self):
        return self.matrix.shape[0]

    def purity(self):
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass
class StatePair:
    """A pair of equal-dimension states, optionally labelled."""

    rho1: DensityMatrix
    rho2: DensityMatrix
    label: Optional[str] = None

    def __post_init__(self):
        if self.rho1.dim != self.rho2.dim:
            raise ValueError(
                f"dimension mismatch: {self.rho1.dim} vs {self.rho2.dim}"
            )

    @property
    def dim(self):
        return self.rho1.dim


def trace_distance(rho1, rho2):
    """Trace distance D = (1/2) sum |eigenvalues(rho1 - rho2)|, in [0, 1].

    The difference of two states is Hermitian, so D is half the absolute sum
    of its real eigenvalues.
    """
    m1 = rho1.matrix if isinstance(rho1, DensityMatrix) else check_complex_matrix(rho1)
    m2 = rho2.matrix if isinstance(rho2, DensityMatrix) else check_complex_matrix(rho2)
    if m1.shape != m2.shape:
        raise ValueError(f"dimension mismatch: {m1.shape} vs {m2.shape}")
    diff = m1 - m2
    eigs = hermitian_eigenvalues(diff, tol=1e-10)
    d = 0.5 * float(np.sum(np.abs(eigs)))
    if d > 1.0 + 1e-10:
        raise ValueError(f"trace distance {d} exceeds 1 beyond tolerance")
    return min(max(d, 0.0), 1.0)


def state_rng(seed, worker=None):
    """Seeded generator; (seed, worker) derives an independent stream per worker."""
    key = (int(seed),) if worker is None else (int(seed), int(worker))
    return np.random.default_rng(np.random.SeedSequence(key))


def random_pure_state(dim, seed, worker=None):
    """Rank-1 projector |psi><psi| with |psi| Haar-distributed on the sphere."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    rng = state_rng(seed, worker)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()))


def random_mixed_state(dim, seed, worker=None):
    """Hilbert-Schmidt-ensemble state: G G^dag / tr with G square complex Ginibre."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    rng = state_rng(seed, worker)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    w = g @ g.conj().T
    return DensityMatrix(w / np.trace(w).real)


def bloch_from_qubit(rho):
    """Bloch vector (x, y, z) = (tr rho sigma_x, tr rho sigma_y, tr rho sigma_z)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else check_complex_matrix(rho)
    if m.shape[0] != 2:
        raise ValueError(f"Bloch vector requires dim 2, got {m.shape[0]}")
    x = float(np.trace(m @ SIGMA_X).real)
    y = float(np.trace(m @ SIGMA_Y).real)
    z = float(np.trace(m @ SIGMA_Z).real)
    if x * x + y * y + z * z > 1.0 + 1e-10:
        raise ValueError("Bloch vector lies outside the unit ball beyond tolerance")
    return x, y, z


def qubit_from_bloch(x, y, z):
    """State (I + x sigma_x + y sigma_y + z sigma_z) / 2."""
    m = 0.5 * (np.eye(2, dtype=complex) + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)
    return DensityMatrix(m)


# --------------------------------------------------------------------------
# Text serialization: dimension header line, then row-major "re,im" entries,
# 17 significant digits. Round-trips binary64 exactly.
# --------------------------------------------------------------------------

def write_state_text(rho):
    m = rho.matrix if isinstance(rho, DensityMatrix) else check_complex_matrix(rho)
    lines = [str(m.shape[0])]
    for row in m:
        for z in row:
            lines.append(f"{z.real:.17g},{z.imag:.17g}")
    return "\n".join(lines) + "\n"


def read_state_text(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty state file")
    try:
        dim = int(lines[0])
    except ValueError:
        raise ValueError(f"line 1: expected integer dimension, got {lines[0]!r}")
    expected = dim * dim
    if len(lines) - 1 != expected:
        raise ValueError(
            f"expected {expected} entry lines for dim {dim}, got {len(lines) - 1}"
        )
    entries = np.empty(expected, dtype=complex)
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != 2:
            raise ValueError(f"line {i + 2}: expected 're,im', got {ln!r}")
        try:
            entries[i] = float(parts[0]) + 1j * float(parts[1])
        except ValueError:
            raise ValueError(f"line {i + 2}: non-numeric entry {ln!r}")
    return DensityMatrix(entries.reshape(dim, dim))


def save_state(rho, path):
    with open(path, "w") as fh:
        fh.write(write_state_text(rho))


def load_state(path):
    with open(path) as fh:
        try:
            return read_state_text(fh.read())
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from exc
