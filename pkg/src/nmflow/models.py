"""Exactly solvable test models exposed as generators and analytic evaluators.

Damped two-level atom in a lossy cavity (Lorentzian reservoir): the coherence
amplitude G(t) solves G'' + (lambda - i*Delta) G' + (gamma0*lambda/2) G = 0
with G(0)=1, G'(0)=0. The decay rate gamma(t) = -2 Re(G'/G) oscillates and
goes negative at large detuning; its integral Gamma(t) = -2 ln|G(t)| stays
nonnegative, so the full map remains CP.

Central spin dephasing in a bath of N spins (maximally mixed bath):
populations are frozen and coherences are multiplied by f(t) = cos^N(2At).
The formal rate A*N*tan(2At) is singular at 2At = pi/2 mod pi, so that
generator is exposed for demonstrations only, never integrated across poles.
"""
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import GeneratorSpec
from .exceptions import NumericalError
from .states import SIGMA_MINUS, SIGMA_Z

AMPLITUDE_FLOOR = 1e-300
POLE_TOL = 1e-9


@dataclass
class JCParams:
    """Lorentzian-reservoir parameters: coupling gamma0, width lam, detuning delta.

    All three carry units of inverse time; the weak-coupling default is
    gamma0/lam = 0.01.
    """

    gamma0: float = 0.01
    lam: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")


def _jc_amplitude_and_derivative(params, t):
    """(G, dG/dt) in an overflow-safe two-exponential form; t scalar or array."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    c = params.lam - 1j * params.delta
    dd = np.sqrt(c * c - 2.0 * params.gamma0 * params.lam)
    if abs(dd) < 1e-8 * max(1.0, abs(c)):
        # Double-root limit: G = (1 + c t / 2) exp(-c t / 2).
        decay = np.exp(-0.5 * c * t)
        g = (1.0 + 0.5 * c * t) * decay
        gdot = -0.5 * params.gamma0 * params.lam * t * decay
        return g, gdot
    ep = np.exp(0.5 * (dd - c) * t)
    em = np.exp(-0.5 * (dd + c) * t)
    g = 0.5 * ((1.0 + c / dd) * ep + (1.0 - c / dd) * em)
    gdot = -(params.gamma0 * params.lam / (2.0 * dd)) * (ep - em)
    return g, gdot


def jc_amplitude(params, t):
    """Coherence amplitude G(t), with G(0) = 1 and |G(t)| <= 1."""
    g, _ = _jc_amplitude_and_derivative(params, t)
    return complex(g) if np.isscalar(t) or np.ndim(t) == 0 else g


def jc_rate(params, t):
    """Instantaneous decay rate gamma(t) = -2 Re(G'(t) / G(t))."""
    g, gdot = _jc_amplitude_and_derivative(params, t)
    absg = np.abs(g)
    if np.any(absg <= AMPLITUDE_FLOOR):
        raise NumericalError(
            "amplitude zero-crossing: |G(t)| underflowed, the rate is singular"
        )
    rate = -2.0 * np.real(gdot / g)
    return float(rate) if rate.ndim == 0 else rate


def jc_decay_exponent(params, t):
    """Integrated rate Gamma(t) = -2 ln|G(t)| (so |G|^2 = exp(-Gamma))."""
    g, _ = _jc_amplitude_and_derivative(params, t)
    absg = np.abs(g)
    if np.any(absg <= AMPLITUDE_FLOOR):
        raise NumericalError("amplitude zero-crossing: Gamma(t) diverges")
    out = -2.0 * np.log(absg)
    return float(out) if out.ndim == 0 else out


def jc_generator(params, nonnegative_rate=False):
    """d=2 generator: H = 0, single channel (sigma_minus, gamma(t)).

    nonnegative_rate=True clamps gamma at zero, giving the time-dependent
    Markovian variant of the same model.
    """
    if nonnegative_rate:
        rate = lambda t: np.maximum(0.0, jc_rate(params, t))
    else:
        rate = lambda t: jc_rate(params, t)
    return GeneratorSpec(
        dim=2,
        hamiltonian=np.zeros((2, 2), dtype=complex),
        channels=[(SIGMA_MINUS, rate)],
    )


@dataclass
class SpinBathParams:
    """Central-spin model: coupling A (inverse time) and bath size N."""

    coupling_a: float = 1.0
    n_spins: int = 20

    def __post_init__(self):
        if self.coupling_a <= 0:
            raise ValueError(f"coupling_a must be positive, got {self.coupling_a}")
        if self.n_spins < 1:
            raise ValueError(f"n_spins must be >= 1, got {self.n_spins}")


def spinbath_f(params, t):
    """Decoherence factor f(t) = cos^N(2At); |f| <= 1, sign from the cosine."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = np.cos(2.0 * params.coupling_a * t) ** params.n_spins
    return float(out) if out.ndim == 0 else out


def spinbath_trace_distance(params, a, b, t):
    """D(t) = sqrt(a^2 + f(t)^2 |b|^2) for population gap a, coherence gap b."""
    if not -1.0 <= a <= 1.0:
        raise ValueError(f"population difference a must lie in [-1, 1], got {a}")
    f = spinbath_f(params, t)
    out = np.sqrt(a * a + f * f * abs(b) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def spinbath_pole_distance(params, t):
    """Distance from 2At to the nearest tan pole pi/2 mod pi."""
    x = np.mod(2.0 * params.coupling_a * np.asarray(t, dtype=float), math.pi)
    return np.abs(x - 0.5 * math.pi)


def spinbath_rate(params, t):
    """Formal dephasing rate gamma(t) = A N tan(2At); errors near the poles."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be nonnegative")
    dist = spinbath_pole_distance(params, t_arr)
    if np.any(dist <= POLE_TOL):
        bad = float(np.atleast_1d(t_arr)[np.argmin(np.atleast_1d(dist))])
        k = round((2.0 * params.coupling_a * bad - 0.5 * math.pi) / math.pi)
        pole = (0.5 * math.pi + k * math.pi) / (2.0 * params.coupling_a)
        raise NumericalError(
            f"rate is singular: t={bad} lies within {POLE_TOL:.1e} of the pole t={pole}"
        )
    out = params.coupling_a * params.n_spins * np.tan(2.0 * params.coupling_a * t_arr)
    return float(out) if out.ndim == 0 else out


def spinbath_generator(params):
    """Formal generator H = 0, single channel (sigma_z, A N tan(2At)).

    Exposed for the negative-rate demonstration; do not integrate across the
    tan poles.
    """
    return GeneratorSpec(
        dim=2,
        hamiltonian=np.zeros((2, 2), dtype=complex),
        channels=[(SIGMA_Z, lambda t: spinbath_rate(params, t))],
    )


def semigroup_generator(gamma0):
    """Constant amplitude damping: H = 0, channel (sigma_minus, gamma0 >= 0)."""
    if gamma0 < 0:
        raise ValueError(f"semigroup rate must be nonnegative, got {gamma0}")
    return GeneratorSpec(
        dim=2,
        hamiltonian=np.zeros((2, 2), dtype=complex),
        channels=[(SIGMA_MINUS, float(gamma0))],
    )
