"""Independent oracles used to freeze expected values.

Everything here is deliberately coded apart from the library implementations
it checks: the Volterra memory-kernel solver for the cavity amplitude, a
second Hilbert-Schmidt sampler, a direct dissipator evaluation, the
closed-form amplitude-damping solution, and a brute-force bath average for
the central-spin model.
"""
import numpy as np


def volterra_amplitude(gamma0, lam, delta, t_max, n_steps):
    """Trapezoidal solution of the memory-kernel amplitude equation.

    dG/dt = -int_0^t K(t - t') G(t') dt' with K(tau) = (gamma0*lam/2)
    exp(-(lam - i*delta) tau), G(0) = 1. The trapezoidal history sum over an
    exponential kernel admits an exact one-step recurrence, and G is advanced
    with the (implicit) trapezoidal rule, giving a second-order scheme.

    Returns (times, G values) on the uniform grid.
    """
    c = lam - 1j * delta
    strength = 0.5 * gamma0 * lam
    h = t_max / n_steps
    decay = np.exp(-c * h)

    times = np.linspace(0.0, t_max, n_steps + 1)
    g = np.empty(n_steps + 1, dtype=complex)
    g[0] = 1.0
    memory = 0.0 + 0.0j  # trapezoidal value of int_0^{t_n} e^{-c(t_n-t')} G dt'
    gdot_prev = 0.0 + 0.0j
    denom = 1.0 + strength * h * h / 4.0
    for n in range(1, n_steps + 1):
        partial = decay * memory + 0.5 * h * decay * g[n - 1]
        g[n] = (g[n - 1] + 0.5 * h * gdot_prev - 0.5 * h * strength * partial) / denom
        memory = partial + 0.5 * h * g[n]
        gdot_prev = -strength * memory
    return times, g


def hilbert_schmidt_sample(rng, dim):
    """Second, independently coded Hilbert-Schmidt sampler (interleaved reals)."""
    reals = rng.normal(size=(dim, dim, 2))
    g = reals[..., 0] + 1j * reals[..., 1]
    w = g @ g.conj().T
    return w / np.trace(w).real


def lindblad_rhs(h, ops, rates, rho):
    """Direct evaluation of the time-local generator on a matrix."""
    out = -1j * (h @ rho - rho @ h)
    for op, rate in zip(ops, rates):
        out = out + rate * (
            op @ rho @ op.conj().T
            - 0.5 * (op.conj().T @ op @ rho + rho @ op.conj().T @ op)
        )
    return out


def amplitude_damping_solution(gamma0, rho0, t):
    """Closed-form constant-rate amplitude damping of a qubit state.

    Excited population decays as exp(-gamma0 t), coherences as
    exp(-gamma0 t / 2), the ground population absorbs the rest.
    """
    e = np.exp(-gamma0 * t)
    s = np.exp(-0.5 * gamma0 * t)
    out = np.empty((2, 2), dtype=complex)
    out[0, 0] = rho0[0, 0] * e
    out[0, 1] = rho0[0, 1] * s
    out[1, 0] = rho0[1, 0] * s
    out[1, 1] = 1.0 - out[0, 0]
    return out


def spin_bath_coherence_factor(coupling, n_spins, t):
    """Bath average of the dephasing phase by brute-force enumeration.

    For a maximally mixed bath the coherence picks up exp(-2i*coupling*t*m)
    with m = sum_k s_k over all 2^N configurations s_k = +-1, each weighted
    equally. Enumerates every configuration via its popcount.
    """
    configs = np.arange(2 ** n_spins, dtype=np.uint64)
    ones = np.zeros(configs.size, dtype=np.int64)
    x = configs.copy()
    while np.any(x):
        ones += (x & 1).astype(np.int64)
        x >>= 1
    m = n_spins - 2 * ones
    return np.mean(np.exp(-2j * coupling * t * m))
