"""Shared fixtures: randomized instance generators and JIT warm-up."""

import numpy as np
import pytest

from kypcert import (
    CostWeight,
    LinearPlant,
    StochPlant,
    certify_stabilizable_stoch,
    check_coercivity,
    is_stabilizable_det,
)


def rand_complex(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def rand_hermitian(rng, n, use_complex):
    X = rand_complex(rng, n, n) if use_complex else rng.standard_normal((n, n))
    H = 0.5 * (X + X.conj().T)
    scale = float(np.max(np.abs(np.linalg.eigvalsh(H)))) or 1.0
    return H / scale


def random_det_instance(rng, n_max=4, m_max=2):
    """Stabilizable plant with an indefinite-leaning quadratic cost.

    The state-weight shift is drawn wide enough that the corpus contains
    both coercive and frequency-condition-violating instances.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, m_max + 1))
        use_complex = bool(rng.random() < 0.5)
        if use_complex:
            A = rand_complex(rng, n, n)
            B = rand_complex(rng, n, m)
        else:
            A = rng.standard_normal((n, n))
            B = rng.standard_normal((n, m))
        plant = LinearPlant(A, B)
        if is_stabilizable_det(plant):
            break
    shift = rng.uniform(-1.0, 1.5)
    W = rand_hermitian(rng, n, use_complex) + shift * np.eye(n)
    if rng.random() < 0.7:
        V = 0.3 * (rand_complex(rng, m, n) if use_complex else rng.standard_normal((m, n)))
    else:
        V = None
    C = 0.3 * (rand_complex(rng, m, m) if use_complex else rng.standard_normal((m, m)))
    R = np.eye(m) + C.conj().T @ C
    return plant, CostWeight(W=W, V=V, R=R)


def random_stoch_instance(rng, n_max=3, noise_free=False):
    """Mean-square stabilizable triple with an indefinite state weight."""
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, 3))
        use_complex = bool(rng.random() < 0.5)
        if use_complex:
            A = rand_complex(rng, n, n)
            B = rand_complex(rng, n, m)
        else:
            A = rng.standard_normal((n, n))
            B = rng.standard_normal((n, m))
        if noise_free:
            N = np.zeros((n, n))
        else:
            N = 0.4 * (rand_complex(rng, n, n) if use_complex else rng.standard_normal((n, n)))
        plant = StochPlant(A, N, B)
        if certify_stabilizable_stoch(plant) is not None:
            break
    H = rand_hermitian(rng, n, use_complex)
    W = H + rng.uniform(-0.8, 1.2) * np.eye(n)
    return plant, W


@pytest.fixture(scope="session")
def numba_warm():
    """Compile the discretized-cost kernels once, outside any timed block."""
    plant = LinearPlant([[-1.0]], [[1.0]])
    check_coercivity(plant, CostWeight.identity(1, 1), T=5.0, dt=0.5, dense_limit=1)
    return True
