"""Independent brute-force references used to freeze expected test values.

Everything here is deliberately naive (permutation sums, exhaustive
enumeration, explicit normal equations) and shares no code with the library
paths it checks.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


def permanent_by_permutations(matrix: np.ndarray) -> complex:
    """O(n!) definition of the permanent: sum over permutation products."""
    a = np.asarray(matrix)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    total = 0.0 + 0.0j
    rows = range(n)
    for perm in itertools.permutations(range(n)):
        product = 1.0 + 0.0j
        for i in rows:
            product *= a[i, perm[i]]
        total += product
    return total


def permanent_by_expansion(matrix: np.ndarray) -> complex:
    """Laplace expansion over the first rows with column-subset memoization."""
    a = np.asarray(matrix)
    n = a.shape[0]

    @lru_cache(maxsize=None)
    def expand(row: int, remaining: int) -> complex:
        if row == n:
            return 1.0 + 0.0j
        total = 0.0 + 0.0j
        for j in range(n):
            bit = 1 << j
            if remaining & bit:
                total += a[row, j] * expand(row + 1, remaining & ~bit)
        return total

    return expand(0, (1 << n) - 1)


def enumerate_occupations(photons: int, modes: int) -> set[tuple[int, ...]]:
    """All occupation vectors by filtering the full integer grid."""
    return {
        combo
        for combo in itertools.product(range(photons + 1), repeat=modes)
        if sum(combo) == photons
    }


def balanced_signatures_by_filter(modes: int, max_positive: int) -> set[tuple[int, ...]]:
    """All admissible signatures by filtering [-t, t]^M exhaustively."""
    admissible = set()
    values = range(-max_positive, max_positive + 1)
    for combo in itertools.product(values, repeat=modes):
        if any(a < b for a, b in zip(combo, combo[1:])):
            continue
        if sum(combo) != 0:
            continue
        if sum(v for v in combo if v > 0) > max_positive:
            continue
        admissible.add(combo)
    return admissible


def amplitude_by_state_vector(g: np.ndarray, alpha, beta) -> complex:
    """<alpha|U(g)|beta> by expanding the multi-photon input over mode labels.

    Distributes each input photon over the modes with amplitude g[out, in],
    sums over all assignments, and normalizes by the bosonic factorials.
    """
    import math

    modes = g.shape[0]
    photons = sum(beta)
    input_modes = [j for j, count in enumerate(beta) for _ in range(count)]
    target = tuple(alpha)
    total = 0.0 + 0.0j
    for assignment in itertools.product(range(modes), repeat=photons):
        occupation = [0] * modes
        for mode in assignment:
            occupation[mode] += 1
        if tuple(occupation) != target:
            continue
        product = 1.0 + 0.0j
        for out_mode, in_mode in zip(assignment, input_modes):
            product *= g[out_mode, in_mode]
        total += product
    # U|beta> = prod_j (sum_i g_ij a_i^dag)^{beta_j} |0> / sqrt(beta!), and the
    # creation-operator string on a fixed occupation contributes sqrt(alpha!).
    norm_alpha = np.prod([math.factorial(k) for k in alpha])
    norm_beta = np.prod([math.factorial(k) for k in beta])
    return total * np.sqrt(norm_alpha / norm_beta)


def normal_equation_solve(matrix: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Explicit (L^dag L)^{-1} L^dag p, valid at full column rank."""
    gram = matrix.conj().T @ matrix
    return np.linalg.solve(gram, matrix.conj().T @ p)


def haar_mean_abs_square(modes: int, samples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of |g_00|^2 over Haar draws."""
    from focktomo import haar_random_unitary

    rng = np.random.default_rng(seed)
    values = np.empty(samples)
    for i in range(samples):
        config = haar_random_unitary(modes, int(rng.integers(2**63)))
        values[i] = abs(config.matrix[0, 0]) ** 2
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(samples))
