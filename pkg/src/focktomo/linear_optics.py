"""Interferometer configurations and their lift to multimode Fock space.

A configuration is an M'xM' unitary acting on mode operators.  Its action on
the N-photon sector is a D_{N,M'} x D_{N,M'} unitary whose entries are matrix
permanents of row/column-repeated submatrices.  Configurations can be drawn
Haar-randomly, built from a rectangular beamsplitter mesh, or given
explicitly; they serialize to JSON with a bit-exact round trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .combinatorics import FockBasis, enumerate_fock_basis

UNITARITY_TOL = 1e-12
LIFT_UNITARITY_TOL = 1e-9
PERMANENT_SIZE_CAP = 24
# Switch the permanent accumulator to compensated summation once cancellation
# across 2^(n-1) terms can eat into the 1e-12 accuracy target.
_COMPENSATED_MIN_SIZE = 12
# Cache full subset tables only while they stay small; beyond that they are
# regenerated chunk by chunk.  Work buffers are kept near this many elements.
_SUBSET_TABLE_MAX_BITS = 16
_WORK_BUFFER_ELEMENTS = 1 << 21

PROVENANCE_KINDS = ("haar", "mesh", "newton_young", "explicit")


@dataclass(frozen=True)
class Provenance:
    """How a configuration was produced (enough to regenerate it)."""

    kind: str
    seed: int | None = None
    index: int | None = None
    theta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in PROVENANCE_KINDS:
            raise ValueError(f"unknown provenance kind {self.kind!r}")

    def to_json_dict(self) -> dict:
        record: dict = {"kind": self.kind}
        if self.seed is not None:
            record["seed"] = self.seed
        if self.index is not None:
            record["index"] = self.index
        if self.theta is not None:
            record["theta"] = self.theta
        return record

    @classmethod
    def from_json_dict(cls, record: dict) -> "Provenance":
        return cls(
            kind=record["kind"],
            seed=record.get("seed"),
            index=record.get("index"),
            theta=record.get("theta"),
        )


@dataclass
class InterferometerConfig:
    """An M'xM' mode transformation, unitary to within ``UNITARITY_TOL``."""

    modes: int
    matrix: np.ndarray
    provenance: Provenance = field(default_factory=lambda: Provenance("explicit"))

    def __post_init__(self) -> None:
        g = np.array(self.matrix, dtype=complex)
        if g.shape != (self.modes, self.modes):
            raise ValueError(
                f"matrix shape {g.shape} does not match {self.modes} modes"
            )
        residual = np.abs(g.conj().T @ g - np.eye(self.modes)).max()
        if residual > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (residual {residual:.3e})")
        g.flags.writeable = False
        self.matrix = g

    @property
    def unitarity_residual(self) -> float:
        return float(
            np.abs(self.matrix.conj().T @ self.matrix - np.eye(self.modes)).max()
        )

    def to_json_dict(self) -> dict:
        return {
            "modes": self.modes,
            "matrix": [
                [[float(z.real), float(z.imag)] for z in row] for row in self.matrix
            ],
            "provenance": self.provenance.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> "InterferometerConfig":
        rows = record["matrix"]
        g = np.array(
            [[complex(re, im) for re, im in row] for row in rows], dtype=complex
        )
        return cls(
            modes=int(record["modes"]),
            matrix=g,
            provenance=Provenance.from_json_dict(record["provenance"]),
        )


def haar_random_unitary(modes: int, seed: int) -> InterferometerConfig:
    """Draw a Haar-distributed M'xM' unitary, deterministically for a given seed.

    Ginibre matrix + QR, with the R-diagonal phases pushed back into Q so the
    distribution is exactly Haar rather than merely unitary.
    """
    if modes < 1:
        raise ValueError(f"mode count must be positive, got {modes}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes)))
    z /= math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return InterferometerConfig(modes, q, Provenance("haar", seed=int(seed)))


def _embed_two_mode(block: np.ndarray, mode: int, modes: int) -> np.ndarray:
    full = np.eye(modes, dtype=complex)
    full[mode : mode + 2, mode : mode + 2] = block
    return full


def _mesh_layout(modes: int) -> list[int]:
    # Rectangular arrangement: alternating even/odd layers, C(M',2) blocks total.
    layout = []
    for layer in range(modes):
        for mode in range(layer % 2, modes - 1, 2):
            layout.append(mode)
    return layout


def mesh_unitary(
    modes: int,
    transmissivities: Sequence[float],
    phases: Sequence[float],
    provenance: Provenance | None = None,
) -> InterferometerConfig:
    """Compose a rectangular mesh of two-mode beamsplitter+phase blocks.

    Each block on neighbouring modes (i, i+1) has intensity transmissivity tau
    and phase phi:

        [[sqrt(tau) e^{i phi},  sqrt(1-tau) e^{i phi}],
         [-sqrt(1-tau), sqrt(tau)]]

    The phase sits on the block's first row, the side that faces the state
    under the probability law; a phase on the column side would cancel
    against the photon-number conjugation and lose the antisymmetric part of
    the density matrix.  With all transmissivities 1 and zero phases the mesh
    is the identity.
    """
    layout = _mesh_layout(modes)
    if len(transmissivities) != len(layout) or len(phases) != len(layout):
        raise ValueError(
            f"mesh over {modes} modes needs {len(layout)} blocks, got "
            f"{len(transmissivities)} transmissivities and {len(phases)} phases"
        )
    g = np.eye(modes, dtype=complex)
    for mode, tau, phi in zip(layout, transmissivities, phases):
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"transmissivity {tau} outside [0, 1]")
        t = math.sqrt(tau)
        r = math.sqrt(1.0 - tau)
        ph = np.exp(1j * phi)
        block = np.array([[t * ph, r * ph], [-r, t]], dtype=complex)
        g = _embed_two_mode(block, mode, modes) @ g
    if provenance is None:
        provenance = Provenance("explicit")
    return InterferometerConfig(modes, g, provenance)


def random_mesh_unitary(modes: int, seed: int) -> InterferometerConfig:
    """Random rectangular mesh: transmissivities ~ U[0,1], phases ~ U[0,2pi)."""
    if modes < 1:
        raise ValueError(f"mode count must be positive, got {modes}")
    rng = np.random.default_rng(seed)
    n_blocks = len(_mesh_layout(modes))
    taus = rng.uniform(0.0, 1.0, size=n_blocks)
    phis = rng.uniform(0.0, 2.0 * math.pi, size=n_blocks)
    return mesh_unitary(modes, taus, phis, Provenance("mesh", seed=int(seed)))


def pad_with_vacuum(state: Sequence[int], meas_modes: int) -> tuple[int, ...]:
    """Append vacuum modes so the occupation vector covers M' >= M modes."""
    state = tuple(int(k) for k in state)
    if meas_modes < len(state):
        raise ValueError(
            f"cannot pad {len(state)}-mode state down to {meas_modes} modes"
        )
    return state + (0,) * (meas_modes - len(state))


class _NeumaierSum:
    """Compensated complex accumulator (Neumaier variant on real and imaginary parts)."""

    __slots__ = ("_sr", "_si", "_cr", "_ci")

    def __init__(self) -> None:
        self._sr = self._si = self._cr = self._ci = 0.0

    def add(self, value: complex) -> None:
        for part, attr_s, attr_c in (
            (value.real, "_sr", "_cr"),
            (value.imag, "_si", "_ci"),
        ):
            s = getattr(self, attr_s)
            t = s + part
            if abs(s) >= abs(part):
                setattr(self, attr_c, getattr(self, attr_c) + (s - t) + part)
            else:
                setattr(self, attr_c, getattr(self, attr_c) + (part - t) + s)
            setattr(self, attr_s, t)

    @property
    def value(self) -> complex:
        return complex(self._sr + self._cr, self._si + self._ci)


def permanent(matrix: np.ndarray) -> complex:
    """Permanent of a square complex matrix by inclusion-exclusion.

    Gray-code subset iteration keeps a running row-sum vector, so the cost is
    O(2^(n-1) n) arithmetic operations.  For n >= 12 the accumulation is
    compensated to control cancellation.  The empty matrix has permanent 1.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > PERMANENT_SIZE_CAP:
        raise ValueError(f"matrix size {n} exceeds the cap of {PERMANENT_SIZE_CAP}")

    row_sums = np.zeros(n, dtype=complex)
    acc: _NeumaierSum | None = _NeumaierSum() if n >= _COMPENSATED_MIN_SIZE else None
    total = 0.0 + 0.0j
    popcount = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if (k ^ (k >> 1)) >> j & 1:
            row_sums += a[:, j]
            popcount += 1
        else:
            row_sums -= a[:, j]
            popcount -= 1
        term = row_sums.prod()
        if (n - popcount) % 2:
            term = -term
        if acc is not None:
            acc.add(term)
        else:
            total += term
    return acc.value if acc is not None else total


def _factorial_product(occupation: Sequence[int]) -> int:
    out = 1
    for k in occupation:
        out *= math.factorial(k)
    return out


def build_submatrix(
    g: np.ndarray, alpha: Sequence[int], beta: Sequence[int]
) -> np.ndarray:
    """Row/column-repeated submatrix whose permanent gives <alpha|U(g)|beta>.

    Row i of g is repeated alpha_i times and column j is repeated beta_j
    times, in ascending mode order (alpha labels the detected state, beta the
    input one).
    """
    g = np.asarray(g)
    alpha = tuple(int(k) for k in alpha)
    beta = tuple(int(k) for k in beta)
    if len(alpha) != g.shape[0] or len(beta) != g.shape[1]:
        raise ValueError("occupation vectors do not match the matrix dimensions")
    if sum(alpha) != sum(beta):
        raise ValueError(
            f"photon numbers differ: sum(alpha)={sum(alpha)}, sum(beta)={sum(beta)}"
        )
    rows = np.repeat(np.arange(g.shape[0]), alpha)
    cols = np.repeat(np.arange(g.shape[1]), beta)
    return g[np.ix_(rows, cols)]


def fock_amplitude(
    g: np.ndarray, alpha: Sequence[int], beta: Sequence[int]
) -> complex:
    """Transition amplitude <alpha|U(g)|beta> = per(g_{alpha,beta}) / sqrt(alpha! beta!)."""
    sub = build_submatrix(g, alpha, beta)
    norm = math.sqrt(_factorial_product(alpha) * _factorial_product(beta))
    return permanent(sub) / norm


@dataclass
class FockUnitary:
    """The N-photon action of a mode unitary, in the canonical Fock order."""

    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.matrix, dtype=complex)
        d = self.basis.dimension
        if u.shape != (d, d):
            raise ValueError(f"matrix shape {u.shape} does not match dimension {d}")
        residual = np.abs(u.conj().T @ u - np.eye(d)).max()
        if residual > LIFT_UNITARITY_TOL * max(d, 1):
            raise ValueError(
                f"lifted matrix is not unitary (residual {residual:.3e})"
            )
        self.matrix = u

    @property
    def dimension(self) -> int:
        return self.basis.dimension


def _subset_block(n: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    # Column-subset indicators (rows = subsets start..stop) and the matching
    # inclusion-exclusion signs (-1)^(n - |S|); the empty subset contributes
    # a zero product for n >= 1 so it needs no special casing.
    subsets = np.arange(start, stop, dtype=np.int64)
    bits = ((subsets[:, None] >> np.arange(n)) & 1).astype(np.float64)
    signs = np.where((n - bits.sum(axis=1).astype(np.int64)) % 2, -1.0, 1.0)
    return bits, signs


@lru_cache(maxsize=32)
def _subset_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    return _subset_block(n, 0, 1 << n)


@lru_cache(maxsize=64)
def _expanded_mode_indices(photons: int, modes: int) -> np.ndarray:
    # Row alpha lists the mode index of each of the N photons in state alpha.
    basis = enumerate_fock_basis(photons, modes)
    out = np.empty((basis.dimension, photons), dtype=np.intp)
    arange = np.arange(modes)
    for i, state in enumerate(basis):
        out[i] = np.repeat(arange, state)
    return out


def lift_unitary(
    config: InterferometerConfig | np.ndarray, photons: int
) -> FockUnitary:
    """Lift a mode unitary to its N-photon Fock-space representation.

    Entry (alpha, beta) is ``fock_amplitude(g, alpha, beta)``; all entries for
    one input column are evaluated together by sharing the Ryser subset sums
    of that column's repeated-column submatrix.
    """
    if photons < 0:
        raise ValueError(f"photon number must be non-negative, got {photons}")
    if isinstance(config, InterferometerConfig):
        g = config.matrix
        modes = config.modes
    else:
        g = np.asarray(config, dtype=complex)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("mode transformation must be a square matrix")
        modes = g.shape[0]
    if photons > PERMANENT_SIZE_CAP:
        raise ValueError(
            f"photon number {photons} exceeds the permanent cap of {PERMANENT_SIZE_CAP}"
        )

    basis = enumerate_fock_basis(photons, modes)
    dim = basis.dimension
    expanded = _expanded_mode_indices(photons, modes)
    sqrt_fact = np.array(
        [math.sqrt(_factorial_product(state)) for state in basis], dtype=float
    )

    n_subsets = 1 << photons
    chunk = max(1, _WORK_BUFFER_ELEMENTS // max(1, dim * max(photons, 1)))
    cached = photons <= _SUBSET_TABLE_MAX_BITS

    u = np.empty((dim, dim), dtype=complex)
    for b in range(dim):
        cols = g[:, expanded[b]]  # (M', N)
        pers = np.zeros(dim, dtype=complex)
        for start in range(0, n_subsets, chunk):
            stop = min(start + chunk, n_subsets)
            if cached:
                bits, signs = _subset_tables(photons)
                bits, signs = bits[start:stop], signs[start:stop]
            else:
                bits, signs = _subset_block(photons, start, stop)
            row_sums = bits @ cols.T  # (chunk, M')
            products = row_sums[:, expanded].prod(axis=2)  # (chunk, D)
            pers += signs @ products
        u[:, b] = pers / (sqrt_fact * sqrt_fact[b])
    return FockUnitary(basis=basis, matrix=u)
