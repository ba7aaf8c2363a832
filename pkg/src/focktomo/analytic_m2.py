"""Closed-form two-mode protocol: fixed beamsplitter, equally spaced phases.

For N photons in two modes, 2N+1 settings suffice: a phase shift
phi_j = 2 pi j / (2N+1) on the second mode followed by a fixed real
beamsplitter of mixing angle theta.  The phase grid turns the outcome
statistics into a discrete Fourier series whose harmonic I couples exactly
the density-matrix entries <n1,n2|rho|n1',n2'> with n2' - n2 = I, so the
state is recovered one harmonic at a time.

Two-mode N-photon states map onto a spin N/2 (mode-occupation difference as
the magnetic quantum number), under which the beamsplitter lift is a Wigner
rotation matrix; that correspondence fixes the admissibility condition on
theta.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .combinatorics import enumerate_fock_basis
from .linear_optics import InterferometerConfig, Provenance, lift_unitary
from .tomography import (
    MeasurementRecord,
    ReconstructionResult,
    build_superoperator,
    project_to_state,
)

# The beamsplitter exp(theta (a1^dag a2 - a2^dag a1)) acts on the spin-N/2
# image as exp(-i beta J_y) with beta = -2 theta.  The factor is calibrated
# once against the one-photon lift and then asserted for all N.
BS_SPIN_ANGLE_FACTOR = -2.0

THETA_FLOOR = 1e-3
THETA_GRID_POINTS = 1024


class SingularHarmonicError(ValueError):
    """A phase harmonic's linear system is rank deficient (inadmissible theta)."""

    def __init__(self, harmonic: int, theta: float):
        self.harmonic = harmonic
        self.theta = theta
        super().__init__(
            f"harmonic I={harmonic} is singular at theta={theta!r}; "
            "choose a beamsplitter angle away from Wigner-function zeros"
        )


def _half_integer_units(value: float, name: str) -> int:
    doubled = 2.0 * value
    rounded = round(doubled)
    if abs(doubled - rounded) > 1e-9:
        raise ValueError(f"{name}={value} is not a half-integer")
    return int(rounded)


def wigner_small_d(spin: float, m_out: float, m_in: float, angle: float) -> float:
    """Matrix element <spin, m_out| exp(-i angle J_y) |spin, m_in>.

    Evaluated with the standard explicit finite sum; exact at special angles
    up to roundoff.  ``spin`` may be integer or half-integer, and m_out, m_in
    must differ from it by integers.
    """
    two_s = _half_integer_units(spin, "spin")
    two_mo = _half_integer_units(m_out, "m_out")
    two_mi = _half_integer_units(m_in, "m_in")
    if two_s < 0:
        raise ValueError(f"spin must be non-negative, got {spin}")
    if abs(two_mo) > two_s or abs(two_mi) > two_s:
        raise ValueError(f"|m| exceeds spin: spin={spin}, m_out={m_out}, m_in={m_in}")
    if (two_s - two_mo) % 2 or (two_s - two_mi) % 2:
        raise ValueError(
            f"m values must differ from spin by integers: "
            f"spin={spin}, m_out={m_out}, m_in={m_in}"
        )

    s_plus_mi = (two_s + two_mi) // 2
    s_minus_mi = (two_s - two_mi) // 2
    s_plus_mo = (two_s + two_mo) // 2
    s_minus_mo = (two_s - two_mo) // 2
    mo_minus_mi = (two_mo - two_mi) // 2

    prefactor = math.sqrt(
        math.factorial(s_plus_mo)
        * math.factorial(s_minus_mo)
        * math.factorial(s_plus_mi)
        * math.factorial(s_minus_mi)
    )
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)

    total = 0.0
    for k in range(max(0, -mo_minus_mi), min(s_plus_mi, s_minus_mo) + 1):
        denom = (
            math.factorial(s_plus_mi - k)
            * math.factorial(k)
            * math.factorial(mo_minus_mi + k)
            * math.factorial(s_minus_mo - k)
        )
        sign = -1.0 if (mo_minus_mi + k) % 2 else 1.0
        total += (
            sign
            / denom
            * c ** (two_s - 2 * k - mo_minus_mi)
            * s ** (mo_minus_mi + 2 * k)
        )
    return prefactor * total


def spin_rotation_matrix(spin: float, angle: float) -> np.ndarray:
    """Full (2S+1)-dimensional Wigner rotation matrix for exp(-i angle J_y).

    Rows and columns run over m = spin, spin-1, ..., -spin, matching the
    canonical two-mode Fock order under m = (n1 - n2)/2.
    """
    two_s = _half_integer_units(spin, "spin")
    dim = two_s + 1
    out = np.empty((dim, dim), dtype=float)
    for i in range(dim):
        for j in range(dim):
            out[i, j] = wigner_small_d(
                spin, spin - i, spin - j, angle
            )
    return out


def beamsplitter(theta: float) -> np.ndarray:
    """Two-mode real beamsplitter exp(theta (a1^dag a2 - a2^dag a1))."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def admissibility_margin(photons: int, theta: float) -> float:
    """Smallest |d^l_{m,0}| over the levels l = 1..N probed by the protocol.

    All harmonic systems are invertible when this margin is bounded away from
    zero; it vanishes at swap-like and balanced angles that hide populations
    or coherences.
    """
    angle = BS_SPIN_ANGLE_FACTOR * theta
    margin = math.inf
    for level in range(1, photons + 1):
        for m in range(-level, level + 1):
            margin = min(margin, abs(wigner_small_d(level, m, 0, angle)))
    return margin


def choose_theta(
    photons: int,
    floor: float = THETA_FLOOR,
    grid_points: int = THETA_GRID_POINTS,
) -> float:
    """Deterministic beamsplitter angle with the best admissibility margin.

    Scans a fixed grid on (0, pi) and returns the maximin angle; the returned
    margin always clears ``floor``.
    """
    if photons < 1:
        raise ValueError(f"photon number must be at least 1, got {photons}")
    grid = np.linspace(0.0, math.pi, grid_points + 2)[1:-1]
    margins = [admissibility_margin(photons, theta) for theta in grid]
    best = int(np.argmax(margins))
    if margins[best] < floor:
        raise RuntimeError(
            f"no grid angle clears the admissibility floor {floor} for N={photons}"
        )
    return float(grid[best])


def _phase_grid(photons: int) -> np.ndarray:
    count = 2 * photons + 1
    return 2.0 * math.pi * np.arange(count) / count


@dataclass
class NewtonYoungProtocol:
    """The 2N+1 two-mode settings: phase phi_j on mode 2, then a fixed beamsplitter."""

    photons: int
    theta: float
    phases: np.ndarray
    configs: list[InterferometerConfig]

    def __post_init__(self) -> None:
        if len(self.configs) != 2 * self.photons + 1:
            raise ValueError(
                f"protocol needs {2 * self.photons + 1} settings, got {len(self.configs)}"
            )


def newton_young_configs(
    photons: int, theta: float | None = None
) -> NewtonYoungProtocol:
    """Build the 2N+1 phase-stepped configurations for an admissible theta.

    The phase shifter acts on the state before the beamsplitter, so setting j
    is the matrix diag(1, e^{i phi_j}) followed by the theta-beamsplitter.
    """
    if photons < 1:
        raise ValueError(f"photon number must be at least 1, got {photons}")
    if theta is None:
        theta = choose_theta(photons)
    phases = _phase_grid(photons)
    bs = beamsplitter(theta)
    configs = []
    for j, phi in enumerate(phases):
        g = np.diag([1.0, cmath.exp(1j * phi)]) @ bs
        configs.append(
            InterferometerConfig(
                2, g, Provenance("newton_young", index=j, theta=float(theta))
            )
        )
    return NewtonYoungProtocol(
        photons=photons, theta=float(theta), phases=phases, configs=configs
    )


def _records_to_matrix(
    records: Sequence[MeasurementRecord] | np.ndarray, photons: int
) -> np.ndarray:
    count = 2 * photons + 1
    if isinstance(records, np.ndarray):
        data = np.asarray(records, dtype=float)
    else:
        if any(r.config_index != j for j, r in enumerate(records)):
            raise ValueError("records must be in phase order (config_index 0, 1, ...)")
        data = np.array([r.frequencies() for r in records], dtype=float)
    if data.ndim != 2 or data.shape[0] != count:
        raise ValueError(
            f"expected {count} phase-ordered records, got shape {data.shape}"
        )
    return data


def dft_harmonics(
    records: Sequence[MeasurementRecord] | np.ndarray, photons: int
) -> np.ndarray:
    """Discrete Fourier transform of the outcome data over the phase grid.

    Returns a (2N+1, n_outcomes) complex array whose row I+N holds
    sum_j exp(-i phi_j I) p_j / (2N+1) for I = -N..N; only these 2N+1
    harmonics exist on the grid, so there is no aliasing.
    """
    data = _records_to_matrix(records, photons)
    phases = _phase_grid(photons)
    harmonics = np.arange(-photons, photons + 1)
    kernel = np.exp(-1j * np.outer(harmonics, phases)) / (2 * photons + 1)
    return kernel @ data


def reconstruct_m2(
    records: Sequence[MeasurementRecord] | np.ndarray,
    photons: int,
    theta: float,
) -> ReconstructionResult:
    """Per-harmonic linear inversion of phase-stepped two-mode data.

    Harmonic I determines the entries <n1,n2|rho|n1',n2'> with n2'-n2 = I
    through the fixed-beamsplitter lift; each harmonic's system is solved by
    least squares, and a rank-deficient system reports the offending I.
    """
    data = _records_to_matrix(records, photons)
    harmonics = dft_harmonics(data, photons)
    basis = enumerate_fock_basis(photons, 2)
    dim = basis.dimension
    lifted = lift_unitary(beamsplitter(theta), photons).matrix

    occ2 = np.array([state[1] for state in basis])
    systems = []
    for harmonic in range(-photons, photons + 1):
        rows, cols = np.nonzero(occ2[None, :] - occ2[:, None] == harmonic)
        coeffs = (lifted[rows].conj() * lifted[cols]).T  # (D outcomes, n_pairs)
        systems.append((harmonic, rows, cols, coeffs))

    # Rank-test each harmonic against the scale of the whole problem: an
    # inadmissible theta makes a block numerically zero, which would look
    # full-rank under a per-block relative threshold.
    scale = max(
        np.linalg.svd(coeffs, compute_uv=False)[0] for _, _, _, coeffs in systems
    )
    threshold = max(dim, 2 * photons + 1) * np.finfo(float).eps * scale

    rho = np.zeros((dim, dim), dtype=complex)
    for harmonic, rows, cols, coeffs in systems:
        sigma = np.linalg.svd(coeffs, compute_uv=False)
        if int((sigma > threshold).sum()) < len(rows):
            raise SingularHarmonicError(harmonic, theta)
        target = harmonics[harmonic + photons]
        solution = np.linalg.lstsq(coeffs, target, rcond=None)[0]
        rho[rows, cols] = solution

    protocol = newton_young_configs(photons, theta)
    superop = build_superoperator(protocol.configs, photons, 2)
    residual = float(np.linalg.norm(superop.matrix @ rho.reshape(-1) - data.reshape(-1)))
    return ReconstructionResult(
        raw=rho,
        projected=project_to_state(basis, rho),
        residual=residual,
        rank=dim * dim,
    )
