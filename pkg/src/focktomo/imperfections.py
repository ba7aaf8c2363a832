"""Source and detector imperfection models.

Sources that emit a photon-number mixture, per-mode sub-unit detection
efficiency (binomial thinning, equivalent to a beamsplitter in front of a
perfect detector), uniform transmission loss folded into the detector model,
and the post-selection / response-inversion pipelines that recover the
underlying fixed-N states from such data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .combinatorics import enumerate_fock_basis, fock_dimension
from .linear_optics import InterferometerConfig
from .tomography import (
    DensityMatrix,
    MeasurementRecord,
    ReconstructionResult,
    build_superoperator,
    gramian_rank,
    outcome_probabilities,
    reconstruct,
)

WEIGHT_SUM_TOL = 1e-12
TRUNCATION_MASS_TOL = 1e-9
DEFAULT_SECTOR_MASS_FLOOR = 1e-10


class IncompleteSectorError(ValueError):
    """Some photon-number sectors cannot be reconstructed from the given configs."""

    def __init__(self, deficits: list[tuple[int, int, int]]):
        self.deficits = deficits
        detail = ", ".join(
            f"N={n} (rank {rank} < {required})" for n, rank, required in deficits
        )
        super().__init__(f"configurations incomplete for sectors: {detail}")


@dataclass(frozen=True)
class TruncatedBasis:
    """All occupation vectors with total photon number <= max_total.

    States are ordered by ascending total, canonically within each sector, so
    sectors occupy contiguous index ranges.
    """

    max_total: int
    modes: int
    states: tuple[tuple[int, ...], ...]

    @cached_property
    def _index(self) -> dict[tuple[int, ...], int]:
        return {state: i for i, state in enumerate(self.states)}

    def index_of(self, state: Sequence[int]) -> int:
        key = tuple(int(k) for k in state)
        try:
            return self._index[key]
        except KeyError:
            raise ValueError(f"{key} is not a state of this basis") from None

    def sector_slice(self, total: int) -> slice:
        if not 0 <= total <= self.max_total:
            raise ValueError(f"total {total} outside [0, {self.max_total}]")
        start = sum(fock_dimension(n, self.modes) for n in range(total))
        return slice(start, start + fock_dimension(total, self.modes))

    def __len__(self) -> int:
        return len(self.states)


@lru_cache(maxsize=None)
def truncated_basis(max_total: int, modes: int) -> TruncatedBasis:
    """Build (and cache) the all-totals-up-to-N_max basis over M modes."""
    if max_total < 0:
        raise ValueError(f"max_total must be non-negative, got {max_total}")
    states: list[tuple[int, ...]] = []
    for total in range(max_total + 1):
        states.extend(enumerate_fock_basis(total, modes).states)
    return TruncatedBasis(max_total=max_total, modes=modes, states=tuple(states))


def embed_sector(p: np.ndarray, total: int, basis: TruncatedBasis) -> np.ndarray:
    """Place a fixed-total distribution into the truncated outcome space."""
    p = np.asarray(p, dtype=float)
    sector = basis.sector_slice(total)
    if p.shape != (sector.stop - sector.start,):
        raise ValueError(
            f"sector {total} has {sector.stop - sector.start} states, got {p.shape}"
        )
    out = np.zeros(len(basis), dtype=float)
    out[sector] = p
    return out


def postselect_total(
    p: np.ndarray, basis: TruncatedBasis, total: int
) -> tuple[np.ndarray, float]:
    """Condition on a fixed detected total; also return the sector mass.

    Works on probabilities or on raw counts.  The mass is the sector's share
    of the input, which estimates the emission weight pi_N (or eta^N * pi_N
    when uncorrected loss is present).
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} outcomes, got {p.shape}")
    grand_total = p.sum()
    if grand_total <= 0.0:
        raise ValueError("distribution has no statistical weight at all")
    sector = p[basis.sector_slice(total)]
    sector_sum = sector.sum()
    if sector_sum <= 0.0:
        raise ValueError(f"no statistical weight in the {total}-photon sector")
    return sector / sector_sum, float(sector_sum / grand_total)


@dataclass(frozen=True)
class PhotonNumberMixture:
    """Source model: emits the N-photon state rho_N with probability pi_N."""

    components: tuple[tuple[float, DensityMatrix], ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("mixture needs at least one component")
        total = sum(weight for weight, _ in self.components)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total}, not 1")
        photon_numbers = [rho.photons for _, rho in self.components]
        if len(set(photon_numbers)) != len(photon_numbers):
            raise ValueError("photon numbers must be distinct across components")
        modes = {rho.modes for _, rho in self.components}
        if len(modes) != 1:
            raise ValueError("all components must share the same mode count")
        for weight, _ in self.components:
            if weight < 0.0:
                raise ValueError(f"negative weight {weight}")

    @property
    def modes(self) -> int:
        return self.components[0][1].modes

    @property
    def max_photons(self) -> int:
        return max(rho.photons for _, rho in self.components)

    def weights(self) -> dict[int, float]:
        return {rho.photons: weight for weight, rho in self.components}

    def to_json_dict(self) -> dict:
        return {
            "components": [
                {"weight": weight, **rho.to_json_dict()}
                for weight, rho in self.components
            ]
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> "PhotonNumberMixture":
        components = tuple(
            (float(entry["weight"]), DensityMatrix.from_json_dict(entry))
            for entry in record["components"]
        )
        return cls(components)


def mixture_probabilities(
    mixture: PhotonNumberMixture, config: InterferometerConfig
) -> dict[int, tuple[float, np.ndarray]]:
    """Per-component weights and conditional outcome distributions."""
    return {
        rho.photons: (weight, outcome_probabilities(rho, config))
        for weight, rho in mixture.components
    }


def mixture_joint_probabilities(
    mixture: PhotonNumberMixture,
    config: InterferometerConfig,
    max_total: int | None = None,
) -> tuple[TruncatedBasis, np.ndarray]:
    """Joint detection distribution over all totals, on the truncated basis."""
    if max_total is None:
        max_total = mixture.max_photons
    if max_total < mixture.max_photons:
        raise ValueError(
            f"truncation at {max_total} drops the {mixture.max_photons}-photon component"
        )
    basis = truncated_basis(max_total, config.modes)
    joint = np.zeros(len(basis), dtype=float)
    for total, (weight, conditional) in mixture_probabilities(mixture, config).items():
        joint += weight * embed_sector(conditional, total, basis)
    return basis, joint


@dataclass(frozen=True)
class DetectorModel:
    """Per-mode detection efficiencies, with optional uniform transmission.

    Uniform loss upstream of the detectors is folded into the per-mode
    efficiencies (a lossy channel followed by a perfect detector equals a
    perfect channel followed by a less efficient detector).
    """

    efficiencies: tuple[float, ...]
    uniform_transmission: float = 1.0

    def __post_init__(self) -> None:
        for eta in (*self.efficiencies, self.uniform_transmission):
            if not 0.0 < eta <= 1.0:
                raise ValueError(f"efficiency {eta} outside (0, 1]")

    @classmethod
    def uniform(cls, eta: float, modes: int) -> "DetectorModel":
        return cls(efficiencies=(eta,) * modes)

    @property
    def modes(self) -> int:
        return len(self.efficiencies)

    def effective(self) -> np.ndarray:
        return np.array(self.efficiencies) * self.uniform_transmission


def _binomial_thinning(eta: float, max_total: int) -> np.ndarray:
    # P[k, n] = C(n, k) eta^k (1-eta)^(n-k) for one mode.
    size = max_total + 1
    out = np.zeros((size, size))
    for n in range(size):
        for k in range(n + 1):
            out[k, n] = math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k)
    return out


def response_matrix(basis: TruncatedBasis, model: DetectorModel) -> np.ndarray:
    """Detection map on the truncated space: entry (k, n) is prod_j P_{eta_j}(k_j|n_j).

    Upper triangular in the basis order because detection can only remove
    photons (componentwise k <= n), with strictly positive diagonal
    prod_j eta_j^{k_j}.
    """
    if model.modes != basis.modes:
        raise ValueError(
            f"model covers {model.modes} modes, basis has {basis.modes}"
        )
    occupations = np.array(basis.states)  # (K, M)
    etas = model.effective()
    out = np.ones((len(basis), len(basis)))
    for j in range(basis.modes):
        table = _binomial_thinning(float(etas[j]), basis.max_total)
        out *= table[occupations[:, None, j], occupations[None, :, j]]
    return out


def detector_response(
    p: np.ndarray, basis: TruncatedBasis, model: DetectorModel
) -> np.ndarray:
    """Detected distribution after per-mode binomial thinning."""
    p = np.asarray(p, dtype=float)
    if p.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} outcomes, got {p.shape}")
    return response_matrix(basis, model) @ p


def simplex_projection(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    ordered = np.sort(v)[::-1]
    cumulative = np.cumsum(ordered) - 1.0
    indices = np.arange(1, len(v) + 1)
    support = ordered - cumulative / indices > 0
    pivot = indices[support][-1]
    shift = cumulative[support][-1] / pivot
    return np.clip(v - shift, 0.0, None)


def invert_detector_response(
    p_detected: np.ndarray,
    basis: TruncatedBasis,
    model: DetectorModel,
    project: bool = False,
) -> np.ndarray:
    """Recover the incident distribution from the detected one.

    Solves the triangular response system exactly; with sampled data the
    result can carry small negative entries, which are returned as-is unless
    ``project`` asks for the nearest point on the probability simplex.  A
    warning is emitted when the input has visibly lost mass beyond the
    truncation (detected events above max_total cannot be represented here).
    """
    q = np.asarray(p_detected, dtype=float)
    if q.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} outcomes, got {q.shape}")
    deficit = 1.0 - q.sum()
    if deficit > TRUNCATION_MASS_TOL:
        warnings.warn(
            f"detected distribution is missing {deficit:.3e} probability mass; "
            f"events beyond the truncation at {basis.max_total} photons are ignored",
            RuntimeWarning,
            stacklevel=2,
        )
    solution = solve_triangular(response_matrix(basis, model), q, lower=False)
    return simplex_projection(solution) if project else solution


@dataclass
class MixtureEstimate:
    """Recovered weights and per-sector states from mixed-total records."""

    weights: dict[int, float]
    states: dict[int, ReconstructionResult]
    sector_masses: dict[int, list[float]]


def reconstruct_mixture(
    records: Sequence[np.ndarray],
    configs: Sequence[InterferometerConfig],
    modes: int,
    max_total: int,
    model: DetectorModel | None = None,
    mass_floor: float = DEFAULT_SECTOR_MASS_FLOOR,
) -> MixtureEstimate:
    """Recover every photon-number component from mixed-total statistics.

    Each record is a distribution over ``truncated_basis(max_total, M')`` for
    the matching configuration.  With a detector model the response is
    inverted first; sectors are then post-selected, their masses estimate the
    weights, and each sector's state is reconstructed with the generic
    engine.  Completeness is checked per sector at runtime rather than
    assumed, and any deficient sector is reported.
    """
    if len(records) != len(configs):
        raise ValueError(f"{len(records)} records for {len(configs)} configurations")
    meas_modes = configs[0].modes
    basis = truncated_basis(max_total, meas_modes)
    cleaned = []
    for record in records:
        q = np.asarray(record, dtype=float)
        if q.shape != (len(basis),):
            raise ValueError(f"records must have {len(basis)} outcomes, got {q.shape}")
        if model is not None:
            q = invert_detector_response(q, basis, model)
        cleaned.append(q)

    present: list[int] = []
    masses: dict[int, list[float]] = {}
    conditionals: dict[int, list[np.ndarray]] = {}
    totals = [q.sum() for q in cleaned]
    if min(totals) <= 0.0:
        raise ValueError("a record carries no statistical weight")
    for total in range(max_total + 1):
        sector = basis.sector_slice(total)
        sector_masses = [
            float(q[sector].sum() / grand) for q, grand in zip(cleaned, totals)
        ]
        if np.mean(sector_masses) < mass_floor:
            continue
        present.append(total)
        masses[total] = sector_masses
        conditionals[total] = [
            postselect_total(q, basis, total)[0] for q in cleaned
        ]

    deficits: list[tuple[int, int, int]] = []
    superops = {}
    for total in present:
        if total == 0:
            continue
        superop = build_superoperator(configs, total, modes)
        required = fock_dimension(total, modes) ** 2
        rank = gramian_rank(superop).rank
        if rank < required:
            deficits.append((total, rank, required))
        superops[total] = superop
    if deficits:
        raise IncompleteSectorError(deficits)

    weights = {total: float(np.mean(masses[total])) for total in present}
    states: dict[int, ReconstructionResult] = {}
    for total in present:
        if total == 0:
            vacuum = enumerate_fock_basis(0, modes)
            states[0] = ReconstructionResult(
                raw=np.ones((1, 1), dtype=complex),
                projected=DensityMatrix(vacuum, np.ones((1, 1), dtype=complex)),
                residual=0.0,
                rank=1,
            )
            continue
        sector_records = [
            MeasurementRecord.exact(j, conditional)
            for j, conditional in enumerate(conditionals[total])
        ]
        states[total] = reconstruct(superops[total], sector_records)
    return MixtureEstimate(weights=weights, states=states, sector_masses=masses)
