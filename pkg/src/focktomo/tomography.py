"""Measurement superoperator assembly, completeness tests, and reconstruction.

The probability of counting the pattern nu' after configuration g is
p = <nu'| U(g)^dag rho_padded U(g) |nu'>.  Collecting these rows over all
outcomes and configurations gives a rectangular linear map L from the D^2
density-matrix entries to outcome probabilities; tomography is possible
exactly when L has numerical rank D^2, and the state is then recovered as the
minimum-norm least-squares solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .combinatorics import (
    FockBasis,
    enumerate_fock_basis,
    fock_dimension,
    min_configs_extended,
    min_modes_lower_bound,
)
from .linear_optics import (
    InterferometerConfig,
    haar_random_unitary,
    lift_unitary,
    pad_with_vacuum,
    random_mesh_unitary,
)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_TOL = 1e-10
PROBABILITY_SUM_TOL = 1e-10
NEGATIVE_PROBABILITY_TOL = 1e-12

ConfigGenerator = Callable[[int, int], InterferometerConfig]

GENERATORS: dict[str, ConfigGenerator] = {
    "haar": haar_random_unitary,
    "mesh": random_mesh_unitary,
}


class IncompleteConfigurationsError(ValueError):
    """The assembled superoperator does not determine the state uniquely."""

    def __init__(self, rank: int, required: int):
        self.rank = rank
        self.required = required
        self.deficit = required - rank
        super().__init__(
            f"configurations are tomographically incomplete: rank {rank} < "
            f"{required} (deficit {self.deficit})"
        )


@dataclass
class DensityMatrix:
    """Hermitian, trace-one, positive-semidefinite operator on a Fock basis."""

    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self) -> None:
        rho = np.array(self.matrix, dtype=complex)
        d = self.basis.dimension
        if rho.shape != (d, d):
            raise ValueError(f"matrix shape {rho.shape} does not match dimension {d}")
        herm = np.abs(rho - rho.conj().T).max()
        if herm > HERMITICITY_TOL:
            raise ValueError(f"matrix is not Hermitian (residual {herm:.3e})")
        tr = rho.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace is {tr}, not 1")
        lowest = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0).min()
        if lowest < -EIGENVALUE_TOL:
            raise ValueError(f"matrix has negative eigenvalue {lowest:.3e}")
        rho.flags.writeable = False
        self.matrix = rho

    @property
    def photons(self) -> int:
        return self.basis.photons

    @property
    def modes(self) -> int:
        return self.basis.modes

    def to_json_dict(self) -> dict:
        return {
            "photons": self.basis.photons,
            "modes": self.basis.modes,
            "matrix": [
                [[float(z.real), float(z.imag)] for z in row] for row in self.matrix
            ],
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> "DensityMatrix":
        basis = enumerate_fock_basis(int(record["photons"]), int(record["modes"]))
        rho = np.array(
            [[complex(re, im) for re, im in row] for row in record["matrix"]],
            dtype=complex,
        )
        return cls(basis, rho)


def pure_state(basis: FockBasis, amplitudes: Sequence[complex]) -> DensityMatrix:
    """Density matrix |psi><psi| from a (normalized) amplitude vector."""
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.shape != (basis.dimension,):
        raise ValueError("amplitude vector does not match the basis dimension")
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("amplitude vector must be nonzero")
    psi = psi / norm
    return DensityMatrix(basis, np.outer(psi, psi.conj()))


def fock_projector(basis: FockBasis, state: Sequence[int]) -> DensityMatrix:
    """Projector onto a single Fock state."""
    rho = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    i = basis.index_of(state)
    rho[i, i] = 1.0
    return DensityMatrix(basis, rho)


def maximally_mixed(basis: FockBasis) -> DensityMatrix:
    return DensityMatrix(
        basis, np.eye(basis.dimension, dtype=complex) / basis.dimension
    )


def random_density_matrix(
    basis: FockBasis, seed: int, rank: int | None = None
) -> DensityMatrix:
    """Random full-rank (or fixed-rank) state from a Ginibre ensemble."""
    d = basis.dimension
    r = d if rank is None else rank
    if not 1 <= r <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {r}")
    rng = np.random.default_rng(seed)
    gin = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = gin @ gin.conj().T
    rho /= rho.trace().real
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(basis, rho)


def trace_distance(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray) -> float:
    """Half the trace norm of the difference of two operators."""
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a, dtype=complex)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b, dtype=complex)
    diff = ma - mb
    if np.abs(diff - diff.conj().T).max() < 1e-10:
        values = np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2.0))
    else:
        values = np.linalg.svd(diff, compute_uv=False)
    return 0.5 * float(values.sum())


@dataclass
class MeasurementRecord:
    """Outcome statistics for one configuration: exact probabilities or counts."""

    config_index: int
    probabilities: np.ndarray | None = None
    counts: np.ndarray | None = None
    shots: int | None = None

    def __post_init__(self) -> None:
        if (self.probabilities is None) == (self.counts is None):
            raise ValueError("provide exactly one of probabilities or counts")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float)
            if p.min() < -NEGATIVE_PROBABILITY_TOL:
                raise ValueError(f"negative probability {p.min():.3e}")
            if p.sum() > 1.0 + PROBABILITY_SUM_TOL:
                raise ValueError(f"probabilities sum to {p.sum()} > 1")
            self.probabilities = p
        else:
            c = np.asarray(self.counts)
            if np.any(c < 0) or not np.issubdtype(c.dtype, np.integer):
                raise ValueError("counts must be non-negative integers")
            if self.shots is None:
                self.shots = int(c.sum())
            elif int(c.sum()) != self.shots:
                raise ValueError(
                    f"counts sum to {int(c.sum())}, not the declared {self.shots} shots"
                )
            self.counts = c

    @classmethod
    def exact(cls, config_index: int, probabilities: np.ndarray) -> "MeasurementRecord":
        return cls(config_index=config_index, probabilities=probabilities)

    @classmethod
    def sampled(
        cls, config_index: int, counts: np.ndarray, shots: int | None = None
    ) -> "MeasurementRecord":
        return cls(config_index=config_index, counts=counts, shots=shots)

    def frequencies(self) -> np.ndarray:
        if self.probabilities is not None:
            return self.probabilities
        if self.shots == 0:
            return np.zeros(len(self.counts), dtype=float)
        return self.counts / self.shots


def _padded_row_indices(basis_in: FockBasis, basis_out: FockBasis) -> np.ndarray:
    return np.array(
        [
            basis_out.index_of(pad_with_vacuum(state, basis_out.modes))
            for state in basis_in
        ],
        dtype=np.intp,
    )


def _restricted_lift(config: InterferometerConfig, photons: int, modes: int) -> np.ndarray:
    """Rows of the lifted unitary that start from the M-mode (vacuum-padded) sector."""
    lifted = lift_unitary(config, photons)
    basis_in = enumerate_fock_basis(photons, modes)
    rows = _padded_row_indices(basis_in, lifted.basis)
    return lifted.matrix[rows, :]  # (D, D')


def outcome_probabilities(rho: DensityMatrix, config: InterferometerConfig) -> np.ndarray:
    """Photon-counting distribution over the M'-mode outcome basis.

    Entries may carry roundoff at the -1e-16 level; they are returned as
    computed rather than clipped, so callers can see (and report) them.  The
    vector is checked to sum to 1 within ``PROBABILITY_SUM_TOL``.
    """
    if config.modes < rho.modes:
        raise ValueError(
            f"configuration has {config.modes} modes, state needs at least {rho.modes}"
        )
    v = _restricted_lift(config, rho.photons, rho.modes)  # (D, D')
    p = np.einsum("av,ab,bv->v", v.conj(), rho.matrix, v).real
    total = p.sum()
    if abs(total - 1.0) > PROBABILITY_SUM_TOL:
        raise RuntimeError(f"outcome probabilities sum to {total}, not 1")
    if p.min() < -NEGATIVE_PROBABILITY_TOL or p.max() > 1.0 + NEGATIVE_PROBABILITY_TOL:
        raise RuntimeError(
            f"outcome probabilities leave [0, 1]: min {p.min():.3e}, max {p.max():.3e}"
        )
    return p


@dataclass
class Superoperator:
    """Linear map from density-matrix entries to stacked outcome probabilities.

    Row (config j, outcome nu') holds conj(<alpha|U_j|nu'>) <beta|U_j|nu'> at
    column (alpha, beta); rows are config-major in the given order, outcomes
    in canonical Fock order, and columns row-major over (alpha, beta).
    """

    photons: int
    modes: int
    meas_modes: int
    configs: tuple[InterferometerConfig, ...]
    matrix: np.ndarray
    basis_in: FockBasis = field(init=False)
    basis_out: FockBasis = field(init=False)

    def __post_init__(self) -> None:
        self.basis_in = enumerate_fock_basis(self.photons, self.modes)
        self.basis_out = enumerate_fock_basis(self.photons, self.meas_modes)
        expected = (
            len(self.configs) * self.basis_out.dimension,
            self.basis_in.dimension**2,
        )
        if self.matrix.shape != expected:
            raise ValueError(f"matrix shape {self.matrix.shape}, expected {expected}")

    @property
    def n_configs(self) -> int:
        return len(self.configs)

    def row_slice(self, config_index: int) -> slice:
        d_out = self.basis_out.dimension
        return slice(config_index * d_out, (config_index + 1) * d_out)

    def column_index(self, alpha: Sequence[int], beta: Sequence[int]) -> int:
        d = self.basis_in.dimension
        return self.basis_in.index_of(alpha) * d + self.basis_in.index_of(beta)

    def apply(self, rho: np.ndarray | DensityMatrix) -> np.ndarray:
        mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        return (self.matrix @ mat.reshape(-1)).real


def _superoperator_block(
    config: InterferometerConfig, photons: int, modes: int
) -> np.ndarray:
    v = _restricted_lift(config, photons, modes)  # (D, D')
    d = v.shape[0]
    block = np.einsum("av,bv->vab", v.conj(), v)  # (D', D, D)
    return block.reshape(v.shape[1], d * d)


def build_superoperator(
    configs: Sequence[InterferometerConfig], photons: int, modes: int
) -> Superoperator:
    """Stack the measurement map for the given configurations."""
    if not configs:
        raise ValueError("at least one configuration is required")
    meas_modes = configs[0].modes
    if any(c.modes != meas_modes for c in configs):
        raise ValueError("all configurations must act on the same number of modes")
    if meas_modes < modes:
        raise ValueError(
            f"configurations have {meas_modes} modes, state needs at least {modes}"
        )
    blocks = [_superoperator_block(c, photons, modes) for c in configs]
    return Superoperator(
        photons=photons,
        modes=modes,
        meas_modes=meas_modes,
        configs=tuple(configs),
        matrix=np.vstack(blocks),
    )


@dataclass(frozen=True)
class RankReport:
    """Numerical rank of the measurement map and the singular values behind it."""

    rank: int
    threshold: float
    sigma_max: float
    smallest_kept: float | None
    largest_dropped: float | None
    singular_values: np.ndarray

    def summary(self) -> str:
        kept = "-" if self.smallest_kept is None else f"{self.smallest_kept:.3e}"
        dropped = "-" if self.largest_dropped is None else f"{self.largest_dropped:.3e}"
        return (
            f"rank {self.rank} (sigma_max {self.sigma_max:.3e}, smallest kept {kept}, "
            f"largest dropped {dropped}, threshold {self.threshold:.3e})"
        )


def gramian_rank(
    superop: Superoperator | np.ndarray, rel_threshold: float | None = None
) -> RankReport:
    """Numerical rank of L via its singular values.

    The default threshold is max(rows, cols) * machine-eps * sigma_max, the
    standard numerical-rank convention; ``rel_threshold`` (times sigma_max)
    overrides it.
    """
    matrix = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop)
    if matrix.size == 0:
        raise ValueError("empty superoperator")
    sigma = np.linalg.svd(matrix, compute_uv=False)
    sigma_max = float(sigma[0])
    if rel_threshold is None:
        threshold = max(matrix.shape) * np.finfo(float).eps * sigma_max
    else:
        threshold = rel_threshold * sigma_max
    kept = sigma > threshold
    rank = int(kept.sum())
    return RankReport(
        rank=rank,
        threshold=threshold,
        sigma_max=sigma_max,
        smallest_kept=float(sigma[rank - 1]) if rank > 0 else None,
        largest_dropped=float(sigma[rank]) if rank < len(sigma) else None,
        singular_values=sigma,
    )


def is_complete(
    configs: Sequence[InterferometerConfig],
    photons: int,
    modes: int,
    rel_threshold: float | None = None,
) -> bool:
    """True iff the configurations pin down every density-matrix entry."""
    superop = build_superoperator(configs, photons, modes)
    required = fock_dimension(photons, modes) ** 2
    return gramian_rank(superop, rel_threshold).rank == required


def _assemble_probability_vector(
    superop: Superoperator, records: Sequence[MeasurementRecord] | np.ndarray
) -> np.ndarray:
    d_out = superop.basis_out.dimension
    if isinstance(records, np.ndarray):
        flat = np.asarray(records, dtype=float).reshape(-1)
        if flat.shape != (superop.matrix.shape[0],):
            raise ValueError(
                f"probability vector has length {flat.shape[0]}, expected "
                f"{superop.matrix.shape[0]}"
            )
        return flat
    if len(records) != superop.n_configs:
        raise ValueError(
            f"{len(records)} records for {superop.n_configs} configurations"
        )
    flat = np.empty(superop.matrix.shape[0], dtype=float)
    for slot, record in enumerate(records):
        if record.config_index != slot:
            raise ValueError(
                f"record {slot} is labelled with configuration {record.config_index}; "
                "records must follow the superoperator's configuration order"
            )
        freq = record.frequencies()
        if freq.shape != (d_out,):
            raise ValueError(
                f"record {slot} has {freq.shape[0]} outcomes, expected {d_out}"
            )
        flat[superop.row_slice(slot)] = freq
    return flat


@dataclass
class ReconstructionResult:
    """Raw least-squares estimate plus its physical (PSD) projection.

    ``raw`` is the unconstrained minimum-norm solution; ``projected`` is the
    Hermitized, eigenvalue-clipped, trace-renormalized state.  The raw
    estimate is always reported because the projection is a labelled
    convenience, never a silent substitute.
    """

    raw: np.ndarray
    projected: DensityMatrix
    residual: float
    rank: int


def project_to_state(basis: FockBasis, matrix: np.ndarray) -> DensityMatrix:
    """Hermitize, clip negative eigenvalues, and renormalize the trace."""
    herm = (matrix + matrix.conj().T) / 2.0
    values, vectors = np.linalg.eigh(herm)
    clipped = np.clip(values, 0.0, None)
    total = clipped.sum()
    if total <= 0.0:
        raise RuntimeError("projection collapsed to the zero operator")
    rho = (vectors * (clipped / total)) @ vectors.conj().T
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(basis, rho)


def reconstruct(
    superop: Superoperator,
    records: Sequence[MeasurementRecord] | np.ndarray,
) -> ReconstructionResult:
    """Recover the state from outcome statistics by SVD least squares.

    At full rank this equals the normal-equation solution
    (L^dag L)^{-1} L^dag p while conditioning better; an incomplete
    superoperator raises ``IncompleteConfigurationsError`` with the deficit.
    """
    p = _assemble_probability_vector(superop, records)
    required = superop.basis_in.dimension ** 2
    solution, _, rank, _ = np.linalg.lstsq(superop.matrix, p.astype(complex), rcond=None)
    if rank < required:
        raise IncompleteConfigurationsError(rank=int(rank), required=required)
    d = superop.basis_in.dimension
    raw = solution.reshape(d, d)
    residual = float(np.linalg.norm(superop.matrix @ solution - p))
    projected = project_to_state(superop.basis_in, raw)
    return ReconstructionResult(
        raw=raw, projected=projected, residual=residual, rank=int(rank)
    )


def sample_shots(p: np.ndarray, shots: int, seed: int) -> np.ndarray:
    """Multinomial counts for a probability vector, deterministic per seed.

    Entries more negative than -1e-12 are rejected; tiny negative roundoff is
    clipped to zero (and the vector renormalized) before drawing.
    """
    p = np.asarray(p, dtype=float)
    if shots < 0:
        raise ValueError(f"shot count must be non-negative, got {shots}")
    if p.min() < -NEGATIVE_PROBABILITY_TOL:
        raise ValueError(f"probability entry {p.min():.3e} is negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    if shots == 0:
        return np.zeros(len(p), dtype=np.int64)
    clipped = np.clip(p, 0.0, None)
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, clipped / clipped.sum())


def simulate_records(
    rho: DensityMatrix,
    configs: Sequence[InterferometerConfig],
    shots: int = 0,
    seed: int = 0,
) -> list[MeasurementRecord]:
    """Exact (shots=0) or finite-shot measurement records for each configuration."""
    records = []
    rng = np.random.default_rng(seed)
    for j, config in enumerate(configs):
        p = outcome_probabilities(rho, config)
        if shots == 0:
            records.append(MeasurementRecord.exact(j, p))
        else:
            counts = sample_shots(p, shots, int(rng.integers(2**63)))
            records.append(MeasurementRecord.sampled(j, counts, shots))
    return records


def _resolve_generator(generator: str | ConfigGenerator) -> ConfigGenerator:
    if callable(generator):
        return generator
    try:
        return GENERATORS[generator]
    except KeyError:
        raise ValueError(
            f"unknown generator {generator!r}; choose from {sorted(GENERATORS)}"
        ) from None


@dataclass
class MinConfigSearch:
    """Result of growing a configuration set until the measurement map fills up."""

    photons: int
    modes: int
    meas_modes: int
    generator: str
    seed: int
    found: int | None
    rank_trace: list[tuple[int, int]]
    required_rank: int
    lower_bound: int
    configs: list[InterferometerConfig]

    @property
    def best_rank(self) -> int:
        return max(rank for _, rank in self.rank_trace)


def find_min_configs(
    photons: int,
    modes: int,
    meas_modes: int | None = None,
    generator: str | ConfigGenerator = "haar",
    seed: int = 0,
    r_max: int | None = None,
    rel_threshold: float | None = None,
) -> MinConfigSearch:
    """Smallest number of freshly drawn configurations reaching full rank.

    Appends one independent configuration at a time and records the rank after
    each; stops at rank D^2 or after ``r_max`` configurations (reporting the
    best rank achieved).  The observed minimum is checked against the counting
    lower bound on every run.
    """
    if meas_modes is None:
        meas_modes = modes
    gen = _resolve_generator(generator)
    bound = min_configs_extended(photons, modes, meas_modes)
    if r_max is None:
        r_max = bound + 8
    required = fock_dimension(photons, modes) ** 2

    rng = np.random.default_rng(seed)
    configs: list[InterferometerConfig] = []
    blocks: list[np.ndarray] = []
    trace: list[tuple[int, int]] = []
    found: int | None = None
    previous_rank = 0
    while len(configs) < r_max:
        config = gen(meas_modes, int(rng.integers(2**63)))
        configs.append(config)
        blocks.append(_superoperator_block(config, photons, modes))
        report = gramian_rank(np.vstack(blocks), rel_threshold)
        if report.rank < previous_rank:
            raise RuntimeError("rank decreased while appending configurations")
        previous_rank = report.rank
        trace.append((len(configs), report.rank))
        if report.rank == required:
            found = len(configs)
            break
    if found is not None and found < bound:
        raise RuntimeError(
            f"observed minimal R={found} undercuts the counting bound {bound} "
            f"for N={photons}, M={modes}, M'={meas_modes}"
        )
    return MinConfigSearch(
        photons=photons,
        modes=modes,
        meas_modes=meas_modes,
        generator=generator if isinstance(generator, str) else "custom",
        seed=seed,
        found=found,
        rank_trace=trace,
        required_rank=required,
        lower_bound=bound,
        configs=configs,
    )


@dataclass
class MinModesSearch:
    """Result of scanning M' upward until a single configuration is complete."""

    photons: int
    modes: int
    generator: str
    seed: int
    found: int | None
    lower_bound: int
    rank_by_meas_modes: list[tuple[int, int, int]]  # (M', rank, required)


def find_min_modes(
    photons: int,
    modes: int,
    generator: str | ConfigGenerator = "haar",
    seed: int = 0,
    meas_modes_max: int | None = None,
    rel_threshold: float | None = None,
) -> MinModesSearch:
    """Smallest M' for which one generated configuration is already complete."""
    gen = _resolve_generator(generator)
    bound = min_modes_lower_bound(photons, modes)
    if meas_modes_max is None:
        meas_modes_max = bound + 6
    required = fock_dimension(photons, modes) ** 2

    rng = np.random.default_rng(seed)
    scan: list[tuple[int, int, int]] = []
    found: int | None = None
    for meas_modes in range(modes, meas_modes_max + 1):
        config = gen(meas_modes, int(rng.integers(2**63)))
        block = _superoperator_block(config, photons, modes)
        rank = gramian_rank(block, rel_threshold).rank
        scan.append((meas_modes, rank, required))
        if rank == required:
            found = meas_modes
            break
    if found is not None and found < bound:
        raise RuntimeError(
            f"observed minimal M'={found} undercuts the counting bound {bound} "
            f"for N={photons}, M={modes}"
        )
    return MinModesSearch(
        photons=photons,
        modes=modes,
        generator=generator if isinstance(generator, str) else "custom",
        seed=seed,
        found=found,
        lower_bound=bound,
        rank_by_meas_modes=scan,
    )
