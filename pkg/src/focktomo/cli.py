"""Command-line surface for the tomography experiments.

Subcommands emit CSV tables (with a schema tag line) and JSON documents
(complex numbers as [re, im] pairs).  Every run is deterministic given its
serialized spec, which is embedded in the JSON output and can be replayed
with ``run-spec``.

Exit codes: 0 on success, 2 for validation problems (bad arguments or
files), 3 for numerical failures (incomplete configurations, failed
self-checks).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import selftest
from .analytic_m2 import SingularHarmonicError, newton_young_configs
from .combinatorics import (
    design_size_bounds,
    enumerate_fock_basis,
    fock_dimension,
    min_configs,
    min_configs_extended,
    min_modes_lower_bound,
    single_config_feasible,
)
from .imperfections import (
    DetectorModel,
    IncompleteSectorError,
    detector_response,
    embed_sector,
    invert_detector_response,
    postselect_total,
    truncated_basis,
)
from .linear_optics import haar_random_unitary, random_mesh_unitary
from .tomography import (
    DensityMatrix,
    IncompleteConfigurationsError,
    MeasurementRecord,
    build_superoperator,
    find_min_configs,
    find_min_modes,
    gramian_rank,
    outcome_probabilities,
    random_density_matrix,
    reconstruct,
    sample_shots,
    trace_distance,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    IncompleteConfigurationsError,
    IncompleteSectorError,
    SingularHarmonicError,
    RuntimeError,
    np.linalg.LinAlgError,
)


@dataclass
class ExperimentSpec:
    """Everything needed to replay a run bit-for-bit (exact mode)."""

    command: str
    photons: str = ""
    modes: str = ""
    meas_modes: str | None = None
    generator: str = "haar"
    seed: int = 0
    shots: tuple[int, ...] = (0,)
    rank_tolerance: float | None = None
    efficiency: float | None = None
    invert_detector: bool = False
    state_path: str | None = None
    configs: int | None = None
    r_max: int | None = None
    meas_modes_max: int | None = None
    out_csv: str | None = None
    out_json: str | None = None
    summary_csv: str | None = None

    def to_json_dict(self) -> dict:
        record = dataclasses.asdict(self)
        record["shots"] = list(self.shots)
        return record

    @classmethod
    def from_json_dict(cls, record: dict) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(record) - known
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        record = dict(record)
        if "shots" in record:
            record["shots"] = tuple(int(s) for s in record["shots"])
        return cls(**record)


def _parse_range(text: str, name: str, minimum: int) -> range:
    try:
        if ":" in text:
            lo, hi = (int(part) for part in text.split(":", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise ValueError(f"{name} must be an integer or lo:hi range, got {text!r}")
    if lo > hi:
        raise ValueError(f"{name} range {text!r} is empty")
    if lo < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {lo}")
    return range(lo, hi + 1)


def _parse_int(text: str, name: str, minimum: int) -> int:
    values = _parse_range(text, name, minimum)
    if len(values) != 1:
        raise ValueError(f"{name} must be a single integer here, got {text!r}")
    return values[0]


def _write_csv(path: str | None, schema: str, header: list[str], rows: list[list]) -> None:
    handle = open(path, "w", newline="") if path else sys.stdout
    try:
        handle.write(f"# schema: {schema}\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path:
            handle.close()


def _write_json(path: str | None, document: dict) -> None:
    text = json.dumps(document, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _complex_matrix(matrix: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix)]


# One stable row shape shared by all experiment commands.
SUMMARY_SCHEMA = "focktomo.experiment.v1"
SUMMARY_HEADER = [
    "photons",
    "modes",
    "meas_modes",
    "generator",
    "seed",
    "configs",
    "rank",
    "complete",
    "residual",
]


def _write_summary(path: str | None, rows: list[list]) -> None:
    if path:
        _write_csv(path, SUMMARY_SCHEMA, SUMMARY_HEADER, rows)


def cmd_bounds(spec: ExperimentSpec) -> int:
    photon_range = _parse_range(spec.photons, "photons", 1)
    mode_range = _parse_range(spec.modes, "modes", 2)
    meas_range = _parse_range(spec.meas_modes or spec.modes, "meas-modes", 2)

    header = [
        "photons",
        "modes",
        "meas_modes",
        "fock_dimension",
        "min_configs",
        "min_configs_extended",
        "single_config_feasible",
        "min_modes_lower_bound",
        "design_lower",
        "design_upper",
        "design_dimension_bound",
    ]
    rows = []
    design_cache: dict[tuple[int, int], tuple[int, int, int]] = {}
    for photons in photon_range:
        for modes in mode_range:
            if (modes, photons) not in design_cache:
                design_cache[(modes, photons)] = design_size_bounds(modes, photons)
            lower, upper, dim_bound = design_cache[(modes, photons)]
            for meas_modes in meas_range:
                if meas_modes < modes:
                    continue
                rows.append(
                    [
                        photons,
                        modes,
                        meas_modes,
                        fock_dimension(photons, modes),
                        min_configs(photons, modes),
                        min_configs_extended(photons, modes, meas_modes),
                        int(single_config_feasible(photons, modes, meas_modes)),
                        min_modes_lower_bound(photons, modes),
                        lower,
                        upper,
                        dim_bound,
                    ]
                )
    if not rows:
        raise ValueError("requested ranges produce no (N, M, M') combinations")
    _write_csv(spec.out_csv, "focktomo.bounds.v1", header, rows)
    if spec.out_json:
        _write_json(
            spec.out_json,
            {
                "schema": "focktomo.bounds.v1",
                "spec": spec.to_json_dict(),
                "header": header,
                "rows": rows,
            },
        )
    return EXIT_OK


def cmd_rank_scan(spec: ExperimentSpec) -> int:
    photons = _parse_int(spec.photons, "photons", 1)
    modes = _parse_int(spec.modes, "modes", 2)
    meas_modes = (
        _parse_int(spec.meas_modes, "meas-modes", modes) if spec.meas_modes else modes
    )
    search = find_min_configs(
        photons,
        modes,
        meas_modes,
        generator=spec.generator,
        seed=spec.seed,
        r_max=spec.r_max,
        rel_threshold=spec.rank_tolerance,
    )
    header = ["configs", "rank", "required_rank"]
    rows = [[r, rank, search.required_rank] for r, rank in search.rank_trace]
    _write_csv(spec.out_csv, "focktomo.rank_scan.v1", header, rows)
    _write_summary(
        spec.summary_csv,
        [
            [
                photons,
                modes,
                meas_modes,
                spec.generator,
                spec.seed,
                len(search.configs),
                search.best_rank,
                int(search.found is not None),
                "",
            ]
        ],
    )

    bound = search.lower_bound
    if search.found is None:
        print(
            f"no complete set within {len(search.configs)} configurations; "
            f"best rank {search.best_rank} of {search.required_rank}"
        )
    else:
        comparison = "matches" if search.found == bound else "exceeds"
        print(
            f"minimal R = {search.found} ({spec.generator}); "
            f"counting bound {bound}: observed {comparison} the bound"
        )
    if spec.out_json:
        _write_json(
            spec.out_json,
            {
                "schema": "focktomo.rank_scan.v1",
                "spec": spec.to_json_dict(),
                "found": search.found,
                "lower_bound": bound,
                "required_rank": search.required_rank,
                "rank_trace": search.rank_trace,
                "provenance": [c.provenance.to_json_dict() for c in search.configs],
            },
        )
    if search.found is None:
        raise RuntimeError(
            f"rank {search.best_rank} < {search.required_rank} after "
            f"{len(search.configs)} configurations"
        )
    return EXIT_OK


def cmd_min_modes(spec: ExperimentSpec) -> int:
    photon_range = _parse_range(spec.photons, "photons", 1)
    mode_range = _parse_range(spec.modes, "modes", 2)
    header = ["photons", "modes", "bound", "numeric"]
    rows = []
    results = []
    summary_rows = []
    for modes in mode_range:
        for photons in photon_range:
            search = find_min_modes(
                photons,
                modes,
                generator=spec.generator,
                seed=spec.seed,
                meas_modes_max=spec.meas_modes_max,
                rel_threshold=spec.rank_tolerance,
            )
            numeric = search.found if search.found is not None else ""
            rows.append([photons, modes, search.lower_bound, numeric])
            results.append(search)
            last_meas, last_rank, _ = search.rank_by_meas_modes[-1]
            summary_rows.append(
                [
                    photons,
                    modes,
                    last_meas,
                    spec.generator,
                    spec.seed,
                    1,
                    last_rank,
                    int(search.found is not None),
                    "",
                ]
            )
            if search.found is None:
                print(
                    f"N={photons} M={modes}: cap "
                    f"{search.rank_by_meas_modes[-1][0]} exceeded "
                    f"(bound {search.lower_bound})"
                )
    _write_csv(spec.out_csv, "focktomo.min_modes.v1", header, rows)
    _write_summary(spec.summary_csv, summary_rows)
    if spec.out_json:
        _write_json(
            spec.out_json,
            {
                "schema": "focktomo.min_modes.v1",
                "spec": spec.to_json_dict(),
                "header": header,
                "rows": rows,
                "scans": [
                    {
                        "photons": s.photons,
                        "modes": s.modes,
                        "bound": s.lower_bound,
                        "numeric": s.found,
                        "ranks": s.rank_by_meas_modes,
                    }
                    for s in results
                ],
            },
        )
    return EXIT_OK


def _build_configs(spec: ExperimentSpec, photons: int, modes: int, meas_modes: int):
    if spec.generator == "newton-young":
        if modes != 2 or meas_modes != 2:
            raise ValueError("the newton-young generator requires M = M' = 2")
        protocol = newton_young_configs(photons)
        return protocol.configs
    generators = {"haar": haar_random_unitary, "mesh": random_mesh_unitary}
    try:
        generator = generators[spec.generator]
    except KeyError:
        raise ValueError(f"unknown generator {spec.generator!r}") from None
    count = spec.configs or min_configs_extended(photons, modes, meas_modes)
    rng = np.random.default_rng(spec.seed)
    return [generator(meas_modes, int(rng.integers(2**63))) for _ in range(count)]


def _simulate_reconstruction(
    spec: ExperimentSpec,
    truth: DensityMatrix,
    superop,
    shots: int,
    seed: int,
):
    """One reconstruction pass; returns (result, sector_masses or None)."""
    photons = truth.photons
    configs = superop.configs
    meas_modes = superop.meas_modes
    if spec.efficiency is not None:
        model = DetectorModel.uniform(spec.efficiency, meas_modes)
        basis = truncated_basis(photons, meas_modes)
        masses = []
        conditionals = []
        for j, config in enumerate(configs):
            p = outcome_probabilities(truth, config)
            detected = detector_response(embed_sector(p, photons, basis), basis, model)
            if shots > 0:
                counts = sample_shots(detected, shots, seed + j)
                detected = counts / shots
            if spec.invert_detector:
                detected = invert_detector_response(detected, basis, model)
            conditional, mass = postselect_total(detected, basis, photons)
            masses.append(mass)
            conditionals.append(conditional)
        # Noisy inversion can leave slightly negative entries; feed them to the
        # least-squares solver as-is rather than clipping.
        return reconstruct(superop, np.concatenate(conditionals)), masses
    records = []
    for j, config in enumerate(configs):
        p = outcome_probabilities(truth, config)
        if shots > 0:
            counts = sample_shots(p, shots, seed + j)
            records.append(MeasurementRecord.sampled(j, counts, shots))
        else:
            records.append(MeasurementRecord.exact(j, p))
    return reconstruct(superop, records), None


def cmd_reconstruct(spec: ExperimentSpec) -> int:
    if spec.state_path is None:
        raise ValueError("reconstruct requires --state FILE")
    record = json.loads(Path(spec.state_path).read_text())
    truth = DensityMatrix.from_json_dict(record)
    photons, modes = truth.photons, truth.modes
    meas_modes = (
        _parse_int(spec.meas_modes, "meas-modes", modes) if spec.meas_modes else modes
    )
    configs = _build_configs(spec, photons, modes, meas_modes)

    superop = build_superoperator(configs, photons, modes)
    report = gramian_rank(superop, spec.rank_tolerance)
    required = fock_dimension(photons, modes) ** 2
    if report.rank < required:
        raise IncompleteConfigurationsError(report.rank, required)

    sweep = []
    final = None
    for shots in spec.shots:
        result, masses = _simulate_reconstruction(
            spec, truth, superop, shots, spec.seed
        )
        distance = trace_distance(result.projected, truth)
        entry = {
            "shots": shots,
            "residual": result.residual,
            "trace_distance": distance,
        }
        if masses is not None:
            entry["sector_masses"] = masses
        sweep.append(entry)
        final = result
        label = "exact" if shots == 0 else f"{shots} shots"
        print(
            f"{label}: residual {result.residual:.3e}, "
            f"trace distance to truth {distance:.3e}"
        )

    _write_summary(
        spec.summary_csv,
        [
            [
                photons,
                modes,
                meas_modes,
                spec.generator,
                spec.seed,
                len(configs),
                report.rank,
                int(report.rank == required),
                entry["residual"],
            ]
            for entry in sweep
        ],
    )
    document = {
        "schema": "focktomo.reconstruct.v1",
        "spec": spec.to_json_dict(),
        "rank": report.rank,
        "required_rank": required,
        "configs": [c.to_json_dict() for c in configs],
        "sweep": sweep,
        "raw_estimate": _complex_matrix(final.raw),
        "projected_estimate": _complex_matrix(final.projected.matrix),
    }
    if spec.out_json:
        _write_json(spec.out_json, document)
    if spec.out_csv:
        _write_csv(
            spec.out_csv,
            "focktomo.reconstruct.v1",
            ["shots", "residual", "trace_distance"],
            [[e["shots"], e["residual"], e["trace_distance"]] for e in sweep],
        )
    return EXIT_OK


def cmd_make_state(spec: ExperimentSpec) -> int:
    photons = _parse_int(spec.photons, "photons", 0)
    modes = _parse_int(spec.modes, "modes", 1)
    basis = enumerate_fock_basis(photons, modes)
    state = random_density_matrix(basis, spec.seed)
    _write_json(spec.out_json, state.to_json_dict())
    return EXIT_OK


def cmd_selftest(_: ExperimentSpec) -> int:
    failures = selftest.run()
    if failures:
        raise RuntimeError(f"{len(failures)} self-check(s) failed: {', '.join(failures)}")
    print(f"all {len(selftest.CHECKS)} self-checks passed")
    return EXIT_OK


def cmd_run_spec(path: str) -> int:
    record = json.loads(Path(path).read_text())
    if "spec" in record:
        record = record["spec"]
    spec = ExperimentSpec.from_json_dict(record)
    try:
        handler = COMMANDS[spec.command]
    except KeyError:
        raise ValueError(f"spec names unknown command {spec.command!r}") from None
    return handler(spec)


COMMANDS = {
    "bounds": cmd_bounds,
    "rank-scan": cmd_rank_scan,
    "min-modes": cmd_min_modes,
    "reconstruct": cmd_reconstruct,
    "make-state": cmd_make_state,
    "selftest": cmd_selftest,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--out", dest="out_csv", help="CSV output path")
    parser.add_argument("--json", dest="out_json", help="JSON output path")
    parser.add_argument(
        "--summary",
        dest="summary_csv",
        help="append-style experiment summary CSV (stable column set)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focktomo",
        description="Photon-counting tomography experiments with linear optics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="configuration-count and mode-count bound tables")
    p.add_argument("--photons", required=True, help="N or lo:hi")
    p.add_argument("--modes", required=True, help="M or lo:hi")
    p.add_argument("--meas-modes", help="M' or lo:hi (default: same as modes)")
    _add_common(p)

    p = sub.add_parser("rank-scan", help="grow a configuration set until complete")
    p.add_argument("--photons", required=True)
    p.add_argument("--modes", required=True)
    p.add_argument("--meas-modes")
    p.add_argument("--generator", default="haar", choices=["haar", "mesh"])
    p.add_argument("--r-max", type=int, dest="r_max")
    p.add_argument("--tolerance-rank", type=float, dest="rank_tolerance")
    _add_common(p)

    p = sub.add_parser("min-modes", help="smallest M' with a complete single setting")
    p.add_argument("--photons", required=True, help="N or lo:hi")
    p.add_argument("--modes", required=True, help="M or lo:hi")
    p.add_argument("--generator", default="haar", choices=["haar", "mesh"])
    p.add_argument("--meas-modes-max", type=int, dest="meas_modes_max")
    p.add_argument("--tolerance-rank", type=float, dest="rank_tolerance")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="simulate measurements and reconstruct")
    p.add_argument("--state", dest="state_path", required=True, help="truth state JSON")
    p.add_argument("--generator", default="haar", choices=["haar", "mesh", "newton-young"])
    p.add_argument("--configs", type=int, help="number of settings (default: the bound)")
    p.add_argument("--meas-modes")
    p.add_argument(
        "--shots",
        default="0",
        help="comma-separated shot counts; 0 = exact probabilities",
    )
    p.add_argument("--efficiency", type=float, help="uniform detector efficiency")
    p.add_argument(
        "--invert-detector",
        action="store_true",
        help="undo the detector response instead of plain post-selection",
    )
    p.add_argument("--tolerance-rank", type=float, dest="rank_tolerance")
    _add_common(p)

    p = sub.add_parser("make-state", help="write a random density matrix JSON file")
    p.add_argument("--photons", required=True)
    p.add_argument("--modes", required=True)
    _add_common(p)

    sub.add_parser("selftest", help="run the desk-scale invariant suites")

    p = sub.add_parser("run-spec", help="replay a serialized experiment spec")
    p.add_argument("spec_path")

    return parser


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    shots = (0,)
    if getattr(args, "shots", None) is not None:
        try:
            shots = tuple(int(s) for s in str(args.shots).split(","))
        except ValueError:
            raise ValueError(f"bad --shots value {args.shots!r}")
        if any(s < 0 for s in shots):
            raise ValueError("shot counts must be non-negative")
    efficiency = getattr(args, "efficiency", None)
    if efficiency is not None and not 0.0 < efficiency <= 1.0:
        raise ValueError(f"efficiency must lie in (0, 1], got {efficiency}")
    return ExperimentSpec(
        command=args.command,
        photons=getattr(args, "photons", "") or "",
        modes=getattr(args, "modes", "") or "",
        meas_modes=getattr(args, "meas_modes", None),
        generator=getattr(args, "generator", "haar"),
        seed=getattr(args, "seed", 0),
        shots=shots,
        rank_tolerance=getattr(args, "rank_tolerance", None),
        efficiency=efficiency,
        invert_detector=getattr(args, "invert_detector", False),
        state_path=getattr(args, "state_path", None),
        configs=getattr(args, "configs", None),
        r_max=getattr(args, "r_max", None),
        meas_modes_max=getattr(args, "meas_modes_max", None),
        out_csv=getattr(args, "out_csv", None),
        out_json=getattr(args, "out_json", None),
        summary_csv=getattr(args, "summary_csv", None),
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run-spec":
            return cmd_run_spec(args.spec_path)
        spec = _spec_from_args(args)
        return COMMANDS[args.command](spec)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
