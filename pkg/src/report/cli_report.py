"""
Report Pipeline
Command-line orchestrator: reads a block spec, runs one analysis command and
writes a deterministic JSON or CSV report plus a run manifest
"""

import argparse
import csv
import json
import math
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path

import numpy as np
import yaml

from ..errors import GribovError, NumericalError, UnsupportedConfigurationError, ValidationError
from ..operators.bargmann_core import build_g
from ..operators.block_assembly import BlockSpec, assemble
from ..spectral.eigensolver import (
    SpectrumResult,
    counting,
    eigenvalues,
    is_hermitian,
    mark_stabilized,
    with_residual,
)
from ..spectral.spectral_analysis import (
    EXPONENT_RULES,
    counting_asymptotics,
    gribov_region,
    membership,
    region_exponents,
    riesz_diagnostics,
)
from ..spectral.subordination import (
    closedness_margin,
    compact_certificate,
    entry_bounds,
    example_p6,
    example_p6_spec,
    gribov_certificate,
    random_vectors,
    selfadjointness_check,
    verify_block,
    verify_entry,
)
from .report_config import (
    Command,
    EigenvalueRow,
    ReportConfig,
    ReportFormat,
    RunConfig,
    load_run_file,
    thread_cap,
)
from .spec_schema import load_spec, spec_schema, spec_to_document

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def to_jsonable(value):
    """Plain JSON types; non-finite floats become None, complex numbers {re, im}"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    return value


def flatten(payload: dict, prefix: str = "") -> list[tuple[str, object]]:
    """Dotted field/value pairs; lists are kept as compact JSON strings"""
    rows = []
    for key in sorted(payload):
        name = f"{prefix}{key}"
        value = payload[key]
        if isinstance(value, dict):
            rows.extend(flatten(value, name + "."))
        elif isinstance(value, list):
            rows.append((name, json.dumps(value, sort_keys=True, separators=(",", ":"))))
        else:
            rows.append((name, value))
    return rows


class ReportPipeline:
    """Runs one report command"""

    def __init__(self, config: RunConfig):
        """
        Initialize pipeline

        Args:
            config: Validated run settings
        """
        self.config = config
        self.threads = thread_cap()
        self.workers = self.threads or 2
        self.spec: BlockSpec | None = None
        self.files: list[Path] = []
        self.eigen_rows: list[EigenvalueRow] | None = None

    def _debug(self, message: str):
        if self.config.verbose:
            print(f"    [DEBUG] {message}")

    def run(self) -> Path:
        """
        Execute the configured command

        Returns:
            Path to the written report
        """
        config = self.config
        started = time.perf_counter()
        print(f"Running command: {config.command.value}")

        # Step 1: Load spec
        if config.command in ReportConfig.SPEC_COMMANDS:
            print(f"Step 1: Loading spec {config.spec_path}...")
            self.spec = load_spec(config.spec_path)
            print(f"  n = {self.spec.n}, {len(self.spec.off_entries)} off-diagonal entries")
        else:
            print("Step 1: No spec needed")

        # Step 2: Compute
        print("Step 2: Computing...")
        self._debug(f"worker threads: {self.workers}")
        handlers = {
            Command.SPECTRUM: self._spectrum,
            Command.ENCLOSURE: self._enclosure,
            Command.SUBORDINATION: self._subordination,
            Command.CONDITIONS: self._conditions,
            Command.COUNTING: self._counting,
            Command.RIESZ: self._riesz,
            Command.EXAMPLE_P6: self._example_p6,
        }
        result = handlers[config.command]()

        # Step 3: Write report
        print(f"Step 3: Writing {config.format.value} report...")
        report = self._envelope(result)
        report_path = self._write_report(report)
        print(f"  Report saved: {report_path}")

        # Step 4: Manifest
        print("Step 4: Creating manifest...")
        self._create_manifest(time.perf_counter() - started)

        print(f"\n✓ Report complete!")
        return report_path

    # Shared computations

    def _build(self, N: int):
        return assemble(self.spec, N, max_workers=self.threads)

    def _spectra(self, sizes: list[int]) -> dict[int, SpectrumResult]:
        """Spectra of assemble(spec, N) for several N, solved concurrently"""
        unique = sorted(set(sizes))
        for N in unique:
            self._debug(f"solving truncation N={N} (dim {self.spec.n * N})")
        if self.workers > 1 and len(unique) > 1:
            with ThreadPoolExecutor(max_workers=min(self.workers, len(unique))) as pool:
                solved = list(pool.map(lambda N: eigenvalues(self._build(N)), unique))
        else:
            solved = [eigenvalues(self._build(N)) for N in unique]
        return dict(zip(unique, solved))

    def _stabilized(self, N: int, spectra: dict[int, SpectrumResult]) -> SpectrumResult:
        larger = math.ceil(self.config.growth * N)
        return mark_stabilized(spectra[N], spectra[larger], self.config.rel_tol, N, larger)

    def _region_or_none(self, spectrum: SpectrumResult, rule: str = "literal"):
        try:
            return gribov_region(self.spec, self.config.alpha_margin, spectrum, rule)
        except UnsupportedConfigurationError as e:
            print(f"  Note: {e}")
            return None

    # Commands

    def _spectrum(self) -> dict:
        config = self.config
        larger = config.larger_trunc
        spectra = self._spectra([config.trunc, larger])
        spectrum = with_residual(self._build(config.trunc), self._stabilized(config.trunc, spectra))
        region = self._region_or_none(spectrum)

        inside = membership(region, spectrum.eigenvalues) if region else None
        self.eigen_rows = [
            EigenvalueRow(
                index=k,
                re=float(lam.real),
                im=float(lam.imag),
                modulus=float(abs(lam)),
                stabilized=bool(spectrum.stabilized[k]),
                in_region=None if inside is None else bool(inside[k]),
            )
            for k, lam in enumerate(spectrum.eigenvalues)
        ]
        stable = int(spectrum.stabilized.sum())
        print(f"  {spectrum.dimension} eigenvalues, {stable} stabilized")
        return {
            "truncation": config.trunc,
            "reference_truncation": larger,
            "dimension": spectrum.dimension,
            "residual_bound": spectrum.residual_bound,
            "backward_error": spectrum.backward_error,
            "iterations": spectrum.iterations,
            "hermitian": spectrum.hermitian,
            "stabilized_count": stable,
            "region": region.to_dict() if region else None,
            "eigenvalues": [dict(row) for row in self.eigen_rows],
        }

    def _enclosure(self) -> dict:
        config = self.config
        N = config.trunc
        doubled = config.larger_trunc
        spectra = self._spectra([N, doubled, math.ceil(config.growth * doubled)])
        at_n = self._stabilized(N, spectra)
        at_doubled = self._stabilized(doubled, spectra)

        regions = {}
        for rule in EXPONENT_RULES:
            small = gribov_region(self.spec, config.alpha_margin, at_n, rule)
            large = gribov_region(self.spec, config.alpha_margin, at_doubled, rule)
            change = 0.0 if max(small.r0, large.r0) == 0 else abs(large.r0 - small.r0) / max(small.r0, large.r0)
            regions[rule] = {
                "region": small.to_dict(),
                "stable_membership": float(membership(small, at_n.stable_eigenvalues()).mean()) if at_n.stable_indices().size else 1.0,
                "all_membership": float(membership(small, at_n.eigenvalues).mean()),
                "r0": small.r0,
                "r0_larger": large.r0,
                "r0_relative_change": change,
            }
            print(f"  {rule}: r0 = {small.r0:.6g} at N={N}, {large.r0:.6g} at N={doubled}")
        return {
            "truncation": N,
            "larger_truncation": doubled,
            "stabilized_count": int(at_n.stabilized.sum()),
            "regions": regions,
        }

    def _subordination(self) -> dict:
        config = self.config
        spec = self.spec
        N = config.trunc
        entries = []
        for i, j in spec.omega():
            bounds = entry_bounds(spec, i, j)
            check = verify_entry(spec, i, j, N)
            entries.append({
                "i": i, "j": j,
                "b1": bounds.b1, "b2": bounds.b2, "b3": bounds.b3,
                "verified": check.passed,
                "min_slack": check.min_slack,
            })

        basis = verify_block(spec, N)
        trials = random_vectors(spec.n * N, config.trials, ReportConfig.SEED)
        sampled = verify_block(spec, N, trials)
        print(f"  Basis sweep: {'passed' if basis.passed else 'FAILED'} (min slack {basis.min_slack:.6g})")
        print(f"  Random sweep: {'passed' if sampled.passed else 'FAILED'} (min slack {sampled.min_slack:.6g})")
        return {
            "truncation": N,
            "entries": entries,
            "certificate": gribov_certificate(spec).to_dict(),
            "certificate_with_constants": gribov_certificate(spec, include_constant_terms=True).to_dict(),
            "compact_certificate": compact_certificate(spec).to_dict(),
            "verification": {"basis": basis.to_dict(), "random": sampled.to_dict()},
        }

    def _conditions(self) -> dict:
        closed = closedness_margin(self.spec)
        selfadj = selfadjointness_check(self.spec)
        hermitian = is_hermitian(self._build(self.config.trunc).to_dense())
        print(f"  closedness: {closed.value:.6g} ({'satisfied' if closed.satisfied else 'not satisfied'})")
        return {
            "closedness": {"value": closed.value, "satisfied": closed.satisfied},
            "selfadjoint": {
                "applicable": selfadj.applicable,
                "value": selfadj.value,
                "satisfied": selfadj.satisfied,
                "symmetric": selfadj.symmetric,
            },
            "assembled_hermitian": hermitian,
            "truncation": self.config.trunc,
        }

    def _counting(self) -> dict:
        N = self.config.trunc
        couplings = sorted({abs(c) for c in self.spec.diag_couplings})
        series = []
        for magic in couplings:
            points = counting_asymptotics(magic, N - 1)
            spectrum = eigenvalues(build_g(N).scaled(magic))
            mismatches = [p.k for p in points if counting(spectrum, p.r_k) != p.k]
            last = points[-1]
            limit = magic ** (-1 / 3)
            series.append({
                "lambda2": magic,
                "limit": limit,
                "last_ratio": last.ratio,
                "last_relative_error": abs(last.ratio - limit) / limit,
                "cross_check_mismatches": mismatches,
                "points": [{"k": p.k, "r_k": p.r_k, "ratio": p.ratio} for p in points],
            })
            self._debug(f"lambda2={magic}: ratio(k={last.k}) = {last.ratio:.6g}, limit {limit:.6g}")
        return {"truncation": N, "series": series}

    def _riesz(self) -> dict:
        config = self.config
        spectra = self._spectra([config.trunc, config.larger_trunc])
        spectrum = self._stabilized(config.trunc, spectra)
        exponent = max(region_exponents(self.spec, "certificate"))
        diagnostics = riesz_diagnostics(self._build(config.trunc), spectrum, config.gap_factor, exponent)
        print(f"  {len(diagnostics.clusters)} clusters, eigenvector condition {diagnostics.eigvec_condition:.6g}")
        payload = diagnostics.to_dict()
        payload.update({
            "truncation": config.trunc,
            "reference_truncation": config.larger_trunc,
            "stabilized_count": int(spectrum.stabilized.sum()),
            "cluster_exponent": exponent,
        })
        return payload

    def _example_p6(self) -> dict:
        config = self.config
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = example_p6(config.n, config.a, config.lambda2)
        notes = [str(w.message) for w in caught]
        for note in notes:
            print(f"  Warning: {note}")
        spec = example_p6_spec(config.n, config.a, config.lambda2)
        return {
            "n": config.n,
            "a": config.a,
            "lambda2": config.lambda2,
            "gamma": result.gamma,
            "condition_sum": result.condition_sum,
            "S": result.S,
            "S_bound": result.S_bound,
            "S_below_7_18": result.s_below_seven_eighteenths,
            "satisfied": result.satisfied,
            "hypotheses_met": result.hypotheses_met,
            "selfadjoint_value": selfadjointness_check(spec).value,
            "warnings": notes,
        }

    # Output

    def _envelope(self, result: dict) -> dict:
        config = self.config
        return to_jsonable({
            "tool": {"name": ReportConfig.TOOL_NAME, "version": ReportConfig.VERSION},
            "command": config.command.value,
            "settings": {
                "trunc": config.trunc,
                "larger_trunc": config.larger_trunc,
                "growth": config.growth,
                "rel_tol": config.rel_tol,
                "alpha_margin": config.alpha_margin,
                "gap_factor": config.gap_factor,
                "trials": config.trials,
                "tolerances": {
                    "hermitian": ReportConfig.HERMITIAN_TOL,
                    "cluster": ReportConfig.CLUSTER_TOL,
                    "verify": ReportConfig.VERIFY_TOL,
                    "qr_sweep_factor": ReportConfig.QR_SWEEP_FACTOR,
                },
            },
            "spec": spec_to_document(self.spec) if self.spec else None,
            "result": result,
        })

    def _write_report(self, report: dict) -> Path:
        path = self.config.report_path()
        path.parent.mkdir(parents=True, exist_ok=True)

        if self.config.format == ReportFormat.JSON:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(report, f, sort_keys=True, indent=ReportConfig.JSON_INDENT, allow_nan=False)
                f.write("\n")
        elif self.eigen_rows is not None:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=ReportConfig.CSV_HEADER)
                writer.writeheader()
                for row in self.eigen_rows:
                    writer.writerow({**row, "in_region": "" if row["in_region"] is None else row["in_region"]})
        else:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(ReportConfig.FIELD_VALUE_HEADER)
                for name, value in flatten(report):
                    writer.writerow([name, "" if value is None else value])

        self.files.append(path)
        return path

    def _create_manifest(self, elapsed: float):
        """Create manifest file with run metadata"""
        config = self.config
        manifest = {
            "tool": ReportConfig.TOOL_NAME,
            "version": ReportConfig.VERSION,
            "command": config.command.value,
            "spec": str(config.spec_path) if config.spec_path else None,
            "format": config.format.value,
            "processed_date": datetime.now().isoformat(),
            "elapsed_seconds": round(elapsed, 3),
            "threads": self.workers,
            "files": [str(p) for p in self.files],
        }
        manifest_path = config.manifest_path()
        with open(manifest_path, "w", encoding="utf-8") as f:
            yaml.dump(manifest, f, default_flow_style=False, sort_keys=False)
        print(f"  Manifest saved: {manifest_path}")


def run(config: RunConfig) -> int:
    """
    Run one command and map the outcome to an exit status

    Returns:
        0 on success, 2 on user-side errors, 3 on numerical failure
    """
    problems = config.validate()
    if problems:
        for problem in problems:
            print(f"ERROR: {problem}")
        return EXIT_VALIDATION

    try:
        ReportPipeline(config).run()
    except FileNotFoundError as e:
        print(f"ERROR: {type(e).__name__}: {e}")
        return EXIT_VALIDATION
    except ValidationError as e:
        print(f"ERROR: {type(e).__name__}: {e}")
        return EXIT_VALIDATION
    except NumericalError as e:
        print(f"ERROR: {type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=ReportConfig.TOOL_NAME,
        description="Finite-section analysis of n x n Gribov operator matrices",
    )
    parser.add_argument("command", choices=[c.value for c in Command])
    parser.add_argument("--spec", dest="spec_path", help="JSON block spec")
    parser.add_argument("--config", help="YAML run file with RunConfig fields")
    parser.add_argument("--trunc", type=int, help=f"truncation size (default {ReportConfig.TRUNC})")
    parser.add_argument("--growth", type=float, help="reference truncation factor")
    parser.add_argument("--rel-tol", dest="rel_tol", type=float, help="stabilization tolerance")
    parser.add_argument("--alpha-margin", dest="alpha_margin", type=float, help="sector width margin")
    parser.add_argument("--gap-factor", dest="gap_factor", type=float, help="cluster gap factor")
    parser.add_argument("--out", dest="out_path", help="report path (extension follows --format)")
    parser.add_argument("--format", choices=[f.value for f in ReportFormat])
    parser.add_argument("--n", type=int, help="example-p6 block count")
    parser.add_argument("--a", type=float, help="example-p6 decay base")
    parser.add_argument("--lambda2", type=float, help="example-p6 diagonal coupling")
    parser.add_argument("--trials", type=int, help="random trial vectors for subordination")
    parser.add_argument("--verbose", action="store_true", default=None, help="print debug lines")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the YAML run file, then explicit flags"""
    settings = {}
    if args.config:
        settings.update(load_run_file(args.config))
    for key, value in vars(args).items():
        if key == "config" or value is None:
            continue
        settings[key] = value
    return RunConfig(**settings)


def main(argv: list[str] | None = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)

    if args.command == Command.SCHEMA.value:
        print(json.dumps(spec_schema(), indent=ReportConfig.JSON_INDENT, sort_keys=True))
        return EXIT_OK

    try:
        config = config_from_args(args)
    except (FileNotFoundError, GribovError, TypeError, ValueError) as e:
        print(f"ERROR: {type(e).__name__}: {e}")
        return EXIT_VALIDATION

    print("=" * 60)
    print("Gribov Operator Matrix Report")
    print("=" * 60)
    print(f"Command: {config.command.value}")
    if config.spec_path:
        print(f"Spec:    {config.spec_path}")
    print(f"Output:  {config.report_path()}")
    print("=" * 60)
    print()

    status = run(config)

    print()
    print("=" * 60)
    print("SUCCESS!" if status == EXIT_OK else f"FAILED (exit {status})")
    print("=" * 60)
    return status


if __name__ == "__main__":
    sys.exit(main())
