"""
Report Configuration
Defines commands, output formats, defaults and run settings
"""

import math
import os
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import TypedDict

import yaml

from ..errors import InvalidInputError
from ..spectral import eigensolver, subordination


class Command(str, Enum):
    SPECTRUM = "spectrum"
    ENCLOSURE = "enclosure"
    SUBORDINATION = "subordination"
    CONDITIONS = "conditions"
    COUNTING = "counting"
    RIESZ = "riesz"
    EXAMPLE_P6 = "example-p6"
    SCHEMA = "schema"


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class EigenvalueRow(TypedDict):
    index: int
    re: float
    im: float
    modulus: float
    stabilized: bool
    in_region: bool | None  # None when no enclosure is defined


class ReportConfig:
    """Configuration for spectral report generation"""

    TOOL_NAME = "gribov-matrices"
    VERSION = "0.1.0"

    # Output
    DEFAULT_OUTPUT = "report"
    MANIFEST_SUFFIX = ".manifest.yaml"
    CSV_HEADER = ["index", "re", "im", "modulus", "stabilized", "in_region"]
    FIELD_VALUE_HEADER = ["field", "value"]
    JSON_INDENT = 2

    # Defaults
    TRUNC = 60
    GROWTH = 2.0
    REL_TOL = 1e-6
    ALPHA_MARGIN = 0.1
    GAP_FACTOR = 0.5
    TRIALS = 200
    SEED = 0

    # Numerical tolerances
    HERMITIAN_TOL = eigensolver.HERMITIAN_TOL
    CLUSTER_TOL = eigensolver.CLUSTER_TOL
    VERIFY_TOL = subordination.VERIFY_TOL
    QR_SWEEP_FACTOR = eigensolver.SWEEP_FACTOR

    # Environment
    THREADS_ENV = "GRIBOV_THREADS"

    # Commands that need a --spec document
    SPEC_COMMANDS = {
        Command.SPECTRUM,
        Command.ENCLOSURE,
        Command.SUBORDINATION,
        Command.CONDITIONS,
        Command.COUNTING,
        Command.RIESZ,
    }


@dataclass
class RunConfig:
    """One report run; built from defaults, an optional YAML file and CLI flags"""
    command: Command
    spec_path: Path | None = None
    trunc: int = ReportConfig.TRUNC
    growth: float = ReportConfig.GROWTH
    rel_tol: float = ReportConfig.REL_TOL
    alpha_margin: float = ReportConfig.ALPHA_MARGIN
    gap_factor: float = ReportConfig.GAP_FACTOR
    out_path: Path = field(default_factory=lambda: Path(ReportConfig.DEFAULT_OUTPUT))
    format: ReportFormat = ReportFormat.JSON
    n: int = 10
    a: float = 1.4
    lambda2: float = 10.0
    trials: int = ReportConfig.TRIALS
    verbose: bool = False

    def __post_init__(self):
        self.command = Command(self.command)
        self.format = ReportFormat(self.format)
        if self.spec_path is not None:
            self.spec_path = Path(self.spec_path)
        self.out_path = Path(self.out_path)

    def validate(self) -> list[str]:
        """Problems with the run settings; empty when the run can start"""
        problems = []
        if self.command in ReportConfig.SPEC_COMMANDS and self.spec_path is None:
            problems.append(f"command '{self.command.value}' needs --spec")
        if not isinstance(self.trunc, int) or self.trunc < 3:
            problems.append(f"trunc must be an integer >= 3, got {self.trunc!r}")
        elif self.command == Command.COUNTING and self.trunc < 4:
            problems.append(f"counting needs trunc >= 4 (points k = 3..trunc-1), got {self.trunc}")
        if not self.growth > 1:
            problems.append(f"growth must exceed 1, got {self.growth}")
        if not self.rel_tol > 0:
            problems.append(f"rel_tol must be positive, got {self.rel_tol}")
        if not self.alpha_margin > 0:
            problems.append(f"alpha_margin must be positive, got {self.alpha_margin}")
        if not self.gap_factor > 0:
            problems.append(f"gap_factor must be positive, got {self.gap_factor}")
        if not isinstance(self.trials, int) or self.trials < 1:
            problems.append(f"trials must be a positive integer, got {self.trials!r}")
        return problems

    @property
    def larger_trunc(self) -> int:
        return math.ceil(self.growth * self.trunc)

    def report_path(self) -> Path:
        """out_path with the extension of the chosen format"""
        suffix = "." + self.format.value
        return self.out_path if self.out_path.suffix == suffix else self.out_path.with_suffix(suffix)

    def manifest_path(self) -> Path:
        report = self.report_path()
        return report.with_name(report.stem + ReportConfig.MANIFEST_SUFFIX)


def run_field_names() -> set[str]:
    return {f.name for f in fields(RunConfig)}


def load_run_file(path: str | Path) -> dict:
    """
    Read RunConfig overrides from a YAML run file

    Args:
        path: YAML mapping whose keys are RunConfig field names

    Returns:
        Dict of overrides
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Run file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise InvalidInputError(f"Run file {path} must contain a mapping")
    unknown = set(data) - run_field_names()
    if unknown:
        raise InvalidInputError(f"Unknown run file keys in {path}: {sorted(unknown)}")
    return data


def thread_cap() -> int | None:
    """Worker thread cap from GRIBOV_THREADS; None when unset or invalid"""
    raw = os.getenv(ReportConfig.THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        print(f"WARNING: ignoring {ReportConfig.THREADS_ENV}={raw!r} (expected a positive integer)")
        return None
    return value
