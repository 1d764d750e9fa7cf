"""
Spec Schema
JSON schema of block-spec documents and the parser turning them into BlockSpec
"""

import json
import math
from pathlib import Path

from jsonschema import Draft202012Validator

from ..errors import InvalidInputError, InvalidParameterError
from ..operators.block_assembly import BlockSpec, EntryParams, require_valid


COUPLING_FIELDS = ("lambda1", "lambda", "mu", "beta")


def spec_schema() -> dict:
    """JSON schema (draft 2020-12) of a block-spec document"""
    number = {"type": "number"}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "Gribov block spec",
        "type": "object",
        "additionalProperties": False,
        "required": ["n", "diag_couplings"],
        "properties": {
            "n": {"type": "integer", "minimum": 2},
            "diag_couplings": {
                "type": "array",
                "items": {"type": "number", "not": {"const": 0}},
                "description": "lambda2_j for j = 1..n, all nonzero",
            },
            "off_entries": {
                "type": "array",
                "description": "Omitted (i,j) pairs default to the zero entry; (i,j) unique",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["i", "j"],
                    "properties": {
                        "i": {"type": "integer", "minimum": 1},
                        "j": {"type": "integer", "minimum": 1},
                        "lambda1": number,
                        "lambda": number,
                        "mu": number,
                        "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 3},
                    },
                },
            },
        },
    }


def _field_name(path) -> str:
    name = ""
    for part in path:
        name += f"[{part}]" if isinstance(part, int) else (f".{part}" if name else str(part))
    return name or "document"


def _integral(value) -> bool:
    return isinstance(value, int) or (isinstance(value, float) and value.is_integer())


def schema_violations(document) -> list[tuple[str, str]]:
    """Every (field, reason) the schema reports, ordered by field path"""
    validator = Draft202012Validator(spec_schema())
    errors = sorted(validator.iter_errors(document), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [(_field_name(error.absolute_path), error.message) for error in errors]


def parse_spec_document(document) -> BlockSpec:
    """
    Validate a decoded JSON document and build its BlockSpec

    Structure and ranges come from spec_schema(); finiteness, duplicate
    (i,j) pairs and the block-spec rules are checked on top of it.

    Raises:
        InvalidParameterError: with every (field, reason) violation found
    """
    if not isinstance(document, dict):
        raise InvalidInputError("Spec document must be a JSON object")

    violations = schema_violations(document)

    for idx, value in enumerate(document.get("diag_couplings") or [], start=1):
        if isinstance(value, float) and not math.isfinite(value):
            violations.append((f"diag_couplings[{idx}]", "must be a finite number"))

    seen: dict[tuple[int, int], dict] = {}
    raw_entries = document.get("off_entries") or []
    for pos, raw in enumerate(raw_entries if isinstance(raw_entries, list) else []):
        if not isinstance(raw, dict):
            continue
        name = f"off_entries[{pos}]"
        for key in COUPLING_FIELDS:
            value = raw.get(key)
            if isinstance(value, float) and not math.isfinite(value):
                violations.append((f"{name}.{key}", "must be a finite number"))
        i, j = raw.get("i"), raw.get("j")
        if not (_integral(i) and _integral(j)):
            continue
        pair = (int(i), int(j))
        if pair in seen:
            violations.append((name, f"duplicate entry ({pair[0]},{pair[1]})"))
            continue
        seen[pair] = raw

    if violations:
        summary = "; ".join(f"{name}: {reason}" for name, reason in violations)
        raise InvalidParameterError(f"Invalid spec document: {summary}", violations)

    entries = {
        pair: EntryParams(
            lambda1=float(raw.get("lambda1", 0.0)),
            lambda_=float(raw.get("lambda", 0.0)),
            mu=float(raw.get("mu", 0.0)),
            beta=float(raw.get("beta", 1.0)),
        )
        for pair, raw in seen.items()
    }
    # the schema admits 2.0 as an integer
    spec = BlockSpec(
        n=int(document["n"]),
        diag_couplings=tuple(float(c) for c in document["diag_couplings"]),
        off_entries=entries,
    )
    require_valid(spec)
    return spec


def load_spec(path: str | Path) -> BlockSpec:
    """
    Read and validate a spec file

    Raises:
        FileNotFoundError: path does not exist
        InvalidInputError: malformed JSON, message carries line and column
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Spec file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"Malformed JSON in {path} at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return parse_spec_document(document)


def spec_to_document(spec: BlockSpec) -> dict:
    """Inverse of parse_spec_document, entries in row-major order"""
    return {
        "n": spec.n,
        "diag_couplings": list(spec.diag_couplings),
        "off_entries": [
            {
                "i": i,
                "j": j,
                "lambda1": params.lambda1,
                "lambda": params.lambda_,
                "mu": params.mu,
                "beta": params.beta,
            }
            for (i, j), params in sorted(spec.off_entries.items())
        ],
    }
