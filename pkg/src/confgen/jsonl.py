"""Record files: one JSON object per line.

    {"id": "q1", "scores": [0.2, 0.5], "direction": "up", "adm": [0, 1],
     "normalizer": 2, "dedup_keys": ["a", "b"]}

``normalizer`` and ``dedup_keys`` are optional. Blank lines are skipped.
"""
from __future__ import annotations

import json
import math
from typing import IO, Iterable, List

from confgen.errors import ValidationError
from confgen.records import GenerationRecord
from confgen.stepfn import ExtendedLambda

_KEYS = {"id", "scores", "direction", "adm", "normalizer", "dedup_keys"}


def _number(x, what, lineno):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"line {lineno}: {what} must be a number, got {x!r}")
    return float(x)


def parse_record(obj, lineno: int) -> GenerationRecord:
    if not isinstance(obj, dict):
        raise ValidationError(f"line {lineno}: expected a JSON object")
    unknown = set(obj) - _KEYS
    if unknown:
        raise ValidationError(f"line {lineno}: unknown fields {sorted(unknown)}")
    for key in ("scores", "adm"):
        if not isinstance(obj.get(key), list):
            raise ValidationError(f"line {lineno}: {key!r} must be a list")
    scores = [_number(v, "score", lineno) for v in obj["scores"]]
    adm = [_number(v, "admissibility", lineno) for v in obj["adm"]]
    norm = obj.get("normalizer")
    if norm is not None:
        norm = _number(norm, "normalizer", lineno)
    keys = obj.get("dedup_keys")
    if keys is not None and not isinstance(keys, list):
        raise ValidationError(f"line {lineno}: 'dedup_keys' must be a list")
    direction = obj.get("direction", "up")
    if direction not in ("up", "down"):
        raise ValidationError(f"line {lineno}: direction must be 'up' or 'down'")
    try:
        return GenerationRecord.make(
            obj.get("id", str(lineno)), scores, adm, direction, norm, keys
        )
    except (ValidationError, ValueError) as e:
        raise ValidationError(f"line {lineno}: {e}") from None


def read_records(lines: Iterable[str]) -> List[GenerationRecord]:
    """Parse a record file; any malformed line raises ValidationError naming its line number."""
    out = []
    direction = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValidationError(f"line {lineno}: malformed JSON ({e.msg})") from None
        rec = parse_record(obj, lineno)
        if direction is None:
            direction = rec.scores.direction
        elif rec.scores.direction is not direction:
            raise ValidationError(f"line {lineno}: direction differs from earlier records")
        out.append(rec)
    return out


def load(path: str) -> List[GenerationRecord]:
    with open(path, encoding="utf-8") as fh:
        return read_records(fh)


def record_to_json(rec: GenerationRecord) -> dict:
    d = {
        "id": rec.id,
        "scores": list(rec.scores.scores),
        "direction": rec.scores.direction.value,
        "adm": list(rec.adms.values),
    }
    if rec.adms.normalizer is not None:
        d["normalizer"] = rec.adms.normalizer
    if rec.dedup_keys is not None:
        d["dedup_keys"] = list(rec.dedup_keys)
    return d


def write_records(records: Iterable[GenerationRecord], out: IO[str]) -> None:
    for rec in records:
        out.write(json.dumps(record_to_json(rec)) + "\n")


def lambda_to_json(lam: ExtendedLambda):
    return lam.to_json()


def json_float(x: float):
    """Infinite floats as the "inf"/"-inf" strings used throughout the file formats."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x
