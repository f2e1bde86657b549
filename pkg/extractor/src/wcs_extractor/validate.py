"""Report-only trace validation and cross-run comparison.

``validate_trace`` re-checks everything the strict downstream loader
enforces but never raises on content: every problem becomes a line-numbered
violation in the returned report, so a long extraction can be inspected
without dying on the first bad byte. ``compare_traces`` checks that two
extraction runs agree: structure and ranks exactly, float statistics to a
tolerance (different batch shapes legitimately perturb the last bits).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

RECORD_KEYS = {"word", "rank_in_band", "context_id", "doc_id", "n_word_tokens", "steps"}
STEP_KEYS = {"step_index", "token_id", "rank", "temps"}
TEMP_FIELDS = ("p_target", "p_max", "cum_excl")

MASS_SLACK = 1e-9
PAIR_SLACK = 1e-12
RANK_ONE_SLACK = 1e-9
DEFAULT_FLOAT_TOL = 1e-6


@dataclass(frozen=True)
class TraceReport:
    path: str
    n_records: int
    violations: tuple[tuple[int, str], ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"{self.path}: {self.n_records} records, {len(self.violations)} violations"]
        for line_no, message in self.violations:
            lines.append(f"  line {line_no}: {message}")
        return "\n".join(lines)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_temp_block(temps: dict) -> str | None:
    if not isinstance(temps, dict) or not temps:
        return "temps must be a non-empty object"
    for key, fields in temps.items():
        try:
            t = float(key)
        except ValueError:
            return f"temperature key {key!r} is not a number"
        if not math.isfinite(t) or t <= 0.0:
            return f"temperature {key} must be finite and positive"
        if not isinstance(fields, dict) or set(fields) != set(TEMP_FIELDS):
            return f"temperature {key} must have exactly the fields {', '.join(TEMP_FIELDS)}"
        for name in TEMP_FIELDS:
            v = fields[name]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                return f"{name} at T={key} must be a number"
            if math.isnan(v) or not 0.0 <= v <= 1.0:
                return f"{name} at T={key} must lie in [0, 1]"
        if fields["p_target"] > fields["p_max"] + PAIR_SLACK:
            return f"p_target exceeds p_max at T={key}"
        if fields["cum_excl"] + fields["p_target"] > 1.0 + MASS_SLACK:
            return f"cum_excl + p_target exceeds 1 at T={key}"
    return None


def _check_step(step: dict, expected_index: int) -> str | None:
    if not isinstance(step, dict):
        return "step must be a JSON object"
    if set(step) != STEP_KEYS:
        return "step must have exactly the keys " + ", ".join(sorted(STEP_KEYS))
    for key in ("step_index", "token_id", "rank"):
        if not _is_int(step[key]):
            return f"{key} must be an integer"
    if step["step_index"] != expected_index:
        return f"step_index {step['step_index']} out of order (expected {expected_index})"
    if step["rank"] < 1:
        return f"rank must be >= 1 (got {step['rank']})"
    problem = _check_temp_block(step["temps"])
    if problem:
        return problem
    if step["rank"] == 1:
        for key, fields in step["temps"].items():
            if fields["cum_excl"] > PAIR_SLACK:
                return f"rank 1 but cum_excl {fields['cum_excl']} at T={key}"
            if abs(fields["p_target"] - fields["p_max"]) > RANK_ONE_SLACK:
                return f"rank 1 but p_target differs from p_max at T={key}"
    return None


def _check_record(obj: dict) -> str | None:
    if set(obj) != RECORD_KEYS:
        return "record must have exactly the keys " + ", ".join(sorted(RECORD_KEYS))
    if not isinstance(obj["word"], str) or not obj["word"]:
        return "word must be a non-empty string"
    if not isinstance(obj["doc_id"], str):
        return "doc_id must be a string"
    for key in ("rank_in_band", "context_id", "n_word_tokens"):
        if not _is_int(obj[key]):
            return f"{key} must be an integer"
    steps = obj["steps"]
    if not isinstance(steps, list) or not steps:
        return "steps must be a non-empty array"
    if obj["n_word_tokens"] != len(steps):
        return f"n_word_tokens {obj['n_word_tokens']} but {len(steps)} steps"
    temp_sets = []
    for i, step in enumerate(steps):
        problem = _check_step(step, i)
        if problem:
            return problem
        temp_sets.append(frozenset(step["temps"]))
    if len(set(temp_sets)) > 1:
        return "steps record different temperature sets"
    return None


def validate_trace(path) -> TraceReport:
    """Validate a trace file line by line without ever raising on content."""
    violations: list[tuple[int, str]] = []
    n_records = 0
    saw_any = False
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                violations.append((line_no, f"invalid JSON: {exc.msg}"))
                saw_any = True
                continue
            if not isinstance(obj, dict):
                violations.append((line_no, "line must be a JSON object"))
                saw_any = True
                continue
            if set(obj) == {"meta"}:
                if saw_any:
                    violations.append((line_no, "meta header allowed only as the first line"))
                elif not isinstance(obj["meta"], dict):
                    violations.append((line_no, "meta must be a JSON object"))
                saw_any = True
                continue
            saw_any = True
            n_records += 1
            problem = _check_record(obj)
            if problem:
                violations.append((line_no, problem))
    return TraceReport(path=str(path), n_records=n_records, violations=tuple(violations))


# ---------------------------------------------------------------------------
# comparison mode

def _parse_records(path) -> list[tuple[int, dict]]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if isinstance(obj, dict) and set(obj) == {"meta"}:
                continue
            records.append((line_no, obj))
    return records


def compare_traces(path_a, path_b, float_tol: float = DEFAULT_FLOAT_TOL) -> list[str]:
    """Mismatches between two runs; an empty list means they agree.

    Identity fields, token ids and ranks must match exactly; the float
    statistics may differ by at most ``float_tol``. The metadata headers
    are not compared.
    """
    a = _parse_records(path_a)
    b = _parse_records(path_b)
    mismatches: list[str] = []
    if len(a) != len(b):
        mismatches.append(f"record counts differ: {len(a)} vs {len(b)}")
    for (line_a, ra), (_, rb) in zip(a, b):
        where = f"record at line {line_a} ({ra.get('word')!r} context {ra.get('context_id')})"
        for key in ("word", "rank_in_band", "context_id", "doc_id", "n_word_tokens"):
            if ra.get(key) != rb.get(key):
                mismatches.append(f"{where}: {key} {ra.get(key)!r} vs {rb.get(key)!r}")
        steps_a = ra.get("steps") or []
        steps_b = rb.get("steps") or []
        if len(steps_a) != len(steps_b):
            mismatches.append(f"{where}: step counts differ")
            continue
        for sa, sb in zip(steps_a, steps_b):
            i = sa.get("step_index")
            for key in ("step_index", "token_id", "rank"):
                if sa.get(key) != sb.get(key):
                    mismatches.append(f"{where} step {i}: {key} {sa.get(key)!r} vs {sb.get(key)!r}")
            ta, tb = sa.get("temps") or {}, sb.get("temps") or {}
            if set(ta) != set(tb):
                mismatches.append(f"{where} step {i}: temperature sets differ")
                continue
            for t in ta:
                for name in TEMP_FIELDS:
                    va, vb = ta[t].get(name), tb[t].get(name)
                    numeric = isinstance(va, (int, float)) and isinstance(vb, (int, float))
                    if not numeric or abs(va - vb) > float_tol:
                        mismatches.append(
                            f"{where} step {i} T={t}: {name} {va!r} vs {vb!r}"
                        )
    return mismatches


def main(argv=None) -> int:
    """Validate a trace, or compare two: python3 -m wcs_extractor.validate a.jsonl [b.jsonl]"""
    import argparse

    parser = argparse.ArgumentParser(
        prog="wcs_extractor.validate",
        description="Validate a coverage trace, or compare two extraction runs.",
    )
    parser.add_argument("trace", help="trace JSONL file")
    parser.add_argument("against", nargs="?", help="second trace to compare against")
    parser.add_argument(
        "--float-tol", type=float, default=DEFAULT_FLOAT_TOL,
        help="tolerance for float fields in comparison mode (default %(default)s)",
    )
    args = parser.parse_args(argv)
    if args.against is None:
        report = validate_trace(args.trace)
        print(report.render())
        return 0 if report.ok else 1
    mismatches = compare_traces(args.trace, args.against, float_tol=args.float_tol)
    if mismatches:
        for m in mismatches:
            print(m)
        return 1
    print(f"{args.trace} and {args.against} agree within {args.float_tol}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
