"""Report-only validation: every defect becomes a line-numbered violation,
and comparison mode separates real divergence from float noise."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

from wcs_extractor import compare_traces, validate_trace


def trace_lines(trace) -> list[str]:
    return Path(trace.path).read_text(encoding="utf-8").splitlines()


def write_lines(tmp_path, lines) -> Path:
    path = tmp_path / "edited.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def edit_line(lines, line_no, fn) -> list[str]:
    """Apply ``fn`` to the JSON object on 1-based line ``line_no``."""
    obj = json.loads(lines[line_no - 1])
    fn(obj)
    lines[line_no - 1] = json.dumps(obj, ensure_ascii=False)
    return lines


def validate_cli(*args):
    cmd = [sys.executable, "-m", "wcs_extractor.validate"]
    return subprocess.run([*cmd, *(str(a) for a in args)], capture_output=True, text=True)


def test_fresh_trace_is_clean(trace):
    report = validate_trace(trace.path)
    assert report.ok
    assert report.n_records == 10
    assert "10 records, 0 violations" in report.render()


def test_hand_corrupted_p_max_is_one_violation_at_that_line(trace, tmp_path):
    line_no = 4

    def corrupt(obj):
        fields = obj["steps"][0]["temps"]["1.0"]
        fields["p_max"] = fields["p_target"] / 2

    path = write_lines(tmp_path, edit_line(trace_lines(trace), line_no, corrupt))
    report = validate_trace(path)
    assert report.n_records == 10
    assert len(report.violations) == 1
    where, message = report.violations[0]
    assert where == line_no
    assert "p_max" in message


def test_rank_below_one_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["steps"][0]["rank"] = 0

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert [v[0] for v in report.violations] == [2]
    assert "rank" in report.violations[0][1]


def test_step_count_mismatch_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["n_word_tokens"] += 1

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 3, corrupt))
    report = validate_trace(path)
    assert [v[0] for v in report.violations] == [3]
    assert "steps" in report.violations[0][1]


def test_unknown_record_key_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["extra"] = 1

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert len(report.violations) == 1
    assert "exactly the keys" in report.violations[0][1]


def test_boolean_token_id_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["steps"][0]["token_id"] = True

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "token_id" in report.violations[0][1]


def test_missing_temperature_field_is_flagged(trace, tmp_path):
    def corrupt(obj):
        del obj["steps"][0]["temps"]["0.7"]["p_max"]

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "exactly the fields" in report.violations[0][1]


def test_probability_outside_unit_interval_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["steps"][0]["temps"]["0.7"]["p_target"] = 1.5

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "[0, 1]" in report.violations[0][1]


def test_nan_probability_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["steps"][0]["temps"]["0.7"]["p_target"] = float("nan")

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "[0, 1]" in report.violations[0][1]


def test_mass_overflow_is_flagged(trace, tmp_path):
    def corrupt(obj):
        fields = obj["steps"][0]["temps"]["1.5"]
        fields["cum_excl"] = 1.0
        fields["p_target"] = 0.5
        fields["p_max"] = 0.5

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "exceeds 1" in report.violations[0][1]


def test_rank_one_with_excluded_mass_is_flagged(trace, tmp_path):
    def corrupt(obj):
        step = obj["steps"][0]
        step["rank"] = 1
        step["temps"]["1.0"]["cum_excl"] = 0.3

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "rank 1" in report.violations[0][1]


def test_out_of_order_step_index_is_flagged(trace, tmp_path):
    def corrupt(obj):
        obj["steps"][0]["step_index"] = 1

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    report = validate_trace(path)
    assert "out of order" in report.violations[0][1]


def test_inconsistent_temperature_sets_are_flagged(trace, tmp_path):
    lines = trace_lines(trace)
    line_no = next(
        i + 1
        for i, line in enumerate(lines)
        if i > 0 and len(json.loads(line)["steps"]) >= 2
    )

    def corrupt(obj):
        del obj["steps"][1]["temps"]["1.5"]

    path = write_lines(tmp_path, edit_line(lines, line_no, corrupt))
    report = validate_trace(path)
    assert "temperature sets" in report.violations[0][1]


def test_invalid_json_line_is_flagged_not_fatal(trace, tmp_path):
    lines = trace_lines(trace)
    lines.append("{not json")
    path = write_lines(tmp_path, lines)
    report = validate_trace(path)
    assert report.n_records == 10
    assert [v[0] for v in report.violations] == [len(lines)]
    assert "invalid JSON" in report.violations[0][1]


def test_meta_after_records_is_flagged(trace, tmp_path):
    lines = trace_lines(trace)
    lines.append(json.dumps({"meta": {"late": True}}))
    path = write_lines(tmp_path, lines)
    report = validate_trace(path)
    assert "first line" in report.violations[0][1]


def test_meta_must_be_an_object(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"meta": 3}\n', encoding="utf-8")
    report = validate_trace(path)
    assert report.n_records == 0
    assert "meta" in report.violations[0][1]


def test_non_object_line_is_flagged(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text("[1, 2]\n", encoding="utf-8")
    report = validate_trace(path)
    assert "JSON object" in report.violations[0][1]


def test_empty_file_reports_zero_records(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text("", encoding="utf-8")
    report = validate_trace(path)
    assert report.ok
    assert report.n_records == 0
    assert "0 records, 0 violations" in report.render()


def test_blank_lines_do_not_shift_line_numbers(trace, tmp_path):
    lines = trace_lines(trace)
    lines.insert(1, "")
    lines = edit_line(lines, 3, lambda obj: obj.__setitem__("rank_in_band", True))
    path = write_lines(tmp_path, lines)
    report = validate_trace(path)
    assert report.n_records == 10
    assert [v[0] for v in report.violations] == [3]


# ---------------------------------------------------------------------------
# comparison mode

def test_a_trace_agrees_with_itself(trace):
    assert compare_traces(trace.path, trace.path) == []


def test_comparison_tolerates_float_noise(trace, tmp_path):
    def drift(obj):
        fields = obj["steps"][0]["temps"]["1.0"]
        fields["p_target"] += 2e-7

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, drift))
    assert compare_traces(trace.path, path) == []
    assert compare_traces(trace.path, path, float_tol=1e-8) != []


def test_comparison_flags_real_float_divergence(trace, tmp_path):
    def diverge(obj):
        obj["steps"][0]["temps"]["1.0"]["p_target"] += 2e-3

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, diverge))
    mismatches = compare_traces(trace.path, path)
    assert len(mismatches) == 1
    assert "p_target" in mismatches[0]


def test_comparison_flags_rank_changes(trace, tmp_path):
    def diverge(obj):
        obj["steps"][0]["rank"] += 1

    path = write_lines(tmp_path, edit_line(trace_lines(trace), 2, diverge))
    mismatches = compare_traces(trace.path, path)
    assert any("rank" in m for m in mismatches)


def test_comparison_flags_missing_records(trace, tmp_path):
    lines = trace_lines(trace)[:-1]
    path = write_lines(tmp_path, lines)
    mismatches = compare_traces(trace.path, path)
    assert any("record counts differ" in m for m in mismatches)


def test_validate_command_reports_and_exits(trace, tmp_path):
    clean = validate_cli(trace.path)
    assert clean.returncode == 0
    assert "10 records, 0 violations" in clean.stdout

    def corrupt(obj):
        obj["steps"][0]["rank"] = 0

    bad = write_lines(tmp_path, edit_line(trace_lines(trace), 2, corrupt))
    broken = validate_cli(bad)
    assert broken.returncode == 1
    assert "line 2" in broken.stdout


def test_compare_command_reports_and_exits(trace, tmp_path):
    same = validate_cli(trace.path, trace.path)
    assert same.returncode == 0
    assert "agree" in same.stdout

    def diverge(obj):
        obj["steps"][0]["temps"]["1.0"]["cum_excl"] += 5e-3

    other = write_lines(tmp_path, edit_line(trace_lines(trace), 2, diverge))
    differs = validate_cli(trace.path, other)
    assert differs.returncode == 1
    assert "cum_excl" in differs.stdout
