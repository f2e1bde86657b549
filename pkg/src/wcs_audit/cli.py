"""Command-line pipeline: select-words, extract-contexts, audit, sweep, report.

Every command is deterministic given (config, seed, inputs). Timestamps are
confined to per-command metadata sidecar files so the data outputs are
byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import zlib
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from .audit import (
    AuditRecord,
    audit_word_context,
    build_ngram_oracle,
    build_trace_oracle,
    load_trace,
    write_trace,
)
from .config import (
    DEFAULT_COMBINED_K,
    DEFAULT_COMBINED_P,
    RunConfig,
    apply_overrides,
    grid_configs,
    load_config,
)
from .contexts import CorpusIndex, find_contexts, load_contexts, write_contexts
from .errors import (
    ParseError,
    ShortageError,
    TemperatureError,
    TraceSchemaError,
    UndefinedCorrelationError,
    ValidationError,
    WcsError,
)
from .lexicon import (
    load_dictionary,
    load_frequency_list,
    load_target_set,
    select_targets,
    write_target_set,
)
from .metrics import (
    mean_word_reachability,
    pearson_log_freq,
    per_word_csv_lines,
    sweep,
    sweep_csv_lines,
    wcs_per_word,
    word_ranks,
    write_csv,
)
from .plots import plot_decay_curve
from .sampling import FilterConfig
from .tokenizers import WhitespaceTokenizer, align

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_SCHEMA = 3


def _build_cfg(args: argparse.Namespace, field_names: tuple[str, ...]) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    overrides = {}
    for name in field_names:
        overrides[name] = getattr(args, name, None)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, command: str, cfg: RunConfig, inputs: list[str], outputs: list[str]) -> None:
    payload = {
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": asdict(cfg),
        "inputs": inputs,
        "outputs": outputs,
    }
    (out / f"meta_{command}.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _word_seed(base_seed: int, word: str) -> int:
    return (base_seed << 32) ^ zlib.crc32(word.encode("utf-8"))


# ---------------------------------------------------------------------------
# commands


def cmd_select_words(args: argparse.Namespace) -> int:
    cfg = _build_cfg(args, ("frequency_list", "dictionary", "band_lo", "band_hi", "n_words"))
    if not cfg.frequency_list:
        raise ValidationError("a frequency list path is required (frequency_list)")
    if not cfg.dictionary:
        raise ValidationError("a dictionary path is required (dictionary)")
    entries = load_frequency_list(cfg.frequency_list)
    dictionary = load_dictionary(cfg.dictionary)
    targets = select_targets(
        entries, dictionary, cfg.band_lo, cfg.band_hi, cfg.n_words, cfg.seed
    )
    out = _out_dir(cfg)
    target_path = out / "targets.json"
    write_target_set(targets, target_path)
    _write_meta(out, "select_words", cfg, [cfg.frequency_list, cfg.dictionary], [str(target_path)])
    print(
        f"selected {len(targets.entries)} words from rank band "
        f"[{cfg.band_lo}, {cfg.band_hi}] with seed {cfg.seed} -> {target_path}"
    )
    return EXIT_OK


def cmd_extract_contexts(args: argparse.Namespace) -> int:
    cfg = _build_cfg(args, ("corpus_dir", "n_contexts", "min_prefix_chars"))
    if not cfg.corpus_dir:
        raise ValidationError("a corpus directory is required (corpus_dir)")
    out = _out_dir(cfg)
    targets_path = args.targets or str(out / "targets.json")
    entries = load_target_set(targets_path)
    corpus = CorpusIndex.from_directory(cfg.corpus_dir)

    samples = []
    shortages = []
    for entry in entries:
        found = find_contexts(
            corpus,
            entry.word,
            cfg.n_contexts,
            cfg.min_prefix_chars,
            _word_seed(cfg.seed, entry.word),
            prefix_char_budget=cfg.prefix_char_budget,
            allow_short=True,
        )
        if len(found) < cfg.n_contexts:
            shortages.append((entry.word, len(found)))
            print(
                f"shortage: {entry.word!r} has {len(found)} of {cfg.n_contexts} contexts",
                file=sys.stderr,
            )
        samples.extend(found)

    if shortages and not args.allow_short:
        raise ShortageError(
            f"{len(shortages)} of {len(entries)} words fell short of "
            f"{cfg.n_contexts} contexts (rerun with --allow-short to keep partial sets)",
            found=len(samples),
            needed=len(entries) * cfg.n_contexts,
        )

    contexts_path = out / "contexts.jsonl"
    write_contexts(samples, contexts_path)
    _write_meta(out, "extract_contexts", cfg, [targets_path, cfg.corpus_dir], [str(contexts_path)])
    print(f"wrote {len(samples)} contexts for {len(entries)} words -> {contexts_path}")
    return EXIT_OK


def _parse_oracle_spec(spec: str):
    parts = spec.split(":")
    if parts[0] == "ngram":
        if len(parts) < 2 or len(parts) > 4 or not parts[1]:
            raise ValidationError(
                f"bad oracle spec {spec!r}: expected ngram:<corpus-dir>[:<order>[:<alpha>]]"
            )
        order = int(parts[2]) if len(parts) > 2 else 3
        alpha = float(parts[3]) if len(parts) > 3 else 0.1
        return ("ngram", parts[1], order, alpha)
    if parts[0] == "trace":
        if len(parts) != 2 or not parts[1]:
            raise ValidationError(f"bad oracle spec {spec!r}: expected trace:<path>")
        return ("trace", parts[1])
    raise ValidationError(f"unknown oracle kind {parts[0]!r} (expected ngram or trace)")


def cmd_audit(args: argparse.Namespace) -> int:
    cfg = _build_cfg(args, ("prefix_tokens", "temperatures"))
    out = _out_dir(cfg)
    contexts_path = args.contexts or str(out / "contexts.jsonl")
    samples = load_contexts(contexts_path)
    if not samples:
        raise ValidationError(f"no contexts in {contexts_path}")

    ranks: dict[str, int] = {}
    targets_path = args.targets or str(out / "targets.json")
    if os.path.exists(targets_path):
        ranks = {e.word: e.rank for e in load_target_set(targets_path)}

    spec = _parse_oracle_spec(args.oracle)
    records: list[AuditRecord] = []
    failures = 0
    if spec[0] == "ngram":
        _, corpus_dir, order, alpha = spec
        corpus = CorpusIndex.from_directory(corpus_dir)
        texts = [corpus.text(doc_id) for doc_id in corpus.doc_ids()]
        tok = WhitespaceTokenizer.from_texts(texts)
        oracle = build_ngram_oracle(
            [tok.encode(t) for t in texts], tok.vocab_size, order=order, alpha=alpha
        )
        for sample in samples:
            try:
                path = align(sample, tok, cfg.prefix_tokens)
                records.append(
                    audit_word_context(
                        path,
                        oracle,
                        cfg.temperatures,
                        rank_in_band=ranks.get(sample.word, 0),
                        context_id=sample.context_id,
                        doc_id=sample.doc_id,
                    )
                )
            except WcsError as exc:
                failures += 1
                print(
                    f"trial failed: word={sample.word!r} context_id={sample.context_id}: {exc}",
                    file=sys.stderr,
                )
    else:
        oracle = build_trace_oracle(spec[1])
        for sample in samples:
            try:
                records.append(oracle.replay(sample.word, sample.context_id))
            except WcsError as exc:
                failures += 1
                print(
                    f"trial failed: word={sample.word!r} context_id={sample.context_id}: {exc}",
                    file=sys.stderr,
                )

    trace_path = Path(cfg.trace_out) if cfg.trace_out else out / "trace.jsonl"
    n = write_trace(records, str(trace_path))
    _write_meta(out, "audit", cfg, [contexts_path, args.oracle], [str(trace_path)])
    print(f"audited {len(samples)} trials: {n} succeeded, {failures} failed -> {trace_path}")
    return EXIT_OK if n > 0 else EXIT_VALIDATION


def _trace_inputs(args: argparse.Namespace, cfg: RunConfig) -> list[str]:
    traces = list(args.traces)
    if not traces and cfg.trace_in:
        traces = [cfg.trace_in]
    if not traces:
        raise ValidationError("no trace files given (pass paths or set trace_in)")
    return traces


def _check_temperatures(records: list[AuditRecord], cfg: RunConfig, path: str) -> None:
    if not records:
        raise ValidationError(f"no records in {path}")
    recorded = set(records[0].temperatures())
    missing = [t for t in cfg.temperatures if t not in recorded]
    if missing:
        raise TemperatureError(
            f"{path}: temperatures {missing} not recorded (trace has {sorted(recorded)})"
        )


def _stem(path: str) -> str:
    return Path(path).stem


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _build_cfg(args, ("temperatures",))
    out = _out_dir(cfg)
    traces = _trace_inputs(args, cfg)
    configs = grid_configs(cfg)
    single = len(traces) == 1

    points_by_trace = {}
    outputs = []
    for trace_path in traces:
        records, _meta = load_trace(trace_path)
        _check_temperatures(records, cfg, trace_path)
        label = _stem(trace_path)
        points = sweep(records, configs)
        points_by_trace[label] = points

        suffix = "" if single else f"_{label}"
        results_path = out / f"results{suffix}.csv"
        write_csv(sweep_csv_lines(points), str(results_path))
        ranks = word_ranks(records)
        rows = []
        for fc in configs:
            rows.extend(wcs_per_word(records, fc))
        per_word_path = out / f"per_word{suffix}.csv"
        write_csv(per_word_csv_lines(rows, ranks), str(per_word_path))
        outputs += [str(results_path), str(per_word_path)]

        for pt in points:
            if pt.cfg.p == DEFAULT_COMBINED_P and pt.cfg.k == DEFAULT_COMBINED_K:
                print(
                    f"{label}: sampler=top_p+top_k params={pt.cfg.param_label()} "
                    f"T={pt.cfg.temperature!r} wcs={pt.wcs!r} "
                    f"words_reachable={pt.words_reachable!r} "
                    f"erased_fraction={pt.erased_fraction!r}"
                )

    plot_dir = out / "plots"
    plot_dir.mkdir(exist_ok=True)
    for sampler, attr in (("top_p", "p"), ("top_k", "k"), ("min_p", "m")):
        for t in cfg.temperatures:
            series = {}
            for label, points in points_by_trace.items():
                series[label] = [
                    pt
                    for pt in points
                    if pt.cfg.temperature == t
                    and getattr(pt.cfg, attr) is not None
                    and pt.cfg.sampler_label() == sampler
                ]
            for variant in ("wcs", "erased_fraction"):
                name = f"{sampler}_T{t:g}_{'erased' if variant.startswith('erased') else 'wcs'}.svg"
                plot_path = plot_dir / name
                plot_decay_curve(series, sampler, t, variant, str(plot_path))
                outputs.append(str(plot_path))

    _write_meta(out, "sweep", cfg, traces, outputs)
    print(f"swept {len(configs)} configurations over {len(traces)} trace file(s) -> {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _build_cfg(args, ("frequency_list",))
    out = _out_dir(cfg)
    traces = _trace_inputs(args, cfg)
    configs = grid_configs(cfg)

    sums: dict[str, float] = {}
    hits: dict[str, int] = {}
    ranks: dict[str, int] = {}
    total_records = 0
    for trace_path in traces:
        records, _meta = load_trace(trace_path)
        _check_temperatures(records, cfg, trace_path)
        total_records += len(records)
        for word, rank in word_ranks(records).items():
            ranks.setdefault(word, rank)
        for word, mean in mean_word_reachability(records, configs):
            sums[word] = sums.get(word, 0.0) + mean
            hits[word] = hits.get(word, 0) + 1

    per_word = sorted(
        ({"word": w, "rank": ranks.get(w, 0), "mean_wcs": sums[w] / hits[w]} for w in sums),
        key=lambda row: (row["mean_wcs"], row["word"]),
    )
    summary = {
        "n_traces": len(traces),
        "n_records": total_records,
        "n_words": len(per_word),
        "hardest": per_word[:10],
        "easiest": list(reversed(per_word[-10:])),
        "pearson_r": None,
        "per_word": per_word,
    }

    if not cfg.frequency_list:
        summary["pearson_notice"] = "no frequency list supplied; correlation omitted"
    elif len(per_word) < 3:
        summary["pearson_notice"] = "fewer than 3 words; correlation omitted"
    else:
        lex = load_frequency_list(cfg.frequency_list)
        try:
            word_means = [(row["word"], row["mean_wcs"]) for row in per_word]
            summary["pearson_r"] = pearson_log_freq(word_means, lex)
        except UndefinedCorrelationError as exc:
            summary["pearson_notice"] = f"correlation undefined: {exc}"

    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    _write_meta(out, "report", cfg, traces, [str(report_path)])
    r = summary["pearson_r"]
    print(
        f"report over {total_records} records, {len(per_word)} words: "
        f"hardest={per_word[0]['word']!r} easiest={per_word[-1]['word']!r} "
        f"pearson_r={'n/a' if r is None else repr(r)} -> {report_path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in raw.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcs",
        description="Audit whether words stay reachable under sampling filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--seed", type=int, help="run seed (overrides config)")
        sp.add_argument("--out", help="output directory (overrides config)")

    sp = sub.add_parser("select-words", help="pick the band-limited random target set")
    common(sp)
    sp.add_argument("--frequency-list", dest="frequency_list", help="word<TAB>count TSV")
    sp.add_argument("--dictionary", help="one word per line")
    sp.add_argument("--band-lo", dest="band_lo", type=int)
    sp.add_argument("--band-hi", dest="band_hi", type=int)
    sp.add_argument("--n-words", dest="n_words", type=int)
    sp.set_defaults(func=cmd_select_words)

    sp = sub.add_parser("extract-contexts", help="mine word occurrences from the corpus")
    common(sp)
    sp.add_argument("--targets", help="target-set JSON (default <out>/targets.json)")
    sp.add_argument("--corpus-dir", dest="corpus_dir")
    sp.add_argument("--n-contexts", dest="n_contexts", type=int)
    sp.add_argument("--min-prefix-chars", dest="min_prefix_chars", type=int)
    sp.add_argument(
        "--allow-short",
        action="store_true",
        help="keep words with fewer than n_contexts contexts instead of failing",
    )
    sp.set_defaults(func=cmd_extract_contexts)

    sp = sub.add_parser("audit", help="forced-path audit of every (word, context) trial")
    common(sp)
    sp.add_argument("--contexts", help="contexts JSONL (default <out>/contexts.jsonl)")
    sp.add_argument("--targets", help="target-set JSON for rank labels")
    sp.add_argument(
        "--oracle",
        required=True,
        help="ngram:<corpus-dir>[:<order>[:<alpha>]] or trace:<path>",
    )
    sp.add_argument("--prefix-tokens", dest="prefix_tokens", type=int)
    sp.add_argument("--temperatures", type=_float_list)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("sweep", help="evaluate filter grids over audit traces")
    common(sp)
    sp.add_argument("traces", nargs="*", help="trace JSONL files (or set trace_in)")
    sp.add_argument("--temperatures", type=_float_list)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="per-word reachability summary and correlation")
    common(sp)
    sp.add_argument("traces", nargs="*", help="trace JSONL files (or set trace_in)")
    sp.add_argument("--frequency-list", dest="frequency_list")
    sp.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TraceSchemaError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except WcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
