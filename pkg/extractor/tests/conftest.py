"""Shared fixtures: a tokenizer trained on the bundled corpus, a tiny
randomly initialized model, contexts produced by the audit package's CLI,
and one extraction run reused by the read-only tests.

Everything is built locally; no test touches the network.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
from pathlib import Path
from types import SimpleNamespace

import pytest
import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

from wcs_extractor import ExtractionJob, extract

ROOT = Path(__file__).resolve().parents[2]
TOY = ROOT / "tests" / "data" / "toy"


@pytest.fixture(scope="session")
def audit_cli():
    """Run the audit package's command line (the external interface)."""

    def run(*args):
        exe = shutil.which("wcs")
        cmd = [exe] if exe else [sys.executable, "-m", "wcs_audit.cli"]
        return subprocess.run(
            [*cmd, *(str(a) for a in args)], capture_output=True, text=True
        )

    return run


@pytest.fixture(scope="session")
def tokenizer():
    files = sorted(str(p) for p in (TOY / "corpus").glob("*.txt"))
    tok = Tokenizer(models.BPE(unk_token=None))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=512,
        min_frequency=2,
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
        special_tokens=[],
    )
    tok.train(files, trainer)
    return PreTrainedTokenizerFast(tokenizer_object=tok)


@pytest.fixture(scope="session")
def model(tokenizer):
    torch.manual_seed(7)
    config = GPT2Config(
        vocab_size=len(tokenizer),
        n_positions=512,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=None,
        eos_token_id=None,
    )
    return GPT2LMHeadModel(config).eval()


@pytest.fixture(scope="session")
def model_dir(model, tokenizer, tmp_path_factory):
    """The same model and tokenizer saved to disk for command line runs."""
    d = tmp_path_factory.mktemp("tiny-model")
    model.save_pretrained(d)
    tokenizer.save_pretrained(d)
    return d


@pytest.fixture(scope="session")
def workdir(audit_cli, tmp_path_factory):
    """targets.json and contexts.jsonl for 5 words with 2 contexts each."""
    out = tmp_path_factory.mktemp("inputs")
    selected = audit_cli(
        "select-words", "--out", out,
        "--frequency-list", TOY / "frequency.tsv",
        "--dictionary", TOY / "dictionary.txt",
        "--band-lo", 50, "--band-hi", 250,
        "--n-words", 5, "--seed", 3,
    )
    assert selected.returncode == 0, selected.stderr
    extracted = audit_cli(
        "extract-contexts", "--out", out,
        "--corpus-dir", TOY / "corpus",
        "--n-contexts", 2, "--min-prefix-chars", 80, "--seed", 3,
    )
    assert extracted.returncode == 0, extracted.stderr
    return out


@pytest.fixture(scope="session")
def trace(workdir, model, tokenizer, tmp_path_factory):
    """One full extraction over the shared contexts."""
    out = tmp_path_factory.mktemp("trace") / "trace.jsonl"
    job = ExtractionJob(
        model="tiny-random-gpt2",
        contexts_path=str(workdir / "contexts.jsonl"),
        out_path=str(out),
        temperatures=(0.7, 1.0, 1.5),
        batch_size=4,
        prefix_tokens=32,
        targets_path=str(workdir / "targets.json"),
    )
    summary = extract(job, model=model, tokenizer=tokenizer)
    return SimpleNamespace(path=out, job=job, summary=summary)
