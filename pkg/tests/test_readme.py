"""The README's CLI examples run and succeed."""

import re
import shlex
from pathlib import Path

import pytest

from softedge.cli import main

ROOT = Path(__file__).resolve().parents[1]


def _examples():
    text = (ROOT / "README.md").read_text()
    block = re.search(r"```console\n(.*?)```", text, re.S).group(1)
    return [shlex.split(line)[1:] for line in block.splitlines() if line.startswith("softedge ")]


def test_readme_has_examples():
    assert len(_examples()) >= 5


@pytest.mark.slow
def test_readme_examples_run(tmp_path, monkeypatch, capsys):
    (tmp_path / "data").symlink_to(ROOT / "data")
    (tmp_path / "out").mkdir()
    monkeypatch.chdir(tmp_path)
    for argv in _examples():
        assert main(argv) == 0, argv
    assert (tmp_path / "out" / "toy_emb.csv").read_text().startswith("graph_index,label,e0")
