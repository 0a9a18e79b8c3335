import subprocess

import pytest


def run_engine(*args):
    """Invoke the main engine through its CLI (the external interface)."""
    proc = subprocess.run(
        ["subgraphx", *map(str, args)], capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise AssertionError(f"subgraphx {' '.join(map(str, args))} failed:\n{proc.stderr}\n{proc.stdout}")
    return proc.stdout


@pytest.fixture(scope="session")
def ba2motifs(tmp_path_factory):
    """A 200-graph dataset produced by the engine's generator."""
    root = tmp_path_factory.mktemp("data")
    run_engine("gen", "--dataset", "ba2motifs", "--num-graphs", "200",
               "--seed", "5", "--out-dir", root)
    return root / "ba2motifs.jsonl"
