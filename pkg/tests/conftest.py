import numpy as np
import pytest

from aidetect.corpus import Document
from aidetect.ensemble import ScoreMatrix

WORDS = (
    "river stone harbor lantern meadow copper sparrow thunder velvet anchor "
    "cedar marble lantern orchard whistle barley candle falcon ribbon timber"
).split()


def make_text(n_words: int, seed: int = 0, sentence_len: int = 12) -> str:
    """Deterministic filler prose with terminal punctuation."""
    rng = np.random.default_rng(seed)
    words = [WORDS[int(i)] for i in rng.integers(0, len(WORDS), size=n_words)]
    out = []
    for i, w in enumerate(words, start=1):
        out.append(w + "." if i % sentence_len == 0 else w)
    if not out[-1].endswith("."):
        out[-1] += "."
    return " ".join(out)


def make_docs(n: int, label: int, source: str = "arxiv", prefix: str = "d", words: int = 350) -> list[Document]:
    return [
        Document(
            id=f"{prefix}-{source}-{label}-{i:04d}",
            text=make_text(words, seed=i + 1000 * label),
            label=label,
            source=source,
        )
        for i in range(n)
    ]


def random_matrix(n: int, seed: int) -> ScoreMatrix:
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    if len(set(labels.tolist())) < 2:  # force both classes
        labels[0], labels[1] = 0, 1
    probs = rng.uniform(0, 1, size=(n, 3))
    return ScoreMatrix(doc_ids=[f"r{i:04d}" for i in range(n)], probs=probs, labels=labels)


@pytest.fixture
def tiny_config(tmp_path):
    """Small, fast pipeline config written to disk."""
    path = tmp_path / "tiny.cfg"
    path.write_text(
        "corpus.synthetic.n_per_class=30\n"
        "curv.k=3\n"
        "mlp.epochs=15\n"
        "mlp.dim=256\n"
        "eval.seeds=1,2,3,4,5\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """One finished pipeline run at the bundled defaults (400 documents,
    seed 1), shared by the acceptance suite and the attack tests."""
    from aidetect import cli

    rundir = tmp_path_factory.mktemp("default") / "run"
    code = cli.main(["--run-dir", str(rundir), "--seed", "1", "run"])
    assert code == 0
    return rundir
