import json
from pathlib import Path

import pytest

from conceptray.corpus import load_manifest
from conceptray.extraction import annotate_corpus
from conceptray.lexicon import default_lexicon
from conceptray.synthgen import SynthSpec, generate_corpus, load_truth

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def lex():
    return default_lexicon()


@pytest.fixture(scope="session")
def negation_suite():
    return json.loads((DATA_DIR / "negation_suite.json").read_text("utf-8"))


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, lex):
    """A 160-case phantom corpus shared by unit tests (annotated + split)."""
    out = tmp_path_factory.mktemp("small_corpus")
    spec = SynthSpec(n_cases=160, image_size=64, negation_rate=0.3, seed=21)
    manifest = generate_corpus(spec, out, lex)
    records = load_manifest(manifest)
    annotated, _ = annotate_corpus(records, lex, base_dir=out)
    return {
        "dir": out,
        "manifest": manifest,
        "records": annotated,
        "truth": load_truth(out / "truth.jsonl"),
        "spec": spec,
    }


@pytest.fixture(scope="session")
def tiny_train(small_corpus, lex):
    """16 cases, aggressively overfit: the standard single-batch sanity oracle."""
    from conceptray.cbm import TrainConfig, train_concept_predictor

    records = small_corpus["records"][:16]
    cfg = TrainConfig(backbone="small", batch_size=16, epochs=200, seed=3, image_size=64)
    model = train_concept_predictor(records, cfg, lex, base_dir=small_corpus["dir"])
    return records, model
