#!/usr/bin/env python3
"""Build the review-console test fixture: a 40-cancer/20-healthy review set.

Generates a phantom corpus, selects exactly 40 Lung Cancer and 20 Healthy
cases into review_manifest.jsonl, and trains a decision-tree label head on
the full corpus ground truth. Prints the artifact paths as JSON.
"""

import json
import sys
from pathlib import Path

from conceptray.cbm import save_label_head, train_label_predictor
from conceptray.corpus import load_manifest, save_manifest
from conceptray.extraction import ConceptVector
from conceptray.lexicon import default_lexicon
from conceptray.synthgen import SynthSpec, generate_corpus, load_truth


def main() -> None:
    out = Path(sys.argv[1])
    lex = default_lexicon()
    mix = {
        "Healthy": 0.30,
        "Lung Cancer": 0.50,
        "Pneumonia": 0.05,
        "Pleural Effusion": 0.05,
        "Cardiomegaly": 0.05,
        "Pneumothorax": 0.05,
    }
    spec = SynthSpec(n_cases=220, image_size=64, label_mix=mix, negation_rate=0.2, seed=99)
    manifest = generate_corpus(spec, out, lex)
    records = load_manifest(manifest)
    truth = load_truth(out / "truth.jsonl")

    cancer = [r for r in records if r.label == "Lung Cancer"][:40]
    healthy = [r for r in records if r.label == "Healthy"][:20]
    assert len(cancer) == 40 and len(healthy) == 20, (len(cancer), len(healthy))
    save_manifest(cancer + healthy, out / "review_manifest.jsonl")

    vectors = [
        ConceptVector(tuple(truth[r.case_id]["concept_values"]), lex.lexicon_id)
        for r in records
    ]
    head = train_label_predictor(vectors, [r.label for r in records], "dt", lex, seed=0)
    save_label_head(head, out / "head_dt.joblib")

    print(
        json.dumps(
            {
                "dir": str(out),
                "manifest": str(out / "review_manifest.jsonl"),
                "head": str(out / "head_dt.joblib"),
                "truth": str(out / "truth.jsonl"),
            }
        )
    )


if __name__ == "__main__":
    main()
