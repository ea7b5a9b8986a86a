"""Command-line entry point orchestrating every pipeline stage.

All randomness flows from one ``--seed`` flag, fanned out per stage by
name hashing, so repeating a command with identical inputs reproduces its
metric outputs byte-identically (training included, per the concept-model
determinism contract). Each command writes a run manifest beside its
outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConceptrayError
from .lexicon import default_lexicon, load_lexicon
from .seeding import stage_seed


def _load_lex(spec: str | None):
    if spec in (None, "", "default"):
        return default_lexicon()
    return load_lexicon(spec)


def _split_records(records, seed):
    from .corpus import split_dataset

    return split_dataset(records, seed=stage_seed(seed, "split"))


def _take_split(records, name):
    return [r for r in records if r.split == name]


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def cmd_synth_gen(args) -> int:
    from .runinfo import write_run_manifest
    from .synthgen import DEFAULT_LABEL_MIX, SynthSpec, generate_corpus

    label_mix = dict(DEFAULT_LABEL_MIX)
    if args.label_mix:
        label_mix = json.loads(args.label_mix)
    spec = SynthSpec(
        n_cases=args.n,
        image_size=args.image_size,
        label_mix=label_mix,
        negation_rate=args.negation_rate,
        seed=stage_seed(args.seed, "synth-gen"),
    )
    manifest = generate_corpus(spec, args.out, _load_lex(args.lexicon))
    write_run_manifest(
        args.out,
        "synth-gen",
        config={
            "n": args.n,
            "image_size": args.image_size,
            "label_mix": label_mix,
            "negation_rate": args.negation_rate,
        },
        seeds={"seed": args.seed, "synth-gen": spec.seed},
        inputs=[],
        outputs=[manifest, Path(args.out) / "truth.jsonl"],
    )
    print(f"generated {args.n} cases -> {manifest}")
    return 0


def cmd_extract(args) -> int:
    from .corpus import load_manifest, save_manifest
    from .extraction import annotate_corpus, load_negation_triggers
    from .metrics import concept_set_prf
    from .runinfo import write_metrics_json, write_run_manifest
    from .synthgen import load_truth

    lex = _load_lex(args.lexicon)
    base = Path(args.manifest).parent
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    triggers = load_negation_triggers(args.triggers) if args.triggers else None
    annotated, summary = annotate_corpus(records, lex, base_dir=base, triggers=triggers)

    out_path = Path(args.out) if args.out else base / "manifest.annotated.jsonl"
    save_manifest(annotated, out_path)
    print(
        f"annotated {summary['n_annotated']}/{summary['n_records']} records "
        f"({summary['n_skipped']} skipped) -> {out_path}"
    )

    metrics = {"summary": summary, "lexicon_id": lex.lexicon_id}
    truth_path = Path(args.truth) if args.truth else base / "truth.jsonl"
    if truth_path.exists():
        truth = load_truth(truth_path)
        pred_sets, gt_sets = [], []
        for rec in annotated:
            entry = truth.get(rec.case_id)
            if entry is None or entry["lexicon_id"] != lex.lexicon_id:
                continue
            pred_sets.append(set(rec.concept_vector.concept_ids(lex)))
            gt_sets.append(
                {c.id for c, v in zip(lex.concepts, entry["concept_values"]) if v}
            )
        prf = concept_set_prf(pred_sets, gt_sets)
        metrics["truth_comparison"] = {
            "n_cases": len(pred_sets),
            "precision": prf.precision,
            "recall": prf.recall,
            "f1": prf.f1,
        }
        print(f"concept F1 vs truth = {prf.f1:.4f} (P={prf.precision:.4f}, R={prf.recall:.4f})")
    metrics_path = write_metrics_json(out_path.parent / "extract_metrics.json", metrics)
    write_run_manifest(
        out_path.parent,
        "extract",
        config={"manifest": str(args.manifest), "lexicon": args.lexicon or "default"},
        seeds={},
        inputs=[args.manifest],
        outputs=[out_path, metrics_path],
    )
    return 0


def cmd_train_concepts(args) -> int:
    from .cbm import TrainConfig, save_concept_model, train_concept_predictor
    from .corpus import load_manifest
    from .runinfo import write_metrics_json, write_run_manifest

    lex = _load_lex(args.lexicon)
    base = Path(args.manifest).parent
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    records = _split_records(records, args.seed)
    train, val = _take_split(records, "train"), _take_split(records, "val")
    if args.oss:
        from .sampling import default_image_featurizer, one_sided_selection

        majority = max(set(r.label for r in train), key=[r.label for r in train].count)
        train = one_sided_selection(
            train,
            default_image_featurizer(base),
            majority,
            seed=stage_seed(args.seed, "oss"),
        )
        print(f"one-sided selection kept {len(train)} training records")

    cfg = TrainConfig(
        backbone=args.backbone,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=stage_seed(args.seed, "train-concepts"),
        image_size=args.image_size,
    )
    model = train_concept_predictor(
        train, cfg, lex, base_dir=base, val_records=val, log=True,
        border_threshold=args.border_threshold,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "concept_model.pt"
    save_concept_model(model, model_path)
    metrics_path = write_metrics_json(
        out_dir / "train_concepts_metrics.json",
        {
            "history": model.history,
            "epochs_run": len(model.history),
            "n_train": len(train),
            "n_val": len(val),
            "lexicon_id": lex.lexicon_id,
            "cfg": cfg.to_dict(),
        },
    )
    write_run_manifest(
        out_dir,
        "train-concepts",
        config=cfg.to_dict() | {"manifest": str(args.manifest), "oss": args.oss},
        seeds={"seed": args.seed, "train-concepts": cfg.seed},
        inputs=[args.manifest],
        outputs=[model_path, metrics_path],
    )
    print(f"saved concept model -> {model_path}")
    return 0


def cmd_train_labels(args) -> int:
    from .cbm import (
        HEAD_KINDS,
        export_dt_text,
        predict_label,
        save_label_head,
        train_label_predictor,
    )
    from .cbm.types import ConceptScores
    from .corpus import load_manifest
    from .metrics import label_prf
    from .runinfo import write_metrics_json, write_run_manifest

    lex = _load_lex(args.lexicon)
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    for rec in records:
        if rec.concept_vector is None:
            raise ConceptrayError(
                f"record {rec.case_id} has no concept vector; run `conceptray extract` first"
            )
    records = _split_records(records, args.seed)
    train, val = _take_split(records, "train"), _take_split(records, "val")
    kinds = list(HEAD_KINDS) if args.head == "all" else [args.head]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"heads": {}, "split": "val", "lexicon_id": lex.lexicon_id}
    outputs = []
    for kind in kinds:
        head = train_label_predictor(
            [r.concept_vector for r in train],
            [r.label for r in train],
            kind,
            lex,
            seed=stage_seed(args.seed, f"train-labels-{kind}"),
            dt_max_depth=args.dt_max_depth,
        )
        head_path = out_dir / f"head_{kind}.joblib"
        save_label_head(head, head_path)
        outputs.append(head_path)
        preds = [
            predict_label(
                head,
                ConceptScores(tuple(float(v) for v in r.concept_vector.values), lex.lexicon_id),
            ).label
            for r in val
        ]
        result = label_prf(preds, [r.label for r in val], tuple(lex.labels))
        report["heads"][kind] = {
            "precision": result["macro"].precision,
            "recall": result["macro"].recall,
            "f1": result["macro"].f1,
            "per_class": {lab: prf.to_dict() for lab, prf in result["per_class"].items()},
            "artifact": str(head_path),
        }
        print(
            f"{kind.upper():4s} macro P={result['macro'].precision:.4f} "
            f"R={result['macro'].recall:.4f} F1={result['macro'].f1:.4f}"
        )
        if kind == "dt":
            (out_dir / "dt_structure.txt").write_text(export_dt_text(head, lex), "utf-8")

    report_path = write_metrics_json(out_dir / "label_head_report.json", report)
    write_run_manifest(
        out_dir,
        "train-labels",
        config={"manifest": str(args.manifest), "head": args.head, "dt_max_depth": args.dt_max_depth},
        seeds={"seed": args.seed},
        inputs=[args.manifest],
        outputs=outputs + [report_path],
    )
    return 0


def _predict_test_scores(args, lex, records):
    """Shared eval plumbing: concept scores for the test split."""
    from .cbm import load_concept_model, load_case_tensors

    model = load_concept_model(args.concept_model)
    if model.lexicon_id != lex.lexicon_id:
        raise ConceptrayError(
            f"concept model lexicon {model.lexicon_id} does not match {lex.lexicon_id}"
        )
    base = Path(args.manifest).parent
    test = _take_split(_split_records(records, args.seed), "test")
    x, _, case_ids = load_case_tensors(
        test, model.cfg.image_size, base, require_vectors=False,
        border_threshold=args.border_threshold,
    )
    scores = model.predict_batch(x)
    return model, test, scores, case_ids


def cmd_evaluate_concepts(args) -> int:
    from .metrics import concept_set_prf
    from .corpus import load_manifest
    from .runinfo import write_metrics_json, write_run_manifest

    lex = _load_lex(args.lexicon)
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    for rec in records:
        if rec.concept_vector is None:
            raise ConceptrayError("manifest must be annotated (run `conceptray extract`)")
    model, test, scores, case_ids = _predict_test_scores(args, lex, records)

    gt_sets = {r.case_id: set(r.concept_vector.concept_ids(lex)) for r in test}
    pred_sets = {}
    for cid, row in zip(case_ids, scores):
        order = sorted(range(len(row)), key=lambda i: (-row[i], i))[:2]
        pred_sets[cid] = {lex.concepts[i].id for i in order}

    methods = {"cbm_top2": {"k": 2, "sets": pred_sets}}
    for item in args.import_sets or []:
        name, _, path = item.partition("=")
        if not path:
            raise ConceptrayError(f"--import expects NAME=PATH, got {item!r}")
        sets = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    obj = json.loads(line)
                    sets[obj["case_id"]] = set(obj["concepts"])
        methods[name] = {"k": "variable", "sets": sets}

    payload = {"split": "test", "n_cases": len(test), "lexicon_id": lex.lexicon_id, "methods": {}}
    valid = set(lex.concept_ids)
    for name, entry in methods.items():
        common = [cid for cid in case_ids if cid in entry["sets"]]
        prf = concept_set_prf(
            [entry["sets"][cid] for cid in common],
            [gt_sets[cid] for cid in common],
            valid_ids=valid,
        )
        payload["methods"][name] = {
            "k": entry["k"],
            "n_cases": len(common),
            "precision": prf.precision,
            "recall": prf.recall,
            "f1": prf.f1,
        }
        print(f"{name}: P={prf.precision:.4f} R={prf.recall:.4f} F1={prf.f1:.4f} (k={entry['k']})")

    out_dir = Path(args.out)
    metrics_path = write_metrics_json(out_dir / "concept_metrics.json", payload)
    write_run_manifest(
        out_dir,
        "evaluate-concepts",
        config={"manifest": str(args.manifest), "concept_model": str(args.concept_model)},
        seeds={"seed": args.seed},
        inputs=[args.manifest, args.concept_model],
        outputs=[metrics_path],
    )
    return 0


def cmd_evaluate_labels(args) -> int:
    from .cbm import load_label_head, predict_label
    from .cbm.types import ConceptScores
    from .corpus import load_manifest
    from .metrics import label_prf
    from .runinfo import write_metrics_json, write_run_manifest

    lex = _load_lex(args.lexicon)
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    model, test, scores, case_ids = _predict_test_scores(args, lex, records)
    head = load_label_head(args.head)
    preds = [
        predict_label(head, ConceptScores(tuple(float(v) for v in row), lex.lexicon_id)).label
        for row in scores
    ]
    result = label_prf(preds, [r.label for r in test], tuple(lex.labels))
    payload = {
        "split": "test",
        "n_cases": len(test),
        "head_kind": head.kind,
        "lexicon_id": lex.lexicon_id,
        "macro": result["macro"].to_dict(),
        "per_class": {lab: prf.to_dict() for lab, prf in result["per_class"].items()},
    }
    print(
        f"{head.kind.upper()} test macro P={result['macro'].precision:.4f} "
        f"R={result['macro'].recall:.4f} F1={result['macro'].f1:.4f}"
    )
    out_dir = Path(args.out)
    metrics_path = write_metrics_json(out_dir / "label_metrics.json", payload)
    write_run_manifest(
        out_dir,
        "evaluate-labels",
        config={
            "manifest": str(args.manifest),
            "concept_model": str(args.concept_model),
            "head": str(args.head),
        },
        seeds={"seed": args.seed},
        inputs=[args.manifest, args.concept_model, args.head],
        outputs=[metrics_path],
    )
    return 0


def cmd_evaluate_saliency(args) -> int:
    from .cbm import load_case_tensors, load_concept_model
    from .corpus import load_manifest
    from .metrics import DEFAULT_N_GRID, bbox_capture, overlap_curve
    from .runinfo import write_metrics_json, write_run_manifest
    from .saliency import concept_score_fn, gradient_cam, import_saliency, occlusion_saliency

    lex = _load_lex(args.lexicon)
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    model = load_concept_model(args.concept_model)
    base = Path(args.manifest).parent
    split = _split_records(records, args.seed)
    test = [r for r in _take_split(split, "test") if r.bboxes]
    if args.max_cases:
        test = test[: args.max_cases]
    if not test:
        raise ConceptrayError("no test cases with bounding boxes")
    size = model.cfg.image_size
    x, _, case_ids = load_case_tensors(
        test, size, base, require_vectors=False, border_threshold=args.border_threshold
    )

    train = _take_split(split, "train")
    fill_records = train[:256]
    fx, _, _ = load_case_tensors(
        fill_records, size, base, require_vectors=False,
        border_threshold=args.border_threshold,
    )
    fill_value = float(fx.mean())

    n_grid = tuple(float(v) for v in (args.n_grid or DEFAULT_N_GRID))
    techniques = [t.strip() for t in args.techniques.split(",") if t.strip()]
    maps_by_technique: dict[str, dict] = {}
    target_index = {
        rec.case_id: lex.index_of(rec.bboxes[0].label) for rec in test
    }
    for tech in techniques:
        maps = {}
        for rec, pixels in zip(test, x):
            ti = target_index[rec.case_id]
            if tech == "gradcam":
                maps[rec.case_id] = gradient_cam(model, pixels, ti, case_id=rec.case_id)
            elif tech == "occlusion":
                maps[rec.case_id] = occlusion_saliency(
                    concept_score_fn(model, ti),
                    pixels,
                    patch_size=args.patch_size,
                    stride=args.stride,
                    fill_value=fill_value,
                    case_id=rec.case_id,
                    target=lex.concepts[ti].id,
                )
            else:
                raise ConceptrayError(
                    f"unknown technique {tech!r}; built-ins are gradcam, occlusion"
                )
        maps_by_technique[tech] = maps
    for item in args.import_maps or []:
        name, _, directory = item.partition("=")
        if not directory:
            raise ConceptrayError(f"--import expects NAME=DIR, got {item!r}")
        maps = {}
        for rec in test:
            path = Path(directory) / f"{rec.case_id}.csv"
            if path.exists():
                maps[rec.case_id] = import_saliency(
                    path, (size, size), technique=name, case_id=rec.case_id
                )
        maps_by_technique[name] = maps

    payload: dict = {
        "split": "test",
        "n_cases": len(test),
        "n_grid": list(n_grid),
        "fill_value": fill_value,
        "lexicon_id": lex.lexicon_id,
    }
    if len(maps_by_technique) >= 2:
        payload["overlap"] = overlap_curve(maps_by_technique, n_grid)
    capture: dict[str, list[float]] = {}
    for tech, maps in maps_by_technique.items():
        sums = {n: 0.0 for n in n_grid}
        used = 0
        for rec in test:
            smap = maps.get(rec.case_id)
            if smap is None:
                continue
            used += 1
            for n in n_grid:
                sums[n] += bbox_capture(smap, list(rec.bboxes), n)
        capture[tech] = [sums[n] / used if used else 0.0 for n in n_grid]
    payload["bbox_capture"] = capture

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "saliency_curves.csv"
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write("metric,series,n,value\n")
        for tech, vals in capture.items():
            for n, v in zip(n_grid, vals):
                fh.write(f"bbox_capture,{tech},{n},{v!r}\n")
        for pair, entry in payload.get("overlap", {}).get("pairs", {}).items():
            for point in entry["points"]:
                fh.write(f"overlap,{pair},{point['n']},{point['value']!r}\n")
    if args.plot:
        _plot_curves(payload, n_grid, out_dir / "saliency_curves.png")
    metrics_path = write_metrics_json(out_dir / "saliency_metrics.json", payload)
    write_run_manifest(
        out_dir,
        "evaluate-saliency",
        config={
            "manifest": str(args.manifest),
            "concept_model": str(args.concept_model),
            "techniques": techniques,
            "patch_size": args.patch_size,
            "stride": args.stride,
        },
        seeds={"seed": args.seed},
        inputs=[args.manifest, args.concept_model],
        outputs=[metrics_path, csv_path],
    )
    print(f"saliency metrics -> {metrics_path}")
    return 0


def _plot_curves(payload: dict, n_grid, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for pair, entry in payload.get("overlap", {}).get("pairs", {}).items():
        axes[0].plot(n_grid, [p["value"] for p in entry["points"]], marker="o", label=pair)
    axes[0].set_xlabel("top n% of pixels")
    axes[0].set_ylabel("mean pixel overlap")
    axes[0].set_ylim(0, 1)
    axes[0].legend(fontsize=7)
    for tech, vals in payload["bbox_capture"].items():
        axes[1].plot(n_grid, vals, marker="o", label=tech)
    axes[1].set_xlabel("top n% of pixels")
    axes[1].set_ylabel("mean bbox capture")
    axes[1].set_ylim(0, 1)
    axes[1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_evaluate_expert(args) -> int:
    from .corpus import load_manifest
    from .metrics import ExpertScore, aggregate_expert_scores, cohort_for_label
    from .runinfo import write_metrics_json, write_run_manifest

    lex = _load_lex(args.lexicon)
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    cohorts = {r.case_id: cohort_for_label(r.label) for r in records}
    scores = []
    with open(args.scores, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                scores.append(
                    ExpertScore(
                        case_id=obj["case_id"],
                        technique=obj["technique"],
                        rater_id=obj["rater_id"],
                        score=int(obj["score"]),
                        timestamp=float(obj["timestamp"]),
                        notes=obj.get("notes", ""),
                    )
                )
    agg = aggregate_expert_scores(scores, cohorts)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "expert_histograms.csv"
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write("technique,cohort,score,count\n")
        for tech, hist in sorted(agg["histograms"].items()):
            for cohort, buckets in sorted(hist.items()):
                for score, count in enumerate(buckets):
                    fh.write(f"{tech},{cohort},{score},{count}\n")
    if args.plot:
        _plot_expert(agg, out_dir / "expert_histograms.png")
    metrics_path = write_metrics_json(out_dir / "expert_metrics.json", agg)
    write_run_manifest(
        out_dir,
        "evaluate-expert",
        config={"scores": str(args.scores), "manifest": str(args.manifest)},
        seeds={},
        inputs=[args.scores, args.manifest],
        outputs=[metrics_path, csv_path],
    )
    for tech, total in sorted(agg["totals"].items()):
        print(f"{tech}: {total} scored cases")
    return 0


def _plot_expert(agg: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    techniques = sorted(agg["histograms"])
    cohorts = sorted({c for h in agg["histograms"].values() for c in h})
    fig, axes = plt.subplots(1, max(len(cohorts), 1), figsize=(5 * max(len(cohorts), 1), 4))
    if len(cohorts) <= 1:
        axes = [axes]
    width = 0.8 / max(len(techniques), 1)
    for ax, cohort in zip(axes, cohorts):
        for i, tech in enumerate(techniques):
            buckets = agg["histograms"][tech].get(cohort, [0, 0, 0, 0])
            xs = [s + i * width for s in range(4)]
            ax.bar(xs, buckets, width=width, label=tech)
        ax.set_title(f"cohort: {cohort}")
        ax.set_xticks([s + 0.4 for s in range(4)])
        ax.set_xticklabels(["0", "1", "2", "3"])
        ax.set_xlabel("clinical relevance score")
        ax.set_ylabel("cases")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_explain(args) -> int:
    from .cbm import explain_top2, load_concept_model, load_label_head, predict_label
    from .corpus import load_manifest, preprocess_image

    lex = _load_lex(args.lexicon)
    records = load_manifest(args.manifest, valid_labels=tuple(lex.labels))
    by_id = {r.case_id: r for r in records}
    if args.case not in by_id:
        raise ConceptrayError(f"unknown case {args.case!r}")
    model = load_concept_model(args.concept_model)
    from .corpus import DEFAULT_BORDER_THRESHOLD

    base = Path(args.manifest).parent
    rec = by_id[args.case]
    path = Path(rec.image_path)
    image = preprocess_image(
        path if path.is_absolute() else base / path,
        model.cfg.image_size,
        border_threshold=(
            args.border_threshold if args.border_threshold is not None
            else DEFAULT_BORDER_THRESHOLD
        ),
    )
    scores = model.predict(image)
    explanation = explain_top2(scores, lex, case_id=args.case)
    for cid, score in explanation.top_concepts:
        print(f"{cid} {score:.4f}")
    if args.head:
        head = load_label_head(args.head)
        pred = predict_label(head, scores)
        print(f"label: {pred.label} ({pred.head_kind})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_env(
        manifest_path=args.manifest,
        head_path=args.head,
        concept_model_path=args.concept_model,
        concept_source=args.concept_source,
        truth_path=args.truth,
        score_log_path=args.score_log,
        unblind=True if args.unblind else None,
        lexicon_path=None if args.lexicon in (None, "default") else args.lexicon,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conceptray",
        description="Concept-bottleneck workbench for chest X-ray pathology detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest (JSON Lines)")
        p.add_argument("--lexicon", default="default", help="lexicon JSON path or 'default'")
        p.add_argument("--seed", type=int, default=0, help="run seed (fanned out per stage)")
        p.add_argument(
            "--border-threshold",
            type=float,
            default=None,
            help="black-border crop threshold for image preprocessing (default 0.02)",
        )

    p = sub.add_parser("synth-gen", help="generate a synthetic phantom corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--negation-rate", type=float, default=0.25)
    p.add_argument("--label-mix", help="JSON object label -> probability")
    common(p, manifest=False)
    p.set_defaults(fn=cmd_synth_gen)

    p = sub.add_parser("extract", help="extract concept vectors from report text")
    common(p)
    p.add_argument("--out", help="annotated manifest output path")
    p.add_argument("--triggers", help="negation trigger table (JSON list) override")
    p.add_argument("--truth", help="truth sidecar for an exactness check")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train-concepts", help="train the concept predictor CNN")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--backbone", choices=("small", "paper"), default="small")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--oss", action="store_true", help="one-sided selection on the training split")
    p.set_defaults(fn=cmd_train_concepts)

    p = sub.add_parser("train-labels", help="train label head(s) on ground-truth vectors")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--head", choices=("dt", "svm", "mlp", "all"), default="all")
    p.add_argument("--dt-max-depth", type=int, default=12)
    p.set_defaults(fn=cmd_train_labels)

    ev = sub.add_parser("evaluate", help="evaluation harness")
    evsub = ev.add_subparsers(dest="what", required=True)

    p = evsub.add_parser("concepts", help="top-2 concept capture vs ground truth")
    common(p)
    p.add_argument("--concept-model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--import",
        dest="import_sets",
        action="append",
        help="NAME=PATH of JSONL {case_id, concepts} baseline sets",
    )
    p.set_defaults(fn=cmd_evaluate_concepts)

    p = evsub.add_parser("labels", help="label PRF on the test split")
    common(p)
    p.add_argument("--concept-model", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate_labels)

    p = evsub.add_parser("saliency", help="agreement curves and bbox capture")
    common(p)
    p.add_argument("--concept-model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--techniques", default="gradcam,occlusion")
    p.add_argument(
        "--import",
        dest="import_maps",
        action="append",
        help="NAME=DIR of per-case CSV saliency grids",
    )
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--n-grid", type=float, nargs="*")
    p.add_argument("--max-cases", type=int)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_evaluate_saliency)

    p = evsub.add_parser("expert", help="aggregate expert score logs")
    common(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_evaluate_expert)

    p = sub.add_parser("explain", help="top-2 concept explanation for one case")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--concept-model", required=True)
    p.add_argument("--head")
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("serve", help="run the review HTTP service")
    common(p)
    p.add_argument("--head")
    p.add_argument("--concept-model")
    p.add_argument("--concept-source", choices=("model", "truth"), default="model")
    p.add_argument("--truth")
    p.add_argument("--score-log", default="scores.jsonl")
    p.add_argument("--unblind", action="store_true")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConceptrayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
