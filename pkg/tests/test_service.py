import concurrent.futures
import json

import pytest
from fastapi.testclient import TestClient

from conceptray.cbm import save_label_head, train_label_predictor
from conceptray.extraction import ConceptVector
from conceptray.service import ServiceConfig, create_app


@pytest.fixture(scope="module")
def service_bundle(tmp_path_factory, small_corpus, lex):
    out = tmp_path_factory.mktemp("service")
    vectors, labels = [], []
    for rec in small_corpus["records"]:
        entry = small_corpus["truth"][rec.case_id]
        vectors.append(ConceptVector(tuple(entry["concept_values"]), lex.lexicon_id))
        labels.append(rec.label)
    head = train_label_predictor(vectors, labels, "dt", lex, seed=0)
    head_path = out / "head.joblib"
    save_label_head(head, head_path)
    return {"out": out, "head_path": head_path}


def make_client(small_corpus, service_bundle, log_name, **kwargs):
    config = ServiceConfig(
        manifest_path=str(small_corpus["manifest"]),
        head_path=str(service_bundle["head_path"]),
        concept_source="truth",
        score_log_path=str(service_bundle["out"] / log_name),
        **kwargs,
    )
    return TestClient(create_app(config)), config


def test_list_cases_pagination_disjoint(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_page.jsonl")
    seen = []
    page = 1
    while True:
        body = client.get("/cases", params={"page": page, "page_size": 10}).json()
        if not body["cases"]:
            break
        seen.extend(c["case_id"] for c in body["cases"])
        page += 1
    assert len(seen) == len(set(seen)) == body["total"] == 160
    assert seen == sorted(seen)


def test_list_cases_cohort_filter(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_cohort.jsonl")
    total = client.get("/cases", params={"page_size": 500}).json()["total"]
    by_cohort = {
        c: client.get("/cases", params={"cohort": c, "page_size": 500}).json()["total"]
        for c in ("cancerous", "healthy", "other")
    }
    assert sum(by_cohort.values()) == total
    expected_cancer = sum(1 for r in small_corpus["records"] if r.label == "Lung Cancer")
    assert by_cohort["cancerous"] == expected_cancer


def test_list_cases_bad_filter(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_bad.jsonl")
    resp = client.get("/cases", params={"cohort": "weird"})
    assert resp.status_code == 400
    body = resp.json()
    assert set(body) == {"code", "message", "detail"}


def test_get_case_contract_and_cache_determinism(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_view.jsonl")
    case_id = small_corpus["records"][0].case_id
    first = client.get(f"/cases/{case_id}")
    assert first.status_code == 200
    view = first.json()
    assert len(view["concept_scores"]) == 17
    assert len(view["explanation"]) == 2
    assert view["explanation"][0]["score"] >= view["explanation"][1]["score"]
    assert "ground_truth_label" not in view  # blinded by default
    assert client.get(f"/cases/{case_id}").json() == view


def test_get_case_unknown_404(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_404.jsonl")
    resp = client.get("/cases/nope")
    assert resp.status_code == 404
    assert resp.json()["code"] == "not_found"


def test_unblind_flag(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_unblind.jsonl", unblind=True)
    case_id = small_corpus["records"][0].case_id
    view = client.get(f"/cases/{case_id}").json()
    assert view["ground_truth_label"] == small_corpus["records"][0].label


def test_score_flow_and_aggregation(small_corpus, service_bundle):
    client, config = make_client(small_corpus, service_bundle, "log_flow.jsonl")
    healthy = next(r for r in small_corpus["records"] if r.label == "Healthy")
    resp = client.post(
        f"/cases/{healthy.case_id}/score",
        json={"technique": "cbm", "rater_id": "r1", "score": 3},
    )
    assert resp.status_code == 200
    agg = client.get("/metrics/expert-scores").json()
    assert agg["totals"] == {"cbm": 1}
    assert agg["histograms"]["cbm"]["healthy"][3] == 1


def test_score_validation_nothing_written(small_corpus, service_bundle):
    client, config = make_client(small_corpus, service_bundle, "log_valid.jsonl")
    case_id = small_corpus["records"][0].case_id
    for bad in (5, -1, 2.5, "2", None):
        resp = client.post(
            f"/cases/{case_id}/score",
            json={"technique": "cbm", "rater_id": "r1", "score": bad},
        )
        assert resp.status_code == 400
    resp = client.post("/cases/ghost/score", json={"technique": "t", "rater_id": "r", "score": 1})
    assert resp.status_code == 404
    assert not (service_bundle["out"] / "log_valid.jsonl").exists()


def test_score_append_only_and_durable_restart(small_corpus, service_bundle):
    client, config = make_client(small_corpus, service_bundle, "log_durable.jsonl")
    ids = [r.case_id for r in small_corpus["records"][:10]]
    for i, case_id in enumerate(ids):
        client.post(
            f"/cases/{case_id}/score",
            json={"technique": "cbm", "rater_id": "r1", "score": i % 4},
        )
    before = client.get("/metrics/expert-scores").json()
    log_path = service_bundle["out"] / "log_durable.jsonl"
    lines = log_path.read_text().strip().splitlines()
    assert len(lines) == 10
    # Restart: a new app instance over the same log reproduces the aggregates.
    client2, _ = make_client(small_corpus, service_bundle, "log_durable.jsonl")
    after = client2.get("/metrics/expert-scores").json()
    assert after == before


def test_concurrent_submissions_all_durable(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_concurrent.jsonl")
    ids = [r.case_id for r in small_corpus["records"][:20]]

    def submit(i):
        return client.post(
            f"/cases/{ids[i % len(ids)]}/score",
            json={"technique": f"t{i % 3}", "rater_id": f"r{i}", "score": i % 4},
        ).status_code

    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
        codes = list(pool.map(submit, range(40)))
    assert codes == [200] * 40
    lines = (service_bundle["out"] / "log_concurrent.jsonl").read_text().strip().splitlines()
    assert len(lines) == 40
    record_ids = [json.loads(line)["record_id"] for line in lines]
    assert len(set(record_ids)) == 40


def test_client_token_idempotent(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_token.jsonl")
    case_id = small_corpus["records"][0].case_id
    body = {
        "technique": "cbm",
        "rater_id": "r1",
        "score": 2,
        "client_token": "tok-123",
    }
    first = client.post(f"/cases/{case_id}/score", json=body).json()
    second = client.post(f"/cases/{case_id}/score", json=body).json()
    assert first["record_id"] == second["record_id"]
    assert second["duplicate"] is True
    lines = (service_bundle["out"] / "log_token.jsonl").read_text().strip().splitlines()
    assert len(lines) == 1


def test_intervene_identity_and_stateless(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_int.jsonl")
    case_id = small_corpus["records"][0].case_id
    view_before = client.get(f"/cases/{case_id}").json()
    resp = client.post(f"/cases/{case_id}/intervene", json={"overrides": {}})
    body = resp.json()
    assert body["pre"]["label"] == body["post"]["label"]
    assert client.get(f"/cases/{case_id}").json() == view_before


def test_intervene_forces_healthy(small_corpus, service_bundle, lex):
    client, _ = make_client(small_corpus, service_bundle, "log_int2.jsonl")
    cancer = next(r for r in small_corpus["records"] if r.label == "Lung Cancer")
    overrides = {c.id: 0 for c in lex.concepts if c.id != "unremarkable"}
    overrides["unremarkable"] = 1
    body = client.post(f"/cases/{cancer.case_id}/intervene", json={"overrides": overrides}).json()
    assert body["pre"]["label"] == "Lung Cancer"
    assert body["post"]["label"] == "Healthy"
    assert body["post_explanation"][0]["concept_id"] == "unremarkable"


def test_intervene_unknown_concept_no_state_change(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_int3.jsonl")
    case_id = small_corpus["records"][0].case_id
    view_before = client.get(f"/cases/{case_id}").json()
    resp = client.post(f"/cases/{case_id}/intervene", json={"overrides": {"zebra": 1}})
    assert resp.status_code == 400
    assert resp.json()["code"] == "unknown_concept"
    assert client.get(f"/cases/{case_id}").json() == view_before


def test_images_served(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_img.jsonl")
    case_id = small_corpus["records"][0].case_id
    resp = client.get(f"/images/{case_id}")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    assert resp.content.startswith(b"\x89PNG")


def test_status_filter(small_corpus, service_bundle):
    client, _ = make_client(small_corpus, service_bundle, "log_status.jsonl")
    case_id = small_corpus["records"][0].case_id
    client.post(
        f"/cases/{case_id}/score", json={"technique": "cbm", "rater_id": "r9", "score": 1}
    )
    scored = client.get("/cases", params={"status": "scored", "page_size": 500}).json()
    assert [c["case_id"] for c in scored["cases"]] == [case_id]
    unscored = client.get("/cases", params={"status": "unscored", "page_size": 500}).json()
    assert unscored["total"] == 159
