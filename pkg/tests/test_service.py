import numpy as np
import pytest
from fastapi.testclient import TestClient

from memd.service import app

client = TestClient(app)


def gaussian_csv(seed=0, n_per_class=40, d=5, informative=(1,), delta=5.0) -> str:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2 * n_per_class, d))
    labels = np.repeat(["neg", "pos"], n_per_class)
    for i in informative:
        X[n_per_class:, i] += delta
    lines = ["label," + ",".join(f"f{i + 1}" for i in range(d))]
    for row, label in zip(X, labels):
        lines.append(label + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


BASE = dict(orders=2, support="real", method="j", seed=3)


def test_health():
    response = client.get("/v1/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"


class TestFitEndpoint:
    def test_fit_returns_model_text(self):
        response = client.post(
            "/v1/fit", json={"data": gaussian_csv(), "format": "csv", "k": 2, **BASE}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["chosen_k"] == 2
        assert body["n_classes"] == 2
        assert body["n_features"] == 5
        assert 1 in body["selected"]  # the informative feature
        assert '"format": "memd-model"' in body["model"]

    def test_fit_auto_k(self):
        response = client.post(
            "/v1/fit", json={"data": gaussian_csv(), "format": "csv", "k": "auto", **BASE}
        )
        assert response.status_code == 200
        assert 1 <= response.json()["chosen_k"] <= 5

    def test_parse_error_maps_to_exit_code_2(self):
        response = client.post(
            "/v1/fit", json={"data": "label,f1\nA,oops\nB,1.0\n", "format": "csv", "k": 1, **BASE}
        )
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["kind"] == "ParseError"
        assert detail["exit_code"] == 2

    def test_config_error_maps_to_exit_code_3(self):
        payload = {"data": gaussian_csv(), "format": "csv", "k": 99, **BASE}
        response = client.post("/v1/fit", json=payload)
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["kind"] == "InvalidK"
        assert detail["exit_code"] == 3

    def test_real_support_with_one_moment_rejected(self):
        payload = {"data": gaussian_csv(), "format": "csv", "orders": 1,
                   "support": "real", "k": 1}
        response = client.post("/v1/fit", json=payload)
        assert response.status_code == 400
        assert response.json()["detail"]["kind"] == "ConfigError"

    def test_unknown_format_rejected_by_validation(self):
        response = client.post("/v1/fit", json={"data": "x", "format": "parquet"})
        assert response.status_code == 422


class TestRankEndpoint:
    def test_rank_csv_header_and_length(self):
        response = client.post(
            "/v1/rank", json={"data": gaussian_csv(), "format": "csv", **BASE}
        )
        assert response.status_code == 200
        lines = response.json()["csv"].strip().split("\n")
        assert lines[0] == "feature_id,score,rank"
        assert len(lines) == 6
        assert lines[1].startswith("1,")  # informative feature first


class TestPredictEndpoint:
    def test_round_trip_accuracy(self):
        train = gaussian_csv(seed=1)
        fitted = client.post(
            "/v1/fit", json={"data": train, "format": "csv", "k": 1, **BASE}
        ).json()
        test = gaussian_csv(seed=2)
        response = client.post(
            "/v1/predict", json={"model": fitted["model"], "data": test, "format": "csv"}
        )
        assert response.status_code == 200
        lines = response.json()["csv"].strip().split("\n")
        assert lines[0] == "instance_id,predicted_label,log_posterior_neg,log_posterior_pos"
        predictions = [line.split(",")[1] for line in lines[1:]]
        truth = ["neg"] * 40 + ["pos"] * 40
        agreement = np.mean([p == t for p, t in zip(predictions, truth)])
        assert agreement > 0.95

    def test_garbage_model_rejected(self):
        response = client.post(
            "/v1/predict", json={"model": "junk", "data": gaussian_csv(), "format": "csv"}
        )
        assert response.status_code == 400
        assert response.json()["detail"]["kind"] == "ConfigError"

    def test_sparse_data_padded_to_model_width(self):
        train = gaussian_csv(seed=4)
        fitted = client.post(
            "/v1/fit", json={"data": train, "format": "csv", "k": 1, **BASE}
        ).json()
        response = client.post(
            "/v1/predict",
            json={"model": fitted["model"], "data": "pos 2:4.9\nneg 1:0.1\n", "format": "sparse"},
        )
        assert response.status_code == 200


class TestCvEndpoint:
    def test_cv_report_fields(self):
        payload = {"data": gaussian_csv(), "format": "csv", "k": 2, "folds": 4, **BASE}
        response = client.post("/v1/cv", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert len(body["fold_accuracies"]) == 4
        assert body["mean_accuracy"] == pytest.approx(
            sum(body["fold_accuracies"]) / 4
        )
        assert body["report"].startswith("# memd cross-validation report v1")
        assert body["total_seconds"] > 0

    def test_cv_deterministic_report(self):
        payload = {"data": gaussian_csv(), "format": "csv", "k": 2, "folds": 3, **BASE}
        a = client.post("/v1/cv", json=payload).json()["report"]
        b = client.post("/v1/cv", json=payload).json()["report"]
        assert a == b

    def test_corpus_cv(self):
        corpus = (
            "spam\tbuy pills buy pills now\n"
            "spam\tcheap pills cheap deals now\n"
            "spam\tbuy cheap deals deals\n"
            "spam\tpills deals pills now\n"
            "ham\tmeeting notes agenda notes\n"
            "ham\tagenda for the meeting notes\n"
            "ham\tnotes from the meeting agenda\n"
            "ham\tthe agenda meeting follow up\n"
        )
        payload = {"data": corpus, "format": "corpus", "orders": 1,
                   "support": "halfline", "k": 3, "folds": 2, "seed": 5, "gamma": 2}
        response = client.post("/v1/cv", json=payload)
        assert response.status_code == 200
        assert len(response.json()["fold_accuracies"]) == 2
