"""Wire-level behavior of the HTTP app through an in-process client."""

import pytest

FIELDS = ("entail", "contradict", "neutral")


class TestHealth:
    def test_healthz_reports_ok_and_limits(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["nli_max_tokens"] == 32
        assert body["recall_max_tokens"] == 32


class TestRecallEndpoint:
    def test_scalar_shape(self, client):
        resp = client.post(
            "/v1/bertscore_recall",
            json={"candidate": "the cat sat", "reference": "the cat sat"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"recall"}
        assert 0.99 <= body["recall"] <= 1.0

    def test_batch_preserves_order(self, client):
        candidates = ["the cat sat", "a dog ran", "the old tree"]
        references = ["the cat sat", "the rug", "a red house"]
        resp = client.post(
            "/v1/bertscore_recall",
            json={"candidate": candidates, "reference": references},
        )
        assert resp.status_code == 200
        values = resp.json()["recall"]
        assert isinstance(values, list) and len(values) == 3
        for value, candidate, reference in zip(values, candidates, references):
            scalar = client.post(
                "/v1/bertscore_recall",
                json={"candidate": candidate, "reference": reference},
            ).json()["recall"]
            assert value == pytest.approx(scalar, abs=1e-6)

    def test_idf_flag_accepted_and_degrades_on_scalar(self, client):
        plain = client.post(
            "/v1/bertscore_recall",
            json={"candidate": "the cat sat", "reference": "a dog ran"},
        ).json()["recall"]
        weighted = client.post(
            "/v1/bertscore_recall",
            json={"candidate": "the cat sat", "reference": "a dog ran", "idf": True},
        ).json()["recall"]
        assert weighted == plain

    def test_empty_strings_score_zero(self, client):
        for payload in (
            {"candidate": "", "reference": "the cat"},
            {"candidate": "the cat", "reference": ""},
        ):
            resp = client.post("/v1/bertscore_recall", json=payload)
            assert resp.status_code == 200
            assert resp.json()["recall"] == 0.0

    def test_oversize_answers_413_with_limit(self, client):
        resp = client.post(
            "/v1/bertscore_recall",
            json={"candidate": "dog " * 40, "reference": "the cat"},
        )
        assert resp.status_code == 413
        assert "32" in resp.json()["detail"]

    def test_mismatched_batch_lengths_rejected(self, client):
        resp = client.post(
            "/v1/bertscore_recall",
            json={"candidate": ["a", "b"], "reference": ["a"]},
        )
        assert resp.status_code == 422

    def test_mixed_scalar_and_array_rejected(self, client):
        resp = client.post(
            "/v1/bertscore_recall",
            json={"candidate": ["a"], "reference": "a"},
        )
        assert resp.status_code == 422

    def test_missing_field_rejected(self, client):
        resp = client.post("/v1/bertscore_recall", json={"candidate": "a"})
        assert resp.status_code == 422


class TestNliEndpoint:
    def test_scalar_simplex(self, client):
        resp = client.post(
            "/v1/nli", json={"premise": "the cat sat", "hypothesis": "a dog ran"}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == set(FIELDS)
        for field in FIELDS:
            assert 0.0 <= body[field] <= 1.0
        assert abs(sum(body.values()) - 1.0) <= 1e-6

    def test_batch_preserves_order_and_simplex(self, client):
        premises = ["the cat sat", "a bird ate", "the house stood"]
        hypotheses = ["a dog ran", "the fish slept", "a quiet child walked"]
        resp = client.post("/v1/nli", json={"premise": premises, "hypothesis": hypotheses})
        assert resp.status_code == 200
        body = resp.json()
        assert all(len(body[field]) == 3 for field in FIELDS)
        for i in range(3):
            scalar = client.post(
                "/v1/nli", json={"premise": premises[i], "hypothesis": hypotheses[i]}
            ).json()
            total = 0.0
            for field in FIELDS:
                assert body[field][i] == pytest.approx(scalar[field], abs=1e-6)
                total += body[field][i]
            assert abs(total - 1.0) <= 1e-6

    def test_short_pair_carries_no_warning(self, client):
        body = client.post(
            "/v1/nli", json={"premise": "the cat", "hypothesis": "a dog"}
        ).json()
        assert "warning" not in body

    def test_truncated_hypothesis_warns_scalar(self, client):
        resp = client.post(
            "/v1/nli", json={"premise": "the cat sat", "hypothesis": "dog " * 40}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert "truncated" in body["warning"]
        assert abs(sum(body[field] for field in FIELDS) - 1.0) <= 1e-6

    def test_truncated_hypothesis_warns_batch(self, client):
        resp = client.post(
            "/v1/nli",
            json={
                "premise": ["the cat", "the cat sat"],
                "hypothesis": ["a dog", "dog " * 40],
            },
        )
        assert resp.status_code == 200
        warnings = resp.json()["warnings"]
        assert warnings[0] is None
        assert "truncated" in warnings[1]

    def test_oversize_premise_answers_413_with_limit(self, client):
        resp = client.post(
            "/v1/nli", json={"premise": "dog " * 40, "hypothesis": "the cat"}
        )
        assert resp.status_code == 413
        assert "32" in resp.json()["detail"]

    def test_mismatched_batch_lengths_rejected(self, client):
        resp = client.post(
            "/v1/nli", json={"premise": ["a", "b"], "hypothesis": ["a"]}
        )
        assert resp.status_code == 422


class TestDeterminism:
    def test_identical_requests_return_identical_bytes(self, client):
        requests = [
            ("/v1/bertscore_recall", {"candidate": "the cat sat", "reference": "a dog ran"}),
            ("/v1/nli", {"premise": "the cat sat", "hypothesis": "a dog ran"}),
        ]
        for path, payload in requests:
            first = client.post(path, json=payload)
            second = client.post(path, json=payload)
            assert first.content == second.content
