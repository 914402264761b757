import numpy as np
import pytest
from fastapi.testclient import TestClient

import rankmobility
from rankmobility.errors import EstimationError
from rankmobility.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def _rows(n=60, grouped=False, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    z[:, 1] = 0.5 * z[:, 0] + np.sqrt(0.75) * z[:, 1]
    rows = []
    for i in range(n):
        row = {"parent_income": float(z[i, 0]), "child_income": float(z[i, 1])}
        if grouped:
            row["group"] = "a" if i % 2 == 0 else "b"
        rows.append(row)
    return rows


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "version": rankmobility.__version__}


def test_estimate_beta_default_grid(client):
    r = client.post("/estimate", json={"data": _rows(), "tau": 0.1})
    assert r.status_code == 200
    body = r.json()
    assert body["estimator"] == "beta"
    assert body["n"] == 60
    assert body["tau"] == 0.1
    # default percentile grid trimmed to s + tau < 1
    ss = [p["s"] for p in body["points"]]
    assert ss[0] == 0.01 and ss[-1] == 0.89
    assert all(0.0 <= p["value"] <= 1.0 for p in body["points"])
    assert all(p["flag"] == "" for p in body["points"])


def test_estimate_ebc_orders_and_grid_spec(client):
    grid = {"start": 0.2, "stop": 0.8, "step": 0.2}
    r = client.post(
        "/estimate",
        json={"data": _rows(), "estimator": "ebc", "m": 6, "grid": grid},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["estimator"] == "ebc(m=6)"
    assert [p["s"] for p in body["points"]] == [0.2, 0.4, 0.6, 0.8]

    r2 = client.post(
        "/estimate",
        json={"data": _rows(), "estimator": "ebc", "m": "sqrt-n", "grid": grid},
    )
    # ceil(sqrt(60)) = 8
    assert r2.json()["estimator"] == "ebc(m=8)"
    r3 = client.post(
        "/estimate", json={"data": _rows(), "estimator": "ebc", "grid": grid}
    )
    assert r3.json()["estimator"] == "ebc(m=8)"


def test_estimate_dr(client):
    r = client.post(
        "/estimate",
        json={
            "data": _rows(),
            "estimator": "dr",
            "link": "probit",
            "design": "quadratic",
            "grid": {"start": 0.3, "stop": 0.7, "step": 0.1},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["estimator"] == "dr(probit,quadratic)"
    assert body["warnings"] == []


def test_estimate_domain_and_input_errors_are_400(client):
    # grid + tau walks out of (0, 1)
    r = client.post(
        "/estimate",
        json={
            "data": _rows(),
            "tau": 0.5,
            "grid": {"start": 0.3, "stop": 0.6, "step": 0.1},
        },
    )
    assert r.status_code == 400
    assert "s + tau" in r.json()["detail"]

    # group set on some rows only
    rows = _rows(10)
    rows[0]["group"] = "a"
    r2 = client.post("/estimate", json={"data": rows})
    assert r2.status_code == 400
    assert "every row" in r2.json()["detail"]


def test_estimate_schema_errors_are_422(client):
    r = client.post("/estimate", json={"data": _rows(), "estimator": "kernel"})
    assert r.status_code == 422
    r2 = client.post("/estimate", json={"data": []})
    assert r2.status_code == 422
    r3 = client.post(
        "/estimate", json={"data": [{"parent_income": 1.0}]}
    )
    assert r3.status_code == 422


def test_bands_plain_and_seeded(client):
    payload = {
        "data": _rows(80),
        "estimator": "beta",
        "tau": 0.0,
        "grid": {"start": 0.2, "stop": 0.6, "step": 0.2},
        "n_boot": 60,
        "alpha": 0.1,
        "seed": 11,
    }
    r1 = client.post("/bands", json=payload)
    assert r1.status_code == 200
    b1 = r1.json()
    assert b1["dominance"] is None
    assert b1["n_boot"] == 60
    assert b1["redraws"] == 0
    assert len(b1["points"]) == 3
    p = b1["points"][0]
    assert p["uniform_lo"] <= p["pointwise_lo"] <= p["center"]
    assert p["center"] <= p["pointwise_hi"] <= p["uniform_hi"]

    b2 = client.post("/bands", json=payload).json()
    assert b1 == b2
    payload2 = dict(payload, seed=12)
    b3 = client.post("/bands", json=payload2).json()
    assert b1 != b3


def test_bands_difference_with_dominance(client):
    payload = {
        "data": _rows(90, grouped=True),
        "estimator": "dr",
        "link": "logit",
        "design": "linear",
        "grid": {"start": 0.3, "stop": 0.7, "step": 0.1},
        "n_boot": 60,
        "group_a": "a",
        "group_b": "b",
        "seed": 4,
    }
    r = client.post("/bands", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert body["estimator"] == "dr(logit,linear|a-b)"
    dom = body["dominance"]
    assert set(dom) == {"intervals", "nonempty", "violation"}

    # one group name missing
    bad = dict(payload)
    bad.pop("group_b")
    r2 = client.post("/bands", json=bad)
    assert r2.status_code == 400
    assert "both group_a and group_b" in r2.json()["detail"]

    unknown = dict(payload, group_b="zz")
    r3 = client.post("/bands", json=unknown)
    assert r3.status_code == 400
    assert "unknown group" in r3.json()["detail"]


def test_simulate_echo_and_metrics(client):
    payload = {
        "family": "gaussian",
        "tau_k": 0.5,
        "n": 40,
        "reps": 5,
        "tau": 0.1,
        "estimators": ["beta", "ebc-sqrt-n"],
        "seed": 3,
    }
    r = client.post("/simulate", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert body["family"] == "gaussian"
    assert body["kendall_tau"] == pytest.approx(0.5)
    assert body["theta"] == pytest.approx(np.sin(np.pi * 0.25))
    assert body["seed_used"] == 3
    assert body["overlay"] is None
    tags = [m["estimator"] for m in body["metrics"]]
    assert tags == ["beta", "ebc-sqrt-n"]
    assert all(m["rimse_x100"] >= m["risb_x100"] for m in body["metrics"])

    with_overlay = dict(payload, overlay_reps=2)
    r2 = client.post("/simulate", json=with_overlay)
    series = {row["series"] for row in r2.json()["overlay"]}
    assert "true" in series and "rep001:beta" in series


def test_simulate_parameter_errors_are_400(client):
    base = {"family": "independence", "n": 30, "reps": 2, "estimators": ["beta"]}
    ok = client.post("/simulate", json=base)
    assert ok.status_code == 200
    assert ok.json()["theta"] is None

    r = client.post("/simulate", json=dict(base, theta=2.0))
    assert r.status_code == 400
    assert "no parameter" in r.json()["detail"]

    gauss = {"family": "gaussian", "n": 30, "reps": 2, "estimators": ["beta"]}
    r2 = client.post("/simulate", json=dict(gauss, theta=0.5, tau_k=0.5))
    assert r2.status_code == 400
    r3 = client.post("/simulate", json=gauss)
    assert r3.status_code == 400

    r4 = client.post("/simulate", json=dict(gauss, tau_k=0.5, estimators=["x"]))
    assert r4.status_code == 400
    assert "unknown estimator tag" in r4.json()["detail"]

    r5 = client.post("/simulate", json=dict(base, family="frank"))
    assert r5.status_code == 422


def test_estimation_error_maps_to_500():
    app = create_app()

    @app.get("/boom")
    def boom():
        raise EstimationError("deliberate failure")

    local = TestClient(app, raise_server_exceptions=False)
    r = local.get("/boom")
    assert r.status_code == 500
    assert r.json() == {"detail": "deliberate failure"}
