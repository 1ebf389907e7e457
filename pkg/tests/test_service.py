from fastapi.testclient import TestClient

from consensus_aladin import __version__
from consensus_aladin.diagnostics import CSV_HEADER
from consensus_aladin.service import app

client = TestClient(app)

QUICK_RUN = {
    "problem": "quadratic",
    "algo": "reduced-aladin",
    "N": 2,
    "n": 2,
    "rho": 2.0,
    "max_iter": 5,
    "seed": 1,
    "threads": 1,
}


def strip_wall_ms(csv_text: str) -> str:
    out = []
    for line in csv_text.splitlines():
        if line.startswith("#") or line.startswith("round"):
            out.append(line)
        else:
            out.append(line.rsplit(",", 1)[0])
    return "\n".join(out)


def test_healthz():
    resp = client.get("/healthz")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_discovery_endpoints():
    algos = client.get("/algorithms").json()
    assert "bfgs-aladin" in algos and "admm-aggregate-first" in algos
    problems = client.get("/problems").json()
    assert problems == ["quadratic", "pseudo-huber", "sensor-allocation"]


def test_run_endpoint_returns_csv_and_summary():
    resp = client.post("/run", json=QUICK_RUN)
    assert resp.status_code == 200
    body = resp.json()
    lines = body["csv"].splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 5 + 1
    summary = body["summary"]
    assert summary["rounds"] == 5
    assert summary["total_floats_up"] == 5 * 2 * 2
    assert summary["stopped_early"] is False


def test_run_endpoint_is_deterministic_modulo_timing():
    a = client.post("/run", json=QUICK_RUN).json()["csv"]
    b = client.post("/run", json=QUICK_RUN).json()["csv"]
    assert strip_wall_ms(a) == strip_wall_ms(b)


def test_run_endpoint_domain_validation():
    resp = client.post("/run", json={**QUICK_RUN, "algo": "nope"})
    assert resp.status_code == 400
    assert "unknown algorithm" in resp.json()["detail"]


def test_run_endpoint_pydantic_validation():
    resp = client.post("/run", json={**QUICK_RUN, "rho": -1.0})
    assert resp.status_code == 422


def test_run_endpoint_solver_failure():
    resp = client.post("/run", json={**QUICK_RUN, "tol": 1e-300, "max_iter": 1})
    assert resp.status_code == 500
    detail = resp.json()["detail"]
    assert detail["error"] == "subproblem failure"
    assert "agent" in detail and "round" in detail


def test_compare_endpoint():
    resp = client.post(
        "/compare",
        json={
            "problem": "quadratic",
            "algos": ["reduced-aladin", "admm-aggregate-first"],
            "N": 2,
            "n": 2,
            "rho": 2.0,
            "max_iter": 4,
            "seed": 9,
            "threads": 1,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    lines = body["csv"].splitlines()
    assert lines[0] == "round,reduced-aladin,admm-aggregate-first"
    assert len(lines) == 1 + 4
    assert set(body["summaries"]) == {"reduced-aladin", "admm-aggregate-first"}


def test_compare_endpoint_rejects_duplicate_algos():
    resp = client.post(
        "/compare",
        json={"problem": "quadratic", "algos": ["reduced-aladin", "reduced-aladin"], "N": 2, "n": 2, "max_iter": 2},
    )
    assert resp.status_code == 400
