"""Record request/response fixtures for the frontend tests.

Builds a deterministic model bundle from the synthetic case, runs the real
HTTP service in-process, and captures all four endpoints (plus a committed-
scenario forecast for the decision-loop test).  Run from the repo root:

    python3 frontend/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from oufield import synthetic
from oufield.config import load_inputs, load_run_config
from oufield.inference import MCMCConfig, run_chains
from oufield.service import build_bundle_from_fit, create_app

FIXTURE_DIR = Path(__file__).parent / "tests" / "fixtures"


def build_client() -> TestClient:
    tmp = Path(tempfile.mkdtemp())
    case = synthetic.make_case(nx=8, ny=8, seed=4)
    cfg_path = synthetic.write_case(case, tmp)
    config = load_run_config(cfg_path)
    inputs = load_inputs(config)
    mcmc = MCMCConfig(n_chains=2, iterations=400, burn_in=100,
                      start=[case.theta, case.theta.replace(gamma=1200.0)])
    traces = run_chains(case.model.clone(), inputs.v_obs, inputs.mask, mcmc,
                        seeds=[1, 2])
    bundle = build_bundle_from_fit(config, inputs, traces, n_sub=120, sub_seed=3)
    return TestClient(create_app(bundle))


def record(client: TestClient) -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)

    def save(name, request, response):
        assert response.status_code == 200, (name, response.status_code)
        doc = {"request": request, "status": response.status_code,
               "response": json.loads(response.content)}
        (FIXTURE_DIR / f"{name}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"recorded {name}.json")

    save("facilities", {"method": "GET", "path": "/api/facilities"},
         client.get("/api/facilities"))
    save("model", {"method": "GET", "path": "/api/model"},
         client.get("/api/model"))
    save("field_mean", {"method": "GET", "path": "/api/field/mean"},
         client.get("/api/field/mean"))

    all_ids = [f["id"] for f in client.get("/api/facilities").json()]
    preview_body = {"reductions": {}, "n_draws": 50, "seed": 42,
                    "mode": "preview", "fraction_default": 0.8,
                    "rank": all_ids}
    r1 = client.post("/api/forecast", json=preview_body)
    r2 = client.post("/api/forecast", json=preview_body)
    assert r1.content == r2.content, "preview must be byte-identical"
    save("forecast_preview",
         {"method": "POST", "path": "/api/forecast", "body": preview_body}, r1)

    top = r1.json()["ranking"][0]["id"]
    committed_body = {"reductions": {top: 0.8}, "n_draws": 50, "seed": 42,
                      "mode": "preview", "fraction_default": 0.8,
                      "rank": [i for i in all_ids if i != top]}
    save("forecast_committed",
         {"method": "POST", "path": "/api/forecast", "body": committed_body},
         client.post("/api/forecast", json=committed_body))
    print(f"dominant facility in the fixture: {top}")


if __name__ == "__main__":
    record(build_client())
