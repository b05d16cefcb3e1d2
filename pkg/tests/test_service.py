import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from oufield import synthetic
from oufield.config import load_inputs, load_run_config
from oufield.inference import MCMCConfig, run_chains
from oufield.service import (
    build_bundle_from_fit,
    create_app,
    load_bundle,
    save_bundle,
)

import helpers  # noqa: F401


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("svc")
    case = synthetic.make_case(nx=6, ny=6, seed=4)
    cfg_path = synthetic.write_case(case, tmp)
    config = load_run_config(cfg_path)
    inputs = load_inputs(config)
    mcmc = MCMCConfig(n_chains=2, iterations=300, burn_in=100,
                      start=[case.theta, case.theta.replace(gamma=800.0)])
    traces = run_chains(case.model.clone(), inputs.v_obs, inputs.mask, mcmc,
                        seeds=[1, 2])
    return build_bundle_from_fit(config, inputs, traces, n_sub=150, sub_seed=3)


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle), raise_server_exceptions=False)


class TestEndpoints:
    def test_facilities(self, client):
        r = client.get("/api/facilities")
        assert r.status_code == 200
        facs = r.json()
        assert [f["id"] for f in facs] == sorted(f["id"] for f in facs)
        assert {"id", "name", "lon", "lat", "so2_tons"} <= set(facs[0])

    def test_model_info(self, client, bundle):
        r = client.get("/api/model")
        assert r.status_code == 200
        doc = r.json()
        assert set(doc["theta_posterior_mean"]) == {
            "gamma", "alpha", "eta", "beta", "sigma2"}
        assert doc["grid"]["nx"] == 6 and doc["grid"]["ny"] == 6
        assert doc["delta"] == 50.0 and doc["T"] == 1.0
        assert doc["n_trace"] == bundle.pooled.shape[0]
        for lo, hi in doc["ci95"].values():
            assert lo <= hi

    def test_mean_field(self, client, bundle):
        r = client.get("/api/field/mean")
        assert r.status_code == 200
        field = r.json()["mean_field"]
        assert len(field) == bundle.grid.n
        assert all(math.isfinite(x) for x in field)
        assert max(field) > 0

    def test_null_scenario_preview_is_zero(self, client):
        r = client.post("/api/forecast", json={
            "reductions": {}, "n_draws": 1, "seed": 0, "mode": "preview"})
        assert r.status_code == 200
        doc = r.json()
        assert all(x == 0.0 for x in doc["mean_field"])
        assert doc["exposure"]["mean"] == 0.0

    def test_preview_deterministic_bytes(self, client):
        body = {"reductions": {"big_west": 0.8}, "n_draws": 50, "seed": 42,
                "mode": "preview", "rank": ["big_west", "mid_north"]}
        r1 = client.post("/api/forecast", json=body)
        r2 = client.post("/api/forecast", json=body)
        assert r1.status_code == 200
        assert r1.content == r2.content

    def test_full_mode_deterministic_bytes(self, client):
        body = {"reductions": {"big_west": 0.8}, "n_draws": 40, "seed": 7,
                "mode": "full"}
        r1 = client.post("/api/forecast", json=body)
        r2 = client.post("/api/forecast", json=body)
        assert r1.status_code == 200
        assert r1.content == r2.content
        doc = r1.json()
        assert doc["exposure"]["lo"] <= doc["exposure"]["mean"] <= doc["exposure"]["hi"]
        assert doc["exposure"]["mean"] > 0

    def test_superposition_through_the_wire(self, client):
        def exposure(reductions, seed):
            r = client.post("/api/forecast", json={
                "reductions": reductions, "n_draws": 400, "seed": seed,
                "mode": "full"})
            assert r.status_code == 200
            return r.json()["exposure"]

        both = exposure({"big_west": 0.8, "mid_north": 0.8}, 1)
        a = exposure({"big_west": 0.8}, 2)
        b = exposure({"mid_north": 0.8}, 3)
        se = (both["hi"] - both["lo"]) / 3.92 / math.sqrt(400)
        combined_se = 3 * se * math.sqrt(3)
        assert abs(both["mean"] - (a["mean"] + b["mean"])) < combined_se + \
            0.02 * abs(both["mean"])

    def test_preview_matches_full_mean_roughly(self, client):
        body = {"reductions": {"big_west": 0.8}, "n_draws": 400, "seed": 4}
        pv = client.post("/api/forecast", json={**body, "mode": "preview"}).json()
        fl = client.post("/api/forecast", json={**body, "mode": "full"}).json()
        assert fl["exposure"]["mean"] == pytest.approx(pv["exposure"]["mean"],
                                                       rel=0.1)

    def test_ranking_order_and_fields(self, client):
        body = {"reductions": {}, "n_draws": 30, "seed": 0, "mode": "preview",
                "fraction_default": 0.8,
                "rank": ["big_west", "mid_north", "mid_south", "east_edge",
                         "small_mid"]}
        doc = client.post("/api/forecast", json=body).json()
        ranking = doc["ranking"]
        means = [r["mean"] for r in ranking]
        assert means == sorted(means, reverse=True)
        assert ranking[0]["id"] == "big_west"
        for row in ranking:
            assert row["lo"] <= row["mean"] <= row["hi"]


class TestErrors:
    def test_unknown_facility_400(self, client):
        r = client.post("/api/forecast", json={
            "reductions": {"ghost": 0.5}, "n_draws": 5, "seed": 0,
            "mode": "preview"})
        assert r.status_code == 400
        err = r.json()["error"]
        assert err["code"] == "bad_request"
        assert "ghost" in err["message"]

    def test_bad_fraction_400(self, client):
        r = client.post("/api/forecast", json={
            "reductions": {"big_west": 1.5}, "n_draws": 5, "seed": 0})
        assert r.status_code == 400

    def test_malformed_body_400(self, client):
        r = client.post("/api/forecast", content=b"{not json",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_no_model_409(self):
        empty = TestClient(create_app(None), raise_server_exceptions=False)
        for path in ("/api/facilities", "/api/model", "/api/field/mean"):
            assert empty.get(path).status_code == 409
        r = empty.post("/api/forecast", json={"reductions": {}})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "no_model"


class TestBundlePersistence:
    def test_two_servers_answer_identically(self, bundle, tmp_path):
        path = tmp_path / "bundle.npz"
        save_bundle(path, bundle)
        b2 = load_bundle(path)
        c1 = TestClient(create_app(bundle))
        c2 = TestClient(create_app(b2))
        body = {"reductions": {"big_west": 0.8}, "n_draws": 25, "seed": 9,
                "mode": "full", "rank": ["big_west", "mid_north"]}
        for path_ in ("/api/facilities", "/api/model", "/api/field/mean"):
            assert c1.get(path_).content == c2.get(path_).content
        assert c1.post("/api/forecast", json=body).content == \
            c2.post("/api/forecast", json=body).content

    def test_missing_bundle_file(self, tmp_path):
        from oufield.exceptions import DataError
        with pytest.raises(DataError):
            load_bundle(tmp_path / "nothing.npz")
