import json
import math

import numpy as np
import pytest

from hardedge.ensemble import EnsembleParams
from hardedge.verify import (
    ExperimentConfig,
    PhiSpec,
    _isserlis,
    run_campaign,
    run_centering_rate,
    run_clt,
    run_escape,
    run_hitting,
    run_moments,
    run_tv_decay,
)

SMALL = EnsembleParams(alpha=0.0, b=1.0, rho=0.5, n=20)


def finite_z_rows(report):
    return [r for r in report.rows if r["z"] is not None]


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="nope", params=SMALL)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="clt", params=SMALL, replicates=1)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="clt", params=SMALL, grid=(2.0, 1.0))
        with pytest.raises(ValueError):
            ExperimentConfig(kind="clt", params=SMALL, workers=0)

    def test_phi_spec_parse(self):
        assert PhiSpec.parse("one").kind == "one"
        assert PhiSpec.parse("rational").kind == "rational"
        spec = PhiSpec.parse("exp_decay:0.25")
        assert spec.kind == "exp_decay" and spec.param == 0.25
        with pytest.raises(ValueError):
            PhiSpec.parse("cubic")

    def test_phi_spec_table(self, tmp_path):
        path = tmp_path / "phi.csv"
        path.write_text("x,phi\n0.0,1.0\n1.0,2.0\n4.0,0.5\n")
        spec = PhiSpec.parse(f"table:{path}")
        phi = spec.build()
        assert phi.positive
        assert phi(np.array([0.5]))[0] == pytest.approx(1.5)


class TestCltCampaign:
    def test_smoke_report_well_formed(self):
        cfg = ExperimentConfig(kind="clt", params=EnsembleParams(0.0, 1.0, 0.5, 10),
                               grid=(0.5, 1.0), replicates=2, seed=1)
        report = run_clt(cfg)
        assert report.campaign == "clt"
        assert all(np.isfinite(r["z"]) for r in finite_z_rows(report))
        assert report.to_json().startswith("{")
        parsed = json.loads(report.to_json())
        assert parsed["schema_version"] == 1

    def test_moderate_run_passes(self):
        cfg = ExperimentConfig(kind="clt", params=EnsembleParams(0.0, 1.0, 0.5, 100),
                               grid=(0.5, 1.0, 2.0), replicates=800, seed=3)
        report = run_clt(cfg)
        assert report.passed, report.failures()

    def test_empirical_centering_flag(self):
        cfg = ExperimentConfig(kind="clt", params=SMALL, grid=(1.0,), replicates=50,
                               seed=2, center_empirical=True)
        report = run_clt(cfg)
        mean_rows = [r for r in report.rows if r["record"] == "mean"]
        assert mean_rows[0]["estimate"] == pytest.approx(0.0, abs=1e-15)

    def test_worker_count_does_not_change_bytes(self):
        base = dict(kind="clt", params=EnsembleParams(0.0, 1.0, 0.5, 30),
                    grid=(0.5, 2.0), replicates=300, seed=11)
        r1 = run_clt(ExperimentConfig(**base, workers=1))
        r3 = run_clt(ExperimentConfig(**base, workers=3))
        # worker count is part of the resolved config, so compare rows/assertions
        assert r1.rows == r3.rows
        assert r1.assertions == r3.assertions
        assert r1.to_csv() == r3.to_csv()

    def test_wall_time_not_in_canonical_bytes(self):
        cfg = ExperimentConfig(kind="clt", params=SMALL, grid=(1.0,), replicates=4, seed=0)
        report = run_clt(cfg)
        assert report.wall_time_s is not None
        assert "wall_time" not in report.to_json()


class TestEscapeCampaign:
    def test_ladder_and_mass(self):
        cfg = ExperimentConfig(kind="escape", params=EnsembleParams(0.0, 1.0, 0.5, 100),
                               n_ladder=(50, 100, 200), delta=0.2, horizon=10.0,
                               replicates=200, seed=5, escape_threshold=1.0)
        report = run_escape(cfg)
        exact = [r for r in report.rows if r["record"] == "escape_exact_max_cdf"]
        vals = [r["estimate"] for r in exact]
        assert vals == sorted(vals, reverse=True)
        names = {a["name"] for a in report.assertions}
        assert "escape_exact_strictly_decreasing" in names
        assert "total_mass_is_one" in names
        assert report.passed, report.failures()


class TestTvCampaign:
    def test_single_n_smoke(self):
        cfg = ExperimentConfig(kind="tv_decay", params=EnsembleParams(0.0, 1.0, 0.5, 100),
                               delta=0.1, seed=0, tv_threshold=1.0)
        report = run_tv_decay(cfg)
        assert report.passed, report.failures()
        row = [r for r in report.rows if r["record"] == "tv_exact_at_argmax"][0]
        assert row["estimate"] <= row["target"] + 1e-12

    def test_ladder_decreases(self):
        cfg = ExperimentConfig(kind="tv_decay", params=EnsembleParams(0.0, 1.0, 0.5, 100),
                               n_ladder=(100, 400, 1600), delta=0.2, seed=0,
                               tv_threshold=0.2)
        report = run_tv_decay(cfg)
        assert report.passed, report.failures()


class TestCenteringCampaign:
    def test_small_ladder(self):
        cfg = ExperimentConfig(
            kind="centering_rate", params=EnsembleParams(0.0, 1.0, 0.3, 50),
            grid=(0.25, 0.5, 1.0, 2.0), n_ladder=(25, 50, 100), seed=0,
            slope_max=-0.5,
        )
        report = run_centering_rate(cfg)
        errs = [r["estimate"] for r in report.rows if r["record"] == "centering_sup_error"]
        assert all(e > 0 for e in errs)
        assert errs == sorted(errs, reverse=True)
        assert report.passed, report.failures()

    def test_requires_derivative_bound(self):
        cfg = ExperimentConfig(kind="centering_rate", params=SMALL, grid=(1.0,),
                               n_ladder=(10, 20), phi=PhiSpec(kind="one"))
        # builtin family always carries a derivative bound; strip it via table-free custom
        report = run_centering_rate(cfg)  # phi_one has derivative_bound=0, fine
        assert report.campaign == "centering_rate"


class TestHittingCampaign:
    def test_smoke(self):
        p = EnsembleParams(0.0, 1.0, 0.5, 60)
        cfg = ExperimentConfig(kind="hitting", params=p, levels=(0.075, 0.225),
                               cross_times=(1.0,), replicates=300, seed=9)
        report = run_hitting(cfg)
        assert report.passed, report.failures()
        recs = {r["record"] for r in report.rows}
        assert {"hitting_covariance", "cross_covariance", "infinite_hit_frequency"} <= recs

    def test_levels_above_mass_limit_rejected(self):
        cfg = ExperimentConfig(kind="hitting", params=SMALL, levels=(0.8,),
                               replicates=10, seed=0)
        with pytest.raises(ValueError):
            run_hitting(cfg)

    def test_lemma_ladder_rows(self):
        # short horizon makes the divergence at the top level visible in the
        # Monte Carlo fractions already at small n
        p = EnsembleParams(0.0, 1.0, 0.5, 50)
        cfg = ExperimentConfig(kind="hitting", params=p, levels=(0.075,),
                               replicates=50, seed=1, n_ladder=(50, 200),
                               lemma_replicates=400, lemma_levels_horizon=8.0)
        report = run_hitting(cfg)
        fracs = [r["estimate"] for r in report.rows
                 if r["record"] == "hit_limit_mass_by_horizon"]
        exact = [r["estimate"] for r in report.rows
                 if r["record"] == "hit_limit_mass_by_horizon_exact"]
        assert len(fracs) == 2 and len(exact) == 2
        assert exact[0] > exact[1]
        assert fracs[0] > fracs[1]
        # MC fraction agrees with the exact crossing probability
        for m, e in zip(fracs, exact):
            assert abs(m - e) <= 5.0 * math.sqrt(0.25 / 400)


class TestMomentsCampaign:
    def test_isserlis_recursion(self):
        cov = np.array([[2.0]])
        assert _isserlis(cov, [0, 0]) == pytest.approx(2.0)
        assert _isserlis(cov, [0, 0, 0]) == 0.0
        assert _isserlis(cov, [0, 0, 0, 0]) == pytest.approx(3 * 4.0)  # 3 sigma^4
        cov2 = np.array([[1.0, 0.5], [0.5, 2.0]])
        # E[x^2 y^2] = v_x v_y + 2 c^2
        assert _isserlis(cov2, [0, 0, 1, 1]) == pytest.approx(1 * 2 + 2 * 0.25)

    def test_moment_campaign_smoke(self):
        cfg = ExperimentConfig(kind="moments", params=EnsembleParams(0.0, 1.0, 0.5, 80),
                               grid=(1.0, 2.0), replicates=600, seed=21)
        report = run_moments(cfg)
        assert report.passed, report.failures()
        odd = [r for r in report.rows if r["arg1"] in (1.0, 3.0)]
        assert all(r["target"] == 0.0 for r in odd)

    def test_bad_multi_index(self):
        cfg = ExperimentConfig(kind="moments", params=SMALL, grid=(1.0,),
                               replicates=4, seed=0, moment_orders=((1, 2),))
        with pytest.raises(ValueError):
            run_moments(cfg)


class TestDispatch:
    def test_run_campaign_routes_by_kind(self):
        cfg = ExperimentConfig(kind="clt", params=SMALL, grid=(1.0,), replicates=4, seed=0)
        assert run_campaign(cfg).campaign == "clt"

    def test_exactness_cross_check(self):
        # (1/n) sum_j cdf_u == mean_exact for phi = 1: two independent paths
        from hardedge import ensemble as ens
        from hardedge import process as proc
        p = EnsembleParams(0.0, 1.0, 0.5, 50)
        for t in (0.5, 2.0):
            a = float(np.mean(ens.cdf_u(p, np.arange(1, 51), t)))
            b = proc.mean_exact(p, proc.phi_one(), t)
            assert abs(a - b) <= 1e-9
