import numpy as np
import pytest

from bouq import coverage as cov, uq
from bouq.config import ExperimentConfig
from bouq.designs import grid_mesh
from bouq.gp import fit


def tiny(**kw):
    base = dict(n_repetitions=3, grid_per_dim=15, checkpoints=(1, 2, 4), n_initial=4,
                lhs_candidates=20, nu=(1.5, 2.5), a0_d_omega=10.0)
    base.update(kw)
    return ExperimentConfig(**base)


def test_mesh_helpers():
    nodes = grid_mesh(7, 2).points
    for i in (0, 8, 48):
        assert cov.mesh_index(nodes[i], 7) == i
    idx = cov.snap_to_mesh(np.array([[0.5, 0.5], [0.51, 0.5], [0.0, 0.0]]), 7)
    assert len(set(idx.tolist())) == 3 and idx[0] == 24 and idx[2] == 0


def test_repetition_structure():
    cfg = tiny()
    res = cov.coverage_repetition(cfg, 0, 0)
    assert res.info.T == 1 + max(cfg.checkpoints)
    assert res.info.batches[0][0].shape == (cfg.n_initial, 2)
    mesh = grid_mesh(cfg.grid_per_dim, 2).points
    for x in res.info.X:
        assert np.min(np.abs(mesh - x).sum(1)) < 1e-12
    assert len(res.checkpoints) == 2 * len(cfg.checkpoints)
    assert res.f_max >= res.info.best()


def test_harness_matches_library():
    cfg = tiny()
    res = cov.coverage_repetition(cfg, 1, 2)
    kernel = cfg.kernel(cfg.nu_values()[1])
    consts = uq.UqConstants.from_kernel(kernel, cfg.domain, alpha=cfg.alpha, c0=cfg.c0)
    grid = grid_mesh(cfg.grid_per_dim, 2).points
    for cp in res.checkpoints:
        post = fit(kernel, res.info.prefix(1 + cp.iterations).dataset())
        if cp.method == cov.CI_SEQ:
            expect = uq.confidence_interval(consts, post, grid, polish=False)
        else:
            expect = uq.naive_interval(post, grid, polish=False)
        assert (cp.lo, cp.hi) == expect
        assert cp.covered == (cp.lo <= res.f_max <= cp.hi)


def test_summary_and_csv(tmp_path):
    cfg = tiny()
    rows, results, failed = cov.coverage_experiment(cfg, tmp_path / "c.csv")
    assert failed == 0 and len(results) == 6
    assert len(rows) == 2 * 3 * 2
    for nu, k, method, rate, width, n in rows:
        assert 0 <= rate <= 1 and width >= 0 and n == 3
    text = (tmp_path / "c.csv").read_text()
    assert "# failed_repetitions = 0" in text
    again = tmp_path / "d.csv"
    cov.coverage_experiment(cfg, again, threads=2)
    assert again.read_text() == text


def test_failed_repetitions_are_counted(monkeypatch):
    cfg = tiny(n_repetitions=2, nu=(1.5,))
    real = cov.coverage_repetition

    def flaky(c, i, r):
        if r == 1:
            raise cov.NumericalError("boom")
        return real(c, i, r)

    monkeypatch.setattr(cov, "coverage_repetition", flaky)
    rows, results, failed = cov.coverage_experiment(cfg)
    assert failed == 1 and results[1].error == "boom"
    assert all(r[-1] == 1 for r in rows)
