import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import AFFINE, QUADRIC_5
from src.classes.Certificate import certify
from src.classes.CriticalFinder import find_critical_points, kplus
from src.classes.InteractionMatrix import enumerate_candidates
from src.classes.ScalarField import parse_field

SCALE = 5.0


def pipeline(f, model, cfg):
    cs = find_critical_points(f, model, cfg)
    f1 = enumerate_candidates(kplus(cs), model)
    return cs, f1, certify(f1)


def candidate_summary(f1):
    return sorted((c.p, c.iota, c.in_f1) for c in f1.candidates)


def assert_same_certificate(a, b):
    assert a.index_histogram == b.index_histogram
    assert a.degree == b.degree
    assert a.partial_sums == b.partial_sums
    assert a.verdict == b.verdict


@pytest.mark.parametrize("source", [QUADRIC_5, AFFINE])
def test_scaling_invariance(source, round_s4, search_cfg):
    f = parse_field(source)
    cs, f1, cert = pipeline(f, round_s4, search_cfg)
    cs5, f15, cert5 = pipeline(f.scaled(SCALE), round_s4, search_cfg)

    assert len(cs5.points) == len(cs.points)
    for p, q in zip(cs.points, cs5.points):
        assert_allclose(q.location.coords, p.location.coords, atol=1e-9)
        assert_allclose(q.k_value, SCALE * p.k_value, rtol=1e-12)
        assert q.morse_index == p.morse_index
        assert_allclose(q.beta, p.beta, rtol=1e-9, atol=1e-12)
    assert [p.name for p in kplus(cs5)] == [p.name for p in kplus(cs)]

    assert len(f15.candidates) == len(f1.candidates)
    for c, c5 in zip(f1.candidates, f15.candidates):
        assert c5.names == c.names
        assert c5.iota == c.iota
        assert c5.in_f1 == c.in_f1
        # M, hence rho, scales like 1/K
        assert_allclose(c5.rho, c.rho / SCALE, rtol=1e-9)
    assert_same_certificate(cert, cert5)


@pytest.mark.parametrize("source", [QUADRIC_5, AFFINE])
def test_rotation_invariance(source, round_s4, search_cfg, rotation):
    f = parse_field(source)
    cs, f1, cert = pipeline(f, round_s4, search_cfg)
    csr, f1r, certr = pipeline(f.rotated(rotation), round_s4, search_cfg)

    assert len(csr.points) == len(cs.points)
    # rotated points, matched by location
    for p in cs.points:
        target = rotation @ p.location.coords
        q = min(csr.points, key=lambda r: np.linalg.norm(r.location.coords - target))
        assert np.linalg.norm(q.location.coords - target) < 1e-7
        assert q.morse_index == p.morse_index
        assert_allclose(q.beta, p.beta, rtol=1e-8, atol=1e-10)
    assert len(kplus(csr)) == len(kplus(cs))

    assert candidate_summary(f1r) == candidate_summary(f1)
    assert_allclose(sorted(c.rho for c in f1r.candidates), sorted(c.rho for c in f1.candidates), rtol=1e-8)
    assert_same_certificate(cert, certr)
