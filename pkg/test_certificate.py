import numpy as np
import pytest

from src.classes.Certificate import (
    CAVEATS,
    CONDITIONAL_NOTE,
    EXISTENCE_BY_COROLLARY,
    EXISTENCE_WITH_BOUND,
    KAZDAN_WARNER_NOTE,
    NO_CONCLUSION,
    certificate_from_indices,
    certify,
    counting_sums,
    evaluate_corollary,
    evaluate_theorem_general,
    evaluate_theorem_main,
    iota,
    render_report,
    render_text,
)
from src.classes.CriticalFinder import kplus
from src.classes.InteractionMatrix import enumerate_candidates
from src.utils.exceptions import MissingMuAssertion

QUADRIC_INDICES = [0, 0, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 4, 4, 5]


def test_quadric_counting():
    cert = evaluate_theorem_main(certificate_from_indices(QUADRIC_INDICES))
    assert cert.index_histogram == {0: 2, 1: 3, 2: 4, 3: 3, 4: 2, 5: 1}
    assert cert.total_sum == 1
    assert cert.degree == 0
    assert cert.l_sharp == 5
    assert cert.partial_sums == [0, 2, -1, 3, 0, 2, 1]
    assert cert.admissible_k == []
    assert cert.verdict.kind == NO_CONCLUSION
    assert cert.corollary.kind == NO_CONCLUSION


def test_quadric_pipeline_certificate(quadric_set, round_s4):
    f1 = enumerate_candidates(kplus(quadric_set), round_s4)
    assert counting_sums(f1).index_histogram == {0: 2, 1: 3, 2: 4, 3: 3, 4: 2, 5: 1}
    cert = certify(f1)
    assert cert.degree == 0
    assert not cert.verdict.is_existence


def test_single_index_zero():
    cert = evaluate_theorem_main(certificate_from_indices([0]))
    assert cert.total_sum == 1
    assert cert.partial_sums == [0, 1]
    assert cert.verdict.kind == NO_CONCLUSION


def test_gap_gives_bound():
    cert = evaluate_theorem_main(certificate_from_indices([0, 2]))
    assert cert.partial_sums == [0, 1, 1, 2]
    assert cert.admissible_k == [3]
    assert cert.verdict.kind == EXISTENCE_WITH_BOUND
    assert cert.verdict.morse_bound == 3
    assert cert.verdict.multiplicity == 1
    assert cert.corollary.kind == EXISTENCE_BY_COROLLARY
    assert cert.corollary.multiplicity == 1


def test_smallest_admissible_k_wins():
    cert = evaluate_theorem_main(certificate_from_indices([1]))
    assert cert.total_sum == -1
    assert cert.degree == 2
    assert cert.admissible_k == [0, 2]
    assert cert.verdict.k == 0
    assert cert.verdict.multiplicity == 1
    assert [b["bound"] for b in cert.multiplicity_bounds] == [1, 2]
    assert evaluate_corollary(cert).multiplicity == 2


def test_empty_f1_is_degree_one():
    cert = evaluate_theorem_main(certificate_from_indices([]))
    assert cert.l_sharp == -1
    assert cert.degree == 1
    assert cert.verdict.kind == EXISTENCE_BY_COROLLARY
    assert cert.verdict.multiplicity == 1


def test_partial_sum_beyond_l_sharp():
    cert = certificate_from_indices([0, 2])
    assert cert.partial_sum(10) == cert.total_sum
    with pytest.raises(ValueError):
        cert.partial_sum(-1)


def test_asserted_mu_makes_index_admissible():
    base = certificate_from_indices([0, 1])
    assert evaluate_theorem_main(base).admissible_k == [2]

    cert = evaluate_theorem_general(base, {"t1": 0})
    assert cert.admissible_k == [0, 2]
    assert cert.verdict.k == 0
    assert cert.verdict.conditional
    assert cert.mu_assertions == [{"subset": ["t1"], "value": 0}]

    odd = evaluate_theorem_general(base, [{"subset": ["t1"], "value": 1}])
    assert odd.admissible_k == [2]
    assert not odd.verdict.conditional


def test_missing_mu_assertion():
    with pytest.raises(MissingMuAssertion) as e:
        evaluate_theorem_general(certificate_from_indices([0]), {})
    assert e.value.subset == ["t1"]
    assert e.value.k == 0


def test_mu_values_are_parities():
    with pytest.raises(ValueError):
        evaluate_theorem_general(certificate_from_indices([0]), {"t1": 2})


def test_report_caveats():
    cert = evaluate_theorem_main(certificate_from_indices([0]))
    report = render_report(cert, {"inputs": {"field": "2 + x5", "affine": True}, "config": {"seed": 0}})
    assert report["tool"]["name"] == "curvature_twin"
    assert list(report)[:3] == ["tool", "inputs", "config"]
    assert report["certificate"]["verdict"] == {"kind": NO_CONCLUSION}
    assert report["caveats"][: len(CAVEATS)] == list(CAVEATS)
    assert KAZDAN_WARNER_NOTE in report["caveats"]

    text = render_text(report)
    assert "NoConclusion" in text
    assert "2 + x5" in text


def test_conditional_note():
    cert = evaluate_theorem_general(certificate_from_indices([0, 1]), {"t1": 0})
    report = render_report(cert, {})
    assert CONDITIONAL_NOTE in report["caveats"]
    assert KAZDAN_WARNER_NOTE not in report["caveats"]
    assert "conditional" in str(cert.verdict)


def test_iota_of_members(quadric_set):
    north, e4 = quadric_set.lookup("north"), quadric_set.lookup("+e4")
    assert iota([north]) == 0
    assert iota([e4]) == 1
    assert iota([north, quadric_set.lookup("south")]) == 1
    assert iota([north, e4]) == 2


def test_counting_arithmetic_on_random_multisets():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        indices = rng.integers(0, 12, size=rng.integers(0, 16)).tolist()
        cert = evaluate_theorem_main(certificate_from_indices(indices))
        assert cert.degree == 1 - cert.total_sum
        assert cert.partial_sums[cert.l_sharp + 1] == cert.total_sum
        if cert.total_sum != 1:
            assert cert.verdict.is_existence, indices
