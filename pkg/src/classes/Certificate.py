"""Counting criteria over the critical points at infinity.

With S_k the alternating sum of (-1)^iota over candidates of index <= k-1, an
index k is admissible when S_k != 1 and no candidate has index k (or, under
asserted intersection numbers, every index-k candidate has mu_k = 0).
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .. import __version__
from ..utils.constants import NORMALIZATION_CAVEAT, SPHERE_DIM
from ..utils.exceptions import MissingMuAssertion

if TYPE_CHECKING:
    from .InteractionMatrix import F1Set

logger = logging.getLogger(__name__)

EXISTENCE_WITH_BOUND = "ExistenceWithBound"
EXISTENCE_BY_COROLLARY = "ExistenceByCorollary"
NO_CONCLUSION = "NoConclusion"

CAVEATS = (
    NORMALIZATION_CAVEAT,
    "Completeness of the critical point search is certified heuristically by the Poincare-Hopf sum; "
    "a missed pair of cancelling critical points is undetectable.",
    "(H1) is checked on subsets of every size; the reading restricted to pairs is reported alongside.",
    "Multiplicity bounds hold for generic K; genericity is assumed, not checked.",
    "The filtration at infinity is built from closures of stable manifolds; the mention of unstable "
    "manifolds in the same definition is read as a notational slip and does not enter the criterion.",
)
KAZDAN_WARNER_NOTE = (
    "K is affine: the round sphere admits no solution for such K (Kazdan-Warner obstruction), "
    "consistent with the absence of an existence verdict."
)
CONDITIONAL_NOTE = "Verdict conditional on the asserted mu values."


def iota(members: Iterable) -> int:
    """Index p - 1 + sum_i (4 - m(K, y_i)) of the critical point at infinity of `members`."""
    members = list(members)
    return len(members) - 1 + sum(SPHERE_DIM - m.morse_index for m in members)


@dataclass(frozen=True)
class IndexedSubset:
    """Labels of each member of an F1 candidate and its index."""

    labels: Tuple[Tuple[str, ...], ...]
    iota: int

    @property
    def names(self) -> List[str]:
        return [lab[0] for lab in self.labels]

    def matches(self, names: Iterable[str]) -> bool:
        names = set(names)
        if len(names) != len(self.labels):
            return False
        return all(any(n in lab for n in names) for lab in self.labels)


@dataclass(frozen=True)
class Verdict:
    kind: str
    k: Optional[int] = None
    multiplicity: Optional[int] = None
    conditional: bool = False

    @property
    def morse_bound(self) -> Optional[int]:
        return self.k

    @property
    def is_existence(self) -> bool:
        return self.kind != NO_CONCLUSION

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == EXISTENCE_WITH_BOUND:
            d.update(k=self.k, morse_bound=self.k, multiplicity_at_least=self.multiplicity)
        elif self.kind == EXISTENCE_BY_COROLLARY:
            d.update(multiplicity_at_least=self.multiplicity)
        if self.conditional:
            d["conditional"] = True
        return d

    def __str__(self):
        if self.kind == EXISTENCE_WITH_BOUND:
            s = f"{self.kind}(morse <= {self.k}, multiplicity >= {self.multiplicity})"
        elif self.kind == EXISTENCE_BY_COROLLARY:
            s = f"{self.kind}(multiplicity >= {self.multiplicity})"
        else:
            s = self.kind
        return s + (" [conditional on asserted mu]" if self.conditional else "")


@dataclass(frozen=True)
class Certificate:
    """Counting data of F1 and, once evaluated, the verdicts.

    Attributes
    ----------
    index_histogram : Dict[int, int]
        Number of F1 candidates per index.
    total_sum : int
        Sum over F1 of (-1)^iota.
    degree : int
        Leray-Schauder degree 1 - total_sum.
    l_sharp : int
        Largest index in F1 (-1 when F1 is empty).
    partial_sums : List[int]
        S_k for k = 0..l_sharp+1.
    subsets : Tuple[IndexedSubset, ...]
        The F1 candidates, needed to match asserted mu values.
    """

    index_histogram: Dict[int, int]
    total_sum: int
    degree: int
    l_sharp: int
    partial_sums: List[int]
    subsets: Tuple[IndexedSubset, ...] = ()
    admissible_k: List[int] = field(default_factory=list)
    verdict: Optional[Verdict] = None
    corollary: Optional[Verdict] = None
    multiplicity_bounds: List[dict] = field(default_factory=list)
    mu_assertions: Optional[List[dict]] = None

    def partial_sum(self, k: int) -> int:
        """S_k; constant (= total_sum) beyond l_sharp + 1."""
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}.")
        return self.partial_sums[min(k, self.l_sharp + 1)]

    def to_dict(self) -> dict:
        d = {
            "histogram": {str(k): v for k, v in sorted(self.index_histogram.items())},
            "total_sum": self.total_sum,
            "degree": self.degree,
            "l_sharp": self.l_sharp,
            "partial_sums": list(self.partial_sums),
            "admissible_k": list(self.admissible_k),
            "multiplicity_bounds": list(self.multiplicity_bounds),
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "corollary": self.corollary.to_dict() if self.corollary else None,
        }
        if self.mu_assertions is not None:
            d["mu_assertions"] = self.mu_assertions
        return d


def _certificate(subsets: Sequence[IndexedSubset]) -> Certificate:
    hist = Counter(s.iota for s in subsets)
    l_sharp = max(hist) if hist else -1
    partial = [0]
    for k in range(l_sharp + 1):
        partial.append(partial[-1] + (-1) ** k * hist.get(k, 0))
    total = partial[-1]
    return Certificate(
        index_histogram=dict(sorted(hist.items())),
        total_sum=total,
        degree=1 - total,
        l_sharp=l_sharp,
        partial_sums=partial,
        subsets=tuple(subsets),
    )


def counting_sums(f1: "F1Set") -> Certificate:
    """Histogram, alternating sums, degree and l_sharp over the candidates with rho > 0."""
    return _certificate([IndexedSubset(tuple(m.labels for m in c.members), c.iota) for c in f1.members])


def certificate_from_indices(indices: Iterable[int]) -> Certificate:
    """Certificate of a synthetic F1 given only the candidate indices (members t1, t2, ...)."""
    return _certificate([IndexedSubset(((f"t{i + 1}",),), int(k)) for i, k in enumerate(indices)])


def evaluate_corollary(cert: Certificate) -> Verdict:
    if cert.total_sum != 1:
        return Verdict(EXISTENCE_BY_COROLLARY, multiplicity=abs(1 - cert.total_sum))
    return Verdict(NO_CONCLUSION)


def _scan(cert: Certificate, condition_two) -> Tuple[List[int], List[int]]:
    admissible, conditional = [], []
    for k in range(cert.l_sharp + 2):
        if cert.partial_sums[k] == 1:
            continue
        ok = condition_two(k)
        if ok is True:
            admissible.append(k)
        elif ok == "mu":
            admissible.append(k)
            conditional.append(k)
    return admissible, conditional


def _with_verdict(cert: Certificate, admissible: List[int], conditional: Sequence[int] = (), mu=None) -> Certificate:
    bounds = [{"k": k, "bound": abs(1 - cert.partial_sums[k]), "conditional": k in conditional} for k in admissible]
    if not cert.subsets:
        verdict = evaluate_corollary(cert)
    elif admissible:
        k = admissible[0]
        verdict = Verdict(EXISTENCE_WITH_BOUND, k=k, multiplicity=abs(1 - cert.partial_sums[k]), conditional=k in conditional)
    else:
        verdict = Verdict(NO_CONCLUSION)
    logger.info(f"verdict: {verdict}")
    return replace(
        cert,
        admissible_k=admissible,
        verdict=verdict,
        corollary=evaluate_corollary(cert),
        multiplicity_bounds=bounds,
        mu_assertions=mu,
    )


def evaluate_theorem_main(cert: Certificate) -> Certificate:
    """Scan k = 0..l_sharp+1 for S_k != 1 with no candidate of index k.

    The verdict is ExistenceWithBound at the smallest admissible k; with F1
    empty the degree is 1 and the verdict is ExistenceByCorollary.
    """
    admissible, _ = _scan(cert, lambda k: cert.index_histogram.get(k, 0) == 0)
    return _with_verdict(cert, admissible)


def _normalize_mu(mu) -> List[Tuple[frozenset, int]]:
    if isinstance(mu, Mapping):
        items = [(frozenset([k] if isinstance(k, str) else k), v) for k, v in mu.items()]
    else:
        items = [(frozenset(e["subset"]), e["value"]) for e in mu]
    for names, value in items:
        if value not in (0, 1):
            raise ValueError(f"mu values are parities (0 or 1), got {value!r} for {sorted(names)}.")
    return items


def evaluate_theorem_general(cert: Certificate, mu) -> Certificate:
    """Same scan as `evaluate_theorem_main`, with condition 2 at k also met when
    every index-k candidate carries an asserted mu_k = 0.

    A k whose index-k candidates lack assertions is skipped.

    Raises
    ------
    MissingMuAssertion
        When no k is admissible and some k was skipped for a missing assertion.
    """
    items = _normalize_mu(mu)
    missing: List[Tuple[List[str], int]] = []

    def condition_two(k):
        at_k = [s for s in cert.subsets if s.iota == k]
        if not at_k:
            return True
        values = []
        for s in at_k:
            v = next((v for names, v in items if s.matches(names)), None)
            if v is None:
                missing.append((s.names, k))
                return False
            values.append(v)
        return "mu" if all(v == 0 for v in values) else False

    admissible, conditional = _scan(cert, condition_two)
    if not admissible and missing:
        raise MissingMuAssertion(*missing[0])
    recorded = [{"subset": sorted(names), "value": v} for names, v in items]
    return _with_verdict(cert, admissible, conditional, mu=sorted(recorded, key=lambda e: e["subset"]))


def certify(f1: "F1Set", mu=None) -> Certificate:
    cert = counting_sums(f1)
    return evaluate_theorem_main(cert) if mu is None else evaluate_theorem_general(cert, mu)


# Report ===============================================================================


SECTION_ORDER = (
    "inputs",
    "config",
    "positivity",
    "critical_points",
    "h0",
    "kplus",
    "candidates",
    "h1",
)


def render_report(cert: Certificate, provenance: Mapping) -> dict:
    """Deterministic report document (no timestamps, fixed key order).

    `provenance` provides the sections listed in SECTION_ORDER; missing ones are
    left out. The certificate and the caveats are appended.
    """
    report = {"tool": {"name": "curvature_twin", "version": __version__}}
    for key in SECTION_ORDER:
        if key in provenance:
            report[key] = provenance[key]
    report["certificate"] = cert.to_dict()
    caveats = list(CAVEATS)
    if provenance.get("inputs", {}).get("affine") and cert.verdict is not None and not cert.verdict.is_existence:
        caveats.append(KAZDAN_WARNER_NOTE)
    if cert.verdict is not None and cert.verdict.conditional:
        caveats.append(CONDITIONAL_NOTE)
    report["caveats"] = caveats
    return report


def render_text(report: Mapping) -> str:
    """Human-readable rendering of a report document."""
    lines = [f"curvature_twin {report['tool']['version']}"]
    inputs = report.get("inputs", {})
    if inputs:
        lines.append(f"K = {inputs.get('field')}  on  {inputs.get('manifold', {}).get('type')}")
    if "critical_points" in report:
        df = pd.DataFrame(report["critical_points"])
        cols = [c for c in ("name", "aliases", "K", "morse_index", "laplacian", "beta") if c in df.columns]
        lines += ["", "Critical points", df[cols].to_string(index=False) if len(df) else "(none)"]
    if "candidates" in report:
        df = pd.DataFrame(report["candidates"])
        if len(df):
            df["members"] = df["members"].map(lambda m: ",".join(m))
            table = df[["members", "rho", "iota", "in_f1"]].to_string(index=False)
        else:
            table = "(none)"
        lines += ["", "Candidates", table]
    cert = report["certificate"]
    lines += [
        "",
        f"histogram      {cert['histogram']}",
        f"total_sum      {cert['total_sum']}",
        f"degree         {cert['degree']}",
        f"partial_sums   {cert['partial_sums']}",
        f"admissible_k   {cert['admissible_k']}",
        f"verdict        {cert['verdict']}",
        "",
        "Caveats",
    ]
    lines += [f"- {c}" for c in report["caveats"]]
    return "\n".join(lines) + "\n"
