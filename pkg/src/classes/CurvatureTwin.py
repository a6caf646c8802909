import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Union

from ..utils.config import RunConfig
from ..utils.exceptions import HypothesisFailure, NotPositive, UnknownSubset
from ..utils.utils import dumps_report, time2str, write_text
from .Bubble import AnalyticConstants, compute_constants
from .Certificate import Certificate, certify, render_report, render_text
from .CriticalFinder import CriticalPoint, CriticalSet, H0Report, find_critical_points, kplus, verify_H0
from .InteractionMatrix import CpiCandidate, F1Set, H1Report, check_H1, enumerate_candidates, make_candidate
from .ScalarField import PositivityReport, ScalarField, parse_field, validate_positivity
from .ShadowFlow import FlowResult, FlowState, run_to_verdict
from .SphereModel import ManifoldModel, RoundSphereModel
from .TableModel import TableModel, load_manifold_table

logger = logging.getLogger(__name__)

REPORT_SUFFIXES = {"json": ".json", "text": ".txt"}


class CurvatureTwin:
    """CurvatureTwin Class

    The CurvatureTwin class runs the existence analysis for the prescribed scalar
    curvature problem on S^4 for one field K. It holds two main variables:
    - `field`, the parsed expression of K with its exact derivatives
    - `model`, the geometry provider (round S^4 or a tabulated manifold) giving G and A

    Every stage is computed on demand and cached, so the subcommands only run
    the part of the pipeline they need.

    Attributes
    ----------
    run : RunConfig
        Fully resolved run settings.
    field : ScalarField
        Parsed K.
    model : ManifoldModel
        Geometry provider.
    positivity : PositivityReport
        Estimated minimum of K over S^4 (None until `check_positivity` runs).
    critical_set : CriticalSet
        Critical points of K (None until `find_critical_points` runs).
    f1 : F1Set
        Candidate critical points at infinity (None until `enumerate_candidates` runs).
    certificate : Certificate
        Counting sums and verdict (None until `certify` runs).
    """

    def __init__(self, run: RunConfig):
        self.run = run
        self.field: ScalarField = parse_field(run.field)
        self.model: ManifoldModel = self._load_model()

        self.positivity: Optional[PositivityReport] = None
        self.critical_set: Optional[CriticalSet] = None
        self.f1: Optional[F1Set] = None
        self.certificate: Optional[Certificate] = None

    def _load_model(self) -> ManifoldModel:
        manifold = self.run.manifold
        if manifold["type"] == "round_s4":
            return RoundSphereModel(pole_tol=self.run.pole_tol)
        model = load_manifold_table(manifold["path"])
        model.pole_tol = self.run.pole_tol
        if not self.run.flow.freeze_points:
            logger.warning("table manifolds only answer at listed points: the shadow flow runs with frozen points")
        return model

    def _check_critical_set(self):
        if self.critical_set is None:
            raise ValueError("Critical points not set! Run the find_critical_points() method first.")

    def _check_f1(self):
        if self.f1 is None:
            raise ValueError("Candidates not set! Run the enumerate_candidates() method first.")

    def check_positivity(self) -> PositivityReport:
        if self.positivity is None:
            self.positivity = validate_positivity(
                self.field, self.model, samples=self.run.positivity_samples, seed=self.run.seed
            )
        return self.positivity

    def find_critical_points(self) -> CriticalSet:
        if self.critical_set is None:
            self.critical_set = find_critical_points(self.field, self.model, self.run.search)
        return self.critical_set

    def h0(self) -> H0Report:
        self._check_critical_set()
        return verify_H0(self.critical_set, self.run.search.nondegeneracy_tol, self.run.search.beta_tol)

    def kplus(self) -> List[CriticalPoint]:
        self._check_critical_set()
        return kplus(self.critical_set)

    def enumerate_candidates(self) -> F1Set:
        if self.f1 is None:
            self.f1 = enumerate_candidates(self.kplus(), self.model, self.run.interaction)
        return self.f1

    def h1(self) -> H1Report:
        self._check_f1()
        return check_H1(self.f1, self.run.interaction.rho_tol)

    def certify(self) -> Certificate:
        self._check_f1()
        if self.certificate is None:
            self.certificate = certify(self.f1, mu=self.run.mu)
        return self.certificate

    def _kplus_members(self, names: Sequence[str]) -> List[CriticalPoint]:
        """K+ points named by `names` (canonical names, axis aliases or table names)."""
        self.find_critical_points()
        members = self.kplus()
        known = [m.name for m in members]
        found = []
        for name in names:
            match = [m for m in members if name in m.labels]
            if not match:
                raise UnknownSubset(list(names), known)
            found.append(match[0])
        if len({m.name for m in found}) != len(found):
            raise ValueError(f"Subset {list(names)} names the same point twice.")
        return found

    def matrix(self, names: Sequence[str]) -> CpiCandidate:
        """Interaction matrix, rho and iota of the K+ subset `names`."""
        return make_candidate(self._kplus_members(names), self.model)

    def flow(self, names: Sequence[str], horizon: Optional[float] = None, record: bool = False) -> FlowResult:
        """Shadow flow started at the K+ subset `names` with balanced weights."""
        members = self._kplus_members(names)
        cfg = self.run.flow
        if isinstance(self.model, TableModel) and not cfg.freeze_points:
            cfg = replace(cfg, freeze_points=True)
        if record != cfg.record:
            cfg = replace(cfg, record=record)
        state = FlowState.at_points([m.location for m in members], self.field, s0=self.run.flow_s0)
        return run_to_verdict(state, self.field, self.model, horizon=horizon, cfg=cfg)

    def constants(self) -> AnalyticConstants:
        return compute_constants(self.run.quadrature)

    def provenance(self) -> dict:
        """Report sections of every stage computed so far."""
        prov = {
            "inputs": {
                "field": self.field.source,
                "manifold": self.model.describe(),
                "affine": self.field.is_affine,
            },
            "config": self.run.to_dict(),
        }
        if self.positivity is not None:
            prov["positivity"] = self.positivity.to_dict()
        if self.critical_set is not None:
            prov["critical_points"] = [p.to_dict() for p in self.critical_set.points]
            prov["h0"] = self.h0().to_dict()
            prov["kplus"] = [p.name for p in self.kplus()]
        if self.f1 is not None:
            prov["candidates"] = [c.to_dict() for c in self.f1.candidates]
            prov["h1"] = self.h1().to_dict()
        return prov

    def analyze(self) -> dict:
        """Full pipeline: positivity, critical points, (H0), K+, candidates, (H1), certificate.

        Returns
        -------
        dict
            The report document (see `render_report`).

        Raises
        ------
        HypothesisFailure
            When K is not positive, or (H0) or (H1) fails.
        DegenerateCriticalPoint, IncompleteSearch
            From the critical point search.
        """
        t0 = time.time()
        try:
            self.check_positivity()
        except NotPositive as e:
            raise HypothesisFailure("positivity", {"min_value": e.value, "location": e.witness}) from e

        self.find_critical_points()
        h0 = self.h0()
        if not h0.passed:
            raise HypothesisFailure("H0", h0.to_dict())

        self.enumerate_candidates()
        h1 = self.h1()
        if not h1.passed:
            raise HypothesisFailure("H1", h1.to_dict())

        cert = self.certify()
        logger.info(f"verdict {cert.verdict} in {time2str(time.time() - t0, 'ms')}")
        return render_report(cert, self.provenance())

    def export_report(self, report: dict, out_path: Union[Path, str], fmt: str = "json", overwrite: bool = False) -> Path:
        """Write `report` as JSON or as its text rendering.

        Parameters
        ----------
        report : dict
            Report document returned by `analyze`.
        out_path : Path or str
            Destination; the suffix must match the format (.json or .txt).
        fmt : str
            "json" or "text".
        overwrite : bool
            Replace an existing file.
        """
        if isinstance(out_path, str):
            out_path = Path(out_path)
        if fmt not in REPORT_SUFFIXES:
            raise ValueError(f"Unknown report format {fmt!r}: use one of {list(REPORT_SUFFIXES)}.")
        if out_path.suffix != REPORT_SUFFIXES[fmt]:
            raise ValueError(f"The output file {out_path} must have a {REPORT_SUFFIXES[fmt]} extension.")
        text = dumps_report(report) if fmt == "json" else render_text(report)
        out_path = write_text(out_path, text, overwrite=overwrite)
        logger.info(f"report written to {out_path}")
        return out_path
