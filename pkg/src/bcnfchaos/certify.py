"""End-to-end robust-chaos certificate for a BCNF parameter point.

Stages: parameter conditions, partition profile, trapping region and its
escape-time bounds, cone search on A_R^q A_L^p over those bounds, and the
Lyapunov lower bound.  Every stage records its own outcome; a failing
stage does not stop later ones unless they need its output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import cone as cone_mod
from . import region as region_mod
from .bcnf import BcnfError, BcnfParams, ConditionReport, PwlCoeffs, check_conditions, reduce_to_bcnf
from .partition import INF, PartitionError, left_anomaly_note, partition_profile

CERTIFIED, PARTIAL, FAILED = "CERTIFIED", "PARTIAL", "FAILED"


@dataclass
class CertifyOptions:
    i_max: int = 1000
    seed: int = 0
    inflate: float = 1e-4
    shrink: float = 0.0
    seed_size: float = 2.5e-3
    max_iter: int = 500
    cap: int = 200
    samples: int = 10_000
    cone_margin: float = cone_mod.DEFAULT_ENLARGEMENT
    angle_resolution: int = 64
    inclusion_margin: float = cone_mod.DEFAULT_INCLUSION_MARGIN
    expected_pq: tuple | None = None


@dataclass
class ChaosCertificate:
    params: BcnfParams
    transversal: bool | None
    conditions: ConditionReport
    profile: dict | None
    region: region_mod.RegionUnion | None
    trapping: region_mod.TrappingReport | None
    cone: cone_mod.ConeCertificate | None
    lyapunov_lower_bound: float | None
    lyapunov_robust_bound: float | None
    hypotheses: dict
    verdict: str
    notes: list = field(default_factory=list)
    source: dict = field(default_factory=dict)
    region_path: str | None = None

    @property
    def pq_bounds(self):
        if self.trapping is None or self.trapping.pq_bounds is None:
            return None
        return self.trapping.pq_bounds.astuple()

    def to_dict(self) -> dict:
        if self.region_path is not None:
            reg = {"path": self.region_path}
        elif self.region is not None:
            reg = {"inline": json.loads(self.region.to_json()), "meta": self.region.meta}
        else:
            reg = None
        return {
            "verdict": self.verdict,
            "hypotheses": self.hypotheses,
            "source": self.source,
            "params": self.params.to_dict(),
            "transversal": self.transversal,
            "conditions": self.conditions.to_dict(),
            "profile": self.profile,
            "pq_bounds": self.pq_bounds,
            "trapping": None if self.trapping is None else self.trapping.to_dict(),
            "cone": None if self.cone is None else self.cone.to_dict(),
            "lyapunov_lower_bound": self.lyapunov_lower_bound,
            "lyapunov_robust_bound": self.lyapunov_robust_bound,
            "notes": self.notes,
            "region": reg,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def certify(params: BcnfParams, opts: CertifyOptions | None = None,
            region: region_mod.RegionUnion | None = None,
            coeffs: PwlCoeffs | None = None) -> ChaosCertificate:
    opts = opts or CertifyOptions()
    notes = []
    hyp = {"transversality": None, "conditions": False, "trapping_region": False,
           "cone": False}

    transversal = None
    if coeffs is not None:
        try:
            reduce_to_bcnf(coeffs)
            transversal = True
        except BcnfError as exc:
            transversal = False
            notes.append(f"transversality: {exc}")
        hyp["transversality"] = transversal

    cond = check_conditions(params, opts.i_max)
    hyp["conditions"] = cond.overall
    if cond.backorbit_status == "heuristic" and cond.cond_backorbit:
        notes.append(f"backward-orbit condition checked for {cond.backorbit_iterates} iterates only")

    profile = None
    prof = None
    try:
        prof = partition_profile(params)
        profile = prof.summary()
        note = left_anomaly_note(params)
        if note:
            notes.append(note)
    except PartitionError as exc:
        notes.append(f"profile: {exc}")

    if not cond.overall:
        notes.append("conditions not satisfied; region and cone stages skipped")
        return ChaosCertificate(params, transversal, cond, profile, None, None, None, None,
                                None, hyp, FAILED, notes)

    trap = None
    if region is None:
        try:
            seed = region_mod.patch_seed(params, opts.seed_size)
            region = region_mod.invariant_closure(params, seed, opts.max_iter, opts.inflate)
            if not region.meta.get("converged"):
                notes.append(f"region closure stopped after {opts.max_iter} iterations")
        except region_mod.RegionError as exc:
            notes.append(f"region: {exc}")
            region = None
    if region is not None:
        trap = region_mod.verify_trapping(params, region, opts.shrink, opts.cap,
                                          samples=opts.samples, seed=opts.seed)
        hyp["trapping_region"] = trap.is_trapping
        if trap.pq_error:
            notes.append(f"pq bounds: {trap.pq_error}")

    pq = trap.pq_bounds if trap is not None else None
    if pq is not None:
        hyp["trapping_region"] = hyp["trapping_region"] and pq.complete
        if not pq.sampling_consistent:
            notes.append("pq bounds: sampled escape times fall outside the exact bounds")
        notes.extend(_pq_consistency(pq, prof))
        if opts.expected_pq is not None and tuple(opts.expected_pq) != pq.astuple():
            notes.append(f"pq bounds {pq.astuple()} differ from the reference {tuple(opts.expected_pq)}")

    cert = None
    lam = lam_r = None
    if pq is not None and pq.complete:
        try:
            fam = cone_mod.matrix_family(params, *pq.astuple())
            found = cone_mod.find_cone(fam, opts.angle_resolution, opts.cone_margin,
                                       opts.inclusion_margin)
            if found is None:
                notes.append("cone: no contracting-invariant expanding cone found")
            else:
                cert = found[1]
                hyp["cone"] = cert.certified
                b = cone_mod.lyapunov_lower_bound(cert.c, pq.p_max, pq.q_max)
                lam, lam_r = b.bcnf, b.robust
        except cone_mod.ConeError as exc:
            notes.append(f"cone: {exc}")

    ok = (hyp["conditions"] and hyp["trapping_region"] and hyp["cone"]
          and hyp["transversality"] is not False and trap.margin > 0 and cert.c > 1)
    verdict = CERTIFIED if ok else PARTIAL
    return ChaosCertificate(params, transversal, cond, profile, region, trap, cert, lam, lam_r,
                            hyp, verdict, notes)


def _pq_consistency(pq, prof) -> list:
    """Compare the region's bounds with the partition indices."""
    if prof is None:
        return []
    out = []
    if pq.q_min is not None and pq.q_min < prof.q_star:
        out.append(f"q_min = {pq.q_min} < q* = {prof.q_star}")
    if pq.q_max is not None and pq.q_max > prof.q_star2:
        out.append(f"q_max = {pq.q_max} > q** = {prof.q_star2}")
    if prof.p_star not in (None, INF) and pq.p_max is not None and pq.p_max > prof.p_star + 1:
        out.append(f"p_max = {pq.p_max} > p* + 1 = {prof.p_star + 1}")
    return out
