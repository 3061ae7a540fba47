"""JSON views of every result type the CLI emits.

Each payload carries ``schema`` (type name + version) so downstream
consumers (the plot toolkit in particular) can validate what they read.
Serialization is deterministic: keys are sorted at dump time and no
timestamps are embedded.
"""

from __future__ import annotations

import json

import numpy as np

from .coarse import IrreducibleDecomposition, Skeleton
from .enumeration import EnumerationResult, GFResult
from .geometry import NormTable, WulffShape
from .phase import FreeEnergyEstimate, PhaseReport, RateFunctionTable
from .sampler import ChainStats

SCHEMA_VERSION = 1

__all__ = ["to_jsonable", "dumps"]


def _clean(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, float) and (value == float("inf") or value == float("-inf")):
        return {"inf": value > 0}
    if isinstance(value, dict):
        return {_key(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _key(k):
    if isinstance(k, tuple):
        return ",".join(str(int(v)) for v in k)
    if isinstance(k, (np.integer, int, float)):
        return str(k)
    return k


def _tagged(name: str, body: dict) -> dict:
    return {"schema": {"type": name, "version": SCHEMA_VERSION}, **_clean(body)}


def to_jsonable(obj):
    """Dispatch an artifact result object to its JSON schema."""
    if isinstance(obj, EnumerationResult):
        return _tagged("EnumerationResult", {
            "logZ": obj.logZ,
            "by_endpoint": obj.by_endpoint,
            "n": obj.n,
            "h": list(obj.h),
            "model": obj.model,
        })
    if isinstance(obj, GFResult):
        return _tagged("GFResult", {
            "target": list(obj.target),
            "lambda": obj.lam,
            "logH": obj.logH,
            "logD": obj.logD,
            "n_max": obj.n_max,
            "tail_bound": obj.tail_bound,
            "diverge_risk": obj.diverge_risk,
        })
    if isinstance(obj, NormTable):
        return _tagged("NormTable", {
            "lambda": obj.lam,
            "directions": obj.directions,
            "xi": obj.xi,
            "errors": obj.errors,
            "meta": {k: v for k, v in obj.meta.items() if k != "M_used"},
            "vertices": obj.vertices,
        })
    if isinstance(obj, WulffShape):
        return _tagged("WulffShape", {
            "lambda": obj.lam,
            "tol": obj.tol,
            "table": to_jsonable(obj.table),
        })
    if isinstance(obj, Skeleton):
        return _tagged("Skeleton", {
            "K": obj.K,
            "trunk_sites": obj.trunk_sites,
            "trunk_indices": obj.trunk_indices,
            "hairs": {
                str(slot): [
                    {"sites": sites, "indices": list(idx)}
                    for sites, idx in hair_list
                ]
                for slot, hair_list in obj.hairs.items()
            },
            "attractive": obj.attractive,
        })
    if isinstance(obj, IrreducibleDecomposition):
        return _tagged("IrreducibleDecomposition", {
            "omega_L": obj.omega_L.sites,
            "pieces": [p.sites for p in obj.pieces],
            "omega_R": obj.omega_R.sites,
            "breakpoints": list(obj.breakpoints),
            "single_block": obj.single_block,
        })
    if isinstance(obj, ChainStats):
        cfg = obj.config
        return _tagged("ChainStats", {
            "model": obj.model,
            "n": cfg.n,
            "h": cfg.params.h,
            "move_mix": list(cfg.move_mix),
            "sweeps": cfg.sweeps,
            "burn_in": cfg.burn_in,
            "thinning": cfg.thinning,
            "seed": cfg.seed,
            "samples": obj.n_samples,
            "displacements": obj.displacements,
            "potentials": obj.potentials,
            "acceptance": obj.acceptance,
            "autocorr_sweeps": obj.autocorr_sweeps,
            "underresolved": obj.underresolved,
        })
    if isinstance(obj, FreeEnergyEstimate):
        return _tagged("FreeEnergyEstimate", {
            "h": list(obj.h),
            "per_n": obj.per_n,
            "lo": obj.lo,
            "hi": obj.hi,
            "lo_rigorous": obj.lo_rigorous,
            "hi_rigorous": obj.hi_rigorous,
            "value": obj.value,
            "method": obj.method,
            "model": obj.model,
        })
    if isinstance(obj, RateFunctionTable):
        return _tagged("RateFunctionTable", {
            "h": list(obj.h),
            "u_grid": obj.u_grid,
            "J": obj.J,
            "argmax_g": obj.argmax_g,
            "edge_flags": obj.edge_flags,
        })
    if isinstance(obj, PhaseReport):
        return _tagged("PhaseReport", {
            "h": list(obj.h),
            "classification": obj.classification,
            "evidence": _evidence_clean(obj.evidence),
        })
    raise TypeError(f"no JSON schema for {type(obj).__name__}")


def _evidence_clean(ev: dict) -> dict:
    out = {}
    for k, v in ev.items():
        if k == "shape_scan" and isinstance(v, dict):
            out[k] = {kk: _clean(vv) for kk, vv in v.items() if kk != "tables"}
        else:
            out[k] = _clean(v)
    return out


def dumps(obj) -> str:
    payload = obj if isinstance(obj, dict) else to_jsonable(obj)
    return json.dumps(_clean(payload), sort_keys=True, indent=1)
