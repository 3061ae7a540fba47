"""Experiment runner: config parsing, subcommand dispatch, manifests.

Configs are YAML (JSON is a YAML subset, so both parse).  Every run
writes its outputs plus a ``manifest.json`` carrying the config hash,
seed, library versions and a content hash per output file; partial
outputs are removed on failure.  Exit codes: 0 success, 1 invariant
violation, 2 config error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np
import yaml

from . import __version__, checks
from .coarse import (
    irreducible_decompose,
    q_measure_mass,
    skeleton_attractive,
    skeleton_repulsive,
    verify_p1_p2,
)
from .enumeration import (
    CapExceededError,
    endpoint_distribution,
    hitting_gf,
    partition_function,
)
from .geometry import ConeSpec, WulffShape, build_norm_table, dual_drift
from .paths import LatticePath, Pattern
from .potentials import GCParams, model_from_config
from .phase import classify_phase, free_energy, rate_function, speed_from_free_energy
from .sampler import (
    ChainConfig,
    estimate_pattern_frequency,
    estimate_speed,
    mcmc_sample,
)
from .serialize import dumps, to_jsonable

SUBCOMMANDS = (
    "enumerate", "gf", "lyapunov", "wulff", "skeleton",
    "decompose", "sample", "phase", "patterns", "check",
)


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    return cfg


def _require(cfg: dict, key: str, kind=None):
    cur = cfg
    for part in key.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(f"missing config field: {key}")
        cur = cur[part]
    if kind is not None and not isinstance(cur, kind):
        raise ConfigError(f"config field {key} has wrong type "
                          f"(expected {kind.__name__})")
    return cur


def _model(cfg):
    spec = _require(cfg, "model", dict)
    try:
        return model_from_config(spec.get("id"), spec.get("params"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}")


def _dim(cfg) -> int:
    d = int(cfg.get("d", 2))
    if not 1 <= d <= 3:
        raise ConfigError("d must be 1, 2 or 3")
    return d


def _drift(cfg, d) -> np.ndarray:
    h = np.atleast_1d(np.asarray(cfg.get("h", [0.0] * d), dtype=np.float64))
    if len(h) != d:
        raise ConfigError("h has wrong dimension")
    return h


def _norm_table(cfg, spec, d, lam):
    nt = cfg.get("norm_table", {})
    return build_norm_table(
        spec, lam, d=d,
        height=int(nt.get("height", 2 if d > 1 else 1)),
        n_max=nt.get("n_max"),
        workers=int(cfg.get("workers", 1)),
    )


def _chain_config(cfg, d, h, seed) -> ChainConfig:
    sc = cfg.get("sampler", {})
    return ChainConfig(
        n=int(_require(cfg, "n")),
        params=GCParams(h, float(cfg.get("lambda", 0.0))),
        move_mix=tuple(sc.get("move_mix", (0.4, 0.3, 0.3))),
        sweeps=int(sc.get("sweeps", 4000)),
        burn_in=int(sc.get("burn_in", 500)),
        thinning=int(sc.get("thinning", 2)),
        seed=int(seed),
        kmax=int(sc.get("kmax", 4)),
        record_paths=bool(sc.get("record_paths", False)),
    )


def _boundary_drift(table, h, d):
    """Cone geometry needs a drift on the shape boundary: rescale the
    configured drift there, or take the dual of e1 when it is zero."""
    from .geometry import polar_norm

    if not h.any():
        return dual_drift(table, [1] + [0] * (d - 1)).h
    star = polar_norm(table, h)
    if star <= 0 or not np.isfinite(star):
        return dual_drift(table, [1] + [0] * (d - 1)).h
    return h / star


def _path_from_cfg(cfg, spec, d, h, seed):
    """The working path: explicit sites from the config, else one
    sampled chain snapshot."""
    if "path" in cfg:
        return LatticePath(np.asarray(cfg["path"], dtype=np.int64))
    cc = _chain_config(cfg, d, h, seed)
    cc = ChainConfig(**{**cc.__dict__, "record_paths": True})
    stats = mcmc_sample(spec, cc)
    return LatticePath(stats.paths[-1].astype(np.int64))


# ---------------------------------------------------------------------------
# subcommand implementations: each returns {filename: payload-dict}
# ---------------------------------------------------------------------------


def _run_enumerate(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    h = _drift(cfg, d)
    ns = cfg.get("n_grid") or [_require(cfg, "n")]
    results = []
    for n in ns:
        res = partition_function(spec, h, int(n), d)
        law = endpoint_distribution(spec, h, int(n), d)
        payload = to_jsonable(res)
        payload["endpoint_law"] = {
            ",".join(map(str, k)): v for k, v in sorted(law.items())
        }
        results.append(payload)
    body = results[0] if len(results) == 1 else {"runs": results}
    return {"enumeration.json": body}


def _run_gf(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    lam = float(_require(cfg, "lambda"))
    targets = cfg.get("targets") or [[1] + [0] * (d - 1)]
    n_max = int(cfg.get("n_max", 10))
    out = [to_jsonable(hitting_gf(spec, np.asarray(t, dtype=np.int64), lam, n_max, d))
           for t in targets]
    return {"gf.json": {"schema": {"type": "GFResultList", "version": 1},
                        "results": out}}


def _run_lyapunov(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    lam = float(_require(cfg, "lambda"))
    table = _norm_table(cfg, spec, d, lam)
    return {"norm_table.json": to_jsonable(table)}


def _run_wulff(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    lams = cfg.get("lambda_grid") or [float(_require(cfg, "lambda"))]
    shapes = []
    for lam in lams:
        table = _norm_table(cfg, spec, d, float(lam))
        shapes.append(to_jsonable(WulffShape(table, float(cfg.get("tol", 5e-3)))))
    body = shapes[0] if len(shapes) == 1 else {
        "schema": {"type": "WulffShapeList", "version": 1}, "shapes": shapes}
    return {"wulff.json": body}


def _run_skeleton(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    h = _drift(cfg, d)
    lam = float(cfg.get("lambda", np.log(2 * d) + 0.6))
    K = float(cfg.get("K", 5.0))
    table = _norm_table(cfg, spec, d, lam)
    path = _path_from_cfg(cfg, spec, d, h, seed)
    attractive = bool(cfg.get("attractive", False))
    build = skeleton_attractive if attractive else skeleton_repulsive
    sk = build(path, K, table)
    rep = verify_p1_p2(path, sk, K, table)
    body = to_jsonable(sk)
    body["path"] = path.sites.tolist()
    body["p1p2"] = rep
    body["norm_vertices"] = table.vertices.tolist()
    delta = float(cfg.get("delta", 0.1))
    try:
        cone = ConeSpec(_boundary_drift(table, h, d), delta, 3, table)
        from .coarse import cone_points_path

        body["cone_points"] = cone_points_path(path, cone)
    except ValueError:
        body["cone_points"] = []
    return {"skeleton.json": body}


def _run_decompose(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    h = _drift(cfg, d)
    lam = float(cfg.get("lambda", np.log(2 * d) + 0.6))
    delta = float(cfg.get("delta", 0.1))
    table = _norm_table(cfg, spec, d, lam)
    hq = _boundary_drift(table, h, d)
    cone = ConeSpec(hq, delta, 3, table)
    path = _path_from_cfg(cfg, spec, d, h, seed)
    dec = irreducible_decompose(path, cone)
    body = to_jsonable(dec)
    body["path"] = path.sites.tolist()
    n_max = int(cfg.get("n_max", min(8, path.n_steps)))
    try:
        mass = q_measure_mass(spec, hq, lam, n_max, cone, d)
        body["q_mass"] = mass
    except CapExceededError:
        body["q_mass"] = None
    return {"decompose.json": body}


def _run_sample(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    h = _drift(cfg, d)
    cc = _chain_config(cfg, d, h, seed)
    stats = mcmc_sample(spec, cc)
    body = to_jsonable(stats)
    body["speed"] = {
        "v": estimate_speed(stats)["v"].tolist(),
        "stderr": estimate_speed(stats)["stderr"].tolist(),
    }
    files = {"chain.json": body}
    if cfg.get("csv", False):
        rows = ["sweep," + ",".join(f"D{i}" for i in range(d)) + ",potential"]
        for i, (dv, pv) in enumerate(zip(stats.displacements, stats.potentials)):
            rows.append(f"{i}," + ",".join(str(v) for v in dv) + f",{pv}")
        files["chain.csv"] = "\n".join(rows) + "\n"
    return files


def _run_phase(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    h = _drift(cfg, d)
    n_max = int(cfg.get("n_max", 10))
    fe = free_energy(spec, h, n_max, d)
    body = {"schema": {"type": "PhaseBundle", "version": 1},
            "free_energy": to_jsonable(fe)}
    g_amp = float(cfg.get("g_max", 1.0))
    g_grid = [(-g_amp + 2 * g_amp * i / 40) * np.eye(d)[0] for i in range(41)]
    u_grid = [u * np.eye(d)[0] for u in np.linspace(-0.95, 0.95, 39)]
    rt = rate_function(spec, h, u_grid, g_grid, n_max, d)
    body["rate_function"] = to_jsonable(rt)
    report = classify_phase(spec, h, d, n_max=min(n_max, 10))
    body["report"] = to_jsonable(report)
    scan_amps = cfg.get("scan") or np.linspace(0.1, 1.0, 7).tolist()
    hhat = h / np.linalg.norm(h) if h.any() else np.eye(d)[0]
    scan = []
    for amp in scan_amps:
        sf = speed_from_free_energy(spec, amp * hhat, n_max=n_max, d=d)
        scan.append({"amp": float(amp),
                     "v": sf["v"].tolist(),
                     "stderr": sf["stderr"].tolist()})
    body["scan"] = scan
    return {"phase.json": body}


def _run_patterns(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    h = _drift(cfg, d)
    pat = Pattern(np.asarray(
        cfg.get("pattern", [[0, 0], [1, 0], [1, 1], [0, 1]]), dtype=np.int64))
    cc = _chain_config(cfg, d, h, seed)
    cc = ChainConfig(**{**cc.__dict__, "record_paths": True})
    stats = mcmc_sample(spec, cc)
    freq = estimate_pattern_frequency(stats, pat)
    return {"patterns.json": {
        "schema": {"type": "PatternFrequency", "version": 1},
        "pattern": pat.sites.tolist(),
        "model": spec.name,
        "n": cc.n,
        **{k: v for k, v in freq.items()},
    }}


def _run_check(cfg, seed):
    spec = _model(cfg)
    d = _dim(cfg)
    rows = checks.run_all(spec, d, cfg.get("lambda"))
    ok = all(r["ok"] for r in rows)
    return {"check.json": {
        "schema": {"type": "CheckReport", "version": 1},
        "ok": ok,
        "checks": rows,
    }}


_DISPATCH = {
    "enumerate": _run_enumerate,
    "gf": _run_gf,
    "lyapunov": _run_lyapunov,
    "wulff": _run_wulff,
    "skeleton": _run_skeleton,
    "decompose": _run_decompose,
    "sample": _run_sample,
    "phase": _run_phase,
    "patterns": _run_patterns,
    "check": _run_check,
}


def _config_hash(cfg: dict, seed: int) -> str:
    canon = json.dumps({"config": cfg, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def run(subcommand: str, config_path: str, seed: int | None = None,
        out_dir: str | None = None, workers: int | None = None) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        if subcommand not in _DISPATCH:
            raise ConfigError(f"unknown subcommand: {subcommand}")
        cfg = _load_config(config_path)
        if workers is not None:
            cfg["workers"] = workers
        seed = int(seed if seed is not None else cfg.get("seed", 0))
        out = out_dir or cfg.get("out", ".")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(out, exist_ok=True)
    written = []
    try:
        files = _DISPATCH[subcommand](cfg, seed)
        manifest = {
            "config_hash": _config_hash(cfg, seed),
            "seed": seed,
            "subcommand": subcommand,
            "versions": _versions(),
            "outputs": {},
        }
        for name, payload in files.items():
            text = payload if isinstance(payload, str) else dumps(payload)
            if isinstance(payload, dict):
                payload.setdefault("manifest_hash", manifest["config_hash"])
                text = dumps(payload)
            path = os.path.join(out, name)
            with open(path, "w") as fh:
                fh.write(text)
            written.append(path)
            manifest["outputs"][name] = hashlib.sha256(text.encode()).hexdigest()
        with open(os.path.join(out, "manifest.json"), "w") as fh:
            fh.write(json.dumps(manifest, sort_keys=True, indent=1))
        if subcommand == "check":
            body = files["check.json"]
            for row in body["checks"]:
                status = "PASS" if row["ok"] else "FAIL"
                print(f"[{status}] {row['name']}"
                      + (f": {row['detail']}" if row["detail"] else ""))
            return 0 if body["ok"] else 1
        for path in written:
            print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        _cleanup(written)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapExceededError as exc:
        _cleanup(written)
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        _cleanup(written)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _cleanup(paths):
    for p in paths:
        try:
            os.unlink(p)
        except OSError:
            pass


def _versions() -> dict:
    import numba
    import scipy

    return {
        "selfwalk": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="selfwalk",
        description="simulate and analyze self-interacting lattice walks",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML or JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, args.seed, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
