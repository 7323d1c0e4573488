"""Deterministic experiment runner.

Single binary with subcommands

    verify | closure-scan | simulate | inviscid-cauchy | ito-strato | estimate-sweep

and flags ``--config <path> --seed <u64> --out <dir>``.  Every command is a
pure function of (config file, seed): artifacts are CSV with fixed headers and
17-significant-digit floats, or JSON for the nested verify report, so reruns
are byte-identical.  Exit codes: 0 pass, 1 assertion failure, 2 config error.
``TORUS_SPDE_THREADS`` caps worker threads (default 1).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import ConfigError
from .estimates import (
    NOISE_KINDS,
    NORM_KINDS,
    closure_scan_multi,
    estimate_pair,
    identity_suite,
    reports_to_csv,
)
from .fields import FieldSpec, FourierField, random_field
from .norms import sobolev_inner
from .solver import (
    BrownianPath,
    NoiseEnsemble,
    SolverConfig,
    simulate,
    step_ito_em,
    step_rk4,
    step_strato_heun,
)
from .utils import fmt17, pmap, substream

_REQUIRED = object()

ESTIMATE_SWEEP_CSV_HEADER = (
    "band,m,noise_kind,norm_kind,trial,"
    "lhs_sum,lhs_cross_sq,ratio_sum,ratio_cross,ratio_cross_alt,ratio_single"
)
INVISCID_CSV_HEADER = "nu_a,nu_b,sup_diff_sq"
ITO_STRATO_CSV_HEADER = "dt,terminal_gap,slope"


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return doc


def _parse(doc: dict, schema: dict, where: str) -> dict:
    unknown = sorted(set(doc) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r} in {where}")
    out = {}
    for key, (coerce, default) in schema.items():
        if key in doc:
            try:
                out[key] = coerce(doc[key])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for config key {key!r} in {where}: {exc}") from exc
        elif default is _REQUIRED:
            raise ConfigError(f"missing required config key {key!r} in {where}")
        else:
            out[key] = default
    return out


def _int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ValueError(f"expected an integer, got {x!r}")
    return x


def _float(x) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    return float(x)


def _opt_float(x) -> float | None:
    return None if x is None else _float(x)


def _bool(x) -> bool:
    if not isinstance(x, bool):
        raise ValueError(f"expected true/false, got {x!r}")
    return x


def _str(x) -> str:
    if not isinstance(x, str):
        raise ValueError(f"expected a string, got {x!r}")
    return x


def _int_list(x) -> list[int]:
    if not isinstance(x, list):
        raise ValueError(f"expected a list, got {x!r}")
    return [_int(v) for v in x]


def _float_list(x) -> list[float]:
    if not isinstance(x, list):
        raise ValueError(f"expected a list, got {x!r}")
    return [_float(v) for v in x]


def _str_list(x) -> list[str]:
    if not isinstance(x, list):
        raise ValueError(f"expected a list, got {x!r}")
    return [_str(v) for v in x]


def _dict_or_none(x):
    if x is not None and not isinstance(x, dict):
        raise ValueError(f"expected an object or null, got {x!r}")
    return x


_ENSEMBLE_SCHEMA = {
    "kind": (_str, _REQUIRED),
    "count": (_int, _REQUIRED),
    "band": (_int, 2),
    "decay": (_float, 1.0),
    "amplitude": (_float, 1.0),
    "weight_exponent": (_float, 1.0),
}

_U0_SCHEMA = {
    "band": (_int, _REQUIRED),
    "decay": (_float, 1.0),
    "amplitude": (_float, 1.0),
}


def _ensemble_from(doc: dict | None, seed: int) -> NoiseEnsemble | None:
    if doc is None:
        return None
    vals = _parse(doc, _ENSEMBLE_SCHEMA, "ensemble")
    if vals["kind"] not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind {vals['kind']!r}")
    if vals["count"] < 0:
        raise ConfigError("ensemble count must be nonnegative")
    return NoiseEnsemble.build(
        vals["kind"],
        vals["count"],
        band=vals["band"],
        decay=vals["decay"],
        seed=seed,
        amplitude=vals["amplitude"],
        weight_exponent=vals["weight_exponent"],
    )


def _u0_from(doc: dict | None, seed: int, n: int) -> FourierField:
    vals = _parse(doc if doc is not None else {"band": min(n, 2)}, _U0_SCHEMA, "u0")
    if vals["band"] > n:
        raise ConfigError(f"u0 band {vals['band']} exceeds the truncation band {n}")
    f = random_field(FieldSpec(vals["band"], vals["decay"], True), substream(seed, 41))
    return f * vals["amplitude"]


def _write(out_dir: str, name: str, text: str) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    target = d / name
    target.write_text(text)
    return target


def _stepper(scheme: str):
    if scheme == "ito_em":
        return lambda u, dw, cfg: step_ito_em(u, dw, cfg)
    if scheme == "strato_heun":
        return lambda u, dw, cfg: step_strato_heun(u, dw, cfg)
    return lambda u, dw, cfg: step_rk4(u, cfg)


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(config: dict, seed: int, out_dir: str) -> int:
    vals = _parse(config, {"tol": (_float, 1e-11)}, "verify config")
    tol = vals["tol"]
    pairs = []
    all_passed = True
    worst = 0.0
    for j in range(10):
        band = 2 if j % 2 == 0 else 3
        xi = random_field(FieldSpec(2, 1.0, True), substream(seed, 51, j))
        f = random_field(FieldSpec(band, 0.5, True), substream(seed, 52, j))
        report = identity_suite(xi, f, tol=tol, rng=substream(seed, 53, j))
        all_passed = all_passed and report.all_passed
        worst = max(worst, report.worst_residual)
        doc = report.as_dict()
        doc["pair"] = j
        doc["band"] = band
        pairs.append(doc)
    payload = {
        "seed": seed,
        "tol": tol,
        "all_passed": all_passed,
        "worst_residual": worst,
        "pairs": pairs,
    }
    target = _write(out_dir, "verify_report.json", json.dumps(payload, indent=2) + "\n")
    status = "PASS" if all_passed else "FAIL"
    print(f"identity suite: {status} (worst residual {fmt17(worst)}, tol {fmt17(tol)})")
    print(f"wrote {target}")
    return 0 if all_passed else 1


_CLOSURE_SCHEMA = {
    "bands": (_int_list, [4, 8, 16]),
    "m_values": (_int_list, [1, 2, 3]),
    "noise_kinds": (_str_list, list(NOISE_KINDS)),
    "norm_kinds": (_str_list, list(NORM_KINDS)),
    "trials": (_int, 100),
    "xi_band": (_int, 2),
    "xi_decay": (_float, 1.0),
    "f_decay": (_float, 0.0),
    "threads": (lambda x: None if x is None else _int(x), None),
}


def _check_scan_kinds(noise_kinds, norm_kinds) -> None:
    for kind in noise_kinds:
        if kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {kind!r}")
    for nk in norm_kinds:
        if nk not in NORM_KINDS:
            raise ConfigError(f"unknown norm kind {nk!r}")


def cmd_closure_scan(config: dict, seed: int, out_dir: str) -> int:
    vals = _parse(config, _CLOSURE_SCHEMA, "closure-scan config")
    _check_scan_kinds(vals["noise_kinds"], vals["norm_kinds"])
    if vals["bands"] != sorted(vals["bands"]):
        raise ConfigError("bands must be listed in increasing order")
    if vals["trials"] < 0:
        raise ConfigError("trials must be nonnegative")
    reports = []
    for kind in vals["noise_kinds"]:
        reports.extend(
            closure_scan_multi(
                vals["bands"],
                vals["m_values"],
                kind,
                vals["norm_kinds"],
                vals["trials"],
                seed,
                xi_band=vals["xi_band"],
                xi_decay=vals["xi_decay"],
                f_decay=vals["f_decay"],
                threads=vals["threads"],
            )
        )
    target = _write(out_dir, "closure_scan.csv", reports_to_csv(reports))
    print(f"wrote {target}")
    return 0


_SIMULATE_SCHEMA = {
    "n": (_int, _REQUIRED),
    "m": (_int, _REQUIRED),
    "nu": (_float, 0.0),
    "dt": (_float, _REQUIRED),
    "steps": (_int, _REQUIRED),
    "scheme": (_str, "ito_em"),
    "ensemble": (_dict_or_none, None),
    "hit_threshold": (_opt_float, None),
    "blowup_budget": (_opt_float, None),
    "include_nonlinear": (_bool, True),
    "fast": (_bool, True),
    "debug_checks": (_bool, False),
    "u0": (_dict_or_none, None),
}


def _solver_config(vals: dict, ensemble: NoiseEnsemble | None) -> SolverConfig:
    return SolverConfig(
        n=vals["n"],
        m=vals["m"],
        nu=vals["nu"],
        dt=vals["dt"],
        steps=vals["steps"],
        scheme=vals["scheme"],
        ensemble=ensemble,
        hit_threshold=vals.get("hit_threshold"),
        blowup_budget=vals.get("blowup_budget"),
        include_nonlinear=vals["include_nonlinear"],
        fast=vals.get("fast", True),
        debug_checks=vals.get("debug_checks", False),
    )


def cmd_simulate(config: dict, seed: int, out_dir: str) -> int:
    vals = _parse(config, _SIMULATE_SCHEMA, "simulate config")
    ensemble = _ensemble_from(vals["ensemble"], seed)
    cfg = _solver_config(vals, ensemble)
    u0 = _u0_from(vals["u0"], seed, cfg.n)
    count = ensemble.count if ensemble is not None else 0
    path = BrownianPath.generate(seed, cfg.steps, count, cfg.dt)
    record = simulate(cfg, path, u0)
    target = _write(out_dir, "trajectory.csv", record.to_csv())
    print(
        f"simulated {record.steps_taken} steps ({record.stop_reason}); wrote {target}"
    )
    return 0


_INVISCID_SCHEMA = {
    "viscosities": (_float_list, _REQUIRED),
    "n": (_int, _REQUIRED),
    "m": (_int, _REQUIRED),
    "dt": (_float, _REQUIRED),
    "steps": (_int, _REQUIRED),
    "scheme": (_str, "ito_em"),
    "ensemble": (_dict_or_none, None),
    "include_nonlinear": (_bool, True),
    "u0": (_dict_or_none, None),
    "path_count": (_int, 1),
}


def cmd_inviscid_cauchy(config: dict, seed: int, out_dir: str) -> int:
    vals = _parse(config, _INVISCID_SCHEMA, "inviscid-cauchy config")
    nus = vals["viscosities"]
    if len(nus) < 2:
        raise ConfigError("viscosities must list at least two values")
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise ConfigError("viscosity list must be strictly decreasing")
    if vals["path_count"] < 1:
        raise ConfigError("path_count must be positive")
    ensemble = _ensemble_from(vals["ensemble"], seed)
    count = ensemble.count if ensemble is not None else 0
    cfgs = [
        SolverConfig(
            n=vals["n"],
            m=vals["m"],
            nu=nu,
            dt=vals["dt"],
            steps=vals["steps"],
            scheme=vals["scheme"],
            ensemble=ensemble,
            include_nonlinear=vals["include_nonlinear"],
        )
        for nu in nus
    ]
    u0 = _u0_from(vals["u0"], seed, vals["n"])
    order = max(vals["m"] - 3, 0)
    advance = _stepper(vals["scheme"])

    def one_path(p: int) -> list[float]:
        path = BrownianPath.generate(seed, vals["steps"], count, vals["dt"], stream=(p,))
        states = [u0 for _ in cfgs]
        sups = [0.0] * (len(cfgs) - 1)
        for s in range(vals["steps"]):
            dw = path.increments[s]
            states = [advance(u, dw, cfg) for u, cfg in zip(states, cfgs)]
            for j in range(len(sups)):
                d = states[j] - states[j + 1]
                sups[j] = max(sups[j], sobolev_inner(d, d, order))
        return sups

    per_path = pmap(one_path, list(range(vals["path_count"])))
    lines = [INVISCID_CSV_HEADER]
    for j in range(len(nus) - 1):
        mean_sup = sum(row[j] for row in per_path) / len(per_path)
        lines.append(f"{fmt17(nus[j])},{fmt17(nus[j + 1])},{fmt17(mean_sup)}")
    target = _write(out_dir, "inviscid_cauchy.csv", "\n".join(lines) + "\n")
    print(f"wrote {target}")
    return 0


_ITO_STRATO_SCHEMA = {
    "n": (_int, _REQUIRED),
    "m": (_int, 3),
    "nu": (_float, 0.0),
    "dt": (_float, _REQUIRED),
    "steps": (_int, _REQUIRED),
    "levels": (_int, 3),
    "ensemble": (_dict_or_none, None),
    "include_nonlinear": (_bool, True),
    "u0": (_dict_or_none, None),
    "path_count": (_int, 4),
}


def cmd_ito_strato(config: dict, seed: int, out_dir: str) -> int:
    vals = _parse(config, _ITO_STRATO_SCHEMA, "ito-strato config")
    if vals["levels"] < 1:
        raise ConfigError("levels must be positive")
    if vals["path_count"] < 1:
        raise ConfigError("path_count must be positive")
    ensemble = _ensemble_from(vals["ensemble"], seed)
    count = ensemble.count if ensemble is not None else 0
    u0 = _u0_from(vals["u0"], seed, vals["n"])

    def one_path(p: int) -> list[float]:
        path = BrownianPath.generate(seed, vals["steps"], count, vals["dt"], stream=(p,))
        gaps = []
        for level in range(vals["levels"]):
            cfg_kwargs = dict(
                n=vals["n"],
                m=vals["m"],
                nu=vals["nu"],
                dt=path.dt,
                steps=vals["steps"] * 2**level,
                ensemble=ensemble,
                include_nonlinear=vals["include_nonlinear"],
            )
            rec_ito = simulate(SolverConfig(scheme="ito_em", **cfg_kwargs), path, u0)
            rec_str = simulate(SolverConfig(scheme="strato_heun", **cfg_kwargs), path, u0)
            d = rec_ito.final_field - rec_str.final_field
            gaps.append(math.sqrt(max(sobolev_inner(d, d, 0), 0.0)))
            if level + 1 < vals["levels"]:
                path = path.refine()
        return gaps

    per_path = pmap(one_path, list(range(vals["path_count"])))
    dts = [vals["dt"] / 2**level for level in range(vals["levels"])]
    gaps = [sum(row[level] for row in per_path) / len(per_path) for level in range(vals["levels"])]
    lines = [ITO_STRATO_CSV_HEADER]
    for level, (dt, gap) in enumerate(zip(dts, gaps)):
        slope = ""
        usable = (
            level > 0
            and math.isfinite(gap)
            and math.isfinite(gaps[level - 1])
            and gap > 0
            and gaps[level - 1] > 0
        )
        if usable:
            slope = fmt17(
                math.log(gaps[level - 1] / gap) / math.log(dts[level - 1] / dt)
            )
        lines.append(f"{fmt17(dt)},{fmt17(gap)},{slope}")
    target = _write(out_dir, "ito_strato.csv", "\n".join(lines) + "\n")
    print(f"wrote {target}")
    return 0


_SWEEP_SCHEMA = {
    "bands": (_int_list, [2, 4]),
    "m_values": (_int_list, [1]),
    "noise_kinds": (_str_list, list(NOISE_KINDS)),
    "norm_kinds": (_str_list, ["sobolev"]),
    "trials": (_int, 5),
    "xi_band": (_int, 2),
    "xi_decay": (_float, 1.0),
    "f_decay": (_float, 0.0),
}


def cmd_estimate_sweep(config: dict, seed: int, out_dir: str) -> int:
    vals = _parse(config, _SWEEP_SCHEMA, "estimate-sweep config")
    _check_scan_kinds(vals["noise_kinds"], vals["norm_kinds"])
    if vals["trials"] < 0:
        raise ConfigError("trials must be nonnegative")
    lines = [ESTIMATE_SWEEP_CSV_HEADER]
    for kind in vals["noise_kinds"]:
        for norm_kind in vals["norm_kinds"]:
            for m in vals["m_values"]:
                for band in vals["bands"]:
                    for trial in range(vals["trials"]):
                        # same substreams as the closure scan, so sweep rows
                        # drill into the exact trials the scan reduced over
                        xi = random_field(
                            FieldSpec(vals["xi_band"], vals["xi_decay"], True),
                            substream(seed, 11, band, trial),
                        )
                        f = random_field(
                            FieldSpec(band, vals["f_decay"], True),
                            substream(seed, 12, band, trial),
                        )
                        pairv = estimate_pair(xi, f, m, kind, norm_kind)
                        lines.append(
                            ",".join(
                                [
                                    str(band),
                                    str(m),
                                    kind,
                                    norm_kind,
                                    str(trial),
                                    fmt17(pairv.lhs_sum),
                                    fmt17(pairv.lhs_cross_sq),
                                    fmt17(pairv.ratio_sum),
                                    fmt17(pairv.ratio_cross),
                                    fmt17(pairv.ratio_cross_alt),
                                    fmt17(pairv.ratio_single),
                                ]
                            )
                        )
    target = _write(out_dir, "estimate_sweep.csv", "\n".join(lines) + "\n")
    print(f"wrote {target}")
    return 0


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "verify": cmd_verify,
    "closure-scan": cmd_closure_scan,
    "simulate": cmd_simulate,
    "inviscid-cauchy": cmd_inviscid_cauchy,
    "ito-strato": cmd_ito_strato,
    "estimate-sweep": cmd_estimate_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torus-spde",
        description="Spectral toolbox for stochastic Euler/Navier-Stokes with transport noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed (u64)")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.seed < 0:
            raise ConfigError("seed must be nonnegative")
        config = _load_config(args.config)
        return _COMMANDS[args.command](config, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
