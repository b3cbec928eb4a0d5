"""Command-line front end: config parsing, dispatch, and report generation.

A run is described by a strict JSON document (unknown keys rejected by name,
defaults applied at parse time and echoed into the run manifest).  Every
artifact is written atomically (temp file in the target directory + rename),
and each run emits a ``manifest.json`` recording the command, the resolved
configuration, seed, library versions, tolerances, and wall-clock durations,
so a run can be reproduced from its manifest alone.

Exit codes separate "the math disagrees" from "the run broke": 0 on success,
2 when a numerical check honestly fails (mimic-check cells out of tolerance),
1 for operational errors, reported as a single ``mimicvol: ...`` line on
stderr.  Data artifacts are byte-identical across reruns of the same config;
the manifest is the run log and carries durations, so it is exempt.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy

from . import __version__
from .bessel import BesselSpec, CirSpec, density_a1, laplace_joint
from .dupire import (
    LocalVolSurface,
    extract_local_vol,
    price_forward_pde,
    read_discount_csv,
    read_price_surface_csv,
    write_price_surface_csv,
)
from .errors import ConfigError, DomainError, MimicvolError
from .hybrid import RatesSpec, hybrid_cov, simulate_hybrid_grid, write_hybrid_csv
from .localvol import (
    build_surface,
    heston_transform,
    local_var_corr,
    local_var_transformed,
    local_var_zero_corr,
    read_localvol_csv,
    write_localvol_csv,
)
from .montecarlo import (
    MCConfig,
    ModelSpec,
    mimic_check,
    simulate_model,
    write_path_csv,
)
from .specfun import DEFAULT_CONFIG

__all__ = ["ModelConfig", "RunConfig", "parse_config", "run", "main"]

_COMMANDS = (
    "density",
    "laplace",
    "localvol",
    "simulate",
    "mimic-check",
    "dupire-extract",
    "pde-price",
    "hybrid",
)
_REPORT_FORMATS = ("csv", "json")
_CLI_MODEL_KINDS = ("bessel_zero_corr", "bessel_corr", "heston", "local_vol", "hybrid")

_TOP_KEYS = {"command", "model", "mc", "grid", "io", "report_format"}
_MODEL_KEYS = {"kind", "delta", "start", "rho", "s0", "drift", "cir", "rates"}
_CIR_KEYS = {"kappa", "theta", "eta", "v0"}
_RATES_KEYS = {"kind", "r0", "a", "sigma_r", "rho_rs"}
_MC_KEYS = {"paths", "steps", "seed", "scheme", "bandwidth_rule", "bandwidth"}
_GRID_KEYS = {"t_nodes", "x_nodes"}
_IO_KEYS = {"input", "discount"}


# ---------------------------------------------------------------------------
# Configuration schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelConfig:
    """Validated model fields from the config document.

    ``drift`` is a constant deterministic short rate (the JSON schema cannot
    carry a callable); kinds needing a surface pick it up from ``io.input``
    at run time.
    """

    kind: str
    delta: float | None = None
    start: float = 0.0
    rho: float = 0.0
    s0: float = 1.0
    drift: float | None = None
    cir: CirSpec | None = None
    rates: RatesSpec | None = None


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: command, model, MC settings, grid, and I/O."""

    command: str
    model: ModelConfig
    mc: MCConfig
    t_nodes: tuple[float, ...]
    x_nodes: tuple[float, ...]
    input_path: str | None = None
    discount_path: str | None = None
    report_format: str = "csv"


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f'unknown key "{key}" in {where}')


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f'missing required key "{key}" in {where}')
    return obj[key]


def _as_object(value, key: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f'"{key}" must be a JSON object')
    return value


def _as_str(value, key: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f'"{key}" must be a string')
    return value


def _as_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'"{key}" must be a number')
    return float(value)


def _as_count(value, key: str) -> int:
    """An integer count; integral floats (1e6) are accepted for convenience."""
    if isinstance(value, bool):
        raise ConfigError(f'"{key}" must be an integer')
    if isinstance(value, float):
        if not value.is_integer():
            raise ConfigError(f'"{key}" must be an integer')
        return int(value)
    if not isinstance(value, int):
        raise ConfigError(f'"{key}" must be an integer')
    return value


def _as_nodes(value, key: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f'"{key}" must be a non-empty array of numbers')
    nodes = tuple(_as_number(v, key) for v in value)
    if any(n <= 0 for n in nodes) or any(b <= a for a, b in zip(nodes, nodes[1:])):
        raise ConfigError(f'"{key}" must be positive and strictly increasing')
    return nodes


def _parse_cir(obj) -> CirSpec:
    obj = _as_object(obj, "cir")
    _check_keys(obj, _CIR_KEYS, '"cir"')
    try:
        return CirSpec(
            kappa=_as_number(_require(obj, "kappa", '"cir"'), "kappa"),
            theta=_as_number(_require(obj, "theta", '"cir"'), "theta"),
            eta=_as_number(_require(obj, "eta", '"cir"'), "eta"),
            v0=_as_number(obj.get("v0", 0.0), "v0"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _parse_rates(obj) -> RatesSpec:
    obj = _as_object(obj, "rates")
    _check_keys(obj, _RATES_KEYS, '"rates"')
    try:
        return RatesSpec(
            kind=_as_str(_require(obj, "kind", '"rates"'), "rates.kind"),
            r0=_as_number(obj.get("r0", 0.0), "r0"),
            a=_as_number(obj.get("a", 0.0), "a"),
            sigma_r=_as_number(obj.get("sigma_r", 0.0), "sigma_r"),
            rho_rs=_as_number(obj.get("rho_rs", 0.0), "rho_rs"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _parse_model(obj) -> ModelConfig:
    obj = _as_object(obj, "model")
    _check_keys(obj, _MODEL_KEYS, '"model"')
    kind = _as_str(_require(obj, "kind", '"model"'), "kind")
    if kind not in _CLI_MODEL_KINDS:
        raise ConfigError(f'unknown model kind "{kind}"')
    delta = None if "delta" not in obj else _as_number(obj["delta"], "delta")
    if delta is not None and not delta > 0:
        raise ConfigError('"delta" must be positive')
    start = _as_number(obj.get("start", 0.0), "start")
    if start < 0:
        raise ConfigError('"start" must be nonnegative')
    rho = _as_number(obj.get("rho", 0.0), "rho")
    if not -1.0 <= rho <= 1.0:
        raise ConfigError('"rho" must lie in [-1, 1]')
    s0 = _as_number(obj.get("s0", 1.0), "s0")
    if not s0 > 0:
        raise ConfigError('"s0" must be positive')
    drift = None if "drift" not in obj else _as_number(obj["drift"], "drift")
    cir = None if "cir" not in obj else _parse_cir(obj["cir"])
    rates = None if "rates" not in obj else _parse_rates(obj["rates"])
    if kind in ("bessel_zero_corr", "bessel_corr") and delta is None:
        raise ConfigError(f'"delta" is required for model kind "{kind}"')
    if kind == "heston" and cir is None:
        raise ConfigError('"cir" is required for model kind "heston"')
    if kind == "hybrid" and rates is None:
        raise ConfigError('"rates" is required for model kind "hybrid"')
    return ModelConfig(
        kind=kind,
        delta=delta,
        start=start,
        rho=rho,
        s0=s0,
        drift=drift,
        cir=cir,
        rates=rates,
    )


def _parse_mc(obj) -> MCConfig:
    obj = _as_object(obj, "mc")
    _check_keys(obj, _MC_KEYS, '"mc"')
    kwargs = {}
    if "paths" in obj:
        kwargs["paths"] = _as_count(obj["paths"], "paths")
    if "steps" in obj:
        kwargs["steps"] = _as_count(obj["steps"], "steps")
    if "seed" in obj:
        kwargs["seed"] = _as_count(obj["seed"], "seed")
        if kwargs["seed"] < 0:
            raise ConfigError('"seed" must be nonnegative')
    if "scheme" in obj:
        kwargs["scheme"] = _as_str(obj["scheme"], "scheme")
    if "bandwidth_rule" in obj:
        kwargs["bandwidth_rule"] = _as_str(obj["bandwidth_rule"], "bandwidth_rule")
    if "bandwidth" in obj:
        kwargs["bandwidth"] = _as_number(obj["bandwidth"], "bandwidth")
    return MCConfig(**kwargs)


def parse_config(source: str) -> RunConfig:
    """Validate a JSON config document into a RunConfig.

    Strict schema: unknown keys anywhere are rejected by name, malformed
    JSON reports the line and column, and every default is resolved here so
    the manifest echoes the full effective configuration.
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")
    command = _as_str(_require(doc, "command", "config"), "command")
    if command not in _COMMANDS:
        raise ConfigError(f'unknown command "{command}"')
    model = _parse_model(_require(doc, "model", "config"))
    mc = _parse_mc(doc.get("mc", {}))
    grid = _as_object(_require(doc, "grid", "config"), "grid")
    _check_keys(grid, _GRID_KEYS, '"grid"')
    t_nodes = _as_nodes(_require(grid, "t_nodes", '"grid"'), "t_nodes")
    x_nodes = _as_nodes(_require(grid, "x_nodes", '"grid"'), "x_nodes")
    io_obj = _as_object(doc.get("io", {}), "io")
    _check_keys(io_obj, _IO_KEYS, '"io"')
    input_path = None if io_obj.get("input") is None else _as_str(io_obj["input"], "input")
    discount_path = (
        None if io_obj.get("discount") is None else _as_str(io_obj["discount"], "discount")
    )
    report_format = _as_str(doc.get("report_format", "csv"), "report_format")
    if report_format not in _REPORT_FORMATS:
        raise ConfigError(f'unknown report_format "{report_format}"')
    return RunConfig(
        command=command,
        model=model,
        mc=mc,
        t_nodes=t_nodes,
        x_nodes=x_nodes,
        input_path=input_path,
        discount_path=discount_path,
        report_format=report_format,
    )


def resolved_config(config: RunConfig) -> dict:
    """The effective configuration with all defaults applied (manifest echo)."""
    m = config.model
    model: dict = {
        "kind": m.kind,
        "delta": m.delta,
        "start": m.start,
        "rho": m.rho,
        "s0": m.s0,
        "drift": m.drift,
        "cir": None if m.cir is None else asdict(m.cir),
        "rates": None,
    }
    if m.rates is not None:
        rates = asdict(m.rates)
        rates.pop("curve", None)
        model["rates"] = rates
    return {
        "command": config.command,
        "model": model,
        "mc": asdict(config.mc),
        "grid": {"t_nodes": list(config.t_nodes), "x_nodes": list(config.x_nodes)},
        "io": {"input": config.input_path, "discount": config.discount_path},
        "report_format": config.report_format,
    }


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------


def _atomic_write(out_dir: str, name: str, writer: Callable[[str], None]) -> str:
    """Write through a temp file in the target directory, then rename."""
    final = os.path.join(out_dir, name)
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=name + ".", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, final)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return final


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _rows_csv_writer(columns: Sequence[str], rows: list[dict]) -> Callable[[str], None]:
    def write(path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(row[c]) for c in columns) + "\n")

    return write


def _json_rows_writer(rows: list) -> Callable[[str], None]:
    def write(path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")

    return write


@dataclass(frozen=True)
class _CommandResult:
    """Artifacts plus manifest fields produced by one subcommand.

    outputs holds (filename, writer, rows) triples; rows is the same table
    as a list of dicts for the JSON mirror, or None for artifacts that are
    only meaningful as CSV (path dumps).
    """

    outputs: tuple
    tolerances: dict
    summary: dict
    check_failed: bool = False


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _const_rate(value: float | None) -> Callable[[float], float] | None:
    if value is None:
        return None
    return lambda t, c=float(value): c


def _build_model(config: RunConfig, surface=None) -> ModelSpec:
    """Assemble the simulatable ModelSpec, attaching a loaded surface if any."""
    m = config.model
    drift = _const_rate(m.drift)
    if m.kind in ("bessel_zero_corr", "bessel_corr"):
        spec = BesselSpec(delta=m.delta, start=m.start)
        return ModelSpec(kind=m.kind, spec=spec, rho=m.rho, s0=m.s0, drift=drift)
    if m.kind == "heston":
        return ModelSpec(kind="heston", spec=m.cir, rho=m.rho, s0=m.s0, drift=drift)
    if m.kind == "local_vol":
        if surface is None:
            raise ConfigError('model kind "local_vol" requires "io.input" (local-vol CSV)')
        return ModelSpec(kind="local_vol", surface=surface, s0=m.s0, drift=drift)
    return ModelSpec(
        kind="hybrid",
        spec=m.cir,
        rho=m.rho,
        rates=m.rates,
        surface=surface,
        s0=m.s0,
        drift=drift,
    )


def _cmd_density(config: RunConfig) -> _CommandResult:
    if config.model.delta is None:
        raise ConfigError('"delta" is required for the density command')
    rows = []
    for x in config.x_nodes:
        ev = density_a1(config.model.delta, float(x))
        rows.append(
            {
                "x": float(x),
                "f": ev.value,
                "terms": ev.terms_used,
                "trunc_bound": ev.truncation_bound,
            }
        )
    columns = ("x", "f", "terms", "trunc_bound")
    return _CommandResult(
        outputs=(("density.csv", _rows_csv_writer(columns, rows), rows),),
        tolerances={"series_abs_tol": DEFAULT_CONFIG.abs_tol},
        summary={"points": len(rows)},
    )


def _cmd_laplace(config: RunConfig) -> _CommandResult:
    """Tabulate E[exp(-(b^2/2) A_t)] over the (t, b) grid (b from x_nodes)."""
    if config.model.delta is None:
        raise ConfigError('"delta" is required for the laplace command')
    spec = BesselSpec(delta=config.model.delta, start=config.model.start)
    rows = []
    for t in config.t_nodes:
        for b in config.x_nodes:
            rows.append(
                {
                    "t": float(t),
                    "b": float(b),
                    "value": laplace_joint(spec, 0.0, float(b), float(t)),
                }
            )
    columns = ("t", "b", "value")
    return _CommandResult(
        outputs=(("laplace.csv", _rows_csv_writer(columns, rows), rows),),
        tolerances={"series_abs_tol": DEFAULT_CONFIG.abs_tol},
        summary={"points": len(rows)},
    )


def _cmd_localvol(config: RunConfig) -> _CommandResult:
    m = config.model
    if (m.delta is None) == (m.cir is None):
        raise ConfigError('localvol requires exactly one of "delta" and "cir"')
    transform = None if m.cir is None else heston_transform(m.cir, m.s0)
    surface, points = build_surface(
        np.array(config.t_nodes),
        np.array(config.x_nodes),
        delta=m.delta,
        rho=m.rho,
        transform=transform,
        mc_config=config.mc,
    )
    rows = [
        {"t": p.t, "x": p.x, "sigma2": p.sigma2, "method": p.method, "err": p.err}
        for p in points
    ]
    return _CommandResult(
        outputs=(("localvol.csv", lambda path: write_localvol_csv(points, path), rows),),
        tolerances={"series_abs_tol": DEFAULT_CONFIG.abs_tol},
        summary={
            "points": len(points),
            "sigma2_min": float(np.min(surface.sigma2)),
            "sigma2_max": float(np.max(surface.sigma2)),
        },
    )


def _cmd_simulate(config: RunConfig) -> _CommandResult:
    if len(config.t_nodes) != 1:
        raise ConfigError("simulate requires exactly one entry in grid.t_nodes")
    surface = None if config.input_path is None else read_localvol_csv(config.input_path)
    model = _build_model(config, surface)
    bundle = simulate_model(model, float(config.t_nodes[0]), config.mc)
    return _CommandResult(
        outputs=(("paths.csv", lambda path: write_path_csv(bundle, path), None),),
        tolerances={},
        summary={
            "paths": bundle.paths,
            "t": bundle.t,
            "mean_ln_s": float(np.mean(bundle.terminal_log_stock)),
            "clamp_count": bundle.clamp_count,
        },
    )


def _auto_surface(config: RunConfig) -> LocalVolSurface:
    """Analytic mimicking surface of the configured model, check-window sized.

    Log-strike columns are sinh-spaced (dense near the money) over the wider
    of the padded strike span and the 4.5-sigma reachable range at the last
    maturity, sigma being the root of the expected integrated variance.  Each
    time row evaluates only the columns inside its own reachable range: out
    there the conditional variance is a remote-tail quantity no estimator
    resolves and no simulated path visits, so the outside columns copy the
    cone-edge value, which is what boundary clamping samples anyway.
    """
    m = config.model
    if m.drift is not None:
        raise ConfigError('auto-built surfaces need zero drift; provide "io.input"')
    transform = None
    if m.kind in ("bessel_zero_corr", "bessel_corr"):
        if m.s0 != 1.0:
            raise ConfigError('auto-built surfaces need s0 = 1; provide "io.input"')
        if m.start != 0.0:
            raise ConfigError(
                'auto-built surfaces need the variance clock started at zero; '
                'provide "io.input"'
            )
        delta = m.delta
    elif m.kind == "heston":
        transform = heston_transform(m.cir, m.s0)
        if transform.spec.start != 0.0:
            raise ConfigError('auto-built surfaces need v0 = 0; provide "io.input"')
        delta = transform.spec.delta
    else:
        raise ConfigError(f'mimic-check needs "io.input" for model kind "{m.kind}"')

    def reach(t: float) -> float:
        """4.5 standard deviations of ln S_t from the integrated-variance mean."""
        u = float(transform.g(t)) if transform is not None else t
        return 4.5 * math.sqrt(0.5 * delta) * u

    t_max = float(config.t_nodes[-1])
    l_strikes = [abs(math.log(x / m.s0)) for x in config.x_nodes]
    half = max(reach(t_max), max(l_strikes) + 0.2)
    beta = 4.6
    l_cols = half * np.sinh(beta * np.linspace(-1.0, 1.0, 41)) / math.sinh(beta)
    t_rows = np.unique(
        np.concatenate(
            [
                np.geomspace(0.02 * t_max, t_max, 12),
                t_max - np.geomspace(0.9 * t_max, 0.004 * t_max, 12),
            ]
        )
    )
    sigma2 = np.empty((len(t_rows), len(l_cols)))
    for i, t in enumerate(t_rows):
        inside = np.abs(l_cols) <= reach(float(t))
        inside[np.argmin(np.abs(l_cols))] = True
        idx = np.flatnonzero(inside)
        for j in idx:
            l = float(l_cols[j])
            if transform is not None:
                pt = local_var_transformed(transform, m.rho, float(t), m.s0 * math.exp(l))
            elif m.kind == "bessel_corr":
                pt = local_var_corr(delta, m.rho, float(t), l)
            else:
                pt = local_var_zero_corr(delta, float(t), l)
            sigma2[i, j] = pt.sigma2
        sigma2[i, : idx[0]] = sigma2[i, idx[0]]
        sigma2[i, idx[-1] + 1 :] = sigma2[i, idx[-1]]
    return LocalVolSurface(t_nodes=t_rows, x_nodes=m.s0 * np.exp(l_cols), sigma2=sigma2)


def _cmd_mimic_check(config: RunConfig) -> _CommandResult:
    if config.model.kind == "hybrid":
        raise ConfigError("mimic-check does not support the hybrid kind")
    if config.input_path is not None:
        surface = read_localvol_csv(config.input_path)
    else:
        surface = _auto_surface(config)
    model_surface = surface if config.model.kind == "local_vol" else None
    model = _build_model(config, model_surface)
    report = mimic_check(
        model, surface, list(config.t_nodes), list(config.x_nodes), config.mc
    )
    rows = [
        {
            "t": c.t,
            "strike": c.strike,
            "price_sv": c.price_sv,
            "se_sv": c.se_sv,
            "price_lv": c.price_lv,
            "se_lv": c.se_lv,
            "status": "pass" if c.passed else "fail",
        }
        for c in report.cells
    ]
    columns = ("t", "strike", "price_sv", "se_sv", "price_lv", "se_lv", "status")
    return _CommandResult(
        outputs=(("report.csv", _rows_csv_writer(columns, rows), rows),),
        tolerances={"se_multiple": 3.0},
        summary={"cells": len(report.cells), "failed": report.n_failed},
        check_failed=not report.all_passed,
    )


def _cmd_dupire_extract(config: RunConfig) -> _CommandResult:
    if config.input_path is None:
        raise ConfigError('"io.input" (price surface CSV) is required for dupire-extract')
    if config.discount_path is None:
        raise ConfigError('"io.discount" (discount CSV) is required for dupire-extract')
    discount = read_discount_csv(config.discount_path)
    surface = read_price_surface_csv(config.input_path, discount, config.model.s0)
    lv = extract_local_vol(surface)
    rows = [
        {"t": float(t), "x": float(x), "sigma2": float(lv.sigma2[i, j])}
        for i, t in enumerate(lv.t_nodes)
        for j, x in enumerate(lv.x_nodes)
    ]
    columns = ("t", "x", "sigma2")
    return _CommandResult(
        outputs=(("localvol.csv", _rows_csv_writer(columns, rows), rows),),
        tolerances={
            "denominator_floor": 1e-10 / config.model.s0,
            "max_floored_fraction": 0.1,
        },
        summary={
            "t_nodes": len(lv.t_nodes),
            "x_nodes": len(lv.x_nodes),
            "sigma2_min": float(np.min(lv.sigma2)),
            "sigma2_max": float(np.max(lv.sigma2)),
        },
    )


def _cmd_pde_price(config: RunConfig) -> _CommandResult:
    if config.input_path is None:
        raise ConfigError('"io.input" (local-vol CSV) is required for pde-price')
    lv = read_localvol_csv(config.input_path)
    rate = _const_rate(config.model.drift) or (lambda t: 0.0)
    surface = price_forward_pde(
        lv, config.model.s0, rate, list(config.t_nodes), list(config.x_nodes)
    )
    rows = [
        {"maturity": float(t), "strike": float(k), "price": float(surface.prices[i, j])}
        for i, t in enumerate(surface.maturities)
        for j, k in enumerate(surface.strikes)
    ]
    return _CommandResult(
        outputs=(("prices.csv", lambda path: write_price_surface_csv(surface, path), rows),),
        tolerances={},
        summary={
            "maturities": len(surface.maturities),
            "strikes": len(surface.strikes),
        },
    )


def _cmd_hybrid(config: RunConfig) -> _CommandResult:
    if config.model.kind != "hybrid":
        raise ConfigError('the hybrid command requires model kind "hybrid"')
    surface = None if config.input_path is None else read_localvol_csv(config.input_path)
    model = _build_model(config, surface)
    bundles = simulate_hybrid_grid(model, np.array(config.t_nodes), config.mc)
    slices = [hybrid_cov(b, list(config.x_nodes)) for b in bundles]
    rows = [
        {
            "t": sl.t,
            "x": float(x),
            "cov": float(sl.cov[j]),
            "cov_se": float(sl.cov_se[j]),
            "bond": sl.bond,
            "fwd_rate": sl.fwd_rate,
        }
        for sl in slices
        for j, x in enumerate(sl.x_levels)
    ]
    return _CommandResult(
        outputs=(("hybrid.csv", lambda path: write_hybrid_csv(slices, path), rows),),
        tolerances={},
        summary={"maturities": len(slices), "paths": config.mc.paths},
    )


_HANDLERS = {
    "density": _cmd_density,
    "laplace": _cmd_laplace,
    "localvol": _cmd_localvol,
    "simulate": _cmd_simulate,
    "mimic-check": _cmd_mimic_check,
    "dupire-extract": _cmd_dupire_extract,
    "pde-price": _cmd_pde_price,
    "hybrid": _cmd_hybrid,
}


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _default_threads() -> int:
    env = os.environ.get("MIMICVOL_THREADS", "")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f'MIMICVOL_THREADS must be an integer, got "{env}"') from None
        if n < 1:
            raise ConfigError("MIMICVOL_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def _write_manifest(out_dir: str, manifest: dict) -> None:
    def write(path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    _atomic_write(out_dir, "manifest.json", write)


def run(config: RunConfig, out_dir: str = ".", threads: int | None = None) -> int:
    """Execute a validated run into out_dir; returns the process exit status.

    All computation is vectorized single-process, so results never depend on
    the thread setting; it is recorded in the manifest for provenance.
    """
    t_start = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    if threads is None:
        threads = _default_threads()
    manifest = {
        "command": config.command,
        "config": resolved_config(config),
        "seed": config.mc.seed,
        "threads": threads,
        "versions": {
            "mimicvol": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    try:
        result = _HANDLERS[config.command](config)
    except (MimicvolError, OSError, ValueError) as exc:
        print(f"mimicvol: {exc}", file=sys.stderr)
        manifest.update(
            status="error",
            exit_code=1,
            error=str(exc),
            outputs=[],
            durations={"total_s": time.perf_counter() - t_start},
        )
        _write_manifest(out_dir, manifest)
        return 1
    t_compute = time.perf_counter()
    written = []
    for name, writer, rows in result.outputs:
        written.append(os.path.basename(_atomic_write(out_dir, name, writer)))
        if config.report_format == "json" and rows is not None:
            json_name = name.rsplit(".", 1)[0] + ".json"
            written.append(
                os.path.basename(_atomic_write(out_dir, json_name, _json_rows_writer(rows)))
            )
    t_end = time.perf_counter()
    exit_code = 2 if result.check_failed else 0
    if result.check_failed:
        print(
            f"mimicvol: mimic-check failed {result.summary['failed']}/"
            f"{result.summary['cells']} cells",
            file=sys.stderr,
        )
    manifest.update(
        status="check_failed" if result.check_failed else "ok",
        exit_code=exit_code,
        outputs=written,
        tolerances=result.tolerances,
        summary=result.summary,
        durations={
            "compute_s": t_compute - t_start,
            "write_s": t_end - t_compute,
            "total_s": t_end - t_start,
        },
    )
    _write_manifest(out_dir, manifest)
    return exit_code


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; that code is reserved for numerical
    check failures here, so usage problems are remapped to exit 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"mimicvol: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _Parser(
        prog="mimicvol",
        description="Local-volatility surfaces of Bessel-driven stochastic "
        "volatility models: analytic evaluation, Monte Carlo verification, "
        "Dupire extraction, and stochastic-rate extensions.",
    )
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory (default: cwd)")
    parser.add_argument("--seed", type=int, default=None, help="override mc.seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker count (default: MIMICVOL_THREADS or all cores)",
    )
    args = parser.parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            source = fh.read()
        config = parse_config(source)
        if config.command != args.command:
            raise ConfigError(
                f'config command "{config.command}" does not match '
                f'the "{args.command}" invocation'
            )
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            config = replace(config, mc=replace(config.mc, seed=args.seed))
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        return run(config, out_dir=args.out, threads=args.threads)
    except (MimicvolError, OSError) as exc:
        print(f"mimicvol: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
