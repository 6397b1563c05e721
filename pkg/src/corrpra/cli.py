"""Command-line front end.

Every run writes ``manifest.json`` echoing the command, the effective
parameters and the digests of its inputs and outputs. Passing a manifest back
through ``--config`` reproduces the run; explicit flags override its values.

Exit status: 0 on success, 1 on input errors, 2 on numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_DECAY_TIMES,
    beta_sweep,
    conditional_angle_curve,
    group_average_matrix,
    signed_correlation_curve,
    write_rows_csv,
)
from .errors import InputError, NumericalError, PraError
from .indicators import Indicator, eigen_factor, eigen_projection, ema_smooth, market_index, sector_index
from .panel import SECTOR_ORDER, ReturnsPanel, build_panel
from .pra import PraConfig, PraFit, fit_multi, fit_single, unconditional_correlation
from .significance import NULL_MODES, null_ensemble, p_values_for
from .spectra import eig_symmetric
from .synthetic import SyntheticSpec, generate_panel, recovery_score

# defaults for every option that may also come from --config
DEFAULTS = {
    "vol_window": 30,
    "clip": 5.0,
    "tau": 1,
    "intercept_divisor": "n-1",
    "K": None,
    "bins": 5,
    "null_trials": 0,
    "null_mode": "iid",
    "null_beta": None,
    "factor": "market",
    "beta": 0.1,
    "base": "market",
    "grid": None,
    "seed": 0,
    "T": 50_000,
    "size": 5,
    "within": 0.4,
    "cross": 0.1,
    "amplitude": 5.0,
    "process": "ar1",
    "phi": 0.9,
    "synth_beta": 0.1,
}
# never written to the manifest: they cannot change any output byte
_UNRECORDED = {"threads", "out", "config", "command", "func"}

RECOVERY_BOUNDS = {"rel_frobenius_error": 0.15, "abs_overlap_true_mode_vN": 0.90}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------- output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_matrix_csv(path: Path, m: np.ndarray, ids: Sequence[str], col_ids: Sequence[str] | None = None) -> None:
    col_ids = ids if col_ids is None else col_ids
    rows = [["asset_id", *col_ids]]
    for i, name in enumerate(ids):
        rows.append([name, *("" if not math.isfinite(x) else repr(float(x)) for x in m[i])])
    path.write_text("".join(",".join(r) + "\n" for r in rows), encoding="utf-8")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects outputs of one command and writes the manifest last."""

    def __init__(self, command: str, params: dict, out: Path):
        self.command = command
        self.params = params
        self.out = out
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.figures: dict[str, list[str]] = {}
        out.mkdir(parents=True, exist_ok=True)

    def input(self, path) -> None:
        if path is not None:
            self.inputs[str(path)] = sha256(path)

    def path(self, name: str, figure: str | None = None) -> Path:
        if name not in self.outputs:
            self.outputs.append(name)
        if figure is not None:
            self.figures.setdefault(figure, []).append(name)
        return self.out / name

    def finish(self, summary: dict | None = None) -> None:
        files = {}
        for name in self.outputs:
            p = self.out / name
            if p.exists():
                files[name] = sha256(p)
        manifest = {
            "tool": "corrpra",
            "version": __version__,
            "command": self.command,
            "parameters": self.params,
            "inputs": self.inputs,
            "outputs": files,
            "figures": self.figures,
        }
        if summary is not None:
            manifest["summary"] = summary
        write_json(self.out / "manifest.json", manifest)


# ---------------------------------------------------------------- inputs


def _load_panel(p: dict, run: Run) -> ReturnsPanel:
    if p.get("panel"):
        run.input(p["panel"])
        sidecar = Path(p["panel"]).with_suffix(".json")
        run.input(sidecar)
        return ReturnsPanel.from_csv(p["panel"])
    if p.get("prices") and p.get("meta"):
        run.input(p["prices"])
        run.input(p["meta"])
        return build_panel(p["prices"], p["meta"], int(p["vol_window"]), float(p["clip"]))
    raise InputError("give --panel, or --prices together with --meta")


def _config(p: dict) -> PraConfig:
    return PraConfig(tau=int(p["tau"]), intercept_divisor=p["intercept_divisor"])


def _parse_beta(text: str) -> float:
    try:
        beta = float(text)
    except ValueError:
        raise InputError(f"decay rate {text!r} is not a number") from None
    if not beta > 0:
        raise InputError(f"decay rate must be positive, got {beta}")
    return beta


def build_factor(panel: ReturnsPanel, spec: str, window: int | None = None) -> Indicator:
    """Indicator from a factor string: ``market``, ``sector:F``, ``ema:BETA`` or ``eigenfactor:BETA``."""
    kind, _, arg = spec.partition(":")
    if kind == "market" and not arg:
        return market_index(panel)
    if kind == "sector" and arg:
        return sector_index(panel, arg)
    if kind == "ema" and arg:
        return ema_smooth(market_index(panel), _parse_beta(arg))
    if kind == "eigenfactor" and arg:
        return eigen_factor(panel, _parse_beta(arg), window)
    raise InputError(f"unknown factor {spec!r}; expected market, sector:F, ema:BETA or eigenfactor:BETA")


def _grid(p: dict) -> list[float]:
    times = p["grid"] if p["grid"] is not None else list(DEFAULT_DECAY_TIMES)
    if isinstance(times, str):
        times = [t for t in times.split(",") if t.strip()]
    out = []
    for t in times:
        t = float(t)
        if not t > 0:
            raise InputError(f"decay times must be positive, got {t}")
        out.append(1.0 / t)
    if not out:
        raise InputError("empty decay-time grid")
    return out


def _synth_spec(p: dict, run: Run) -> SyntheticSpec:
    if p.get("spec"):
        run.input(p["spec"])
        try:
            doc = json.loads(Path(p["spec"]).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"synthetic spec is not valid JSON: {exc}") from None
        doc.setdefault("seed", int(p["seed"]))
        return SyntheticSpec.from_json(doc)
    return SyntheticSpec.four_sector(
        int(p["size"]),
        float(p["within"]),
        float(p["cross"]),
        effect_amplitude=float(p["amplitude"]),
        process=p["process"],
        phi=float(p["phi"]),
        beta=float(p["synth_beta"]),
        seed=int(p["seed"]),
    )


# ---------------------------------------------------------------- shared writers


def _write_fit(run: Run, fit: PraFit, panel: ReturnsPanel, figure: str | None = None) -> None:
    ids = panel.asset_ids
    write_matrix_csv(run.path("C.csv"), fit.intercept, ids)
    write_json(run.path("spectrum_C.json"), fit.c_spectrum.to_json())
    for name, d in fit.sensitivities.items():
        safe = name.replace("#", "_")
        write_matrix_csv(run.path(f"D_{safe}.csv", figure), d, ids)
        write_json(run.path(f"spectrum_D_{safe}.json", figure), {**fit.d_spectra[name].to_json(), **fit.extremes(name)})
    write_json(run.path("fit.json"), fit.to_json(ids))


def _null_report(panel, config, x: Indicator, fit: PraFit, p: dict, threads) -> dict:
    mode = p["null_mode"]
    beta = p["null_beta"]
    if mode == "iid_ema" and beta is None:
        beta = x.beta
    null = null_ensemble(
        panel,
        config,
        int(p["null_trials"]),
        int(p["seed"]),
        mode=mode,
        beta=None if beta is None else float(beta),
        indicator=x,
        threads=threads,
    )
    observed = fit.extremes()
    return {
        "factor": fit.factor_names[0],
        "observed": observed,
        "p_values": p_values_for(null, observed),
        "null": null.to_json(),
    }


# ---------------------------------------------------------------- commands


def cmd_ingest(p: dict, run: Run, threads) -> dict:
    panel = _load_panel(p, run)
    panel.to_csv(run.path("panel.csv"))
    run.path("panel.json")
    return {"n_assets": panel.n_assets, "n_dates": panel.n_dates}


def cmd_describe(p: dict, run: Run, threads) -> dict:
    panel = _load_panel(p, run)
    config = _config(p)
    c = unconditional_correlation(panel, config)
    spec = eig_symmetric(c, panel.uniform_mode)
    ids = panel.asset_ids
    write_matrix_csv(run.path("C.csv", "fig1"), c, ids)
    write_json(run.path("spectrum_C.json", "fig2"), spec.to_json())
    sectors = [a.sector.value for a in panel.assets]
    order = [s for s in SECTOR_ORDER if s in sectors]
    g, labels = group_average_matrix(c, sectors, order)
    write_matrix_csv(run.path("C_sector.csv", "fig1"), g, labels)
    markets = [a.market or a.sector.value for a in panel.assets]
    g, labels = group_average_matrix(c, markets)
    write_matrix_csv(run.path("C_market.csv", "fig1"), g, labels)
    e0 = panel.uniform_mode
    return {
        "lambda_1": float(spec.eigenvalues[0]),
        "lambda_2": float(spec.eigenvalues[1]) if spec.n > 1 else None,
        "overlap_e0_v1": float(e0 @ spec.eigenvectors[:, 0]),
    }


def cmd_pra(p: dict, run: Run, threads) -> dict:
    panel = _load_panel(p, run)
    config = _config(p)
    x = build_factor(panel, p["factor"], p["K"])
    fit = fit_single(panel, x, config)
    fig_d = "fig9" if x.kind == "eigenfactor" else "fig4"
    _write_fit(run, fit, panel, fig_d)
    x.to_csv(run.path(f"indicator_{x.name}.csv"), panel.dates)
    n_bins = int(p["bins"])
    curve = signed_correlation_curve(panel, x, config, n_bins)
    write_rows_csv(run.path("bins_fig3.csv", "fig3"), curve.rows())
    fig_angle = "fig10" if x.kind == "eigenfactor" else "fig5"
    rows = []
    for mode in ("empirical", "model"):
        rows.extend(conditional_angle_curve(panel, x, config, n_bins, mode).rows())
    write_rows_csv(run.path(f"bins_{fig_angle}.csv", fig_angle), rows)
    summary = {"factor": fit.factor_names[0], **fit.extremes()}
    if int(p["null_trials"]) > 0:
        report = _null_report(panel, config, x, fit, p, threads)
        write_json(run.path("null.json"), report)
        summary["p_values"] = report["p_values"]
    return summary


def cmd_pra_sectors(p: dict, run: Run, threads) -> dict:
    panel = _load_panel(p, run)
    config = _config(p)
    beta = float(p["beta"])
    present = [s for s in SECTOR_ORDER if panel.sector_members(s).size]
    xs = [ema_smooth(sector_index(panel, s), beta) for s in present]
    fit = fit_multi(panel, xs, config)
    _write_fit(run, fit, panel, "fig13")
    rows = []
    v1 = fit.market_mode
    for name in fit.factor_names:
        spec = fit.d_spectra[name]
        for k in range(spec.n):
            rows.append(
                {
                    "factor": name,
                    "rank": k + 1,
                    "eigenvalue": float(spec.eigenvalues[k]),
                    "overlap_v1C": float(v1 @ spec.eigenvectors[:, k]),
                }
            )
    write_rows_csv(run.path("spectra_fig13.csv", "fig13"), rows)
    return {name: fit.extremes(name) for name in fit.factor_names}


def cmd_sweep(p: dict, run: Run, threads) -> dict:
    panel = _load_panel(p, run)
    config = _config(p)
    if p["base"] == "market":
        base, figure = market_index(panel), "fig6"
    elif p["base"] == "eigenfactor":
        base, figure = eigen_projection(panel, p["K"]), "fig8"
    else:
        raise InputError(f"unknown sweep base {p['base']!r}; expected market or eigenfactor")
    res = beta_sweep(
        panel,
        base,
        _grid(p),
        config,
        null_trials=int(p["null_trials"]),
        seed=int(p["seed"]),
        threads=threads,
    )
    write_rows_csv(run.path("sweep.csv", figure), res.to_rows())
    return {"argmax_decay_time": res.argmax_effect(), "reference": res.reference}


def cmd_null(p: dict, run: Run, threads) -> dict:
    panel = _load_panel(p, run)
    config = _config(p)
    if int(p["null_trials"]) <= 0:
        p["null_trials"] = 1000
        run.params["null_trials"] = 1000
    x = build_factor(panel, p["factor"], p["K"])
    fit = fit_single(panel, x, config)
    report = _null_report(panel, config, x, fit, p, threads)
    write_json(run.path("null.json"), report)
    return {"factor": report["factor"], "p_values": report["p_values"]}


def _write_synthetic(run: Run, sp) -> None:
    sp.panel.to_csv(run.path("panel.csv"))
    run.path("panel.json")
    sp.indicator.to_csv(run.path("indicator.csv"), sp.panel.dates)
    write_json(run.path("truth.json"), sp.truth_json())


def cmd_synth(p: dict, run: Run, threads) -> dict:
    spec = _synth_spec(p, run)
    sp = generate_panel(spec, int(p["T"]))
    _write_synthetic(run, sp)
    return {"n_assets": sp.panel.n_assets, "n_dates": sp.panel.n_dates, "projection_fraction": sp.projection_fraction}


def cmd_verify(p: dict, run: Run, threads) -> dict:
    spec = _synth_spec(p, run)
    sp = generate_panel(spec, int(p["T"]))
    config = _config(p)
    fit = fit_single(sp.panel, sp.indicator, config)
    ids = sp.panel.asset_ids
    write_matrix_csv(run.path("D_true.csv"), sp.d_star, ids)
    _write_fit(run, fit, sp.panel)
    write_json(run.path("truth.json"), sp.truth_json())
    score = recovery_score(fit, sp.c_star, sp.d_star)
    score["projection_fraction"] = sp.projection_fraction
    checks = {
        "rel_frobenius_error": score["rel_frobenius_error"] <= RECOVERY_BOUNDS["rel_frobenius_error"],
        "sign_lambda_min": score["sign_lambda_min"] == -1,
        "abs_overlap_true_mode_vN": score["abs_overlap_true_mode_vN"] >= RECOVERY_BOUNDS["abs_overlap_true_mode_vN"],
    }
    score["checks"] = checks
    score["bounds"] = RECOVERY_BOUNDS
    score["passed"] = all(checks.values())
    if int(p["null_trials"]) > 0:
        report = _null_report(sp.panel, config, sp.indicator, fit, p, threads)
        write_json(run.path("null.json"), report)
        score["p_values"] = report["p_values"]
    write_json(run.path("score.json"), score)
    return score


# ---------------------------------------------------------------- parser


def _add_panel_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--panel", help="standardized panel CSV (with its .json sidecar)")
    sp.add_argument("--prices", help="long-format prices CSV: date,asset_id,price")
    sp.add_argument("--meta", help="asset metadata CSV: asset_id,sector,market")
    sp.add_argument("--vol-window", dest="vol_window", type=int)
    sp.add_argument("--clip", type=float)


def _add_fit_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--tau", type=int, help="lag in days (>= 1)")
    sp.add_argument("--intercept-divisor", dest="intercept_divisor", choices=("n-1", "n"))
    sp.add_argument("--K", type=int, help="eigen-factor window in days (default 3N)")


def _add_null_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--null-trials", dest="null_trials", type=int)
    sp.add_argument("--null-mode", dest="null_mode", choices=NULL_MODES)
    sp.add_argument("--null-beta", dest="null_beta", type=float, help="decay rate of the iid_ema null")


def _add_synth_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--spec", help="synthetic spec JSON; overrides the four-sector flags")
    sp.add_argument("--T", type=int, help="number of dates")
    sp.add_argument("--size", type=int, help="assets per sector")
    sp.add_argument("--within", type=float)
    sp.add_argument("--cross", type=float, help="cross-sector correlation (negative for YLD pairs)")
    sp.add_argument("--amplitude", type=float)
    sp.add_argument("--process", choices=("ar1", "ema", "endogenous"))
    sp.add_argument("--phi", type=float)
    sp.add_argument("--synth-beta", dest="synth_beta", type=float, help="decay rate of the ema/endogenous driver")


COMMANDS = {
    "ingest": (cmd_ingest, "CSV prices -> standardized panel", (_add_panel_args,)),
    "describe": (cmd_describe, "correlation matrix, spectrum and group averages", (_add_panel_args, _add_fit_args)),
    "pra": (cmd_pra, "single-factor fit", (_add_panel_args, _add_fit_args, _add_null_args)),
    "pra-sectors": (cmd_pra_sectors, "four-sector multifactor fit", (_add_panel_args, _add_fit_args)),
    "sweep": (cmd_sweep, "decay-rate sweep", (_add_panel_args, _add_fit_args, _add_null_args)),
    "null": (cmd_null, "random-predictor null ensemble and p-values", (_add_panel_args, _add_fit_args, _add_null_args)),
    "synth": (cmd_synth, "synthetic panel with planted effect", (_add_synth_args,)),
    "verify": (cmd_verify, "synthetic panel, fit and recovery score", (_add_synth_args, _add_fit_args, _add_null_args)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corrpra", description="Principal regression analysis of instantaneous correlations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (func, help_, adders) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker cap; outputs do not depend on it")
        sp.add_argument("--config", help="JSON parameters or a previous manifest; flags win")
        for add in adders:
            add(sp)
        if name in ("pra", "null"):
            sp.add_argument("--factor", help="market | sector:F | ema:BETA | eigenfactor:BETA")
        if name == "pra":
            sp.add_argument("--bins", type=int)
        if name == "pra-sectors":
            sp.add_argument("--beta", type=float, help="common decay rate of the sector EMAs")
        if name == "sweep":
            sp.add_argument("--base", choices=("market", "eigenfactor"))
            sp.add_argument("--grid", help="comma-separated decay times in days")
        sp.set_defaults(func=func)
    return parser


def _read_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    if "parameters" in doc and isinstance(doc["parameters"], dict):
        doc = doc["parameters"]
    return doc


def resolve(args: argparse.Namespace) -> dict:
    """Effective parameters: explicit flag, else config value, else default."""
    flags = {k: v for k, v in vars(args).items() if k not in _UNRECORDED}
    config = _read_config(args.config) if args.config else {}
    unknown = set(config) - set(flags) - _UNRECORDED
    if unknown:
        raise InputError(f"config keys not valid for {args.command}: {sorted(unknown)}")
    params = {}
    for k in sorted(flags):
        if flags[k] is not None:
            params[k] = flags[k]
        elif k in config:
            params[k] = config[k]
        else:
            params[k] = DEFAULTS.get(k)
    return params


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"corrpra: warning: {message}", file=sys.stderr)


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise InputError("missing subcommand; see --help")
        params = resolve(args)
        if args.threads is not None and args.threads < 1:
            raise InputError("--threads must be at least 1")
        out = Path(args.out)
        task = Run(args.command, params, out)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            summary = args.func(dict(params), task, args.threads)
        task.finish(summary)
        print(json.dumps(_jsonable(summary), indent=2, allow_nan=False))
        return 0
    except InputError as exc:
        print(f"corrpra: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"corrpra: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except PraError as exc:  # pragma: no cover - every error derives from one of the two above
        print(f"corrpra: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, UnicodeDecodeError, ValueError, TypeError) as exc:
        # unreadable files or malformed values in flags and configs
        print(f"corrpra: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
