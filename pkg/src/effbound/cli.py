"""Command-line interface: compute-bound, oracle, simulate, white-noise-demo, list-models.

Exit codes: 0 success, 1 usage error, 2 range or assumption rejection,
3 verification failure.
"""
from __future__ import annotations

import json
import sys
import warnings
from dataclasses import asdict, dataclass, field

import click
import numpy as np

from . import __version__
from .bounds import bound_decon, bound_levy, bound_white_noise, sigma_curve_csv
from .errors import EffboundError, UsageError, VerificationError
from .functionals import Functional
from .models import (MODEL_DEFAULTS, DeconvPair, LevyTriplet, WhiteNoiseOp, build_model,
                     list_models, load_config)
from .oracle import (cramer_rao_detail, default_basis, hermite_basis, ladder_report,
                     lan_check_white_noise)
from .operators import build_operator
from .simulate import ESTIMATORS, estimate_white_noise, mc_compare
from .spectral_core import GridFunction

SCHEMA = "effbound/1"
MODEL_FLAGS = ("alpha", "delta", "lam", "gamma", "rate", "mean", "sd", "loc", "width",
               "shape", "scale", "eps", "amp")
RUN_KEYS = ("t", "side", "zeta", "zeta_file", "seed", "tolerance", "known_lambda", "dims",
            "degree", "basis", "estimator", "n", "reps", "cutoff", "compare", "format", "out")


@dataclass
class RunConfig:
    command: str
    model: str
    params: dict = field(default_factory=dict)
    t: list = field(default_factory=list)
    side: str = "auto"
    zeta: list | None = None
    zeta_file: str | None = None
    grid: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    format: str = "json"
    tolerance: float | None = None
    options: dict = field(default_factory=dict)

    def build(self):
        params = dict(self.params)
        if self.grid:
            params["grid"] = dict(self.grid)
        return build_model(self.model, **params)


def resolve(command: str, cli: dict, options: dict) -> RunConfig:
    """Merge a config file (if any) with command-line flags; flags win."""
    file_cfg: dict = {}
    if cli.get("config"):
        try:
            file_cfg = dict(load_config(cli["config"]))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {cli['config']}: {exc}") from None
    model = cli.get("model") or file_cfg.pop("model", None)
    file_cfg.pop("model", None)
    if not model:
        raise UsageError("no model given (--model or a config file)")
    if model not in MODEL_DEFAULTS:
        raise UsageError(f"unknown model {model!r}; known: {', '.join(list_models())}")
    run = {k: file_cfg.pop(k) for k in list(file_cfg) if k in RUN_KEYS}
    grid = dict(file_cfg.pop("grid", {}) or {})
    params = file_cfg  # whatever is left must be a model parameter
    unknown = set(params) - set(MODEL_DEFAULTS[model])
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for k in MODEL_FLAGS:
        if cli.get(k) is not None:
            params[k] = cli[k]
    if cli.get("diag"):
        params["diag"] = _floats(cli["diag"])
    if cli.get("grid_n") is not None:
        grid["n"] = cli["grid_n"]
    if cli.get("grid_span") is not None:
        grid["span"] = cli["grid_span"]
    ts = list(cli.get("t") or ()) or list(np.atleast_1d(run.get("t", [])))
    zeta = _floats(cli["zeta"]) if cli.get("zeta") else run.get("zeta")
    opts = {k: run[k] for k in run if k in options}
    for k, v in options.items():
        if v is not None:
            opts[k] = v
    return RunConfig(
        command=command, model=model, params=params, t=[float(v) for v in ts],
        side=cli.get("side") or run.get("side", "auto"), zeta=zeta,
        zeta_file=cli.get("zeta_file") or run.get("zeta_file"), grid=grid,
        seed=int(cli["seed"] if cli.get("seed") is not None else run.get("seed", 0)),
        out=cli.get("out") or run.get("out"),
        format=cli.get("format") or run.get("format", "json"),
        tolerance=cli.get("tolerance") if cli.get("tolerance") is not None else run.get("tolerance"),
        options=opts,
    )


def _floats(s) -> list:
    if isinstance(s, str):
        try:
            return [float(v) for v in s.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"expected comma-separated numbers, got {s!r}") from None
    return [float(v) for v in s]


def functionals(cfg: RunConfig, model):
    if isinstance(model, WhiteNoiseOp):
        if model.kind == "matrix":
            p = model.matrix.shape[1]
            z = cfg.zeta if cfg.zeta is not None else [1.0 if i == 1 else 0.0 for i in range(p)]
            if len(z) != p:
                raise UsageError(f"--zeta needs {p} entries")
            return np.asarray(z, dtype=float)
        if not cfg.t:
            raise UsageError("wn-diffeq needs --t (centre of a Gaussian bump functional)")
        g = model.theta.grid
        return [GridFunction(g, np.exp(-(g.x - t) ** 2)) for t in cfg.t]
    if cfg.zeta_file:
        return [read_zeta_file(cfg.zeta_file, model.grid)]
    if not cfg.t:
        raise UsageError("at least one --t is required")
    out = []
    for t in cfg.t:
        if cfg.side == "left":
            out.append(Functional.left(t))
        elif cfg.side == "right":
            out.append(Functional.right(t))
        elif cfg.side == "auto":
            out.append(Functional.generalized_cdf(t) if isinstance(model, LevyTriplet)
                       else Functional.left(t))
        else:
            raise UsageError(f"unknown side {cfg.side!r}")
    return out


def read_zeta_file(path: str, grid) -> Functional:
    """A grid functional from JSON (GridFunction.to_json) or two-column CSV x,value."""
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                g = GridFunction.from_json(json.load(fh))
            vals = g(grid.x)
        else:
            data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
            if data.shape[1] != 2:
                raise ValueError("expected two columns x,value")
            x, v = data[:, 0], data[:, 1]
            vals = np.interp(grid.x, x, v, left=0.0, right=0.0)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read functional file {path}: {exc}") from None
    return Functional.from_grid(GridFunction(grid, vals), label=path)


def bound_for(model, zetas, known_lambda: bool = False):
    if isinstance(model, LevyTriplet):
        return bound_levy(model, zetas, known_lambda=known_lambda)
    if known_lambda:
        raise UsageError("--known-lambda applies to Levy models only")
    if isinstance(model, DeconvPair):
        return bound_decon(model, zetas)
    return bound_white_noise(model, zetas)


def _config_json(cfg: RunConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg), default=_default))


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o).__name__}")


def emit(cfg: RunConfig, payload: dict, csv_text: str | None = None) -> None:
    doc = {"schema": SCHEMA, "version": __version__, "command": cfg.command,
           "config": _config_json(cfg), **payload}
    if cfg.format == "csv" and csv_text is not None:
        text = csv_text
    else:
        text = json.dumps(doc, indent=2, default=_default) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# --------------------------------------------------------------------------- click plumbing


def common(f):
    opts = [
        click.option("--model", help="Built-in model name (see list-models)."),
        click.option("--config", type=click.Path(), help="JSON (or TOML on python >= 3.11) config."),
        click.option("--t", "t", type=float, multiple=True, help="Functional location; repeatable."),
        click.option("--side", type=click.Choice(["auto", "left", "right"]), default=None,
                     help="Indicator side; auto = generalized distribution function."),
        click.option("--zeta", help="Comma-separated functional vector (matrix white noise)."),
        click.option("--zeta-file", type=click.Path(),
                     help="Grid functional: GridFunction JSON or CSV with columns x,value."),
        click.option("--diag", help="Comma-separated diagonal of K (wn-matrix)."),
        click.option("--grid-n", type=int), click.option("--grid-span", type=float),
        click.option("--seed", type=int), click.option("--out", type=click.Path()),
        click.option("--format", type=click.Choice(["json", "csv"]), default=None),
        click.option("--tolerance", type=float),
    ] + [click.option(f"--{k}", k, type=float) for k in MODEL_FLAGS]
    for o in reversed(opts):
        f = o(f)
    return f


def _split(kw: dict, names) -> tuple[dict, dict]:
    options = {k: kw.pop(k) for k in names}
    return kw, options


@click.group()
@click.version_option(__version__)
def cli():
    """Information bounds for linear functionals in inverse problems."""


@cli.command("compute-bound")
@common
@click.option("--known-lambda", is_flag=True, default=None, help="Treat lambda as known.")
def compute_bound(**kw):
    """Efficient influence functions and the information bound Sigma."""
    cli_kw, options = _split(kw, ("known_lambda",))
    cfg = resolve("compute-bound", cli_kw, options)
    model = cfg.build()
    zetas = functionals(cfg, model)
    rep = bound_for(model, zetas, bool(cfg.options.get("known_lambda")))
    ts = cfg.t if cfg.t else list(range(rep.d))
    emit(cfg, {"status": "ok", "exit_code": 0, "result": rep.to_json()},
         sigma_curve_csv(ts, np.diag(rep.sigma)))


@cli.command("oracle")
@common
@click.option("--dims", default=None, help="Comma-separated basis dimensions (default 4,8,16,32,64).")
@click.option("--degree", type=int, default=None, help="Polynomial degree per dyadic cell.")
@click.option("--basis", type=click.Choice(["piecewise", "hermite"]), default=None)
def oracle_cmd(**kw):
    """Cramer-Rao suprema over a nested ladder of finite submodels."""
    cli_kw, options = _split(kw, ("dims", "degree", "basis"))
    cfg = resolve("oracle", cli_kw, options)
    model = cfg.build()
    if isinstance(model, WhiteNoiseOp):
        raise UsageError("the oracle applies to Levy and deconvolution models")
    zetas = functionals(cfg, model)
    if len(zetas) != 1:
        raise UsageError("the oracle takes exactly one --t")
    z = zetas[0]
    dims = cfg.options.get("dims", "4,8,16,32,64")
    dims = [int(d) for d in _floats(dims)] if dims != "" else []
    if not dims:
        raise UsageError("empty basis ladder")
    degree = int(cfg.options.get("degree", 1))
    kind = cfg.options.get("basis", "piecewise")
    tol = 0.02 if cfg.tolerance is None else cfg.tolerance
    A = build_operator(model)
    sigma = float(bound_for(model, [z]).sigma[0, 0])
    results = []
    for d in dims:
        if kind == "hermite":
            c = z.t if z.is_indicator else 0.0
            basis = hermite_basis(model, d, c, 1.0)
        else:
            basis = default_basis(model, z, d, degree)
        results.append(cramer_rao_detail(model, z, basis, A))
    rep = ladder_report(results, sigma)
    ok = rep["monotone"] and abs(rep["final_ratio"] - 1.0) <= tol
    code = 0 if ok else VerificationError.exit_code
    reason = "" if ok else ("nonmonotone ladder" if not rep["monotone"]
                            else f"final ratio {rep['final_ratio']:.4f} outside tolerance {tol}")
    rows = "dim,value\n" + "".join(f"{d},{v!r}\n" for d, v in zip(rep["dims"], rep["values"]))
    emit(cfg, {"status": "ok" if ok else "verification_failed", "exit_code": code,
               "reason": reason, "result": rep}, rows)
    if code:
        click.echo(f"verification failed: {reason}", err=True)
    return code


@cli.command("simulate")
@common
@click.option("--estimator", type=click.Choice(ESTIMATORS), default=None)
@click.option("--n", type=int, default=None, help="Sample size per replication.")
@click.option("--reps", type=int, default=None)
@click.option("--cutoff", type=float, default=None, help="Spectral cutoff (default: pilot sweep).")
@click.option("--compare", type=click.Choice(ESTIMATORS), default=None,
              help="Second estimator run on the same replications.")
def simulate_cmd(**kw):
    """Monte Carlo variance of an estimator against the bound."""
    cli_kw, options = _split(kw, ("estimator", "n", "reps", "cutoff", "compare"))
    cfg = resolve("simulate", cli_kw, options)
    model = cfg.build()
    zetas = functionals(cfg, model)
    est = cfg.options.get("estimator") or _default_estimator(model)
    n = int(cfg.options.get("n", 10_000))
    reps = int(cfg.options.get("reps", 200))
    band = 0.15 if cfg.tolerance is None else cfg.tolerance
    rep = mc_compare(model, zetas, est, n, reps, cfg.seed, cutoff=cfg.options.get("cutoff"))
    payload = {"result": rep.to_json()}
    other = cfg.options.get("compare")
    if other:
        rep2 = mc_compare(model, zetas, other, n, reps, cfg.seed, cutoff=cfg.options.get("cutoff"))
        payload["comparison"] = {
            "estimator": other, "scaled_var": rep2.scaled_var.tolist(),
            "first_smaller": bool(np.all(np.diag(rep.scaled_var) < np.diag(rep2.scaled_var))),
        }
    ok = rep.within(band)
    code = 0 if ok else VerificationError.exit_code
    payload.update({"status": "ok" if ok else "verification_failed", "exit_code": code,
                    "band": band})
    emit(cfg, payload, rep.to_csv())
    if code:
        click.echo(f"verification failed: scaled variance ratio {rep.ratio.tolist()} "
                   f"outside band {band}", err=True)
    return code


def _default_estimator(model) -> str:
    if isinstance(model, WhiteNoiseOp):
        return "white-noise"
    if isinstance(model, DeconvPair):
        return "decon-linear"
    return "decompound" if model.finite_activity else "spectral"


@cli.command("white-noise-demo")
@common
@click.option("--reps", type=int, default=None)
def white_noise_demo(**kw):
    """Gaussian shift: efficient estimator variance and the LAN identity."""
    cli_kw, options = _split(kw, ("reps",))
    if not cli_kw.get("model") and not cli_kw.get("config"):
        cli_kw["model"] = "wn-matrix"
    cfg = resolve("white-noise-demo", cli_kw, options)
    model = cfg.build()
    if not isinstance(model, WhiteNoiseOp) or model.kind != "matrix":
        raise UsageError("white-noise-demo needs a matrix white-noise model")
    zeta = functionals(cfg, model)
    reps = int(cfg.options.get("reps", 10_000))
    band = 0.05 if cfg.tolerance is None else cfg.tolerance
    rep = estimate_white_noise(model, zeta, reps, cfg.seed)
    lan = lan_check_white_noise(model, np.asarray(zeta), reps, cfg.seed)
    bias = float(rep.bias_in_se()[0])
    ok = rep.within(band) and abs(bias) <= 3.0 and lan.max_discrepancy <= 1e-10
    code = 0 if ok else VerificationError.exit_code
    emit(cfg, {"status": "ok" if ok else "verification_failed", "exit_code": code, "band": band,
               "result": rep.to_json(), "bias_in_se": bias, "lan": asdict(lan)}, rep.to_csv())
    return code


@cli.command("list-models")
@click.option("--format", type=click.Choice(["json", "csv"]), default="json")
def list_models_cmd(format):
    """Built-in models and their default parameters."""
    if format == "csv":
        click.echo("model")
        for m in list_models():
            click.echo(m)
        return 0
    click.echo(json.dumps({"schema": SCHEMA, "models": MODEL_DEFAULTS}, indent=2))
    return 0


# --------------------------------------------------------------------------- entry point


def main(argv=None) -> int:
    """Run the CLI and return the exit code instead of raising SystemExit."""
    warnings.simplefilter("ignore")
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        rv = cli.main(args=args, prog_name="effbound", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except EffboundError as exc:
        _report_error(args, exc)
        return exc.exit_code
    return rv if isinstance(rv, int) else 0


def _report_error(args: list, exc: EffboundError) -> None:
    click.echo(f"error: {exc}", err=True)
    out = None
    if "--out" in args:
        i = args.index("--out")
        out = args[i + 1] if i + 1 < len(args) else None
    doc = {"schema": SCHEMA, "status": "error", "exit_code": exc.exit_code,
           "error": type(exc).__name__, "reason": str(exc),
           "diagnostics": json.loads(json.dumps(exc.diagnostics, default=_default))}
    if out:
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=2)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
