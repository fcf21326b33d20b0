"""Command-line front end.

    unionspec SUBCOMMAND --config run.json [--window A B] [--tol X]
              [--quad-order Q] [--propagator spectral|ray] [--threads K] [--out DIR]

Flags override config keys.  Exit codes: 0 success, 2 invalid input,
3 numerical failure; errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .boundary import BoundaryMatrix, NonUnitaryError
from .evolution import (
    EigenBasisTruncation,
    RayOverflowError,
    evolve_ray_function,
    evolve_spectral,
    write_frames,
)
from .funcspace import (
    DEFAULT_ORDER,
    GridMismatchError,
    PointFunction,
    QuadGrid,
    bump,
    exponential,
    indicator,
    parseval_defect,
    read_sampled_csv,
    sample,
    write_sampled_csv,
)
from .geometry import IntervalUnion, TranslationSet, tiles_by
from .io import atomic_write, complex_pair, fmt, write_json
from .spectral import (
    EigenSolverError,
    OnSpectrumError,
    SingularResolventError,
    WindowTooLargeError,
    eigenfunction,
    find_spectrum,
    resolvent_apply,
)
from .spectraset import (
    InconsistentError,
    LambdaSet,
    NonUnitaryBoundaryError,
    SpanDeficientError,
    construct_boundary_matrix,
    fuglede_harness,
    gram_matrix,
    is_spectral_matrix,
)

BUILD_FROM_LAMBDA = "build-from-lambda"
NUMERICAL_ERRORS = (
    SingularResolventError,
    OnSpectrumError,
    EigenSolverError,
    RayOverflowError,
    SpanDeficientError,
    InconsistentError,
    NonUnitaryBoundaryError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    omega: list | None = None
    matrix: dict | list | str | None = None
    lambda_set: dict | None = None
    gamma: dict | None = None
    window: list | None = None
    tol: float = 1e-12
    quad_order: int = DEFAULT_ORDER
    propagator: str = "spectral"
    threads: int = 1
    out: str = "."
    function: dict | None = None
    functions: list | None = None
    times: list = field(default_factory=lambda: [0.0])
    truncation: float = 100.0
    spectral_parameter: list | float | None = None

    # config-file key -> field name, where they differ
    ALIASES = {"lambda": "lambda_set"}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        kw = {}
        for key, value in data.items():
            name = cls.ALIASES.get(key, key.replace("-", "_"))
            if name not in names or key in ("lambda_set",):
                raise ConfigError(f"unknown config key {key!r}")
            kw[name] = value
        return cls(**kw)

    def validate(self) -> None:
        if self.propagator not in ("spectral", "ray"):
            raise ConfigError(f"propagator must be 'spectral' or 'ray', not {self.propagator!r}")
        if int(self.quad_order) != self.quad_order or self.quad_order < 2:
            raise ConfigError("quad_order must be an integer >= 2")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.window is not None:
            if len(self.window) != 2 or not float(self.window[0]) < float(self.window[1]):
                raise ConfigError("window must be [A, B] with A < B")

    # loaders

    def need(self, name: str):
        v = getattr(self, name)
        if v is None:
            raise ConfigError(f"config key {name if name != 'lambda_set' else 'lambda'!r} is required")
        return v

    def get_omega(self) -> IntervalUnion:
        return IntervalUnion.from_json(self.need("omega"))

    def get_lambda(self) -> LambdaSet:
        return LambdaSet.from_json(self.need("lambda_set"))

    def get_gamma(self) -> TranslationSet:
        return TranslationSet.from_json(self.need("gamma"))

    def get_window(self) -> tuple[float, float]:
        w = self.need("window")
        return float(w[0]), float(w[1])

    def half_width(self) -> float:
        a, b = self.get_window()
        return max(abs(a), abs(b))

    def get_matrix(self, omega: IntervalUnion) -> BoundaryMatrix:
        m = self.need("matrix")
        if m == BUILD_FROM_LAMBDA:
            return construct_boundary_matrix(self.get_lambda(), omega, self.half_width()).matrix
        if isinstance(m, list):
            m = {"mode": "unitary", "entries": m}
        B = BoundaryMatrix.from_json(m)
        if B.n != omega.n:
            raise ConfigError(f"matrix is {B.n}x{B.n} but omega has {omega.n} intervals")
        return B

    def get_time_points(self) -> list[float]:
        ts = [float(t) for t in self.times]
        if not ts:
            raise ConfigError("times must be nonempty")
        return ts


def _cnum(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def load_function(desc: dict, omega: IntervalUnion, base: Path = Path(".")):
    """Function description JSON -> a function object on omega."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError("function description must be an object with a 'kind'")
    kind = desc["kind"]
    allowed = {
        "bump": {"interval", "margin"},
        "indicator": {"interval"},
        "exp": {"lambda"},
        "constant": {"value"},
        "polynomial": {"coeffs"},
        "sampled": {"csv", "traces"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown function kind {kind!r}")
    extra = set(desc) - allowed[kind] - {"kind", "name"}
    if extra:
        raise ConfigError(f"unknown keys for {kind}: {sorted(extra)}")

    def interval():
        k = desc.get("interval", 0)
        if not isinstance(k, int) or not 0 <= k < omega.n:
            raise ConfigError(f"interval index {k!r} out of range for n={omega.n}")
        return k

    if kind == "bump":
        return bump(omega, interval(), desc.get("margin"))
    if kind == "indicator":
        return indicator(omega, interval())
    if kind == "exp":
        return exponential(omega, float(desc["lambda"]))
    if kind == "constant":
        c = _cnum(desc.get("value", 1.0))
        return PointFunction(omega, lambda x: np.full(np.shape(x), c), np.full(omega.n, c), np.full(omega.n, c))
    if kind == "polynomial":
        coeffs = np.array([_cnum(c) for c in desc["coeffs"]])
        if coeffs.size == 0:
            raise ConfigError("polynomial needs at least one coefficient")

        def p(x):
            return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)

        return PointFunction(omega, p, p(omega.alpha), p(omega.beta))
    f = read_sampled_csv(base / desc["csv"], base / desc["traces"])
    if f.omega != omega:
        raise ConfigError("sampled function lives on a different omega")
    return f


# subcommands


def cmd_spectrum(cfg: RunConfig, out: Path) -> dict:
    omega = cfg.get_omega()
    B = cfg.get_matrix(omega)
    sw = find_spectrum(omega, B, cfg.get_window(), tol=cfg.tol, threads=cfg.threads)
    sw.write(out / "spectrum.csv", out / "spectrum.json")
    return {"eigenvalues": len(sw), "count": sw.count}


def cmd_eigfun(cfg: RunConfig, out: Path) -> dict:
    omega = cfg.get_omega()
    B = cfg.get_matrix(omega)
    sw = find_spectrum(omega, B, cfg.get_window(), tol=cfg.tol, threads=cfg.threads)
    grid = QuadGrid(omega, cfg.quad_order)
    rows = ["eig_index,basis_index,lambda,interval_index,node,value_re,value_im"]
    for i, ep in enumerate(sw):
        for j in range(ep.multiplicity):
            vals = eigenfunction(omega, ep, j).sample(cfg.quad_order).values
            for k in range(omega.n):
                for x, v in zip(grid.nodes[k], vals[k]):
                    rows.append(f"{i},{j},{fmt(ep.lam)},{k},{fmt(x)},{fmt(v.real)},{fmt(v.imag)}")
    atomic_write(out / "eigfun.csv", "\n".join(rows) + "\n")
    sw.write(out / "spectrum.csv", out / "spectrum.json")
    return {"eigenvalues": len(sw), "rows": len(rows) - 1}


def cmd_resolvent(cfg: RunConfig, out: Path, base: Path) -> dict:
    omega = cfg.get_omega()
    B = cfg.get_matrix(omega)
    lam = _cnum(cfg.need("spectral_parameter"))
    g = load_function(cfg.need("function"), omega, base)
    f = resolvent_apply(omega, B, lam, sample(g, cfg.quad_order))
    write_sampled_csv(f, out / "resolvent.csv", out / "resolvent_traces.json")
    return {"lambda": complex_pair(lam), "norm": float(fmt(f.norm()))}


def cmd_evolve(cfg: RunConfig, out: Path, base: Path) -> dict:
    omega = cfg.get_omega()
    B = cfg.get_matrix(omega)
    f = load_function(cfg.need("function"), omega, base)
    times = cfg.get_time_points()
    q = cfg.quad_order
    if cfg.propagator == "ray":
        if any(t < 0 for t in times):
            raise ConfigError("the ray propagator needs t >= 0")
        frames = [evolve_ray_function(omega, B, f, t, q) for t in times]
    else:
        basis = EigenBasisTruncation.build(omega, B, float(cfg.truncation), threads=cfg.threads)
        fs = sample(f, q)
        frames = [evolve_spectral(fs, t, basis) for t in times]
    write_frames(out, times, frames)
    return {"frames": len(frames), "propagator": cfg.propagator}


def cmd_gram(cfg: RunConfig, out: Path) -> dict:
    omega = cfg.get_omega()
    a, b = cfg.get_window()
    lam = cfg.get_lambda().realize(a, b)
    G, gmax = gram_matrix(lam, omega)
    rows = ["i,j,lambda_i,lambda_j,g_re,g_im"]
    for i in range(len(lam)):
        for j in range(len(lam)):
            rows.append(f"{i},{j},{fmt(lam[i])},{fmt(lam[j])},{fmt(G[i, j].real)},{fmt(G[i, j].imag)}")
    atomic_write(out / "gram.csv", "\n".join(rows) + "\n")
    report = {"lambdas": [float(fmt(x)) for x in lam], "max_offdiag": float(fmt(gmax))}
    write_json(out / "gram.json", report)
    return report


def cmd_build_b(cfg: RunConfig, out: Path) -> dict:
    omega = cfg.get_omega()
    fit = construct_boundary_matrix(cfg.get_lambda(), omega, cfg.half_width())
    write_json(out / "b_matrix.json", fit.matrix.to_json())
    report = _round_floats(fit.to_json())
    write_json(out / "b_fit.json", report)
    return {"residual": report["residual"], "unitarity_defect": report["unitarity_defect"]}


def cmd_check_b(cfg: RunConfig, out: Path) -> dict:
    omega = cfg.get_omega()
    B = cfg.get_matrix(omega)
    v = is_spectral_matrix(omega, B, cfg.get_window(), tol=cfg.tol)
    report = _round_floats(v.to_json())
    write_json(out / "verdict.json", report)
    return {"classification": report["classification"]}


def cmd_tile(cfg: RunConfig, out: Path) -> dict:
    report = tiles_by(cfg.get_omega(), cfg.get_gamma()).to_json()
    write_json(out / "tiling.json", report)
    return {"tiles": report["tiles"], "defects": len(report["defects"])}


def cmd_parseval(cfg: RunConfig, out: Path, base: Path) -> dict:
    omega = cfg.get_omega()
    a, b = cfg.get_window()
    lam = cfg.get_lambda().realize(a, b)
    specs = cfg.functions if cfg.functions is not None else [cfg.need("function")]
    rows = []
    for i, desc in enumerate(specs):
        f = load_function(desc, omega, base)
        if isinstance(f, PointFunction):
            f = f.sample(cfg.quad_order)
        rows.append({"name": desc.get("name", f"f{i}"), "defect": float(fmt(parseval_defect(f, lam, omega)))})
    report = {"window": [a, b], "size": int(len(lam)), "defects": rows}
    write_json(out / "parseval.json", report)
    return report


def cmd_harness(cfg: RunConfig, out: Path) -> dict:
    omega = cfg.get_omega()
    rep = fuglede_harness(omega, cfg.get_lambda(), cfg.get_gamma(), cfg.half_width(), q=cfg.quad_order)
    write_json(out / "harness.json", _round_floats(rep.to_json()))
    print(rep.summary())
    return {"agreement": rep.agreement}


def _round_floats(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round_floats(obj.item())
    return obj


COMMANDS = {
    "spectrum": (cmd_spectrum, "eigenvalues and eigenvectors in a window"),
    "eigfun": (cmd_eigfun, "eigenfunction table on the quadrature grid"),
    "resolvent": (cmd_resolvent, "solve (A - lambda) f = g"),
    "evolve": (cmd_evolve, "frames of U(t) f"),
    "gram": (cmd_gram, "Gram matrix of exponentials"),
    "build-b": (cmd_build_b, "boundary matrix from a candidate spectrum"),
    "check-b": (cmd_check_b, "spectral boundary matrix verdict"),
    "tile": (cmd_tile, "tiling check"),
    "parseval": (cmd_parseval, "Parseval defects"),
    "harness": (cmd_harness, "spectral evidence vs tiling"),
}
NEEDS_BASE = {"resolvent", "evolve", "parseval"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--window", nargs=2, type=float, metavar=("A", "B"))
    common.add_argument("--tol", type=float)
    common.add_argument("--quad-order", type=int)
    common.add_argument("--propagator", choices=["spectral", "ray"])
    common.add_argument("--threads", type=int)
    common.add_argument("--out", type=Path)
    parser = argparse.ArgumentParser(prog="unionspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def load_config(args) -> tuple[RunConfig, Path]:
    base = Path(".")
    data = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        base = Path(args.config).parent
    cfg = RunConfig.from_dict(data)
    for name in ("window", "tol", "quad_order", "propagator", "threads", "out"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, list(v) if name == "window" else v)
    cfg.out = str(cfg.out)
    cfg.validate()
    return cfg, base


def _fail(code: int, exc: BaseException, command: str | None) -> int:
    err = {
        "error": type(exc).__name__,
        "message": str(exc),
        "module": type(exc).__module__,
        "operation": command,
        "exit_code": code,
    }
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, base = load_config(args)
        fn = COMMANDS[args.command][0]
        out = Path(cfg.out)
        if args.command in NEEDS_BASE:
            result = fn(cfg, out, base)
        else:
            result = fn(cfg, out)
    except NUMERICAL_ERRORS as exc:
        return _fail(3, exc, args.command)
    except (ConfigError, NonUnitaryError, GridMismatchError, WindowTooLargeError, ValueError, KeyError, TypeError, IndexError) as exc:
        return _fail(2, exc, args.command)
    if args.command != "harness":
        print(json.dumps(_round_floats(result), sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
