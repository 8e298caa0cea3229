"""Command-line front end: ``specinv {solve,curve,kinetic,kfun,bounds,invert}``.

Every artifact starts with a header comment naming the version and a hash
of the resolved configuration, so identical configurations produce
byte-identical files.  Failures print a JSON error record on stderr and
exit with 2 (bad input), 3 (no bound state), 4 (boundary extremum) or
5 (divergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .curves import SpectralCurve
from .envelope import EnvelopeBasis, build_transformation, envelope_bounds, write_bound_reports
from .errors import SpecInvError, UnsupportedModelError, UsageError
from .inversion import (
    InversionConfig,
    excited_state_seed,
    run_inversion,
    target_curve_from_shape,
)
from .io import header_line, read_csv, write_columns
from .kinetic import kfunction_from_curve, kinetic_from_curve
from .models import Tabulated, exact_spectral_curve, parse_shape
from .solver import RadialProblem, solve_state, spectral_curve

log = logging.getLogger("specinv")

# figure presets: target shape, seed, windows
PRESETS = {
    "hulthen-fig1": {"target": "hulthen", "seed": "coulomb"},
    "coulinear-fig3": {"target": "coulomb_plus linear 1 0.5", "seed": "coulomb"},
    "couosc-fig4": {"target": "coulomb_plus oscillator 1 0.5", "seed": "coulomb"},
    "coulog-fig5": {"target": "coulomb_plus log 1 0.5", "seed": "coulomb"},
}
PARSER_COMMANDS = ("solve", "curve", "kinetic", "kfun", "bounds", "invert")
PRESET_WINDOW = {"rwindow": "0.005:40", "rpoints": 300, "iterations": 3}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_grid(text: str, default_spacing: str = "log") -> np.ndarray:
    """``min:max:count[:lin|log]`` -> array."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"grid {text!r} must look like min:max:count[:lin|log]")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid {text!r} has a non-numeric field") from None
    spacing = parts[3] if len(parts) == 4 else default_spacing
    if count < 2 or not lo < hi:
        raise UsageError(f"grid {text!r} needs count >= 2 and min < max")
    if spacing == "log":
        if lo <= 0:
            raise UsageError(f"log grid {text!r} needs min > 0")
        return np.geomspace(lo, hi, count)
    if spacing == "lin":
        return np.linspace(lo, hi, count)
    raise UsageError(f"grid spacing must be lin or log, got {spacing!r}")


def _window(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"window {text!r} must look like min:max")
    lo, hi = float(parts[0]), float(parts[1])
    if not 0 < lo < hi:
        raise UsageError(f"window {text!r} needs 0 < min < max")
    return lo, hi


def _shape(text: str):
    if text.endswith(".csv"):
        return Tabulated.from_csv(text, extrapolate=True)
    return parse_shape(text)


def _curve_for(shape, n, ell, vgrid, source):
    if source in ("auto", "exact") and not isinstance(shape, Tabulated):
        try:
            return exact_spectral_curve(shape, n, ell)
        except UnsupportedModelError:
            if source == "exact":
                raise
    if vgrid is None:
        raise UsageError("a solver curve needs --vgrid")
    return spectral_curve(shape, n, ell, parse_grid(vgrid))


def _emit(args, config, data: dict):
    if args.out:
        write_columns(args.out, data, config)
    else:
        names = list(data)
        print(header_line(config))
        print(",".join(names))
        for row in zip(*(data[k] for k in names)):
            print(",".join(repr(float(x)) for x in row))


# commands -------------------------------------------------------------------


def cmd_solve(args, config):
    sol = solve_state(RadialProblem(_shape(args.shape), args.v, args.n, args.ell))
    if args.json:
        print(json.dumps(sol.to_dict(), sort_keys=True))
    else:
        print(f"E = {sol.energy!r}")
        print(f"<f> = {sol.expectation_f!r}")
        print(f"nodes = {sol.nodes}")
    return 0


def cmd_curve(args, config):
    shape = _shape(args.shape)
    curve = spectral_curve(shape, args.n, args.ell, parse_grid(args.vgrid))
    data = curve.tabulate()
    _emit(args, config, data)
    if not curve.concave_verified:
        log.warning("sampled curve failed the concavity check")
    print(f"concave = {str(bool(curve.concave_verified)).lower()}", file=sys.stderr)
    return 0


def cmd_kinetic(args, config):
    shape = _shape(args.shape)
    curve = _curve_for(shape, args.n, args.ell, args.vgrid, args.source)
    if args.sgrid:
        s = parse_grid(args.sgrid)
    else:
        if not curve.is_sampled:
            raise UsageError("an analytic curve needs --sgrid")
        sv = curve.kinetic_energy(curve.samples["v"])
        s = np.geomspace(sv.min() * 1.01, sv.max() * 0.99, 200)
    kp = kinetic_from_curve(curve, s)
    _emit(args, config, {"s": s, "fbar": np.asarray(kp(s))})
    return 0


def cmd_kfun(args, config):
    shape = _shape(args.shape)
    curve = _curve_for(shape, args.n, args.ell, args.vgrid, args.source)
    r = parse_grid(args.rgrid)
    kf = kfunction_from_curve(curve, shape, r)
    _emit(args, config, {"r": r, "K": np.asarray(kf(r))})
    return 0


def cmd_bounds(args, config):
    f = _shape(args.shape)
    r = parse_grid(args.rgrid)
    v = [float(x) for x in args.v.split(",")]
    records = []
    for basis_text in args.basis or ["coulomb", "power 2"]:
        basis = EnvelopeBasis.from_shape(parse_shape(basis_text), args.n, args.ell)
        profile = build_transformation(f, basis.shape_h, r)
        records += envelope_bounds(profile, basis, v)
    if args.out:
        write_bound_reports(args.out, records, config)
    else:
        print(json.dumps({"records": [rec.to_dict() for rec in records]}, indent=2, sort_keys=True))
    return 0


def _apply_preset(args) -> None:
    """Fill unset invert options from the preset; explicit flags win."""
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        for key, value in PRESETS[args.preset].items():
            if getattr(args, key) is None:
                setattr(args, key, value)
    for key, value in PRESET_WINDOW.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    if args.target is None and args.target_csv is None:
        raise UsageError("invert needs --preset, --target or --target-csv")
    if args.seed is None:
        args.seed = "coulomb"


def cmd_invert(args, config):
    seed = _shape(args.seed)
    source = None
    if args.target_csv:
        data = read_csv(args.target_csv)
        target = SpectralCurve.from_samples(data["v"], data["F"], data["Fprime"], n=args.n, ell=args.ell, label=args.target_csv)
    else:
        source = _shape(args.target)
        try:
            target = exact_spectral_curve(source, args.n, args.ell)
        except UnsupportedModelError:
            target = target_curve_from_shape(source, args.n, args.ell)
    cfg = InversionConfig(
        target_curve=target,
        seed=seed,
        n=args.n,
        ell=args.ell,
        r_window=_window(args.rwindow),
        r_points=int(args.rpoints),
        v_window=_window(args.vwindow) if args.vwindow else None,
        max_iterations=int(args.iterations),
        tolerance=args.tolerance,
        seed_kfunction=excited_state_seed(args.n, args.ell) if args.excited_seed else None,
        target_source=source,
    )
    result = run_inversion(cfg)
    out = Path(args.out or "specinv-invert")
    result.export(out, config=config, timings=args.timings)
    r = cfg.r_grid
    table = {"r": r}
    for st in result.history:
        table["seed" if st.k == 0 else f"f{st.k}"] = st.f_values
    if source is not None:
        table["goal"] = np.asarray(source(r))
    write_columns(out / "figure.csv", table, config)
    for st in result.history:
        print(f"iterate {st.k}: curve_error = {st.curve_error!r}", file=sys.stderr)
    return 0


# parser ---------------------------------------------------------------------


def _common(p):
    p.add_argument("--n", type=int, default=1, help="radial index, from 1")
    p.add_argument("--ell", type=int, default=0, help="angular momentum")
    p.add_argument("--config", help="key=value configuration file; flags win")
    p.add_argument("--timings", action="store_true", help="report wall-clock timings (breaks byte-identity)")
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specinv", description="Spectral curves, kinetic potentials and geometric inversion.")
    parser.add_argument("--version", action="version", version=f"specinv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="one eigenvalue of -Laplacian + v f(r)")
    p.add_argument("--shape", required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--json", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curve", help="sample F(v) with Hellmann-Feynman slopes")
    p.add_argument("--shape", required=True)
    p.add_argument("--vgrid", required=True, help="min:max:count[:lin|log]")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_curve)

    for name, helptext in (("kinetic", "kinetic potential fbar(s)"), ("kfun", "K-function K(r)")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--shape", required=True)
        p.add_argument("--source", choices=["auto", "exact", "solver"], default="auto")
        p.add_argument("--vgrid", help="coupling grid for solver curves")
        if name == "kinetic":
            p.add_argument("--sgrid")
            p.set_defaults(func=cmd_kinetic)
        else:
            p.add_argument("--rgrid", default="0.05:10:200")
            p.set_defaults(func=cmd_kfun)
        p.add_argument("--out")
        _common(p)

    p = sub.add_parser("bounds", help="envelope bounds for f = g(h)")
    p.add_argument("--shape", required=True)
    p.add_argument("--basis", action="append", help="basis shape; repeatable (default: coulomb and power 2)")
    p.add_argument("--v", required=True, help="comma-separated couplings")
    p.add_argument("--rgrid", default="0.01:100:400")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("invert", help="reconstruct f(r) from a spectral curve")
    p.add_argument("--preset", help=", ".join(sorted(PRESETS)))
    p.add_argument("--target", help="shape whose curve is inverted")
    p.add_argument("--target-csv", help="sampled target curve with v,F,Fprime columns")
    p.add_argument("--seed")
    p.add_argument("--excited-seed", action="store_true", help="start from K = (n + ell)^2 / r^2")
    p.add_argument("--rwindow")
    p.add_argument("--rpoints", type=int)
    p.add_argument("--vwindow")
    p.add_argument("--iterations", type=int)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out", help="output directory")
    _common(p)
    p.set_defaults(func=cmd_invert)
    return parser


def _config_argv(path: str, parser: argparse.ArgumentParser, command: str) -> list[str]:
    """Translate a key=value file into flags placed before the real ones."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    known = {opt: act for act in sub._actions for opt in act.option_strings}
    argv = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if flag not in known or flag == "--config":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for command {command}")
        if known[flag].nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
        else:
            argv += [flag, value]
    return argv


def _find_config(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _resolve(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    path = _find_config(argv)
    if path and argv and argv[0] in PARSER_COMMANDS:
        argv = [argv[0]] + _config_argv(path, parser, argv[0]) + argv[1:]
    return parser.parse_args(argv)


def _config_of(args) -> dict:
    skip = {"func", "out", "config", "timings", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _resolve(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        if args.command == "invert":
            _apply_preset(args)
        t0 = time.perf_counter()
        code = args.func(args, _config_of(args))
        if args.timings:
            print(f"elapsed = {time.perf_counter() - t0:.3f} s", file=sys.stderr)
        return code
    except SpecInvError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True, default=str), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
