"""Command line front end: ``landaudelta <experiment> [--config FILE] [--out DIR] ...``.

Each experiment reads one JSON configuration document, runs the library and
writes CSV tables (17 significant digits, ``#`` comment lines) and SVG plots
into the output directory.  Exit status 0 on success, 2 for configuration
errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approx, bie, capacity, geometry, landau, spectral, toeplitz
from .errors import ConfigError, EmptySeries, InvariantViolation, NumericalFailure

EXPERIMENTS = ("greens", "weyl", "spectrum", "toeplitz", "capacity", "approx", "selftest")
OUT_ENV = "LANDAUDELTA_OUT"
DEFAULT_OUT = "landaudelta-out"

_TOP_KEYS = {"experiment", "geometry", "physics", "numerics", "output"}
_GEOMETRY_KEYS = {
    "circle": {"type", "radius", "center", "n_panels"},
    "fourier": {"type", "cos", "sin", "center", "n_panels"},
    "segment": {"type", "p0", "p1", "n_panels"},
    "arc": {"type", "parent", "s_a", "s_b", "angles", "n_panels", "grading"},
}
_PHYSICS_KEYS = {"B", "alpha", "lambda", "lambdas", "q", "side", "points"}
_NUMERICS_KEYS = {"k_max", "scan_points", "floor", "interp_tol", "m_max", "q_max", "eps_levels",
                  "k_range", "beta"}
_OUTPUT_KEYS = {"directory", "formats"}
_ALPHA_KEYS = {
    "constant": {"type", "value"},
    "piecewise": {"type", "breaks", "values"},
    "profile": {"type", "name", "amplitude"},
}
PROFILES = ("unit", "cosine")


# ---------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    experiment: str
    geometry: dict = field(default_factory=lambda: {"type": "circle"})
    physics: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def _reject_unknown(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(block) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _number(block, key, where, lo=None, hi=None, integer=False, default=None):
    if key not in block:
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key} must be an integer")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{where}.{key}={v} outside [{lo}, {hi}]")
    return int(v) if integer else float(v)


def _check_geometry(g, where="geometry"):
    if not isinstance(g, dict) or g.get("type") not in _GEOMETRY_KEYS:
        raise ConfigError(f"{where}.type must be one of {sorted(_GEOMETRY_KEYS)}")
    _reject_unknown(g, _GEOMETRY_KEYS[g["type"]], where)
    _number(g, "n_panels", where, 8 if g["type"] != "segment" else 1, 4096, integer=True)
    if g["type"] == "circle":
        _number(g, "radius", where, 1e-6, 1e6)
    if g["type"] == "arc":
        parent = g.get("parent", {"type": "circle"})
        if parent.get("type") not in ("circle", "fourier"):
            raise ConfigError(f"{where}.parent must be a circle or fourier curve")
        _check_geometry(parent, where + ".parent")
        _number(g, "grading", where, 0, 30, integer=True)
        if "angles" in g and ("s_a" in g or "s_b" in g):
            raise ConfigError(f"{where}: give either angles or s_a/s_b")
    if g["type"] == "segment" and ("p0" not in g or "p1" not in g):
        raise ConfigError(f"{where}: a segment needs p0 and p1")


def _check_alpha(a):
    if isinstance(a, bool):
        raise ConfigError("physics.alpha must be a number or an object")
    if isinstance(a, (int, float)):
        return
    if not isinstance(a, dict) or a.get("type") not in _ALPHA_KEYS:
        raise ConfigError(f"physics.alpha.type must be one of {sorted(_ALPHA_KEYS)}")
    _reject_unknown(a, _ALPHA_KEYS[a["type"]], "physics.alpha")
    if a["type"] == "piecewise":
        b, v = a.get("breaks"), a.get("values")
        if not isinstance(b, list) or not isinstance(v, list) or len(b) != len(v) + 1 or len(v) == 0:
            raise ConfigError("piecewise alpha needs len(breaks) == len(values) + 1")
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ConfigError("piecewise alpha breaks must increase")
    if a["type"] == "profile" and a.get("name") not in PROFILES:
        raise ConfigError(f"named alpha profile must be one of {PROFILES}")


def parse_config(doc, experiment=None):
    """Validate a configuration document and return a RunConfig."""
    _reject_unknown(doc, _TOP_KEYS, "config")
    exp = doc.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config is for experiment {exp!r}, not {experiment!r}")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    geo = doc.get("geometry", {"type": "circle"})
    _check_geometry(geo)
    phys = doc.get("physics", {})
    _reject_unknown(phys, _PHYSICS_KEYS, "physics")
    _number(phys, "B", "physics", 1e-6, 1e6)
    _number(phys, "q", "physics", 0, 20, integer=True)
    if "side" in phys and phys["side"] not in spectral.SIDES:
        raise ConfigError(f"physics.side must be one of {spectral.SIDES}")
    if "alpha" in phys:
        _check_alpha(phys["alpha"])
    for key in ("lambda",):
        if key in phys:
            _complex(phys[key], f"physics.{key}")
    if "lambdas" in phys:
        if not isinstance(phys["lambdas"], list) or not phys["lambdas"]:
            raise ConfigError("physics.lambdas must be a nonempty list")
        for v in phys["lambdas"]:
            _complex(v, "physics.lambdas")
    if "points" in phys:
        pts = np.asarray(phys["points"], dtype=float) if isinstance(phys["points"], list) else None
        if pts is None or pts.ndim != 2 or pts.shape[1] != 4:
            raise ConfigError("physics.points must be a list of [x1, x2, y1, y2]")
    num = doc.get("numerics", {})
    _reject_unknown(num, _NUMERICS_KEYS, "numerics")
    _number(num, "k_max", "numerics", 1, 40, integer=True)
    _number(num, "scan_points", "numerics", 50, 100000, integer=True)
    _number(num, "floor", "numerics", 0.0, 1.0)
    _number(num, "interp_tol", "numerics", 1e-15, 1e-3)
    _number(num, "m_max", "numerics", 1, 2000, integer=True)
    _number(num, "q_max", "numerics", 0, 4, integer=True)
    _number(num, "eps_levels", "numerics", 3, 10, integer=True)
    _number(num, "beta", "numerics", 1e-6, 10.0)
    if "k_range" in num:
        kr = num["k_range"]
        if not (isinstance(kr, list) and len(kr) == 2 and all(isinstance(k, int) for k in kr) and 1 <= kr[0] <= kr[1]):
            raise ConfigError("numerics.k_range must be [k_lo, k_hi] with 1 <= k_lo <= k_hi")
    out = doc.get("output", {})
    _reject_unknown(out, _OUTPUT_KEYS, "output")
    fmts = out.get("formats", ["csv", "svg"])
    if not isinstance(fmts, list) or set(fmts) - {"csv", "svg"} or "csv" not in fmts:
        raise ConfigError("output.formats must be a list containing 'csv' and optionally 'svg'")
    return RunConfig(exp, geo, phys, num, out)


def _complex(v, where):
    if isinstance(v, bool):
        raise ConfigError(f"{where} must be a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where} must be a number or [re, im]")


# ---------------------------------------------------------------- builders

def build_geometry(g):
    kind = g.get("type", "circle")
    n = g.get("n_panels")
    if kind == "circle":
        return geometry.build_circle(g.get("center", (0.0, 0.0)), g.get("radius", 1.0), n or 32)
    if kind == "fourier":
        return geometry.build_fourier_curve(g.get("cos", [1.0]), g.get("sin", ()), n or 32,
                                            g.get("center", (0.0, 0.0)))
    if kind == "segment":
        return geometry.build_segment(g["p0"], g["p1"], n or 32)
    parent = build_geometry(dict(g.get("parent", {"type": "circle"}), n_panels=g.get("parent", {}).get("n_panels", 64)))
    L = parent.total_length
    if "angles" in g:
        if not isinstance(parent.shape, geometry.CircleShape):
            raise ConfigError("angles are only meaningful on a circle parent")
        r = parent.shape.radius
        s_a, s_b = (float(a) * r for a in g["angles"])
    else:
        s_a, s_b = float(g.get("s_a", 0.0)), float(g.get("s_b", 0.5 * L))
    return geometry.sub_arc(parent, s_a, s_b, n, g.get("grading", 0))


def build_alpha(nodes, desc):
    if desc is None:
        desc = 1.0
    if isinstance(desc, (int, float)):
        return spectral.StrengthFunction.constant(nodes, float(desc))
    kind = desc["type"]
    if kind == "constant":
        return spectral.StrengthFunction.constant(nodes, float(desc.get("value", 1.0)))
    s = nodes.s - nodes.window[0] if hasattr(nodes, "window") else nodes.s
    if kind == "piecewise":
        b = np.asarray(desc["breaks"], dtype=float)
        v = np.asarray(desc["values"], dtype=float)
        idx = np.searchsorted(b, s, side="right") - 1
        inside = (idx >= 0) & (idx < len(v))
        return spectral.StrengthFunction(nodes, np.where(inside, v[np.clip(idx, 0, len(v) - 1)], 0.0))
    amp = float(desc.get("amplitude", 1.0))
    if desc["name"] == "unit":
        return spectral.StrengthFunction.constant(nodes, amp)
    L = nodes.total_length
    return spectral.StrengthFunction(nodes, amp * (1.0 + 0.5 * np.cos(2 * np.pi * s / L)))


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows, comments=()):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())
    return Path(path)


def _comments(cfg):
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return [f"landaudelta {cfg.experiment}", f"generated {stamp}"]


def emit_plot(path, series, xlabel="x", ylabel="y", title=None, xscale="linear", yscale="linear",
              hlines=(), annotations=()):
    """Write a static SVG line plot; ``series`` is a list of (label, x, y[, style]).

    ``style`` is 'line' (default) or 'scatter'; ``hlines`` are (label, y)
    pairs and ``annotations`` free text placed in the upper left corner.
    """
    series = [s for s in series if len(s[1]) > 0]
    if not series:
        raise EmptySeries("nothing to plot")
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "landaudelta"
    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.0, 4.0))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    for s in series:
        label, x, y = s[:3]
        style = s[3] if len(s) > 3 else "line"
        if style == "scatter":
            ax.plot(x, y, "o", ms=4, label=label)
        else:
            ax.plot(x, y, "-o", ms=3, lw=1.2, label=label)
    for label, y in hlines:
        ax.axhline(y, color="k", ls="--", lw=1.0, label=label)
    ax.set_xscale(xscale)
    ax.set_yscale(yscale)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    for k, text in enumerate(annotations):
        ax.text(0.03, 0.95 - 0.07 * k, text, transform=ax.transAxes, va="top")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    return Path(path)


# ---------------------------------------------------------------- experiments

def _exp_greens(cfg, out, ctx):
    ph = cfg.physics
    B = ph.get("B", 1.0)
    lam = _complex(ph.get("lambda", -1.0), "physics.lambda")
    if "points" in ph:
        pts = np.asarray(ph["points"], dtype=float)
    else:
        rng = np.random.default_rng(ctx["seed"])
        x = rng.uniform(-1, 1, (8, 2))
        d = rng.uniform(0.5, 2.0, 8)
        th = rng.uniform(0, 2 * np.pi, 8)
        pts = np.column_stack([x, x + d[:, None] * np.column_stack([np.cos(th), np.sin(th)])])
    g = landau.green_function(pts[:, :2], pts[:, 2:], lam, B)
    g = np.atleast_1d(g)
    rows = [(*p, v.real, v.imag) for p, v in zip(pts, g)]
    return [write_csv(out / "greens.csv", ["x1", "x2", "y1", "y2", "re", "im"], rows, _comments(cfg))]


def _exp_weyl(cfg, out, ctx):
    nodes = build_geometry(cfg.geometry)
    B = cfg.physics.get("B", 1.0)
    lams = [_complex(v, "physics.lambdas") for v in cfg.physics.get("lambdas", [-1.0, -10.0, -100.0, -1000.0])]
    rows = []
    for lam in lams:
        bm = bie.cached_weyl(ctx["cache"], nodes, lam, B)
        ev = bm.eigenvalues()
        rows.append((lam.real, lam.imag, bm.norm(), float(np.min(ev.real)), float(np.max(ev.real))))
    files = [write_csv(out / "weyl.csv", ["lambda_re", "lambda_im", "norm", "min_eig_re", "max_eig_re"],
                       rows, _comments(cfg))]
    if ctx["svg"]:
        x = np.array([abs(r[0] + 1j * r[1]) for r in rows])
        y = np.array([r[2] for r in rows])
        files.append(emit_plot(out / "weyl.svg", [("||M(lambda)||", x, y)], "|lambda|", "norm",
                               "Weyl function decay", "log", "log"))
    return files


def _capacity_nodes(nodes):
    # endpoint-graded copy of an arc: the equilibrium density is singular at the ends
    if isinstance(nodes, geometry.Arc):
        return geometry.sub_arc(nodes.parent, *nodes.window, n_panels=max(nodes.n_panels, 32), grading=10)
    return nodes


def _exp_spectrum(cfg, out, ctx):
    nodes = build_geometry(cfg.geometry)
    ph, num = cfg.physics, cfg.numerics
    B = ph.get("B", 1.0)
    alpha = build_alpha(nodes, ph.get("alpha"))
    q = ph.get("q", 0)
    side = ph.get("side", "below" if alpha.sign < 0 else "above")
    rep = spectral.find_cluster_eigenvalues(
        nodes, alpha, q, side, num.get("k_max", 10), B,
        scan_points=num.get("scan_points", 400), floor=num.get("floor", 1e-6),
        interp_tol=num.get("interp_tol", 1e-11))
    target = 0.5 * B * capacity.capacity_of(_capacity_nodes(nodes)) ** 2
    notes = [f"target {target:.17g}"]
    if "k_range" in num:
        lo, hi = num["k_range"]
        _, tail = spectral.cluster_asymptotics(rep, range(lo, hi + 1))
        notes.append(f"tail {tail:.17g}")
    path = out / "spectrum.csv"
    path.write_text("".join(f"# {c}\n" for c in _comments(cfg) + notes) + rep.to_csv())
    files = [path]
    if ctx["svg"]:
        a = rep.a_k
        k = np.arange(len(a))
        ok = ~np.isnan(a)
        files.append(emit_plot(out / "spectrum.svg", [("a_k", k[ok], a[ok])], "k", "a_k",
                               f"cluster at level {q} ({side})", hlines=[("(B/2) Cap^2", target)]))
    return files


def _exp_toeplitz(cfg, out, ctx):
    nodes = build_geometry(cfg.geometry)
    ph, num = cfg.physics, cfg.numerics
    B = ph.get("B", 1.0)
    q = ph.get("q", 0)
    m_range = (-q, num["m_max"]) if "m_max" in num else None
    T = toeplitz.assemble_toeplitz(q, nodes, B, m_range)
    s = toeplitz.toeplitz_singular_values(T, floor=num.get("floor", toeplitz.FLOOR))
    target = 0.5 * B * capacity.capacity_of(_capacity_nodes(nodes)) ** 2
    b, tail, target = toeplitz.toeplitz_asymptotics(s, B, target=target)
    path = out / "toeplitz.csv"
    path.write_text("".join(f"# {c}\n" for c in _comments(cfg) + [f"tail {tail:.17g}"]) + toeplitz.to_csv(q, s, b, target))
    files = [path]
    if ctx["svg"]:
        k = np.arange(len(b))
        ok = ~np.isnan(b)
        files.append(emit_plot(out / "toeplitz.svg", [("b_k", k[ok], b[ok])], "k", "b_k",
                               "Toeplitz singular-value ratios", hlines=[("(B/2) Cap^2", target)]))
    return files


def _exp_capacity(cfg, out, ctx):
    nodes = build_geometry(cfg.geometry)
    m = capacity.equilibrium(nodes)
    p1 = out / "capacity.csv"
    p1.write_text("".join(f"# {c}\n" for c in _comments(cfg)) + m.to_csv())
    p2 = out / "capacity_summary.csv"
    p2.write_text("".join(f"# {c}\n" for c in _comments(cfg)) + m.summary())
    return [p1, p2]


def _exp_approx(cfg, out, ctx):
    nodes = build_geometry(cfg.geometry)
    ph, num = cfg.physics, cfg.numerics
    B = ph.get("B", 1.0)
    alpha = build_alpha(nodes, ph.get("alpha"))
    prof = approx.TransversalProfile.from_alpha(alpha, num.get("beta"))
    lam = _complex(ph["lambda"], "physics.lambda") if "lambda" in ph else 1j * B
    eps = prof.beta * 0.5 ** np.arange(1, num.get("eps_levels", 5) + 1)
    center = tuple(np.average(nodes.points, axis=0, weights=nodes.weights))
    basis = None
    if "q_max" in num:
        r_max = float(np.hypot(*(nodes.points - np.array(center)).T).max()) + prof.beta
        basis = approx.landau_basis(B, r_max, num["q_max"])
    r = approx.resolvent_gap(nodes, prof, B, basis, lam, eps, center)
    path = out / "approx.csv"
    path.write_text("".join(f"# {c}\n" for c in _comments(cfg)) + r.to_csv())
    files = [path]
    if ctx["svg"]:
        fit = np.exp(np.polyval(np.polyfit(np.log(r.eps), np.log(r.gaps), 1), np.log(r.eps)))
        files.append(emit_plot(out / "approx.svg", [("g(eps)", r.eps, r.gaps, "scatter"), ("fit", r.eps, fit)],
                               "eps", "resolvent gap", "squeezed potential vs delta", "log", "log",
                               annotations=[f"slope p = {r.p:.3f} +/- {r.p_stderr:.3f}"]))
    return files


def _exp_selftest(cfg, out, ctx):
    from . import invariants

    res = invariants.run_all(seed=ctx["seed"], report=lambda line: print(line, flush=True))
    rows = [(m, n, ok, d) for m, n, ok, d, _ in res]
    path = write_csv(out / "selftest.csv", ["module", "check", "passed", "detail"], rows, _comments(cfg))
    failed = [f"{m}: {n}" for m, n, ok, _, _ in res if not ok]
    if failed:
        raise InvariantViolation(f"{len(failed)} invariant(s) failed: {'; '.join(failed)}")
    return [path]


_RUNNERS = {
    "greens": _exp_greens,
    "weyl": _exp_weyl,
    "spectrum": _exp_spectrum,
    "toeplitz": _exp_toeplitz,
    "capacity": _exp_capacity,
    "approx": _exp_approx,
    "selftest": _exp_selftest,
}


def run(config, out=None, use_cache=True, threads=None, seed=0):
    """Run one experiment; ``config`` is a RunConfig or a raw JSON-like dict."""
    cfg = config if isinstance(config, RunConfig) else parse_config(config)
    out = Path(out or cfg.output.get("directory") or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    if threads is not None:
        bie.set_threads(threads)
    ctx = {
        "cache": (out / "cache") if use_cache else None,
        "seed": int(seed),
        "svg": "svg" in cfg.output.get("formats", ["csv", "svg"]),
    }
    return _RUNNERS[cfg.experiment](cfg, out, ctx)


def _parser():
    p = argparse.ArgumentParser(prog="landaudelta", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--threads", type=int, help="worker threads for matrix assembly")
    common.add_argument("--no-cache", action="store_true", help="do not read or write cached matrices")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        doc = {}
        if args.config is not None:
            try:
                doc = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = parse_config(doc, args.experiment)
        files = run(cfg, args.out, use_cache=not args.no_cache, threads=args.threads, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
