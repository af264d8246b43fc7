"""Command-line interface: config parsing, sweeps, and result serialization.

Configs are flat INI files with [network], [wells.*], [wires.*] and [run]
sections.  Every numeric lands in the output files with 17 significant
digits, and sweeps merge worker results in input order, so repeated runs
are byte-identical.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fdm, spectra
from .errors import ConfigError, QnetError
from .model import fit_jump_start, mirror_resonances, resonance_continuation
from .network import Attachment, NetworkSpec, WellSpec, WireSpec, threshold
from .pipeline import NetworkOperator


def fmt(x) -> str:
    """17-significant-digit rendering used for every numeric output."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _json(value, indent=0) -> str:
    """Tiny deterministic JSON writer honoring the numeric format."""
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{pad}  "{k}": {_json(v, indent + 1)}' for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}  {_json(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(value, str):
        return f'"{value}"'
    if value is None:
        return "null"
    return fmt(value)


@dataclass
class RunConfig:
    """Sweep, truncation and output settings of one CLI invocation."""

    lambda_min: float | None = None
    lambda_max: float | None = None
    points: int = 2
    s_max: int = 8
    lam_cut: float | None = None
    threads: int = 1
    seed: int = 0
    svg: bool = False
    temperature: float | None = None
    h: float | None = None
    l_tr: float | None = None
    n_scan: int = 256
    spectral_table: str | None = None
    beta: float = 0.1
    k0: float = 1.0
    levels: tuple[float, ...] = (1.0,)
    weights: tuple[float, ...] = (1.0,)
    edge_guard: float = 1e-4
    extras: dict = field(default_factory=dict)


def _get(section, key, conv, default=None, where=""):
    if key not in section:
        if default is not None or key in ("lam_cut",):
            return default
        raise ConfigError(f"missing required field {key!r}", where)
    raw = section[key]
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: cannot parse {raw!r}", where) from exc


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def parse_config(path) -> tuple[NetworkSpec | None, RunConfig]:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    wells, wires = [], []
    fermi = None
    for name in cp.sections():
        where = f"{path}:[{name}]"
        sec = cp[name]
        if name == "network":
            fermi = _get(sec, "fermi_level", float, where=where)
        elif name.startswith("wells."):
            wells.append(WellSpec(
                id=name.split(".", 1)[1],
                a=_get(sec, "a", float, where=where),
                b=_get(sec, "b", float, where=where),
                mass=_get(sec, "mass", float, where=where),
                potential=_get(sec, "potential", float, 0.0, where),
            ))
        elif name.startswith("wires."):
            length = _get(sec, "length", str, "inf", where)
            wires.append(WireSpec(
                id=name.split(".", 1)[1],
                width=_get(sec, "width", float, where=where),
                mass_par=_get(sec, "mass_par", float, where=where),
                mass_perp=_get(sec, "mass_perp", float, where=where),
                potential=_get(sec, "potential", float, 0.0, where),
                length=math.inf if length in ("inf", "") else float(length),
                attachments=(Attachment(
                    well=_get(sec, "well", str, where=where),
                    edge=_get(sec, "edge", str, where=where),
                    offset=_get(sec, "offset", float, 0.0, where),
                ),),
            ))
        elif name != "run":
            raise ConfigError(f"unknown section [{name}]", str(path))
    run = RunConfig()
    if cp.has_section("run"):
        sec = cp["run"]
        where = f"{path}:[run]"
        run.lambda_min = _get(sec, "lambda_min", float, run.lambda_min, where) \
            if "lambda_min" in sec else None
        run.lambda_max = _get(sec, "lambda_max", float, run.lambda_max, where) \
            if "lambda_max" in sec else None
        run.points = _get(sec, "points", int, run.points, where)
        run.threads = _get(sec, "threads", int, run.threads, where)
        run.seed = _get(sec, "seed", int, run.seed, where)
        run.svg = sec.getboolean("svg", run.svg)
        run.n_scan = _get(sec, "n_scan", int, run.n_scan, where)
        run.temperature = float(sec["temperature"]) if "temperature" in sec else None
        run.h = float(sec["h"]) if "h" in sec else None
        run.l_tr = float(sec["l_tr"]) if "l_tr" in sec else None
        run.spectral_table = sec.get("spectral_table", None)
        run.beta = _get(sec, "beta", float, run.beta, where)
        run.k0 = _get(sec, "k0", float, run.k0, where)
        if "levels" in sec:
            run.levels = _floats(sec["levels"])
        if "weights" in sec:
            run.weights = _floats(sec["weights"])
    if cp.has_section("network"):
        sec = cp["network"]
        where = f"{path}:[network]"
        run.s_max = _get(sec, "s_max", int, run.s_max, where)
        if "lam_cut" in sec:
            run.lam_cut = _get(sec, "lam_cut", float, None, where)
    net = None
    if fermi is not None:
        if not wires:
            raise ConfigError("network needs at least one wire", str(path))
        net = NetworkSpec(tuple(wells), tuple(wires), fermi)
    return net, run


# ----------------------------------------------------------------- sweeps

def _sweep_grid(op: NetworkOperator, run: RunConfig) -> np.ndarray:
    lo, hi = op.band_window(run.edge_guard)
    lam_min = lo if run.lambda_min is None else run.lambda_min
    lam_max = hi if run.lambda_max is None else run.lambda_max
    if not lam_min < lam_max:
        raise ConfigError(f"empty sweep range [{lam_min}, {lam_max}]")
    if lam_min < lo - 1e-12 or lam_max > hi + 1e-12:
        raise ConfigError(
            f"sweep range [{lam_min}, {lam_max}] leaves the guarded band [{lo}, {hi}]")
    if run.points < 2:
        raise ConfigError("points must be >= 2")
    return np.linspace(lam_min, lam_max, run.points)


def _mode_labels(op: NetworkOperator):
    return [f"{m.wire_id}:{m.s}" for m in op.basis.open_modes]


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(x) if not isinstance(x, str) else x for x in row) + "\n")


# -------------------------------------------------------------------- svg

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf")


def write_svg(path: Path, x: np.ndarray, curves: dict[str, np.ndarray],
              xlabel: str = "lambda", ylabel: str = "T") -> None:
    """Plain polyline plot with axis ticks; no plotting dependencies."""
    w, h, ml, mr, mt, mb = 640, 420, 60, 16, 16, 44
    x0, x1 = float(np.min(x)), float(np.max(x))
    ys = np.concatenate([np.asarray(c) for c in curves.values()]) if curves else np.array([0.0, 1.0])
    y0, y1 = float(np.min(ys)), float(np.max(ys))
    if y1 - y0 < 1e-12:
        y1 = y0 + 1.0

    def px(v):
        return ml + (v - x0) / (x1 - x0) * (w - ml - mr)

    def py(v):
        return h - mb - (v - y0) / (y1 - y0) * (h - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect x="{ml}" y="{mt}" width="{w - ml - mr}" height="{h - mt - mb}" '
        'fill="white" stroke="black"/>',
    ]
    for i in range(6):
        xv = x0 + i * (x1 - x0) / 5
        yv = y0 + i * (y1 - y0) / 5
        parts.append(f'<line x1="{px(xv):.2f}" y1="{h - mb}" x2="{px(xv):.2f}" '
                     f'y2="{h - mb + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(xv):.2f}" y="{h - mb + 18}" font-size="11" '
                     f'text-anchor="middle">{xv:.4g}</text>')
        parts.append(f'<line x1="{ml - 5}" y1="{py(yv):.2f}" x2="{ml}" '
                     f'y2="{py(yv):.2f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{py(yv) + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{yv:.4g}</text>')
    parts.append(f'<text x="{(ml + w - mr) / 2}" y="{h - 8}" font-size="12" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{(mt + h - mb) / 2}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 14 {(mt + h - mb) / 2})">'
                 f'{ylabel}</text>')
    for i, (name, c) in enumerate(curves.items()):
        pts = " ".join(f"{px(xx):.2f},{py(yy):.2f}" for xx, yy in zip(x, c))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{w - mr - 6}" y="{mt + 16 + 14 * i}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{name}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands

def _build_operator(net, run) -> NetworkOperator:
    data = spectra.load_table(run.spectral_table) if run.spectral_table else None
    return NetworkOperator(net, s_max=run.s_max, lam_cut=run.lam_cut, data=data,
                           exact=data is None)


def cmd_spectrum(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    doc = {
        "fermi_level": net.fermi_level,
        "band": list(op.band),
        "mean_spacing": op.mean_spacing(),
        "lam_cut": op.lam_cut,
        "thresholds": [
            {"wire": w.id, "s": s, "threshold": threshold(w, s),
             "status": "open" if threshold(w, s) < net.fermi_level else "closed"}
            for w in net.semi_infinite_wires for s in range(1, run.s_max + 1)
        ],
        "eigenvalues": [
            {"index": i, "well": op.data.wells[i], "value": float(v)}
            for i, v in enumerate(op.data.eigenvalues)
        ],
    }
    p = out / "spectrum.json"
    p.write_text(_json(doc) + "\n", encoding="utf-8")
    return [p]


def cmd_dn(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    grid = _sweep_grid(op, run)
    rows = []
    for lam in grid:
        blocks = op.dn_blocks(lam)
        for name, m in (("pp", blocks.pp), ("pm", blocks.pm), ("mm", blocks.mm)):
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    rows.append((lam, name, i, j, m[i, j]))
        rows.append((lam, "tail_delta", 0, 0, op.tail_sensitivity(lam)))
    p = out / "dn.csv"
    _write_csv(p, ["lambda", "block", "i", "j", "value"], rows)
    return [p]


def cmd_eigen(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    roots = op.dispersion_roots(run.n_scan)
    doc = {
        "band": list(op.band),
        "roots": [
            {"lambda": r.lam, "residual": r.residual, "nu": [float(x) for x in r.nu]}
            for r in roots
        ],
    }
    p = out / "eigen.json"
    p.write_text(_json(doc) + "\n", encoding="utf-8")
    return [p]


def cmd_scatter(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    grid = _sweep_grid(op, run)
    mats = op.sweep(grid, threads=run.threads)
    labels = _mode_labels(op)
    n = len(labels)
    header = ["lambda"]
    for i in range(n):
        for j in range(n):
            header += [f"re_s[{labels[i]}][{labels[j]}]", f"im_s[{labels[i]}][{labels[j]}]"]
    for i in range(n):
        for j in range(n):
            header.append(f"t[{labels[i]}][{labels[j]}]")
    header.append("unitarity_defect")
    rows = []
    for lam, sm in zip(grid, mats):
        row = [lam]
        for i in range(n):
            for j in range(n):
                row += [sm.s[i, j].real, sm.s[i, j].imag]
        for i in range(n):
            for j in range(n):
                row.append(abs(sm.s[i, j]) ** 2)
        row.append(sm.unitarity_defect)
        rows.append(row)
    paths = [out / "scatter.csv"]
    _write_csv(paths[0], header, rows)
    if run.svg:
        curves = {}
        for i in range(n):
            for j in range(n):
                if i != j:
                    curves[f"T[{labels[i]}][{labels[j]}]"] = np.array(
                        [abs(sm.s[i, j]) ** 2 for sm in mats])
        svg_path = out / "scatter.svg"
        write_svg(svg_path, grid, curves)
        paths.append(svg_path)
    return paths


def cmd_resonances(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    res = op.resonance()
    zero = op.resonance_zero(res)
    spacing = op.mean_spacing()
    thin = op.thin_norm(res.lam_pole + 0.25 * spacing, res.lam0)
    window = (res.lam_pole - 0.1 * spacing, res.lam_pole + 0.1 * spacing)
    half = min(2.2 * spacing, 0.9 * (op.band[1] - net.fermi_level))
    d = op.subordination_essential(res, op.essential_poles(half, run.n_scan), window)
    regime_warnings = []
    if thin >= 1.0:
        regime_warnings.append(f"thin-network condition violated: norm {fmt(thin)} >= 1")
    if d >= 0.3:
        regime_warnings.append(f"one-pole regime marginal: subordination d {fmt(d)} >= 0.3")
    doc = {
        "lam0": res.lam0,
        "denominator_zero": res.lam_pole,
        "shift_estimate": res.shift_estimate,
        "residue": [float(x) for x in np.atleast_1d(res.residue).ravel()],
        "zero": {"re": zero.lam.real, "im": zero.lam.imag, "residual": zero.residual},
        "thin_network_norm": thin,
        "subordination_d": d,
        "warnings": regime_warnings,
    }
    for w in regime_warnings:
        print(f"warning: {w}", file=sys.stderr)
    p = out / "resonances.json"
    p.write_text(_json(doc) + "\n", encoding="utf-8")
    return [p]


def cmd_fit_model(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    half = run.temperature if run.temperature is not None else 2.0 * op.mean_spacing()
    half = min(half, 0.95 * (op.band[1] - net.fermi_level))
    poles = op.essential_poles(half, run.n_scan)
    if not poles:
        raise ConfigError("no intermediate eigenvalues on the essential band")
    model = op.fit_solvable_model(poles)
    from .model import model_to_dict

    doc = {"essential_half_width": half, **model_to_dict(model)}
    p_model = out / "model.json"
    p_model.write_text(_json(doc) + "\n", encoding="utf-8")
    lo = max(net.fermi_level - half, op.band_window(run.edge_guard)[0])
    hi = min(net.fermi_level + half, op.band_window(run.edge_guard)[1])
    grid = np.linspace(lo, hi, max(run.points, 16))
    rows = []
    from .model import model_s_matrix
    for lam in grid:
        s_m = model_s_matrix(model, op.kplus(lam), lam).s
        s_e = op.essential_s(poles, lam).s
        rows.append((lam, float(np.max(np.abs(s_m - s_e)))))
    p_dev = out / "fit_deviation.csv"
    _write_csv(p_dev, ["lambda", "max_abs_deviation"], rows)
    return [p_model, p_dev]


def cmd_oracle(net, run, out: Path) -> list[Path]:
    op = _build_operator(net, run)
    grid = _sweep_grid(op, run)
    h = run.h if run.h is not None else min(w.width for w in net.wires) / 32.0
    l_tr = run.l_tr if run.l_tr is not None else fdm.default_l_tr(
        op.basis, float(grid[-1]), h)
    scene = fdm.GridScene(net, h, l_tr)
    rows = []
    labels = _mode_labels(op)
    report = fdm.oracle_compare(scene, op.basis, lambda lam: op.s_matrix(lam).s, grid)
    for lam, dev, s_dn, s_fd in report:
        row = [lam, dev]
        for i in range(len(labels)):
            for j in range(len(labels)):
                row += [abs(s_dn[i, j]) ** 2, abs(s_fd[i, j]) ** 2]
        rows.append(row)
    header = ["lambda", "max_abs_dev"]
    for i in labels:
        for j in labels:
            header += [f"t_dn[{i}][{j}]", f"t_fdm[{i}][{j}]"]
    p = out / "oracle.csv"
    _write_csv(p, header, rows)
    return [p]


def cmd_jump_start(net, run, out: Path) -> list[Path]:
    k0 = resonance_continuation(run.k0, run.beta, np.array(run.levels),
                                np.array(run.weights))
    js = fit_jump_start(k0)
    ps = np.linspace(0.25 * run.k0, 4.0 * run.k0, 101)
    dev = float(np.max(np.abs(js.model_s(ps) - js.target_s(ps))))
    full = mirror_resonances([
        resonance_continuation(math.sqrt(l), run.beta, np.array(run.levels),
                               np.array(run.weights))
        for l in run.levels
    ])
    doc = {
        "beta": run.beta,
        "k0_of_beta": {"re": k0.real, "im": k0.imag},
        "kappa2": js.kappa2,
        "beta00": js.beta00,
        "beta01_sq": js.beta01_sq,
        "beta11": js.beta11,
        "pointwise_match": dev,
        "resonances": [{"re": k.real, "im": k.imag} for k in full],
    }
    p = out / "jumpstart.json"
    p.write_text(_json(doc) + "\n", encoding="utf-8")
    return [p]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "dn": cmd_dn,
    "eigen": cmd_eigen,
    "scatter": cmd_scatter,
    "resonances": cmd_resonances,
    "fit-model": cmd_fit_model,
    "oracle": cmd_oracle,
    "jump-start": cmd_jump_start,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="qnet",
        description="Scattering matrices, resonances and solvable models "
                    "of 2D quantum networks.",
    )
    ap.add_argument("--config", required=True, help="network/run config file (INI)")
    ap.add_argument("--command", required=True, choices=sorted(COMMANDS))
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=None, help="sweep worker count")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for randomized property tests")
    args = ap.parse_args(argv)
    try:
        net, run = parse_config(args.config)
        if args.threads is not None:
            run.threads = args.threads
        if args.seed is not None:
            run.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if net is None and args.command != "jump-start":
            raise ConfigError("config has no [network] section")
        paths = COMMANDS[args.command](net, run, out)
    except QnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
