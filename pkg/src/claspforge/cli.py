"""Command-line front end.

    claspforge build|verify|export|report --spec <file> [--h H] [--tol T]
        [--seed S] [--trials N] [--out DIR] [--format csv|obj|json]

Exit codes: 0 success, 2 input error, 3 build error, 4 verification failure.
``--spec`` accepts a configuration JSON, a geometry JSON written by
``build``, or (for ``export``) a polyline CSV.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import clasp_core as cc
from . import constructions as cons
from . import criticality as crit
from . import geometry as geo

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_BUILD, EXIT_VERIFY = 0, 2, 3, 4
CSV_COLUMNS = ("component_id", "piece_id", "s", "x", "y", "z", "u", "kappa")

# family -> (required, optional with defaults); values are numbers unless noted
SCHEMA = {
    "simple_clasp": ({"tau": float}, {}),
    "weighted_clasp": ({"tau_1": float, "tau_2": float}, {"weights": list}),
    "parallel_clasp": ({"k": int, "l": int, "m": int, "tau": float}, {}),
    "split_config": ({"m": int}, {"tau": float}),
    "chained_clasp": ({"tau": float}, {"d": float, "middles": int}),
    "granny": ({"n": int}, {"tau": float}),
}
COMMON_KEYS = {"schema_version", "family", "h", "run"}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialization


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0:
        return "0"  # "-0" would reload as the integer 0
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Canonical JSON: sorted keys, 17 significant digits, two-space indent."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    return json.dumps(str(obj))


def write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj) + "\n", encoding="utf-8")


def _plain(x):
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return {f.name: _plain(getattr(x, f.name)) for f in dataclasses.fields(x)}
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


# ---------------------------------------------------------------------------
# spec parsing


def parse_spec(text: str, source: str = "<spec>") -> dict:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise InputError(f"{source}: top level must be an object")
    return raw


def validate_spec(raw: dict, source: str = "<spec>") -> cons.FamilySpec:
    fam = raw.get("family")
    if fam not in SCHEMA:
        raise InputError(f"{source}: field 'family': expected one of {sorted(SCHEMA)}, got {fam!r}")
    ver = raw.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise InputError(f"{source}: field 'schema_version': unsupported value {ver!r}")
    required, optional = SCHEMA[fam]
    params = {}
    for key, typ in {**required, **optional}.items():
        if key not in raw:
            if key in required:
                raise InputError(f"{source}: field '{key}': required for family {fam}")
            continue
        val = raw[key]
        if typ is list:
            ok = isinstance(val, list) and len(val) == 2 and all(_is_number(v) for v in val)
        elif typ is int:
            ok = isinstance(val, int) and not isinstance(val, bool)
        else:
            ok = _is_number(val)
        if not ok:
            raise InputError(f"{source}: field '{key}': expected {typ.__name__}, got {val!r}")
        params[key] = val
    extra = set(raw) - set(required) - set(optional) - COMMON_KEYS
    if extra:
        raise InputError(f"{source}: unknown field(s) {sorted(extra)} for family {fam}")
    h = raw.get("h")
    if h is not None and (not _is_number(h) or h <= 0):
        raise InputError(f"{source}: field 'h': must be a positive number")
    run = raw.get("run", cons.DEFAULT_RUN)
    if not _is_number(run) or run <= 0:
        raise InputError(f"{source}: field 'run': must be a positive number")
    return cons.FamilySpec(fam, params, h, float(run))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def spec_dict(spec: cons.FamilySpec) -> dict:
    d = {"schema_version": SCHEMA_VERSION, "family": spec.family, "run": spec.run, **spec.params}
    if spec.h is not None:
        d["h"] = spec.h
    return d


# ---------------------------------------------------------------------------
# geometry documents


def _piece_doc(p) -> dict:
    return {"type": type(p).__name__, **_plain(p)}


def geometry_doc(spec: cons.FamilySpec, link: geo.Link, h: float) -> dict:
    samples = geo.sample_link(link, h)
    comps = []
    for c, (comp, s) in enumerate(zip(link.components, samples)):
        planes = None
        if comp.endpoint_planes is not None:
            planes = [{"point": _plain(np.asarray(p.point, float)), "normal": _plain(np.asarray(p.normal, float))}
                      for p in comp.endpoint_planes]
        comps.append({
            "id": c,
            "name": comp.name,
            "weight": float(comp.weight),
            "closed": bool(comp.closed),
            "origin": _plain(np.asarray(comp.origin, float)),
            "e1": _plain(np.asarray(comp.e1, float)),
            "endpoint_planes": planes,
            "pieces": [_piece_doc(p) for p in comp.pieces],
            "self_intersections": geo.self_intersections(s),
            "nodes": {
                "piece": s.piece_ids.tolist(),
                "s": s.arclengths.tolist(),
                "x": s.points[:, 0].tolist(),
                "y": s.points[:, 1].tolist(),
                "z": s.points[:, 2].tolist(),
                "u": s.u_values.tolist(),
                "kappa": s.kappa.tolist(),
            },
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "geometry",
        "spec": spec_dict(spec),
        "h": h,
        "label": _plain(link.label),
        "metadata": _plain(link.metadata),
        "weighted_length": geo.weighted_length(link),
        "obstacles": [{"normal": _plain(np.asarray(o.normal, float)), "offset": float(o.offset)} for o in link.obstacles],
        "symmetries": [s.name for s in link.symmetries],
        "components": comps,
    }


def csv_rows(doc: dict):
    for comp in doc["components"]:
        n = comp["nodes"]
        for k in range(len(n["s"])):
            yield (comp["id"], n["piece"][k], n["s"][k], n["x"][k], n["y"][k], n["z"][k], n["u"][k], n["kappa"][k])


def write_csv(path: Path, rows) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    count = 0
    for r in rows:
        w.writerow([str(r[0]), str(r[1])] + [format(float(v), ".17g") for v in r[2:]])
        count += 1
    path.write_text(buf.getvalue(), encoding="utf-8")
    return count


def read_csv(path: Path):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise InputError(f"{path}:1: header must be {','.join(CSV_COLUMNS)}")
        rows = []
        for line, rec in enumerate(reader, start=2):
            try:
                rows.append((int(rec[0]), int(rec[1]), *map(float, rec[2:])))
            except (ValueError, IndexError):
                raise InputError(f"{path}:{line}: malformed row") from None
    return rows


def write_obj(path: Path, polylines) -> int:
    """``polylines``: list of (name, points, closed)."""
    out = ["# claspforge polyline export"]
    start, lines = 1, []
    for name, pts, closed in polylines:
        for p in pts:
            out.append("v " + " ".join(format(float(c), ".17g") for c in p))
        idx = list(range(start, start + len(pts)))
        if closed:
            idx.append(start)
        lines.append(f"o {name}")
        lines.append("l " + " ".join(map(str, idx)))
        start += len(pts)
    path.write_text("\n".join(out + lines) + "\n", encoding="utf-8")
    return start - 1


def polylines_from_doc(doc):
    return [(c["name"] or f"component{c['id']}", list(zip(c["nodes"]["x"], c["nodes"]["y"], c["nodes"]["z"])), c["closed"])
            for c in doc["components"]]


def polylines_from_rows(rows):
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[0], []).append(r[3:6])
    return [(f"component{c}", pts, False) for c, pts in sorted(groups.items())]


# ---------------------------------------------------------------------------
# verification


@dataclasses.dataclass
class RunConfig:
    command: str
    spec_path: Path
    h: float | None = None
    tol: float = crit.STRUT_TOL
    seed: int = 0
    trials: int = 100
    out: Path = Path(".")
    fmt: str | None = None


THICKNESS_TOL = 1e-6
BALANCE_C = 0.02  # residual_max must stay below BALANCE_C * h
SYMMETRY_TOL = 1e-8


def _balance_summary(rep: crit.BalanceReport) -> dict:
    return {
        "h": rep.h,
        "residual_max": rep.residual_max,
        "residual_l2": rep.residual_l2,
        "residual_density": rep.residual_density,
        "clamped": rep.clamped,
    }


def verify_link(spec: cons.FamilySpec, link: geo.Link, cfg: RunConfig) -> dict:
    h = cfg.h or spec.h or geo.DEFAULT_H
    samples = geo.sample_link(link, h)
    thick = crit.gehring_thickness(link, samples=samples)
    struts = crit.find_struts(link, tol=cfg.tol, samples=samples, thickness=thick)
    fine = crit.balance_solve(link, h, cfg.tol, samples=samples, struts=struts, thickness=thick)
    coarse = crit.balance_solve(link, 2 * h, cfg.tol)
    probe = crit.criticality_probe(link, cfg.trials, cfg.seed, samples=samples, struts=struts)
    sym = {s.name: geo.check_symmetry(link, s, samples=samples) for s in link.symmetries}
    cycles = crit.strut_cycles(struts)
    cyc_len: dict = {}
    for c in cycles:
        cyc_len[str(len(c))] = cyc_len.get(str(len(c)), 0) + 1
    cyc_res = crit.cycle_residuals(fine, cycles)
    iso = [
        {"a": list(fine.struts[k].a), "b": list(fine.struts[k].b), "length": fine.struts[k].length,
         "measure": float(fine.measure[k])}
        for k in fine.isolated
    ]
    mu = fine.measure
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "spec": spec_dict(spec),
        "h": h,
        "thickness": thick,
        "struts": {"total": len(struts), "band": len(struts) - len(iso), "isolated": len(iso), "isolated_struts": iso},
        "walls": {"count": len(fine.wall_struts), "max_measure": float(fine.wall_measure.max(initial=0.0))},
        "balance": {"fine": _balance_summary(fine), "coarse": _balance_summary(coarse),
                    "ratio": coarse.residual_max / fine.residual_max if fine.residual_max > 0 else math.inf},
        "measure": {"min": float(mu.min(initial=0.0)), "max": float(mu.max(initial=0.0)), "total": float(mu.sum())},
        "probe": {"trials": cfg.trials, "seed": cfg.seed, "epsilon": -probe.value if probe.active else None,
                  "max_min_derivative": probe.value, "all_negative": probe.all_negative},
        "symmetry": sym,
        "cycles": {"lengths": cyc_len, "max_residual": float(cyc_res.max(initial=0.0))},
        "self_intersections": [geo.self_intersections(s) for s in samples],
        "junction_error": max((e for c in link.components for pair in c.junction_errors() for e in pair), default=0.0),
        "metadata": _plain(link.metadata),
    }
    if "tip_gap" in link.metadata:
        report["tip_gap"] = float(link.metadata["tip_gap"])
    checks = {
        "thickness": abs(thick - 1.0) <= THICKNESS_TOL,
        "balance": fine.residual_max <= BALANCE_C * h and coarse.residual_max <= BALANCE_C * 2 * h,
        "measure_nonnegative": bool(np.all(mu >= 0)),
        "symmetry": all(v < SYMMETRY_TOL for v in sym.values()),
        "probe": probe.all_negative,
    }
    report["checks"] = checks
    report["passed"] = all(checks.values())
    return report


# ---------------------------------------------------------------------------
# commands


def _load(path: Path):
    """Return ('spec'|'geometry'|'report', payload) or ('csv', rows)."""
    if not path.exists():
        raise InputError(f"{path}: no such file")
    if path.suffix.lower() == ".csv":
        return "csv", read_csv(path)
    raw = parse_spec(path.read_text(encoding="utf-8"), str(path))
    kind = raw.get("kind")
    if kind in ("geometry", "report"):
        return kind, raw
    return "spec", validate_spec(raw, str(path))


def _spec_of(kind, payload, path) -> cons.FamilySpec:
    if kind == "spec":
        return payload
    if kind in ("geometry", "report"):
        return validate_spec(payload["spec"], f"{path}#spec")
    raise InputError(f"{path}: a configuration or geometry JSON is required")


def _build(spec: cons.FamilySpec) -> geo.Link:
    try:
        return cons.build(spec)
    except (cons.InvalidParameter, cc.QuadratureFailure, ValueError) as exc:
        raise BuildError(str(exc)) from exc


class BuildError(Exception):
    pass


def _stem(path: Path) -> str:
    name = path.name
    for suffix in (".geometry.json", ".report.json", ".json", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def cmd_build(cfg: RunConfig) -> int:
    kind, payload = _load(cfg.spec_path)
    spec = _spec_of(kind, payload, cfg.spec_path)
    link = _build(spec)
    h = cfg.h or spec.h or geo.DEFAULT_H
    doc = geometry_doc(spec, link, h)
    cfg.out.mkdir(parents=True, exist_ok=True)
    stem = _stem(cfg.spec_path)
    write_json(cfg.out / f"{stem}.geometry.json", doc)
    n = write_csv(cfg.out / f"{stem}.csv", csv_rows(doc))
    print(f"built {spec.family}: {len(link.components)} components, {n} nodes -> {cfg.out}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    kind, payload = _load(cfg.spec_path)
    spec = _spec_of(kind, payload, cfg.spec_path)
    if kind == "geometry" and cfg.h is None:
        cfg.h = float(payload["h"])
    link = _build(spec)
    report = verify_link(spec, link, cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.out / f"{_stem(cfg.spec_path)}.report.json", report)
    print(summarize(report))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_export(cfg: RunConfig) -> int:
    fmt = cfg.fmt or "csv"
    if fmt not in ("csv", "obj", "json"):
        raise InputError(f"unknown format {fmt!r}; expected csv, obj or json")
    kind, payload = _load(cfg.spec_path)
    if kind == "report":
        raise InputError(f"{cfg.spec_path}: reports cannot be exported as geometry")
    if kind == "csv":
        doc, rows = None, payload
    elif kind == "geometry":
        doc = payload
    else:
        spec = payload
        doc = geometry_doc(spec, _build(spec), cfg.h or spec.h or geo.DEFAULT_H)
    cfg.out.mkdir(parents=True, exist_ok=True)
    target = cfg.out / f"{_stem(cfg.spec_path)}.{'export.json' if fmt == 'json' else fmt}"
    if target.resolve() == cfg.spec_path.resolve():
        raise InputError(f"{target}: refusing to overwrite the input")
    if fmt == "json":
        if doc is None:
            raise InputError("json export needs a configuration or geometry JSON input")
        write_json(target, doc)
    elif fmt == "csv":
        write_csv(target, rows if doc is None else csv_rows(doc))
    else:
        write_obj(target, polylines_from_rows(rows) if doc is None else polylines_from_doc(doc))
    print(f"wrote {target}")
    return EXIT_OK


def summarize(report: dict) -> str:
    b = report["balance"]
    lines = [
        f"family        {report['spec']['family']}  h={report['h']:g}",
        f"thickness     {report['thickness']:.12f}",
        f"struts        {report['struts']['total']} ({report['struts']['isolated']} isolated)",
        f"residual      {b['fine']['residual_max']:.3e} at h, {b['coarse']['residual_max']:.3e} at 2h (ratio {b['ratio']:.2f})",
        f"measure       min {report['measure']['min']:.3e}  max {report['measure']['max']:.3e}",
        f"probe         max min-derivative {report['probe']['max_min_derivative']:.4g} over {report['probe']['trials']} trials",
    ]
    for iso in report["struts"]["isolated_struts"]:
        lines.append(f"isolated      {iso['a']} - {iso['b']} measure {iso['measure']:.6f}")
    if report["cycles"]["lengths"]:
        lines.append(f"strut cycles  {report['cycles']['lengths']}")
    if "tip_gap" in report:
        lines.append(f"tip gap       {report['tip_gap']:.6f}")
    for name, ok in report["checks"].items():
        lines.append(f"check {name:<20} {'pass' if ok else 'FAIL'}")
    return "\n".join(lines)


def cmd_report(cfg: RunConfig) -> int:
    kind, payload = _load(cfg.spec_path)
    if kind == "report":
        report = payload
    else:
        spec = _spec_of(kind, payload, cfg.spec_path)
        if kind == "geometry" and cfg.h is None:
            cfg.h = float(payload["h"])
        report = verify_link(spec, _build(spec), cfg)
    text = summarize(report)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{_stem(cfg.spec_path)}.report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


COMMANDS = {"build": cmd_build, "verify": cmd_verify, "export": cmd_export, "report": cmd_report}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="claspforge", description="Build and certify critical clasp configurations.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--spec", required=True, type=Path, help="configuration JSON, geometry JSON or polyline CSV")
    ap.add_argument("--h", type=float, default=None, help="node spacing")
    ap.add_argument("--tol", type=float, default=crit.STRUT_TOL, help="strut detection band above the thickness")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--out", type=Path, default=Path("."))
    ap.add_argument("--format", dest="fmt", default=None, help="csv, obj or json (export)")
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if ns.h is not None and ns.h <= 0 or ns.tol <= 0 or ns.trials < 1:
        print("error: --h and --tol must be positive and --trials at least 1", file=sys.stderr)
        return EXIT_INPUT
    cfg = RunConfig(ns.command, ns.spec, ns.h, ns.tol, ns.seed, ns.trials, ns.out, ns.fmt)
    try:
        return COMMANDS[ns.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BuildError as exc:
        print(f"build error: {exc}", file=sys.stderr)
        return EXIT_BUILD


if __name__ == "__main__":
    sys.exit(main())
