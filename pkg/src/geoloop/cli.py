"""Command-line interface: validate, loops, trace and render.

Exit codes: 0 valid / loop exists, 1 invalid data / loop blocked, 2 usage,
parse or internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .cckernel import TOL, Curvature, GeometryError, ModelPoint, apply_env_tolerances, geodesic_point_h, tangent_toward_h
from .tetra import (
    EDGES,
    TetraMetric,
    edge_name,
    face_name,
    parse_edge,
    parse_vertex,
    regular_from_angle,
    regular_from_edge,
    validate,
    vertex_name,
)

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input file or flags: exit code 2."""


def _schema(name: str) -> dict:
    text = resources.files("geoloop").joinpath("schemas", name).read_text()
    return json.loads(text)


TETRA_SCHEMA = _schema("tetra.schema.json")
LOOP_SCHEMA = _schema("loop_report.schema.json")


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} not allowed")


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from exc


def schema_errors(doc, schema) -> list:
    v = jsonschema.Draft202012Validator(schema)
    return sorted(
        ("/".join(str(p) for p in e.absolute_path) or "$", e.message) for e in v.iter_errors(doc)
    )


def check_tetra_doc(doc: dict):
    errs = schema_errors(doc, TETRA_SCHEMA)
    if errs:
        raise UsageError("; ".join(f"{p}: {m}" for p, m in errs))


def tetra_from_doc(doc: dict) -> tuple[TetraMetric | None, list]:
    """(metric, violations); the metric is None when no metric could be formed."""
    check_tetra_doc(doc)
    k = Curvature(doc["curvature"])
    if "edges" in doc:
        t = TetraMetric(k, {parse_edge(n): float(v) for n, v in doc["edges"].items()})
        return t, validate(t)
    reg = doc["regular"]
    try:
        if "face_angle" in reg:
            t = regular_from_angle(k, float(reg["face_angle"]))
        else:
            t = regular_from_edge(k, float(reg["edge"]))
    except GeometryError as exc:
        return None, [{"code": str(exc)}]
    return t, validate(t)


def numerics(max_residual=None) -> dict:
    return {"epsilons": asdict(TOL), "max_residual": max_residual}


def _dumps(doc) -> str:
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


# ---------------------------------------------------------------------------
# reports


def _tag_json(tag) -> dict:
    if tag[0] == "edge":
        return {"edge": edge_name(tag[1]), "t": float(tag[2])}
    if tag[0] == "vertex":
        return {"vertex": vertex_name(tag[1])}
    return {"interior": True}


def curve_report_parts(curve) -> tuple[list, dict]:
    segs = [{"face": face_name(p.face), "enter": _tag_json(p.enter), "exit": _tag_json(p.exit)} for p in curve.pieces]
    counts = {edge_name(e): 0 for e in EDGES}
    for e, _ in curve.crossings:
        counts[edge_name(e)] += 1
    return segs, counts


def _report(doc, vertex, typ, status, witness, curve=None, clearance=(), residual=None) -> dict:
    segs, counts = curve_report_parts(curve) if curve is not None else ([], {edge_name(e): 0 for e in EDGES})
    return {
        "tetra": doc,
        "vertex": vertex_name(vertex),
        "type": None if typ is None else [int(typ[0]), int(typ[1])],
        "status": status,
        "witness": witness,
        "length": None if curve is None else float(curve.length),
        "segments": segs,
        "signature": counts,
        "clearance": [
            {"vertex": vertex_name(r["vertex"]), "d": float(r["d"]), "bound": r["bound"], "margin": r["margin"]}
            for r in clearance
        ],
        "numerics": numerics(residual),
    }


def verify_report(rep: dict) -> list:
    """Re-check a loop report: schema, segment chaining and signature recount."""
    problems = [f"{p}: {m}" for p, m in schema_errors(rep, LOOP_SCHEMA)]
    if problems:
        return problems
    segs = rep["segments"]
    for i, (a, b) in enumerate(zip(segs, segs[1:])):
        ex, en = a["exit"], b["enter"]
        if ex.keys() != en.keys():
            problems.append(f"segment {i} does not chain")
        elif "edge" in ex and (ex["edge"] != en["edge"] or abs(ex["t"] - en["t"]) > 1e-9):
            problems.append(f"segment {i} does not chain")
        elif "vertex" in ex and ex["vertex"] != en["vertex"]:
            problems.append(f"segment {i} does not chain")
    recount = {k: 0 for k in rep["signature"]}
    for s in segs:
        if "edge" in s["exit"]:
            recount[s["exit"]["edge"]] = recount.get(s["exit"]["edge"], 0) + 1
    if recount != rep["signature"]:
        problems.append("signature does not match crossings")
    if sum(rep["signature"].values()) != sum("edge" in s["exit"] for s in segs):
        problems.append("signature total differs from crossing count")
    return problems


def _sphere_task(args):
    t, doc, apex, middle = args
    from .sph_loops import enumerate_candidates, resolve_candidate

    (c,) = [x for x in enumerate_candidates(t, apex) if x.middle == middle]
    c = resolve_candidate(c)
    if c.status == "exists":
        return _report(doc, apex, None, "exists", {"middle": vertex_name(middle)}, c.curve)
    w = {"middle": vertex_name(middle)}
    w.update({k: _plain(v) for k, v in (c.witness or {}).items()})
    return _report(doc, apex, None, "blocked", w)


def _plain(v):
    """JSON-friendly copy of witness values."""
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, (int, np.integer)) and 1 <= x <= 4 for x in v) and v[0] != v[1]:
        return edge_name(v)
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, np.ndarray):
        return [float(x) for x in v]
    if isinstance(v, ModelPoint):
        return [float(x) for x in v.hom]
    if isinstance(v, (str, bool)) or v is None:
        return v
    return str(v)


def _pq_task(args):
    t, doc, v, p, q = args
    from .hyp_loops import vertex_loop
    from .trace import junction_residual

    try:
        r = vertex_loop(t, p, q, v)
    except GeometryError as exc:
        msg = str(exc)
        if msg.startswith("vertex hit") or msg.startswith("loop construction failed"):
            kind = msg.split(":")[0]
            w = {"kind": kind, "attempts": _plain(getattr(exc, "attempts", []))}
            return _report(doc, v, (p, q), "blocked", w)
        return _report(doc, v, (p, q), "error", {"kind": "error", "message": msg})
    w = {"rotation": int(r.extra["rotation"]), "skipped": [edge_name(e) for e in r.skipped]}
    if r.geodesic_length is not None:
        w["geodesic_length"] = float(r.geodesic_length)
    return _report(doc, v, (p, q), "exists", w, r.loop, r.clearance, junction_residual(r.loop))


def _run(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(x) for x in tasks]


def parse_pq(text: str) -> tuple[int, int]:
    try:
        p, q = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--pq expects p,q (got {text!r})") from exc
    if p < 0 or q < 0:
        raise UsageError("--pq entries must be non-negative")
    if math.gcd(p, q) != 1:
        raise UsageError("not coprime")
    return p, q


def build_loop_reports(doc: dict, vertex=None, pq=None, all_vertices=False, jobs=1) -> list:
    t, problems = tetra_from_doc(doc)
    if problems:
        raise UsageError(f"invalid tetrahedron: {problems[0]['code']}")
    verts = [1, 2, 3, 4] if all_vertices else [parse_vertex(vertex or "A1")]
    if t.kappa == Curvature.SPHERICAL:
        if pq is not None:
            raise UsageError("--pq is not used for spherical tetrahedra")
        tasks = [(t, doc, v, m) for v in verts for m in (1, 2, 3, 4) if m != v]
        return _run(_sphere_task, tasks, jobs)
    if pq is None:
        if t.kappa == Curvature.HYPERBOLIC:
            raise UsageError("--pq is required for hyperbolic tetrahedra")
        pq = (0, 1)
    tasks = [(t, doc, v, pq[0], pq[1]) for v in verts]
    return _run(_pq_task, tasks, jobs)


# ---------------------------------------------------------------------------
# rendering

PROJECTIONS = {"stereographic": 1, "plane": 0, "poincare": -1}


def _projector(kappa: int, points):
    if kappa == 0:
        return lambda x: (float(x[0] / x[2]), float(x[1] / x[2]))
    if kappa < 0:
        return lambda x: (float(x[0] / (1.0 + x[2])), float(x[1] / (1.0 + x[2])))
    c = np.sum(points, axis=0)
    c = c / np.linalg.norm(c)
    a = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = a - (a @ c) * c
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return lambda x: (float(x @ e1 / (1.0 + x @ c)), float(x @ e2 / (1.0 + x @ c)))


def _arc(kappa: int, a, b, n: int = 24) -> list:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if kappa == 0:
        return [a + (b - a) * i / n for i in range(n + 1)]
    from .cckernel import dist_h

    ell = dist_h(kappa, a, b)
    if ell == 0:
        return [a, b]
    d = tangent_toward_h(kappa, a, b)
    return [geodesic_point_h(kappa, a, d, ell * i / n) for i in range(n + 1)]


def _path_d(pts, close=False) -> str:
    s = " ".join(f"{'M' if i == 0 else 'L'}{x:.9f},{-y:.9f}" for i, (x, y) in enumerate(pts))
    return s + (" Z" if close else "")


def render_svg(d, curve, projection: str) -> str:
    """SVG of a development: faces, gluing edges, vertex labels and the curve."""
    k = int(d.kappa)
    if PROJECTIONS[projection] != k:
        raise UsageError(f"projection {projection} does not match curvature {k}")
    glob = []
    for i, f in enumerate(d.faces):
        glob.append([d.image(i, v).hom for v in f])
    proj = _projector(k, np.array([p for tri in glob for p in tri]))
    faces = []
    for tri in glob:
        pts = []
        for a, b in zip(tri, tri[1:] + tri[:1]):
            pts.extend(proj(x) for x in _arc(k, a, b)[:-1])
        faces.append(pts)
    glue = []
    for i, e in enumerate(d.interior_edges):
        a, b = d.image(i, e[0]).hom, d.image(i, e[1]).hom
        glue.append([proj(x) for x in _arc(k, a, b)])
    labels = []
    for r in d.vertex_runs:
        if r.image is not None:
            x, y = proj(r.image.hom)
            labels.append((x, y, vertex_name(r.vertex)))
    cpts = []
    if curve is not None:
        for p in curve.pieces:
            m = d.placements[p.dev_index].matrix
            a, b = m @ p.segment.start.hom, m @ p.segment.end.hom
            seg = [proj(x) for x in _arc(k, a, b)]
            cpts.extend(seg if not cpts else seg[1:])
    allp = [q for f in faces for q in f] + cpts
    xs = [q[0] for q in allp]
    ys = [-q[1] for q in allp]
    pad = 0.05 * max(max(xs) - min(xs), max(ys) - min(ys), 1e-9)
    vb = (min(xs) - pad, min(ys) - pad, max(xs) - min(xs) + 2 * pad, max(ys) - min(ys) + 2 * pad)
    font = 0.03 * max(vb[2], vb[3])
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{vb[0]:.9f} {vb[1]:.9f} {vb[2]:.9f} {vb[3]:.9f}" width="800" height="800">',
        f'<g fill="none" stroke-width="{font / 10:.9f}">',
    ]
    if k < 0:
        out.append(f'<circle class="boundary" cx="0" cy="0" r="1" stroke="#999999"/>')
    for i, pts in enumerate(faces):
        out.append(f'<path class="face" data-face="{face_name(d.faces[i])}" stroke="#333333" fill="#eef3fb" d="{_path_d(pts, True)}"/>')
    for i, pts in enumerate(glue):
        out.append(f'<path class="glue" data-edge="{edge_name(d.interior_edges[i])}" stroke="#7799cc" d="{_path_d(pts)}"/>')
    if cpts:
        out.append(f'<path class="curve" stroke="#cc2222" d="{_path_d(cpts)}"/>')
    out.append("</g>")
    for x, y, name in labels:
        out.append(f'<text class="label" x="{x:.9f}" y="{-y:.9f}" font-size="{font:.9f}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _render_target(doc: dict, vertex, pq, middle):
    """(development, curve) to draw for a tetrahedron document."""
    t, problems = tetra_from_doc(doc)
    if problems:
        raise UsageError(f"invalid tetrahedron: {problems[0]['code']}")
    v = parse_vertex(vertex or "A1")
    if t.kappa == Curvature.SPHERICAL:
        from .sph_loops import enumerate_candidates, resolve_candidate

        m = parse_vertex(middle) if middle else min(u for u in (1, 2, 3, 4) if u != v)
        (c,) = [x for x in enumerate_candidates(t, v) if x.middle == m]
        c = resolve_candidate(c)
        return c.development, c.curve
    from .hyp_loops import strip, vertex_loop

    p, q = pq or (0, 1)
    try:
        r = vertex_loop(t, p, q, v, with_geodesic=False)
        return r.development, r.loop
    except GeometryError:
        d, _ = strip(t, p, q)
        return d, None


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    doc = load_json(args.path)
    t, problems = tetra_from_doc(doc)
    for p in problems:
        print(_dumps(_plain(p)))
    return EXIT_DATA if problems else EXIT_OK


def cmd_loops(args) -> int:
    doc = load_json(args.path)
    pq = parse_pq(args.pq) if args.pq else None
    reports = build_loop_reports(doc, args.vertex, pq, args.all, args.jobs)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in reports:
            tail = r["witness"].get("middle") if r["type"] is None else f"{r['type'][0]}-{r['type'][1]}"
            (out / f"loop_{r['vertex']}_{tail}.json").write_text(json.dumps(r, indent=2, allow_nan=False) + "\n")
    else:
        for r in reports:
            print(_dumps(r))
    if any(r["status"] == "error" for r in reports):
        return EXIT_USAGE
    if any(r["status"] == "blocked" for r in reports):
        return EXIT_DATA
    return EXIT_OK


def cmd_trace(args) -> int:
    from .trace import SurfacePoint, edge_point, interior_point, shoot

    doc = load_json(args.path)
    t, problems = tetra_from_doc(doc)
    if problems:
        raise UsageError(f"invalid tetrahedron: {problems[0]['code']}")
    if not (args.max_length > 0 and math.isfinite(args.max_length)):
        raise UsageError("--max-length must be positive")
    face = None
    if args.face:
        name = args.face.upper().replace("A", " ").split()
        if len(name) != 3 or len(set(name)) != 3:
            raise UsageError(f"bad face id {args.face!r}")
        try:
            face = tuple(sorted(parse_vertex(x) for x in name))
        except GeometryError as exc:
            raise UsageError(str(exc)) from exc
    try:
        if args.edge_point:
            e = parse_edge(args.edge_point[0])
            start = edge_point(t, e, float(args.edge_point[1]), face=face)
        elif face is not None:
            start = interior_point(t, face)
        else:
            raise UsageError("give --face and/or --edge-point")
        c = shoot(t, start, float(args.angle), max_length=args.max_length, max_steps=args.max_steps)
    except GeometryError as exc:
        raise UsageError(f"invalid start: {exc}") from exc
    segs, counts = curve_report_parts(c)
    closure = {"closed": c.closed}
    if c.closed:
        closure["period"] = float(c.length)
    out = {
        "stop_reason": c.stop_reason,
        "length": float(c.length),
        "crossings": [{"edge": edge_name(e), "t": float(s)} for e, s in c.crossings],
        "segments": segs,
        "closure": closure,
        "numerics": numerics(),
    }
    print(_dumps(out))
    return EXIT_USAGE if c.stop_reason == "error" else EXIT_OK


def cmd_render(args) -> int:
    doc = load_json(args.path)
    pq = parse_pq(args.pq) if args.pq else None
    vertex, middle = args.vertex, args.middle
    if "status" in doc and "tetra" in doc:
        problems = verify_report(doc)
        if problems:
            raise UsageError("; ".join(problems))
        vertex = doc["vertex"]
        if doc["type"] is not None:
            pq = tuple(doc["type"])
        else:
            middle = doc["witness"].get("middle", middle)
        doc = doc["tetra"]
    check_tetra_doc(doc)
    if PROJECTIONS[args.projection] != doc["curvature"]:
        raise UsageError(f"projection {args.projection} does not match curvature {doc['curvature']}")
    d, curve = _render_target(doc, vertex, pq, middle)
    svg = render_svg(d, curve, args.projection)
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoloop", description="Simple geodesic loops on tetrahedra.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a tetrahedron file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("loops", help="construct or rule out simple loops")
    p.add_argument("path")
    p.add_argument("--vertex", help="loop vertex (default A1)")
    p.add_argument("--pq", help="type p,q (hyperbolic and flat)")
    p.add_argument("--all", action="store_true", help="all four vertices")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for --all")
    p.add_argument("--out-dir", help="write one report file per loop here")
    p.set_defaults(func=cmd_loops)

    p = sub.add_parser("trace", help="follow a geodesic from a start point")
    p.add_argument("path")
    p.add_argument("--face")
    p.add_argument("--edge-point", nargs=2, metavar=("EDGE", "T"))
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--max-length", type=float, required=True)
    p.add_argument("--max-steps", type=int, default=100000)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("render", help="draw a development and its curve as SVG")
    p.add_argument("path", help="tetrahedron or loop report file")
    p.add_argument("--projection", choices=sorted(PROJECTIONS), required=True)
    p.add_argument("--out")
    p.add_argument("--vertex")
    p.add_argument("--middle", help="middle vertex of a spherical strip")
    p.add_argument("--pq")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        apply_env_tolerances()
        return args.func(args)
    except UsageError as exc:
        print(f"geoloop: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"geoloop: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeometryError as exc:
        print(f"geoloop: internal error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
