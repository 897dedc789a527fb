"""Command-line front end: instance generation, solving, benchmarking, rendering.

    rearrange gen --family random --n 20 --rho 0.3 --out inst.json
    rearrange solve inst.json --cfg RBM-SP-BST-PP --out plan.json
    rearrange bench --family random --n 20..100:20 --rho 0.3 --cfg RBM-SP-BST --out rows.csv
    rearrange render inst.json plan.json --out frames.svg
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .depgraph import build
from .geometry import Disc, Pose, rect_corners
from .model import (
    GenerationTimeout, Instance, SchemaError, gen_dense_small, gen_lattice, gen_random,
    load_instance, load_plan, save_instance, save_plan, validate_plan,
)
from .planner import SolverConfig, solve

log = logging.getLogger("rearrange")

FAMILIES = ("random", "lattice", "dense-small")
CSV_HEADER = ["family", "n", "rho", "cfg", "success", "mean_time", "mean_actions_ratio", "mean_checks"]
SEED_STRIDE = 100_003  # keeps per-point seed blocks apart


# ---------------------------------------------------------------------------
# instance families

def lattice_shape(n: int) -> tuple[int, int]:
    """Most square rows x cols grid with exactly n cells."""
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    return rows, n // rows


def make_instance(family: str, n: int, rho: float, shape: str, seed: int) -> Instance:
    if family == "random":
        return gen_random(n, rho, shape, seed=seed)
    if family == "dense-small":
        return gen_dense_small(n, seed)
    if family == "lattice":
        rows, cols = lattice_shape(n)
        return gen_lattice(rows, cols, seed)
    raise ValueError(f"unknown family {family!r}")


def parse_ints(tokens) -> list[int]:
    """Accepts ``5``, ``5,6,7``, ``5..8`` and ``20..100:20``."""
    out = []
    for tok in tokens:
        for part in str(tok).split(","):
            if not part:
                continue
            if ".." in part:
                lo, rest = part.split("..", 1)
                hi, _, step = rest.partition(":")
                out += list(range(int(lo), int(hi) + 1, int(step or 1)))
            else:
                out.append(int(part))
    return out


def parse_floats(tokens) -> list[float]:
    return [float(p) for tok in tokens for p in str(tok).split(",") if p]


# ---------------------------------------------------------------------------
# benchmarking

@dataclass
class BenchSpec:
    family: str = "random"
    ns: list = field(default_factory=lambda: [20])
    rhos: list = field(default_factory=lambda: [0.3])
    cfgs: list = field(default_factory=lambda: ["RBM-SP-BST"])
    shape: str = "disc"
    trials: int = 30
    time_limit: float = 300.0
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")

    def points(self):
        # dense-small and lattice fix density themselves; rho only labels the row
        for n in self.ns:
            for rho in self.rhos:
                for cfg in self.cfgs:
                    yield n, rho, cfg

    def trial_seed(self, n: int, rho: float, k: int) -> int:
        rho_key = int(round(rho * 1000))
        return self.seed + SEED_STRIDE * (n * 1000 + rho_key) + k


@dataclass
class BenchRow:
    family: str
    n: int
    rho: float
    cfg: str
    success: float
    mean_time: float | None
    mean_actions_ratio: float | None
    mean_checks: float | None


def run_trial(job: dict) -> dict:
    """One seeded solve; instance and solver share the trial seed."""
    seed = job["seed"]
    rec = dict(job)
    try:
        inst = make_instance(job["family"], job["n"], job["rho"], job["shape"], seed)
    except GenerationTimeout as e:
        rec.update(status="generation-timeout", error=str(e))
        return rec
    cfg = SolverConfig.parse(job["cfg"], seed=seed, max_time=job["time_limit"])
    out = solve(inst, cfg)
    rec.update(status=out.status, time_s=out.stats.get("time_s"),
               checks=out.stats.get("collision_checks"), actions=None)
    if out.solved:
        report = validate_plan(out.plan, inst)
        if not report.ok:
            rec.update(status="invalid", error=str(report))
        else:
            rec["actions"] = len(out.plan)
    return rec


def _mean(xs):
    return sum(xs) / len(xs) if xs else None


def summarize(spec: BenchSpec, records: list[dict]) -> list[BenchRow]:
    rows = []
    for n, rho, cfg in spec.points():
        mine = [r for r in records if r["n"] == n and r["rho"] == rho and r["cfg"] == cfg]
        ok = [r for r in mine if r["status"] == "solved"]
        rows.append(BenchRow(
            spec.family, n, rho, cfg,
            success=len(ok) / len(mine) if mine else 0.0,
            mean_time=_mean([r["time_s"] for r in ok]),
            mean_actions_ratio=_mean([r["actions"] / n for r in ok]),
            mean_checks=_mean([r["checks"] for r in ok]),
        ))
    return rows


def worker_count() -> int:
    env = os.environ.get("REARRANGE_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_bench(spec: BenchSpec, workers: int | None = None) -> tuple[list[BenchRow], list[dict]]:
    jobs = []
    for n, rho, cfg in spec.points():
        for k in range(spec.trials):
            jobs.append(dict(family=spec.family, n=n, rho=rho, cfg=cfg, shape=spec.shape,
                             time_limit=spec.time_limit, trial=k, seed=spec.trial_seed(n, rho, k)))
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        records = [run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_trial, jobs))
    # completion order never matters: merge by key
    records.sort(key=lambda r: (r["n"], r["rho"], r["cfg"], r["seed"]))
    for r in records:
        if r["status"] != "solved":
            log.warning("trial %s n=%d rho=%g seed=%d: %s", r["cfg"], r["n"], r["rho"], r["seed"], r["status"])
    return summarize(spec, records), records


def write_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(["" if v is None else v for v in asdict(r).values()])


def write_manifest(spec: BenchSpec, records: list[dict], path) -> None:
    data = {"spec": asdict(spec), "seed_stride": SEED_STRIDE,
            "seeds": sorted({r["seed"] for r in records}), "trials": records}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


# ---------------------------------------------------------------------------
# rendering

GREEN, CYAN = "#3cb44b", "#42d4f4"


def _svg_shape(shape, pose: Pose, scale: float, height: float, style: str) -> str:
    def pt(x, y):
        return x * scale, (height - y) * scale

    if isinstance(shape, Disc):
        cx, cy = pt(pose.x, pose.y)
        return f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{shape.radius * scale:.3f}" {style}/>'
    pts = " ".join("%.3f,%.3f" % pt(x, y) for x, y in rect_corners(shape, pose))
    return f'<polygon points="{pts}" {style}/>'


def render_frames(inst: Instance, plan, scale: float = 40.0) -> str:
    """One SVG holding len(plan) + 1 frames stacked top to bottom.

    Goal footprints are cyan outlines; an object sitting on its start is
    green, on its goal cyan, and anywhere else (a buffer) a dashed outline.
    """
    ws = inst.workspace
    shapes = inst.shapes
    w, h = ws.width * scale, ws.height * scale
    gap = 20
    frames = []
    cur = list(inst.start)
    states = [tuple(cur)]
    for a in plan:
        cur[a.object] = a.target
        states.append(tuple(cur))
    for k, arr in enumerate(states):
        y0 = k * (h + gap)
        parts = [f'<g id="frame-{k}" transform="translate(0,{y0})">',
                 f'<rect x="0" y="0" width="{w:.3f}" height="{h:.3f}" fill="white" stroke="black"/>']
        for i, s in enumerate(shapes):
            parts.append(_svg_shape(s, inst.goal[i], scale, ws.height,
                                    f'fill="none" stroke="{CYAN}" stroke-width="1"'))
        for i, s in enumerate(shapes):
            p = arr[i]
            if p == inst.goal[i]:
                style = f'fill="{CYAN}" fill-opacity="0.8" stroke="black"'
            elif p == inst.start[i]:
                style = f'fill="{GREEN}" fill-opacity="0.8" stroke="black"'
            else:
                style = 'fill="none" stroke="black" stroke-dasharray="4,3"'
            parts.append(_svg_shape(s, p, scale, ws.height, style))
            px, py = p.x * scale, (ws.height - p.y) * scale
            parts.append(f'<text x="{px:.3f}" y="{py:.3f}" font-size="10" text-anchor="middle">{i}</text>')
        label = "start" if k == 0 else f"action {k}"
        parts.append(f'<text x="4" y="12" font-size="11">{label}</text></g>')
        frames.append("\n".join(parts))
    total_h = len(states) * (h + gap) - gap
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{total_h:.0f}" '
            f'data-frames="{len(states)}">')
    return head + "\n" + "\n".join(frames) + "\n</svg>\n"


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    ns = parse_ints(args.n)
    rho = parse_floats(args.rho)[0]
    for k, n in enumerate(ns):
        inst = make_instance(args.family, n, rho, args.shape, args.seed + k)
        out = args.out if len(ns) == 1 else _numbered(args.out, n)
        save_instance(inst, out)
        print(f"wrote {out} ({inst.n} objects, density {inst.density():.3f})")
    return 0


def _numbered(path: str, n: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_n{n}{ext or '.json'}"


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(build(inst.start, inst.goal, inst).to_dot())
    cfg = SolverConfig.parse(args.cfg, seed=args.seed, max_time=args.time_limit)
    out = solve(inst, cfg)
    stats = dict(out.stats, status=out.status, cfg=cfg.name, seed=args.seed)
    if not out.solved:
        print(f"{cfg.name}: {out.status} after {stats['time_s']:.2f}s", file=sys.stderr)
        if args.out:
            with open(args.out, "w") as fh:
                json.dump({"actions": [], "stats": stats}, fh, indent=2, default=str)
        return 2
    if args.out:
        save_plan(out.plan, args.out, stats)
    print(f"{cfg.name}: solved with {len(out.plan)} actions in {stats['time_s']:.2f}s, "
          f"{stats['collision_checks']} collision checks")
    return 0


def cmd_bench(args) -> int:
    spec = BenchSpec(family=args.family, ns=parse_ints(args.n), rhos=parse_floats(args.rho),
                     cfgs=[c for tok in args.cfg for c in tok.split(",") if c], shape=args.shape,
                     trials=args.trials, time_limit=args.time_limit, seed=args.seed)
    t0 = time.perf_counter()
    rows, records = run_bench(spec)
    write_csv(rows, args.out)
    manifest = os.path.splitext(args.out)[0] + ".manifest.json"
    write_manifest(spec, records, manifest)
    for r in rows:
        print(f"{r.family} n={r.n} rho={r.rho} {r.cfg}: success {r.success:.2f}")
    print(f"wrote {args.out} and {manifest} in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_render(args) -> int:
    inst = load_instance(args.instance)
    plan, _ = load_plan(args.plan) if args.plan else ([], {})
    svg = render_frames(inst, plan, scale=args.scale)
    with open(args.out, "w") as fh:
        fh.write(svg)
    print(f"wrote {args.out} ({len(plan) + 1} frames)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rearrange", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common_instance(sp, n_default):
        sp.add_argument("--family", choices=FAMILIES, default="random")
        sp.add_argument("--n", nargs="+", default=[n_default], help="counts, e.g. 20 or 20..100:20")
        sp.add_argument("--rho", nargs="+", default=["0.3"], help="densities, e.g. 0.3 or 0.1,0.5")
        sp.add_argument("--shape", choices=("disc", "rect"), default="disc")
        sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen", help="generate an instance file")
    common_instance(g, "10")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--cfg", default="RBM-SP-BST")
    s.add_argument("--time-limit", type=float, default=300.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--dot", help="also write the start-to-goal dependency graph in DOT format")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark grid and write a CSV")
    common_instance(b, "20")
    b.add_argument("--cfg", nargs="+", default=["RBM-SP-BST"])
    b.add_argument("--trials", type=int, default=30)
    b.add_argument("--time-limit", type=float, default=300.0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("render", help="render a plan as SVG frames")
    r.add_argument("instance")
    r.add_argument("plan", nargs="?")
    r.add_argument("--scale", type=float, default=40.0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SchemaError, ValueError, GenerationTimeout, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
