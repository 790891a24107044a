"""Non-smooth start: descent from a diamond-shaped outer boundary with and without remeshing."""
import argparse
from pathlib import Path

from shapedesc import io
from shapedesc.optimizer import DescentConfig, run_descent
from shapedesc.problem import AnalyticProvider
from shapedesc.remesh import generate_diamond_annulus
from shapedesc.updates import UpdateMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--max-iter", type=int, default=20)
    ap.add_argument("--remesh-every", type=int, default=0)
    ap.add_argument("--out", default="out/diamond")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh = generate_diamond_annulus(1.0, 0.3, args.h)
    rows = []
    for method in (UpdateMethod("DS"), UpdateMethod("SLB", A=0.1), UpdateMethod("SP-SM"), UpdateMethod("PHD", p=4.0)):
        cfg = DescentConfig(method, max_iter=args.max_iter, j_rel_tol=0.0, g_tol=0.0, remesh_every=args.remesh_every)
        res = run_descent(AnalyticProvider(), mesh, cfg)
        stalls = [r.iteration for r in res.records if r.diagnostics.get("stalled")]
        first = stalls[0] if stalls else -1
        rows.append([method.label, float(res.records[-1].J), first, res.reason])
        print(f"{method.label:10s} J={res.records[-1].J:.4f} first_stall={first} {res.reason}")
    io.write_table(out / "diamond.csv", ["method", "final_J", "first_stall_iter", "reason"], rows)


if __name__ == "__main__":
    main()
