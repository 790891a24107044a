"""Oscillatory sensitivity: boundary roughness of VLB for decreasing smoothing strength A."""
import argparse
from pathlib import Path

from shapedesc import io
from shapedesc.analysis import total_turning
from shapedesc.mesh import boundary_loops
from shapedesc.optimizer import DescentConfig, run_descent
from shapedesc.problem import AnalyticProvider, IllustrativeProblem
from shapedesc.remesh import generate_annulus
from shapedesc.updates import UpdateMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.025)
    ap.add_argument("--iterations", type=int, default=30)
    ap.add_argument("--A", type=float, nargs="+", default=[1.0, 0.1, 0.01])
    ap.add_argument("--out", default="out/high_frequency")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prob = IllustrativeProblem(0.0, 1.0)
    mesh = generate_annulus(1.0, 0.3, args.h)
    rows = []
    for A in args.A:
        cfg = DescentConfig(UpdateMethod("VLB", A=A), max_iter=args.iterations, j_rel_tol=0.0, g_tol=0.0)
        res = run_descent(AnalyticProvider(prob), mesh, cfg)
        turn = total_turning(res.mesh)
        io.write_boundary_csv(boundary_loops(res.mesh), out / f"boundary_A{A:g}.csv")
        rows.append([A, float(res.records[-1].J), turn])
        print(f"A={A:<6g} J={res.records[-1].J:.5f} total_turning={turn:.2f}")
    io.write_table(out / "turning.csv", ["A", "final_J", "total_turning_rad"], rows)


if __name__ == "__main__":
    main()
