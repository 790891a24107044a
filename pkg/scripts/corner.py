"""Corner scenario: compare how closely DS and SP-SM reach the oracle corner on the negative x-axis."""
import argparse
from pathlib import Path

from shapedesc import io
from shapedesc.analysis import distance_to_point, oracle_corner
from shapedesc.mesh import boundary_loops
from shapedesc.optimizer import DescentConfig, run_descent
from shapedesc.problem import AnalyticProvider, IllustrativeProblem
from shapedesc.remesh import generate_annulus
from shapedesc.updates import UpdateMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.0125)
    ap.add_argument("--iterations", type=int, default=20)
    ap.add_argument("--out", default="out/corner")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prob = IllustrativeProblem(1.0, 0.0)
    corner = oracle_corner(prob)
    mesh = generate_annulus(1.0, 0.3, args.h)
    rows = []
    for method in (UpdateMethod("DS"), UpdateMethod("SP-SM"), UpdateMethod("PHD", p=4.0)):
        cfg = DescentConfig(method, max_iter=args.iterations, j_rel_tol=0.0, g_tol=0.0)
        res = run_descent(AnalyticProvider(prob), mesh, cfg)
        d = distance_to_point(res.mesh, corner)
        io.write_boundary_csv(boundary_loops(res.mesh), out / f"boundary_{method.tag}.csv")
        rows.append([method.label, float(res.records[-1].J), d, res.reason])
        print(f"{method.label:10s} J={res.records[-1].J:.5f} corner_distance={d:.4f} {res.reason}")
    io.write_table(out / "corner.csv", ["method", "final_J", "corner_distance", "reason"], rows)


if __name__ == "__main__":
    main()
