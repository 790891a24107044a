"""Max-displacement step mode: final J as a function of the per-iteration displacement bound."""
import argparse
from pathlib import Path

import numpy as np

from shapedesc import io
from shapedesc.optimizer import DescentConfig, run_descent
from shapedesc.problem import AnalyticProvider
from shapedesc.remesh import generate_annulus
from shapedesc.updates import UpdateMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--method", default="SP-SM")
    ap.add_argument("--max-iter", type=int, default=40)
    ap.add_argument("--out", default="out/step_sweep")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh = generate_annulus(1.0, 0.3, args.h)
    rows = []
    for frac in np.geomspace(0.005, 0.08, 5):
        tmax = float(frac * mesh.diameter())
        cfg = DescentConfig(UpdateMethod(args.method), step_mode="max-displacement", theta_max=tmax,
                            max_iter=args.max_iter, j_rel_tol=0.0, g_tol=0.0)
        res = run_descent(AnalyticProvider(), mesh, cfg)
        J = [r.J for r in res.records]
        monotone = bool(np.all(np.diff(J) <= 0))
        rows.append([tmax, float(J[-1]), int(monotone), res.reason])
        print(f"theta_max={tmax:.4f} J={J[-1]:.5f} monotone={monotone} {res.reason}")
    io.write_table(out / "step_sweep.csv", ["theta_max", "final_J", "monotone", "reason"], rows)


if __name__ == "__main__":
    main()
