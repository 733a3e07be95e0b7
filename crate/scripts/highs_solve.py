#!/usr/bin/env python3
"""Solve an exported LP file with HiGHS and write `name value` lines.

usage: highs_solve.py MODEL.lp SOLUTION.sol
"""
import sys

import highspy


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    lp_path, sol_path = sys.argv[1], sys.argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if h.readModel(lp_path) != highspy.HighsStatus.kOk:
        print(f"cannot read {lp_path}", file=sys.stderr)
        return 1
    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        print(f"solver status: {h.modelStatusToString(status)}", file=sys.stderr)
        return 1
    values = h.getSolution().col_value
    lp = h.getLp()
    with open(sol_path, "w") as out:
        out.write(f"# objective {h.getInfo().objective_function_value!r}\n")
        for name, value in zip(lp.col_names_, values):
            out.write(f"{name} {value!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
