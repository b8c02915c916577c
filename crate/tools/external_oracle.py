#!/usr/bin/env python3
"""Independent cross-check for exported SDPA sparse (.dat-s) files.

Parses the file, solves the feasibility SDP with an external interior-point
solver (CLARABEL via cvxpy, SCS fallback), and writes a JSON record with the
solution vector and per-block extreme eigenvalues. Test suites pin these
records as fixtures; regenerate with:

    python3 tools/external_oracle.py problem.dat-s record.json
"""

import hashlib
import json
import sys

import cvxpy as cp
import numpy as np


def parse_dat_s(text):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith(('"', '*'))]
    nvars = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(tok) for tok in lines[2].replace(',', ' ').split()] if nblocks else []
    # objective line follows; entries afterwards
    entries = []
    for ln in lines[4:]:
        mat, blk, i, j, val = ln.split()
        entries.append((int(mat), int(blk), int(i), int(j), float(val)))
    dims = [abs(s) for s in sizes]
    f = [[np.zeros((d, d)) for d in dims] for _ in range(nvars + 1)]
    for mat, blk, i, j, val in entries:
        f[mat][blk - 1][i - 1, j - 1] = val
        f[mat][blk - 1][j - 1, i - 1] = val
    return nvars, dims, f


def main():
    src, dst = sys.argv[1], sys.argv[2]
    text = open(src).read()
    nvars, dims, f = parse_dat_s(text)
    x = cp.Variable(nvars)
    constraints = []
    for b, d in enumerate(dims):
        expr = -cp.Constant(f[0][b])
        for k in range(nvars):
            if np.any(f[k + 1][b]):
                expr = expr + x[k] * cp.Constant(f[k + 1][b])
        if d == 1:
            constraints.append(expr[0, 0] >= 0)
        else:
            constraints.append(expr >> 0)
    prob = cp.Problem(cp.Minimize(0), constraints)
    status = None
    for solver in ("CLARABEL", "SCS"):
        try:
            prob.solve(solver=solver)
            status = prob.status
            if status in ("optimal", "optimal_inaccurate"):
                break
        except cp.error.SolverError:
            continue
    xv = np.asarray(x.value).ravel() if x.value is not None else np.zeros(nvars)
    margins = []
    for b, d in enumerate(dims):
        m = -f[0][b].copy()
        for k in range(nvars):
            m = m + xv[k] * f[k + 1][b]
        eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
        margins.append([float(eigs[0]), float(eigs[-1])])
    record = {
        "source": src.split("/")[-1],
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
        "solver_status": status,
        "feasible": status in ("optimal", "optimal_inaccurate"),
        "x": [float(v) for v in xv],
        "block_margins": margins,
    }
    with open(dst, "w") as fh:
        json.dump(record, fh, indent=1)
    print(f"{src}: {status}; worst block min-eig {min(m[0] for m in margins):.3e}")


if __name__ == "__main__":
    main()
