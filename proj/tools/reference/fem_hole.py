#!/usr/bin/env python3
"""Linear-elastic FEM reference for the plate/block with a central hole.

Quadratic Lagrange elements (9-node quads in 2-D, 27-node hexes in 3-D) on a
mapped mesh. The loaded strips |x| >= width/2 - strip carry u_x = +-u0; the
symmetry lines inside the strips pin u_y (and u_z) against rigid motion.

The solution is sampled at the points listed in a CSV with x,y[,z] columns
(typically a probe file written by `xpd run`) and written as
beta_deg,x,y[,z],ux,uy[,uz].
"""

import argparse
import csv
import math
import sys

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq
from scipy.spatial import cKDTree


def ring_faces(rings, first):
    if rings == 1:
        return np.array([0.0, 1.0])

    def total(q):
        return first * (q**rings - 1.0) / (q - 1.0) - 1.0 if abs(q - 1.0) > 1e-12 else first * rings - 1.0

    q = brentq(total, 1.0 + 1e-9, 10.0) if first * rings < 1.0 else 1.0
    sizes = first * q ** np.arange(rings) if q != 1.0 else np.full(rings, 1.0 / rings)
    faces = np.concatenate([[0.0], np.cumsum(sizes)])
    faces[-1] = 1.0
    return faces


class PlateMap:
    def __init__(self, width, height, radius, strip):
        self.a = 0.5 * width - strip
        self.b = 0.5 * height
        self.w = 0.5 * width
        self.r0 = radius

    def boundary(self, sector, t):
        a, b = self.a, self.b
        if sector == 0:
            return np.stack([np.full_like(t, a), -b + 2 * b * t], -1)
        if sector == 1:
            return np.stack([a - 2 * a * t, np.full_like(t, b)], -1)
        if sector == 2:
            return np.stack([np.full_like(t, -a), b - 2 * b * t], -1)
        return np.stack([-a + 2 * a * t, np.full_like(t, -b)], -1)

    def point(self, sector, t, g):
        phi = sector * 0.5 * math.pi - 0.25 * math.pi + 0.5 * math.pi * t
        c = np.stack([self.r0 * np.cos(phi), self.r0 * np.sin(phi)], -1)
        return c * (1 - g)[..., None] + self.boundary(sector, t) * g[..., None]


def quad_mesh(pm, n_arc, n_rad, n_strip):
    """Returns 2-D node coordinates and 9-node connectivity (tensor order)."""
    arc = 2 * math.pi * pm.r0 / (4 * n_arc)
    faces = ring_faces(n_rad, min(1.0, arc / (min(pm.a, pm.b) - pm.r0)))
    gq = np.empty(2 * n_rad + 1)
    gq[0::2] = faces
    gq[1::2] = 0.5 * (faces[:-1] + faces[1:])
    tq = np.linspace(0.0, 1.0, 2 * n_arc + 1)

    blocks = []
    for sector in range(4):
        G, T = np.meshgrid(gq, tq, indexing="ij")
        blocks.append(pm.point(sector, T, G))
    strip_x = np.linspace(pm.a, pm.w, 2 * n_strip + 1)
    ys = -pm.b + 2 * pm.b * tq
    for xs in (strip_x, -strip_x[::-1]):
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        blocks.append(np.stack([X, Y], -1))

    coords = []
    conn = []
    offset = 0
    for blk in blocks:
        ni, nj = blk.shape[:2]
        coords.append(blk.reshape(-1, 2))
        idx = np.arange(ni * nj).reshape(ni, nj) + offset
        for ei in range((ni - 1) // 2):
            for ej in range((nj - 1) // 2):
                conn.append(idx[2 * ei:2 * ei + 3, 2 * ej:2 * ej + 3].reshape(-1))
        offset += ni * nj
    coords = np.concatenate(coords)
    key = np.round(coords / 1e-11).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    return coords[first], inverse[np.array(conn)]


def lagrange2(s):
    return np.stack([0.5 * s * (s - 1), 1 - s * s, 0.5 * s * (s + 1)], -1)


def dlagrange2(s):
    return np.stack([s - 0.5, -2 * s, s + 0.5], -1)


def shape_functions(dim, pts):
    """N and dN/dxi at reference points, tensor ordering matching the connectivity."""
    Ls = [lagrange2(pts[:, k]) for k in range(dim)]
    dLs = [dlagrange2(pts[:, k]) for k in range(dim)]
    if dim == 2:
        N = np.einsum("pi,pj->pij", Ls[0], Ls[1]).reshape(len(pts), -1)
        d0 = np.einsum("pi,pj->pij", dLs[0], Ls[1]).reshape(len(pts), -1)
        d1 = np.einsum("pi,pj->pij", Ls[0], dLs[1]).reshape(len(pts), -1)
        return N, np.stack([d0, d1], 1)
    N = np.einsum("pi,pj,pk->pijk", Ls[0], Ls[1], Ls[2]).reshape(len(pts), -1)
    d0 = np.einsum("pi,pj,pk->pijk", dLs[0], Ls[1], Ls[2]).reshape(len(pts), -1)
    d1 = np.einsum("pi,pj,pk->pijk", Ls[0], dLs[1], Ls[2]).reshape(len(pts), -1)
    d2 = np.einsum("pi,pj,pk->pijk", Ls[0], Ls[1], dLs[2]).reshape(len(pts), -1)
    return N, np.stack([d0, d1, d2], 1)


def gauss(dim, order=3):
    x, w = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], -1)
    wts = np.prod(np.stack([g.reshape(-1) for g in wgrids], -1), -1)
    return pts, wts


def elasticity_matrix(E, nu, dim, regime):
    if dim == 3:
        lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        mu = E / (2 * (1 + nu))
        D = np.zeros((6, 6))
        D[:3, :3] = lam
        D[np.arange(3), np.arange(3)] += 2 * mu
        D[3:, 3:] = np.eye(3) * mu
        return D
    if regime == "plane-stress":
        c = E / (1 - nu * nu)
        return c * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, 0.5 * (1 - nu)]])
    c = E / ((1 + nu) * (1 - 2 * nu))
    return c * np.array([[1 - nu, nu, 0], [nu, 1 - nu, 0], [0, 0, 0.5 - nu]])


def assemble(coords, conn, D):
    dim = coords.shape[1]
    npe = conn.shape[1]
    pts, wts = gauss(dim)
    _, dN = shape_functions(dim, pts)
    X = coords[conn]  # (E, npe, dim)
    ndof = npe * dim
    Ke = np.zeros((len(conn), ndof, ndof))
    nstrain = 3 if dim == 2 else 6
    for q in range(len(pts)):
        J = np.einsum("ka,eal->ekl", dN[q], X)
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            raise RuntimeError("inverted element")
        G = np.linalg.solve(J, np.broadcast_to(dN[q], (len(conn),) + dN[q].shape))  # (E, dim, npe)
        B = np.zeros((len(conn), nstrain, ndof))
        if dim == 2:
            B[:, 0, 0::2] = G[:, 0]
            B[:, 1, 1::2] = G[:, 1]
            B[:, 2, 0::2] = G[:, 1]
            B[:, 2, 1::2] = G[:, 0]
        else:
            B[:, 0, 0::3] = G[:, 0]
            B[:, 1, 1::3] = G[:, 1]
            B[:, 2, 2::3] = G[:, 2]
            B[:, 3, 0::3] = G[:, 1]
            B[:, 3, 1::3] = G[:, 0]
            B[:, 4, 1::3] = G[:, 2]
            B[:, 4, 2::3] = G[:, 1]
            B[:, 5, 0::3] = G[:, 2]
            B[:, 5, 2::3] = G[:, 0]
        Ke += np.einsum("eip,ij,ejq->epq", B, D, B) * (detJ * wts[q])[:, None, None]
    dofs = (conn[:, :, None] * dim + np.arange(dim)).reshape(len(conn), -1)
    rows = np.repeat(dofs, ndof, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, ndof)).reshape(-1)
    n = coords.shape[0] * dim
    return sp.csr_matrix((Ke.reshape(-1), (rows, cols)), shape=(n, n))


def solve(coords, conn, D, pm, u0, tol=1e-12):
    dim = coords.shape[1]
    K = assemble(coords, conn, D)
    n = K.shape[0]
    u = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    eps = 1e-9
    right = coords[:, 0] >= pm.a - eps
    left = coords[:, 0] <= -pm.a + eps
    fixed[np.where(right)[0] * dim] = True
    u[np.where(right)[0] * dim] = u0
    fixed[np.where(left)[0] * dim] = True
    u[np.where(left)[0] * dim] = -u0
    pin = (right | left) & (np.abs(coords[:, 1]) < eps)
    fixed[np.where(pin)[0] * dim + 1] = True
    if dim == 3:
        pinz = (right | left) & (np.abs(coords[:, 2]) < eps)
        fixed[np.where(pinz)[0] * dim + 2] = True
    free = ~fixed
    rhs = -K[free][:, fixed] @ u[fixed]
    Kff = K[free][:, free].tocsc()
    if dim == 2:
        u[free] = spla.spsolve(Kff, rhs)
    else:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(Kff.tocsr(), B=None, max_coarse=500)
        residuals = []
        x = ml.solve(rhs, tol=tol, accel="cg", maxiter=2000, residuals=residuals)
        print(f"# amg-cg iterations {len(residuals)} relres {residuals[-1] / residuals[0]:.2e}", file=sys.stderr)
        u[free] = x
    return u.reshape(-1, dim)


def sample(coords, conn, disp, points):
    dim = coords.shape[1]
    centroids = coords[conn].mean(1)
    tree = cKDTree(centroids)
    out = np.zeros((len(points), dim))
    for p, x in enumerate(points):
        _, cand = tree.query(x, k=min(12, len(conn)))
        found = False
        for e in np.atleast_1d(cand):
            X = coords[conn[e]]
            s = np.zeros(dim)
            for _ in range(30):
                N, dN = shape_functions(dim, s[None])
                r = N[0] @ X - x
                J = dN[0] @ X
                step = np.linalg.solve(J.T, r)
                s -= step
                if np.linalg.norm(step) < 1e-14:
                    break
            if np.all(np.abs(s) <= 1 + 1e-9):
                N, _ = shape_functions(dim, s[None])
                out[p] = N[0] @ disp[conn[e]]
                found = True
                break
        if not found:
            raise RuntimeError(f"point {x} not inside the mesh")
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dim", type=int, choices=(2, 3), default=2)
    ap.add_argument("--points", required=True, help="CSV with x,y[,z] columns")
    ap.add_argument("--out", required=True)
    ap.add_argument("--width", type=float, default=1.0)
    ap.add_argument("--height", type=float, default=1.0)
    ap.add_argument("--radius", type=float, default=0.1)
    ap.add_argument("--strip", type=float, default=0.04)
    ap.add_argument("--depth", type=float, default=0.3)
    ap.add_argument("--u0", type=float, default=5e-4)
    ap.add_argument("--E", type=float, default=70e9)
    ap.add_argument("--nu", type=float, default=0.33)
    ap.add_argument("--regime", default="plane-stress", choices=("plane-stress", "plane-strain"))
    ap.add_argument("--arc", type=int, default=48, help="elements per quarter sector")
    ap.add_argument("--rings", type=int, default=40)
    ap.add_argument("--layers", type=int, default=6, help="elements through the depth (3-D)")
    args = ap.parse_args()

    pm = PlateMap(args.width, args.height, args.radius, args.strip)
    coords2, conn2 = quad_mesh(pm, args.arc, args.rings, 2)
    if args.dim == 2:
        coords, conn = coords2, conn2
    else:
        zq = np.linspace(-0.5 * args.depth, 0.5 * args.depth, 2 * args.layers + 1)
        n2 = len(coords2)
        coords = np.concatenate([np.column_stack([coords2, np.full(n2, z)]) for z in zq])
        conn = []
        for k in range(args.layers):
            layers = [conn2 + (2 * k + m) * n2 for m in range(3)]
            conn.append(np.stack(layers, -1).reshape(len(conn2), 27))
        conn = np.concatenate(conn)
    D = elasticity_matrix(args.E, args.nu, args.dim, args.regime)
    print(f"# {len(coords)} nodes, {len(conn)} elements", file=sys.stderr)
    disp = solve(coords, conn, D, pm, args.u0)

    with open(args.points) as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    keys = ["x", "y", "z"][: args.dim]
    pts = np.array([[float(r[k]) for k in keys] for r in rows if r["x"] != ""])
    vals = sample(coords, conn, disp, pts)
    comps = ["ux", "uy", "uz"][: args.dim]
    with open(args.out, "w", newline="") as fh:
        fh.write(f"# fem reference: quadratic elements arc={args.arc} rings={args.rings}"
                 f"{' layers=' + str(args.layers) if args.dim == 3 else ''} E={args.E:g} nu={args.nu:g}"
                 f" u0={args.u0:g} regime={args.regime if args.dim == 2 else '3d'}\n")
        w = csv.writer(fh)
        w.writerow(["beta_deg"] + keys + comps)
        for p, v in zip(pts, vals):
            beta = math.degrees(math.atan2(p[1], p[0])) % 360.0
            if beta > 360.0 - 1e-9:
                beta = 0.0
            w.writerow([f"{beta:.9g}"] + [f"{c:.12g}" for c in p] + [f"{c:.9g}" for c in v])


if __name__ == "__main__":
    main()
