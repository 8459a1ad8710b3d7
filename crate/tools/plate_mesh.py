#!/usr/bin/env python3
"""Generate the coarse perforated-plate mesh asset (assets/plate.msh).

Plate [0, 4] x [0, 2] with a circular hole of radius 0.8 centred at (2, 1).
Target element sizes: 0.5 along the left and right edges, 0.2 below the hole,
0.05 above the hole. Uses a DistMesh-style force-equilibrium iteration over a
Delaunay triangulation; the output is written as Gmsh MSH 2.2 ASCII with
physical groups `left`, `right`, `bottom`, `top`, `hole` and `plate`.

The Rust code never calls this script. It exists so the committed asset can be
regenerated byte-for-byte (fixed seed).
"""

import sys

import numpy as np
from scipy.spatial import Delaunay

L, H = 4.0, 2.0
CX, CY, R = 2.0, 1.0, 0.8
H_EDGE, H_BELOW, H_ABOVE = 0.5, 0.2, 0.05
GRADING = 0.3
GEPS = 1e-3 * H_ABOVE


def dist(p):
    x, y = p[:, 0], p[:, 1]
    d_rect = -np.minimum(np.minimum(x, L - x), np.minimum(y, H - y))
    d_circ = R - np.hypot(x - CX, y - CY)
    return np.maximum(d_rect, d_circ)


def hole_size(p):
    # smooth blend from H_BELOW at the bottom of the hole to H_ABOVE at the top
    s = np.clip((p[:, 1] - CY) / R, -1.0, 1.0)
    w = 0.5 * (1.0 + s)
    return H_BELOW * (1.0 - w) + H_ABOVE * w


def size(p):
    r = np.hypot(p[:, 0] - CX, p[:, 1] - CY) - R
    h = hole_size(p) + GRADING * np.maximum(r, 0.0)
    return np.minimum(h, H_EDGE)


def project(p):
    d = dist(p)
    out = d > 0
    if np.any(out):
        q = p[out]
        dx = (dist(q + [GEPS, 0]) - d[out]) / GEPS
        dy = (dist(q + [0, GEPS]) - d[out]) / GEPS
        g2 = dx * dx + dy * dy
        g2[g2 == 0] = 1.0
        q = q - (d[out] / g2)[:, None] * np.stack([dx, dy], axis=1)
        p[out] = q
    return p


def curve_points(curve, closed):
    """Nodes along a parametric curve t in [0, 1], spaced by the size field."""
    t = np.linspace(0.0, 1.0, 4001)
    xy = curve(t)
    seg = np.hypot(*np.diff(xy, axis=0).T)
    mid = 0.5 * (xy[1:] + xy[:-1])
    s = np.concatenate([[0.0], np.cumsum(seg / size(mid))])
    count = max(int(round(s[-1])), 1)
    targets = np.linspace(0.0, s[-1], count + 1)
    if closed:
        targets = targets[:-1]
    return curve(np.interp(targets, s, t))


def boundary_points():
    pts = []
    corners = np.array([(0, 0), (L, 0), (L, H), (0, H)], dtype=float)
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        seg = curve_points(lambda t, a=a, b=b: a + t[:, None] * (b - a), closed=False)
        pts.append(seg[:-1])

    def circle(t):
        th = -0.5 * np.pi + 2.0 * np.pi * t
        return np.stack([CX + R * np.cos(th), CY + R * np.sin(th)], axis=1)

    pts.append(curve_points(circle, closed=True))
    return np.vstack(pts)


def distmesh(seed=7, iters=400):
    rng = np.random.default_rng(seed)
    pfix = boundary_points()
    h0 = H_ABOVE
    xs = np.arange(0, L + h0, h0)
    ys = np.arange(0, H + h0 * np.sqrt(3) / 2, h0 * np.sqrt(3) / 2)
    X, Y = np.meshgrid(xs, ys)
    X[1::2, :] += h0 / 2
    p = np.stack([X.ravel(), Y.ravel()], axis=1)
    p = p[dist(p) < -GEPS]
    r0 = 1.0 / size(p) ** 2
    keep = rng.random(len(p)) < r0 / r0.max()
    p = p[keep]
    # drop interior candidates too close to the fixed boundary nodes
    p = p[dist(p) < -0.3 * size(p)]
    p = np.vstack([pfix, p])
    nfix = len(pfix)

    pold = np.inf
    tri = None
    for _ in range(iters):
        if np.max(np.hypot(*(p - pold).T)) > 0.1 * h0 if np.ndim(pold) else True:
            pold = p.copy()
            tri = Delaunay(p).simplices
            cent = p[tri].mean(axis=1)
            tri = tri[dist(cent) < -GEPS]
            bars = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            bars = np.unique(np.sort(bars, axis=1), axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        length = np.hypot(vec[:, 0], vec[:, 1])
        hbars = size((p[bars[:, 0]] + p[bars[:, 1]]) / 2)
        l0 = hbars * 1.2 * np.sqrt(np.sum(length**2) / np.sum(hbars**2))
        f = np.maximum(l0 - length, 0)
        fvec = (f / length)[:, None] * vec
        ftot = np.zeros_like(p)
        np.add.at(ftot, bars[:, 0], fvec)
        np.add.at(ftot, bars[:, 1], -fvec)
        ftot[:nfix] = 0
        p = p + 0.2 * ftot
        p[nfix:] = project(p[nfix:])
        move = np.max(np.hypot(*(0.2 * ftot[dist(p) < -GEPS]).T), initial=0.0)
        if move < 1e-4 * h0:
            break

    tri = Delaunay(p).simplices
    cent = p[tri].mean(axis=1)
    tri = tri[dist(cent) < -GEPS]
    # orient counterclockwise
    a = p[tri[:, 1]] - p[tri[:, 0]]
    b = p[tri[:, 2]] - p[tri[:, 0]]
    area = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    flip = area < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=int)
    remap[used] = np.arange(len(used))
    return p[used], remap[tri]


def boundary_edges(p, tri):
    edges = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    bnd = {tuple(e) for e in uniq[counts == 1]}
    # keep triangle orientation for the boundary edges
    out = []
    for e in edges:
        if tuple(sorted(e)) in bnd:
            out.append(e)
    return np.array(out)


def classify(p, e):
    a, b = p[e[0]], p[e[1]]
    tol = 1e-9
    if abs(a[0]) < tol and abs(b[0]) < tol:
        return 1
    if abs(a[0] - L) < tol and abs(b[0] - L) < tol:
        return 2
    if abs(a[1]) < tol and abs(b[1]) < tol:
        return 3
    if abs(a[1] - H) < tol and abs(b[1] - H) < tol:
        return 4
    return 5


def write_msh(path, p, tri):
    edges = boundary_edges(p, tri)
    tags = [classify(p, e) for e in edges]
    order = np.lexsort((edges[:, 1], edges[:, 0], tags))
    names = {1: "left", 2: "right", 3: "bottom", 4: "top", 5: "hole", 6: "plate"}
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write("$PhysicalNames\n%d\n" % len(names))
        for k, v in names.items():
            dim = 2 if k == 6 else 1
            fh.write('%d %d "%s"\n' % (dim, k, v))
        fh.write("$EndPhysicalNames\n")
        fh.write("$Nodes\n%d\n" % len(p))
        for i, (x, y) in enumerate(p):
            fh.write("%d %.17g %.17g 0\n" % (i + 1, x, y))
        fh.write("$EndNodes\n")
        fh.write("$Elements\n%d\n" % (len(edges) + len(tri)))
        k = 1
        for j in order:
            e = edges[j]
            fh.write("%d 1 2 %d %d %d %d\n" % (k, tags[j], tags[j], e[0] + 1, e[1] + 1))
            k += 1
        for t in tri:
            fh.write("%d 2 2 6 6 %d %d %d\n" % (k, t[0] + 1, t[1] + 1, t[2] + 1))
            k += 1
        fh.write("$EndElements\n")


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "assets/plate.msh"
    p, tri = distmesh()
    # snap boundary nodes exactly onto their curves
    p[np.abs(p[:, 0]) < 1e-9, 0] = 0.0
    p[np.abs(p[:, 0] - L) < 1e-9, 0] = L
    p[np.abs(p[:, 1]) < 1e-9, 1] = 0.0
    p[np.abs(p[:, 1] - H) < 1e-9, 1] = H
    write_msh(out, p, tri)
    a = p[tri[:, 1]] - p[tri[:, 0]]
    b = p[tri[:, 2]] - p[tri[:, 0]]
    area = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    print("nodes %d triangles %d min area %.3e total area %.6f" % (len(p), len(tri), area.min(), area.sum()))


if __name__ == "__main__":
    main()
