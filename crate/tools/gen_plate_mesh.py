#!/usr/bin/env python3
"""Quarter plate with a circular hole, as a graded O-grid of triangles.

Writes the internal JSON mesh format. The hole is centred at the origin;
the plate quarter is [0, W]^2 minus the disc of radius r. Boundary tags:
hole, bottom (y = 0), left (x = 0), right (x = W), top (y = W).

Example:
    python3 tools/gen_plate_mesh.py --radius 0.216e-3 --half-width 16.2e-3 \
        --n-theta 96 --n-radial 60 --first-layer 0.002 -o data/meshes/plate_r0216.json
"""

import argparse
import json
import math


def radial_parameters(n_radial, first, total):
    """Geometric spacing s_0 = 0 < ... < s_n = 1 with first step `first/total`."""
    h0 = first / total
    lo, hi = 1.0 + 1e-9, 2.0
    for _ in range(200):
        q = 0.5 * (lo + hi)
        s = h0 * (q ** n_radial - 1.0) / (q - 1.0)
        if s > 1.0:
            hi = q
        else:
            lo = q
    q = 0.5 * (lo + hi)
    pts = [0.0]
    step = h0
    for _ in range(n_radial):
        pts.append(pts[-1] + step)
        step *= q
    scale = pts[-1]
    return [p / scale for p in pts]


def build(radius, half_width, n_theta, n_radial, first_layer):
    if n_theta % 2:
        raise SystemExit("n-theta must be even so the plate corner is a grid vertex")
    s_values = radial_parameters(n_radial, first_layer * radius, half_width - radius)
    vertices = []
    index = {}
    for i in range(n_theta + 1):
        theta = 0.5 * math.pi * i / n_theta
        c, s = math.cos(theta), math.sin(theta)
        if i == 0:
            c, s = 1.0, 0.0
        if i == n_theta:
            c, s = 0.0, 1.0
        inner = (radius * c, radius * s)
        if 2 * i == n_theta:
            outer = (half_width, half_width)
        elif 2 * i < n_theta:
            outer = (half_width, half_width * s / c)
        else:
            outer = (half_width * c / s, half_width)
        for j, t in enumerate(s_values):
            index[(i, j)] = len(vertices)
            vertices.append([inner[0] + t * (outer[0] - inner[0]), inner[1] + t * (outer[1] - inner[1])])
    cells = []
    for i in range(n_theta):
        for j in range(n_radial):
            a, b = index[(i, j)], index[(i, j + 1)]
            c, d = index[(i + 1, j + 1)], index[(i + 1, j)]
            # counterclockwise: radial outwards, then increasing angle
            if (i + j) % 2 == 0:
                cells.append([a, b, c])
                cells.append([a, c, d])
            else:
                cells.append([a, b, d])
                cells.append([b, c, d])
    tags = {"hole": [], "bottom": [], "left": [], "right": [], "top": []}
    for i in range(n_theta):
        tags["hole"].append([index[(i, 0)], index[(i + 1, 0)]])
        outer = "right" if 2 * i < n_theta else "top"
        tags[outer].append([index[(i, n_radial)], index[(i + 1, n_radial)]])
    for j in range(n_radial):
        tags["bottom"].append([index[(0, j)], index[(0, j + 1)]])
        tags["left"].append([index[(n_theta, j)], index[(n_theta, j + 1)]])
    return {"dim": 2, "vertices": vertices, "cells": cells, "boundary_tags": tags}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--half-width", type=float, default=16.2e-3)
    p.add_argument("--n-theta", type=int, default=96)
    p.add_argument("--n-radial", type=int, default=60)
    p.add_argument("--first-layer", type=float, default=0.002,
                   help="first radial cell size as a fraction of the radius")
    p.add_argument("-o", "--output", required=True)
    args = p.parse_args()
    mesh = build(args.radius, args.half_width, args.n_theta, args.n_radial, args.first_layer)
    with open(args.output, "w") as f:
        json.dump(mesh, f, separators=(",", ":"))
    print(f"{len(mesh['cells'])} cells, {len(mesh['vertices'])} vertices -> {args.output}")


if __name__ == "__main__":
    main()
