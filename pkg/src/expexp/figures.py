"""Deterministic figure rendering.

Five figure kinds:

* ``line``        -- the line p + t(i+alpha) inside a window
* ``spiral``      -- exp of the line (a logarithmic spiral)
* ``expexp``      -- exp(exp(line)) clipped log-safely to the window
* ``strip``       -- the strip |Re z| <= log R with a spiral component and its chord
* ``two-spirals`` -- spirals for two slopes plus successive projection images
                     on the imaginary axis

Every render returns the sampled polylines; when an output path is given the
figure is written as SVG with a fixed hash salt and no date metadata so that
identical configurations produce byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "expexp"

import matplotlib.pyplot as plt

from .spiral import DegenerateStrip, ObliqueLine, outward_indices, residue_chain, strip_segment

__all__ = ["FIGURE_KINDS", "RenderResult", "WindowEmpty", "render", "save_grid_figure",
           "save_masses_figure"]

FIGURE_KINDS = ("line", "spiral", "expexp", "strip", "two-spirals")
MAX_RESOLUTION = 10_000


class WindowEmpty(ValueError):
    """No curve point intersects the requested window."""


@dataclass(frozen=True)
class RenderResult:
    kind: str
    paths: dict          # name -> (n, 2) float arrays
    svg_path: str | None


def _window_tuple(window):
    xmin, xmax, ymin, ymax = map(float, window)
    if not (xmin < xmax and ymin < ymax) or not all(map(math.isfinite, (xmin, xmax, ymin, ymax))):
        raise ValueError("window must be finite with xmin < xmax, ymin < ymax")
    return xmin, xmax, ymin, ymax


def _clip_to_window(pts, window):
    xmin, xmax, ymin, ymax = window
    m = (pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)
    return pts[m]


def _line_path(line, window, resolution):
    xmin, xmax, ymin, ymax = window
    a = float(line.alpha)
    x0, y0 = float(line.p_re), float(line.p_im)
    span = max(xmax - xmin, ymax - ymin)
    t = np.linspace(-3 * span - abs(x0) - abs(y0), 3 * span + abs(x0) + abs(y0), resolution)
    pts = np.stack([x0 + a * t, y0 + t], axis=1)
    return _clip_to_window(pts, window)


def _spiral_path(line, window, resolution):
    xmin, xmax, ymin, ymax = window
    a = float(line.alpha)
    x0, y0 = float(line.p_re), float(line.p_im)
    r_hi = math.hypot(max(abs(xmin), abs(xmax)), max(abs(ymin), abs(ymax)))
    if a == 0:
        t = np.linspace(0.0, 2 * math.pi, resolution)
        r = math.exp(x0)
    else:
        r_lo = r_hi / 1e4
        t_hi = (math.log(r_hi) - x0) / a
        t_lo = (math.log(r_lo) - x0) / a
        if t_lo > t_hi:
            t_lo, t_hi = t_hi, t_lo
        t = np.linspace(t_lo, t_hi, resolution)
        r = np.exp(x0 + a * t)
    pts = np.stack([r * np.cos(y0 + t), r * np.sin(y0 + t)], axis=1)
    return _clip_to_window(pts, window)


def _expexp_paths(line, window, resolution):
    """Visible spokes of exp(exp(line)): log-safe, never evaluates points with
    Re Sigma outside the window's radius range."""
    xmin, xmax, ymin, ymax = window
    r_hi = math.hypot(max(abs(xmin), abs(xmax)), max(abs(ymin), abs(ymax)))
    lo_u, hi_u = -math.log(r_hi * 1e3), math.log(r_hi)
    a = float(line.alpha)
    K = min(256, max(8, resolution // 32))
    fracs, signs, logr, _ = residue_chain(line, K, guard_bits=32)
    pts_per = max(16, resolution // K)
    paths = {}
    for j in range(K):
        theta0 = 2 * math.pi * fracs[j]
        u = np.linspace(lo_u, hi_u, pts_per)
        th = theta0 - a * u
        r = np.exp(u)
        pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
        pts = _clip_to_window(pts, window)
        if len(pts):
            paths[f"spoke_{j}"] = pts
    return paths


def _strip_paths(line, R, k, resolution):
    seg = strip_segment(line, k, R, samples=min(resolution, 257))
    rel = seg.offsets()
    w = float(seg.w_im)
    pts = np.stack([rel[:, 0], rel[:, 1]], axis=1)
    a = float(line.alpha)
    lR = math.log(float(R))
    chord = np.array([[-lR, a * lR], [lR, -a * lR]])
    border = lR
    return {
        "component_rel": pts,
        "chord_rel": chord,
        "strip_left": np.array([[-border, pts[:, 1].min() - 1], [-border, pts[:, 1].max() + 1]]),
        "strip_right": np.array([[border, pts[:, 1].min() - 1], [border, pts[:, 1].max() + 1]]),
    }, w


def _two_spiral_paths(p_re, p_im, alpha0, alpha1, window, resolution, k_marks=(2, 3, 4)):
    paths = {}
    for name, al in (("spiral_a0", alpha0), ("spiral_a1", alpha1)):
        fake = _FloatLine(p_re, p_im, al)
        pts = _spiral_path(fake, window, resolution)
        if len(pts):
            paths[name] = pts
    # psi_k(J) images on the imaginary axis for the marked k
    for k in k_marks:
        d = (k + 0.5) * math.pi - p_im
        r0 = math.exp(p_re + d * alpha0)
        r1 = math.exp(p_re + d * alpha1)
        sgn = 1 if k % 2 == 0 else -1
        paths[f"psi_{k}"] = np.array([[0.0, sgn * r0], [0.0, sgn * r1]])
    return paths


class _FloatLine:
    """Duck-typed light line for float-only rendering paths."""

    def __init__(self, p_re, p_im, alpha):
        self.p_re = p_re
        self.p_im = p_im
        self.alpha = alpha


def render(kind: str, window, resolution: int = 2000, out=None, *,
           line: ObliqueLine | None = None, R=math.e, k: int = 2,
           alpha0: float = 0.2, alpha1: float = 0.3) -> RenderResult:
    """Sample one figure and optionally write a deterministic SVG."""
    if kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {kind!r}; pick one of {FIGURE_KINDS}")
    if not (2 <= resolution <= MAX_RESOLUTION):
        raise ValueError(f"resolution must lie in [2, {MAX_RESOLUTION}]")
    win = _window_tuple(window)

    if kind == "line":
        pts = _line_path(line, win, resolution)
        if not len(pts):
            raise WindowEmpty("the line misses the window")
        paths = {"line": pts}
    elif kind == "spiral":
        pts = _spiral_path(line, win, resolution)
        if not len(pts):
            raise WindowEmpty("the spiral misses the window")
        paths = {"spiral": pts}
    elif kind == "expexp":
        paths = _expexp_paths(line, win, resolution)
        if not paths:
            raise WindowEmpty("no spoke of exp(exp(line)) meets the window")
    elif kind == "strip":
        try:
            paths, _ = _strip_paths(line, R, k, resolution)
        except DegenerateStrip as exc:
            raise WindowEmpty(str(exc)) from exc
    else:
        paths = _two_spiral_paths(float(line.p_re) if line else 0.0,
                                  float(line.p_im) if line else 0.0,
                                  alpha0, alpha1, win, resolution)
        if not paths:
            raise WindowEmpty("no spiral point meets the window")

    svg_path = None
    if out is not None:
        svg_path = str(out)
        fig, ax = plt.subplots(figsize=(6, 6))
        for name, pts in sorted(paths.items()):
            style = "-" if not name.startswith("psi_") else "-"
            lw = 1.0 if not name.startswith(("strip_", "chord")) else 0.8
            ax.plot(pts[:, 0], pts[:, 1], style, linewidth=lw, label=name)
        ax.set_aspect("equal", adjustable="box")
        if kind not in ("strip",):
            ax.set_xlim(win[0], win[1])
            ax.set_ylim(win[2], win[3])
        ax.set_title(kind)
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return RenderResult(kind=kind, paths=paths, svg_path=svg_path)


def save_grid_figure(grid, out) -> str:
    """Coverage bitmap as an image, angle across, log radius up."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.imshow(grid.bitmap, origin="lower", aspect="auto", cmap="Greys",
              extent=(0.0, 2 * math.pi, -grid.log_R, grid.log_R))
    ax.set_xlabel("angle")
    ax.set_ylabel("log radius")
    ax.set_title(f"covered fraction {grid.covered_fraction():.4f}")
    fig.savefig(str(out), format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(out)


def save_masses_figure(estimates, out) -> str:
    """Bucket masses against T, with the limit levels marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    Ts = [e.T for e in estimates]
    for name, series, lim in (
        ("near 0", [e.mass_0 for e in estimates], 0.25),
        ("near 1", [e.mass_1 for e in estimates], 0.5),
        ("near inf", [e.mass_inf for e in estimates], 0.25),
        ("other", [e.mass_other for e in estimates], 0.0),
    ):
        ax.plot(Ts, series, "o-", label=name)
        ax.axhline(lim, linestyle=":", linewidth=0.6)
    ax.set_xlabel("T")
    ax.set_ylabel("mass")
    ax.legend()
    fig.savefig(str(out), format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(out)
