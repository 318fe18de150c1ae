"""Built-in evaluable models.

* A linear-elastic 3D bar-truss solver with a JSON definition format and a
  built-in 12-node / 36-bar tower (plus a cheaper, biased companion model).
* Analytic test models with closed-form CVaR used as oracles.

Truss coordinates use ``y`` as the vertical axis, so the per-node components
``u`` (x, horizontal) and ``v`` (y, vertical) are the in-plane pair used by
the maximum-displacement output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from . import _kernels
from .distributions import CHUNK, Marginal, RandomInputModel
from .errors import ConfigError, NoClosedFormError, SingularStiffnessError


@dataclass(frozen=True, eq=False)
class TrussModel:
    """Pin-jointed space truss.

    ``area_map[e]`` is the input component controlling element ``e``'s area,
    or -1 to use ``fixed_areas[e]``.  ``stiffness_factors`` scales each
    element's EA (1 for a plain truss); the low-fidelity companion uses it.
    """

    nodes: np.ndarray
    elements: np.ndarray
    youngs_modulus: float
    supports: np.ndarray
    loads: np.ndarray
    area_map: np.ndarray
    density: float = 0.0
    fixed_areas: np.ndarray | None = None
    stiffness_factors: np.ndarray | None = None
    name: str = "truss"
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        elements = np.asarray(self.elements, dtype=np.int64)
        n, ne = nodes.shape[0], elements.shape[0]
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise ConfigError("truss nodes must be an (n, 3) array")
        if elements.ndim != 2 or elements.shape[1] != 2:
            raise ConfigError("truss elements must be an (e, 2) array of node indices")
        if elements.min() < 0 or elements.max() >= n:
            raise ConfigError("element references an unknown node")
        supports = np.asarray(self.supports, dtype=bool).reshape(n, 3)
        loads = np.asarray(self.loads, dtype=float).reshape(n, 3)
        area_map = np.asarray(self.area_map, dtype=np.int64).ravel()
        if area_map.shape[0] != ne:
            raise ConfigError("area_map needs one entry per element")
        fixed = np.ones(ne) if self.fixed_areas is None else np.asarray(self.fixed_areas, dtype=float)
        if np.any((area_map < 0) & ~(fixed > 0)):
            raise ConfigError("elements without an input component need a positive fixed area")
        factors = np.ones(ne) if self.stiffness_factors is None else np.asarray(self.stiffness_factors, dtype=float)
        if not self.youngs_modulus > 0:
            raise ConfigError("Young's modulus must be positive")
        for name, val in [("nodes", nodes), ("elements", elements), ("supports", supports),
                          ("loads", loads), ("area_map", area_map), ("fixed_areas", fixed),
                          ("stiffness_factors", factors)]:
            object.__setattr__(self, name, val)
        lengths = np.linalg.norm(nodes[elements[:, 1]] - nodes[elements[:, 0]], axis=1)
        if np.any(lengths <= 0):
            raise ConfigError("zero-length element")

    @property
    def n_inputs(self) -> int:
        return int(self.area_map.max()) + 1 if np.any(self.area_map >= 0) else 0

    def _setup(self):
        if self._cache:
            return self._cache
        nodes, elems = self.nodes, self.elements
        ndof = 3 * nodes.shape[0]
        d = nodes[elems[:, 1]] - nodes[elems[:, 0]]
        lengths = np.linalg.norm(d, axis=1)
        cosines = d / lengths[:, None]
        free = np.flatnonzero(~self.supports.ravel())
        pos = -np.ones(ndof, dtype=np.int64)
        pos[free] = np.arange(free.size)
        nf = free.size
        # element stiffness per unit area on free DOFs
        kunit = np.zeros((elems.shape[0], nf, nf))
        # elongation operator: delta_e = B[e] . u_full
        B = np.zeros((elems.shape[0], ndof))
        for e, (a, b) in enumerate(elems):
            dofs = np.r_[3 * a : 3 * a + 3, 3 * b : 3 * b + 3]
            g = np.r_[-cosines[e], cosines[e]]
            B[e, dofs] = g
            ke = self.youngs_modulus * self.stiffness_factors[e] / lengths[e] * np.outer(g, g)
            p = pos[dofs]
            keep = p >= 0
            kunit[e][np.ix_(p[keep], p[keep])] += ke[np.ix_(keep, keep)]
        self._cache.update(
            ndof=ndof, free=free, kunit=kunit, B=B, lengths=lengths,
            force=self.loads.ravel()[free],
        )
        return self._cache

    def element_areas(self, inputs) -> np.ndarray:
        x = np.atleast_2d(np.asarray(inputs, dtype=float))
        areas = np.broadcast_to(self.fixed_areas, (x.shape[0], self.fixed_areas.size)).copy()
        mapped = self.area_map >= 0
        areas[:, mapped] = x[:, self.area_map[mapped]]
        return areas

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "nodes": self.nodes.tolist(),
            "elements": self.elements.tolist(),
            "youngs_modulus": self.youngs_modulus,
            "density": self.density,
            "supports": self.supports.astype(int).tolist(),
            "loads": self.loads.tolist(),
            "area_map": self.area_map.tolist(),
            "fixed_areas": self.fixed_areas.tolist(),
        }
        if np.any(self.stiffness_factors != 1.0):
            d["stiffness_factors"] = self.stiffness_factors.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrussModel":
        try:
            return cls(
                nodes=d["nodes"], elements=d["elements"], youngs_modulus=float(d["youngs_modulus"]),
                supports=d["supports"], loads=d["loads"], area_map=d["area_map"],
                density=float(d.get("density", 0.0)), fixed_areas=d.get("fixed_areas"),
                stiffness_factors=d.get("stiffness_factors"), name=d.get("name", "truss"),
            )
        except KeyError as exc:
            raise ConfigError(f"truss definition missing field {exc}") from None

    @classmethod
    def load(cls, path) -> "TrussModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TrussResponse:
    displacements: np.ndarray  # (L, n_nodes, 3)
    stresses: np.ndarray  # (L, n_elements)


def truss_solve(truss: TrussModel, areas) -> TrussResponse:
    """Nodal displacements and axial stresses for one or more area vectors.

    ``areas`` holds element areas, shape ``(n_elements,)`` or ``(L, n_elements)``.
    """
    a = np.atleast_2d(np.asarray(areas, dtype=float))
    if a.shape[1] != truss.elements.shape[0]:
        raise ConfigError(f"expected {truss.elements.shape[0]} areas, got {a.shape[1]}")
    if not np.all(a > 0):
        bad = np.argwhere(~(a > 0))[0]
        raise SingularStiffnessError(f"non-positive area {a[tuple(bad)]} at sample {bad[0]}, element {bad[1]}")
    c = truss._setup()
    L = a.shape[0]
    u_full = np.zeros((L, c["ndof"]))
    for s in range(0, L, CHUNK):
        u, ok = _kernels.truss_solve(a[s : s + CHUNK], c["kunit"], c["force"])
        if not ok.all():
            i = int(np.flatnonzero(~ok)[0]) + s
            raise SingularStiffnessError(f"stiffness matrix singular at sample {i} (mechanism?)")
        u_full[s : s + CHUNK, c["free"]] = u
    strain = (u_full @ c["B"].T) / c["lengths"]
    stresses = truss.youngs_modulus * truss.stiffness_factors * strain
    return TrussResponse(u_full.reshape(L, -1, 3), stresses)


def truss_outputs_y1_y2(truss: TrussModel, areas) -> tuple[np.ndarray, np.ndarray]:
    """(max |u|, |v| over nodes, max |axial stress| over elements) per sample."""
    r = truss_solve(truss, areas)
    y1 = np.max(np.abs(r.displacements[:, :, :2]), axis=(1, 2))
    y2 = np.max(np.abs(r.stresses), axis=1)
    return y1, y2


class TrussOutput:
    """Evaluator mapping input realizations (areas) to y1 or y2."""

    def __init__(self, truss: TrussModel, output: str = "y1"):
        if output not in ("y1", "y2"):
            raise ConfigError(f"truss output must be 'y1' or 'y2', got {output!r}")
        self.truss = truss
        self.output = output

    def __call__(self, x) -> np.ndarray:
        y1, y2 = truss_outputs_y1_y2(self.truss, self.truss.element_areas(x))
        return y1 if self.output == "y1" else y2


# Built-in tower: three stories of a tapered triangular prism.
TOWER_RADII = (60.0, 50.0, 40.0, 30.0)
TOWER_STORY_HEIGHT = 100.0
LOW_FIDELITY_E_FACTOR = 0.9
LOW_FIDELITY_BRACE_FACTOR = 0.7


def _tower_geometry():
    angles = np.deg2rad([90.0, 210.0, 330.0])
    nodes = []
    for level, r in enumerate(TOWER_RADII):
        for t in angles:
            nodes.append((r * math.cos(t), level * TOWER_STORY_HEIGHT, r * math.sin(t)))
    elements, braces = [], []
    for s in range(3):
        lo, hi = 3 * s, 3 * (s + 1)
        for i in range(3):
            elements.append((lo + i, hi + i))
            braces.append(False)
        for i in range(3):
            j = (i + 1) % 3
            elements.append((lo + i, hi + j))
            elements.append((lo + j, hi + i))
            braces.extend([True, True])
        for i in range(3):
            elements.append((hi + i, hi + (i + 1) % 3))
            braces.append(False)
    return np.array(nodes), np.array(elements), np.array(braces)


def builtin_truss36() -> tuple[TrussModel, TrussModel]:
    """The built-in 36-bar space truss and its low-fidelity companion.

    Geometry: 12 nodes on four levels (y = 0, 100, 200, 300 in) of a tapered
    triangular tower with circumradii 60, 50, 40, 30 in.  Each story has three
    vertical legs, an X-brace on each of its three faces and a horizontal
    ring triangle on top, giving 12 bars per story.  Nodes 1-3 (the base) are
    pinned, node 10 carries a 100 lb downward load, E = 1e7 psi, density
    0.1 lb/in^3.  Bar e has area X_{e+1}.

    The low-fidelity model uses 0.9 E everywhere and a further 0.7 factor on
    the diagonal braces, a cheap constitutive stand-in that is strongly
    correlated with, but biased against, the fine model.
    """
    nodes, elements, braces = _tower_geometry()
    supports = np.zeros((12, 3), dtype=bool)
    supports[:3] = True
    loads = np.zeros((12, 3))
    loads[9, 1] = -100.0
    fine = TrussModel(
        nodes, elements, 1.0e7, supports, loads, np.arange(36), density=0.1, name="truss36"
    )
    factors = np.where(braces, LOW_FIDELITY_E_FACTOR * LOW_FIDELITY_BRACE_FACTOR, LOW_FIDELITY_E_FACTOR)
    low = replace(fine, stiffness_factors=factors, name="truss36-low")
    return fine, low


def truss36_input_model(mean: float = 30.0, cov: float = 0.05, rho: float = 0.5) -> RandomInputModel:
    """Correlated Gaussian areas: mean 30, std 1.5, pairwise correlation 0.5."""
    return RandomInputModel.equicorrelated([Marginal.normal(mean, cov * mean)] * 36, rho)


def composite_input_model() -> RandomInputModel:
    """28-dim mixed law: nine independent uniforms and 19 correlated lognormal ply thicknesses."""
    bounds = [(35760, 53640), (10160, 15240), (0.238, 0.356), (4640, 6960),
              (816, 1224), (32, 48), (496, 744), (126, 168), (48, 72)]
    marginals = [Marginal.uniform(a, b) for a, b in bounds] + [Marginal.lognormal(0.144, 0.06)] * 19
    R = np.eye(28)
    R[9:, 9:] = 0.5
    np.fill_diagonal(R, 1.0)
    return RandomInputModel(tuple(marginals), R)


# ---------------------------------------------------------------------------
# analytic models


def gaussian_cvar(mu: float, sigma: float, beta: float) -> float:
    """CVaR of N(mu, sigma^2) at level beta."""
    z = float(ndtri(beta))
    return mu + sigma * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / (1.0 - beta)


@dataclass(frozen=True, eq=False)
class AnalyticModel:
    """Closed-form test functions.

    ``kind="linear"``: y = offset + weights . x on an all-normal input law,
    so y is Gaussian.  ``kind="constant"``: y = offset.  ``kind="uniform"``:
    y = x_k for a Uniform marginal k (``weights`` holds k).
    ``kind="polynomial"``: y = surrogate(x) for a given DdGpceSurrogate.
    """

    kind: str
    model: RandomInputModel | None = None
    weights: np.ndarray | None = None
    offset: float = 0.0
    surrogate: object = None

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "linear":
            return self.offset + x @ np.asarray(self.weights, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[0], float(self.offset))
        if self.kind == "uniform":
            return x[:, int(self.weights)].copy()
        if self.kind == "polynomial":
            return self.surrogate(x)
        raise NoClosedFormError(f"unknown analytic model kind {self.kind!r}")

    @property
    def mean(self) -> float:
        if self.kind == "linear":
            return float(self.offset + self.model.means @ self.weights)
        if self.kind == "constant":
            return float(self.offset)
        if self.kind == "uniform":
            return self.model.marginals[int(self.weights)].mean
        if self.kind == "polynomial":
            return self.surrogate.mean
        raise NoClosedFormError(self.kind)

    @property
    def std(self) -> float:
        if self.kind == "linear":
            w = np.asarray(self.weights, dtype=float)
            return float(math.sqrt(w @ self.model.covariance() @ w))
        if self.kind == "constant":
            return 0.0
        if self.kind == "uniform":
            return self.model.marginals[int(self.weights)].std
        if self.kind == "polynomial":
            return math.sqrt(self.surrogate.variance)
        raise NoClosedFormError(self.kind)


def linear_gaussian(model: RandomInputModel, weights: Sequence[float], offset: float = 0.0) -> AnalyticModel:
    return AnalyticModel("linear", model, np.asarray(weights, dtype=float), float(offset))


def analytic_cvar(model: AnalyticModel, beta: float) -> float:
    """Exact CVaR for Gaussian, uniform or constant outputs."""
    if not 0 < beta < 1:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    if model.kind == "constant":
        return float(model.offset)
    if model.kind == "linear":
        return gaussian_cvar(model.mean, model.std, beta)
    if model.kind == "uniform":
        m = model.model.marginals[int(model.weights)]
        if m.kind != "uniform":
            raise NoClosedFormError("uniform-kind model must reference a Uniform marginal")
        return 0.5 * (float(m.ppf(beta)) + m.b)
    raise NoClosedFormError(f"no closed-form CVaR for model kind {model.kind!r}")


class CountingEvaluator:
    """Wrap an evaluator and count how many model runs it performs."""

    def __init__(self, evaluator, label: str = "model"):
        self.evaluator = evaluator
        self.label = label
        self.calls = 0
        self.batches = 0

    def __call__(self, x):
        x = np.atleast_2d(x)
        self.calls += x.shape[0]
        self.batches += 1
        return self.evaluator(x)
