"""Synthetic benchmark systems.

* :func:`gen_rlc_ladder`: RLC transmission-line ladder, ``s E - A``, SISO,
  frequency is the only parameter.
* :func:`gen_thermal`: 2-D heat conduction with Robin boundary segments,
  ``s E - A0 + sum_i h_i A_i``.
* :func:`gen_second_order`: ``S + s^2 T`` with input ``B(s) = s Q`` and output
  ``Q^T``, two ports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coefficients import Const, Freq, Param
from .system import AffineParametricSystem

__all__ = [
    "LadderSpec",
    "ThermalSpec",
    "SecondOrderSpec",
    "gen_rlc_ladder",
    "gen_thermal",
    "gen_second_order",
    "generate",
    "KINDS",
]


@dataclass(frozen=True)
class LadderSpec:
    """RLC ladder with ``sections`` series R-L branches and shunt capacitors.

    Node 0 is the driven port (current source, voltage output). Section ``k``
    connects node ``k-1`` to node ``k`` through ``R`` and ``L`` in series and
    loads node ``k`` with ``C`` to ground. The far end is terminated by
    ``r_load``, the port node carries ``c_port``.

    ``spread`` > 0 varies the element values along the line by a seeded
    relative perturbation of that size.
    """

    sections: int = 100
    R: float = 0.1
    L: float = 1e-9
    C: float = 1e-12
    r_load: float = 50.0
    c_port: float = 1e-12
    spread: float = 0.0
    seed: int = 0
    freq_range_hz: tuple = (1e6, 1e9)

    def __post_init__(self):
        if self.sections < 1:
            raise ValueError("ladder needs at least one section")
        if min(self.R, self.L, self.C, self.r_load, self.c_port) <= 0:
            raise ValueError("element values must be positive")


def _section_values(spec: LadderSpec):
    k = spec.sections
    rng = np.random.default_rng(spec.seed)
    factors = 1.0 + spec.spread * rng.uniform(-1.0, 1.0, (3, k))
    return spec.R * factors[0], spec.L * factors[1], spec.C * factors[2]


def gen_rlc_ladder(spec: LadderSpec = LadderSpec()) -> AffineParametricSystem:
    """Modified nodal analysis of the ladder; state ``[v_0..v_k, i_1..i_k]``.

    KCL at node ``j`` and the branch equation of inductor ``j`` read

        C_j v_j' = i_j - i_{j+1}            (minus v_k / r_load at the end)
        L_j i_j' = v_{j-1} - v_j - R_j i_j

    so ``E`` is diagonal positive and ``A + A^T`` is negative semidefinite.
    """
    k = spec.sections
    R, L, C = _section_values(spec)
    nv = k + 1
    n = nv + k
    caps = np.concatenate([[spec.c_port], C])
    E = sp.diags(np.concatenate([caps, L]))

    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for j in range(1, k + 1):
        cur = nv + j - 1
        # inductor current leaves node j-1 and enters node j
        add(j - 1, cur, -1.0)
        add(j, cur, 1.0)
        add(cur, j - 1, 1.0)
        add(cur, j, -1.0)
        add(cur, cur, -R[j - 1])
    add(k, k, -1.0 / spec.r_load)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))

    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return AffineParametricSystem.from_descriptor(
        E, [(1.0, A)], B, B.T.copy(), freq_range_hz=spec.freq_range_hz, name=f"rlc_ladder_{k}"
    )


@dataclass(frozen=True)
class ThermalSpec:
    """Heat conduction on an ``nx x ny`` grid of the unit rectangle.

    Up to three Robin segments: top edge, bottom edge, and the two sides.
    A unit heat source is spread over the cells of the lower-left quarter,
    the output is the temperature of the cell at ``probe`` (fractions of the
    grid extents).
    """

    nx: int = 20
    ny: int = 15
    diffusivity: float = 1.0
    capacity: float = 1.0
    n_params: int = 3
    param_range: tuple = (1.0, 1e4)
    freq_range_hz: tuple = (1e-2, 1e2)
    probe: tuple = (0.5, 0.5)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least two cells per axis")
        if not 1 <= self.n_params <= 3:
            raise ValueError("between one and three boundary parameters")


def _laplacian_1d(m: int, h: float) -> sp.csr_matrix:
    main = np.full(m, 2.0)
    main[0] = main[-1] = 1.0
    return sp.diags([-np.ones(m - 1), main, -np.ones(m - 1)], [-1, 0, 1]) / h**2


def gen_thermal(spec: ThermalSpec = ThermalSpec()) -> AffineParametricSystem:
    """Cell-centred finite differences with insulated edges plus Robin terms.

    ``A0 = -kappa * Laplacian`` (symmetric), ``E = capacity * I``, and each
    ``A_i`` is the diagonal mask of the cells on boundary segment ``i``
    divided by the cell width across that edge.
    """
    nx, ny = spec.nx, spec.ny
    hx, hy = 1.0 / nx, 1.0 / ny
    Lx = _laplacian_1d(nx, hx)
    Ly = _laplacian_1d(ny, hy)
    lap = sp.kron(sp.eye(ny), Lx) + sp.kron(Ly, sp.eye(nx))
    n = nx * ny
    A0 = -spec.diffusivity * lap
    E = spec.capacity * sp.eye(n)

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    masks = [
        (iy == ny - 1) / hy,
        (iy == 0) / hy,
        ((ix == 0) | (ix == nx - 1)) / hx,
    ]
    # operator s E - A0 + sum_i h_i A_i
    terms = [(Freq(1), E), (Const(-1.0), A0)]
    names = []
    for i in range(spec.n_params):
        terms.append((Param(i), sp.diags(masks[i].astype(float))))
        names.append(f"h{i + 1}")

    src = (ix < nx // 2) & (iy < ny // 2)
    # unit total power: density over the quarter times the cell area sums to one
    B = (src / (src.sum() * hx * hy)).astype(float)[:, None]
    px = min(int(spec.probe[0] * nx), nx - 1)
    py = min(int(spec.probe[1] * ny), ny - 1)
    C = np.zeros((1, n))
    C[0, py * nx + px] = 1.0
    return AffineParametricSystem(
        terms,
        [(Const(1.0), B)],
        [(Const(1.0), C)],
        param_names=names,
        param_ranges=[spec.param_range] * spec.n_params,
        freq_range_hz=spec.freq_range_hz,
        name=f"thermal_{nx}x{ny}",
    )


@dataclass(frozen=True)
class SecondOrderSpec:
    """Resonator ``(S + s^2 T) x = s Q u`` on an ``nx x ny`` grid.

    ``S`` is a shifted 2-D Dirichlet Laplacian scaled by ``stiffness``, ``T``
    is a lumped mass matrix. The two ports are Gaussian bumps near opposite
    corners. ``damping`` > 0 adds an ``s D`` term with ``D = damping * Q Q^T``
    (radiation through the ports); the default zero keeps the lossless form.
    """

    nx: int = 20
    ny: int = 20
    stiffness: float = 1.0
    shift: float = 0.0
    mass: float = 1.0
    damping: float = 0.0
    freq_range_hz: tuple = (0.2, 2.0)
    port_width: float = 0.08

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least two cells per axis")
        if self.mass <= 0 or self.stiffness <= 0:
            raise ValueError("mass and stiffness must be positive")


def gen_second_order(spec: SecondOrderSpec = SecondOrderSpec()) -> AffineParametricSystem:
    nx, ny = spec.nx, spec.ny
    hx, hy = 1.0 / (nx + 1), 1.0 / (ny + 1)
    Lx = sp.diags([-np.ones(nx - 1), np.full(nx, 2.0), -np.ones(nx - 1)], [-1, 0, 1]) / hx**2
    Ly = sp.diags([-np.ones(ny - 1), np.full(ny, 2.0), -np.ones(ny - 1)], [-1, 0, 1]) / hy**2
    n = nx * ny
    S = spec.stiffness * (sp.kron(sp.eye(ny), Lx) + sp.kron(Ly, sp.eye(nx))) + spec.shift * sp.eye(n)
    T = spec.mass * sp.eye(n)

    x = (np.arange(nx) + 1) * hx
    y = (np.arange(ny) + 1) * hy
    X, Y = np.meshgrid(x, y)
    X, Y = X.ravel(), Y.ravel()
    w = spec.port_width
    Q = np.column_stack(
        [
            np.exp(-((X - 0.2) ** 2 + (Y - 0.3) ** 2) / w**2),
            np.exp(-((X - 0.8) ** 2 + (Y - 0.7) ** 2) / w**2),
        ]
    )
    Q /= np.linalg.norm(Q, axis=0)

    terms = [(Const(1.0), S), (Freq(2), T)]
    if spec.damping > 0:
        terms.append((Freq(1), sp.csc_matrix(spec.damping * (Q @ Q.T))))
    return AffineParametricSystem(
        terms,
        [(Freq(1), Q)],
        [(Const(1.0), Q.T.copy())],
        freq_range_hz=spec.freq_range_hz,
        name=f"second_order_{nx}x{ny}",
    )


_GENERATORS = {
    "rlc_ladder": (LadderSpec, gen_rlc_ladder),
    "thermal": (ThermalSpec, gen_thermal),
    "second_order": (SecondOrderSpec, gen_second_order),
}
KINDS = tuple(sorted(_GENERATORS))


def generate(kind: str, **options) -> AffineParametricSystem:
    """Build a benchmark by name with keyword options for its spec class."""
    try:
        spec_cls, gen = _GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown generator {kind!r}, expected one of {sorted(_GENERATORS)}") from None
    for key in ("freq_range_hz", "param_range", "probe"):
        if key in options:
            options[key] = tuple(options[key])
    return gen(spec_cls(**options))
