"""Surface pieces of the unstable manifold.

A surface piece is the image of a parameter domain in the base plane
under a chart word (a finite composition of local-map powers and
transition maps), together with the domain restrictions accumulated along
the way: patch membership before each transition atom, chart membership
after each local run, and a side restriction cutting a bent disk along
its folding curve.

Pieces are parameterized over an elliptical domain sigma = center +
frame @ xi with |xi| <= 1; frames absorb the violent anisotropic
contraction of deep words so every piece is numerically well scaled.

The module also builds the actors of the homoclinic trip: the initial
sheet, the first bent disk, the recrossing sheet and its transverse
intersection with the local stable curve, the family of transversal
disks, the deeper bent disks, and the probe segment whose intersections
with the disks measure their heights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AtlasError, NumericsError
from .jets import MODE_FULL, MODE_JAC, MODE_VALUE, Jet2, plane_slope, planar_det, planar_det_gradient
from .model import (
    Atom,
    SystemSpec,
    WORD_GLOBAL,
    evaluate_word,
    global_map_inverse,
    local_map,
    local_powers,
    stable_curve_point,
    stable_curve_velocity,
    word_local,
    word_str,
    word_trace,
)

Array = np.ndarray

Constraint = tuple


@dataclass(frozen=True)
class SurfacePiece:
    """Image of an elliptical base-plane parameter domain under a word.

    ``height``, when set, is a callable (params, mode) -> (s, ds, d2s)
    replacing the flat base plane with a surface graph t = s(u, v) over
    the patch chart; the word then starts from that graph.
    """

    system: SystemSpec
    word: tuple[Atom, ...]
    center: Array
    frame: Array
    constraints: tuple[Constraint, ...]
    seed: Array
    label: str
    grid_n: int = 64
    height: object = None

    def params_of(self, xi: Array) -> Array:
        xi = np.asarray(xi, dtype=float)
        return self.center + np.einsum("ij,...j->...i", self.frame, xi)

    def jets(self, xi: Array, mode: str = MODE_FULL, check: bool = False) -> Jet2:
        """Jet of the word with respect to the scaled coordinates xi."""
        return _word_jet_in_frame(
            self.system, self.word, self.center, self.frame, xi, mode, check, self.height
        )

    def trace(self, xi: Array) -> list[Array]:
        return word_trace(self.system, self.word, self.params_of(xi), height=self.height)

    def constraint_ok(self, xi: Array, strict_margin: float = 0.0) -> Array:
        """Boolean mask of xi points satisfying domain and constraints."""
        xi = np.asarray(xi, dtype=float)
        trace = self.trace(xi)
        ok = np.linalg.norm(xi, axis=-1) <= 1.0 + 1e-9 - strict_margin
        for con in self.constraints:
            ok = ok & _constraint_mask(self, con, trace, xi, strict_margin)
        return ok

    def masks(self) -> "MaskBundle":
        return build_masks(self)

    def final_atom_count(self) -> int:
        return len(self.word)

    def describe(self) -> str:
        return f"{self.label}: {word_str(self.word)}"


def _word_jet_in_frame(
    system: SystemSpec,
    word: tuple[Atom, ...],
    center: Array,
    frame: Array,
    xi: Array,
    mode: str,
    check: bool,
    height=None,
) -> Jet2:
    params = center + np.einsum("ij,...j->...i", frame, np.asarray(xi, dtype=float))
    jet = evaluate_word(system, word, params, mode=mode, check=check, height=height)
    if jet.jac is None:
        return jet
    jac = jet.jac @ frame
    hess = None
    if jet.hess is not None:
        hess = np.einsum("...iab,aA,bB->...iAB", jet.hess, frame, frame)
    return Jet2(jet.value, jac, hess)


def _constraint_mask(piece: SurfacePiece, con: Constraint, trace: list[Array], xi: Array, strict: float) -> Array:
    system = piece.system
    a = system.local.a
    tr = system.transition
    kind = con[0]
    if kind == "clip":
        prefix = con[1]
        value = trace[prefix]
        rad = np.hypot(value[..., 0], value[..., 1])
        t = value[..., 2]
        tol = 1e-9 * a
        return (rad <= a * (1.0 + 1e-9) - strict * a) & (t >= -tol) & (t <= a * (1.0 + 1e-9))
    if kind == "patch":
        prefix = con[1]
        value = trace[prefix]
        off = np.hypot(value[..., 0] - tr.q_z.real, value[..., 1] - tr.q_z.imag)
        return off <= tr.patch_radius * (1.0 + 1e-9) - strict * tr.patch_radius
    if kind == "side":
        sign = con[1]
        params = trace[0]
        # side of the folding line of the first transition atom, measured
        # as the signed output-height offset from the fold height
        cb = math.cos(system.beta)
        sb = math.sin(system.beta)
        u0 = (params[..., 0] - tr.q_z.real) * cb + (params[..., 1] - tr.q_z.imag) * sb
        v0 = -(params[..., 0] - tr.q_z.real) * sb + (params[..., 1] - tr.q_z.imag) * cb
        side = tr.g * (u0 + tr.d * v0 / (2.0 * tr.c))
        scale = abs(tr.g) * tr.patch_radius
        return sign * side >= -1e-12 * scale - strict * scale
    raise ValueError(f"unknown constraint kind {kind!r}")


def side_value(system: SystemSpec, params: Array) -> Array:
    """Signed fold-side coordinate of base parameters (positive = upper sheet)."""
    tr = system.transition
    params = np.asarray(params, dtype=float)
    u0 = params[..., 0]
    v0 = params[..., 1]
    return tr.g * (u0 + tr.d * v0 / (2.0 * tr.c))


# --------------------------------------------------------------------------
# masks, components, propriety


@dataclass(frozen=True)
class MaskBundle:
    """Grid diagnostics of a piece: admissible cells, the component of the
    seed, and whether that component is a proper disk (its boundary lies on
    the chart side, i.e. every outside neighbor fails the final clip)."""

    xi_x: Array
    xi_y: Array
    inside: Array
    final_clip_ok: Array
    component: Array
    proper: bool
    cell_size: float

    def component_count(self) -> int:
        return int(np.sum(self.component))

    def cell_index(self, xi: Array) -> tuple[int, int]:
        ix = int(np.argmin(np.abs(self.xi_x - xi[0])))
        iy = int(np.argmin(np.abs(self.xi_y - xi[1])))
        return ix, iy

    def in_component(self, xi: Array) -> bool:
        ix, iy = self.cell_index(np.asarray(xi, dtype=float))
        return bool(self.component[ix, iy])

    def margin_cells(self, xi: Array) -> float:
        """Distance (in cells) from xi to the nearest non-component cell."""
        xi = np.asarray(xi, dtype=float)
        bad = ~self.component
        if not np.any(bad):
            return float(len(self.xi_x))
        bx, by = np.nonzero(bad)
        d = np.hypot(self.xi_x[bx] - xi[0], self.xi_y[by] - xi[1])
        return float(np.min(d) / self.cell_size)


def build_masks(piece: SurfacePiece) -> MaskBundle:
    n = piece.grid_n
    coords = np.linspace(-1.05, 1.05, n)
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    xi = np.stack([xx, yy], axis=-1)
    trace = piece.trace(xi)
    inside = np.linalg.norm(xi, axis=-1) <= 1.0 + 1e-9
    final_prefix = len(piece.word)
    final_ok = np.ones_like(inside)
    for con in piece.constraints:
        mask = _constraint_mask(piece, con, trace, xi, 0.0)
        inside = inside & mask
        if con[0] == "clip" and con[1] == final_prefix:
            final_ok = final_ok & mask
    seed_cell = _nearest_inside_cell(coords, inside, piece.seed)
    if seed_cell is None:
        raise AtlasError(f"{piece.label}: seed parameter is outside the admissible set")
    component = _flood_fill(inside, seed_cell)
    proper = _component_proper(component, inside, final_ok)
    cell = float(coords[1] - coords[0])
    return MaskBundle(coords, coords, inside, final_ok, component, proper, cell)


def _nearest_inside_cell(coords: Array, inside: Array, seed: Array) -> tuple[int, int] | None:
    if not np.any(inside):
        return None
    ix = int(np.argmin(np.abs(coords - seed[0])))
    iy = int(np.argmin(np.abs(coords - seed[1])))
    if inside[ix, iy]:
        return ix, iy
    good = np.nonzero(inside)
    d = np.hypot(coords[good[0]] - seed[0], coords[good[1]] - seed[1])
    k = int(np.argmin(d))
    cell = (int(good[0][k]), int(good[1][k]))
    # only accept a nearby fallback: the seed must lie in the component
    if d[k] > 3.0 * (coords[1] - coords[0]):
        return None
    return cell


def _flood_fill(inside: Array, seed_cell: tuple[int, int]) -> Array:
    component = np.zeros_like(inside)
    component[seed_cell] = True
    while True:
        grown = component.copy()
        grown[1:, :] |= component[:-1, :]
        grown[:-1, :] |= component[1:, :]
        grown[:, 1:] |= component[:, :-1]
        grown[:, :-1] |= component[:, 1:]
        grown &= inside
        if np.array_equal(grown, component):
            return component
        component = grown


def _component_proper(component: Array, inside: Array, final_ok: Array) -> bool:
    # cells adjacent to the component but not inside
    edge = np.zeros_like(component)
    edge[1:, :] |= component[:-1, :]
    edge[:-1, :] |= component[1:, :]
    edge[:, 1:] |= component[:, :-1]
    edge[:, :-1] |= component[:, 1:]
    outside_neighbors = edge & ~inside
    # the component may not touch the grid boundary
    if np.any(component[0, :]) or np.any(component[-1, :]) or np.any(component[:, 0]) or np.any(component[:, -1]):
        return False
    # every outside neighbor must fail the final chart clip
    return bool(np.all(~final_ok[outside_neighbors]))


# --------------------------------------------------------------------------
# Newton solves on pieces


def solve_planar(
    piece: SurfacePiece,
    target: complex,
    xi0: Array,
    tol: float = 1e-13,
    max_iter: int = 40,
) -> tuple[Array, float]:
    """Solve planar(word(xi)) = target; returns (xi, margin).

    The margin is the smallest singular value of the planar Jacobian in
    scaled coordinates at the solution.
    """
    xi = np.asarray(xi0, dtype=float).copy()
    target_vec = np.array([target.real, target.imag])
    scale = max(abs(target), piece.system.local.a)
    prev_res = math.inf
    stall = 0
    for _ in range(max_iter):
        jet = piece.jets(xi, MODE_JAC)
        f = jet.planar - target_vec
        res = float(np.linalg.norm(f))
        jac = jet.jac[:2, :]
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"{piece.label}: singular planar system while solving") from exc
        xi = xi - step
        step_norm = float(np.linalg.norm(step))
        if res <= tol * scale and step_norm <= 1e-11:
            break
        # deep words quantize the residual at a floor above tol * scale;
        # accept once it stalls there (neither halving nor growing) while
        # staying far below the chart scale
        stalled = 0.5 * prev_res <= res <= 1.25 * prev_res
        stall = stall + 1 if stalled else 0
        prev_res = res
        if step_norm <= 1e-12 or (stall >= 2 and res <= 1e-6 * scale):
            break
    else:
        raise NumericsError(f"{piece.label}: planar solve did not converge (residual {res:.3e})")
    jet = piece.jets(xi, MODE_JAC)
    margin = float(np.linalg.svd(jet.jac[:2, :], compute_uv=False)[-1])
    return xi, margin


def solve_surface_curve(
    piece: SurfacePiece,
    curve_point,
    curve_velocity,
    xi0: Array,
    tau0: float,
    tol: float = 1e-13,
    max_iter: int = 60,
) -> tuple[Array, float, float]:
    """Solve word(xi) = curve(tau); returns (xi, tau, margin).

    The margin is the smallest singular value of the column-normalized
    3x3 system [J_word | -curve'] at the solution, a scale-free measure of
    transversality.
    """
    xi = np.asarray(xi0, dtype=float).copy()
    tau = float(tau0)
    scale = piece.system.local.a
    res = np.inf
    prev_res = math.inf
    stall = 0
    for _ in range(max_iter):
        jet = piece.jets(xi, MODE_JAC)
        f = jet.value - curve_point(tau)
        res = float(np.linalg.norm(f))
        full = np.empty((3, 3))
        full[:, :2] = jet.jac
        full[:, 2] = -curve_velocity(tau)
        try:
            step = np.linalg.solve(full, f)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"{piece.label}: singular crossing system") from exc
        xi = xi - step[:2]
        tau = tau - step[2]
        step_norm = float(np.linalg.norm(step))
        if res <= tol * scale and step_norm <= 1e-10:
            break
        stalled = 0.5 * prev_res <= res <= 1.25 * prev_res
        stall = stall + 1 if stalled else 0
        prev_res = res
        if step_norm <= 1e-12 or (stall >= 2 and res <= 1e-6 * scale):
            break
    else:
        raise NumericsError(f"{piece.label}: crossing solve did not converge (residual {res:.3e})")
    jet = piece.jets(xi, MODE_JAC)
    full = np.empty((3, 3))
    full[:, :2] = jet.jac
    full[:, 2] = -curve_velocity(tau)
    norms = np.linalg.norm(full, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    margin = float(np.linalg.svd(full / norms, compute_uv=False)[-1])
    return xi, tau, margin


# --------------------------------------------------------------------------
# trip actors


@dataclass(frozen=True)
class TransversalCrossing:
    """A transverse intersection of a surface piece with a curve."""

    label: str
    xi: Array
    params: Array
    point: Array
    height: float
    margin: float


def initial_sheet(system: SystemSpec) -> SurfacePiece:
    """The bent image of the unstable patch under one transition map."""
    tr = system.transition
    frame = tr.patch_radius * np.eye(2)
    return SurfacePiece(
        system=system,
        word=(WORD_GLOBAL,),
        center=np.zeros(2),
        frame=frame,
        constraints=(("patch", 0), ("clip", 1)),
        seed=np.zeros(2),
        label="initial-sheet",
    )


def push_to_bent_disk(system: SystemSpec) -> SurfacePiece:
    """The first bent disk: the initial sheet pushed n0 steps forward and
    clipped to the chart.  Raises when the clipped component is not a
    proper disk (the planar expansion has not yet carried the sheet across
    the chart)."""
    tr = system.transition
    n0 = system.trips.n0
    piece = SurfacePiece(
        system=system,
        word=(WORD_GLOBAL, word_local(n0)),
        center=np.zeros(2),
        frame=tr.patch_radius * np.eye(2),
        constraints=(("patch", 0), ("clip", 2)),
        seed=np.zeros(2),
        label="bent-disk",
    )
    masks = piece.masks()
    if not masks.proper:
        raise AtlasError("n0 too small: the first bent disk is not proper in the chart")
    return piece


def sheet_after(system: SystemSpec, extra: int, side: int) -> SurfacePiece:
    """One side of the first bent disk pushed ``extra`` more steps.

    The admissible parameters form a strip that narrows with the planar
    growth (the normal direction contracts like r^{-(n0+extra)} and the
    fold direction like its square root), so the frame is anisotropic:
    the unit square maps onto the strip, keeping the mask grid useful at
    every depth.
    """
    tr = system.transition
    lo = system.local
    n0 = system.trips.n0
    tag = "lower" if side < 0 else "upper"
    growth = lo.r ** (n0 + extra)
    su = min(tr.patch_radius, math.sqrt(lo.a / (abs(tr.c) * growth)))
    sv = min(tr.patch_radius, lo.a / (abs(tr.b) * growth))
    return SurfacePiece(
        system=system,
        word=(WORD_GLOBAL, word_local(n0 + extra)),
        center=np.zeros(2),
        frame=np.array([[su, 0.0], [0.0, sv]]),
        constraints=(("patch", 0), ("clip", 2), ("side", side)),
        seed=np.array([-0.5 if side < 0 else 0.5, 0.0]),
        label=f"recross-sheet-{tag}",
    )


@dataclass(frozen=True)
class Recrossing:
    """The recrossing datum: iteration count, sheet, tangency-point
    preimage inside the sheet, and the transverse stable-curve crossing."""

    u: int
    sheet: SurfacePiece
    q_xi: Array
    q_margin_cells: float
    crossing: TransversalCrossing
    tau: float


def _attempt_recrossing(system: SystemSpec, u_try: int, margin_cells: float) -> Recrossing | str:
    """One recrossing attempt; returns the datum or a failure reason."""
    tr = system.transition
    piece = sheet_after(system, u_try, -1)
    try:
        masks = piece.masks()
    except AtlasError as exc:
        return str(exc)
    if masks.component_count() < 8:
        return "sheet component too small"
    start = _component_cell_nearest_to(piece, masks, tr.q_z)
    if start is None:
        return "empty sheet component"
    try:
        q_xi, _ = solve_planar(piece, tr.q_z, start)
    except NumericsError:
        return "tangency-point solve failed"
    if not masks.in_component(q_xi):
        return "tangency point not covered"
    cells = masks.margin_cells(q_xi)
    if cells < margin_cells:
        return "tangency point too close to the sheet edge"
    params = piece.params_of(q_xi)
    if side_value(system, params) >= -abs(tr.g) * tr.patch_radius / piece.grid_n:
        return "tangency preimage not strictly on the lower side"
    height = float(piece.jets(q_xi, MODE_VALUE).height)
    tau0 = math.sqrt(max(height, 0.0) * abs(tr.eps / tr.c))
    if tau0 == 0.0:
        tau0 = 1e-6 * tr.patch_radius
    try:
        xi, tau, margin = solve_surface_curve(
            piece,
            lambda t: stable_curve_point(system, t),
            lambda t: stable_curve_velocity(system, t),
            q_xi,
            tau0,
        )
    except NumericsError:
        return "stable-curve solve failed"
    if tau <= 0.0 or not masks.in_component(xi) or margin <= 1e-6:
        return f"crossing degenerate (tau = {tau:.3e}, margin = {margin:.3e})"
    point = piece.jets(xi, MODE_VALUE).value
    crossing = TransversalCrossing(
        label="stable-curve-crossing",
        xi=xi,
        params=piece.params_of(xi),
        point=point,
        height=float(point[2]),
        margin=margin,
    )
    return Recrossing(u_try, piece, q_xi, cells, crossing, float(tau))


def find_recrossing(system: SystemSpec, u_max: int = 40, margin_cells: float = 1.5) -> Recrossing:
    """Smallest u <= u_max such that the lower sheet pushed u steps covers
    the tangency point with a grid cell of clearance and crosses the local
    stable curve transversally on the positive side.

    The positive-side choice (crossing parameter tau > 0 in the tangency
    chart) is equivariant under conjugations, which keeps paired systems
    comparable point by point.
    """
    last_error = "sheet never covered the tangency point"
    for u_try in range(1, u_max + 1):
        result = _attempt_recrossing(system, u_try, margin_cells)
        if isinstance(result, Recrossing):
            return result
        last_error = f"{result} at u = {u_try}"
    raise AtlasError(f"no recrossing <= u_max = {u_max}: {last_error}")


def recrossing_at(system: SystemSpec, u: int, margin_cells: float = 1.5) -> Recrossing:
    """Recrossing datum for a pinned iteration count u."""
    result = _attempt_recrossing(system, u, margin_cells)
    if isinstance(result, Recrossing):
        return result
    raise AtlasError(f"no recrossing at pinned u = {u}: {result}")


def _component_cell_nearest_to(piece: SurfacePiece, masks: MaskBundle, target: complex) -> Array | None:
    cells = np.nonzero(masks.component)
    if len(cells[0]) == 0:
        return None
    xi = np.stack([masks.xi_x[cells[0]], masks.xi_y[cells[1]]], axis=-1)
    values = piece.jets(xi, MODE_VALUE).value
    d = np.hypot(values[:, 0] - target.real, values[:, 1] - target.imag)
    k = int(np.argmin(d))
    return xi[k]


# --------------------------------------------------------------------------
# transversal disks


@dataclass(frozen=True)
class DiskFamily:
    """The second-generation disks D_m and their shared data."""

    base_piece: SurfacePiece
    disks: tuple[SurfacePiece, ...]
    crossings: tuple[TransversalCrossing, ...]
    m_values: tuple[int, ...]
    rho_seed: float
    sigma_zhat: Array
    t_hat: float
    slope_of_base: float
    sigma0: float

    def disk(self, m: int) -> SurfacePiece:
        return self.disks[self.m_values.index(m)]

    def crossing(self, m: int) -> TransversalCrossing:
        return self.crossings[self.m_values.index(m)]


def _disk_word(system: SystemSpec, depth_extra: int) -> tuple[Atom, ...]:
    trips = system.trips
    return (
        WORD_GLOBAL,
        word_local(trips.n0 + trips.u),
        WORD_GLOBAL,
        word_local(trips.j + depth_extra),
    )


def _seed_radius(system: SystemSpec, recrossing: Recrossing) -> float:
    """Parameter radius around the stable-curve crossing kept clear of the
    second transition's folding line and inside its patch."""
    tr = system.transition
    prefix = (WORD_GLOBAL, word_local(system.trips.n0 + recrossing.u))
    sigma = recrossing.crossing.params
    jet = evaluate_word(system, prefix, sigma, mode=MODE_FULL)
    jac_pl = jet.jac[:2, :]
    svals = np.linalg.svd(jac_pl, compute_uv=False)
    off = abs(complex(jet.value[0], jet.value[1]) - tr.q_z)
    patch_fit = 0.9 * (tr.patch_radius - off) / float(svals[0])
    # linear clearance of the second transition's fold function
    word2 = prefix + (WORD_GLOBAL,)
    jet2 = evaluate_word(system, word2, sigma, mode=MODE_FULL)
    g_val = float(planar_det(jet2))
    g_grad = planar_det_gradient(jet2)
    g_norm = float(np.linalg.norm(g_grad))
    if g_norm == 0.0:
        raise AtlasError("degenerate fold point at the stable-curve crossing")
    clearance = abs(g_val) / g_norm
    if clearance == 0.0:
        raise AtlasError("stable-curve crossing sits on the second folding line")
    return min(patch_fit, 0.8 * clearance)


def transversal_disks(
    system: SystemSpec,
    recrossing: Recrossing,
    m_max: int,
    slope_grid: int = 96,
) -> DiskFamily:
    """Build D and the family D_m, m = 0..m_max, with axis crossings.

    Requires resolved trip integers (m0 > 0).  The disks share a single
    parameter center: the stable-curve crossing is the exact axis-crossing
    parameter of every D_m, so crossing heights form an exactly geometric
    sequence lambda^{m0+m} * t_hat.
    """
    if system.trips.m0 <= 0:
        raise AtlasError("m0 unresolved; call resolve_trips first")
    sigma = recrossing.crossing.params
    rho_seed = _seed_radius(system, recrossing)
    # halve the seed radius when the fold or a singular frame contaminates
    # the disk; propriety failures are not retried (they need a larger m0)
    for attempt in range(7):
        try:
            return _build_disk_family(system, sigma, rho_seed, m_max, slope_grid)
        except NumericsError:
            if attempt == 6:
                raise
            rho_seed *= 0.5
    raise AtlasError("unreachable")


def _build_disk_family(
    system: SystemSpec,
    sigma: Array,
    rho_seed: float,
    m_max: int,
    slope_grid: int,
) -> DiskFamily:
    trips = system.trips
    a = system.local.a
    base_word = _disk_word(system, 0)
    base_piece = SurfacePiece(
        system=system,
        word=base_word,
        center=sigma.copy(),
        frame=rho_seed * np.eye(2),
        constraints=(("patch", 0), ("clip", 2), ("patch", 2), ("clip", 4)),
        seed=np.zeros(2),
        label="seed-disk",
    )
    slope_of_base = sample_max_slope(base_piece, slope_grid)
    if not np.isfinite(slope_of_base):
        raise NumericsError("seed disk touches the second folding line")
    lam = system.local.lam
    r = system.local.r
    sigma0 = slope_of_base * (lam / r) ** trips.m0

    # height of the crossing image after the second transition and j steps
    jet0 = evaluate_word(system, base_word, sigma, mode=MODE_VALUE)
    t_hat = float(jet0.value[2])

    disks = []
    crossings = []
    m_values = tuple(range(0, m_max + 1))
    for m in m_values:
        word = _disk_word(system, trips.m0 + m)
        jet = evaluate_word(system, word, sigma, mode=MODE_JAC)
        jac_pl = jet.jac[:2, :]
        try:
            frame = np.linalg.inv(jac_pl) * (1.05 * a)
        except np.linalg.LinAlgError as exc:
            raise NumericsError("singular planar frame for a transversal disk") from exc
        piece = SurfacePiece(
            system=system,
            word=word,
            center=sigma.copy(),
            frame=frame,
            constraints=(("patch", 0), ("clip", 2), ("patch", 2), ("clip", 4)),
            seed=np.zeros(2),
            label=f"transversal-disk-{m}",
        )
        xi, margin = solve_planar(piece, 0.0 + 0.0j, np.zeros(2))
        point = piece.jets(xi, MODE_VALUE).value
        crossings.append(
            TransversalCrossing(
                label=f"axis-crossing-{m}",
                xi=xi,
                params=piece.params_of(xi),
                point=point,
                height=float(point[2]),
                margin=margin,
            )
        )
        disks.append(piece)

    masks0 = disks[0].masks()
    if not masks0.proper:
        raise AtlasError("m0 too small: first transversal disk is not proper")
    return DiskFamily(
        base_piece=base_piece,
        disks=tuple(disks),
        crossings=tuple(crossings),
        m_values=m_values,
        rho_seed=rho_seed,
        sigma_zhat=sigma.copy(),
        t_hat=t_hat,
        slope_of_base=slope_of_base,
        sigma0=sigma0,
    )


def sample_max_slope(piece: SurfacePiece, grid_n: int) -> float:
    """Maximum tangent-plane slope over an admissible parameter grid."""
    coords = np.linspace(-1.0, 1.0, grid_n)
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    xi = np.stack([xx, yy], axis=-1).reshape(-1, 2)
    keep = piece.constraint_ok(xi)
    xi = xi[keep]
    if len(xi) == 0:
        raise AtlasError(f"{piece.label}: no admissible grid points for slope sampling")
    jets = piece.jets(xi, MODE_JAC)
    slopes = plane_slope(jets)
    return float(np.max(slopes))


# --------------------------------------------------------------------------
# deeper bent disks


class DiskGraph:
    """Height graph t = s(u, v) of a transversal disk over the patch chart.

    The disk is a near-horizontal surface whose planar shadow covers the
    transition patch, so it carries a well-defined graph representation;
    the graph jets come from the disk's own word jets by the implicit
    function theorem.  Deep bent disks parameterized through this graph
    keep their fold determinants at machine accuracy, where the raw word
    parameterization loses r^m digits to parameter quantization.
    """

    def __init__(self, disk: SurfacePiece):
        self.disk = disk
        system = disk.system
        beta = system.beta
        self._rot = np.array(
            [[math.cos(beta), -math.sin(beta)], [math.sin(beta), math.cos(beta)]]
        )
        tr = system.transition
        self._q = np.array([tr.q_z.real, tr.q_z.imag])
        self._a = system.local.a

    def solve(self, params: Array) -> Array:
        """Disk coordinates xi with planar image q_z + e^{i beta}(u + iv)."""
        params = np.asarray(params, dtype=float).reshape(-1, 2)
        targets = self._q + params @ self._rot.T
        xi = np.zeros_like(targets)
        prev = np.full(len(targets), np.inf)
        done = np.zeros(len(targets), dtype=bool)
        for _ in range(40):
            jet = self.disk.jets(xi, MODE_JAC)
            f = jet.value[:, :2] - targets
            res = np.linalg.norm(f, axis=-1)
            try:
                step = np.linalg.solve(jet.jac[:, :2, :], f[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise NumericsError(f"{self.disk.label}: singular graph system") from exc
            xi = xi - step
            done |= (res <= 1e-13 * self._a) | ((res >= 0.5 * prev) & (res <= 1e-7 * self._a))
            prev = res
            if bool(np.all(done)):
                break
        else:
            worst = float(np.max(res[~done])) if np.any(~done) else float(np.max(res))
            raise NumericsError(
                f"{self.disk.label}: graph solve did not converge (residual {worst:.3e})"
            )
        return xi

    def inside(self, params: Array) -> Array:
        """Whether the graph points fall in the disk's admissible set."""
        return self.disk.constraint_ok(self.solve(params))

    def height(self, params: Array, mode: str = MODE_FULL):
        """(s, ds, d2s) of the graph at patch-chart parameters."""
        params = np.asarray(params, dtype=float)
        lead = params.shape[:-1]
        xi = self.solve(params)
        jet = self.disk.jets(xi, mode)
        s = jet.value[:, 2].reshape(lead)
        if mode == MODE_VALUE:
            return s, None, None
        pl = jet.jac[:, :2, :]
        tv = jet.jac[:, 2, :]
        dxi = np.linalg.solve(pl, np.broadcast_to(self._rot, pl.shape))
        ds = np.einsum("na,naA->nA", tv, dxi).reshape(lead + (2,))
        if mode == MODE_JAC:
            return s, ds, None
        h_pl = jet.hess[:, :2, :, :]
        h_t = jet.hess[:, 2, :, :]
        bend = np.einsum("nkab,naA,nbB->nkAB", h_pl, dxi, dxi)
        d2xi = -np.linalg.solve(pl, bend.reshape(len(xi), 2, 4)).reshape(len(xi), 2, 2, 2)
        d2s = np.einsum("nab,naA,nbB->nAB", h_t, dxi, dxi)
        d2s = d2s + np.einsum("nk,nkAB->nAB", tv, d2xi)
        return s, ds, d2s.reshape(lead + (2, 2))


def _single_disk(system: SystemSpec, disks: DiskFamily, m: int) -> SurfacePiece:
    """One transversal disk D_m beyond the precomputed family range."""
    word = _disk_word(system, system.trips.m0 + m)
    jet = evaluate_word(system, word, disks.sigma_zhat, mode=MODE_JAC)
    try:
        frame = np.linalg.inv(jet.jac[:2, :]) * (1.05 * system.local.a)
    except np.linalg.LinAlgError as exc:
        raise NumericsError("singular planar frame for a transversal disk") from exc
    return SurfacePiece(
        system=system,
        word=word,
        center=disks.sigma_zhat.copy(),
        frame=frame,
        constraints=(("patch", 0), ("clip", 2), ("patch", 2), ("clip", 4)),
        seed=np.zeros(2),
        label=f"transversal-disk-{m}",
    )


def bent_disk_sequence(system: SystemSpec, disks: DiskFamily, m: int) -> SurfacePiece:
    """The bent disk H_m: the patch part of D_m pushed through the
    transition and n0 more local steps, parameterized as a graph over
    the patch chart."""
    trips = system.trips
    tr = system.transition
    if m < 0:
        raise AtlasError("m below m_min = 0")
    disk = disks.disk(m) if m in disks.m_values else _single_disk(system, disks, m)
    graph = DiskGraph(disk)
    # D_m's shadow must cover the patch for the graph to be total on it
    ring_angles = 2.0 * math.pi * np.arange(16) / 16.0
    probes = np.concatenate(
        [np.zeros((1, 2)), tr.patch_radius * np.stack([np.cos(ring_angles), np.sin(ring_angles)], axis=-1)]
    )
    if not bool(np.all(graph.inside(probes))):
        raise AtlasError("m below m_min")
    return SurfacePiece(
        system=system,
        word=(WORD_GLOBAL, word_local(trips.n0)),
        center=np.zeros(2),
        frame=tr.patch_radius * np.eye(2),
        constraints=(("patch", 0), ("clip", 2)),
        seed=np.zeros(2),
        label=f"bent-disk-{m}",
        height=graph.height,
    )


# --------------------------------------------------------------------------
# the probe segment


@dataclass(frozen=True)
class ProbeCurve:
    """Preimage of the straight probe through the first bent disk's base
    point, orthogonal to the disk.

    The probe is horizontal, so its pullback through the transition keeps
    u = (t - t0)/g = 0 identically: the preimage is a curve through the
    tangency point itself.  ``offsets`` evaluates the exact displacement
    from the tangency point in patch-chart coordinates (u, v, s), which
    stays relatively accurate at magnitudes far below the chart scale.
    """

    system: SystemSpec

    def _zeta(self) -> complex:
        """Planar pullback factor: probe direction times w1^{-n0} e^{-i psi}."""
        lo = self.system.local
        tr = self.system.transition
        n0 = self.system.trips.n0
        w, _ = local_powers(lo, n0)
        direction = w / abs(w)
        back, _ = local_powers(lo, -n0)
        return direction * back * complex(math.cos(-tr.psi), math.sin(-tr.psi))

    def anchor(self) -> Array:
        """The probe anchor q0 on the stable axis under the bent disk."""
        tr = self.system.transition
        n0 = self.system.trips.n0
        q_hat = np.array([0.0, 0.0, tr.t0])
        return local_map(self.system, q_hat, n0)

    def normal_direction(self) -> complex:
        """Planar unit normal of the first bent disk at its axis point."""
        lo = self.system.local
        n0 = self.system.trips.n0
        w, _ = local_powers(lo, n0)
        return w / abs(w)

    def offsets(self, tau: float | Array) -> Array:
        """Displacement from the tangency point, rows (u, v, s)."""
        tau = np.asarray(tau, dtype=float)
        tr = self.system.transition
        zeta = self._zeta()
        out = np.zeros(tau.shape + (3,))
        v = tau * zeta.imag / tr.b
        out[..., 1] = v
        out[..., 2] = (tau * zeta.real - tr.e * v * v) / tr.eps
        return out

    def offset_velocity(self, tau: float | Array) -> Array:
        tau = np.asarray(tau, dtype=float)
        tr = self.system.transition
        zeta = self._zeta()
        out = np.zeros(tau.shape + (3,))
        dv = zeta.imag / tr.b
        out[..., 1] = dv
        out[..., 2] = (zeta.real - 2.0 * tr.e * (tau * dv) * dv) / tr.eps
        return out

    def point(self, tau: float | Array) -> Array:
        """Ambient pullback point (offset form re-embedded at the patch)."""
        off = self.offsets(tau)
        system = self.system
        tr = system.transition
        rot = complex(math.cos(system.beta), math.sin(system.beta))
        w = tr.q_z + (off[..., 0] + 1j * off[..., 1]) * rot
        pts = np.empty(off.shape)
        pts[..., 0] = w.real
        pts[..., 1] = w.imag
        pts[..., 2] = off[..., 2]
        return pts


@dataclass(frozen=True)
class ProbeCrossing:
    m: int
    crossing: TransversalCrossing
    distance_to_q: float


def probe_intersection(system: SystemSpec, disks: DiskFamily, m: int) -> ProbeCrossing:
    """Transverse intersection of the probe preimage with D_m near the
    tangency point, and its distance to the tangency point.

    Solved in offset coordinates against the disk's height graph: the
    distances decay like lambda^m below any ambient cancellation floor,
    so no chart-scale quantity may enter the arithmetic.
    """
    probe = ProbeCurve(system)
    disk = disks.disk(m) if m in disks.m_values else _single_disk(system, disks, m)
    graph = DiskGraph(disk)
    tau = 0.0
    res = math.inf
    prev_res = math.inf
    stall = 0
    for _ in range(50):
        off = probe.offsets(tau)
        vel = probe.offset_velocity(tau)
        s, ds, _ = graph.height(off[None, :2], MODE_JAC)
        f = float(s[0] - off[2])
        fp = float(ds[0, 0] * vel[0] + ds[0, 1] * vel[1] - vel[2])
        if fp == 0.0:
            raise NumericsError(f"probe-crossing-{m}: crossing system is degenerate")
        step = f / fp
        tau -= step
        res = abs(f)
        if res == 0.0 or abs(step) <= 1e-15 * max(abs(tau), 1e-300):
            break
        stall = stall + 1 if res >= 0.5 * prev_res else 0
        prev_res = res
        if stall >= 2:
            break
    else:
        raise NumericsError(
            f"probe-crossing-{m}: crossing solve did not converge (residual {res:.3e})"
        )
    off = probe.offsets(tau)
    s, ds, _ = graph.height(off[None, :2], MODE_JAC)
    height = float(s[0])
    dist = math.sqrt(off[0] ** 2 + off[1] ** 2 + height**2)
    vel = probe.offset_velocity(tau)
    cols = np.array(
        [
            [1.0, 0.0, -vel[0]],
            [0.0, 1.0, -vel[1]],
            [float(ds[0, 0]), float(ds[0, 1]), -vel[2]],
        ]
    )
    norms = np.linalg.norm(cols, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    margin = float(np.linalg.svd(cols / norms, compute_uv=False)[-1])
    xi = graph.solve(off[None, :2])[0]
    point = np.empty(3)
    rot = complex(math.cos(system.beta), math.sin(system.beta))
    w = system.transition.q_z + (off[0] + 1j * off[1]) * rot
    point[0] = w.real
    point[1] = w.imag
    point[2] = height
    crossing = TransversalCrossing(
        label=f"probe-crossing-{m}",
        xi=xi,
        params=disk.params_of(xi),
        point=point,
        height=height,
        margin=margin,
    )
    return ProbeCrossing(m, crossing, dist)


# --------------------------------------------------------------------------
# trip resolution


def resolve_trips(system: SystemSpec, u_max: int = 40, m0_max: int = 60) -> SystemSpec:
    """Fill in automatic trip integers (u, m0) by geometric probing."""
    trips = system.trips
    if trips.u <= 0:
        rec = find_recrossing(system, u_max)
        u = rec.u
    else:
        u = trips.u
        rec = recrossing_at(system, u)
    resolved = replace(system, trips=replace(trips, u=u))
    if trips.m0 > 0:
        return resolved
    rho_seed = _seed_radius(resolved, rec)
    sigma = rec.crossing.params
    # propriety estimate: the slimmest image direction must cross the chart
    word = _disk_word(resolved, 0)
    jet = evaluate_word(resolved, word, sigma, mode=MODE_JAC)
    svals = np.linalg.svd(jet.jac[:2, :], compute_uv=False)
    slim = float(svals[-1]) * rho_seed
    a = resolved.local.a
    r = resolved.local.r
    m0_lo = max(1, math.ceil(math.log(1.25 * a / slim) / math.log(r)))
    for m0_try in range(max(1, m0_lo - 2), m0_max + 1):
        candidate = replace(resolved, trips=replace(resolved.trips, m0=m0_try))
        try:
            family = transversal_disks(candidate, rec, m_max=2, slope_grid=48)
        except (AtlasError, NumericsError):
            continue
        ok = True
        for m in (0, 1, 2):
            if not family.disk(m).masks().proper:
                ok = False
                break
        if ok:
            return candidate
    raise AtlasError(f"no proper transversal disk for m0 <= {m0_max}")
