"""Scenario runner: artifacts, invariant checks, and exit codes.

Scenarios: verify-asymptotics, estimate-moduli, conjugacy-pair, sweep.
Each run writes report.json plus CSV tables and SVG figures into the
output directory.  Reports carry no timestamps and derive only from the
input floats, so a repeated run writes identical bytes.

Exit codes: 0 completed (including a "violated: ..." verdict), 1 an
invariant check failed, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import RunConfig, load_config
from .conjugacy import (
    CheckReport,
    compare_moduli,
    epsilon_neighborhood_check,
    orthogonality_check,
    recover_conjugacy,
    verify_angle_differences,
    verify_equivariance,
    verify_segment_transport,
)
from .atlas import initial_sheet
from .errors import ConfigError, SflabError
from .folds import FOLD_METRICS_HEADER, verify_quadratic_tangency
from .geometry import wrap_angle
from .model import (
    make_conjugate_system,
    rotation_rationality,
    system_from_dict,
    system_to_dict,
)
from .pipeline import PairPipelines, PipelineKnobs, SystemPipeline
from .svg import SvgScene, palette

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

SWEEP_HEADER = (
    "parameter,value,lambda_hat,r_hat,theta_hat,ratio_hat,rotation,"
    "signature,cross_ratio_re,cross_ratio_im,status"
)


# --------------------------------------------------------------------------
# small helpers


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_json(path: str, payload: dict) -> None:
    _write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _signature_str(signature) -> str:
    if signature is None:
        return ""
    if isinstance(signature, str):
        return signature
    return f"{signature[0]}:{signature[1]}"


class Checks:
    """Accumulates named pass/fail rows with margins."""

    def __init__(self) -> None:
        self.rows: list[dict] = []

    def add(self, name: str, passed: bool, margin: float, detail: str) -> None:
        self.rows.append(
            {
                "name": name,
                "passed": bool(passed),
                "margin": float(margin),
                "detail": detail,
            }
        )

    def add_report(self, name: str, report: CheckReport) -> None:
        self.add(
            name,
            report.ok,
            report.tol - report.max_residual,
            f"max residual = {report.max_residual:.6e} over {len(report.rows)} rows"
            + ("; " + "; ".join(report.notes) if report.notes else ""),
        )

    @property
    def passed(self) -> bool:
        return all(row["passed"] for row in self.rows)

    def failures(self) -> list[str]:
        return [row["name"] for row in self.rows if not row["passed"]]

    def print_lines(self) -> None:
        for row in self.rows:
            mark = "pass" if row["passed"] else "FAIL"
            print(f"{row['name']}: {mark} (margin = {row['margin']:.3e})")


# --------------------------------------------------------------------------
# CSV artifacts


def _metrics_csv(pipe: SystemPipeline) -> str:
    lines = [FOLD_METRICS_HEADER]
    for row in pipe.metrics_table():
        lines.append(row.csv_row())
    return "\n".join(lines) + "\n"


def _probe_csv(pipe: SystemPipeline) -> str:
    lines = ["m,height,dist_to_q,margin"]
    for probe in pipe.probe_table():
        c = probe.crossing
        lines.append(f"{probe.m},{c.height!r},{probe.distance_to_q!r},{c.margin!r}")
    return "\n".join(lines) + "\n"


def _slopes_csv(pipe: SystemPipeline) -> str:
    local = pipe.system.local
    sigma0 = pipe.disks().sigma0
    lines = ["m,slope,bound"]
    for m, slope in pipe.slope_table():
        bound = sigma0 * (local.lam / local.r) ** m
        lines.append(f"{m},{slope!r},{bound!r}")
    return "\n".join(lines) + "\n"


def _surface_csv(pipe: SystemPipeline, grid: int = 33) -> str:
    piece = pipe.piece(0)
    coords = np.linspace(-1.0, 1.0, grid)
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    xi = np.stack([xx, yy], axis=-1).reshape(-1, 2)
    keep = piece.constraint_ok(xi)
    xi = xi[keep]
    params = piece.params_of(xi)
    values = piece.jets(xi, "value").value
    lines = ["param_u,param_v,x,y,t"]
    for sigma, point in zip(params, values):
        lines.append(
            f"{sigma[0]!r},{sigma[1]!r},{point[0]!r},{point[1]!r},{point[2]!r}"
        )
    return "\n".join(lines) + "\n"


def _plan_csv(pipe: SystemPipeline) -> str:
    plan = pipe.shallow_plan()
    lines = ["j,m,n,value,residual"]
    for j, ((m, n), value, residual) in enumerate(
        zip(plan.pairs, plan.values, plan.residuals)
    ):
        lines.append(f"{j},{m},{n},{value!r},{residual!r}")
    return "\n".join(lines) + "\n"


def _segments_csv(pipe: SystemPipeline, samples: int = 65) -> str:
    gamma0, _family = pipe.limit_segments()
    seg = gamma0.segment
    curve = seg.sample(samples)
    direction = seg.direction
    lines = ["s,x,y,tx,ty"]
    ss = np.linspace(-seg.half_length, seg.half_length, samples)
    for s, point in zip(ss, curve.points):
        lines.append(f"{s!r},{point[0]!r},{point[1]!r},{direction.real!r},{direction.imag!r}")
    return "\n".join(lines) + "\n"


def _family_csv(pipe: SystemPipeline) -> str:
    _gamma0, family = pipe.limit_segments()
    xi = pipe.xi_segments()
    lines = ["kind,k,m,n,distance,angle,fit_residual,method"]
    for k, seg in enumerate(family.segments):
        lines.append(
            f"gamma,{k},{seg.m},{seg.n},{seg.distance!r},{seg.angle!r},"
            f"{seg.fit_residual!r},{seg.method}"
        )
    for k, seg in enumerate(xi.segments):
        lines.append(
            f"xi,{k},{seg.m},{seg.n},{seg.distance!r},{seg.angle!r},"
            f"{seg.fit_residual!r},{seg.method}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# SVG artifacts


def _bent_disk_svg(pipe: SystemPipeline) -> str:
    local = pipe.system.local
    scene = SvgScene(title=f"folding curves, {pipe.label}")
    scene.circle((0.0, 0.0), local.a)
    clip = local.a * local.r ** (-pipe.knobs.metrics_n_max)
    scene.circle((0.0, 0.0), clip, color="#c0c0c0", width=0.8)
    for i, m in enumerate(range(0, 4)):
        master = pipe.table_master(m)
        scene.polyline(
            master.planar.points, color=palette(i), width=1.4, label=f"fold m = {m}"
        )
    q = pipe.system.transition.q_z
    scene.dot((q.real, q.imag), color="#000000")
    scene.label((q.real, q.imag), "q")
    return scene.to_string()


def _parallel_family_svg(pipe: SystemPipeline) -> str:
    local = pipe.system.local
    scene = SvgScene(title=f"limit segments, {pipe.label}")
    scene.circle((0.0, 0.0), local.a)
    _gamma0, family = pipe.limit_segments()
    for k, seg in enumerate(family.segments):
        scene.polyline(
            seg.segment.sample(65).points,
            color=palette(k),
            width=1.4,
            label=f"gamma k = {k}",
        )
    xi = pipe.xi_segments()
    for k, seg in enumerate(xi.segments):
        scene.polyline(
            seg.segment.sample(65).points,
            color=palette(k),
            width=0.8,
            label=f"xi k = {k}",
        )
    scene.dot((0.0, 0.0), color="#000000", radius=2.0)
    return scene.to_string()


def _transport_svg(pair: PairPipelines, h) -> str:
    a_g = pair.g.system.local.a
    scene = SvgScene(title="segment transport")
    scene.circle((0.0, 0.0), a_g)
    _g0f, fam_f = pair.f.limit_segments()
    _g0g, fam_g = pair.g.limit_segments()
    for k, seg in enumerate(fam_f.segments):
        image = h.apply_segment(seg.segment)
        scene.polyline(
            image.sample(65).points,
            color=palette(k),
            width=2.2,
            label=f"h(gamma {k})",
        )
    for k, seg in enumerate(fam_g.segments):
        scene.polyline(seg.segment.sample(65).points, color="#202020", width=0.9)
    return scene.to_string()


# --------------------------------------------------------------------------
# invariant checks for one system


def _asymptotic_checks(pipe: SystemPipeline) -> Checks:
    checks = Checks()
    knobs = pipe.knobs
    local = pipe.system.local
    lam = local.lam
    r = local.r

    report = verify_quadratic_tangency(initial_sheet(pipe.system), at=None)
    checks.add(
        "quadratic-tangency",
        report.quadratic,
        abs(report.phi_tt) - 1e-6,
        f"phi = {report.phi:.3e}, phi_t = {report.phi_t:.3e}, phi_tt = {report.phi_tt:.6e}",
    )

    worst = 0.0
    for m in range(knobs.metrics_m_max + 1):
        worst = max(worst, float(max(pipe.table_master(m).residuals)))
    checks.add(
        "fold-residuals",
        worst < 1e-11,
        1e-11 - worst,
        f"max |g| = {worst:.3e} over masters m <= {knobs.metrics_m_max}",
    )

    sigma0 = pipe.disks().sigma0
    worst = 0.0
    for m, slope in pipe.slope_table():
        normalized = slope * (r / lam) ** m / sigma0
        worst = max(worst, normalized)
    checks.add(
        "slope-bound",
        worst <= 1.05,
        1.05 - worst,
        f"max slope / (sigma0 (lam/r)^m) = {worst:.9f}",
    )

    tail = [
        pipe.table_metric(m + 1, 0).distance / pipe.table_metric(m, 0).distance
        for m in range(12, knobs.metrics_m_max)
    ]
    worst = max(abs(ratio / lam - 1.0) for ratio in tail) if tail else math.inf
    checks.add(
        "distance-contraction",
        worst < 0.02,
        0.02 - worst,
        f"max |d ratio / lambda - 1| = {worst:.3e} for m >= 12",
    )

    worst = 0.0
    for m in range(knobs.metrics_m_max + 1):
        for n in range(knobs.metrics_n_max):
            ratio = pipe.table_metric(m, n + 1).distance / pipe.table_metric(m, n).distance
            worst = max(worst, abs(ratio / r - 1.0))
    checks.add(
        "rotation-scaling",
        worst < 1e-12,
        1e-12 - worst,
        f"max |d ratio / r - 1| = {worst:.3e}",
    )

    worst = 0.0
    for m in range(knobs.metrics_m_max + 1):
        for n in range(knobs.metrics_n_max):
            inc = wrap_angle(
                pipe.table_metric(m, n + 1).angle - pipe.table_metric(m, n).angle - local.theta
            )
            worst = max(worst, abs(float(inc)))
    checks.add(
        "angle-additivity",
        worst < 1e-9,
        1e-9 - worst,
        f"max wrapped angle error = {worst:.3e}",
    )

    worst = 0.0
    for m in range(knobs.metrics_m_max + 1):
        for n in range(knobs.metrics_n_max):
            k0 = pipe.table_metric(m, n).curvature
            k1 = pipe.table_metric(m, n + 1).curvature
            if k0 > 0.0:
                worst = max(worst, k1 * r / k0)
    checks.add(
        "curvature-decay",
        worst <= 1.0 + 1e-6,
        1.0 + 1e-6 - worst,
        f"max kappa ratio * r = {worst:.12f}",
    )

    heights = [pipe.disks().crossing(m).height for m in range(knobs.metrics_m_max + 1)]
    worst = max(
        abs(heights[m + 1] / heights[m] / lam - 1.0) for m in range(len(heights) - 1)
    )
    checks.add(
        "axis-height-geometric",
        worst < 1e-10,
        1e-10 - worst,
        f"max |height ratio / lambda - 1| = {worst:.3e}",
    )

    dists = [probe.distance_to_q for probe in pipe.probe_table()]
    tail = [dists[m + 1] / dists[m] for m in range(12, len(dists) - 1)]
    worst = max(abs(ratio / lam - 1.0) for ratio in tail) if tail else math.inf
    checks.add(
        "probe-contraction",
        worst < 0.02,
        0.02 - worst,
        f"max |probe ratio / lambda - 1| = {worst:.3e} for m >= 12",
    )

    dt = pipe.dt_constant()
    rel = dt.error / dt.value if dt.value > 0 else math.inf
    checks.add(
        "dt-constant",
        rel < 1e-3,
        1e-3 - rel,
        f"value = {dt.value:.9e}, relative error = {rel:.3e}",
    )

    plan = pipe.shallow_plan()
    in_window = [
        plan.w * lam * (1.0 - 1e-9) < v <= plan.w * (1.0 + 1e-12) for v in plan.values
    ]
    bracket_ok = all(in_window) and not any("bracket violated" in note for note in plan.notes)
    margin = min(
        (min(v / (plan.w * lam) - 1.0, 1.0 - v / plan.w + 1e-12) for v in plan.values),
        default=-1.0,
    )
    checks.add(
        "plan-window",
        bracket_ok,
        margin,
        f"{len(plan.pairs)} members, w = {plan.w!r}, w0 = {plan.w0!r}",
    )

    gamma0, family = pipe.limit_segments()
    checks.add(
        "segment-straight",
        gamma0.fit_residual < 1e-3 * plan.w0,
        1e-3 * plan.w0 - gamma0.fit_residual,
        f"fit residual = {gamma0.fit_residual:.3e} vs 1e-3 w0 = {1e-3 * plan.w0:.3e}",
    )

    angles = family.angles()
    spread = max(abs(float(wrap_angle(x - y))) for x in angles for y in angles)
    checks.add(
        "family-angle-spread",
        spread < 1e-3,
        1e-3 - spread,
        f"angle spread = {spread:.3e} over {len(angles)} members",
    )

    xi = pipe.xi_segments()
    worst = 0.0
    for k, seg in enumerate(xi.segments):
        worst = max(worst, seg.distance * 2.0**k / plan.w0 - 1.0)
    checks.add(
        "xi-decay",
        worst <= 1e-12,
        1e-12 - worst,
        f"max d_k 2^k / w0 - 1 = {worst:.3e}",
    )

    deep = pipe.deep_plan()
    alpha = math.log(r) / math.log(1.0 / lam)
    worst = 0.0
    for m, n in deep.pairs:
        if n >= 40:
            worst = max(worst, abs(m / n / alpha - 1.0))
    checks.add(
        "depth-ratio-limit",
        worst < 0.02,
        0.02 - worst,
        f"max |(m/n)/alpha - 1| = {worst:.3e}, alpha = {alpha:.9f}",
    )

    moduli = pipe.moduli()
    if moduli.rotation.ok:
        target = (local.theta / (2.0 * math.pi)) % 1.0
        diff = abs(moduli.rotation.value - target)
        diff = min(diff, 1.0 - diff)
        checks.add(
            "rotation-number",
            diff < 1e-9,
            1e-9 - diff,
            f"measured {moduli.rotation.value!r} vs theta/2pi mod 1 = {target!r}",
        )
    else:
        checks.add("rotation-number", False, -1.0, "rotation estimate failed")

    frac = rotation_rationality(local.theta, max_den=knobs.rotation_n_max)
    expected = "irrational" if frac is None else (frac[1], frac[0])
    got = moduli.signature
    checks.add(
        "rotation-signature",
        got == expected,
        0.0 if got == expected else -1.0,
        f"measured {got!r}, expected {expected!r}",
    )

    return checks


def _moduli_checks(pipe: SystemPipeline) -> Checks:
    checks = Checks()
    local = pipe.system.local
    moduli = pipe.moduli()

    checks.add(
        "moduli-complete",
        len(moduli.errors) == 0,
        0.0 if not moduli.errors else -1.0,
        "all sub-estimates computed"
        if not moduli.errors
        else "; ".join(f"{k}: {v}" for k, v in moduli.errors),
    )

    if moduli.lambda_hat.ok:
        diff = abs(moduli.lambda_hat.value - local.lam)
        checks.add(
            "lambda-hat",
            diff < 1e-3,
            1e-3 - diff,
            f"lambda_hat = {moduli.lambda_hat.value!r}",
        )
    if moduli.r_hat.ok:
        diff = abs(moduli.r_hat.value - local.r)
        checks.add("r-hat", diff < 1e-3, 1e-3 - diff, f"r_hat = {moduli.r_hat.value!r}")
    if moduli.theta_hat.ok:
        diff = abs(float(wrap_angle(moduli.theta_hat.value - local.theta)))
        checks.add(
            "theta-hat", diff < 1e-3, 1e-3 - diff, f"theta_hat = {moduli.theta_hat.value!r}"
        )
    if moduli.ratio_hat.ok:
        alpha = math.log(local.r) / math.log(1.0 / local.lam)
        rel = abs(moduli.ratio_hat.value / alpha - 1.0)
        checks.add(
            "ratio-hat", rel < 0.02, 0.02 - rel, f"ratio_hat = {moduli.ratio_hat.value!r}"
        )
    return checks


# --------------------------------------------------------------------------
# scenarios


def _system_section(pipe: SystemPipeline) -> dict:
    data = system_to_dict(pipe.system)
    return {key: data[key] for key in sorted(data)}


def _run_verify(config: RunConfig, out_dir: str) -> int:
    pipe = SystemPipeline(config.system, config.knobs)
    checks = _asymptotic_checks(pipe)
    checks.print_lines()

    gamma0, family = pipe.limit_segments()
    report = {
        "scenario": "verify-asymptotics",
        "label": pipe.label,
        "system": _system_section(pipe),
        "checks": checks.rows,
        "passed": checks.passed,
        "failures": checks.failures(),
        "dt_constant": {"value": pipe.dt_constant().value, "error": pipe.dt_constant().error},
        "plans": {
            "shallow": pipe.shallow_plan().to_json_dict(),
            "deep": pipe.deep_plan().to_json_dict(),
        },
        "segments": {
            "gamma0": {
                "distance": gamma0.distance,
                "angle": gamma0.angle,
                "fit_residual": gamma0.fit_residual,
                "m": gamma0.m,
                "n": gamma0.n,
                "method": gamma0.method,
            },
            "family_angles": list(family.angles()),
            "family_distances": list(family.distances()),
        },
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    _write(os.path.join(out_dir, "metrics.csv"), _metrics_csv(pipe))
    _write(os.path.join(out_dir, "probe.csv"), _probe_csv(pipe))
    _write(os.path.join(out_dir, "slopes.csv"), _slopes_csv(pipe))
    _write(os.path.join(out_dir, "surface.csv"), _surface_csv(pipe))
    _write(os.path.join(out_dir, "plan.csv"), _plan_csv(pipe))
    _write(os.path.join(out_dir, "segments.csv"), _segments_csv(pipe))
    _write(os.path.join(out_dir, "family.csv"), _family_csv(pipe))
    _write(os.path.join(out_dir, "bent_disk.svg"), _bent_disk_svg(pipe))
    _write(os.path.join(out_dir, "parallel_family.svg"), _parallel_family_svg(pipe))
    return EXIT_OK if checks.passed else EXIT_INVARIANT


def _run_moduli(config: RunConfig, out_dir: str) -> int:
    pipe = SystemPipeline(config.system, config.knobs)
    checks = _moduli_checks(pipe)
    checks.print_lines()
    report = {
        "scenario": "estimate-moduli",
        "label": pipe.label,
        "system": _system_section(pipe),
        "moduli": pipe.moduli().to_json_dict(),
        "checks": checks.rows,
        "passed": checks.passed,
        "failures": checks.failures(),
        "plans": {
            "shallow": pipe.shallow_plan().to_json_dict(),
            "deep": pipe.deep_plan().to_json_dict(),
        },
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    _write(os.path.join(out_dir, "metrics.csv"), _metrics_csv(pipe))
    _write(os.path.join(out_dir, "plan.csv"), _plan_csv(pipe))
    _write(os.path.join(out_dir, "segments.csv"), _segments_csv(pipe))
    _write(os.path.join(out_dir, "family.csv"), _family_csv(pipe))
    _write(os.path.join(out_dir, "bent_disk.svg"), _bent_disk_svg(pipe))
    _write(os.path.join(out_dir, "parallel_family.svg"), _parallel_family_svg(pipe))
    return EXIT_OK if checks.passed else EXIT_INVARIANT


def _partner_system(config: RunConfig):
    if config.system2 is not None:
        return config.system2
    assert config.pair is not None
    partner, _phi = make_conjugate_system(
        config.system,
        rho=config.pair.rho,
        omega=config.pair.omega,
        mu=config.pair.mu,
        mirror=config.pair.mirror,
        label="system-pair",
    )
    return partner

def _run_conjugacy(config: RunConfig, out_dir: str) -> int:
    partner = _partner_system(config)
    pair = PairPipelines(config.system, partner, config.knobs)
    pair.align_plans()

    pair_report = compare_moduli(pair.f, pair.g)
    if pair_report.verdict == "violated":
        verdict_line = f"violated: {pair_report.violated_modulus}"
        print(verdict_line)
        report = {
            "scenario": "conjugacy-pair",
            "labels": [pair.f.label, pair.g.label],
            "verdict": verdict_line,
            "pair": pair_report.to_json_dict(),
            "checks": [],
            "passed": True,
        }
        _write_json(os.path.join(out_dir, "report.json"), report)
        return EXIT_OK

    h = pair_report.candidate
    assert h is not None
    checks = Checks()
    transport = verify_segment_transport(h, pair.f, pair.g, strict=False)
    checks.add_report("segment-transport", transport)
    equivariance = verify_equivariance(h, pair.f, pair.g)
    checks.add_report("diameter-equivariance", equivariance)

    psi_f = pair.f.limit_segments()[0].angle
    psi_g = pair.g.limit_segments()[0].angle
    theta_f = pair.f.system.local.theta
    theta_g = pair.g.system.local.theta
    diameter_pairs = [
        (
            (psi_f + i * theta_f, psi_f + (i + 3) * theta_f),
            (psi_g + i * theta_g, psi_g + (i + 3) * theta_g),
        )
        for i in range(6)
    ]
    angle_diffs = verify_angle_differences(h, diameter_pairs)
    checks.add_report("angle-differences", angle_diffs)

    xi_f = pair.f.xi_segments().segments[0].angle
    xi_g = pair.g.xi_segments().segments[0].angle
    ortho = orthogonality_check(
        h, xi_f, xi_f - math.pi / 2.0, xi_g, xi_g - math.pi / 2.0
    )
    checks.add_report("orthogonality", ortho)

    j_anchor = len(pair.f.shallow_plan().pairs) - 1
    ok, margin, flag = epsilon_neighborhood_check(
        h, pair.f, pair.g, j_anchor, config.epsilon
    )
    checks.add(
        "epsilon-neighborhood",
        ok,
        config.epsilon - margin,
        f"margin = {margin:.6e} at j = {j_anchor}, eps = {config.epsilon!r}"
        + (f"; {flag}" if flag else ""),
    )

    checks.print_lines()
    print("consistent")

    residuals = dict(pair_report.residuals)
    residuals["transport_max"] = transport.max_residual
    residuals["equivariance_max"] = equivariance.max_residual
    pair_report = replace(pair_report, residuals=residuals)

    report = {
        "scenario": "conjugacy-pair",
        "labels": [pair.f.label, pair.g.label],
        "verdict": "consistent",
        "pair": pair_report.to_json_dict(),
        "checks": checks.rows,
        "passed": checks.passed,
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    _write(os.path.join(out_dir, "transport.svg"), _transport_svg(pair, h))
    _write(os.path.join(out_dir, "family.csv"), _family_csv(pair.f))
    return EXIT_OK if checks.passed else EXIT_INVARIANT


def _sweep_values(spec) -> list[float]:
    if spec.count <= 0:
        return []
    if spec.count == 1:
        return [spec.minimum]
    return [
        spec.minimum + i * (spec.maximum - spec.minimum) / (spec.count - 1)
        for i in range(spec.count)
    ]


def _sweep_point(config: RunConfig, value: float) -> tuple[str, bool]:
    spec = config.sweep
    assert spec is not None
    data = system_to_dict(config.system)
    if spec.parameter in ("n0", "u", "j", "m0"):
        data[spec.parameter] = int(round(value))
    else:
        data[spec.parameter] = value
    try:
        system = system_from_dict(data, label=f"sweep-{spec.parameter}")
        pipe = SystemPipeline(system, config.knobs)
        moduli = pipe.moduli()
    except SflabError as exc:
        message = str(exc).replace(",", ";").replace("\n", " ")
        empty = ",,,,,,,"
        return f"{spec.parameter},{value!r},{empty},error: {message}", False
    if moduli.errors:
        message = moduli.errors[0][1].replace(",", ";").replace("\n", " ")
        status = f"error: {message}"
        ok = False
    else:
        status = "ok"
        ok = True
    cells = [
        spec.parameter,
        repr(value),
        repr(moduli.lambda_hat.value) if moduli.lambda_hat.ok else "",
        repr(moduli.r_hat.value) if moduli.r_hat.ok else "",
        repr(moduli.theta_hat.value) if moduli.theta_hat.ok else "",
        repr(moduli.ratio_hat.value) if moduli.ratio_hat.ok else "",
        repr(moduli.rotation.value) if moduli.rotation.ok else "",
        _signature_str(moduli.signature),
        repr(moduli.cross_ratio.real) if moduli.cross_ratio is not None else "",
        repr(moduli.cross_ratio.imag) if moduli.cross_ratio is not None else "",
        status,
    ]
    return ",".join(cells), ok


def _run_sweep(config: RunConfig, out_dir: str, threads: int) -> int:
    spec = config.sweep
    assert spec is not None
    values = _sweep_values(spec)
    if threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda v: _sweep_point(config, v), values))
    else:
        results = [_sweep_point(config, v) for v in values]
    rows = [row for row, _ok in results]
    lines = [SWEEP_HEADER] + rows
    _write(os.path.join(out_dir, "sweep.csv"), "\n".join(lines) + "\n")
    report = {
        "scenario": "sweep",
        "parameter": spec.parameter,
        "values": [float(v) for v in values],
        "rows": len(rows),
        "failures": [float(v) for v, (_row, ok) in zip(values, results) if not ok],
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    for row in rows:
        print(row)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry points


def resolve_threads(cli_threads: int | None, knobs: PipelineKnobs) -> int:
    if cli_threads is not None and cli_threads > 0:
        return cli_threads
    if knobs.threads > 1:
        return knobs.threads
    env = os.environ.get("SFLAB_THREADS", "")
    if env.strip().isdigit() and int(env) > 0:
        return int(env)
    return 1


def _error_payload(exc: Exception, code: int) -> dict:
    return {
        "error": {"type": exc.__class__.__name__, "message": str(exc)},
        "exit_code": code,
    }


def run(config_path: str, out_dir: str, cli_threads: int | None = None) -> int:
    """Run the scenario named by the config; returns the exit code."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        payload = _error_payload(exc, EXIT_CONFIG)
        print(json.dumps(payload, sort_keys=True))
        _try_error_report(out_dir, payload)
        return EXIT_CONFIG

    os.makedirs(out_dir, exist_ok=True)
    threads = resolve_threads(cli_threads, config.knobs)
    try:
        if config.scenario == "verify-asymptotics":
            return _run_verify(config, out_dir)
        if config.scenario == "estimate-moduli":
            return _run_moduli(config, out_dir)
        if config.scenario == "conjugacy-pair":
            return _run_conjugacy(config, out_dir)
        return _run_sweep(config, out_dir, threads)
    except ConfigError as exc:
        payload = _error_payload(exc, EXIT_CONFIG)
        print(json.dumps(payload, sort_keys=True))
        _try_error_report(out_dir, payload)
        return EXIT_CONFIG
    except SflabError as exc:
        payload = _error_payload(exc, EXIT_NUMERICS)
        print(json.dumps(payload, sort_keys=True))
        _try_error_report(out_dir, payload)
        return EXIT_NUMERICS


def sweep(config_path: str, out_dir: str, cli_threads: int | None = None) -> int:
    """Run the sweep described by the config; returns the exit code."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        payload = _error_payload(exc, EXIT_CONFIG)
        print(json.dumps(payload, sort_keys=True))
        _try_error_report(out_dir, payload)
        return EXIT_CONFIG
    if config.sweep is None:
        exc2 = ConfigError(f"{config_path}: sweep command needs a [sweep] section")
        payload = _error_payload(exc2, EXIT_CONFIG)
        print(json.dumps(payload, sort_keys=True))
        _try_error_report(out_dir, payload)
        return EXIT_CONFIG

    os.makedirs(out_dir, exist_ok=True)
    threads = resolve_threads(cli_threads, config.knobs)
    try:
        return _run_sweep(config, out_dir, threads)
    except SflabError as exc:
        payload = _error_payload(exc, EXIT_NUMERICS)
        print(json.dumps(payload, sort_keys=True))
        _try_error_report(out_dir, payload)
        return EXIT_NUMERICS


def _try_error_report(out_dir: str, payload: dict) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "report.json"), payload)
    except OSError:
        pass
