import logging
import math

import numpy as np

from analysis.dyadic import Interval
from analysis.errors import ConfigError, LadderError, SingularPerturbationError
from analysis.scattering import (
    boundary_ladder,
    det_probe_detail,
    hypothesis_check,
    kato_smoothness_constant,
    refinement_study,
    resolvent_identity_residuals,
    sandwiched_resolvent,
    wave_probe,
)
from analysis.schatten import schatten_norms, smallest_singular_value_of_shift
from handlers.dispatch import Router
from handlers.inputs import det_order, model_for
from storage.models import ExperimentConfig, RunOutcome
from utils.generators import smooth_coupling, wavepacket

router = Router()

ISOMETRY_TOLERANCE = 1e-10
# Times 10 * 2^m used when a refinement study has no configured times.
REFINE_TIMES = tuple(10.0 * 2 ** m for m in range(12))


def _residuals(model, z_points):
    rows, singular = [], []
    for z in z_points:
        try:
            r = resolvent_identity_residuals(model, z)
            rows.append({"z": z, "r1": r.r1, "r2": r.r2, "tolerance": r.tolerance, "holds": r.holds})
        except SingularPerturbationError as e:
            logging.warning(str(e))
            singular.append({"z": z, "smallest_singular_value": e.smallest_singular_value})
    return rows, singular


def _det_ladder(model, lam, epsilons, q, threshold):
    rows = []
    for eps in epsilons:
        det = det_probe_detail(model, lam, eps, q)
        b0 = sandwiched_resolvent(model, 0, complex(lam, eps))
        sigma = smallest_singular_value_of_shift(b0 @ model.j)
        rows.append((eps, det.value.real, det.value.imag, det.relative_modulus, sigma,
                     det.is_invertible(threshold)))
    return rows


def _refinement(config: ExperimentConfig, kind: str):
    if kind != "example_e1":
        raise ConfigError(f"A refinement study needs the example_e1 generator, got '{kind}'.")
    spec = config.generator
    shape = smooth_coupling(spec.channels, spec.rows)
    logging.info(f"Refinement study over grids {config.refine} at lambda = {config.ladder.lam}.")
    return refinement_study(
        lambda x: spec.coupling * shape(x),
        config.refine,
        config.ladder.lam,
        config.times or REFINE_TIMES,
        wavepacket,
        rungs=config.ladder.count,
        norm=config.p,
    )


@router.command("scatter")
def run_scatter(config: ExperimentConfig, data: dict) -> RunOutcome:
    """
    Identity residuals, hypothesis margins, determinant and boundary
    ladders and (when times are configured) a wave-operator time series for
    one model.
    """
    writer = data["writer"]
    source = model_for(config, data)
    model = source.model
    files = []
    summary: dict = {"model": {"kind": source.kind, "dimension": model.dimension, "channels": model.channels}}

    residuals, singular = _residuals(model, config.z_points())
    summary["identity_residuals"] = residuals
    summary["singular_points"] = singular

    hypothesis = hypothesis_check(model, config.p, Interval.real_line(), source.nu0, config.probe_depth)
    summary["hypothesis"] = {
        "worst_margin": hypothesis.worst_margin,
        "probes": hypothesis.probes,
        "passed": hypothesis.passed,
        "violation": None if hypothesis.violation is None else [hypothesis.violation.left, hypothesis.violation.right],
    }
    summary["kato_constant"] = kato_smoothness_constant(model, 0, Interval.real_line(), config.probe_depth)

    lam = config.ladder.lam
    epsilons = config.ladder.epsilons()
    threshold = float(config.tolerances.get("det_threshold", 1e-10))
    det_rows = _det_ladder(model, lam, epsilons, det_order(config), threshold)
    files.append(writer.write_csv("det_ladder.csv",
                                  ["eps", "re", "im", "relative_modulus", "sigma_min", "invertible"], det_rows))
    summary["det_probe"] = {
        "q": det_order(config),
        "min_relative_modulus": min(r[3] for r in det_rows),
        "agrees_with_singular_values": all(r[5] == (r[4] >= threshold) for r in det_rows),
    }

    ladders = {}
    for which in (0, 1):
        try:
            ladder = boundary_ladder(model, which, lam, epsilons, config.p)
        except LadderError as e:
            logging.warning(f"Boundary ladder for H{which} skipped: {e}")
            ladders[f"H{which}"] = {"skipped": str(e)}
            continue
        sizes = schatten_norms(ladder.values, config.p)
        diffs = [math.nan] + list(ladder.differences)
        files.append(writer.write_csv(f"ladder_H{which}.csv", ["eps", "norm", "re_norm", "im_norm", "difference"],
                                      zip(ladder.epsilons, sizes, ladder.real_sizes, ladder.imag_sizes, diffs)))
        ladders[f"H{which}"] = {
            "floor": ladder.floor,
            "at_eigenvalue": ladder.at_eigenvalue,
            "max_difference": ladder.max_difference,
            "slope": ladder.slope,
            "final_re_norm": float(ladder.real_sizes[-1]),
            "final_im_norm": float(ladder.imag_sizes[-1]),
        }
    summary["boundary_ladders"] = ladders

    isometry_ok = True
    if config.times:
        if source.diagonal:
            psi = wavepacket(model)
        else:
            rng = data["streams"](2)[1]
            psi = rng.standard_normal(model.dimension) + 1j * rng.standard_normal(model.dimension)
            psi = psi / np.linalg.norm(psi)
        probe = wave_probe(model, psi, config.times)
        increments = [math.nan] + list(probe.increments)
        files.append(writer.write_csv("wave.csv", ["t", "increment", "isometry_defect", "intertwining"],
                                      zip(probe.times, increments, probe.isometry_defects, probe.intertwining)))
        isometry_ok = bool(np.all(probe.isometry_defects <= ISOMETRY_TOLERANCE))
        summary["wave_probe"] = {
            "monotone_window": probe.monotone_window,
            "max_isometry_defect": float(np.max(probe.isometry_defects)),
            "final_increment": float(probe.increments[-1]) if probe.increments.size else 0.0,
        }

    refinement_ok = True
    if config.refine:
        study = _refinement(config, source.kind)
        files.append(writer.write_csv(
            "refinement.csv",
            ["grid_n", "monotone_window", "max_isometry_defect", "ladder_max_difference", "grid_gap", "contraction"],
            [(level.grid_n, level.monotone_window, level.max_isometry_defect, level.ladder_max_difference,
              gap, contraction)
             for level, gap, contraction in zip(study.levels, study.grid_gaps + [math.nan],
                                                study.contractions + [math.nan, math.nan])],
        ))
        refinement_ok = study.window_grows and study.ladders_contract
        summary["refinement"] = {
            "grid_sizes": [level.grid_n for level in study.levels],
            "windows": [level.monotone_window for level in study.levels],
            "contractions": study.contractions,
            "window_grows": study.window_grows,
            "ladders_contract": study.ladders_contract,
        }

    passed = all(r["holds"] for r in residuals) and isometry_ok and refinement_ok
    status = "singular_perturbation" if singular else "ok"
    return RunOutcome(command="scatter", passed=passed, summary=summary, files=files, status=status)
