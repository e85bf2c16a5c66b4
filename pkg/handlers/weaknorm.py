import logging
from dataclasses import asdict
from typing import Optional

from analysis import bounds
from analysis.opmeasure import OpMeasure, total_variation
from analysis.transforms import GridFunction, maximal_profile, mbeta_profile, weak_quasinorm
from handlers.dispatch import Router
from handlers.inputs import cone_settings, measures_for, offset_grid, symmetric_grid
from storage.models import ExperimentConfig, OperatorAudit, RunOutcome

router = Router()

# Bound constants as (value at C_X = 0, slope in C_X).
_BOUND_COEFFICIENTS = {
    "H": (30.0, 4.0),
    "Hsharp": (17592.0, 2304.0),
    "Tr": (35274.0, 4608.0),
    "T": (70548.0, 9216.0),
}


def claimed_bound(operator: str, c_x: float, reference: float, beta: float = 0.5) -> float:
    """
    The right-hand side of the weak-type estimate. `reference` is ||mu||(R),
    or the weak quasi-norm of the input profile for M_beta.
    """
    if operator == "M":
        return bounds.hardy_littlewood() * reference
    if operator == "H":
        return bounds.hilbert_weak(c_x) * reference
    if operator == "Hsharp":
        return bounds.hilbert_sharp_weak(c_x) * reference
    if operator == "Tr":
        return bounds.nontangential_weak(c_x) * reference
    if operator == "Mbeta":
        return bounds.mbeta_weak(beta) * reference
    return bounds.nontangential_weak_doubled(c_x) * reference


def _profile(operator: str, mu: OpMeasure, config: ExperimentConfig, threads: int,
             cache: dict) -> GridFunction:
    if operator not in cache:
        if operator == "Mbeta":
            # M_beta acts on the ||H mu|| profile.
            cache[operator] = mbeta_profile(_profile("H", mu, config, threads, cache), config.beta)
        else:
            grid, _ = offset_grid(symmetric_grid(config), mu)
            kind = "T" if operator == "Tr" else operator
            r_min = config.r_min if operator == "Tr" else 0.0
            cache[operator] = maximal_profile(kind, mu, grid, config.p, r_min=r_min,
                                              cone=cone_settings(config), threads=threads)
    return cache[operator]


def audit_operator(operator: str, mu: OpMeasure, config: ExperimentConfig, threads: int,
                   cache: Optional[dict] = None):
    """Profile of one maximal function over the grid and its weak-type audit."""
    cache = {} if cache is None else cache
    _, shifted = offset_grid(symmetric_grid(config), mu)
    profile = _profile(operator, mu, config, threads, cache)
    quasinorm = weak_quasinorm(profile)
    if operator == "Mbeta":
        reference = weak_quasinorm(cache["H"])
    else:
        reference = total_variation(mu, norm=config.p)
    bound = claimed_bound(operator, config.c_x, reference, config.beta)
    minimal = None
    if operator in _BOUND_COEFFICIENTS:
        minimal = bounds.minimal_c_x(quasinorm, reference, *_BOUND_COEFFICIENTS[operator])
    audit = OperatorAudit(
        operator=operator,
        quasinorm=quasinorm,
        claimed_bound=bound,
        c_x=config.c_x,
        minimal_feasible_c_x=minimal,
        passed=quasinorm <= bound,
        offset_applied=shifted,
        reference=reference,
    )
    return audit, profile


@router.command("weaknorm")
def run_weaknorm(config: ExperimentConfig, data: dict) -> RunOutcome:
    """
    Samples each requested maximal function on the grid, writes the profile
    as CSV and audits its weak quasi-norm against the explicit constant.
    """
    writer = data["writer"]
    audits = []
    files = []
    for label, mu in measures_for(config, data):
        cache = {}
        for operator in config.operators:
            if operator == "Hsharp" and mu.density.cell_count:
                logging.warning(f"Skipping H-sharp for {label}: it is defined for simple measures only.")
                continue
            audit, profile = audit_operator(operator, mu, config, config.threads, cache)
            logging.info(f"{label} {operator}: quasinorm {audit.quasinorm:.6g} vs bound {audit.claimed_bound:.6g}")
            files.append(writer.write_csv(
                f"weaknorm_{label}_{operator}.csv",
                ["lambda", "value"],
                zip(profile.nodes(), profile.samples),
            ))
            audits.append({"measure": label, **asdict(audit)})

    passed = all(a["passed"] for a in audits)
    return RunOutcome(command="weaknorm", passed=passed, summary={"audits": audits}, files=files)
