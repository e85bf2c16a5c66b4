import logging
from dataclasses import asdict

from analysis.czd import decompose, level_set_split, verify
from handlers.dispatch import Router
from handlers.inputs import measures_for, simple_part, symmetric_grid
from storage.models import ExperimentConfig, LevelReport, RunOutcome
from utils.parallel import ordered_map

router = Router()


def _decompose_and_verify(task):
    label, mu, s, config = task
    dec = decompose(mu, s, config.p)
    report = verify(mu, dec)
    split = level_set_split(mu, dec, symmetric_grid(config), config.c_x)
    report.record("level_sets", split.inclusion_holds, split.total_bound - split.omega)
    return label, dec, report, split


@router.command("cz")
def run_cz(config: ExperimentConfig, data: dict) -> RunOutcome:
    """
    Decomposes every input measure at every configured level and verifies
    each decomposition; one JSON file per (measure, level).
    """
    writer = data["writer"]
    provenance = data["provenance"]
    measures = [(label, simple_part(label, mu)) for label, mu in measures_for(config, data)]
    tasks = [(label, mu, s, config) for label, mu in measures for s in config.levels]
    logging.info(f"Decomposing {len(measures)} measure(s) at {len(config.levels)} level(s).")

    results = ordered_map(_decompose_and_verify, tasks, config.threads)

    levels = []
    files = []
    for index, (label, dec, report, split) in enumerate(results):
        entry = LevelReport(
            s=dec.level,
            intervals=dec.to_dict()["intervals"],
            checks=report.checks,
            margins=report.margins,
            passed=report.passed,
        )
        level_sets = {**asdict(split), "total_bound": split.total_bound, "within_bounds": split.holds}
        levels.append({"measure": label, **asdict(entry), "level_sets": level_sets})
        files.append(writer.write_json(
            f"cz_{label}_level{index % len(config.levels)}.json",
            {**dec.to_dict(), "checks": report.checks, "margins": report.margins, "level_sets": level_sets,
             "provenance": provenance},
        ))
        if not report.passed:
            logging.warning(f"Measure {label} at level {dec.level}: failed {report.failures()}")

    passed = all(entry["passed"] for entry in levels)
    return RunOutcome(command="cz", passed=passed, summary={"levels": levels}, files=files)
