"""Monte Carlo driver: seeded trials, aggregation and CSV output."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analysis import detect_convergence
from .config import ScenarioConfig
from .network import DirectedNetwork
from .simulation import TrialResult, run_scenario

log = logging.getLogger(__name__)

TRIAL_COLUMNS = ("trial", "iteration", "std_phase_deg", "std_freq_ppm", "lambda2", "aborted")
SUMMARY_COLUMNS = ("scenario", "N", "c", "snr_db", "algorithm", "em_mode",
                   "mean_final_std_phase_deg", "std_final_std_phase_deg", "mean_convergence_iter")
CONVERGENCE_WINDOW = 10
NODE_COLUMNS = ("trial", "iteration", "node", "freq_error_ppm", "phase_error_deg")

#: one record per trial
TrialRecord = TrialResult


@dataclass
class Summary:
    scenario: str
    N: int
    c: float
    snr_db: float
    algorithm: str
    em_mode: str
    mean_final_std_phase_deg: float
    std_final_std_phase_deg: float
    mean_convergence_iter: float
    n_trials: int
    n_aborted: int

    def row(self) -> list:
        return [self.scenario, self.N, self.c, self.snr_db, self.algorithm, self.em_mode,
                self.mean_final_std_phase_deg, self.std_final_std_phase_deg,
                self.mean_convergence_iter]


@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[TrialRecord]
    summary: Summary


def _trial(args) -> TrialRecord:
    config, trial, network, keep = args
    return run_scenario(config, trial, network=network, keep_snapshots=keep)


def run(
    config: ScenarioConfig,
    *,
    workers: int = 1,
    network: DirectedNetwork | None = None,
    trace_nodes: bool = False,
) -> RunResult:
    """Run ``config.n_trials`` independent trials and aggregate them.

    Trial ``t`` draws everything from streams keyed by
    ``(config.base_seed, t)``, so records do not depend on ``workers``.
    Aborted trials are kept in the records and left out of the aggregate.
    """
    jobs = [(config, t, network, trace_nodes) for t in range(config.n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_trial(j) for j in jobs]
    return RunResult(config, records, summarize(config, records))


def summarize(config: ScenarioConfig, records: list[TrialRecord]) -> Summary:
    done = [r for r in records if not r.aborted]
    finals = np.array([r.std_phase_deg[-1] for r in done])
    # runs shorter than the detection window have no convergence estimate
    conv = [detect_convergence(r.std_phase_deg, CONVERGENCE_WINDOW)
            for r in done if len(r.std_phase_deg) >= CONVERGENCE_WINDOW]
    conv = [c for c in conv if c is not None]
    nan = float("nan")
    return Summary(
        scenario=config.name,
        N=config.n_nodes,
        c=config.connectivity,
        snr_db=config.snr_db,
        algorithm=config.algorithm,
        em_mode=config.em_mode,
        mean_final_std_phase_deg=float(finals.mean()) if len(finals) else nan,
        std_final_std_phase_deg=float(finals.std(ddof=1)) if len(finals) > 1 else nan,
        mean_convergence_iter=float(np.mean(conv)) if conv else nan,
        n_trials=len(records),
        n_aborted=len(records) - len(done),
    )


def _header(timestamp: bool) -> str:
    if not timestamp:
        return ""
    now = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
    return f"# generated {now}\n"


def trials_csv(records: list[TrialRecord], timestamp: bool = False) -> str:
    buf = io.StringIO()
    buf.write(_header(timestamp))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in records:
        for it, (sp, sf) in enumerate(zip(r.std_phase_deg, r.std_freq_ppm)):
            w.writerow([r.trial, it, repr(float(sp)), repr(float(sf)), repr(r.lambda2), int(r.aborted)])
    return buf.getvalue()


def summary_csv(summaries: list[Summary], timestamp: bool = False) -> str:
    buf = io.StringIO()
    buf.write(_header(timestamp))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        w.writerow([repr(v) if isinstance(v, float) else v for v in s.row()])
    return buf.getvalue()


def nodes_csv(records: list[TrialRecord], timestamp: bool = False) -> str:
    """Per-node error traces; needs records run with ``trace_nodes``."""
    buf = io.StringIO()
    buf.write(_header(timestamp))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NODE_COLUMNS)
    for r in records:
        for snap in r.snapshots or ():
            for node, (fe, pe) in enumerate(zip(snap.freq_errors_ppm, snap.phase_errors_deg)):
                w.writerow([r.trial, snap.iteration, node, repr(float(fe)), repr(float(pe))])
    return buf.getvalue()


def write_outputs(result: RunResult, path, *, timestamp: bool = True,
                  trace_nodes: bool = False) -> list[Path]:
    """Write ``<path>`` (per-trial rows), ``<stem>_summary.csv`` and, with
    ``trace_nodes``, ``<stem>_nodes.csv``. Returns the written paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = [path, path.with_name(path.stem + "_summary.csv")]
    written[0].write_text(trials_csv(result.records, timestamp))
    written[1].write_text(summary_csv([result.summary], timestamp))
    if trace_nodes:
        nodes = path.with_name(path.stem + "_nodes.csv")
        nodes.write_text(nodes_csv(result.records, timestamp))
        written.append(nodes)
    return written
