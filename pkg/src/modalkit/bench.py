"""Monte Carlo benchmark harness comparing the grid-search baseline with the
stochastic-perturbation estimator over a set of noise levels.

Seeding discipline: every (case, replication) pair derives its own seeds from
the master seed through a SplitMix-style mixer, so runs are reproducible,
cases are independent, and replications can be evaluated in any order (or in
parallel) with identical results.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import baseline, perturb
from .model import Hyperparameters, ModalModel, add_noise, snr, synthesize

__all__ = ["BenchConfig", "default_config", "run_bench", "mix_seed"]

_FMT = "%.17g"

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Mix integers into a 64-bit seed (SplitMix64 absorption)."""
    state = 0x243F6A8885A308D3
    for p in parts:
        state = _splitmix64((state ^ (int(p) & _MASK64)) & _MASK64)
    return state


@dataclass(frozen=True)
class BenchConfig:
    model: ModalModel
    n_standard: int = 120
    n_proposed: int = 80
    sigma_cases: tuple = (2.0 * math.sqrt(2.0), math.sqrt(2.0),
                          math.sqrt(2.0) / 3.0, math.sqrt(2.0) / 10.0)
    replications: int = 100
    hyperparameters: Hyperparameters = Hyperparameters()
    master_seed: int = 202406
    delta: float = 1.0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.sigma_cases:
            raise ValueError("sigma_cases must be nonempty")


def default_config(**overrides) -> BenchConfig:
    """The built-in five-mode benchmark: three fast-decaying strong modes and
    two near-undamped weak modes with closely spaced frequencies."""
    xi = (
        np.exp(-0.30 - 1j * 2 * math.pi * 0.35),
        np.exp(-0.10 - 1j * 2 * math.pi * 0.30),
        np.exp(-0.05 - 1j * 2 * math.pi * 0.28),
        np.exp(-0.0001 + 1j * 2 * math.pi * 0.20),
        np.exp(-0.0001 + 1j * 2 * math.pi * 0.21),
    )
    c = (20.0, 6.0, 3.0, 1.0, 1.0)
    model = ModalModel(c=c, xi=xi)
    return BenchConfig(model=model, **overrides)


def _worker_count() -> int:
    cap = os.environ.get("MODALKIT_THREADS")
    avail = os.cpu_count() or 1
    if cap is None:
        return avail
    try:
        return max(1, min(int(cap), avail))
    except ValueError:
        return avail


def run_replication(config: BenchConfig, case_idx: int, rep_idx: int) -> list[dict]:
    """Run both estimators on one noise realization; returns two record rows."""
    sigma = config.sigma_cases[case_idx]
    _, snr_min = snr(config.model, sigma)
    clean = synthesize(config.model, config.n_standard, config.delta)
    noisy = add_noise(clean, sigma, mix_seed(config.master_seed, case_idx, rep_idx, 0))

    gs = baseline.gpof_grid_search(noisy.a)
    rec_std = baseline.relative_error(config.model, gs.model, sigma=sigma)

    report = perturb.estimate(
        noisy.a[: config.n_proposed],
        sigma,
        config.hyperparameters,
        mix_seed(config.master_seed, case_idx, rep_idx, 1),
    )
    est = (
        ModalModel(c=report.c_hat, xi=report.xi_hat) if report.p_ott >= 1 else None
    )
    rec_prop = baseline.relative_error(config.model, est, sigma=sigma)

    base = {"case": case_idx, "snr": snr_min, "sigma": sigma, "replication": rep_idx}
    return [
        {**base, "method": "standard", "p_ott": rec_std.p_ott, "e": rec_std.e},
        {**base, "method": "proposed", "p_ott": rec_prop.p_ott, "e": rec_prop.e},
    ]


def _worker(args) -> tuple[tuple[int, int], list[dict]]:
    config, case_idx, rep_idx = args
    return (case_idx, rep_idx), run_replication(config, case_idx, rep_idx)


def collect_records(config: BenchConfig) -> list[dict]:
    """All replication records, merged in (case, replication) order."""
    tasks = [
        (config, ci, h)
        for ci in range(len(config.sigma_cases))
        for h in range(config.replications)
    ]
    workers = _worker_count()
    results: dict[tuple[int, int], list[dict]] = {}
    if workers <= 1 or len(tasks) == 1:
        for t in tasks:
            key, rows = _worker(t)
            results[key] = rows
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, rows in pool.map(_worker, tasks, chunksize=1):
                results[key] = rows
    out: list[dict] = []
    for ci in range(len(config.sigma_cases)):
        for h in range(config.replications):
            out.extend(results[(ci, h)])
    return out


def summarize(records: list[dict]) -> list[dict]:
    """Per-method, per-case (MSE, N_sigma) table rows."""
    table = []
    cases = sorted({r["case"] for r in records})
    for method in ("standard", "proposed"):
        for ci in cases:
            rows = [r for r in records if r["method"] == method and r["case"] == ci]
            errs = [
                baseline.ErrorRecord(e=r["e"], p_ott=r["p_ott"], sigma=r["sigma"])
                for r in rows
            ]
            mse, n_sigma = baseline.mse_aggregate(errs)
            table.append(
                {
                    "method": method,
                    "case": ci,
                    "snr": rows[0]["snr"],
                    "sigma": rows[0]["sigma"],
                    "mse": mse,
                    "n_sigma": n_sigma,
                    "replications": len(rows),
                }
            )
    return table


def _config_doc(config: BenchConfig) -> dict:
    return {
        "model": {
            "p": config.model.p,
            "modes": [
                {"re_c": c.real, "im_c": c.imag, "re_xi": x.real, "im_xi": x.imag}
                for c, x in zip(config.model.c, config.model.xi)
            ],
        },
        "n_standard": config.n_standard,
        "n_proposed": config.n_proposed,
        "sigma_cases": list(config.sigma_cases),
        "replications": config.replications,
        "master_seed": config.master_seed,
        "delta": config.delta,
        "hyperparameters": asdict(config.hyperparameters),
    }


def config_from_doc(doc: dict) -> BenchConfig:
    """Build a BenchConfig from its JSON document; missing keys take the
    built-in benchmark defaults."""
    base = default_config()
    model = base.model
    if "model" in doc:
        modes = doc["model"]["modes"]
        model = ModalModel(
            c=tuple(complex(m["re_c"], m["im_c"]) for m in modes),
            xi=tuple(complex(m["re_xi"], m["im_xi"]) for m in modes),
        )
    hp = base.hyperparameters
    if "hyperparameters" in doc:
        merged = asdict(hp)
        merged.update(doc["hyperparameters"])
        merged["lattice_bounds"] = tuple(merged["lattice_bounds"])
        hp = Hyperparameters(**merged)
    return BenchConfig(
        model=model,
        n_standard=int(doc.get("n_standard", base.n_standard)),
        n_proposed=int(doc.get("n_proposed", base.n_proposed)),
        sigma_cases=tuple(doc.get("sigma_cases", base.sigma_cases)),
        replications=int(doc.get("replications", base.replications)),
        hyperparameters=hp,
        master_seed=int(doc.get("master_seed", base.master_seed)),
        delta=float(doc.get("delta", base.delta)),
    )


def run_bench(config: BenchConfig, output_dir) -> dict:
    """Run the full benchmark and write records, summary table, order
    histograms and a JSON report into output_dir.  Deterministic for a fixed
    config (byte-identical files on rerun)."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    records = collect_records(config)
    table = summarize(records)

    lines = ["case,snr,sigma,replication,method,p_ott,e"]
    for r in records:
        lines.append(
            f"{r['case']},{_FMT % r['snr']},{_FMT % r['sigma']},"
            f"{r['replication']},{r['method']},{r['p_ott']},{_FMT % r['e']}"
        )
    (output_dir / "records.csv").write_text("\n".join(lines) + "\n")

    lines = ["method,snr,sigma,mse,n_sigma,replications"]
    for row in table:
        mse_txt = _FMT % row["mse"] if row["mse"] is not None else ""
        lines.append(
            f"{row['method']},{_FMT % row['snr']},{_FMT % row['sigma']},"
            f"{mse_txt},{row['n_sigma']},{row['replications']}"
        )
    (output_dir / "table1.csv").write_text("\n".join(lines) + "\n")

    lines = ["method,snr,p_ott,count"]
    for method in ("standard", "proposed"):
        for ci in sorted({r["case"] for r in records}):
            rows = [r for r in records if r["method"] == method and r["case"] == ci]
            counts: dict[int, int] = {}
            for r in rows:
                counts[r["p_ott"]] = counts.get(r["p_ott"], 0) + 1
            for p_ott in sorted(counts):
                lines.append(
                    f"{method},{_FMT % rows[0]['snr']},{p_ott},{counts[p_ott]}"
                )
    (output_dir / "p_ott_hist.csv").write_text("\n".join(lines) + "\n")

    report = {"config": _config_doc(config), "table": table}
    (output_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n"
    )
    return report
