"""Packaged experiments: output difference of two separating trajectories under irregular sampling."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .sampling import bounded_gap_random, materialize, periodic
from .sysmodel import simulate_pair, spiral

REPORT_TIMES = (50, 100, 150)


@dataclass(frozen=True)
class GrowthConfig:
    """Defaults give a figure-1-style run: a slowly diverging spiral sampled with gaps up to 25."""

    rho: float = 1.04
    theta_deg: float = 25.0
    delta_max: int = 25
    seed: int = 1
    horizon: int = 150
    dx0: tuple = (1.0, 0.0)
    full_sampling: bool = False


STABLE = GrowthConfig(rho=0.9)


@dataclass
class GrowthRun:
    config: GrowthConfig
    t: np.ndarray
    dy: np.ndarray
    sampled: np.ndarray  # bool mask over t
    ratio: dict  # T -> R(T)

    def summary(self) -> dict:
        return {"config": asdict(self.config), "R": {str(k): v for k, v in self.ratio.items()},
                "samples": int(self.sampled.sum())}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "dy", "sampled"])
        for t, d, s in zip(self.t, self.dy, self.sampled):
            w.writerow([int(t), repr(float(d)), int(s)])
        return buf.getvalue()


def growth_ratio(dy: np.ndarray, mask: np.ndarray, T: int) -> float:
    """``max_{t<=T} |dy| / max_{t in K, t<=T} |dy|``; infinite if nothing was sampled yet."""
    full = float(np.max(np.abs(dy[: T + 1])))
    samp = np.abs(dy[: T + 1])[mask[: T + 1]]
    if samp.size == 0 or samp.max() == 0.0:
        return float("inf")
    return full / float(samp.max())


def figure1_experiment(cfg: GrowthConfig = GrowthConfig()) -> GrowthRun:
    sys = spiral(cfg.rho, cfg.theta_deg)
    T = max(cfg.horizon, *REPORT_TIMES)
    pair = simulate_pair(sys, np.asarray(cfg.dx0, float), np.zeros(2), T=T)
    dy = pair.dy_vec[:, 0]
    scheme = periodic(1) if cfg.full_sampling else bounded_gap_random(cfg.delta_max, cfg.seed)
    mask = materialize(scheme, 1, T).mask(T)
    ratio = {T_: growth_ratio(dy, mask, T_) for T_ in REPORT_TIMES}
    return GrowthRun(cfg, np.arange(T + 1), dy, mask, ratio)


def growth_seed_sweep(seeds, **overrides) -> np.ndarray:
    """``R(150) / R(50)`` for each seed, to see how often the default shape appears."""
    out = []
    for s in seeds:
        run = figure1_experiment(GrowthConfig(seed=int(s), **overrides))
        out.append(run.ratio[150] / run.ratio[50])
    return np.asarray(out)
