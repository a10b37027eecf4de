"""Plateau-based phase switching and the wiggle/bob reward terms.

Returns are grouped into back-to-back, non-overlapping windows of
``episode_window`` episodes counted from the start of the phase. The plateau
test compares the two most recent complete windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BadDirection
from .traces import BEHAVIORS

CONTINUE = "continue"
CONVERGED = "converged"
CAPPED = "capped"

MAX_RETRIES = 2
COEFF_NAMES = ("alpha", "lambda_back", "lambda_v", "lambda_jerk", "k", "beta", "lambda_drift")


@dataclass(frozen=True)
class PlateauConfig:
    min_steps: int = 250_000_000
    max_steps_phase: int = 1_500_000_000
    episode_window: int = 50_000
    min_return: float = 500.0
    rel_change: float = 0.05
    std_coeff: float = 1.0
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.episode_window < 2:
            raise ValueError("episode_window must be at least 2")
        for name in ("min_steps", "max_steps_phase", "rel_change", "std_coeff", "epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class PhaseState:
    phase: str = "walk"
    aggregated_steps: int = 0
    n_episodes: int = 0
    prev_window: np.ndarray | None = None
    recent_window: np.ndarray | None = None
    partial: list[float] = field(default_factory=list)
    retries_used: int = 0
    status: str = "running"  # running | converged | capped | failed

    def window_means(self):
        if self.prev_window is None or self.recent_window is None:
            return None
        return float(self.prev_window.mean()), float(self.recent_window.mean())


def plateau_check(state: PhaseState, cfg: PlateauConfig) -> bool:
    """True when the warm-up guard has passed and both windows satisfy the three criteria."""
    if state.aggregated_steps < cfg.min_steps:
        return False
    means = state.window_means()
    if means is None:
        return False
    mu_prev, mu_recent = means
    if mu_recent < cfg.min_return:
        return False
    diff = abs(mu_recent - mu_prev)
    if diff / (abs(mu_prev) + cfg.epsilon) > cfg.rel_change:
        return False
    sigma = float(np.concatenate([state.prev_window, state.recent_window]).std())
    return diff <= cfg.std_coeff * sigma


def plateau_step(state: PhaseState, new_returns: Sequence[float], new_steps: int, cfg: PlateauConfig):
    """Ingest a batch of finished episodes and decide whether the phase stops.

    Returns ``(new_state, decision)``; the input state is not modified. Once a
    phase has stopped, further calls return the same decision.
    """
    if state.status in (CONVERGED, CAPPED, "failed"):
        return state, (state.status if state.status != "failed" else CAPPED)
    rets = [float(r) for r in new_returns]
    if not all(math.isfinite(r) for r in rets):
        raise ValueError("episode returns must be finite")
    W = cfg.episode_window
    prev, recent = state.prev_window, state.recent_window
    partial = list(state.partial)
    for r in rets:
        partial.append(r)
        if len(partial) == W:
            prev, recent = recent, np.asarray(partial)
            partial = []
    new = replace(
        state,
        aggregated_steps=state.aggregated_steps + int(new_steps),
        n_episodes=state.n_episodes + len(rets),
        prev_window=prev,
        recent_window=recent,
        partial=partial,
    )
    if plateau_check(new, cfg):
        new.status = CONVERGED
        return new, CONVERGED
    if new.aggregated_steps >= cfg.max_steps_phase:
        new.status = CAPPED
        return new, CAPPED
    return new, CONTINUE


def phase_outcome(state: PhaseState, cfg: PlateauConfig) -> str:
    """Map a stopped phase to a controller event.

    A capped phase whose recent window reached ``min_return`` is accepted as
    done; otherwise it failed its budget.
    """
    if state.status == CONVERGED:
        return "converged"
    if state.status == CAPPED:
        means = state.window_means()
        if means is not None and means[1] >= cfg.min_return:
            return "converged"
        return "failed_budget"
    raise ValueError(f"phase still {state.status}")


@dataclass(frozen=True)
class CurriculumState:
    behavior: str = "walk"
    cycle: int = 0
    retries_used: int = 0
    attempt: int = 0  # global attempt counter, drives the seed offset
    checkpoint: str | None = None  # policy the current attempt started from
    reverted: bool = False
    aborted: bool = False

    @property
    def seed_offset(self) -> int:
        return self.attempt


def phase_controller_step(state: CurriculumState, event: str, policy_ref: str | None = None) -> CurriculumState:
    """Advance walk -> wiggle -> bob -> walk (next cycle) or retry a failed phase.

    On ``failed_budget`` the phase restarts from the same starting checkpoint
    with a fresh seed offset; a third failure of one phase aborts the run.
    """
    if state.aborted:
        return state
    if event == "converged":
        k = BEHAVIORS.index(state.behavior)
        nxt = BEHAVIORS[(k + 1) % len(BEHAVIORS)]
        return CurriculumState(
            behavior=nxt,
            cycle=state.cycle + (1 if nxt == BEHAVIORS[0] else 0),
            retries_used=0,
            attempt=state.attempt + 1,
            checkpoint=policy_ref if policy_ref is not None else state.checkpoint,
        )
    if event == "failed_budget":
        if state.retries_used >= MAX_RETRIES:
            return replace(state, aborted=True, reverted=True)
        return replace(state, retries_used=state.retries_used + 1, attempt=state.attempt + 1, reverted=True)
    raise ValueError(f"unknown controller event {event!r}")


@dataclass(frozen=True)
class RewardCoeffs:
    """Reward weights. There are no sensible defaults, so every weight must be given."""

    alpha: float
    lambda_back: float
    lambda_v: float
    lambda_jerk: float
    k: float
    beta: float
    lambda_drift: float
    streak_cap: int | None = None

    @classmethod
    def only(cls, name: str, value: float = 1.0, **kw) -> "RewardCoeffs":
        """All weights zero except ``name``."""
        zeros = dict.fromkeys(COEFF_NAMES, 0.0)
        zeros[name] = value
        return cls(**zeros, **kw)

    def __post_init__(self):
        for name in COEFF_NAMES:
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative")


def update_streak(streak: int, s: int, omega_z: float) -> int:
    """Consecutive steps turning in the chosen direction."""
    return streak + 1 if s * omega_z > 0 else 0


def wiggle_reward(s: int, omega_z: float, v_bxy, delta_a, streak: int, c: RewardCoeffs) -> float:
    if s not in (1, -1):
        raise BadDirection(f"wiggle direction must be +1 or -1, got {s}")
    if c.streak_cap is not None:
        streak = min(streak, c.streak_cap)
    v = np.asarray(v_bxy, dtype=float)
    da = np.asarray(delta_a, dtype=float)
    turn = s * omega_z
    return float(
        c.alpha * max(turn, 0.0)
        - c.lambda_back * max(-turn, 0.0)
        - c.lambda_v * np.linalg.norm(v)
        - c.lambda_jerk * float(da @ da)
        + c.k * streak
    )


def bob_reward(v_z: float, v_bxy, delta_a, c: RewardCoeffs) -> float:
    v = np.asarray(v_bxy, dtype=float)
    da = np.asarray(delta_a, dtype=float)
    return float(c.beta * max(v_z, 0.0) - c.lambda_drift * np.linalg.norm(v) - c.lambda_jerk * float(da @ da))
