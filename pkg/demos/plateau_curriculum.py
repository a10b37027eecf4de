"""
Deciding when a training phase has settled
==========================================

A toy return stream rises and then flattens. Returns are grouped in windows;
a phase ends when two consecutive windows agree (relative change and spread
checks) after a warm-up, or when the step budget runs out. A phase that runs
out of budget below the target return is retried, at most twice.
"""

import numpy as np

from selfcore.curriculum import (
    CurriculumState,
    PhaseState,
    PlateauConfig,
    phase_controller_step,
    phase_outcome,
    plateau_step,
)

cfg = PlateauConfig(min_steps=20_000, max_steps_phase=200_000, episode_window=50, min_return=500.0)


def run_phase(ceiling, seed):
    r = np.random.default_rng(seed)
    state, steps = PhaseState(), 0
    while True:
        level = ceiling * (1 - np.exp(-steps / 30_000))
        batch = level + r.normal(0, 20, 10)
        state, decision = plateau_step(state, batch, 1_000, cfg)
        steps += 1_000
        if decision != "continue":
            return state, decision


ctrl = CurriculumState()
ceilings = {"walk": 700.0, "wiggle": 450.0, "bob": 650.0}
while not ctrl.aborted and ctrl.cycle < 1:
    # the wiggle phase only learns enough on its third attempt
    ceiling = ceilings[ctrl.behavior] + (300.0 if ctrl.behavior == "wiggle" and ctrl.retries_used == 2 else 0.0)
    state, decision = run_phase(ceiling, seed=ctrl.seed_offset)
    event = phase_outcome(state, cfg)
    mu = state.window_means()
    print(f"{ctrl.behavior:6s} attempt {ctrl.retries_used}: {decision:9s} at {state.aggregated_steps:7d} steps, "
          f"recent mean {mu[1]:6.1f} -> {event}")
    ctrl = phase_controller_step(ctrl, event, policy_ref=f"{ctrl.behavior}-{ctrl.attempt}")
print("next:", ctrl.behavior, "cycle", ctrl.cycle, "aborted" if ctrl.aborted else "")
