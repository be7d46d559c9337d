"""Behavior attestation with a monitoring gate.

Each round the chief rebuilds every worker's local model from its submitted
update and measures its error on a private validation set. The error delta
against the worker's previous round drives a strike counter; a worker with
enough strikes inside a sliding window is permanently excluded. No verdict is
issued before round ``delta`` -- during the monitoring period the histories
accumulate but nobody is excluded.
"""
from collections import deque
from dataclasses import dataclass, field

from . import model


class DefenseError(ValueError):
    pass


@dataclass(frozen=True)
class MonitorConfig:
    delta: int = 0
    tau: float = 0.0
    window: int = 5
    strikes_to_exclude: int = 3
    reset_on_improve: bool = False

    def __post_init__(self):
        if self.delta < 0:
            raise DefenseError("delta must be >= 0")
        if self.window < 1:
            raise DefenseError("window must be >= 1")
        if self.strikes_to_exclude < 1:
            raise DefenseError("strikes_to_exclude must be >= 1")


@dataclass
class AttestationState:
    """Per-worker validation-error history plus the permanent exclusion set."""

    error_history: dict = field(default_factory=dict)
    strike_counts: dict = field(default_factory=dict)
    excluded: set = field(default_factory=set)
    excluded_at: dict = field(default_factory=dict)
    _windows: dict = field(default_factory=dict)
    _last_attested: dict = field(default_factory=dict)

    @classmethod
    def for_workers(cls, worker_ids):
        state = cls()
        for wid in worker_ids:
            state.error_history[wid] = []
            state.strike_counts[wid] = 0
        return state


def is_active(round_t: int, delta: int) -> bool:
    """True once the monitoring period is over and verdicts may be issued."""
    if round_t < 0:
        raise DefenseError("round must be >= 0")
    return round_t >= delta


def attest(state, worker_id, local_model, arch, validation, round_t) -> float:
    """Score one submission; returns the error delta vs the previous round.

    The first observation for a worker returns 0 by convention.
    """
    if worker_id in state.excluded:
        raise DefenseError(f"worker {worker_id} is excluded and cannot attest")
    if len(validation) == 0:
        raise DefenseError("validation set is empty")
    _, err = model.evaluate(arch, local_model, validation)
    hist = state.error_history.setdefault(worker_id, [])
    delta_err = 0.0 if not hist else err - hist[-1]
    hist.append(err)
    state._last_attested[worker_id] = round_t
    return delta_err


def update_verdicts(state, config: MonitorConfig, round_t: int) -> set:
    """Apply the strike rule to this round's attestations; returns new exclusions.

    Inside the monitoring period (round < delta) this is a no-op: histories
    keep growing but strike counts stay untouched. Afterwards, a worker earns
    a strike when its error delta exceeds tau. Strikes age out of a sliding
    window of verdict rounds; with ``reset_on_improve`` a single improving
    round also clears the count. Reaching ``strikes_to_exclude`` inside the
    window excludes the worker permanently.
    """
    if not is_active(round_t, config.delta):
        return set()
    newly = set()
    for wid, hist in sorted(state.error_history.items()):
        if wid in state.excluded or state._last_attested.get(wid) != round_t:
            continue
        delta_err = hist[-1] - hist[-2] if len(hist) >= 2 else 0.0
        strike = delta_err > config.tau
        window = state._windows.get(wid)
        if window is None or window.maxlen != config.window:
            window = deque(window or (), maxlen=config.window)
            state._windows[wid] = window
        if config.reset_on_improve and not strike:
            window.clear()
        else:
            window.append(strike)
        state.strike_counts[wid] = sum(window)
        if state.strike_counts[wid] >= config.strikes_to_exclude:
            state.excluded.add(wid)
            state.excluded_at[wid] = round_t
            newly.add(wid)
    return newly
