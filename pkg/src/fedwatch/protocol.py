"""Round-based chief/worker loop tying together training, attack and defense.

One round: draw roles, collect worker updates (real SGD or fabricated),
attest them if the defense is on, drop freshly excluded submissions, aggregate
the survivors, update the global model, evaluate on the test set. Every random
draw comes from a (seed, purpose, worker, round) substream, so a run replays
identically regardless of scheduling.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import adversary, aggregation, defense, metrics, model
from .adversary import AttackPattern, FabricationParams, MALICIOUS
from .aggregation import AggregationRule
from .data import Dataset, distribute, gen_blobs, load_idx, split_holdout
from .defense import AttestationState, MonitorConfig
from .model import MlpArchitecture, TrainSpec
from .rng import derive_seed, substream


class NoParticipantsError(RuntimeError):
    """Raised when every worker has been excluded: the run cannot continue."""


@dataclass
class WorkerNode:
    id: int
    local_data: Dataset
    alpha: float


@dataclass
class ChiefNode:
    global_params: np.ndarray
    validation: Dataset
    attestation: AttestationState
    rule: AggregationRule


@dataclass(frozen=True)
class ProtocolSettings:
    arch: MlpArchitecture
    train_spec: TrainSpec
    fabrication: FabricationParams
    monitor: MonitorConfig
    defense_enabled: bool
    test_data: Dataset
    seed: int
    sample_k: int = 0  # 0 = every worker participates each round
    submits: str = "model"  # what a malicious worker's Gaussian replaces


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    global_accuracy: float
    roles: dict
    newly_excluded: frozenset
    excluded_so_far: frozenset
    error_deltas: dict


@dataclass(frozen=True)
class RoundRecord:
    round: int
    global_accuracy: float
    n_excluded_total: int
    newly_excluded: tuple
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f2: float


@dataclass
class ExperimentLog:
    config_items: tuple
    worker_count: int
    truth_malicious: frozenset
    initial_accuracy: float
    records: list = field(default_factory=list)
    exclusion_events: dict = field(default_factory=dict)
    status: str = "completed"


def worker_step(worker, global_params, role, settings, round_t) -> np.ndarray:
    """One worker's submitted update for this round.

    Benign: local SGD from the received global weights, submitted as the
    weight difference. Malicious: a fabricated Gaussian vector, no local
    training. With ``submits="model"`` (default) the Gaussian poses as the
    worker's whole local model, so the update is fab - global; with
    ``submits="update"`` it is sent as the update itself. The model variant
    keeps the global weight scale pinned, which is what lets the attack crush
    plain averaging indefinitely; the update variant lets the weight scale
    drift upward until the fabrications lose their bite.
    """
    if role == MALICIOUS:
        rng = substream(settings.seed, "fabricate", worker.id, round_t)
        fabricated = adversary.fabricate_update(
            settings.arch.param_count, settings.fabrication, rng
        )
        if settings.submits == "model":
            return fabricated - global_params
        return fabricated
    trained = model.sgd_train(
        settings.arch,
        global_params,
        worker.local_data,
        settings.train_spec,
        derive_seed(settings.seed, "train", worker.id, round_t),
    )
    return trained - global_params


def run_round(
    chief,
    workers,
    attack: AttackPattern,
    settings: ProtocolSettings,
    round_t: int,
    trace: Optional[Callable] = None,
) -> RoundOutcome:
    """Execute one full round and update the chief in place."""
    active = [w for w in workers if w.id not in chief.attestation.excluded]
    if not active:
        raise NoParticipantsError(f"no participants left at round {round_t}")

    participants = active
    if settings.sample_k and settings.sample_k < len(active):
        rng = substream(settings.seed, "sample", round_t)
        picked = rng.choice(
            np.array([w.id for w in active]), size=settings.sample_k, replace=False
        )
        picked = {int(i) for i in picked}
        participants = [w for w in active if w.id in picked]

    roles = {}
    deltas = {}
    for w in participants:
        role = adversary.role_at(
            attack, w.id, round_t, substream(settings.seed, "role", w.id, round_t)
        )
        roles[w.id] = role
        deltas[w.id] = worker_step(w, chief.global_params, role, settings, round_t)

    error_deltas = {}
    newly: set = set()
    if settings.defense_enabled:
        for wid in sorted(deltas):
            local_model = chief.global_params + deltas[wid]
            error_deltas[wid] = defense.attest(
                chief.attestation, wid, local_model, settings.arch,
                chief.validation, round_t,
            )
        newly = defense.update_verdicts(chief.attestation, settings.monitor, round_t)

    survivors = [w for w in participants if w.id not in newly]
    if not survivors:
        raise NoParticipantsError(f"every submission excluded at round {round_t}")
    weights = np.array([w.alpha for w in survivors], dtype=np.float64)
    weights /= weights.sum()
    agg = aggregation.aggregate(
        chief.rule, [deltas[w.id] for w in survivors], weights
    )
    if trace is not None:
        trace(
            {
                "round": round_t,
                "submitted": sorted(deltas),
                "aggregated": sorted(w.id for w in survivors),
                "deltas": deltas,
                "aggregate": agg,
            }
        )
    chief.global_params = chief.global_params + agg
    accuracy, _ = model.evaluate(settings.arch, chief.global_params, settings.test_data)
    return RoundOutcome(
        round=round_t,
        global_accuracy=accuracy,
        roles=roles,
        newly_excluded=frozenset(newly),
        excluded_so_far=frozenset(chief.attestation.excluded),
        error_deltas=error_deltas,
    )


def build_environment(config):
    """Materialize (chief, workers, settings, attack) from an ExperimentConfig."""
    from . import config as config_mod  # late import keeps module deps one-way

    problems = config_mod.runtime_problems(config)
    if problems:
        raise config_mod.ConfigError(problems)

    train, validation, test = _build_datasets(config)
    shards = distribute(
        train, config.workers.count, config.workers.distribution,
        derive_seed(config.dataset.seed, "distribute"),
    )
    total = sum(len(s) for s in shards)
    workers = [
        WorkerNode(id=i, local_data=shard, alpha=len(shard) / total)
        for i, shard in enumerate(shards)
    ]
    arch = config_mod.resolve_arch(config, train)
    chief = ChiefNode(
        global_params=model.init_params(arch, derive_seed(config.seed, "global-init")),
        validation=validation,
        attestation=AttestationState.for_workers([w.id for w in workers]),
        rule=config.aggregation,
    )
    settings = ProtocolSettings(
        arch=arch,
        train_spec=config.train,
        fabrication=config.fabrication,
        monitor=config.defense,
        defense_enabled=config.defense_enabled,
        test_data=test,
        seed=config.seed,
        sample_k=config.workers.sample,
        submits=config.attack_submits,
    )
    return chief, workers, settings, config.attack


def _build_datasets(config):
    ds = config.dataset
    if ds.kind == "blobs":
        full = gen_blobs(ds.classes, ds.dim, ds.per_class, ds.spread, ds.seed)
        rest, test = split_holdout(
            full, ds.test / len(full), derive_seed(ds.seed, "test-split")
        )
        train, validation = split_holdout(
            rest, ds.validation / len(rest), derive_seed(ds.seed, "validation-split")
        )
        return train, validation, test
    # MNIST-style IDX directory
    train_full = load_idx(
        f"{ds.path}/train-images-idx3-ubyte",
        f"{ds.path}/train-labels-idx1-ubyte",
        class_count=10,
    )
    test_full = load_idx(
        f"{ds.path}/t10k-images-idx3-ubyte",
        f"{ds.path}/t10k-labels-idx1-ubyte",
        class_count=10,
    )
    order = substream(ds.seed, "idx-train-subset").permutation(len(train_full))
    train = train_full.subset(order[: ds.train_limit])
    validation = train_full.subset(order[ds.train_limit: ds.train_limit + ds.validation])
    test_order = substream(ds.seed, "idx-test-subset").permutation(len(test_full))
    test = test_full.subset(test_order[: ds.test])
    return train, validation, test


def run_training(config, trace: Optional[Callable] = None) -> ExperimentLog:
    """Run rounds 0..rounds-1 (or stop early) and log one record per round."""
    chief, workers, settings, attack = build_environment(config)
    truth = (
        frozenset(config.attack.compromised)
        if config.attack.variant != "none"
        else frozenset()
    )
    all_ids = [w.id for w in workers]
    initial_accuracy, _ = model.evaluate(
        settings.arch, chief.global_params, settings.test_data
    )
    log = ExperimentLog(
        config_items=config.to_items(),
        worker_count=len(workers),
        truth_malicious=truth,
        initial_accuracy=initial_accuracy,
    )
    for t in range(config.rounds):
        try:
            outcome = run_round(chief, workers, attack, settings, t, trace=trace)
        except NoParticipantsError:
            log.status = f"no_participants@{t}"
            break
        for wid in outcome.newly_excluded:
            log.exclusion_events[wid] = t
        counts = metrics.confusion(outcome.excluded_so_far, truth, all_ids)
        p = metrics.precision(counts)
        r = metrics.recall(counts)
        log.records.append(
            RoundRecord(
                round=t,
                global_accuracy=outcome.global_accuracy,
                n_excluded_total=len(outcome.excluded_so_far),
                newly_excluded=tuple(sorted(outcome.newly_excluded)),
                tp=counts.tp,
                fp=counts.fp,
                fn=counts.fn,
                tn=counts.tn,
                precision=p,
                recall=r,
                f2=metrics.f_beta(p, r, 2.0),
            )
        )
        if (
            config.target_accuracy > 0
            and outcome.global_accuracy >= config.target_accuracy
        ):
            log.status = f"target_reached@{t}"
            break
    return log
