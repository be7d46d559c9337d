"""Federated-learning poisoning simulator with a monitored attestation defense.

Workers train a shared MLP under a chief that aggregates their updates; a
configurable fraction of workers submits fabricated Gaussian updates instead.
The chief can score every submission on a private validation set and exclude
workers whose error stops improving, but only after an initial monitoring
period of ``delta`` rounds. The harness runs one-factor-at-a-time grids over
attacks and monitoring periods and recommends a ``delta`` by recall-weighted
detection quality.
"""
from .adversary import AttackPattern, FabricationParams, fabricate_update, role_at
from .aggregation import AggregationRule, bulyan, fedavg, geomed, krum
from .config import ConfigError, ExperimentConfig, derive, parse_config
from .data import Dataset, distribute, gen_blobs, load_idx, split_holdout
from .defense import AttestationState, MonitorConfig, attest, is_active, update_verdicts
from .harness import delta_search, oat_grid, report, run_experiment
from .metrics import ConfusionCounts, confusion, f_beta, precision, recall
from .model import MlpArchitecture, TrainSpec, evaluate, forward, init_params, loss_and_grad, sgd_train
from .protocol import ChiefNode, NoParticipantsError, RoundOutcome, WorkerNode, run_round, run_training

__version__ = "0.1.0"
