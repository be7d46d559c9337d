"""Experiment configuration: schema, file parser, validation, canonical echo.

Config files are flat ``key = value`` lines with ``#`` comments. Every run
embeds its fully resolved configuration in the output header, and
``to_items()`` round-trips through the parser, so saved results are
self-describing and reproducible.
"""
from dataclasses import dataclass, replace

from .adversary import AttackPattern, FabricationParams, PATTERNS
from .aggregation import AggregationRule
from .defense import MonitorConfig
from .model import MlpArchitecture, TrainSpec


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    try:
        return int(text.strip())
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _parse_float(text):
    try:
        return float(text.strip())
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _parse_ids(text):
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from None


def _parse_layers(text):
    text = text.strip()
    if text == "auto":
        return None
    layers = _parse_ids(text)
    if len(layers) < 2:
        raise ValueError("need at least input and output layer sizes")
    return layers


def _parse_str(text):
    return text.strip()


_fmt_bool = lambda v: "true" if v else "false"
_fmt_ids = lambda v: ",".join(str(i) for i in v)
_fmt_layers = lambda v: "auto" if v is None else _fmt_ids(v)

# key -> (parser, default text, formatter)
KEYS = {
    "dataset.kind": (_parse_str, "blobs", str),
    "dataset.path": (_parse_str, "", str),
    "dataset.seed": (_parse_int, "-1", str),  # -1 follows the master seed
    "dataset.classes": (_parse_int, "10", str),
    "dataset.dim": (_parse_int, "20", str),
    "dataset.per_class": (_parse_int, "300", str),
    "dataset.spread": (_parse_float, "0.05", repr),
    "dataset.validation": (_parse_int, "500", str),
    "dataset.test": (_parse_int, "500", str),
    "dataset.train_limit": (_parse_int, "2000", str),
    "model.layers": (_parse_layers, "auto", _fmt_layers),
    "train.epochs": (_parse_int, "1", str),
    "train.batch": (_parse_int, "32", str),
    "train.lr": (_parse_float, "0.1", repr),
    "workers.count": (_parse_int, "10", str),
    "workers.distribution": (_parse_str, "full_copy", str),
    "workers.sample": (_parse_int, "0", str),
    "attack.pattern": (_parse_str, "none", str),
    "attack.compromised": (_parse_ids, "0,1,2,3", _fmt_ids),
    "attack.start_round": (_parse_int, "10", str),
    "attack.flip_prob": (_parse_float, "0.5", repr),
    "attack.mu": (_parse_float, "0.5", repr),
    "attack.sigma": (_parse_float, "2e6", repr),
    "attack.submits": (_parse_str, "model", str),
    "aggregation.rule": (_parse_str, "fedavg", str),
    "aggregation.m": (_parse_int, "1", str),
    "aggregation.tol": (_parse_float, "1e-8", repr),
    "aggregation.max_iter": (_parse_int, "1000", str),
    "defense.enabled": (_parse_bool, "false", _fmt_bool),
    "defense.delta": (_parse_int, "0", str),
    "defense.tau": (_parse_float, "0.0", repr),
    "defense.window": (_parse_int, "5", str),
    "defense.strikes": (_parse_int, "3", str),
    "defense.reset_on_improve": (_parse_bool, "false", _fmt_bool),
    "rounds": (_parse_int, "80", str),
    "seed": (_parse_int, "0", str),
    "readout_round": (_parse_int, "58", str),
    "target_accuracy": (_parse_float, "0.0", repr),
    "out": (_parse_str, "run.csv", str),
}


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    path: str
    seed: int
    classes: int
    dim: int
    per_class: int
    spread: float
    validation: int
    test: int
    train_limit: int

    def train_size(self) -> int:
        if self.kind == "blobs":
            return self.classes * self.per_class - self.validation - self.test
        return self.train_limit


@dataclass(frozen=True)
class WorkersConfig:
    count: int
    distribution: str
    sample: int


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    layers: tuple | None
    train: TrainSpec
    workers: WorkersConfig
    attack: AttackPattern
    fabrication: FabricationParams
    attack_submits: str
    aggregation: AggregationRule
    defense_enabled: bool
    defense: MonitorConfig
    rounds: int
    seed: int
    readout_round: int
    target_accuracy: float
    out: str

    def to_items(self) -> tuple:
        """Canonical (key, value-text) pairs; re-parsing them rebuilds the config."""
        values = {
            "dataset.kind": self.dataset.kind,
            "dataset.path": self.dataset.path,
            "dataset.seed": self.dataset.seed,
            "dataset.classes": self.dataset.classes,
            "dataset.dim": self.dataset.dim,
            "dataset.per_class": self.dataset.per_class,
            "dataset.spread": self.dataset.spread,
            "dataset.validation": self.dataset.validation,
            "dataset.test": self.dataset.test,
            "dataset.train_limit": self.dataset.train_limit,
            "model.layers": self.layers,
            "train.epochs": self.train.epochs,
            "train.batch": self.train.batch_size,
            "train.lr": self.train.learning_rate,
            "workers.count": self.workers.count,
            "workers.distribution": self.workers.distribution,
            "workers.sample": self.workers.sample,
            "attack.pattern": self.attack.variant,
            "attack.compromised": tuple(sorted(self.attack.compromised)),
            "attack.start_round": self.attack.start_round,
            "attack.flip_prob": self.attack.flip_prob,
            "attack.mu": self.fabrication.mu,
            "attack.sigma": self.fabrication.sigma,
            "attack.submits": self.attack_submits,
            "aggregation.rule": self.aggregation.name,
            "aggregation.m": self.aggregation.m,
            "aggregation.tol": self.aggregation.tol,
            "aggregation.max_iter": self.aggregation.max_iter,
            "defense.enabled": self.defense_enabled,
            "defense.delta": self.defense.delta,
            "defense.tau": self.defense.tau,
            "defense.window": self.defense.window,
            "defense.strikes": self.defense.strikes_to_exclude,
            "defense.reset_on_improve": self.defense.reset_on_improve,
            "rounds": self.rounds,
            "seed": self.seed,
            "readout_round": self.readout_round,
            "target_accuracy": self.target_accuracy,
            "out": self.out,
        }
        return tuple((key, KEYS[key][2](values[key])) for key in KEYS)


def read_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment line; blanks ignored."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError([f"{path}:{lineno}: expected 'key = value'"])
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
    return raw


# per-key range checks run on the converted values, before cross-field checks
_RANGE_CHECKS = [
    ("dataset.kind", lambda v, _: v in ("blobs", "mnist"), "must be blobs or mnist"),
    ("dataset.classes", lambda v, _: v >= 2, "must be >= 2"),
    ("dataset.dim", lambda v, _: v >= 1, "must be >= 1"),
    ("dataset.per_class", lambda v, _: v >= 1, "must be >= 1"),
    ("dataset.spread", lambda v, _: v >= 0, "must be >= 0"),
    ("dataset.validation", lambda v, _: v >= 1, "must be >= 1"),
    ("dataset.test", lambda v, _: v >= 1, "must be >= 1"),
    ("dataset.train_limit", lambda v, _: v >= 1, "must be >= 1"),
    ("model.layers", lambda v, _: v is None or all(s >= 1 for s in v),
     "layer sizes must be positive"),
    ("train.epochs", lambda v, _: v >= 0, "must be >= 0"),
    ("train.batch", lambda v, _: v >= 1, "must be >= 1"),
    ("train.lr", lambda v, _: v >= 0, "must be >= 0"),
    ("workers.count", lambda v, _: v >= 1, "must be >= 1"),
    ("workers.distribution", lambda v, _: v in ("full_copy", "equal_shards"),
     "must be full_copy or equal_shards"),
    ("workers.sample", lambda v, raw: 0 <= v <= raw["workers.count"],
     "must be 0 (all) or between 1 and workers.count"),
    ("attack.pattern", lambda v, _: v in PATTERNS,
     "must be none, static, pretence or randomized"),
    ("attack.start_round", lambda v, _: v >= 0, "must be >= 0"),
    ("attack.flip_prob", lambda v, _: 0.0 <= v <= 1.0, "must lie in [0, 1]"),
    ("attack.sigma", lambda v, _: v > 0, "must be > 0"),
    ("attack.submits", lambda v, _: v in ("model", "update"),
     "must be model or update"),
    ("aggregation.rule", lambda v, _: v in ("fedavg", "krum", "geomed", "bulyan"),
     "must be fedavg, krum, geomed or bulyan"),
    ("aggregation.m", lambda v, _: v >= 0, "must be >= 0"),
    ("aggregation.tol", lambda v, _: v > 0, "must be > 0"),
    ("aggregation.max_iter", lambda v, _: v >= 1, "must be >= 1"),
    ("defense.delta", lambda v, _: v >= 0, "must be >= 0"),
    ("defense.window", lambda v, _: v >= 1, "must be >= 1"),
    ("defense.strikes", lambda v, _: v >= 1, "must be >= 1"),
    ("rounds", lambda v, _: v >= 0, "must be >= 0"),
    ("seed", lambda v, _: v >= 0, "must be >= 0"),
    ("readout_round", lambda v, _: v >= 0, "must be >= 0"),
    ("target_accuracy", lambda v, _: 0.0 <= v <= 1.0, "must lie in [0, 1]"),
]


def _cross_checks(vals) -> list:
    problems = []
    k = vals["workers.count"]
    pattern = vals["attack.pattern"]
    compromised = vals["attack.compromised"]
    if pattern != "none":
        if len(set(compromised)) != len(compromised):
            problems.append("attack.compromised: duplicate worker ids")
        bad = [i for i in compromised if not 0 <= i < k]
        if bad:
            problems.append(
                f"attack.compromised: ids {bad} outside worker range [0, {k})"
            )
    participants = vals["workers.sample"] or k
    rule, m = vals["aggregation.rule"], vals["aggregation.m"]
    if rule == "krum" and participants < 2 * m + 3:
        problems.append(
            f"aggregation.m: krum needs workers >= 2m+3 = {2 * m + 3}, have {participants}"
        )
    if rule == "bulyan" and participants < 4 * m + 3:
        problems.append(
            f"aggregation.m: bulyan needs workers >= 4m+3 = {4 * m + 3}, have {participants}"
        )
    if vals["dataset.kind"] == "mnist" and not vals["dataset.path"]:
        problems.append("dataset.path: required for dataset.kind = mnist")
    if vals["dataset.kind"] == "blobs":
        total = vals["dataset.classes"] * vals["dataset.per_class"]
        holdout = vals["dataset.validation"] + vals["dataset.test"]
        if total - holdout < 1:
            problems.append(
                f"dataset.per_class: {total} examples cannot cover "
                f"{holdout} held-out ones"
            )
        else:
            _check_shards(vals, total - holdout, problems)
    else:
        _check_shards(vals, vals["dataset.train_limit"], problems)
    layers = vals["model.layers"]
    if layers is not None and vals["dataset.kind"] == "blobs":
        if layers[0] != vals["dataset.dim"]:
            problems.append(
                f"model.layers: input width {layers[0]} != dataset.dim "
                f"{vals['dataset.dim']}"
            )
        if layers[-1] != vals["dataset.classes"]:
            problems.append(
                f"model.layers: output width {layers[-1]} != dataset.classes "
                f"{vals['dataset.classes']}"
            )
    return problems


def _check_shards(vals, train_size, problems):
    k = vals["workers.count"]
    if vals["workers.distribution"] == "equal_shards":
        if train_size < k:
            problems.append(
                f"workers.count: cannot shard {train_size} examples over {k} workers"
            )
        per_worker = train_size // k
    else:
        per_worker = train_size
    if per_worker and vals["train.batch"] > per_worker:
        problems.append(
            f"train.batch: {vals['train.batch']} exceeds the smallest worker "
            f"shard ({per_worker})"
        )


def build_config(raw: dict) -> ExperimentConfig:
    """Convert raw text values into a validated ExperimentConfig."""
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError([f"unknown key: {key}" for key in unknown])
    problems = []
    vals = {}
    for key, (parser, default, _) in KEYS.items():
        try:
            vals[key] = parser(raw.get(key, default))
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    for key, check, message in _RANGE_CHECKS:
        if not check(vals[key], vals):
            problems.append(f"{key}: {message} (got {raw.get(key, KEYS[key][1])})")
    if problems:
        raise ConfigError(problems)
    problems = _cross_checks(vals)
    if problems:
        raise ConfigError(problems)

    if vals["dataset.seed"] < 0:
        vals["dataset.seed"] = vals["seed"]
    attack = AttackPattern(
        variant=vals["attack.pattern"],
        compromised=frozenset(vals["attack.compromised"]),
        start_round=vals["attack.start_round"],
        flip_prob=vals["attack.flip_prob"],
    )
    return ExperimentConfig(
        dataset=DatasetConfig(
            kind=vals["dataset.kind"],
            path=vals["dataset.path"],
            seed=vals["dataset.seed"],
            classes=vals["dataset.classes"],
            dim=vals["dataset.dim"],
            per_class=vals["dataset.per_class"],
            spread=vals["dataset.spread"],
            validation=vals["dataset.validation"],
            test=vals["dataset.test"],
            train_limit=vals["dataset.train_limit"],
        ),
        layers=vals["model.layers"],
        train=TrainSpec(
            epochs=vals["train.epochs"],
            batch_size=vals["train.batch"],
            learning_rate=vals["train.lr"],
        ),
        workers=WorkersConfig(
            count=vals["workers.count"],
            distribution=vals["workers.distribution"],
            sample=vals["workers.sample"],
        ),
        attack=attack,
        fabrication=FabricationParams(mu=vals["attack.mu"], sigma=vals["attack.sigma"]),
        attack_submits=vals["attack.submits"],
        aggregation=AggregationRule(
            name=vals["aggregation.rule"],
            m=vals["aggregation.m"],
            tol=vals["aggregation.tol"],
            max_iter=vals["aggregation.max_iter"],
        ),
        defense_enabled=vals["defense.enabled"],
        defense=MonitorConfig(
            delta=vals["defense.delta"],
            tau=vals["defense.tau"],
            window=vals["defense.window"],
            strikes_to_exclude=vals["defense.strikes"],
            reset_on_improve=vals["defense.reset_on_improve"],
        ),
        rounds=vals["rounds"],
        seed=vals["seed"],
        readout_round=vals["readout_round"],
        target_accuracy=vals["target_accuracy"],
        out=vals["out"],
    )


def parse_config(path=None, overrides=None) -> ExperimentConfig:
    """Build a config from an optional file plus override strings.

    ``overrides`` maps keys to value text (CLI ``--set key=value``); overrides
    win over file entries, both win over defaults.
    """
    raw = read_config_file(path) if path else {}
    if overrides:
        raw.update(overrides)
    return build_config(raw)


def derive(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy a config with dotted-key changes, re-running full validation.

    Keys use the file syntax with '.' replaced by '__' when passed as Python
    keywords, e.g. derive(cfg, attack__pattern="static", rounds="40").
    """
    raw = dict(config.to_items())
    for key, value in changes.items():
        raw[key.replace("__", ".")] = str(value)
    return build_config(raw)


def runtime_problems(config: ExperimentConfig) -> list:
    """Re-validate a (possibly hand-built) config before a run starts."""
    try:
        rebuilt = build_config(dict(config.to_items()))
    except ConfigError as exc:
        return exc.problems
    if rebuilt != config:
        return ["config does not round-trip through its canonical items"]
    return []


def resolve_arch(config: ExperimentConfig, train_data) -> MlpArchitecture:
    """Concrete architecture: explicit layers, or [dim, 30, classes]."""
    if config.layers is None:
        return MlpArchitecture((train_data.dim, 30, train_data.class_count))
    arch = MlpArchitecture(config.layers)
    if arch.n_inputs != train_data.dim:
        raise ConfigError(
            [f"model.layers: input width {arch.n_inputs} != data dim {train_data.dim}"]
        )
    if arch.n_classes != train_data.class_count:
        raise ConfigError(
            [
                f"model.layers: output width {arch.n_classes} != "
                f"class count {train_data.class_count}"
            ]
        )
    return arch
