"""Run configuration files.

INI syntax with five sections. Every key has a default; unknown sections
or keys are rejected outright so typos cannot silently fall back to
defaults. dump_config writes every key back out, and parsing a dump
reproduces the original object.

    [data]   dataset, pretrained, pretrained_format, embedding_dim,
             groups, groups_kind, mesh_prefix_depth
    [model]  filter_heights, filters_per_height, dropout, channel2_mode,
             signing
    [train]  epochs, batch_size, rho, eps, downsampling
    [eval]   folds, replications, metric, stratified
    [run]    seed
"""

import configparser
from dataclasses import dataclass

from .corpus import (
    OovPolicy,
    load_dataset,
    load_pretrained,
    random_pretrained,
)
from .evaluation import METRICS, ExperimentConfig
from .groups import load_groups
from .model import CHANNEL2_MODES, ModelConfig
from .seeding import derive_seed


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    pretrained: str = ""
    pretrained_format: str = "text"
    embedding_dim: int = 0
    groups: str = ""
    groups_kind: str = "tsv"
    mesh_prefix_depth: int = 3
    filter_heights: tuple = (3, 4, 5)
    filters_per_height: int = 100
    dropout: float = 0.5
    channel2_mode: str = "group_init_share"
    signing: bool = True
    epochs: int = 20
    batch_size: int = 50
    rho: float = 0.95
    eps: float = 1e-6
    downsampling: bool = False
    folds: int = 10
    replications: int = 5
    metric: str = "accuracy"
    stratified: bool = True
    seed: int = 1


# section -> key -> (value kind, RunConfig field)
_SCHEMA = {
    "data": {
        "dataset": "str",
        "pretrained": "str",
        "pretrained_format": "str",
        "embedding_dim": "int",
        "groups": "str",
        "groups_kind": "str",
        "mesh_prefix_depth": "int",
    },
    "model": {
        "filter_heights": "heights",
        "filters_per_height": "int",
        "dropout": "float",
        "channel2_mode": "str",
        "signing": "bool",
    },
    "train": {
        "epochs": "int",
        "batch_size": "int",
        "rho": "float",
        "eps": "float",
        "downsampling": "bool",
    },
    "eval": {
        "folds": "int",
        "replications": "int",
        "metric": "str",
        "stratified": "bool",
    },
    "run": {
        "seed": "int",
    },
}

_GROUP_KINDS = ("tsv", "brown", "mesh", "sentilex")
_EMB_FORMATS = ("text", "binary")


def _convert(kind: str, raw: str, where: str):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{where}: {raw!r} is not an integer") from None
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"{where}: {raw!r} is not a number") from None
    if kind == "bool":
        if raw == "true":
            return True
        if raw == "false":
            return False
        raise ValueError(f"{where}: expected 'true' or 'false', got {raw!r}")
    if kind == "heights":
        try:
            heights = tuple(int(p) for p in raw.split(",") if p.strip() != "")
        except ValueError:
            raise ValueError(
                f"{where}: expected comma-separated integers, got {raw!r}"
            ) from None
        if not heights:
            raise ValueError(f"{where}: needs at least one filter height")
        return heights
    raise AssertionError(kind)


def _render(kind: str, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "heights":
        return ",".join(str(h) for h in value)
    return str(value)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.pretrained_format not in _EMB_FORMATS:
        raise ValueError(
            f"pretrained_format must be one of {_EMB_FORMATS}, "
            f"got {cfg.pretrained_format!r}"
        )
    if cfg.groups_kind not in _GROUP_KINDS:
        raise ValueError(
            f"groups_kind must be one of {_GROUP_KINDS}, got {cfg.groups_kind!r}"
        )
    if cfg.channel2_mode not in CHANNEL2_MODES:
        raise ValueError(
            f"channel2_mode must be one of {CHANNEL2_MODES}, "
            f"got {cfg.channel2_mode!r}"
        )
    if cfg.metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {cfg.metric!r}")
    if cfg.embedding_dim < 0:
        raise ValueError("embedding_dim cannot be negative")
    if cfg.mesh_prefix_depth < 1:
        raise ValueError("mesh_prefix_depth must be at least 1")
    if not (0.0 <= cfg.dropout < 1.0):
        raise ValueError("dropout must lie in [0, 1)")
    if any(h < 1 for h in cfg.filter_heights):
        raise ValueError("filter heights must be positive")
    if cfg.filters_per_height < 1:
        raise ValueError("filters_per_height must be positive")
    if cfg.epochs < 1 or cfg.batch_size < 1:
        raise ValueError("epochs and batch_size must be positive")
    if not (0.0 < cfg.rho < 1.0):
        raise ValueError("rho must lie in (0, 1)")
    if cfg.eps <= 0.0:
        raise ValueError("eps must be positive")
    if cfg.folds < 2 or cfg.replications < 1:
        raise ValueError("need folds >= 2 and replications >= 1")
    return cfg


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    unknown_sections = set(cp.sections()) - set(_SCHEMA)
    if unknown_sections:
        raise ValueError(f"unknown config sections: {sorted(unknown_sections)}")
    values = {}
    for section, keys in _SCHEMA.items():
        if not cp.has_section(section):
            continue
        unknown = set(cp.options(section)) - set(keys)
        if unknown:
            raise ValueError(
                f"unknown keys in [{section}]: {sorted(unknown)}"
            )
        for key, kind in keys.items():
            if cp.has_option(section, key):
                values[key] = _convert(
                    kind, cp.get(section, key), f"[{section}] {key}"
                )
    return _validate(RunConfig(**values))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def dump_config(cfg: RunConfig) -> str:
    """Echo every key; parse_config(dump_config(cfg)) == cfg."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, kind in keys.items():
            rendered = _render(kind, getattr(cfg, key))
            lines.append(f"{key} = {rendered}".rstrip())
        lines.append("")
    return "\n".join(lines)


def model_config(run: RunConfig, num_classes: int, embedding_dim: int) -> ModelConfig:
    return ModelConfig(
        num_classes=num_classes,
        embedding_dim=embedding_dim,
        filter_heights=run.filter_heights,
        filters_per_height=run.filters_per_height,
        dropout_rate=run.dropout,
        channel2_mode=run.channel2_mode,
        signing_enabled=run.signing,
        seed=run.seed,
    )


def experiment_config(run: RunConfig, model: ModelConfig) -> ExperimentConfig:
    return ExperimentConfig(
        model=model,
        epochs=run.epochs,
        batch_size=run.batch_size,
        folds=run.folds,
        replications=run.replications,
        stratified=run.stratified,
        downsampling=run.downsampling,
        metric=run.metric,
        rho=run.rho,
        eps=run.eps,
        seed=run.seed,
    )


def load_run_inputs(run: RunConfig):
    """Materialize (dataset, vocab, pretrained, group_table) for a run.

    With no pretrained path, embedding_dim must be set and the first
    channel starts from seeded uniform random vectors.
    """
    if not run.dataset:
        raise ValueError("config has no [data] dataset path")
    dataset, vocab = load_dataset(run.dataset)

    if run.pretrained:
        pretrained = load_pretrained(
            run.pretrained, vocab, format=run.pretrained_format,
            oov_policy=OovPolicy(seed=derive_seed(run.seed, "oov")),
        )
        if run.embedding_dim and pretrained.shape[1] != run.embedding_dim:
            raise ValueError(
                f"embedding_dim={run.embedding_dim} but pretrained file "
                f"has width {pretrained.shape[1]}"
            )
    else:
        if run.embedding_dim < 1:
            raise ValueError(
                "config needs either a pretrained path or a positive "
                "embedding_dim"
            )
        pretrained = random_pretrained(
            vocab, run.embedding_dim, seed=derive_seed(run.seed, "emb")
        )

    group_table = None
    needs_groups = run.channel2_mode in ("group_init_no_share", "group_init_share")
    if run.groups:
        kwargs = {}
        if run.groups_kind == "mesh":
            kwargs["prefix_depth"] = run.mesh_prefix_depth
        group_table = load_groups(run.groups, run.groups_kind, vocab, **kwargs)
    elif needs_groups:
        raise ValueError(
            f"channel2_mode={run.channel2_mode} needs a [data] groups path"
        )
    return dataset, vocab, pretrained, group_table
