"""Flat key-value run configuration.

The config file is plain text, one ``dotted.key=value`` per line, with ``#``
comments. The merged snapshot (defaults overlaid with the file) is copied
verbatim into the run manifest so a run can be reproduced from its outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict[str, str] = {
    "corpus.path": "",
    "corpus.min_words": "300",
    "corpus.max_words": "800",
    "corpus.synthetic.n_per_class": "200",
    "corpus.synthetic.seed": "7",
    "corpus.synthetic.profiles": "markov2-lowtemp,markov2-midtemp,markov3-hightemp",
    "split.ratios": "0.7,0.15,0.15",
    "run.seed": "1",
    "lm.order": "2",
    "lm.alpha": "0.1",
    "curv.k": "20",
    "curv.mask_rate": "0.15",
    "mlp.dim": "512",
    "mlp.hidden": "32",
    "mlp.lr": "0.1",
    "mlp.batch": "32",
    "mlp.epochs": "100",
    "ling.std_cap": "15",
    "ling.avg_cap": "40",
    "ling.complex_cap": "0.4",
    "ling.short_len": "8",
    "ling.calibrate": "false",
    "sem.calibrate": "false",
    "ens.delta": "0.05",
    "ens.threshold": "0.5",
    "eval.fpr_source": "arxiv",
    "eval.curve_step": "0.01",
    "eval.seeds": "1,2,3,4,5,6,7,8,9,10",
    "external.m1": "",
    "external.m2": "",
    "external.m3": "",
    "attack.name": "synonym-swap",
    "attack.rate": "0.2",
}


@dataclass
class RunConfig:
    values: dict[str, str] = field(default_factory=lambda: dict(DEFAULTS))

    def get(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected integer, got {self.get(key)!r}") from exc

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected number, got {self.get(key)!r}") from exc

    def get_bool(self, key: str) -> bool:
        v = self.get(key).strip().lower()
        if v in ("true", "1", "yes", "on"):
            return True
        if v in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: expected boolean, got {v!r}")

    def get_list(self, key: str) -> list[str]:
        v = self.get(key).strip()
        return [item.strip() for item in v.split(",") if item.strip()] if v else []

    def get_floats(self, key: str) -> list[float]:
        try:
            return [float(x) for x in self.get_list(key)]
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected comma-separated numbers") from exc

    def get_ints(self, key: str) -> list[int]:
        try:
            return [int(x) for x in self.get_list(key)]
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected comma-separated integers") from exc

    def snapshot(self) -> dict[str, str]:
        return dict(sorted(self.values.items()))


def load_config(path: str | Path | None) -> RunConfig:
    """Load a config file over the defaults; a missing path means defaults."""
    cfg = RunConfig()
    if path is None:
        validate_config(cfg)
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        cfg.values[key] = value.strip()
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    ratios = cfg.get_floats("split.ratios")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split.ratios must be three fractions summing to 1, got {ratios}")
    delta = cfg.get_float("ens.delta")
    if delta <= 0 or abs(round(1.0 / delta) * delta - 1.0) > 1e-9:
        raise ConfigError(f"ens.delta must divide 1 exactly, got {delta}")
    if cfg.get_int("curv.k") < 1:
        raise ConfigError("curv.k must be >= 1")
    mask_rate = cfg.get_float("curv.mask_rate")
    if not 0.0 < mask_rate < 1.0:
        raise ConfigError(f"curv.mask_rate must be in (0, 1), got {mask_rate}")
    for key in ("corpus.path", "external.m1", "external.m2", "external.m3"):
        value = cfg.get(key)
        if value and not Path(value).exists():
            raise ConfigError(f"config key {key!r} references missing path: {value}")
