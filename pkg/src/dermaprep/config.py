"""Flat `key = value` run configuration.

Lines are `key = value`, `#` comments, or blank. Purify settings use a
`purify.` prefix; everything else is top-level. Unknown keys are errors so
typos fail loudly instead of silently running with defaults.
"""

from dataclasses import dataclass, field, replace

from .purify import PurifyConfig

DEFAULT_CLASSES = ("melanoma", "nevus", "seborrheic_keratosis")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    purify: PurifyConfig = field(default_factory=PurifyConfig)
    comparison_resolution: int = 256
    dedup_threshold: float = 0.005
    multiplier: int = 6
    seed: int = 0
    class_list: tuple = DEFAULT_CLASSES

    def __post_init__(self):
        if self.comparison_resolution < 1:
            raise ConfigError("comparison_resolution must be >= 1")
        if self.dedup_threshold < 0:
            raise ConfigError("dedup_threshold must be >= 0")
        if self.multiplier < 1:
            raise ConfigError("multiplier must be >= 1")
        if not self.class_list or len(set(self.class_list)) != len(self.class_list):
            raise ConfigError("class_list must be non-empty and unique")
        if not all(self.class_list):
            raise ConfigError("class_list contains an empty name")


def _to_int(value, key):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _to_float(value, key):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _to_tuple(value, conv, key):
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{key}: empty list")
    return tuple(conv(p, key) for p in parts)


def _threshold(value, key):
    return "otsu" if value == "otsu" else _to_float(value, key)


_TOP = {
    "comparison_resolution": _to_int,
    "dedup_threshold": _to_float,
    "multiplier": _to_int,
    "seed": _to_int,
    "class_list": lambda v, k: _to_tuple(v, lambda p, _: p, k),
}

_PURIFY = {
    "luminance_threshold": _threshold,
    "line_lengths": lambda v, k: _to_tuple(v, _to_int, k),
    "line_angles": lambda v, k: _to_tuple(v, _to_float, k),
    "closing_radius": _to_int,
    "inpaint_iterations": _to_int,
    "min_component_area": _to_int,
    "reference_width": _to_int,
}


def parse_config_text(text, source="<config>"):
    top = {}
    pur = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected `key = value`, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("purify."):
            sub = key[len("purify."):]
            if sub not in _PURIFY:
                raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
            if sub in pur:
                raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
            try:
                pur[sub] = _PURIFY[sub](value, key)
            except ConfigError as e:
                raise ConfigError(f"{source}:{line_no}: {e}") from None
        else:
            if key not in _TOP:
                raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
            if key in top:
                raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
            try:
                top[key] = _TOP[key](value, key)
            except ConfigError as e:
                raise ConfigError(f"{source}:{line_no}: {e}") from None
    try:
        purify_cfg = PurifyConfig(**pur)
        return PipelineConfig(purify=purify_cfg, **top)
    except (ValueError, ConfigError) as e:
        raise ConfigError(f"{source}: {e}") from None


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from e
    return parse_config_text(text, source=str(path))


def with_seed(cfg, seed):
    """A copy of cfg with the seed replaced (CLI --seed override)."""
    return replace(cfg, seed=seed)
