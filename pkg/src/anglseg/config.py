"""Experiment configuration: a flat `section.key = value` text dialect.

Every setting has a default, unknown keys are hard errors, and the
serialized form re-parses to an identical config.
"""

from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    pass


@dataclass
class SceneConfig:
    height: int = 64
    width: int = 64
    num_classes: int = 6
    num_views: int = 8
    num_scenes: int = 40
    noise_sigma: float = 0.02
    invalid_frac: float = 0.0
    ambient: float = 0.0
    materials: str = "benchmark"  # or "default": the generic ten-entry table


@dataclass
class SlicConfig:
    num_superpixels: int = 0  # 0 = auto from image area
    compactness: float = 10.0
    iterations: int = 10
    min_region_frac: float = 0.25


@dataclass
class HistogramConfig:
    coarse_bins: int = 16
    fine_bins: int = 16
    coarse_hi: float = 1.2
    q_low: float = 0.05
    q_high: float = 0.95


@dataclass
class NetworkConfig:
    base_channels: int = 16
    pah_channels: int = 16
    stack1_channels: int = 64
    stack2_channels: int = 32
    use_histogram: bool = True
    use_stack2: bool = True


@dataclass
class TrainConfig:
    epochs: int = 12
    batch_size: int = 8
    base_lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    poly_power: float = 0.9
    alpha: float = 0.2
    crop: int = 64
    flips: bool = True


@dataclass
class PathsConfig:
    data_dir: str = "scenes"
    cache_dir: str = "features"
    out_dir: str = "runs"


@dataclass
class RunConfig:
    seed: int = 0


@dataclass
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    slic: SlicConfig = field(default_factory=SlicConfig)
    histogram: HistogramConfig = field(default_factory=HistogramConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    run: RunConfig = field(default_factory=RunConfig)


def _coerce(raw, default, dotted):
    kind = type(default)
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {dotted} "
                          f"(expected {kind.__name__})") from None


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def set_option(config, dotted, raw):
    """Assign one `section.key` from its text form; unknown keys error."""
    if "." not in dotted:
        raise ConfigError(f"option {dotted!r} is not of the form section.key")
    section_name, key = dotted.split(".", 1)
    section = getattr(config, section_name, None)
    if section is None or section_name not in {f.name for f in fields(config)}:
        raise ConfigError(f"unknown section {section_name!r}")
    if key not in {f.name for f in fields(section)}:
        raise ConfigError(f"unknown key {dotted!r}")
    setattr(section, key, _coerce(raw, getattr(section, key), dotted))


def parse_config(text):
    """Parse the dialect: blank lines and # comments allowed."""
    config = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', "
                              f"got {stripped!r}")
        dotted, raw = stripped.split("=", 1)
        set_option(config, dotted.strip(), raw)
    return config


def serialize_config(config):
    """Deterministic text form; parse(serialize(c)) == c."""
    lines = []
    for sec_field in fields(config):
        section = getattr(config, sec_field.name)
        for f in fields(section):
            lines.append(f"{sec_field.name}.{f.name} = "
                         f"{_format(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(config))
