"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Values are parsed by the key's
declared type; command-line flags override file values.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _opt_str(text: str) -> str | None:
    return None if text.strip().lower() in ("", "none") else text.strip()


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


# key -> (parser, default)
KEYS: dict[str, tuple] = {
    # run
    "n": (int, None),
    "dmax": (int, 14),
    "pool": (str, "all"),
    "pool_file": (_opt_str, None),
    "seed": (int, 0),
    "out": (str, "runs"),
    "label": (_opt_str, None),
    "threads": (int, 1),
    "plots": (_bool, True),
    "topology": (str, "expo"),
    "topologies": (_names, ("expo", "fibonacci", "prime", "broadcast")),
    "cap": (int, 10**6),
    # training
    "lam": (float, 1.0),
    "lam_g": (float, 1.0),
    "eta": (float, 2.0),
    "clip_eps": (float, 0.2),
    "lr": (float, 3e-3),
    "gamma": (float, 1.0),
    "gae_lambda": (float, 0.95),
    "episodes_per_batch": (int, 64),
    "epochs": (int, 4),
    "batches": (int, 200),
    "hidden": (int, 32),
    "entropy_coef": (float, 0.0),
    # gossip
    "p": (float, 0.75),
    "max_rounds": (int, 120),
    "trials": (int, 30),
    "thresholds": (_floats, (0.9, 1.0)),
    "source": (str, "fixed"),
    # failures
    "rates": (_floats, (0.30, 0.50, 0.70, 0.85)),
    "realizations": (int, 20),
    "lcc_threshold": (float, 0.8),
    # load
    "steps": (int, 50),
    "inject_rate": (float, 0.01),
    "load_p": (float, 0.75),
    "addressing": (str, "node"),
    # broadcast baseline
    "broadcast_mode": (str, "collision"),
    "broadcast_q": (_opt_float, None),
    "contenders": (str, "all"),
}


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return KEYS[key][0](text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc


def parse_text(text: str, origin: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def load(path: str | Path | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_text(p.read_text(), str(p))


def resolve(file_values: dict, overrides: dict) -> dict:
    cfg = {k: default for k, (_, default) in KEYS.items()}
    cfg.update(file_values)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return "none" if v is None else str(v)


def dump(cfg: dict, header: str | None = None) -> str:
    lines = [header] if header else []
    lines += [f"{k} = {format_value(cfg[k])}" for k in KEYS if k in cfg]
    return "\n".join(lines) + "\n"
