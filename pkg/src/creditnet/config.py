"""Run configuration and its plain-text file format.

One ``key = value`` pair per line, ``#`` comments, commas for lists.
Repeatable keys (``corrupt``, ``respond``, ``lend``) accumulate.  A minimal
file needs nothing at all: every knob has a default.

Example::

    nodes = 1000
    seed = 7
    density = 4
    interest_range = 0.01, 0.25
    scenario = prefix-bt
    ring_bits = 16
    stabilize_interval = 8
    tp_window = 64
    bt_amount = 200
    fee_per_link = 2
    max_rounds = 3
    candidates = 10
    accept_rate = 0.3
    corrupt = n00042 drop
    lend = n00017 30
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import NetworkConfig

SCENARIOS = ("prefix-bt", "chord-bt", "bailout")


@dataclass(frozen=True)
class SimConfig:
    nodes: int = 100
    density: float = 4.0
    seed: int = 1
    interest_range: tuple[float, float] = (0.01, 0.25)
    max_weight: int = 100
    scenario: str = "prefix-bt"
    crypto_mode: str = "test"

    # balance transfer
    bt_amount: int = 200
    bt_interest: float | None = None  # None: 5% above the lower rate bound
    tp_window: int = 64
    requestor: str | None = None  # None: poorest-connected node for the scenario

    # chord
    ring_bits: int = 16
    stabilize_interval: int = 8

    # prefix embedding
    pad_slack: int = 4
    re_embed: bool = True

    # bailout
    landmark: str = "landmark"
    candidates: int = 10
    tr_window: int = 32
    fee_per_link: int = 2
    max_rounds: int = 3
    accept_rate: float = 0.3
    bailout_interest: float = 0.05
    out_threshold: int = 2
    bench_repeats: int = 10

    # scripted behavior
    corrupt: tuple[tuple[str, str], ...] = ()
    respond_overrides: tuple[tuple[str, str], ...] = ()  # node -> always|never
    lend_overrides: tuple[tuple[str, str], ...] = ()  # node -> amount|deny

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            node_count=self.nodes,
            edge_density=self.density,
            seed=self.seed,
            interest_range=self.interest_range,
            max_weight=self.max_weight,
        )

    def advertised_interest(self) -> float:
        if self.bt_interest is not None:
            return self.bt_interest
        lo, hi = self.interest_range
        return round(lo + 0.05 * (hi - lo), 6)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        self.network_config().validate()
        if self.tp_window <= 0 or self.tr_window <= 0:
            raise ValueError("deadline windows must be positive")
        if self.max_rounds < 1 or self.candidates < 1:
            raise ValueError("bailout needs at least one round and one candidate")

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)


_INT_KEYS = {
    "nodes", "seed", "max_weight", "bt_amount", "tp_window", "ring_bits",
    "stabilize_interval", "pad_slack", "candidates", "tr_window",
    "fee_per_link", "max_rounds", "out_threshold", "bench_repeats",
}
_FLOAT_KEYS = {"density", "bt_interest", "accept_rate", "bailout_interest"}
_STR_KEYS = {"scenario", "crypto_mode", "requestor", "landmark"}
_BOOL_KEYS = {"re_embed"}


def parse_config(text: str) -> SimConfig:
    values: dict[str, object] = {}
    corrupt: list[tuple[str, str]] = []
    respond: list[tuple[str, str]] = []
    lend: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key == "corrupt":
            node, behavior = value.split()
            corrupt.append((node, behavior))
        elif key == "respond":
            node, rule = value.split()
            respond.append((node, rule))
        elif key == "lend":
            node, amount = value.split()
            lend.append((node, amount))
        elif key == "interest_range":
            lo, hi = (float(p.strip()) for p in value.split(","))
            values["interest_range"] = (lo, hi)
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise ValueError(f"unknown config key {key!r} on line {lineno}")
    cfg = SimConfig(
        corrupt=tuple(corrupt),
        respond_overrides=tuple(respond),
        lend_overrides=tuple(lend),
        **values,  # type: ignore[arg-type]
    )
    cfg.validate()
    return cfg
