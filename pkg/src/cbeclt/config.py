"""Experiment configuration: schema, validation and derived quantities.

A config is a JSON object; see README.md for the full schema.  Validation
errors name the offending field and, when the config came from a file, the
line where that field appears.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

from . import testfn as tf
from .ensemble import EnsembleKind
from .errors import ConfigError

STATISTICS = ("pair", "bipartite", "surrogate", "global")
L_RULES = ("fixed", "power", "local", "global")
D_RULES = ("explicit", "power")
ASSERTION_KEYS = ("variance_rel_tol", "ks", "mean_se", "max_variance_over_n",
                  "w1_limit_max", "audit")
TOP_KEYS = ("statistic", "ensemble", "ensembles", "beta", "n", "L", "test_function",
            "replicas", "seed", "d", "audit_fraction", "assertions", "save_samples",
            "tol", "limit_draws")


class _Locator:
    """Maps a field name to the first line of the raw text that mentions it."""

    def __init__(self, text: str | None):
        self.text = text

    def line(self, name: str):
        if not self.text:
            return None
        key = name.rsplit(".", 1)[-1]
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def error(self, message, name):
        return ConfigError(message, field=name, line=self.line(name))


def _as_int(loc, raw, name, minimum=None):
    v = raw
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and not v.is_integer()):
        raise loc.error(f"expected an integer, got {v!r}", name)
    v = int(v)
    if minimum is not None and v < minimum:
        raise loc.error(f"must be >= {minimum}, got {v}", name)
    return v


def _as_float(loc, raw, name, positive=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise loc.error(f"expected a number, got {raw!r}", name)
    v = float(raw)
    if not math.isfinite(v) or (positive and not v > 0):
        raise loc.error(f"must be a positive finite number, got {raw!r}", name)
    return v


def _ensemble(loc, raw, beta, name):
    if isinstance(raw, str):
        raw = {"tag": raw}
    if not isinstance(raw, dict) or "tag" not in raw:
        raise loc.error("an ensemble needs a 'tag'", name)
    tag = str(raw["tag"]).lower()
    if tag not in ("cbe", "uniform", "equispaced"):
        raise loc.error(f"invalid ensemble tag {raw['tag']!r} (expected cbe, uniform or equispaced)", name)
    if tag == "cbe":
        b = raw.get("beta", beta)
        return EnsembleKind.cbe(_as_float(loc, b, name + ".beta", positive=True))
    return EnsembleKind(tag)


@dataclass(frozen=True)
class ExperimentConfig:
    statistic: str
    ensembles: tuple
    beta: float
    n: int
    L_rule: dict
    test_function: object
    replicas: int
    seed: int
    d_rule: dict = field(default_factory=lambda: {"rule": "power", "eps": 0.2, "exponent": 0.5})
    audit_fraction: float = 0.01
    assertions: dict = field(default_factory=dict)
    save_samples: bool = True
    tol: float = 1e-12
    limit_draws: int = 1_000_000

    @property
    def regime(self) -> str:
        r = self.L_rule["rule"]
        return r if r in ("local", "global") else "meso"

    @property
    def L(self) -> float:
        r = self.L_rule
        if r["rule"] == "fixed":
            return float(r["value"])
        if r["rule"] == "power":
            v = self.n ** r["gamma"]
            # tiny slack so exact powers such as 1024^0.6 = 64 survive rounding
            return float(math.floor(v + 1e-9)) if r.get("floor", True) else v
        if r["rule"] == "local":
            return float(self.n)
        return 1.0

    @property
    def d(self) -> int:
        r = self.d_rule
        if r["rule"] == "explicit":
            return int(r["value"])
        return int(math.floor(self.L * self.n ** (r["eps"] * r.get("exponent", 0.5)) + 1e-9))

    def to_json(self) -> dict:
        out = {
            "statistic": self.statistic,
            "ensembles": [{"tag": k.tag, **({"beta": k.beta} if k.beta is not None else {})}
                          for k in self.ensembles],
            "beta": self.beta,
            "n": self.n,
            "L": dict(self.L_rule),
            "L_value": self.L,
            "test_function": self.test_function.to_spec(),
            "replicas": self.replicas,
            "seed": self.seed,
            "d": dict(self.d_rule),
            "d_value": self.d,
            "audit_fraction": self.audit_fraction,
            "assertions": dict(self.assertions),
            "save_samples": self.save_samples,
            "tol": self.tol,
            "limit_draws": self.limit_draws,
        }
        return out

    def config_hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``key=value`` strings; dotted keys reach into nested objects."""
    raw = json.loads(json.dumps(raw))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value", field=item)
        key, value = item.split("=", 1)
        try:
            val = json.loads(value)
        except json.JSONDecodeError:
            val = value
        node = raw
        parts = key.strip().split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {} if p not in node or not isinstance(node[p], (dict, str)) else \
                    ({"tag": node[p]} if p == "ensemble" else {"rule": node[p]})
            node = node[p]
        node[parts[-1]] = val
    return raw


def parse_config(raw: dict, text: str | None = None) -> ExperimentConfig:
    loc = _Locator(text)
    if not isinstance(raw, dict):
        raise ConfigError("the config must be a JSON object")
    unknown = [k for k in raw if k not in TOP_KEYS]
    if unknown:
        raise loc.error(f"unknown field {unknown[0]!r}", unknown[0])

    statistic = str(raw.get("statistic", "pair")).lower()
    if statistic not in STATISTICS:
        raise loc.error(f"statistic must be one of {STATISTICS}", "statistic")
    if "beta" not in raw:
        raise ConfigError("required field is missing", field="beta")
    beta = _as_float(loc, raw["beta"], "beta", positive=True)
    if "n" not in raw:
        raise ConfigError("required field is missing", field="n")
    n = _as_int(loc, raw["n"], "n", minimum=1)

    if statistic == "bipartite":
        ens_raw = raw.get("ensembles", ["cbe", "cbe"])
        if not isinstance(ens_raw, list) or len(ens_raw) != 2:
            raise loc.error("bipartite runs need a list of two ensembles", "ensembles")
        ensembles = tuple(_ensemble(loc, e, beta, f"ensembles[{i}]") for i, e in enumerate(ens_raw))
    else:
        ensembles = (_ensemble(loc, raw.get("ensemble", "cbe"), beta, "ensemble"),)

    L_raw = raw.get("L", {"rule": "global"} if statistic == "global" else None)
    if L_raw is None:
        raise ConfigError("required field is missing", field="L")
    if isinstance(L_raw, (int, float)) and not isinstance(L_raw, bool):
        L_raw = {"rule": "fixed", "value": L_raw}
    if isinstance(L_raw, str):
        L_raw = {"rule": L_raw}
    if not isinstance(L_raw, dict) or L_raw.get("rule") not in L_RULES:
        raise loc.error(f"L.rule must be one of {L_RULES}", "L")
    L_rule = {"rule": L_raw["rule"]}
    if L_rule["rule"] == "fixed":
        L_rule["value"] = _as_float(loc, L_raw.get("value"), "L.value", positive=True)
    elif L_rule["rule"] == "power":
        g = _as_float(loc, L_raw.get("gamma"), "L.gamma")
        if not 0.0 < g < 2.0 / 3.0:
            raise loc.error("mesoscopic runs need gamma in (0, 2/3)", "L.gamma")
        L_rule["gamma"] = g
        L_rule["floor"] = bool(L_raw.get("floor", True))
    if statistic == "global" and L_rule["rule"] != "global":
        raise loc.error("the global statistic needs L.rule = global", "L")

    if "test_function" not in raw:
        raise ConfigError("required field is missing", field="test_function")
    try:
        f = tf.from_spec(raw["test_function"])
    except (ValueError, TypeError) as exc:
        raise loc.error(str(exc), "test_function") from None
    if f.circle_native and L_rule["rule"] != "global":
        raise loc.error("a cosine series is only defined in the global regime (L = 1)", "test_function")

    replicas = _as_int(loc, raw.get("replicas", 1000), "replicas", minimum=2)
    seed = _as_int(loc, raw.get("seed", 0), "seed", minimum=0)
    if seed >= 2 ** 64:
        raise loc.error("seed must fit in 64 bits", "seed")

    d_raw = raw.get("d", {"rule": "power", "eps": 0.2, "exponent": 0.5})
    if isinstance(d_raw, (int, float)) and not isinstance(d_raw, bool):
        d_raw = {"rule": "explicit", "value": d_raw}
    if not isinstance(d_raw, dict) or d_raw.get("rule") not in D_RULES:
        raise loc.error(f"d.rule must be one of {D_RULES}", "d")
    if d_raw["rule"] == "explicit":
        d_rule = {"rule": "explicit", "value": _as_int(loc, d_raw.get("value"), "d.value", minimum=1)}
    else:
        d_rule = {"rule": "power", "eps": _as_float(loc, d_raw.get("eps", 0.2), "d.eps", positive=True),
                  "exponent": _as_float(loc, d_raw.get("exponent", 0.5), "d.exponent", positive=True)}

    audit = _as_float(loc, raw.get("audit_fraction", 0.01), "audit_fraction")
    if not 0.0 <= audit <= 1.0:
        raise loc.error("audit_fraction must lie in [0, 1]", "audit_fraction")

    assertions = raw.get("assertions", {})
    if not isinstance(assertions, dict):
        raise loc.error("assertions must be an object", "assertions")
    for k in assertions:
        if k not in ASSERTION_KEYS:
            raise loc.error(f"unknown assertion {k!r}", "assertions")

    tol = _as_float(loc, raw.get("tol", 1e-12), "tol", positive=True)
    limit_draws = _as_int(loc, raw.get("limit_draws", 1_000_000), "limit_draws", minimum=2)
    cfg = ExperimentConfig(statistic, ensembles, beta, n, L_rule, f, replicas, seed, d_rule,
                           audit, dict(assertions), bool(raw.get("save_samples", True)), tol, limit_draws)
    if cfg.regime == "local" and cfg.L != cfg.n:
        raise loc.error("the local regime needs L = n", "L")
    if statistic in ("pair", "global") and n < 2:
        raise loc.error("pair statistics need n >= 2", "n")
    return cfg


@dataclass(frozen=True)
class TheoryConfig:
    beta: float
    test_function: object
    n: int | None = None
    L: float | None = None


def parse_theory_config(raw: dict, text: str | None = None) -> TheoryConfig:
    """Only beta and test_function are required; n and L enable the mean rows."""
    loc = _Locator(text)
    if not isinstance(raw, dict):
        raise ConfigError("the config must be a JSON object")
    if "beta" not in raw:
        raise ConfigError("required field is missing", field="beta")
    beta = _as_float(loc, raw["beta"], "beta", positive=True)
    if "test_function" not in raw:
        raise ConfigError("required field is missing", field="test_function")
    try:
        f = tf.from_spec(raw["test_function"])
    except (ValueError, TypeError) as exc:
        raise loc.error(str(exc), "test_function") from None
    n = _as_int(loc, raw["n"], "n", minimum=1) if "n" in raw else None
    L = None
    if n is not None and isinstance(raw.get("L"), (dict, int, float, str)):
        try:
            L = parse_config(raw, text).L
        except ConfigError:
            L = None
    return TheoryConfig(beta, f, n, L)


def read_raw(path, overrides=()) -> tuple[dict, str]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("the config must be a JSON object", line=1)
    return apply_overrides(raw, overrides), text


def load_config(path, overrides=()) -> ExperimentConfig:
    raw, text = read_raw(path, overrides)
    return parse_config(raw, text)
