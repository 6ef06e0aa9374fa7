"""JSON experiment configuration: defaults, overrides, validation and object builders."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path

from .bvm import CENTERING_MODES, ExperimentSetup
from .dataset import TRUTH_FAMILIES, WEIGHT_FAMILIES
from .errors import ConfigInvalid
from .mcmc import SamplerConfig
from .priors import (
    DEFAULT_ENUMERATION_CAP,
    GaltonWatsonPrior,
    GaussianLeafPrior,
    GaussianScaledLeafPrior,
    LaplaceLeafPrior,
    LaplaceScaledLeafPrior,
    UniformTopologyPrior,
)

__all__ = [
    "MODES",
    "DEFAULTS",
    "REQUIRED_BY_MODE",
    "load_config",
    "apply_overrides",
    "resolve",
    "validate",
    "content_hash",
    "build_setup",
    "build_sampler",
]

MODES = ("sample", "bvm", "coverage", "selfsim", "concentration", "regularity")

# Mode-specific experiment fields without defaults; they must be given.
REQUIRED_BY_MODE = {
    "sample": (),
    "bvm": ("centering_mode",),
    "coverage": ("nominal_level", "n_reps"),
    "selfsim": ("M", "D", "partition_budget"),
    "concentration": ("grid_of_n",),
    "regularity": ("max_depth_s", "M"),
}

DEFAULTS = {
    "dataset": {"family": "lipschitz", "n": 256, "p": 1, "alpha": 1.0, "seed": 0, "params": {}},
    "weight": {"family": "one", "gamma": 1.0},
    "prior": {
        "tree": {"kind": "gw", "variant": "chipman", "alpha": 0.95, "delta": 2.0, "lambda": 1.0,
                 "cap": DEFAULT_ENUMERATION_CAP},
        "leaf": {"kind": "gaussian", "sigma2": 1.0, "lambda": 1.0},
        "n_trees": 1,
    },
    "sampler": {"iterations": 2000, "burn_in": 500, "thin": 1, "move_weights": [0.4, 0.4, 0.2], "max_depth": 12},
    "experiment": {
        "mode": "sample",
        "M_n": None,
        "M2": 1.0,
        "c_lambda": 1.0,
        "n_datasets": 1,
        "noiseless": False,
        "keep_forests": False,
    },
    "output": {"dir": "out", "svg": False},
}

_OPTIONAL_EXPERIMENT = {"n_reps", "nominal_level", "centering_mode", "M", "D", "partition_budget",
                        "grid_of_n", "max_depth_s"}


def load_config(path) -> dict:
    """Parse a JSON config file; raises ``OSError`` or ``ConfigInvalid`` on malformed JSON."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([f"<root>: not valid JSON ({exc.msg} at line {exc.lineno})"]) from None
    if not isinstance(cfg, dict):
        raise ConfigInvalid(["<root>: must be a JSON object"])
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` assignments; values are parsed as JSON when possible."""
    out = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigInvalid([f"--set {item}: expected path=value"])
        path, value = item.split("=", 1)
        keys = path.strip().split(".")
        node = out
        for k in keys[:-1]:
            nxt = node.get(k)
            if not isinstance(nxt, dict):
                nxt = {}
                node[k] = nxt
            node = nxt
        node[keys[-1]] = _parse_value(value)
    return out


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(cfg: dict, mode: str | None = None) -> dict:
    """Fill defaults; ``mode`` (from the subcommand) replaces ``experiment.mode``."""
    out = _merge(DEFAULTS, cfg)
    if mode is not None:
        out["experiment"]["mode"] = mode
    return out


def _unknown_keys(given, template, prefix, diags):
    for k, v in given.items():
        path = f"{prefix}.{k}" if prefix else k
        if k not in template:
            if not (prefix == "experiment" and k in _OPTIONAL_EXPERIMENT):
                diags.append(f"{path}: unknown key")
            continue
        if isinstance(template[k], dict) and k != "params":
            if isinstance(v, dict):
                _unknown_keys(v, template[k], path, diags)
            else:
                diags.append(f"{path}: must be an object")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate(cfg: dict, mode: str | None = None) -> list:
    """All schema and cross-field problems as ``"path: message"`` strings (empty when valid)."""
    diags = []
    if not isinstance(cfg, dict):
        return ["<root>: must be a JSON object"]
    _unknown_keys(cfg, DEFAULTS, "", diags)
    if any(d.endswith("must be an object") for d in diags):
        return diags
    c = resolve(cfg, mode)

    def need(cond, path, msg):
        if not cond:
            diags.append(f"{path}: {msg}")
        return cond

    ds = c["dataset"]
    fam = str(ds.get("family", "")).removeprefix("f0_")
    need(fam in TRUTH_FAMILIES, "dataset.family", f"unknown truth family {ds.get('family')!r}")
    n_ok = need(_is_int(ds["n"]) and ds["n"] >= 2, "dataset.n", "must be an integer >= 2")
    p_ok = need(_is_int(ds["p"]) and ds["p"] >= 1, "dataset.p", "must be a positive integer")
    a_ok = need(_is_num(ds["alpha"]) and 0 < ds["alpha"] <= 1, "dataset.alpha", "must lie in (0,1]")
    need(_is_int(ds["seed"]) and ds["seed"] >= 0, "dataset.seed", "must be a nonnegative integer")
    need(isinstance(ds["params"], dict), "dataset.params", "must be an object")
    if fam == "holder" and a_ok:
        need(ds["alpha"] > 0.5, "dataset.alpha", "the holder truth needs alpha in (1/2,1]")
    if n_ok and p_ok and ds["p"] > 1:
        m = round(ds["n"] ** (1 / ds["p"]))
        need(any(k**ds["p"] == ds["n"] for k in (m - 1, m, m + 1)), "dataset.n",
             f"{ds['n']} has no integer {ds['p']}-th root for a tensor grid")

    w = c["weight"]
    need(w["family"] in WEIGHT_FAMILIES, "weight.family", f"unknown weight family {w['family']!r}")
    need(_is_num(w["gamma"]) and 0 < w["gamma"] <= 1, "weight.gamma", "gamma must lie in (0,1]")

    pr = c["prior"]
    tr = pr["tree"]
    if need(tr["kind"] in ("gw", "uniform"), "prior.tree.kind", "must be 'gw' or 'uniform'"):
        if tr["kind"] == "gw":
            need(tr["variant"] in ("chipman", "geometric"), "prior.tree.variant", "must be 'chipman' or 'geometric'")
            need(_is_num(tr["alpha"]) and 0 < tr["alpha"] < 1, "prior.tree.alpha", "must lie in (0,1)")
            need(_is_num(tr["delta"]) and tr["delta"] > 0, "prior.tree.delta", "must be positive")
        else:
            need(_is_num(tr["lambda"]) and tr["lambda"] > 0, "prior.tree.lambda", "must be positive")
            need(_is_int(tr["cap"]) and tr["cap"] >= 1, "prior.tree.cap", "must be a positive integer")
    lf = pr["leaf"]
    kinds = ("gaussian", "gaussian_scaled", "laplace", "laplace_scaled")
    if need(lf["kind"] in kinds, "prior.leaf.kind", f"must be one of {', '.join(kinds)}"):
        if lf["kind"] == "gaussian":
            need(_is_num(lf["sigma2"]) and lf["sigma2"] > 0, "prior.leaf.sigma2", "must be positive")
        if lf["kind"] == "laplace":
            need(_is_num(lf["lambda"]) and lf["lambda"] > 0, "prior.leaf.lambda", "must be positive")
    need(_is_int(pr["n_trees"]) and pr["n_trees"] >= 1, "prior.n_trees", "must be a positive integer")

    s = c["sampler"]
    it_ok = need(_is_int(s["iterations"]) and s["iterations"] >= 1, "sampler.iterations", "must be a positive integer")
    bi_ok = need(_is_int(s["burn_in"]) and s["burn_in"] >= 0, "sampler.burn_in", "must be a nonnegative integer")
    if it_ok and bi_ok:
        need(s["iterations"] > s["burn_in"], "sampler.iterations", "must exceed burn_in")
    need(_is_int(s["thin"]) and s["thin"] >= 1, "sampler.thin", "must be a positive integer")
    need(_is_int(s["max_depth"]) and s["max_depth"] >= 1, "sampler.max_depth", "must be a positive integer")
    mw = s["move_weights"]
    need(isinstance(mw, list) and len(mw) == 3 and all(_is_num(v) and v >= 0 for v in mw)
         and abs(sum(mw) - 1) <= 1e-12, "sampler.move_weights", "need three nonnegative probabilities summing to 1")

    e = c["experiment"]
    mode_ok = need(e["mode"] in MODES, "experiment.mode", f"must be one of {', '.join(MODES)}")
    if mode_ok:
        for key in REQUIRED_BY_MODE[e["mode"]]:
            need(e.get(key) is not None, f"experiment.{key}", f"required in {e['mode']} mode")
    if lf["kind"] == "laplace_scaled":
        need(_is_num(e["c_lambda"]) and e["c_lambda"] > 0, "experiment.c_lambda", "c_lambda must be positive")
    checks = {
        "n_reps": (lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        "nominal_level": (lambda v: _is_num(v) and 0 < v < 1, "must lie in (0,1)"),
        "centering_mode": (lambda v: v in CENTERING_MODES, f"must be one of {', '.join(CENTERING_MODES)}"),
        "M": (lambda v: _is_num(v) and v > 0, "must be positive"),
        "D": (lambda v: _is_num(v) and v > 0, "must be positive"),
        "M_n": (lambda v: _is_num(v) and v > 0, "must be positive"),
        "M2": (lambda v: _is_num(v) and v > 0, "must be positive"),
        "partition_budget": (lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        "grid_of_n": (lambda v: isinstance(v, list) and v and all(_is_int(k) and k >= 2 for k in v),
                      "must be a nonempty list of integers >= 2"),
        "max_depth_s": (lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        "n_datasets": (lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
    }
    for key, (ok, msg) in checks.items():
        v = e.get(key)
        if v is not None:
            need(ok(v), f"experiment.{key}", msg)
    need(isinstance(c["output"]["dir"], str), "output.dir", "must be a path string")
    return diags


def content_hash(obj) -> str:
    """Git-style content hash (``sha256`` over ``"blob <len>\\0" + canonical JSON``)."""
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(b"blob %d\0" % len(body) + body).hexdigest()


def _leaf_prior(c):
    lf = c["prior"]["leaf"]
    kind = lf["kind"]
    if kind == "gaussian":
        return GaussianLeafPrior(lf["sigma2"])
    if kind == "gaussian_scaled":
        return GaussianScaledLeafPrior()
    if kind == "laplace":
        return LaplaceLeafPrior(lf["lambda"])
    return LaplaceScaledLeafPrior(c["experiment"]["c_lambda"])


def _tree_prior(c):
    tr = c["prior"]["tree"]
    if tr["kind"] == "gw":
        return GaltonWatsonPrior(tr["variant"], tr["alpha"], tr["delta"])
    return UniformTopologyPrior(tr["lambda"], tr["cap"])


def build_sampler(c: dict) -> SamplerConfig:
    s = c["sampler"]
    return SamplerConfig(
        _tree_prior(c), _leaf_prior(c), c["prior"]["n_trees"], tuple(s["move_weights"]),
        s["iterations"], s["burn_in"], s["thin"], c["dataset"]["seed"], s["max_depth"],
    )


def build_setup(c: dict) -> ExperimentSetup:
    ds = c["dataset"]
    return ExperimentSetup(
        ds["n"], build_sampler(c), ds["p"], ds["family"], float(ds["alpha"]), dict(ds["params"]),
        c["weight"]["family"], float(c["weight"]["gamma"]), ds["seed"], bool(c["experiment"]["noiseless"]),
    )
