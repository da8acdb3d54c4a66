"""Flat ``key=value`` run configuration.

Recognised keys::

    problem.kind     gaussian | rosenbrock | shells | mixture | plateau
    problem.d        dimension
    problem.mu, problem.sigma, problem.c, problem.r, problem.w
    sampler.kind     rejection | ellipsoidal | slice
    sampler.efr      ellipsoid volume enlargement is 1/efr
    sampler.nr       slice repeats, an integer or a multiple of d such as "2d"
    sampler.max_proposals
    sampler.bounded  true | false (rejection only)
    ns.nlive, ns.epsilon, ns.seed, ns.max_iterations

``problem.kind``, ``problem.d``, ``sampler.efr`` and ``sampler.nr`` may hold
comma-separated lists; the batch command runs every combination.
"""

from dataclasses import dataclass, replace
import itertools
import re

from .ns_engine import NSSettings
from .errors import ContractError
from .constrained_samplers import SamplerConfig
from .toy_likelihoods import make_problem

LIST_KEYS = ("problem.kind", "problem.d", "sampler.efr", "sampler.nr")
_PROBLEM_PARAMS = ("mu", "sigma", "c", "r", "w")
_KNOWN = {
    "problem.kind", "problem.d", "sampler.kind", "sampler.efr", "sampler.nr",
    "sampler.max_proposals", "sampler.bounded", "ns.nlive", "ns.epsilon", "ns.seed",
    "ns.max_iterations", *(f"problem.{p}" for p in _PROBLEM_PARAMS),
}
_NR = re.compile(r"^(\d*)d$")


class ConfigError(ContractError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    problem: object
    settings: NSSettings
    nr_spec: str | None = None

    def header(self):
        s = self.settings
        out = dict(self.problem.describe())
        out["sampler.kind"] = s.sampler.kind
        out["sampler.efr"] = repr(float(s.sampler.efr))
        out["sampler.nr"] = str(s.sampler.repeats(self.problem.dimension))
        out["sampler.max_proposals"] = str(s.sampler.max_proposals)
        out["sampler.bounded"] = "true" if s.sampler.bounded else "false"
        out["ns.nlive"] = str(s.n_live)
        out["ns.epsilon"] = repr(float(s.epsilon))
        out["ns.seed"] = str(s.rng_seed)
        out["ns.max_iterations"] = str(s.max_iterations)
        return out

    def efr_or_nr(self):
        """Table label: efr for ellipsoidal runs, d/n_r for slice runs."""
        sampler = self.settings.sampler
        if sampler.kind == "ellipsoidal":
            return sampler.efr
        if sampler.kind == "slice":
            return self.problem.dimension / sampler.repeats(self.problem.dimension)
        return float("nan")

    def with_seed(self, seed):
        return replace(self, settings=replace(self.settings, rng_seed=int(seed)))


def parse(text):
    """Map each key to ``(raw value, line number)``."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("expected key=value", lineno)
        if key not in _KNOWN:
            raise ConfigError("unknown key", lineno, key)
        if key in entries:
            raise ConfigError("duplicate key", lineno, key)
        entries[key] = (value, lineno)
    if "problem.kind" not in entries:
        raise ConfigError("problem.kind is required", key="problem.kind")
    return entries


def _convert(entries, key, cast, default=None):
    if key not in entries:
        return default
    value, line = entries[key]
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read {value!r}", line, key) from None


def _bool(text):
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(text)


def _nr_value(spec, dimension):
    m = _NR.match(spec)
    if m:
        return (int(m.group(1)) if m.group(1) else 1) * dimension
    return int(spec)


def expand(entries):
    """All run configurations described by a parsed config."""
    lists = {}
    for key in LIST_KEYS:
        if key in entries:
            value, line = entries[key]
            items = [v.strip() for v in value.split(",") if v.strip()]
            if not items:
                raise ConfigError("empty value", line, key)
            lists[key] = [(item, line) for item in items]
        else:
            lists[key] = [(None, None)]

    params = {}
    for name in _PROBLEM_PARAMS:
        value = _convert(entries, f"problem.{name}", float)
        if value is not None:
            params[name] = value
    sampler_kind = _convert(entries, "sampler.kind", str, "rejection")
    max_proposals = _convert(entries, "sampler.max_proposals", int, 1_000_000)
    bounded = _convert(entries, "sampler.bounded", _bool, True)
    n_live = _convert(entries, "ns.nlive", int, 500)
    epsilon = _convert(entries, "ns.epsilon", float, 0.01)
    seed = _convert(entries, "ns.seed", int, 0)
    max_iterations = _convert(entries, "ns.max_iterations", int, 10_000_000)

    configs = []
    for (kind, kline), (d, dline), (efr, eline), (nr, nline) in itertools.product(
            lists["problem.kind"], lists["problem.d"], lists["sampler.efr"], lists["sampler.nr"]):
        try:
            dim = int(d) if d is not None else None
        except ValueError:
            raise ConfigError(f"cannot read {d!r}", dline, "problem.d") from None
        try:
            problem = make_problem(kind, dim, **params)
        except ContractError as exc:
            raise ConfigError(str(exc), kline, "problem.kind") from None
        try:
            efr_value = float(efr) if efr is not None else 1.0
        except ValueError:
            raise ConfigError(f"cannot read {efr!r}", eline, "sampler.efr") from None
        try:
            nr_value = _nr_value(nr, problem.dimension) if nr is not None else None
        except ValueError:
            raise ConfigError(f"cannot read {nr!r}", nline, "sampler.nr") from None
        try:
            sampler = SamplerConfig(sampler_kind, efr_value, nr_value, max_proposals, bounded)
            settings = NSSettings(n_live, epsilon, sampler, seed, max_iterations)
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
        configs.append(RunConfig(problem, settings, nr))
    return configs


def load(path):
    with open(path, encoding="utf-8") as fh:
        return expand(parse(fh.read()))
