"""Run configuration: one INI file drives every subcommand.

Example::

    [model]
    family = product_bernoulli
    p = 0.7
    q = geometric(0.02, 0.5)
    initial_law = 1

    [exponents]
    h_low = 1
    h_high = inf

    [run]
    J = 16
    m = 20
    seed = 1

Level sequences are written as a number, ``geometric(scale, rate[, power])``
or ``table(v0, v1, ...[; tail])``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import re
from dataclasses import dataclass, field

from .errors import ConfigurationError, TreewaveError
from .kernels import (ConstantKernels, ExplicitTable, Geometric, KernelSchedule, PairDistribution,
                      ProductBernoulli, Remark4Kernels, Table)
from .tree import depth_cap

FAMILY_KEYS = {
    "constant": {"nu0", "nu1"},
    "product_bernoulli": {"p", "q"},
    "remark4": {"a", "b"},
    "table": {"rows"},
}
SECTIONS = {
    "model": {"family", "initial_law"} | set().union(*FAMILY_KEYS.values()),
    "exponents": {"h_low", "h_high"},
    "run": {"j", "m", "seed", "j_min", "probe_ceiling", "output", "wavelet", "guard"},
    "analysis": {"h", "eps", "rho_mode", "rho0", "t_max"},
    "verify": {"event", "trials", "args"},
}
REQUIRED = {"model": {"family"}, "exponents": {"h_low", "h_high"}, "run": {"j", "m", "seed"}}


@dataclass(frozen=True)
class RunConfig:
    schedule: KernelSchedule
    h_low: float
    h_high: float
    J: int
    m: int
    seed: int
    j_min: int | None = None
    probe_ceiling: float | None = None
    output: str = "out"
    wavelet: str = "meyer"
    guard: int = 4
    analysis: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {
            "schedule": self.schedule.describe(),
            "h_low": self.h_low,
            "h_high": "inf" if math.isinf(self.h_high) else self.h_high,
            "J": self.J, "m": self.m, "seed": self.seed, "j_min": self.j_min,
            "probe_ceiling": self.probe_ceiling, "wavelet": self.wavelet, "guard": self.guard,
            "analysis": dict(sorted(self.analysis.items())), "verify": dict(sorted(self.verify.items())),
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(blob.encode(), digest_size=16).hexdigest()


class ConfigError(ConfigurationError):
    """Configuration rejected; ``line`` is the 1-based line of the offending entry when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def _key_lines(text):
    lines, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
            lines[(section, None)] = n
            continue
        if raw[:1].isspace():
            continue  # continuation line
        key = re.split(r"[=:]", s, 1)[0].strip().lower()
        lines.setdefault((section, key), n)
    return lines


def _number(text, what, line):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"{what}: {text!r} is not a number", line) from None


def _integer(text, what, line):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{what}: {text!r} is not an integer", line) from None


def parse_sequence(text, what="sequence", line=None):
    t = text.strip()
    m = re.fullmatch(r"geometric\((.*)\)", t, re.I)
    if m:
        parts = [_number(v, what, line) for v in m.group(1).split(",")]
        if len(parts) not in (2, 3):
            raise ConfigError(f"{what}: geometric takes (scale, rate[, power])", line)
        return Geometric(*parts)
    m = re.fullmatch(r"table\((.*)\)", t, re.I)
    if m:
        body, _, tail = m.group(1).partition(";")
        vals = [_number(v, what, line) for v in body.split(",") if v.strip()]
        return Table(tuple(vals), _number(tail, what, line) if tail.strip() else None)
    v = _number(t, what, line)
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"{what}: {v!r} outside [0, 1]", line)
    return v


def _pair(text, what, line):
    vals = [_number(v, what, line) for v in re.split(r"[,\s]+", text.strip()) if v]
    if len(vals) != 4:
        raise ConfigError(f"{what}: expected four probabilities p00, p01, p10, p11", line)
    pd = PairDistribution(*vals)
    if not pd.is_valid:
        raise ConfigError(f"{what}: " + "; ".join(pd.problems()), line)
    return pd


def _schedule(sec, lines):
    def ln(k):
        return lines.get(("model", k))

    fam = sec["family"].strip().lower()
    if fam not in FAMILY_KEYS:
        raise ConfigError(f"unknown family {fam!r}; known: {sorted(FAMILY_KEYS)}", ln("family"))
    for k in sec:
        if k in SECTIONS["model"] - {"family", "initial_law"} and k not in FAMILY_KEYS[fam]:
            raise ConfigError(f"key {k!r} does not apply to family {fam!r}", ln(k))
    for k in FAMILY_KEYS[fam]:
        if k not in sec:
            raise ConfigError(f"family {fam!r} needs key {k!r}", ln("family"))
    pi = _number(sec.get("initial_law", "1"), "initial_law", ln("initial_law"))
    if not 0.0 <= pi <= 1.0:
        raise ConfigError("initial_law must lie in [0, 1]", ln("initial_law"))
    if fam == "constant":
        return ConstantKernels(_pair(sec["nu0"], "nu0", ln("nu0")), _pair(sec["nu1"], "nu1", ln("nu1")), pi)
    if fam == "product_bernoulli":
        return ProductBernoulli(parse_sequence(sec["p"], "p", ln("p")), parse_sequence(sec["q"], "q", ln("q")), pi)
    if fam == "remark4":
        return Remark4Kernels(_number(sec["a"], "a", ln("a")), _integer(sec["b"], "b", ln("b")), pi)
    rows = {}
    for raw in sec["rows"].strip().splitlines():
        parts = raw.split()
        if len(parts) != 6:
            raise ConfigError(f"table row {raw!r}: expected 'j state p00 p01 p10 p11'", ln("rows"))
        rows[(_integer(parts[0], "row level", ln("rows")), _integer(parts[1], "row state", ln("rows")))] = _pair(" ".join(parts[2:]), "row", ln("rows"))
    return ExplicitTable(rows, pi)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        raise ConfigError(f"syntax error: {exc.errors[0][1]!r}", exc.errors[0][0]) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    for s in parser.sections():
        if s not in SECTIONS:
            raise ConfigError(f"unknown section [{s}]", lines.get((s, None)))
        for k in parser[s]:
            if k not in SECTIONS[s]:
                raise ConfigError(f"unknown key {k!r} in [{s}]", lines.get((s, k)))
    for s, keys in REQUIRED.items():
        if s not in parser:
            raise ConfigError(f"missing section [{s}]")
        for k in keys:
            if k not in parser[s]:
                raise ConfigError(f"missing key {k!r} in [{s}]", lines.get((s, None)))

    try:
        schedule = _schedule(parser["model"], lines)
    except ConfigError:
        raise
    except TreewaveError as exc:
        raise ConfigError(str(exc), lines.get(("model", "family"))) from None

    ex, run = parser["exponents"], parser["run"]
    h_low = _number(ex["h_low"], "h_low", lines.get(("exponents", "h_low")))
    h_high = _number(ex["h_high"], "h_high", lines.get(("exponents", "h_high")))
    if not 0 < h_low < h_high:
        raise ConfigError(f"need 0 < h_low < h_high, got h_low={h_low!r}, h_high={h_high!r}",
                          lines.get(("exponents", "h_high")))

    def rl(k):
        return lines.get(("run", k))

    J = _integer(run["j"], "J", rl("j"))
    m = _integer(run["m"], "m", rl("m"))
    seed = _integer(run["seed"], "seed", rl("seed"))
    if J < 1:
        raise ConfigError("J must be at least 1", rl("j"))
    if J > depth_cap():
        raise ConfigError(f"J={J} exceeds the depth cap {depth_cap()}", rl("j"))
    if m < J + 4:
        raise ConfigError(f"grid exponent m={m} must be at least J + 4 = {J + 4}", rl("m"))
    if not 0 <= seed < 1 << 64:
        raise ConfigError("seed must fit in 64 unsigned bits", rl("seed"))
    j_min = _integer(run["j_min"], "j_min", rl("j_min")) if "j_min" in run else None
    if j_min is not None and not 1 <= j_min <= J:
        raise ConfigError("j_min must lie in [1, J]", rl("j_min"))
    ceiling = _number(run["probe_ceiling"], "probe_ceiling", rl("probe_ceiling")) if "probe_ceiling" in run else None
    if ceiling is not None and not ceiling > h_low:
        raise ConfigError("probe_ceiling must exceed h_low", rl("probe_ceiling"))
    guard = _integer(run.get("guard", "4"), "guard", rl("guard"))
    if guard < 2 or m < J + guard:
        raise ConfigError("guard must be >= 2 with m >= J + guard", rl("guard"))
    wavelet = run.get("wavelet", "meyer").strip().lower()
    if wavelet != "meyer":
        raise ConfigError(f"unknown wavelet {wavelet!r}", rl("wavelet"))

    analysis = {}
    if "analysis" in parser:
        a = parser["analysis"]

        def al(k):
            return lines.get(("analysis", k))

        for k in ("h", "eps", "rho0", "t_max"):
            if k in a:
                analysis[k] = _number(a[k], k, al(k))
        if "rho_mode" in a:
            mode = a["rho_mode"].strip().lower()
            if mode not in ("constant", "series"):
                raise ConfigError(f"rho_mode must be 'constant' or 'series', got {mode!r}", al("rho_mode"))
            analysis["rho_mode"] = mode
    verify = {}
    if "verify" in parser:
        v = parser["verify"]
        if "event" in v:
            verify["event"] = v["event"].strip()
        if "trials" in v:
            verify["trials"] = _integer(v["trials"], "trials", lines.get(("verify", "trials")))
        if "args" in v:
            verify["args"] = parse_event_args(v["args"], lines.get(("verify", "args")))
    return RunConfig(schedule, h_low, h_high, J, m, seed, j_min, ceiling, run.get("output", "out").strip(),
                     wavelet, guard, analysis, verify)


def parse_event_args(text, line=None) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"event argument {item!r} must read key=value", line)
        out[k.strip()] = _integer(v, k.strip(), line)
    return out


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
