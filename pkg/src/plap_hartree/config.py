"""Run configuration: flat ``key = value`` text in INI sections.

Grammar::

    [params]   N, p, mu, s, sigma (blank = variant default), variant,
               mu_steps (0 = single instance, n = ladder mu_k = k mu_bar / n)
    [grid]     r_min, r_max, M
    [solver]   max_outer, max_inner, step0, energy_tol, residual_tol,
               seed_profile, seed_path, test_bumps
    [verify]   tol, near_window, far_window (``lo, hi`` or blank), lambdas,
               ray_count, ray_points, deficit_tol, spread_limit, sign_margin,
               quotient_tol, gamma_offset, seed
    [output]   dir, kernel_cache (blank = none), angular_nodes
    [suite]    criteria (comma list of 1-8), instances (``;``-separated
               ``variant N p mu``), mc_samples, jobs

Unknown sections or keys are rejected. Every section is optional and
defaults fill in missing keys.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from .errors import ParameterError
from .model import ProblemParams, Variant
from .radial import RadialGrid
from .solver import SeedKind, SolveOptions
from .verify import VerifyOptions


@dataclass
class SuiteSpec:
    criteria: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    instances: tuple = (("Hartree", 5, 2.0, 0.0), ("Hartree", 5, 2.0, 1.0))
    mc_samples: int = 1_000_000
    jobs: int = 1


@dataclass
class OutputSpec:
    dir: str = "out"
    kernel_cache: str | None = None
    angular_nodes: int = 256


@dataclass
class RunConfig:
    params: ProblemParams = field(default_factory=lambda: ProblemParams(5, 2.0, 1.0))
    mu_steps: int = 0
    grid: RadialGrid = field(default_factory=RadialGrid)
    solver: SolveOptions = field(default_factory=SolveOptions)
    verify: VerifyOptions = field(default_factory=VerifyOptions)
    output: OutputSpec = field(default_factory=OutputSpec)
    suite: SuiteSpec = field(default_factory=SuiteSpec)

    def mu_ladder(self):
        """The configured μ values: the instance alone or an evenly spaced ladder in [0, μ̄)."""
        if self.mu_steps <= 0:
            return [self.params.mu]
        mb = self.params.mu_bar
        return [mb * k / self.mu_steps for k in range(self.mu_steps)]


# ---------------------------------------------------------------------------
# scalar codecs


def _opt_float(text):
    text = text.strip()
    return None if text in ("", "none", "None") else float(text)


def _opt_str(text):
    text = text.strip()
    return None if text in ("", "none", "None") else text


def _window(text):
    text = text.strip()
    if text in ("", "none", "None"):
        return None
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"window needs two numbers, got {text!r}")
    return tuple(parts)


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _instances(text):
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 4:
            raise ValueError(f"instance {chunk!r} must read 'variant N p mu'")
        out.append((Variant.parse(parts[0]).value, int(parts[1]), float(parts[2]), float(parts[3])))
    return tuple(out)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, Variant) or isinstance(value, SeedKind):
        return value.value
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(" ".join(_fmt(x) for x in inst) for inst in value)
        return ", ".join(_fmt(x) for x in value)
    return str(value)


PARAMS_KEYS = {"N": int, "p": float, "mu": float, "s": float, "sigma": _opt_float,
               "variant": str, "mu_steps": int}
GRID_KEYS = {"r_min": float, "r_max": float, "M": int}
SOLVER_KEYS = {"max_outer": int, "max_inner": int, "step0": float, "energy_tol": float,
               "residual_tol": float, "seed_profile": str, "seed_path": _opt_str,
               "test_bumps": int}
VERIFY_KEYS = {"tol": float, "near_window": _window, "far_window": _window,
               "lambdas": _floats, "ray_count": int, "ray_points": int,
               "deficit_tol": float, "spread_limit": float, "sign_margin": float,
               "monotone_slack": float, "quotient_tol": float, "gamma_offset": float,
               "seed": int}
OUTPUT_KEYS = {"dir": str, "kernel_cache": _opt_str, "angular_nodes": int}
SUITE_KEYS = {"criteria": _ints, "instances": _instances, "mc_samples": int, "jobs": int}
SECTIONS = {"params": PARAMS_KEYS, "grid": GRID_KEYS, "solver": SOLVER_KEYS,
            "verify": VERIFY_KEYS, "output": OUTPUT_KEYS, "suite": SUITE_KEYS}


def _section(cp, name):
    keys = SECTIONS[name]
    out = {}
    if not cp.has_section(name):
        return out
    for k, raw in cp.items(name):
        if k not in keys:
            raise ParameterError(f"[{name}] unknown key {k!r}")
        try:
            out[k] = keys[k](raw)
        except ValueError as exc:
            raise ParameterError(f"[{name}] {k} = {raw!r}: {exc}") from None
    return out


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; parameters are validated before returning."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParameterError(f"config syntax: {exc}") from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ParameterError(f"unknown section [{sec}]")
    base = RunConfig.__new__(RunConfig)
    pr = _section(cp, "params")
    mu_steps = pr.pop("mu_steps", 0)
    pdef = {"N": 5, "p": 2.0, "mu": 1.0, "s": 0.0, "sigma": None, "variant": "Hartree"}
    pdef.update(pr)
    pdef["variant"] = Variant.parse(pdef["variant"])
    base.params = ProblemParams(**pdef)
    base.mu_steps = mu_steps
    base.grid = RadialGrid(**_section(cp, "grid"))
    base.solver = SolveOptions(**_section(cp, "solver"))
    vs = _section(cp, "verify")
    base.verify = VerifyOptions(**vs)
    base.output = OutputSpec(**_section(cp, "output"))
    base.suite = SuiteSpec(**_section(cp, "suite"))
    if base.output.angular_nodes < 32:
        raise ParameterError("angular_nodes must be >= 32")
    if any(c not in range(1, 9) for c in base.suite.criteria):
        raise ParameterError("suite criteria must be numbers 1-8")
    return base


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (``parse(serialize(c)) == c``)."""
    pr = cfg.params
    sections = {
        "params": {"N": pr.N, "p": float(pr.p), "mu": float(pr.mu), "s": float(pr.s),
                   "sigma": None if pr.sigma is None else float(pr.sigma),
                   "variant": pr.variant, "mu_steps": cfg.mu_steps},
        "grid": {"r_min": float(cfg.grid.r_min), "r_max": float(cfg.grid.r_max), "M": cfg.grid.M},
        "solver": {k: getattr(cfg.solver, k) for k in SOLVER_KEYS},
        "verify": {k: getattr(cfg.verify, k) for k in VERIFY_KEYS},
        "output": {k: getattr(cfg.output, k) for k in OUTPUT_KEYS},
        "suite": {k: getattr(cfg.suite, k) for k in SUITE_KEYS},
    }
    buf = io.StringIO()
    for name, kv in sections.items():
        buf.write(f"[{name}]\n")
        for k, v in kv.items():
            buf.write(f"{k} = {_fmt(v)}\n")
        buf.write("\n")
    return buf.getvalue()


def config_equal(a: RunConfig, b: RunConfig) -> bool:
    def flat(c):
        return (c.params.as_dict(), c.mu_steps, (c.grid.r_min, c.grid.r_max, c.grid.M),
                dataclasses.asdict(c.solver), dataclasses.asdict(c.verify),
                dataclasses.asdict(c.output), dataclasses.asdict(c.suite))
    return flat(a) == flat(b)
