"""Scenario configuration: flat, typed key-value text with sections.

The format is standard INI (read with :mod:`configparser`).  The schema
is strict: unknown sections or keys are rejected before any computation,
as are missing required keys for the selected mode.  No environment
variables are consulted.

Schema
------
[run]           mode (simulate|optimize|rate-study|oracle-1d|sweep),
                verbosity (int, default 1)
[mesh]          dim (1|2), nx (int), ny (int, dim 2 only),
                dirichlet (interval: both|left|right;
                           rectangle: all or '+'-joined sides)
[material]      mu (float > 0), lame_lambda (float >= 0),
                sigma_y (float > 0)
[time]          t_final (float > 0), steps (int > 0)
[solver]        scheme (explicit|implicit), lam (float >= 0),
                huber_eps (float >= 0, default 0),
                substep (bool, default true)
[drive]         preset (ramp|shear|stretch), amplitude (float, default 1)
[objective]     alpha, theta, huber_eps_obj, load_rate_weight,
                strain_weight, velocity_weight, maxit (int), gtol
[continuation]  lambdas (comma-separated decreasing floats)
[rate_study]    lambdas (comma list), steps (int), t_final (float)
[oracle]        variant (all|linear|two-phase|frozen), resolution (int),
                alpha (float), beta (float)
[sweep]         lambdas (comma list), schemes (comma list, optional)
"""

import configparser

MODES = ("simulate", "optimize", "rate-study", "oracle-1d", "sweep")


class ConfigError(ValueError):
    """Invalid, unknown or missing configuration content."""


def _bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _float_list(s):
    return [float(v) for v in s.replace(",", " ").split()]


def _str_list(s):
    return [v for v in s.replace(",", " ").split()]


# section -> key -> (caster, default); default REQUIRED means mandatory
# whenever the section itself is required by the mode.
REQUIRED = object()

SCHEMA = {
    "run": {"mode": (str, REQUIRED), "verbosity": (int, 1)},
    "mesh": {"dim": (int, REQUIRED), "nx": (int, REQUIRED),
             "ny": (int, None), "dirichlet": (str, None)},
    "material": {"mu": (float, REQUIRED), "lame_lambda": (float, REQUIRED),
                 "sigma_y": (float, REQUIRED)},
    "time": {"t_final": (float, REQUIRED), "steps": (int, REQUIRED)},
    "solver": {"scheme": (str, "implicit"), "lam": (float, REQUIRED),
               "huber_eps": (float, 0.0), "substep": (_bool, True)},
    "drive": {"preset": (str, REQUIRED), "amplitude": (float, 1.0)},
    "objective": {"alpha": (float, REQUIRED), "theta": (float, REQUIRED),
                  "huber_eps_obj": (float, 1e-6),
                  "load_rate_weight": (float, 1.0),
                  "strain_weight": (float, 1.0),
                  "velocity_weight": (float, 1.0),
                  "maxit": (int, 100), "gtol": (float, 1e-7)},
    "continuation": {"lambdas": (_float_list, None)},
    "rate_study": {"lambdas": (_float_list,
                               [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]),
                   "steps": (int, 4000), "t_final": (float, 1.0)},
    "oracle": {"variant": (str, "all"), "resolution": (int, 200),
               "alpha": (float, 1.0), "beta": (float, 0.5)},
    "sweep": {"lambdas": (_float_list, REQUIRED),
              "schemes": (_str_list, ["implicit"])},
}

# sections that must be present per mode (beyond [run])
MODE_SECTIONS = {
    "simulate": ("mesh", "material", "time", "solver", "drive"),
    "optimize": ("mesh", "material", "time", "solver", "drive", "objective"),
    "rate-study": ("material", "rate_study"),
    "oracle-1d": ("oracle",),
    "sweep": ("mesh", "material", "time", "solver", "drive", "sweep"),
}


def load_config(path, mode_override=None):
    """Parse and validate a scenario file; returns a nested dict.

    Every section present is fully validated against the schema (unknown
    keys fail fast); afterwards the mode-specific required sections and
    keys are checked.  Defaults are filled in for optional keys of all
    sections the mode uses or that appear in the file.
    """
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    cfg = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        cfg[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            caster = SCHEMA[section][key][0]
            try:
                cfg[section][key] = caster(raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {key!r} in [{section}]: {exc}") from exc

    mode = mode_override or cfg.get("run", {}).get("mode")
    if mode is None:
        raise ConfigError("missing [run] mode (and no --mode override)")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; valid: {', '.join(MODES)}")

    needed = set(MODE_SECTIONS[mode]) | set(cfg) | {"run"}
    for section in needed:
        body = cfg.setdefault(section, {})
        for key, (_, default) in SCHEMA[section].items():
            if key in body:
                continue
            if default is REQUIRED:
                if section in MODE_SECTIONS[mode] or (
                        section == "run" and key == "mode"
                        and mode_override is None):
                    raise ConfigError(
                        f"missing required key {key!r} in [{section}]")
            else:
                body[key] = default
    cfg["run"]["mode"] = mode

    _validate_values(cfg, mode)
    return cfg


def _validate_values(cfg, mode):
    if mode in ("simulate", "optimize", "sweep"):
        m = cfg["mesh"]
        if m.get("dim") not in (1, 2):
            raise ConfigError("[mesh] dim must be 1 or 2")
        if m["dim"] == 2 and not m.get("ny"):
            raise ConfigError("[mesh] ny is required for dim 2")
        if m.get("dirichlet") is None:
            m["dirichlet"] = "both" if m["dim"] == 1 else "all"
        mat = cfg["material"]
        if mat["mu"] <= 0 or mat["sigma_y"] <= 0 or mat["lame_lambda"] < 0:
            raise ConfigError("[material] needs mu > 0, sigma_y > 0, "
                              "lame_lambda >= 0")
        t = cfg["time"]
        if t["t_final"] <= 0 or t["steps"] <= 0:
            raise ConfigError("[time] needs t_final > 0 and steps > 0")
        s = cfg["solver"]
        if s["scheme"] not in ("explicit", "implicit"):
            raise ConfigError("[solver] scheme must be explicit or implicit")
        if s["lam"] < 0 or s["huber_eps"] < 0:
            raise ConfigError("[solver] lam and huber_eps must be >= 0")
        d = cfg["drive"]
        if d["preset"] not in ("ramp", "shear", "stretch"):
            raise ConfigError("[drive] preset must be ramp, shear or stretch")
        if m["dim"] == 1 and d["preset"] != "ramp":
            raise ConfigError("[drive] only the ramp preset exists in 1D")
        if m["dim"] == 2 and d["preset"] == "ramp":
            raise ConfigError("[drive] ramp is a 1D preset")
    if mode == "optimize":
        s = cfg["solver"]
        if s["scheme"] != "explicit" or s["lam"] <= 0 or s["huber_eps"] <= 0:
            raise ConfigError("[solver] optimize mode needs the explicit "
                              "scheme with lam > 0 and huber_eps > 0 "
                              "(the adjoint differentiates the smoothed "
                              "explicit sweep)")
        o = cfg["objective"]
        if not 0.0 < o["theta"] < 1.0:
            raise ConfigError("[objective] theta must lie in (0, 1)")
        if o["alpha"] <= 0:
            raise ConfigError("[objective] alpha must be positive")
        lams = cfg.get("continuation", {}).get("lambdas")
        if lams is not None:
            if any(l <= 0 for l in lams):
                raise ConfigError("[continuation] lambdas must be positive")
            if any(b >= a for a, b in zip(lams, lams[1:])):
                raise ConfigError("[continuation] lambdas must decrease")
    if mode == "rate-study":
        r = cfg["rate_study"]
        if any(l <= 0 for l in r["lambdas"]):
            raise ConfigError("[rate_study] lambdas must be positive")
        if r["steps"] <= 0 or r["t_final"] <= 0:
            raise ConfigError("[rate_study] steps and t_final must be > 0")
    if mode == "oracle-1d":
        o = cfg["oracle"]
        if o["variant"] not in ("all", "linear", "two-phase", "frozen"):
            raise ConfigError("[oracle] variant must be all, linear, "
                              "two-phase or frozen")
    if mode == "sweep":
        sw = cfg["sweep"]
        if any(l <= 0 for l in sw["lambdas"]):
            raise ConfigError("[sweep] lambdas must be positive")
        for sch in sw["schemes"]:
            if sch not in ("explicit", "implicit"):
                raise ConfigError(f"[sweep] unknown scheme {sch!r}")
