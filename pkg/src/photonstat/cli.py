"""
Command-line interface.

    photonstat simulate   --config run.cfg --output stream.txt
    photonstat correlate  --input stream.txt --output hist.csv --mode full
    photonstat fit g2     --input hist.csv --report fit.txt
    photonstat model g2   --output g2.csv --svg g2.svg

Every subcommand reads an optional flat ``key = value`` config file; flags
override file values and unknown keys are rejected. Rates are given in MHz,
times in ns, timestamps in files in ps.

Exit codes: 0 success, 2 usage or config error, 3 data error,
4 fit did not converge.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
import math
import os
import sys
import warnings

import numpy as np

from photonstat import analysis, correlator, io, montecarlo, photophysics
from photonstat.photophysics import ParameterError, RateParams, TABLE1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FIT = 4

MHZ = 1e6
NS = 1e-9


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


# --- value parsers ------------------------------------------------------------

def _float(lo=-math.inf, lo_open=False):
    def parse(s):
        try:
            v = float(s)
        except ValueError:
            raise ConfigError(f"expected a number, got {s!r}") from None
        if not math.isfinite(v) or v < lo or (lo_open and v == lo):
            bound = ">" if lo_open else ">="
            raise ConfigError(f"expected a finite number {bound} {lo:g}, got {s!r}")
        return v
    return parse


def _prob(s):
    v = _float(0.0)(s)
    if v > 1:
        raise ConfigError(f"expected a value in [0, 1], got {s!r}")
    return v


def _int(lo=0):
    def parse(s):
        try:
            v = int(s)
        except ValueError:
            raise ConfigError(f"expected an integer, got {s!r}") from None
        if v < lo:
            raise ConfigError(f"expected an integer >= {lo}, got {s!r}")
        return v
    return parse


def _bool(s):
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


def _names(allowed):
    def parse(s):
        out = tuple(n.strip() for n in s.split(",") if n.strip())
        bad = [n for n in out if n not in allowed]
        if bad or not out:
            raise ConfigError(f"expected a comma list from {', '.join(allowed)}, got {s!r}")
        return out
    return parse


def _str(s):
    return str(s)


REQUIRED = object()


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    help: str


_POS = _float(0.0, lo_open=True)
_NONNEG = _float(0.0)

RATE_KEYS = {
    "k_mhz": Key(_NONNEG, TABLE1.k / MHZ, "pump rate k [MHz]"),
    "inv_t1_mhz": Key(_POS, TABLE1.inv_T1 / MHZ, "spontaneous decay rate 1/T1 [MHz]"),
    "gamma12_mhz": Key(_NONNEG, TABLE1.gamma12 / MHZ, "intersystem crossing rate [MHz]"),
    "gamma20_mhz": Key(_NONNEG, TABLE1.gamma20 / MHZ, "metastable decay rate [MHz]"),
}

SCHEMAS = {
    "simulate": {
        "output": Key(_str, REQUIRED, "timestamp file to write"),
        **RATE_KEYS,
        "phi_f": Key(_prob, 1.0, "fluorescence quantum yield"),
        "duration_s": Key(_POS, 1.0, "acquisition time [s]"),
        "seed": Key(_int(0), 0, "master seed"),
        "efficiency": Key(_prob, 1.0, "overall detection efficiency"),
        "background_cps": Key(_NONNEG, 0.0, "total background rate, split over both detectors [1/s]"),
        "dead_time_ns": Key(_NONNEG, 0.0, "detector dead time [ns]"),
        "jitter_ns": Key(_NONNEG, 0.0, "Gaussian timing jitter sigma [ns]"),
        "delay_ns": Key(_float(), 0.0, "electronic delay on channel B [ns]"),
        "burn_in_ns": Key(_NONNEG, None, "discarded burn-in [ns], default 100/gamma20"),
    },
    "correlate": {
        "input": Key(_str, REQUIRED, "timestamp file"),
        "output": Key(_str, REQUIRED, "histogram CSV to write"),
        "mode": Key(_choice("full", "startstop"), "full", "full correlation or start-stop"),
        "bin_ns": Key(_POS, 0.5, "bin width [ns]"),
        "center_ns": Key(_float(), None, "zero-delay position [ns], default the recorded delay"),
        "max_delay_ns": Key(_POS, 200.0, "full mode: half-width of the window around center [ns]"),
        "stop_range_ns": Key(_POS, 400.0, "startstop mode: window length from center [ns]"),
        "normalize": Key(_bool, True, "attach g2 and its error"),
    },
    "fit g2": {
        "input": Key(_str, REQUIRED, "histogram CSV"),
        **RATE_KEYS,
        "free": Key(_names(("k", "inv_T1", "gamma12", "gamma20")), ("gamma12", "gamma20"),
                    "comma list of free rates, others are held at their given values"),
        "contrast": Key(_bool, False, "also fit with a free background contrast factor"),
        "center_ns": Key(_float(), None, "zero-delay position [ns], default from the histogram"),
        "max_delay_ns": Key(_POS, None, "only fit bins within this distance of zero delay [ns]"),
        "report": Key(_str, None, "key=value report file"),
    },
    "fit saturation": {
        "input": Key(_str, REQUIRED, "CSV with columns power,rate[,sigma]"),
        "report": Key(_str, None, "key=value report file"),
    },
    "fit lifetime": {
        "input": Key(_str, REQUIRED, "CSV with columns time_ns,counts"),
        "report": Key(_str, None, "key=value report file"),
    },
    "fit dw": {
        "input": Key(_str, REQUIRED, "CSV with columns wavelength_nm,intensity"),
        "zpl_lo_nm": Key(_float(), REQUIRED, "zero-phonon window start [nm]"),
        "zpl_hi_nm": Key(_float(), REQUIRED, "zero-phonon window end [nm]"),
        "baseline": Key(_NONNEG, 0.0, "constant dark level subtracted first"),
        "report": Key(_str, None, "key=value report file"),
    },
    "fit yield": {
        **RATE_KEYS,
        "r_inf_cps": Key(_POS, REQUIRED, "saturated detected count rate [1/s]"),
        "efficiency": Key(_prob, REQUIRED, "overall detection efficiency"),
        "report": Key(_str, None, "key=value report file"),
    },
    "model g2": {
        **RATE_KEYS,
        "t_max_ns": Key(_POS, 200.0, "largest delay [ns]"),
        "n_points": Key(_int(2), 2001, "number of samples"),
        "output": Key(_str, REQUIRED, "CSV to write"),
        "svg": Key(_str, None, "optional SVG plot"),
    },
    "model saturation": {
        "r_inf_cps": Key(_POS, REQUIRED, "saturated count rate [1/s]"),
        "i_s": Key(_POS, REQUIRED, "saturation power"),
        "i_max": Key(_POS, None, "largest power, default 10 i_s"),
        "n_points": Key(_int(2), 201, "number of samples"),
        "output": Key(_str, REQUIRED, "CSV to write"),
        "svg": Key(_str, None, "optional SVG plot"),
    },
    "model populations": {
        **RATE_KEYS,
        "t_max_ns": Key(_POS, 200.0, "end time [ns]"),
        "n_points": Key(_int(2), 2001, "number of samples"),
        "output": Key(_str, REQUIRED, "CSV to write"),
        "svg": Key(_str, None, "optional SVG plot"),
    },
}


def resolve_config(command, file_values=None, overrides=None):
    """Merge defaults, config file and flag values for ``command``.

    ``file_values`` and ``overrides`` map keys to raw strings (overrides may
    also hold already-typed values). Raises ConfigError.
    """
    schema = SCHEMAS[command]
    merged = {}
    for source in (file_values or {}, overrides or {}):
        unknown = sorted(set(source) - set(schema))
        if unknown:
            raise ConfigError(f"unknown key(s) for '{command}': {', '.join(unknown)}")
        merged.update(source)
    out = {}
    for name, key in schema.items():
        if name in merged:
            raw = merged[name]
            try:
                out[name] = key.parse(raw) if isinstance(raw, str) else raw
            except ConfigError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        elif key.default is REQUIRED:
            raise ConfigError(f"missing required key '{name}' for '{command}'")
        else:
            out[name] = key.default
    return out


def rates_from(cfg):
    try:
        return RateParams.from_mhz(cfg["k_mhz"], cfg["inv_t1_mhz"], cfg["gamma12_mhz"],
                                   cfg["gamma20_mhz"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def configure_threads():
    """Cap numba parallelism from the PHOTONSTAT_THREADS environment variable."""
    value = os.environ.get("PHOTONSTAT_THREADS")
    if not value:
        return
    import numba
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"PHOTONSTAT_THREADS must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"PHOTONSTAT_THREADS must be a positive integer, got {value!r}")
    if numba.config.NUMBA_NUM_THREADS > 1:  # nothing to cap on a single core
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# --- reports -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(path, values):
    io.atomic_write(path, "".join(f"{k}={_fmt(v)}\n" for k, v in values.items()))


def read_report(path):
    """Parse a key=value report back into strings."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


# display scale and unit for each fitted parameter
_DISPLAY = {
    "k": (MHZ, "MHz"), "inv_T1": (MHZ, "MHz"), "gamma12": (MHZ, "MHz"), "gamma20": (MHZ, "MHz"),
    "tau": (NS, "ns"), "contrast": (1.0, ""), "R_inf": (1.0, "counts/s"), "I_s": (1.0, "power units"),
    "amplitude": (1.0, "counts"), "floor": (1.0, "counts"),
}

_KV_SUFFIX = {"MHz": "_mhz", "ns": "_ns"}


def _fit_lines(title, res, prefix=""):
    """Human-readable lines plus key=value pairs for a FitResult."""
    status = "converged" if res.converged else "NOT converged"
    lines = [f"{title}: {status} after {res.n_iterations} evaluations, "
             f"reduced chi2 {res.reduced_chi2:.4g} (initial {res.reduced_chi2_initial:.4g})"]
    kv = {}
    for name, value in res.params.items():
        scale, unit = _DISPLAY.get(name, (1.0, ""))
        key = prefix + name.lower() + _KV_SUFFIX.get(unit, "")
        kv[key] = value / scale
        if name in res.std_errors:
            err = res.std_errors[name] / scale
            kv[key + "_err"] = err
            lines.append(f"  {name:<9} = {value / scale:.6g} +/- {err:.2g} {unit}".rstrip())
        else:
            lines.append(f"  {name:<9} = {value / scale:.6g} {unit} (fixed)".rstrip())
    kv[prefix + "reduced_chi2"] = res.reduced_chi2
    kv[prefix + "converged"] = res.converged
    kv[prefix + "flags"] = ";".join(res.flags)
    lines += [f"  warning: {f}" for f in res.flags]
    return lines, kv


def _emit(cfg, lines, kv, out):
    print("\n".join(lines), file=out)
    if cfg.get("report"):
        write_report(cfg["report"], kv)


# --- commands ------------------------------------------------------------------

def cmd_simulate(cfg, out=sys.stdout):
    rates = rates_from(cfg)
    # one master seed feeds both the emitter and the detectors
    emitter_seed, detect_seed = (int(s) for s in
                                 np.random.SeedSequence(cfg["seed"]).generate_state(2, np.uint64))
    try:
        em = montecarlo.EmitterConfig(rates, cfg["phi_f"], cfg["duration_s"], emitter_seed)
        det = montecarlo.DetectorConfig(cfg["efficiency"], cfg["background_cps"],
                                        cfg["dead_time_ns"] * NS, cfg["jitter_ns"] * NS,
                                        cfg["delay_ns"] * NS)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    burn_in = None if cfg["burn_in_ns"] is None else cfg["burn_in_ns"] * NS
    emissions = montecarlo.simulate_emission(em, burn_in)
    meta = {k: v for k, v in cfg.items() if k != "output"}
    meta["generator"] = montecarlo.GENERATOR_NAME
    stream = montecarlo.detect(emissions, det, detect_seed, em.duration)
    stream.metadata = {**meta, "emitter_seed": emitter_seed, "detect_seed": detect_seed,
                       "n_emitted": int(emissions.size)}
    try:
        io.write_stream(cfg["output"], stream)
    except OSError as exc:
        raise DataError(f"cannot write {cfg['output']}: {exc}") from None
    n_a, n_b = stream.counts()
    T = em.duration
    print(f"simulated {T:g} s, seed {cfg['seed']} ({montecarlo.GENERATOR_NAME})\n"
          f"  emitted photons : {emissions.size} ({emissions.size / T:.6g} /s)\n"
          f"  channel A       : {n_a} ({n_a / T:.6g} /s)\n"
          f"  channel B       : {n_b} ({n_b / T:.6g} /s)\n"
          f"  total detected  : {n_a + n_b} ({(n_a + n_b) / T:.6g} /s)\n"
          f"  written to {cfg['output']}", file=out)
    return stream


def _read(reader, path, *args, **kwargs):
    try:
        return reader(path, *args, **kwargs)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except (io.DataFormatError, ValueError, OSError) as exc:
        raise DataError(str(exc)) from None


def cmd_correlate(cfg, out=sys.stdout):
    stream = _read(io.read_stream, cfg["input"])
    n_a, n_b = stream.counts()
    if n_a == 0 or n_b == 0:
        raise DataError(f"{cfg['input']}: channel {'A' if n_a == 0 else 'B'} has no events")
    if cfg["center_ns"] is not None:
        center = cfg["center_ns"] * NS
    else:
        center = float(stream.metadata.get("delay_ns", 0.0)) * NS
    w = cfg["bin_ns"] * NS
    if cfg["mode"] == "full":
        hist = correlator.full_correlation_histogram(stream, w, cfg["max_delay_ns"] * NS, center)
    else:
        hist = correlator.start_stop_histogram(stream, w, (center, center + cfg["stop_range_ns"] * NS))
    if cfg["normalize"]:
        try:
            hist = correlator.normalize(hist)
        except correlator.NormalizationError as exc:
            raise DataError(str(exc)) from None
    hist.metadata = {"mode": cfg["mode"], "center_ns": center / NS, "source": os.path.basename(cfg["input"])}
    for key in ("seed", "generator"):
        if key in stream.metadata:
            hist.metadata[key] = stream.metadata[key]
    try:
        io.write_histogram(cfg["output"], hist)
    except OSError as exc:
        raise DataError(f"cannot write {cfg['output']}: {exc}") from None
    print(f"{cfg['mode']} histogram: {hist.n_bins} bins of {cfg['bin_ns']:g} ns, "
          f"{int(hist.counts.sum())} coincidences from {n_a} starts and {n_b} stops\n"
          f"  written to {cfg['output']}", file=out)
    return hist


def _check(res):
    if not res.converged:
        raise NotConverged("fit did not converge")


def cmd_fit_g2(cfg, out=sys.stdout):
    hist = _read(io.read_histogram, cfg["input"])
    if not hist.normalized:
        try:
            hist = correlator.normalize(hist)
        except correlator.NormalizationError as exc:
            raise DataError(str(exc)) from None
    rates = rates_from(cfg)
    center = cfg["center_ns"] * NS if cfg["center_ns"] is not None else \
        float(hist.metadata.get("center_ns", 0.0)) * NS
    vals = {n: getattr(rates, n) for n in ("k", "inv_T1", "gamma12", "gamma20")}
    free = cfg["free"]
    init = {n: vals[n] for n in free}
    if any(v <= 0 for v in init.values()):
        raise ConfigError("free rates need positive starting values")
    fixed = {n: v for n, v in vals.items() if n not in free}
    max_delay = None if cfg["max_delay_ns"] is None else cfg["max_delay_ns"] * NS
    try:
        res = analysis.fit_g2(hist, fixed, init, free, False, center, max_delay)
    except analysis.FitError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    lines, kv = _fit_lines("fit g2", res)
    results = [res]
    if cfg["contrast"]:
        res_c = analysis.fit_g2(hist, fixed, {**init, "contrast": 1.0}, free, True, center, max_delay)
        more, kv_c = _fit_lines("fit g2 with background contrast", res_c, prefix="contrast_fit_")
        lines += more
        kv.update(kv_c)
        results.append(res_c)
    kv["input"] = cfg["input"]
    _emit(cfg, lines, kv, out)
    for r in results:
        _check(r)
    return results


def cmd_fit_saturation(cfg, out=sys.stdout):
    cols, _ = _read(io.read_columns, cfg["input"], ("power", "rate"), ("sigma",))
    try:
        data = analysis.SaturationData(cols["power"], cols["rate"], cols.get("sigma"))
        res = analysis.fit_saturation(data)
    except (analysis.FitError, ValueError) as exc:
        raise DataError(str(exc)) from None
    lines, kv = _fit_lines("fit saturation", res)
    _emit(cfg, lines, kv, out)
    _check(res)
    return res


def cmd_fit_lifetime(cfg, out=sys.stdout):
    cols, _ = _read(io.read_columns, cfg["input"], ("time_ns", "counts"))
    try:
        res = analysis.fit_lifetime(analysis.DecayHistogram(cols["time_ns"] * NS, cols["counts"]))
    except (analysis.FitError, ValueError) as exc:
        raise DataError(str(exc)) from None
    lines, kv = _fit_lines("fit lifetime", res)
    _emit(cfg, lines, kv, out)
    _check(res)
    return res


def cmd_fit_dw(cfg, out=sys.stdout):
    cols, _ = _read(io.read_columns, cfg["input"], ("wavelength_nm", "intensity"))
    if not cfg["zpl_lo_nm"] < cfg["zpl_hi_nm"]:
        raise ConfigError("zpl_lo_nm must be below zpl_hi_nm")
    try:
        spec = analysis.Spectrum(cols["wavelength_nm"], cols["intensity"],
                                 (cfg["zpl_lo_nm"], cfg["zpl_hi_nm"]))
        dw = analysis.debye_waller(spec, cfg["baseline"])
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _emit(cfg, [f"Debye-Waller factor = {dw:.4f} "
                f"(zero-phonon window {cfg['zpl_lo_nm']:g}-{cfg['zpl_hi_nm']:g} nm)"],
          {"debye_waller": dw}, out)
    return dw


def cmd_fit_yield(cfg, out=sys.stdout):
    rates = rates_from(cfg)
    if not cfg["efficiency"] > 0:
        raise ConfigError("efficiency must be > 0")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            phi = analysis.quantum_yield(rates, cfg["r_inf_cps"], cfg["efficiency"])
        r_max = photophysics.max_emission_rate(rates, 1.0)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    lines = [f"quantum yield = {phi:.4f}",
             f"  maximum emission rate at unit yield = {r_max:.6g} photons/s"]
    lines += [f"  warning: {w.message}" for w in caught]
    _emit(cfg, lines, {"quantum_yield": phi, "max_emission_rate": r_max,
                       "three_two_ratio": analysis.three_two_ratio(rates)}, out)
    return phi


def _plot(path, x, ys, xlabel, ylabel):
    import io as _io
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend()
    buf = _io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    io.atomic_write(path, buf.getvalue())


def _write_model(cfg, columns, meta, xlabel, ylabel, out):
    try:
        io.write_columns(cfg["output"], columns, meta)
        names = list(columns)
        if cfg.get("svg"):
            _plot(cfg["svg"], columns[names[0]], {n: columns[n] for n in names[1:]}, xlabel, ylabel)
    except OSError as exc:
        raise DataError(f"cannot write output: {exc}") from None
    print(f"wrote {len(columns[names[0]])} samples to {cfg['output']}"
          + (f" and plot to {cfg['svg']}" if cfg.get("svg") else ""), file=out)


def _rate_meta(cfg):
    return {k: cfg[k] for k in RATE_KEYS}


def cmd_model_g2(cfg, out=sys.stdout):
    rates = rates_from(cfg)
    t_ns = np.linspace(0.0, cfg["t_max_ns"], cfg["n_points"])
    try:
        g = photophysics.g2_analytic(rates, t_ns * NS)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    _write_model(cfg, {"t_ns": t_ns, "g2": g}, _rate_meta(cfg), "delay [ns]", "g2", out)
    return t_ns, g


def cmd_model_saturation(cfg, out=sys.stdout):
    i_max = cfg["i_max"] if cfg["i_max"] is not None else 10 * cfg["i_s"]
    power = np.linspace(0.0, i_max, cfg["n_points"])
    rate = photophysics.saturation_rate(photophysics.SaturationParams(cfg["r_inf_cps"], cfg["i_s"]), power)
    _write_model(cfg, {"power": power, "rate": rate},
                 {"r_inf_cps": cfg["r_inf_cps"], "i_s": cfg["i_s"]}, "excitation power", "counts/s", out)
    return power, rate


def cmd_model_populations(cfg, out=sys.stdout):
    rates = rates_from(cfg)
    t_ns = np.linspace(0.0, cfg["t_max_ns"], cfg["n_points"])
    try:
        rho = np.array([photophysics.propagate(rates, photophysics.GROUND, t * NS).as_array()
                        for t in t_ns])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    _write_model(cfg, {"t_ns": t_ns, "rho0": rho[:, 0], "rho1": rho[:, 1], "rho2": rho[:, 2]},
                 _rate_meta(cfg), "time [ns]", "population", out)
    return t_ns, rho


COMMANDS = {
    "simulate": cmd_simulate,
    "correlate": cmd_correlate,
    "fit g2": cmd_fit_g2,
    "fit saturation": cmd_fit_saturation,
    "fit lifetime": cmd_fit_lifetime,
    "fit dw": cmd_fit_dw,
    "fit yield": cmd_fit_yield,
    "model g2": cmd_model_g2,
    "model saturation": cmd_model_saturation,
    "model populations": cmd_model_populations,
}


# --- argument parsing ------------------------------------------------------------

def _add_keys(parser, command):
    parser.add_argument("-c", "--config", help="flat key = value config file")
    for name, key in SCHEMAS[command].items():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        default = "" if key.default in (REQUIRED, None) else f" (default {_fmt(key.default)})"
        req = " (required)" if key.default is REQUIRED else ""
        parser.add_argument(*flags, dest=name, default=None, metavar="VALUE",
                            help=key.help + default + req)
    parser.set_defaults(command=command)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="photonstat",
        description="Photon statistics of single three-level emitters: simulate, correlate, fit, model.")
    sub = parser.add_subparsers(dest="group", required=True)
    _add_keys(sub.add_parser("simulate", help="Monte Carlo timestamp stream"), "simulate")
    _add_keys(sub.add_parser("correlate", help="coincidence histogram from a timestamp file"),
              "correlate")
    for group, helptext in (("fit", "fit measured curves"), ("model", "sample analytic curves")):
        g = sub.add_parser(group, help=helptext).add_subparsers(dest="kind", required=True)
        for command in SCHEMAS:
            if command.startswith(group + " "):
                _add_keys(g.add_parser(command.split(" ", 1)[1]), command)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return exc.code
    command = args.command
    overrides = {name: getattr(args, name) for name in SCHEMAS[command]
                 if getattr(args, name) is not None}
    try:
        configure_threads()
        file_values = io.read_config(args.config) if args.config else {}
        cfg = resolve_config(command, file_values, overrides)
    except (ConfigError, io.DataFormatError, OSError) as exc:
        print(f"photonstat: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[command](cfg, out=out)
    except ConfigError as exc:
        print(f"photonstat: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"photonstat: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NotConverged as exc:
        print(f"photonstat: {exc}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
