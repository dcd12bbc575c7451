import io as _io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonstat import io
from photonstat.cli import (
    EXIT_DATA,
    EXIT_FIT,
    EXIT_OK,
    EXIT_USAGE,
    SCHEMAS,
    ConfigError,
    main,
    read_report,
    resolve_config,
)
from photonstat.correlator import CoincidenceHistogram, full_correlation_histogram, normalize
from photonstat.montecarlo import PhotonStream
from photonstat.synthetic import synthetic_decay, synthetic_saturation, synthetic_spectrum


def run(*argv):
    out = _io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


# --- round trips ---------------------------------------------------------------

meta_values = st.one_of(st.integers(-2**63, 2**64 - 1), st.floats(allow_nan=False),
                        st.text(max_size=20), st.booleans(), st.none())
meta_keys = st.from_regex(r"[a-z][a-z0-9_]{0,12}", fullmatch=True).filter(
    lambda k: k not in ("format", "duration_s", "bin_width_ns", "bin_width_s", "delay_min_s", "n_starts",
                        "n_stops", "total_time_s"))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2**62), st.integers(0, 1)), max_size=50),
       st.floats(1e-9, 1e6), st.dictionaries(meta_keys, meta_values, max_size=5))
def test_stream_round_trip(tmp_path_factory, events, duration, meta):
    events.sort()
    ts = np.array([e[0] for e in events], dtype=np.int64)
    ch = np.array([e[1] for e in events], dtype=np.uint8)
    s = PhotonStream(ts, ch, duration, meta)
    path = tmp_path_factory.mktemp("rt") / "s.txt"
    io.write_stream(path, s)
    assert io.read_stream(path) == s


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 10**12), min_size=1, max_size=40), st.booleans(),
       st.floats(1e-12, 1e-6), st.floats(-1e-6, 1e-6), st.dictionaries(meta_keys, meta_values, max_size=3))
def test_histogram_round_trip(tmp_path_factory, counts, norm, width, dmin, meta):
    h = CoincidenceHistogram(width, dmin, np.array(counts), 1234, 5678, 0.5, metadata=meta)
    if norm:
        h = normalize(h)
        h.metadata = meta
    path = tmp_path_factory.mktemp("rt") / "h.csv"
    io.write_histogram(path, h)
    back = io.read_histogram(path)
    assert back.bin_width == h.bin_width and back.delay_min == h.delay_min
    assert np.array_equal(back.counts, h.counts)
    assert (back.n_starts, back.n_stops, back.total_time) == (h.n_starts, h.n_stops, h.total_time)
    assert back.metadata == h.metadata
    if norm:
        assert np.array_equal(back.g2, h.g2) and np.array_equal(back.g2_err, h.g2_err)
    else:
        assert back.g2 is None


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.from_regex(r"[a-z_][a-z0-9_]{0,10}", fullmatch=True),
                       st.from_regex(r"[A-Za-z0-9_.,:/+-]{1,20}", fullmatch=True), max_size=8))
def test_config_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "c.cfg"
    io.write_config(path, values)
    assert io.read_config(path) == values


def test_columns_round_trip(tmp_path):
    cols = {"x": np.linspace(0, 1, 7), "y": np.geomspace(1e-300, 1e300, 7)}
    io.write_columns(tmp_path / "c.csv", cols, {"note": "hi"})
    back, meta = io.read_columns(tmp_path / "c.csv", ("x", "y"))
    assert meta == {"note": "hi"}
    for k in cols:
        assert np.array_equal(back[k], cols[k])


def test_read_stream_rejects_garbage(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text('# format="photonstat-stream-1"\n# duration_s=1.0\nC,12\n')
    with pytest.raises(io.DataFormatError):
        io.read_stream(p)
    p.write_text('# format="photonstat-stream-1"\n# duration_s=1.0\nA,20\nB,10\n')
    with pytest.raises(io.DataFormatError):
        io.read_stream(p)
    p.write_text("A,1\n")
    with pytest.raises(io.DataFormatError):
        io.read_stream(p)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    io.atomic_write(tmp_path / "a.txt", "one")
    io.atomic_write(tmp_path / "a.txt", "two")
    assert (tmp_path / "a.txt").read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]


def test_config_file_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nk_mhz = 440   # trailing\n\ngamma20_mhz=6.1\n")
    assert io.read_config(p) == {"k_mhz": "440", "gamma20_mhz": "6.1"}
    p.write_text("k_mhz = 1\nk_mhz = 2\n")
    with pytest.raises(io.DataFormatError):
        io.read_config(p)


# --- config resolution -----------------------------------------------------------

def test_flags_override_file_and_unknown_keys_rejected():
    cfg = resolve_config("simulate", {"output": "a", "seed": "3"}, {"seed": "5"})
    assert cfg["seed"] == 5 and cfg["output"] == "a" and cfg["k_mhz"] == 440.0
    with pytest.raises(ConfigError, match="unknown"):
        resolve_config("simulate", {"output": "a", "colour": "red"})
    with pytest.raises(ConfigError, match="missing"):
        resolve_config("fit yield", {"r_inf_cps": "75000"})
    with pytest.raises(ConfigError):
        resolve_config("simulate", {"output": "a", "efficiency": "1.5"})
    with pytest.raises(ConfigError):
        resolve_config("simulate", {"output": "a", "k_mhz": "-1"})


def test_every_schema_key_has_a_flag():
    from photonstat.cli import build_parser
    parser = build_parser()
    for command, schema in SCHEMAS.items():
        argv = command.split() + ["--help"]
        with pytest.raises(SystemExit):
            parser.parse_args(argv)
        assert schema


# --- commands --------------------------------------------------------------------

def test_simulate_deterministic_and_echoes_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("duration_s = 0.002\nseed = 42\nefficiency = 0.5\ndelay_ns = 20\n")
    for name in ("a.txt", "b.txt"):
        code, out = run("simulate", "-c", cfg, "--output", tmp_path / name)
        assert code == EXIT_OK and "channel A" in out
    a, b = (tmp_path / "a.txt").read_bytes(), (tmp_path / "b.txt").read_bytes()
    assert a == b
    s = io.read_stream(tmp_path / "a.txt")
    assert s.metadata["seed"] == 42 and s.metadata["generator"] == "numpy.random.Philox"
    assert s.metadata["efficiency"] == 0.5 and s.metadata["delay_ns"] == 20.0
    code, _ = run("simulate", "-c", cfg, "--output", tmp_path / "c.txt", "--seed", 43)
    assert (tmp_path / "c.txt").read_bytes() != a


def test_simulate_errors(tmp_path):
    assert run("simulate", "--output", tmp_path / "x.txt", "--duration_s", 0)[0] == EXIT_USAGE
    assert run("simulate", "--output", tmp_path / "x.txt", "--nonsense", 1)[0] == EXIT_USAGE
    assert run("simulate")[0] == EXIT_USAGE
    assert run("simulate", "-c", tmp_path / "missing.cfg", "--output", "x")[0] == EXIT_USAGE
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert run("simulate", "-c", bad, "--output", tmp_path / "x.txt")[0] == EXIT_USAGE
    code, _ = run("simulate", "--output", tmp_path / "no" / "dir" / "x.txt", "--duration_s", 1e-4)
    assert code == EXIT_DATA


def test_correlate_dip_at_delay_and_fit(tmp_path):
    s = tmp_path / "s.txt"
    assert run("simulate", "--output", s, "--duration_s", 0.02, "--seed", 9, "--delay_ns", 50)[0] == 0
    h = tmp_path / "h.csv"
    code, out = run("correlate", "--input", s, "--output", h)
    assert code == EXIT_OK
    hist = io.read_histogram(h)
    assert hist.metadata["center_ns"] == 50.0
    assert hist.centers[np.argmin(hist.g2)] == pytest.approx(50e-9, abs=0.5e-9)
    rep = tmp_path / "fit.txt"
    code, out = run("fit", "g2", "--input", h, "--report", rep)
    assert code == EXIT_OK and "gamma12" in out
    r = read_report(rep)
    assert float(r["gamma12_mhz"]) == pytest.approx(17.0, rel=0.1)
    assert float(r["gamma20_mhz"]) == pytest.approx(6.1, rel=0.1)
    assert r["converged"] == "true"


def test_correlate_modes_agree_at_low_rate(tmp_path):
    s = tmp_path / "s.txt"
    run("simulate", "--output", s, "--duration_s", 0.05, "--seed", 4, "--efficiency", 0.02,
        "--delay_ns", 50)
    run("correlate", "--input", s, "--output", tmp_path / "f.csv", "--mode", "full",
        "--bin_ns", 5, "--max_delay_ns", 100, "--center_ns", 100)
    run("correlate", "--input", s, "--output", tmp_path / "ss.csv", "--mode", "startstop",
        "--bin_ns", 5, "--stop_range_ns", 200, "--center_ns", 0)
    f, ss = io.read_histogram(tmp_path / "f.csv"), io.read_histogram(tmp_path / "ss.csv")
    assert np.allclose(f.edges, ss.edges)
    assert np.all(np.abs(f.counts - ss.counts) <= 3 * np.sqrt(np.maximum(f.counts, 1)))


def test_correlate_empty_input(tmp_path):
    p = tmp_path / "empty.txt"
    io.write_stream(p, PhotonStream(np.empty(0, np.int64), np.empty(0, np.uint8), 1.0))
    assert run("correlate", "--input", p, "--output", tmp_path / "h.csv")[0] == EXIT_DATA
    assert run("correlate", "--input", tmp_path / "nope.txt", "--output", tmp_path / "h.csv")[0] == EXIT_DATA
    assert not (tmp_path / "h.csv").exists()


def test_fit_yield_table1(tmp_path):
    rep = tmp_path / "y.txt"
    code, out = run("fit", "yield", "--r_inf_cps", 75000, "--efficiency", 0.005, "--report", rep)
    assert code == EXIT_OK
    assert float(read_report(rep)["quantum_yield"]) == pytest.approx(0.7, abs=0.015)


def test_fit_dw_synthetic(tmp_path):
    sp = synthetic_spectrum(0.7)
    io.write_columns(tmp_path / "spec.csv", {"wavelength_nm": sp.wavelength, "intensity": sp.intensity})
    rep = tmp_path / "dw.txt"
    code, _ = run("fit", "dw", "--input", tmp_path / "spec.csv", "--zpl_lo_nm", 798,
                  "--zpl_hi_nm", 806, "--report", rep)
    assert code == EXIT_OK
    assert float(read_report(rep)["debye_waller"]) == pytest.approx(0.70, abs=0.01)
    assert run("fit", "dw", "--input", tmp_path / "spec.csv", "--zpl_lo_nm", 798)[0] == EXIT_USAGE


def test_fit_saturation_and_lifetime(tmp_path):
    d = synthetic_saturation()
    io.write_columns(tmp_path / "sat.csv", {"power": d.power, "rate": d.rate})
    rep = tmp_path / "s.txt"
    assert run("fit", "saturation", "--input", tmp_path / "sat.csv", "--report", rep)[0] == EXIT_OK
    assert float(read_report(rep)["r_inf"]) == pytest.approx(75000, rel=1e-6)

    dec = synthetic_decay()
    io.write_columns(tmp_path / "dec.csv", {"time_ns": dec.times * 1e9, "counts": dec.counts})
    rep = tmp_path / "l.txt"
    assert run("fit", "lifetime", "--input", tmp_path / "dec.csv", "--report", rep)[0] == EXIT_OK
    assert float(read_report(rep)["tau_ns"]) == pytest.approx(11.5, rel=1e-6)

    io.write_columns(tmp_path / "short.csv", {"power": [1.0, 2.0], "rate": [1.0, 2.0]})
    assert run("fit", "saturation", "--input", tmp_path / "short.csv")[0] == EXIT_DATA
    (tmp_path / "junk.csv").write_text("power,rate\n1,abc\n")
    assert run("fit", "saturation", "--input", tmp_path / "junk.csv")[0] == EXIT_DATA


def test_fit_nonconvergence_exit_code(tmp_path, monkeypatch):
    from photonstat import analysis
    d = synthetic_saturation()
    io.write_columns(tmp_path / "sat.csv", {"power": d.power, "rate": d.rate})
    # a poor start with a tiny evaluation budget cannot converge
    monkeypatch.setattr(analysis, "_saturation_guess", lambda I, R: (1.0, 1e3))
    monkeypatch.setattr(analysis, "MAX_ITER", 1)
    code, out = run("fit", "saturation", "--input", tmp_path / "sat.csv")
    assert code == EXIT_FIT and "NOT converged" in out


def test_model_commands(tmp_path):
    code, _ = run("model", "g2", "--output", tmp_path / "g.csv", "--t_max_ns", 2000,
                  "--svg", tmp_path / "g.svg")
    assert code == EXIT_OK
    cols, meta = io.read_columns(tmp_path / "g.csv", ("t_ns", "g2"))
    assert cols["g2"][0] == 0.0 and abs(cols["g2"][-1] - 1) < 1e-6
    assert meta["gamma12_mhz"] == 17.0
    assert (tmp_path / "g.svg").read_text().lstrip().startswith("<?xml")

    run("model", "g2", "--output", tmp_path / "two.csv", "--gamma12_mhz", 0)
    cols, _ = io.read_columns(tmp_path / "two.csv", ("t_ns", "g2"))
    assert np.all(cols["g2"] <= 1 + 1e-12)

    run("model", "saturation", "--output", tmp_path / "s.csv", "--r_inf_cps", 75000, "--i_s", 2,
        "--n_points", 11, "--i_max", 10)
    cols, _ = io.read_columns(tmp_path / "s.csv", ("power", "rate"))
    assert cols["rate"][cols["power"] == 2.0][0] == pytest.approx(37500)

    run("model", "populations", "--output", tmp_path / "p.csv")
    cols, _ = io.read_columns(tmp_path / "p.csv", ("t_ns", "rho0", "rho1", "rho2"))
    total = cols["rho0"] + cols["rho1"] + cols["rho2"]
    assert np.allclose(total, 1, atol=1e-12) and cols["rho0"][0] == 1.0

    assert run("model", "g2", "--output", tmp_path / "o.csv", "--k_mhz", 10,
               "--gamma12_mhz", 100, "--gamma20_mhz", 207)[0] == EXIT_USAGE


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PHOTONSTAT_THREADS", "zero")
    assert run("model", "g2", "--output", tmp_path / "g.csv")[0] == EXIT_USAGE
    monkeypatch.setenv("PHOTONSTAT_THREADS", "1")
    assert run("model", "g2", "--output", tmp_path / "g.csv")[0] == EXIT_OK


def test_unwritable_report_is_a_data_error(tmp_path):
    code, _ = run("fit", "yield", "--r_inf_cps", 75000, "--efficiency", 0.005,
                  "--report", tmp_path / "missing" / "r.txt")
    assert code == EXIT_DATA
