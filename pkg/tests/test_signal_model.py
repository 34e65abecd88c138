"""Waveform record and CSV round-trip tests."""

import numpy as np
import pytest

from awapd.errors import MalformedInput
from awapd.signal_model import PdClass, Waveform, read_waveform_csv, write_waveform_csv


def test_read_plain_csv(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0\n1e-6,1\n2e-6,0\n")
    w = read_waveform_csv(p)
    assert np.array_equal(w.times, [0, 1e-6, 2e-6])
    assert np.array_equal(w.values, [0, 1, 0])


def test_read_with_header(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("time,amplitude\n0,0\n1e-6,1\n2e-6,0\n")
    w = read_waveform_csv(p)
    assert np.array_equal(w.times, [0, 1e-6, 2e-6])
    assert np.array_equal(w.values, [0, 1, 0])


def test_extra_columns_ignored(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0,99\n1e-6,1,99\n")
    w = read_waveform_csv(p)
    assert np.array_equal(w.values, [0, 1])


def test_crlf_accepted(tmp_path):
    p = tmp_path / "w.csv"
    p.write_bytes(b"0,0\r\n1e-6,1\r\n2e-6,0\r\n")
    w = read_waveform_csv(p)
    assert len(w) == 3


def test_non_monotone_time_rejected(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("1e-6,1\n0,0\n")
    with pytest.raises(MalformedInput):
        read_waveform_csv(p)


def test_nan_rejected(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0\n1e-6,nan\n2e-6,0\n")
    with pytest.raises(MalformedInput):
        read_waveform_csv(p)


def test_inf_rejected(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0\n1e-6,inf\n")
    with pytest.raises(MalformedInput):
        read_waveform_csv(p)


def test_too_few_rows_rejected(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0\n")
    with pytest.raises(MalformedInput):
        read_waveform_csv(p)


def test_mid_file_garbage_rejected(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0\nbroken,row\n2e-6,0\n")
    with pytest.raises(MalformedInput):
        read_waveform_csv(p)


def test_duplicate_timestamp_rejected(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("0,0\n0,1\n1e-6,0\n")
    with pytest.raises(MalformedInput):
        read_waveform_csv(p)


def test_roundtrip_small(tmp_path):
    w = Waveform(times=[0.0, 1e-6, 2e-6], values=[0.0, 1.0, 0.0])
    p = tmp_path / "w.csv"
    write_waveform_csv(w, p)
    w2 = read_waveform_csv(p)
    assert np.array_equal(w.times, w2.times)
    assert np.array_equal(w.values, w2.values)


def test_roundtrip_random_10k(tmp_path):
    rng = np.random.default_rng(7)
    times = np.cumsum(rng.uniform(1e-9, 1e-6, 10_000))
    values = rng.normal(0, 1, 10_000)
    w = Waveform(times=times, values=values)
    p = tmp_path / "w.csv"
    write_waveform_csv(w, p)
    w2 = read_waveform_csv(p)
    assert np.array_equal(w.times, w2.times)  # bit-exact
    assert np.array_equal(w.values, w2.values)


def test_write_unwritable_path_raises_oserror(tmp_path):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("file, not directory")
    w = Waveform(times=[0.0, 1.0], values=[0.0, 1.0])
    with pytest.raises(OSError):
        write_waveform_csv(w, blocker / "w.csv")


def test_waveform_invariants():
    with pytest.raises(MalformedInput):
        Waveform(times=[0.0], values=[1.0])
    with pytest.raises(MalformedInput):
        Waveform(times=[0.0, 1.0], values=[1.0])
    with pytest.raises(MalformedInput):
        Waveform(times=[1.0, 0.0], values=[0.0, 1.0])
    with pytest.raises(MalformedInput):
        Waveform(times=[0.0, 1.0], values=[np.inf, 0.0])


def test_pdclass_canonical_order():
    order = [PdClass.C, PdClass.I, PdClass.S, PdClass.CI, PdClass.CS, PdClass.SI]
    assert sorted(reversed(order)) == order
    assert len(PdClass) == 6


def test_pdclass_constituents():
    assert PdClass.C.constituents == (PdClass.C,)
    assert PdClass.CI.constituents == (PdClass.C, PdClass.I)
    assert PdClass.CS.constituents == (PdClass.C, PdClass.S)
    assert PdClass.SI.constituents == (PdClass.I, PdClass.S)
    assert not PdClass.S.is_mixed and PdClass.SI.is_mixed
