import struct
import zlib

import h5py
import numpy as np
import pytest

from shd_to_spke import convert, encode


def ragged(rows):
    out = np.empty(len(rows), dtype=object)
    out[:] = rows
    return out


def write_shd(path, times, units, labels):
    with h5py.File(path, "w") as f:
        g = f.create_group("spikes")
        g.create_dataset("times", data=ragged(times), dtype=h5py.vlen_dtype(np.float32))
        g.create_dataset("units", data=ragged(units), dtype=h5py.vlen_dtype(np.uint16))
        f.create_dataset("labels", data=np.array(labels, dtype=np.uint16))


def test_layout_and_checksum(tmp_path):
    h5 = tmp_path / "tiny.h5"
    write_shd(h5, [np.array([0.002, 0.001]), np.array([0.5])], [np.array([3, 1]), np.array([0])], [1, 0])
    samples, dropped = convert(h5, channels=4, classes=2)
    blob = encode(samples, 4, 2)
    assert dropped == 0
    assert blob[:4] == b"SPKE"
    assert struct.unpack_from("<HIIQ", blob, 4) == (1, 4, 2, 2)
    label, duration, count = struct.unpack_from("<HQQ", blob, 22)
    assert (label, duration, count) == (1, 2001, 2)
    # sorted by time
    assert struct.unpack_from("<QIQI", blob, 40) == (1000, 1, 2000, 3)
    assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(blob[:-4])


def test_fixed_duration_drops_late_events(tmp_path):
    h5 = tmp_path / "tiny.h5"
    write_shd(h5, [np.array([0.001, 0.9])], [np.array([0, 1])], [0])
    samples, dropped = convert(h5, channels=2, classes=1, duration_us=500_000)
    assert dropped == 1
    assert samples[0][1] == 500_000


def test_rejects_out_of_range_channel(tmp_path):
    h5 = tmp_path / "tiny.h5"
    write_shd(h5, [np.array([0.001])], [np.array([9])], [0])
    with pytest.raises(ValueError):
        convert(h5, channels=4, classes=1)
