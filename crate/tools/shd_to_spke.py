#!/usr/bin/env python3
"""Convert a Spiking Heidelberg Digits HDF5 file into the SPKE event container.

SHD layout: /spikes/times (ragged float seconds), /spikes/units (ragged
channel ids), /labels. Output layout (little-endian): "SPKE", u16 version 1,
u32 channels, u32 classes, u64 samples, then per sample u16 label,
u64 duration_us, u64 event count, (u64 time_us, u32 channel) per event,
then a CRC32 of everything before it.

    python tools/shd_to_spke.py shd_train.h5 shd_train.spke
"""

import argparse
import struct
import sys
import zlib

import h5py
import numpy as np

MAGIC = b"SPKE"
VERSION = 1


def encode(samples, channels, classes):
    """samples: iterable of (label, duration_us, times_us, units)."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HIIQ", VERSION, channels, classes, len(samples))
    for label, duration, times, units in samples:
        out += struct.pack("<HQQ", label, duration, len(times))
        events = np.empty(len(times), dtype=[("t", "<u8"), ("c", "<u4")])
        events["t"] = times
        events["c"] = units
        out += events.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def convert(path, channels, classes, duration_us=None):
    with h5py.File(path, "r") as f:
        times = f["spikes"]["times"][:]
        units = f["spikes"]["units"][:]
        labels = np.asarray(f["labels"][:])
    samples = []
    dropped = 0
    for t, u, label in zip(times, units, labels):
        t_us = np.rint(np.asarray(t, dtype=np.float64) * 1e6).astype(np.uint64)
        u = np.asarray(u, dtype=np.uint32)
        order = np.argsort(t_us, kind="stable")
        t_us, u = t_us[order], u[order]
        if duration_us is None:
            duration = int(t_us[-1]) + 1 if len(t_us) else 1
        else:
            keep = t_us < duration_us
            dropped += int((~keep).sum())
            t_us, u = t_us[keep], u[keep]
            duration = duration_us
        if len(u) and int(u.max()) >= channels:
            raise ValueError(f"channel {int(u.max())} >= {channels}")
        if int(label) >= classes:
            raise ValueError(f"label {int(label)} >= {classes}")
        samples.append((int(label), duration, t_us, u))
    return samples, dropped


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("input", help="SHD .h5 file")
    p.add_argument("output", help="destination .spke file")
    p.add_argument("--channels", type=int, default=700)
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--duration-us", type=int, default=None,
                   help="fixed sample duration; later events are dropped (default: last event + 1 us)")
    args = p.parse_args(argv)
    samples, dropped = convert(args.input, args.channels, args.classes, args.duration_us)
    with open(args.output, "wb") as f:
        f.write(encode(samples, args.channels, args.classes))
    print(f"{len(samples)} samples written to {args.output}; {dropped} events dropped", file=sys.stderr)


if __name__ == "__main__":
    main()
