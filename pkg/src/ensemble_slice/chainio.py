"""Chain files: one JSON header line followed by raw little-endian float64 samples.

Samples are written iteration-major, walker-minor, dimension innermost, i.e.
``samples[t, k, i]`` in C order for an array of shape (T, N, D).
"""

import csv
import hashlib
import json

import numpy as np

__all__ = ["CHAIN_VERSION", "write_chain", "read_chain", "export_csv", "git_blob_sha1",
           "histogram"]

CHAIN_VERSION = 1
_DTYPE = np.dtype("<f8")


def write_chain(path, samples, *, seed, move, target_id, mu_final=None, extra=None):
    samples = np.ascontiguousarray(samples, dtype=_DTYPE)
    if samples.ndim != 3:
        raise ValueError("samples must have shape (iterations, walkers, dim)")
    t, n, d = samples.shape
    header = {
        "version": CHAIN_VERSION,
        "dim": d,
        "n_walkers": n,
        "n_iterations": t,
        "seed": int(seed),
        "move": move,
        "target-id": target_id,
        "mu_final": None if mu_final is None else float(mu_final),
    }
    if extra:
        header.update(extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(samples.tobytes())
    return header


def read_chain(path):
    """Return ``(header, samples)`` with samples shaped (T, N, D)."""
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed chain header") from exc
        data = fh.read()
    shape = (header["n_iterations"], header["n_walkers"], header["dim"])
    expected = int(np.prod(shape)) * _DTYPE.itemsize
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes of samples, found {len(data)}")
    return header, np.frombuffer(data, dtype=_DTYPE).reshape(shape).astype(float)


def export_csv(samples, path):
    """One row per sample: iteration, walker, x_0 .. x_{D-1}."""
    samples = np.asarray(samples, dtype=float)
    t, n, d = samples.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "walker"] + [f"x_{i}" for i in range(d)])
        for it in range(t):
            for k in range(n):
                w.writerow([it, k] + [repr(float(v)) for v in samples[it, k]])


def git_blob_sha1(path):
    """Content hash as computed by ``git hash-object``."""
    with open(path, "rb") as fh:
        data = fh.read()
    h = hashlib.sha1(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def histogram(values, n_bins=50, value_range=None):
    """Normalized histogram: ``(edges, masses)`` with masses summing to 1.

    A constant series gets a single bin of unit width centred on the value
    when no range is given.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("no samples")
    if value_range is None:
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        value_range = (lo, hi)
    counts, edges = np.histogram(values, bins=n_bins, range=value_range)
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples fall inside the histogram range")
    return edges, counts / total
