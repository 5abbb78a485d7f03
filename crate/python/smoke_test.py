"""Smoke test for the evkit_py extension module.

Build and run from the repository root:

    cargo build --release -p evkit-python --features extension-module
    cp target/release/libevkit_py.so python/evkit_py.so
    cargo build --release -p evkit-cli
    python3 python/smoke_test.py

The CLI comparison is skipped when target/release/evkit is missing.
"""

import os
import subprocess
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import evkit_py  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CLI = os.path.join(ROOT, "target", "release", "evkit")


def events_as_arrays(cols):
    t, x, y, p, width, height = cols
    return (
        np.frombuffer(t, dtype="<u8"),
        np.frombuffer(x, dtype="<u2"),
        np.frombuffer(y, dtype="<u2"),
        np.frombuffer(p, dtype="i1"),
        width,
        height,
    )


def moving_bar(width=32, height=24, frames=6):
    stack = np.full((frames, height, width), 30, dtype=np.uint8)
    for k in range(frames):
        stack[k, :, 4 + 3 * k : 8 + 3 * k] = 220
    return stack


def write_pgm(path, frame):
    h, w = frame.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(frame.tobytes())


def read_ppm_planar(path):
    with open(path, "rb") as f:
        data = f.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    w, h = int(fields[1]), int(fields[2])
    rgb = np.frombuffer(data[pos + 1 :], dtype=np.uint8).reshape(h, w, 3)
    return rgb.transpose(2, 0, 1)


def main():
    assert evkit_py.__version__

    stack = moving_bar()
    times = [k * 33_333 for k in range(stack.shape[0])]
    ideal = {"sigma_threshold": 0.0, "cutoff_hz": 0.0}
    t, x, y, p, w, h = events_as_arrays(evkit_py.emulate(stack.tobytes(), 32, 24, times, ideal))
    assert (w, h) == (32, 24)
    assert len(t) > 0 and np.all(np.diff(t.astype(np.int64)) >= 0)
    assert set(np.unique(p)) <= {-1, 1}
    print(f"emulate: {len(t)} events, {int((p > 0).sum())} positive")

    still = np.full((2, 24, 32), 90, dtype=np.uint8)
    assert len(evkit_py.emulate(still.tobytes(), 32, 24, [0, 33_333])[0]) == 0

    try:
        evkit_py.emulate(stack.tobytes(), 32, 24, times, {"bogus": 1})
    except ValueError:
        pass
    else:
        raise AssertionError("unknown option accepted")

    with tempfile.TemporaryDirectory() as tmp:
        frames_dir = os.path.join(tmp, "frames")
        os.makedirs(frames_dir)
        for k, frame in enumerate(stack):
            write_pgm(os.path.join(frames_dir, f"{k:03}.pgm"), frame)
        events_path = os.path.join(tmp, "bar.evst")

        if os.path.exists(CLI):
            subprocess.run([CLI, "emulate", "--frames", frames_dir, "--out", events_path], check=True, capture_output=True)
            cols = events_as_arrays(evkit_py.load_events(events_path))
            default = events_as_arrays(evkit_py.emulate(stack.tobytes(), 32, 24, times))
            for a, b in zip(cols[:4], default[:4]):
                assert np.array_equal(a, b), "load_events disagrees with emulate"

            data, shape = evkit_py.tie(events_path, "tht", 9)
            images = np.frombuffer(data, dtype=np.uint8).reshape(shape)
            ppm = os.path.join(tmp, "bar.ppm")
            subprocess.run([CLI, "represent", "--events", events_path, "--out", ppm], check=True, capture_output=True)
            assert np.array_equal(images[0], read_ppm_planar(ppm)), "tie disagrees with evkit represent"
            print(f"tie: shape {shape}, matches CLI")

            data, shape = evkit_py.tie(events_path, "tt", 9, 100_000, 3)
            assert shape[0] == 6 and shape[1:] == (3, 24, 32)
        else:
            print("CLI binary not built; skipping cross-interface checks")

        try:
            evkit_py.tie(events_path, "ht", 9)
        except (ValueError, OSError):
            pass
        else:
            raise AssertionError("bad variant accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
