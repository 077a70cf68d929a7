import math

import numpy as np

from hydrostat.kde import Kde1, mode1
from hydrostat.stiv import SearchLine, line_velocities


def stripe_sti(angle, shape=(64, 64), period=9.0, contrast=40.0):
    """Sinusoidal streaks at ``angle`` from the time axis: I(t, k) = f(k - t tan(angle))."""
    t, k = np.mgrid[0 : shape[0], 0 : shape[1]].astype(float)
    return 128.0 + contrast * np.sin(2 * math.pi * (k - t * math.tan(angle)) / period)


def row_lines(seq, u0=16, length=64, direction=(1.0, 0.0)):
    """One search line per frame row, running along +u from column ``u0``."""
    _, h, _ = seq.shape
    return [SearchLine((float(u0), float(r)), direction, length, r) for r in range(h)]


def velocity_mode(seq, lines, **kw):
    """Weighted KDE mode of every velocity sample from ``lines``."""
    res = line_velocities(seq, lines, **kw)
    v = np.array([s.v for s in res.samples])
    w = np.array([s.weight for s in res.samples])
    return mode1(Kde1(v, w)).mode, len(v)


# acceptance criteria report their verdict here; printed after the run
ACCEPTANCE_LINES = []


def report(number, title, ok, detail, elapsed, limit):
    in_time = elapsed < limit
    verdict = "PASS" if ok and in_time else "FAIL"
    line = f"[{verdict}] criterion {number:>2}: {title} -- {detail}; {elapsed:.2f}s (limit {limit:g}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok and in_time


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
