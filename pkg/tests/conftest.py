from pathlib import Path

import numpy as np
import pytest

from audioleak.model import DeviceAddress, DeviceTrace, seconds_to_us

DATA = Path(__file__).parent / "data"

DEV_A = DeviceAddress.parse("02:00:00:00:00:0a", "192.168.1.10")
DEV_B = DeviceAddress.parse("02:00:00:00:00:0b", "192.168.1.20")


def make_trace(times, sizes, outbound=None, span=None, device=DEV_A) -> DeviceTrace:
    """Trace from seconds and sizes; all packets outbound unless given."""
    t = [seconds_to_us(x) for x in times]
    o = [True] * len(t) if outbound is None else list(outbound)
    if span is None:
        span = (min(times), max(times)) if len(times) else (0.0, 0.0)
    return DeviceTrace(device, t, list(sizes), o, seconds_to_us(span[0]), seconds_to_us(span[1]))


def constant_rate_trace(rate_bps: float, start: float, end: float, pkt_size: int = 100, device=DEV_A,
                        span=None) -> DeviceTrace:
    """Evenly spaced packets carrying `rate_bps` between start and end."""
    pps = rate_bps / 8 / pkt_size
    n = int(round((end - start) * pps))
    times = start + (np.arange(n) + 0.5) / pps
    return make_trace(times.tolist(), [pkt_size] * n, span=span or (start, end), device=device)


@pytest.fixture
def data_dir() -> Path:
    return DATA


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Log one acceptance line (echoed in the terminal summary) and fail the test if not ok."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
